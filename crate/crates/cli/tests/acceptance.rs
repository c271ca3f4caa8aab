//! Acceptance criteria, one PASS/FAIL line each. Runs without the libtest
//! harness so the lines show up in plain `cargo test` output.

use std::time::{Duration, Instant};

use around_cli::{cmd_run, Format, RunArgs};
use around_core::checks::{closed_form_suite, lu_support_suite, marginal_utility_divergence, mixture_suite, ratio_suite};
use around_core::compare::DIFFERENTIATION_THRESHOLD;
use around_core::reproduce::{find, reproduce_tables, worked_example, TableCheck};
use around_core::semantics::{uniform_around_posterior, uniform_around_posterior_exact, Message};
use around_core::{paper_scenario, run_recursion, Exec};

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        pass,
        detail: detail.into(),
    }
}

fn gcd(a: u64, b: u64) -> u64 {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

/// (n - |n - k| + 1) / (n + 1)^2, reduced, rendered the way a big rational
/// prints.
fn closed_form_text(n: u64, k: u64) -> (String, f64) {
    let num = n - n.abs_diff(k) + 1;
    let den = (n + 1) * (n + 1);
    let g = gcd(num, den);
    let text = if den / g == 1 {
        format!("{}", num / g)
    } else {
        format!("{}/{}", num / g, den / g)
    };
    (text, num as f64 / den as f64)
}

fn closed_form() -> Outcome {
    let mut worst = 0.0f64;
    let mut exact_ok = true;
    for n in 1..=40u32 {
        let exact = uniform_around_posterior_exact(n);
        let float = uniform_around_posterior(n).expect("posterior");
        for k in 0..=2 * n as u64 {
            let (text, value) = closed_form_text(n as u64, k);
            exact_ok &= exact[k as usize].to_string() == text;
            worst = worst.max((float.mass()[k as usize] - value).abs());
        }
    }
    let suite = closed_form_suite(40, Exec::default()).expect("suite");
    let pass = exact_ok && worst <= 1e-12 && suite.iter().all(|s| s.pass());
    outcome(pass, format!("n=1..40 exact {exact_ok}, float max deviation {worst:.2e}"))
}

fn kl(p: &[f64], q: &[f64]) -> f64 {
    p.iter()
        .zip(q)
        .filter(|(p, _)| **p > 0.0)
        .map(|(p, q)| p * (p / q).ln())
        .sum()
}

fn table_line(t: &TableCheck) -> String {
    format!("{} worst {:.4}", t.id, t.worst)
}

fn worked() -> Outcome {
    let tables = reproduce_tables().expect("tables");
    let t2 = find(&tables, "table-2").expect("table-2");
    let (p_o, between, around) = worked_example().expect("worked example");
    let kl_around = kl(p_o.mass(), around.mass());
    let kl_between = kl(p_o.mass(), between.mass());
    let kl_ok = (kl_around - 0.65).abs() <= 0.005 && (kl_between - 0.89).abs() <= 0.005;
    let kl_check = find(&tables, "kl").expect("kl");
    outcome(
        t2.pass && kl_check.pass && kl_ok && -kl_around > -kl_between,
        format!("{}, KL around {kl_around:.4}, between {kl_between:.4}", table_line(t2)),
    )
}

fn tables(ids: &[&str]) -> (bool, String) {
    let tables = reproduce_tables().expect("tables");
    let picked: Vec<&TableCheck> = ids.iter().map(|id| find(&tables, id).expect("table id")).collect();
    (
        picked.iter().all(|t| t.pass),
        picked.iter().map(|t| table_line(t)).collect::<Vec<_>>().join(", "),
    )
}

fn construction() -> Outcome {
    let (pass, detail) = tables(&["table-3", "table-4", "table-5", "table-6"]);
    outcome(pass, detail)
}

fn recursion() -> Outcome {
    let (pass, detail) = tables(&["table-7", "table-8", "table-9", "table-10", "table-11"]);
    let scn = paper_scenario();
    let trace = run_recursion(&scn, 5).expect("recursion");
    let around = scn.messages.iter().position(|m| *m == Message::around(4)).expect("around 4");
    let cell = |level: usize, obs: &str| trace.speaker(level).row_by_label(obs).expect("observation")[around];
    let headline = [
        (1, "p_1_7", 0.66),
        (1, "p_0_8", 0.86),
        (5, "p_2_6", 0.57),
        (5, "p_1_7", 0.94),
        (5, "p_0_8", 0.99),
    ];
    let mut cells = Vec::new();
    let mut ok = true;
    for (level, obs, want) in headline {
        let got = cell(level, obs);
        ok &= ((got * 100.0).round() / 100.0 - want).abs() <= 0.01 + 1e-12;
        cells.push(format!("S{level}({obs})={got:.3}"));
    }
    outcome(pass && ok, format!("{detail}; {}", cells.join(" ")))
}

fn ratio() -> Outcome {
    let [around, between, alt] = ratio_suite(1000, 0, Exec::default()).expect("suite");
    outcome(
        around.pass() && between.pass() && around.trials >= 1000,
        format!(
            "{} trials, {}/{} strict, min margin {:.3e}; between control max deviation {:.2e}; alt listener {}/{}",
            around.trials, around.passed, around.cases, around.worst, between.worst, alt.passed, alt.cases
        ),
    )
}

fn lu_support() -> (Outcome, Outcome) {
    let [support, shift, zeros] = lu_support_suite(Exec::default()).expect("suite");
    let scn = paper_scenario();
    let trace = run_recursion(&scn, 1).expect("recursion");
    let around = scn.messages.iter().position(|m| *m == Message::around(4)).expect("around 4");
    let u = trace.speaker(1).row_by_label("u_1_7").expect("u_1_7")[around];
    let p = trace.speaker(1).row_by_label("p_1_7").expect("p_1_7")[around];
    let six = outcome(
        support.pass() && zeros.pass() && (p - u) >= 0.4,
        format!(
            "lambda 1/10/100, zero and varied cost: max row diff {:.2e} over {} cases; main S1 around 4: u_1_7 {u:.3} vs p_1_7 {p:.3}",
            support.worst, support.cases
        ),
    );
    let seven = outcome(
        shift.pass() && shift.worst <= 1e-9,
        format!("utility shift spread {:.2e} over {} pairs", shift.worst, shift.cases),
    );
    (six, seven)
}

fn mixture() -> Outcome {
    let r = mixture_suite(500, 0, Exec::default()).expect("suite");
    outcome(
        r.pass() && r.trials >= 500 && r.worst <= 1e-12,
        format!("{} trials, max deviation {:.2e}", r.trials, r.worst),
    )
}

fn marginal_variant() -> Outcome {
    let pairs = marginal_utility_divergence(100.0, Exec::default()).expect("divergence");
    let mut differing = 0;
    let mut parts = Vec::new();
    for (a, b, d) in &pairs {
        let max = d.iter().cloned().fold(0.0, f64::max);
        if max > DIFFERENTIATION_THRESHOLD {
            differing += 1;
        }
        parts.push(format!("{a}/{b} {max:.2e}"));
    }
    outcome(
        differing >= 1,
        format!("lambda 100: {differing}/{} pairs differ ({})", pairs.len(), parts.join(", ")),
    )
}

fn determinism() -> Outcome {
    let path = std::path::PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../scenarios/paper.toml");
    let mut outputs = Vec::new();
    for format in [Format::Table, Format::Csv, Format::Json] {
        let mut a = Vec::new();
        let mut b = Vec::new();
        for buf in [&mut a, &mut b] {
            let args = RunArgs {
                scenario: path.clone(),
                depth: None,
                model: None,
                format,
                out: None,
            };
            cmd_run(&args, buf).expect("run");
        }
        outputs.push((a.len(), a == b));
    }
    outcome(
        outputs.iter().all(|(len, same)| *same && *len > 0),
        format!("table/csv/json byte-identical: {:?}", outputs.iter().map(|o| o.1).collect::<Vec<_>>()),
    )
}

fn timed(f: impl FnOnce() -> Outcome) -> (Outcome, Duration) {
    let start = Instant::now();
    let o = f();
    (o, start.elapsed())
}

fn main() {
    let mut results: Vec<(u32, &str, Outcome, Duration, Option<Duration>)> = Vec::new();
    let one_s = Some(Duration::from_secs(1));
    let (o, t) = timed(closed_form);
    results.push((1, "closed-form around posterior", o, t, one_s));
    let (o, t) = timed(worked);
    results.push((2, "worked example", o, t, one_s));
    let (o, t) = timed(construction);
    results.push((3, "scenario construction tables", o, t, one_s));
    let (o, t) = timed(recursion);
    results.push((4, "full recursion tables", o, t, Some(Duration::from_secs(5))));
    let (o, t) = timed(ratio);
    results.push((5, "ratio inequality", o, t, None));
    let start = Instant::now();
    let (six, seven) = lu_support();
    let t = start.elapsed();
    results.push((6, "lexical-uncertainty support", six, t, None));
    results.push((7, "level-1 utility shift", seven, t, None));
    let (o, t) = timed(mixture);
    results.push((8, "posterior mixture identity", o, t, None));
    let (o, t) = timed(marginal_variant);
    results.push((9, "marginal-utility variant", o, t, None));
    let (o, t) = timed(determinism);
    results.push((10, "determinism", o, t, None));

    let mut failures = 0;
    for (id, name, o, t, limit) in &results {
        let in_time = limit.is_none_or(|l| *t < l);
        let pass = o.pass && in_time;
        if !pass {
            failures += 1;
        }
        let budget = limit.map(|l| format!(" (limit {:.0}s)", l.as_secs_f64())).unwrap_or_default();
        println!(
            "criterion {id:>2} {}: {name}: {} [{:.3}s{budget}]",
            if pass { "PASS" } else { "FAIL" },
            o.detail,
            t.as_secs_f64()
        );
    }
    println!("acceptance: {}/{} criteria pass", results.len() - failures, results.len());
    if failures > 0 {
        std::process::exit(1);
    }
}
