//! Seeded property suites. Trial `t` of a suite draws from a ChaCha8 stream
//! seeded with `seed` on stream `t`, so results do not depend on how trials
//! are scheduled across threads.

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::exec::Exec;
use crate::lu::{
    equal_support_pairs, quality_zero_check, run_lu, equal_support_check, utility_shift_check, CostFn, LuError,
    LuVariant,
};
use crate::prob::{FiniteDomain, Pmf};
use crate::real::Extended;
use crate::scenario::paper_scenario;
use crate::semantics::{
    closed_form_uniform_around, ratio_report_at, uniform_around_posterior, uniform_around_posterior_exact, Message,
    RadiusPrior, SemanticsError,
};
use crate::variants::{alt_literal_listener, posterior_mixture_check, MixtureReport};

/// Outcome of one property suite.
#[derive(Debug, Clone, PartialEq)]
pub struct SuiteReport {
    pub name: &'static str,
    pub trials: usize,
    /// Individual assertions evaluated across all trials.
    pub cases: usize,
    pub passed: usize,
    /// Smallest margin seen (for inequalities) or largest deviation (for
    /// identities); see `margin_kind`.
    pub worst: f64,
    pub margin_kind: MarginKind,
    pub worst_case: Option<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MarginKind {
    /// Larger is better; must stay positive.
    MinMargin,
    /// Smaller is better; must stay under the tolerance.
    MaxDeviation,
}

impl SuiteReport {
    pub fn pass(&self) -> bool {
        self.cases > 0 && self.passed == self.cases
    }
}

fn rng_for(seed: u64, trial: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(trial as u64);
    rng
}

fn random_weights(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| rng.gen_range(0.05..1.0)).collect()
}

/// Random full-support x prior, target and radius prior.
struct Instance {
    prior: Pmf,
    radius: RadiusPrior,
    n: i64,
}

fn instance(rng: &mut ChaCha8Rng) -> Instance {
    let hi = rng.gen_range(4..=12);
    let domain = FiniteDomain::new(0, hi).expect("valid domain");
    let prior = Pmf::normalize(domain, &random_weights(rng, domain.len())).expect("positive weights");
    let y_max = rng.gen_range(1..=hi as usize);
    let radius = RadiusPrior::from_weights(&random_weights(rng, y_max + 1)).expect("positive weights");
    let n = rng.gen_range(1..hi);
    Instance { prior, radius, n }
}

/// `(near, far)` pairs on either side of `n` with `far` strictly further out.
fn same_side_pairs(domain: FiniteDomain, n: i64) -> Vec<(i64, i64)> {
    let mut out = Vec::new();
    for near in domain.values() {
        for far in domain.values() {
            let left = far < near && near <= n;
            let right = n <= near && near < far;
            if left || right {
                out.push((near, far));
            }
        }
    }
    out
}

#[derive(Default)]
struct Tally {
    cases: usize,
    passed: usize,
    worst: Option<(f64, String)>,
}

impl Tally {
    fn record(&mut self, ok: bool, value: f64, label: impl FnOnce() -> String, kind: MarginKind) {
        self.cases += 1;
        if ok {
            self.passed += 1;
        }
        let worse = match (&self.worst, kind) {
            (None, _) => true,
            (Some((w, _)), MarginKind::MinMargin) => value < *w,
            (Some((w, _)), MarginKind::MaxDeviation) => value > *w,
        };
        if worse {
            self.worst = Some((value, label()));
        }
    }

    fn merge(&mut self, other: Tally, kind: MarginKind) {
        self.cases += other.cases;
        self.passed += other.passed;
        if let Some((v, l)) = other.worst {
            let worse = match (&self.worst, kind) {
                (None, _) => true,
                (Some((w, _)), MarginKind::MinMargin) => v < *w,
                (Some((w, _)), MarginKind::MaxDeviation) => v > *w,
            };
            if worse {
                self.worst = Some((v, l));
            }
        }
    }

    fn report(self, name: &'static str, trials: usize, kind: MarginKind) -> SuiteReport {
        let (worst, worst_case) = match self.worst {
            Some((v, l)) => (v, Some(l)),
            None => (f64::NAN, None),
        };
        SuiteReport {
            name,
            trials,
            cases: self.cases,
            passed: self.passed,
            worst,
            margin_kind: kind,
            worst_case,
        }
    }
}

pub const BETWEEN_TOLERANCE: f64 = 1e-12;

/// Ratio inequality for the Bayesian listener, the equality control for
/// `between`, and the ratio inequality for the mixture listener.
pub fn ratio_suite(trials: usize, seed: u64, exec: Exec) -> Result<[SuiteReport; 3], SemanticsError> {
    let per_trial = exec.map(trials, |t| -> Result<[Tally; 3], SemanticsError> {
        let mut rng = rng_for(seed, t);
        let Instance { prior, radius, n } = instance(&mut rng);
        let domain = prior.domain();
        let mut around = Tally::default();
        let mut alt = Tally::default();
        let alt_post = alt_literal_listener(n, &prior, &radius)?;
        for (near, far) in same_side_pairs(domain, n) {
            if (n - far).unsigned_abs() > radius.y_max() as u64 {
                continue; // far lies outside every interval
            }
            let r = ratio_report_at(&prior, &radius, &Message::Around(n), near, far)?;
            if !r.strictness_expected {
                continue;
            }
            let label = || format!("trial {t}: around {n}, near {near}, far {far}");
            around.record(r.holds, r.margin(), label, MarginKind::MinMargin);
            let alt_margin = (alt_post.prob(near) / alt_post.prob(far)) / r.prior_ratio - 1.0;
            alt.record(alt_margin > 0.0, alt_margin, label, MarginKind::MinMargin);
        }
        let mut between = Tally::default();
        let a = rng.gen_range(domain.lo()..domain.hi());
        let b = rng.gen_range(a + 1..=domain.hi());
        let m = Message::Between(a, b);
        for near in a..=b {
            for far in a..=b {
                if near == far {
                    continue;
                }
                let r = ratio_report_at(&prior, &radius, &m, near, far)?;
                let dev = r.margin().abs();
                between.record(
                    dev <= BETWEEN_TOLERANCE,
                    dev,
                    || format!("trial {t}: {m}, {near} vs {far}"),
                    MarginKind::MaxDeviation,
                );
            }
        }
        Ok([around, between, alt])
    });
    let mut totals = [Tally::default(), Tally::default(), Tally::default()];
    let kinds = [MarginKind::MinMargin, MarginKind::MaxDeviation, MarginKind::MinMargin];
    for trial in per_trial {
        for ((total, t), kind) in totals.iter_mut().zip(trial?).zip(kinds) {
            total.merge(t, kind);
        }
    }
    let [around, between, alt] = totals;
    Ok([
        around.report("ratio", trials, kinds[0]),
        between.report("between-control", trials, kinds[1]),
        alt.report("alt-ratio", trials, kinds[2]),
    ])
}

/// Posterior-mixture identity on random priors. The x prior may have zeros
/// away from the target.
pub fn mixture_suite(trials: usize, seed: u64, exec: Exec) -> Result<SuiteReport, SemanticsError> {
    let per_trial = exec.map(trials, |t| -> Result<Tally, SemanticsError> {
        let mut rng = rng_for(seed, t);
        let Instance { prior, radius, n } = instance(&mut rng);
        let mut weights = prior.mass().to_vec();
        let target = prior.domain().index_of(n).expect("target in domain");
        for (i, w) in weights.iter_mut().enumerate() {
            if i != target && rng.gen_bool(0.2) {
                *w = 0.0;
            }
        }
        let prior = Pmf::normalize(prior.domain(), &weights)?;
        let report = posterior_mixture_check(n, &prior, &radius)?;
        let mut tally = Tally::default();
        tally.record(
            report.max_deviation <= MixtureReport::TOLERANCE,
            report.max_deviation,
            || format!("trial {t}: around {n} on {}", prior.domain()),
            MarginKind::MaxDeviation,
        );
        Ok(tally)
    });
    let mut total = Tally::default();
    for t in per_trial {
        total.merge(t?, MarginKind::MaxDeviation);
    }
    Ok(total.report("mixture", trials, MarginKind::MaxDeviation))
}

/// Closed form of the uniform around-posterior for `n` in `1..=n_max`:
/// exact in rationals, and within `1e-12` through the floating-point path.
pub fn closed_form_suite(n_max: u32, exec: Exec) -> Result<[SuiteReport; 2], SemanticsError> {
    let per_n = exec.map(n_max as usize, |i| -> Result<(Tally, Tally), SemanticsError> {
        let n = i as u32 + 1;
        let exact = uniform_around_posterior_exact(n);
        let float = uniform_around_posterior(n)?;
        let (mut ex, mut fl) = (Tally::default(), Tally::default());
        for (ki, p) in exact.iter().enumerate() {
            let k = ki as i64;
            let expected = closed_form_uniform_around(n, k)?;
            let ok = *p == expected;
            ex.record(ok, if ok { 0.0 } else { 1.0 }, || format!("n={n}, k={k}"), MarginKind::MaxDeviation);
            let dev = (float.mass()[ki] - num_traits::ToPrimitive::to_f64(&expected).unwrap_or(f64::NAN)).abs();
            fl.record(dev <= 1e-12, dev, || format!("n={n}, k={k}"), MarginKind::MaxDeviation);
        }
        Ok((ex, fl))
    });
    let (mut ex, mut fl) = (Tally::default(), Tally::default());
    for r in per_n {
        let (a, b) = r?;
        ex.merge(a, MarginKind::MaxDeviation);
        fl.merge(b, MarginKind::MaxDeviation);
    }
    Ok([
        ex.report("closed-form-exact", n_max as usize, MarginKind::MaxDeviation),
        fl.report("closed-form-float", n_max as usize, MarginKind::MaxDeviation),
    ])
}

/// Lambdas the equal-support invariance is exercised at.
pub const LU_LAMBDAS: [f64; 3] = [1.0, 10.0, 100.0];

/// A cost function that differs across messages.
pub fn sample_costs(n_messages: usize) -> CostFn {
    CostFn::new((0..n_messages).map(|i| 0.1 * ((i * 7) % 5) as f64 + 0.05).collect()).expect("non-negative")
}

/// Equal-support invariance, level-1 utility shift and zero pattern for the standard
/// lexical-uncertainty model on the reference scenario, over [`LU_LAMBDAS`]
/// with zero and non-zero costs. Runs in extended precision.
pub fn lu_support_suite(exec: Exec) -> Result<[SuiteReport; 3], LuError> {
    let base = paper_scenario();
    let pairs = equal_support_pairs(&base);
    let costs = [
        ("zero cost", CostFn::zero(base.messages.len())),
        ("varied cost", sample_costs(base.messages.len())),
    ];
    let configs: Vec<(f64, usize)> = LU_LAMBDAS
        .iter()
        .flat_map(|l| (0..costs.len()).map(move |c| (*l, c)))
        .collect();
    let runs = exec.map(configs.len(), |ci| {
        let (lambda, c) = configs[ci];
        let scn = base.clone().with_lambda(lambda);
        run_lu::<Extended>(&scn, 5, &costs[c].1, LuVariant::Standard, Exec::Sequential).map(|t| (scn, t))
    });
    let (mut support, mut shift, mut zeros) = (Tally::default(), Tally::default(), Tally::default());
    for ((lambda, c), run) in configs.iter().zip(runs) {
        let (scn, trace) = run?;
        let tag = format!("lambda {lambda}, {}", costs[*c].0);
        let report = equal_support_check(&trace, &pairs)?;
        for p in &report.pairs {
            for (li, d) in p.per_level.iter().enumerate() {
                support.record(
                    *d <= report.tolerance,
                    *d,
                    || format!("{tag}: {} / {} at level {}", p.pair.0, p.pair.1, li + 1),
                    MarginKind::MaxDeviation,
                );
            }
        }
        for (a, b) in &pairs {
            let s = utility_shift_check(&trace, a, b)?;
            shift.record(
                s.spread <= 1e-9 && s.compared > 0,
                s.spread,
                || format!("{tag}: {a} / {b}"),
                MarginKind::MaxDeviation,
            );
        }
        let mismatches = quality_zero_check(&trace, &scn);
        zeros.record(
            mismatches.is_empty(),
            mismatches.len() as f64,
            || format!("{tag}: {} mismatches", mismatches.len()),
            MarginKind::MaxDeviation,
        );
    }
    Ok([
        support.report("lu-support", configs.len(), MarginKind::MaxDeviation),
        shift.report("lu-utility-shift", configs.len(), MarginKind::MaxDeviation),
        zeros.report("lu-quality-zeros", configs.len(), MarginKind::MaxDeviation),
    ])
}

/// Per-pair, per-level row differences of the marginal-utility variant on the
/// reference scenario at `lambda`.
pub fn marginal_utility_divergence(lambda: f64, exec: Exec) -> Result<Vec<(String, String, Vec<f64>)>, LuError> {
    let scn = paper_scenario().with_lambda(lambda);
    let trace = run_lu::<Extended>(&scn, 5, &CostFn::zero(scn.messages.len()), LuVariant::MarginalUtility, exec)?;
    let report = equal_support_check(&trace, &equal_support_pairs(&scn))?;
    Ok(report
        .pairs
        .into_iter()
        .map(|p| (p.pair.0, p.pair.1, p.per_level))
        .collect())
}
