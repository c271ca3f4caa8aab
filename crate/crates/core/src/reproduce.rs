//! Published reference tables and their recomputation.
//!
//! Expected values are stored exactly as printed (2 decimals, 3 for the
//! joint prior, fractions for the observation probabilities). Computed values
//! are rounded the same way before comparison, with one unit of slack in the
//! last printed digit for values that sit on a rounding boundary.

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::Zero;
use thiserror::Error;

use crate::exec::Exec;
use crate::prob::{kl_divergence, FiniteDomain, Pmf, ProbError};
use crate::rsa::{run_recursion_with, ListenerTable, RsaError, SpeakerMatrix};
use crate::scenario::{paper_scenario, Scenario};
use crate::semantics::{literal_marginal, Message, RadiusPrior, SemanticsError};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ReproError {
    #[error(transparent)]
    Prob(#[from] ProbError),
    #[error(transparent)]
    Semantics(#[from] SemanticsError),
    #[error(transparent)]
    Rsa(#[from] RsaError),
}

/// Speaker belief of the single-speaker worked example.
pub const WORKED_P_O: [f64; 9] = [0.0, 0.01, 0.01, 0.16, 0.64, 0.16, 0.01, 0.01, 0.0];

const EXPECTED_T2: [[f64; 9]; 2] = [
    [0.0, 0.14, 0.14, 0.14, 0.14, 0.14, 0.14, 0.14, 0.0],
    [0.04, 0.08, 0.12, 0.16, 0.20, 0.16, 0.12, 0.08, 0.04],
];

/// `KL(P_o || P_around)`, `KL(P_o || P_between)`.
const EXPECTED_KL: [f64; 2] = [0.65, 0.89];

// x by observation
const EXPECTED_T3: [[f64; 9]; 9] = [
    [0.00, 0.00, 0.00, 0.00, 0.11, 0.00, 0.00, 0.00, 0.00],
    [0.00, 0.00, 0.00, 0.14, 0.11, 0.00, 0.00, 0.02, 0.03],
    [0.00, 0.00, 0.20, 0.14, 0.11, 0.00, 0.06, 0.09, 0.11],
    [0.00, 0.33, 0.20, 0.14, 0.11, 0.25, 0.25, 0.23, 0.22],
    [1.00, 0.33, 0.20, 0.14, 0.11, 0.50, 0.38, 0.31, 0.27],
    [0.00, 0.33, 0.20, 0.14, 0.11, 0.25, 0.25, 0.23, 0.22],
    [0.00, 0.00, 0.20, 0.14, 0.11, 0.00, 0.06, 0.09, 0.11],
    [0.00, 0.00, 0.00, 0.14, 0.11, 0.00, 0.00, 0.02, 0.03],
    [0.00, 0.00, 0.00, 0.00, 0.11, 0.00, 0.00, 0.00, 0.00],
];

const EXPECTED_T4: [(i64, i64); 9] = [(1, 426), (2, 213), (8, 213), (32, 213), (128, 213), (1, 426), (2, 213), (8, 213), (32, 213)];

const EXPECTED_T5: [f64; 9] = [0.07, 0.09, 0.12, 0.14, 0.16, 0.14, 0.12, 0.09, 0.07];

const EXPECTED_T6: [[f64; 9]; 9] = [
    [0.000, 0.000, 0.000, 0.000, 0.067, 0.000, 0.000, 0.000, 0.001],
    [0.000, 0.000, 0.000, 0.021, 0.067, 0.000, 0.000, 0.001, 0.005],
    [0.000, 0.000, 0.008, 0.021, 0.067, 0.000, 0.001, 0.004, 0.016],
    [0.000, 0.003, 0.008, 0.021, 0.067, 0.001, 0.002, 0.009, 0.033],
    [0.002, 0.003, 0.008, 0.021, 0.067, 0.001, 0.004, 0.012, 0.041],
    [0.000, 0.003, 0.008, 0.021, 0.067, 0.001, 0.002, 0.009, 0.033],
    [0.000, 0.000, 0.008, 0.021, 0.067, 0.000, 0.001, 0.004, 0.016],
    [0.000, 0.000, 0.000, 0.021, 0.067, 0.000, 0.000, 0.001, 0.005],
    [0.000, 0.000, 0.000, 0.000, 0.067, 0.000, 0.000, 0.000, 0.001],
];

// x by message
const EXPECTED_T7: [[f64; 6]; 9] = [
    [0.00, 0.00, 0.00, 0.00, 0.07, 0.02],
    [0.00, 0.00, 0.00, 0.11, 0.09, 0.06],
    [0.00, 0.00, 0.17, 0.13, 0.12, 0.11],
    [0.00, 0.32, 0.21, 0.17, 0.14, 0.18],
    [1.00, 0.36, 0.23, 0.18, 0.16, 0.25],
    [0.00, 0.32, 0.21, 0.17, 0.14, 0.18],
    [0.00, 0.00, 0.17, 0.13, 0.12, 0.11],
    [0.00, 0.00, 0.00, 0.11, 0.09, 0.06],
    [0.00, 0.00, 0.00, 0.00, 0.07, 0.02],
];

// observation by message
const EXPECTED_T8: [[f64; 6]; 9] = [
    [1.00, 0.00, 0.00, 0.00, 0.00, 0.00],
    [0.00, 0.98, 0.01, 0.00, 0.00, 0.01],
    [0.00, 0.00, 0.82, 0.07, 0.02, 0.09],
    [0.00, 0.00, 0.00, 0.69, 0.16, 0.15],
    [0.00, 0.00, 0.00, 0.00, 0.93, 0.07],
    [0.00, 0.97, 0.01, 0.00, 0.00, 0.01],
    [0.00, 0.00, 0.68, 0.06, 0.01, 0.25],
    [0.00, 0.00, 0.00, 0.27, 0.06, 0.66],
    [0.00, 0.00, 0.00, 0.00, 0.14, 0.86],
];

const EXPECTED_T9: [[f64; 6]; 9] = [
    [0.00, 0.00, 0.00, 0.00, 0.10, 0.02],
    [0.00, 0.00, 0.00, 0.13, 0.11, 0.05],
    [0.00, 0.00, 0.18, 0.14, 0.11, 0.11],
    [0.00, 0.32, 0.21, 0.15, 0.12, 0.19],
    [1.00, 0.37, 0.23, 0.16, 0.12, 0.24],
    [0.00, 0.32, 0.21, 0.15, 0.12, 0.19],
    [0.00, 0.00, 0.18, 0.14, 0.11, 0.11],
    [0.00, 0.00, 0.00, 0.13, 0.11, 0.05],
    [0.00, 0.00, 0.00, 0.00, 0.10, 0.02],
];

const EXPECTED_T10: [[f64; 6]; 9] = [
    [1.00, 0.00, 0.00, 0.00, 0.00, 0.00],
    [0.00, 0.96, 0.01, 0.00, 0.00, 0.03],
    [0.00, 0.00, 0.78, 0.03, 0.00, 0.19],
    [0.00, 0.00, 0.00, 0.87, 0.08, 0.06],
    [0.00, 0.00, 0.00, 0.00, 1.00, 0.00],
    [0.00, 0.96, 0.01, 0.00, 0.00, 0.03],
    [0.00, 0.00, 0.41, 0.01, 0.00, 0.57],
    [0.00, 0.00, 0.00, 0.05, 0.00, 0.94],
    [0.00, 0.00, 0.00, 0.00, 0.01, 0.99],
];

const EXPECTED_T11: [[f64; 6]; 9] = [
    [0.00, 0.00, 0.00, 0.00, 0.11, 0.00],
    [0.00, 0.00, 0.00, 0.14, 0.11, 0.03],
    [0.00, 0.00, 0.18, 0.14, 0.11, 0.11],
    [0.00, 0.32, 0.21, 0.15, 0.11, 0.22],
    [1.00, 0.37, 0.22, 0.15, 0.11, 0.27],
    [0.00, 0.32, 0.21, 0.15, 0.11, 0.22],
    [0.00, 0.00, 0.18, 0.14, 0.11, 0.11],
    [0.00, 0.00, 0.00, 0.14, 0.11, 0.03],
    [0.00, 0.00, 0.00, 0.00, 0.11, 0.00],
];

/// How a computed table is held against the printed one.
#[derive(Debug, Clone, PartialEq)]
pub enum Comparison {
    /// Round to `decimals`, then allow `slack` for boundary rounding.
    Rounded { decimals: u32, slack: f64 },
    /// Unrounded value within `tolerance` of the printed one.
    Absolute { tolerance: f64 },
    /// Exact rational equality.
    Exact,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TableCheck {
    pub id: &'static str,
    pub title: &'static str,
    pub row_labels: Vec<String>,
    pub col_labels: Vec<String>,
    pub computed: Vec<Vec<f64>>,
    pub expected: Vec<Vec<f64>>,
    /// Exact renderings for [`Comparison::Exact`] tables.
    pub exact: Option<(Vec<String>, Vec<String>)>,
    pub comparison: Comparison,
    /// Largest deviation after rounding (or unrounded, for `Absolute`).
    pub worst: f64,
    pub pass: bool,
}

pub fn round_to(value: f64, decimals: u32) -> f64 {
    let scale = 10f64.powi(decimals as i32);
    (value * scale).round() / scale
}

fn compare(computed: &[Vec<f64>], expected: &[Vec<f64>], comparison: &Comparison) -> (f64, bool) {
    let mut worst: f64 = 0.0;
    let mut shape_ok = computed.len() == expected.len();
    for (c, e) in computed.iter().zip(expected) {
        shape_ok &= c.len() == e.len();
        for (c, e) in c.iter().zip(e) {
            let d = match comparison {
                Comparison::Rounded { decimals, .. } => (round_to(*c, *decimals) - e).abs(),
                _ => (c - e).abs(),
            };
            worst = worst.max(d);
        }
    }
    let limit = match comparison {
        Comparison::Rounded { slack, .. } => slack + 1e-9,
        Comparison::Absolute { tolerance } => *tolerance,
        Comparison::Exact => 0.0,
    };
    (worst, shape_ok && worst <= limit)
}

#[allow(clippy::too_many_arguments)]
fn table(
    id: &'static str,
    title: &'static str,
    row_labels: Vec<String>,
    col_labels: Vec<String>,
    computed: Vec<Vec<f64>>,
    expected: Vec<Vec<f64>>,
    comparison: Comparison,
) -> TableCheck {
    let (worst, pass) = compare(&computed, &expected, &comparison);
    TableCheck {
        id,
        title,
        row_labels,
        col_labels,
        computed,
        expected,
        exact: None,
        comparison,
        worst,
        pass,
    }
}

const TWO_DECIMALS: Comparison = Comparison::Rounded {
    decimals: 2,
    slack: 0.01,
};

fn rows<const N: usize>(t: &[[f64; N]]) -> Vec<Vec<f64>> {
    t.iter().map(|r| r.to_vec()).collect()
}

fn x_labels(domain: FiniteDomain) -> Vec<String> {
    domain.values().map(|k| k.to_string()).collect()
}

fn message_labels(messages: &[Message]) -> Vec<String> {
    messages.iter().map(Message::short_label).collect()
}

/// Listener table laid out x by message; undefined columns read as zeros.
pub fn listener_grid(listener: &ListenerTable, domain: FiniteDomain) -> Vec<Vec<f64>> {
    let marginals = listener.x_marginals();
    (0..domain.len())
        .map(|xi| {
            marginals
                .iter()
                .map(|m| m.as_ref().map_or(0.0, |p| p.mass()[xi]))
                .collect()
        })
        .collect()
}

pub fn speaker_grid(speaker: &SpeakerMatrix) -> Vec<Vec<f64>> {
    speaker.rows().to_vec()
}

/// The worked example's domain, speaker belief and the two listener
/// posteriors `(P_between, P_around)` under a uniform prior.
pub fn worked_example() -> Result<(Pmf, Pmf, Pmf), ReproError> {
    let domain = FiniteDomain::new(0, 8)?;
    let p_o = Pmf::new(domain, WORKED_P_O.to_vec())?;
    let prior = Pmf::uniform(domain);
    let rp = RadiusPrior::uniform(4);
    let between = literal_marginal(&Message::Between(1, 7), &prior, &rp)?;
    let around = literal_marginal(&Message::Around(4), &prior, &rp)?;
    Ok((p_o, between, around))
}

fn worked_tables() -> Result<Vec<TableCheck>, ReproError> {
    let (p_o, between, around) = worked_example()?;
    let xs = x_labels(p_o.domain());
    let t1 = table(
        "table-1",
        "speaker belief P_o",
        vec!["P_o".into()],
        xs.clone(),
        vec![p_o.mass().to_vec()],
        vec![WORKED_P_O.to_vec()],
        TWO_DECIMALS,
    );
    let t2 = table(
        "table-2",
        "listener posteriors after between 1 and 7 / around 4",
        vec!["between".into(), "around".into()],
        xs,
        vec![between.mass().to_vec(), around.mass().to_vec()],
        rows(&EXPECTED_T2),
        Comparison::Absolute { tolerance: 0.005 },
    );
    let kl = vec![vec![kl_divergence(&p_o, &around)?, kl_divergence(&p_o, &between)?]];
    let tkl = table(
        "kl",
        "KL divergence from P_o",
        vec!["KL".into()],
        vec!["around 4".into(), "between 1 and 7".into()],
        kl,
        vec![EXPECTED_KL.to_vec()],
        Comparison::Absolute { tolerance: 0.005 },
    );
    Ok(vec![t1, t2, tkl])
}

fn fraction(r: &BigRational) -> String {
    format!("{}/{}", r.numer(), r.denom())
}

fn scenario_tables(scn: &Scenario) -> Result<Vec<TableCheck>, ReproError> {
    let domain = scn.domain;
    let labels = scn.labels();
    let xs = x_labels(domain);
    let conditionals: Vec<Vec<f64>> = (0..domain.len())
        .map(|xi| scn.observations.iter().map(|o| o.conditional.mass()[xi]).collect())
        .collect();
    let t3 = table(
        "table-3",
        "P(x | o)",
        xs.clone(),
        labels.clone(),
        conditionals,
        rows(&EXPECTED_T3),
        TWO_DECIMALS,
    );

    let weights: Vec<BigRational> = scn
        .observations
        .iter()
        .map(|o| BigRational::from_float(o.weight).expect("finite weight"))
        .collect();
    let total = weights.iter().fold(BigRational::zero(), |acc, w| acc + w);
    let computed: Vec<BigRational> = weights.iter().map(|w| w / &total).collect();
    let expected: Vec<BigRational> = EXPECTED_T4
        .iter()
        .map(|(n, d)| BigRational::new(BigInt::from(*n), BigInt::from(*d)))
        .collect();
    let to_f64 = |v: &[BigRational]| -> Vec<f64> {
        v.iter()
            .map(|r| num_traits::ToPrimitive::to_f64(r).unwrap_or(f64::NAN))
            .collect()
    };
    let exact_pass = computed == expected;
    let t4 = TableCheck {
        id: "table-4",
        title: "P(o)",
        row_labels: vec!["P(o)".into()],
        col_labels: labels.clone(),
        computed: vec![to_f64(&computed)],
        expected: vec![to_f64(&expected)],
        exact: Some((
            computed.iter().map(fraction).collect(),
            expected.iter().map(fraction).collect(),
        )),
        comparison: Comparison::Exact,
        worst: if exact_pass { 0.0 } else { f64::NAN },
        pass: exact_pass,
    };

    let joint = scn.joint_prior()?;
    let t5 = table(
        "table-5",
        "P(x)",
        vec!["P(x)".into()],
        xs.clone(),
        vec![joint.marginal_x().mass().to_vec()],
        vec![EXPECTED_T5.to_vec()],
        TWO_DECIMALS,
    );
    let cells: Vec<Vec<f64>> = (0..domain.len())
        .map(|xi| (0..joint.n_obs()).map(|oj| joint.get(xi, oj)).collect())
        .collect();
    let t6 = table(
        "table-6",
        "P(x, o)",
        xs,
        labels,
        cells,
        rows(&EXPECTED_T6),
        Comparison::Rounded {
            decimals: 3,
            slack: 0.001,
        },
    );
    Ok(vec![t3, t4, t5, t6])
}

fn recursion_tables(scn: &Scenario, exec: Exec) -> Result<Vec<TableCheck>, ReproError> {
    let trace = run_recursion_with(scn, 5, exec)?;
    let domain = scn.domain;
    let xs = x_labels(domain);
    let ms = message_labels(&scn.messages);
    let obs = scn.labels();
    let listener = |id, title, n: usize, expected: &[[f64; 6]]| {
        table(
            id,
            title,
            xs.clone(),
            ms.clone(),
            listener_grid(trace.listener(n), domain),
            rows(expected),
            TWO_DECIMALS,
        )
    };
    let speaker = |id, title, n: usize, expected: &[[f64; 6]]| {
        table(
            id,
            title,
            obs.clone(),
            ms.clone(),
            speaker_grid(trace.speaker(n)),
            rows(expected),
            TWO_DECIMALS,
        )
    };
    Ok(vec![
        listener("table-7", "L0(x | m)", 0, &EXPECTED_T7),
        speaker("table-8", "S1(m | o)", 1, &EXPECTED_T8),
        listener("table-9", "L1(x | m)", 1, &EXPECTED_T9),
        speaker("table-10", "S5(m | o)", 5, &EXPECTED_T10),
        listener("table-11", "L5(x | m)", 5, &EXPECTED_T11),
    ])
}

/// Every reference table, in publication order, plus the KL pair.
pub fn reproduce_tables() -> Result<Vec<TableCheck>, ReproError> {
    reproduce_tables_with(Exec::default())
}

pub fn reproduce_tables_with(exec: Exec) -> Result<Vec<TableCheck>, ReproError> {
    let scn = paper_scenario();
    let mut out = worked_tables()?;
    out.extend(scenario_tables(&scn)?);
    out.extend(recursion_tables(&scn, exec)?);
    Ok(out)
}

pub fn find<'a>(tables: &'a [TableCheck], id: &str) -> Option<&'a TableCheck> {
    tables.iter().find(|t| t.id == id)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn every_table_reproduces() {
        let tables = reproduce_tables().unwrap();
        assert_eq!(tables.len(), 12);
        for t in &tables {
            assert!(t.pass, "{} worst {}", t.id, t.worst);
        }
    }

    #[test]
    fn rounding_helper() {
        assert_eq!(round_to(0.145, 1), 0.1);
        assert_eq!(round_to(0.6649, 2), 0.66);
        assert_eq!(round_to(2.0 / 3.0, 3), 0.667);
    }

    #[test]
    fn a_wrong_table_fails() {
        let (worst, pass) = compare(&[vec![0.5]], &[vec![0.52]], &TWO_DECIMALS);
        assert!(!pass && (worst - 0.02).abs() < 1e-12);
        let (_, pass) = compare(&[vec![0.5, 0.1]], &[vec![0.5]], &TWO_DECIMALS);
        assert!(!pass);
    }

    #[test]
    fn kl_values() {
        let t = worked_tables().unwrap();
        let kl = find(&t, "kl").unwrap();
        assert!(kl.computed[0][0] < kl.computed[0][1]);
    }
}
