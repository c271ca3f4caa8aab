//! The recursive speaker/listener tower.
//!
//! * `L0`: the literal listener over `(x, o)` for every message.
//! * `S(n+1)(m | o) ∝ exp(lambda * U(m, o))` with `U = -KL(P(x|o) || Ln_m)`,
//!   where `Ln_m` is the listener's x-marginal after `m`.
//! * `Ln(x, o | m) ∝ P(x, o) * Sn(m | o)`.
//!
//! The radius of "around" is only reasoned about by `L0`. A message that no
//! observation ever sends leaves its listener column undefined, and such a
//! message gets utility `-inf` one level up.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::exec::Exec;
use crate::prob::{kl_divergence, softmax, JointPmf, Pmf, ProbError, Utility};
use crate::scenario::{ModelKind, Observation, Scenario, ScenarioError, MAX_DEPTH};
use crate::semantics::{literal_listener, Message, SemanticsError};
use crate::variants::alt_literal_listener_joint;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum RsaError {
    #[error("observation {observation:?} has no message with finite utility")]
    NoAdmissibleMessage { observation: String },
    #[error("depth must be in 1..={MAX_DEPTH}, got {0}")]
    InvalidDepth(usize),
    #[error("convergence gap needs at least two speaker levels, got {0}")]
    TooShallow(usize),
    #[error("model {0} is not a main-architecture model")]
    UnsupportedModel(ModelKind),
    #[error("speaker and listener disagree on {0}")]
    Mismatch(String),
    #[error(transparent)]
    Scenario(#[from] ScenarioError),
    #[error(transparent)]
    Semantics(#[from] SemanticsError),
    #[error(transparent)]
    Prob(#[from] ProbError),
}

pub type Result<T> = std::result::Result<T, RsaError>;

/// What a pragmatic speaker tries to match.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum UtilityKind {
    /// `-KL(P(x|o) || Ln_m)` on the listener's x-marginal.
    #[default]
    MarginalKl,
    /// `-KL` against the listener's joint cell `Ln(x, o | m)` for the
    /// speaker's own observation.
    JointStandard,
}

/// `S(m | o)`: one row per observation, one column per message.
#[derive(Debug, Clone, PartialEq)]
pub struct SpeakerMatrix {
    observations: Vec<String>,
    messages: Vec<Message>,
    rows: Vec<Vec<f64>>,
}

impl SpeakerMatrix {
    pub fn new(observations: Vec<String>, messages: Vec<Message>, rows: Vec<Vec<f64>>) -> Result<Self> {
        if rows.len() != observations.len() || rows.iter().any(|r| r.len() != messages.len()) {
            return Err(RsaError::Mismatch("speaker matrix shape".into()));
        }
        for (label, row) in observations.iter().zip(&rows) {
            let total: f64 = row.iter().sum();
            if row.iter().any(|p| !(0.0..=1.0).contains(p)) || (total - 1.0).abs() > 1e-9 {
                return Err(ProbError::InvalidDistribution(format!("speaker row {label:?} sums to {total}")).into());
            }
        }
        Ok(Self {
            observations,
            messages,
            rows,
        })
    }

    pub fn observations(&self) -> &[String] {
        &self.observations
    }

    pub fn messages(&self) -> &[Message] {
        &self.messages
    }

    pub fn rows(&self) -> &[Vec<f64>] {
        &self.rows
    }

    pub fn row(&self, oi: usize) -> &[f64] {
        &self.rows[oi]
    }

    pub fn get(&self, oi: usize, mj: usize) -> f64 {
        self.rows[oi][mj]
    }

    pub fn row_by_label(&self, label: &str) -> Option<&[f64]> {
        let oi = self.observations.iter().position(|o| o == label)?;
        Some(&self.rows[oi])
    }

    /// Largest entrywise difference between two rows of this matrix.
    pub fn row_diff(&self, a: usize, b: usize) -> f64 {
        max_abs(&self.rows[a], &self.rows[b])
    }

    /// Largest entrywise difference to another matrix of the same shape.
    pub fn max_abs_diff(&self, other: &SpeakerMatrix) -> f64 {
        self.rows
            .iter()
            .zip(&other.rows)
            .map(|(a, b)| max_abs(a, b))
            .fold(0.0, f64::max)
    }
}

fn max_abs(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

/// Per-message listener posteriors. `None` marks a message that the speaker
/// below never sends.
#[derive(Debug, Clone, PartialEq)]
pub struct ListenerTable {
    messages: Vec<Message>,
    columns: Vec<Option<JointPmf>>,
}

impl ListenerTable {
    pub fn new(messages: Vec<Message>, columns: Vec<Option<JointPmf>>) -> Self {
        assert_eq!(messages.len(), columns.len());
        Self { messages, columns }
    }

    pub fn messages(&self) -> &[Message] {
        &self.messages
    }

    pub fn column(&self, mj: usize) -> Option<&JointPmf> {
        self.columns[mj].as_ref()
    }

    pub fn x_marginal(&self, mj: usize) -> Option<Pmf> {
        self.column(mj).map(JointPmf::marginal_x)
    }

    pub fn x_marginals(&self) -> Vec<Option<Pmf>> {
        (0..self.messages.len()).map(|mj| self.x_marginal(mj)).collect()
    }

    pub fn message_index(&self, m: &Message) -> Option<usize> {
        self.messages.iter().position(|x| x == m)
    }
}

/// Speaker utility of a message whose listener posterior is `column`, for a
/// speaker who made observation `oi` and believes `p_o`.
pub fn speaker_utility(p_o: &Pmf, column: Option<&JointPmf>, oi: usize, kind: UtilityKind) -> Result<Utility> {
    let Some(column) = column else {
        return Ok(Utility::NEG_INFINITY);
    };
    let divergence = match kind {
        UtilityKind::MarginalKl => kl_divergence(p_o, &column.marginal_x())?,
        UtilityKind::JointStandard => {
            let mut total = 0.0;
            for (xi, p) in p_o.mass().iter().enumerate() {
                if *p == 0.0 {
                    continue;
                }
                let cell = column.get(xi, oi);
                if cell == 0.0 {
                    return Ok(Utility::NEG_INFINITY);
                }
                total += p * (p.ln() - cell.ln());
            }
            total
        }
    };
    Ok(if divergence.is_finite() {
        Utility::new(-divergence)
    } else {
        Utility::NEG_INFINITY
    })
}

/// Utilities `U(m, o)` for every observation and message.
pub fn utility_table(
    listener: &ListenerTable,
    observations: &[Observation],
    kind: UtilityKind,
    exec: Exec,
) -> Result<Vec<Vec<Utility>>> {
    exec.map(observations.len(), |oi| {
        (0..listener.messages.len())
            .map(|mj| speaker_utility(&observations[oi].conditional, listener.column(mj), oi, kind))
            .collect::<Result<Vec<_>>>()
    })
    .into_iter()
    .collect()
}

/// SoftMax speaker facing `listener`.
pub fn speaker_level(
    listener: &ListenerTable,
    observations: &[Observation],
    lambda: f64,
    kind: UtilityKind,
    exec: Exec,
) -> Result<SpeakerMatrix> {
    let utilities = utility_table(listener, observations, kind, exec)?;
    let rows = utilities
        .iter()
        .zip(observations)
        .map(|(u, o)| {
            softmax(u, lambda).map_err(|e| match e {
                ProbError::NoAdmissibleOption => RsaError::NoAdmissibleMessage {
                    observation: o.label.clone(),
                },
                other => other.into(),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    SpeakerMatrix::new(
        observations.iter().map(|o| o.label.clone()).collect(),
        listener.messages.clone(),
        rows,
    )
}

/// Pragmatic listener inverting `speaker` by Bayes' rule over `(x, o)`.
pub fn listener_level(prior: &JointPmf, speaker: &SpeakerMatrix, exec: Exec) -> Result<ListenerTable> {
    if prior.observations() != speaker.observations() {
        return Err(RsaError::Mismatch("observation labels".into()));
    }
    let columns = exec.map(speaker.messages.len(), |mj| {
        prior.reweight(|_, oj| speaker.get(oj, mj)).ok()
    });
    Ok(ListenerTable::new(speaker.messages.clone(), columns))
}

/// Which level-0 listener the recursion is built on.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LiteralKind {
    /// Joint Bayesian update on `(x, y)`.
    Bayesian,
    /// Prior-weighted mixture of interval-conditioned priors.
    Mixture,
}

/// Level-0 table; messages with zero evidence get an undefined column.
pub fn literal_table(scn: &Scenario, prior: &JointPmf, kind: LiteralKind, exec: Exec) -> Result<ListenerTable> {
    let columns = exec.map(scn.messages.len(), |mj| {
        let m = &scn.messages[mj];
        let result = match kind {
            LiteralKind::Bayesian => literal_listener(m, prior, &scn.radius_prior),
            LiteralKind::Mixture => alt_literal_listener_joint(m, prior, &scn.radius_prior),
        };
        match result {
            Ok(column) => Ok(Some(column)),
            Err(SemanticsError::ZeroEvidence(_)) => Ok(None),
            Err(e) => Err(RsaError::from(e)),
        }
    });
    Ok(ListenerTable::new(
        scn.messages.clone(),
        columns.into_iter().collect::<Result<Vec<_>>>()?,
    ))
}

#[derive(Debug, Clone, PartialEq)]
pub struct RecursionLevel {
    pub level: usize,
    pub speaker: SpeakerMatrix,
    pub listener: ListenerTable,
}

/// `L0`, then `(S1, L1) .. (S_depth, L_depth)`.
#[derive(Debug, Clone, PartialEq)]
pub struct RecursionTrace {
    pub literal: ListenerTable,
    pub levels: Vec<RecursionLevel>,
}

impl RecursionTrace {
    pub fn depth(&self) -> usize {
        self.levels.len()
    }

    /// Speaker at level `n >= 1`.
    pub fn speaker(&self, n: usize) -> &SpeakerMatrix {
        &self.levels[n - 1].speaker
    }

    /// Listener at level `n >= 0`.
    pub fn listener(&self, n: usize) -> &ListenerTable {
        if n == 0 {
            &self.literal
        } else {
            &self.levels[n - 1].listener
        }
    }
}

pub fn run_recursion(scn: &Scenario, depth: usize) -> Result<RecursionTrace> {
    run_recursion_with(scn, depth, Exec::default())
}

pub fn run_recursion_with(scn: &Scenario, depth: usize, exec: Exec) -> Result<RecursionTrace> {
    if depth == 0 || depth > MAX_DEPTH {
        return Err(RsaError::InvalidDepth(depth));
    }
    let literal_kind = match scn.model {
        ModelKind::Main => LiteralKind::Bayesian,
        ModelKind::AltListener => LiteralKind::Mixture,
        other => return Err(RsaError::UnsupportedModel(other)),
    };
    scn.validate()?;
    let prior = scn.joint_prior()?;
    let literal = literal_table(scn, &prior, literal_kind, exec)?;
    let mut levels: Vec<RecursionLevel> = Vec::with_capacity(depth);
    for level in 1..=depth {
        let below = levels.last().map_or(&literal, |l| &l.listener);
        let speaker = speaker_level(below, &scn.observations, scn.lambda, scn.utility_kind, exec)?;
        let listener = listener_level(&prior, &speaker, exec)?;
        levels.push(RecursionLevel {
            level,
            speaker,
            listener,
        });
    }
    Ok(RecursionTrace { literal, levels })
}

/// Max-absolute change between consecutive speaker matrices:
/// entry `i` compares `S(i+1)` with `S(i+2)`.
pub fn convergence_gap(trace: &RecursionTrace) -> Result<Vec<f64>> {
    if trace.depth() < 2 {
        return Err(RsaError::TooShallow(trace.depth()));
    }
    Ok(trace
        .levels
        .windows(2)
        .map(|w| w[0].speaker.max_abs_diff(&w[1].speaker))
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::prob::FiniteDomain;
    use crate::scenario::paper_scenario;
    use crate::semantics::RadiusPrior;

    fn obs(label: &str, weights: &[f64]) -> Observation {
        let domain = FiniteDomain::new(0, weights.len() as i64 - 1).unwrap();
        Observation {
            label: label.into(),
            kind: crate::scenario::ObservationKind::Explicit,
            conditional: Pmf::normalize(domain, weights).unwrap(),
            weight: 1.0,
        }
    }

    #[test]
    fn utility_of_identical_marginal_is_zero() {
        let o = obs("o", &[1.0, 2.0, 1.0]);
        let joint = JointPmf::normalize(o.conditional.domain(), vec!["o".into()], o.conditional.mass().to_vec()).unwrap();
        let u = speaker_utility(&o.conditional, Some(&joint), 0, UtilityKind::MarginalKl).unwrap();
        assert_eq!(u.value(), 0.0);
        let u = speaker_utility(&o.conditional, Some(&joint), 0, UtilityKind::JointStandard).unwrap();
        assert_eq!(u.value(), 0.0);
        assert_eq!(speaker_utility(&o.conditional, None, 0, UtilityKind::MarginalKl).unwrap(), Utility::NEG_INFINITY);
    }

    #[test]
    fn tiny_lambda_gives_uniform_rows_over_admissible_messages() {
        let mut s = paper_scenario().with_lambda(1e-9);
        s.depth = 1;
        let trace = run_recursion(&s, 1).unwrap();
        let row = trace.speaker(1).row_by_label("p_1_7").unwrap();
        // exactly 4, between 3 and 5 and between 2 and 6 exclude supported values
        assert_eq!(&row[..3], &[0.0, 0.0, 0.0]);
        for p in &row[3..] {
            assert!((p - 1.0 / 3.0).abs() < 1e-8);
        }
    }

    #[test]
    fn single_contributing_row_listener_is_conditional() {
        let s = paper_scenario();
        let prior = s.joint_prior().unwrap();
        let n_obs = s.observations.len();
        let n_msg = s.messages.len();
        // observation 3 always sends message 2; everyone else sends message 0
        let rows = (0..n_obs)
            .map(|oi| {
                let mut r = vec![0.0; n_msg];
                r[if oi == 3 { 2 } else { 0 }] = 1.0;
                r
            })
            .collect();
        let sm = SpeakerMatrix::new(s.labels(), s.messages.clone(), rows).unwrap();
        let lt = listener_level(&prior, &sm, Exec::Sequential).unwrap();
        let marg = lt.x_marginal(2).unwrap();
        assert!(marg.max_abs_diff(&s.observations[3].conditional).unwrap() < 1e-15);
        assert!(lt.column(1).is_none());
    }

    #[test]
    fn no_admissible_message_names_observation() {
        let mut s = paper_scenario();
        s.messages = vec![Message::exactly(4)];
        s.costs = vec![0.0];
        let err = run_recursion(&s, 1).unwrap_err();
        assert_eq!(
            err,
            RsaError::NoAdmissibleMessage {
                observation: "u_3_5".into()
            }
        );
    }

    #[test]
    fn undefined_columns_propagate_as_neg_infinity() {
        let s = paper_scenario();
        let prior = s.joint_prior().unwrap();
        let lt = ListenerTable::new(s.messages.clone(), vec![None; s.messages.len()]);
        let u = utility_table(&lt, &s.observations, UtilityKind::MarginalKl, Exec::Sequential).unwrap();
        assert!(u.iter().flatten().all(|u| !u.is_finite()));
        let other = SpeakerMatrix::new(vec![], vec![], vec![]).unwrap();
        assert!(listener_level(&prior, &other, Exec::Sequential).is_err());
    }

    #[test]
    fn convergence_gap_errors_and_zero() {
        let s = paper_scenario();
        let t = run_recursion(&s, 1).unwrap();
        assert_eq!(convergence_gap(&t), Err(RsaError::TooShallow(1)));
        let mut t2 = t.clone();
        t2.levels.push(t.levels[0].clone());
        assert_eq!(convergence_gap(&t2).unwrap(), vec![0.0]);
    }

    #[test]
    fn invalid_depth_and_model() {
        let s = paper_scenario();
        assert_eq!(run_recursion(&s, 0), Err(RsaError::InvalidDepth(0)));
        assert_eq!(run_recursion(&s, MAX_DEPTH + 1), Err(RsaError::InvalidDepth(MAX_DEPTH + 1)));
        let lu = s.with_model(ModelKind::Lu);
        assert_eq!(run_recursion(&lu, 1), Err(RsaError::UnsupportedModel(ModelKind::Lu)));
    }

    #[test]
    fn zero_evidence_message_is_undefined_at_level_zero() {
        let mut s = paper_scenario();
        s.observations.truncate(1); // only "=4"
        s.messages = vec![Message::exactly(4), Message::Between(0, 2)];
        s.costs = vec![0.0; 2];
        s.radius_prior = RadiusPrior::uniform(4);
        let t = run_recursion(&s, 1).unwrap();
        assert!(t.literal.column(1).is_none());
        assert_eq!(t.speaker(1).row(0), &[1.0, 0.0]);
    }
}
