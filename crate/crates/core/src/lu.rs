//! Lexical-uncertainty model.
//!
//! The literal listener is relative to a fixed interpretation `i` (a radius
//! for "around"), so every message is plain conditioning at level 0. The
//! interpretation is summed out once, at the first pragmatic listener:
//!
//! ```text
//! L0(w, o | m, i) = P(w, o) [m]^i(w) / P([m]^i)
//! U1(m | o, i)    = sum_w P(w | o) log L0(w, o | m, i) - c(m)
//! L1(w, o | m)    ∝ P(w, o) sum_i P(i) S1(m | o, i)
//! U(n+1)(m | o)   = sum_w P(w | o) log Ln(w, o | m) - c(m)
//! ```
//!
//! The marginal-utility variant replaces the joint cell inside the log with
//! the listener's x-marginal `sum_o' L(w, o' | m)`.
//!
//! Everything runs in log space over a generic [`Real`]. Speaker
//! probabilities are kept as logs, so a zero is an exact `-inf` and never the
//! result of underflow. At high `lambda` rounding errors in utilities grow by
//! a factor of `lambda` per level; use [`Extended`](crate::real::Extended)
//! when exact identities between rows are being checked.

use std::collections::BTreeSet;

use thiserror::Error;

use crate::exec::Exec;
use crate::prob::{FiniteDomain, JointPmf, Pmf, ProbError};
use crate::real::{log_sum_exp, Extended, Real};
use crate::rsa::{ListenerTable, RsaError, SpeakerMatrix};
use crate::scenario::{ModelKind, Scenario, ScenarioError, MAX_DEPTH};
use crate::semantics::{extension, Message, RadiusPrior};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum LuError {
    #[error("observation {observation:?} has no admissible message{}", interpretation.map(|r| format!(" under radius {r}")).unwrap_or_default())]
    NoAdmissibleMessage {
        observation: String,
        interpretation: Option<u32>,
    },
    #[error("observations {0:?} and {1:?} have different supports")]
    UnequalSupport(String, String),
    #[error("unknown observation {0:?}")]
    UnknownObservation(String),
    #[error("invalid cost: {0}")]
    InvalidCost(String),
    #[error("depth must be in 1..={MAX_DEPTH}, got {0}")]
    InvalidDepth(usize),
    #[error("model {0} is not a lexical-uncertainty model")]
    UnsupportedModel(ModelKind),
    #[error(transparent)]
    Scenario(#[from] ScenarioError),
    #[error(transparent)]
    Prob(#[from] ProbError),
    #[error(transparent)]
    Rsa(#[from] RsaError),
}

pub type Result<T> = std::result::Result<T, LuError>;

/// One reading of "around n": the interval `[n - radius, n + radius]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Interpretation {
    pub radius: u32,
    pub weight: f64,
}

/// Interpretations with positive prior weight, in radius order.
pub fn interpretations(rp: &RadiusPrior) -> Vec<Interpretation> {
    rp.mass()
        .iter()
        .enumerate()
        .filter(|(_, w)| **w > 0.0)
        .map(|(r, w)| Interpretation {
            radius: r as u32,
            weight: *w,
        })
        .collect()
}

/// Per-message cost `c(m) >= 0`, indexed like the scenario's messages.
#[derive(Debug, Clone, PartialEq)]
pub struct CostFn(Vec<f64>);

impl CostFn {
    pub fn new(costs: Vec<f64>) -> Result<Self> {
        if let Some(c) = costs.iter().find(|c| !c.is_finite() || **c < 0.0) {
            return Err(LuError::InvalidCost(format!("{c} is not a finite non-negative number")));
        }
        Ok(Self(costs))
    }

    pub fn zero(n_messages: usize) -> Self {
        Self(vec![0.0; n_messages])
    }

    pub fn get(&self, mj: usize) -> f64 {
        self.0[mj]
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LuVariant {
    /// Utilities use the listener's joint cell `L(w, o | m)`.
    Standard,
    /// Utilities use the listener's x-marginal `sum_o' L(w, o' | m)`.
    MarginalUtility,
}

impl LuVariant {
    pub fn for_model(model: ModelKind) -> Result<Self> {
        match model {
            ModelKind::Lu => Ok(Self::Standard),
            ModelKind::LuMarginalUtility => Ok(Self::MarginalUtility),
            other => Err(LuError::UnsupportedModel(other)),
        }
    }
}

/// `forall w: P(w|o) > 0 => [m]^i(w) = 1`.
pub fn respects_quality(m: &Message, p_o: &Pmf, radius: u32) -> bool {
    let ext = extension(m, radius, p_o.domain());
    p_o.support().is_subset(&ext)
}

/// Quality holds under at least one interpretation with positive weight.
pub fn respects_weak_quality(m: &Message, p_o: &Pmf, rp: &RadiusPrior) -> bool {
    interpretations(rp).iter().any(|i| respects_quality(m, p_o, i.radius))
}

/// Level-0 listener under a fixed interpretation; `None` when the extension
/// has no prior mass.
pub fn lu_literal_listener(m: &Message, radius: u32, prior: &JointPmf) -> Option<JointPmf> {
    let ext = extension(m, radius, prior.x_domain());
    let domain = prior.x_domain();
    prior
        .reweight(|xi, _| if ext.contains(&domain.value_at(xi)) { 1.0 } else { 0.0 })
        .ok()
}

/// The prior and observation model lifted into `T`.
struct Model<T> {
    domain: FiniteDomain,
    labels: Vec<String>,
    messages: Vec<Message>,
    /// `P(w | o)`, renormalized in `T`.
    p_w_o: Vec<Vec<T>>,
    ln_p_w_o: Vec<Vec<T>>,
    ln_p_o: Vec<T>,
    ln_p_x: Vec<T>,
    costs: Vec<T>,
    lambda: T,
    variant: LuVariant,
}

impl<T: Real> Model<T> {
    fn new(scn: &Scenario, cost: &CostFn, variant: LuVariant) -> Result<Self> {
        let total_weight = scn
            .observations
            .iter()
            .fold(T::zero(), |acc, o| acc + T::from_f64(o.weight));
        let p_o: Vec<T> = scn
            .observations
            .iter()
            .map(|o| T::from_f64(o.weight) / total_weight)
            .collect();
        let p_w_o: Vec<Vec<T>> = scn
            .observations
            .iter()
            .map(|o| {
                let mass: Vec<T> = o.conditional.mass().iter().map(|p| T::from_f64(*p)).collect();
                let total = mass.iter().fold(T::zero(), |acc, p| acc + *p);
                mass.into_iter().map(|p| p / total).collect()
            })
            .collect();
        let n_x = scn.domain.len();
        let ln_p_x = (0..n_x)
            .map(|xi| {
                p_o.iter()
                    .zip(&p_w_o)
                    .fold(T::zero(), |acc, (po, row)| acc + *po * row[xi])
                    .ln()
            })
            .collect();
        if cost.len() != scn.messages.len() {
            return Err(LuError::InvalidCost(format!(
                "{} costs for {} messages",
                cost.len(),
                scn.messages.len()
            )));
        }
        Ok(Self {
            domain: scn.domain,
            labels: scn.labels(),
            messages: scn.messages.clone(),
            ln_p_w_o: p_w_o.iter().map(|row| row.iter().map(|p| p.ln()).collect()).collect(),
            p_w_o,
            ln_p_o: p_o.iter().map(|p| p.ln()).collect(),
            ln_p_x,
            costs: (0..scn.messages.len()).map(|mj| T::from_f64(cost.get(mj))).collect(),
            lambda: T::from_f64(scn.lambda),
            variant,
        })
    }

    fn n_obs(&self) -> usize {
        self.labels.len()
    }

    fn n_msg(&self) -> usize {
        self.messages.len()
    }

    /// `sum_w P(w|o) g(w) - c(m)`, or `-inf` if `g` is `-inf` on the support.
    fn expected_log(&self, oi: usize, mj: usize, g: impl Fn(usize) -> T) -> T {
        let mut total = T::zero();
        for (xi, p) in self.p_w_o[oi].iter().enumerate() {
            if *p == T::zero() {
                continue;
            }
            let v = g(xi);
            if v.is_neg_infinity() {
                return T::neg_infinity();
            }
            total = total + *p * v;
        }
        total - self.costs[mj]
    }

    /// `log L(w, o | m)` for all cells, `None` if the column is undefined.
    fn log_listener(&self, log_s: &[Vec<T>], mj: usize) -> Option<Vec<Vec<T>>> {
        let log_alpha = log_sum_exp((0..self.n_obs()).map(|oi| self.ln_p_o[oi] + log_s[oi][mj]).collect::<Vec<_>>());
        if log_alpha.is_neg_infinity() {
            return None;
        }
        Some(
            (0..self.domain.len())
                .map(|xi| {
                    (0..self.n_obs())
                        .map(|oi| {
                            let s = log_s[oi][mj];
                            let p = self.ln_p_w_o[oi][xi];
                            if s.is_neg_infinity() || p.is_neg_infinity() {
                                T::neg_infinity()
                            } else {
                                self.ln_p_o[oi] + p + s - log_alpha
                            }
                        })
                        .collect()
                })
                .collect(),
        )
    }

    /// Utility of every message against a listener given as log cells.
    fn utilities(&self, columns: &[Option<Vec<Vec<T>>>], oi: usize) -> Vec<T> {
        (0..self.n_msg())
            .map(|mj| match &columns[mj] {
                None => T::neg_infinity(),
                Some(cells) => match self.variant {
                    LuVariant::Standard => self.expected_log(oi, mj, |xi| cells[xi][oi]),
                    LuVariant::MarginalUtility => {
                        self.expected_log(oi, mj, |xi| log_sum_exp(cells[xi].clone()))
                    }
                },
            })
            .collect()
    }

    /// Log SoftMax of a row of utilities.
    fn log_softmax(&self, utilities: &[T], oi: usize, radius: Option<u32>) -> Result<Vec<T>> {
        let scaled: Vec<T> = utilities
            .iter()
            .map(|u| if u.is_neg_infinity() { *u } else { self.lambda * *u })
            .collect();
        let log_z = log_sum_exp(scaled.clone());
        if log_z.is_neg_infinity() {
            return Err(LuError::NoAdmissibleMessage {
                observation: self.labels[oi].clone(),
                interpretation: radius,
            });
        }
        Ok(scaled
            .into_iter()
            .map(|s| if s.is_neg_infinity() { s } else { s - log_z })
            .collect())
    }

    /// `U1(m | o, i)` for one interpretation, rows by observation.
    fn utility1(&self, radius: u32) -> Vec<Vec<T>> {
        let exts: Vec<(BTreeSet<i64>, T)> = self
            .messages
            .iter()
            .map(|m| {
                let ext = extension(m, radius, self.domain);
                let mass = log_sum_exp(
                    ext.iter()
                        .map(|k| self.ln_p_x[self.domain.index_of(*k).expect("clamped")])
                        .collect::<Vec<_>>(),
                );
                (ext, mass)
            })
            .collect();
        (0..self.n_obs())
            .map(|oi| {
                (0..self.n_msg())
                    .map(|mj| {
                        let (ext, log_mass) = &exts[mj];
                        if log_mass.is_neg_infinity() {
                            return T::neg_infinity();
                        }
                        self.expected_log(oi, mj, |xi| {
                            if !ext.contains(&self.domain.value_at(xi)) {
                                return T::neg_infinity();
                            }
                            let cell = match self.variant {
                                LuVariant::Standard => self.ln_p_o[oi] + self.ln_p_w_o[oi][xi],
                                LuVariant::MarginalUtility => self.ln_p_x[xi],
                            };
                            if cell.is_neg_infinity() {
                                cell
                            } else {
                                cell - *log_mass
                            }
                        })
                    })
                    .collect()
            })
            .collect()
    }

    fn to_speaker(&self, log_s: &[Vec<T>]) -> Result<SpeakerMatrix> {
        let rows = log_s
            .iter()
            .map(|row| row.iter().map(|l| l.exp().to_f64()).collect())
            .collect();
        Ok(SpeakerMatrix::new(self.labels.clone(), self.messages.clone(), rows)?)
    }

    fn to_listener(&self, columns: &[Option<Vec<Vec<T>>>]) -> Result<ListenerTable> {
        let cols = columns
            .iter()
            .map(|c| {
                c.as_ref()
                    .map(|cells| {
                        let flat: Vec<f64> = cells.iter().flatten().map(|l| l.exp().to_f64()).collect();
                        JointPmf::normalize(self.domain, self.labels.clone(), flat)
                    })
                    .transpose()
            })
            .collect::<std::result::Result<Vec<_>, _>>()?;
        Ok(ListenerTable::new(self.messages.clone(), cols))
    }
}

fn to_f64_rows<T: Real>(rows: &[Vec<T>]) -> Vec<Vec<f64>> {
    rows.iter().map(|r| r.iter().map(|v| v.to_f64()).collect()).collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct LuLevel {
    pub level: usize,
    /// `Sn(m | o)`; at level 1 the interpretation-weighted `sum_i P(i) S1(m | o, i)`.
    pub speaker: SpeakerMatrix,
    /// `log Sn(m | o)`; `-inf` marks an exact zero.
    pub log_speaker: Vec<Vec<f64>>,
    pub listener: ListenerTable,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LuTrace {
    pub variant: LuVariant,
    pub lambda: f64,
    pub observations: Vec<String>,
    pub supports: Vec<BTreeSet<i64>>,
    pub messages: Vec<Message>,
    pub interpretations: Vec<Interpretation>,
    /// `U1(m | o, i)` indexed `[i][o][m]`.
    pub utility1: Vec<Vec<Vec<f64>>>,
    /// `S1(m | o, i)` per interpretation.
    pub speaker1_by_interp: Vec<SpeakerMatrix>,
    pub log_speaker1_by_interp: Vec<Vec<Vec<f64>>>,
    pub levels: Vec<LuLevel>,
}

impl LuTrace {
    pub fn depth(&self) -> usize {
        self.levels.len()
    }

    pub fn speaker(&self, n: usize) -> &SpeakerMatrix {
        &self.levels[n - 1].speaker
    }

    pub fn listener(&self, n: usize) -> &ListenerTable {
        &self.levels[n - 1].listener
    }

    pub fn observation_index(&self, label: &str) -> Result<usize> {
        self.observations
            .iter()
            .position(|o| o == label)
            .ok_or_else(|| LuError::UnknownObservation(label.into()))
    }
}

/// Level-1 speaker `S1(. | o, i)` for one observation and interpretation.
pub fn lu_speaker1(scn: &Scenario, oi: usize, radius: u32, cost: &CostFn) -> Result<Pmf> {
    let model = Model::<f64>::new(scn, cost, LuVariant::Standard)?;
    let u = &model.utility1(radius)[oi];
    let log_s = model.log_softmax(u, oi, Some(radius))?;
    let mass: Vec<f64> = log_s.iter().map(|l| l.exp()).collect();
    let idx = FiniteDomain::new(0, scn.messages.len() as i64 - 1)?;
    Ok(Pmf::normalize(idx, &mass)?)
}

/// Level-1 listener with the interpretation summed out.
pub fn lu_listener1(scn: &Scenario, cost: &CostFn) -> Result<ListenerTable> {
    let trace = lu_higher_levels(scn, 1, cost, LuVariant::Standard)?;
    Ok(trace.levels[0].listener.clone())
}

/// Full trace in `f64`.
pub fn lu_higher_levels(scn: &Scenario, depth: usize, cost: &CostFn, variant: LuVariant) -> Result<LuTrace> {
    run_lu::<f64>(scn, depth, cost, variant, Exec::default())
}

/// Full trace in extended precision.
pub fn lu_higher_levels_extended(scn: &Scenario, depth: usize, cost: &CostFn, variant: LuVariant) -> Result<LuTrace> {
    run_lu::<Extended>(scn, depth, cost, variant, Exec::default())
}

pub fn run_lu<T: Real>(scn: &Scenario, depth: usize, cost: &CostFn, variant: LuVariant, exec: Exec) -> Result<LuTrace> {
    if depth == 0 || depth > MAX_DEPTH {
        return Err(LuError::InvalidDepth(depth));
    }
    scn.validate()?;
    let model = Model::<T>::new(scn, cost, variant)?;
    let interps = interpretations(&scn.radius_prior);

    let per_interp = exec
        .map(interps.len(), |ii| {
            let radius = interps[ii].radius;
            let u = model.utility1(radius);
            let log_s = (0..model.n_obs())
                .map(|oi| model.log_softmax(&u[oi], oi, Some(radius)))
                .collect::<Result<Vec<_>>>()?;
            Ok((u, log_s))
        })
        .into_iter()
        .collect::<Result<Vec<_>>>()?;

    // sum_i P(i) S1(m | o, i), in logs
    let ln_w: Vec<T> = interps.iter().map(|i| T::from_f64(i.weight).ln()).collect();
    let ln_total_w = log_sum_exp(ln_w.clone());
    let mut log_s: Vec<Vec<T>> = (0..model.n_obs())
        .map(|oi| {
            (0..model.n_msg())
                .map(|mj| {
                    let terms: Vec<T> = per_interp
                        .iter()
                        .zip(&ln_w)
                        .map(|((_, s), w)| {
                            let v = s[oi][mj];
                            if v.is_neg_infinity() {
                                v
                            } else {
                                *w + v
                            }
                        })
                        .collect();
                    let v = log_sum_exp(terms);
                    if v.is_neg_infinity() {
                        v
                    } else {
                        v - ln_total_w
                    }
                })
                .collect()
        })
        .collect();

    let mut levels = Vec::with_capacity(depth);
    for level in 1..=depth {
        if level > 1 {
            let below = &levels_cols(&model, &log_s, exec);
            log_s = exec
                .map(model.n_obs(), |oi| {
                    let u = model.utilities(below, oi);
                    model.log_softmax(&u, oi, None)
                })
                .into_iter()
                .collect::<Result<Vec<_>>>()?;
        }
        let columns = levels_cols(&model, &log_s, exec);
        levels.push(LuLevel {
            level,
            speaker: model.to_speaker(&log_s)?,
            log_speaker: to_f64_rows(&log_s),
            listener: model.to_listener(&columns)?,
        });
    }

    Ok(LuTrace {
        variant,
        lambda: scn.lambda,
        observations: model.labels.clone(),
        supports: scn.observations.iter().map(|o| o.conditional.support()).collect(),
        messages: scn.messages.clone(),
        interpretations: interps,
        utility1: per_interp.iter().map(|(u, _)| to_f64_rows(u)).collect(),
        speaker1_by_interp: per_interp
            .iter()
            .map(|(_, s)| model.to_speaker(s))
            .collect::<Result<Vec<_>>>()?,
        log_speaker1_by_interp: per_interp.iter().map(|(_, s)| to_f64_rows(s)).collect(),
        levels,
    })
}

fn levels_cols<T: Real>(model: &Model<T>, log_s: &[Vec<T>], exec: Exec) -> Vec<Option<Vec<Vec<T>>>> {
    exec.map(model.n_msg(), |mj| model.log_listener(log_s, mj))
}

/// Observation pairs with identical supports, in scenario order.
pub fn equal_support_pairs(scn: &Scenario) -> Vec<(String, String)> {
    let obs = &scn.observations;
    let mut pairs = Vec::new();
    for (a, oa) in obs.iter().enumerate() {
        for ob in &obs[a + 1..] {
            if oa.conditional.support() == ob.conditional.support() {
                pairs.push((oa.label.clone(), ob.label.clone()));
            }
        }
    }
    pairs
}

#[derive(Debug, Clone, PartialEq)]
pub struct PairReport {
    pub pair: (String, String),
    /// Max row difference per level `1..=depth`. Level 1 also covers every
    /// interpretation-specific `S1(. | o, i)`.
    pub per_level: Vec<f64>,
}

impl PairReport {
    pub fn worst(&self) -> f64 {
        self.per_level.iter().copied().fold(0.0, f64::max)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SupportReport {
    pub pairs: Vec<PairReport>,
    pub tolerance: f64,
}

impl SupportReport {
    pub const TOLERANCE: f64 = 1e-9;

    pub fn worst(&self) -> f64 {
        self.pairs.iter().map(PairReport::worst).fold(0.0, f64::max)
    }

    pub fn holds(&self) -> bool {
        self.worst() <= self.tolerance
    }
}

fn pair_indices(trace: &LuTrace, a: &str, b: &str) -> Result<(usize, usize)> {
    let (ia, ib) = (trace.observation_index(a)?, trace.observation_index(b)?);
    if trace.supports[ia] != trace.supports[ib] {
        return Err(LuError::UnequalSupport(a.into(), b.into()));
    }
    Ok((ia, ib))
}

/// Row differences between equal-support observations at every level.
pub fn equal_support_check(trace: &LuTrace, pairs: &[(String, String)]) -> Result<SupportReport> {
    let reports = pairs
        .iter()
        .map(|(a, b)| {
            let (ia, ib) = pair_indices(trace, a, b)?;
            let per_level = trace
                .levels
                .iter()
                .map(|l| {
                    let mut d = l.speaker.row_diff(ia, ib);
                    if l.level == 1 {
                        for s in &trace.speaker1_by_interp {
                            d = d.max(s.row_diff(ia, ib));
                        }
                    }
                    d
                })
                .collect();
            Ok(PairReport {
                pair: (a.clone(), b.clone()),
                per_level,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(SupportReport {
        pairs: reports,
        tolerance: SupportReport::TOLERANCE,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct ShiftReport {
    pub pair: (String, String),
    /// Number of `(m, i)` combinations where both utilities are finite.
    pub compared: usize,
    /// `max - min` of `U1(m | o2, i) - U1(m | o1, i)` over those combinations.
    pub spread: f64,
}

/// The level-1 utility shift between two equal-support observations must not
/// depend on the message or the interpretation.
pub fn utility_shift_check(trace: &LuTrace, a: &str, b: &str) -> Result<ShiftReport> {
    let (ia, ib) = pair_indices(trace, a, b)?;
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    let mut compared = 0;
    for u in &trace.utility1 {
        for (&ua, &ub) in u[ia].iter().zip(&u[ib]) {
            if ua.is_finite() && ub.is_finite() {
                let d = ub - ua;
                lo = lo.min(d);
                hi = hi.max(d);
                compared += 1;
            }
        }
    }
    Ok(ShiftReport {
        pair: (a.into(), b.into()),
        compared,
        spread: if compared == 0 { 0.0 } else { hi - lo },
    })
}

/// Cells where a zero speaker probability disagrees with (Weak) Quality.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct QualityMismatch {
    pub level: usize,
    pub radius: Option<u32>,
    pub observation: String,
    pub message: Message,
}

/// `S1(m|o,i) = 0` exactly when Quality fails, and for the standard variant
/// `Sn(m|o) = 0` exactly when Weak Quality fails.
pub fn quality_zero_check(trace: &LuTrace, scn: &Scenario) -> Vec<QualityMismatch> {
    let mut out = Vec::new();
    for (ii, interp) in trace.interpretations.iter().enumerate() {
        for (oi, o) in scn.observations.iter().enumerate() {
            for (mj, m) in trace.messages.iter().enumerate() {
                let zero = trace.log_speaker1_by_interp[ii][oi][mj] == f64::NEG_INFINITY;
                if zero == respects_quality(m, &o.conditional, interp.radius) {
                    out.push(QualityMismatch {
                        level: 1,
                        radius: Some(interp.radius),
                        observation: o.label.clone(),
                        message: *m,
                    });
                }
            }
        }
    }
    if trace.variant == LuVariant::Standard {
        for l in &trace.levels {
            for (oi, o) in scn.observations.iter().enumerate() {
                for (mj, m) in trace.messages.iter().enumerate() {
                    let zero = l.log_speaker[oi][mj] == f64::NEG_INFINITY;
                    if zero == respects_weak_quality(m, &o.conditional, &scn.radius_prior) {
                        out.push(QualityMismatch {
                            level: l.level,
                            radius: None,
                            observation: o.label.clone(),
                            message: *m,
                        });
                    }
                }
            }
        }
    }
    out
}
