//! Discrete probability primitives over finite integer domains.
//!
//! Every model in the crate trades in [`Pmf`] (a distribution over the world
//! values `x`) and [`JointPmf`] (a distribution over `(x, observation)` cells).
//! Both are immutable once built and validated on construction.
//!
//! Zero probabilities are kept exact. Log-utilities use `f64::NEG_INFINITY` as
//! the "impossible" sentinel and [`softmax`] maps it to an exact `0.0`.

use std::collections::BTreeSet;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Tolerance used when validating that a distribution sums to one.
pub const NORMALIZATION_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ProbError {
    #[error("invalid domain: lo {lo} > hi {hi}")]
    InvalidDomain { lo: i64, hi: i64 },
    #[error("invalid distribution: {0}")]
    InvalidDistribution(String),
    #[error("conditioning event has zero probability")]
    ZeroMassEvent,
    #[error("domain mismatch: {0}")]
    DomainMismatch(String),
    #[error("no admissible option: every utility is -inf")]
    NoAdmissibleOption,
    #[error("lambda must be positive and finite, got {0}")]
    InvalidLambda(f64),
}

pub type Result<T> = std::result::Result<T, ProbError>;

/// Inclusive integer range of world values, e.g. `0..=8`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct FiniteDomain {
    lo: i64,
    hi: i64,
}

impl FiniteDomain {
    pub fn new(lo: i64, hi: i64) -> Result<Self> {
        if lo > hi {
            return Err(ProbError::InvalidDomain { lo, hi });
        }
        Ok(Self { lo, hi })
    }

    pub fn lo(&self) -> i64 {
        self.lo
    }

    pub fn hi(&self) -> i64 {
        self.hi
    }

    pub fn len(&self) -> usize {
        (self.hi - self.lo + 1) as usize
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn contains(&self, value: i64) -> bool {
        (self.lo..=self.hi).contains(&value)
    }

    pub fn index_of(&self, value: i64) -> Option<usize> {
        self.contains(value).then(|| (value - self.lo) as usize)
    }

    pub fn value_at(&self, index: usize) -> i64 {
        self.lo + index as i64
    }

    pub fn values(&self) -> impl Iterator<Item = i64> {
        self.lo..=self.hi
    }
}

impl fmt::Display for FiniteDomain {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[{}, {}]", self.lo, self.hi)
    }
}

fn check_weights(weights: &[f64]) -> Result<f64> {
    if let Some(w) = weights.iter().find(|w| !w.is_finite() || **w < 0.0) {
        return Err(ProbError::InvalidDistribution(format!(
            "weight {w} is negative or not finite"
        )));
    }
    let total: f64 = weights.iter().sum();
    if total <= 0.0 {
        return Err(ProbError::InvalidDistribution("all weights are zero".into()));
    }
    Ok(total)
}

/// Probability mass function over a [`FiniteDomain`].
#[derive(Debug, Clone, PartialEq)]
pub struct Pmf {
    domain: FiniteDomain,
    mass: Vec<f64>,
}

impl Pmf {
    /// Wraps an already-normalized mass vector, checking the invariants.
    pub fn new(domain: FiniteDomain, mass: Vec<f64>) -> Result<Self> {
        if mass.len() != domain.len() {
            return Err(ProbError::DomainMismatch(format!(
                "{} masses for domain {domain} of size {}",
                mass.len(),
                domain.len()
            )));
        }
        let total = check_weights(&mass)?;
        if (total - 1.0).abs() > NORMALIZATION_TOLERANCE {
            return Err(ProbError::InvalidDistribution(format!(
                "masses sum to {total}, expected 1"
            )));
        }
        Ok(Self { domain, mass })
    }

    /// Normalizes non-negative weights into a distribution.
    pub fn normalize(domain: FiniteDomain, weights: &[f64]) -> Result<Self> {
        if weights.len() != domain.len() {
            return Err(ProbError::DomainMismatch(format!(
                "{} weights for domain {domain} of size {}",
                weights.len(),
                domain.len()
            )));
        }
        let total = check_weights(weights)?;
        Ok(Self {
            domain,
            mass: weights.iter().map(|w| w / total).collect(),
        })
    }

    pub fn uniform(domain: FiniteDomain) -> Self {
        let p = 1.0 / domain.len() as f64;
        Self {
            domain,
            mass: vec![p; domain.len()],
        }
    }

    pub fn point(domain: FiniteDomain, value: i64) -> Result<Self> {
        let idx = domain.index_of(value).ok_or_else(|| {
            ProbError::DomainMismatch(format!("point {value} outside {domain}"))
        })?;
        let mut mass = vec![0.0; domain.len()];
        mass[idx] = 1.0;
        Ok(Self { domain, mass })
    }

    pub fn domain(&self) -> FiniteDomain {
        self.domain
    }

    pub fn mass(&self) -> &[f64] {
        &self.mass
    }

    /// Probability of the world value `value` (zero outside the domain).
    pub fn prob(&self, value: i64) -> f64 {
        self.domain.index_of(value).map_or(0.0, |i| self.mass[i])
    }

    pub fn support(&self) -> BTreeSet<i64> {
        self.domain
            .values()
            .zip(&self.mass)
            .filter(|(_, p)| **p > 0.0)
            .map(|(v, _)| v)
            .collect()
    }

    pub fn probability_of(&self, event: &BTreeSet<i64>) -> f64 {
        event.iter().map(|v| self.prob(*v)).sum()
    }

    /// Bayesian conditioning on an event given as a set of world values.
    pub fn condition(&self, event: &BTreeSet<i64>) -> Result<Pmf> {
        let weights: Vec<f64> = self
            .domain
            .values()
            .zip(&self.mass)
            .map(|(v, p)| if event.contains(&v) { *p } else { 0.0 })
            .collect();
        if weights.iter().all(|w| *w == 0.0) {
            return Err(ProbError::ZeroMassEvent);
        }
        Pmf::normalize(self.domain, &weights)
    }

    pub fn max_abs_diff(&self, other: &Pmf) -> Result<f64> {
        if self.domain != other.domain {
            return Err(ProbError::DomainMismatch(format!(
                "{} vs {}",
                self.domain, other.domain
            )));
        }
        Ok(self
            .mass
            .iter()
            .zip(&other.mass)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max))
    }
}

/// Joint distribution over `(x, o)` cells, `x` from a domain and `o` from a
/// labelled list of observations. Stored row-major by `x`.
#[derive(Debug, Clone, PartialEq)]
pub struct JointPmf {
    x_domain: FiniteDomain,
    observations: Vec<String>,
    mass: Vec<f64>,
}

impl JointPmf {
    /// Builds a joint from unnormalized cell weights (`weights[x][o]` flattened).
    pub fn normalize(
        x_domain: FiniteDomain,
        observations: Vec<String>,
        weights: Vec<f64>,
    ) -> Result<Self> {
        if observations.is_empty() {
            return Err(ProbError::InvalidDistribution("no observations".into()));
        }
        if weights.len() != x_domain.len() * observations.len() {
            return Err(ProbError::DomainMismatch(format!(
                "{} cells for a {}x{} table",
                weights.len(),
                x_domain.len(),
                observations.len()
            )));
        }
        let total = check_weights(&weights)?;
        Ok(Self {
            x_domain,
            observations,
            mass: weights.into_iter().map(|w| w / total).collect(),
        })
    }

    pub fn x_domain(&self) -> FiniteDomain {
        self.x_domain
    }

    pub fn observations(&self) -> &[String] {
        &self.observations
    }

    pub fn n_obs(&self) -> usize {
        self.observations.len()
    }

    pub fn cells(&self) -> &[f64] {
        &self.mass
    }

    /// Mass at (x index, observation index).
    pub fn get(&self, xi: usize, oj: usize) -> f64 {
        self.mass[xi * self.observations.len() + oj]
    }

    pub fn marginal_x(&self) -> Pmf {
        let n_obs = self.observations.len();
        let mass = self.mass.chunks(n_obs).map(|row| row.iter().sum()).collect();
        Pmf {
            domain: self.x_domain,
            mass,
        }
    }

    /// Observation marginal, in observation order.
    pub fn marginal_o(&self) -> Vec<f64> {
        let n_obs = self.observations.len();
        let mut out = vec![0.0; n_obs];
        for row in self.mass.chunks(n_obs) {
            for (acc, p) in out.iter_mut().zip(row) {
                *acc += p;
            }
        }
        out
    }

    /// `P(x | o)` for observation index `oj`.
    pub fn conditional_x(&self, oj: usize) -> Result<Pmf> {
        let column: Vec<f64> = (0..self.x_domain.len()).map(|xi| self.get(xi, oj)).collect();
        if column.iter().all(|p| *p == 0.0) {
            return Err(ProbError::ZeroMassEvent);
        }
        Pmf::normalize(self.x_domain, &column)
    }

    /// Multiplies every cell by `factor(x index, o index)` and renormalizes.
    /// Fails with [`ProbError::ZeroMassEvent`] when nothing survives.
    pub fn reweight(&self, factor: impl Fn(usize, usize) -> f64) -> Result<JointPmf> {
        let n_obs = self.observations.len();
        let weights: Vec<f64> = self
            .mass
            .iter()
            .enumerate()
            .map(|(c, p)| {
                let f = factor(c / n_obs, c % n_obs);
                if *p == 0.0 || f == 0.0 {
                    0.0
                } else {
                    p * f
                }
            })
            .collect();
        if weights.iter().all(|w| *w == 0.0) {
            return Err(ProbError::ZeroMassEvent);
        }
        JointPmf::normalize(self.x_domain, self.observations.clone(), weights)
    }
}

/// Extended-real speaker utility; `-inf` marks an unusable message.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
pub struct Utility(f64);

impl Utility {
    pub const NEG_INFINITY: Utility = Utility(f64::NEG_INFINITY);

    /// Panics on NaN or `+inf`, neither of which is a utility.
    pub fn new(value: f64) -> Self {
        assert!(
            !value.is_nan() && value != f64::INFINITY,
            "utility must be finite or -inf, got {value}"
        );
        Utility(value)
    }

    pub fn value(self) -> f64 {
        self.0
    }

    pub fn is_finite(self) -> bool {
        self.0.is_finite()
    }
}

/// Natural-log KL divergence `D(p || q)`; `+inf` when `p` puts mass where `q`
/// has none. Terms with `p(k) = 0` contribute nothing.
pub fn kl_divergence(p: &Pmf, q: &Pmf) -> Result<f64> {
    if p.domain != q.domain {
        return Err(ProbError::DomainMismatch(format!(
            "{} vs {}",
            p.domain, q.domain
        )));
    }
    let mut total = 0.0;
    for (pk, qk) in p.mass.iter().zip(&q.mass) {
        if *pk == 0.0 {
            continue;
        }
        if *qk == 0.0 {
            return Ok(f64::INFINITY);
        }
        total += pk * (pk.ln() - qk.ln());
    }
    // rounding can leave a tiny negative value for p == q up to ulps
    Ok(total.max(0.0))
}

/// `log(sum(exp(v)))` with max-subtraction. Empty or all `-inf` gives `-inf`.
pub fn log_sum_exp(values: &[f64]) -> f64 {
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return f64::NEG_INFINITY;
    }
    max + values.iter().map(|v| (v - max).exp()).sum::<f64>().ln()
}

/// SoftMax choice rule: entry `i` is proportional to `exp(lambda * u_i)`.
pub fn softmax(utilities: &[Utility], lambda: f64) -> Result<Vec<f64>> {
    if !(lambda > 0.0 && lambda.is_finite()) {
        return Err(ProbError::InvalidLambda(lambda));
    }
    let max = utilities
        .iter()
        .map(|u| u.0)
        .fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return Err(ProbError::NoAdmissibleOption);
    }
    let scaled: Vec<f64> = utilities
        .iter()
        .map(|u| {
            if u.is_finite() {
                (lambda * (u.0 - max)).exp()
            } else {
                0.0
            }
        })
        .collect();
    let total: f64 = scaled.iter().sum();
    Ok(scaled.into_iter().map(|s| s / total).collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn d(lo: i64, hi: i64) -> FiniteDomain {
        FiniteDomain::new(lo, hi).unwrap()
    }

    #[test]
    fn normalize_observation_weights() {
        let w = [1.0, 4.0, 16.0, 64.0, 256.0, 1.0, 4.0, 16.0, 64.0];
        let p = Pmf::normalize(d(0, 8), &w).unwrap();
        let expected = [
            1.0 / 426.0,
            2.0 / 213.0,
            8.0 / 213.0,
            32.0 / 213.0,
            128.0 / 213.0,
            1.0 / 426.0,
            2.0 / 213.0,
            8.0 / 213.0,
            32.0 / 213.0,
        ];
        for (a, b) in p.mass().iter().zip(expected) {
            assert!((a - b).abs() < 1e-15);
        }
    }

    #[test]
    fn normalize_simple_cases() {
        let p = Pmf::normalize(d(0, 3), &[1.0; 4]).unwrap();
        assert_eq!(p.mass(), &[0.25; 4]);
        let p = Pmf::normalize(d(0, 1), &[0.0, 3.0]).unwrap();
        assert_eq!(p.mass(), &[0.0, 1.0]);
    }

    #[test]
    fn normalize_rejects_bad_weights() {
        assert!(matches!(
            Pmf::normalize(d(0, 1), &[0.0, 0.0]),
            Err(ProbError::InvalidDistribution(_))
        ));
        assert!(matches!(
            Pmf::normalize(d(0, 1), &[1.0, -0.5]),
            Err(ProbError::InvalidDistribution(_))
        ));
        assert!(matches!(
            Pmf::normalize(d(0, 1), &[1.0]),
            Err(ProbError::DomainMismatch(_))
        ));
    }

    #[test]
    fn domain_rejects_inverted_bounds() {
        assert!(FiniteDomain::new(3, 2).is_err());
        assert_eq!(d(4, 4).len(), 1);
    }

    #[test]
    fn condition_uniform_on_inner_interval() {
        let p = Pmf::uniform(d(0, 8));
        let c = p.condition(&(1..=7).collect()).unwrap();
        assert_eq!(c.prob(0), 0.0);
        assert_eq!(c.prob(8), 0.0);
        for k in 1..=7 {
            assert!((c.prob(k) - 1.0 / 7.0).abs() < 1e-15);
        }
    }

    #[test]
    fn condition_identity_and_point() {
        let p = Pmf::normalize(d(0, 3), &[1.0, 2.0, 3.0, 4.0]).unwrap();
        let all: BTreeSet<i64> = (0..=3).collect();
        assert!(p.condition(&all).unwrap().max_abs_diff(&p).unwrap() < 1e-15);
        let pt = Pmf::point(d(0, 8), 4).unwrap();
        assert_eq!(pt.condition(&[4].into()).unwrap(), pt);
    }

    #[test]
    fn condition_on_null_event_is_distinct_error() {
        let pt = Pmf::point(d(0, 8), 4).unwrap();
        assert_eq!(pt.condition(&[1, 2].into()), Err(ProbError::ZeroMassEvent));
    }

    #[test]
    fn kl_conventions() {
        let p = Pmf::normalize(d(0, 2), &[0.0, 1.0, 1.0]).unwrap();
        assert_eq!(kl_divergence(&p, &p).unwrap(), 0.0);
        let q = Pmf::normalize(d(0, 2), &[1.0, 1.0, 0.0]).unwrap();
        assert_eq!(kl_divergence(&p, &q).unwrap(), f64::INFINITY);
        // zero p-mass where q is zero is harmless
        let r = Pmf::normalize(d(0, 2), &[0.0, 1.0, 3.0]).unwrap();
        assert!(kl_divergence(&p, &r).unwrap().is_finite());
        let other = Pmf::uniform(d(0, 3));
        assert!(kl_divergence(&p, &other).is_err());
    }

    #[test]
    fn softmax_cases() {
        let u = [Utility::new(-1.0); 3];
        let s = softmax(&u, 10.0).unwrap();
        for p in s {
            assert!((p - 1.0 / 3.0).abs() < 1e-15);
        }
        let s = softmax(&[Utility::new(0.0), Utility::NEG_INFINITY], 10.0).unwrap();
        assert_eq!(s, vec![1.0, 0.0]);
        assert_eq!(
            softmax(&[Utility::NEG_INFINITY; 2], 1.0),
            Err(ProbError::NoAdmissibleOption)
        );
        assert!(matches!(
            softmax(&[Utility::new(0.0)], 0.0),
            Err(ProbError::InvalidLambda(_))
        ));
    }

    #[test]
    fn joint_marginals() {
        let j = JointPmf::normalize(
            d(0, 1),
            vec!["a".into(), "b".into()],
            vec![1.0, 2.0, 3.0, 4.0],
        )
        .unwrap();
        let x = j.marginal_x();
        assert!((x.prob(0) - 0.3).abs() < 1e-15 && (x.prob(1) - 0.7).abs() < 1e-15);
        let o = j.marginal_o();
        assert!((o[0] - 0.4).abs() < 1e-15 && (o[1] - 0.6).abs() < 1e-15);
        let c = j.conditional_x(1).unwrap();
        assert!((c.prob(0) - 2.0 / 6.0).abs() < 1e-15);
    }

    #[test]
    fn single_column_joint_marginal_is_column() {
        let j = JointPmf::normalize(d(0, 2), vec!["o".into()], vec![2.0, 1.0, 1.0]).unwrap();
        assert_eq!(j.marginal_x().mass(), &[0.5, 0.25, 0.25]);
    }

    #[test]
    fn log_sum_exp_handles_sentinels() {
        assert_eq!(log_sum_exp(&[]), f64::NEG_INFINITY);
        assert_eq!(log_sum_exp(&[f64::NEG_INFINITY, 0.0]), 0.0);
        assert!((log_sum_exp(&[1000.0, 1000.0]) - (1000.0 + 2f64.ln())).abs() < 1e-12);
    }
}
