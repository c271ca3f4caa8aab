//! Message meanings and the literal listener.
//!
//! `between a and b` is plain conditioning on `[a, b]`. `around n` leaves the
//! radius `y` of its interval `[n - y, n + y]` open: the listener holds a prior
//! over `y` and updates jointly, which after summing `y` out weights each
//! world value `k` by the tail mass `P(y >= |n - k|)`.
//!
//! The weighting code is generic over the number type so the same path runs
//! in `f64` and in exact rationals.

use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::Zero;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::prob::{FiniteDomain, JointPmf, Pmf, ProbError};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SemanticsError {
    #[error("cannot parse message {0:?}: expected \"around N\", \"between A and B\" or \"exactly K\"")]
    Parse(String),
    #[error("message {0}: lower bound exceeds upper bound")]
    InvertedInterval(String),
    #[error("{what} {value} lies outside domain {domain}")]
    OutOfDomain {
        what: &'static str,
        value: i64,
        domain: FiniteDomain,
    },
    #[error("message {0} is incompatible with the whole prior support")]
    ZeroEvidence(String),
    #[error("zero prior mass at x = {0}")]
    ZeroPrior(i64),
    #[error("zero posterior mass at x = {0}; ratio undefined")]
    ZeroDenominator(i64),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error(transparent)]
    Prob(#[from] ProbError),
}

pub type Result<T> = std::result::Result<T, SemanticsError>;

/// A message alternative. `exactly k` is `Between(k, k)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum Message {
    Between(i64, i64),
    Around(i64),
}

impl Message {
    pub fn between(a: i64, b: i64) -> Result<Self> {
        let m = Message::Between(a, b);
        if a > b {
            return Err(SemanticsError::InvertedInterval(m.to_string()));
        }
        Ok(m)
    }

    pub fn exactly(k: i64) -> Self {
        Message::Between(k, k)
    }

    pub fn around(n: i64) -> Self {
        Message::Around(n)
    }

    /// Checks the numbers a message mentions against a domain.
    pub fn validate(&self, domain: FiniteDomain) -> Result<()> {
        let (what, values): (&'static str, Vec<i64>) = match *self {
            Message::Between(a, b) => {
                if a > b {
                    return Err(SemanticsError::InvertedInterval(self.to_string()));
                }
                ("interval bound", vec![a, b])
            }
            Message::Around(n) => ("around target", vec![n]),
        };
        for value in values {
            if !domain.contains(value) {
                return Err(SemanticsError::OutOfDomain {
                    what,
                    value,
                    domain,
                });
            }
        }
        Ok(())
    }

    /// Compact label used in table headers ("b. 3 and 5").
    pub fn short_label(&self) -> String {
        match *self {
            Message::Between(a, b) if a == b => format!("Exactly {a}"),
            Message::Between(a, b) => format!("b. {a} and {b}"),
            Message::Around(n) => format!("around {n}"),
        }
    }
}

impl fmt::Display for Message {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            Message::Between(a, b) if a == b => write!(f, "exactly {a}"),
            Message::Between(a, b) => write!(f, "between {a} and {b}"),
            Message::Around(n) => write!(f, "around {n}"),
        }
    }
}

impl FromStr for Message {
    type Err = SemanticsError;

    fn from_str(s: &str) -> Result<Self> {
        let lower = s.to_lowercase();
        let words: Vec<&str> = lower.split_whitespace().collect();
        let num = |w: &str| w.parse::<i64>().map_err(|_| SemanticsError::Parse(s.into()));
        match words.as_slice() {
            ["around", n] => Ok(Message::Around(num(n)?)),
            ["exactly", k] => Ok(Message::exactly(num(k)?)),
            ["between", a, "and", b] => Message::between(num(a)?, num(b)?),
            _ => Err(SemanticsError::Parse(s.into())),
        }
    }
}

impl TryFrom<String> for Message {
    type Error = SemanticsError;
    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<Message> for String {
    fn from(m: Message) -> String {
        m.to_string()
    }
}

/// Prior over the radius `y` of an "around" interval, on `0..=y_max`.
#[derive(Debug, Clone, PartialEq)]
pub struct RadiusPrior {
    pmf: Pmf,
}

impl RadiusPrior {
    pub fn uniform(y_max: u32) -> Self {
        let domain = FiniteDomain::new(0, y_max as i64).expect("non-negative y_max");
        Self {
            pmf: Pmf::uniform(domain),
        }
    }

    pub fn point(radius: u32) -> Self {
        let domain = FiniteDomain::new(0, radius as i64).expect("non-negative radius");
        Self {
            pmf: Pmf::point(domain, radius as i64).expect("radius in its own domain"),
        }
    }

    /// Explicit weights for `y = 0, 1, ..`, normalized.
    pub fn from_weights(weights: &[f64]) -> Result<Self> {
        if weights.is_empty() {
            return Err(ProbError::InvalidDistribution("empty radius prior".into()).into());
        }
        let domain = FiniteDomain::new(0, weights.len() as i64 - 1)?;
        Ok(Self {
            pmf: Pmf::normalize(domain, weights)?,
        })
    }

    pub fn y_max(&self) -> u32 {
        self.pmf.domain().hi() as u32
    }

    pub fn mass(&self) -> &[f64] {
        self.pmf.mass()
    }

    pub fn pmf(&self) -> &Pmf {
        &self.pmf
    }

    /// `P(y >= distance)`.
    pub fn tail_mass(&self, distance: u64) -> f64 {
        tail(self.pmf.mass(), distance)
    }

    /// Radii with positive prior mass.
    pub fn support(&self) -> Vec<u32> {
        self.pmf.support().into_iter().map(|y| y as u32).collect()
    }
}

fn tail<T: Clone + Zero>(radius: &[T], distance: u64) -> T {
    radius
        .iter()
        .skip(distance as usize)
        .fold(T::zero(), |acc, p| acc + p.clone())
}

/// World values a message is true of, clamped to the domain. The radius is
/// ignored for `between`.
pub fn extension(message: &Message, radius: u32, domain: FiniteDomain) -> BTreeSet<i64> {
    let (a, b) = match *message {
        Message::Between(a, b) => (a, b),
        Message::Around(n) => (n - radius as i64, n + radius as i64),
    };
    (a.max(domain.lo())..=b.min(domain.hi())).collect()
}

/// Per-world likelihood of `around n` once the radius is summed out:
/// `P(y >= |n - k|)` for every `k` in the domain.
pub fn around_weights<T: Clone + Zero>(domain: FiniteDomain, n: i64, radius: &[T]) -> Vec<T> {
    domain
        .values()
        .map(|k| tail(radius, (n - k).unsigned_abs()))
        .collect()
}

/// Around-update of an x-prior: `P(k | around n) ∝ P(k) P(y >= |n - k|)`.
/// `None` when no prior mass survives.
pub fn around_posterior<T>(domain: FiniteDomain, prior: &[T], n: i64, radius: &[T]) -> Option<Vec<T>>
where
    T: Clone + Zero + std::ops::Mul<Output = T> + std::ops::Div<Output = T>,
{
    let unnormalized: Vec<T> = prior
        .iter()
        .zip(around_weights(domain, n, radius))
        .map(|(p, w)| p.clone() * w)
        .collect();
    // D: the sum of all numerator instances
    let evidence = unnormalized.iter().fold(T::zero(), |acc, v| acc + v.clone());
    if evidence.is_zero() {
        return None;
    }
    Some(unnormalized.into_iter().map(|v| v / evidence.clone()).collect())
}

/// Level-0 listener over the joint `(x, o)`. The message carries no direct
/// information about `o`: each cell is scaled by a factor depending on `x`
/// alone.
pub fn literal_listener(message: &Message, prior: &JointPmf, radius: &RadiusPrior) -> Result<JointPmf> {
    let domain = prior.x_domain();
    message.validate(domain)?;
    let factors: Vec<f64> = match *message {
        Message::Between(a, b) => domain
            .values()
            .map(|k| if (a..=b).contains(&k) { 1.0 } else { 0.0 })
            .collect(),
        Message::Around(n) => around_weights(domain, n, radius.mass()),
    };
    prior
        .reweight(|xi, _| factors[xi])
        .map_err(|e| match e {
            ProbError::ZeroMassEvent => SemanticsError::ZeroEvidence(message.to_string()),
            other => other.into(),
        })
}

/// Literal listener's posterior over `x` starting from an x-only prior.
pub fn literal_marginal(message: &Message, x_prior: &Pmf, radius: &RadiusPrior) -> Result<Pmf> {
    let joint = JointPmf::normalize(x_prior.domain(), vec!["-".into()], x_prior.mass().to_vec())?;
    Ok(literal_listener(message, &joint, radius)?.marginal_x())
}

fn ratio(n: i64, d: i64) -> BigRational {
    BigRational::new(BigInt::from(n), BigInt::from(d))
}

/// Exact `P(x = k | around n)` under a uniform prior on `[0, 2n]` and a
/// uniform radius prior on `[0, n]`: `(n - |n - k| + 1) / (n + 1)^2`.
pub fn closed_form_uniform_around(n: u32, k: i64) -> Result<BigRational> {
    let n = n as i64;
    if !(0..=2 * n).contains(&k) {
        return Err(SemanticsError::OutOfDomain {
            what: "value",
            value: k,
            domain: FiniteDomain::new(0, 2 * n)?,
        });
    }
    Ok(ratio(n - (n - k).abs() + 1, (n + 1) * (n + 1)))
}

/// The around-update evaluated in exact rationals for the uniform setup of
/// [`closed_form_uniform_around`]; one entry per `k` in `[0, 2n]`.
pub fn uniform_around_posterior_exact(n: u32) -> Vec<BigRational> {
    let domain = FiniteDomain::new(0, 2 * n as i64).expect("valid domain");
    let prior = vec![ratio(1, 2 * n as i64 + 1); domain.len()];
    let radius = vec![ratio(1, n as i64 + 1); n as usize + 1];
    around_posterior(domain, &prior, n as i64, &radius).expect("uniform prior has positive evidence")
}

/// Same setup in `f64` through the joint literal listener.
pub fn uniform_around_posterior(n: u32) -> Result<Pmf> {
    let domain = FiniteDomain::new(0, 2 * n as i64)?;
    literal_marginal(&Message::Around(n as i64), &Pmf::uniform(domain), &RadiusPrior::uniform(n))
}

/// Outcome of comparing posterior and prior odds between two world values.
#[derive(Debug, Clone, PartialEq)]
pub struct RatioReport {
    pub near: i64,
    pub far: i64,
    pub posterior_ratio: f64,
    pub prior_ratio: f64,
    /// `posterior_ratio > prior_ratio`.
    pub holds: bool,
    /// Whether the radius prior satisfies the conditions under which the
    /// inequality must be strict (always false for `between`).
    pub strictness_expected: bool,
}

impl RatioReport {
    /// `posterior_ratio / prior_ratio - 1`; positive when the inequality holds.
    pub fn margin(&self) -> f64 {
        self.posterior_ratio / self.prior_ratio - 1.0
    }
}

/// Ratio inequality for `around n` at the points `n - k1` (nearer) and
/// `n - k2` (farther), `k1 < k2`.
pub fn ratio_inequality_report(
    x_prior: &Pmf,
    radius: &RadiusPrior,
    n: i64,
    k1: u32,
    k2: u32,
) -> Result<RatioReport> {
    if k1 >= k2 {
        return Err(SemanticsError::InvalidArgument(format!(
            "need k1 < k2, got {k1} and {k2}"
        )));
    }
    ratio_report_at(x_prior, radius, &Message::Around(n), n - k1 as i64, n - k2 as i64)
}

/// Posterior vs prior odds of `near` against `far` after `message`. Works for
/// either side of an around-target and for `between` messages.
pub fn ratio_report_at(
    x_prior: &Pmf,
    radius: &RadiusPrior,
    message: &Message,
    near: i64,
    far: i64,
) -> Result<RatioReport> {
    let domain = x_prior.domain();
    for value in [near, far] {
        if !domain.contains(value) {
            return Err(SemanticsError::OutOfDomain {
                what: "comparison point",
                value,
                domain,
            });
        }
        if x_prior.prob(value) == 0.0 {
            return Err(SemanticsError::ZeroPrior(value));
        }
    }
    let posterior = literal_marginal(message, x_prior, radius)?;
    if posterior.prob(far) == 0.0 {
        return Err(SemanticsError::ZeroDenominator(far));
    }
    let posterior_ratio = posterior.prob(near) / posterior.prob(far);
    let prior_ratio = x_prior.prob(near) / x_prior.prob(far);
    let strictness_expected = match *message {
        Message::Around(n) => {
            let d_near = (n - near).unsigned_abs();
            let d_far = (n - far).unsigned_abs();
            let between: f64 = radius
                .mass()
                .iter()
                .enumerate()
                .filter(|(i, _)| (d_near..d_far).contains(&(*i as u64)))
                .map(|(_, p)| p)
                .sum();
            d_near < d_far && between > 0.0 && radius.tail_mass(d_far) > 0.0
        }
        Message::Between(..) => false,
    };
    Ok(RatioReport {
        near,
        far,
        posterior_ratio,
        prior_ratio,
        holds: posterior_ratio > prior_ratio,
        strictness_expected,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn d(lo: i64, hi: i64) -> FiniteDomain {
        FiniteDomain::new(lo, hi).unwrap()
    }

    #[test]
    fn parse_and_display() {
        assert_eq!("around 4".parse::<Message>().unwrap(), Message::Around(4));
        assert_eq!("  Between 3   AND 5 ".parse::<Message>().unwrap(), Message::Between(3, 5));
        assert_eq!("EXACTLY 4".parse::<Message>().unwrap(), Message::Between(4, 4));
        assert_eq!(Message::Between(4, 4).to_string(), "exactly 4");
        assert_eq!(Message::Between(1, 7).to_string(), "between 1 and 7");
        assert!(matches!("between 5 and 3".parse::<Message>(), Err(SemanticsError::InvertedInterval(_))));
        assert!(matches!("around four".parse::<Message>(), Err(SemanticsError::Parse(_))));
        assert!(matches!("roughly 4".parse::<Message>(), Err(SemanticsError::Parse(_))));
    }

    #[test]
    fn validate_domain() {
        assert!(Message::Around(12).validate(d(0, 8)).is_err());
        assert!(Message::Between(0, 9).validate(d(0, 8)).is_err());
        assert!(Message::Around(0).validate(d(0, 8)).is_ok());
    }

    #[test]
    fn extension_examples() {
        let dom = d(0, 8);
        assert_eq!(extension(&Message::Around(4), 2, dom), (2..=6).collect());
        assert_eq!(extension(&Message::Around(4), 0, dom), [4].into());
        assert_eq!(extension(&Message::Around(1), 3, dom), (0..=4).collect());
        assert_eq!(extension(&Message::Between(3, 5), 4, dom), (3..=5).collect());
    }

    #[test]
    fn extension_clamps_like_set_intersection() {
        let dom = d(0, 8);
        for n in 0..=8 {
            for r in 0..=10u32 {
                let interval: BTreeSet<i64> = (n - r as i64..=n + r as i64).collect();
                let domain_set: BTreeSet<i64> = dom.values().collect();
                let expected: BTreeSet<i64> = interval.intersection(&domain_set).copied().collect();
                assert_eq!(extension(&Message::Around(n), r, dom), expected);
            }
        }
    }

    #[test]
    fn uniform_around_table_row() {
        let post = literal_marginal(&Message::Around(4), &Pmf::uniform(d(0, 8)), &RadiusPrior::uniform(4)).unwrap();
        let expected = [0.04, 0.08, 0.12, 0.16, 0.20, 0.16, 0.12, 0.08, 0.04];
        for (a, b) in post.mass().iter().zip(expected) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn point_radius_reduces_to_between() {
        let prior = Pmf::normalize(d(0, 8), &[1.0, 2.0, 3.0, 4.0, 5.0, 4.0, 3.0, 2.0, 9.0]).unwrap();
        for r in 0..=4 {
            let a = literal_marginal(&Message::Around(4), &prior, &RadiusPrior::point(r)).unwrap();
            let b = literal_marginal(&Message::Between(4 - r as i64, 4 + r as i64), &prior, &RadiusPrior::point(r)).unwrap();
            assert!(a.max_abs_diff(&b).unwrap() < 1e-15);
        }
    }

    #[test]
    fn zero_evidence_is_error() {
        let prior = Pmf::point(d(0, 8), 0).unwrap();
        let err = literal_marginal(&Message::Between(3, 5), &prior, &RadiusPrior::uniform(4));
        assert!(matches!(err, Err(SemanticsError::ZeroEvidence(_))));
        let err = literal_marginal(&Message::Around(4), &prior, &RadiusPrior::uniform(3));
        assert!(matches!(err, Err(SemanticsError::ZeroEvidence(_))));
    }

    #[test]
    fn closed_form_values() {
        assert_eq!(closed_form_uniform_around(4, 4).unwrap(), ratio(5, 25));
        assert_eq!(closed_form_uniform_around(20, 20).unwrap(), ratio(21, 441));
        assert_eq!(closed_form_uniform_around(20, 0).unwrap(), ratio(1, 441));
        assert!(closed_form_uniform_around(20, 41).is_err());
        assert!(closed_form_uniform_around(20, -1).is_err());
    }

    #[test]
    fn closed_form_sums_to_one() {
        for n in 0..=30u32 {
            let total = (0..=2 * n as i64)
                .map(|k| closed_form_uniform_around(n, k).unwrap())
                .fold(BigRational::zero(), |a, b| a + b);
            assert!(num_traits::One::is_one(&total));
        }
    }

    #[test]
    fn exact_path_matches_closed_form() {
        for n in [1u32, 4, 20] {
            let exact = uniform_around_posterior_exact(n);
            for (k, v) in exact.iter().enumerate() {
                assert_eq!(v, &closed_form_uniform_around(n, k as i64).unwrap());
            }
        }
    }

    #[test]
    fn ratio_uniform_example() {
        let prior = Pmf::uniform(d(0, 40));
        let r = ratio_inequality_report(&prior, &RadiusPrior::uniform(20), 20, 0, 5).unwrap();
        assert!((r.posterior_ratio - 21.0 / 16.0).abs() < 1e-12);
        assert!((r.prior_ratio - 1.0).abs() < 1e-15);
        assert!(r.holds && r.strictness_expected);
    }

    #[test]
    fn ratio_between_control_is_equal() {
        let prior = Pmf::normalize(d(0, 40), &(0..41).map(|i| 1.0 + (i % 7) as f64).collect::<Vec<_>>()).unwrap();
        let r = ratio_report_at(&prior, &RadiusPrior::uniform(20), &Message::Between(10, 30), 20, 15).unwrap();
        assert!((r.posterior_ratio / r.prior_ratio - 1.0).abs() < 1e-12);
        assert!(!r.strictness_expected);
    }

    #[test]
    fn ratio_errors() {
        let prior = Pmf::normalize(d(0, 8), &[0.0, 1.0, 1.0, 1.0, 1.0, 1.0, 1.0, 1.0, 1.0]).unwrap();
        let rp = RadiusPrior::uniform(4);
        assert!(matches!(ratio_inequality_report(&prior, &rp, 4, 2, 2), Err(SemanticsError::InvalidArgument(_))));
        assert!(matches!(ratio_inequality_report(&prior, &rp, 4, 0, 4), Err(SemanticsError::ZeroPrior(0))));
        assert!(matches!(ratio_inequality_report(&prior, &rp, 4, 0, 5), Err(SemanticsError::OutOfDomain { .. })));
        let narrow = RadiusPrior::uniform(1);
        assert!(matches!(ratio_inequality_report(&prior, &narrow, 4, 0, 3), Err(SemanticsError::ZeroDenominator(1))));
    }
}
