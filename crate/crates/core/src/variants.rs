//! Mixture listener for "around": the posterior is a mixture of the prior
//! conditioned on each candidate interval, weighted by the *prior* radius
//! distribution. The Bayesian listener is the same mixture with *posterior*
//! radius weights; [`posterior_mixture_check`] tests that identity.

use std::collections::BTreeSet;

use crate::prob::{FiniteDomain, JointPmf, Pmf};
use crate::semantics::{
    extension, literal_listener, literal_marginal, uniform_around_posterior_exact, Message, RadiusPrior, Result,
    SemanticsError,
};

fn interval(domain: FiniteDomain, n: i64, radius: u32) -> BTreeSet<i64> {
    extension(&Message::Around(n), radius, domain)
}

fn zero_interval(n: i64, radius: u32) -> SemanticsError {
    SemanticsError::ZeroEvidence(format!("interval [{}, {}]", n - radius as i64, n + radius as i64))
}

/// `P'(x = k | around n) = sum_i P(x = k | x in [n - i, n + i]) P(y = i)`.
pub fn alt_literal_listener(n: i64, x_prior: &Pmf, rp: &RadiusPrior) -> Result<Pmf> {
    let domain = x_prior.domain();
    Message::Around(n).validate(domain)?;
    let mut mix = vec![0.0; domain.len()];
    for (radius, w) in rp.mass().iter().enumerate() {
        if *w == 0.0 {
            continue;
        }
        let conditioned = x_prior
            .condition(&interval(domain, n, radius as u32))
            .map_err(|_| zero_interval(n, radius as u32))?;
        for (acc, p) in mix.iter_mut().zip(conditioned.mass()) {
            *acc += w * p;
        }
    }
    Ok(Pmf::normalize(domain, &mix)?)
}

/// Joint `(x, o)` version used as a level-0 listener. `between` messages are
/// plain conditioning, as for the Bayesian listener.
pub fn alt_literal_listener_joint(message: &Message, prior: &JointPmf, rp: &RadiusPrior) -> Result<JointPmf> {
    let n = match *message {
        Message::Between(..) => return literal_listener(message, prior, rp),
        Message::Around(n) => n,
    };
    let domain = prior.x_domain();
    message.validate(domain)?;
    let x_marginal = prior.marginal_x();
    // Each cell of P(x, o | I_i) is P(x, o) / P(I_i) inside the interval, so
    // the mixture only rescales the prior per x.
    let mut factors = vec![0.0; domain.len()];
    for (radius, w) in rp.mass().iter().enumerate() {
        if *w == 0.0 {
            continue;
        }
        let event = interval(domain, n, radius as u32);
        let mass = x_marginal.probability_of(&event);
        if mass == 0.0 {
            return Err(zero_interval(n, radius as u32));
        }
        for k in &event {
            factors[domain.index_of(*k).expect("clamped")] += w / mass;
        }
    }
    Ok(prior.reweight(|xi, _| factors[xi])?)
}

/// Both sides of the posterior-mixture identity.
#[derive(Debug, Clone, PartialEq)]
pub struct MixtureReport {
    /// `P_post(x)` from the Bayesian listener.
    pub bayesian: Pmf,
    /// `sum_i P(x | I_i) P_post(y = i)` from exhaustive `(x, y)` enumeration.
    pub mixture: Pmf,
    /// `P_post(y)`.
    pub radius_posterior: Vec<f64>,
    pub max_deviation: f64,
}

impl MixtureReport {
    pub const TOLERANCE: f64 = 1e-12;

    pub fn holds(&self) -> bool {
        self.max_deviation <= Self::TOLERANCE
    }
}

/// Enumerates the Bayesian joint posterior over `(x, y)` directly, forms the
/// mixture with posterior radius weights and compares it with the Bayesian
/// listener's x-posterior.
pub fn posterior_mixture_check(n: i64, x_prior: &Pmf, rp: &RadiusPrior) -> Result<MixtureReport> {
    let domain = x_prior.domain();
    let message = Message::Around(n);
    message.validate(domain)?;
    let mut joint = vec![vec![0.0; rp.mass().len()]; domain.len()];
    let mut total = 0.0;
    for (xi, k) in domain.values().enumerate() {
        for (radius, w) in rp.mass().iter().enumerate() {
            if (n - k).unsigned_abs() <= radius as u64 {
                let cell = x_prior.mass()[xi] * w;
                joint[xi][radius] = cell;
                total += cell;
            }
        }
    }
    if total == 0.0 {
        return Err(SemanticsError::ZeroEvidence(message.to_string()));
    }
    let mut radius_posterior = vec![0.0; rp.mass().len()];
    for row in &joint {
        for (acc, cell) in radius_posterior.iter_mut().zip(row) {
            *acc += cell / total;
        }
    }
    let mut mix = vec![0.0; domain.len()];
    for (radius, w) in rp.mass().iter().enumerate() {
        if *w == 0.0 {
            continue;
        }
        let conditioned = x_prior
            .condition(&interval(domain, n, radius as u32))
            .map_err(|_| zero_interval(n, radius as u32))?;
        for (acc, p) in mix.iter_mut().zip(conditioned.mass()) {
            *acc += radius_posterior[radius] * p;
        }
    }
    let mixture = Pmf::normalize(domain, &mix)?;
    let bayesian = literal_marginal(&message, x_prior, rp)?;
    let max_deviation = bayesian.max_abs_diff(&mixture)?;
    Ok(MixtureReport {
        bayesian,
        mixture,
        radius_posterior,
        max_deviation,
    })
}

/// `(k, P(x = k | around n))` for the Bayesian listener with uniform priors
/// on `[0, 2n]` and on radii `[0, n]`, evaluated exactly.
pub fn bayesian_uniform_curve(n: u32) -> Vec<(i64, f64)> {
    uniform_around_posterior_exact(n)
        .iter()
        .enumerate()
        .map(|(k, p)| (k as i64, num_traits::ToPrimitive::to_f64(p).expect("finite rational")))
        .collect()
}

/// The mixture listener's curve for the same uniform setup.
pub fn mixture_uniform_curve(n: u32) -> Result<Vec<(i64, f64)>> {
    let domain = FiniteDomain::new(0, 2 * n as i64)?;
    let pmf = alt_literal_listener(n as i64, &Pmf::uniform(domain), &RadiusPrior::uniform(n))?;
    Ok(domain.values().zip(pmf.mass().iter().copied()).collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn dom(lo: i64, hi: i64) -> FiniteDomain {
        FiniteDomain::new(lo, hi).unwrap()
    }

    fn close(a: &[f64], b: &[f64], tol: f64) {
        assert_eq!(a.len(), b.len());
        for (x, y) in a.iter().zip(b) {
            assert!((x - y).abs() <= tol, "{a:?} vs {b:?}");
        }
    }

    #[test]
    fn small_example_differs_from_bayesian() {
        let prior = Pmf::uniform(dom(0, 2));
        let rp = RadiusPrior::uniform(1);
        let alt = alt_literal_listener(1, &prior, &rp).unwrap();
        close(alt.mass(), &[1.0 / 6.0, 2.0 / 3.0, 1.0 / 6.0], 1e-15);
        let bayes = literal_marginal(&Message::Around(1), &prior, &rp).unwrap();
        close(bayes.mass(), &[0.25, 0.5, 0.25], 1e-15);
    }

    #[test]
    fn point_radius_is_conditioning() {
        let prior = Pmf::normalize(dom(0, 8), &[1.0, 2.0, 3.0, 4.0, 5.0, 4.0, 3.0, 2.0, 1.0]).unwrap();
        let rp = RadiusPrior::point(2);
        let alt = alt_literal_listener(4, &prior, &rp).unwrap();
        let cond = prior.condition(&(2..=6).collect()).unwrap();
        close(alt.mass(), cond.mass(), 1e-15);
        let report = posterior_mixture_check(4, &prior, &rp).unwrap();
        assert!(report.max_deviation <= 1e-15);
        close(report.bayesian.mass(), cond.mass(), 1e-15);
    }

    #[test]
    fn mixture_identity_uniform() {
        let report = posterior_mixture_check(4, &Pmf::uniform(dom(0, 8)), &RadiusPrior::uniform(4)).unwrap();
        assert!(report.holds(), "{}", report.max_deviation);
        let ys: f64 = report.radius_posterior.iter().sum();
        assert!((ys - 1.0).abs() < 1e-12);
    }

    #[test]
    fn zero_mass_interval_is_an_error() {
        let prior = Pmf::normalize(dom(0, 4), &[1.0, 1.0, 0.0, 1.0, 1.0]).unwrap();
        let err = alt_literal_listener(2, &prior, &RadiusPrior::uniform(2)).unwrap_err();
        assert!(matches!(err, SemanticsError::ZeroEvidence(_)));
    }

    #[test]
    fn joint_version_marginalizes_to_pmf_version() {
        let joint = JointPmf::normalize(dom(0, 4), vec!["a".into(), "b".into()], vec![1.0, 2.0, 3.0, 1.0, 2.0, 2.0, 1.0, 3.0, 2.0, 1.0]).unwrap();
        let rp = RadiusPrior::uniform(2);
        let j = alt_literal_listener_joint(&Message::Around(2), &joint, &rp).unwrap();
        let p = alt_literal_listener(2, &joint.marginal_x(), &rp).unwrap();
        assert!(j.marginal_x().max_abs_diff(&p).unwrap() < 1e-15);
        let b = alt_literal_listener_joint(&Message::Between(1, 2), &joint, &rp).unwrap();
        assert_eq!(b.marginal_x().prob(0), 0.0);
    }

    #[test]
    fn curves_have_41_points() {
        let bayes = bayesian_uniform_curve(20);
        assert_eq!(bayes.len(), 41);
        assert!((bayes[20].1 - 21.0 / 441.0).abs() < 1e-15);
        let mix = mixture_uniform_curve(20).unwrap();
        assert_eq!(mix.len(), 41);
        assert!(mix[20].1 > bayes[20].1);
        let total: f64 = mix.iter().map(|p| p.1).sum();
        assert!((total - 1.0).abs() < 1e-12);
    }
}
