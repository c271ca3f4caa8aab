//! Experimental setups: observations, weights, the joint prior, and the TOML
//! scenario document.
//!
//! A scenario document looks like this (field names are normative):
//!
//! ```toml
//! lambda = 10.0
//! depth = 5
//! utility_kind = "marginal_kl"   # or "joint_standard"
//! model = "main"                 # main | lu | lu_marginal_utility | alt_listener
//! messages = ["exactly 4", "between 3 and 5", "around 4"]
//!
//! [domain]
//! lo = 0
//! hi = 8
//!
//! [radius_prior]
//! kind = "uniform"               # or "explicit" with mass = [..]
//! y_max = 4
//!
//! [[observations]]
//! label = "u_3_5"
//! kind = "uniform"               # uniform | binomial (a, b) or explicit (mass)
//! a = 3
//! b = 5
//! weight = 4.0
//!
//! [costs]                        # optional, only used by the LU models
//! "around 4" = 0.1
//! ```

use std::collections::{BTreeMap, HashSet};
use std::fmt;

use num_bigint::BigInt;
use num_rational::BigRational;
use serde::{Deserialize, Serialize};
use toml::Spanned;

use crate::prob::{FiniteDomain, JointPmf, Pmf, ProbError};
use crate::rsa::UtilityKind;
use crate::semantics::{Message, RadiusPrior};

/// Upper bound on recursion depth accepted from configuration.
pub const MAX_DEPTH: usize = 50;

/// Which model family a scenario runs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    /// Bayesian literal listener with the KL-utility recursion.
    Main,
    /// Standard lexical-uncertainty model.
    Lu,
    /// Lexical uncertainty with utilities over the x-marginal.
    LuMarginalUtility,
    /// Main recursion on top of the prior-weighted mixture literal listener.
    AltListener,
}

impl ModelKind {
    pub const ALL: [ModelKind; 4] = [
        ModelKind::Main,
        ModelKind::Lu,
        ModelKind::LuMarginalUtility,
        ModelKind::AltListener,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ModelKind::Main => "main",
            ModelKind::Lu => "lu",
            ModelKind::LuMarginalUtility => "lu_marginal_utility",
            ModelKind::AltListener => "alt_listener",
        }
    }
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for ModelKind {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        ModelKind::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| format!("unknown model {s:?}"))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ObservationKind {
    Uniform { a: i64, b: i64 },
    Binomial { a: i64, b: i64 },
    Explicit,
}

/// A possible private observation: its label, `P(x | o)` and prior weight.
#[derive(Debug, Clone, PartialEq)]
pub struct Observation {
    pub label: String,
    pub kind: ObservationKind,
    pub conditional: Pmf,
    pub weight: f64,
}

impl Observation {
    pub fn uniform(label: &str, domain: FiniteDomain, a: i64, b: i64, weight: f64) -> Result<Self, ProbError> {
        Ok(Self {
            label: label.into(),
            kind: ObservationKind::Uniform { a, b },
            conditional: uniform_obs(domain, a, b)?,
            weight,
        })
    }

    pub fn binomial(label: &str, domain: FiniteDomain, a: i64, b: i64, weight: f64) -> Result<Self, ProbError> {
        Ok(Self {
            label: label.into(),
            kind: ObservationKind::Binomial { a, b },
            conditional: binomial_peaked(domain, a, b)?,
            weight,
        })
    }
}

fn check_interval(domain: FiniteDomain, a: i64, b: i64) -> Result<(), ProbError> {
    if a > b || !domain.contains(a) || !domain.contains(b) {
        return Err(ProbError::DomainMismatch(format!(
            "interval [{a}, {b}] is not inside {domain}"
        )));
    }
    Ok(())
}

/// Uniform on `[a, b]`, zero elsewhere.
pub fn uniform_obs(domain: FiniteDomain, a: i64, b: i64) -> Result<Pmf, ProbError> {
    check_interval(domain, a, b)?;
    let weights: Vec<f64> = domain
        .values()
        .map(|k| if (a..=b).contains(&k) { 1.0 } else { 0.0 })
        .collect();
    Pmf::normalize(domain, &weights)
}

/// Binomial(b - a, 1/2) shifted onto `[a, b]`: mass at `a + j` is
/// `C(b - a, j) / 2^(b - a)`.
pub fn binomial_peaked(domain: FiniteDomain, a: i64, b: i64) -> Result<Pmf, ProbError> {
    check_interval(domain, a, b)?;
    let exact = binomial_peaked_exact(a, b);
    let mut mass = vec![0.0; domain.len()];
    let start = domain.index_of(a).expect("checked");
    for (j, p) in exact.iter().enumerate() {
        mass[start + j] = ratio_to_f64(p);
    }
    Pmf::normalize(domain, &mass)
}

/// Exact masses of [`binomial_peaked`] on `a..=b`.
pub fn binomial_peaked_exact(a: i64, b: i64) -> Vec<BigRational> {
    let n = (b - a) as u64;
    let denom = BigInt::from(1u8) << n;
    let mut coeff = BigInt::from(1u8);
    let mut out = Vec::with_capacity(n as usize + 1);
    for j in 0..=n {
        out.push(BigRational::new(coeff.clone(), denom.clone()));
        coeff = coeff * BigInt::from(n - j) / BigInt::from(j + 1);
    }
    out
}

fn ratio_to_f64(r: &BigRational) -> f64 {
    use num_traits::ToPrimitive;
    r.to_f64().expect("finite rational")
}

/// `P(x = k, o = o_i) = P(x = k | o_i) P(o_i)` with weights normalized.
pub fn build_joint_prior(observations: &[Observation]) -> Result<JointPmf, ProbError> {
    let first = observations
        .first()
        .ok_or_else(|| ProbError::InvalidDistribution("empty observation list".into()))?;
    let domain = first.conditional.domain();
    if let Some(o) = observations.iter().find(|o| o.conditional.domain() != domain) {
        return Err(ProbError::DomainMismatch(format!(
            "observation {} is over {}, expected {domain}",
            o.label,
            o.conditional.domain()
        )));
    }
    if let Some(o) = observations.iter().find(|o| !(o.weight > 0.0 && o.weight.is_finite())) {
        return Err(ProbError::InvalidDistribution(format!(
            "observation {} has non-positive weight {}",
            o.label, o.weight
        )));
    }
    let total: f64 = observations.iter().map(|o| o.weight).sum();
    let n_obs = observations.len();
    let mut cells = vec![0.0; domain.len() * n_obs];
    for (oj, o) in observations.iter().enumerate() {
        let p_o = o.weight / total;
        for (xi, p) in o.conditional.mass().iter().enumerate() {
            cells[xi * n_obs + oj] = p * p_o;
        }
    }
    JointPmf::normalize(
        domain,
        observations.iter().map(|o| o.label.clone()).collect(),
        cells,
    )
}

/// A complete experiment description.
#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub domain: FiniteDomain,
    pub observations: Vec<Observation>,
    pub messages: Vec<Message>,
    pub radius_prior: RadiusPrior,
    pub lambda: f64,
    pub depth: usize,
    pub utility_kind: UtilityKind,
    pub model: ModelKind,
    /// Per-message cost, aligned with `messages`. Only the LU models use it.
    pub costs: Vec<f64>,
}

impl Scenario {
    pub fn joint_prior(&self) -> Result<JointPmf, ProbError> {
        build_joint_prior(&self.observations)
    }

    pub fn labels(&self) -> Vec<String> {
        self.observations.iter().map(|o| o.label.clone()).collect()
    }

    pub fn observation_index(&self, label: &str) -> Option<usize> {
        self.observations.iter().position(|o| o.label == label)
    }

    pub fn with_model(mut self, model: ModelKind) -> Self {
        self.model = model;
        self
    }

    pub fn with_lambda(mut self, lambda: f64) -> Self {
        self.lambda = lambda;
        self
    }

    pub fn with_depth(mut self, depth: usize) -> Self {
        self.depth = depth;
        self
    }

    /// Checks every invariant a hand-built scenario could violate.
    pub fn validate(&self) -> Result<(), ScenarioError> {
        let err = |code, message: String| Err(ScenarioError { code, line: None, message });
        if self.observations.is_empty() {
            return err(ErrorCode::Schema, "at least one observation is required".into());
        }
        if self.messages.is_empty() {
            return err(ErrorCode::Schema, "at least one message is required".into());
        }
        let mut seen = HashSet::new();
        for o in &self.observations {
            if !seen.insert(o.label.as_str()) {
                return err(ErrorCode::DuplicateLabel, format!("duplicate observation label {:?}", o.label));
            }
            if !(o.weight > 0.0 && o.weight.is_finite()) {
                return err(ErrorCode::Weight, format!("observation {:?} has non-positive weight {}", o.label, o.weight));
            }
            if o.conditional.domain() != self.domain {
                return err(ErrorCode::OutOfDomain, format!("observation {:?} is not over {}", o.label, self.domain));
            }
        }
        for m in &self.messages {
            if let Err(e) = m.validate(self.domain) {
                return err(ErrorCode::OutOfDomain, e.to_string());
            }
        }
        if !(self.lambda > 0.0 && self.lambda.is_finite()) {
            return err(ErrorCode::Lambda, format!("lambda must be positive, got {}", self.lambda));
        }
        if self.depth == 0 || self.depth > MAX_DEPTH {
            return err(ErrorCode::Depth, format!("depth must be in 1..={MAX_DEPTH}, got {}", self.depth));
        }
        if self.costs.len() != self.messages.len() || self.costs.iter().any(|c| !(*c >= 0.0 && c.is_finite())) {
            return err(ErrorCode::Cost, "costs must be non-negative, one per message".into());
        }
        Ok(())
    }

    /// Serializes to the scenario document format.
    pub fn to_toml(&self) -> String {
        let observations = self
            .observations
            .iter()
            .map(|o| {
                let (kind, a, b, mass) = match o.kind {
                    ObservationKind::Uniform { a, b } => (ObsKindDoc::Uniform, Some(a), Some(b), None),
                    ObservationKind::Binomial { a, b } => (ObsKindDoc::Binomial, Some(a), Some(b), None),
                    ObservationKind::Explicit => (ObsKindDoc::Explicit, None, None, Some(o.conditional.mass().to_vec())),
                };
                ObservationOut {
                    label: o.label.clone(),
                    kind,
                    a,
                    b,
                    mass,
                    weight: o.weight,
                }
            })
            .collect();
        let rp = self.radius_prior.mass();
        let radius_prior = if rp.iter().all(|p| *p == rp[0]) {
            RadiusOut {
                kind: RadiusKindDoc::Uniform,
                y_max: Some(self.radius_prior.y_max()),
                mass: None,
            }
        } else {
            RadiusOut {
                kind: RadiusKindDoc::Explicit,
                y_max: None,
                mass: Some(rp.to_vec()),
            }
        };
        let costs: BTreeMap<String, f64> = self
            .messages
            .iter()
            .zip(&self.costs)
            .filter(|(_, c)| **c != 0.0)
            .map(|(m, c)| (m.to_string(), *c))
            .collect();
        let doc = ScenarioOut {
            lambda: self.lambda,
            depth: self.depth,
            utility_kind: self.utility_kind,
            model: self.model,
            messages: self.messages.iter().map(|m| m.to_string()).collect(),
            domain: DomainDoc {
                lo: self.domain.lo(),
                hi: self.domain.hi(),
            },
            radius_prior,
            observations,
            costs: (!costs.is_empty()).then_some(costs),
        };
        toml::to_string(&doc).expect("scenario serializes")
    }
}

/// The nine-observation, six-message setup on `0..=8` with weights
/// `1, 4, 16, 64, 256, 1, 4, 16, 64`, uniform radius prior on `0..=4`,
/// `lambda = 10`, depth 5.
pub fn paper_scenario() -> Scenario {
    let domain = FiniteDomain::new(0, 8).expect("valid domain");
    let mut observations = vec![Observation::uniform("=4", domain, 4, 4, 1.0).expect("in domain")];
    for (i, r) in (1..=4).enumerate() {
        let label = format!("u_{}_{}", 4 - r, 4 + r);
        observations.push(Observation::uniform(&label, domain, 4 - r, 4 + r, 4f64.powi(i as i32 + 1)).expect("in domain"));
    }
    for (i, r) in (1..=4).enumerate() {
        let label = format!("p_{}_{}", 4 - r, 4 + r);
        observations.push(Observation::binomial(&label, domain, 4 - r, 4 + r, 4f64.powi(i as i32)).expect("in domain"));
    }
    let messages = vec![
        Message::exactly(4),
        Message::Between(3, 5),
        Message::Between(2, 6),
        Message::Between(1, 7),
        Message::Between(0, 8),
        Message::Around(4),
    ];
    let costs = vec![0.0; messages.len()];
    Scenario {
        domain,
        observations,
        messages,
        radius_prior: RadiusPrior::uniform(4),
        lambda: 10.0,
        depth: 5,
        utility_kind: UtilityKind::MarginalKl,
        model: ModelKind::Main,
        costs,
    }
}

/// Category of a scenario-loading failure.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorCode {
    Syntax,
    Schema,
    Message,
    OutOfDomain,
    Pmf,
    Weight,
    Lambda,
    Depth,
    DuplicateLabel,
    Cost,
}

impl ErrorCode {
    pub fn as_str(self) -> &'static str {
        match self {
            ErrorCode::Syntax => "E-SYNTAX",
            ErrorCode::Schema => "E-SCHEMA",
            ErrorCode::Message => "E-MESSAGE",
            ErrorCode::OutOfDomain => "E-DOMAIN",
            ErrorCode::Pmf => "E-PMF",
            ErrorCode::Weight => "E-WEIGHT",
            ErrorCode::Lambda => "E-LAMBDA",
            ErrorCode::Depth => "E-DEPTH",
            ErrorCode::DuplicateLabel => "E-LABEL",
            ErrorCode::Cost => "E-COST",
        }
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub struct ScenarioError {
    pub code: ErrorCode,
    pub line: Option<usize>,
    pub message: String,
}

impl fmt::Display for ScenarioError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.line {
            Some(line) => write!(f, "line {line}: {}: {}", self.code.as_str(), self.message),
            None => write!(f, "{}: {}", self.code.as_str(), self.message),
        }
    }
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
enum ObsKindDoc {
    Uniform,
    Binomial,
    Explicit,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
enum RadiusKindDoc {
    Uniform,
    Explicit,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct DomainDoc {
    lo: i64,
    hi: i64,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct ObservationDoc {
    label: String,
    kind: ObsKindDoc,
    a: Option<i64>,
    b: Option<i64>,
    mass: Option<Vec<f64>>,
    weight: Spanned<f64>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RadiusDoc {
    kind: RadiusKindDoc,
    y_max: Option<u32>,
    mass: Option<Vec<f64>>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct ScenarioDoc {
    lambda: Spanned<f64>,
    depth: Option<Spanned<i64>>,
    utility_kind: Option<UtilityKind>,
    model: Option<ModelKind>,
    messages: Vec<Spanned<String>>,
    domain: Spanned<DomainDoc>,
    radius_prior: Spanned<RadiusDoc>,
    observations: Vec<Spanned<ObservationDoc>>,
    costs: Option<Spanned<BTreeMap<String, f64>>>,
}

#[derive(Serialize)]
struct ObservationOut {
    label: String,
    kind: ObsKindDoc,
    #[serde(skip_serializing_if = "Option::is_none")]
    a: Option<i64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    b: Option<i64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    mass: Option<Vec<f64>>,
    weight: f64,
}

#[derive(Serialize)]
struct RadiusOut {
    kind: RadiusKindDoc,
    #[serde(skip_serializing_if = "Option::is_none")]
    y_max: Option<u32>,
    #[serde(skip_serializing_if = "Option::is_none")]
    mass: Option<Vec<f64>>,
}

#[derive(Serialize)]
struct ScenarioOut {
    lambda: f64,
    depth: usize,
    utility_kind: UtilityKind,
    model: ModelKind,
    messages: Vec<String>,
    domain: DomainDoc,
    radius_prior: RadiusOut,
    observations: Vec<ObservationOut>,
    #[serde(skip_serializing_if = "Option::is_none")]
    costs: Option<BTreeMap<String, f64>>,
}

struct LineIndex<'a>(&'a str);

impl LineIndex<'_> {
    fn line(&self, offset: usize) -> usize {
        self.0[..offset.min(self.0.len())].matches('\n').count() + 1
    }

    fn err<T>(&self, code: ErrorCode, span: std::ops::Range<usize>, message: String) -> Result<T, ScenarioError> {
        Err(ScenarioError {
            code,
            line: Some(self.line(span.start)),
            message,
        })
    }
}

/// Parses and validates a scenario document.
pub fn load_scenario(source: &str) -> Result<Scenario, ScenarioError> {
    let lines = LineIndex(source);
    let doc: ScenarioDoc = toml::from_str(source).map_err(|e| ScenarioError {
        code: if e.message().contains("unknown field") || e.message().contains("missing field") || e.message().contains("unknown variant") || e.message().contains("invalid type") {
            ErrorCode::Schema
        } else {
            ErrorCode::Syntax
        },
        line: e.span().map(|s| lines.line(s.start)),
        message: e.message().trim().to_string(),
    })?;

    let domain_span = doc.domain.span();
    let domain_doc = doc.domain.into_inner();
    let domain = match FiniteDomain::new(domain_doc.lo, domain_doc.hi) {
        Ok(d) => d,
        Err(e) => return lines.err(ErrorCode::Schema, domain_span, e.to_string()),
    };

    if doc.messages.is_empty() {
        return Err(ScenarioError {
            code: ErrorCode::Schema,
            line: None,
            message: "at least one message is required".into(),
        });
    }
    let mut messages = Vec::with_capacity(doc.messages.len());
    for m in &doc.messages {
        let parsed: Message = match m.get_ref().parse() {
            Ok(p) => p,
            Err(e) => return lines.err(ErrorCode::Message, m.span(), e.to_string()),
        };
        if let Err(e) = parsed.validate(domain) {
            return lines.err(ErrorCode::OutOfDomain, m.span(), format!("message {:?}: {e}", m.get_ref()));
        }
        if messages.contains(&parsed) {
            return lines.err(ErrorCode::Message, m.span(), format!("duplicate message {parsed}"));
        }
        messages.push(parsed);
    }

    let rp_span = doc.radius_prior.span();
    let rp = doc.radius_prior.into_inner();
    let radius_prior = match (rp.kind, rp.y_max, rp.mass) {
        (RadiusKindDoc::Uniform, y_max, None) => {
            RadiusPrior::uniform(y_max.unwrap_or_else(|| default_y_max(domain, &messages)))
        }
        (RadiusKindDoc::Explicit, None, Some(mass)) => match RadiusPrior::from_weights(&mass) {
            Ok(r) => r,
            Err(e) => return lines.err(ErrorCode::Pmf, rp_span, format!("radius prior: {e}")),
        },
        (RadiusKindDoc::Uniform, _, Some(_)) => {
            return lines.err(ErrorCode::Schema, rp_span, "uniform radius prior takes y_max, not mass".into())
        }
        (RadiusKindDoc::Explicit, _, _) => {
            return lines.err(ErrorCode::Schema, rp_span, "explicit radius prior takes mass only".into())
        }
    };

    if doc.observations.is_empty() {
        return Err(ScenarioError {
            code: ErrorCode::Schema,
            line: None,
            message: "at least one observation is required".into(),
        });
    }
    let mut observations = Vec::with_capacity(doc.observations.len());
    let mut labels = HashSet::new();
    for spanned in doc.observations {
        let span = spanned.span();
        let o = spanned.into_inner();
        if !labels.insert(o.label.clone()) {
            return lines.err(ErrorCode::DuplicateLabel, span, format!("duplicate observation label {:?}", o.label));
        }
        let weight_span = o.weight.span();
        let weight = *o.weight.get_ref();
        if !(weight > 0.0 && weight.is_finite()) {
            return lines.err(ErrorCode::Weight, weight_span, format!("observation {:?}: weight must be positive, got {weight}", o.label));
        }
        let (kind, conditional) = match (o.kind, o.a, o.b, o.mass) {
            (ObsKindDoc::Uniform, Some(a), Some(b), None) => (ObservationKind::Uniform { a, b }, uniform_obs(domain, a, b)),
            (ObsKindDoc::Binomial, Some(a), Some(b), None) => (ObservationKind::Binomial { a, b }, binomial_peaked(domain, a, b)),
            (ObsKindDoc::Explicit, None, None, Some(mass)) => (ObservationKind::Explicit, Pmf::normalize(domain, &mass)),
            (ObsKindDoc::Explicit, ..) => {
                return lines.err(ErrorCode::Schema, span, format!("observation {:?}: explicit kind takes mass only", o.label))
            }
            _ => return lines.err(ErrorCode::Schema, span, format!("observation {:?}: {} kind takes a and b only", o.label, match o.kind { ObsKindDoc::Uniform => "uniform", _ => "binomial" })),
        };
        let conditional = match conditional {
            Ok(c) => c,
            Err(ProbError::DomainMismatch(msg)) if !matches!(kind, ObservationKind::Explicit) => {
                return lines.err(ErrorCode::OutOfDomain, span, format!("observation {:?}: {msg}", o.label))
            }
            Err(e) => return lines.err(ErrorCode::Pmf, span, format!("observation {:?}: {e}", o.label)),
        };
        observations.push(Observation {
            label: o.label,
            kind,
            conditional,
            weight,
        });
    }

    let lambda_span = doc.lambda.span();
    let lambda = *doc.lambda.get_ref();
    if !(lambda > 0.0 && lambda.is_finite()) {
        return lines.err(ErrorCode::Lambda, lambda_span, format!("lambda must be positive, got {lambda}"));
    }

    let depth = match doc.depth {
        None => 5,
        Some(d) => {
            let v = *d.get_ref();
            if v < 1 || v as usize > MAX_DEPTH {
                return lines.err(ErrorCode::Depth, d.span(), format!("depth must be in 1..={MAX_DEPTH}, got {v}"));
            }
            v as usize
        }
    };

    let mut costs = vec![0.0; messages.len()];
    if let Some(spanned) = doc.costs {
        let span = spanned.span();
        for (text, cost) in spanned.into_inner() {
            let m: Message = match text.parse() {
                Ok(m) => m,
                Err(e) => return lines.err(ErrorCode::Message, span.clone(), format!("cost key: {e}")),
            };
            let Some(idx) = messages.iter().position(|x| *x == m) else {
                return lines.err(ErrorCode::Cost, span.clone(), format!("cost given for unknown message {m}"));
            };
            if !(cost >= 0.0 && cost.is_finite()) {
                return lines.err(ErrorCode::Cost, span.clone(), format!("cost of {m} must be non-negative, got {cost}"));
            }
            costs[idx] = cost;
        }
    }

    let scenario = Scenario {
        domain,
        observations,
        messages,
        radius_prior,
        lambda,
        depth,
        utility_kind: doc.utility_kind.unwrap_or(UtilityKind::MarginalKl),
        model: doc.model.unwrap_or(ModelKind::Main),
        costs,
    };
    scenario.validate()?;
    Ok(scenario)
}

/// Largest radius keeping every around-interval inside the domain.
pub fn default_y_max(domain: FiniteDomain, messages: &[Message]) -> u32 {
    messages
        .iter()
        .filter_map(|m| match *m {
            Message::Around(n) => Some((n - domain.lo()).min(domain.hi() - n).max(0) as u32),
            Message::Between(..) => None,
        })
        .min()
        .unwrap_or(0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_traits::{One, Zero};

    fn dom() -> FiniteDomain {
        FiniteDomain::new(0, 8).unwrap()
    }

    #[test]
    fn uniform_obs_examples() {
        let u = uniform_obs(dom(), 0, 8).unwrap();
        assert!(u.mass().iter().all(|p| (p - 1.0 / 9.0).abs() < 1e-15));
        assert_eq!(uniform_obs(dom(), 4, 4).unwrap(), Pmf::point(dom(), 4).unwrap());
        let u = uniform_obs(dom(), 3, 5).unwrap();
        assert!((u.prob(4) - 1.0 / 3.0).abs() < 1e-15 && u.prob(2) == 0.0);
        assert!(uniform_obs(dom(), 5, 3).is_err());
        assert!(uniform_obs(dom(), 0, 9).is_err());
    }

    #[test]
    fn binomial_examples() {
        let p = binomial_peaked(dom(), 3, 5).unwrap();
        assert_eq!(&p.mass()[3..6], &[0.25, 0.5, 0.25]);
        let p = binomial_peaked(dom(), 2, 6).unwrap();
        assert_eq!(&p.mass()[2..7], &[1.0 / 16.0, 4.0 / 16.0, 6.0 / 16.0, 4.0 / 16.0, 1.0 / 16.0]);
        assert_eq!(binomial_peaked(dom(), 4, 4).unwrap(), Pmf::point(dom(), 4).unwrap());
    }

    #[test]
    fn binomial_exact_sums_to_one_and_is_symmetric() {
        for width in 0..30 {
            let m = binomial_peaked_exact(10, 10 + width);
            assert!(m.iter().fold(BigRational::zero(), |a, b| a + b).is_one());
            for j in 0..m.len() {
                assert_eq!(m[j], m[m.len() - 1 - j]);
            }
        }
    }

    #[test]
    fn joint_prior_of_single_observation() {
        let o = Observation::binomial("p", dom(), 2, 6, 7.5).unwrap();
        let j = build_joint_prior(std::slice::from_ref(&o)).unwrap();
        assert_eq!(j.marginal_x(), o.conditional);
    }

    #[test]
    fn joint_prior_errors() {
        assert!(build_joint_prior(&[]).is_err());
        let o = Observation::uniform("u", dom(), 2, 6, 0.0).unwrap();
        assert!(build_joint_prior(&[o]).is_err());
    }

    #[test]
    fn paper_scenario_shape() {
        let s = paper_scenario();
        assert_eq!(s.lambda, 10.0);
        assert_eq!(s.observations.len(), 9);
        assert_eq!(s.messages.len(), 6);
        assert_eq!(s.depth, 5);
        assert_eq!(s.utility_kind, UtilityKind::MarginalKl);
        let weights: Vec<f64> = s.observations.iter().map(|o| o.weight).collect();
        assert_eq!(weights, vec![1.0, 4.0, 16.0, 64.0, 256.0, 1.0, 4.0, 16.0, 64.0]);
        assert!(s.validate().is_ok());
    }

    #[test]
    fn paper_scenario_round_trips() {
        let s = paper_scenario();
        let text = s.to_toml();
        assert_eq!(load_scenario(&text).unwrap(), s);
    }

    #[test]
    fn default_y_max_fits_domain() {
        assert_eq!(default_y_max(dom(), &[Message::Around(4)]), 4);
        assert_eq!(default_y_max(dom(), &[Message::Around(2), Message::Around(4)]), 2);
        assert_eq!(default_y_max(dom(), &[Message::exactly(4)]), 0);
    }

    const SMALL: &str = r#"
lambda = 10.0
depth = 3
messages = ["between 0 and 8", "around 4"]

[domain]
lo = 0
hi = 8

[radius_prior]
kind = "uniform"

[[observations]]
label = "u"
kind = "uniform"
a = 0
b = 8
weight = 1.0
"#;

    #[test]
    fn loads_small_document_with_defaults() {
        let s = load_scenario(SMALL).unwrap();
        assert_eq!(s.radius_prior.y_max(), 4);
        assert_eq!(s.model, ModelKind::Main);
        assert_eq!(s.depth, 3);
    }

    #[test]
    fn zero_weight_is_rejected_with_line() {
        let doc = SMALL.replace("weight = 1.0", "weight = 0.0");
        let e = load_scenario(&doc).unwrap_err();
        assert_eq!(e.code, ErrorCode::Weight);
        assert_eq!(e.line, Some(18));
    }

    #[test]
    fn out_of_domain_message() {
        let doc = SMALL.replace("\"around 4\"", "\"around 12\"");
        let e = load_scenario(&doc).unwrap_err();
        assert_eq!(e.code, ErrorCode::OutOfDomain);
        assert_eq!(e.line, Some(4));
    }

    #[test]
    fn distinct_error_codes() {
        let cases = [
            (SMALL.replace("lambda = 10.0", "lambda = -1.0"), ErrorCode::Lambda),
            (SMALL.replace("depth = 3", "depth = 0"), ErrorCode::Depth),
            (SMALL.replace("\"around 4\"", "\"roughly 4\""), ErrorCode::Message),
            (SMALL.replace("kind = \"uniform\"\na = 0\nb = 8", "kind = \"explicit\"\nmass = [0.0, 0.0]"), ErrorCode::Pmf),
            (SMALL.replace("a = 0", "a = -3"), ErrorCode::OutOfDomain),
            (SMALL.replace("lambda = 10.0", "lambda = 10.0\ncolour = 3"), ErrorCode::Schema),
            (SMALL.replace("lambda = 10.0", "lambda = = 10"), ErrorCode::Syntax),
            (format!("{SMALL}\n[costs]\n\"around 4\" = -1.0\n"), ErrorCode::Cost),
        ];
        for (doc, code) in cases {
            let e = load_scenario(&doc).unwrap_err();
            assert_eq!(e.code, code, "{e}");
        }
    }

    #[test]
    fn costs_are_loaded() {
        let doc = format!("{SMALL}\n[costs]\n\"around 4\" = 0.5\n");
        let s = load_scenario(&doc).unwrap();
        assert_eq!(s.costs, vec![0.0, 0.5]);
        assert_eq!(load_scenario(&s.to_toml()).unwrap(), s);
    }
}
