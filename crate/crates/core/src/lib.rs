//! Probabilistic pragmatics of "around n": literal and pragmatic listeners,
//! KL-utility speakers, lexical-uncertainty variants and the checks that tie
//! them to exact values.

pub mod checks;
pub mod compare;
pub mod exec;
pub mod lu;
pub mod prob;
pub mod real;
pub mod reproduce;
pub mod rsa;
pub mod scenario;
pub mod semantics;
pub mod variants;

pub use exec::Exec;
pub use prob::{FiniteDomain, JointPmf, Pmf, ProbError, Utility};
pub use rsa::{run_recursion, RecursionTrace, RsaError, UtilityKind};
pub use scenario::{load_scenario, paper_scenario, ModelKind, Scenario, ScenarioError};
pub use semantics::{Message, RadiusPrior, SemanticsError};
