//! One entry point for all four models, and side-by-side comparison of their
//! speakers on observations that share a support.

use thiserror::Error;

use crate::exec::Exec;
use crate::lu::{equal_support_pairs, run_lu, CostFn, LuError, LuVariant};
use crate::real::Extended;
use crate::rsa::{run_recursion_with, ListenerTable, RsaError, SpeakerMatrix};
use crate::scenario::{ModelKind, Scenario};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum CompareError {
    #[error("comparison needs at least two distinct models, got {0}")]
    TooFewModels(usize),
    #[error(transparent)]
    Rsa(#[from] RsaError),
    #[error(transparent)]
    Lu(#[from] LuError),
}

/// Speakers and listeners of one model, levels `1..=depth`.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelRun {
    pub model: ModelKind,
    /// Level-0 listener. Lexical-uncertainty models have one per
    /// interpretation instead, so this is `None` for them.
    pub literal: Option<ListenerTable>,
    pub speakers: Vec<SpeakerMatrix>,
    pub listeners: Vec<ListenerTable>,
}

/// Runs `scn.model` to `depth`. Lexical-uncertainty models are evaluated in
/// extended precision.
pub fn run_model(scn: &Scenario, depth: usize, exec: Exec) -> Result<ModelRun, CompareError> {
    match scn.model {
        ModelKind::Main | ModelKind::AltListener => {
            let trace = run_recursion_with(scn, depth, exec)?;
            Ok(ModelRun {
                model: scn.model,
                literal: Some(trace.literal),
                speakers: trace.levels.iter().map(|l| l.speaker.clone()).collect(),
                listeners: trace.levels.into_iter().map(|l| l.listener).collect(),
            })
        }
        ModelKind::Lu | ModelKind::LuMarginalUtility => {
            let cost = CostFn::new(scn.costs.clone())?;
            let trace = run_lu::<Extended>(scn, depth, &cost, LuVariant::for_model(scn.model)?, exec)?;
            Ok(ModelRun {
                model: scn.model,
                literal: None,
                speakers: trace.levels.iter().map(|l| l.speaker.clone()).collect(),
                listeners: trace.levels.into_iter().map(|l| l.listener).collect(),
            })
        }
    }
}

/// Rows of equal-support observations further apart than this count as
/// differentiated.
pub const DIFFERENTIATION_THRESHOLD: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq)]
pub struct PairFlag {
    pub model: ModelKind,
    pub level: usize,
    pub pair: (String, String),
    pub max_diff: f64,
    pub differentiated: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Comparison {
    pub runs: Vec<ModelRun>,
    pub flags: Vec<PairFlag>,
}

impl Comparison {
    /// Whether `model` separates any equal-support pair at any level.
    pub fn differentiates(&self, model: ModelKind) -> bool {
        self.flags.iter().any(|f| f.model == model && f.differentiated)
    }

    pub fn flag(&self, model: ModelKind, level: usize, a: &str, b: &str) -> Option<&PairFlag> {
        self.flags
            .iter()
            .find(|f| f.model == model && f.level == level && f.pair.0 == a && f.pair.1 == b)
    }
}

pub fn compare_models(scn: &Scenario, models: &[ModelKind], depth: usize, exec: Exec) -> Result<Comparison, CompareError> {
    let mut distinct: Vec<ModelKind> = Vec::new();
    for m in models {
        if !distinct.contains(m) {
            distinct.push(*m);
        }
    }
    if distinct.len() < 2 {
        return Err(CompareError::TooFewModels(distinct.len()));
    }
    let pairs = equal_support_pairs(scn);
    let mut runs = Vec::new();
    let mut flags = Vec::new();
    for model in distinct {
        let run = run_model(&scn.clone().with_model(model), depth, exec)?;
        for (li, speaker) in run.speakers.iter().enumerate() {
            for (a, b) in &pairs {
                let ia = scn.observation_index(a).expect("pair from scenario");
                let ib = scn.observation_index(b).expect("pair from scenario");
                let max_diff = speaker.row_diff(ia, ib);
                flags.push(PairFlag {
                    model,
                    level: li + 1,
                    pair: (a.clone(), b.clone()),
                    max_diff,
                    differentiated: max_diff > DIFFERENTIATION_THRESHOLD,
                });
            }
        }
        runs.push(run);
    }
    Ok(Comparison { runs, flags })
}
