//! Objective providers for the outer loop.
//!
//! An [`Evaluator`] turns genomes into true objective vectors and may be
//! adapted towards a distribution of architectures between iterations.

pub mod benchmarks;
pub mod external;
pub mod synthetic;

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::genome::Genome;
use crate::natloop::AdaptationDistribution;
use crate::search::Problem;
use crate::selection::ObjectiveVector;

pub use external::{ExternalConfig, ExternalEvaluator};
pub use synthetic::{SyntheticConfig, SyntheticSupernet};

pub trait Evaluator {
    /// Objective names in order, accuracy (negated) first.
    fn objective_names(&self) -> Vec<String>;

    /// True objectives of every genome. Deterministic given the evaluator's
    /// current state.
    fn evaluate(&mut self, genomes: &[Genome]) -> Result<Vec<ObjectiveVector>>;

    /// Adapts the evaluator towards architectures drawn from `distribution`.
    fn adapt(&mut self, distribution: &AdaptationDistribution, epochs: usize) -> Result<()>;
}

/// In-process evaluator backed by a closure; `adapt` is a no-op.
pub struct FnEvaluator<F> {
    names: Vec<String>,
    f: F,
}

impl<F: FnMut(&Genome) -> Vec<f64>> FnEvaluator<F> {
    pub fn new(names: Vec<String>, f: F) -> Self {
        Self { names, f }
    }
}

impl<F: FnMut(&Genome) -> Vec<f64>> Evaluator for FnEvaluator<F> {
    fn objective_names(&self) -> Vec<String> {
        self.names.clone()
    }

    fn evaluate(&mut self, genomes: &[Genome]) -> Result<Vec<ObjectiveVector>> {
        Ok(genomes.iter().map(|g| ObjectiveVector((self.f)(g))).collect())
    }

    fn adapt(&mut self, _: &AdaptationDistribution, _: usize) -> Result<()> {
        Ok(())
    }
}

/// Evaluator selection as it appears in a run configuration.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum EvaluatorConfig {
    Synthetic(SyntheticConfig),
    External(ExternalConfig),
}

impl Default for EvaluatorConfig {
    fn default() -> Self {
        EvaluatorConfig::Synthetic(SyntheticConfig::default())
    }
}

impl EvaluatorConfig {
    /// Builds the evaluator. `seed` is used when the configuration does not
    /// pin its own; `parallel` caps concurrent evaluations.
    pub fn build(&self, problem: &Problem, seed: u64, parallel: usize) -> Result<Box<dyn Evaluator>> {
        Ok(match self {
            EvaluatorConfig::Synthetic(c) => Box::new(SyntheticSupernet::new(c.clone(), problem.clone(), seed, parallel)?),
            EvaluatorConfig::External(c) => Box::new(ExternalEvaluator::spawn(c, parallel)?),
        })
    }
}
