//! Run configuration file: the loop and search hyperparameters as flat keys,
//! plus evaluator and search-space blocks. Unknown keys are rejected.

use nat_core::evaluators::EvaluatorConfig;
use nat_core::natloop::NatConfig;
use nat_core::operators::VariationConfig;
use nat_core::search::{AuxObjective, Problem, SearchConfig};
use nat_core::{CostModel, NatError, SearchSpaceConfig};
use serde::{Deserialize, Serialize};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub archive_size: usize,
    pub iterations: usize,
    pub predictor_min_train: usize,
    pub ensemble_size: usize,
    pub population_size: usize,
    pub generations: usize,
    pub crossover_prob: f64,
    pub mutation_prob: f64,
    pub eta_m: f64,
    pub adapt_epochs: usize,
    pub evaluator: EvaluatorConfig,
    pub search_space: SearchSpaceConfig,
    /// Exact objectives minimised alongside accuracy.
    pub objectives: Vec<AuxObjective>,
}

impl Default for RunConfig {
    fn default() -> Self {
        let nat = NatConfig::default();
        let v = VariationConfig::default();
        Self {
            archive_size: nat.archive_size,
            iterations: nat.iterations,
            predictor_min_train: nat.predictor_min_train,
            ensemble_size: nat.ensemble_size,
            population_size: nat.search.population_size,
            generations: nat.search.generations,
            crossover_prob: v.crossover_prob,
            mutation_prob: v.mutation_prob,
            eta_m: v.eta_m,
            adapt_epochs: nat.adapt_epochs,
            evaluator: EvaluatorConfig::default(),
            search_space: SearchSpaceConfig::default(),
            objectives: vec![AuxObjective::Madds],
        }
    }
}

impl RunConfig {
    pub fn nat(&self) -> NatConfig {
        NatConfig {
            archive_size: self.archive_size,
            iterations: self.iterations,
            predictor_min_train: self.predictor_min_train,
            ensemble_size: self.ensemble_size,
            search: SearchConfig {
                population_size: self.population_size,
                generations: self.generations,
                variation: VariationConfig {
                    crossover_prob: self.crossover_prob,
                    mutation_prob: self.mutation_prob,
                    eta_m: self.eta_m,
                },
            },
            adapt_epochs: self.adapt_epochs,
            hv_reference: None,
        }
    }

    pub fn problem(&self) -> Result<Problem, NatError> {
        Problem::new(self.search_space.clone(), CostModel::default(), self.objectives.clone())
    }

    /// Checks every value range; the error names the offending key.
    pub fn validate(&self) -> Result<(), NatError> {
        let problem = self.problem()?;
        self.nat().validate(&problem)?;
        match &self.evaluator {
            EvaluatorConfig::Synthetic(s) => s.validate(),
            EvaluatorConfig::External(e) => e.validate(),
        }
    }
}
