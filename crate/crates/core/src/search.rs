//! Surrogate-driven inner evolutionary search.
//!
//! Accuracy comes from a predictor and is negated into minimisation form;
//! auxiliary objectives (MAdds, parameters) are computed exactly from the
//! decoded genome. Objective evaluation runs through [`par`], while every
//! random draw happens on the calling thread in a fixed order, so the
//! result depends only on the seed.

use std::collections::HashSet;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{NatError, Result};
use crate::genome::{decode, madds, params, sample_uniform, CostModel, Genome, SearchSpaceConfig};
use crate::operators::{binary_tournament, crossover, mutate, Standing, VariationConfig};
use crate::par;
use crate::selection::{survive, ObjectiveVector, ReferenceDirectionSet, Survivor};
use crate::surrogate::{RbfEnsemble, Regressor};

/// Extra mutation attempts for an offspring that duplicates a genome already
/// in the population.
pub const DUPLICATE_RETRIES: usize = 3;

/// Predicts top-1 accuracy (higher is better) of a genome.
pub trait AccuracyPredictor: Sync {
    fn predict(&self, genome: &Genome) -> f64;

    fn predict_batch(&self, genomes: &[Genome]) -> Vec<f64> {
        par::map(genomes, |g| self.predict(g))
    }
}

impl AccuracyPredictor for RbfEnsemble {
    fn predict(&self, genome: &Genome) -> f64 {
        self.predict_row(&genome.features())
    }
}

impl<F: Fn(&Genome) -> f64 + Sync> AccuracyPredictor for F {
    fn predict(&self, genome: &Genome) -> f64 {
        self(genome)
    }
}

/// Exact efficiency objectives, reported in millions.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AuxObjective {
    Madds,
    Params,
}

impl AuxObjective {
    pub fn name(self) -> &'static str {
        match self {
            AuxObjective::Madds => "madds",
            AuxObjective::Params => "params",
        }
    }

    pub fn value(self, genome: &Genome, space: &SearchSpaceConfig, cost: &CostModel) -> Result<f64> {
        let spec = decode(genome, space, cost)?;
        Ok(match self {
            AuxObjective::Madds => madds(&spec, cost) as f64 / 1e6,
            AuxObjective::Params => params(&spec, cost) as f64 / 1e6,
        })
    }
}

/// Name of the accuracy objective as stored (negated top-1).
pub const ACCURACY_OBJECTIVE: &str = "neg_top1";

/// Search space, cost model and auxiliary objectives shared by the search
/// and the outer loop.
#[derive(Clone, Debug, PartialEq)]
pub struct Problem {
    pub space: SearchSpaceConfig,
    pub cost: CostModel,
    pub aux: Vec<AuxObjective>,
}

impl Problem {
    pub fn new(space: SearchSpaceConfig, cost: CostModel, aux: Vec<AuxObjective>) -> Result<Self> {
        space.validate()?;
        cost.validate(&space)?;
        let unique: HashSet<_> = aux.iter().collect();
        if unique.len() != aux.len() {
            return Err(NatError::config("objectives", "duplicate objective"));
        }
        Ok(Self { space, cost, aux })
    }

    pub fn objective_count(&self) -> usize {
        1 + self.aux.len()
    }

    pub fn objective_names(&self) -> Vec<String> {
        std::iter::once(ACCURACY_OBJECTIVE.to_string())
            .chain(self.aux.iter().map(|a| a.name().to_string()))
            .collect()
    }

    pub fn aux_values(&self, genome: &Genome) -> Result<Vec<f64>> {
        self.aux.iter().map(|a| a.value(genome, &self.space, &self.cost)).collect()
    }

    /// Objective vector for a genome with the given accuracy.
    pub fn objectives(&self, genome: &Genome, accuracy: f64) -> Result<ObjectiveVector> {
        let mut v = Vec::with_capacity(self.objective_count());
        v.push(-accuracy);
        v.extend(self.aux_values(genome)?);
        Ok(ObjectiveVector(v))
    }

    /// Das-Dennis directions sized for a population of `k`.
    pub fn reference_directions(&self, k: usize) -> Result<ReferenceDirectionSet> {
        ReferenceDirectionSet::sized_for(self.objective_count(), k)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SearchConfig {
    pub population_size: usize,
    pub generations: usize,
    pub variation: VariationConfig,
}

impl Default for SearchConfig {
    fn default() -> Self {
        Self {
            population_size: 100,
            generations: 100,
            variation: VariationConfig::default(),
        }
    }
}

impl SearchConfig {
    pub fn validate(&self) -> Result<()> {
        if self.population_size < 2 {
            return Err(NatError::config("population_size", "must be at least 2"));
        }
        self.variation.validate()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Individual {
    pub genome: Genome,
    pub objectives: ObjectiveVector,
    pub rank: usize,
    pub distance: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GenerationStats {
    pub generation: usize,
    pub best_predicted: f64,
    pub mean_predicted: f64,
    pub front_size: usize,
    /// Predictor calls so far, including the initial population.
    pub predictions: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SearchOutcome {
    pub population: Vec<Individual>,
    /// Entry 0 describes the initial parents, entry `g` generation `g`.
    pub history: Vec<GenerationStats>,
}

struct Scored {
    genome: Genome,
    objectives: ObjectiveVector,
}

fn score<P: AccuracyPredictor + ?Sized>(predictor: &P, problem: &Problem, genomes: Vec<Genome>) -> Result<Vec<Scored>> {
    let acc = predictor.predict_batch(&genomes);
    let objs = par::map_range(genomes.len(), |i| problem.objectives(&genomes[i], acc[i]));
    genomes
        .into_iter()
        .zip(objs)
        .map(|(genome, o)| Ok(Scored { genome, objectives: o? }))
        .collect()
}

fn select<R: Rng + ?Sized>(
    pool: Vec<Scored>,
    k: usize,
    z: &ReferenceDirectionSet,
    rng: &mut R,
) -> Result<Vec<Individual>> {
    let objs: Vec<&[f64]> = pool.iter().map(|s| &s.objectives[..]).collect();
    let survivors = survive(&objs, k, z, rng)?;
    let mut slots: Vec<Option<Scored>> = pool.into_iter().map(Some).collect();
    Ok(survivors
        .into_iter()
        .map(|Survivor { index, rank, distance }| {
            let s = slots[index].take().expect("survivor indices are unique");
            Individual {
                genome: s.genome,
                objectives: s.objectives,
                rank,
                distance,
            }
        })
        .collect())
}

fn stats(population: &[Individual], generation: usize, predictions: usize) -> GenerationStats {
    let acc: Vec<f64> = population.iter().map(|p| -p.objectives[0]).collect();
    GenerationStats {
        generation,
        best_predicted: acc.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        mean_predicted: acc.iter().sum::<f64>() / acc.len() as f64,
        front_size: population.iter().filter(|p| p.rank == 0).count(),
        predictions,
    }
}

/// Runs the evolutionary search seeded from `archive` and returns the final
/// parent population.
///
/// The initial parents are the best `K` archive members under reference-point
/// survival on predicted objectives; a smaller archive is topped up with
/// distinct uniform samples.
pub fn evolve<P, R>(
    predictor: &P,
    problem: &Problem,
    archive: &[Genome],
    cfg: &SearchConfig,
    z: &ReferenceDirectionSet,
    rng: &mut R,
) -> Result<SearchOutcome>
where
    P: AccuracyPredictor + ?Sized,
    R: Rng + ?Sized,
{
    cfg.validate()?;
    if archive.is_empty() {
        return Err(NatError::NotEnoughCandidates { needed: 1, available: 0 });
    }
    if z.dimension() != problem.objective_count() {
        return Err(NatError::DimensionMismatch {
            expected: problem.objective_count(),
            actual: z.dimension(),
        });
    }
    let k = cfg.population_size;
    let space = &problem.space;

    let mut seen = HashSet::new();
    let mut initial: Vec<Genome> = archive.iter().filter(|g| seen.insert((*g).clone())).cloned().collect();
    let mut attempts = 0;
    while initial.len() < k {
        let g = sample_uniform(space, rng);
        attempts += 1;
        // The space is astronomically large; the cap only guards toy spaces.
        if seen.insert(g.clone()) || attempts > 1000 * k {
            initial.push(g);
        }
    }
    let mut predictions = initial.len();
    let mut population = select(score(predictor, problem, initial)?, k, z, rng)?;
    let mut history = vec![stats(&population, 0, predictions)];

    for generation in 1..=cfg.generations {
        let standings: Vec<Standing> = population
            .iter()
            .map(|p| Standing {
                rank: p.rank,
                distance: p.distance,
            })
            .collect();
        let mut taken: HashSet<Genome> = population.iter().map(|p| p.genome.clone()).collect();
        let mut offspring = Vec::with_capacity(k);
        let v = &cfg.variation;
        while offspring.len() < k {
            let a = binary_tournament(&standings, rng)?;
            let b = binary_tournament(&standings, rng)?;
            let (c1, c2) = crossover(&population[a].genome, &population[b].genome, v.crossover_prob, space, rng);
            for child in [c1, c2] {
                if offspring.len() == k {
                    break;
                }
                let mut child = mutate(&child, space, v.mutation_prob, v.eta_m, rng);
                for _ in 0..DUPLICATE_RETRIES {
                    if !taken.contains(&child) {
                        break;
                    }
                    child = mutate(&child, space, v.mutation_prob, v.eta_m, rng);
                }
                taken.insert(child.clone());
                offspring.push(child);
            }
        }
        predictions += offspring.len();
        let mut pool: Vec<Scored> = population
            .into_iter()
            .map(|p| Scored {
                genome: p.genome,
                objectives: p.objectives,
            })
            .collect();
        pool.extend(score(predictor, problem, offspring)?);
        population = select(pool, k, z, rng)?;
        history.push(stats(&population, generation, predictions));
    }
    Ok(SearchOutcome { population, history })
}
