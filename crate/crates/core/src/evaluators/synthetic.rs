//! A desk-scale stand-in for a weight-sharing supernet.
//!
//! The landscape is additive in per-(position, value) scores, each a smooth
//! function of the option's rank plus a small residual, and a few sparse
//! pairwise interactions, squashed through a sigmoid into
//! `[ACC_MIN, ACC_MAX]`. Observed accuracy is the true accuracy scaled by a
//! maturity factor: every (position, value) pair starts at `m0` and reaches 1
//! after `tau` adaptation samples have activated it.

use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::Evaluator;
use crate::error::{NatError, Result};
use crate::genome::Genome;
use crate::natloop::{sample_subnet, AdaptationDistribution};
use crate::par;
use crate::rng::{stream, subseed};
use crate::search::Problem;
use crate::selection::ObjectiveVector;

pub const ACC_MIN: f64 = 0.55;
pub const ACC_MAX: f64 = 0.95;
const UNARY_STD: f64 = 0.3;
const PAIRWISE_STD: f64 = 0.15;
/// Mean slope of a position's score across its value range, so larger
/// (costlier) options tend to be more accurate.
const SLOPE_MEAN: f64 = 0.2;
/// Scale of the per-option residual relative to the smooth part.
const RESIDUAL: f64 = 0.2;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SyntheticConfig {
    /// Landscape seed; derived from the run seed when absent.
    pub seed: Option<u64>,
    pub m0: f64,
    pub tau: f64,
    pub steps_per_epoch: usize,
    pub pairwise_terms: usize,
    /// Report true accuracy regardless of maturity.
    pub oracle: bool,
}

impl Default for SyntheticConfig {
    fn default() -> Self {
        Self {
            seed: None,
            m0: 0.6,
            tau: 200.0,
            steps_per_epoch: 200,
            pairwise_terms: 50,
            oracle: false,
        }
    }
}

impl SyntheticConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.m0 > 0.0 && self.m0 <= 1.0) {
            return Err(NatError::config("evaluator.m0", "must be in (0, 1]"));
        }
        if !(self.tau > 0.0) || !self.tau.is_finite() {
            return Err(NatError::config("evaluator.tau", "must be positive"));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Interaction {
    pub a: (usize, u8),
    pub b: (usize, u8),
    pub weight: f64,
}

#[derive(Clone, Debug)]
pub struct SyntheticSupernet {
    config: SyntheticConfig,
    problem: Problem,
    landscape_seed: u64,
    unary: Vec<Vec<f64>>,
    pairwise: Vec<Interaction>,
    score_min: f64,
    score_max: f64,
    counts: Vec<Vec<u64>>,
    adapt_rounds: u64,
    parallel: usize,
}

fn logit(p: f64) -> f64 {
    (p / (1.0 - p)).ln()
}

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

impl SyntheticSupernet {
    /// `run_seed` supplies the landscape seed unless the configuration pins
    /// one. `parallel > 1` evaluates batches on that many threads.
    pub fn new(config: SyntheticConfig, problem: Problem, run_seed: u64, parallel: usize) -> Result<Self> {
        config.validate()?;
        let landscape_seed = config.seed.unwrap_or_else(|| subseed(run_seed, "landscape", 0));
        let mut rng = stream(landscape_seed, "landscape", 0);
        let bounds = problem.space.all_bounds();
        let unary_dist = Normal::new(0.0, UNARY_STD).expect("valid std");
        let pair_dist = Normal::new(0.0, PAIRWISE_STD).expect("valid std");

        // Each position scores its (cost-ordered) options along a random
        // quadratic, plus an independent residual per option.
        let unary: Vec<Vec<f64>> = bounds
            .iter()
            .map(|&(lo, hi)| {
                let slope = SLOPE_MEAN + unary_dist.sample(&mut rng);
                let curve = unary_dist.sample(&mut rng);
                (0..=hi)
                    .map(|v| {
                        let residual = RESIDUAL * unary_dist.sample(&mut rng);
                        if v < lo {
                            return 0.0;
                        }
                        let t = if hi > lo { f64::from(v - lo) / f64::from(hi - lo) } else { 0.0 };
                        slope * t + curve * t * t + residual
                    })
                    .collect()
            })
            .collect();
        let n = bounds.len();
        let pairwise: Vec<Interaction> = (0..config.pairwise_terms)
            .map(|_| {
                let pa = rng.random_range(0..n);
                let mut pb = rng.random_range(0..n - 1);
                if pb >= pa {
                    pb += 1;
                }
                let va = rng.random_range(bounds[pa].0..=bounds[pa].1);
                let vb = rng.random_range(bounds[pb].0..=bounds[pb].1);
                Interaction {
                    a: (pa, va),
                    b: (pb, vb),
                    weight: pair_dist.sample(&mut rng),
                }
            })
            .collect();

        let range = |row: &[f64], lo: u8| {
            row[usize::from(lo)..]
                .iter()
                .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| (a.min(v), b.max(v)))
        };
        let (mut score_min, mut score_max) = (0.0, 0.0);
        for (row, &(lo, _)) in unary.iter().zip(&bounds) {
            let (a, b) = range(row, lo);
            score_min += a;
            score_max += b;
        }
        for p in &pairwise {
            score_min += p.weight.min(0.0);
            score_max += p.weight.max(0.0);
        }
        let counts = bounds.iter().map(|&(_, hi)| vec![0; usize::from(hi) + 1]).collect();
        Ok(Self {
            config,
            problem,
            landscape_seed,
            unary,
            pairwise,
            score_min,
            score_max,
            counts,
            adapt_rounds: 0,
            parallel,
        })
    }

    pub fn config(&self) -> &SyntheticConfig {
        &self.config
    }

    pub fn problem(&self) -> &Problem {
        &self.problem
    }

    pub fn unary(&self) -> &[Vec<f64>] {
        &self.unary
    }

    pub fn pairwise(&self) -> &[Interaction] {
        &self.pairwise
    }

    pub fn counts(&self) -> &[Vec<u64>] {
        &self.counts
    }

    /// Raw additive score of a genome.
    pub fn score(&self, genome: &Genome) -> f64 {
        let v = genome.values();
        let unary: f64 = v.iter().enumerate().map(|(i, &x)| self.unary[i][usize::from(x)]).sum();
        let pair: f64 = self
            .pairwise
            .iter()
            .filter(|p| v[p.a.0] == p.a.1 && v[p.b.0] == p.b.1)
            .map(|p| p.weight)
            .sum();
        unary + pair
    }

    pub fn true_accuracy(&self, genome: &Genome) -> f64 {
        let span = self.score_max - self.score_min;
        let t = if span > 0.0 {
            (self.score(genome) - self.score_min) / span
        } else {
            0.5
        };
        let (lo, hi) = (logit(ACC_MIN), logit(ACC_MAX));
        sigmoid(lo + t * (hi - lo))
    }

    /// Mean saturation of the (position, value) pairs the genome activates,
    /// mapped into `[m0, 1]`.
    pub fn maturity(&self, genome: &Genome) -> f64 {
        if self.config.oracle {
            return 1.0;
        }
        let space = &self.problem.space;
        let (mut total, mut active) = (0.0, 0usize);
        for (i, &x) in genome.values().iter().enumerate() {
            if genome.is_active(space, i) {
                total += (self.counts[i][usize::from(x)] as f64 / self.config.tau).min(1.0);
                active += 1;
            }
        }
        let m0 = self.config.m0;
        m0 + (1.0 - m0) * total / active as f64
    }

    pub fn observed_accuracy(&self, genome: &Genome) -> f64 {
        self.true_accuracy(genome) * self.maturity(genome)
    }

    fn objectives(&self, genome: &Genome) -> Result<ObjectiveVector> {
        genome.validate(&self.problem.space)?;
        self.problem.objectives(genome, self.observed_accuracy(genome))
    }

    /// Records one adaptation sample.
    pub fn activate(&mut self, genome: &Genome) {
        let space = &self.problem.space;
        for (i, &x) in genome.values().iter().enumerate() {
            if genome.is_active(space, i) {
                self.counts[i][usize::from(x)] += 1;
            }
        }
    }

    /// Adapts on `epochs * steps_per_epoch` subnets drawn by `sample`.
    pub fn adapt_with<F>(&mut self, epochs: usize, mut sample: F)
    where
        F: FnMut(&mut crate::rng::Rng) -> Genome,
    {
        let mut rng = stream(self.landscape_seed, "adapt", self.adapt_rounds);
        self.adapt_rounds += 1;
        for _ in 0..epochs * self.config.steps_per_epoch {
            let g = sample(&mut rng);
            self.activate(&g);
        }
    }
}

impl Evaluator for SyntheticSupernet {
    fn objective_names(&self) -> Vec<String> {
        self.problem.objective_names()
    }

    fn evaluate(&mut self, genomes: &[Genome]) -> Result<Vec<ObjectiveVector>> {
        let this = &*self;
        let out = if self.parallel > 1 {
            par::with_threads(self.parallel, || par::map(genomes, |g| this.objectives(g)))
        } else {
            genomes.iter().map(|g| this.objectives(g)).collect()
        };
        out.into_iter().collect()
    }

    fn adapt(&mut self, distribution: &AdaptationDistribution, epochs: usize) -> Result<()> {
        distribution.validate(&self.problem.space)?;
        let space = self.problem.space.clone();
        self.adapt_with(epochs, |rng| sample_subnet(distribution, &space, rng));
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::genome::{sample_uniform, CostModel, SearchSpaceConfig};
    use crate::natloop::estimate_distribution;
    use crate::rng::seeded;
    use crate::search::AuxObjective;

    fn supernet(config: SyntheticConfig) -> SyntheticSupernet {
        let problem = Problem::new(SearchSpaceConfig::default(), CostModel::default(), vec![AuxObjective::Madds]).unwrap();
        SyntheticSupernet::new(config, problem, 11, 1).unwrap()
    }

    #[test]
    fn accuracy_range_and_fresh_maturity() {
        let s = supernet(SyntheticConfig::default());
        let mut rng = seeded(1);
        for _ in 0..2000 {
            let g = sample_uniform(&s.problem.space, &mut rng);
            let t = s.true_accuracy(&g);
            assert!((ACC_MIN..=ACC_MAX).contains(&t));
            assert!((s.observed_accuracy(&g) - 0.6 * t).abs() < 1e-12);
        }
    }

    #[test]
    fn oracle_reports_true_accuracy() {
        let s = supernet(SyntheticConfig {
            oracle: true,
            ..Default::default()
        });
        let g = sample_uniform(&s.problem.space, &mut seeded(2));
        assert_eq!(s.observed_accuracy(&g), s.true_accuracy(&g));
    }

    #[test]
    fn degenerate_adaptation_saturates() {
        let mut s = supernet(SyntheticConfig::default());
        let g = sample_uniform(&s.problem.space, &mut seeded(3));
        let d = estimate_distribution(std::slice::from_ref(&g), &s.problem.space).unwrap();
        s.adapt(&d, 0).unwrap();
        assert!(s.counts.iter().flatten().all(|&c| c == 0));
        s.adapt(&d, 1).unwrap();
        assert!((s.observed_accuracy(&g) - s.true_accuracy(&g)).abs() < 1e-9);
    }

    #[test]
    fn observed_never_exceeds_true_and_grows_with_maturity() {
        let mut s = supernet(SyntheticConfig::default());
        let space = s.problem.space.clone();
        let mut rng = seeded(4);
        let genomes: Vec<Genome> = (0..50).map(|_| sample_uniform(&space, &mut rng)).collect();
        let before: Vec<f64> = genomes.iter().map(|g| s.observed_accuracy(g)).collect();
        s.adapt(&AdaptationDistribution::uniform(&space), 1).unwrap();
        for (g, b) in genomes.iter().zip(before) {
            let a = s.observed_accuracy(g);
            assert!(a >= b && a <= s.true_accuracy(g));
        }
    }
}
