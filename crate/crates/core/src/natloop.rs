//! The outer loop: archive, predictor refresh, search, true evaluation,
//! archive selection and evaluator adaptation.
//!
//! Every component draws from its own stream derived from the master seed,
//! the component tag and the iteration, so a run is fully determined by its
//! seed and configuration.

use std::collections::HashSet;
use std::io::Write;
use std::time::Instant;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{NatError, Result};
use crate::evaluators::Evaluator;
use crate::genome::{sample_uniform, Genome, SearchSpaceConfig};
use crate::metrics::hypervolume;
use crate::rng::stream;
use crate::search::{evolve, AccuracyPredictor, GenerationStats, Problem, SearchConfig};
use crate::selection::{non_dominated_sort, survive, ObjectiveVector};
use crate::surrogate::{build_ensemble, spearman, Spearman};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ArchiveEntry {
    pub genome: Genome,
    pub objectives: ObjectiveVector,
}

/// Truly evaluated architectures, pairwise distinct, at most `capacity`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Archive {
    pub entries: Vec<ArchiveEntry>,
    pub capacity: usize,
}

impl Archive {
    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn genomes(&self) -> Vec<Genome> {
        self.entries.iter().map(|e| e.genome.clone()).collect()
    }

    pub fn objectives(&self) -> Vec<&[f64]> {
        self.entries.iter().map(|e| &e.objectives[..]).collect()
    }

    /// Indices of the non-dominated entries.
    pub fn front(&self) -> Vec<usize> {
        if self.entries.is_empty() {
            return Vec::new();
        }
        non_dominated_sort(&self.objectives()).swap_remove(0)
    }
}

/// Per-position categorical distribution over genome values. Row `i` has one
/// probability per value `0..=upper_bound(i)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct AdaptationDistribution {
    pub probabilities: Vec<Vec<f64>>,
}

impl AdaptationDistribution {
    /// Uniform over the values each position can take in isolation.
    pub fn uniform(space: &SearchSpaceConfig) -> Self {
        let probabilities = space
            .all_bounds()
            .into_iter()
            .map(|(lo, hi)| {
                let p = 1.0 / f64::from(hi - lo + 1);
                (0..=hi).map(|v| if v >= lo { p } else { 0.0 }).collect()
            })
            .collect();
        Self { probabilities }
    }

    pub fn validate(&self, space: &SearchSpaceConfig) -> Result<()> {
        let bounds = space.all_bounds();
        if self.probabilities.len() != bounds.len() {
            return Err(NatError::DimensionMismatch {
                expected: bounds.len(),
                actual: self.probabilities.len(),
            });
        }
        for (i, (row, (_, hi))) in self.probabilities.iter().zip(bounds).enumerate() {
            let total: f64 = row.iter().sum();
            if row.len() != usize::from(hi) + 1
                || row.iter().any(|p| !(*p >= 0.0))
                || (total - 1.0).abs() > 1e-9
            {
                return Err(NatError::config(
                    format!("distribution[{i}]"),
                    "must be a probability vector over the position's values",
                ));
            }
        }
        Ok(())
    }
}

/// Empirical frequency of every value at every position of the archive.
pub fn estimate_distribution(archive: &[Genome], space: &SearchSpaceConfig) -> Result<AdaptationDistribution> {
    if archive.is_empty() {
        return Err(NatError::NotEnoughCandidates { needed: 1, available: 0 });
    }
    let n = archive.len() as f64;
    let probabilities = space
        .all_bounds()
        .into_iter()
        .enumerate()
        .map(|(i, (_, hi))| {
            let mut counts = vec![0usize; usize::from(hi) + 1];
            for g in archive {
                counts[usize::from(g.values()[i])] += 1;
            }
            counts.into_iter().map(|c| c as f64 / n).collect()
        })
        .collect();
    Ok(AdaptationDistribution { probabilities })
}

fn categorical<R: Rng + ?Sized>(p: &[f64], rng: &mut R) -> u8 {
    let u = rng.random::<f64>() * p.iter().sum::<f64>();
    let mut acc = 0.0;
    let mut last = 0;
    for (v, &q) in p.iter().enumerate() {
        if q > 0.0 {
            acc += q;
            last = v;
            if u < acc {
                return v as u8;
            }
        }
    }
    last as u8
}

/// Independent per-position draws followed by skip-contiguity repair.
pub fn sample_subnet<R: Rng + ?Sized>(d: &AdaptationDistribution, space: &SearchSpaceConfig, rng: &mut R) -> Genome {
    Genome::new(d.probabilities.iter().map(|p| categorical(p, rng)).collect()).repaired(space)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NatConfig {
    pub archive_size: usize,
    pub iterations: usize,
    pub predictor_min_train: usize,
    pub ensemble_size: usize,
    pub search: SearchConfig,
    pub adapt_epochs: usize,
    /// Hypervolume reference point; derived from the initial archive if unset.
    pub hv_reference: Option<Vec<f64>>,
}

impl Default for NatConfig {
    fn default() -> Self {
        Self {
            archive_size: 300,
            iterations: 30,
            predictor_min_train: 100,
            ensemble_size: 500,
            search: SearchConfig::default(),
            adapt_epochs: 5,
            hv_reference: None,
        }
    }
}

impl NatConfig {
    pub fn validate(&self, problem: &Problem) -> Result<()> {
        self.search.validate()?;
        if self.predictor_min_train < 2 {
            return Err(NatError::config("predictor_min_train", "must be at least 2"));
        }
        if self.archive_size < self.predictor_min_train {
            return Err(NatError::config(
                "archive_size",
                format!("must be at least predictor_min_train ({})", self.predictor_min_train),
            ));
        }
        if self.ensemble_size == 0 {
            return Err(NatError::config("ensemble_size", "must be at least 1"));
        }
        if let Some(r) = &self.hv_reference {
            if r.len() != problem.objective_count() || r.iter().any(|v| !v.is_finite()) {
                return Err(NatError::config(
                    "hv_reference",
                    format!("must hold {} finite values", problem.objective_count()),
                ));
            }
        }
        Ok(())
    }

    /// Upper bound on evaluator calls for a run: `N + T * K`.
    pub fn evaluation_budget(&self) -> usize {
        self.archive_size + self.iterations * self.search.population_size
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    pub iteration: usize,
    /// `None` when the objective count is outside the exact hypervolume range.
    pub archive_hypervolume: Option<f64>,
    pub predictor_spearman: Option<Spearman>,
    pub new_evaluations: usize,
    pub evaluations_cumulative: usize,
    pub wall_seconds: f64,
    pub search: Vec<GenerationStats>,
    pub archive: Vec<ArchiveEntry>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunResult {
    pub archive: Archive,
    pub initial_archive: Vec<ArchiveEntry>,
    pub initial_hypervolume: Option<f64>,
    pub reference_point: Vec<f64>,
    pub history: Vec<IterationRecord>,
    pub evaluations: usize,
    pub distribution: AdaptationDistribution,
}

/// Reference point 10% beyond the worst value of each objective.
pub fn default_reference_point<V: AsRef<[f64]>>(points: &[V]) -> Vec<f64> {
    let m = points[0].as_ref().len();
    (0..m)
        .map(|k| {
            let (lo, hi) = points
                .iter()
                .map(|p| p.as_ref()[k])
                .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(v), b.max(v)));
            let span = hi - lo;
            hi + if span > 0.0 { 0.1 * span } else { 1.0 }
        })
        .collect()
}

/// Hypervolume of the non-dominated subset, `None` outside 2..=4 objectives.
pub fn archive_hypervolume<V: AsRef<[f64]> + Sync>(points: &[V], reference: &[f64]) -> Option<f64> {
    if !(2..=4).contains(&reference.len()) || points.is_empty() {
        return None;
    }
    let front: Vec<&[f64]> = non_dominated_sort(points)[0].iter().map(|&i| points[i].as_ref()).collect();
    hypervolume(&front, reference).ok().map(|h| h.volume)
}

fn checked_evaluate<E: Evaluator + ?Sized>(
    evaluator: &mut E,
    genomes: &[Genome],
    m: usize,
) -> Result<Vec<ObjectiveVector>> {
    if genomes.is_empty() {
        return Ok(Vec::new());
    }
    let out = evaluator.evaluate(genomes)?;
    if out.len() != genomes.len() {
        return Err(NatError::Evaluator(format!(
            "returned {} objective vectors for {} genomes",
            out.len(),
            genomes.len()
        )));
    }
    if let Some(bad) = out.iter().find(|o| o.len() != m || o.iter().any(|v| !v.is_finite())) {
        return Err(NatError::Evaluator(format!(
            "expected {m} finite objectives, got {:?}",
            bad.0
        )));
    }
    Ok(out)
}

fn check_objectives<E: Evaluator + ?Sized>(evaluator: &E, problem: &Problem) -> Result<()> {
    let names = evaluator.objective_names();
    if names != problem.objective_names() {
        return Err(NatError::config(
            "objectives",
            format!(
                "evaluator reports {:?} but the search expects {:?}",
                names,
                problem.objective_names()
            ),
        ));
    }
    Ok(())
}

/// Runs the full loop for `cfg.iterations` iterations.
pub fn run<E: Evaluator + ?Sized>(evaluator: &mut E, problem: &Problem, cfg: &NatConfig, seed: u64) -> Result<RunResult> {
    run_with(evaluator, problem, cfg, seed, |_| {})
}

/// [`run`] with a callback invoked after every iteration.
pub fn run_with<E, F>(evaluator: &mut E, problem: &Problem, cfg: &NatConfig, seed: u64, mut observe: F) -> Result<RunResult>
where
    E: Evaluator + ?Sized,
    F: FnMut(&IterationRecord),
{
    cfg.validate(problem)?;
    check_objectives(evaluator, problem)?;
    let space = &problem.space;
    let m = problem.objective_count();
    let started = Instant::now();

    let mut rng = stream(seed, "init", 0);
    let mut seen = HashSet::new();
    let mut initial = Vec::with_capacity(cfg.archive_size);
    while initial.len() < cfg.archive_size {
        let g = sample_uniform(space, &mut rng);
        if seen.insert(g.clone()) {
            initial.push(g);
        }
    }
    let objectives = checked_evaluate(evaluator, &initial, m).map_err(|e| NatError::Iteration {
        iteration: 0,
        source: Box::new(e),
    })?;
    let mut evaluations = initial.len();
    let mut archive = Archive {
        entries: initial
            .into_iter()
            .zip(objectives)
            .map(|(genome, objectives)| ArchiveEntry { genome, objectives })
            .collect(),
        capacity: cfg.archive_size,
    };
    let initial_archive = archive.entries.clone();
    let reference_point = cfg
        .hv_reference
        .clone()
        .unwrap_or_else(|| default_reference_point(&archive.objectives()));
    let initial_hypervolume = archive_hypervolume(&archive.objectives(), &reference_point);
    let search_z = problem.reference_directions(cfg.search.population_size)?;
    let archive_z = problem.reference_directions(cfg.archive_size)?;
    let mut history = Vec::with_capacity(cfg.iterations);
    let mut distribution = estimate_distribution(&archive.genomes(), space)?;

    for t in 1..=cfg.iterations {
        let wrap = |e: NatError| {
            if e.is_runtime() {
                NatError::Iteration {
                    iteration: t,
                    source: Box::new(e),
                }
            } else {
                e
            }
        };
        let t64 = t as u64;
        let x: Vec<Vec<f64>> = archive.entries.iter().map(|e| e.genome.features()).collect();
        let y: Vec<f64> = archive.entries.iter().map(|e| -e.objectives[0]).collect();
        let ensemble = build_ensemble(&x, &y, cfg.ensemble_size, &mut stream(seed, "predictor", t64))?;

        let outcome = evolve(
            &ensemble,
            problem,
            &archive.genomes(),
            &cfg.search,
            &search_z,
            &mut stream(seed, "search", t64),
        )?;

        let known: HashSet<&Genome> = archive.entries.iter().map(|e| &e.genome).collect();
        let mut fresh_set = HashSet::new();
        let fresh: Vec<Genome> = outcome
            .population
            .iter()
            .map(|i| &i.genome)
            .filter(|g| !known.contains(g) && fresh_set.insert(*g))
            .cloned()
            .collect();
        let fresh_objectives = checked_evaluate(evaluator, &fresh, m).map_err(wrap)?;
        let new_evaluations = fresh.len();
        evaluations += new_evaluations;

        let predictor_spearman = if fresh.len() >= 2 {
            let predicted = ensemble.predict_batch(&fresh);
            let truth: Vec<f64> = fresh_objectives.iter().map(|o| -o[0]).collect();
            Some(spearman(&predicted, &truth)?)
        } else {
            None
        };

        let mut pool = std::mem::take(&mut archive.entries);
        pool.extend(
            fresh
                .into_iter()
                .zip(fresh_objectives)
                .map(|(genome, objectives)| ArchiveEntry { genome, objectives }),
        );
        let objs: Vec<&[f64]> = pool.iter().map(|e| &e.objectives[..]).collect();
        let keep = survive(&objs, cfg.archive_size, &archive_z, &mut stream(seed, "selection", t64))?;
        let mut slots: Vec<Option<ArchiveEntry>> = pool.into_iter().map(Some).collect();
        archive.entries = keep
            .iter()
            .map(|s| slots[s.index].take().expect("survivor indices are unique"))
            .collect();

        distribution = estimate_distribution(&archive.genomes(), space)?;
        evaluator.adapt(&distribution, cfg.adapt_epochs).map_err(wrap)?;

        let record = IterationRecord {
            iteration: t,
            archive_hypervolume: archive_hypervolume(&archive.objectives(), &reference_point),
            predictor_spearman,
            new_evaluations,
            evaluations_cumulative: evaluations,
            wall_seconds: started.elapsed().as_secs_f64(),
            search: outcome.history,
            archive: archive.entries.clone(),
        };
        observe(&record);
        history.push(record);
    }

    Ok(RunResult {
        archive,
        initial_archive,
        initial_hypervolume,
        reference_point,
        history,
        evaluations,
        distribution,
    })
}

fn csv_opt(v: Option<f64>) -> String {
    v.map_or_else(String::new, |x| format!("{x}"))
}

/// Writes the per-iteration history as CSV.
pub fn write_history_csv<W: Write>(history: &[IterationRecord], mut out: W) -> std::io::Result<()> {
    writeln!(
        out,
        "iteration,archive_hypervolume,predictor_spearman,evaluations_cumulative,wall_seconds"
    )?;
    for r in history {
        writeln!(
            out,
            "{},{},{},{},{:.3}",
            r.iteration,
            csv_opt(r.archive_hypervolume),
            csv_opt(r.predictor_spearman.map(|s| s.rho)),
            r.evaluations_cumulative,
            r.wall_seconds
        )?;
    }
    Ok(())
}

/// Writes per-generation search statistics of every iteration as CSV.
pub fn write_generations_csv<W: Write>(history: &[IterationRecord], mut out: W) -> std::io::Result<()> {
    writeln!(out, "iteration,generation,best_predicted,mean_predicted,front_size")?;
    for r in history {
        for g in &r.search {
            writeln!(
                out,
                "{},{},{},{},{}",
                r.iteration, g.generation, g.best_predicted, g.mean_predicted, g.front_size
            )?;
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::seeded;

    #[test]
    fn distribution_counts() {
        let space = SearchSpaceConfig::default();
        let mut rng = seeded(1);
        let mut archive: Vec<Genome> = (0..4).map(|_| sample_uniform(&space, &mut rng)).collect();
        for (g, v) in archive.iter_mut().zip([1u8, 1, 2, 3]) {
            g.values_mut()[2] = v;
        }
        let d = estimate_distribution(&archive, &space).unwrap();
        d.validate(&space).unwrap();
        assert_eq!(d.probabilities[2][..4], [0.0, 0.5, 0.25, 0.25]);
    }

    #[test]
    fn degenerate_distribution_reproduces_genome() {
        let space = SearchSpaceConfig::default();
        let mut rng = seeded(2);
        let g = sample_uniform(&space, &mut rng);
        let d = estimate_distribution(std::slice::from_ref(&g), &space).unwrap();
        for _ in 0..100 {
            assert_eq!(sample_subnet(&d, &space, &mut rng), g);
        }
    }

    #[test]
    fn uniform_distribution_is_valid() {
        let space = SearchSpaceConfig::default();
        let d = AdaptationDistribution::uniform(&space);
        d.validate(&space).unwrap();
        let mut rng = seeded(3);
        for _ in 0..1000 {
            sample_subnet(&d, &space, &mut rng).validate(&space).unwrap();
        }
    }

    #[test]
    fn reference_point_pads_the_worst_values() {
        let r = default_reference_point(&[vec![0.0, 1.0], vec![1.0, 1.0]]);
        assert_eq!(r, vec![1.1, 2.0]);
    }

    #[test]
    fn history_csv_shape() {
        let rec = IterationRecord {
            iteration: 1,
            archive_hypervolume: Some(0.5),
            predictor_spearman: None,
            new_evaluations: 3,
            evaluations_cumulative: 13,
            wall_seconds: 0.25,
            search: vec![],
            archive: vec![],
        };
        let mut buf = Vec::new();
        write_history_csv(&[rec], &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(
            text,
            "iteration,archive_hypervolume,predictor_spearman,evaluations_cumulative,wall_seconds\n1,0.5,,13,0.250\n"
        );
    }
}
