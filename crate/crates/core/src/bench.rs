//! Benchmark studies: survival selection on DTLZ1 and the Rosenbrock
//! surrogate demonstration, each over many independently seeded runs.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{NatError, Result};
use crate::evaluators::benchmarks::{dtlz1, dtlz1_variables, rosenbrock_demo, DemoMode, DemoOutcome};
use crate::metrics::igd;
use crate::operators::{binary_tournament, mutate_real, uniform_crossover, Standing};
use crate::par;
use crate::rng::stream;
use crate::selection::{survive, survive_by_domination, ReferenceDirectionSet, Survivor};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SelectionMethod {
    ReferencePoint,
    DominationOnly,
}

impl SelectionMethod {
    pub fn name(self) -> &'static str {
        match self {
            SelectionMethod::ReferencePoint => "reference_point",
            SelectionMethod::DominationOnly => "domination_only",
        }
    }
}

/// Largest reference set used for DTLZ1.
pub const DTLZ1_MAX_DIRECTIONS: usize = 156;
pub const DTLZ1_MIN_POPULATION: usize = 92;
const DTLZ1_ETA_M: f64 = 20.0;

#[derive(Clone, Debug, PartialEq)]
pub struct Dtlz1Setup {
    pub objectives: usize,
    pub directions: ReferenceDirectionSet,
    pub population: usize,
}

impl Dtlz1Setup {
    /// Das-Dennis directions with at most [`DTLZ1_MAX_DIRECTIONS`] members;
    /// the population is the next multiple of four, at least
    /// [`DTLZ1_MIN_POPULATION`].
    pub fn new(objectives: usize) -> Result<Self> {
        if objectives < 2 {
            return Err(NatError::config("objectives", "must be at least 2"));
        }
        let directions = ReferenceDirectionSet::sized_for(objectives, DTLZ1_MAX_DIRECTIONS)?;
        let population = directions.len().div_ceil(4).max(1) * 4;
        Ok(Self {
            objectives,
            population: population.max(DTLZ1_MIN_POPULATION),
            directions,
        })
    }

    /// The reference directions scaled onto the true front `sum f = 0.5`.
    pub fn reference_front(&self) -> Vec<Vec<f64>> {
        self.directions
            .directions
            .iter()
            .map(|d| d.iter().map(|v| 0.5 * v).collect())
            .collect()
    }
}

fn select<R: Rng + ?Sized>(
    method: SelectionMethod,
    objs: &[Vec<f64>],
    n: usize,
    z: &ReferenceDirectionSet,
    rng: &mut R,
) -> Result<Vec<Survivor>> {
    match method {
        SelectionMethod::ReferencePoint => survive(objs, n, z, rng),
        SelectionMethod::DominationOnly => survive_by_domination(objs, n, rng),
    }
}

/// One DTLZ1 run; returns the final population's objectives.
pub fn dtlz1_run(setup: &Dtlz1Setup, method: SelectionMethod, generations: usize, seed: u64) -> Result<Vec<Vec<f64>>> {
    let m = setup.objectives;
    let n_var = dtlz1_variables(m);
    let bounds = vec![(0.0, 1.0); n_var];
    let p_m = 1.0 / n_var as f64;
    let k = setup.population;
    let mut rng = stream(seed, "dtlz1", 0);
    let mut xs: Vec<Vec<f64>> = (0..k)
        .map(|_| (0..n_var).map(|_| rng.random::<f64>()).collect())
        .collect();
    let mut fs: Vec<Vec<f64>> = xs.iter().map(|x| dtlz1(x, m).map(|f| f.0)).collect::<Result<_>>()?;
    let mut standings: Vec<Standing> = select(method, &fs, k, &setup.directions, &mut rng)?
        .iter()
        .map(Survivor::standing)
        .collect();
    for _ in 0..generations {
        let mut children = Vec::with_capacity(k);
        while children.len() < k {
            let a = binary_tournament(&standings, &mut rng)?;
            let b = binary_tournament(&standings, &mut rng)?;
            let (c1, c2) = uniform_crossover(&xs[a], &xs[b], 1.0, &mut rng);
            for mut c in [c1, c2] {
                if children.len() < k {
                    mutate_real(&mut c, &bounds, p_m, DTLZ1_ETA_M, &mut rng);
                    children.push(c);
                }
            }
        }
        let child_fs: Vec<Vec<f64>> = par::map(&children, |c| dtlz1(c, m).map(|f| f.0))
            .into_iter()
            .collect::<Result<_>>()?;
        xs.extend(children);
        fs.extend(child_fs);
        let survivors = select(method, &fs, k, &setup.directions, &mut rng)?;
        xs = survivors.iter().map(|s| xs[s.index].clone()).collect();
        fs = survivors.iter().map(|s| fs[s.index].clone()).collect();
        standings = survivors.iter().map(Survivor::standing).collect();
    }
    Ok(fs)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub mean: f64,
    pub std: f64,
    pub median: f64,
}

impl Summary {
    pub fn of(values: &[f64]) -> Self {
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let var = if values.len() > 1 {
            values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0)
        } else {
            0.0
        };
        Self {
            mean,
            std: var.sqrt(),
            median: median(values),
        }
    }
}

pub fn median(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n == 0 {
        f64::NAN
    } else if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Dtlz1Row {
    pub objectives: usize,
    pub method: SelectionMethod,
    pub population: usize,
    pub generations: usize,
    pub igd: Vec<f64>,
    pub summary: Summary,
}

/// Both selection methods on DTLZ1 with `m` objectives. Run `r` of both
/// methods starts from the same seed.
pub fn dtlz1_study(m: usize, runs: usize, generations: usize, seed: u64) -> Result<Vec<Dtlz1Row>> {
    let setup = Dtlz1Setup::new(m)?;
    let front = setup.reference_front();
    [SelectionMethod::ReferencePoint, SelectionMethod::DominationOnly]
        .into_iter()
        .map(|method| {
            let igds = par::map_range(runs, |r| {
                let run_seed = crate::rng::subseed(seed, "dtlz1-run", (m * 10_000 + r) as u64);
                dtlz1_run(&setup, method, generations, run_seed).and_then(|fs| igd(&fs, &front))
            })
            .into_iter()
            .collect::<Result<Vec<f64>>>()?;
            Ok(Dtlz1Row {
                objectives: m,
                method,
                population: setup.population,
                generations,
                summary: Summary::of(&igds),
                igd: igds,
            })
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RosenbrockStudy {
    pub budget: usize,
    pub online: Vec<DemoOutcome>,
    pub offline: Vec<DemoOutcome>,
}

impl RosenbrockStudy {
    pub fn best_f(&self, mode: DemoMode) -> Vec<f64> {
        self.outcomes(mode).iter().map(|o| o.best_f).collect()
    }

    pub fn distances(&self, mode: DemoMode) -> Vec<f64> {
        self.outcomes(mode).iter().map(DemoOutcome::mean_distance_to_optimum).collect()
    }

    fn outcomes(&self, mode: DemoMode) -> &[DemoOutcome] {
        match mode {
            DemoMode::Online => &self.online,
            DemoMode::Offline => &self.offline,
        }
    }
}

/// Paired online/offline runs: run `r` of both modes shares its seed.
pub fn rosenbrock_study(runs: usize, budget: usize, seed: u64) -> Result<RosenbrockStudy> {
    let go = |mode: DemoMode| {
        par::map_range(runs, |r| rosenbrock_demo(budget, mode, &mut stream(seed, "rosenbrock", r as u64)))
            .into_iter()
            .collect::<Result<Vec<_>>>()
    };
    Ok(RosenbrockStudy {
        budget,
        online: go(DemoMode::Online)?,
        offline: go(DemoMode::Offline)?,
    })
}
