//! Analytic test problems: Rosenbrock with the online/offline surrogate
//! demonstration, and the scalable DTLZ1.

use std::f64::consts::PI;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{NatError, Result};
use crate::selection::ObjectiveVector;
use crate::surrogate::{fit_rbf, Regressor, RbfModel, DEFAULT_RIDGE};

pub const ROSENBROCK_BOUND: f64 = 2.048;
/// Distance-related variables of DTLZ1.
pub const DTLZ1_K: usize = 5;

pub fn rosenbrock(x1: f64, x2: f64) -> Result<f64> {
    for x in [x1, x2] {
        if !(-ROSENBROCK_BOUND..=ROSENBROCK_BOUND).contains(&x) {
            return Err(NatError::OutOfDomain(format!(
                "rosenbrock input {x} outside [-{ROSENBROCK_BOUND}, {ROSENBROCK_BOUND}]"
            )));
        }
    }
    Ok((1.0 - x1).powi(2) + 100.0 * (x2 - x1 * x1).powi(2))
}

pub fn dtlz1_variables(m: usize) -> usize {
    m + DTLZ1_K - 1
}

pub fn dtlz1(x: &[f64], m: usize) -> Result<ObjectiveVector> {
    if m < 2 {
        return Err(NatError::config("objectives", "DTLZ1 needs at least 2 objectives"));
    }
    if x.len() != dtlz1_variables(m) {
        return Err(NatError::DimensionMismatch {
            expected: dtlz1_variables(m),
            actual: x.len(),
        });
    }
    if let Some(v) = x.iter().find(|v| !(0.0..=1.0).contains(*v)) {
        return Err(NatError::OutOfDomain(format!("DTLZ1 variable {v} outside [0, 1]")));
    }
    let tail = &x[m - 1..];
    let g = 100.0
        * (tail.len() as f64
            + tail
                .iter()
                .map(|&v| (v - 0.5).powi(2) - (20.0 * PI * (v - 0.5)).cos())
                .sum::<f64>());
    let scale = 0.5 * (1.0 + g);
    let f = (0..m)
        .map(|i| {
            let kept = m - 1 - i;
            let mut v = scale * x[..kept].iter().product::<f64>();
            if i > 0 {
                v *= 1.0 - x[kept];
            }
            v
        })
        .collect();
    Ok(ObjectiveVector(f))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DemoMode {
    Offline,
    Online,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DemoOutcome {
    pub best_f: f64,
    pub best_x: [f64; 2],
    /// Every truly evaluated point, in evaluation order.
    pub evaluated: Vec<[f64; 2]>,
}

impl DemoOutcome {
    /// Mean Euclidean distance of the evaluated points to the optimum (1, 1).
    pub fn mean_distance_to_optimum(&self) -> f64 {
        self.evaluated
            .iter()
            .map(|p| ((p[0] - 1.0).powi(2) + (p[1] - 1.0).powi(2)).sqrt())
            .sum::<f64>()
            / self.evaluated.len() as f64
    }
}

pub const DEMO_MIN_BUDGET: usize = 20;
/// The surrogate models `ln(1 + f)`, which keeps the interpolant well
/// conditioned across the function's four orders of magnitude.
fn transform(f: f64) -> f64 {
    f.ln_1p()
}

fn uniform_point<R: Rng + ?Sized>(rng: &mut R) -> [f64; 2] {
    [
        rng.random_range(-ROSENBROCK_BOUND..=ROSENBROCK_BOUND),
        rng.random_range(-ROSENBROCK_BOUND..=ROSENBROCK_BOUND),
    ]
}

fn fit(points: &[[f64; 2]], values: &[f64]) -> Result<RbfModel> {
    let y: Vec<f64> = values.iter().map(|&f| transform(f)).collect();
    fit_rbf(points, &y, &[0, 1], DEFAULT_RIDGE)
}

/// Bounded compass search on the surrogate from several starts: the best
/// known points plus a few random ones.
fn minimize_surrogate<R: Rng + ?Sized>(model: &RbfModel, starts: &[[f64; 2]], rng: &mut R) -> [f64; 2] {
    let b = ROSENBROCK_BOUND;
    let eval = |p: &[f64; 2]| model.predict_row(p);
    let mut candidates: Vec<[f64; 2]> = starts.to_vec();
    candidates.extend((0..4).map(|_| uniform_point(rng)));
    let mut best = (f64::INFINITY, candidates[0]);
    for start in candidates {
        let mut x = start;
        let mut fx = eval(&x);
        let mut step = 0.25 * b;
        while step > 1e-6 {
            let mut improved = false;
            for (dx, dy) in [(1.0, 0.0), (-1.0, 0.0), (0.0, 1.0), (0.0, -1.0), (1.0, 1.0), (-1.0, -1.0), (1.0, -1.0), (-1.0, 1.0)] {
                let y = [(x[0] + dx * step).clamp(-b, b), (x[1] + dy * step).clamp(-b, b)];
                let fy = eval(&y);
                if fy < fx {
                    x = y;
                    fx = fy;
                    improved = true;
                    break;
                }
            }
            if !improved {
                step *= 0.5;
            }
        }
        if fx < best.0 {
            best = (fx, x);
        }
    }
    best.1
}

fn best_starts(points: &[[f64; 2]], values: &[f64], k: usize) -> Vec<[f64; 2]> {
    let mut order: Vec<usize> = (0..points.len()).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    order.into_iter().take(k).map(|i| points[i]).collect()
}

fn is_new(points: &[[f64; 2]], p: &[f64; 2]) -> bool {
    points
        .iter()
        .all(|q| (q[0] - p[0]).abs() > 1e-9 || (q[1] - p[1]).abs() > 1e-9)
}

/// Surrogate-assisted minimisation of Rosenbrock with `budget` true
/// evaluations.
///
/// Offline: `budget - 1` uniform samples, one model, and the model optimum as
/// the last evaluation. Online: a quarter of the budget uniformly, then
/// alternate refit, surrogate optimisation and true evaluation of the
/// surrogate optimum until the budget is spent.
pub fn rosenbrock_demo<R: Rng + ?Sized>(budget: usize, mode: DemoMode, rng: &mut R) -> Result<DemoOutcome> {
    if budget < DEMO_MIN_BUDGET {
        return Err(NatError::config("budget", format!("must be at least {DEMO_MIN_BUDGET}")));
    }
    let initial = match mode {
        DemoMode::Offline => budget - 1,
        DemoMode::Online => budget.div_ceil(4),
    };
    let mut points: Vec<[f64; 2]> = Vec::with_capacity(budget);
    let mut values = Vec::with_capacity(budget);
    while points.len() < initial {
        let p = uniform_point(rng);
        if is_new(&points, &p) {
            values.push(rosenbrock(p[0], p[1])?);
            points.push(p);
        }
    }
    while points.len() < budget {
        let model = fit(&points, &values)?;
        let starts = best_starts(&points, &values, 3);
        let mut p = minimize_surrogate(&model, &starts, rng);
        if !is_new(&points, &p) {
            // The model is already exact here; explore instead.
            p = uniform_point(rng);
        }
        values.push(rosenbrock(p[0], p[1])?);
        points.push(p);
    }
    let best = (0..values.len())
        .min_by(|&a, &b| values[a].total_cmp(&values[b]))
        .expect("budget is positive");
    Ok(DemoOutcome {
        best_f: values[best],
        best_x: points[best],
        evaluated: points,
    })
}
