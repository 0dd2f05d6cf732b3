//! Online accuracy predictor: Gaussian RBF interpolants and the bootstrap
//! ensemble built from random row and feature subsets.
//!
//! Each model min-max scales its selected features over its own training
//! rows, uses the median pairwise training distance as the length scale and
//! interpolates the centred targets, so a model fitted to constant targets
//! predicts that constant everywhere.

use std::collections::HashMap;

use nalgebra::{DMatrix, DVector};
use rand::seq::index;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{NatError, Result};
use crate::par;

pub const DEFAULT_RIDGE: f64 = 1e-6;
pub const DEFAULT_ENSEMBLE_SIZE: usize = 500;
/// Fraction of archive rows each ensemble member is trained on.
pub const ROW_FRACTION: f64 = 0.8;

/// Anything that maps a feature row to a scalar.
pub trait Regressor: Sync {
    fn predict_row(&self, row: &[f64]) -> f64;

    fn predict_rows(&self, rows: &[Vec<f64>]) -> Vec<f64> {
        par::map(rows, |r| self.predict_row(r))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RbfModel {
    pub centers: Vec<Vec<f64>>,
    pub weights: Vec<f64>,
    pub length_scale: f64,
    pub feature_indices: Vec<usize>,
    pub ridge: f64,
    pub offset: f64,
    pub feature_min: Vec<f64>,
    pub feature_span: Vec<f64>,
}

fn median(mut v: Vec<f64>) -> f64 {
    if v.is_empty() {
        return 0.0;
    }
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

fn squared_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Fits one RBF interpolant on the columns `idx` of `x`.
pub fn fit_rbf<V: AsRef<[f64]>>(x: &[V], y: &[f64], idx: &[usize], ridge: f64) -> Result<RbfModel> {
    if x.len() != y.len() {
        return Err(NatError::DimensionMismatch {
            expected: x.len(),
            actual: y.len(),
        });
    }
    if x.len() < 2 {
        return Err(NatError::NotEnoughCandidates {
            needed: 2,
            available: x.len(),
        });
    }
    let width = x[0].as_ref().len();
    if idx.is_empty() || !idx.windows(2).all(|w| w[0] < w[1]) || idx[idx.len() - 1] >= width {
        return Err(NatError::config(
            "feature_indices",
            "must be non-empty, strictly increasing and within the row width",
        ));
    }
    if !(ridge >= 0.0) {
        return Err(NatError::config("ridge", "must be non-negative"));
    }
    let restricted: Vec<Vec<f64>> = x
        .iter()
        .map(|row| {
            let row = row.as_ref();
            idx.iter().map(|&j| row[j]).collect()
        })
        .collect();
    let d = idx.len();
    let mut feature_min = vec![f64::INFINITY; d];
    let mut feature_max = vec![f64::NEG_INFINITY; d];
    for row in &restricted {
        for j in 0..d {
            feature_min[j] = feature_min[j].min(row[j]);
            feature_max[j] = feature_max[j].max(row[j]);
        }
    }
    let feature_span: Vec<f64> = feature_max
        .iter()
        .zip(&feature_min)
        .map(|(hi, lo)| if hi - lo > 0.0 { hi - lo } else { 1.0 })
        .collect();
    let centers: Vec<Vec<f64>> = restricted
        .iter()
        .map(|row| scale(row, &feature_min, &feature_span))
        .collect();

    let n = centers.len();
    let mut pairwise = Vec::with_capacity(n * (n - 1) / 2);
    for i in 0..n {
        for j in i + 1..n {
            pairwise.push(squared_distance(&centers[i], &centers[j]).sqrt());
        }
    }
    let mut length_scale = median(pairwise);
    if !(length_scale > 0.0) {
        length_scale = 1.0;
    }
    let gamma = 1.0 / (2.0 * length_scale * length_scale);

    let offset = y.iter().sum::<f64>() / n as f64;
    let kernel = DMatrix::from_fn(n, n, |i, j| {
        let k = (-gamma * squared_distance(&centers[i], &centers[j])).exp();
        if i == j {
            k + ridge
        } else {
            k
        }
    });
    let rhs = DVector::from_iterator(n, y.iter().map(|v| v - offset));
    let chol = kernel
        .cholesky()
        .ok_or_else(|| NatError::SingularSystem("kernel matrix is not positive definite".into()))?;
    let min_pivot = chol.l_dirty().diagonal().iter().fold(f64::INFINITY, |a, &b| a.min(b));
    if min_pivot * min_pivot < 1e-14 {
        return Err(NatError::SingularSystem(format!(
            "pivot {min_pivot:e} too small; training rows are duplicated on the selected features"
        )));
    }
    let weights = chol.solve(&rhs);
    Ok(RbfModel {
        centers,
        weights: weights.iter().copied().collect(),
        length_scale,
        feature_indices: idx.to_vec(),
        ridge,
        offset,
        feature_min,
        feature_span,
    })
}

fn scale(row: &[f64], min: &[f64], span: &[f64]) -> Vec<f64> {
    row.iter()
        .zip(min)
        .zip(span)
        .map(|((v, lo), s)| (v - lo) / s)
        .collect()
}

impl Regressor for RbfModel {
    fn predict_row(&self, row: &[f64]) -> f64 {
        let gamma = 1.0 / (2.0 * self.length_scale * self.length_scale);
        let q: Vec<f64> = self
            .feature_indices
            .iter()
            .enumerate()
            .map(|(k, &j)| (row[j] - self.feature_min[k]) / self.feature_span[k])
            .collect();
        self.offset
            + self
                .centers
                .iter()
                .zip(&self.weights)
                .map(|(c, w)| w * (-gamma * squared_distance(c, &q)).exp())
                .sum::<f64>()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RbfEnsemble {
    pub members: Vec<RbfModel>,
    /// Number of rows the ensemble was built from.
    pub train_size: usize,
}

impl RbfEnsemble {
    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }
}

impl Regressor for RbfEnsemble {
    fn predict_row(&self, row: &[f64]) -> f64 {
        self.members.iter().map(|m| m.predict_row(row)).sum::<f64>() / self.members.len() as f64
    }
}

/// Merges rows that coincide on `idx`, averaging their targets. Keeps first
/// occurrence order.
fn dedup_on<V: AsRef<[f64]>>(x: &[V], y: &[f64], rows: &[usize], idx: &[usize]) -> (Vec<Vec<f64>>, Vec<f64>) {
    let mut slot: HashMap<Vec<u64>, usize> = HashMap::new();
    let mut out_x: Vec<Vec<f64>> = Vec::new();
    let mut sums: Vec<(f64, usize)> = Vec::new();
    for &r in rows {
        let row = x[r].as_ref();
        let key: Vec<u64> = idx.iter().map(|&j| row[j].to_bits()).collect();
        match slot.get(&key) {
            Some(&k) => {
                sums[k].0 += y[r];
                sums[k].1 += 1;
            }
            None => {
                slot.insert(key, out_x.len());
                out_x.push(row.to_vec());
                sums.push((y[r], 1));
            }
        }
    }
    (out_x, sums.into_iter().map(|(s, c)| s / c as f64).collect())
}

/// One member's draw: training rows and feature subset.
#[derive(Clone, Debug, PartialEq)]
pub struct MemberPlan {
    pub rows: Vec<usize>,
    pub features: Vec<usize>,
}

/// Draws the row and feature subsets of `k` members. All randomness of the
/// ensemble happens here, sequentially, so fitting may run in parallel.
pub fn plan_members<R: Rng + ?Sized>(n_rows: usize, n_features: usize, k: usize, rng: &mut R) -> Vec<MemberPlan> {
    let take = ((ROW_FRACTION * n_rows as f64).ceil() as usize).clamp(1, n_rows);
    let min_features = n_features.div_ceil(2).max(1);
    (0..k)
        .map(|_| {
            let mut rows = index::sample(rng, n_rows, take).into_vec();
            rows.sort_unstable();
            let count = rng.random_range(min_features..=n_features);
            let mut features = index::sample(rng, n_features, count).into_vec();
            features.sort_unstable();
            MemberPlan { rows, features }
        })
        .collect()
}

/// Bootstrap RBF ensemble: `k` members, each on `ceil(0.8 n)` rows drawn
/// without replacement and a random feature subset of size in
/// `[ceil(d/2), d]`.
pub fn build_ensemble<V, R>(x: &[V], y: &[f64], k: usize, rng: &mut R) -> Result<RbfEnsemble>
where
    V: AsRef<[f64]> + Sync,
    R: Rng + ?Sized,
{
    build_ensemble_with_ridge(x, y, k, DEFAULT_RIDGE, rng)
}

/// [`build_ensemble`] with an explicit ridge for every member.
pub fn build_ensemble_with_ridge<V, R>(x: &[V], y: &[f64], k: usize, ridge: f64, rng: &mut R) -> Result<RbfEnsemble>
where
    V: AsRef<[f64]> + Sync,
    R: Rng + ?Sized,
{
    if x.len() != y.len() {
        return Err(NatError::DimensionMismatch {
            expected: x.len(),
            actual: y.len(),
        });
    }
    if x.len() < 2 {
        return Err(NatError::NotEnoughCandidates {
            needed: 2,
            available: x.len(),
        });
    }
    if k == 0 {
        return Err(NatError::config("ensemble_size", "must be at least 1"));
    }
    let plans = plan_members(x.len(), x[0].as_ref().len(), k, rng);
    let members = par::map(&plans, |plan| fit_member(x, y, plan, ridge));
    Ok(RbfEnsemble {
        members: members.into_iter().collect::<Result<_>>()?,
        train_size: x.len(),
    })
}

fn fit_member<V: AsRef<[f64]>>(x: &[V], y: &[f64], plan: &MemberPlan, ridge: f64) -> Result<RbfModel> {
    let (rows, targets) = dedup_on(x, y, &plan.rows, &plan.features);
    if rows.len() == 1 {
        // Every sampled row coincides on these features: a flat model.
        return Ok(RbfModel {
            centers: vec![plan.features.iter().map(|_| 0.0).collect()],
            weights: vec![0.0],
            length_scale: 1.0,
            feature_indices: plan.features.clone(),
            ridge,
            offset: targets[0],
            feature_min: plan.features.iter().map(|&j| rows[0][j]).collect(),
            feature_span: vec![1.0; plan.features.len()],
        });
    }
    fit_rbf(&rows, &targets, &plan.features, ridge)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Spearman {
    pub rho: f64,
    /// Set when either input has zero rank variance; `rho` is then 0.
    pub degenerate: bool,
}

/// Average ranks (1-based), ties sharing the mean of their positions.
pub fn average_ranks(v: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..v.len()).collect();
    order.sort_by(|&a, &b| v[a].total_cmp(&v[b]));
    let mut ranks = vec![0.0; v.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && v[order[j + 1]] == v[order[i]] {
            j += 1;
        }
        let r = (i + j) as f64 / 2.0 + 1.0;
        for &k in &order[i..=j] {
            ranks[k] = r;
        }
        i = j + 1;
    }
    ranks
}

pub fn pearson(a: &[f64], b: &[f64]) -> Option<f64> {
    let n = a.len() as f64;
    let ma = a.iter().sum::<f64>() / n;
    let mb = b.iter().sum::<f64>() / n;
    let (mut sab, mut saa, mut sbb) = (0.0, 0.0, 0.0);
    for (x, y) in a.iter().zip(b) {
        sab += (x - ma) * (y - mb);
        saa += (x - ma) * (x - ma);
        sbb += (y - mb) * (y - mb);
    }
    (saa > 0.0 && sbb > 0.0).then(|| (sab / (saa * sbb).sqrt()).clamp(-1.0, 1.0))
}

pub fn spearman(pred: &[f64], truth: &[f64]) -> Result<Spearman> {
    if pred.len() != truth.len() {
        return Err(NatError::DimensionMismatch {
            expected: pred.len(),
            actual: truth.len(),
        });
    }
    if pred.len() < 2 {
        return Err(NatError::NotEnoughCandidates {
            needed: 2,
            available: pred.len(),
        });
    }
    Ok(match pearson(&average_ranks(pred), &average_ranks(truth)) {
        Some(rho) => Spearman { rho, degenerate: false },
        None => Spearman {
            rho: 0.0,
            degenerate: true,
        },
    })
}
