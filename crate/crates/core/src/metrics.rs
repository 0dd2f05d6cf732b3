//! Front quality indicators and trade-off based solution choice.

use serde::{Deserialize, Serialize};

use crate::error::{NatError, Result};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Hypervolume {
    pub volume: f64,
    /// Points that do not strictly dominate the reference point.
    pub dropped: usize,
}

fn check_dims<V: AsRef<[f64]>>(points: &[V], m: usize) -> Result<()> {
    match points.iter().find(|p| p.as_ref().len() != m) {
        Some(p) => Err(NatError::DimensionMismatch {
            expected: m,
            actual: p.as_ref().len(),
        }),
        None => Ok(()),
    }
}

/// Exact hypervolume for 2 to 4 objectives by slicing along the last
/// objective down to a two-dimensional sweep.
pub fn hypervolume<V: AsRef<[f64]>>(points: &[V], reference: &[f64]) -> Result<Hypervolume> {
    let m = reference.len();
    if !(2..=4).contains(&m) {
        return Err(NatError::UnsupportedObjectives(m));
    }
    check_dims(points, m)?;
    let inside: Vec<&[f64]> = points
        .iter()
        .map(AsRef::as_ref)
        .filter(|p| p.iter().zip(reference).all(|(a, r)| a < r))
        .collect();
    let dropped = points.len() - inside.len();
    Ok(Hypervolume {
        volume: slice_volume(inside, reference),
        dropped,
    })
}

fn slice_volume(mut points: Vec<&[f64]>, reference: &[f64]) -> f64 {
    let m = reference.len();
    if points.is_empty() {
        return 0.0;
    }
    if m == 2 {
        points.sort_by(|a, b| a[0].total_cmp(&b[0]).then(a[1].total_cmp(&b[1])));
        let mut area = 0.0;
        let mut floor = reference[1];
        for p in points {
            if p[1] < floor {
                area += (reference[0] - p[0]) * (floor - p[1]);
                floor = p[1];
            }
        }
        return area;
    }
    let last = m - 1;
    points.sort_by(|a, b| a[last].total_cmp(&b[last]));
    let mut volume = 0.0;
    for i in 0..points.len() {
        let next = points.get(i + 1).map_or(reference[last], |p| p[last]);
        let depth = next - points[i][last];
        if depth > 0.0 {
            let section: Vec<&[f64]> = points[..=i].iter().map(|p| &p[..last]).collect();
            volume += slice_volume(section, &reference[..last]) * depth;
        }
    }
    volume
}

/// Mean distance from each reference-front point to its nearest obtained
/// point.
pub fn igd<A: AsRef<[f64]>, B: AsRef<[f64]>>(obtained: &[A], reference_front: &[B]) -> Result<f64> {
    if obtained.is_empty() || reference_front.is_empty() {
        return Err(NatError::NotEnoughCandidates {
            needed: 1,
            available: 0,
        });
    }
    let m = reference_front[0].as_ref().len();
    check_dims(obtained, m)?;
    check_dims(reference_front, m)?;
    let total: f64 = reference_front
        .iter()
        .map(|z| {
            obtained
                .iter()
                .map(|x| {
                    x.as_ref()
                        .iter()
                        .zip(z.as_ref())
                        .map(|(a, b)| (a - b) * (a - b))
                        .sum::<f64>()
                        .sqrt()
                })
                .fold(f64::INFINITY, f64::min)
        })
        .sum();
    Ok(total / reference_front.len() as f64)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TradeOff {
    /// `None` where every neighbour offers zero gain.
    pub scores: Vec<Option<f64>>,
    /// Index of the highest score when it stands out by more than three
    /// standard deviations above the mean of the others.
    pub preferred: Option<usize>,
}

impl TradeOff {
    pub fn preferred_exists(&self) -> bool {
        self.preferred.is_some()
    }
}

/// Min-max normalisation over the set; a zero span becomes one.
pub fn normalize<V: AsRef<[f64]>>(points: &[V]) -> Vec<Vec<f64>> {
    let m = points[0].as_ref().len();
    let mut lo = vec![f64::INFINITY; m];
    let mut hi = vec![f64::NEG_INFINITY; m];
    for p in points {
        for (k, &v) in p.as_ref().iter().enumerate() {
            lo[k] = lo[k].min(v);
            hi[k] = hi[k].max(v);
        }
    }
    points
        .iter()
        .map(|p| {
            p.as_ref()
                .iter()
                .enumerate()
                .map(|(k, &v)| {
                    let span = hi[k] - lo[k];
                    (v - lo[k]) / if span > 0.0 { span } else { 1.0 }
                })
                .collect()
        })
        .collect()
}

/// Average loss per unit average gain of moving from `i` to `j`; `None` when
/// `j` gains nothing.
pub fn trade_off_ratio(fi: &[f64], fj: &[f64]) -> Option<f64> {
    let (mut loss, mut n_loss, mut gain, mut n_gain) = (0.0, 0usize, 0.0, 0usize);
    for (a, b) in fi.iter().zip(fj) {
        if b > a {
            loss += b - a;
            n_loss += 1;
        } else if a > b {
            gain += a - b;
            n_gain += 1;
        }
    }
    if n_gain == 0 {
        return None;
    }
    let avg_loss = if n_loss == 0 { 0.0 } else { loss / n_loss as f64 };
    Some(avg_loss / (gain / n_gain as f64))
}

/// Trade-off score of every member of a mutually non-dominated front: the
/// largest loss-per-gain ratio towards its `m` nearest neighbours (other
/// members, by normalised Euclidean distance).
pub fn trade_off_scores<V: AsRef<[f64]>>(front: &[V]) -> Result<TradeOff> {
    let m = front.first().map_or(0, |p| p.as_ref().len());
    if m == 0 || front.len() < m + 1 {
        return Err(NatError::NotEnoughCandidates {
            needed: m.max(1) + 1,
            available: front.len(),
        });
    }
    check_dims(front, m)?;
    let f = normalize(front);
    let n = f.len();
    let scores: Vec<Option<f64>> = (0..n)
        .map(|i| {
            let mut others: Vec<(f64, usize)> = (0..n)
                .filter(|&j| j != i)
                .map(|j| {
                    let d: f64 = f[i].iter().zip(&f[j]).map(|(a, b)| (a - b) * (a - b)).sum();
                    (d, j)
                })
                .collect();
            others.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
            others
                .iter()
                .take(m)
                .filter_map(|&(_, j)| trade_off_ratio(&f[i], &f[j]))
                .reduce(f64::max)
        })
        .collect();
    Ok(TradeOff {
        preferred: standout(&scores),
        scores,
    })
}

fn standout(scores: &[Option<f64>]) -> Option<usize> {
    let defined: Vec<(usize, f64)> = scores.iter().enumerate().filter_map(|(i, s)| s.map(|v| (i, v))).collect();
    let &(best, top) = defined.iter().max_by(|a, b| a.1.total_cmp(&b.1).then(b.0.cmp(&a.0)))?;
    let rest: Vec<f64> = defined.iter().filter(|(i, _)| *i != best).map(|&(_, v)| v).collect();
    if rest.is_empty() {
        return None;
    }
    let mean = rest.iter().sum::<f64>() / rest.len() as f64;
    let var = rest.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / rest.len() as f64;
    (top > mean + 3.0 * var.sqrt()).then_some(best)
}
