//! Domination, non-dominated sorting and reference-point survival selection.
//!
//! All objectives are minimised. Survival keeps whole fronts while they fit,
//! then fills the remaining slots from the split front by niching around a
//! set of Das-Dennis reference directions:
//!
//! 1. normalise accepted and split-front members by the ideal point (minimum
//!    over all candidates) and the nadir estimate (maximum over accepted plus
//!    split front); a zero span is replaced by one;
//! 2. associate each member with the direction of smallest perpendicular
//!    distance;
//! 3. count accepted members per direction (the niche count);
//! 4. repeatedly take a direction with the smallest niche count (random among
//!    ties); if its count is zero pick its closest split-front member,
//!    otherwise a random one; directions without candidates are retired.

use std::ops::Deref;

use rand::seq::index;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{NatError, Result};
use crate::operators::Standing;
use crate::par;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ObjectiveVector(pub Vec<f64>);

impl ObjectiveVector {
    pub fn new(values: Vec<f64>) -> Self {
        ObjectiveVector(values)
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }
}

impl Deref for ObjectiveVector {
    type Target = [f64];

    fn deref(&self) -> &[f64] {
        &self.0
    }
}

impl AsRef<[f64]> for ObjectiveVector {
    fn as_ref(&self) -> &[f64] {
        &self.0
    }
}

impl From<Vec<f64>> for ObjectiveVector {
    fn from(v: Vec<f64>) -> Self {
        ObjectiveVector(v)
    }
}

/// `a` is no worse than `b` everywhere and strictly better somewhere.
/// Callers guarantee equal lengths; see [`dominates`] for the checked form.
#[inline]
pub fn dominates_unchecked(a: &[f64], b: &[f64]) -> bool {
    let mut strictly = false;
    for (x, y) in a.iter().zip(b) {
        if x > y {
            return false;
        }
        if x < y {
            strictly = true;
        }
    }
    strictly
}

pub fn dominates(a: &[f64], b: &[f64]) -> Result<bool> {
    if a.len() != b.len() {
        return Err(NatError::DimensionMismatch {
            expected: a.len(),
            actual: b.len(),
        });
    }
    Ok(dominates_unchecked(a, b))
}

/// Fast non-dominated sort. Returns fronts of indices, best first; indices
/// inside a front are ascending.
pub fn non_dominated_sort<V: AsRef<[f64]> + Sync>(points: &[V]) -> Vec<Vec<usize>> {
    let n = points.len();
    if n == 0 {
        return Vec::new();
    }
    // For every point: whom it dominates, and by how many it is dominated.
    let rows: Vec<(Vec<usize>, usize)> = par::map_range(n, |i| {
        let pi = points[i].as_ref();
        let mut dominated = Vec::new();
        let mut count = 0;
        for (j, q) in points.iter().enumerate() {
            if i == j {
                continue;
            }
            let qj = q.as_ref();
            if dominates_unchecked(pi, qj) {
                dominated.push(j);
            } else if dominates_unchecked(qj, pi) {
                count += 1;
            }
        }
        (dominated, count)
    });
    let mut counts: Vec<usize> = rows.iter().map(|r| r.1).collect();
    let mut fronts = Vec::new();
    let mut current: Vec<usize> = (0..n).filter(|&i| counts[i] == 0).collect();
    while !current.is_empty() {
        let mut next = Vec::new();
        for &i in &current {
            for &j in &rows[i].0 {
                counts[j] -= 1;
                if counts[j] == 0 {
                    next.push(j);
                }
            }
        }
        next.sort_unstable();
        fronts.push(current);
        current = next;
    }
    fronts
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReferenceDirectionSet {
    pub directions: Vec<Vec<f64>>,
    pub partitions: usize,
}

impl ReferenceDirectionSet {
    pub fn len(&self) -> usize {
        self.directions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.directions.is_empty()
    }

    pub fn dimension(&self) -> usize {
        self.directions.first().map_or(0, Vec::len)
    }

    /// Single direction for single-objective runs.
    pub fn single() -> Self {
        Self {
            directions: vec![vec![1.0]],
            partitions: 1,
        }
    }

    /// Das-Dennis set with the largest partition count whose size does not
    /// exceed `target` (at least one partition). `m = 1` gives [`Self::single`].
    pub fn sized_for(m: usize, target: usize) -> Result<Self> {
        if m == 1 {
            return Ok(Self::single());
        }
        let mut h = 1;
        while das_dennis_count(m, h + 1) <= target as u128 {
            h += 1;
        }
        das_dennis(m, h)
    }
}

/// `C(H + m - 1, m - 1)`.
pub fn das_dennis_count(m: usize, h: usize) -> u128 {
    let (n, k) = ((h + m - 1) as u128, (m - 1) as u128);
    let k = k.min(n - k);
    (0..k).fold(1u128, |acc, i| acc * (n - i) / (i + 1))
}

/// All points `(i_1/H, ..., i_m/H)` with non-negative integers summing to `H`.
pub fn das_dennis(m: usize, h: usize) -> Result<ReferenceDirectionSet> {
    if m < 2 {
        return Err(NatError::config("objectives", "reference directions need m >= 2"));
    }
    if h < 1 {
        return Err(NatError::config("partitions", "need at least one partition"));
    }
    fn recurse(m: usize, left: usize, h: usize, prefix: &mut Vec<usize>, out: &mut Vec<Vec<f64>>) {
        if prefix.len() == m - 1 {
            prefix.push(left);
            out.push(prefix.iter().map(|&i| i as f64 / h as f64).collect());
            prefix.pop();
            return;
        }
        for i in 0..=left {
            prefix.push(i);
            recurse(m, left - i, h, prefix, out);
            prefix.pop();
        }
    }
    let mut directions = Vec::new();
    recurse(m, h, h, &mut Vec::with_capacity(m), &mut directions);
    Ok(ReferenceDirectionSet {
        directions,
        partitions: h,
    })
}

/// One survivor: its index in the candidate list, its front (0 = best) and
/// its perpendicular distance to the associated reference direction.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Survivor {
    pub index: usize,
    pub rank: usize,
    pub distance: f64,
}

impl Survivor {
    pub fn standing(&self) -> Standing {
        Standing {
            rank: self.rank,
            distance: self.distance,
        }
    }
}

/// Perpendicular distance from `point` to the ray through `direction`.
pub fn perpendicular_distance(point: &[f64], direction: &[f64]) -> f64 {
    let norm2: f64 = direction.iter().map(|w| w * w).sum();
    if norm2 == 0.0 {
        return point.iter().map(|f| f * f).sum::<f64>().sqrt();
    }
    let t = point.iter().zip(direction).map(|(f, w)| f * w).sum::<f64>() / norm2;
    point
        .iter()
        .zip(direction)
        .map(|(f, w)| (f - t * w).powi(2))
        .sum::<f64>()
        .sqrt()
}

/// Nearest direction (lowest index on ties) and the distance to it.
pub fn associate(point: &[f64], z: &ReferenceDirectionSet) -> (usize, f64) {
    let mut best = (0, f64::INFINITY);
    for (d, w) in z.directions.iter().enumerate() {
        let dist = perpendicular_distance(point, w);
        if dist < best.1 {
            best = (d, dist);
        }
    }
    best
}

fn check_dims<V: AsRef<[f64]>>(points: &[V]) -> Result<usize> {
    let m = points.first().map_or(0, |p| p.as_ref().len());
    for p in points {
        if p.as_ref().len() != m {
            return Err(NatError::DimensionMismatch {
                expected: m,
                actual: p.as_ref().len(),
            });
        }
    }
    Ok(m)
}

fn fronts_until<'a>(fronts: &'a [Vec<usize>], n: usize) -> (Vec<usize>, Vec<usize>, &'a [usize]) {
    let mut accepted = Vec::new();
    let mut ranks = Vec::new();
    let mut l = 0;
    while accepted.len() + fronts[l].len() < n {
        accepted.extend_from_slice(&fronts[l]);
        ranks.extend(std::iter::repeat_n(l, fronts[l].len()));
        l += 1;
    }
    ranks.extend(std::iter::repeat_n(l, fronts[l].len()));
    (accepted, ranks, &fronts[l])
}

/// Reference-point survival: selects `n` of `points`, returning survivors
/// sorted by index.
pub fn survive<V: AsRef<[f64]> + Sync, R: Rng + ?Sized>(
    points: &[V],
    n: usize,
    z: &ReferenceDirectionSet,
    rng: &mut R,
) -> Result<Vec<Survivor>> {
    if points.len() < n {
        return Err(NatError::NotEnoughCandidates {
            needed: n,
            available: points.len(),
        });
    }
    if n == 0 {
        return Ok(Vec::new());
    }
    let m = check_dims(points)?;
    if z.dimension() != m {
        return Err(NatError::DimensionMismatch {
            expected: m,
            actual: z.dimension(),
        });
    }
    let fronts = non_dominated_sort(points);
    let (accepted, ranks, split) = fronts_until(&fronts, n);
    // members = accepted followed by split front; ranks align with members
    let members: Vec<usize> = accepted.iter().chain(split).copied().collect();

    let mut ideal = vec![f64::INFINITY; m];
    for p in points {
        for (lo, v) in ideal.iter_mut().zip(p.as_ref()) {
            *lo = lo.min(*v);
        }
    }
    let mut nadir = vec![f64::NEG_INFINITY; m];
    for &i in &members {
        for (hi, v) in nadir.iter_mut().zip(points[i].as_ref()) {
            *hi = hi.max(*v);
        }
    }
    let span: Vec<f64> = nadir
        .iter()
        .zip(&ideal)
        .map(|(hi, lo)| if hi - lo > 0.0 { hi - lo } else { 1.0 })
        .collect();

    let assoc: Vec<(usize, f64)> = par::map(&members, |&i| {
        let normalized: Vec<f64> = points[i]
            .as_ref()
            .iter()
            .zip(&ideal)
            .zip(&span)
            .map(|((v, lo), s)| (v - lo) / s)
            .collect();
        associate(&normalized, z)
    });

    let survivor = |k: usize| Survivor {
        index: members[k],
        rank: ranks[k],
        distance: assoc[k].1,
    };

    let mut selected: Vec<Survivor>;
    if accepted.len() + split.len() == n {
        selected = (0..members.len()).map(survivor).collect();
    } else {
        selected = (0..accepted.len()).map(survivor).collect();
        let mut rho = vec![0usize; z.len()];
        for k in 0..accepted.len() {
            rho[assoc[k].0] += 1;
        }
        // split-front candidates per direction, in ascending member order
        let mut candidates: Vec<Vec<usize>> = vec![Vec::new(); z.len()];
        for k in accepted.len()..members.len() {
            candidates[assoc[k].0].push(k);
        }
        let mut active = vec![true; z.len()];
        let mut remaining = n - accepted.len();
        while remaining > 0 {
            let min_rho = (0..z.len())
                .filter(|&d| active[d])
                .map(|d| rho[d])
                .min()
                .expect("split front holds more members than free slots");
            let ties: Vec<usize> = (0..z.len()).filter(|&d| active[d] && rho[d] == min_rho).collect();
            let d = ties[rng.random_range(0..ties.len())];
            let pool = &mut candidates[d];
            if pool.is_empty() {
                active[d] = false;
                continue;
            }
            let pick = if rho[d] == 0 {
                let mut best = 0;
                for (p, &k) in pool.iter().enumerate() {
                    if assoc[k].1 < assoc[pool[best]].1 {
                        best = p;
                    }
                }
                best
            } else {
                rng.random_range(0..pool.len())
            };
            let k = pool.remove(pick);
            selected.push(survivor(k));
            rho[d] += 1;
            remaining -= 1;
        }
    }
    selected.sort_by_key(|s| s.index);
    Ok(selected)
}

/// Domination-only survival: whole fronts, then a uniformly random subset of
/// the split front. Distances are reported as zero.
pub fn survive_by_domination<V: AsRef<[f64]> + Sync, R: Rng + ?Sized>(
    points: &[V],
    n: usize,
    rng: &mut R,
) -> Result<Vec<Survivor>> {
    if points.len() < n {
        return Err(NatError::NotEnoughCandidates {
            needed: n,
            available: points.len(),
        });
    }
    if n == 0 {
        return Ok(Vec::new());
    }
    check_dims(points)?;
    let fronts = non_dominated_sort(points);
    let (accepted, ranks, split) = fronts_until(&fronts, n);
    let mut selected: Vec<Survivor> = accepted
        .iter()
        .enumerate()
        .map(|(k, &index)| Survivor {
            index,
            rank: ranks[k],
            distance: 0.0,
        })
        .collect();
    let rank = ranks.last().copied().unwrap_or(0);
    let free = n - accepted.len();
    for pick in index::sample(rng, split.len(), free) {
        selected.push(Survivor {
            index: split[pick],
            rank,
            distance: 0.0,
        });
    }
    selected.sort_by_key(|s| s.index);
    Ok(selected)
}
