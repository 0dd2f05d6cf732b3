//! Variation and mating selection.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{NatError, Result};
use crate::genome::{Genome, SearchSpaceConfig};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct VariationConfig {
    pub crossover_prob: f64,
    pub mutation_prob: f64,
    pub eta_m: f64,
}

impl Default for VariationConfig {
    fn default() -> Self {
        Self {
            crossover_prob: 0.9,
            mutation_prob: 0.1,
            eta_m: 1.0,
        }
    }
}

impl VariationConfig {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.crossover_prob) {
            return Err(NatError::config("crossover_prob", "must be in [0, 1]"));
        }
        if !(0.0..=1.0).contains(&self.mutation_prob) {
            return Err(NatError::config("mutation_prob", "must be in [0, 1]"));
        }
        if !(self.eta_m > 0.0) || !self.eta_m.is_finite() {
            return Err(NatError::config("eta_m", "must be positive"));
        }
        Ok(())
    }
}

/// Uniform crossover on plain slices. With probability `1 - p_c` the
/// children are copies of the parents; otherwise every position is swapped
/// between the children with probability one half.
pub fn uniform_crossover<T: Copy, R: Rng + ?Sized>(
    a: &[T],
    b: &[T],
    p_c: f64,
    rng: &mut R,
) -> (Vec<T>, Vec<T>) {
    let mut x = a.to_vec();
    let mut y = b.to_vec();
    if rng.random::<f64>() < p_c {
        for (xi, yi) in x.iter_mut().zip(y.iter_mut()) {
            if rng.random_bool(0.5) {
                std::mem::swap(xi, yi);
            }
        }
    }
    (x, y)
}

/// Genome crossover: uniform exchange followed by skip-contiguity repair.
pub fn crossover<R: Rng + ?Sized>(
    parent_a: &Genome,
    parent_b: &Genome,
    p_c: f64,
    space: &SearchSpaceConfig,
    rng: &mut R,
) -> (Genome, Genome) {
    let (x, y) = uniform_crossover(parent_a.values(), parent_b.values(), p_c, rng);
    (Genome::new(x).repaired(space), Genome::new(y).repaired(space))
}

/// Polynomial mutation of a real value for a given uniform draw `u`.
pub fn polynomial_offset(x: f64, lower: f64, upper: f64, eta: f64, u: f64) -> f64 {
    let exponent = 1.0 / (1.0 + eta);
    if u <= 0.5 {
        x + ((2.0 * u).powf(exponent) - 1.0) * (x - lower)
    } else {
        x + (1.0 - (2.0 * (1.0 - u)).powf(exponent)) * (upper - x)
    }
}

/// Discretised polynomial mutation: the real result is rounded to the
/// nearest integer (exact halves away from the parent) and clamped.
pub fn polynomial_integer(value: u8, lower: u8, upper: u8, eta: f64, u: f64) -> u8 {
    let parent = f64::from(value);
    let offset = polynomial_offset(parent, f64::from(lower), f64::from(upper), eta, u) - parent;
    let step = (offset.abs() + 0.5).floor().copysign(offset);
    (parent + step).clamp(f64::from(lower), f64::from(upper)) as u8
}

/// Mutates each position independently with probability `p_m`, then repairs.
pub fn mutate<R: Rng + ?Sized>(
    genome: &Genome,
    space: &SearchSpaceConfig,
    p_m: f64,
    eta_m: f64,
    rng: &mut R,
) -> Genome {
    let mut out = genome.clone();
    for (position, v) in out.values_mut().iter_mut().enumerate() {
        if rng.random::<f64>() < p_m {
            let (lo, hi) = space.bounds(position);
            let u = rng.random::<f64>();
            *v = polynomial_integer(*v, lo, hi, eta_m, u);
        }
    }
    out.repaired(space)
}

/// Real-valued polynomial mutation for the continuous benchmarks.
pub fn mutate_real<R: Rng + ?Sized>(
    x: &mut [f64],
    bounds: &[(f64, f64)],
    p_m: f64,
    eta_m: f64,
    rng: &mut R,
) {
    for (xi, &(lo, hi)) in x.iter_mut().zip(bounds) {
        if rng.random::<f64>() < p_m {
            let u = rng.random::<f64>();
            *xi = polynomial_offset(*xi, lo, hi, eta_m, u).clamp(lo, hi);
        }
    }
}

/// What a tournament compares: non-domination rank, then the perpendicular
/// distance to the associated reference direction.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Standing {
    pub rank: usize,
    pub distance: f64,
}

/// Picks two distinct members uniformly and returns the index of the winner:
/// lower rank, then smaller distance, then a fair coin.
pub fn binary_tournament<R: Rng + ?Sized>(population: &[Standing], rng: &mut R) -> Result<usize> {
    let n = population.len();
    if n < 2 {
        return Err(NatError::NotEnoughCandidates {
            needed: 2,
            available: n,
        });
    }
    let i = rng.random_range(0..n);
    let mut j = rng.random_range(0..n - 1);
    if j >= i {
        j += 1;
    }
    let (a, b) = (population[i], population[j]);
    let winner = match a.rank.cmp(&b.rank) {
        std::cmp::Ordering::Less => i,
        std::cmp::Ordering::Greater => j,
        std::cmp::Ordering::Equal => {
            if a.distance < b.distance {
                i
            } else if b.distance < a.distance {
                j
            } else if rng.random_bool(0.5) {
                i
            } else {
                j
            }
        }
    };
    Ok(winner)
}
