//! Sampling behaviour of the stochastic operators, checked against their
//! exact expectations with generous (about 4.5 sigma) margins.

use nat_core::genome::{sample_uniform, HEADER_LEN};
use nat_core::natloop::{sample_subnet, AdaptationDistribution};
use nat_core::operators::{binary_tournament, crossover, polynomial_integer, polynomial_offset, Standing};
use nat_core::rng::seeded;
use nat_core::{Genome, SearchSpaceConfig};
use rand::Rng;

fn within(count: usize, n: usize, p: f64) -> bool {
    let mean = n as f64 * p;
    let sd = (n as f64 * p * (1.0 - p)).sqrt();
    (count as f64 - mean).abs() <= 4.5 * sd.max(1.0)
}

#[test]
fn crossover_inherits_each_position_from_either_parent_equally() {
    let space = SearchSpaceConfig::default();
    let a = Genome::new(vec![0, 0, 1, 1, 1, 1, 1, 1, 1, 1, 1, 1, 1, 1, 1, 1, 1, 1, 1, 1, 1, 1]);
    let b = Genome::new(vec![4, 1, 9, 9, 9, 9, 9, 9, 9, 9, 9, 9, 9, 9, 9, 9, 9, 9, 9, 9, 9, 9]);
    let n = 20_000;
    let mut from_a = vec![0usize; a.len()];
    let mut rng = seeded(3);
    for _ in 0..n {
        let (x, y) = crossover(&a, &b, 1.0, &space, &mut rng);
        for p in 0..a.len() {
            // No skips in either parent, so repair leaves everything in place.
            assert_ne!(x.values()[p] == a.values()[p], y.values()[p] == a.values()[p]);
            from_a[p] += usize::from(x.values()[p] == a.values()[p]);
        }
    }
    for (p, &c) in from_a.iter().enumerate() {
        assert!(within(c, n, 0.5), "position {p}: {c}");
    }
}

#[test]
fn crossover_probability_controls_mixing() {
    let space = SearchSpaceConfig::default();
    let a = sample_uniform(&space, &mut seeded(1));
    let b = sample_uniform(&space, &mut seeded(2));
    let n = 20_000;
    let mut rng = seeded(4);
    let copies = (0..n)
        .filter(|_| {
            let (x, y) = crossover(&a, &b, 0.3, &space, &mut rng);
            x == a && y == b
        })
        .count();
    // Copies come from skipped crossover (0.7) plus the rare all-keep swap pattern.
    assert!(within(copies, n, 0.7 + 0.3 * 0.5f64.powi(22)), "{copies}");
}

#[test]
fn uniform_sampling_depth_and_header_marginals() {
    let space = SearchSpaceConfig::default();
    let n = 30_000;
    let mut depth = vec![vec![0usize; 5]; space.stages];
    let mut resolution = [0usize; 5];
    let mut rng = seeded(8);
    for _ in 0..n {
        let g = sample_uniform(&space, &mut rng);
        resolution[usize::from(g.values()[0])] += 1;
        for (stage, counts) in depth.iter_mut().enumerate() {
            let base = HEADER_LEN + stage * space.max_layers_per_stage;
            let d = g.values()[base..base + space.max_layers_per_stage].iter().filter(|&&v| v != 0).count();
            counts[d] += 1;
        }
    }
    for counts in &depth {
        assert_eq!(counts[0] + counts[1], 0);
        for &c in &counts[2..] {
            assert!(within(c, n, 1.0 / 3.0), "{counts:?}");
        }
    }
    for &c in &resolution {
        assert!(within(c, n, 0.2), "{resolution:?}");
    }
}

#[test]
fn subnet_sampling_follows_the_distribution() {
    let space = SearchSpaceConfig::default();
    let mut d = AdaptationDistribution::uniform(&space);
    // Skewed, but without skip codes so repair cannot move values around.
    d.probabilities[0] = vec![0.5, 0.3, 0.1, 0.1, 0.0];
    d.probabilities[7] = vec![0.0, 0.05, 0.05, 0.1, 0.1, 0.1, 0.1, 0.1, 0.1, 0.3];
    d.probabilities[4] = vec![0.0, 0.2, 0.2, 0.2, 0.0, 0.0, 0.0, 0.0, 0.0, 0.4];
    d.probabilities[5] = vec![0.0, 0.5, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.5];
    let n = 30_000;
    let mut rng = seeded(12);
    let mut counts: Vec<Vec<usize>> = d.probabilities.iter().map(|p| vec![0; p.len()]).collect();
    for _ in 0..n {
        let g = sample_subnet(&d, &space, &mut rng);
        for (p, &v) in g.values().iter().enumerate() {
            counts[p][usize::from(v)] += 1;
        }
    }
    for p in [0, 1, 2, 4, 5, 7] {
        for (v, &c) in counts[p].iter().enumerate() {
            assert!(within(c, n, d.probabilities[p][v]), "position {p} value {v}: {c}");
        }
    }
}

#[test]
fn tournament_prefers_rank_then_distance() {
    let pop = [
        Standing { rank: 0, distance: 0.5 },
        Standing { rank: 0, distance: 0.1 },
        Standing { rank: 1, distance: 0.0 },
    ];
    let n = 30_000;
    let mut wins = [0usize; 3];
    let mut rng = seeded(2);
    for _ in 0..n {
        wins[binary_tournament(&pop, &mut rng).unwrap()] += 1;
    }
    // Pairs are equally likely: {0,1} -> 1, {0,2} -> 0, {1,2} -> 1.
    assert!(within(wins[0], n, 1.0 / 3.0));
    assert!(within(wins[1], n, 2.0 / 3.0));
    assert_eq!(wins[2], 0);
}

fn offset_variance(eta: f64, n: usize) -> f64 {
    let mut rng = seeded(eta.to_bits());
    let d: Vec<f64> = (0..n)
        .map(|_| polynomial_offset(5.0, 1.0, 9.0, eta, rng.random::<f64>()) - 5.0)
        .collect();
    let mean = d.iter().sum::<f64>() / n as f64;
    d.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64
}

#[test]
fn mutation_spread_shrinks_as_eta_grows() {
    let v: Vec<f64> = [1.0, 3.0, 10.0, 20.0].iter().map(|&e| offset_variance(e, 100_000)).collect();
    assert!(v.windows(2).all(|w| w[1] < w[0]), "{v:?}");
}

#[test]
fn integer_mutants_stay_near_parent_for_large_eta() {
    let mut rng = seeded(6);
    let n = 50_000;
    let same = (0..n)
        .filter(|_| polynomial_integer(5, 1, 9, 20.0, rng.random::<f64>()) == 5)
        .count();
    let spread = (0..n)
        .filter(|_| polynomial_integer(5, 1, 9, 1.0, rng.random::<f64>()) == 5)
        .count();
    assert!(same > spread);
    assert!(same as f64 / n as f64 > 0.5);
}

#[test]
fn estimated_distribution_is_the_value_histogram() {
    use nat_core::natloop::estimate_distribution;
    let space = SearchSpaceConfig::default();
    let mut rng = seeded(21);
    let archive: Vec<Genome> = (0..300).map(|_| sample_uniform(&space, &mut rng)).collect();
    let d = estimate_distribution(&archive, &space).unwrap();
    d.validate(&space).unwrap();
    for (i, row) in d.probabilities.iter().enumerate() {
        for (v, &p) in row.iter().enumerate() {
            let count = archive.iter().filter(|g| usize::from(g.values()[i]) == v).count();
            assert_eq!(p, count as f64 / 300.0, "position {i} value {v}");
        }
    }
}
