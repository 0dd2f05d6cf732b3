//! Values computed by independent scripts and frozen here.

use nat_core::evaluators::benchmarks::{dtlz1, rosenbrock};
use nat_core::genome::{decode, encode, layer_code_table, madds, params, LayerSpec};
use nat_core::metrics::trade_off_scores;
use nat_core::surrogate::{fit_rbf, spearman, Regressor};
use nat_core::{CostModel, NetworkSpec, SearchSpaceConfig};
use serde::Deserialize;

fn spec(resolution: u32, width: f64, stages: &[&[(u32, u32)]]) -> NetworkSpec {
    NetworkSpec {
        resolution,
        width_multiplier: width,
        stages: stages
            .iter()
            .map(|s| {
                s.iter()
                    .map(|&(expand_ratio, kernel_size)| LayerSpec { expand_ratio, kernel_size })
                    .collect()
            })
            .collect(),
    }
}

const MIN_STAGE: &[(u32, u32)] = &[(3, 3), (3, 3)];
const SPEC_A: &[&[(u32, u32)]] = &[MIN_STAGE; 5];

const SPEC_B: &[&[(u32, u32)]] = &[
    &[(6, 7), (4, 5), (3, 3), (6, 3)],
    &[(3, 5), (4, 7)],
    &[(6, 5), (3, 7), (4, 3)],
    &[(4, 5), (6, 7)],
    &[(3, 3), (3, 5), (6, 7), (4, 7)],
];

#[test]
fn cost_model_matches_reference_counts() {
    let cost = CostModel::default();
    let a = spec(224, 1.0, SPEC_A);
    assert_eq!((madds(&a, &cost), params(&a, &cost)), (117_328_464, 1_943_528));
    let b = spec(192, 1.2, SPEC_B);
    assert_eq!((madds(&b, &cost), params(&b, &cost)), (285_470_304, 3_672_320));
    let b = spec(224, 1.0, SPEC_B);
    assert_eq!((madds(&b, &cost), params(&b, &cost)), (273_565_552, 2_783_496));
}

#[test]
fn encode_decode_round_trip_on_reference_specs() {
    let (space, cost) = (SearchSpaceConfig::default(), CostModel::default());
    for s in [spec(192, 1.2, SPEC_B), spec(224, 1.0, SPEC_A)] {
        let g = encode(&s, &space, &cost).unwrap();
        assert_eq!(decode(&g, &space, &cost).unwrap(), s);
    }
}

#[test]
fn first_stage_code_tables() {
    let (space, cost) = (SearchSpaceConfig::default(), CostModel::default());
    let pairs = |layer| -> Vec<(u32, u32)> {
        layer_code_table(&space, &cost, 224, 1.0, 0, layer)
            .iter()
            .map(|l| (l.expand_ratio, l.kernel_size))
            .collect()
    };
    assert_eq!(
        pairs(0),
        [(3, 3), (3, 5), (4, 3), (3, 7), (4, 5), (4, 7), (6, 3), (6, 5), (6, 7)]
    );
    assert_eq!(
        pairs(1),
        [(3, 3), (3, 5), (4, 3), (3, 7), (4, 5), (6, 3), (4, 7), (6, 5), (6, 7)]
    );
}

#[test]
fn spearman_with_ties() {
    let s = spearman(&[1.0, 2.0, 2.0, 4.0], &[1.0, 3.0, 2.0, 4.0]).unwrap();
    assert!((s.rho - 0.948_683_298_050_513_9).abs() < 1e-12, "{}", s.rho);
    assert!(!s.degenerate);
}

#[test]
fn three_point_rbf_solve() {
    let x = [[0.0], [1.0], [3.0]];
    let m = fit_rbf(&x, &[1.0, 2.0, 0.5], &[0], 1e-6).unwrap();
    assert!((m.length_scale - 2.0 / 3.0).abs() < 1e-15);
    let expected = [-8.558_496_738_859_095, 11.240_343_072_958_185, -4.705_737_577_217_752];
    for (w, e) in m.weights.iter().zip(expected) {
        assert!((w - e).abs() < 1e-9 * e.abs(), "{w} vs {e}");
    }
    assert!((m.predict_row(&[2.0]) - 1.742_445_103_101_244_2).abs() < 1e-9);
}

#[test]
fn rosenbrock_corner() {
    let f = rosenbrock(-2.048, 2.048).unwrap();
    assert!((f - 469.952_390_041_599_9).abs() < 1e-10);
}

#[test]
fn dtlz1_off_front_point() {
    let f = dtlz1(&[0.25, 0.75, 0.6, 0.5, 0.5, 0.5, 0.5], 3).unwrap();
    let expected = [0.187_499_999_999_998, 0.062_499_999_999_999_334, 0.749_999_999_999_992];
    for (a, b) in f.iter().zip(expected) {
        assert!((a - b).abs() < 1e-12, "{a} vs {b}");
    }
}

#[derive(Deserialize)]
struct TradeOffCase {
    front: Vec<Vec<f64>>,
    scores: Vec<Option<f64>>,
    preferred: Option<usize>,
}

fn trade_off_cases() -> Vec<TradeOffCase> {
    serde_json::from_str(include_str!("data/trade_off_fronts.json")).unwrap()
}

#[test]
fn trade_off_scores_match_direct_formula() {
    for (c, case) in trade_off_cases().iter().enumerate() {
        let got = trade_off_scores(&case.front).unwrap();
        assert_eq!(got.preferred, case.preferred, "front {c}");
        for (g, e) in got.scores.iter().zip(&case.scores) {
            match (g, e) {
                (Some(g), Some(e)) => assert!((g - e).abs() < 1e-9, "front {c}: {g} vs {e}"),
                (None, None) => {}
                _ => panic!("front {c}: {g:?} vs {e:?}"),
            }
        }
    }
}

#[test]
fn igd_matches_nested_loop_average() {
    let mut rng = nat_core::rng::seeded(17);
    for m in [2, 3, 5] {
        let pts = |n: usize, rng: &mut nat_core::rng::Rng| -> Vec<Vec<f64>> {
            (0..n).map(|_| (0..m).map(|_| rand::Rng::random::<f64>(rng)).collect()).collect()
        };
        let a = pts(40, &mut rng);
        let r = pts(25, &mut rng);
        let mut total = 0.0;
        for z in &r {
            let mut best = f64::INFINITY;
            for x in &a {
                let d: f64 = z.iter().zip(x).map(|(p, q)| (p - q) * (p - q)).sum::<f64>().sqrt();
                best = best.min(d);
            }
            total += best;
        }
        let got = nat_core::metrics::igd(&a, &r).unwrap();
        assert!((got - total / 25.0).abs() < 1e-12, "m={m}: {got}");
    }
}
