mod common;

use cbsg::lincontrol::{h2_cost, MaskMode};
use cbsg::lossmap::{build_loss_table, combine_tables, model_hash, LossMapOptions, SparsityPattern};
use cbsg::modelio::{load_loss_table, save_loss_table, ModelIoError};
use common::*;
use nalgebra::DMatrix;
use proptest::prelude::*;

#[test]
fn pattern_dominance_is_monotone() {
    let model = load_fixture("three_node.json");
    for mode in [MaskMode::FullNode, MaskMode::InterNodeOnly] {
        let t = build_loss_table(&model, mode, &LossMapOptions::default()).unwrap();
        for i in 0..8 {
            for j in 0..8 {
                let (s, s2) = (SparsityPattern::from_index(i, 3), SparsityPattern::from_index(j, 3));
                if s.is_dominated_by(&s2) {
                    let (d, d2) = (t.delta(&s), t.delta(&s2));
                    assert!(d >= d2 - 1e-6 * (1.0 + d2), "{mode}: Δ{s}={d} < Δ{s2}={d2}");
                }
            }
        }
    }
}

#[test]
fn endpoints_match_direct_costs() {
    let model = load_fixture("two_node.json");
    let t = build_loss_table(&model, MaskMode::FullNode, &LossMapOptions::default()).unwrap();
    assert_eq!(t.delta_by_pattern[3], 0.0);
    let j_ol = oracle_cost(&model, &DMatrix::zeros(model.inputs(), model.states())).unwrap();
    let (_, j_opt) = kleinman(&model);
    assert!(rel_close(t.open_loop_delta(), j_ol - j_opt, 1e-6));
    let direct = h2_cost(&model, &DMatrix::zeros(model.inputs(), model.states())).unwrap();
    assert!((t.j_by_pattern[0] - direct).abs() <= 1e-12 * direct);
}

#[test]
fn scalar_open_loop_loss() {
    let t = build_loss_table(&load_fixture("scalar.json"), MaskMode::FullNode, &LossMapOptions::default()).unwrap();
    let expected = 0.5 - (2f64.sqrt() - 1.0);
    assert!((t.open_loop_delta() - expected).abs() < 1e-9);
    assert_eq!(t.delta_by_pattern[1], 0.0);
}

#[test]
fn cache_round_trip_and_staleness() {
    let model = load_fixture("two_node.json");
    let opts = LossMapOptions::default();
    let t = build_loss_table(&model, MaskMode::FullNode, &opts).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("loss.json");
    save_loss_table(&t, &path).unwrap();
    assert_eq!(load_loss_table(&path, Some(&t.model_id)).unwrap(), t);

    let mut edited = model.clone();
    edited.a[(0, 0)] -= 1e-3;
    let stale = model_hash(&edited, MaskMode::FullNode, &opts.synth);
    assert!(matches!(load_loss_table(&path, Some(&stale)), Err(ModelIoError::HashMismatch { .. })));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn combination_is_linear_in_weights(seed in any::<u64>(), alpha in 0.0f64..1.0, w in 0.0f64..1.0, v in 0.0f64..1.0) {
        use rand::SeedableRng;
        let mut r = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let tables = vec![random_table(&mut r, 3), random_table(&mut r, 3)];
        let phi1 = [w, 1.0 - w];
        let phi2 = [v, 1.0 - v];
        let mix = [alpha * phi1[0] + (1.0 - alpha) * phi2[0], alpha * phi1[1] + (1.0 - alpha) * phi2[1]];
        prop_assume!((mix[0] + mix[1] - 1.0).abs() <= 1e-12);
        let t1 = combine_tables(&tables, &phi1).unwrap();
        let t2 = combine_tables(&tables, &phi2).unwrap();
        let tm = combine_tables(&tables, &mix).unwrap();
        for i in 0..8 {
            let lin = alpha * t1.delta_by_pattern[i] + (1.0 - alpha) * t2.delta_by_pattern[i];
            prop_assert!((tm.delta_by_pattern[i] - lin).abs() <= 1e-12);
        }
    }
}
