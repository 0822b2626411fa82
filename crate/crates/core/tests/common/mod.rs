//! Independent reference computations shared by the integration tests.
//!
//! Nothing here goes through the library's Schur-based Lyapunov solver or
//! its gradient descent, so agreement is meaningful.
#![allow(dead_code)]

use std::path::{Path, PathBuf};

use cbsg::game::{enumerate_actions, Action};
use cbsg::lincontrol::{NodeBlock, StateSpaceModel, ValidationOptions};
use cbsg::lossmap::LossTable;
use cbsg::modelio::fixtures::random_model;
use cbsg::modelio::load_model;
use nalgebra::DMatrix;
use rand::Rng;

pub fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures").join(name)
}

pub fn load_fixture(name: &str) -> StateSpaceModel {
    load_model(&fixture(name), ValidationOptions::default()).unwrap()
}

/// Solves `Aᵀ·P + P·A + C = 0` through the `m² × m²` Kronecker system.
pub fn kron_lyapunov(a: &DMatrix<f64>, c: &DMatrix<f64>) -> DMatrix<f64> {
    let m = a.nrows();
    let eye = DMatrix::<f64>::identity(m, m);
    let at = a.transpose();
    let op = eye.kronecker(&at) + at.kronecker(&eye);
    let rhs = -nalgebra::DVector::from_column_slice(c.as_slice());
    let x = op.lu().solve(&rhs).expect("singular Kronecker operator");
    let p = DMatrix::from_column_slice(m, m, x.as_slice());
    (&p + p.transpose()) * 0.5
}

/// H₂ cost of `K` via the Kronecker solve; `None` if `A − BK` is unstable.
pub fn oracle_cost(model: &StateSpaceModel, k: &DMatrix<f64>) -> Option<f64> {
    let acl = &model.a - &model.b * k;
    let eig = acl.complex_eigenvalues();
    if eig.iter().any(|z| z.re >= -1e-9) {
        return None;
    }
    let p = kron_lyapunov(&acl, &(&model.q + k.transpose() * &model.r * k));
    Some((model.d.transpose() * p * &model.d).trace())
}

/// Kleinman's Newton iteration for the LQR Riccati equation, from `K = 0`.
pub fn kleinman(model: &StateSpaceModel) -> (DMatrix<f64>, f64) {
    let r_inv = model.r.clone().try_inverse().unwrap();
    let mut k = DMatrix::zeros(model.inputs(), model.states());
    for _ in 0..200 {
        let acl = &model.a - &model.b * &k;
        let p = kron_lyapunov(&acl, &(&model.q + k.transpose() * &model.r * &k));
        let next = &r_inv * model.b.transpose() * &p;
        let step = (&next - &k).amax();
        k = next;
        if step <= 1e-13 * (1.0 + k.amax()) {
            break;
        }
    }
    let j = oracle_cost(model, &k).unwrap();
    (k, j)
}

/// Random partition of `n` nodes with 1–`max_states` states and one input each.
pub fn random_partition(rng: &mut impl Rng, n: usize, max_states: usize) -> Vec<NodeBlock> {
    (0..n).map(|_| NodeBlock::new(rng.gen_range(1..=max_states), 1)).collect()
}

pub fn random_network(rng: &mut impl Rng, n: usize, max_states: usize) -> StateSpaceModel {
    let part = random_partition(rng, n, max_states);
    random_model(rng, &part)
}

/// Loss table filled with arbitrary non-negative deltas, zero at the intact pattern.
pub fn random_table(rng: &mut impl Rng, n: usize) -> LossTable {
    let len = 1usize << n;
    let mut delta: Vec<f64> = (0..len).map(|_| rng.gen_range(0.0..2.0)).collect();
    delta[len - 1] = 0.0;
    LossTable {
        model_id: "random".into(),
        mode: cbsg::lincontrol::MaskMode::FullNode,
        n,
        j_opt: 1.0,
        j_by_pattern: delta.iter().map(|d| 1.0 + d).collect(),
        convergence_flags: vec![true; len],
        delta_by_pattern: delta,
    }
}

/// Loss grows with every additional attacked node, so the open-loop entry is the largest.
pub fn monotone_table(rng: &mut impl Rng, n: usize) -> LossTable {
    let weights: Vec<f64> = (0..n).map(|_| rng.gen_range(0.1..1.0)).collect();
    let synergy = rng.gen_range(0.0..0.5);
    let mut t = random_table(rng, n);
    for (i, d) in t.delta_by_pattern.iter_mut().enumerate() {
        let hit: Vec<usize> = (0..n).filter(|k| i >> k & 1 == 0).collect();
        let pairs = (hit.len() * hit.len().saturating_sub(1) / 2) as f64;
        *d = hit.iter().map(|&k| weights[k]).sum::<f64>() + synergy * pairs;
    }
    t.j_by_pattern = t.delta_by_pattern.iter().map(|d| 1.0 + d).collect();
    t
}

/// Any budget-feasible action for `n` nodes at `levels` with uniform cost `gamma`.
pub fn random_action(rng: &mut impl Rng, n: usize, levels: u32, gamma: f64) -> Action {
    let all = enumerate_actions(n, levels, &vec![gamma; n], 1 << 24).unwrap();
    all[rng.gen_range(0..all.len())].clone()
}

/// `|x − y| ≤ tol·max(|x|, |y|)`, with equality passing trivially.
pub fn rel_close(x: f64, y: f64, tol: f64) -> bool {
    x == y || (x - y).abs() <= tol * x.abs().max(y.abs())
}
