//! Deterministic synthetic models.
//!
//! State matrices are drawn at random and then shifted left until every
//! Gershgorin disc sits in the open left half-plane, so stability never
//! depends on an eigenvalue computation and regeneration is exact.

use std::path::{Path, PathBuf};

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::consensus::{build_consensus_q, permute_symmetric};
use super::manifest::{save_manifest, MatrixSpec, ModelManifest, ModelSetManifest, PhiSpec};
use super::ModelIoError;
use crate::lincontrol::{NodeBlock, StateSpaceModel};

pub const DEFAULT_SEED: u64 = 20_240_611;

/// Largest Gershgorin right edge `aᵢᵢ + Σⱼ≠ᵢ |aᵢⱼ|`.
fn gershgorin_edge(a: &DMatrix<f64>) -> f64 {
    (0..a.nrows())
        .map(|i| a[(i, i)] + (0..a.ncols()).filter(|&j| j != i).map(|j| a[(i, j)].abs()).sum::<f64>())
        .fold(f64::NEG_INFINITY, f64::max)
}

fn uniform(rng: &mut impl Rng, rows: usize, cols: usize, scale: f64) -> DMatrix<f64> {
    DMatrix::from_fn(rows, cols, |_, _| scale * rng.gen_range(-1.0..1.0))
}

/// Node index of every state.
fn owners(partition: &[NodeBlock]) -> Vec<usize> {
    partition.iter().enumerate().flat_map(|(k, b)| std::iter::repeat_n(k, b.states)).collect()
}

/// Random stable network: weaker coupling across nodes than within,
/// node-local actuation, disturbance on every state, random PSD weight.
pub fn random_model(rng: &mut impl Rng, partition: &[NodeBlock]) -> StateSpaceModel {
    let m: usize = partition.iter().map(|b| b.states).sum();
    let r: usize = partition.iter().map(|b| b.inputs).sum();
    let state_node = owners(partition);
    let input_node: Vec<usize> =
        partition.iter().enumerate().flat_map(|(k, b)| std::iter::repeat_n(k, b.inputs)).collect();

    let mut a = uniform(rng, m, m, 1.0);
    for i in 0..m {
        for j in 0..m {
            if state_node[i] != state_node[j] {
                a[(i, j)] *= 0.5;
            }
        }
    }
    let margin = rng.gen_range(0.1..0.5);
    let shift = gershgorin_edge(&a) + margin;
    for i in 0..m {
        a[(i, i)] -= shift;
    }

    let mut b = uniform(rng, m, r, 1.0);
    for i in 0..m {
        for j in 0..r {
            if state_node[i] != input_node[j] {
                b[(i, j)] = 0.0;
            }
        }
    }
    let g = uniform(rng, m, m, 1.0);
    let q = &g * g.transpose() / m as f64 + DMatrix::identity(m, m) * 0.1;
    let r_mat = DMatrix::from_diagonal(&nalgebra::DVector::from_fn(r, |_, _| rng.gen_range(0.5..1.5)));

    StateSpaceModel {
        a,
        b,
        d: DMatrix::identity(m, m),
        q,
        r: r_mat,
        partition: partition.to_vec(),
    }
}

/// Copies of `base` with `A` moved along one random direction:
/// `A + (k − ⌊count/2⌋)·E` for `k = 0..count`, so the middle copy is `base`
/// and the copies average back to it. The step keeps every copy Gershgorin-stable.
pub fn perturbed_models(rng: &mut impl Rng, base: &StateSpaceModel, count: usize, strength: f64) -> Vec<StateSpaceModel> {
    let m = base.states();
    let mut e = uniform(rng, m, m, 1.0);
    let row_mass = (0..m).map(|i| e.row(i).iter().map(|x| x.abs()).sum::<f64>()).fold(0.0, f64::max);
    let room = -gershgorin_edge(&base.a);
    let half = (count / 2).max(1) as f64;
    e *= strength.clamp(0.0, 0.9) * room / (row_mass * half);
    (0..count)
        .map(|k| {
            let mut model = base.clone();
            model.a += &e * (k as f64 - (count / 2) as f64);
            model
        })
        .collect()
}

fn consensus_weight(model: &mut StateSpaceModel) -> Result<(), ModelIoError> {
    let (q, perm) = build_consensus_q(&model.partition)?;
    model.q = permute_symmetric(&q, &perm);
    Ok(())
}

fn manifest(name: &str, model: &StateSpaceModel, seed: u64, notes: &str) -> ModelManifest {
    let mut man = ModelManifest::from_model(name, model);
    man.q = MatrixSpec::Named("consensus".into());
    man.r = MatrixSpec::Named("identity".into());
    man.notes = Some(notes.into());
    man.seed = Some(seed);
    man
}

fn rng_for(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// The fixed scalar model `A = −1, B = D = Q = R = 1`.
pub fn scalar_model() -> StateSpaceModel {
    let one = DMatrix::from_element(1, 1, 1.0);
    StateSpaceModel {
        a: -one.clone(),
        b: one.clone(),
        d: one.clone(),
        q: one.clone(),
        r: one,
        partition: vec![NodeBlock::new(1, 1)],
    }
}

/// `n` nodes with two states and one input each, consensus weight, unit input weight.
pub fn network_fixture(n: usize, seed: u64) -> Result<StateSpaceModel, ModelIoError> {
    let partition = vec![NodeBlock::new(2, 1); n];
    let mut model = random_model(&mut rng_for(seed, n as u64), &partition);
    consensus_weight(&mut model)?;
    model.r = DMatrix::identity(n, n);
    Ok(model)
}

/// Three perturbations of the 3-node fixture centred on it.
pub fn network_set_fixture(seed: u64) -> Result<Vec<StateSpaceModel>, ModelIoError> {
    let base = network_fixture(3, seed)?;
    Ok(perturbed_models(&mut rng_for(seed, 100), &base, 3, 0.6))
}

/// Writes every shipped fixture into `dir`; returns the paths written.
pub fn write_fixtures(dir: &Path, seed: u64) -> Result<Vec<PathBuf>, ModelIoError> {
    let mut written = Vec::new();
    let mut put = |file: &str, man: ModelManifest| -> Result<(), ModelIoError> {
        let path = dir.join(file);
        save_manifest(&man, &path)?;
        written.push(path);
        Ok(())
    };

    let mut scalar = ModelManifest::from_model("scalar", &scalar_model());
    scalar.notes = Some("closed form: optimal gain sqrt(2)-1, open-loop cost 1/2".into());
    put("scalar.json", scalar)?;
    put("two_node.json", manifest("two_node", &network_fixture(2, seed)?, seed, "2 nodes x (2 states, 1 input)"))?;
    put("three_node.json", manifest("three_node", &network_fixture(3, seed)?, seed, "3 nodes x (2 states, 1 input)"))?;

    let set = network_set_fixture(seed)?;
    let mut names = Vec::new();
    for (k, model) in set.iter().enumerate() {
        let file = format!("three_node_set_{k}.json");
        let notes = format!("member {k} of 3; A shifted along a fixed direction, member 1 is three_node");
        put(&file, manifest(&format!("three_node_set_{k}"), model, seed, &notes))?;
        names.push(file);
    }
    let set_path = dir.join("three_node_set.json");
    save_manifest(&ModelSetManifest { models: names, phi: PhiSpec::default(), nominal_index: 0 }, &set_path)?;
    written.push(set_path);
    Ok(written)
}
