//! Attack-outcome enumeration and the H₂ performance-loss table.
//!
//! For every sparsity pattern the structured optimum `J(K*_s)` is computed
//! and compared against the unconstrained optimum `J(K*)`; the difference is
//! the loss the game is played over.

mod pattern;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::lincontrol::{
    build_mask, h2_cost, synth_structured, LinControlError, MaskMode, StateSpaceModel, SynthOptions,
};
use crate::robust::ModelSet;

pub use pattern::SparsityPattern;

/// Default upper bound on the node count (2¹⁶ syntheses).
pub const DEFAULT_NODE_CAP: usize = 16;

/// Tolerance on `Σφ = 1`.
pub const WEIGHT_SUM_TOL: f64 = 1e-12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LossMapError {
    #[error("{n} nodes exceed the pattern cap of {cap}")]
    CapExceeded { n: usize, cap: usize },
    #[error("node count must be at least 1")]
    NoNodes,
    #[error("pattern {index}: {source}")]
    Solver {
        index: usize,
        #[source]
        source: LinControlError,
    },
    #[error("model weights sum to {sum}, expected 1")]
    WeightSumMismatch { sum: f64 },
    #[error("incompatible loss tables: {0}")]
    Incompatible(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LossMapOptions {
    pub node_cap: usize,
    pub synth: SynthOptions,
}

impl Default for LossMapOptions {
    fn default() -> Self {
        Self { node_cap: DEFAULT_NODE_CAP, synth: SynthOptions::default() }
    }
}

/// All `2ⁿ` patterns in index order.
pub fn enumerate_patterns(n: usize, cap: usize) -> Result<Vec<SparsityPattern>, LossMapError> {
    if n == 0 {
        return Err(LossMapError::NoNodes);
    }
    if n > cap {
        return Err(LossMapError::CapExceeded { n, cap });
    }
    Ok((0..1usize << n).map(|i| SparsityPattern::from_index(i, n)).collect())
}

/// Per-pattern H₂ optima and losses for one model and attack mode.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LossTable {
    pub model_id: String,
    pub mode: MaskMode,
    pub n: usize,
    /// Unconstrained optimum `J(K*)`.
    pub j_opt: f64,
    pub j_by_pattern: Vec<f64>,
    pub delta_by_pattern: Vec<f64>,
    pub convergence_flags: Vec<bool>,
}

impl LossTable {
    pub fn len(&self) -> usize {
        self.delta_by_pattern.len()
    }

    pub fn is_empty(&self) -> bool {
        self.delta_by_pattern.is_empty()
    }

    pub fn delta(&self, pattern: &SparsityPattern) -> f64 {
        self.delta_by_pattern[pattern.index()]
    }

    /// Loss at the all-attacked pattern.
    pub fn open_loop_delta(&self) -> f64 {
        self.delta_by_pattern[0]
    }

    /// Loss when only `node` (0-based) is attacked.
    pub fn single_node_delta(&self, node: usize) -> f64 {
        self.delta(&SparsityPattern::single_attacked(node, self.n))
    }

    /// `value / J(K*) · 100`.
    pub fn percent_of_optimum(&self, value: f64) -> f64 {
        value / self.j_opt * 100.0
    }

    pub fn all_converged(&self) -> bool {
        self.convergence_flags.iter().all(|&c| c)
    }

    pub fn nonconverged_patterns(&self) -> Vec<usize> {
        self.convergence_flags
            .iter()
            .enumerate()
            .filter_map(|(i, &c)| (!c).then_some(i))
            .collect()
    }
}

/// Digest of everything a loss table depends on.
pub fn model_hash(model: &StateSpaceModel, mode: MaskMode, synth: &SynthOptions) -> String {
    let mut h = Sha256::new();
    h.update(b"cbsg-losstable-v1");
    for blk in &model.partition {
        h.update((blk.states as u64).to_le_bytes());
        h.update((blk.inputs as u64).to_le_bytes());
    }
    for mat in [&model.a, &model.b, &model.d, &model.q, &model.r] {
        h.update((mat.nrows() as u64).to_le_bytes());
        h.update((mat.ncols() as u64).to_le_bytes());
        for i in 0..mat.nrows() {
            for j in 0..mat.ncols() {
                h.update(mat[(i, j)].to_bits().to_le_bytes());
            }
        }
    }
    h.update(mode.as_str().as_bytes());
    h.update(synth.grad_tol.to_bits().to_le_bytes());
    h.update((synth.max_iter as u64).to_le_bytes());
    h.update(synth.armijo.to_bits().to_le_bytes());
    h.update(synth.backtrack.to_bits().to_le_bytes());
    h.update((synth.max_backtracks as u64).to_le_bytes());
    hex::encode(h.finalize())
}

/// Structured optimum for one pattern; `(J, converged)`.
///
/// A failed synthesis falls back to the open-loop gain, which is feasible
/// for every mask, and is reported as not converged.
fn pattern_optimum(
    model: &StateSpaceModel,
    pattern: &SparsityPattern,
    mode: MaskMode,
    synth: &SynthOptions,
) -> Result<(f64, bool), LossMapError> {
    let solver_err = |source| LossMapError::Solver { index: pattern.index(), source };
    let mask = build_mask(pattern, &model.partition, mode).map_err(solver_err)?;
    match synth_structured(model, &mask, synth) {
        Ok(rep) => Ok((rep.cost, rep.converged)),
        Err(LinControlError::LineSearchFailure { .. }) | Err(LinControlError::IllConditioned { .. }) => {
            let k0 = nalgebra::DMatrix::zeros(model.inputs(), model.states());
            let j = h2_cost(model, &k0).map_err(solver_err)?;
            log::warn!("pattern {pattern}: synthesis failed, keeping open-loop cost");
            Ok((j, false))
        }
        Err(e) => Err(solver_err(e)),
    }
}

fn clamp_delta(j_s: f64, j_opt: f64) -> f64 {
    let delta = j_s - j_opt;
    if delta < -1e-9 * j_opt.abs() {
        log::warn!("structured optimum {j_s} beats unconstrained {j_opt}; clamping loss to 0");
    }
    delta.max(0.0)
}

/// Result of [`loss_for_pattern`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PatternLoss {
    pub j: f64,
    pub delta: f64,
    pub converged: bool,
}

/// Loss of a single pattern, synthesizing the unconstrained reference as well.
pub fn loss_for_pattern(
    model: &StateSpaceModel,
    pattern: &SparsityPattern,
    mode: MaskMode,
    synth: &SynthOptions,
) -> Result<PatternLoss, LossMapError> {
    let n = model.nodes();
    if pattern.len() != n {
        return Err(LossMapError::Incompatible(format!("pattern has {} nodes, model has {n}", pattern.len())));
    }
    let (j_opt, c_opt) = pattern_optimum(model, &SparsityPattern::all_surviving(n), mode, synth)?;
    let (j, c) = if pattern.index() == (1 << n) - 1 {
        (j_opt, c_opt)
    } else {
        pattern_optimum(model, pattern, mode, synth)?
    };
    Ok(PatternLoss { j, delta: clamp_delta(j, j_opt), converged: c && c_opt })
}

/// Loss table over all `2ⁿ` patterns. Patterns are solved in parallel and
/// gathered by index.
pub fn build_loss_table(
    model: &StateSpaceModel,
    mode: MaskMode,
    opts: &LossMapOptions,
) -> Result<LossTable, LossMapError> {
    let patterns = enumerate_patterns(model.nodes(), opts.node_cap)?;
    let solved: Vec<(f64, bool)> = patterns
        .par_iter()
        .map(|p| pattern_optimum(model, p, mode, &opts.synth))
        .collect::<Result<_, _>>()?;

    let (j_opt, opt_converged) = *solved.last().expect("at least two patterns");
    let j_by_pattern: Vec<f64> = solved.iter().map(|s| s.0).collect();
    let delta_by_pattern = j_by_pattern.iter().map(|&j| clamp_delta(j, j_opt)).collect();
    let convergence_flags = solved.iter().map(|s| s.1 && opt_converged).collect();

    Ok(LossTable {
        model_id: model_hash(model, mode, &opts.synth),
        mode,
        n: model.nodes(),
        j_opt,
        j_by_pattern,
        delta_by_pattern,
        convergence_flags,
    })
}

/// Nodes (1-based) by descending single-attack loss; ties by ascending node.
pub fn importance_ranking(table: &LossTable) -> Vec<usize> {
    let mut nodes: Vec<usize> = (0..table.n).collect();
    nodes.sort_by(|&a, &b| {
        table
            .single_node_delta(b)
            .partial_cmp(&table.single_node_delta(a))
            .unwrap_or(std::cmp::Ordering::Equal)
    });
    nodes.into_iter().map(|k| k + 1).collect()
}

pub(crate) fn check_weights(phi: &[f64]) -> Result<(), LossMapError> {
    let sum: f64 = phi.iter().sum();
    if (sum - 1.0).abs() > WEIGHT_SUM_TOL || phi.iter().any(|&p| p.is_nan() || p < 0.0) {
        return Err(LossMapError::WeightSumMismatch { sum });
    }
    Ok(())
}

/// `φ`-weighted combination of per-model tables.
pub fn combine_tables(tables: &[LossTable], phi: &[f64]) -> Result<LossTable, LossMapError> {
    let first = tables.first().ok_or_else(|| LossMapError::Incompatible("no tables".into()))?;
    if tables.len() != phi.len() {
        return Err(LossMapError::Incompatible(format!("{} tables but {} weights", tables.len(), phi.len())));
    }
    check_weights(phi)?;
    if let Some(t) = tables.iter().find(|t| t.n != first.n || t.mode != first.mode || t.len() != first.len()) {
        return Err(LossMapError::Incompatible(format!(
            "table {} has n={} mode={}, expected n={} mode={}",
            t.model_id, t.n, t.mode, first.n, first.mode
        )));
    }

    let len = first.len();
    let weighted = |f: &dyn Fn(&LossTable) -> &Vec<f64>| -> Vec<f64> {
        (0..len).map(|i| tables.iter().zip(phi).map(|(t, &w)| w * f(t)[i]).sum()).collect()
    };
    let mut h = Sha256::new();
    h.update(b"cbsg-expected-v1");
    for (t, w) in tables.iter().zip(phi) {
        h.update(t.model_id.as_bytes());
        h.update(w.to_bits().to_le_bytes());
    }

    Ok(LossTable {
        model_id: hex::encode(h.finalize()),
        mode: first.mode,
        n: first.n,
        j_opt: tables.iter().zip(phi).map(|(t, &w)| w * t.j_opt).sum(),
        j_by_pattern: weighted(&|t| &t.j_by_pattern),
        delta_by_pattern: weighted(&|t| &t.delta_by_pattern),
        convergence_flags: (0..len).map(|i| tables.iter().all(|t| t.convergence_flags[i])).collect(),
    })
}

/// Expected loss over a model set, `Σⱼ φⱼ·Δʲ` per pattern.
pub fn expected_loss_table(set: &ModelSet, mode: MaskMode, opts: &LossMapOptions) -> Result<LossTable, LossMapError> {
    check_weights(set.phi())?;
    let tables = set
        .models()
        .iter()
        .map(|m| build_loss_table(m, mode, opts))
        .collect::<Result<Vec<_>, _>>()?;
    combine_tables(&tables, set.phi())
}
