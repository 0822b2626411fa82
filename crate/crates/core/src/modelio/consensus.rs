//! Consensus state weight for networks of oscillators.
//!
//! The weight is block diagonal in the *reordered* state convention: every
//! node's angle first, then every node's frequency, then all remaining
//! states. Models are stored node-grouped, with each node's own states in
//! the order angle, frequency, rest. The permutation returned here maps the
//! former onto the latter.

use nalgebra::DMatrix;

use super::ModelIoError;
use crate::lincontrol::NodeBlock;

/// Grouped state index of each reordered state.
pub fn grouped_from_reordered(partition: &[NodeBlock]) -> Result<Vec<usize>, ModelIoError> {
    let mut offsets = Vec::with_capacity(partition.len());
    let mut at = 0;
    for (node, blk) in partition.iter().enumerate() {
        if blk.states < 2 {
            return Err(ModelIoError::PartitionTooSmall { node: node + 1, states: blk.states });
        }
        offsets.push(at);
        at += blk.states;
    }
    let angles = offsets.iter().copied();
    let freqs = offsets.iter().map(|o| o + 1);
    let rest = partition.iter().zip(&offsets).flat_map(|(blk, &o)| o + 2..o + blk.states);
    Ok(angles.chain(freqs).chain(rest).collect())
}

/// `diag(L̄, Iₙ, I_{m−2n})` with `L̄ = n·I − 𝟙𝟙ᵀ`, in reordered convention,
/// together with [`grouped_from_reordered`] of the same partition.
pub fn build_consensus_q(partition: &[NodeBlock]) -> Result<(DMatrix<f64>, Vec<usize>), ModelIoError> {
    let perm = grouped_from_reordered(partition)?;
    let n = partition.len();
    let m = perm.len();
    let mut q = DMatrix::identity(m, m);
    for i in 0..n {
        for j in 0..n {
            q[(i, j)] = if i == j { n as f64 - 1.0 } else { -1.0 };
        }
    }
    Ok((q, perm))
}

/// `out[perm[i], perm[j]] = m[i, j]`.
pub fn permute_symmetric(m: &DMatrix<f64>, perm: &[usize]) -> DMatrix<f64> {
    let mut out = DMatrix::zeros(m.nrows(), m.ncols());
    for (i, &pi) in perm.iter().enumerate() {
        for (j, &pj) in perm.iter().enumerate() {
            out[(pi, pj)] = m[(i, j)];
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn two_nodes_two_states() {
        let (q, perm) = build_consensus_q(&[NodeBlock::new(2, 1), NodeBlock::new(2, 1)]).unwrap();
        let expected = DMatrix::from_row_slice(4, 4, &[
            1.0, -1.0, 0.0, 0.0,
            -1.0, 1.0, 0.0, 0.0,
            0.0, 0.0, 1.0, 0.0,
            0.0, 0.0, 0.0, 1.0,
        ]);
        assert_eq!(q, expected);
        assert_eq!(perm, vec![0, 2, 1, 3]);
    }

    #[test]
    fn single_node_laplacian_is_zero() {
        let (q, _) = build_consensus_q(&[NodeBlock::new(2, 1)]).unwrap();
        assert_eq!(q, DMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![0.0, 1.0])));
    }

    #[test]
    fn laplacian_rows_sum_to_zero() {
        let part: Vec<_> = (0..5).map(|k| NodeBlock::new(2 + k % 2, 1)).collect();
        let (q, perm) = build_consensus_q(&part).unwrap();
        for i in 0..5 {
            assert_eq!((0..5).map(|j| q[(i, j)]).sum::<f64>(), 0.0);
        }
        let mut sorted = perm.clone();
        sorted.sort_unstable();
        assert_eq!(sorted, (0..q.nrows()).collect::<Vec<_>>());
        // Extra states of nodes 2 and 4 land after all angles and frequencies.
        assert_eq!(&perm[10..], &[4, 9]);
    }

    #[test]
    fn needs_two_states_per_node() {
        assert!(matches!(
            build_consensus_q(&[NodeBlock::new(2, 1), NodeBlock::new(1, 1)]),
            Err(ModelIoError::PartitionTooSmall { node: 2, states: 1 })
        ));
    }

    #[test]
    fn permutation_preserves_spectrum_trace() {
        let (q, perm) = build_consensus_q(&[NodeBlock::new(3, 1), NodeBlock::new(2, 1)]).unwrap();
        let g = permute_symmetric(&q, &perm);
        assert_eq!(g.trace(), q.trace());
        assert_eq!(g[(0, 3)], -1.0);
        assert_eq!(g[(1, 1)], 1.0);
    }
}
