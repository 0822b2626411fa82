use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::model::NodeBlock;
use super::LinControlError;
use crate::lossmap::SparsityPattern;

/// Which links a successful attack on a node removes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MaskMode {
    /// Self-feedback and all links to and from the node.
    FullNode,
    /// Links to and from other nodes only; the node's own block survives.
    InterNodeOnly,
}

impl MaskMode {
    pub fn as_str(self) -> &'static str {
        match self {
            MaskMode::FullNode => "full_node",
            MaskMode::InterNodeOnly => "inter_node_only",
        }
    }
}

impl std::fmt::Display for MaskMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for MaskMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "full_node" | "full-node" => Ok(MaskMode::FullNode),
            "inter_node_only" | "inter-node-only" => Ok(MaskMode::InterNodeOnly),
            other => Err(format!("unknown mask mode `{other}`")),
        }
    }
}

/// Binary `r × m` support of a feedback gain.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SupportMask(DMatrix<bool>);

impl SupportMask {
    pub fn ones(rows: usize, cols: usize) -> Self {
        Self(DMatrix::from_element(rows, cols, true))
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self(DMatrix::from_element(rows, cols, false))
    }

    pub fn from_matrix(bits: DMatrix<bool>) -> Self {
        Self(bits)
    }

    pub fn nrows(&self) -> usize {
        self.0.nrows()
    }

    pub fn ncols(&self) -> usize {
        self.0.ncols()
    }

    pub fn get(&self, i: usize, j: usize) -> bool {
        self.0[(i, j)]
    }

    pub fn set(&mut self, i: usize, j: usize, v: bool) {
        self.0[(i, j)] = v;
    }

    pub fn count_ones(&self) -> usize {
        self.0.iter().filter(|&&b| b).count()
    }

    pub fn is_empty_support(&self) -> bool {
        self.count_ones() == 0
    }

    /// `true` when every allowed entry of `other` is also allowed here.
    pub fn dominates(&self, other: &SupportMask) -> bool {
        self.0.shape() == other.0.shape() && self.0.iter().zip(other.0.iter()).all(|(&a, &b)| a || !b)
    }

    pub fn project(&self, k: &mut DMatrix<f64>) {
        for (v, &keep) in k.iter_mut().zip(self.0.iter()) {
            if !keep {
                *v = 0.0;
            }
        }
    }

    pub fn is_feasible(&self, k: &DMatrix<f64>) -> bool {
        k.shape() == self.0.shape() && k.iter().zip(self.0.iter()).all(|(&v, &keep)| keep || v == 0.0)
    }

    pub fn to_matrix(&self) -> DMatrix<f64> {
        self.0.map(|b| if b { 1.0 } else { 0.0 })
    }
}

/// Support of `K` after the nodes with `pattern[k] = 0` lose communication.
///
/// Block `K_ij` maps node `j`'s states to node `i`'s inputs.
pub fn build_mask(
    pattern: &SparsityPattern,
    partition: &[NodeBlock],
    mode: MaskMode,
) -> Result<SupportMask, LinControlError> {
    if pattern.len() != partition.len() {
        return Err(LinControlError::Dimension(format!(
            "pattern has {} nodes, partition has {}",
            pattern.len(),
            partition.len()
        )));
    }
    let m: usize = partition.iter().map(|b| b.states).sum();
    let r: usize = partition.iter().map(|b| b.inputs).sum();
    let mut mask = SupportMask::ones(r, m);

    let mut row0 = 0;
    for (i, bi) in partition.iter().enumerate() {
        let mut col0 = 0;
        for (j, bj) in partition.iter().enumerate() {
            let alive = match mode {
                MaskMode::FullNode => pattern.survives(i) && pattern.survives(j),
                MaskMode::InterNodeOnly => i == j || (pattern.survives(i) && pattern.survives(j)),
            };
            if !alive {
                for row in row0..row0 + bi.inputs {
                    for col in col0..col0 + bj.states {
                        mask.set(row, col, false);
                    }
                }
            }
            col0 += bj.states;
        }
        row0 += bi.inputs;
    }
    Ok(mask)
}
