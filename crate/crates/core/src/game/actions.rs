use serde::{Deserialize, Serialize};

use super::GameError;

/// Slack on the unit budget; level fractions like 1/3 are inexact in binary.
pub const BUDGET_SLACK: f64 = 1e-12;

/// Default cap on the number of feasible actions per player.
pub const DEFAULT_ACTION_CAP: usize = 1 << 24;

/// Per-node investment levels `steps[k] / levels`, with the resulting cost.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Action {
    pub steps: Vec<u32>,
    /// Level denominator `L`; a node's level lies in `{0, 1/L, …, 1}`.
    pub levels: u32,
    /// `Σᵢ γᵢ · levelᵢ`.
    pub cost: f64,
}

impl Action {
    pub fn zero(n: usize, levels: u32) -> Self {
        Self { steps: vec![0; n], levels, cost: 0.0 }
    }

    pub fn from_steps(steps: Vec<u32>, levels: u32, gamma: &[f64]) -> Self {
        let cost = action_cost(&steps, levels, gamma);
        Self { steps, levels, cost }
    }

    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    /// Investment level of node `k` (0-based).
    #[inline]
    pub fn level(&self, k: usize) -> f64 {
        self.steps[k] as f64 / self.levels as f64
    }

    pub fn level_vector(&self) -> Vec<f64> {
        (0..self.len()).map(|k| self.level(k)).collect()
    }

    pub fn is_zero(&self) -> bool {
        self.steps.iter().all(|&s| s == 0)
    }
}

pub(crate) fn action_cost(steps: &[u32], levels: u32, gamma: &[f64]) -> f64 {
    steps
        .iter()
        .zip(gamma)
        .fold(0.0, |acc, (&s, &g)| acc + g * (s as f64 / levels as f64))
}

/// Every budget-feasible level vector, lexicographic with node 1 varying slowest.
pub fn enumerate_actions(n: usize, levels: u32, gamma: &[f64], cap: usize) -> Result<Vec<Action>, GameError> {
    if levels == 0 {
        return Err(GameError::InvalidConfig("level count L must be at least 1".into()));
    }
    if gamma.len() != n {
        return Err(GameError::InvalidConfig(format!("{} costs for {n} nodes", gamma.len())));
    }
    if let Some(g) = gamma.iter().find(|&&g| !(g > 0.0 && g.is_finite())) {
        return Err(GameError::InvalidConfig(format!("per-node cost {g} is not positive")));
    }

    fn walk(
        k: usize,
        prefix_cost: f64,
        steps: &mut Vec<u32>,
        levels: u32,
        gamma: &[f64],
        cap: usize,
        out: &mut Vec<Action>,
    ) -> Result<(), GameError> {
        if k == gamma.len() {
            if out.len() == cap {
                return Err(GameError::GridCapExceeded { cap });
            }
            out.push(Action { steps: steps.clone(), levels, cost: prefix_cost });
            return Ok(());
        }
        for s in 0..=levels {
            let cost = prefix_cost + gamma[k] * (s as f64 / levels as f64);
            if cost > 1.0 + BUDGET_SLACK {
                break;
            }
            steps.push(s);
            walk(k + 1, cost, steps, levels, gamma, cap, out)?;
            steps.pop();
        }
        Ok(())
    }

    let mut out = Vec::new();
    walk(0, 0.0, &mut Vec::with_capacity(n), levels, gamma, cap, &mut out)?;
    Ok(out)
}
