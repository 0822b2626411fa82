//! Discrete-action attacker/defender investment game.
//!
//! The defender leads with a protection profile, the attacker follows with a
//! best response, and both break payoff ties by spending less. The
//! equilibrium search is an exhaustive backward induction over the
//! budget-feasible action grids of both players.

mod actions;
mod baseline;
mod cbbi;
mod oracle;
mod payoff;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use actions::{enumerate_actions, Action, BUDGET_SLACK, DEFAULT_ACTION_CAP};
pub use baseline::{individual_optimization, IoResult};
pub use cbbi::{best_response_set, min_cost_response, solve_cbbi, CbseResult};
pub use oracle::{brute_force_se, SeOracle, DEFAULT_PAIR_CAP};
pub use payoff::{pattern_prob, payoff_attacker, payoff_defender, prob_success, PayoffEvaluator};

/// Absolute floor under the relative payoff-tie tolerance.
pub const PAYOFF_ABS_FLOOR: f64 = 1e-12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GameError {
    #[error("feasible action set exceeds the cap of {cap}")]
    GridCapExceeded { cap: usize },
    #[error("{pairs} strategy pairs exceed the oracle cap of {cap}")]
    PairCapExceeded { pairs: usize, cap: usize },
    #[error("invalid game configuration: {0}")]
    InvalidConfig(String),
    #[error("loss table has {table} nodes, game has {game}")]
    TableMismatch { table: usize, game: usize },
}

/// Costs, level counts and tolerances of one game instance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GameConfig {
    pub n: usize,
    /// Attacker level denominator `L_a`.
    pub levels_a: u32,
    /// Defender level denominator `L_d`.
    pub levels_d: u32,
    /// Attacker cost per node at full effort (budget normalized to 1).
    pub gamma_a: Vec<f64>,
    pub gamma_d: Vec<f64>,
    pub payoff_tie_tol: f64,
    pub cost_tie_tol: f64,
    pub action_cap: usize,
}

impl GameConfig {
    /// Same cost on every node for each player.
    pub fn uniform(n: usize, levels_a: u32, levels_d: u32, gamma_a: f64, gamma_d: f64) -> Self {
        Self {
            n,
            levels_a,
            levels_d,
            gamma_a: vec![gamma_a; n],
            gamma_d: vec![gamma_d; n],
            payoff_tie_tol: 1e-8,
            cost_tie_tol: 1e-12,
            action_cap: DEFAULT_ACTION_CAP,
        }
    }

    pub fn with_costs(mut self, gamma_a: f64, gamma_d: f64) -> Self {
        self.gamma_a = vec![gamma_a; self.n];
        self.gamma_d = vec![gamma_d; self.n];
        self
    }

    pub fn with_levels(mut self, levels_a: u32, levels_d: u32) -> Self {
        self.levels_a = levels_a;
        self.levels_d = levels_d;
        self
    }

    pub fn validate(&self) -> Result<(), GameError> {
        if self.n == 0 {
            return Err(GameError::InvalidConfig("no nodes".into()));
        }
        if self.levels_a == 0 || self.levels_d == 0 {
            return Err(GameError::InvalidConfig("level counts must be at least 1".into()));
        }
        if self.gamma_a.len() != self.n || self.gamma_d.len() != self.n {
            return Err(GameError::InvalidConfig("cost vectors must have one entry per node".into()));
        }
        if self.gamma_a.iter().chain(&self.gamma_d).any(|&g| !(g > 0.0 && g.is_finite())) {
            return Err(GameError::InvalidConfig("per-node costs must be positive and finite".into()));
        }
        if [self.payoff_tie_tol, self.cost_tie_tol].iter().any(|t| t.is_nan() || *t < 0.0) {
            return Err(GameError::InvalidConfig("tolerances must be non-negative".into()));
        }
        Ok(())
    }

    pub fn attacker_actions(&self) -> Result<Vec<Action>, GameError> {
        enumerate_actions(self.n, self.levels_a, &self.gamma_a, self.action_cap)
    }

    pub fn defender_actions(&self) -> Result<Vec<Action>, GameError> {
        enumerate_actions(self.n, self.levels_d, &self.gamma_d, self.action_cap)
    }
}

/// Payoff slack for comparisons against a best value `best`.
#[inline]
pub(crate) fn tie_slack(best: f64, tol: f64) -> f64 {
    tol * best.abs() + PAYOFF_ABS_FLOOR
}

/// Index of the cheapest candidate; cost ties go to the earliest index.
pub(crate) fn cheapest(candidates: &[usize], cost: impl Fn(usize) -> f64, cost_tol: f64) -> usize {
    let min = candidates.iter().map(|&i| cost(i)).fold(f64::INFINITY, f64::min);
    *candidates
        .iter()
        .find(|&&i| cost(i) <= min + cost_tol)
        .expect("non-empty candidate set")
}
