//! Exhaustive Stackelberg-equilibrium search without cost-based selection.
//!
//! Payoffs are evaluated term by term from the pattern probabilities, not
//! through the folding evaluator, so this doubles as a cross-check on it.

use serde::{Deserialize, Serialize};

use super::actions::Action;
use super::cbbi::{check_table, maximizers, minimizers};
use super::payoff::pattern_prob;
use super::{GameConfig, GameError};
use crate::lossmap::{LossTable, SparsityPattern};

pub const DEFAULT_PAIR_CAP: usize = 10_000_000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeOracle {
    /// Attacker payoff shared by every Stackelberg equilibrium.
    pub se_payoff: f64,
    /// All `(defender, attacker)` equilibrium pairs.
    pub pairs: Vec<(Action, Action)>,
}

fn direct_payoff(a: &Action, d: &Action, table: &LossTable) -> f64 {
    (0..table.len())
        .map(|i| pattern_prob(a, d, &SparsityPattern::from_index(i, table.n)) * table.delta_by_pattern[i])
        .sum()
}

pub fn brute_force_se(cfg: &GameConfig, table: &LossTable, pair_cap: usize) -> Result<SeOracle, GameError> {
    check_table(cfg, table)?;
    let actions_a = cfg.attacker_actions()?;
    let actions_d = cfg.defender_actions()?;
    let pairs = actions_a.len().saturating_mul(actions_d.len());
    if pairs > pair_cap {
        return Err(GameError::PairCapExceeded { pairs, cap: pair_cap });
    }

    let matrix: Vec<Vec<f64>> = actions_d
        .iter()
        .map(|d| actions_a.iter().map(|a| direct_payoff(a, d, table)).collect())
        .collect();
    let best: Vec<(f64, Vec<usize>)> = matrix.iter().map(|row| maximizers(row, cfg.payoff_tie_tol)).collect();
    let values: Vec<f64> = best.iter().map(|b| b.0).collect();
    let (se_payoff, leaders) = minimizers(&values, cfg.payoff_tie_tol);

    let pairs = leaders
        .into_iter()
        .flat_map(|di| best[di].1.iter().map(move |&ai| (di, ai)))
        .map(|(di, ai)| (actions_d[di].clone(), actions_a[ai].clone()))
        .collect();
    Ok(SeOracle { se_payoff, pairs })
}
