//! Individual-optimization baseline: each player plans without modelling
//! the opponent's reaction.
//!
//! The attacker best-responds to an undefended network. The defender
//! minimizes loss against that same attack profile. Both use the same
//! cost-based tie-breaking as the game.

use serde::{Deserialize, Serialize};

use super::actions::Action;
use super::cbbi::{attacker_reply, check_table, maximizers, minimizers};
use super::payoff::{payoff_attacker, PayoffEvaluator};
use super::{cheapest, GameConfig, GameError};
use crate::lossmap::LossTable;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IoResult {
    pub a_io: Action,
    pub d_io: Action,
    /// Attacker payoff when both players use their IO actions.
    pub realized_payoff: f64,
    pub attacker_cost: f64,
    pub defender_cost: f64,
    /// Attacker payoff when the attacker best-responds to `d_io`.
    pub payoff_vs_best_response: f64,
}

pub fn individual_optimization(cfg: &GameConfig, table: &LossTable) -> Result<IoResult, GameError> {
    check_table(cfg, table)?;
    let actions_a = cfg.attacker_actions()?;
    let actions_d = cfg.defender_actions()?;
    let mut ev = PayoffEvaluator::new(table);

    let undefended = Action::zero(cfg.n, cfg.levels_d);
    let a_io = actions_a[attacker_reply(&mut ev, &actions_a, &undefended, cfg).index].clone();

    let against_a = ev.defender_sweep(&actions_d, &a_io);
    let (_, tied) = minimizers(&against_a, cfg.payoff_tie_tol);
    let d_idx = cheapest(&tied, |i| actions_d[i].cost, cfg.cost_tie_tol);
    let d_io = actions_d[d_idx].clone();

    let (payoff_vs_best_response, _) = maximizers(&ev.attacker_sweep(&actions_a, &d_io), cfg.payoff_tie_tol);

    Ok(IoResult {
        realized_payoff: payoff_attacker(&a_io, &d_io, table),
        attacker_cost: a_io.cost,
        defender_cost: d_io.cost,
        payoff_vs_best_response,
        a_io,
        d_io,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lincontrol::MaskMode;

    fn table(delta: Vec<f64>) -> LossTable {
        let n = delta.len().trailing_zeros() as usize;
        LossTable {
            model_id: "t".into(),
            mode: MaskMode::FullNode,
            n,
            j_opt: 1.0,
            j_by_pattern: delta.iter().map(|d| d + 1.0).collect(),
            convergence_flags: vec![true; delta.len()],
            delta_by_pattern: delta,
        }
    }

    #[test]
    fn zero_table_nobody_acts() {
        let cfg = GameConfig::uniform(2, 2, 2, 0.5, 0.5);
        let io = individual_optimization(&cfg, &table(vec![0.0; 4])).unwrap();
        assert!(io.a_io.is_zero() && io.d_io.is_zero());
        assert_eq!(io.realized_payoff, 0.0);
    }

    #[test]
    fn unaffordable_attack() {
        let cfg = GameConfig::uniform(2, 3, 3, 100.0, 0.5);
        let io = individual_optimization(&cfg, &table(vec![1.0, 0.5, 0.4, 0.0])).unwrap();
        assert!(io.a_io.is_zero());
        assert_eq!(io.realized_payoff, 0.0);
    }
}
