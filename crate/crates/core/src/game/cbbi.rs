//! Cost-based backward induction.
//!
//! Step 1: for each feasible defender action the attacker picks the cheapest
//! of its payoff-maximizing responses. Step 2: the defender picks the action
//! minimizing the attacker's resulting payoff, again preferring the cheapest
//! among ties. Remaining ties go to the first action in enumeration order.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::actions::Action;
use super::payoff::{pattern_prob, PayoffEvaluator};
use super::{cheapest, tie_slack, GameConfig, GameError};
use crate::lossmap::{LossTable, SparsityPattern};

/// Attacker's cheapest best response against one defender action.
#[derive(Debug, Clone, Copy)]
pub(crate) struct Reply {
    pub index: usize,
    pub payoff: f64,
    pub ties: usize,
}

/// Indices whose payoff is within tolerance of the maximum.
pub(crate) fn maximizers(payoffs: &[f64], tol: f64) -> (f64, Vec<usize>) {
    let max = payoffs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let floor = max - tie_slack(max, tol);
    let idx = payoffs
        .iter()
        .enumerate()
        .filter_map(|(i, &u)| (u >= floor).then_some(i))
        .collect();
    (max, idx)
}

/// Indices whose payoff is within tolerance of the minimum.
pub(crate) fn minimizers(payoffs: &[f64], tol: f64) -> (f64, Vec<usize>) {
    let min = payoffs.iter().copied().fold(f64::INFINITY, f64::min);
    let ceil = min + tie_slack(min, tol);
    let idx = payoffs
        .iter()
        .enumerate()
        .filter_map(|(i, &u)| (u <= ceil).then_some(i))
        .collect();
    (min, idx)
}

pub(crate) fn attacker_reply(
    ev: &mut PayoffEvaluator<'_>,
    actions_a: &[Action],
    d: &Action,
    cfg: &GameConfig,
) -> Reply {
    let payoffs = ev.attacker_sweep(actions_a, d);
    let (_, best) = maximizers(&payoffs, cfg.payoff_tie_tol);
    let index = cheapest(&best, |i| actions_a[i].cost, cfg.cost_tie_tol);
    Reply { index, payoff: payoffs[index], ties: best.len() }
}

/// Maximum attacker payoff against `d` and every action attaining it within `tol`.
pub fn best_response_set(d: &Action, actions_a: &[Action], table: &LossTable, tol: f64) -> (f64, Vec<Action>) {
    let mut ev = PayoffEvaluator::new(table);
    let payoffs = ev.attacker_sweep(actions_a, d);
    let (max, idx) = maximizers(&payoffs, tol);
    (max, idx.into_iter().map(|i| actions_a[i].clone()).collect())
}

/// Cheapest response by `Σ γᵢ·levelᵢ`; cost ties go to the earliest entry.
pub fn min_cost_response<'r>(responses: &'r [Action], gamma: &[f64], cost_tol: f64) -> Option<&'r Action> {
    if responses.is_empty() {
        return None;
    }
    let costs: Vec<f64> = responses
        .iter()
        .map(|a| super::actions::action_cost(&a.steps, a.levels, gamma))
        .collect();
    let all: Vec<usize> = (0..responses.len()).collect();
    Some(&responses[cheapest(&all, |i| costs[i], cost_tol)])
}

/// Equilibrium selected by cost-based backward induction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CbseResult {
    pub a_star: Action,
    pub d_star: Action,
    pub attacker_payoff: f64,
    pub defender_payoff: f64,
    pub attacker_cost: f64,
    pub defender_cost: f64,
    /// Attacker best responses to `d_star` tied in payoff.
    pub num_attacker_ties: usize,
    /// Defender actions tied in payoff with `d_star`.
    pub num_defender_ties: usize,
    /// Some pattern with positive probability at the equilibrium has a
    /// non-converged loss entry.
    pub used_nonconverged_losses: bool,
    pub attacker_action_count: usize,
    pub defender_action_count: usize,
}

pub(crate) fn check_table(cfg: &GameConfig, table: &LossTable) -> Result<(), GameError> {
    cfg.validate()?;
    if table.n != cfg.n || table.len() != 1 << cfg.n {
        return Err(GameError::TableMismatch { table: table.n, game: cfg.n });
    }
    Ok(())
}

pub(crate) fn uses_nonconverged(a: &Action, d: &Action, table: &LossTable) -> bool {
    table.convergence_flags.iter().enumerate().any(|(i, &ok)| {
        !ok && pattern_prob(a, d, &SparsityPattern::from_index(i, table.n)) > 0.0
    })
}

/// Cost-based Stackelberg equilibrium of the game defined by `cfg` over `table`.
pub fn solve_cbbi(cfg: &GameConfig, table: &LossTable) -> Result<CbseResult, GameError> {
    check_table(cfg, table)?;
    let actions_a = cfg.attacker_actions()?;
    let actions_d = cfg.defender_actions()?;

    let replies: Vec<Reply> = actions_d
        .par_iter()
        .map_init(|| PayoffEvaluator::new(table), |ev, d| attacker_reply(ev, &actions_a, d, cfg))
        .collect();

    let attacker_payoffs: Vec<f64> = replies.iter().map(|r| r.payoff).collect();
    let (_, tied) = minimizers(&attacker_payoffs, cfg.payoff_tie_tol);
    let d_idx = cheapest(&tied, |i| actions_d[i].cost, cfg.cost_tie_tol);
    let reply = replies[d_idx];

    let a_star = actions_a[reply.index].clone();
    let d_star = actions_d[d_idx].clone();
    let used_nonconverged_losses = uses_nonconverged(&a_star, &d_star, table);
    if used_nonconverged_losses {
        log::warn!("equilibrium puts mass on loss entries that did not converge");
    }
    Ok(CbseResult {
        attacker_payoff: reply.payoff,
        defender_payoff: -reply.payoff,
        attacker_cost: a_star.cost,
        defender_cost: d_star.cost,
        num_attacker_ties: reply.ties,
        num_defender_ties: tied.len(),
        used_nonconverged_losses,
        attacker_action_count: actions_a.len(),
        defender_action_count: actions_d.len(),
        a_star,
        d_star,
    })
}
