//! Outcome probabilities and the attacker's expected-loss payoff.
//!
//! The payoff is multilinear in the per-node success probabilities, so the
//! `2ⁿ`-term sum can be folded one node at a time: folding node `k` halves
//! the table, pairing entries that differ only in bit `k`. Actions sharing a
//! prefix share the partially folded tables.

use super::actions::Action;
use crate::lossmap::{LossTable, SparsityPattern};

/// Probability that the attack on a node succeeds, `a·(1 − d)`.
#[inline]
pub fn prob_success(a: f64, d: f64) -> f64 {
    a * (1.0 - d)
}

/// Probability that pattern `s` is the realized attack outcome.
pub fn pattern_prob(a: &Action, d: &Action, s: &SparsityPattern) -> f64 {
    (0..s.len())
        .map(|k| {
            let p = prob_success(a.level(k), d.level(k));
            if s.survives(k) {
                1.0 - p
            } else {
                p
            }
        })
        .product()
}

/// Expected loss `Σₛ P_s(a, d)·Δ_s`; the defender's payoff is its negation.
pub fn payoff_attacker(a: &Action, d: &Action, table: &LossTable) -> f64 {
    let probs: Vec<f64> = (0..table.n).map(|k| prob_success(a.level(k), d.level(k))).collect();
    fold_all(&table.delta_by_pattern, &probs)
}

pub fn payoff_defender(a: &Action, d: &Action, table: &LossTable) -> f64 {
    -payoff_attacker(a, d, table)
}

fn fold_into(src: &[f64], p: f64, dst: &mut [f64]) {
    let q = 1.0 - p;
    for (j, out) in dst.iter_mut().enumerate() {
        *out = p * src[2 * j] + q * src[2 * j + 1];
    }
}

fn fold_all(delta: &[f64], probs: &[f64]) -> f64 {
    let mut cur = delta.to_vec();
    let mut next = vec![0.0; delta.len() / 2];
    for &p in probs {
        let half = cur.len() / 2;
        fold_into(&cur, p, &mut next[..half]);
        std::mem::swap(&mut cur, &mut next);
        cur.truncate(half);
        next.truncate(half);
    }
    cur[0]
}

/// Reusable fold buffers for sweeping one player's action list against a
/// fixed opponent.
pub struct PayoffEvaluator<'t> {
    delta: &'t [f64],
    n: usize,
    /// `stack[k]` holds the table with nodes `0..k` folded in.
    stack: Vec<Vec<f64>>,
}

impl<'t> PayoffEvaluator<'t> {
    pub fn new(table: &'t LossTable) -> Self {
        let n = table.n;
        let stack = (1..=n).map(|k| vec![0.0; 1 << (n - k)]).collect();
        Self { delta: &table.delta_by_pattern, n, stack }
    }

    /// Payoff of every action in `actions`, where `prob(action, k)` is the
    /// attack success probability at node `k` against the fixed opponent.
    /// Actions are assumed to be in enumeration order so adjacent entries
    /// share long prefixes; correctness does not depend on it.
    pub fn sweep(&mut self, actions: &[Action], prob: impl Fn(&Action, usize) -> f64) -> Vec<f64> {
        let mut out = Vec::with_capacity(actions.len());
        let mut prev: Option<&Action> = None;
        for act in actions {
            let start = match prev {
                Some(p) => p.steps.iter().zip(&act.steps).take_while(|(x, y)| x == y).count(),
                None => 0,
            };
            for k in start.min(self.n)..self.n {
                let p = prob(act, k);
                let (done, rest) = self.stack.split_at_mut(k);
                let src: &[f64] = if k == 0 { self.delta } else { &done[k - 1] };
                fold_into(src, p, &mut rest[0]);
            }
            out.push(if self.n == 0 { self.delta[0] } else { self.stack[self.n - 1][0] });
            prev = Some(act);
        }
        out
    }

    /// Attacker payoffs of `actions_a` against a fixed defender action.
    pub fn attacker_sweep(&mut self, actions_a: &[Action], d: &Action) -> Vec<f64> {
        self.sweep(actions_a, |a, k| prob_success(a.level(k), d.level(k)))
    }

    /// Attacker payoffs against each of `actions_d` for a fixed attacker action.
    pub fn defender_sweep(&mut self, actions_d: &[Action], a: &Action) -> Vec<f64> {
        self.sweep(actions_d, |d, k| prob_success(a.level(k), d.level(k)))
    }
}
