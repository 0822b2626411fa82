//! Games over a set of uncertain models.
//!
//! Two fixed investment designs are compared against the per-model ideal:
//! the nominal-model game (equilibrium of the first model reused everywhere)
//! and the average-payoff game (equilibrium of the `φ`-weighted expected
//! loss). Mismatch is the relative payoff gap to the ideal equilibrium of
//! the model that actually occurs.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::game::{payoff_attacker, solve_cbbi, Action, CbseResult, GameConfig, GameError, PAYOFF_ABS_FLOOR};
use crate::lincontrol::{h2_cost, synth_unstructured, LinControlError, MaskMode, StateSpaceModel, SynthOptions};
use crate::lossmap::{build_loss_table, check_weights, combine_tables, LossMapError, LossMapOptions, LossTable};

/// Relative tolerance for "shared" B and D across models.
pub const SHARED_MATRIX_TOL: f64 = 1e-9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum RobustError {
    #[error("model {model}: ideal equilibrium payoff is zero, mismatch undefined")]
    DegenerateDenominator { model: usize },
    #[error("invalid model set: {0}")]
    InvalidSet(String),
    #[error("model index {index} out of range for {len} models")]
    IndexOutOfRange { index: usize, len: usize },
    #[error(transparent)]
    LossMap(#[from] LossMapError),
    #[error(transparent)]
    Game(#[from] GameError),
    #[error(transparent)]
    LinControl(#[from] LinControlError),
}

/// Candidate models with occurrence probabilities.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelSet {
    models: Vec<StateSpaceModel>,
    phi: Vec<f64>,
    nominal_index: usize,
}

fn close(a: &nalgebra::DMatrix<f64>, b: &nalgebra::DMatrix<f64>) -> bool {
    a.shape() == b.shape() && (a - b).amax() <= SHARED_MATRIX_TOL * a.amax().max(b.amax()).max(1.0)
}

impl ModelSet {
    /// `phi = None` means uniform weights.
    pub fn new(models: Vec<StateSpaceModel>, phi: Option<Vec<f64>>, nominal_index: usize) -> Result<Self, RobustError> {
        let first = models.first().ok_or_else(|| RobustError::InvalidSet("no models".into()))?;
        let phi = phi.unwrap_or_else(|| vec![1.0 / models.len() as f64; models.len()]);
        if phi.len() != models.len() {
            return Err(RobustError::InvalidSet(format!("{} weights for {} models", phi.len(), models.len())));
        }
        check_weights(&phi)?;
        if nominal_index >= models.len() {
            return Err(RobustError::IndexOutOfRange { index: nominal_index, len: models.len() });
        }
        for (i, m) in models.iter().enumerate().skip(1) {
            if m.partition != first.partition {
                return Err(RobustError::InvalidSet(format!("model {i} has a different node partition")));
            }
            if !close(&m.b, &first.b) {
                return Err(RobustError::InvalidSet(format!("model {i}: B differs from model 0")));
            }
            if !close(&m.d, &first.d) {
                return Err(RobustError::InvalidSet(format!("model {i}: D differs from model 0")));
            }
        }
        Ok(Self { models, phi, nominal_index })
    }

    pub fn models(&self) -> &[StateSpaceModel] {
        &self.models
    }

    pub fn phi(&self) -> &[f64] {
        &self.phi
    }

    pub fn nominal_index(&self) -> usize {
        self.nominal_index
    }

    pub fn len(&self) -> usize {
        self.models.len()
    }

    pub fn is_empty(&self) -> bool {
        self.models.is_empty()
    }

    pub fn nodes(&self) -> usize {
        self.models[0].nodes()
    }
}

/// Attacker payoff of a fixed strategy pair under one model's losses.
pub fn evaluate_strategy(a: &Action, d: &Action, table: &LossTable) -> f64 {
    payoff_attacker(a, d, table)
}

/// `|evaluated − ideal| / |ideal| · 100`.
fn mismatch_percent(evaluated: f64, ideal: f64, model: usize) -> Result<f64, RobustError> {
    if ideal.abs() <= PAYOFF_ABS_FLOOR {
        return Err(RobustError::DegenerateDenominator { model });
    }
    Ok(((evaluated - ideal) / ideal).abs() * 100.0)
}

/// Per-model loss tables plus their expectation, shared across cost pairs.
#[derive(Debug, Clone)]
pub struct RobustAnalysis {
    set: ModelSet,
    tables: Vec<LossTable>,
    average: LossTable,
}

impl RobustAnalysis {
    pub fn build(set: ModelSet, mode: MaskMode, opts: &LossMapOptions) -> Result<Self, RobustError> {
        let tables = set
            .models()
            .par_iter()
            .map(|m| build_loss_table(m, mode, opts))
            .collect::<Result<Vec<_>, _>>()?;
        Self::from_tables(set, tables)
    }

    pub fn from_tables(set: ModelSet, tables: Vec<LossTable>) -> Result<Self, RobustError> {
        if tables.len() != set.len() {
            return Err(RobustError::InvalidSet(format!("{} tables for {} models", tables.len(), set.len())));
        }
        let average = combine_tables(&tables, set.phi())?;
        Ok(Self { set, tables, average })
    }

    pub fn set(&self) -> &ModelSet {
        &self.set
    }

    pub fn tables(&self) -> &[LossTable] {
        &self.tables
    }

    pub fn average_table(&self) -> &LossTable {
        &self.average
    }

    fn table(&self, i: usize) -> Result<&LossTable, RobustError> {
        self.tables.get(i).ok_or(RobustError::IndexOutOfRange { index: i, len: self.tables.len() })
    }

    /// Equilibrium of the game designed for model `i`.
    pub fn solve_model(&self, cfg: &GameConfig, i: usize) -> Result<CbseResult, RobustError> {
        Ok(solve_cbbi(cfg, self.table(i)?)?)
    }

    pub fn solve_nominal_game(&self, cfg: &GameConfig) -> Result<CbseResult, RobustError> {
        self.solve_model(cfg, self.set.nominal_index)
    }

    /// Equilibrium of the game over the expected loss table.
    pub fn solve_average_game(&self, cfg: &GameConfig) -> Result<CbseResult, RobustError> {
        Ok(solve_cbbi(cfg, &self.average)?)
    }

    /// `Σⱼ φⱼ·U_j(a, d)`, one payoff per model.
    pub fn average_payoff_per_model(&self, a: &Action, d: &Action) -> f64 {
        self.tables
            .iter()
            .zip(self.set.phi())
            .map(|(t, &w)| w * payoff_attacker(a, d, t))
            .sum()
    }

    /// Same expectation through the expected loss table.
    pub fn average_payoff_expected_loss(&self, a: &Action, d: &Action) -> f64 {
        payoff_attacker(a, d, &self.average)
    }

    pub fn evaluate_on(&self, result: &CbseResult, i: usize) -> Result<f64, RobustError> {
        Ok(evaluate_strategy(&result.a_star, &result.d_star, self.table(i)?))
    }

    pub fn nominal_mismatch(&self, cfg: &GameConfig, i: usize) -> Result<f64, RobustError> {
        let nominal = self.solve_nominal_game(cfg)?;
        let ideal = self.solve_model(cfg, i)?;
        mismatch_percent(self.evaluate_on(&nominal, i)?, self.evaluate_on(&ideal, i)?, i)
    }

    pub fn average_mismatch(&self, cfg: &GameConfig, i: usize) -> Result<f64, RobustError> {
        let avg = self.solve_average_game(cfg)?;
        let ideal = self.solve_model(cfg, i)?;
        mismatch_percent(self.evaluate_on(&avg, i)?, self.evaluate_on(&ideal, i)?, i)
    }

    /// One row per (cost pair, model). Costs are applied uniformly per node on top of `base`.
    pub fn mismatch_rows(&self, base: &GameConfig, grid: &[(f64, f64)]) -> Result<Vec<MismatchRow>, RobustError> {
        let per_pair: Vec<Vec<MismatchRow>> = grid
            .par_iter()
            .map(|&(ga, gd)| {
                let cfg = base.clone().with_costs(ga, gd);
                let nominal = self.solve_nominal_game(&cfg)?;
                let avg = self.solve_average_game(&cfg)?;
                (0..self.set.len())
                    .map(|i| {
                        let ideal = self.solve_model(&cfg, i)?;
                        let table = &self.tables[i];
                        let ideal_payoff = self.evaluate_on(&ideal, i)?;
                        let nominal_payoff = self.evaluate_on(&nominal, i)?;
                        let average_payoff = self.evaluate_on(&avg, i)?;
                        Ok(MismatchRow {
                            model: i,
                            gamma_a: ga,
                            gamma_d: gd,
                            j_opt: table.j_opt,
                            ideal_payoff,
                            nominal_payoff,
                            average_payoff,
                            mu_nominal: mismatch_percent(nominal_payoff, ideal_payoff, i).ok(),
                            mu_average: mismatch_percent(average_payoff, ideal_payoff, i).ok(),
                        })
                    })
                    .collect()
            })
            .collect::<Result<_, RobustError>>()?;
        Ok(per_pair.into_iter().flatten().collect())
    }

    /// Mismatch distributions of the nominal-model and average-payoff games
    /// over every model and cost pair, weighting each pair uniformly.
    pub fn mismatch_statistics(
        &self,
        base: &GameConfig,
        grid: &[(f64, f64)],
    ) -> Result<(MismatchStats, MismatchStats), RobustError> {
        let rows = self.mismatch_rows(base, grid)?;
        Ok((
            MismatchStats::from_values(rows.iter().map(|r| r.mu_nominal)),
            MismatchStats::from_values(rows.iter().map(|r| r.mu_average)),
        ))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MismatchRow {
    pub model: usize,
    pub gamma_a: f64,
    pub gamma_d: f64,
    pub j_opt: f64,
    pub ideal_payoff: f64,
    pub nominal_payoff: f64,
    pub average_payoff: f64,
    /// `None` when the ideal payoff is zero.
    pub mu_nominal: Option<f64>,
    pub mu_average: Option<f64>,
}

/// Boxplot summary of mismatch percentages.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MismatchStats {
    /// Sorted ascending.
    pub values: Vec<f64>,
    pub degenerate: usize,
    pub summary: Option<Summary>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub min: f64,
    pub q1: f64,
    pub median: f64,
    pub q3: f64,
    pub max: f64,
    pub mean: f64,
}

fn quantile(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (pos - lo as f64) * (sorted[hi] - sorted[lo])
}

impl MismatchStats {
    pub fn from_values(values: impl IntoIterator<Item = Option<f64>>) -> Self {
        let mut degenerate = 0;
        let mut vals: Vec<f64> = values
            .into_iter()
            .filter_map(|v| {
                if v.is_none() {
                    degenerate += 1;
                }
                v
            })
            .collect();
        vals.sort_by(f64::total_cmp);
        let summary = (!vals.is_empty()).then(|| Summary {
            min: vals[0],
            q1: quantile(&vals, 0.25),
            median: quantile(&vals, 0.5),
            q3: quantile(&vals, 0.75),
            max: vals[vals.len() - 1],
            mean: vals.iter().sum::<f64>() / vals.len() as f64,
        });
        Self { values: vals, degenerate, summary }
    }
}

/// Relative H₂ degradation (%) on model `i` of the nominal model's
/// unconstrained optimal gain.
pub fn controller_mismatch(set: &ModelSet, i: usize, opts: &SynthOptions) -> Result<f64, RobustError> {
    let model = set.models().get(i).ok_or(RobustError::IndexOutOfRange { index: i, len: set.len() })?;
    let nominal = synth_unstructured(&set.models()[set.nominal_index()], opts)?;
    let own = synth_unstructured(model, opts)?;
    let j_mismatched = h2_cost(model, &nominal.gain.k)?;
    Ok(((j_mismatched - own.cost) / own.cost * 100.0).max(0.0))
}
