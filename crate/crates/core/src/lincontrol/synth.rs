//! Structured H₂ gain synthesis by projected gradient descent.
//!
//! The iterate always lives on the mask support. Each step starts from a
//! Barzilai–Borwein trial length and backtracks until the closed loop is
//! Hurwitz and the Armijo condition holds.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::h2::{evaluate, gradient_at, H2Eval};
use super::mask::SupportMask;
use super::model::{GainMatrix, StateSpaceModel};
use super::LinControlError;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SynthOptions {
    /// Stop when `‖proj ∇J‖_∞ ≤ grad_tol · (1 + |J₀|)`.
    pub grad_tol: f64,
    pub max_iter: usize,
    /// Sufficient-decrease constant of the Armijo test.
    pub armijo: f64,
    /// Step shrink factor per backtrack.
    pub backtrack: f64,
    pub max_backtracks: usize,
}

impl Default for SynthOptions {
    fn default() -> Self {
        Self { grad_tol: 1e-7, max_iter: 5000, armijo: 1e-4, backtrack: 0.5, max_backtracks: 60 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthesisReport {
    pub gain: GainMatrix,
    /// H₂ cost at `gain`.
    pub cost: f64,
    pub iterations: usize,
    /// `‖proj ∇J‖_∞` at the returned gain.
    pub final_gradient_norm: f64,
    pub converged: bool,
}

fn frob_dot(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    a.iter().zip(b.iter()).map(|(x, y)| x * y).sum()
}

fn projected_gradient(
    model: &StateSpaceModel,
    k: &DMatrix<f64>,
    eval: &H2Eval,
    mask: &SupportMask,
) -> Result<DMatrix<f64>, LinControlError> {
    let mut g = gradient_at(model, k, eval)?;
    mask.project(&mut g);
    Ok(g)
}

/// Locally optimal H₂ gain restricted to `mask`, starting from `K = 0`.
pub fn synth_structured(
    model: &StateSpaceModel,
    mask: &SupportMask,
    opts: &SynthOptions,
) -> Result<SynthesisReport, LinControlError> {
    if mask.nrows() != model.inputs() || mask.ncols() != model.states() {
        return Err(LinControlError::Dimension(format!(
            "mask is {}×{}, model expects {}×{}",
            mask.nrows(),
            mask.ncols(),
            model.inputs(),
            model.states()
        )));
    }

    let mut k = DMatrix::<f64>::zeros(model.inputs(), model.states());
    let mut eval = match evaluate(model, &k) {
        Ok(e) => e,
        Err(LinControlError::NotHurwitz { abscissa }) => {
            return Err(LinControlError::NoStabilizingStart { abscissa })
        }
        Err(e) => return Err(e),
    };

    let finish = |k: DMatrix<f64>, cost: f64, iterations: usize, gnorm: f64, converged: bool| {
        let mut gain = GainMatrix::projected(k, mask.clone());
        gain.stabilizing = true;
        SynthesisReport { gain, cost, iterations, final_gradient_norm: gnorm, converged }
    };

    if mask.is_empty_support() {
        return Ok(finish(k, eval.cost, 0, 0.0, true));
    }

    let tol = opts.grad_tol * (1.0 + eval.cost.abs());
    let mut g = projected_gradient(model, &k, &eval, mask)?;
    let mut prev: Option<(DMatrix<f64>, DMatrix<f64>)> = None;
    let mut alpha_prev = 1.0 / g.norm().max(1.0);

    for iter in 0..opts.max_iter {
        let gnorm = g.amax();
        if gnorm <= tol {
            return Ok(finish(k, eval.cost, iter, gnorm, true));
        }

        let mut alpha = match &prev {
            Some((k_old, g_old)) => {
                let s = &k - k_old;
                let y = &g - g_old;
                let sy = frob_dot(&s, &y);
                if sy > 0.0 {
                    (frob_dot(&s, &s) / sy).clamp(1e-12, 1e12)
                } else {
                    alpha_prev * 2.0
                }
            }
            None => alpha_prev,
        };

        let g_sq = frob_dot(&g, &g);
        let mut accepted = None;
        let mut any_stable = false;
        for _ in 0..=opts.max_backtracks {
            let trial = &k - alpha * &g;
            match evaluate(model, &trial) {
                Ok(e) => {
                    any_stable = true;
                    if e.cost <= eval.cost - opts.armijo * alpha * g_sq {
                        accepted = Some((trial, e));
                        break;
                    }
                }
                Err(LinControlError::NotHurwitz { .. }) | Err(LinControlError::IllConditioned { .. }) => {}
                Err(e) => return Err(e),
            }
            alpha *= opts.backtrack;
        }

        match accepted {
            Some((k_new, e_new)) => {
                let g_new = projected_gradient(model, &k_new, &e_new, mask)?;
                prev = Some((std::mem::replace(&mut k, k_new), std::mem::replace(&mut g, g_new)));
                eval = e_new;
                alpha_prev = alpha;
            }
            // Stable steps exist but none decreases J measurably: round-off floor.
            None if any_stable => return Ok(finish(k, eval.cost, iter, gnorm, false)),
            None => return Err(LinControlError::LineSearchFailure { iteration: iter }),
        }
    }

    let gnorm = g.amax();
    Ok(finish(k, eval.cost, opts.max_iter, gnorm, gnorm <= tol))
}

/// H₂-optimal static gain with no structural constraint (all-ones mask).
pub fn synth_unstructured(model: &StateSpaceModel, opts: &SynthOptions) -> Result<SynthesisReport, LinControlError> {
    synth_structured(model, &SupportMask::ones(model.inputs(), model.states()), opts)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lincontrol::{h2_cost, NodeBlock};
    use nalgebra::dmatrix;

    fn scalar() -> StateSpaceModel {
        StateSpaceModel::new(
            dmatrix![-1.0],
            dmatrix![1.0],
            dmatrix![1.0],
            dmatrix![1.0],
            dmatrix![1.0],
            vec![NodeBlock::new(1, 1)],
        )
        .unwrap()
    }

    #[test]
    fn scalar_converges_to_riccati_gain() {
        let rep = synth_unstructured(&scalar(), &SynthOptions::default()).unwrap();
        let opt = std::f64::consts::SQRT_2 - 1.0;
        assert!(rep.converged);
        assert!((rep.gain.k[(0, 0)] - opt).abs() < 1e-6);
        assert!((rep.cost - opt).abs() < 1e-6);
        assert_eq!(rep.cost, h2_cost(&scalar(), &rep.gain.k).unwrap());
    }

    #[test]
    fn empty_mask_returns_open_loop() {
        let rep = synth_structured(&scalar(), &SupportMask::zeros(1, 1), &SynthOptions::default()).unwrap();
        assert_eq!(rep.iterations, 0);
        assert_eq!(rep.gain.k[(0, 0)], 0.0);
        assert!((rep.cost - 0.5).abs() < 1e-15);
    }

    #[test]
    fn zero_input_column_keeps_zero_gain_row() {
        let m = StateSpaceModel::new(
            dmatrix![-1.0],
            dmatrix![0.0, 0.0],
            dmatrix![1.0],
            dmatrix![1.0],
            DMatrix::identity(2, 2),
            vec![NodeBlock::new(1, 2)],
        )
        .unwrap();
        let rep = synth_unstructured(&m, &SynthOptions::default()).unwrap();
        assert_eq!(rep.gain.k.amax(), 0.0);
        assert!((rep.cost - 0.5).abs() < 1e-15);
    }

    #[test]
    fn decoupled_blocks_match_scalar_problems() {
        // Two independent scalar plants: a = -1 and a = -2 with unit weights.
        let m = StateSpaceModel::new(
            dmatrix![-1.0, 0.0; 0.0, -2.0],
            DMatrix::identity(2, 2),
            DMatrix::identity(2, 2),
            DMatrix::identity(2, 2),
            DMatrix::identity(2, 2),
            vec![NodeBlock::new(1, 1), NodeBlock::new(1, 1)],
        )
        .unwrap();
        let rep = synth_unstructured(&m, &SynthOptions::default()).unwrap();
        // Scalar ARE 2aP − P² + 1 = 0 ⇒ P = a + √(a² + 1).
        let p1 = -1.0 + 2f64.sqrt();
        let p2 = -2.0 + 5f64.sqrt();
        assert!((rep.gain.k[(0, 0)] - p1).abs() < 1e-6);
        assert!((rep.gain.k[(1, 1)] - p2).abs() < 1e-6);
        assert!(rep.gain.k[(0, 1)].abs() < 1e-6 && rep.gain.k[(1, 0)].abs() < 1e-6);
        assert!((rep.cost - (p1 + p2)).abs() < 1e-6);
    }

    #[test]
    fn mask_dimension_checked() {
        assert!(matches!(
            synth_structured(&scalar(), &SupportMask::ones(2, 1), &SynthOptions::default()),
            Err(LinControlError::Dimension(_))
        ));
    }
}
