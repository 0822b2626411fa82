use nalgebra::DMatrix;

use super::lyapunov::RealSchur;
use super::model::StateSpaceModel;
use super::LinControlError;

/// Closed-loop quantities shared by the cost and its gradient.
pub(crate) struct H2Eval {
    pub cost: f64,
    /// Observability Gramian of the closed loop.
    pub p: DMatrix<f64>,
    schur: RealSchur,
}

fn check_gain_shape(model: &StateSpaceModel, k: &DMatrix<f64>) -> Result<(), LinControlError> {
    if k.nrows() != model.inputs() || k.ncols() != model.states() {
        return Err(LinControlError::Dimension(format!(
            "gain is {}×{}, model expects {}×{}",
            k.nrows(),
            k.ncols(),
            model.inputs(),
            model.states()
        )));
    }
    Ok(())
}

pub(crate) fn evaluate(model: &StateSpaceModel, k: &DMatrix<f64>) -> Result<H2Eval, LinControlError> {
    check_gain_shape(model, k)?;
    let acl = &model.a - &model.b * k;
    let schur = RealSchur::new(&acl)?;
    let rhs = &model.q + k.transpose() * &model.r * k;
    let p = schur.solve_lyapunov(&rhs)?;
    let cost = (model.d.transpose() * &p * &model.d).trace();
    Ok(H2Eval { cost, p, schur })
}

pub(crate) fn gradient_at(
    model: &StateSpaceModel,
    k: &DMatrix<f64>,
    eval: &H2Eval,
) -> Result<DMatrix<f64>, LinControlError> {
    // Controllability Gramian: Acl·L + L·Aclᵀ + D·Dᵀ = 0.
    let dd = &model.d * model.d.transpose();
    let l = eval.schur.transposed().solve_lyapunov(&dd)?;
    Ok(2.0 * (&model.r * k - model.b.transpose() * &eval.p) * l)
}

/// H₂ cost `trace(Dᵀ·P·D)` of the static gain `k`.
pub fn h2_cost(model: &StateSpaceModel, k: &DMatrix<f64>) -> Result<f64, LinControlError> {
    evaluate(model, k).map(|e| e.cost)
}

/// Gradient of [`h2_cost`] with respect to every entry of `k`.
pub fn h2_gradient(model: &StateSpaceModel, k: &DMatrix<f64>) -> Result<DMatrix<f64>, LinControlError> {
    let eval = evaluate(model, k)?;
    gradient_at(model, k, &eval)
}
