//! Continuous-time Lyapunov equations via a real Schur factorization.
//!
//! Solves `Aᵀ·P + P·A + C = 0` by reducing `A = U·T·Uᵀ` to quasi upper
//! triangular form and substituting block by block (Bartels–Stewart). The
//! same factorization yields the spectrum, so the Hurwitz test is free.

use nalgebra::{linalg::Schur, DMatrix};

use super::LinControlError;

/// A matrix is treated as Hurwitz when its spectral abscissa is below `-HURWITZ_MARGIN`.
pub const HURWITZ_MARGIN: f64 = 1e-9;

/// Residual bound relative to `max(1, ‖C‖_F)`.
pub const RESIDUAL_TOL: f64 = 1e-8;

const MAX_QR_SWEEPS_PER_DIM: usize = 1_000;

#[derive(Debug, Clone, Copy)]
struct DiagBlock {
    start: usize,
    size: usize,
}

/// Real Schur form `A = U·T·Uᵀ` with its 1×1 / 2×2 diagonal block layout.
pub(crate) struct RealSchur {
    u: DMatrix<f64>,
    t: DMatrix<f64>,
    blocks: Vec<DiagBlock>,
}

impl RealSchur {
    pub(crate) fn new(a: &DMatrix<f64>) -> Result<Self, LinControlError> {
        if !a.is_square() {
            return Err(LinControlError::Dimension(format!(
                "expected a square matrix, got {}×{}",
                a.nrows(),
                a.ncols()
            )));
        }
        if a.iter().any(|v| !v.is_finite()) {
            return Err(LinControlError::NonFinite);
        }
        let dim = a.nrows();
        let schur = Schur::try_new(a.clone(), f64::EPSILON, MAX_QR_SWEEPS_PER_DIM * dim.max(1))
            .ok_or(LinControlError::SchurFailed)?;
        let (u, t) = schur.unpack();

        let mut blocks = Vec::with_capacity(dim);
        let mut i = 0;
        while i < dim {
            let size = if i + 1 < dim && t[(i + 1, i)] != 0.0 { 2 } else { 1 };
            blocks.push(DiagBlock { start: i, size });
            i += size;
        }
        Ok(Self { u, t, blocks })
    }

    /// Schur form of `Aᵀ`: `Aᵀ = (U·J)·(J·Tᵀ·J)·(U·J)ᵀ` with `J` the exchange matrix.
    pub(crate) fn transposed(&self) -> Self {
        let n = self.t.nrows();
        let t = DMatrix::from_fn(n, n, |i, j| self.t[(n - 1 - j, n - 1 - i)]);
        let u = DMatrix::from_fn(n, n, |i, j| self.u[(i, n - 1 - j)]);
        let blocks = self
            .blocks
            .iter()
            .rev()
            .map(|b| DiagBlock { start: n - b.start - b.size, size: b.size })
            .collect();
        Self { u, t, blocks }
    }

    /// Largest real part over all eigenvalues.
    pub(crate) fn spectral_abscissa(&self) -> f64 {
        let t = &self.t;
        self.blocks
            .iter()
            .map(|b| {
                let s = b.start;
                if b.size == 1 {
                    t[(s, s)]
                } else {
                    let (a11, a12, a21, a22) = (t[(s, s)], t[(s, s + 1)], t[(s + 1, s)], t[(s + 1, s + 1)]);
                    let half_tr = 0.5 * (a11 + a22);
                    let disc = 0.25 * (a11 - a22).powi(2) + a12 * a21;
                    if disc >= 0.0 {
                        half_tr + disc.sqrt()
                    } else {
                        half_tr
                    }
                }
            })
            .fold(f64::NEG_INFINITY, f64::max)
    }

    /// Solves `Tᵀ·Y + Y·T = F` in Schur coordinates.
    fn solve_transformed(&self, f: &DMatrix<f64>) -> Result<DMatrix<f64>, LinControlError> {
        let t = &self.t;
        let dim = t.nrows();
        let mut y = DMatrix::<f64>::zeros(dim, dim);

        for bj in &self.blocks {
            for bi in &self.blocks {
                let (p, q) = (bi.size, bj.size);
                let (ri, cj) = (bi.start, bj.start);

                // Right-hand side with all previously solved blocks moved over.
                let mut rhs = [0.0f64; 4];
                for c in 0..q {
                    for r in 0..p {
                        let (row, col) = (ri + r, cj + c);
                        let mut acc = f[(row, col)];
                        for s in 0..ri {
                            acc -= t[(s, row)] * y[(s, col)];
                        }
                        for s in 0..cj {
                            acc -= y[(row, s)] * t[(s, col)];
                        }
                        rhs[r + p * c] = acc;
                    }
                }

                let k = p * q;
                let mut m = DMatrix::<f64>::zeros(k, k);
                for c in 0..q {
                    for r in 0..p {
                        let eq = r + p * c;
                        for s in 0..p {
                            m[(eq, s + p * c)] += t[(ri + s, ri + r)];
                        }
                        for s in 0..q {
                            m[(eq, r + p * s)] += t[(cj + s, cj + c)];
                        }
                    }
                }
                let sol = m
                    .lu()
                    .solve(&nalgebra::DVector::from_column_slice(&rhs[..k]))
                    .ok_or(LinControlError::IllConditioned {
                        residual: f64::INFINITY,
                        tolerance: RESIDUAL_TOL,
                    })?;
                for c in 0..q {
                    for r in 0..p {
                        y[(ri + r, cj + c)] = sol[r + p * c];
                    }
                }
            }
        }
        Ok(y)
    }

    /// Solves `Aᵀ·P + P·A + C = 0` for the factored `A`.
    pub(crate) fn solve_lyapunov(&self, rhs: &DMatrix<f64>) -> Result<DMatrix<f64>, LinControlError> {
        let dim = self.t.nrows();
        if rhs.nrows() != dim || rhs.ncols() != dim {
            return Err(LinControlError::Dimension(format!(
                "right-hand side is {}×{}, state matrix is {dim}×{dim}",
                rhs.nrows(),
                rhs.ncols()
            )));
        }
        let abscissa = self.spectral_abscissa();
        if abscissa >= -HURWITZ_MARGIN {
            return Err(LinControlError::NotHurwitz { abscissa });
        }

        let a = &self.u * &self.t * self.u.transpose();
        let tolerance = RESIDUAL_TOL * rhs.norm().max(1.0);

        let mut p = self.solve_in_original(&(-rhs))?;
        let mut res = residual(&a, &p, rhs);
        // One round of refinement is enough to clean up round-off in the back-substitution.
        if res.norm() > 0.1 * tolerance {
            let correction = self.solve_in_original(&(-&res))?;
            p += correction;
            symmetrize(&mut p);
            res = residual(&a, &p, rhs);
        }
        let r = res.norm();
        if !r.is_finite() || r > tolerance {
            return Err(LinControlError::IllConditioned { residual: r, tolerance });
        }
        Ok(p)
    }

    fn solve_in_original(&self, f: &DMatrix<f64>) -> Result<DMatrix<f64>, LinControlError> {
        let ft = self.u.transpose() * f * &self.u;
        let y = self.solve_transformed(&ft)?;
        let mut p = &self.u * y * self.u.transpose();
        symmetrize(&mut p);
        Ok(p)
    }
}

fn residual(a: &DMatrix<f64>, p: &DMatrix<f64>, rhs: &DMatrix<f64>) -> DMatrix<f64> {
    a.transpose() * p + p * a + rhs
}

pub(crate) fn symmetrize(p: &mut DMatrix<f64>) {
    let n = p.nrows();
    for i in 0..n {
        for j in (i + 1)..n {
            let v = 0.5 * (p[(i, j)] + p[(j, i)]);
            p[(i, j)] = v;
            p[(j, i)] = v;
        }
    }
}

/// Solves `Aclᵀ·P + P·Acl + Rhs = 0` for symmetric `P`.
///
/// Fails with [`LinControlError::NotHurwitz`] when `Acl` has an eigenvalue with
/// real part `≥ -HURWITZ_MARGIN`, and with [`LinControlError::IllConditioned`]
/// when the residual bound cannot be met.
pub fn solve_lyapunov(acl: &DMatrix<f64>, rhs: &DMatrix<f64>) -> Result<DMatrix<f64>, LinControlError> {
    RealSchur::new(acl)?.solve_lyapunov(rhs)
}

/// Largest real part of the eigenvalues of `a`.
pub fn spectral_abscissa(a: &DMatrix<f64>) -> Result<f64, LinControlError> {
    Ok(RealSchur::new(a)?.spectral_abscissa())
}

/// `true` when every eigenvalue of `a` has real part below `-margin`.
pub fn is_hurwitz(a: &DMatrix<f64>, margin: f64) -> bool {
    spectral_abscissa(a).map(|s| s < -margin).unwrap_or(false)
}
