use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::lyapunov::{spectral_abscissa, HURWITZ_MARGIN};
use super::mask::SupportMask;

const SYMMETRY_TOL: f64 = 1e-10;
const PSD_TOL: f64 = 1e-10;

/// States and inputs owned by one network node.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct NodeBlock {
    pub states: usize,
    pub inputs: usize,
}

impl NodeBlock {
    pub fn new(states: usize, inputs: usize) -> Self {
        Self { states, inputs }
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ValidationError {
    #[error("{0} has non-finite entries")]
    NonFinite(&'static str),
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("{0} asymmetric")]
    Asymmetric(&'static str),
    #[error("Q not positive semidefinite (min eigenvalue {0:e})")]
    QNotPsd(f64),
    #[error("R not positive definite (min eigenvalue {0:e})")]
    RNotPd(f64),
    #[error("node partition invalid: {0}")]
    Partition(String),
    #[error("A not Hurwitz (spectral abscissa {0:e})")]
    NotHurwitz(f64),
}

/// Knobs for [`StateSpaceModel::validate`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ValidationOptions {
    /// A is accepted when its spectral abscissa is below `-hurwitz_margin`.
    pub hurwitz_margin: f64,
}

impl ValidationOptions {
    pub const STRICT_MARGIN: f64 = 1e-6;

    /// Accepts open-loop modes down to the numerical Hurwitz threshold used by the solvers.
    pub fn allow_marginal() -> Self {
        Self { hurwitz_margin: HURWITZ_MARGIN }
    }
}

impl Default for ValidationOptions {
    fn default() -> Self {
        Self { hurwitz_margin: Self::STRICT_MARGIN }
    }
}

/// Linear network model `ẋ = A·x + B·u + D·w` with H₂ weights `Q`, `R`.
///
/// States and inputs are stored node-grouped: node `i` owns a contiguous
/// run of `partition[i].states` states and `partition[i].inputs` inputs.
#[derive(Debug, Clone, PartialEq)]
pub struct StateSpaceModel {
    pub a: DMatrix<f64>,
    pub b: DMatrix<f64>,
    pub d: DMatrix<f64>,
    pub q: DMatrix<f64>,
    pub r: DMatrix<f64>,
    pub partition: Vec<NodeBlock>,
}

impl StateSpaceModel {
    /// Builds and validates a model with default (strict) options.
    pub fn new(
        a: DMatrix<f64>,
        b: DMatrix<f64>,
        d: DMatrix<f64>,
        q: DMatrix<f64>,
        r: DMatrix<f64>,
        partition: Vec<NodeBlock>,
    ) -> Result<Self, ValidationError> {
        Self::with_options(a, b, d, q, r, partition, ValidationOptions::default())
    }

    pub fn with_options(
        a: DMatrix<f64>,
        b: DMatrix<f64>,
        d: DMatrix<f64>,
        q: DMatrix<f64>,
        r: DMatrix<f64>,
        partition: Vec<NodeBlock>,
        opts: ValidationOptions,
    ) -> Result<Self, ValidationError> {
        let model = Self { a, b, d, q, r, partition };
        match model.violations(opts).into_iter().next() {
            Some(err) => Err(err),
            None => Ok(model),
        }
    }

    pub fn states(&self) -> usize {
        self.a.nrows()
    }

    pub fn inputs(&self) -> usize {
        self.b.ncols()
    }

    pub fn nodes(&self) -> usize {
        self.partition.len()
    }

    /// Offsets of each node's first state and first input.
    pub fn offsets(&self) -> Vec<(usize, usize)> {
        let mut out = Vec::with_capacity(self.partition.len());
        let (mut s, mut i) = (0, 0);
        for blk in &self.partition {
            out.push((s, i));
            s += blk.states;
            i += blk.inputs;
        }
        out
    }

    pub fn validate(&self, opts: ValidationOptions) -> Result<(), ValidationError> {
        match self.violations(opts).into_iter().next() {
            Some(err) => Err(err),
            None => Ok(()),
        }
    }

    /// Every violated invariant, in check order. Later checks are skipped
    /// once dimensions are inconsistent.
    pub fn violations(&self, opts: ValidationOptions) -> Vec<ValidationError> {
        let mut errs = Vec::new();
        for (name, mat) in [("A", &self.a), ("B", &self.b), ("D", &self.d), ("Q", &self.q), ("R", &self.r)] {
            if mat.iter().any(|v| !v.is_finite()) {
                errs.push(ValidationError::NonFinite(name));
            }
        }
        if !errs.is_empty() {
            return errs;
        }

        let m = self.a.nrows();
        let r = self.b.ncols();
        let dims_ok = [
            (self.a.ncols() == m, format!("A is {}×{}, must be square", m, self.a.ncols())),
            (self.b.nrows() == m, format!("B has {} rows, A has {m}", self.b.nrows())),
            (self.d.nrows() == m, format!("D has {} rows, A has {m}", self.d.nrows())),
            (
                self.q.nrows() == m && self.q.ncols() == m,
                format!("Q is {}×{}, expected {m}×{m}", self.q.nrows(), self.q.ncols()),
            ),
            (
                self.r.nrows() == r && self.r.ncols() == r,
                format!("R is {}×{}, expected {r}×{r}", self.r.nrows(), self.r.ncols()),
            ),
        ];
        for (ok, msg) in dims_ok {
            if !ok {
                errs.push(ValidationError::Dimension(msg));
            }
        }
        if !errs.is_empty() {
            return errs;
        }

        if self.partition.is_empty() {
            errs.push(ValidationError::Partition("no nodes".into()));
        } else {
            let sm: usize = self.partition.iter().map(|b| b.states).sum();
            let sr: usize = self.partition.iter().map(|b| b.inputs).sum();
            if sm != m {
                errs.push(ValidationError::Partition(format!("state counts sum to {sm}, A has {m} states")));
            }
            if sr != r {
                errs.push(ValidationError::Partition(format!("input counts sum to {sr}, B has {r} inputs")));
            }
        }

        if !is_symmetric(&self.q) {
            errs.push(ValidationError::Asymmetric("Q"));
        } else {
            let min = min_eigenvalue(&self.q);
            if min < -PSD_TOL * self.q.amax().max(1.0) {
                errs.push(ValidationError::QNotPsd(min));
            }
        }
        if !is_symmetric(&self.r) {
            errs.push(ValidationError::Asymmetric("R"));
        } else if r > 0 {
            let min = min_eigenvalue(&self.r);
            if min <= 0.0 {
                errs.push(ValidationError::RNotPd(min));
            }
        }

        match spectral_abscissa(&self.a) {
            Ok(s) if s < -opts.hurwitz_margin => {}
            Ok(s) => errs.push(ValidationError::NotHurwitz(s)),
            Err(_) => errs.push(ValidationError::NotHurwitz(f64::NAN)),
        }
        errs
    }
}

fn is_symmetric(m: &DMatrix<f64>) -> bool {
    let scale = m.amax().max(1.0);
    (m - m.transpose()).amax() <= SYMMETRY_TOL * scale
}

fn min_eigenvalue(m: &DMatrix<f64>) -> f64 {
    if m.is_empty() {
        return 0.0;
    }
    SymmetricEigen::new(m.clone()).eigenvalues.min()
}

/// Feedback gain `K` (`r × m`) together with its allowed support.
#[derive(Debug, Clone, PartialEq)]
pub struct GainMatrix {
    pub k: DMatrix<f64>,
    pub mask: SupportMask,
    /// Set when `A − B·K` has been verified Hurwitz.
    pub stabilizing: bool,
}

impl GainMatrix {
    pub fn zeros(mask: SupportMask) -> Self {
        let k = DMatrix::zeros(mask.nrows(), mask.ncols());
        Self { k, mask, stabilizing: false }
    }

    /// Zeroes every entry of `k` outside `mask`.
    pub fn projected(mut k: DMatrix<f64>, mask: SupportMask) -> Self {
        mask.project(&mut k);
        Self { k, mask, stabilizing: false }
    }

    pub fn is_mask_feasible(&self) -> bool {
        self.mask.is_feasible(&self.k)
    }
}
