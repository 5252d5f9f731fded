//! Semi-explicit index-1 DAE machinery.
//!
//! The system interface is `x' = f(x, y, t)`, `0 = g(x, y, t)` with sparse
//! Jacobian blocks; `t`-dependence carries the prescribed boundary-condition
//! data of the enclosing process model. The submodules provide:
//!
//! * [`tableau`] — stiffly accurate ESDIRK Butcher tableaus with embedded
//!   error weights,
//! * [`controller`] — PID step-size control on embedded error estimates,
//! * [`init`] — consistent initialization `g(x0, y0) = 0` by damped Newton,
//! * [`integrate`] — adaptive ESDIRK integration with modified Newton stage
//!   solves and one iteration-matrix factorization per step,
//! * [`sens`] — staggered direct forward sensitivities reusing the step
//!   factorizations.

pub mod controller;
pub mod init;
pub mod integrate;
pub mod sens;
pub mod tableau;

pub use controller::StepController;
pub use init::consistent_init;
pub use integrate::{integrate, IntegrationResult, NoopObserver, Observer, Statistics};
pub use sens::integrate_with_sensitivities;
pub use tableau::ButcherTableau;

use thiserror::Error;

use crate::linalg::LinearBackend;

#[derive(Debug, Error)]
pub enum DaeError {
    #[error("model evaluation failed at t={t}: {message}")]
    ModelEval { t: f64, message: String },
    #[error("consistent initialization failed: {0}")]
    InitFailure(String),
    #[error("algebraic Jacobian singular (index failure): {0}")]
    IndexFailure(String),
    #[error("stage Newton failed to converge at t={0}")]
    StageFailure(f64),
    #[error("step size {h} below minimum {h_min} at t={t} (stiffness failure)")]
    StiffnessFailure { t: f64, h: f64, h_min: f64 },
    #[error("linear algebra failure: {0}")]
    Linalg(#[from] crate::linalg::LinalgError),
    #[error("unknown tableau: {0}")]
    UnknownTableau(String),
}

/// Sparse matrix block in triplet form with fixed dimensions.
///
/// Assembly clears and re-pushes entries on every Jacobian evaluation;
/// duplicate entries are implicitly summed by all consumers.
#[derive(Debug, Clone, Default)]
pub struct SparseBlock {
    pub nrows: usize,
    pub ncols: usize,
    pub rows: Vec<usize>,
    pub cols: Vec<usize>,
    pub vals: Vec<f64>,
}

impl SparseBlock {
    pub fn new(nrows: usize, ncols: usize) -> Self {
        Self {
            nrows,
            ncols,
            rows: Vec::new(),
            cols: Vec::new(),
            vals: Vec::new(),
        }
    }

    pub fn clear(&mut self) {
        self.rows.clear();
        self.cols.clear();
        self.vals.clear();
    }

    #[inline]
    pub fn push(&mut self, i: usize, j: usize, v: f64) {
        debug_assert!(i < self.nrows && j < self.ncols);
        if v != 0.0 {
            self.rows.push(i);
            self.cols.push(j);
            self.vals.push(v);
        }
    }

    pub fn nnz(&self) -> usize {
        self.vals.len()
    }

    /// `y += alpha * A x`.
    pub fn matvec_add(&self, x: &[f64], y: &mut [f64], alpha: f64) {
        for k in 0..self.vals.len() {
            y[self.rows[k]] += alpha * self.vals[k] * x[self.cols[k]];
        }
    }

    /// Dense copy (tests and small dense solves).
    pub fn to_dense(&self) -> nalgebra::DMatrix<f64> {
        let mut m = nalgebra::DMatrix::zeros(self.nrows, self.ncols);
        for k in 0..self.vals.len() {
            m[(self.rows[k], self.cols[k])] += self.vals[k];
        }
        m
    }
}

/// The four Jacobian blocks of a semi-explicit DAE.
#[derive(Debug, Clone)]
pub struct DaeJacobian {
    /// df/dx, `n_x x n_x`.
    pub fx: SparseBlock,
    /// df/dy, `n_x x n_y`.
    pub fy: SparseBlock,
    /// dg/dx, `n_y x n_x`.
    pub gx: SparseBlock,
    /// dg/dy, `n_y x n_y`.
    pub gy: SparseBlock,
}

impl DaeJacobian {
    pub fn new(n_x: usize, n_y: usize) -> Self {
        Self {
            fx: SparseBlock::new(n_x, n_x),
            fy: SparseBlock::new(n_x, n_y),
            gx: SparseBlock::new(n_y, n_x),
            gy: SparseBlock::new(n_y, n_y),
        }
    }

    pub fn clear(&mut self) {
        self.fx.clear();
        self.fy.clear();
        self.gx.clear();
        self.gy.clear();
    }
}

/// A semi-explicit index-1 DAE `x' = f(x, y, t)`, `0 = g(x, y, t)`.
///
/// Implementations must be pure given `(t, x, y)`; the integrator may
/// evaluate concurrently from multiple threads during sensitivity propagation.
pub trait DaeSystem: Sync {
    fn n_x(&self) -> usize;
    fn n_y(&self) -> usize;

    /// Differential right-hand side.
    fn f(&self, t: f64, x: &[f64], y: &[f64], out: &mut [f64]) -> Result<(), DaeError>;

    /// Algebraic residual (scaled to O(1) per the model's conventions).
    fn g(&self, t: f64, x: &[f64], y: &[f64], out: &mut [f64]) -> Result<(), DaeError>;

    /// Exact Jacobian blocks at `(t, x, y)`.
    fn jacobian(
        &self,
        t: f64,
        x: &[f64],
        y: &[f64],
        jac: &mut DaeJacobian,
    ) -> Result<(), DaeError>;

    /// Whether a trial iterate lies in the feasible domain of the model
    /// functions (e.g. positive temperatures and pressures). Line searches
    /// never evaluate the model outside this domain.
    fn feasible(&self, _x: &[f64], y: &[f64]) -> bool {
        y.iter().all(|v| v.is_finite())
    }

    /// Linear-algebra backend for iteration-matrix factorization.
    fn backend(&self) -> LinearBackend {
        LinearBackend::Dense
    }
}

/// Weighted RMS norm `sqrt(mean((v_i / (atol + rtol |ref_i|))^2))`.
pub fn wrms_norm(v: &[f64], reference: &[f64], atol: f64, rtol: f64) -> f64 {
    debug_assert_eq!(v.len(), reference.len());
    if v.is_empty() {
        return 0.0;
    }
    let mut acc = 0.0;
    for (vi, ri) in v.iter().zip(reference) {
        let w = atol + rtol * ri.abs();
        let e = vi / w;
        acc += e * e;
    }
    (acc / v.len() as f64).sqrt()
}
