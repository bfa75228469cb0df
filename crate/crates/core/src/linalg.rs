//! Small SPD helpers on top of nalgebra's Cholesky factorization.

use nalgebra::{Cholesky, DMatrix, Dyn};

use crate::error::{DpflError, Result};

/// First jitter tried, relative to `trace / dim`.
pub const JITTER_START: f64 = 1e-10;
/// Largest jitter accepted, relative to the trace.
pub const JITTER_BUDGET: f64 = 1e-6;

pub fn symmetrize(m: &DMatrix<f64>) -> DMatrix<f64> {
    (m + m.transpose()) * 0.5
}

/// Cholesky factor of a symmetric matrix, possibly of `M + jitter·I`.
#[derive(Debug, Clone)]
pub struct SpdFactor {
    chol: Cholesky<f64, Dyn>,
    jitter: f64,
}

impl SpdFactor {
    /// Factors `m`, adding diagonal jitter `1e-10·trace/dim` escalating ×10
    /// while the jitter stays within `1e-6·trace`.
    pub fn new(m: &DMatrix<f64>, what: &str) -> Result<Self> {
        if !m.iter().all(|v| v.is_finite()) {
            return Err(DpflError::SingularCovariance(format!("{what} has non-finite entries")));
        }
        if let Some(chol) = Cholesky::new(m.clone()) {
            return Ok(Self { chol, jitter: 0.0 });
        }
        let dim = m.nrows().max(1) as f64;
        let trace = m.trace();
        if !(trace > 0.0) {
            return Err(DpflError::PsdRepairExceeded(what.to_string()));
        }
        let budget = JITTER_BUDGET * trace;
        let mut jitter = JITTER_START * trace / dim;
        while jitter <= budget {
            let shifted = m + DMatrix::identity(m.nrows(), m.ncols()) * jitter;
            if let Some(chol) = Cholesky::new(shifted) {
                return Ok(Self { chol, jitter });
            }
            jitter *= 10.0;
        }
        Err(DpflError::PsdRepairExceeded(what.to_string()))
    }

    pub fn jitter(&self) -> f64 {
        self.jitter
    }

    /// `M⁻¹ b`.
    pub fn solve(&self, b: &DMatrix<f64>) -> DMatrix<f64> {
        self.chol.solve(b)
    }

    /// `b M⁻¹`, using the symmetry of `M`.
    pub fn solve_right(&self, b: &DMatrix<f64>) -> DMatrix<f64> {
        self.chol.solve(&b.transpose()).transpose()
    }

    pub fn inverse(&self) -> DMatrix<f64> {
        symmetrize(&self.chol.inverse())
    }

    pub fn ln_det(&self) -> f64 {
        2.0 * self.chol.l_dirty().diagonal().iter().map(|v| v.ln()).sum::<f64>()
    }

    pub fn lower(&self) -> DMatrix<f64> {
        self.chol.l()
    }
}

/// Log-determinant of a symmetric positive definite matrix.
pub fn ln_det_spd(m: &DMatrix<f64>, what: &str) -> Result<f64> {
    let ld = SpdFactor::new(m, what)?.ln_det();
    if ld.is_finite() {
        Ok(ld)
    } else {
        Err(DpflError::SingularCovariance(format!("{what} has non-finite log-determinant")))
    }
}

/// `max |a_ij - b_ij|`.
pub fn max_abs_diff(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    (a - b).amax()
}
