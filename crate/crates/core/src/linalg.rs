//! Small dense helpers shared by the element-level code.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};

use crate::error::{Error, Result};

/// Condition numbers above this abort the local solve.
pub const CONDITION_LIMIT: f64 = 1e12;

/// Cholesky factor of a symmetric positive definite matrix whose spectral
/// condition number has been checked against a limit, by default
/// [`CONDITION_LIMIT`].
pub struct SpdFactor {
    chol: Cholesky<f64, Dyn>,
}

impl SpdFactor {
    pub fn new(m: &DMatrix<f64>, what: &'static str) -> Result<Self> {
        Self::with_limit(m, what, CONDITION_LIMIT)
    }

    /// Same check against a caller-supplied limit; `f64::INFINITY` only
    /// requires the factorization to succeed.
    pub fn with_limit(m: &DMatrix<f64>, what: &'static str, limit: f64) -> Result<Self> {
        if m.nrows() == 0 {
            return Ok(SpdFactor {
                chol: Cholesky::new(m.clone()).expect("empty Cholesky"),
            });
        }
        let eig = m.clone().symmetric_eigenvalues();
        let (lo, hi) = eig.iter().fold((f64::INFINITY, 0.0f64), |(lo, hi), &e| {
            (lo.min(e), hi.max(e.abs()))
        });
        let condition = if lo > 0.0 { hi / lo } else { f64::INFINITY };
        if condition.is_nan() || condition > limit {
            return Err(Error::IllConditioned { what, condition });
        }
        let chol = Cholesky::new(m.clone()).ok_or(Error::IllConditioned { what, condition })?;
        Ok(SpdFactor { chol })
    }

    pub fn solve(&self, b: &DMatrix<f64>) -> DMatrix<f64> {
        self.chol.solve(b)
    }

    pub fn solve_vec(&self, b: &DVector<f64>) -> DVector<f64> {
        self.chol.solve(b)
    }
}

/// Largest absolute asymmetry relative to the largest entry.
#[cfg(test)]
pub fn asymmetry(m: &DMatrix<f64>) -> f64 {
    let scale = m.amax().max(f64::MIN_POSITIVE);
    (m - m.transpose()).amax() / scale
}

pub fn symmetrize(m: &mut DMatrix<f64>) {
    let t = m.transpose();
    *m += t;
    *m *= 0.5;
}
