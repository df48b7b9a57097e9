//! Dense symmetric linear algebra helpers: eigendecompositions with PSD
//! repair, and Cholesky factorization with an explicit, logged jitter
//! escalation policy.

use crate::error::{Error, Result};
use nalgebra::{Cholesky, DMatrix, DVector, Dyn};

/// Relative eigenvalue tolerance for PSD repair: eigenvalues in
/// `[-tol·trace, 0)` are clamped to zero, anything lower is an error.
pub const PSD_TOL_FACTOR: f64 = 1e-8;

pub struct SymEig {
    pub values: DVector<f64>,
    pub vectors: DMatrix<f64>,
}

pub fn sym_eig(a: &DMatrix<f64>) -> SymEig {
    let eig = a.clone().symmetric_eigen();
    SymEig {
        values: eig.eigenvalues,
        vectors: eig.eigenvectors,
    }
}

pub fn max_asymmetry(a: &DMatrix<f64>) -> f64 {
    let mut worst: f64 = 0.0;
    for i in 0..a.nrows() {
        for j in (i + 1)..a.ncols() {
            worst = worst.max((a[(i, j)] - a[(j, i)]).abs());
        }
    }
    worst
}

pub fn check_symmetric(a: &DMatrix<f64>, tolerance: f64) -> Result<()> {
    let worst = max_asymmetry(a);
    if worst > tolerance {
        return Err(Error::NotSymmetric {
            max_asymmetry: worst,
            tolerance,
        });
    }
    Ok(())
}

/// Clamp small negative eigenvalues to zero in place. Tolerance is
/// `PSD_TOL_FACTOR × max(trace, tiny)`; an eigenvalue below `-tolerance`
/// is a genuine PSD violation and errors out.
pub fn psd_clamp(values: &mut DVector<f64>) -> Result<()> {
    let trace: f64 = values.iter().sum();
    let tolerance = PSD_TOL_FACTOR * trace.abs().max(f64::MIN_POSITIVE);
    for v in values.iter_mut() {
        if *v < -tolerance {
            return Err(Error::NotPositiveSemiDefinite {
                eigenvalue: *v,
                tolerance,
            });
        }
        if *v < 0.0 {
            *v = 0.0;
        }
    }
    Ok(())
}

/// Square-root factor `Q Λ^{1/2}` of a symmetric PSD matrix, with eigenvalue
/// clamping.
pub fn psd_sqrt_factor(a: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let mut eig = sym_eig(a);
    psd_clamp(&mut eig.values)?;
    let mut factor = eig.vectors;
    for (j, lam) in eig.values.iter().enumerate() {
        let s = lam.sqrt();
        factor.column_mut(j).scale_mut(s);
    }
    Ok(factor)
}

pub struct JitteredCholesky {
    pub chol: Cholesky<f64, Dyn>,
    pub jitter: f64,
}

impl JitteredCholesky {
    pub fn solve_vec(&self, b: &DVector<f64>) -> DVector<f64> {
        self.chol.solve(b)
    }

    pub fn solve_mat(&self, b: &DMatrix<f64>) -> DMatrix<f64> {
        self.chol.solve(b)
    }

    pub fn log_det(&self) -> f64 {
        2.0 * self.chol.l_dirty().diagonal().iter().map(|d| d.ln()).sum::<f64>()
    }

    pub fn l(&self) -> DMatrix<f64> {
        self.chol.l()
    }
}

/// Cholesky with jitter escalation: try `base_jitter`, then ×10 up to
/// `retries` more times. Escalations are logged; exhausting them reports the
/// smallest eigenvalue of the original matrix.
pub fn cholesky_with_jitter(
    a: &DMatrix<f64>,
    base_jitter: f64,
    retries: usize,
) -> Result<JitteredCholesky> {
    let mut jitter = base_jitter;
    for attempt in 0..=retries {
        let mut m = a.clone();
        if jitter > 0.0 {
            for i in 0..m.nrows() {
                m[(i, i)] += jitter;
            }
        }
        match Cholesky::new(m) {
            Some(chol) => {
                if attempt > 0 {
                    log::warn!(
                        "Cholesky required jitter escalation to {jitter:.3e} (attempt {attempt})"
                    );
                }
                return Ok(JitteredCholesky { chol, jitter });
            }
            None => {
                jitter = if jitter > 0.0 {
                    jitter * 10.0
                } else {
                    default_jitter(a).max(f64::MIN_POSITIVE)
                };
            }
        }
    }
    let min_eig = sym_eig(a).values.min();
    Err(Error::CholeskyFailed {
        retries,
        final_jitter: jitter,
        min_eigenvalue: min_eig,
    })
}

/// Default base jitter for a Gram matrix: `1e-8 ×` mean diagonal.
pub fn default_jitter(a: &DMatrix<f64>) -> f64 {
    let n = a.nrows().max(1) as f64;
    1e-8 * a.diagonal().iter().sum::<f64>().abs() / n
}
