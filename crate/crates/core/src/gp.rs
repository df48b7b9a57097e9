//! Exact Gaussian process sampling and closed-form regression posteriors.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::kernels::{cross_gram, gram, mean_vector, Kernel, MeanFn};
use crate::linalg::{cholesky_with_jitter, default_jitter};
use crate::points::PointSet;
use crate::rng::{purpose, substream_for};

pub const JITTER_RETRIES: usize = 3;

pub struct GpModel {
    pub mean: Arc<dyn MeanFn>,
    pub kernel: Arc<dyn Kernel>,
    /// Diagonal jitter for factorizations; `None` means `1e-8 ×` mean
    /// Gram diagonal. Escalations (×10, up to 3) are logged, never silent.
    pub jitter: Option<f64>,
}

impl GpModel {
    pub fn new(mean: Arc<dyn MeanFn>, kernel: Arc<dyn Kernel>) -> Self {
        GpModel {
            mean,
            kernel,
            jitter: None,
        }
    }

    fn base_jitter(&self, k: &DMatrix<f64>) -> f64 {
        self.jitter.unwrap_or_else(|| default_jitter(k))
    }

    /// Draw `n_paths` joint samples of the process at `points`; one row per
    /// path.
    pub fn sample_paths(&self, points: &PointSet, n_paths: usize, seed: u64) -> Result<DMatrix<f64>> {
        let k = gram(self.kernel.as_ref(), points)?;
        let m = mean_vector(self.mean.as_ref(), points)?;
        let chol = cholesky_with_jitter(&k, self.base_jitter(&k), JITTER_RETRIES)?;
        let l = chol.l();
        let mut rng = substream_for(seed, purpose::GP_PATHS, 0, 0);
        let mut out = DMatrix::zeros(n_paths, points.len());
        for p in 0..n_paths {
            let z = DVector::from_iterator(
                points.len(),
                (0..points.len()).map(|_| StandardNormal.sample(&mut rng)),
            );
            let path = &m + &l * z;
            out.row_mut(p).copy_from(&path.transpose());
        }
        Ok(out)
    }

    /// Conjugate regression posterior at `test` given observations
    /// `y = m + f + ε`, `ε ~ N(0, σ_ε²)`. Returns pointwise mean and
    /// variance.
    pub fn posterior(
        &self,
        train: &PointSet,
        y: &DVector<f64>,
        noise_sd: f64,
        test: &PointSet,
    ) -> Result<(DVector<f64>, DVector<f64>)> {
        if !(noise_sd > 0.0) {
            return Err(Error::invalid("noise_sd", "must be positive"));
        }
        let prior_mean = mean_vector(self.mean.as_ref(), test)?;
        let prior_var = DVector::from_iterator(
            test.len(),
            test.iter().map(|x| self.kernel.eval(x, x)),
        );
        if train.is_empty() {
            return Ok((prior_mean, prior_var));
        }
        if y.len() != train.len() {
            return Err(Error::DimensionMismatch {
                expected: train.len(),
                got: y.len(),
            });
        }
        let mut k = gram(self.kernel.as_ref(), train)?;
        for i in 0..k.nrows() {
            k[(i, i)] += noise_sd * noise_sd;
        }
        let chol = cholesky_with_jitter(&k, 0.0, JITTER_RETRIES)?;
        let resid = y - mean_vector(self.mean.as_ref(), train)?;
        let alpha = chol.solve_vec(&resid);
        let k_star = cross_gram(self.kernel.as_ref(), train, test)?; // n × t
        let mean = prior_mean + k_star.transpose() * alpha;
        let solved = chol.solve_mat(&k_star);
        let mut var = prior_var;
        for j in 0..test.len() {
            var[j] -= k_star.column(j).dot(&solved.column(j));
        }
        Ok((mean, var))
    }
}
