//! Approximation-quality metrics: the maximum root-mean-square error (MRMSE)
//! between a GP and its image under the discretised operator, with a closed
//! form and a Monte Carlo cross-check, and the network covariance function.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;

use crate::activations::ActivationPair;
use crate::cubature::{make_weight_rule_stream, normalizer, InputRule};
use crate::error::{Error, Result};
use crate::gp::JITTER_RETRIES;
use crate::kernels::{cross_gram, gram, mean_vector, Kernel, MeanFn};
use crate::linalg::{cholesky_with_jitter, default_jitter};
use crate::points::PointSet;
use crate::ridgelet::{build_psi, FeatureMap};
use crate::rng::{purpose, substream_for};

/// Tolerated negative radicand before the PSD invariant is declared broken.
const RADICAND_TOL: f64 = 1e-10;

pub struct MrmseValue {
    pub value: f64,
    /// Probe point attaining the supremum.
    pub argmax: Vec<f64>,
}

/// Exact conditional second moment of the Gaussian difference
/// `f(x) - I f(x)` given the weight nodes:
/// `E[(f - I f)²](x) = (m(x) - aᵀm_D)² + k(x,x) - 2 aᵀ k_D(x) + aᵀ K a`
/// with `a = a(x) = Ψᵀ φ₀(x)`. Returns the sup over the probe grid.
pub fn mrmse_closed_form(
    mean: &dyn MeanFn,
    kernel: &dyn Kernel,
    input: &InputRule,
    psi: &DMatrix<f64>,
    feature: &FeatureMap,
    probe: &PointSet,
) -> Result<MrmseValue> {
    let m_d = mean_vector(mean, &input.nodes)?;
    let k = gram(kernel, &input.nodes)?;
    let k_cross = cross_gram(kernel, &input.nodes, probe)?; // D × P
    let phi = feature.eval_columns(probe)?; // N × P
    let a = psi.transpose() * phi; // D × P
    let ka = &k * &a; // D × P
    let mut best = f64::NEG_INFINITY;
    let mut best_idx = 0usize;
    for j in 0..probe.len() {
        let x = probe.point(j);
        let kxx = kernel.eval(x, x);
        let a_j = a.column(j);
        let mean_diff = mean.eval(x) - a_j.dot(&m_d);
        let radicand = mean_diff * mean_diff + kxx - 2.0 * a_j.dot(&k_cross.column(j))
            + a_j.dot(&ka.column(j));
        let scale = kxx.abs().max(1.0);
        if radicand < -RADICAND_TOL * scale {
            return Err(Error::NegativeRadicand { value: radicand });
        }
        let value = radicand.max(0.0).sqrt();
        if value > best {
            best = value;
            best_idx = j;
        }
    }
    Ok(MrmseValue {
        value: best,
        argmax: probe.point(best_idx).to_vec(),
    })
}

/// Monte Carlo estimate of the same conditional MRMSE: draws GP paths
/// jointly on the input nodes and the probe grid, forms the empirical mean
/// square of `f - I f` per probe point, and returns the max root.
pub fn mrmse_monte_carlo(
    mean: &dyn MeanFn,
    kernel: &dyn Kernel,
    input: &InputRule,
    psi: &DMatrix<f64>,
    feature: &FeatureMap,
    probe: &PointSet,
    n_gp_draws: usize,
    seed: u64,
) -> Result<f64> {
    if n_gp_draws < 2 {
        return Err(Error::invalid("n_gp_draws", "need at least 2 draws"));
    }
    let joint = input.nodes.concat(probe)?;
    let k = gram(kernel, &joint)?;
    let m = mean_vector(mean, &joint)?;
    let chol = cholesky_with_jitter(&k, default_jitter(&k), JITTER_RETRIES)?;
    let l = chol.l();
    let phi = feature.eval_columns(probe)?; // N × P
    let a = psi.transpose() * phi; // D × P
    let d_count = input.len();
    let p_count = probe.len();
    let mut rng = substream_for(seed, purpose::GP_PATHS, 0, 0);
    let mut sq_err = DVector::<f64>::zeros(p_count);
    let mut z = DVector::<f64>::zeros(joint.len());
    for _ in 0..n_gp_draws {
        for zi in z.iter_mut() {
            *zi = StandardNormal.sample(&mut rng);
        }
        let path = &m + &l * &z;
        let f_d = path.rows(0, d_count).into_owned();
        let i_f = a.transpose() * f_d; // P
        for j in 0..p_count {
            let e = path[d_count + j] - i_f[j];
            sq_err[j] += e * e;
        }
    }
    Ok(sq_err
        .iter()
        .map(|s| (s / n_gp_draws as f64).sqrt())
        .fold(0.0f64, f64::max))
}

/// Prior whose output-space covariance is being estimated.
pub enum PriorSampler {
    /// Ridgelet prior: the inner expectation over output weights is exact
    /// (`φ₀(x)ᵀ Ψ K Ψᵀ φ₀(x')` per node redraw), the outer one Monte Carlo.
    Ridgelet {
        kernel: Arc<dyn Kernel>,
        input: InputRule,
        pair: Arc<dyn ActivationPair>,
        sigma_w: f64,
        sigma_b: f64,
        n_units: usize,
    },
    /// Independent baseline: plain average of `f(x) f(x')` over full network
    /// draws.
    Iid {
        pair: Arc<dyn ActivationPair>,
        n_units: usize,
        sigma_w0: f64,
        sigma_b0: f64,
        sigma_w1: f64,
    },
}

impl PriorSampler {
    /// Covariance of the network output between each probe point and the
    /// reference point, averaged over `n_nets` redraws. The reduction order
    /// over redraws is fixed, so the result is identical for any thread
    /// count.
    pub fn covariance_curve(
        &self,
        probe: &PointSet,
        x_ref: &[f64],
        n_nets: usize,
        seed: u64,
    ) -> Result<DVector<f64>> {
        if n_nets < 2 {
            return Err(Error::invalid("n_nets", "need at least 2 redraws"));
        }
        let per_redraw: Vec<DVector<f64>> = match self {
            PriorSampler::Ridgelet {
                kernel,
                input,
                pair,
                sigma_w,
                sigma_b,
                n_units,
            } => {
                let dim = input.dim();
                let k = gram(kernel.as_ref(), &input.nodes)?;
                let z = normalizer(dim, *sigma_w, *sigma_b);
                (0..n_nets)
                    .into_par_iter()
                    .map(|r| {
                        let rule = make_weight_rule_stream(
                            dim, *n_units, *sigma_w, *sigma_b, z, seed, 0, r as u64,
                        )?;
                        let psi = build_psi(&rule, input, pair.as_ref())?;
                        let feature = FeatureMap::new(&rule, pair.as_ref());
                        let phi_ref = feature.eval(x_ref)?;
                        let t = &psi * (&k * (psi.transpose() * phi_ref));
                        let phi = feature.eval_columns(probe)?;
                        Ok(phi.transpose() * t)
                    })
                    .collect::<Result<Vec<_>>>()?
            }
            PriorSampler::Iid {
                pair,
                n_units,
                sigma_w0,
                sigma_b0,
                sigma_w1,
            } => {
                let dim = pair.input_dim();
                (0..n_nets)
                    .into_par_iter()
                    .map(|r| {
                        let rule = make_weight_rule_stream(
                            dim, *n_units, *sigma_w0, *sigma_b0, 1.0, seed, 0, r as u64,
                        )?;
                        let mut rng_o = substream_for(seed, purpose::OUTPUT_WEIGHTS, 0, r as u64);
                        let w1 = crate::rng::normal_vector(&mut rng_o, *n_units, *sigma_w1);
                        let feature = FeatureMap::new(&rule, pair.as_ref());
                        let f_ref = w1.dot(&feature.eval(x_ref)?);
                        let phi = feature.eval_columns(probe)?;
                        let f_vals = phi.transpose() * &w1;
                        Ok(f_vals * f_ref)
                    })
                    .collect::<Result<Vec<_>>>()?
            }
        };
        let mut acc = DVector::zeros(probe.len());
        for v in &per_redraw {
            acc += v;
        }
        Ok(acc / n_nets as f64)
    }

    /// Scalar covariance estimate between two points.
    pub fn covariance(&self, x: &[f64], x_ref: &[f64], n_nets: usize, seed: u64) -> Result<f64> {
        let probe = PointSet::from_rows(&[x.to_vec()])?;
        Ok(self.covariance_curve(&probe, x_ref, n_nets, seed)?[0])
    }
}
