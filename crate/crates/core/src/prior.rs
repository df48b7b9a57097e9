//! Sampling networks from the ridgelet prior and the i.i.d. baseline prior,
//! including the `O(min(N, D)³)` square-root factorization used to draw
//! output weights.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::activations::{make_activation, ActivationKind, ActivationPair};
use crate::cubature::{make_weight_rule_stream, normalizer, InputRule};
use crate::error::{Error, Result};
use crate::kernels::{gram, mean_vector, Kernel, MeanFn};
use crate::linalg::{check_symmetric, psd_clamp, sym_eig};
use crate::points::PointSet;
use crate::ridgelet::build_psi_from_nodes;
use crate::rng::{normal_vector, purpose, standard_normal_vec, substream_for};

/// Which square matrix was eigendecomposed to factor `Σ = Ψ K Ψᵀ`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SqrtMethod {
    /// `N > D`: decompose `K = A V Aᵀ` and take `Σ^{1/2} = Ψ A V^{1/2}`.
    ViaKernelEig,
    /// `N ≤ D`: decompose `Σ = B W Bᵀ` and take `Σ^{1/2} = B W^{1/2}`.
    ViaSigmaEig,
}

/// A factor `F` with `F Fᵀ = Ψ K Ψᵀ`, shape `N × min(N, D)`.
pub struct GaussianSqrt {
    pub factor: DMatrix<f64>,
    pub method: SqrtMethod,
}

pub fn gaussian_sqrt(psi: &DMatrix<f64>, k: &DMatrix<f64>) -> Result<GaussianSqrt> {
    if k.nrows() != psi.ncols() || k.ncols() != psi.ncols() {
        return Err(Error::DimensionMismatch {
            expected: psi.ncols(),
            got: k.nrows(),
        });
    }
    let scale = k.iter().fold(0.0f64, |m, &v| m.max(v.abs())).max(1.0);
    check_symmetric(k, 1e-10 * scale)?;
    let n = psi.nrows();
    let d = psi.ncols();
    if n > d {
        let mut eig = sym_eig(k);
        psd_clamp(&mut eig.values)?;
        let mut half = eig.vectors;
        for (j, lam) in eig.values.iter().enumerate() {
            half.column_mut(j).scale_mut(lam.sqrt());
        }
        Ok(GaussianSqrt {
            factor: psi * half,
            method: SqrtMethod::ViaKernelEig,
        })
    } else {
        let sigma = psi * k * psi.transpose();
        let mut eig = sym_eig(&sigma);
        psd_clamp(&mut eig.values)?;
        let mut factor = eig.vectors;
        for (j, lam) in eig.values.iter().enumerate() {
            factor.column_mut(j).scale_mut(lam.sqrt());
        }
        Ok(GaussianSqrt {
            factor,
            method: SqrtMethod::ViaSigmaEig,
        })
    }
}

#[derive(Debug, Clone)]
pub struct NetworkLayer {
    pub weights: DMatrix<f64>,
    pub biases: DVector<f64>,
}

/// A sampled network: hidden layers, output weights and the activation that
/// evaluates it. Evaluation follows
/// `f(x) = Σ_j w_out[j] φ(z_j^L(x))` with the usual layer recursion.
pub struct RidgeletNetwork {
    pub layers: Vec<NetworkLayer>,
    pub output_weights: DVector<f64>,
    pub activation: Arc<dyn ActivationPair>,
    pub sigma_w: f64,
    pub sigma_b: f64,
    pub seed: u64,
}

impl RidgeletNetwork {
    pub fn input_dim(&self) -> usize {
        self.layers[0].weights.ncols()
    }

    /// Activation vector of the last hidden layer at `x`.
    fn hidden(&self, x: &[f64]) -> Result<DVector<f64>> {
        if x.len() != self.input_dim() {
            return Err(Error::DimensionMismatch {
                expected: self.input_dim(),
                got: x.len(),
            });
        }
        let xv = DVector::from_column_slice(x);
        let mut act = (&self.layers[0].weights * xv + &self.layers[0].biases).map(|z| self.activation.phi(z));
        for layer in &self.layers[1..] {
            act = (&layer.weights * act + &layer.biases).map(|z| self.activation.phi(z));
        }
        Ok(act)
    }

    pub fn evaluate(&self, x: &[f64]) -> Result<f64> {
        Ok(self.output_weights.dot(&self.hidden(x)?))
    }

    pub fn evaluate_many(&self, points: &PointSet) -> Result<DVector<f64>> {
        let mut out = DVector::zeros(points.len());
        for (i, x) in points.iter().enumerate() {
            out[i] = self.evaluate(x)?;
        }
        Ok(out)
    }
}

fn matrix_from_pointset(p: &PointSet) -> DMatrix<f64> {
    // PointSet is row-major, DMatrix column-major
    DMatrix::from_row_slice(p.len(), p.dim(), p.as_flat())
}

/// Draw one network from the ridgelet prior targeting `GP(mean, kernel)`.
///
/// Layer 0 weights/biases double as the Monte Carlo cubature nodes
/// (the exact identification of the one-layer theory). Deeper layers use
/// fresh bandwidth-scaled cubature draws over the recursion's weight space,
/// on per-layer substreams; output-level draws use the conditional Gaussian
/// `N(Ψ m, Ψ K Ψᵀ)` through [`gaussian_sqrt`].
pub fn sample_ridgelet_network(
    mean: &dyn MeanFn,
    kernel: &dyn Kernel,
    input: &InputRule,
    activation: Arc<dyn ActivationPair>,
    layer_widths: &[usize],
    sigma_w: f64,
    sigma_b: f64,
    seed: u64,
) -> Result<RidgeletNetwork> {
    if layer_widths.is_empty() {
        return Err(Error::invalid("layer_widths", "must be nonempty"));
    }
    if layer_widths.iter().any(|&w| w == 0) {
        return Err(Error::invalid("layer_widths", "widths must be positive"));
    }
    let d = input.dim();
    if activation.input_dim() != d {
        return Err(Error::DimensionMismatch {
            expected: d,
            got: activation.input_dim(),
        });
    }
    let m_d = mean_vector(mean, &input.nodes)?;
    let k = gram(kernel, &input.nodes)?;
    let levels = layer_widths.len();
    // The normalizer keeps the input-dimension form at every level.
    let z = normalizer(d, sigma_w, sigma_b);

    let rule0 = make_weight_rule_stream(d, layer_widths[0], sigma_w, sigma_b, z, seed, 0, 0)?;
    let mut layers = vec![NetworkLayer {
        weights: matrix_from_pointset(&rule0.nodes),
        biases: DVector::from_column_slice(&rule0.biases),
    }];
    let mut output_weights = DVector::zeros(0);

    // Activations of the input-rule nodes after the layers built so far.
    let mut g_nodes = matrix_from_pointset(&input.nodes); // D × d

    for step in 1..=levels {
        if step >= 2 {
            // advance node activations through level step-2
            let layer = &layers[step - 2];
            let mut zs = &g_nodes * layer.weights.transpose();
            for mut row in zs.row_iter_mut() {
                row += layer.biases.transpose();
            }
            g_nodes = zs.map(|v| activation.phi(v));
        }
        let cub_count = layer_widths[step - 1];
        let (cub_nodes, cub_biases, v) = if step == 1 {
            (
                rule0.nodes.clone(),
                rule0.biases.clone(),
                rule0.v,
            )
        } else {
            let node_dim = layer_widths[step - 2];
            let rule = make_weight_rule_stream(
                node_dim,
                cub_count,
                sigma_w,
                sigma_b,
                z,
                seed,
                (step - 1) as u64,
                0,
            )?;
            (rule.nodes, rule.biases, rule.v)
        };
        let synthetic = InputRule {
            nodes: PointSet::from_flat(
                g_nodes.row_iter().flat_map(|r| r.iter().copied().collect::<Vec<_>>()).collect(),
                g_nodes.ncols(),
            )?,
            weights: input.weights.clone(),
            s: input.s,
            mollifier: None,
        };
        let psi = build_psi_from_nodes(&cub_nodes, &cub_biases, v, &synthetic, activation.as_ref())?;
        let mu = &psi * &m_d;
        let sqrt = gaussian_sqrt(&psi, &k)?;
        let rank = sqrt.factor.ncols();
        let mut rng = substream_for(seed, purpose::OUTPUT_WEIGHTS, step as u64, 0);
        if step < levels {
            let draw_count = layer_widths[step];
            let mut w = DMatrix::zeros(draw_count, cub_count);
            for i in 0..draw_count {
                let row = &mu + &sqrt.factor * standard_normal_vec(&mut rng, rank);
                w.row_mut(i).copy_from(&row.transpose());
            }
            let mut rng_b = substream_for(seed, purpose::BIAS_NODES, step as u64, 1);
            let biases = normal_vector(&mut rng_b, draw_count, sigma_b);
            layers.push(NetworkLayer { weights: w, biases });
        } else {
            output_weights = &mu + &sqrt.factor * standard_normal_vec(&mut rng, rank);
        }
    }

    Ok(RidgeletNetwork {
        layers,
        output_weights,
        activation,
        sigma_w,
        sigma_b,
        seed,
    })
}

/// The unstructured baseline: all parameters a priori independent,
/// `w⁰ ~ N(0, σ_{w⁰}²)`, `b⁰ ~ N(0, σ_{b⁰}²)`, `w¹ ~ N(0, σ_{w¹}²)`.
pub fn sample_iid_network(
    input_dim: usize,
    n_units: usize,
    sigma_w0: f64,
    sigma_b0: f64,
    sigma_w1: f64,
    activation: Arc<dyn ActivationPair>,
    seed: u64,
) -> Result<RidgeletNetwork> {
    if n_units == 0 {
        return Err(Error::invalid("n_units", "must be at least 1"));
    }
    if !(sigma_w0 > 0.0) || !(sigma_b0 > 0.0) || sigma_w1 < 0.0 {
        return Err(Error::invalid("sigma", "need σ_w0, σ_b0 > 0 and σ_w1 ≥ 0"));
    }
    if activation.input_dim() != input_dim {
        return Err(Error::DimensionMismatch {
            expected: input_dim,
            got: activation.input_dim(),
        });
    }
    let mut rng_w = substream_for(seed, purpose::WEIGHT_NODES, 0, 0);
    let mut rng_b = substream_for(seed, purpose::BIAS_NODES, 0, 0);
    let mut rng_o = substream_for(seed, purpose::OUTPUT_WEIGHTS, 0, 0);
    let weights = DMatrix::from_fn(n_units, input_dim, |_, _| {
        sigma_w0 * rng_w.sample::<f64, _>(rand_distr::StandardNormal)
    });
    let biases = normal_vector(&mut rng_b, n_units, sigma_b0);
    let output_weights = normal_vector(&mut rng_o, n_units, sigma_w1);
    Ok(RidgeletNetwork {
        layers: vec![NetworkLayer { weights, biases }],
        output_weights,
        activation,
        sigma_w: sigma_w0,
        sigma_b: sigma_b0,
        seed,
    })
}

// ---------------------------------------------------------------------------
// Flat serialization record
// ---------------------------------------------------------------------------

#[derive(Debug, Serialize, Deserialize)]
pub struct LayerRecord {
    pub rows: usize,
    pub cols: usize,
    /// Row-major weight entries.
    pub weights: Vec<f64>,
    pub biases: Vec<f64>,
}

/// JSON-serializable network record: shapes, row-major arrays and metadata.
#[derive(Debug, Serialize, Deserialize)]
pub struct NetworkRecord {
    pub activation: String,
    pub input_dim: usize,
    pub layers: Vec<LayerRecord>,
    pub output_weights: Vec<f64>,
    pub sigma_w: f64,
    pub sigma_b: f64,
    pub seed: u64,
}

impl RidgeletNetwork {
    pub fn to_record(&self) -> NetworkRecord {
        NetworkRecord {
            activation: self.activation.name().to_string(),
            input_dim: self.input_dim(),
            layers: self
                .layers
                .iter()
                .map(|l| LayerRecord {
                    rows: l.weights.nrows(),
                    cols: l.weights.ncols(),
                    weights: l
                        .weights
                        .row_iter()
                        .flat_map(|r| r.iter().copied().collect::<Vec<_>>())
                        .collect(),
                    biases: l.biases.iter().copied().collect(),
                })
                .collect(),
            output_weights: self.output_weights.iter().copied().collect(),
            sigma_w: self.sigma_w,
            sigma_b: self.sigma_b,
            seed: self.seed,
        }
    }

    pub fn from_record(record: &NetworkRecord) -> Result<Self> {
        let kind = ActivationKind::parse(&record.activation)?;
        let activation = make_activation(kind, record.input_dim)?;
        let mut layers = Vec::with_capacity(record.layers.len());
        for l in &record.layers {
            if l.weights.len() != l.rows * l.cols || l.biases.len() != l.rows {
                return Err(Error::invalid("layers", "shape mismatch in record"));
            }
            layers.push(NetworkLayer {
                weights: DMatrix::from_row_slice(l.rows, l.cols, &l.weights),
                biases: DVector::from_column_slice(&l.biases),
            });
        }
        if layers.is_empty() {
            return Err(Error::invalid("layers", "record has no layers"));
        }
        Ok(RidgeletNetwork {
            layers,
            output_weights: DVector::from_column_slice(&record.output_weights),
            activation,
            sigma_w: record.sigma_w,
            sigma_b: record.sigma_b,
            seed: record.seed,
        })
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(&self.to_record()).expect("network record serializes")
    }

    pub fn from_json(json: &str) -> Result<Self> {
        let record: NetworkRecord =
            serde_json::from_str(json).map_err(|e| Error::Config(format!("network record: {e}")))?;
        Self::from_record(&record)
    }
}
