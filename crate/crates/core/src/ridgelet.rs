//! Ψ-matrix assembly and the discretised operator
//! `I f(x) = φ₀(x)ᵀ Ψ f_D`, the computational core of the construction.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;

use crate::activations::ActivationPair;
use crate::cubature::{InputRule, WeightRule};
use crate::error::{Error, Result};
use crate::kernels::{gram, mean_vector, Kernel, MeanFn};
use crate::points::PointSet;

/// `[Ψ]_{ij} = v u_j ψ(w_i·x_j + b_i)`, rows over weight nodes, columns over
/// input nodes. Assembly parallelizes over columns (each column is contiguous
/// in memory and independent), so results are identical for any thread count.
pub fn build_psi_from_nodes(
    nodes: &PointSet,
    biases: &[f64],
    v: f64,
    input: &InputRule,
    pair: &dyn ActivationPair,
) -> Result<DMatrix<f64>> {
    if nodes.dim() != input.dim() {
        return Err(Error::DimensionMismatch {
            expected: input.dim(),
            got: nodes.dim(),
        });
    }
    let n = nodes.len();
    let d_count = input.len();
    if biases.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: biases.len(),
        });
    }
    let mut data = vec![0.0f64; n * d_count];
    data.par_chunks_mut(n).enumerate().for_each(|(j, col)| {
        let xj = input.nodes.point(j);
        let uj = input.weights[j];
        if uj == 0.0 {
            return; // mollified-out node: whole column is zero
        }
        for (i, slot) in col.iter_mut().enumerate() {
            let wi = nodes.point(i);
            let arg = dot(wi, xj) + biases[i];
            *slot = v * uj * pair.psi(arg);
        }
    });
    Ok(DMatrix::from_vec(n, d_count, data))
}

pub fn build_psi(
    rule: &WeightRule,
    input: &InputRule,
    pair: &dyn ActivationPair,
) -> Result<DMatrix<f64>> {
    build_psi_from_nodes(&rule.nodes, &rule.biases, rule.v, input, pair)
}

#[inline]
fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// The feature map `x ↦ [φ(w_i·x + b_i)]_i` for a fixed node set.
pub struct FeatureMap<'a> {
    nodes: &'a PointSet,
    biases: &'a [f64],
    pair: &'a dyn ActivationPair,
}

impl<'a> FeatureMap<'a> {
    pub fn new(rule: &'a WeightRule, pair: &'a dyn ActivationPair) -> Self {
        FeatureMap {
            nodes: &rule.nodes,
            biases: &rule.biases,
            pair,
        }
    }

    pub fn from_nodes(nodes: &'a PointSet, biases: &'a [f64], pair: &'a dyn ActivationPair) -> Self {
        FeatureMap {
            nodes,
            biases,
            pair,
        }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn eval(&self, x: &[f64]) -> Result<DVector<f64>> {
        if x.len() != self.nodes.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.nodes.dim(),
                got: x.len(),
            });
        }
        Ok(DVector::from_iterator(
            self.nodes.len(),
            self.nodes
                .iter()
                .zip(self.biases)
                .map(|(w, b)| self.pair.phi(dot(w, x) + b)),
        ))
    }

    /// Feature matrix with one column per point: `N × M`.
    pub fn eval_columns(&self, points: &PointSet) -> Result<DMatrix<f64>> {
        if points.dim() != self.nodes.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.nodes.dim(),
                got: points.dim(),
            });
        }
        let n = self.nodes.len();
        let m = points.len();
        let mut data = vec![0.0f64; n * m];
        data.par_chunks_mut(n).enumerate().for_each(|(j, col)| {
            let x = points.point(j);
            for (i, slot) in col.iter_mut().enumerate() {
                *slot = self.pair.phi(dot(self.nodes.point(i), x) + self.biases[i]);
            }
        });
        Ok(DMatrix::from_vec(n, m, data))
    }
}

/// `I f(x) = φ₀(x)ᵀ (Ψ f_D)`, for `f_D` the function values at the input
/// nodes in column order.
pub fn apply_operator(
    psi: &DMatrix<f64>,
    feature: &FeatureMap,
    f_values: &DVector<f64>,
    x: &[f64],
) -> Result<f64> {
    if f_values.len() != psi.ncols() {
        return Err(Error::DimensionMismatch {
            expected: psi.ncols(),
            got: f_values.len(),
        });
    }
    let t = psi * f_values;
    Ok(feature.eval(x)?.dot(&t))
}

/// `I f` on many probe points at once (the `Ψ f_D` product is reused).
pub fn apply_operator_many(
    psi: &DMatrix<f64>,
    feature: &FeatureMap,
    f_values: &DVector<f64>,
    points: &PointSet,
) -> Result<DVector<f64>> {
    if f_values.len() != psi.ncols() {
        return Err(Error::DimensionMismatch {
            expected: psi.ncols(),
            got: f_values.len(),
        });
    }
    let t = psi * f_values;
    let phi = feature.eval_columns(points)?;
    Ok(phi.transpose() * t)
}

/// Push-forward moments of the output-weight Gaussian:
/// mean `Ψ m_D`, covariance `Ψ K Ψᵀ`.
pub fn output_weight_moments(
    psi: &DMatrix<f64>,
    mean: &dyn MeanFn,
    kernel: &dyn Kernel,
    input: &InputRule,
) -> Result<(DVector<f64>, DMatrix<f64>)> {
    let m = mean_vector(mean, &input.nodes)?;
    let k = gram(kernel, &input.nodes)?;
    let mean_out = psi * m;
    let mut cov = psi * k * psi.transpose();
    // gemm output is symmetric only up to rounding; make it exact
    for i in 0..cov.nrows() {
        for j in (i + 1)..cov.ncols() {
            let v = 0.5 * (cov[(i, j)] + cov[(j, i)]);
            cov[(i, j)] = v;
            cov[(j, i)] = v;
        }
    }
    Ok((mean_out, cov))
}

/// Empirical admissibility check: build the full discretised operator for a
/// deterministic 1-D test function and report `sup |f - I f|` over a
/// 201-point grid on `[-x_half, x_half]`. The input rule is the mollified
/// grid on `[-s, s]`.
pub fn check_reconstruction(
    pair: &dyn ActivationPair,
    test_fn: &dyn Fn(f64) -> f64,
    sigma_w: f64,
    sigma_b: f64,
    d_points: usize,
    n_units: usize,
    s: f64,
    x_half: f64,
    seed: u64,
) -> Result<f64> {
    if pair.input_dim() != 1 {
        return Err(Error::DimensionMismatch {
            expected: 1,
            got: pair.input_dim(),
        });
    }
    let mollifier = crate::cubature::Mollifier::new(x_half, s)?;
    let input = crate::cubature::make_input_rule(1, &[d_points], s, Some(mollifier))?;
    let rule = crate::cubature::make_weight_rule(1, n_units, sigma_w, sigma_b, seed)?;
    let psi = build_psi(&rule, &input, pair)?;
    let feature = FeatureMap::new(&rule, pair);
    let f_values = DVector::from_iterator(input.len(), input.nodes.iter().map(|x| test_fn(x[0])));
    let probe = PointSet::grid_1d(-x_half, x_half, 201);
    let reconstructed = apply_operator_many(&psi, &feature, &f_values, &probe)?;
    let sup = probe
        .iter()
        .zip(reconstructed.iter())
        .map(|(x, &v)| (test_fn(x[0]) - v).abs())
        .fold(0.0f64, f64::max);
    Ok(sup)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::activations::{make_activation, ActivationKind};
    use crate::cubature::{make_input_rule, make_weight_rule, Mollifier};
    use crate::kernels::{SquaredExponential, ZeroMean};

    fn small_setup() -> (crate::cubature::WeightRule, InputRule) {
        let moll = Mollifier::new(5.0, 6.0).unwrap();
        let input = make_input_rule(1, &[20], 6.0, Some(moll)).unwrap();
        let rule = make_weight_rule(1, 7, 5.0, 36.0, 3).unwrap();
        (rule, input)
    }

    #[test]
    fn psi_shape_and_zero_columns() {
        let pair = make_activation(ActivationKind::Tanh, 1).unwrap();
        let (rule, input) = small_setup();
        let psi = build_psi(&rule, &input, pair.as_ref()).unwrap();
        assert_eq!(psi.nrows(), 7);
        assert_eq!(psi.ncols(), 20);
        for (j, &u) in input.weights.iter().enumerate() {
            if u == 0.0 {
                assert!(psi.column(j).iter().all(|&v| v == 0.0), "column {j}");
            }
        }
    }

    #[test]
    fn psi_single_node_value() {
        // w = 0, b = 0, x = 0, u = v = 1 -> psi(0)
        let pair = make_activation(ActivationKind::Gaussian, 1).unwrap();
        let nodes = PointSet::from_1d(&[0.0]);
        let input = InputRule {
            nodes: PointSet::from_1d(&[0.0]),
            weights: vec![1.0],
            s: 1.0,
            mollifier: None,
        };
        let psi = build_psi_from_nodes(&nodes, &[0.0], 1.0, &input, pair.as_ref()).unwrap();
        assert_eq!(psi.nrows(), 1);
        assert!((psi[(0, 0)] - pair.psi(0.0)).abs() < 1e-15);
    }

    #[test]
    fn operator_is_linear() {
        let pair = make_activation(ActivationKind::Tanh, 1).unwrap();
        let (rule, input) = small_setup();
        let psi = build_psi(&rule, &input, pair.as_ref()).unwrap();
        let feature = FeatureMap::new(&rule, pair.as_ref());
        let zero = DVector::zeros(input.len());
        assert_eq!(apply_operator(&psi, &feature, &zero, &[0.3]).unwrap(), 0.0);
        let f: DVector<f64> =
            DVector::from_iterator(input.len(), input.nodes.iter().map(|x| (x[0]).sin()));
        let one = apply_operator(&psi, &feature, &f, &[0.3]).unwrap();
        let two = apply_operator(&psi, &feature, &(2.0 * &f), &[0.3]).unwrap();
        assert!((two - 2.0 * one).abs() < 1e-12 * one.abs().max(1.0));
    }

    #[test]
    fn operator_matches_naive_double_loop() {
        let pair = make_activation(ActivationKind::Relu, 1).unwrap();
        let (rule, input) = small_setup();
        let psi = build_psi(&rule, &input, pair.as_ref()).unwrap();
        let feature = FeatureMap::new(&rule, pair.as_ref());
        let f: DVector<f64> = DVector::from_iterator(
            input.len(),
            input.nodes.iter().map(|x| (-x[0] * x[0] / 2.0).exp()),
        );
        let x = [0.7];
        let fast = apply_operator(&psi, &feature, &f, &x).unwrap();
        // oracle: the displayed double sum, no matrix algebra
        let mut slow = 0.0;
        for i in 0..rule.len() {
            let wi = rule.nodes.point(i)[0];
            let bi = rule.biases[i];
            let mut inner = 0.0;
            for j in 0..input.len() {
                let xj = input.nodes.point(j)[0];
                inner += input.weights[j] * f[j] * pair.psi(wi * xj + bi);
            }
            slow += rule.v * inner * pair.phi(wi * x[0] + bi);
        }
        assert!((fast - slow).abs() < 1e-12 * slow.abs().max(1.0), "{fast} {slow}");
    }

    #[test]
    fn moments_zero_mean_and_white_kernel() {
        let pair = make_activation(ActivationKind::Tanh, 1).unwrap();
        let (rule, input) = small_setup();
        let psi = build_psi(&rule, &input, pair.as_ref()).unwrap();
        let mean = ZeroMean::new(1).unwrap();
        let kernel = SquaredExponential::new(1.0, 1.5, 1).unwrap();
        let (m, cov) = output_weight_moments(&psi, &mean, &kernel, &input).unwrap();
        assert!(m.iter().all(|&v| v == 0.0));
        assert_eq!(cov.nrows(), rule.len());
        // symmetry exactly (transposed indices identical)
        for i in 0..cov.nrows() {
            for j in 0..cov.ncols() {
                assert_eq!(cov[(i, j)], cov[(j, i)]);
            }
        }
        let trace: f64 = cov.diagonal().iter().sum();
        let eig = crate::linalg::sym_eig(&cov);
        assert!(eig.values.min() >= -1e-8 * trace.max(1e-300));
    }

    #[test]
    fn psi_scales_linearly_in_z() {
        // same nodes, doubled sigma_b only rescales v (and hence Psi) by 2
        let pair = make_activation(ActivationKind::Tanh, 1).unwrap();
        let (rule, input) = small_setup();
        let psi = build_psi(&rule, &input, pair.as_ref()).unwrap();
        let psi2 =
            build_psi_from_nodes(&rule.nodes, &rule.biases, 2.0 * rule.v, &input, pair.as_ref())
                .unwrap();
        for (a, b) in psi.iter().zip(psi2.iter()) {
            assert!((2.0 * a - b).abs() <= 1e-15 * b.abs().max(1e-300));
        }
    }

    #[test]
    fn reconstruction_zero_function_is_exact() {
        let pair = make_activation(ActivationKind::Tanh, 1).unwrap();
        let sup =
            check_reconstruction(pair.as_ref(), &|_| 0.0, 5.0, 36.0, 50, 40, 6.0, 5.0, 1).unwrap();
        assert_eq!(sup, 0.0);
    }
}
