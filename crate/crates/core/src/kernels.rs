//! Mean functions and covariance kernels used as GP targets, plus Gram
//! assembly. Each family is a strategy behind the [`Kernel`] / [`MeanFn`]
//! traits and is constructed by name through [`make_kernel`] / [`make_mean`].

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::points::PointSet;

pub trait MeanFn: Send + Sync {
    fn name(&self) -> &'static str;
    fn dim(&self) -> usize;
    /// Mean value at `x`; `x.len()` must equal `dim()`.
    fn eval(&self, x: &[f64]) -> f64;
}

pub trait Kernel: Send + Sync {
    fn name(&self) -> &'static str;
    fn dim(&self) -> usize;
    /// Kernel value `k(x, y)`; both slices must have length `dim()`.
    fn eval(&self, x: &[f64], y: &[f64]) -> f64;
}

fn require_dim(expected: usize, got: usize) -> Result<()> {
    if expected != got {
        return Err(Error::DimensionMismatch { expected, got });
    }
    Ok(())
}

fn require_positive(name: &'static str, value: f64) -> Result<()> {
    if !(value > 0.0) || !value.is_finite() {
        return Err(Error::invalid(name, format!("must be positive, got {value}")));
    }
    Ok(())
}

/// Dimension-checked kernel evaluation.
pub fn eval_kernel(kernel: &dyn Kernel, x: &[f64], y: &[f64]) -> Result<f64> {
    require_dim(kernel.dim(), x.len())?;
    require_dim(kernel.dim(), y.len())?;
    Ok(kernel.eval(x, y))
}

/// Dimension-checked mean evaluation.
pub fn eval_mean(mean: &dyn MeanFn, x: &[f64]) -> Result<f64> {
    require_dim(mean.dim(), x.len())?;
    Ok(mean.eval(x))
}

/// Gram matrix `[K]_{ij} = k(x_i, x_j)`. Evaluates each pair once and
/// mirrors, so symmetry is exact.
pub fn gram(kernel: &dyn Kernel, points: &PointSet) -> Result<DMatrix<f64>> {
    require_dim(kernel.dim(), points.dim())?;
    let n = points.len();
    let mut k = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in i..n {
            let v = kernel.eval(points.point(i), points.point(j));
            k[(i, j)] = v;
            k[(j, i)] = v;
        }
    }
    Ok(k)
}

/// Cross-Gram `[K]_{ij} = k(a_i, b_j)`.
pub fn cross_gram(kernel: &dyn Kernel, a: &PointSet, b: &PointSet) -> Result<DMatrix<f64>> {
    require_dim(kernel.dim(), a.dim())?;
    require_dim(kernel.dim(), b.dim())?;
    let mut k = DMatrix::zeros(a.len(), b.len());
    for i in 0..a.len() {
        for j in 0..b.len() {
            k[(i, j)] = kernel.eval(a.point(i), b.point(j));
        }
    }
    Ok(k)
}

pub fn mean_vector(mean: &dyn MeanFn, points: &PointSet) -> Result<DVector<f64>> {
    require_dim(mean.dim(), points.dim())?;
    Ok(DVector::from_iterator(
        points.len(),
        points.iter().map(|x| mean.eval(x)),
    ))
}

fn sq_dist(x: &[f64], y: &[f64]) -> f64 {
    x.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum()
}

// ---------------------------------------------------------------------------
// Mean functions
// ---------------------------------------------------------------------------

/// Identically zero mean.
pub struct ZeroMean {
    dim: usize,
}

impl ZeroMean {
    pub fn new(dim: usize) -> Result<Self> {
        if dim == 0 {
            return Err(Error::invalid("dim", "must be positive"));
        }
        Ok(ZeroMean { dim })
    }
}

impl MeanFn for ZeroMean {
    fn name(&self) -> &'static str {
        "zero"
    }
    fn dim(&self) -> usize {
        self.dim
    }
    fn eval(&self, _x: &[f64]) -> f64 {
        0.0
    }
}

/// Linear mean `m(x) = a·x`, no intercept.
pub struct LinearMean {
    slope: Vec<f64>,
}

impl LinearMean {
    pub fn new(slope: Vec<f64>) -> Result<Self> {
        if slope.is_empty() {
            return Err(Error::invalid("slope", "must have at least one coordinate"));
        }
        Ok(LinearMean { slope })
    }
}

impl MeanFn for LinearMean {
    fn name(&self) -> &'static str {
        "linear"
    }
    fn dim(&self) -> usize {
        self.slope.len()
    }
    fn eval(&self, x: &[f64]) -> f64 {
        self.slope.iter().zip(x).map(|(a, b)| a * b).sum()
    }
}

// ---------------------------------------------------------------------------
// Covariance kernels
// ---------------------------------------------------------------------------

/// `k(x, x') = l² exp(-|x - x'|² / (2 s²))`.
pub struct SquaredExponential {
    amplitude: f64,
    length_scale: f64,
    dim: usize,
}

impl SquaredExponential {
    pub fn new(amplitude: f64, length_scale: f64, dim: usize) -> Result<Self> {
        require_positive("amplitude", amplitude)?;
        require_positive("length_scale", length_scale)?;
        if dim == 0 {
            return Err(Error::invalid("dim", "must be positive"));
        }
        Ok(SquaredExponential {
            amplitude,
            length_scale,
            dim,
        })
    }
}

impl Kernel for SquaredExponential {
    fn name(&self) -> &'static str {
        "squared_exponential"
    }
    fn dim(&self) -> usize {
        self.dim
    }
    fn eval(&self, x: &[f64], y: &[f64]) -> f64 {
        let l2 = self.amplitude * self.amplitude;
        l2 * (-sq_dist(x, y) / (2.0 * self.length_scale * self.length_scale)).exp()
    }
}

/// `k(x, x') = l² (1 + |x - x'|² / (2 α s²))^{-α}`.
pub struct RationalQuadratic {
    amplitude: f64,
    alpha: f64,
    length_scale: f64,
    dim: usize,
}

impl RationalQuadratic {
    pub fn new(amplitude: f64, alpha: f64, length_scale: f64, dim: usize) -> Result<Self> {
        require_positive("amplitude", amplitude)?;
        require_positive("alpha", alpha)?;
        require_positive("length_scale", length_scale)?;
        if dim == 0 {
            return Err(Error::invalid("dim", "must be positive"));
        }
        Ok(RationalQuadratic {
            amplitude,
            alpha,
            length_scale,
            dim,
        })
    }
}

impl Kernel for RationalQuadratic {
    fn name(&self) -> &'static str {
        "rational_quadratic"
    }
    fn dim(&self) -> usize {
        self.dim
    }
    fn eval(&self, x: &[f64], y: &[f64]) -> f64 {
        let l2 = self.amplitude * self.amplitude;
        let base = 1.0 + sq_dist(x, y) / (2.0 * self.alpha * self.length_scale * self.length_scale);
        l2 * base.powf(-self.alpha)
    }
}

/// `k(x, x') = l² exp(-(2/s²) sin²(π |x - x'| / p²))`, one-dimensional only.
pub struct Periodic {
    amplitude: f64,
    length_scale: f64,
    period: f64,
}

impl Periodic {
    pub fn new(amplitude: f64, length_scale: f64, period: f64) -> Result<Self> {
        require_positive("amplitude", amplitude)?;
        require_positive("length_scale", length_scale)?;
        require_positive("period", period)?;
        Ok(Periodic {
            amplitude,
            length_scale,
            period,
        })
    }
}

impl Kernel for Periodic {
    fn name(&self) -> &'static str {
        "periodic"
    }
    fn dim(&self) -> usize {
        1
    }
    fn eval(&self, x: &[f64], y: &[f64]) -> f64 {
        let l2 = self.amplitude * self.amplitude;
        let s2 = self.length_scale * self.length_scale;
        let arg = std::f64::consts::PI * (x[0] - y[0]).abs() / (self.period * self.period);
        l2 * (-(2.0 / s2) * arg.sin().powi(2)).exp()
    }
}

/// In-painting kernel: squared exponential plus a separable cosine-mode term
/// `c(x) c(x')` with `c(x) = (cos(πx₁/2)+1)(cos(πx₂/2)+1)`. Two-dimensional.
pub struct InPaintComposite {
    amplitude: f64,
    length_scale: f64,
}

impl InPaintComposite {
    pub fn new(amplitude: f64, length_scale: f64) -> Result<Self> {
        require_positive("amplitude", amplitude)?;
        require_positive("length_scale", length_scale)?;
        Ok(InPaintComposite {
            amplitude,
            length_scale,
        })
    }

    /// The cosine-mode factor; also used to synthesize in-painting images.
    pub fn cosine_mode(x: &[f64]) -> f64 {
        let h = std::f64::consts::PI / 2.0;
        ((h * x[0]).cos() + 1.0) * ((h * x[1]).cos() + 1.0)
    }
}

impl Kernel for InPaintComposite {
    fn name(&self) -> &'static str {
        "inpaint_composite"
    }
    fn dim(&self) -> usize {
        2
    }
    fn eval(&self, x: &[f64], y: &[f64]) -> f64 {
        let l2 = self.amplitude * self.amplitude;
        let se = l2 * (-sq_dist(x, y) / (2.0 * self.length_scale * self.length_scale)).exp();
        se + Self::cosine_mode(x) * Self::cosine_mode(y)
    }
}

// ---------------------------------------------------------------------------
// Name registry
// ---------------------------------------------------------------------------

/// Declarative kernel selection, as it appears in experiment configs.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct KernelSpec {
    pub kernel: String,
    pub kernel_dimension: usize,
    pub kernel_amplitude: f64,
    pub kernel_length_scale: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kernel_alpha: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kernel_period: Option<f64>,
}

/// Declarative mean selection.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct MeanSpec {
    pub mean: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mean_slope: Option<Vec<f64>>,
}

pub const KERNEL_NAMES: &[&str] = &[
    "squared_exponential",
    "rational_quadratic",
    "periodic",
    "inpaint_composite",
];

pub fn make_kernel(spec: &KernelSpec) -> Result<Arc<dyn Kernel>> {
    let d = spec.kernel_dimension;
    let l = spec.kernel_amplitude;
    let s = spec.kernel_length_scale;
    match spec.kernel.as_str() {
        "squared_exponential" => Ok(Arc::new(SquaredExponential::new(l, s, d)?)),
        "rational_quadratic" => {
            let alpha = spec
                .kernel_alpha
                .ok_or_else(|| Error::invalid("kernel_alpha", "required for rational_quadratic"))?;
            Ok(Arc::new(RationalQuadratic::new(l, alpha, s, d)?))
        }
        "periodic" => {
            if d != 1 {
                return Err(Error::invalid(
                    "kernel_dimension",
                    "periodic kernel is one-dimensional only",
                ));
            }
            let p = spec
                .kernel_period
                .ok_or_else(|| Error::invalid("kernel_period", "required for periodic"))?;
            Ok(Arc::new(Periodic::new(l, s, p)?))
        }
        "inpaint_composite" => {
            if d != 2 {
                return Err(Error::invalid(
                    "kernel_dimension",
                    "in-painting kernel is two-dimensional only",
                ));
            }
            Ok(Arc::new(InPaintComposite::new(l, s)?))
        }
        other => Err(Error::UnknownName {
            kind: "kernel",
            name: other.to_string(),
        }),
    }
}

pub fn make_mean(spec: &MeanSpec, dim: usize) -> Result<Arc<dyn MeanFn>> {
    match spec.mean.as_str() {
        "zero" => Ok(Arc::new(ZeroMean::new(dim)?)),
        "linear" => {
            let slope = spec
                .mean_slope
                .clone()
                .ok_or_else(|| Error::invalid("mean_slope", "required for linear mean"))?;
            if slope.len() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    got: slope.len(),
                });
            }
            Ok(Arc::new(LinearMean::new(slope)?))
        }
        other => Err(Error::UnknownName {
            kind: "mean",
            name: other.to_string(),
        }),
    }
}
