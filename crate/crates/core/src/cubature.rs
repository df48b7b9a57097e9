//! The two cubature rules behind the discretised ridgelet transform: a
//! deterministic left-endpoint grid over input space with smooth mollifier
//! weights, and a Monte Carlo rule over weight space with the bandwidth
//! normalizer `Z`.

use std::f64::consts::PI;

use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::points::PointSet;
use crate::rng::{purpose, substream_for};

/// Smooth bump that is exactly 1 on the centered cube of half-width
/// `x_half`, exactly 0 outside the cube of half-width `s`, and `C^∞`
/// in between. Product form over axes; each axis factor is
/// `1 - h((t² - a²)/(1 - a²))` with `t = x_i/s`, `a = x_half/s`,
/// `g(t) = e^{-1/t}·[t > 0]`, `h = g(t)/(g(t) + g(1-t))`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Mollifier {
    x_half: f64,
    s: f64,
    a: f64,
}

fn bump_g(t: f64) -> f64 {
    if t > 0.0 {
        (-1.0 / t).exp()
    } else {
        0.0
    }
}

fn bump_h(t: f64) -> f64 {
    if t <= 0.0 {
        0.0
    } else if t >= 1.0 {
        1.0
    } else {
        let g = bump_g(t);
        g / (g + bump_g(1.0 - t))
    }
}

impl Mollifier {
    pub fn new(x_half: f64, s: f64) -> Result<Self> {
        if !(x_half > 0.0) || !(s > x_half) {
            return Err(Error::invalid(
                "mollifier",
                format!("need 0 < x_half < s, got x_half={x_half}, s={s}"),
            ));
        }
        Ok(Mollifier {
            x_half,
            s,
            a: x_half / s,
        })
    }

    pub fn x_half(&self) -> f64 {
        self.x_half
    }

    pub fn s(&self) -> f64 {
        self.s
    }

    pub fn eval_axis(&self, xi: f64) -> f64 {
        let t = xi / self.s;
        1.0 - bump_h((t * t - self.a * self.a) / (1.0 - self.a * self.a))
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        x.iter().map(|&xi| self.eval_axis(xi)).product()
    }
}

/// Input-space rule: `D` nodes on a regular grid over `[-s, s]^d`
/// (Cartesian product of left-endpoint rules) with weights
/// `u_j = (2s)^d D^{-1} 𝟙(x_j)`.
#[derive(Debug, Clone)]
pub struct InputRule {
    pub nodes: PointSet,
    pub weights: Vec<f64>,
    pub s: f64,
    pub mollifier: Option<Mollifier>,
}

impl InputRule {
    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.nodes.dim()
    }
}

/// Build the grid rule. `per_axis` gives the node count along each axis;
/// `D` is their product. Pass `mollifier: None` when the domain of interest
/// is `[-s, s]^d` itself (constant weights `(2s)^d / D`).
pub fn make_input_rule(
    dim: usize,
    per_axis: &[usize],
    s: f64,
    mollifier: Option<Mollifier>,
) -> Result<InputRule> {
    if dim == 0 {
        return Err(Error::invalid("dim", "must be positive"));
    }
    if per_axis.len() != dim {
        return Err(Error::DimensionMismatch {
            expected: dim,
            got: per_axis.len(),
        });
    }
    if per_axis.iter().any(|&m| m < 2) {
        return Err(Error::invalid("per_axis", "each axis needs at least 2 nodes"));
    }
    if !(s > 0.0) {
        return Err(Error::invalid("s", "must be positive"));
    }
    if let Some(m) = &mollifier {
        if (m.s() - s).abs() > 1e-12 {
            return Err(Error::invalid(
                "mollifier",
                format!("mollifier outer half-width {} must equal s = {s}", m.s()),
            ));
        }
    }
    let total: usize = per_axis.iter().product();
    let mut data = Vec::with_capacity(total * dim);
    let mut coords = vec![0usize; dim];
    for _ in 0..total {
        for (k, &idx) in coords.iter().enumerate() {
            // left endpoint rule: x = -s + (2s / m) * j, j = 0..m-1
            data.push(-s + (2.0 * s / per_axis[k] as f64) * idx as f64);
        }
        // odometer increment, last axis fastest
        for k in (0..dim).rev() {
            coords[k] += 1;
            if coords[k] < per_axis[k] {
                break;
            }
            coords[k] = 0;
        }
    }
    let nodes = PointSet::from_flat(data, dim)?;
    let base = (2.0 * s).powi(dim as i32) / total as f64;
    let weights = nodes
        .iter()
        .map(|x| match &mollifier {
            Some(m) => base * m.eval(x),
            None => base,
        })
        .collect();
    Ok(InputRule {
        nodes,
        weights,
        s,
        mollifier,
    })
}

/// Uniform per-axis counts.
pub fn make_input_rule_uniform(
    dim: usize,
    n_per_axis: usize,
    s: f64,
    mollifier: Option<Mollifier>,
) -> Result<InputRule> {
    make_input_rule(dim, &vec![n_per_axis; dim], s, mollifier)
}

/// Weight-space Monte Carlo rule: `N` nodes `(w_i, b_i)` with
/// `w_i ~ N(0, σ_w² I_d)`, `b_i ~ N(0, σ_b²)`, common weight `v = Z/N`
/// and `Z = (2π)^{1/2} σ_w^d σ_b` (Gaussian densities have unit-L¹ Fourier
/// transforms, so no further factor).
#[derive(Debug, Clone)]
pub struct WeightRule {
    pub nodes: PointSet,
    pub biases: Vec<f64>,
    pub v: f64,
    pub z: f64,
    pub sigma_w: f64,
    pub sigma_b: f64,
    pub seed: u64,
}

impl WeightRule {
    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn dim(&self) -> usize {
        self.nodes.dim()
    }
}

pub fn normalizer(dim: usize, sigma_w: f64, sigma_b: f64) -> f64 {
    (2.0 * PI).sqrt() * sigma_w.powi(dim as i32) * sigma_b
}

/// Draw the rule from substreams of `seed` (weights and biases on separate
/// streams; `layer`/`replicate` select independent rules from one master
/// seed).
pub fn make_weight_rule_stream(
    dim: usize,
    n: usize,
    sigma_w: f64,
    sigma_b: f64,
    z: f64,
    seed: u64,
    layer: u64,
    replicate: u64,
) -> Result<WeightRule> {
    if n == 0 {
        return Err(Error::invalid("n", "must be at least 1"));
    }
    if !(sigma_w > 0.0) || !(sigma_b > 0.0) {
        return Err(Error::invalid("sigma", "bandwidths must be positive"));
    }
    let normal_w = Normal::new(0.0, sigma_w).expect("validated sd");
    let normal_b = Normal::new(0.0, sigma_b).expect("validated sd");
    let mut rng_w = substream_for(seed, purpose::WEIGHT_NODES, layer, replicate);
    let mut rng_b = substream_for(seed, purpose::BIAS_NODES, layer, replicate);
    let data: Vec<f64> = (0..n * dim).map(|_| normal_w.sample(&mut rng_w)).collect();
    let biases: Vec<f64> = (0..n).map(|_| normal_b.sample(&mut rng_b)).collect();
    Ok(WeightRule {
        nodes: PointSet::from_flat(data, dim)?,
        biases,
        v: z / n as f64,
        z,
        sigma_w,
        sigma_b,
        seed,
    })
}

pub fn make_weight_rule(
    dim: usize,
    n: usize,
    sigma_w: f64,
    sigma_b: f64,
    seed: u64,
) -> Result<WeightRule> {
    let z = normalizer(dim, sigma_w, sigma_b);
    make_weight_rule_stream(dim, n, sigma_w, sigma_b, z, seed, 0, 0)
}
