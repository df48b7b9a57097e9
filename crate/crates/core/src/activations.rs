//! Activation functions φ and their ridgelet companions ψ.
//!
//! Each supported activation ships with the closed-form ψ that makes the
//! admissibility normalisation `(2π)^{d/2} ∫ |ξ|^{-d} conj(ψ̂) φ̂ dξ = 1`
//! hold exactly, per input dimension `d ∈ {1, 2, 3}`. All ψ are finite
//! combinations of Gaussian derivatives, evaluated through the probabilists'
//! Hermite recurrence — no numerical differentiation anywhere.

use std::f64::consts::PI;
use std::sync::Arc;

use crate::error::{Error, Result};

/// Largest Gaussian-derivative order; Hermite coefficients stay well inside
/// f64 range up to this order.
pub const MAX_DERIVATIVE_ORDER: usize = 32;

/// Probabilists' Hermite polynomial `He_n(z)` by the three-term recurrence.
pub fn hermite_he(n: usize, z: f64) -> f64 {
    match n {
        0 => 1.0,
        1 => z,
        _ => {
            let mut prev = 1.0;
            let mut cur = z;
            for k in 1..n {
                let next = z * cur - k as f64 * prev;
                prev = cur;
                cur = next;
            }
            cur
        }
    }
}

/// `dⁿ/dzⁿ exp(-z²/2) = (-1)ⁿ Heₙ(z) exp(-z²/2)`.
pub fn gaussian_derivative(n: usize, z: f64) -> Result<f64> {
    if n > MAX_DERIVATIVE_ORDER {
        return Err(Error::DerivativeOrder {
            order: n,
            max: MAX_DERIVATIVE_ORDER,
        });
    }
    let sign = if n % 2 == 0 { 1.0 } else { -1.0 };
    Ok(sign * hermite_he(n, z) * (-z * z / 2.0).exp())
}

/// Largest derivative order any shipped ψ uses (ReLU at d = 3).
const MAX_PSI_ORDER: usize = 6;

/// Gaussian derivatives of order `0..=n` at `z` in one recurrence pass,
/// on the stack (ψ evaluation is the hot loop of Ψ assembly).
fn gaussian_derivatives_upto(n: usize, z: f64) -> [f64; MAX_PSI_ORDER + 1] {
    debug_assert!(n <= MAX_PSI_ORDER);
    let g = (-z * z / 2.0).exp();
    let mut out = [0.0; MAX_PSI_ORDER + 1];
    let mut prev = 1.0; // He_0
    out[0] = g;
    if n == 0 {
        return out;
    }
    let mut cur = z; // He_1
    out[1] = -cur * g;
    for k in 1..n {
        let next = z * cur - k as f64 * prev;
        prev = cur;
        cur = next;
        let sign = if (k + 1) % 2 == 0 { 1.0 } else { -1.0 };
        out[k + 1] = sign * cur * g;
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ActivationKind {
    Tanh,
    Relu,
    Gaussian,
}

impl ActivationKind {
    pub fn parse(name: &str) -> Result<Self> {
        match name {
            "tanh" => Ok(ActivationKind::Tanh),
            "relu" => Ok(ActivationKind::Relu),
            "gaussian" => Ok(ActivationKind::Gaussian),
            other => Err(Error::UnknownName {
                kind: "activation",
                name: other.to_string(),
            }),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            ActivationKind::Tanh => "tanh",
            ActivationKind::Relu => "relu",
            ActivationKind::Gaussian => "gaussian",
        }
    }
}

/// An activation φ together with the ridgelet function ψ for a fixed input
/// dimension.
pub trait ActivationPair: Send + Sync {
    fn kind(&self) -> ActivationKind;
    fn input_dim(&self) -> usize;
    fn phi(&self, z: f64) -> f64;
    fn psi(&self, z: f64) -> f64;

    fn name(&self) -> &'static str {
        self.kind().name()
    }
}

fn check_dim(d: usize) -> Result<()> {
    if !(1..=3).contains(&d) {
        return Err(Error::invalid(
            "input_dimension",
            format!("supported dimensions are 1..=3, got {d}"),
        ));
    }
    Ok(())
}

fn parity_sign(half: usize) -> f64 {
    if half % 2 == 0 {
        1.0
    } else {
        -1.0
    }
}

/// tanh paired with ψ built from derivatives of `exp(-z²/2) sin(πz/2)`.
pub struct TanhPair {
    dim: usize,
    order: usize,
    prefactor: f64,
    binomial: Vec<f64>,
}

impl TanhPair {
    pub fn new(dim: usize) -> Result<Self> {
        check_dim(dim)?;
        let r = 1 - dim % 2;
        let order = dim + 1 + r;
        let prefactor = parity_sign(order / 2)
            * (PI * PI / 8.0).exp()
            * (2.0 / PI).powf(r as f64 / 2.0)
            * (2.0 * PI).powf(-((dim + 1) as f64) / 2.0);
        let mut binomial = vec![1.0f64];
        for k in 0..order {
            binomial.push(binomial[k] * (order - k) as f64 / (k + 1) as f64);
        }
        Ok(TanhPair {
            dim,
            order,
            prefactor,
            binomial,
        })
    }
}

impl ActivationPair for TanhPair {
    fn kind(&self) -> ActivationKind {
        ActivationKind::Tanh
    }
    fn input_dim(&self) -> usize {
        self.dim
    }
    fn phi(&self, z: f64) -> f64 {
        z.tanh()
    }
    fn psi(&self, z: f64) -> f64 {
        // Leibniz expansion of D^n [exp(-z²/2) sin(πz/2)]; sine derivatives
        // cycle through {sin, cos, -sin, -cos} with chain factor (π/2)^m.
        let half = PI / 2.0;
        let gd = gaussian_derivatives_upto(self.order, z);
        let (s, c) = (half * z).sin_cos();
        let cycle = [s, c, -s, -c];
        let mut total = 0.0;
        let mut half_pow = 1.0;
        for m in 0..=self.order {
            let k = self.order - m;
            total += self.binomial[k] * gd[k] * half_pow * cycle[m % 4];
            half_pow *= half;
        }
        self.prefactor * total
    }
}

/// ReLU paired with a pure Gaussian-derivative ψ.
pub struct ReluPair {
    dim: usize,
    order: usize,
    prefactor: f64,
}

impl ReluPair {
    pub fn new(dim: usize) -> Result<Self> {
        check_dim(dim)?;
        let r = dim % 2;
        let order = dim + r + 2;
        let tail = if r == 0 { (2.0 * PI).sqrt() } else { 2.0 };
        let prefactor =
            -parity_sign(order / 2) * (2.0 * PI).powf(-((dim - 1) as f64) / 2.0) / tail;
        Ok(ReluPair {
            dim,
            order,
            prefactor,
        })
    }
}

impl ActivationPair for ReluPair {
    fn kind(&self) -> ActivationKind {
        ActivationKind::Relu
    }
    fn input_dim(&self) -> usize {
        self.dim
    }
    fn phi(&self, z: f64) -> f64 {
        z.max(0.0)
    }
    fn psi(&self, z: f64) -> f64 {
        let sign = if self.order % 2 == 0 { 1.0 } else { -1.0 };
        self.prefactor * sign * hermite_he(self.order, z) * (-z * z / 2.0).exp()
    }
}

/// Gaussian activation `exp(-z²/2)` paired with a Gaussian-derivative ψ.
pub struct GaussianPair {
    dim: usize,
    order: usize,
    prefactor: f64,
}

impl GaussianPair {
    pub fn new(dim: usize) -> Result<Self> {
        check_dim(dim)?;
        let r = dim % 2;
        let order = dim + r;
        // Γ((r+1)/2) is √π for r = 0, 1 for r = 1.
        let gamma_half = if r == 0 { PI.sqrt() } else { 1.0 };
        let prefactor = parity_sign(order / 2) * (2.0 * PI).powf(-(dim as f64) / 2.0) / gamma_half;
        Ok(GaussianPair {
            dim,
            order,
            prefactor,
        })
    }
}

impl ActivationPair for GaussianPair {
    fn kind(&self) -> ActivationKind {
        ActivationKind::Gaussian
    }
    fn input_dim(&self) -> usize {
        self.dim
    }
    fn phi(&self, z: f64) -> f64 {
        (-z * z / 2.0).exp()
    }
    fn psi(&self, z: f64) -> f64 {
        let sign = if self.order % 2 == 0 { 1.0 } else { -1.0 };
        self.prefactor * sign * hermite_he(self.order, z) * (-z * z / 2.0).exp()
    }
}

/// Build an activation/ψ pair by kind for the given input dimension.
pub fn make_activation(kind: ActivationKind, dim: usize) -> Result<Arc<dyn ActivationPair>> {
    Ok(match kind {
        ActivationKind::Tanh => Arc::new(TanhPair::new(dim)?),
        ActivationKind::Relu => Arc::new(ReluPair::new(dim)?),
        ActivationKind::Gaussian => Arc::new(GaussianPair::new(dim)?),
    })
}

/// Name-based lookup, as used by the CLI config (`"tanh" | "relu" | "gaussian"`).
pub fn make_activation_by_name(name: &str, dim: usize) -> Result<Arc<dyn ActivationPair>> {
    make_activation(ActivationKind::parse(name)?, dim)
}

#[cfg(test)]
mod tests {
    use super::*;

    const ALL: [ActivationKind; 3] = [
        ActivationKind::Tanh,
        ActivationKind::Relu,
        ActivationKind::Gaussian,
    ];

    #[test]
    fn phi_basic_values() {
        let t = TanhPair::new(1).unwrap();
        let r = ReluPair::new(1).unwrap();
        let g = GaussianPair::new(1).unwrap();
        assert_eq!(t.phi(0.0), 0.0);
        assert_eq!(r.phi(-3.0), 0.0);
        assert_eq!(g.phi(0.0), 1.0);
    }

    #[test]
    fn gaussian_derivative_values() {
        assert!((gaussian_derivative(0, 1.0).unwrap() - (-0.5f64).exp()).abs() < 1e-15);
        assert!((gaussian_derivative(2, 0.0).unwrap() + 1.0).abs() < 1e-15);
        assert_eq!(gaussian_derivative(1, 0.0).unwrap(), 0.0);
        assert!(gaussian_derivative(33, 0.0).is_err());
    }

    #[test]
    fn gaussian_derivative_matches_finite_differences() {
        // d/dz gd(n-1) == gd(n), checked by central differences
        let h = 1e-5;
        for n in 1..=8 {
            let mut z = -4.0;
            while z <= 4.0 {
                let fd = (gaussian_derivative(n - 1, z + h).unwrap()
                    - gaussian_derivative(n - 1, z - h).unwrap())
                    / (2.0 * h);
                let exact = gaussian_derivative(n, z).unwrap();
                let scale = exact.abs().max(1e-3);
                assert!(
                    (fd - exact).abs() / scale < 1e-5,
                    "n={n} z={z}: fd={fd} exact={exact}"
                );
                z += 0.31;
            }
        }
    }

    #[test]
    fn hermite_recurrence_oracle_he4() {
        // He4(z) = z^4 - 6z^2 + 3
        assert_eq!(hermite_he(4, 0.0), 3.0);
        let z = 1.7;
        assert!((hermite_he(4, z) - (z.powi(4) - 6.0 * z * z + 3.0)).abs() < 1e-12);
    }

    #[test]
    fn relu_psi_at_zero_d1() {
        // prefactor -1/2 times 4th Gaussian derivative: -1/2 * He4(0) = -3/2
        let p = ReluPair::new(1).unwrap();
        assert!((p.psi(0.0) + 1.5).abs() < 1e-14, "{}", p.psi(0.0));
    }

    #[test]
    fn gaussian_psi_at_zero_d1() {
        // second Gaussian derivative at 0 is -1; prefactor -(2π)^{-1/2}
        let p = GaussianPair::new(1).unwrap();
        assert!((p.psi(0.0) - 1.0 / (2.0 * PI).sqrt()).abs() < 1e-14);
    }

    /// High-order central finite differences of F(z)=exp(-z²/2)sin(πz/2),
    /// an oracle for the Leibniz expansion inside `TanhPair::psi`.
    fn tanh_psi_by_finite_differences(dim: usize, z: f64) -> f64 {
        let pair = TanhPair::new(dim).unwrap();
        let n = pair.order;
        let f = |x: f64| (-x * x / 2.0).exp() * (PI * x / 2.0).sin();
        // n-th derivative via iterated central differences on a stencil
        let h = 1e-2;
        let mut vals: Vec<f64> = (-(n as i64)..=(n as i64))
            .map(|i| f(z + i as f64 * h))
            .collect();
        for _ in 0..n {
            vals = vals
                .windows(3)
                .step_by(1)
                .map(|w| (w[2] - w[0]) / (2.0 * h))
                .collect();
        }
        pair.prefactor * vals[vals.len() / 2]
    }

    #[test]
    fn tanh_psi_matches_finite_difference_oracle() {
        for dim in 1..=3 {
            let pair = TanhPair::new(dim).unwrap();
            for z in [0.7, -1.3, 2.1] {
                let exact = pair.psi(z);
                let fd = tanh_psi_by_finite_differences(dim, z);
                // stencil rounding floor is ~eps/h^n; 5e-3 absolute on a O(1) function
                assert!(
                    (exact - fd).abs() < 5e-3 * exact.abs().max(1.0),
                    "d={dim} z={z}: exact={exact} fd={fd}"
                );
            }
        }
    }

    #[test]
    fn tanh_psi_is_odd() {
        // derivative order d+1+r is always even and the base product is odd
        for dim in 1..=3 {
            let pair = TanhPair::new(dim).unwrap();
            for z in [0.7, 1.9, 4.2] {
                assert!(
                    (pair.psi(z) + pair.psi(-z)).abs() < 1e-12 * pair.psi(z).abs().max(1e-12),
                    "d={dim} z={z}"
                );
            }
        }
    }

    #[test]
    fn psi_decays_like_schwartz() {
        for kind in ALL {
            for dim in 1..=3 {
                let pair = make_activation(kind, dim).unwrap();
                let inner_max = (0..=2400)
                    .map(|i| pair.psi(-12.0 + i as f64 * 0.01).abs())
                    .fold(0.0f64, f64::max);
                let outer_max = (0..=1600)
                    .map(|i| {
                        let z = 12.0 + i as f64 * 0.005;
                        pair.psi(z).abs().max(pair.psi(-z).abs())
                    })
                    .fold(0.0f64, f64::max);
                assert!(
                    outer_max <= 1e-6 * inner_max,
                    "{} d={dim}: outer {outer_max} inner {inner_max}",
                    kind.name()
                );
            }
        }
    }

    #[test]
    fn phi_lipschitz_bounds_by_slope_sampling() {
        let h = 1e-6;
        for (kind, bound) in [
            (ActivationKind::Tanh, 1.0),
            (ActivationKind::Relu, 1.0),
            (ActivationKind::Gaussian, (-0.5f64).exp()),
        ] {
            let pair = make_activation(kind, 1).unwrap();
            let mut worst: f64 = 0.0;
            let mut z = -10.0;
            while z <= 10.0 {
                let slope = (pair.phi(z + h) - pair.phi(z - h)) / (2.0 * h);
                worst = worst.max(slope.abs());
                z += 0.01;
            }
            assert!(worst <= bound + 1e-6, "{}: {worst} > {bound}", kind.name());
        }
    }

    #[test]
    fn dimension_guard() {
        for kind in ALL {
            assert!(make_activation(kind, 0).is_err());
            assert!(make_activation(kind, 4).is_err());
            assert!(make_activation(kind, 2).is_ok());
        }
        assert!(make_activation_by_name("sigmoid", 1).is_err());
        assert!(make_activation_by_name("relu", 1).is_ok());
    }
}
