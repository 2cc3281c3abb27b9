//! Volterra kernels: pointwise values, primitives, cell weights for product
//! integration, and the resolvent of the first kind.
//!
//! Three completely monotone families are supported:
//!
//! * fractional Riemann-Liouville `K(t) = t^{α-1}/Γ(α)`, `α ∈ (1/2, 1]`,
//! * exponential sums `K(t) = Σ c_i e^{-λ_i t}`,
//! * the log kernel `K(t) = ln(1 + 1/t)`.
//!
//! All three have closed-form first and second primitives, which is what the
//! product-integration weights below are built from.

mod first_kind;
mod partition;

pub use first_kind::FirstKindTable;
pub use partition::{check_partition_conditions, MeshRule, PartitionReport, PartitionSchedule, SequenceTrend};

use statrs::function::gamma::gamma;

use crate::error::{Error, Result};
use crate::quad;

/// Kernel family and its parameters.
#[derive(Clone, Debug, PartialEq)]
pub enum KernelKind {
    Fractional { alpha: f64 },
    ExponentialSum { c: Vec<f64>, lambda: Vec<f64> },
    Log,
}

/// A Volterra kernel together with its regularity exponents.
///
/// `gamma` is the Hölder-type exponent of the kernel's increments and
/// `lambda_lb` the exponent in the small-time lower bound on `∫_0^h K²`.
/// Both are stored rather than derived; they only feed mesh checks and
/// convergence-rate tests.
#[derive(Clone, Debug, PartialEq)]
pub struct KernelSpec {
    kind: KernelKind,
    gamma: f64,
    lambda_lb: f64,
}

impl KernelSpec {
    pub fn fractional(alpha: f64) -> Result<Self> {
        if !(alpha > 0.5 && alpha <= 1.0) {
            return Err(Error::domain("alpha", format!("must lie in (1/2, 1], got {alpha}")));
        }
        let gamma = if alpha < 1.0 { alpha - 0.5 } else { 0.5 };
        Ok(Self {
            kind: KernelKind::Fractional { alpha },
            gamma,
            lambda_lb: 1.5 * gamma,
        })
    }

    pub fn exponential_sum(c: Vec<f64>, lambda: Vec<f64>) -> Result<Self> {
        if c.is_empty() || c.len() != lambda.len() {
            return Err(Error::domain(
                "c",
                format!(
                    "need matching non-empty weight/rate lists, got {} and {}",
                    c.len(),
                    lambda.len()
                ),
            ));
        }
        if c.iter().any(|&ci| !(ci > 0.0 && ci.is_finite())) {
            return Err(Error::domain("c", "all weights must be positive and finite"));
        }
        if lambda.iter().any(|&l| !(l >= 0.0 && l.is_finite())) {
            return Err(Error::domain("lambda", "all rates must be nonnegative and finite"));
        }
        Ok(Self {
            kind: KernelKind::ExponentialSum { c, lambda },
            gamma: 0.5,
            lambda_lb: 0.75,
        })
    }

    /// `K(t) = ln(1 + 1/t)`; any `gamma ∈ (0, 1/2)` is admissible.
    pub fn log(gamma: f64) -> Result<Self> {
        if !(gamma > 0.0 && gamma < 0.5) {
            return Err(Error::domain(
                "gamma",
                format!("log kernel needs gamma in (0, 1/2), got {gamma}"),
            ));
        }
        Ok(Self {
            kind: KernelKind::Log,
            gamma,
            lambda_lb: 1.5 * gamma,
        })
    }

    pub fn with_lambda_lb(mut self, lambda_lb: f64) -> Result<Self> {
        if !(lambda_lb > 0.0 && lambda_lb <= 1.5 * self.gamma + 1e-15) {
            return Err(Error::domain(
                "lambda_lb",
                format!(
                    "must lie in (0, 3·gamma/2] = (0, {}], got {lambda_lb}",
                    1.5 * self.gamma
                ),
            ));
        }
        self.lambda_lb = lambda_lb;
        Ok(self)
    }

    pub fn kind(&self) -> &KernelKind {
        &self.kind
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn lambda_lb(&self) -> f64 {
        self.lambda_lb
    }

    /// The fractional order, if this is a fractional kernel.
    pub fn alpha(&self) -> Option<f64> {
        match self.kind {
            KernelKind::Fractional { alpha } => Some(alpha),
            _ => None,
        }
    }

    /// `K(t)` for `t > 0`.
    pub fn eval(&self, t: f64) -> Result<f64> {
        if !(t > 0.0) {
            return Err(Error::domain("t", format!("kernel is evaluated on t > 0, got {t}")));
        }
        Ok(self.value(t))
    }

    pub(crate) fn value(&self, t: f64) -> f64 {
        match &self.kind {
            KernelKind::Fractional { alpha } => {
                if *alpha == 1.0 {
                    1.0
                } else {
                    t.powf(alpha - 1.0) / gamma(*alpha)
                }
            }
            KernelKind::ExponentialSum { c, lambda } => c.iter().zip(lambda).map(|(ci, li)| ci * (-li * t).exp()).sum(),
            KernelKind::Log => (1.0 / t).ln_1p(),
        }
    }

    /// `∫_0^t K(s) ds` for finite `t ≥ 0`.
    pub(crate) fn primitive(&self, t: f64) -> f64 {
        if t <= 0.0 {
            return 0.0;
        }
        match &self.kind {
            KernelKind::Fractional { alpha } => t.powf(*alpha) / gamma(alpha + 1.0),
            KernelKind::ExponentialSum { c, lambda } => c
                .iter()
                .zip(lambda)
                .map(|(ci, &li)| {
                    if li == 0.0 {
                        ci * t
                    } else {
                        ci * (-(-li * t).exp_m1()) / li
                    }
                })
                .sum(),
            KernelKind::Log => t * (1.0 / t).ln_1p() + t.ln_1p(),
        }
    }

    /// `∫_0^t ∫_0^s K(r) dr ds`, zero for `t ≤ 0`.
    pub(crate) fn second_primitive(&self, t: f64) -> f64 {
        if t <= 0.0 {
            return 0.0;
        }
        match &self.kind {
            KernelKind::Fractional { alpha } => t.powf(alpha + 1.0) / gamma(alpha + 2.0),
            KernelKind::ExponentialSum { c, lambda } => c
                .iter()
                .zip(lambda)
                .map(|(ci, &li)| {
                    if li == 0.0 {
                        0.5 * ci * t * t
                    } else {
                        // t/λ - (1 - e^{-λt})/λ²
                        ci * (li * t + (-li * t).exp_m1()) / (li * li)
                    }
                })
                .sum(),
            KernelKind::Log => 0.5 * ((1.0 + t).powi(2) * t.ln_1p() - t * t * t.ln() - t),
        }
    }

    /// `∫_0^T K`; `T` may be `f64::INFINITY`.
    pub fn l1_mass(&self, horizon: f64) -> f64 {
        if horizon.is_infinite() {
            return match &self.kind {
                KernelKind::Fractional { .. } | KernelKind::Log => f64::INFINITY,
                KernelKind::ExponentialSum { c, lambda } => {
                    if lambda.contains(&0.0) {
                        f64::INFINITY
                    } else {
                        c.iter().zip(lambda).map(|(ci, li)| ci / li).sum()
                    }
                }
            };
        }
        self.primitive(horizon)
    }

    /// `∫_a^b K` for `0 ≤ a ≤ b`, switching to Gauss-Legendre away from the
    /// origin where the primitive difference would cancel.
    pub fn cell_integral(&self, a: f64, b: f64) -> f64 {
        if b <= a {
            return 0.0;
        }
        if a >= 4.0 * (b - a) {
            quad::gauss_legendre8(|t| self.value(t), a, b)
        } else {
            self.primitive(b) - self.primitive(a)
        }
    }

    /// `∫_a^b K²` for `0 ≤ a ≤ b`.
    pub fn square_integral(&self, a: f64, b: f64) -> f64 {
        if b <= a {
            return 0.0;
        }
        if a >= 4.0 * (b - a) {
            return quad::gauss_legendre8(|t| self.value(t).powi(2), a, b);
        }
        match &self.kind {
            KernelKind::Fractional { alpha } => {
                if *alpha == 1.0 {
                    b - a
                } else {
                    let p = 2.0 * alpha - 1.0;
                    (b.powf(p) - a.powf(p)) / (p * gamma(*alpha).powi(2))
                }
            }
            KernelKind::ExponentialSum { c, lambda } => {
                let mut s = 0.0;
                for (ci, li) in c.iter().zip(lambda) {
                    for (cj, lj) in c.iter().zip(lambda) {
                        let r = li + lj;
                        s += ci
                            * cj
                            * if r == 0.0 {
                                b - a
                            } else {
                                (-r * a).exp() * (-(-r * (b - a)).exp_m1()) / r
                            };
                    }
                }
                s
            }
            KernelKind::Log => quad::integrate(|t| self.value(t).powi(2), a, b, 1e-15, 1e-12)
                .unwrap_or_else(|_| quad::gauss_legendre8(|t| self.value(t).powi(2), a, b)),
        }
    }

    /// `1/K(0+)` with the convention `1/∞ = 0`.
    pub fn k_zero_plus_inverse(&self) -> f64 {
        match &self.kind {
            KernelKind::Fractional { alpha } => {
                if *alpha == 1.0 {
                    1.0
                } else {
                    0.0
                }
            }
            KernelKind::ExponentialSum { c, .. } => 1.0 / c.iter().sum::<f64>(),
            KernelKind::Log => 0.0,
        }
    }

    /// Continuous part `L((u, v])` of the resolvent of the first kind.
    ///
    /// For the fractional kernel the density is `s^{-α}/Γ(1-α)`, so the mass
    /// is `(v^{1-α} - u^{1-α})/Γ(2-α)`. Other kernels are solved numerically
    /// from `∫_{[0,t]} K(t-s) L(ds) = 1`.
    pub fn first_kind_mass(&self, u: f64, v: f64) -> Result<f64> {
        if !(u >= 0.0) {
            return Err(Error::domain("u", format!("must be nonnegative, got {u}")));
        }
        if !(v > u) {
            return Err(Error::domain("v", format!("must exceed u = {u}, got {v}")));
        }
        if let Some(m) = self.closed_form_first_kind(u, v) {
            return Ok(m);
        }
        let table = FirstKindTable::new(self, v / first_kind::DEFAULT_CELLS as f64, first_kind::DEFAULT_CELLS)?;
        Ok(table.cumulative(v) - table.cumulative(u))
    }

    pub(crate) fn closed_form_first_kind(&self, u: f64, v: f64) -> Option<f64> {
        match self.kind {
            KernelKind::Fractional { alpha: 1.0 } => Some(0.0),
            KernelKind::Fractional { alpha } => {
                let p = 1.0 - alpha;
                Some((v.powf(p) - u.powf(p)) / gamma(2.0 - alpha))
            }
            KernelKind::ExponentialSum { ref c, ref lambda } if c.len() == 1 => {
                // c e^{-λt} has L(ds) = δ_0/c + (λ/c) ds.
                Some(lambda[0] / c[0] * (v - u))
            }
            _ => None,
        }
    }

    /// Cell averages `Δ⁻¹∫_{dΔ}^{(d+1)Δ} K`, `d = 0..n`.
    pub(crate) fn cell_averages(&self, step: f64, n: usize) -> Vec<f64> {
        (0..n)
            .map(|d| self.cell_integral(d as f64 * step, (d + 1) as f64 * step) / step)
            .collect()
    }

    /// Product-trapezoid weights for lags `d = 0..n`:
    /// `P_d = Δ⁻¹∫_{dΔ}^{(d+1)Δ}K(r)((d+1)Δ - r)dr` and
    /// `Q_d = Δ⁻¹∫_{dΔ}^{(d+1)Δ}K(r)(r - dΔ)dr`.
    ///
    /// For `f` linear between grid nodes,
    /// `∫_0^{t_i}K(t_i - s)f(s)ds = Σ_{d<i} P_d f_{i-d} + Q_d f_{i-d-1}`.
    /// Near the origin the weights come from the primitives; further out the
    /// equivalent Gauss-Legendre form avoids cancellation.
    pub(crate) fn trapezoid_weights(&self, step: f64, n: usize) -> (Vec<f64>, Vec<f64>) {
        let mut p = Vec::with_capacity(n);
        let mut q = Vec::with_capacity(n);
        for d in 0..n {
            let df = d as f64;
            if d < 4 {
                let (a, b) = (df * step, (df + 1.0) * step);
                let m0 = self.primitive(b) - self.primitive(a);
                // ∫_a^b rK(r)dr by parts
                let m1 = b * self.primitive(b)
                    - a * self.primitive(a)
                    - (self.second_primitive(b) - self.second_primitive(a));
                p.push((b * m0 - m1) / step);
                q.push((m1 - a * m0) / step);
            } else {
                p.push(step * quad::gauss_legendre8(|x| (1.0 - x) * self.value((df + x) * step), 0.0, 1.0));
                q.push(step * quad::gauss_legendre8(|x| x * self.value((df + x) * step), 0.0, 1.0));
            }
        }
        (p, q)
    }

    /// Ratios `Δ·∫_{cell d}K² / (∫_{cell d}K)² ≥ 1` used to recover the mean
    /// square of a kernel-shaped function from its cell average. Beyond
    /// `SHAPE_CELLS` cells the ratio is within 1e-7 of one and is set to one.
    pub(crate) fn shape_factors(&self, step: f64, n: usize) -> Vec<f64> {
        const SHAPE_CELLS: usize = 512;
        (0..n)
            .map(|d| {
                if d >= SHAPE_CELLS {
                    return 1.0;
                }
                let (a, b) = (d as f64 * step, (d + 1) as f64 * step);
                let m = self.cell_integral(a, b);
                if m <= 0.0 {
                    1.0
                } else {
                    (step * self.square_integral(a, b) / (m * m)).max(1.0)
                }
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    #[test]
    fn eval_examples() {
        let k = KernelSpec::fractional(1.0).unwrap();
        assert_eq!(k.eval(7.3).unwrap(), 1.0);
        let k = KernelSpec::fractional(0.75).unwrap();
        assert_relative_eq!(k.eval(1.0).unwrap(), 1.0 / gamma(0.75), max_relative = 1e-15);
        let k = KernelSpec::exponential_sum(vec![2.0], vec![3.0]).unwrap();
        assert_relative_eq!(k.eval(0.5).unwrap(), 2.0 * (-1.5f64).exp(), max_relative = 1e-15);
    }

    #[test]
    fn eval_rejects_nonpositive_time() {
        let k = KernelSpec::fractional(0.8).unwrap();
        assert!(matches!(k.eval(0.0), Err(Error::Domain { param: "t", .. })));
        assert!(KernelSpec::log(0.3).unwrap().eval(-1.0).is_err());
    }

    #[test]
    fn constructor_invariants() {
        assert!(KernelSpec::fractional(0.5).is_err());
        assert!(KernelSpec::fractional(1.01).is_err());
        assert_eq!(KernelSpec::fractional(0.8).unwrap().gamma(), 0.8 - 0.5);
        assert_eq!(KernelSpec::fractional(1.0).unwrap().gamma(), 0.5);
        assert!(KernelSpec::exponential_sum(vec![1.0, -1.0], vec![1.0, 1.0]).is_err());
        assert!(KernelSpec::exponential_sum(vec![1.0], vec![]).is_err());
        assert!(KernelSpec::log(0.5).is_err());
        let k = KernelSpec::fractional(0.8).unwrap();
        assert!(k.clone().with_lambda_lb(0.45).is_ok());
        assert!(k.with_lambda_lb(0.46).is_err());
    }

    #[test]
    fn l1_mass_examples() {
        let k = KernelSpec::fractional(0.75).unwrap();
        assert_relative_eq!(k.l1_mass(1.0), 1.0 / gamma(1.75), max_relative = 1e-14);
        let k = KernelSpec::exponential_sum(vec![1.0, 2.0], vec![1.0, 4.0]).unwrap();
        assert_relative_eq!(k.l1_mass(f64::INFINITY), 1.5, max_relative = 1e-15);
        assert!(KernelSpec::fractional(0.95)
            .unwrap()
            .l1_mass(f64::INFINITY)
            .is_infinite());
        assert!(KernelSpec::log(0.3).unwrap().l1_mass(f64::INFINITY).is_infinite());
        let k = KernelSpec::exponential_sum(vec![1.0, 2.0], vec![0.0, 4.0]).unwrap();
        assert!(k.l1_mass(f64::INFINITY).is_infinite());
    }

    #[test]
    fn primitives_match_quadrature() {
        for k in [
            KernelSpec::fractional(0.7).unwrap(),
            KernelSpec::exponential_sum(vec![1.0, 0.5], vec![2.0, 0.0]).unwrap(),
            KernelSpec::log(0.3).unwrap(),
        ] {
            for &t in &[0.01, 0.3, 2.0, 9.5] {
                let i1 = quad::integrate(|s| k.value(s), 0.0, t, 1e-14, 1e-12).unwrap();
                assert_relative_eq!(k.primitive(t), i1, max_relative = 1e-10);
                let i2 = quad::integrate(|s| k.primitive(s), 0.0, t, 1e-14, 1e-12).unwrap();
                assert_relative_eq!(k.second_primitive(t), i2, max_relative = 1e-10);
                let sq = quad::integrate(|s| k.value(s).powi(2), 0.0, t, 1e-14, 1e-12).unwrap();
                assert_relative_eq!(k.square_integral(0.0, t), sq, max_relative = 1e-9);
            }
        }
    }

    #[test]
    fn k_zero_plus_inverse_examples() {
        assert_eq!(KernelSpec::fractional(0.8).unwrap().k_zero_plus_inverse(), 0.0);
        assert_eq!(KernelSpec::fractional(1.0).unwrap().k_zero_plus_inverse(), 1.0);
        let k = KernelSpec::exponential_sum(vec![2.0, 3.0], vec![1.0, 1.0]).unwrap();
        assert_relative_eq!(k.k_zero_plus_inverse(), 0.2, max_relative = 1e-15);
        assert_eq!(KernelSpec::log(0.2).unwrap().k_zero_plus_inverse(), 0.0);
    }

    #[test]
    fn trapezoid_weights_match_quadrature() {
        for k in [KernelSpec::fractional(0.6).unwrap(), KernelSpec::log(0.3).unwrap()] {
            let step = 0.1;
            let (p, q) = k.trapezoid_weights(step, 8);
            for d in 0..8 {
                let (a, b) = (d as f64 * step, (d + 1) as f64 * step);
                let dp = quad::integrate(|r| k.value(r) * (b - r), a, b, 1e-15, 1e-12).unwrap() / step;
                let dq = quad::integrate(|r| k.value(r) * (r - a), a, b, 1e-15, 1e-12).unwrap() / step;
                assert_relative_eq!(p[d], dp, max_relative = 1e-9);
                assert_relative_eq!(q[d], dq, max_relative = 1e-9);
            }
        }
    }

    proptest! {
        #[test]
        fn fractional_mass_is_power_law(alpha in 0.51f64..1.0, t in 1e-3f64..50.0) {
            let k = KernelSpec::fractional(alpha).unwrap();
            let exact = t.powf(alpha) / gamma(alpha + 1.0);
            prop_assert!((k.l1_mass(t) - exact).abs() <= 1e-13 * exact);
        }

        #[test]
        fn kernels_are_positive_and_nonincreasing(t in 1e-4f64..20.0, h in 1e-4f64..5.0) {
            for k in [
                KernelSpec::fractional(0.65).unwrap(),
                KernelSpec::fractional(1.0).unwrap(),
                KernelSpec::exponential_sum(vec![1.0, 0.3], vec![0.5, 3.0]).unwrap(),
                KernelSpec::log(0.25).unwrap(),
            ] {
                let a = k.eval(t).unwrap();
                prop_assert!(a > 0.0);
                prop_assert!(k.eval(t + h).unwrap() <= a);
            }
        }
    }
}
