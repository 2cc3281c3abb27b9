use super::{c_alpha, ModelParams};
use crate::conv::ReversedWeights;
use crate::error::{Error, Result};
use crate::kernels::{KernelKind, KernelSpec};
use statrs::function::gamma::gamma;

/// Largest table the tail-convergence loops will build.
const MAX_TAIL_CELLS: usize = 1 << 18;

/// Resolvent `E_β` of `E = K + βK∗E` on a uniform grid.
///
/// `e_beta[i]` is the average of `E_β` over cell `[iΔ, (i+1)Δ]`; the other
/// arrays are indexed by grid node `kΔ`, `k = 0..=n`.
#[derive(Clone, Debug)]
pub struct ResolventTable {
    step: f64,
    beta: f64,
    e_beta: Vec<f64>,
    script_e: Vec<f64>,
    cum_int: Vec<f64>,
    cum_int_sq: Vec<f64>,
    shape: Vec<f64>,
}

impl ResolventTable {
    pub fn step(&self) -> f64 {
        self.step
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    /// Number of cells.
    pub fn len(&self) -> usize {
        self.e_beta.len()
    }

    pub fn is_empty(&self) -> bool {
        self.e_beta.is_empty()
    }

    pub fn horizon(&self) -> f64 {
        self.step * self.len() as f64
    }

    pub fn e_beta(&self) -> &[f64] {
        &self.e_beta
    }

    /// `𝓔_β(kΔ) = 1 + β∫_0^{kΔ}E_β`.
    pub fn script_e(&self) -> &[f64] {
        &self.script_e
    }

    pub fn cum_int(&self) -> &[f64] {
        &self.cum_int
    }

    pub fn cum_int_sq(&self) -> &[f64] {
        &self.cum_int_sq
    }

    fn check_time(&self, t: f64) -> Result<()> {
        if !(t >= 0.0) {
            return Err(Error::domain("t", format!("must be nonnegative, got {t}")));
        }
        if t > self.horizon() * (1.0 + 1e-12) {
            return Err(Error::Range {
                param: "t",
                value: t,
                horizon: self.horizon(),
            });
        }
        Ok(())
    }

    /// `∫_0^t E_β`, exact for the piecewise-constant representation.
    pub fn integral_at(&self, t: f64) -> Result<f64> {
        self.check_time(t)?;
        Ok(interpolate(&self.cum_int, t / self.step))
    }
}

fn interpolate(nodes: &[f64], x: f64) -> f64 {
    let last = nodes.len() - 1;
    if x >= last as f64 {
        return nodes[last];
    }
    let i = x.floor() as usize;
    let w = x - i as f64;
    nodes[i] + w * (nodes[i + 1] - nodes[i])
}

/// Leading terms of the Neumann series removed analytically for the
/// fractional kernel.
const SINGULAR_TERMS: i32 = 2;

/// Solves for `E_β` through its primitive `F = ∫_0^·E_β`, which satisfies
/// `F = ∫_0^·K + βK∗F` and is continuous.
///
/// `F` is approximated by product trapezoidal integration (exact kernel
/// moments against hat functions). For the fractional kernel the leading
/// terms `Σ_{j≤m} β^{j-1}t^{jα}/Γ(jα+1)` are taken in closed form, so the
/// numerical remainder starts at order `t^{(m+1)α}` and the scheme keeps its
/// accuracy near the singularity. Cell averages are differences of `F`.
pub fn resolvent_second_kind(k: &KernelSpec, beta: f64, step: f64, n: usize) -> Result<ResolventTable> {
    if !(beta < 0.0 && beta.is_finite()) {
        return Err(Error::domain("beta", format!("must be negative, got {beta}")));
    }
    if !(step > 0.0 && step.is_finite()) {
        return Err(Error::domain("grid_step", format!("must be positive, got {step}")));
    }
    if n == 0 {
        return Err(Error::domain("n_steps", "need at least one step"));
    }
    let singular_alpha = match k.kind() {
        KernelKind::Fractional { alpha } if *alpha < 1.0 => Some(*alpha),
        _ => None,
    };
    let leading = |t: f64| match singular_alpha {
        Some(a) => (1..=SINGULAR_TERMS)
            .map(|j| beta.powi(j - 1) * t.powf(j as f64 * a) / gamma(j as f64 * a + 1.0))
            .sum(),
        None => 0.0,
    };
    let forcing = |t: f64| match singular_alpha {
        Some(a) => {
            let e = (SINGULAR_TERMS + 1) as f64 * a;
            beta.powi(SINGULAR_TERMS) * t.powf(e) / gamma(e + 1.0)
        }
        None => k.primitive(t),
    };

    let (pw, qw) = k.trapezoid_weights(step, n + 1);
    let rp = ReversedWeights::new(&pw);
    let rq = ReversedWeights::new(&qw);
    let denom = 1.0 - beta * pw[0];
    let mut h = Vec::with_capacity(n + 1);
    h.push(0.0);
    for i in 1..=n {
        let hist = qw[0] * h[i - 1] + rp.lagged(&h, i) + rq.lagged(&h, i - 1);
        h.push((forcing(i as f64 * step) + beta * hist) / denom);
    }
    let cum_int: Vec<f64> = h
        .iter()
        .enumerate()
        .map(|(i, hi)| leading(i as f64 * step) + hi)
        .collect();
    let e: Vec<f64> = cum_int.windows(2).map(|w| (w[1] - w[0]) / step).collect();
    let shape = k.shape_factors(step, n);
    let mut cum_int_sq = Vec::with_capacity(n + 1);
    let mut a2 = 0.0;
    cum_int_sq.push(0.0);
    for (ei, rho) in e.iter().zip(&shape) {
        a2 += ei * ei * rho * step;
        cum_int_sq.push(a2);
    }
    let script_e = cum_int.iter().map(|c| 1.0 + beta * c).collect();
    Ok(ResolventTable {
        step,
        beta,
        e_beta: e,
        script_e,
        cum_int,
        cum_int_sq,
        shape,
    })
}

/// `∫_0^∞E_β` and `∫_0^∞E_β²` from tables of doubling horizon.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TailIntegrals {
    pub integral: f64,
    pub square_integral: f64,
    /// Horizon of the last table built.
    pub horizon: f64,
}

/// Value at the last node plus a geometric extrapolation of the remaining tail
/// from the increments over the last two halvings of the horizon.
fn extrapolate(cum: &[f64]) -> f64 {
    let n = cum.len() - 1;
    let d1 = cum[n / 2] - cum[n / 4];
    let d2 = cum[n] - cum[n / 2];
    let r = d2 / d1;
    if d1 > 0.0 && r > 0.0 && r < 0.95 {
        cum[n] + d2 * r / (1.0 - r)
    } else {
        cum[n]
    }
}

/// Grows the horizon until the extrapolated `∫E_β²` (and `∫E_β` when `K` is
/// integrable) change by less than `tol` between doublings.
///
/// For kernels with infinite mass `∫E_β` tends to `1/|β|` too slowly for a
/// table to capture; it is then reported as the extrapolated estimate at the
/// final horizon without a convergence guarantee.
pub fn resolvent_integrals(k: &KernelSpec, beta: f64, step: f64, tol: f64) -> Result<TailIntegrals> {
    if !(tol > 0.0) {
        return Err(Error::domain("tol", format!("must be positive, got {tol}")));
    }
    let scale = match k.kind() {
        KernelKind::Fractional { alpha } => beta.abs().powf(-1.0 / alpha),
        _ => 1.0 / beta.abs(),
    };
    let check_integral = k.l1_mass(f64::INFINITY).is_finite();
    let mut n = ((16.0 * scale / step).ceil() as usize).max(64);
    let mut prev: Option<(f64, f64)> = None;
    loop {
        let table = resolvent_second_kind(k, beta, step, n)?;
        let i1 = extrapolate(&table.cum_int);
        let i2 = extrapolate(&table.cum_int_sq);
        if let Some((p1, p2)) = prev {
            if (i2 - p2).abs() < tol && (!check_integral || (i1 - p1).abs() < tol) {
                return Ok(TailIntegrals {
                    integral: i1,
                    square_integral: i2,
                    horizon: table.horizon(),
                });
            }
        }
        prev = Some((i1, i2));
        n *= 2;
        if n > MAX_TAIL_CELLS {
            return Err(Error::numerical(
                "resolvent tail",
                format!(
                    "integrals still moving at horizon {}; use a coarser step",
                    table.horizon()
                ),
            ));
        }
    }
}

/// `∫_0^∞E_β²`: `C_α|β|^{1/α-2}` for the fractional kernel, otherwise from
/// tail-converged tables.
pub fn square_integral_to_infinity(k: &KernelSpec, beta: f64) -> Result<f64> {
    if !(beta < 0.0) {
        return Err(Error::domain("beta", format!("must be negative, got {beta}")));
    }
    match k.kind() {
        KernelKind::Fractional { alpha } => Ok(c_alpha(*alpha)? * beta.abs().powf(1.0 / alpha - 2.0)),
        KernelKind::ExponentialSum { c, lambda } => {
            let csum: f64 = c.iter().sum();
            let rate = (beta.abs() * csum)
                .max(lambda.iter().cloned().fold(0.0, f64::max))
                .max(beta.abs());
            Ok(resolvent_integrals(k, beta, 0.01 / rate, 1e-8)?.square_integral)
        }
        KernelKind::Log => Ok(resolvent_integrals(k, beta, 0.01 / beta.abs().max(1.0), 1e-7)?.square_integral),
    }
}

/// First two stationary moments.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Moments {
    pub m1: f64,
    pub m2: f64,
}

/// `m1 = (x0 + ‖K‖b)/(1 + ‖K‖|β|)` (`b/|β|` when `‖K‖ = ∞`) and
/// `m2 = m1² + m1σ²∫_0^∞E_β²`.
pub fn theoretical_moments(p: &ModelParams, k: &KernelSpec) -> Result<Moments> {
    p.validate()?;
    let norm = k.l1_mass(f64::INFINITY);
    let m1 = if norm.is_infinite() {
        p.b / p.beta.abs()
    } else {
        (p.x0 + norm * p.b) / (1.0 + norm * p.beta.abs())
    };
    let m2 = if p.sigma == 0.0 {
        m1 * m1
    } else {
        m1 * m1 + m1 * p.sigma * p.sigma * square_integral_to_infinity(k, p.beta)?
    };
    Ok(Moments { m1, m2 })
}

/// Mean `𝓔_β(t)x0 + b∫_0^tE_β` and variance `σ²∫_0^tE_β(t-s)²E[X_s]ds`.
///
/// The variance is a discrete convolution over the table cells, with the
/// kernel shape correction on the near-diagonal cells; off-grid times are
/// interpolated linearly between nodes.
pub fn mean_variance_at(p: &ModelParams, table: &ResolventTable, t: f64) -> Result<(f64, f64)> {
    table.check_time(t)?;
    if (p.beta - table.beta).abs() > 1e-12 * p.beta.abs() {
        return Err(Error::domain(
            "beta",
            format!("table was built for beta = {}, params have {}", table.beta, p.beta),
        ));
    }
    let mean_node = |i: usize| table.script_e[i] * p.x0 + p.b * table.cum_int[i];
    let var_node = |i: usize| {
        if p.sigma == 0.0 {
            return 0.0;
        }
        let mut s = 0.0;
        for j in 0..i {
            let d = i - 1 - j;
            let m = 0.5 * (mean_node(j) + mean_node(j + 1));
            s += table.e_beta[d] * table.e_beta[d] * table.shape[d] * m;
        }
        p.sigma * p.sigma * s * table.step
    };
    let x = (t / table.step).min(table.len() as f64);
    let i = x.floor() as usize;
    let w = x - i as f64;
    let mean = table.script_e_interp(x) * p.x0 + p.b * interpolate(&table.cum_int, x);
    let var = if w < 1e-12 || i == table.len() {
        var_node(i)
    } else {
        (1.0 - w) * var_node(i) + w * var_node(i + 1)
    };
    Ok((mean, var))
}

impl ResolventTable {
    fn script_e_interp(&self, x: f64) -> f64 {
        interpolate(&self.script_e, x)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::volterra::mittag_leffler;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    /// Cell averages of `t^{α-1}E_{α,α}(βt^α)` via its primitive `t^αE_{α,α+1}(βt^α)`.
    fn closed_form_averages(alpha: f64, beta: f64, step: f64, n: usize) -> Vec<f64> {
        let prim = |t: f64| {
            if t == 0.0 {
                0.0
            } else {
                t.powf(alpha) * mittag_leffler(alpha, alpha + 1.0, beta * t.powf(alpha)).unwrap()
            }
        };
        let nodes: Vec<f64> = (0..=n).map(|i| prim(i as f64 * step)).collect();
        nodes.windows(2).map(|w| (w[1] - w[0]) / step).collect()
    }

    fn max_rel_error(alpha: f64, step: f64, horizon: f64) -> f64 {
        let n = (horizon / step).round() as usize;
        let k = KernelSpec::fractional(alpha).unwrap();
        let table = resolvent_second_kind(&k, -1.0, step, n).unwrap();
        let exact = closed_form_averages(alpha, -1.0, step, n);
        table.e_beta()[1..]
            .iter()
            .zip(&exact[1..])
            .map(|(a, b)| ((a - b) / b).abs())
            .fold(0.0, f64::max)
    }

    #[test]
    fn exponential_resolvent_first_cell() {
        let k = KernelSpec::fractional(1.0).unwrap();
        let step = 1e-3;
        let table = resolvent_second_kind(&k, -1.0, step, 10).unwrap();
        assert_relative_eq!(table.e_beta()[0], -(-step).exp_m1() / step, max_relative = 1e-6);
    }

    #[test]
    fn fractional_matches_mittag_leffler() {
        let step = 1e-3;
        let k = KernelSpec::fractional(0.75).unwrap();
        let table = resolvent_second_kind(&k, -1.0, step, 1000).unwrap();
        // cell ending at t = 1 against E_{0.75,0.75}(-1) at the cell's end
        let exact = closed_form_averages(0.75, -1.0, step, 1000);
        assert_relative_eq!(table.e_beta()[999], exact[999], max_relative = 1e-3);
        let point = mittag_leffler(0.75, 0.75, -1.0).unwrap();
        assert_relative_eq!(table.e_beta()[999], point, max_relative = 2e-3);
    }

    #[test]
    fn error_decreases_under_refinement() {
        for &alpha in &[0.6, 0.8] {
            let e1 = max_rel_error(alpha, 0.02, 2.0);
            let e2 = max_rel_error(alpha, 0.01, 2.0);
            assert!(e1 / e2 >= 1.8, "alpha={alpha}: {e1} -> {e2}");
        }
    }

    #[test]
    fn integrable_kernel_identity() {
        let k = KernelSpec::exponential_sum(vec![1.0], vec![1.0]).unwrap();
        let tail = resolvent_integrals(&k, -2.0, 1e-3, 1e-8).unwrap();
        assert!((tail.integral - 1.0 / 3.0).abs() < 1e-4, "{}", tail.integral);
        let k = KernelSpec::exponential_sum(vec![1.0, 2.0], vec![0.5, 4.0]).unwrap();
        let norm = k.l1_mass(f64::INFINITY);
        let tail = resolvent_integrals(&k, -2.0, 1e-3, 1e-8).unwrap();
        assert!(
            (tail.integral - 1.0 / (1.0 / norm + 2.0)).abs() < 1e-4,
            "{}",
            tail.integral
        );
    }

    #[test]
    fn square_integral_matches_c_alpha() {
        let k = KernelSpec::fractional(0.8).unwrap();
        let tail = resolvent_integrals(&k, -1.0, 2e-3, 1e-7).unwrap();
        let c = c_alpha(0.8).unwrap();
        assert!(
            (tail.square_integral - c).abs() < 1e-4,
            "{} vs {}",
            tail.square_integral,
            c
        );
    }

    #[test]
    fn moments_examples() {
        let p = ModelParams::new(1.0, 1.2, -1.0, 0.6).unwrap();
        let m = theoretical_moments(&p, &KernelSpec::fractional(0.95).unwrap()).unwrap();
        assert_relative_eq!(m.m1, 1.2, max_relative = 1e-15);
        assert_relative_eq!(m.m2, 1.44 + 0.432 * 0.50332092798038960366, max_relative = 1e-9);
        let p = ModelParams::new(0.0, 1.0, -1.0, 0.5).unwrap();
        let m = theoretical_moments(&p, &KernelSpec::exponential_sum(vec![1.0], vec![1.0]).unwrap()).unwrap();
        assert_relative_eq!(m.m1, 0.5, max_relative = 1e-15);
        // E_β = e^{-2t}: ∫E² = 1/4
        assert_relative_eq!(m.m2, 0.25 + 0.5 * 0.25 * 0.25, max_relative = 1e-4);
    }

    #[test]
    fn cir_mean_and_variance() {
        let k = KernelSpec::fractional(1.0).unwrap();
        let p = ModelParams::new(1.0, 1.2, -1.0, 0.5).unwrap();
        let table = resolvent_second_kind(&k, -1.0, 1e-3, 3000).unwrap();
        let (m, v) = mean_variance_at(&p, &table, 1.0).unwrap();
        let e = (-1.0f64).exp();
        assert!((m - (e + 1.2 * (1.0 - e))).abs() < 1e-6, "{m}");
        assert!((m - 1.126424).abs() < 1e-6);
        let exact_v = 0.25 * (e - e * e) + 1.2 * 0.25 / 2.0 * (1.0 - e).powi(2);
        assert_relative_eq!(v, exact_v, max_relative = 1e-3);
        let (m3, _) = mean_variance_at(&p, &table, 3.0).unwrap();
        assert!((m3 - 1.2).abs() < 0.01);
        assert!(matches!(mean_variance_at(&p, &table, 3.5), Err(Error::Range { .. })));
        let p0 = ModelParams { sigma: 0.0, ..p };
        assert_eq!(mean_variance_at(&p0, &table, 2.0).unwrap().1, 0.0);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]
        #[test]
        fn table_invariants(alpha in 0.55f64..1.0, beta in -3.0f64..-0.2) {
            let k = KernelSpec::fractional(alpha).unwrap();
            let t = resolvent_second_kind(&k, beta, 0.01, 400).unwrap();
            for w in t.e_beta().windows(2) {
                prop_assert!(w[1] >= 0.0 && w[1] <= w[0]);
            }
            for (s, c) in t.script_e().iter().zip(t.cum_int()) {
                prop_assert!((s - 1.0 - beta * c).abs() <= 1e-12);
            }
            prop_assert!(t.cum_int_sq().windows(2).all(|w| w[1] >= w[0]));
        }
    }
}
