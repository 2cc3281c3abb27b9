use super::{resolvent_second_kind, AtomicMeasure, ModelParams};
use crate::conv::ReversedWeights;
use crate::error::{Error, Result};
use crate::kernels::KernelSpec;

/// Tolerance on negative values before a step is declared unstable.
const NEG_TOL: f64 = 1e-10;
const SHAPE_CELLS: usize = 512;

/// Cell averages of `V(·; μ)` and of `R(V)`.
#[derive(Clone, Debug)]
pub struct RiccatiSolution {
    step: f64,
    v: Vec<f64>,
    r: Vec<f64>,
}

impl RiccatiSolution {
    pub fn step(&self) -> f64 {
        self.step
    }

    /// Average of `V` over each cell `[iΔ, (i+1)Δ]`.
    pub fn values(&self) -> &[f64] {
        &self.v
    }

    /// Average of `R(V)` over each cell.
    pub fn rates(&self) -> &[f64] {
        &self.r
    }

    /// Cell midpoints, for tabulating `values` against time.
    pub fn midpoints(&self) -> Vec<f64> {
        (0..self.v.len()).map(|i| (i as f64 + 0.5) * self.step).collect()
    }

    pub fn integral(&self) -> f64 {
        self.v.iter().sum::<f64>() * self.step
    }

    pub fn rate_integral(&self) -> f64 {
        self.r.iter().sum::<f64>() * self.step
    }
}

/// Solves `V = K∗μ + K∗R(V)` with `R(x) = βx - σ²x²/2` on `n_steps` cells.
///
/// Works with the primitives `U = ∫_0^·V` and `ρ = ∫_0^·R(V)`, which satisfy
/// `U(t) = Σ u_k ∫_0^{t-s_k}K + (K∗ρ)(t)` and are continuous even where `V`
/// is not. `K∗ρ` uses product trapezoidal weights; the implicit term makes
/// each step a quadratic in the new cell average, whose nonnegative root is
/// taken in closed form. Near an atom the forcing `u·K(t - s)` varies
/// strongly within a cell, so the mean of `V²` there is corrected by the
/// forcing's within-cell variance.
pub fn riccati_solve(
    k: &KernelSpec,
    p: &ModelParams,
    mu: &AtomicMeasure,
    grid_step: f64,
    n_steps: usize,
) -> Result<RiccatiSolution> {
    p.validate()?;
    if !(grid_step > 0.0 && grid_step.is_finite()) {
        return Err(Error::domain("grid_step", format!("must be positive, got {grid_step}")));
    }
    if n_steps == 0 {
        return Err(Error::domain("n_steps", "need at least one step"));
    }
    let n = n_steps;
    let step = grid_step;
    let atoms: Vec<(f64, f64)> = mu
        .atoms()
        .iter()
        .copied()
        .filter(|&(s, u)| u > 0.0 && s < n as f64 * step)
        .collect();

    let reach = n.min(SHAPE_CELLS);
    let kbar = k.cell_averages(step, reach);
    let shape = k.shape_factors(step, reach);
    let mut spread = vec![0.0; n];
    for &(s, u) in &atoms {
        let idx = (s / step).round() as usize;
        for d in 0..reach.min(n.saturating_sub(idx)) {
            let f = u * kbar[d];
            spread[idx + d] += f * f * (shape[d] - 1.0);
        }
    }
    let forcing = |t: f64| -> f64 {
        atoms
            .iter()
            .filter(|a| a.0 < t)
            .map(|&(s, u)| u * k.primitive(t - s))
            .sum()
    };

    let (pw, qw) = k.trapezoid_weights(step, n + 1);
    let rp = ReversedWeights::new(&pw);
    let rq = ReversedWeights::new(&qw);
    let s2 = p.sigma * p.sigma;
    let a1 = 1.0 - p.beta * pw[0];
    let a2 = 0.5 * s2 * pw[0];
    let mut big_u = 0.0;
    let mut rho = Vec::with_capacity(n + 1);
    rho.push(0.0);
    let mut v = Vec::with_capacity(n);
    let mut r = Vec::with_capacity(n);
    for i in 0..n {
        let hist = qw[0] * rho[i] + rp.lagged(&rho, i + 1) + rq.lagged(&rho, i);
        let a = (forcing((i + 1) as f64 * step) + hist + pw[0] * rho[i] - big_u) / step - a2 * spread[i];
        let disc = a1 * a1 + 4.0 * a2 * a;
        if disc < 0.0 {
            return Err(Error::numerical(
                "Riccati step",
                format!("no real root at t = {:.6}; reduce grid_step", i as f64 * step),
            ));
        }
        let vi = 2.0 * a / (a1 + disc.sqrt());
        if vi < -NEG_TOL {
            return Err(Error::numerical(
                "Riccati step",
                format!("V = {vi:e} < 0 at t = {:.6}; reduce grid_step", i as f64 * step),
            ));
        }
        let vi = vi.max(0.0);
        let ri = p.beta * vi - 0.5 * s2 * (vi * vi + spread[i]);
        big_u += step * vi;
        rho.push(rho[i] + step * ri);
        v.push(vi);
        r.push(ri);
    }
    Ok(RiccatiSolution { step, v, r })
}

fn validate_times(times: &[f64], u: &[f64]) -> Result<()> {
    if times.is_empty() {
        return Err(Error::domain("times", "need at least one time"));
    }
    if times.len() != u.len() {
        return Err(Error::domain(
            "u",
            format!(
                "need one weight per time, got {} weights for {} times",
                u.len(),
                times.len()
            ),
        ));
    }
    if !(times[0] > 0.0) || times.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::domain("times", "must be positive and strictly increasing"));
    }
    if u.iter().any(|&x| !(x >= 0.0 && x.is_finite())) {
        return Err(Error::domain("u", "weights must be nonnegative"));
    }
    Ok(())
}

/// `E[exp(-Σ u_k X_{t_k})]` from the affine transform formula
/// `exp(-x0(μ(ℝ₊) + ∫R(V)) - b∫V)` with `μ = Σ u_k δ_{t_n - t_k}`.
///
/// The grid step is adjusted down so that `t_n` is a grid node.
pub fn laplace_fdd(k: &KernelSpec, p: &ModelParams, times: &[f64], u: &[f64], grid_step: f64) -> Result<f64> {
    validate_times(times, u)?;
    if !(grid_step > 0.0) {
        return Err(Error::domain("grid_step", format!("must be positive, got {grid_step}")));
    }
    let t_n = *times.last().unwrap_or(&0.0);
    let n = ((t_n / grid_step).ceil() as usize).max(1);
    let step = t_n / n as f64;
    let mu = AtomicMeasure::new(times.iter().zip(u).map(|(&t, &w)| (t_n - t, w)).collect())?;
    if mu.total_mass() == 0.0 {
        return Ok(1.0);
    }
    let sol = riccati_solve(k, p, &mu, step, n)?;
    let exponent = p.x0 * (mu.total_mass() + sol.rate_integral()) + p.b * sol.integral();
    Ok((-exponent).exp())
}

/// Controls for [`stationary_laplace`].
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StationaryOptions {
    pub grid_step: f64,
    /// Stop once the value moves by less than this between horizon doublings.
    pub tol: f64,
    pub initial_horizon: f64,
    /// Defaults to `10⁴/|β|` when `None`.
    pub horizon_cap: Option<f64>,
}

impl Default for StationaryOptions {
    fn default() -> Self {
        Self {
            grid_step: 0.01,
            tol: 1e-7,
            initial_horizon: 20.0,
            horizon_cap: None,
        }
    }
}

/// Laplace transform `∫e^{-ux}π(dx)` of the limit law, from
/// `exp(-x0(u + ∫_0^∞R(V̄)) - b∫_0^∞V̄)` with `V̄ = V(·; uδ_0)`.
///
/// For large `t`, `V̄` is proportional to `E_β`, so the integrals beyond the
/// horizon `T` are estimated as `A·(∫_0^∞E_β - ∫_0^TE_β)` with `A` the ratio
/// of the last cell averages and `∫_0^∞E_β = 1/(‖K‖⁻¹ + |β|)`. The quadratic
/// part of `R` is dropped in the tail. The horizon doubles until the value
/// settles.
pub fn stationary_laplace(k: &KernelSpec, p: &ModelParams, u: f64, opts: &StationaryOptions) -> Result<f64> {
    p.validate()?;
    if !(u >= 0.0 && u.is_finite()) {
        return Err(Error::domain("u", format!("must be nonnegative, got {u}")));
    }
    if u == 0.0 {
        return Ok(1.0);
    }
    if !(opts.tol > 0.0) {
        return Err(Error::domain("tol", format!("must be positive, got {}", opts.tol)));
    }
    let cap = opts.horizon_cap.unwrap_or(1e4 / p.beta.abs());
    let norm = k.l1_mass(f64::INFINITY);
    let e_total = 1.0 / (1.0 / norm + p.beta.abs());
    let mu = AtomicMeasure::single(0.0, u)?;
    let mut horizon = opts.initial_horizon.min(cap);
    let mut prev: Option<f64> = None;
    loop {
        let n = ((horizon / opts.grid_step).round() as usize).max(8);
        let sol = riccati_solve(k, p, &mu, opts.grid_step, n)?;
        let table = resolvent_second_kind(k, p.beta, opts.grid_step, n)?;
        let e_last = table.e_beta()[n - 1];
        let ratio = if e_last > 0.0 {
            sol.values()[n - 1] / e_last
        } else {
            0.0
        };
        let tail_v = ratio * (e_total - table.cum_int()[n]).max(0.0);
        let int_v = sol.integral() + tail_v;
        let int_r = sol.rate_integral() + p.beta * tail_v;
        let value = (-(p.x0 * (u + int_r) + p.b * int_v)).exp();
        if let Some(pv) = prev {
            if (value - pv).abs() < opts.tol {
                return Ok(value);
            }
        }
        prev = Some(value);
        if horizon >= cap {
            return Err(Error::numerical(
                "stationary Laplace transform",
                format!("no convergence to tol {} by horizon cap {cap}", opts.tol),
            ));
        }
        horizon = (2.0 * horizon).min(cap);
    }
}
