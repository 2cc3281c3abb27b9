//! Euler simulation of the VCIR process with absolute-value reflection, and
//! the discretized observations `X^{P_n}` and `Z^{P_m}` built from a path.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::conv::ReversedWeights;
use crate::error::{Error, Result};
use crate::kernels::{FirstKindTable, KernelSpec};
use crate::volterra::ModelParams;

/// Uniform time grid `t_k = kΔ`, `k = 0..=n`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Grid {
    step: f64,
    n_steps: usize,
}

impl Grid {
    pub fn new(step: f64, n_steps: usize) -> Result<Self> {
        if !(step > 0.0 && step.is_finite()) {
            return Err(Error::domain("step", format!("must be positive, got {step}")));
        }
        if n_steps == 0 {
            return Err(Error::domain("n_steps", "need at least one step"));
        }
        Ok(Self { step, n_steps })
    }

    /// Grid with `n = T/Δ` steps; `T` must be a whole number of steps.
    pub fn from_horizon(horizon: f64, step: f64) -> Result<Self> {
        if !(horizon > 0.0 && horizon.is_finite()) {
            return Err(Error::domain("horizon", format!("must be positive, got {horizon}")));
        }
        let n = whole_ratio(horizon, step).ok_or_else(|| {
            Error::domain(
                "step",
                format!("horizon {horizon} is not a whole number of steps {step}"),
            )
        })?;
        Self::new(step, n)
    }

    pub fn step(&self) -> f64 {
        self.step
    }

    pub fn n_steps(&self) -> usize {
        self.n_steps
    }

    pub fn horizon(&self) -> f64 {
        self.step * self.n_steps as f64
    }

    pub fn node(&self, k: usize) -> f64 {
        k as f64 * self.step
    }
}

/// `a/b` when it is a positive integer up to rounding.
pub(crate) fn whole_ratio(a: f64, b: f64) -> Option<usize> {
    if !(b > 0.0) {
        return None;
    }
    let r = a / b;
    let n = r.round();
    if n >= 1.0 && (r - n).abs() <= 1e-9 * n.max(1.0) {
        Some(n as usize)
    } else {
        None
    }
}

/// How the kernel enters the Euler sums.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum EulerWeights {
    /// Point values `K(t_{k+1} - t_i)`.
    #[default]
    Point,
    /// Cell average of `K` over `[t_i, t_{i+1}]` for the drift and its root
    /// mean square for the noise, so each noise term has the exact one-cell
    /// conditional variance.
    CellExact,
}

/// One simulated trajectory.
#[derive(Clone, Debug)]
pub struct Path {
    grid: Grid,
    values: Vec<f64>,
    params: ModelParams,
    kernel: KernelSpec,
    seed: u64,
}

impl Path {
    /// Wraps externally produced values, e.g. a path read back from CSV.
    /// `x0` is taken from `values[0]`.
    pub fn from_values(grid: Grid, values: Vec<f64>, params: ModelParams, kernel: KernelSpec) -> Result<Self> {
        if values.len() != grid.n_steps + 1 {
            return Err(Error::domain(
                "values",
                format!(
                    "need {} values for {} steps, got {}",
                    grid.n_steps + 1,
                    grid.n_steps,
                    values.len()
                ),
            ));
        }
        if values.iter().any(|&x| !(x >= 0.0 && x.is_finite())) {
            return Err(Error::domain("values", "path values must be finite and nonnegative"));
        }
        let params = ModelParams {
            x0: values[0],
            ..params
        };
        Ok(Self {
            grid,
            values,
            params,
            kernel,
            seed: 0,
        })
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    /// `X̂_k` at the grid nodes, `values[0] = x0`.
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn params(&self) -> &ModelParams {
        &self.params
    }

    pub fn kernel(&self) -> &KernelSpec {
        &self.kernel
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn min_value(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }
}

/// Euler path with point kernel weights.
pub fn simulate_path(p: &ModelParams, k: &KernelSpec, g: &Grid, seed: u64) -> Result<Path> {
    simulate_path_with(p, k, g, seed, EulerWeights::Point)
}

/// `X̂_{k+1} = |x0 + Δ Σ_{i≤k} w_{k+1-i}(b + βX̂_i) + σ√Δ Σ_{i≤k} w'_{k+1-i}√X̂_i ξ_{i+1}|`
/// with `ξ` drawn from a ChaCha8 stream keyed by `seed`.
pub fn simulate_path_with(p: &ModelParams, k: &KernelSpec, g: &Grid, seed: u64, weights: EulerWeights) -> Result<Path> {
    p.validate()?;
    let n = g.n_steps;
    let dt = g.step;
    // lag d = k+1-i runs over 1..=n; index 0 is never read
    let (wd, wn): (Vec<f64>, Vec<f64>) = match weights {
        EulerWeights::Point => {
            let w: Vec<f64> = (0..=n)
                .map(|d| if d == 0 { 0.0 } else { k.value(d as f64 * dt) })
                .collect();
            (w.clone(), w)
        }
        EulerWeights::CellExact => (0..=n)
            .map(|d| {
                if d == 0 {
                    (0.0, 0.0)
                } else {
                    let (a, b) = ((d - 1) as f64 * dt, d as f64 * dt);
                    (k.cell_integral(a, b) / dt, (k.square_integral(a, b) / dt).sqrt())
                }
            })
            .unzip(),
    };
    let rd = ReversedWeights::new(&wd);
    let rn = ReversedWeights::new(&wn);

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let noise_scale = p.sigma * dt.sqrt();
    let mut values = Vec::with_capacity(n + 1);
    let mut drift = Vec::with_capacity(n);
    let mut noise = Vec::with_capacity(n);
    values.push(p.x0);
    for i in 0..n {
        let x = values[i];
        let xi: f64 = StandardNormal.sample(&mut rng);
        drift.push(p.b + p.beta * x);
        noise.push(x.sqrt() * xi);
        let next = p.x0 + dt * rd.lagged_from_one(&drift, i) + noise_scale * rn.lagged_from_one(&noise, i);
        values.push(next.abs());
    }
    Ok(Path {
        grid: *g,
        values,
        params: *p,
        kernel: k.clone(),
        seed,
    })
}

fn stride(path: &Path, n_coarse: usize, name: &'static str) -> Result<usize> {
    let n = path.grid.n_steps;
    if n_coarse == 0 || !n.is_multiple_of(n_coarse) {
        return Err(Error::domain(
            name,
            format!("{n_coarse} does not divide the {n} simulation steps"),
        ));
    }
    Ok(n / n_coarse)
}

/// `X^{P_n}`: the path at the left endpoint of each of `n_coarse` cells.
pub fn coarsen(path: &Path, n_coarse: usize) -> Result<Vec<f64>> {
    let r = stride(path, n_coarse, "n_coarse")?;
    Ok((0..n_coarse).map(|j| path.values[j * r]).collect())
}

/// `Z^{P_m}` at the `m_steps + 1` nodes of the uniform partition `P_m`:
/// `Z_u = Σ_{v' ≤ u} (X_{u-u'} - x0) L((u', v']) + K(0+)⁻¹(X_u - x0)`.
pub fn z_process(path: &Path, k: &KernelSpec, m_steps: usize) -> Result<Vec<f64>> {
    let r = stride(path, m_steps, "m_steps")?;
    let h = path.grid.step * r as f64;
    let x0 = path.params.x0;
    let table = FirstKindTable::new(k, h, m_steps)?;
    // w[d] = L((d-1)h, dh]) so that lagged(y, j+1) = Σ_{q≤j} L_{j-q} y_q
    let mut w = Vec::with_capacity(m_steps + 2);
    w.push(0.0);
    w.extend(table.cell_masses());
    w.push(0.0);
    let rw = ReversedWeights::new(&w);
    let y: Vec<f64> = (0..=m_steps).map(|j| path.values[j * r] - x0).collect();
    Ok((0..=m_steps)
        .map(|j| rw.lagged(&y, j + 1) + table.atom() * y[j])
        .collect())
}

/// `Z^{P_n}` at the horizon.
pub fn z_terminal(path: &Path, k: &KernelSpec, n_steps: usize) -> Result<f64> {
    let r = stride(path, n_steps, "n_steps")?;
    let h = path.grid.step * r as f64;
    let x0 = path.params.x0;
    let table = FirstKindTable::new(k, h, n_steps)?;
    let masses = table.cell_masses();
    let n = n_steps;
    let sum: f64 = (0..n).map(|l| (path.values[(n - l) * r] - x0) * masses[l]).sum();
    Ok(sum + table.atom() * (path.values[n * r] - x0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::volterra::{mean_variance_at, resolvent_second_kind};

    fn params(sigma: f64) -> ModelParams {
        ModelParams::new(1.0, 1.2, -1.0, sigma).unwrap()
    }

    #[test]
    fn grid_from_horizon() {
        let g = Grid::from_horizon(500.0, 0.05).unwrap();
        assert_eq!(g.n_steps(), 10_000);
        assert!((g.horizon() - 500.0).abs() < 1e-9);
        assert!(Grid::from_horizon(1.0, 0.3).is_err());
        assert!(Grid::new(0.0, 3).is_err());
    }

    #[test]
    fn deterministic_markov_path_follows_ode() {
        let k = KernelSpec::fractional(1.0).unwrap();
        let g = Grid::new(1e-3, 1000).unwrap();
        let path = simulate_path(&params(0.0), &k, &g, 7).unwrap();
        // x0 e^{βt} + b(1 - e^{βt})/|β| at t = 1
        let exact = (-1.0f64).exp() + 1.2 * (1.0 - (-1.0f64).exp());
        assert!((path.values()[1000] - exact).abs() < 1e-3);
        assert!((exact - 1.126424).abs() < 1e-6);
    }

    #[test]
    fn deterministic_fractional_path_tracks_mean() {
        let k = KernelSpec::fractional(0.95).unwrap();
        let p = params(0.0);
        let table = resolvent_second_kind(&k, -1.0, 1e-3, 3000).unwrap();
        for (weights, tol) in [(EulerWeights::Point, 2e-2), (EulerWeights::CellExact, 2e-3)] {
            let path = simulate_path_with(&p, &k, &Grid::new(1e-3, 3000).unwrap(), 1, weights).unwrap();
            for &t in &[0.5, 1.5, 3.0] {
                let (mean, var) = mean_variance_at(&p, &table, t).unwrap();
                assert_eq!(var, 0.0);
                let x = path.values()[(t / 1e-3).round() as usize];
                assert!((x - mean).abs() < tol, "{weights:?} t={t}: {x} vs {mean}");
            }
        }
    }

    #[test]
    fn zero_is_absorbing() {
        let k = KernelSpec::fractional(0.8).unwrap();
        let p = ModelParams::new(0.0, 0.0, -1.0, 0.6).unwrap();
        let path = simulate_path(&p, &k, &Grid::new(0.01, 200).unwrap(), 3).unwrap();
        assert!(path.values().iter().all(|&x| x == 0.0));
    }

    #[test]
    fn reproducible_and_nonnegative() {
        let k = KernelSpec::fractional(0.6).unwrap();
        let g = Grid::new(0.01, 500).unwrap();
        let a = simulate_path(&params(0.8), &k, &g, 42).unwrap();
        let b = simulate_path(&params(0.8), &k, &g, 42).unwrap();
        let c = simulate_path(&params(0.8), &k, &g, 43).unwrap();
        assert_eq!(a.values(), b.values());
        assert_ne!(a.values(), c.values());
        assert!(a.values().iter().all(|&x| x >= 0.0));
        assert_eq!(a.values()[0], 1.0);
    }

    #[test]
    fn coarsen_picks_left_endpoints() {
        let k = KernelSpec::fractional(0.8).unwrap();
        let path = simulate_path(&params(0.6), &k, &Grid::new(0.01, 100).unwrap(), 5).unwrap();
        assert_eq!(coarsen(&path, 100).unwrap(), path.values()[..100].to_vec());
        let c = coarsen(&path, 20).unwrap();
        for (j, x) in c.iter().enumerate() {
            assert_eq!(*x, path.values()[j * 5]);
        }
        assert!(matches!(
            coarsen(&path, 30),
            Err(Error::Domain { param: "n_coarse", .. })
        ));
    }

    #[test]
    fn markov_z_is_shifted_path() {
        let k = KernelSpec::fractional(1.0).unwrap();
        let path = simulate_path(&params(0.6), &k, &Grid::new(0.01, 100).unwrap(), 9).unwrap();
        let z = z_process(&path, &k, 50).unwrap();
        for (j, zj) in z.iter().enumerate() {
            assert_eq!(*zj, path.values()[2 * j] - 1.0);
        }
        assert_eq!(z_terminal(&path, &k, 25).unwrap(), path.values()[100] - 1.0);
    }

    #[test]
    fn constant_path_has_zero_z() {
        let k = KernelSpec::fractional(0.7).unwrap();
        // x0 = b/|β| with σ = 0 is a fixed point of the scheme
        let p = ModelParams::new(1.2, 1.2, -1.0, 0.0).unwrap();
        let path = simulate_path(&p, &k, &Grid::new(0.01, 100).unwrap(), 0).unwrap();
        let z = z_process(&path, &k, 100).unwrap();
        assert!(z.iter().all(|v| v.abs() < 1e-12));
    }

    #[test]
    fn deterministic_z_is_drift_integral() {
        // σ = 0: Z_t = ∫_0^t (b + βX_s) ds
        let k = KernelSpec::fractional(0.75).unwrap();
        let p = params(0.0);
        let g = Grid::new(1e-3, 4000).unwrap();
        let path = simulate_path_with(&p, &k, &g, 0, EulerWeights::CellExact).unwrap();
        let z = z_process(&path, &k, 400).unwrap();
        let drift: Vec<f64> = path.values().iter().map(|x| p.b + p.beta * x).collect();
        for &j in &[100usize, 200, 400] {
            let upto = j * 10;
            let integral: f64 = drift[..=upto].windows(2).map(|w| 0.5 * (w[0] + w[1])).sum::<f64>() * 1e-3;
            assert!((z[j] - integral).abs() < 0.02, "j={j}: {} vs {integral}", z[j]);
        }
    }
}
