use rayon::prelude::*;

use super::{stats, ExperimentConfig};
use crate::error::{Error, Result};
use crate::estimate::fisher_info;
use crate::simulate::{simulate_path_with, whole_ratio};
use crate::volterra::{laplace_fdd, theoretical_moments};

/// Function whose time average is tracked by [`lln_check`].
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum LlnFunction {
    Identity,
    Square,
    Reciprocal,
}

impl LlnFunction {
    pub fn name(self) -> &'static str {
        match self {
            Self::Identity => "identity",
            Self::Square => "square",
            Self::Reciprocal => "reciprocal",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        [Self::Identity, Self::Square, Self::Reciprocal]
            .into_iter()
            .find(|f| f.name() == s)
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LlnRow {
    pub horizon: f64,
    pub average: f64,
    pub target: f64,
    /// Grid values equal to zero, skipped by the reciprocal average.
    pub zero_count: usize,
}

/// Checkpoints in the time-average schedule: the horizon halved up to seven
/// times, never below 100 steps.
const LLN_HALVINGS: u32 = 7;

/// Time averages `(1/T)Σ f(X_i)Δ` along the single path with seed
/// `base_seed`, at a geometric schedule of horizons ending at `cfg.horizon`.
///
/// Targets are the stationary moments `m1`, `m2`, or for `X⁻¹` the Monte
/// Carlo Fisher entry over `n_paths` further paths (seeds from
/// `base_seed + 1`).
pub fn lln_check(cfg: &ExperimentConfig, f: LlnFunction) -> Result<Vec<LlnRow>> {
    cfg.params.validate()?;
    let grid = cfg.sim_grid()?;
    let path = simulate_path_with(&cfg.params, &cfg.kernel, &grid, cfg.base_seed, cfg.weights)?;
    let target = match f {
        LlnFunction::Identity => theoretical_moments(&cfg.params, &cfg.kernel)?.m1,
        LlnFunction::Square => theoretical_moments(&cfg.params, &cfg.kernel)?.m2,
        LlnFunction::Reciprocal => {
            fisher_info(
                &cfg.params,
                &cfg.kernel,
                cfg.n_paths,
                cfg.horizon,
                cfg.sim_step,
                cfg.base_seed.wrapping_add(1),
            )?
            .matrix[0][0]
        }
    };
    let n = grid.n_steps();
    let mut checkpoints: Vec<usize> = (0..=LLN_HALVINGS)
        .map(|j| n >> j)
        .filter(|&c| c >= 100.min(n))
        .collect();
    checkpoints.dedup();
    checkpoints.reverse();
    let xs = path.values();
    Ok(checkpoints
        .into_iter()
        .map(|c| {
            let window = &xs[..c];
            let (terms, zeros): (Vec<f64>, usize) = match f {
                LlnFunction::Identity => (window.to_vec(), 0),
                LlnFunction::Square => (window.iter().map(|x| x * x).collect(), 0),
                LlnFunction::Reciprocal => {
                    let t: Vec<f64> = window.iter().filter(|&&x| x > 0.0).map(|x| 1.0 / x).collect();
                    let z = c - t.len();
                    (t, z)
                }
            };
            LlnRow {
                horizon: c as f64 * grid.step(),
                average: stats::pairwise_sum(&terms) / (c - zeros).max(1) as f64,
                target,
                zero_count: zeros,
            }
        })
        .collect())
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct IndependenceRow {
    pub lag: f64,
    /// Monte Carlo `E[e^{-u1 X_L - u2 X_{2L}}]`.
    pub joint_mc: f64,
    pub product_mc: f64,
    pub gap_mc: f64,
    /// Standard error of `joint_mc - product_mc`.
    pub se_mc: f64,
    pub joint_riccati: f64,
    pub product_riccati: f64,
    pub gap_riccati: f64,
}

/// Largest grid step used for the Riccati side of [`independence_check`].
const RICCATI_STEP: f64 = 0.01;

/// Gap `|E[e^{-u1X_t - u2X_{t+L}}] - E[e^{-u1X_t}]E[e^{-u2X_{t+L}}]|` at
/// `t = L`, by Monte Carlo over `n_paths` paths on `[0, cfg.horizon]` and by
/// the Riccati transform formula.
pub fn independence_check(cfg: &ExperimentConfig, u1: f64, u2: f64, lags: &[f64]) -> Result<Vec<IndependenceRow>> {
    cfg.params.validate()?;
    if !(u1 >= 0.0 && u2 >= 0.0) {
        return Err(Error::domain("u", "weights must be nonnegative"));
    }
    let grid = cfg.sim_grid()?;
    let mut idx = Vec::with_capacity(lags.len());
    for &lag in lags {
        let i = whole_ratio(lag, grid.step())
            .ok_or_else(|| Error::domain("lags", format!("lag {lag} is not a whole number of steps")))?;
        if 2 * i > grid.n_steps() {
            return Err(Error::domain("lags", format!("lag {lag} needs horizon {}", 2.0 * lag)));
        }
        idx.push(i);
    }
    let samples: Vec<Vec<(f64, f64)>> = (0..cfg.n_paths)
        .into_par_iter()
        .map(|i| {
            let path = simulate_path_with(
                &cfg.params,
                &cfg.kernel,
                &grid,
                cfg.base_seed.wrapping_add(i as u64),
                cfg.weights,
            )?;
            let x = path.values();
            Ok(idx
                .iter()
                .map(|&l| ((-u1 * x[l]).exp(), (-u2 * x[2 * l]).exp()))
                .collect())
        })
        .collect::<Result<_>>()?;

    let step = grid.step().min(RICCATI_STEP);
    let mut rows = Vec::with_capacity(lags.len());
    for (j, &lag) in lags.iter().enumerate() {
        let a: Vec<f64> = samples.iter().map(|s| s[j].0).collect();
        let b: Vec<f64> = samples.iter().map(|s| s[j].1).collect();
        let (ma, mb) = (stats::mean(&a), stats::mean(&b));
        let psi: Vec<f64> = a.iter().zip(&b).map(|(x, y)| (x - ma) * (y - mb)).collect();
        let ab: Vec<f64> = a.iter().zip(&b).map(|(x, y)| x * y).collect();
        let joint_mc = stats::mean(&ab);
        let product_mc = ma * mb;
        let se_mc = stats::std_dev(&psi) / (psi.len() as f64).sqrt();

        let k = &cfg.kernel;
        let p = &cfg.params;
        let joint_riccati = laplace_fdd(k, p, &[lag, 2.0 * lag], &[u1, u2], step)?;
        let product_riccati = laplace_fdd(k, p, &[lag], &[u1], step)? * laplace_fdd(k, p, &[2.0 * lag], &[u2], step)?;
        rows.push(IndependenceRow {
            lag,
            joint_mc,
            product_mc,
            gap_mc: (joint_mc - product_mc).abs(),
            se_mc,
            joint_riccati,
            product_riccati,
            gap_riccati: (joint_riccati - product_riccati).abs(),
        });
    }
    Ok(rows)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ComponentStats {
    pub mean: f64,
    pub std: f64,
    pub skewness: f64,
    pub excess_kurtosis: f64,
    /// Kolmogorov-Smirnov distance to `N(0, 1)`.
    pub ks: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct NormalityReport {
    pub n: usize,
    pub components: [ComponentStats; 2],
    /// Lower edges of the histogram bins.
    pub bin_edges: Vec<f64>,
    /// Counts per bin for each component; values outside the range are not
    /// counted.
    pub counts: Vec<[usize; 2]>,
}

impl NormalityReport {
    /// Asymptotic 5% Kolmogorov-Smirnov critical value `1.36/√n`.
    pub fn ks_critical(&self) -> f64 {
        1.36 / (self.n as f64).sqrt()
    }

    pub fn passes_ks(&self) -> bool {
        self.components.iter().all(|c| c.ks < self.ks_critical())
    }
}

pub const HIST_BINS: usize = 30;
pub const HIST_RANGE: (f64, f64) = (-4.0, 4.0);

/// Per-component moments, KS distance and a histogram on `[-4, 4]`.
pub fn normality_diagnostics(standardized: &[[f64; 2]]) -> Result<NormalityReport> {
    if standardized.len() < 30 {
        return Err(Error::domain(
            "standardized",
            format!("need at least 30 samples, got {}", standardized.len()),
        ));
    }
    let (lo, hi) = HIST_RANGE;
    let width = (hi - lo) / HIST_BINS as f64;
    let mut counts = vec![[0usize; 2]; HIST_BINS];
    let comp = |c: usize| -> ComponentStats {
        let x: Vec<f64> = standardized.iter().map(|v| v[c]).collect();
        let (skewness, excess_kurtosis) = stats::skew_kurtosis(&x);
        ComponentStats {
            mean: stats::mean(&x),
            std: stats::std_dev(&x),
            skewness,
            excess_kurtosis,
            ks: stats::ks_standard_normal(&x),
        }
    };
    for v in standardized {
        for c in 0..2 {
            if v[c] >= lo && v[c] < hi {
                let b = (((v[c] - lo) / width) as usize).min(HIST_BINS - 1);
                counts[b][c] += 1;
            }
        }
    }
    Ok(NormalityReport {
        n: standardized.len(),
        components: [comp(0), comp(1)],
        bin_edges: (0..HIST_BINS).map(|b| lo + b as f64 * width).collect(),
        counts,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernels::KernelSpec;
    use crate::volterra::ModelParams;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, StandardNormal};

    #[test]
    fn normality_of_gaussian_draws() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let x: Vec<[f64; 2]> = (0..10_000)
            .map(|_| [StandardNormal.sample(&mut rng), StandardNormal.sample(&mut rng)])
            .collect();
        let r = normality_diagnostics(&x).unwrap();
        assert!(r.passes_ks());
        for c in r.components {
            assert!(c.ks < 0.02 && c.mean.abs() < 0.05 && (c.std - 1.0).abs() < 0.05);
        }
        let inside: usize = r.counts.iter().map(|c| c[0]).sum();
        assert!(inside > 9_990);
    }

    #[test]
    fn constant_input_is_flagged() {
        let r = normality_diagnostics(&vec![[0.0, 0.0]; 50]).unwrap();
        assert_eq!(r.components[0].std, 0.0);
        assert!((r.components[0].ks - 0.5).abs() < 1e-12);
        assert!(!r.passes_ks());
        assert!(normality_diagnostics(&vec![[0.0, 0.0]; 29]).is_err());
    }

    fn cfg(sigma: f64, horizon: f64) -> ExperimentConfig {
        let k = KernelSpec::fractional(0.8).unwrap();
        let p = ModelParams::new(1.0, 1.2, -1.0, sigma).unwrap();
        ExperimentConfig::new(k, p, horizon, 0.05, 1, 20, 1).unwrap()
    }

    #[test]
    fn zero_weights_give_zero_gap() {
        let rows = independence_check(&cfg(0.6, 4.0), 0.0, 0.0, &[1.0, 2.0]).unwrap();
        for r in rows {
            assert_eq!(r.gap_mc, 0.0);
            assert_eq!(r.gap_riccati, 0.0);
        }
        assert!(independence_check(&cfg(0.6, 4.0), 1.0, 1.0, &[3.0]).is_err());
    }

    #[test]
    fn deterministic_lln_approaches_first_moment() {
        let rows = lln_check(&cfg(0.0, 200.0), LlnFunction::Identity).unwrap();
        assert_eq!(rows.last().unwrap().horizon, 200.0);
        let last = rows.last().unwrap();
        assert!((last.average - 1.2).abs() < 0.01, "{last:?}");
        assert!(rows.windows(2).all(|w| w[1].horizon > w[0].horizon));
    }
}
