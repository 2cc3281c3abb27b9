//! Monte Carlo campaigns: estimator tables over many Euler paths, and the
//! ergodicity diagnostics (law of large numbers, asymptotic independence,
//! normality of standardized errors).
//!
//! Paths are simulated in parallel with seeds `base_seed + i`; every
//! reduction runs afterwards in path order, so results do not depend on the
//! number of threads.

mod diagnostics;
mod output;
pub mod stats;

pub use diagnostics::{
    independence_check, lln_check, normality_diagnostics, ComponentStats, IndependenceRow, LlnFunction, LlnRow,
    NormalityReport,
};
pub use output::{write_independence_csv, write_lln_csv, write_normality_csv, write_table_csv};

use std::time::{Duration, Instant};

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::estimate::{
    fisher_from_inverse_averages, mle_b_known_beta, mle_beta_known_b, mle_joint, mom_estimate, standardize_errors,
    Degeneracy, EstimateReport, EstimatorKind, ObservationSet,
};
use crate::kernels::{KernelKind, KernelSpec};
use crate::simulate::{simulate_path_with, whole_ratio, EulerWeights, Grid};
use crate::volterra::{theoretical_moments, ModelParams};

/// One Monte Carlo campaign.
#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentConfig {
    pub kernel: KernelSpec,
    pub params: ModelParams,
    pub horizon: f64,
    /// Euler step; must divide `obs_step / factor`.
    pub sim_step: f64,
    pub obs_step: f64,
    /// `m/n`, the refinement of `P_m` over `P_n`.
    pub factor: usize,
    pub n_paths: usize,
    pub base_seed: u64,
    pub estimators: Vec<EstimatorKind>,
    pub weights: EulerWeights,
}

impl ExperimentConfig {
    /// Configuration with `sim_step = obs_step / factor`, all estimators and
    /// point kernel weights.
    pub fn new(
        kernel: KernelSpec,
        params: ModelParams,
        horizon: f64,
        obs_step: f64,
        factor: usize,
        n_paths: usize,
        base_seed: u64,
    ) -> Result<Self> {
        let cfg = Self {
            kernel,
            params,
            horizon,
            sim_step: obs_step / factor.max(1) as f64,
            obs_step,
            factor,
            n_paths,
            base_seed,
            estimators: EstimatorKind::ALL.to_vec(),
            weights: EulerWeights::Point,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        self.params.validate()?;
        if self.factor == 0 {
            return Err(Error::domain("factor", "must be at least 1"));
        }
        if self.n_paths == 0 {
            return Err(Error::domain("paths", "need at least one path"));
        }
        self.obs_grid()?;
        let fine = self.obs_step / self.factor as f64;
        if whole_ratio(fine, self.sim_step).is_none() {
            return Err(Error::domain(
                "dt",
                format!("simulation step {} must divide dt_obs/factor = {fine}", self.sim_step),
            ));
        }
        self.sim_grid()?;
        Ok(())
    }

    pub fn sim_grid(&self) -> Result<Grid> {
        Grid::from_horizon(self.horizon, self.sim_step)
    }

    /// `P_n`.
    pub fn obs_grid(&self) -> Result<Grid> {
        Grid::from_horizon(self.horizon, self.obs_step).map_err(|_| {
            Error::domain(
                "dt_obs",
                format!("horizon {} is not a multiple of {}", self.horizon, self.obs_step),
            )
        })
    }

    fn alpha(&self) -> Result<f64> {
        match self.kernel.kind() {
            KernelKind::Fractional { alpha } => Ok(*alpha),
            _ => Err(Error::domain(
                "kernel",
                "the moment estimator needs the fractional kernel",
            )),
        }
    }
}

/// Statistics of one table row.
#[derive(Clone, Debug, PartialEq)]
pub struct SummaryRow {
    /// `b`, `beta`, `b_mom`, `beta_mom`, `b_given_beta` or `beta_given_b`.
    pub label: &'static str,
    pub kind: EstimatorKind,
    pub mean: f64,
    pub median: f64,
    pub std: f64,
    pub count: usize,
    pub degenerate_count: usize,
    /// Degenerate paths per cause, in a fixed order.
    pub causes: Vec<(Degeneracy, usize)>,
}

/// Moment statistics of standardized joint-MLE errors.
#[derive(Clone, Debug, PartialEq)]
pub struct StandardizedErrors {
    pub values: Vec<[f64; 2]>,
    pub fisher: [[f64; 2]; 2],
    pub normality: Option<NormalityReport>,
}

#[derive(Clone, Debug)]
pub struct ExperimentSummary {
    pub rows: Vec<SummaryRow>,
    pub n_paths: usize,
    /// Smallest value seen on each path, in path order.
    pub path_minima: Vec<f64>,
    pub standardized: Option<StandardizedErrors>,
    pub runtime: Duration,
}

impl ExperimentSummary {
    pub fn row(&self, label: &str) -> Option<&SummaryRow> {
        self.rows.iter().find(|r| r.label == label)
    }

    /// Paths with at least one zero observation.
    pub fn paths_touching_zero(&self) -> usize {
        self.path_minima.iter().filter(|&&m| m == 0.0).count()
    }
}

struct PathOutcome {
    reports: Vec<EstimateReport>,
    inverse_average: Option<f64>,
    min_value: f64,
}

fn run_path(cfg: &ExperimentConfig, sim: &Grid, n_obs: usize, i: usize) -> Result<PathOutcome> {
    let seed = cfg.base_seed.wrapping_add(i as u64);
    let path = simulate_path_with(&cfg.params, &cfg.kernel, sim, seed, cfg.weights)?;
    let obs = ObservationSet::from_path(&path, n_obs, cfg.factor)?;
    let p = &cfg.params;
    let mut reports = Vec::with_capacity(cfg.estimators.len());
    for kind in &cfg.estimators {
        reports.push(match kind {
            EstimatorKind::Mom => mom_estimate(obs.x_coarse(), p.sigma, cfg.alpha()?)?,
            EstimatorKind::MleJoint => mle_joint(&obs),
            EstimatorKind::MleBetaOnly => mle_beta_known_b(&obs, p.b),
            EstimatorKind::MleBOnly => mle_b_known_beta(&obs, p.beta),
        });
    }
    let inv = obs.inverse_occupation() / obs.horizon();
    Ok(PathOutcome {
        reports,
        inverse_average: inv.is_finite().then_some(inv),
        min_value: path.min_value(),
    })
}

const CAUSES: [Degeneracy; 5] = [
    Degeneracy::NonPositiveVariance,
    Degeneracy::NonPositiveMean,
    Degeneracy::ZeroObservation,
    Degeneracy::CauchySchwarzEquality,
    Degeneracy::ZeroOccupation,
];

fn summarize(
    label: &'static str,
    kind: EstimatorKind,
    reports: &[&EstimateReport],
    pick: fn(&EstimateReport) -> Option<f64>,
) -> SummaryRow {
    let values: Vec<f64> = reports.iter().filter_map(|r| pick(r)).collect();
    let causes = CAUSES
        .iter()
        .map(|&c| (c, reports.iter().filter(|r| r.degeneracy == Some(c)).count()))
        .filter(|&(_, n)| n > 0)
        .collect();
    SummaryRow {
        label,
        kind,
        mean: if values.is_empty() {
            f64::NAN
        } else {
            stats::mean(&values)
        },
        median: stats::median(&values),
        std: stats::std_dev(&values),
        count: values.len(),
        degenerate_count: reports.len() - values.len(),
        causes,
    }
}

/// Simulates `n_paths` paths, applies each configured estimator and
/// aggregates mean, median and standard deviation per parameter.
///
/// Rows follow the layout `b, beta` (joint MLE), `b_mom, beta_mom`,
/// `b_given_beta, beta_given_b`, restricted to the configured estimators.
/// When the joint MLE is configured and `σ > 0`, its errors are standardized
/// with a Fisher matrix whose inverse-moment entry is the average of
/// `(1/T)Σ X_u⁻¹(v - u)` over the same paths.
pub fn run_mc_table(cfg: &ExperimentConfig) -> Result<ExperimentSummary> {
    cfg.validate()?;
    let start = Instant::now();
    let sim = cfg.sim_grid()?;
    let n_obs = cfg.obs_grid()?.n_steps();
    let outcomes: Vec<PathOutcome> = (0..cfg.n_paths)
        .into_par_iter()
        .map(|i| run_path(cfg, &sim, n_obs, i))
        .collect::<Result<_>>()?;

    let mut rows = Vec::new();
    let by_kind = |kind: EstimatorKind| -> Option<Vec<&EstimateReport>> {
        let pos = cfg.estimators.iter().position(|&k| k == kind)?;
        Some(outcomes.iter().map(|o| &o.reports[pos]).collect())
    };
    for kind in [
        EstimatorKind::MleJoint,
        EstimatorKind::Mom,
        EstimatorKind::MleBOnly,
        EstimatorKind::MleBetaOnly,
    ] {
        let Some(reps) = by_kind(kind) else { continue };
        if reps.iter().all(|r| r.is_degenerate()) {
            return Err(Error::AllDegenerate {
                estimator: kind.name().to_string(),
                paths: reps.len(),
            });
        }
        match kind {
            EstimatorKind::MleJoint => {
                rows.push(summarize("b", kind, &reps, |r| r.b_hat));
                rows.push(summarize("beta", kind, &reps, |r| r.beta_hat));
            }
            EstimatorKind::Mom => {
                rows.push(summarize("b_mom", kind, &reps, |r| r.b_hat));
                rows.push(summarize("beta_mom", kind, &reps, |r| r.beta_hat));
            }
            EstimatorKind::MleBOnly => rows.push(summarize("b_given_beta", kind, &reps, |r| r.b_hat)),
            EstimatorKind::MleBetaOnly => rows.push(summarize("beta_given_b", kind, &reps, |r| r.beta_hat)),
        }
    }

    let standardized = match by_kind(EstimatorKind::MleJoint) {
        Some(reps) if cfg.params.sigma > 0.0 => {
            let inv: Vec<f64> = outcomes.iter().filter_map(|o| o.inverse_average).collect();
            let m1 = theoretical_moments(&cfg.params, &cfg.kernel)?.m1;
            if inv.is_empty() {
                None
            } else {
                let fisher = fisher_from_inverse_averages(m1, &inv)?.matrix;
                let mut values = Vec::new();
                for r in reps {
                    if let Some(z) = standardize_errors(r, &cfg.params, &fisher, cfg.horizon)? {
                        values.push(z);
                    }
                }
                let normality = normality_diagnostics(&values).ok();
                Some(StandardizedErrors {
                    values,
                    fisher,
                    normality,
                })
            }
        }
        _ => None,
    };

    Ok(ExperimentSummary {
        rows,
        n_paths: cfg.n_paths,
        path_minima: outcomes.iter().map(|o| o.min_value).collect(),
        standardized,
        runtime: start.elapsed(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small_cfg() -> ExperimentConfig {
        let k = KernelSpec::fractional(0.8).unwrap();
        let p = ModelParams::new(1.0, 1.2, -1.0, 0.6).unwrap();
        ExperimentConfig::new(k, p, 20.0, 0.1, 2, 24, 7).unwrap()
    }

    #[test]
    fn config_validation() {
        let mut cfg = small_cfg();
        cfg.sim_step = 0.03;
        assert!(matches!(cfg.validate(), Err(Error::Domain { param: "dt", .. })));
        let mut cfg = small_cfg();
        cfg.obs_step = 0.3;
        assert!(matches!(cfg.validate(), Err(Error::Domain { param: "dt_obs", .. })));
        let mut cfg = small_cfg();
        cfg.sim_step = 0.025;
        assert!(cfg.validate().is_ok());
    }

    #[test]
    fn rows_account_for_every_path() {
        let s = run_mc_table(&small_cfg()).unwrap();
        assert_eq!(s.rows.len(), 6);
        for r in &s.rows {
            assert_eq!(r.count + r.degenerate_count, 24);
        }
        let labels: Vec<_> = s.rows.iter().map(|r| r.label).collect();
        assert_eq!(
            labels,
            ["b", "beta", "b_mom", "beta_mom", "b_given_beta", "beta_given_b"]
        );
        let z = s.standardized.unwrap();
        assert_eq!(z.fisher[0][1], 1.0);
    }

    #[test]
    fn thread_count_does_not_change_results() {
        let cfg = small_cfg();
        let one = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
        let four = rayon::ThreadPoolBuilder::new().num_threads(4).build().unwrap();
        let a = one.install(|| run_mc_table(&cfg)).unwrap();
        let b = four.install(|| run_mc_table(&cfg)).unwrap();
        assert_eq!(a.rows, b.rows);
        assert_eq!(a.path_minima, b.path_minima);
    }

    #[test]
    fn all_degenerate_is_an_error() {
        // x0 = b = 0 keeps every path at zero
        let mut cfg = small_cfg();
        cfg.params = ModelParams::new(0.0, 0.0, -1.0, 0.6).unwrap();
        cfg.estimators = vec![EstimatorKind::MleJoint];
        assert!(matches!(run_mc_table(&cfg), Err(Error::AllDegenerate { ref estimator, .. }) if estimator == "mle"));
    }
}
