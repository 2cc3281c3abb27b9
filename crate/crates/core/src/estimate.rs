//! Drift estimators for `(b, β)` with `σ` and the kernel known: method of
//! moments, the discretized joint MLE, the two single-parameter MLEs, and the
//! Fisher information that standardizes their errors.

use crate::error::{Error, Result};
use crate::kernels::KernelSpec;
use crate::simulate::{coarsen, simulate_path, z_process, z_terminal, Grid, Path};
use crate::volterra::{c_alpha, theoretical_moments, ModelParams};

/// Relative size of `|D|` against `t_n²` below which the joint MLE is
/// declared degenerate.
const CS_TOL: f64 = 1e-10;
/// Relative size of the sample variance against `m1²` below which the
/// moment equations have no solution.
const VAR_TOL: f64 = 1e-12;

/// Discrete observations of one path: `X` on `P_n`, `Z` on the finer `P_m`.
#[derive(Clone, Debug)]
pub struct ObservationSet {
    x_coarse: Vec<f64>,
    z_fine: Vec<f64>,
    z_terminal: f64,
    n_partition: Grid,
    m_partition: Grid,
    sigma: f64,
    kernel: KernelSpec,
}

impl ObservationSet {
    /// `x_coarse` has one value per `P_n` cell, `z_fine` one per `P_m` node,
    /// and `z_terminal` is `Z^{P_n}` at the horizon.
    pub fn new(
        x_coarse: Vec<f64>,
        z_fine: Vec<f64>,
        z_terminal: f64,
        n_partition: Grid,
        m_partition: Grid,
        sigma: f64,
        kernel: KernelSpec,
    ) -> Result<Self> {
        if !m_partition.n_steps().is_multiple_of(n_partition.n_steps()) {
            return Err(Error::domain("m_partition", "P_m must refine P_n"));
        }
        if (m_partition.horizon() - n_partition.horizon()).abs() > 1e-9 * n_partition.horizon() {
            return Err(Error::domain("m_partition", "P_m and P_n must share the horizon"));
        }
        if x_coarse.len() != n_partition.n_steps() {
            return Err(Error::domain("x_coarse", "need one value per P_n cell"));
        }
        if z_fine.len() != m_partition.n_steps() + 1 {
            return Err(Error::domain("z_fine", "need one value per P_m node"));
        }
        if x_coarse.iter().any(|&x| !(x >= 0.0)) {
            return Err(Error::domain("x_coarse", "observations must be nonnegative"));
        }
        // σ only enters standardization; σ = 0 paths are valid deterministic oracles
        if !(sigma >= 0.0) {
            return Err(Error::domain("sigma", format!("must be nonnegative, got {sigma}")));
        }
        Ok(Self {
            x_coarse,
            z_fine,
            z_terminal,
            n_partition,
            m_partition,
            sigma,
            kernel,
        })
    }

    /// Observes `path` on `n_obs` equal cells, with `Z` on `factor·n_obs`.
    pub fn from_path(path: &Path, n_obs: usize, factor: usize) -> Result<Self> {
        if factor == 0 {
            return Err(Error::domain("factor", "must be at least 1"));
        }
        let k = path.kernel();
        let m = n_obs * factor;
        let horizon = path.grid().horizon();
        let n_partition = Grid::new(horizon / n_obs as f64, n_obs)?;
        let m_partition = Grid::new(horizon / m as f64, m)?;
        Self::new(
            coarsen(path, n_obs)?,
            z_process(path, k, m)?,
            z_terminal(path, k, n_obs)?,
            n_partition,
            m_partition,
            path.params().sigma,
            k.clone(),
        )
    }

    pub fn x_coarse(&self) -> &[f64] {
        &self.x_coarse
    }

    pub fn z_fine(&self) -> &[f64] {
        &self.z_fine
    }

    pub fn z_terminal(&self) -> f64 {
        self.z_terminal
    }

    pub fn n_partition(&self) -> &Grid {
        &self.n_partition
    }

    pub fn m_partition(&self) -> &Grid {
        &self.m_partition
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    pub fn kernel(&self) -> &KernelSpec {
        &self.kernel
    }

    pub fn horizon(&self) -> f64 {
        self.n_partition.horizon()
    }

    /// `Σ X_u(v - u)`.
    pub fn occupation(&self) -> f64 {
        self.x_coarse.iter().sum::<f64>() * self.n_partition.step()
    }

    /// `Σ X_u⁻¹(v - u)`, infinite if some `X_u = 0`.
    pub fn inverse_occupation(&self) -> f64 {
        self.x_coarse.iter().map(|x| 1.0 / x).sum::<f64>() * self.n_partition.step()
    }

    /// `Σ X_u⁻¹(Z^{P_m}_v - Z^{P_m}_u)`.
    pub fn inverse_dz(&self) -> f64 {
        let r = self.m_partition.n_steps() / self.n_partition.n_steps();
        self.x_coarse
            .iter()
            .enumerate()
            .map(|(j, x)| (self.z_fine[(j + 1) * r] - self.z_fine[j * r]) / x)
            .sum()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum EstimatorKind {
    Mom,
    MleJoint,
    MleBetaOnly,
    MleBOnly,
}

impl EstimatorKind {
    pub const ALL: [EstimatorKind; 4] = [Self::MleJoint, Self::Mom, Self::MleBOnly, Self::MleBetaOnly];

    pub fn name(self) -> &'static str {
        match self {
            Self::Mom => "mom",
            Self::MleJoint => "mle",
            Self::MleBetaOnly => "mle_beta_given_b",
            Self::MleBOnly => "mle_b_given_beta",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|k| k.name() == s)
    }
}

/// Why an estimator returned no value.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Degeneracy {
    /// Sample variance not positive.
    NonPositiveVariance,
    /// Sample mean not positive.
    NonPositiveMean,
    /// An observation equals zero, so `X⁻¹` is undefined.
    ZeroObservation,
    /// `t_n² = S_X·S_inv` up to tolerance.
    CauchySchwarzEquality,
    /// `Σ X_u(v - u) = 0`.
    ZeroOccupation,
}

impl Degeneracy {
    pub fn name(self) -> &'static str {
        match self {
            Self::NonPositiveVariance => "nonpositive_variance",
            Self::NonPositiveMean => "nonpositive_mean",
            Self::ZeroObservation => "zero_observation",
            Self::CauchySchwarzEquality => "cauchy_schwarz_equality",
            Self::ZeroOccupation => "zero_occupation",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EstimateReport {
    pub kind: EstimatorKind,
    /// For the single-parameter estimators the known parameter is echoed.
    pub b_hat: Option<f64>,
    pub beta_hat: Option<f64>,
    pub degeneracy: Option<Degeneracy>,
}

impl EstimateReport {
    fn ok(kind: EstimatorKind, b: f64, beta: f64) -> Self {
        Self {
            kind,
            b_hat: Some(b),
            beta_hat: Some(beta),
            degeneracy: None,
        }
    }

    fn degenerate(kind: EstimatorKind, cause: Degeneracy) -> Self {
        Self {
            kind,
            b_hat: None,
            beta_hat: None,
            degeneracy: Some(cause),
        }
    }

    pub fn is_degenerate(&self) -> bool {
        self.degeneracy.is_some()
    }
}

/// Inverts `m1 = b/|β|`, `m2 - m1² = m1σ²C_α|β|^{1/α-2}` at the sample moments
/// (counting measure).
pub fn mom_estimate(x_samples: &[f64], sigma: f64, alpha: f64) -> Result<EstimateReport> {
    if x_samples.len() < 2 {
        return Err(Error::domain("x_samples", "need at least two samples"));
    }
    let n = x_samples.len() as f64;
    let m1 = x_samples.iter().sum::<f64>() / n;
    let m2 = x_samples.iter().map(|x| x * x).sum::<f64>() / n;
    mom_from_moments(m1, m2, sigma, alpha)
}

/// As [`mom_estimate`] from given first and second moments.
pub fn mom_from_moments(m1: f64, m2: f64, sigma: f64, alpha: f64) -> Result<EstimateReport> {
    if !(sigma > 0.0) {
        return Err(Error::domain("sigma", format!("must be positive, got {sigma}")));
    }
    let c = c_alpha(alpha)?;
    let kind = EstimatorKind::Mom;
    if !(m1 > 0.0) {
        return Ok(EstimateReport::degenerate(kind, Degeneracy::NonPositiveMean));
    }
    let var = m2 - m1 * m1;
    if !(var > VAR_TOL * m1 * m1) {
        return Ok(EstimateReport::degenerate(kind, Degeneracy::NonPositiveVariance));
    }
    let rate = (c * sigma * sigma * m1 / var).powf(alpha / (2.0 * alpha - 1.0));
    Ok(EstimateReport::ok(kind, m1 * rate, -rate))
}

/// Discretized joint MLE.
pub fn mle_joint(obs: &ObservationSet) -> EstimateReport {
    let kind = EstimatorKind::MleJoint;
    if obs.x_coarse.contains(&0.0) {
        return EstimateReport::degenerate(kind, Degeneracy::ZeroObservation);
    }
    let t = obs.horizon();
    let s_x = obs.occupation();
    let s_inv = obs.inverse_occupation();
    let s_dz = obs.inverse_dz();
    let z_t = obs.z_terminal;
    let d = t * t - s_x * s_inv;
    // Cauchy-Schwarz: t² ≤ S_X·S_inv
    debug_assert!(d <= 1e-9 * t * t, "D = {d} > 0");
    if d.abs() < CS_TOL * t * t {
        return EstimateReport::degenerate(kind, Degeneracy::CauchySchwarzEquality);
    }
    EstimateReport::ok(kind, (t * z_t - s_x * s_dz) / d, (t * s_dz - z_t * s_inv) / d)
}

/// MLE of `β` when `b` is known: `(Z^{P_n}_T - t_n b)/S_X`.
pub fn mle_beta_known_b(obs: &ObservationSet, b: f64) -> EstimateReport {
    let kind = EstimatorKind::MleBetaOnly;
    let s_x = obs.occupation();
    if !(s_x > 0.0) {
        return EstimateReport::degenerate(kind, Degeneracy::ZeroOccupation);
    }
    EstimateReport::ok(kind, b, (obs.z_terminal - obs.horizon() * b) / s_x)
}

/// MLE of `b` when `β` is known: `(S_dZ - β t_n)/S_inv`.
pub fn mle_b_known_beta(obs: &ObservationSet, beta: f64) -> EstimateReport {
    let kind = EstimatorKind::MleBOnly;
    if obs.x_coarse.contains(&0.0) {
        return EstimateReport::degenerate(kind, Degeneracy::ZeroObservation);
    }
    let s_inv = obs.inverse_occupation();
    EstimateReport::ok(kind, (obs.inverse_dz() - beta * obs.horizon()) / s_inv, beta)
}

/// Fisher information `[[∫x⁻¹dπ, 1], [1, ∫x dπ]]` with a Monte Carlo estimate
/// of the inverse moment.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FisherEstimate {
    pub matrix: [[f64; 2]; 2],
    /// Standard error of the `∫x⁻¹dπ` entry.
    pub inverse_moment_se: f64,
    /// Paths discarded because they touched zero.
    pub rejected_paths: usize,
}

/// Builds the Fisher matrix from per-path time averages of `X⁻¹`.
pub fn fisher_from_inverse_averages(m1: f64, averages: &[f64]) -> Result<FisherEstimate> {
    if averages.is_empty() {
        return Err(Error::domain("averages", "need at least one path"));
    }
    let n = averages.len() as f64;
    let mean = averages.iter().sum::<f64>() / n;
    let se = if averages.len() > 1 {
        let var = averages.iter().map(|a| (a - mean).powi(2)).sum::<f64>() / (n - 1.0);
        (var / n).sqrt()
    } else {
        f64::NAN
    };
    Ok(FisherEstimate {
        matrix: [[mean, 1.0], [1.0, m1]],
        inverse_moment_se: se,
        rejected_paths: 0,
    })
}

/// Fisher information with `∫x⁻¹dπ` estimated by `(1/T)Σ X_u⁻¹Δ` over
/// `mc_paths` Euler paths (seeds `seed + i`). A path that touches zero is
/// replaced by the next unused seed.
pub fn fisher_info(
    p: &ModelParams,
    k: &KernelSpec,
    mc_paths: usize,
    horizon: f64,
    step: f64,
    seed: u64,
) -> Result<FisherEstimate> {
    p.validate()?;
    if mc_paths == 0 {
        return Err(Error::domain("mc_paths", "need at least one path"));
    }
    let grid = Grid::from_horizon(horizon, step)?;
    let m1 = theoretical_moments(p, k)?.m1;
    let mut averages = Vec::with_capacity(mc_paths);
    let mut rejected = 0usize;
    let mut s = seed;
    while averages.len() < mc_paths {
        if rejected > 10 * mc_paths {
            return Err(Error::numerical(
                "Fisher information",
                "most paths touch zero; X⁻¹ is not integrable",
            ));
        }
        let path = simulate_path(p, k, &grid, s)?;
        s = s.wrapping_add(1);
        let xs = &path.values()[..grid.n_steps()];
        if xs.contains(&0.0) {
            rejected += 1;
            continue;
        }
        averages.push(xs.iter().map(|x| 1.0 / x).sum::<f64>() / xs.len() as f64);
    }
    let mut f = fisher_from_inverse_averages(m1, &averages)?;
    f.rejected_paths = rejected;
    Ok(f)
}

/// Symmetric square root of a positive definite 2×2 matrix.
fn sqrt_spd(m: &[[f64; 2]; 2]) -> Result<[[f64; 2]; 2]> {
    let det = m[0][0] * m[1][1] - m[0][1] * m[1][0];
    if !(m[0][0] > 0.0 && det > 0.0) || (m[0][1] - m[1][0]).abs() > 1e-12 * m[0][1].abs().max(1.0) {
        return Err(Error::domain("fisher", "must be symmetric positive definite"));
    }
    let s = det.sqrt();
    let t = (m[0][0] + m[1][1] + 2.0 * s).sqrt();
    Ok([[(m[0][0] + s) / t, m[0][1] / t], [m[1][0] / t, (m[1][1] + s) / t]])
}

/// `(√T/σ)·I^{1/2}·((b̂, β̂) - (b, β))`.
pub fn standardize_errors(
    report: &EstimateReport,
    truth: &ModelParams,
    fisher: &[[f64; 2]; 2],
    horizon: f64,
) -> Result<Option<[f64; 2]>> {
    let root = sqrt_spd(fisher)?;
    if !(truth.sigma > 0.0) {
        return Err(Error::domain("sigma", "standardization needs sigma > 0"));
    }
    let (Some(b), Some(beta)) = (report.b_hat, report.beta_hat) else {
        return Ok(None);
    };
    let e = [b - truth.b, beta - truth.beta];
    let scale = horizon.sqrt() / truth.sigma;
    Ok(Some([
        scale * (root[0][0] * e[0] + root[0][1] * e[1]),
        scale * (root[1][0] * e[0] + root[1][1] * e[1]),
    ]))
}
