use std::path::{Path as FsPath, PathBuf};

use vcir::estimate::{
    mle_b_known_beta, mle_beta_known_b, mle_joint, mom_estimate, EstimateReport, EstimatorKind, ObservationSet,
};
use vcir::experiments::{
    independence_check, lln_check, run_mc_table, write_independence_csv, write_lln_csv, write_normality_csv,
    write_table_csv,
};
use vcir::kernels::{check_partition_conditions, KernelKind, PartitionSchedule};
use vcir::simulate::{simulate_path_with, z_process, Grid, Path};
use vcir::volterra::{laplace_fdd, riccati_solve, stationary_laplace, AtomicMeasure, StationaryOptions};

use crate::config::{experiment, parse_estimators, require};
use crate::{CliError, EstimateCmd, IndependenceCmd, LlnCmd, McTableCmd, PartitionCmd, SimulateCmd, TransformCmd};

pub struct Outcome {
    pub summary: String,
    pub files: Vec<PathBuf>,
}

fn num(x: f64) -> String {
    if x.is_nan() {
        String::new()
    } else {
        format!("{x}")
    }
}

fn opt(x: Option<f64>) -> String {
    x.map(num).unwrap_or_default()
}

fn io_err(path: &FsPath, e: impl std::fmt::Display) -> CliError {
    CliError::Config(format!("out: {}: {e}", path.display()))
}

fn create(dir: &FsPath, name: &str) -> Result<(PathBuf, std::fs::File), CliError> {
    let path = dir.join(name);
    let f = std::fs::File::create(&path).map_err(|e| io_err(&path, e))?;
    Ok((path, f))
}

/// Writes `header` and `rows` as CSV to `dir/name`.
fn write_rows(
    dir: &FsPath,
    name: &str,
    header: &[&str],
    rows: impl IntoIterator<Item = Vec<String>>,
) -> Result<PathBuf, CliError> {
    let (path, f) = create(dir, name)?;
    let mut w = csv::Writer::from_writer(f);
    w.write_record(header).map_err(|e| io_err(&path, e))?;
    for r in rows {
        w.write_record(&r).map_err(|e| io_err(&path, e))?;
    }
    w.flush().map_err(|e| io_err(&path, e))?;
    Ok(path)
}

/// Runs a core CSV emitter against `dir/name`.
fn emit<F>(dir: &FsPath, name: &str, f: F) -> Result<PathBuf, CliError>
where
    F: FnOnce(std::fs::File) -> vcir::Result<()>,
{
    let (path, file) = create(dir, name)?;
    f(file).map_err(|e| io_err(&path, e))?;
    Ok(path)
}

pub fn simulate(c: &SimulateCmd) -> Result<Outcome, CliError> {
    let k = c.kernel.build()?;
    let p = c.model.build()?;
    let (dt, _) = c.grid.steps();
    let g = Grid::from_horizon(c.grid.horizon(), dt)?;
    let path = simulate_path_with(&p, &k, &g, c.run.seed(), c.grid.weights()?)?;
    let dir = c.run.out_dir()?;
    let xs = path.values();
    let mut files = vec![write_rows(
        &dir,
        "path.csv",
        &["t", "X"],
        xs.iter().enumerate().map(|(i, x)| vec![num(g.node(i)), num(*x)]),
    )?];
    if c.simulate.with_z.unwrap_or(false) {
        let z = z_process(&path, &k, g.n_steps())?;
        files.push(write_rows(
            &dir,
            "z.csv",
            &["t", "Z"],
            z.iter().enumerate().map(|(i, v)| vec![num(g.node(i)), num(*v)]),
        )?);
    }
    Ok(Outcome {
        summary: format!(
            "simulated {} steps to T = {}: final X = {}, min X = {}",
            g.n_steps(),
            g.horizon(),
            xs[xs.len() - 1],
            path.min_value()
        ),
        files,
    })
}

fn single(v: Vec<f64>, key: &str) -> Result<f64, CliError> {
    match v.as_slice() {
        [x] => Ok(*x),
        _ => Err(CliError::Config(format!(
            "{key}: riccati takes one value, got {}; use laplace for several",
            v.len()
        ))),
    }
}

pub fn riccati(c: &TransformCmd) -> Result<Outcome, CliError> {
    let k = c.kernel.build()?;
    let p = c.model.build()?;
    let u = single(c.transform.u(), "u")?;
    let t = single(c.transform.t(), "t")?;
    if !(t > 0.0 && t.is_finite()) {
        return Err(CliError::Config(format!("t: must be positive, got {t}")));
    }
    let (dt, _) = c.grid.steps();
    let n = ((t / dt).ceil() as usize).max(1);
    let sol = riccati_solve(&k, &p, &AtomicMeasure::single(0.0, u)?, t / n as f64, n)?;
    let value = laplace_fdd(&k, &p, &[t], &[u], dt)?;
    let dir = c.run.out_dir()?;
    let files = vec![
        write_rows(
            &dir,
            "riccati.csv",
            &["t", "V"],
            sol.midpoints()
                .into_iter()
                .zip(sol.values())
                .map(|(s, v)| vec![num(s), num(*v)]),
        )?,
        write_rows(&dir, "laplace.csv", &["u", "laplace"], [vec![num(u), num(value)]])?,
    ];
    Ok(Outcome {
        summary: format!("E[exp(-{u} X_{t})] = {value}"),
        files,
    })
}

/// With `--stationary` or a single time, one `u,laplace` row per weight;
/// with several times, the joint transform as `t,u,laplace` rows.
pub fn laplace(c: &TransformCmd) -> Result<Outcome, CliError> {
    let k = c.kernel.build()?;
    let p = c.model.build()?;
    let (dt, _) = c.grid.steps();
    let us = c.transform.u();
    let ts = c.transform.t();
    let dir = c.run.out_dir()?;
    if c.transform.stationary.unwrap_or(false) {
        let opts = StationaryOptions {
            grid_step: dt,
            ..StationaryOptions::default()
        };
        let values = us
            .iter()
            .map(|&u| stationary_laplace(&k, &p, u, &opts))
            .collect::<vcir::Result<Vec<_>>>()?;
        let file = write_rows(
            &dir,
            "laplace.csv",
            &["u", "laplace"],
            us.iter().zip(&values).map(|(u, v)| vec![num(*u), num(*v)]),
        )?;
        return Ok(Outcome {
            summary: format!("limit-law transform at {} weights; first = {}", us.len(), values[0]),
            files: vec![file],
        });
    }
    if let [t] = ts.as_slice() {
        let values = us
            .iter()
            .map(|&u| laplace_fdd(&k, &p, &[*t], &[u], dt))
            .collect::<vcir::Result<Vec<_>>>()?;
        let file = write_rows(
            &dir,
            "laplace.csv",
            &["u", "laplace"],
            us.iter().zip(&values).map(|(u, v)| vec![num(*u), num(*v)]),
        )?;
        return Ok(Outcome {
            summary: format!("transform of X_{t} at {} weights; first = {}", us.len(), values[0]),
            files: vec![file],
        });
    }
    let value = laplace_fdd(&k, &p, &ts, &us, dt)?;
    let file = write_rows(
        &dir,
        "laplace.csv",
        &["t", "u", "laplace"],
        ts.iter().zip(&us).map(|(t, u)| vec![num(*t), num(*u), num(value)]),
    )?;
    Ok(Outcome {
        summary: format!("joint transform at {} times = {value}", ts.len()),
        files: vec![file],
    })
}

/// Reads `t,X` rows on an equidistant grid starting at zero.
fn read_path(path: &FsPath) -> Result<(Grid, Vec<f64>), CliError> {
    let bad = |m: String| CliError::Config(format!("input: {}: {m}", path.display()));
    let mut r = csv::Reader::from_path(path).map_err(|e| bad(e.to_string()))?;
    let headers = r.headers().map_err(|e| bad(e.to_string()))?.clone();
    if headers.iter().collect::<Vec<_>>() != ["t", "X"] {
        return Err(bad(format!(
            "expected header t,X, got {}",
            headers.iter().collect::<Vec<_>>().join(",")
        )));
    }
    let (mut ts, mut xs) = (Vec::new(), Vec::new());
    for rec in r.records() {
        let rec = rec.map_err(|e| bad(e.to_string()))?;
        let parse = |i: usize| {
            rec[i]
                .trim()
                .parse::<f64>()
                .map_err(|e| bad(format!("line {:?}: {e}", rec.position().map(|p| p.line()))))
        };
        ts.push(parse(0)?);
        xs.push(parse(1)?);
    }
    if ts.len() < 3 || ts[0] != 0.0 {
        return Err(bad("need at least three rows starting at t = 0".into()));
    }
    let n = ts.len() - 1;
    let step = ts[n] / n as f64;
    if ts
        .iter()
        .enumerate()
        .any(|(i, &t)| (t - i as f64 * step).abs() > 1e-9 * ts[n].max(1.0))
    {
        return Err(bad("times are not equidistant".into()));
    }
    Ok((Grid::new(step, n)?, xs))
}

pub fn estimate(c: &EstimateCmd) -> Result<Outcome, CliError> {
    let k = c.kernel.build()?;
    let p = c.model.build()?;
    let input = require(c.estimate.input.clone(), "input")?;
    let (grid, xs) = read_path(&input)?;
    let factor = c.grid.factor();
    let n_fine = grid.n_steps();
    let n_obs = match c.grid.dt_obs {
        Some(o) => {
            let r = grid.horizon() / o;
            if (r - r.round()).abs() > 1e-9 * r.max(1.0) || r.round() < 1.0 {
                return Err(CliError::Config(format!(
                    "dt_obs: horizon {} is not a multiple of {o}",
                    grid.horizon()
                )));
            }
            r.round() as usize
        }
        None => n_fine / factor.max(1),
    };
    if n_obs == 0 || n_fine % (n_obs * factor.max(1)) != 0 {
        return Err(CliError::Config(format!(
            "factor: {n_fine} path steps are not a multiple of {n_obs} x {factor}"
        )));
    }
    let path = Path::from_values(grid, xs, p, k.clone())?;
    let obs = ObservationSet::from_path(&path, n_obs, factor)?;
    let mut reports: Vec<EstimateReport> = Vec::new();
    let mut kinds = parse_estimators(&c.estimate.estimators)?;
    if c.estimate.estimators.is_none() && p.sigma == 0.0 {
        // The moment estimator divides by σ; only run it when asked for.
        kinds.retain(|&k| k != EstimatorKind::Mom);
    }
    for kind in kinds {
        reports.push(match kind {
            EstimatorKind::Mom => match k.kind() {
                KernelKind::Fractional { alpha } => mom_estimate(obs.x_coarse(), p.sigma, *alpha)?,
                _ => return Err(CliError::Config("estimators: mom needs the fractional kernel".into())),
            },
            EstimatorKind::MleJoint => mle_joint(&obs),
            EstimatorKind::MleBetaOnly => mle_beta_known_b(&obs, p.b),
            EstimatorKind::MleBOnly => mle_b_known_beta(&obs, p.beta),
        });
    }
    let dir = c.run.out_dir()?;
    let file = write_rows(
        &dir,
        "estimate.csv",
        &["kind", "b_hat", "beta_hat", "degenerate"],
        reports.iter().map(|r| {
            vec![
                r.kind.name().to_string(),
                opt(r.b_hat),
                opt(r.beta_hat),
                r.degeneracy.map(|d| d.name().to_string()).unwrap_or_default(),
            ]
        }),
    )?;
    if reports.iter().all(EstimateReport::is_degenerate) {
        let causes: Vec<&str> = reports.iter().filter_map(|r| r.degeneracy.map(|d| d.name())).collect();
        return Err(CliError::Degenerate(format!(
            "estimators: every estimate degenerate ({}); see {}",
            causes.join(", "),
            file.display()
        )));
    }
    let summary = reports
        .iter()
        .map(|r| format!("{}: b = {}, beta = {}", r.kind.name(), opt(r.b_hat), opt(r.beta_hat)))
        .collect::<Vec<_>>()
        .join("; ");
    Ok(Outcome {
        summary: format!("{n_obs} observations: {summary}"),
        files: vec![file],
    })
}

pub fn mc_table(c: &McTableCmd) -> Result<Outcome, CliError> {
    let cfg = experiment(&c.run, &c.kernel, &c.model, &c.grid, &c.monte_carlo)?;
    let s = run_mc_table(&cfg)?;
    let dir = c.run.out_dir()?;
    let mut files = vec![emit(&dir, "table.csv", |f| write_table_csv(&s, f))?];
    if let Some(report) = s.standardized.as_ref().and_then(|z| z.normality.as_ref()) {
        files.push(emit(&dir, "normality.csv", |f| write_normality_csv(report, f))?);
    }
    let rows = s
        .rows
        .iter()
        .map(|r| format!("{} {}", r.label, num(r.mean)))
        .collect::<Vec<_>>()
        .join(", ");
    Ok(Outcome {
        summary: format!(
            "{} paths in {:.1}s ({} touch zero): {rows}",
            s.n_paths,
            s.runtime.as_secs_f64(),
            s.paths_touching_zero()
        ),
        files,
    })
}

pub fn lln(c: &LlnCmd) -> Result<Outcome, CliError> {
    let cfg = experiment(&c.run, &c.kernel, &c.model, &c.grid, &c.monte_carlo)?;
    let f = c.lln.function()?;
    let rows = lln_check(&cfg, f)?;
    let dir = c.run.out_dir()?;
    let file = emit(&dir, "lln.csv", |w| write_lln_csv(&rows, w))?;
    let last = rows
        .last()
        .ok_or_else(|| CliError::Numerical("lln: no checkpoints".into()))?;
    Ok(Outcome {
        summary: format!(
            "{} average at T = {}: {} (target {})",
            f.name(),
            last.horizon,
            last.average,
            last.target
        ),
        files: vec![file],
    })
}

pub fn independence(c: &IndependenceCmd) -> Result<Outcome, CliError> {
    let lags = c
        .independence
        .lags
        .clone()
        .unwrap_or_else(|| vec![5.0, 10.0, 20.0, 40.0]);
    let mut grid = c.grid.clone();
    if grid.horizon.is_none() {
        grid.horizon = Some(2.0 * lags.iter().copied().fold(0.0, f64::max));
    }
    let cfg = experiment(&c.run, &c.kernel, &c.model, &grid, &c.monte_carlo)?;
    let rows = independence_check(
        &cfg,
        c.independence.u1.unwrap_or(1.0),
        c.independence.u2.unwrap_or(1.0),
        &lags,
    )?;
    let dir = c.run.out_dir()?;
    let file = emit(&dir, "independence.csv", |w| write_independence_csv(&rows, w))?;
    let gaps = rows
        .iter()
        .map(|r| {
            format!(
                "L={}: mc {:.2e} ± {:.1e}, riccati {:.2e}",
                r.lag, r.gap_mc, r.se_mc, r.gap_riccati
            )
        })
        .collect::<Vec<_>>()
        .join("; ");
    Ok(Outcome {
        summary: gaps,
        files: vec![file],
    })
}

pub fn check_partition(c: &PartitionCmd) -> Result<Outcome, CliError> {
    let k = c.kernel.build()?;
    let sched = PartitionSchedule::with_growth(
        c.partition.mesh_rule()?,
        c.partition.m_factor.unwrap_or(1.0),
        c.partition.m_exponent.unwrap_or(1.0),
    )?;
    let report = check_partition_conditions(&k, &sched, c.partition.n_max.unwrap_or(10_000))?;
    let dir = c.run.out_dir()?;
    let file = write_rows(
        &dir,
        "partition.csv",
        &["n", "mesh_term", "resolvent_term"],
        report
            .n
            .iter()
            .zip(&report.mesh_sequence)
            .zip(&report.resolvent_sequence)
            .map(|((n, a), b)| vec![n.to_string(), num(*a), num(*b)]),
    )?;
    Ok(Outcome {
        summary: format!(
            "{}: mesh term {} -> {}, resolvent term {} -> {}",
            report.verdict(),
            report.mesh_sequence[0],
            report.mesh_trend.terminal,
            report.resolvent_sequence[0],
            report.resolvent_trend.terminal
        ),
        files: vec![file],
    })
}
