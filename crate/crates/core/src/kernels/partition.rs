use super::{FirstKindTable, KernelSpec};
use crate::error::{Error, Result};

/// How the mesh `|P_n|` of the n-th equidistant partition shrinks.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum MeshRule {
    /// `|P_n| = n^{-η}`, horizon `n^{1-η}`.
    PowerLaw { eta: f64 },
    /// `|P_n| = ln(n)/n`, horizon `ln(n)`.
    LogOverN,
}

impl MeshRule {
    pub fn mesh(&self, n: f64) -> f64 {
        match *self {
            MeshRule::PowerLaw { eta } => n.powf(-eta),
            MeshRule::LogOverN => n.ln() / n,
        }
    }
}

/// Sequence of coarse partitions `P_n` and fine partitions `P_{m(n)}` with
/// `m(n) = ceil(factor · n^{m_exponent})`.
///
/// A constant ratio `m(n)/n` corresponds to `m_exponent = 1`; the resolvent
/// condition generally needs `m(n)` to grow faster than `n`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PartitionSchedule {
    pub mesh_rule: MeshRule,
    pub factor: f64,
    pub m_exponent: f64,
}

impl PartitionSchedule {
    pub fn new(mesh_rule: MeshRule, factor: f64) -> Result<Self> {
        Self::with_growth(mesh_rule, factor, 1.0)
    }

    pub fn with_growth(mesh_rule: MeshRule, factor: f64, m_exponent: f64) -> Result<Self> {
        if let MeshRule::PowerLaw { eta } = mesh_rule {
            if !(eta > 0.0 && eta < 1.0) {
                return Err(Error::domain("eta", format!("must lie in (0, 1), got {eta}")));
            }
        }
        if !(factor >= 1.0 && factor.is_finite()) {
            return Err(Error::domain(
                "factor",
                format!("m(n) >= n needs factor >= 1, got {factor}"),
            ));
        }
        if !(m_exponent >= 1.0 && m_exponent.is_finite()) {
            return Err(Error::domain("m_exponent", format!("must be >= 1, got {m_exponent}")));
        }
        Ok(Self {
            mesh_rule,
            factor,
            m_exponent,
        })
    }

    pub fn m_of(&self, n: usize) -> f64 {
        (self.factor * (n as f64).powf(self.m_exponent)).ceil()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SequenceTrend {
    /// Nonincreasing over `n ∈ [n_max/2, n_max]`.
    pub decreasing_tail: bool,
    pub terminal: f64,
}

#[derive(Clone, Debug)]
pub struct PartitionReport {
    pub n: Vec<usize>,
    /// `√t_n · |P_n|^γ`
    pub mesh_sequence: Vec<f64>,
    /// `n · L((0, t_n]) · |P_{m(n)}|^γ / √t_n`
    pub resolvent_sequence: Vec<f64>,
    pub mesh_trend: SequenceTrend,
    pub resolvent_trend: SequenceTrend,
}

impl PartitionReport {
    pub fn satisfied(&self) -> bool {
        self.mesh_trend.decreasing_tail && self.resolvent_trend.decreasing_tail
    }

    pub fn verdict(&self) -> &'static str {
        if self.satisfied() {
            "condition satisfied trend"
        } else {
            "condition violated trend"
        }
    }
}

fn trend(values: &[f64]) -> SequenceTrend {
    let tail = &values[values.len() / 2..];
    let decreasing_tail = tail.windows(2).all(|w| w[1] <= w[0] * (1.0 + 1e-12));
    SequenceTrend {
        decreasing_tail,
        terminal: *values.last().unwrap_or(&f64::NAN),
    }
}

/// Evaluates both mesh conditions of the discretized MLE for `n = 2..=n_max`.
pub fn check_partition_conditions(
    kernel: &KernelSpec,
    sched: &PartitionSchedule,
    n_max: usize,
) -> Result<PartitionReport> {
    if n_max < 2 {
        return Err(Error::domain("n_max", format!("need at least 2, got {n_max}")));
    }
    let g = kernel.gamma();
    let ns: Vec<usize> = (2..=n_max).collect();
    let horizon = |n: usize| n as f64 * sched.mesh_rule.mesh(n as f64);
    let t_max = ns.iter().map(|&n| horizon(n)).fold(0.0, f64::max);
    let table = if kernel.closed_form_first_kind(0.0, 1.0).is_none() {
        Some(FirstKindTable::new(kernel, t_max / 4096.0, 4096)?)
    } else {
        None
    };
    let first_kind = |t: f64| match &table {
        Some(tb) => tb.cumulative(t),
        None => kernel.closed_form_first_kind(0.0, t).unwrap_or(0.0),
    };

    let mut mesh_sequence = Vec::with_capacity(ns.len());
    let mut resolvent_sequence = Vec::with_capacity(ns.len());
    for &n in &ns {
        let t_n = horizon(n);
        let mesh_n = sched.mesh_rule.mesh(n as f64);
        let mesh_m = sched.mesh_rule.mesh(sched.m_of(n));
        mesh_sequence.push(t_n.sqrt() * mesh_n.powf(g));
        resolvent_sequence.push(n as f64 * first_kind(t_n) * mesh_m.powf(g) / t_n.sqrt());
    }
    Ok(PartitionReport {
        mesh_trend: trend(&mesh_sequence),
        resolvent_trend: trend(&resolvent_sequence),
        n: ns,
        mesh_sequence,
        resolvent_sequence,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fractional_fast_refinement_is_satisfied() {
        // n^{1+(1-η)(3/2-α)} / m^{(α-1/2)η} → 0 needs m ~ n^p with p > 1.21/0.21.
        let k = KernelSpec::fractional(0.8).unwrap();
        let sched = PartitionSchedule::with_growth(MeshRule::PowerLaw { eta: 0.7 }, 1.0, 6.0).unwrap();
        let r = check_partition_conditions(&k, &sched, 2000).unwrap();
        assert_eq!(r.verdict(), "condition satisfied trend");
        assert!(r.resolvent_trend.terminal < r.resolvent_sequence[r.n.len() / 2]);
    }

    #[test]
    fn fractional_coarse_mesh_is_violated() {
        // η = 1/2 ≤ 1/(2α): √t_n |P_n|^γ = n^{0.2} grows.
        let k = KernelSpec::fractional(0.6).unwrap();
        let sched = PartitionSchedule::new(MeshRule::PowerLaw { eta: 0.5 }, 1.0).unwrap();
        let r = check_partition_conditions(&k, &sched, 2000).unwrap();
        assert!(!r.mesh_trend.decreasing_tail);
        assert_eq!(r.verdict(), "condition violated trend");
    }

    #[test]
    fn constant_factor_never_controls_resolvent_term() {
        let k = KernelSpec::fractional(0.8).unwrap();
        let sched = PartitionSchedule::new(MeshRule::PowerLaw { eta: 0.7 }, 4.0).unwrap();
        let r = check_partition_conditions(&k, &sched, 2000).unwrap();
        assert!(r.mesh_trend.decreasing_tail);
        assert!(!r.resolvent_trend.decreasing_tail);
    }

    #[test]
    fn exponential_log_mesh_is_satisfied() {
        // n ln(n)^{1/2} (ln m / m)^{1/2} → 0 for m ~ n^3.
        let k = KernelSpec::exponential_sum(vec![1.0, 0.5], vec![1.0, 2.0]).unwrap();
        let sched = PartitionSchedule::with_growth(MeshRule::LogOverN, 1.0, 3.0).unwrap();
        let r = check_partition_conditions(&k, &sched, 3000).unwrap();
        assert_eq!(r.verdict(), "condition satisfied trend");
    }

    #[test]
    fn schedule_validation() {
        assert!(PartitionSchedule::new(MeshRule::PowerLaw { eta: 1.0 }, 1.0).is_err());
        assert!(PartitionSchedule::new(MeshRule::LogOverN, 0.5).is_err());
        assert!(check_partition_conditions(
            &KernelSpec::fractional(0.8).unwrap(),
            &PartitionSchedule::new(MeshRule::LogOverN, 1.0).unwrap(),
            1
        )
        .is_err());
    }
}
