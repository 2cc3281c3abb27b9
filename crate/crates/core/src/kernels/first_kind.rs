use super::KernelSpec;
use crate::error::{Error, Result};

/// Cells used when `first_kind_mass` has to build a table on the fly.
pub(super) const DEFAULT_CELLS: usize = 4096;

/// Resolvent of the first kind `L(ds) = K(0+)⁻¹δ_0(ds) + L_0(s)ds` sampled on
/// a uniform grid as cumulative masses `L_0((0, iΔ])`.
#[derive(Clone, Debug)]
pub struct FirstKindTable {
    step: f64,
    atom: f64,
    cum: Vec<f64>,
}

impl FirstKindTable {
    /// Builds the table on `n` cells of width `step`.
    ///
    /// Closed forms are used where available. Otherwise the density is taken
    /// piecewise constant per cell and the identity `∫_{[0,t]}K(t-s)L(ds) = 1`
    /// is collocated at the grid nodes, which gives a lower-triangular
    /// Toeplitz system solved by forward substitution.
    pub fn new(kernel: &KernelSpec, step: f64, n: usize) -> Result<Self> {
        if !(step > 0.0 && step.is_finite()) {
            return Err(Error::domain("step", format!("must be positive, got {step}")));
        }
        if n == 0 {
            return Err(Error::domain("n", "need at least one cell"));
        }
        let atom = kernel.k_zero_plus_inverse();
        let cum = if kernel.closed_form_first_kind(0.0, step).is_some() {
            (0..=n)
                .map(|i| {
                    if i == 0 {
                        0.0
                    } else {
                        kernel.closed_form_first_kind(0.0, i as f64 * step).unwrap_or(0.0)
                    }
                })
                .collect()
        } else {
            Self::solve(kernel, atom, step, n)?
        };
        Ok(Self { step, atom, cum })
    }

    fn solve(kernel: &KernelSpec, atom: f64, step: f64, n: usize) -> Result<Vec<f64>> {
        let kbar: Vec<f64> = kernel.cell_averages(step, n).iter().map(|k| k * step).collect();
        let mut masses = Vec::with_capacity(n);
        for i in 1..=n {
            let t = i as f64 * step;
            let mut rhs = 1.0 - atom * kernel.value(t);
            for (j, m) in masses.iter().enumerate() {
                // cell j = [jΔ, (j+1)Δ] seen from t_i spans lags [(i-j-1)Δ, (i-j)Δ]
                rhs -= m / step * kbar[i - 1 - j];
            }
            let m = rhs * step / kbar[0];
            if !m.is_finite() {
                return Err(Error::numerical(
                    "first-kind resolvent",
                    format!("non-finite mass at node {i}"),
                ));
            }
            masses.push(m);
        }
        let mut cum = Vec::with_capacity(n + 1);
        cum.push(0.0);
        let mut acc = 0.0;
        for m in masses {
            acc += m;
            cum.push(acc);
        }
        Ok(cum)
    }

    pub fn step(&self) -> f64 {
        self.step
    }

    /// Mass of the atom at the origin, `1/K(0+)`.
    pub fn atom(&self) -> f64 {
        self.atom
    }

    pub fn horizon(&self) -> f64 {
        self.step * (self.cum.len() - 1) as f64
    }

    /// `L_0((0, t])`, linear within cells; clamped to the table horizon.
    pub fn cumulative(&self, t: f64) -> f64 {
        if t <= 0.0 {
            return 0.0;
        }
        let x = t / self.step;
        let n = self.cum.len() - 1;
        if x >= n as f64 {
            return self.cum[n];
        }
        let i = x.floor() as usize;
        let w = x - i as f64;
        self.cum[i] + w * (self.cum[i + 1] - self.cum[i])
    }

    /// Masses `L_0((jΔ, (j+1)Δ])` of the individual cells.
    pub fn cell_masses(&self) -> Vec<f64> {
        self.cum.windows(2).map(|w| w[1] - w[0]).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quad;
    use approx::assert_relative_eq;
    use statrs::function::gamma::gamma;

    /// `∫_{[0,t]}K(t-s)L(ds)` with `L` given by uniform densities on the cells
    /// of a table, evaluated by adaptive quadrature at an arbitrary `t`.
    fn convolution_identity(k: &KernelSpec, table: &FirstKindTable, t: f64) -> f64 {
        let masses = table.cell_masses();
        let h = table.step();
        let mut total = table.atom() * k.value(t);
        for (j, m) in masses.iter().enumerate() {
            let a = j as f64 * h;
            if a >= t {
                break;
            }
            let b = ((j + 1) as f64 * h).min(t);
            total += m / h * k.cell_integral(t - b, t - a);
        }
        total
    }

    #[test]
    fn fractional_examples() {
        let k = KernelSpec::fractional(0.75).unwrap();
        assert_relative_eq!(
            k.first_kind_mass(0.0, 1.0).unwrap(),
            1.0 / gamma(1.25),
            max_relative = 1e-14
        );
        let k1 = KernelSpec::fractional(1.0).unwrap();
        assert_eq!(k1.first_kind_mass(0.0, 5.0).unwrap(), 0.0);
        assert!(k.first_kind_mass(1.0, 1.0).is_err());
    }

    #[test]
    fn fractional_density_satisfies_identity() {
        // Independent check of the closed form: ∫_0^t K(t-s) s^{-α}/Γ(1-α) ds = 1.
        for &alpha in &[0.6, 0.75, 0.95] {
            let k = KernelSpec::fractional(alpha).unwrap();
            for &t in &[0.1, 1.0, 7.0] {
                // Split at t/2 so each half has a single endpoint singularity.
                let f = |s: f64, r: f64| k.value(r) * s.powf(-alpha) / gamma(1.0 - alpha);
                let h = 0.5 * t;
                let v = quad::integrate(|s| f(s, t - s), 0.0, h, 1e-13, 1e-12).unwrap()
                    + quad::integrate(|r| f(t - r, r), 0.0, h, 1e-13, 1e-12).unwrap();
                assert!((v - 1.0).abs() < 1e-8, "alpha={alpha} t={t} v={v}");
            }
        }
    }

    #[test]
    fn single_exponential_has_linear_mass() {
        // e^{-t}: L(ds) = δ_0 + ds
        let k = KernelSpec::exponential_sum(vec![1.0], vec![1.0]).unwrap();
        for &t in &[0.5, 2.0, 10.0] {
            assert_relative_eq!(k.first_kind_mass(0.0, t).unwrap(), t, max_relative = 1e-14);
        }
    }

    #[test]
    fn numerical_solver_reproduces_closed_forms() {
        // Bypass closed forms by building a two-term sum that collapses to e^{-t}.
        let k = KernelSpec::exponential_sum(vec![0.5, 0.5], vec![1.0, 1.0]).unwrap();
        let table = FirstKindTable::new(&k, 0.01, 1000).unwrap();
        for &t in &[0.5, 3.0, 10.0] {
            assert_relative_eq!(table.cumulative(t), t, max_relative = 1e-9);
        }
    }

    #[test]
    fn numerical_solver_agrees_with_fractional_closed_form() {
        let k = KernelSpec::fractional(0.75).unwrap();
        let table = FirstKindTable::solve(&k, 0.0, 1e-3, 2000).unwrap();
        for &i in &[100usize, 1000, 2000] {
            let t = i as f64 * 1e-3;
            let exact = t.powf(0.25) / gamma(1.25);
            assert_relative_eq!(table[i], exact, max_relative = 2e-3);
        }
    }

    #[test]
    fn identity_holds_on_grid() {
        let kernels = [
            KernelSpec::exponential_sum(vec![1.0, 2.0], vec![0.5, 4.0]).unwrap(),
            KernelSpec::log(0.3).unwrap(),
        ];
        for k in &kernels {
            let table = FirstKindTable::new(k, 1e-3, 3000).unwrap();
            for &t in &[0.001, 0.25, 1.0, 3.0] {
                let v = convolution_identity(k, &table, t);
                assert!((v - 1.0).abs() < 1e-6, "{k:?} t={t} v={v}");
            }
        }
    }

    #[test]
    fn log_kernel_mass_obeys_logarithmic_bound() {
        let k = KernelSpec::log(0.3).unwrap();
        let table = FirstKindTable::new(&k, 1e-3, 5000).unwrap();
        let ratios: Vec<f64> = (1..=5000)
            .step_by(50)
            .map(|i| {
                let t = i as f64 * 1e-3;
                table.cumulative(t) * (1.0 / t).ln_1p()
            })
            .collect();
        let max = ratios.iter().cloned().fold(0.0, f64::max);
        assert!(max < 2.0, "L((0,t])·ln(1+1/t) should stay bounded, max {max}");
        assert!(table.cell_masses().iter().all(|&m| m >= 0.0));
    }
}
