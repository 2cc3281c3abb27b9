//! Deterministic machinery of the VCIR model: the linear resolvent of the
//! second kind, Riccati-Volterra equations and the affine Laplace transforms
//! they generate, special functions and stationary moments.

mod resolvent;
mod riccati;
mod special;

pub use resolvent::{
    mean_variance_at, resolvent_integrals, resolvent_second_kind, square_integral_to_infinity, theoretical_moments,
    Moments, ResolventTable, TailIntegrals,
};
pub use riccati::{laplace_fdd, riccati_solve, stationary_laplace, RiccatiSolution, StationaryOptions};
pub use special::{c_alpha, mittag_leffler};

use crate::error::{Error, Result};

/// Parameters `(x0, b, β, σ)` of the VCIR law.
///
/// `σ = 0` is accepted: it turns the model into the deterministic linear
/// Volterra equation used as an oracle for the estimators.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ModelParams {
    pub x0: f64,
    pub b: f64,
    pub beta: f64,
    pub sigma: f64,
}

impl ModelParams {
    pub fn new(x0: f64, b: f64, beta: f64, sigma: f64) -> Result<Self> {
        let p = Self { x0, b, beta, sigma };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.x0 >= 0.0 && self.x0.is_finite()) {
            return Err(Error::domain("x0", format!("must be nonnegative, got {}", self.x0)));
        }
        if !(self.b >= 0.0 && self.b.is_finite()) {
            return Err(Error::domain("b", format!("must be nonnegative, got {}", self.b)));
        }
        if !(self.beta < 0.0 && self.beta.is_finite()) {
            return Err(Error::domain(
                "beta",
                format!("mean reversion needs beta < 0, got {}", self.beta),
            ));
        }
        if !(self.sigma >= 0.0 && self.sigma.is_finite()) {
            return Err(Error::domain(
                "sigma",
                format!("must be nonnegative, got {}", self.sigma),
            ));
        }
        Ok(())
    }

    /// `R(x) = βx - σ²x²/2`.
    pub fn riccati_rate(&self, x: f64) -> f64 {
        self.beta * x - 0.5 * self.sigma * self.sigma * x * x
    }
}

/// `μ = Σ u_k δ_{s_k}` with nonnegative weights.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct AtomicMeasure {
    atoms: Vec<(f64, f64)>,
}

impl AtomicMeasure {
    /// Atoms as `(location, weight)` pairs.
    pub fn new(atoms: Vec<(f64, f64)>) -> Result<Self> {
        for &(s, u) in &atoms {
            if !(s >= 0.0 && s.is_finite()) {
                return Err(Error::domain("location", format!("atoms sit on [0, ∞), got {s}")));
            }
            if !(u >= 0.0 && u.is_finite()) {
                return Err(Error::domain("weight", format!("must be nonnegative, got {u}")));
            }
        }
        Ok(Self { atoms })
    }

    pub fn single(location: f64, weight: f64) -> Result<Self> {
        Self::new(vec![(location, weight)])
    }

    pub fn atoms(&self) -> &[(f64, f64)] {
        &self.atoms
    }

    pub fn total_mass(&self) -> f64 {
        self.atoms.iter().map(|a| a.1).sum()
    }
}
