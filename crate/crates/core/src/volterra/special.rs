//! Two-parameter Mittag-Leffler function and the constant `C_α` that links the
//! stationary variance of the fractional model to its parameters.

use std::f64::consts::PI;

use statrs::function::gamma::{gamma, ln_gamma};

use crate::error::{Error, Result};
use crate::quad;

/// Largest `|z|` for which negative arguments are summed as a power series.
/// Beyond it the alternating terms cancel badly.
const SERIES_RADIUS: f64 = 1.0;
const REL_TOL: f64 = 1e-12;

/// `E_{a,b}(z) = Σ_k z^k / Γ(ak + b)` for `a ∈ (0, 1]`, `b > 0` and real `z`.
///
/// Nonnegative and small arguments use the series with compensated summation.
/// For `z < -1` the value comes from a real integral representation: the
/// Gorenflo-Loutchko-Luchko formula when `a < 1` (after lowering `b` below one
/// with `E_{a,b}(z) = (E_{a,b-a}(z) - 1/Γ(b-a))/z`), and an incomplete-gamma
/// type integral when `a = 1`.
pub fn mittag_leffler(a: f64, b: f64, z: f64) -> Result<f64> {
    if !(a > 0.0 && a <= 1.0) {
        return Err(Error::domain("a", format!("must lie in (0, 1], got {a}")));
    }
    if !(b > 0.0 && b.is_finite()) {
        return Err(Error::domain("b", format!("must be positive, got {b}")));
    }
    if !z.is_finite() {
        return Err(Error::domain("z", format!("must be finite, got {z}")));
    }
    if a == 1.0 && b == 1.0 {
        return Ok(z.exp());
    }
    if z >= -SERIES_RADIUS {
        return series(a, b, z);
    }
    if a == 1.0 {
        return unit_order_negative(b, z);
    }
    // Lower b into (0, 1] so the integrand below has no singularity at 0.
    let mut shifts = Vec::new();
    let mut bb = b;
    while bb > 1.0 {
        bb -= a;
        shifts.push(bb);
    }
    let mut value = gorenflo(a, bb, z)?;
    for &lower in shifts.iter().rev() {
        // value = E_{a,lower}; step up to E_{a,lower+a}
        value = (value - 1.0 / gamma(lower)) / z;
    }
    Ok(value)
}

fn series(a: f64, b: f64, z: f64) -> Result<f64> {
    let mut sum = 0.0;
    let mut comp = 0.0;
    let ln_z = z.abs().ln();
    let mut k = 0usize;
    loop {
        let arg = a * k as f64 + b;
        let term = if k == 0 {
            1.0 / gamma(b)
        } else if arg < 150.0 {
            z.powi(k as i32) / gamma(arg)
        } else {
            let mag = (k as f64 * ln_z - ln_gamma(arg)).exp();
            if z < 0.0 && k % 2 == 1 {
                -mag
            } else {
                mag
            }
        };
        // Neumaier summation
        let t = sum + term;
        if sum.abs() >= term.abs() {
            comp += (sum - t) + term;
        } else {
            comp += (term - t) + sum;
        }
        sum = t;
        let total = sum + comp;
        if !total.is_finite() {
            return Err(Error::numerical(
                "Mittag-Leffler series",
                format!("overflow at a={a}, b={b}, z={z}"),
            ));
        }
        // Terms decay once Γ(ak+b) outgrows |z|^k.
        if k > 2 && term.abs() <= 1e-17 * total.abs().max(f64::MIN_POSITIVE) && arg > z.abs().powf(1.0 / a) {
            return Ok(total);
        }
        if z == 0.0 {
            return Ok(total);
        }
        k += 1;
        if k > 100_000 {
            return Err(Error::numerical(
                "Mittag-Leffler series",
                format!("no convergence at a={a}, b={b}, z={z}"),
            ));
        }
    }
}

/// Integral representation for `a < 1`, `0 < b ≤ 1`, `z < 0`.
fn gorenflo(a: f64, b: f64, z: f64) -> Result<f64> {
    let s1 = (PI * (1.0 - b)).sin();
    let s2 = (PI * (1.0 - b + a)).sin();
    let c = (PI * a).cos();
    let integrand = |chi: f64| {
        let num = chi * s1 - z * s2;
        let den = chi * chi - 2.0 * chi * z * c + z * z;
        chi.powf((1.0 - b) / a) * (-chi.powf(1.0 / a)).exp() * num / den
    };
    let upper = 700f64.powf(a);
    let peak = (z * c).abs();
    let mut cuts = vec![0.0, 1.0_f64.min(upper)];
    if peak > 1.0 && peak < upper {
        let width = (z * (PI * a).sin()).abs().max(1e-3);
        for p in [peak - 4.0 * width, peak, peak + 4.0 * width] {
            if p > 1.0 && p < upper {
                cuts.push(p);
            }
        }
    }
    cuts.push(upper);
    cuts.sort_by(f64::total_cmp);
    cuts.dedup();
    let total = quad::integrate_pieces(integrand, &cuts, 1e-300, REL_TOL)
        .map_err(|e| Error::numerical("Mittag-Leffler integral", e.to_string()))?;
    Ok(total / (a * PI))
}

/// `E_{1,b}(z)` for `z < 0`. For `b > 1`,
/// `E_{1,b}(z) = Γ(b-1)⁻¹ ∫_0^1 e^{-|z|(1-r)} r^{b-2} dr`.
fn unit_order_negative(b: f64, z: f64) -> Result<f64> {
    if b < 1.0 {
        // E_{1,b} = 1/Γ(b) + z·E_{1,b+1}; loses digits to cancellation for large |z|
        return Ok(1.0 / gamma(b) + z * unit_order_negative(b + 1.0, z)?);
    }
    if b == 1.0 {
        return Ok(z.exp());
    }
    let x = -z;
    let f = |r: f64| (-x * (1.0 - r)).exp() * r.powf(b - 2.0);
    let mut cuts = vec![0.0];
    for k in [40.0, 1.0] {
        let p = 1.0 - k / x;
        if p > 0.0 {
            cuts.push(p);
        }
    }
    cuts.push(1.0);
    let total = quad::integrate_pieces(f, &cuts, 1e-300, REL_TOL)
        .map_err(|e| Error::numerical("Mittag-Leffler integral", e.to_string()))?;
    Ok(total / gamma(b - 1.0))
}

/// `C_α = π⁻¹∫_0^∞ du / (1 + 2u^α cos(πα/2) + u^{2α})` for `α ∈ (1/2, 1]`.
///
/// The tail `[1, ∞)` is mapped onto `(0, 1]` by `u = w^{-1/(2α-1)}`, which
/// absorbs the `u^{-2α}` decay into a bounded integrand.
pub fn c_alpha(alpha: f64) -> Result<f64> {
    if !(alpha > 0.5 && alpha <= 1.0) {
        return Err(Error::domain("alpha", format!("must lie in (1/2, 1], got {alpha}")));
    }
    let c = (0.5 * PI * alpha).cos();
    let head = quad::integrate(
        |u: f64| 1.0 / (1.0 + 2.0 * u.powf(alpha) * c + u.powf(2.0 * alpha)),
        0.0,
        1.0,
        1e-15,
        1e-12,
    )?;
    let p = 2.0 * alpha - 1.0;
    let tail = quad::integrate(
        |w: f64| {
            let v = w.powf(1.0 / p);
            1.0 / (p * (v.powf(2.0 * alpha) + 2.0 * c * v.powf(alpha) + 1.0))
        },
        0.0,
        1.0,
        1e-15,
        1e-12,
    )?;
    Ok((head + tail) / PI)
}
