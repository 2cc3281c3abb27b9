//! Small quadrature toolbox: adaptive Gauss-Kronrod (7/15) with global
//! bisection, and fixed-order Gauss-Legendre for smooth cell integrals.

use crate::error::{Error, Result};

// Kronrod abscissae on [0, 1]; odd indices are the embedded Gauss nodes.
const XGK: [f64; 8] = [
    0.991_455_371_120_812_639_206_854_697_526_329,
    0.949_107_912_342_758_524_526_189_684_047_851,
    0.864_864_423_359_769_072_789_712_788_640_926,
    0.741_531_185_599_394_439_863_864_773_280_788,
    0.586_087_235_467_691_130_294_144_845_693_013,
    0.405_845_151_377_397_166_906_606_412_076_961,
    0.207_784_955_007_898_467_600_689_403_773_245,
    0.000_000_000_000_000_000_000_000_000_000_000,
];

const WGK: [f64; 8] = [
    0.022_935_322_010_529_224_963_732_008_058_970,
    0.063_092_092_629_978_553_290_700_663_189_204,
    0.104_790_010_322_250_183_839_876_322_541_518,
    0.140_653_259_715_525_918_745_189_590_510_238,
    0.169_004_726_639_267_902_826_583_426_598_550,
    0.190_350_578_064_785_409_913_256_402_421_014,
    0.204_432_940_075_298_892_414_161_999_234_649,
    0.209_482_141_084_727_828_012_999_174_891_714,
];

const WG: [f64; 4] = [
    0.129_484_966_168_869_693_270_611_432_679_082,
    0.279_705_391_489_276_667_901_467_771_423_780,
    0.381_830_050_505_118_944_950_369_775_488_975,
    0.417_959_183_673_469_387_755_102_040_816_327,
];

/// Single G7K15 panel: (kronrod estimate, error estimate).
fn gk15<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> (f64, f64) {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c);
    let mut kron = fc * WGK[7];
    let mut gauss = fc * WG[3];
    for j in 0..7 {
        let x = h * XGK[j];
        let s = f(c - x) + f(c + x);
        kron += WGK[j] * s;
        if j % 2 == 1 {
            gauss += WG[j / 2] * s;
        }
    }
    (kron * h, ((kron - gauss) * h).abs())
}

/// Adaptive integral of `f` over the finite interval `[a, b]`.
///
/// Stops once the summed error estimate is below `max(abs_tol, rel_tol·|I|)`.
/// Integrable endpoint singularities are fine as long as `f` is never
/// evaluated exactly at the singular point (GK15 nodes are interior).
pub fn integrate<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, abs_tol: f64, rel_tol: f64) -> Result<f64> {
    integrate_pieces(f, &[a, b], abs_tol, rel_tol)
}

/// As [`integrate`] over `[breaks[0], breaks[last]]`, starting from one panel
/// per listed subinterval so that interior peaks and kinks are seen from the
/// start. The error budget is shared across panels, and a floor of a few
/// ulps of `∫|f|` stops refinement that rounding can no longer pay for.
pub fn integrate_pieces<F: Fn(f64) -> f64>(f: F, breaks: &[f64], abs_tol: f64, rel_tol: f64) -> Result<f64> {
    const MAX_PANELS: usize = 4000;
    let mut panels: Vec<(f64, f64, f64, f64)> = breaks
        .windows(2)
        .filter(|w| w[1] != w[0])
        .map(|w| {
            let (i, e) = gk15(&f, w[0], w[1]);
            (w[0], w[1], i, e)
        })
        .collect();
    if panels.is_empty() {
        return Ok(0.0);
    }
    let mut total: f64 = panels.iter().map(|p| p.2).sum();
    let mut err: f64 = panels.iter().map(|p| p.3).sum();
    let budget = |total: f64, panels: &[(f64, f64, f64, f64)]| {
        let mass: f64 = panels.iter().map(|p| p.2.abs()).sum();
        abs_tol.max(rel_tol * total.abs()).max(50.0 * f64::EPSILON * mass)
    };
    while err > budget(total, &panels) {
        if panels.len() >= MAX_PANELS {
            return Err(Error::numerical(
                "adaptive quadrature",
                format!(
                    "no convergence on [{}, {}]: error estimate {err:e}",
                    breaks[0],
                    breaks[breaks.len() - 1]
                ),
            ));
        }
        let worst = panels
            .iter()
            .enumerate()
            .max_by(|x, y| x.1 .3.total_cmp(&y.1 .3))
            .map(|(i, _)| i)
            .unwrap_or(0);
        let (pa, pb, pi, pe) = panels.swap_remove(worst);
        let mid = 0.5 * (pa + pb);
        if mid <= pa || mid >= pb {
            panels.push((pa, pb, pi, pe));
            break;
        }
        let (li, le) = gk15(&f, pa, mid);
        let (ri, re) = gk15(&f, mid, pb);
        total += li + ri - pi;
        err += le + re - pe;
        panels.push((pa, mid, li, le));
        panels.push((mid, pb, ri, re));
    }
    // Re-sum to shed drift from the incremental updates.
    Ok(panels.iter().map(|p| p.2).sum())
}

const GL8_X: [f64; 4] = [
    0.183_434_642_495_649_804_939_476_142_360_184,
    0.525_532_409_916_328_985_817_739_049_189_254,
    0.796_666_477_413_626_739_591_553_936_475_831,
    0.960_289_856_497_536_231_683_560_868_569_473,
];
const GL8_W: [f64; 4] = [
    0.362_683_783_378_361_982_965_150_449_277_195,
    0.313_706_645_877_887_287_337_962_201_986_601,
    0.222_381_034_453_374_470_544_355_994_426_241,
    0.101_228_536_290_376_259_152_531_354_309_962,
];

/// Eight-point Gauss-Legendre rule on `[a, b]` for smooth integrands.
pub fn gauss_legendre8<F: Fn(f64) -> f64>(f: F, a: f64, b: f64) -> f64 {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let mut s = 0.0;
    for k in 0..4 {
        s += GL8_W[k] * (f(c - h * GL8_X[k]) + f(c + h * GL8_X[k]));
    }
    s * h
}
