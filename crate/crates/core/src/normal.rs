//! Standard normal primitives.
//!
//! The CDF and survival function go through `libm::erfc`, which is accurate
//! to about one ulp over the whole real line, so tail probabilities keep full
//! relative precision down to the subnormal range. The quantile uses
//! Wichura's AS241 rational approximation followed by a single Newton step.

use std::f64::consts::{FRAC_1_SQRT_2, PI};

use crate::error::{Error, Result};

/// 1/sqrt(2*pi)
pub const INV_SQRT_2PI: f64 = 0.398_942_280_401_432_7;

/// Standard normal density.
#[inline]
pub fn phi(x: f64) -> f64 {
    INV_SQRT_2PI * (-0.5 * x * x).exp()
}

/// Standard normal CDF. Accepts `±inf`.
#[inline]
pub fn norm_cdf(x: f64) -> f64 {
    0.5 * libm::erfc(-x * FRAC_1_SQRT_2)
}

/// Upper tail `1 - Φ(x)`, evaluated without cancellation.
#[inline]
pub fn norm_sf(x: f64) -> f64 {
    0.5 * libm::erfc(x * FRAC_1_SQRT_2)
}

/// `ln(1 - Φ(x))`, finite for every finite `x`.
///
/// Past the point where `erfc` underflows, the Laplace continued fraction
/// for the Mills ratio is used instead.
pub fn log_norm_sf(x: f64) -> f64 {
    if x < 0.0 {
        return (-norm_cdf(x)).ln_1p();
    }
    if x < 30.0 {
        return norm_sf(x).ln();
    }
    // Mills ratio R(x) = (1 - Φ(x)) / φ(x) = 1/(x + 1/(x + 2/(x + 3/(x + ...))))
    let mut tail = 0.0;
    for k in (1..=40).rev() {
        tail = k as f64 / (x + tail);
    }
    let mills = 1.0 / (x + tail);
    -0.5 * x * x - 0.5 * (2.0 * PI).ln() + mills.ln()
}

/// Inverse of [`norm_cdf`]. `p = 0` and `p = 1` map to `-inf` and `+inf`.
pub fn norm_quantile(p: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::domain("probability must lie in [0, 1]", p));
    }
    if p == 0.0 {
        return Ok(f64::NEG_INFINITY);
    }
    if p == 1.0 {
        return Ok(f64::INFINITY);
    }
    Ok(quantile_unchecked(p))
}

/// Quantile for `p` strictly inside (0, 1); no validation.
#[inline]
pub(crate) fn quantile_unchecked(p: f64) -> f64 {
    let x = as241(p);
    // One Newton step on the CDF. For the lower tail the residual is taken
    // against the mirrored upper tail so the step does not lose digits.
    let step = if x < 0.0 {
        (norm_sf(-x) - p) / phi(x)
    } else {
        ((1.0 - p) - norm_sf(x)) / phi(x)
    };
    if step.is_finite() {
        x - step
    } else {
        x
    }
}

#[allow(clippy::excessive_precision)]
fn as241(p: f64) -> f64 {
    const SPLIT1: f64 = 0.425;
    const SPLIT2: f64 = 5.0;
    const CONST1: f64 = 0.180625;
    const CONST2: f64 = 1.6;

    const A: [f64; 8] = [
        3.3871328727963666080e0,
        1.3314166789178437745e+2,
        1.9715909503065514427e+3,
        1.3731693765509461125e+4,
        4.5921953931549871457e+4,
        6.7265770927008700853e+4,
        3.3430575583588128105e+4,
        2.5090809287301226727e+3,
    ];
    const B: [f64; 8] = [
        1.0,
        4.2313330701600911252e+1,
        6.8718700749205790830e+2,
        5.3941960214247511077e+3,
        2.1213794301586595867e+4,
        3.9307895800092710610e+4,
        2.8729085735721942674e+4,
        5.2264952788528545610e+3,
    ];
    const C: [f64; 8] = [
        1.42343711074968357734e0,
        4.63033784615654529590e0,
        5.76949722146069140550e0,
        3.64784832476320460504e0,
        1.27045825245236838258e0,
        2.41780725177450611770e-1,
        2.27238449892691845833e-2,
        7.74545014278341407640e-4,
    ];
    const D: [f64; 8] = [
        1.0,
        2.05319162663775882187e0,
        1.67638483018380384940e0,
        6.89767334985100004550e-1,
        1.48103976427480074590e-1,
        1.51986665636164571966e-2,
        5.47593808499534494600e-4,
        1.05075007164441684324e-9,
    ];
    const E: [f64; 8] = [
        6.65790464350110377720e0,
        5.46378491116411436990e0,
        1.78482653991729133580e0,
        2.96560571828504891230e-1,
        2.65321895265761230930e-2,
        1.24266094738807843860e-3,
        2.71155556874348757815e-5,
        2.01033439929228813265e-7,
    ];
    const F: [f64; 8] = [
        1.0,
        5.99832206555887937690e-1,
        1.36929880922735805310e-1,
        1.48753612908506148525e-2,
        7.86869131145613259100e-4,
        1.84631831751005468180e-5,
        1.42151175831644588870e-7,
        2.04426310338993978564e-15,
    ];

    fn horner(c: &[f64; 8], r: f64) -> f64 {
        c.iter().rev().fold(0.0, |acc, &k| acc * r + k)
    }

    let q = p - 0.5;
    if q.abs() <= SPLIT1 {
        let r = CONST1 - q * q;
        return q * horner(&A, r) / horner(&B, r);
    }
    let tail = if q < 0.0 { p } else { 1.0 - p };
    let mut r = (-tail.ln()).sqrt();
    let z = if r <= SPLIT2 {
        r -= CONST2;
        horner(&C, r) / horner(&D, r)
    } else {
        r -= SPLIT2;
        horner(&E, r) / horner(&F, r)
    };
    if q < 0.0 {
        -z
    } else {
        z
    }
}

/// Lower bound on the normal upper tail valid for `x >= 0`:
/// `1 - Φ(x) > 2 φ(x) / (sqrt(4 + x²) + x)`.
pub fn tail_lower_bound(x: f64) -> Result<f64> {
    if !(x >= 0.0) {
        return Err(Error::domain("tail bound requires x >= 0", x));
    }
    Ok(2.0 * phi(x) / ((4.0 + x * x).sqrt() + x))
}
