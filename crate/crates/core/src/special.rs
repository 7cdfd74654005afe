//! Log-gamma, digamma and trigamma for positive arguments.
//!
//! All three use upward recurrence to shift the argument above 10 and then an
//! asymptotic (Stirling / Bernoulli) series. Absolute error is below 1e-10 on
//! [1e-3, 1e6], which is what the evidential losses need; arguments are always
//! strictly positive there.

use crate::error::{Error, Result};

// Bernoulli numbers B_2 .. B_16 over the factors used by the series.
const STIRLING: [f64; 8] = [
    1.0 / 12.0,
    -1.0 / 360.0,
    1.0 / 1260.0,
    -1.0 / 1680.0,
    1.0 / 1188.0,
    -691.0 / 360360.0,
    1.0 / 156.0,
    -3617.0 / 122400.0,
];

const SHIFT: f64 = 10.0;

/// ln Γ(x) for x > 0.
pub fn ln_gamma(mut x: f64) -> f64 {
    debug_assert!(x > 0.0);
    // ln Γ(x) = ln Γ(x + k) - ln(x (x+1) ... (x+k-1))
    let mut shift = 0.0;
    while x < SHIFT {
        shift += x.ln();
        x += 1.0;
    }
    let inv = 1.0 / x;
    let inv2 = inv * inv;
    let mut series = 0.0;
    let mut p = inv;
    for c in STIRLING {
        series += c * p;
        p *= inv2;
    }
    (x - 0.5) * x.ln() - x + 0.5 * (2.0 * std::f64::consts::PI).ln() + series - shift
}

/// ψ(x) for x > 0.
pub fn digamma(mut x: f64) -> f64 {
    debug_assert!(x > 0.0);
    let mut acc = 0.0;
    while x < SHIFT {
        acc -= 1.0 / x;
        x += 1.0;
    }
    let inv = 1.0 / x;
    let inv2 = inv * inv;
    // psi(x) ~ ln x - 1/(2x) - sum_{n>=1} B_{2n}/(2n) x^{-2n}
    let mut series = 0.0;
    let mut p = inv2;
    const B2N_OVER_2N: [f64; 8] = [
        1.0 / 12.0,
        -1.0 / 120.0,
        1.0 / 252.0,
        -1.0 / 240.0,
        1.0 / 132.0,
        -691.0 / 32760.0,
        1.0 / 12.0,
        -3617.0 / 8160.0,
    ];
    for c in B2N_OVER_2N {
        series += c * p;
        p *= inv2;
    }
    x.ln() - 0.5 * inv - series + acc
}

/// ψ'(x) for x > 0.
pub fn trigamma(mut x: f64) -> f64 {
    debug_assert!(x > 0.0);
    let mut acc = 0.0;
    while x < SHIFT {
        acc += 1.0 / (x * x);
        x += 1.0;
    }
    let inv = 1.0 / x;
    let inv2 = inv * inv;
    // psi'(x) ~ 1/x + 1/(2x^2) + sum B_2n x^{-2n-1}
    const B2N: [f64; 8] = [
        1.0 / 6.0,
        -1.0 / 30.0,
        1.0 / 42.0,
        -1.0 / 30.0,
        5.0 / 66.0,
        -691.0 / 2730.0,
        7.0 / 6.0,
        -3617.0 / 510.0,
    ];
    let mut series = 0.0;
    let mut p = inv2 * inv;
    for c in B2N {
        series += c * p;
        p *= inv2;
    }
    inv + 0.5 * inv2 + series + acc
}

/// All three at once, with the domain check the pure functions skip.
pub fn special_fns(x: f64) -> Result<(f64, f64, f64)> {
    if !(x > 0.0) {
        return Err(Error::Domain(format!("special functions need x > 0, got {x}")));
    }
    Ok((ln_gamma(x), digamma(x), trigamma(x)))
}
