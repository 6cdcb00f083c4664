//! Bessel functions of order zero and the 2-D outgoing Helmholtz Green's function.
//!
//! Ascending power series for `x <= SERIES_LIMIT` and the Hankel asymptotic
//! expansion above it. At `x = 12` the largest series term is about `4e3`,
//! so cancellation costs roughly `1e-12`, and the smallest asymptotic term is
//! below `1e-11`; both stay well inside the `1e-10` absolute budget.

use std::f64::consts::{FRAC_PI_4, PI};

use num_complex::Complex64;

use crate::error::{Error, Result};

/// Euler-Mascheroni constant.
pub const EULER_GAMMA: f64 = 0.577_215_664_901_532_9;

pub const SERIES_LIMIT: f64 = 12.0;

/// `J0(x)`, `Y0(x)` for `x > 0`.
pub fn bessel_j0_y0(x: f64) -> (f64, f64) {
    debug_assert!(x > 0.0);
    if x <= SERIES_LIMIT {
        series_j0_y0(x)
    } else {
        asymptotic_j0_y0(x)
    }
}

pub fn bessel_j0(x: f64) -> f64 {
    if x == 0.0 {
        return 1.0;
    }
    bessel_j0_y0(x.abs()).0
}

pub fn bessel_y0(x: f64) -> f64 {
    bessel_j0_y0(x).1
}

/// `H0^(1)(x) = J0(x) + i Y0(x)`.
pub fn hankel1_0(x: f64) -> Complex64 {
    let (j, y) = bessel_j0_y0(x);
    Complex64::new(j, y)
}

/// Outgoing free-space Green's function `(i/4) H0^(1)(k r)`.
pub fn greens_h0(k: f64, r: f64) -> Result<Complex64> {
    if !(r > 0.0) || !r.is_finite() {
        return Err(Error::invalid(format!("Green's function needs r > 0, got {r}")));
    }
    if !(k > 0.0) {
        return Err(Error::invalid(format!("wavenumber must be positive, got {k}")));
    }
    Ok(greens_h0_unchecked(k * r))
}

#[inline]
pub(crate) fn greens_h0_unchecked(kr: f64) -> Complex64 {
    let (j, y) = bessel_j0_y0(kr);
    // (i/4)(J0 + i Y0)
    Complex64::new(-0.25 * y, 0.25 * j)
}

fn series_j0_y0(x: f64) -> (f64, f64) {
    let q = 0.25 * x * x;
    let mut term = 1.0;
    let mut j0 = 1.0;
    let mut harmonic = 0.0;
    let mut ysum = 0.0;
    let mut m = 1usize;
    loop {
        let mf = m as f64;
        term *= -q / (mf * mf);
        harmonic += 1.0 / mf;
        j0 += term;
        // (-1)^(m+1) H_m q^m / (m!)^2 = -H_m * term
        ysum -= harmonic * term;
        if term.abs() < 1e-18 && m > 2 {
            break;
        }
        m += 1;
    }
    let y0 = 2.0 / PI * (((0.5 * x).ln() + EULER_GAMMA) * j0 + ysum);
    (j0, y0)
}

fn asymptotic_j0_y0(x: f64) -> (f64, f64) {
    // a_k = prod_{m=1..k} (2m-1)^2 / (8 m), divided by x^k
    let mut p = 1.0;
    let mut q = 0.0;
    let mut term = 1.0;
    let mut prev = f64::INFINITY;
    let mut k = 1usize;
    loop {
        let odd = (2 * k - 1) as f64;
        term *= odd * odd / (8.0 * k as f64 * x);
        if term >= prev || term < 1e-17 {
            break;
        }
        // P = 1 - a2 + a4 - ..., Q = -a1 + a3 - ...
        match k % 4 {
            1 => q -= term,
            2 => p -= term,
            3 => q += term,
            _ => p += term,
        }
        prev = term;
        k += 1;
    }
    let chi = x - FRAC_PI_4;
    let amp = (2.0 / (PI * x)).sqrt();
    let (s, c) = chi.sin_cos();
    let j0 = amp * (p * c - q * s);
    let y0 = amp * (p * s + q * c);
    (j0, y0)
}
