//! Arbitrary-precision reference values for J0 and Y0.
//!
//! Fixed-point arithmetic on `BigInt` with `BITS` fractional bits. The ascending
//! series is summed exactly enough that catastrophic cancellation at large
//! arguments (terms near 1e434 at x = 1000) still leaves well over 100 correct
//! decimal digits. Constants (pi, ln 2, Euler's gamma) are computed here from
//! scratch so nothing is shared with the f64 implementation.

#![allow(dead_code)]

use num_bigint::BigInt;
use num_traits::{One, Signed, ToPrimitive, Zero};

pub const BITS: u64 = 2400;

#[derive(Clone)]
pub struct Fixed(pub BigInt);

fn one() -> BigInt {
    BigInt::one() << BITS
}

impl Fixed {
    pub fn from_f64(x: f64) -> Fixed {
        assert!(x.is_finite());
        if x == 0.0 {
            return Fixed(BigInt::zero());
        }
        let bits = x.abs().to_bits();
        let exp = ((bits >> 52) & 0x7ff) as i64;
        let frac = bits & ((1u64 << 52) - 1);
        let (mant, e) = if exp == 0 {
            (frac, -1074i64)
        } else {
            (frac | (1u64 << 52), exp - 1075)
        };
        let shift = BITS as i64 + e;
        assert!(shift >= 0);
        let v = BigInt::from(mant) << (shift as u64);
        Fixed(if x < 0.0 { -v } else { v })
    }

    pub fn from_int(k: i64) -> Fixed {
        Fixed(BigInt::from(k) << BITS)
    }

    pub fn mul(&self, o: &Fixed) -> Fixed {
        Fixed((&self.0 * &o.0) >> BITS)
    }

    pub fn div(&self, o: &Fixed) -> Fixed {
        Fixed((&self.0 << BITS) / &o.0)
    }

    pub fn div_int(&self, k: u64) -> Fixed {
        Fixed(&self.0 / BigInt::from(k))
    }

    pub fn mul_int(&self, k: i64) -> Fixed {
        Fixed(&self.0 * BigInt::from(k))
    }

    pub fn add(&self, o: &Fixed) -> Fixed {
        Fixed(&self.0 + &o.0)
    }

    pub fn sub(&self, o: &Fixed) -> Fixed {
        Fixed(&self.0 - &o.0)
    }

    pub fn is_zero(&self) -> bool {
        self.0.is_zero()
    }

    pub fn to_f64(&self) -> f64 {
        let shifted: BigInt = &self.0 >> (BITS - 80);
        shifted.to_f64().unwrap() / 2f64.powi(80)
    }
}

/// `atanh(1/m)` for integer `m >= 2`.
fn atanh_recip(m: u64) -> Fixed {
    let m2 = BigInt::from(m * m);
    let mut power = one() / BigInt::from(m);
    let mut sum = BigInt::zero();
    let mut k = 1u64;
    while !power.is_zero() {
        sum += &power / BigInt::from(k);
        power /= &m2;
        k += 2;
    }
    Fixed(sum)
}

/// `atan(1/m)` for integer `m >= 2`.
fn atan_recip(m: u64) -> Fixed {
    let m2 = BigInt::from(m * m);
    let mut power = one() / BigInt::from(m);
    let mut sum = BigInt::zero();
    let mut k = 1u64;
    let mut sign = true;
    while !power.is_zero() {
        let t = &power / BigInt::from(k);
        if sign {
            sum += t;
        } else {
            sum -= t;
        }
        sign = !sign;
        power /= &m2;
        k += 2;
    }
    Fixed(sum)
}

pub fn pi() -> Fixed {
    atan_recip(5).mul_int(16).sub(&atan_recip(239).mul_int(4))
}

pub fn ln2() -> Fixed {
    atanh_recip(3).mul_int(2)
}

/// Natural log of a positive f64, exact input.
pub fn ln(x: f64) -> Fixed {
    assert!(x > 0.0);
    let fx = Fixed::from_f64(x);
    // x = y * 2^p with y in [1, 2)
    let bitlen = fx.0.bits() as i64;
    let p = bitlen - 1 - BITS as i64;
    let y = if p >= 0 {
        Fixed(&fx.0 >> (p as u64))
    } else {
        Fixed(&fx.0 << ((-p) as u64))
    };
    // ln y = 2 atanh((y-1)/(y+1))
    let z = y.sub(&Fixed(one())).div(&y.add(&Fixed(one())));
    let z2 = z.mul(&z);
    let mut power = z.clone();
    let mut sum = Fixed(BigInt::zero());
    let mut k = 1u64;
    while !power.is_zero() {
        sum = sum.add(&power.div_int(k));
        power = power.mul(&z2);
        k += 2;
    }
    sum.mul_int(2).add(&ln2().mul_int(p))
}

/// Euler's constant by the Brent-McMillan recurrence.
pub fn euler_gamma() -> Fixed {
    let n = (BITS as f64 * std::f64::consts::LN_2 / 4.0).ceil() as u64 + 16;
    let n2 = BigInt::from(n * n);
    let mut a = Fixed(-ln(n as f64).0);
    let mut b = Fixed(one());
    let mut u = a.clone();
    let mut v = b.clone();
    let mut k = 1u64;
    loop {
        let kk = BigInt::from(k * k);
        b = Fixed(&b.0 * &n2 / &kk);
        a = Fixed((&a.0 * &n2 / BigInt::from(k) + &b.0) / BigInt::from(k));
        u = u.add(&a);
        v = v.add(&b);
        if k > n && a.is_zero() && b.is_zero() {
            break;
        }
        k += 1;
    }
    u.div(&v)
}

pub struct Constants {
    pub pi: Fixed,
    pub gamma: Fixed,
    pub ln2: Fixed,
}

impl Constants {
    pub fn new() -> Self {
        Self {
            pi: pi(),
            gamma: euler_gamma(),
            ln2: ln2(),
        }
    }
}

/// `(J0(x), Y0(x))` from the ascending series in fixed point.
pub fn j0_y0(x: f64, c: &Constants) -> (f64, f64) {
    assert!(x > 0.0);
    let fx = Fixed::from_f64(x);
    let q = fx.mul(&fx).div_int(4);
    let mut term = Fixed(one());
    let mut j0 = term.clone();
    let mut harmonic = Fixed(BigInt::zero());
    let mut ysum = Fixed(BigInt::zero());
    let mut m = 1u64;
    loop {
        term = term.mul(&q).div_int(m * m);
        harmonic = harmonic.add(&Fixed(one()).div_int(m));
        let signed = if m % 2 == 1 { Fixed(-term.0.clone()) } else { term.clone() };
        j0 = j0.add(&signed);
        // (-1)^(m+1) H_m t_m
        ysum = ysum.sub(&harmonic.mul(&signed));
        if term.is_zero() || (term.0.abs() < BigInt::from(16) && m as f64 > x) {
            break;
        }
        m += 1;
    }
    let log_half = ln(x).sub(&c.ln2);
    let bracket = log_half.add(&c.gamma).mul(&j0).add(&ysum);
    let y0 = bracket.mul_int(2).div(&c.pi);
    (j0.to_f64(), y0.to_f64())
}
