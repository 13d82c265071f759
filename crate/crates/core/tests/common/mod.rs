//! Test-only oracles that share no code with the library.
#![allow(dead_code)]

use num_bigint::BigInt;
use num_complex::Complex64;
use num_traits::{Float, ToPrimitive, Zero};

/// Fractional bits of the fixed-point format. Large enough to absorb the
/// e^|z| cancellation of the power series for |z| <= 100 with room to spare.
const FRAC_BITS: u32 = 1600;

fn to_fixed(x: f64) -> BigInt {
    if x == 0.0 {
        return BigInt::zero();
    }
    let (mantissa, exponent, sign) = Float::integer_decode(x);
    let mut v = BigInt::from(mantissa);
    let shift = FRAC_BITS as i64 + exponent as i64;
    if shift >= 0 {
        v <<= shift as usize;
    } else {
        v >>= (-shift) as usize;
    }
    if sign < 0 {
        -v
    } else {
        v
    }
}

fn from_fixed(v: &BigInt) -> f64 {
    if v.is_zero() {
        return 0.0;
    }
    let bits = v.bits() as i64;
    let keep = 62i64;
    let (head, exp) = if bits > keep {
        (v >> (bits - keep) as usize, bits - keep - FRAC_BITS as i64)
    } else {
        (v.clone(), -(FRAC_BITS as i64))
    };
    let h = head.to_f64().unwrap();
    // two-step scaling keeps the intermediate inside the normal range
    let half = exp / 2;
    h * 2f64.powi(half as i32) * 2f64.powi((exp - half) as i32)
}

fn mul(a: &BigInt, b: &BigInt) -> BigInt {
    (a * b) >> FRAC_BITS as usize
}

/// J_n(x) by its power series in 1600-bit fixed point.
pub fn bessel_j_series(n: u32, x: f64) -> f64 {
    let xf = to_fixed(x);
    let q = mul(&xf, &xf) >> 2usize;
    let half = &xf >> 1usize;
    let mut term = BigInt::from(1) << FRAC_BITS as usize;
    for k in 1..=n {
        term = mul(&term, &half) / BigInt::from(k);
    }
    let mut sum = term.clone();
    let mut k: u64 = 1;
    loop {
        term = -(mul(&term, &q) / BigInt::from(k * (n as u64 + k)));
        sum += &term;
        if term.is_zero() && k as f64 > x {
            break;
        }
        k += 1;
    }
    from_fixed(&sum)
}

/// I_0(x) by its (positive-term) power series.
pub fn bessel_i0_series(x: f64) -> f64 {
    let xf = to_fixed(x);
    let q = mul(&xf, &xf) >> 2usize;
    let mut term = BigInt::from(1) << FRAC_BITS as usize;
    let mut sum = term.clone();
    let mut k: u64 = 1;
    while !term.is_zero() {
        term = mul(&term, &q) / BigInt::from(k * k);
        sum += &term;
        k += 1;
    }
    from_fixed(&sum)
}

/// Complex J_0(z) by its power series in fixed point.
pub fn bessel_j0_complex_series(z: Complex64) -> Complex64 {
    let zr = to_fixed(z.re);
    let zi = to_fixed(z.im);
    // w = -z^2 / 4
    let wr = -((mul(&zr, &zr) - mul(&zi, &zi)) >> 2usize);
    let wi = -((mul(&zr, &zi)) >> 1usize);
    let mut tr = BigInt::from(1) << FRAC_BITS as usize;
    let mut ti = BigInt::zero();
    let mut sr = tr.clone();
    let mut si = ti.clone();
    let mut k: u64 = 1;
    loop {
        let nr = mul(&tr, &wr) - mul(&ti, &wi);
        let ni = mul(&tr, &wi) + mul(&ti, &wr);
        let d = BigInt::from(k * k);
        tr = nr / &d;
        ti = ni / d;
        sr += &tr;
        si += &ti;
        if tr.is_zero() && ti.is_zero() && k as f64 > z.norm() {
            break;
        }
        k += 1;
    }
    Complex64::new(from_fixed(&sr), from_fixed(&si))
}

/// Relative error; `want` must be nonzero.
pub fn rel_err(got: f64, want: f64) -> f64 {
    (got - want).abs() / want.abs().max(f64::MIN_POSITIVE)
}

pub fn crel_err(got: Complex64, want: Complex64) -> f64 {
    (got - want).norm() / want.norm().max(f64::MIN_POSITIVE)
}
