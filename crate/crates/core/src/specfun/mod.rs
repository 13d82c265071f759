//! Cylinder functions needed by the field simulator and the interpolation kernel.
//!
//! Real-argument J_n is computed for a whole order sequence at once by Miller's
//! backward recurrence normalised with `J_0 + 2 Σ J_2k = 1`. Y_0 and Y_1 come
//! from Neumann series over that sequence (small x) or the Hankel asymptotic
//! expansion (large x), and higher Y_n from the stable upward recurrence.
//!
//! Complex J_0 uses a double-double power series for `|z| <= 20` and the
//! Hankel asymptotic expansion beyond.

mod ddouble;

use std::f64::consts::{FRAC_PI_4, PI};

use num_complex::Complex64;

use crate::error::{Error, Result};
use ddouble::{ComplexDd, DoubleDouble};

pub const MAX_ORDER: u32 = 200;
pub const MAX_REAL_ARG: f64 = 1.0e3;
pub const MIN_HANKEL_ARG: f64 = 1.0e-6;
pub const MAX_COMPLEX_ABS: f64 = 100.0;
pub const MAX_COMPLEX_IMAG: f64 = 30.0;

/// Crossover between the series and the asymptotic expansion for complex J0.
const COMPLEX_SERIES_LIMIT: f64 = 20.0;
/// Crossover between Neumann series and asymptotic expansion for Y0/Y1.
const REAL_ASYMPTOTIC_LIMIT: f64 = 25.0;

const EULER_GAMMA: f64 = 0.577_215_664_901_532_9;
const RESCALE_THRESHOLD: f64 = 1.0e200;

fn domain(function: &'static str, detail: String) -> Error {
    Error::Domain { function, detail }
}

fn check_real(function: &'static str, order: u32, x: f64) -> Result<()> {
    if order > MAX_ORDER {
        return Err(domain(
            function,
            format!("order {order} exceeds {MAX_ORDER}"),
        ));
    }
    if !x.is_finite() || !(0.0..=MAX_REAL_ARG).contains(&x) {
        return Err(domain(
            function,
            format!("argument {x} outside [0, {MAX_REAL_ARG}]"),
        ));
    }
    Ok(())
}

fn check_hankel(function: &'static str, order: u32, x: f64) -> Result<()> {
    check_real(function, order, x)?;
    if x <= MIN_HANKEL_ARG {
        return Err(domain(
            function,
            format!("argument {x} must exceed {MIN_HANKEL_ARG}"),
        ));
    }
    Ok(())
}

/// Log10 envelope of |J_n(x)| used to choose the backward-recurrence start.
fn envelope(n: f64, x: f64) -> f64 {
    0.5 * (std::f64::consts::TAU * n).log10() - n * (0.5 * std::f64::consts::E * x / n).log10()
}

/// Smallest order above ~1.1x at which the envelope reaches `target` digits.
fn scan_envelope(start: usize, x: f64, target: f64) -> usize {
    let mut n = start.max(1);
    while envelope(n as f64, x) < target {
        n += 1;
    }
    n
}

/// Starting order for Miller's algorithm so that orders `0..=nmax` carry
/// about 15 significant digits.
fn miller_start(nmax: usize, x: f64) -> usize {
    let base = (1.1 * x) as usize + 1;
    let overall = scan_envelope(base, x, 200.0);
    let start = if overall >= nmax {
        overall
    } else {
        let mp = 15.0;
        let ejn = envelope(nmax.max(1) as f64, x);
        let (obj, from) = if ejn <= 0.5 * mp {
            (mp, base)
        } else {
            (0.5 * mp + ejn, nmax)
        };
        scan_envelope(from, x, obj) + 10
    };
    let start = start.max(nmax + 2);
    start + start % 2
}

/// Normalised J_0..=J_m(x) from Miller's recurrence, with `m >= nmax`.
fn miller_sequence(nmax: usize, x: f64) -> Vec<f64> {
    debug_assert!(x > 0.0);
    let m = miller_start(nmax, x);
    let mut f = vec![0.0; m + 1];
    let mut next = 0.0;
    let mut cur = 1.0e-300;
    f[m] = cur;
    let mut norm = 0.0;
    if m.is_multiple_of(2) {
        norm += 2.0 * cur;
    }
    for k in (0..m).rev() {
        let prev = 2.0 * (k as f64 + 1.0) / x * cur - next;
        next = cur;
        cur = prev;
        f[k] = cur;
        if k % 2 == 0 {
            norm += if k == 0 { cur } else { 2.0 * cur };
        }
        if cur.abs() > RESCALE_THRESHOLD {
            let s = 1.0 / RESCALE_THRESHOLD;
            for v in f[k..].iter_mut() {
                *v *= s;
            }
            next *= s;
            cur *= s;
            norm *= s;
        }
    }
    for v in f.iter_mut() {
        *v /= norm;
    }
    f
}

/// J_0(x), ..., J_nmax(x).
pub fn bessel_j_seq(nmax: u32, x: f64) -> Result<Vec<f64>> {
    check_real("bessel_j", nmax, x)?;
    if x == 0.0 {
        let mut v = vec![0.0; nmax as usize + 1];
        v[0] = 1.0;
        return Ok(v);
    }
    let mut f = miller_sequence(nmax as usize, x);
    f.truncate(nmax as usize + 1);
    Ok(f)
}

/// Bessel function of the first kind J_order(x) for x >= 0.
pub fn bessel_j(order: u32, x: f64) -> Result<f64> {
    Ok(bessel_j_seq(order, x)?[order as usize])
}

/// Hankel asymptotic P and Q for integer order `nu` (x large).
fn hankel_pq(nu: f64, x: f64) -> (f64, f64) {
    let mu = 4.0 * nu * nu;
    let mut p = 1.0;
    let mut q = 0.0;
    let mut term: f64 = 1.0;
    let mut last = f64::INFINITY;
    for k in 1..200 {
        let odd = (2 * k - 1) as f64;
        let t = term * (mu - odd * odd) / (k as f64 * 8.0 * x);
        if t.abs() > last || t == 0.0 {
            break;
        }
        term = t;
        last = t.abs();
        let sign = if (k / 2) % 2 == 0 { 1.0 } else { -1.0 };
        if k % 2 == 0 {
            p += sign * term;
        } else {
            q += sign * term;
        }
        if term.abs() < 1e-17 * p.abs().max(q.abs()) {
            break;
        }
    }
    (p, q)
}

/// (Y_0(x), Y_1(x)) for x > 0 given the Miller sequence at the same x.
fn y01(x: f64, j: &[f64]) -> (f64, f64) {
    if x >= REAL_ASYMPTOTIC_LIMIT {
        let amp = (2.0 / (PI * x)).sqrt();
        let (p0, q0) = hankel_pq(0.0, x);
        let (p1, q1) = hankel_pq(1.0, x);
        let chi0 = x - FRAC_PI_4;
        let chi1 = x - 3.0 * FRAC_PI_4;
        let y0 = amp * (p0 * chi0.sin() + q0 * chi0.cos());
        let y1 = amp * (p1 * chi1.sin() + q1 * chi1.cos());
        return (y0, y1);
    }
    let log_term = (0.5 * x).ln();
    let m = j.len() - 1;

    // Sum from high orders down so the smallest terms accumulate first.
    let mut s0 = 0.0;
    let mut k = m / 2;
    while k >= 1 {
        let sign = if k.is_multiple_of(2) { 1.0 } else { -1.0 };
        s0 += sign * j[2 * k] / k as f64;
        k -= 1;
    }
    let y0 = 2.0 / PI * ((log_term + EULER_GAMMA) * j[0] - 2.0 * s0);

    let mut s1 = 0.0;
    let mut k = (m - 1) / 2;
    while k >= 1 {
        let sign = if k.is_multiple_of(2) { 1.0 } else { -1.0 };
        let kf = k as f64;
        s1 += sign * (2.0 * kf + 1.0) * j[2 * k + 1] / (kf * (kf + 1.0));
        k -= 1;
    }
    let psi2 = 1.0 - EULER_GAMMA;
    let y1 = 2.0 / PI * (-j[0] / x + (log_term - psi2) * j[1] - s1);
    (y0, y1)
}

/// Y_0(x), ..., Y_nmax(x) for x > 0.
pub fn bessel_y_seq(nmax: u32, x: f64) -> Result<Vec<f64>> {
    check_hankel("bessel_y", nmax, x)?;
    let j = miller_sequence(nmax.max(1) as usize, x);
    y_from_j(nmax, x, &j)
}

fn y_from_j(nmax: u32, x: f64, j: &[f64]) -> Result<Vec<f64>> {
    let (y0, y1) = y01(x, j);
    let mut y = Vec::with_capacity(nmax as usize + 1);
    y.push(y0);
    if nmax >= 1 {
        y.push(y1);
    }
    for n in 1..nmax as usize {
        let next = 2.0 * n as f64 / x * y[n] - y[n - 1];
        if !next.is_finite() {
            return Err(Error::Overflow {
                function: "bessel_y",
                order: n as u32 + 1,
                x,
            });
        }
        y.push(next);
    }
    Ok(y)
}

/// H^(2)_0(x), ..., H^(2)_nmax(x) = J_n(x) - j Y_n(x) for x > 0.
pub fn hankel2_seq(nmax: u32, x: f64) -> Result<Vec<Complex64>> {
    check_hankel("hankel2", nmax, x)?;
    let j = miller_sequence(nmax.max(1) as usize, x);
    let y = y_from_j(nmax, x, &j)?;
    Ok(j.iter()
        .zip(y.iter())
        .map(|(&jn, &yn)| Complex64::new(jn, -yn))
        .collect())
}

/// Second-kind Hankel function H^(2)_order(x).
pub fn hankel2(order: u32, x: f64) -> Result<Complex64> {
    Ok(hankel2_seq(order, x)?[order as usize])
}

/// Derivatives C_n'(x) of a cylinder-function sequence holding orders
/// `0..=nmax + 1`.
fn derivative_from_seq<T>(seq: &[T], nmax: usize) -> Vec<T>
where
    T: Copy + std::ops::Sub<Output = T> + std::ops::Mul<f64, Output = T> + std::ops::Neg<Output = T>,
{
    (0..=nmax)
        .map(|n| {
            if n == 0 {
                -seq[1]
            } else {
                (seq[n - 1] - seq[n + 1]) * 0.5
            }
        })
        .collect()
}

/// J_n'(x) for n = 0..=nmax.
pub fn bessel_j_deriv_seq(nmax: u32, x: f64) -> Result<Vec<f64>> {
    check_real("bessel_j_deriv", nmax, x)?;
    if x == 0.0 {
        let mut d = vec![0.0; nmax as usize + 1];
        if nmax >= 1 {
            d[1] = 0.5;
        }
        return Ok(d);
    }
    let j = miller_sequence(nmax as usize + 1, x);
    Ok(derivative_from_seq(&j, nmax as usize))
}

pub fn bessel_j_deriv(order: u32, x: f64) -> Result<f64> {
    Ok(bessel_j_deriv_seq(order, x)?[order as usize])
}

/// H^(2)_n'(x) for n = 0..=nmax.
pub fn hankel2_deriv_seq(nmax: u32, x: f64) -> Result<Vec<Complex64>> {
    check_hankel("hankel2_deriv", nmax, x)?;
    let j = miller_sequence(nmax as usize + 1, x);
    let y = y_from_j(nmax + 1, x, &j)?;
    let h: Vec<Complex64> = (0..=nmax as usize + 1)
        .map(|n| Complex64::new(j[n], -y[n]))
        .collect();
    Ok(derivative_from_seq(&h, nmax as usize))
}

pub fn hankel2_deriv(order: u32, x: f64) -> Result<Complex64> {
    Ok(hankel2_deriv_seq(order, x)?[order as usize])
}

/// J_0(z) for complex z with |z| <= 100 and |Im z| <= 30.
pub fn bessel_j0_complex(z: Complex64) -> Result<Complex64> {
    if !z.re.is_finite() || !z.im.is_finite() {
        return Err(domain("bessel_j0_complex", format!("non-finite argument {z}")));
    }
    if z.norm() > MAX_COMPLEX_ABS || z.im.abs() > MAX_COMPLEX_IMAG {
        return Err(domain(
            "bessel_j0_complex",
            format!("argument {z} outside |z| <= {MAX_COMPLEX_ABS}, |Im z| <= {MAX_COMPLEX_IMAG}"),
        ));
    }
    if z.im == 0.0 {
        return Ok(Complex64::new(bessel_j(0, z.re.abs())?, 0.0));
    }
    // J0 is even; fold onto the right half-plane.
    let z = if z.re < 0.0 { -z } else { z };
    if z.norm() <= COMPLEX_SERIES_LIMIT {
        Ok(j0_series(z))
    } else {
        Ok(j0_asymptotic(z))
    }
}

fn j0_series(z: Complex64) -> Complex64 {
    // w = -z^2 / 4, formed exactly in double-double.
    let re2 = DoubleDouble::product(z.re, z.re) + -DoubleDouble::product(z.im, z.im);
    let reim = DoubleDouble::product(z.re, z.im);
    let w = ComplexDd {
        re: (-re2).scale(0.25),
        im: (-reim).scale(0.5),
    };
    let mut term = ComplexDd::ONE;
    let mut sum = ComplexDd::ONE;
    let w_abs = w.norm_hi();
    for k in 1..400 {
        let kf = k as f64;
        term = (term * w).div_f64(kf * kf);
        sum = sum + term;
        if kf * kf > w_abs && term.norm_hi() < 1e-20 * sum.norm_hi() {
            break;
        }
    }
    Complex64::new(sum.re.to_f64(), sum.im.to_f64())
}

fn j0_asymptotic(z: Complex64) -> Complex64 {
    let mut p = Complex64::new(1.0, 0.0);
    let mut q = Complex64::new(0.0, 0.0);
    let mut term = Complex64::new(1.0, 0.0);
    let mut last = f64::INFINITY;
    for k in 1..200 {
        let odd = (2 * k - 1) as f64;
        let t = term * (-odd * odd) / (z * (k as f64 * 8.0));
        let mag = t.norm();
        if mag > last {
            break;
        }
        term = t;
        last = mag;
        let sign = if (k / 2) % 2 == 0 { 1.0 } else { -1.0 };
        if k % 2 == 0 {
            p += term * sign;
        } else {
            q += term * sign;
        }
        if mag < 1e-17 {
            break;
        }
    }
    let chi = z - FRAC_PI_4;
    let amp = (Complex64::new(2.0 / PI, 0.0) / z).sqrt();
    amp * (p * chi.cos() - q * chi.sin())
}

/// Spherical Bessel j_0(z) = sin z / z for complex z.
pub fn spherical_j0_complex(z: Complex64) -> Complex64 {
    if z.norm() < 1e-3 {
        let z2 = z * z;
        return Complex64::new(1.0, 0.0) - z2 / 6.0 + z2 * z2 / 120.0 - z2 * z2 * z2 / 5040.0;
    }
    z.sin() / z
}
