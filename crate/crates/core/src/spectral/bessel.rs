//! Bessel functions of integer and half-integer order, and the zeros needed
//! by the ball and annulus eigenproblems.
//!
//! `J_nu` uses its power series for `x <= 5` (or `x <= nu + 2` for
//! half-integer orders). Beyond that, integer
//! orders use Miller's backward recurrence normalized by
//! `J_0 + 2 sum J_2k = 1`, and half-integer orders the closed-form spherical
//! Bessel recurrence. `Y_0` and `Y_1` come from the Neumann series in the
//! Miller sequence, which keeps ~1e-15 absolute accuracy on `[1e-3, 50]`.

use crate::error::{invalid, Error, Result};
use statrs::function::gamma::ln_gamma;
use std::f64::consts::PI;

const EULER_GAMMA: f64 = 0.577_215_664_901_532_9;

fn is_integer(nu: f64) -> bool {
    nu.fract() == 0.0
}

fn is_half_integer(nu: f64) -> bool {
    (nu - 0.5).fract() == 0.0
}

fn series_j(nu: f64, x: f64) -> f64 {
    let half = 0.5 * x;
    let q = -half * half;
    let mut term = (nu * half.ln() - ln_gamma(nu + 1.0)).exp();
    let mut pos = 0.0;
    let mut neg = 0.0;
    for k in 0..300 {
        if term >= 0.0 {
            pos += term;
        } else {
            neg += term;
        }
        let kk = k as f64 + 1.0;
        term *= q / (kk * (kk + nu));
        if term.abs() < 1e-18 * (pos + neg).abs().max(1e-300) && k > 2 {
            break;
        }
    }
    pos + neg
}

/// `J_0(x), ..., J_nmax(x)` for `x > 0` by Miller's backward recurrence.
pub fn bessel_j_sequence(x: f64, nmax: usize) -> Vec<f64> {
    assert!(x > 0.0);
    let top = nmax.max(x as usize);
    let mut m = top + 30 + (40.0 * top as f64).sqrt() as usize;
    if m % 2 == 1 {
        m += 1;
    }
    let mut seq = vec![0.0; m + 2];
    seq[m] = 1e-300;
    for k in (1..=m).rev() {
        seq[k - 1] = 2.0 * k as f64 / x * seq[k] - seq[k + 1];
        if seq[k - 1].abs() > 1e250 {
            for v in seq.iter_mut().skip(k - 1) {
                *v *= 1e-250;
            }
        }
    }
    let mut norm = seq[0];
    for k in (2..=m).step_by(2) {
        norm += 2.0 * seq[k];
    }
    seq.truncate(nmax.max(1) + 1);
    for v in seq.iter_mut() {
        *v /= norm;
    }
    seq.truncate(nmax + 1);
    seq
}

fn spherical_j(n: usize, x: f64) -> f64 {
    let (s, c) = x.sin_cos();
    let j0 = s / x;
    if n == 0 {
        return j0;
    }
    let mut a = j0;
    let mut b = s / (x * x) - c / x;
    for k in 1..n {
        let next = (2 * k + 1) as f64 / x * b - a;
        a = b;
        b = next;
    }
    b
}

/// Bessel function of the first kind `J_nu(x)`.
pub fn bessel_j(nu: f64, x: f64) -> Result<f64> {
    if x < 0.0 || x.is_nan() {
        return invalid(format!("bessel_j needs x >= 0, got {x}"));
    }
    if nu < -1.0 {
        return invalid(format!("bessel_j needs nu >= -1, got {nu}"));
    }
    if nu == -1.0 {
        return bessel_j(1.0, x).map(|v| -v);
    }
    if nu == -0.5 {
        return Ok(if x == 0.0 { f64::INFINITY } else { (2.0 / (PI * x)).sqrt() * x.cos() });
    }
    if x == 0.0 {
        return Ok(if nu == 0.0 { 1.0 } else { 0.0 });
    }
    let switch = if is_integer(nu) { 5.0 } else { 5.0f64.max(nu + 2.0) };
    if x <= switch {
        return Ok(series_j(nu, x));
    }
    if is_integer(nu) {
        let n = nu as usize;
        return Ok(bessel_j_sequence(x, n)[n]);
    }
    if is_half_integer(nu) {
        let n = (nu - 0.5) as usize;
        return Ok((2.0 * x / PI).sqrt() * spherical_j(n, x));
    }
    Err(Error::Unsupported(format!("J_nu for nu={nu} beyond the series range")))
}

/// `J_nu'(x) = J_{nu-1}(x) - (nu/x) J_nu(x)`.
pub fn bessel_j_prime(nu: f64, x: f64) -> Result<f64> {
    if nu == 0.0 {
        return bessel_j(1.0, x).map(|v| -v);
    }
    if nu == -0.5 {
        return Ok(-(2.0 / (PI * x)).sqrt() * (x.sin() + x.cos() / (2.0 * x)));
    }
    if x == 0.0 {
        return Ok(if nu == 1.0 { 0.5 } else { 0.0 });
    }
    Ok(bessel_j(nu - 1.0, x)? - nu / x * bessel_j(nu, x)?)
}

/// Bessel function of the second kind `Y_nu(x)` for `nu` in `{0, 1}`.
pub fn bessel_y(nu: u32, x: f64) -> Result<f64> {
    if !(x > 0.0) {
        return invalid(format!("bessel_y needs x > 0, got {x}"));
    }
    if nu > 1 {
        return Err(Error::Unsupported(format!("Y_{nu}")));
    }
    let kmax = (x as usize) / 2 + 40;
    let j = bessel_j_sequence(x, 2 * kmax + 1);
    let lg = (0.5 * x).ln() + EULER_GAMMA;
    if nu == 0 {
        let mut sum = 0.0;
        for k in (1..=kmax).rev() {
            let s = if k % 2 == 0 { 1.0 } else { -1.0 };
            sum += s * j[2 * k] / k as f64;
        }
        Ok(2.0 / PI * lg * j[0] - 4.0 / PI * sum)
    } else {
        let mut sum = 0.0;
        for k in (1..=kmax).rev() {
            let s = if k % 2 == 0 { 1.0 } else { -1.0 };
            sum += s * (j[2 * k - 1] - j[2 * k + 1]) / k as f64;
        }
        Ok(-2.0 / PI * j[0] / x + 2.0 / PI * lg * j[1] + 2.0 / PI * sum)
    }
}

fn bisect<F: FnMut(f64) -> Result<f64>>(mut f: F, mut a: f64, mut b: f64) -> Result<f64> {
    let mut fa = f(a)?;
    for _ in 0..200 {
        let m = 0.5 * (a + b);
        if m <= a || m >= b {
            break;
        }
        let fm = f(m)?;
        if fm == 0.0 {
            return Ok(m);
        }
        if (fm > 0.0) == (fa > 0.0) {
            a = m;
            fa = fm;
        } else {
            b = m;
        }
    }
    let fb = f(b)?;
    Ok(if fa.abs() < fb.abs() { a } else { b })
}

/// First positive zero `z0` of `J_nu` with `J_nu'(z0)`.
///
/// Brackets on a grid of spacing pi/4 starting below the zero, then bisects
/// to machine precision.
pub fn first_bessel_zero(nu: f64) -> Result<(f64, f64)> {
    if nu < -0.5 {
        return invalid("first_bessel_zero needs nu >= -1/2");
    }
    let step = PI / 4.0;
    let mut a = nu.max(0.0) + 0.5 * step;
    let mut fa = bessel_j(nu, a)?;
    for _ in 0..400 {
        let b = a + step;
        let fb = bessel_j(nu, b)?;
        if (fa > 0.0) != (fb > 0.0) || fb == 0.0 {
            let z = bisect(|x| bessel_j(nu, x), a, b)?;
            let d = bessel_j_prime(nu, z)?;
            if d.abs() < 1e-3 {
                return Err(Error::Numerical(format!("zero of J_{nu} at {z} is not simple")));
            }
            return Ok((z, d));
        }
        a = b;
        fa = fb;
    }
    Err(Error::Bracketing(format!("no sign change of J_{nu} found")))
}

/// Cross product `J0(R1 z) Y0(R2 z) - Y0(R1 z) J0(R2 z)`.
pub fn cross_product(r1: f64, r2: f64, z: f64) -> Result<f64> {
    Ok(bessel_j(0.0, r1 * z)? * bessel_y(0, r2 * z)? - bessel_y(0, r1 * z)? * bessel_j(0.0, r2 * z)?)
}

/// Smallest positive root of the annulus cross product.
///
/// Roots are spaced roughly `pi/(R2 - R1)` apart, so the scan uses a grid
/// of spacing `pi/(4 (R2 - R1))`.
pub fn cross_product_zero(r1: f64, r2: f64) -> Result<f64> {
    if !(r1 > 0.0 && r2 > r1) {
        return invalid("cross_product_zero needs 0 < R1 < R2");
    }
    let step = PI / (4.0 * (r2 - r1));
    let mut a = 0.5 * step;
    let mut fa = cross_product(r1, r2, a)?;
    for _ in 0..10_000 {
        let b = a + step;
        let fb = cross_product(r1, r2, b)?;
        if (fa > 0.0) != (fb > 0.0) || fb == 0.0 {
            return bisect(|z| cross_product(r1, r2, z), a, b);
        }
        a = b;
        fa = fb;
    }
    Err(Error::Bracketing("no sign change of the cross product".into()))
}

/// `Z(r) = J0(R1 z0) Y0(r z0) - Y0(R1 z0) J0(r z0)`.
pub fn annulus_z(r: f64, r1: f64, _r2: f64, z0: f64) -> Result<f64> {
    Ok(bessel_j(0.0, r1 * z0)? * bessel_y(0, r * z0)? - bessel_y(0, r1 * z0)? * bessel_j(0.0, r * z0)?)
}

/// `Z'(r)`, using `J0' = -J1` and `Y0' = -Y1`.
pub fn annulus_z_prime(r: f64, r1: f64, z0: f64) -> Result<f64> {
    Ok(-z0 * (bessel_j(0.0, r1 * z0)? * bessel_y(1, r * z0)? - bessel_y(0, r1 * z0)? * bessel_j(1.0, r * z0)?))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quadrature::GaussRule;

    // independent oracle: plain power series with exact rational prefactors
    fn j0_series_oracle(x: f64) -> f64 {
        let mut s = 0.0;
        let mut fact = 1.0f64;
        for k in 0..40 {
            if k > 0 {
                fact *= k as f64;
            }
            let t = (0.5 * x).powi(2 * k) / (fact * fact);
            s += if k % 2 == 0 { t } else { -t };
        }
        s
    }

    #[test]
    fn j_special_values() {
        assert!(bessel_j(0.5, PI).unwrap().abs() < 1e-15);
        assert_eq!(bessel_j(0.0, 0.0).unwrap(), 1.0);
        let v = bessel_j(0.0, 1.0).unwrap();
        assert!((v - j0_series_oracle(1.0)).abs() < 1e-15);
        assert!((v - 0.765_197_686_557_966_6).abs() < 1e-15);
        assert!(bessel_j(0.0, -1.0).is_err());
    }

    #[test]
    fn j_matches_integral_representation() {
        // J_n(x) = (1/pi) int_0^pi cos(n t - x sin t) dt
        let rule = GaussRule::new(40);
        for n in 0..4 {
            for &x in &[0.3, 2.0, 7.9, 8.5, 15.0, 30.0, 49.0] {
                let oracle = rule.integrate(0.0, PI, 64, |t| (n as f64 * t - x * t.sin()).cos()) / PI;
                let v = bessel_j(n as f64, x).unwrap();
                assert!((v - oracle).abs() < 1e-13, "J_{n}({x}) = {v} vs {oracle}");
            }
        }
        for &x in &[0.5, 9.0, 20.0] {
            let v = bessel_j(1.5, x).unwrap();
            let exact = (2.0 / (PI * x)).sqrt() * (x.sin() / x - x.cos());
            assert!((v - exact).abs() < 1e-14);
        }
    }

    #[test]
    fn y_values() {
        assert!(bessel_y(0, 1e-3).unwrap() < -4.0);
        let x = 2.0;
        let w = bessel_j(0.0, x).unwrap() * bessel_y(1, x).unwrap() - bessel_j(1.0, x).unwrap() * bessel_y(0, x).unwrap();
        assert!((w + 2.0 / (PI * x)).abs() < 1e-10);
        // Y0(x) = (1/pi) int_0^pi sin(x sin t) dt - (2/pi) int_0^inf exp(-x sinh t) dt
        let rule = GaussRule::new(40);
        let x = 5.0;
        let a = rule.integrate(0.0, PI, 64, |t| (x * t.sin()).sin()) / PI;
        let b = rule.integrate(0.0, 6.0, 256, |t| (-x * t.sinh()).exp()) * 2.0 / PI;
        assert!((bessel_y(0, x).unwrap() - (a - b)).abs() < 1e-12);
        for &x in &[1e-3, 0.1, 3.0, 10.0, 25.0, 50.0] {
            let w = bessel_j(0.0, x).unwrap() * bessel_y(1, x).unwrap() - bessel_j(1.0, x).unwrap() * bessel_y(0, x).unwrap();
            assert!((w * x * PI / 2.0 + 1.0).abs() < 1e-10, "x={x} w={w}");
        }
    }

    #[test]
    fn zeros() {
        let (z, d) = first_bessel_zero(0.5).unwrap();
        assert!((z - PI).abs() < 1e-14 && d.abs() > 1e-3);
        let (z, _) = first_bessel_zero(0.0).unwrap();
        assert!(z > 2.404825 && z < 2.404826);
        assert!(bessel_j(0.0, z).unwrap().abs() < 1e-12);
        let (z, _) = first_bessel_zero(1.0).unwrap();
        assert!(z > 3.8317 && z < 3.8318);
        for nu in 0..=20 {
            let nu = nu as f64 * 0.5;
            let (z, d) = first_bessel_zero(nu).unwrap();
            assert!(bessel_j(nu, z).unwrap().abs() < 1e-12, "nu={nu}");
            assert!(d.abs() > 1e-3);
        }
    }

    #[test]
    fn annulus_zero() {
        let z0 = cross_product_zero(1.0, 3.0).unwrap();
        assert!(cross_product(1.0, 3.0, z0).unwrap().abs() < 1e-10);
        let z2 = cross_product_zero(2.0, 6.0).unwrap();
        assert!((z2 - z0 / 2.0).abs() < 1e-9);
        assert!(cross_product_zero(1.0, 1.05).unwrap() > z0);
        assert!(annulus_z(1.0, 1.0, 3.0, z0).unwrap().abs() < 1e-9);
        assert!(annulus_z(3.0, 1.0, 3.0, z0).unwrap().abs() < 1e-9);
        let h = 1e-6;
        let fd = (annulus_z(1.0 + h, 1.0, 3.0, z0).unwrap() - annulus_z(1.0 - h, 1.0, 3.0, z0).unwrap()) / (2.0 * h);
        assert!((fd / z0 - 2.0 / (PI * z0)).abs() < 1e-8);
        assert!((annulus_z_prime(1.0, 1.0, z0).unwrap() / z0 - 2.0 / (PI * z0)).abs() < 1e-10);
        assert!(annulus_z_prime(3.0, 1.0, z0).unwrap().abs() > 1e-3);
        assert!(annulus_z(2.0, 1.0, 3.0, z0).unwrap() > 0.0);
    }
}
