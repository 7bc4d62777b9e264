//! Dirichlet and Neumann heat kernels of `∂_t - Δ` on intervals and boxes,
//! Gaussian bound envelopes, and the initial-data functionals `J`, `J_c`,
//! `Ψ`, `Ψ*` and `J*_c`.

use crate::error::{invalid, Error, Result};
use crate::geometry::Domain;
use crate::measure::InitialMeasure;
use crate::spectral::{leading_eigenpair, phi1_measure_integral, Bc, EigenPair};
use serde::{Deserialize, Serialize};
use statrs::function::erf::erfc;
use std::f64::consts::PI;

/// Exact heat kernel on an interval or box.
#[derive(Clone, Debug)]
pub struct HeatKernel {
    pub domain: Domain,
    pub bc: Bc,
    /// Maximum number of 1-D modes in the eigen-expansion.
    pub n_modes: usize,
    /// Times below this use the method of images.
    pub t_switch: f64,
    l: f64,
    d: usize,
}

impl HeatKernel {
    /// Kernel with 256 modes and `t_switch = 0.05 L²`.
    pub fn new(domain: &Domain, bc: Bc) -> Result<Self> {
        Self::with_modes(domain, bc, 256)
    }

    pub fn with_modes(domain: &Domain, bc: Bc, n_modes: usize) -> Result<Self> {
        domain.validate()?;
        let (l, d) = match domain {
            Domain::Interval { l } => (*l, 1),
            Domain::Box { d, l } => (*l, *d),
            _ => {
                return Err(Error::Unsupported(
                    "exact heat kernels exist only for Interval and Box; use envelopes".into(),
                ))
            }
        };
        if n_modes == 0 {
            return invalid("need at least one mode");
        }
        Ok(HeatKernel { domain: domain.clone(), bc, n_modes, t_switch: 0.05 * l * l, l, d })
    }

    pub fn length(&self) -> f64 {
        self.l
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    /// `G(t, x, y)`.
    pub fn eval(&self, t: f64, x: &[f64], y: &[f64]) -> Result<f64> {
        if !(t > 0.0) {
            return invalid(format!("kernel needs t > 0, got {t}"));
        }
        if x.len() != self.d || y.len() != self.d {
            return Err(Error::Dimension { expected: self.d, got: x.len().min(y.len()) });
        }
        Ok(x.iter().zip(y).map(|(&a, &b)| self.eval_1d(t, a, b)).product())
    }

    /// One-dimensional factor of the kernel.
    pub fn eval_1d(&self, t: f64, x: f64, y: f64) -> f64 {
        if t >= self.t_switch {
            self.eigen_sum(t, x, y)
        } else {
            self.image_sum(t, x, y)
        }
    }

    pub fn eigen_sum(&self, t: f64, x: f64, y: f64) -> f64 {
        let l = self.l;
        let mut acc = if self.bc == Bc::Neumann { 1.0 / l } else { 0.0 };
        for k in 1..=self.n_modes {
            let w = (k as f64 * PI / l).powi(2);
            let decay = (-w * t).exp();
            if k > 1 && decay < 1e-18 * (-PI * PI * t / (l * l)).exp() {
                break;
            }
            let a = k as f64 * PI / l;
            let term = match self.bc {
                Bc::Dirichlet => (a * x).sin() * (a * y).sin(),
                Bc::Neumann => (a * x).cos() * (a * y).cos(),
            };
            acc += 2.0 / l * decay * term;
        }
        acc
    }

    pub fn image_sum(&self, t: f64, x: f64, y: f64) -> f64 {
        let l = self.l;
        let pref = 1.0 / (4.0 * PI * t).sqrt();
        let sign = if self.bc == Bc::Dirichlet { -1.0 } else { 1.0 };
        let g = |z: f64| (-z * z / (4.0 * t)).exp();
        let mut acc = g(x - y) + sign * g(x + y);
        for n in 1..10_000 {
            let s = 2.0 * n as f64 * l;
            let terms = g(x - y + s) + g(x - y - s) + sign * (g(x + y + s) + g(x + y - s));
            acc += terms;
            if g(s - 2.0 * l).max(g(s - l)) < 1e-16 && n > 1 {
                break;
            }
        }
        pref * acc
    }

    /// `∫_U G(t, x, y) dy` in closed form from the eigen-expansion (1-D
    /// factors multiplied for boxes).
    pub fn mass(&self, t: f64, x: &[f64]) -> f64 {
        let l = self.l;
        x.iter()
            .map(|&xi| match self.bc {
                Bc::Neumann => 1.0,
                Bc::Dirichlet => {
                    if t < self.t_switch {
                        // each image integrates to a difference of Gaussian CDFs
                        let sd = (2.0 * t).sqrt();
                        let cdf = |z: f64| 0.5 * erfc(-z / (sd * std::f64::consts::SQRT_2));
                        let band = |c: f64| cdf(c) - cdf(c - l);
                        let mut m = band(xi) - band(xi + l);
                        for n in 1..2000 {
                            let s = 2.0 * n as f64 * l;
                            let dm = band(xi + s) + band(xi - s) - band(xi + l + s) - band(xi + l - s);
                            m += dm;
                            if dm.abs() < 1e-18 && n > 1 {
                                break;
                            }
                        }
                        m
                    } else {
                        let mut acc = 0.0;
                        for k in (1..=self.n_modes).step_by(2) {
                            let a = k as f64 * PI / l;
                            let decay = (-a * a * t).exp();
                            if k > 1 && decay < 1e-18 * (-PI * PI * t / (l * l)).exp() {
                                break;
                            }
                            acc += 4.0 / (k as f64 * PI) * decay * (a * xi).sin();
                        }
                        acc
                    }
                }
            })
            .product()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Side {
    Upper,
    Lower,
}

/// Gaussian envelope
/// `C (1 ∧ Φ1(x)/(1 ∧ t^{a/2})) (1 ∧ Φ1(y)/(1 ∧ t^{a/2})) e^{-μ t} e^{-c|x-y|²/t} / (1 ∧ t^{d/2})`;
/// Neumann envelopes drop the boundary factors.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoundEnvelope {
    #[serde(rename = "C")]
    pub amp: f64,
    pub c: f64,
    pub a: f64,
    pub mu: f64,
    pub side: Side,
}

impl BoundEnvelope {
    pub fn validate(&self) -> Result<()> {
        if !(self.amp > 0.0 && self.c > 0.0 && self.a > 0.0 && self.mu >= 0.0) {
            return invalid("envelope needs C > 0, c > 0, a > 0, mu >= 0");
        }
        Ok(())
    }
}

fn dist2(x: &[f64], y: &[f64]) -> f64 {
    x.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum()
}

fn boundary_factor(eig: &EigenPair, a: f64, t: f64, x: &[f64]) -> f64 {
    if eig.bc == Bc::Neumann {
        return 1.0;
    }
    (eig.phi1(x) / t.powf(a / 2.0).min(1.0)).min(1.0)
}

/// Shape of the envelope with unit amplitude.
fn envelope_shape(c: f64, a: f64, mu: f64, eig: &EigenPair, t: f64, x: &[f64], y: &[f64]) -> f64 {
    let d = x.len() as f64;
    boundary_factor(eig, a, t, x) * boundary_factor(eig, a, t, y) * (-mu * t).exp() / t.powf(d / 2.0).min(1.0)
        * (-c * dist2(x, y) / t).exp()
}

pub fn envelope_eval(env: &BoundEnvelope, eig: &EigenPair, t: f64, x: &[f64], y: &[f64]) -> f64 {
    env.amp * envelope_shape(env.c, env.a, env.mu, eig, t, x, y)
}

/// Result of fitting an envelope to kernel samples.
#[derive(Clone, Copy, Debug)]
pub struct EnvelopeFit {
    pub envelope: BoundEnvelope,
    /// `exp(max - min)` of the log residuals: kernel / envelope stays in
    /// `[1/kappa, 1]` (upper) or `[1, kappa]` (lower) on the fit grid.
    pub kappa: f64,
}

/// Fits `(log C, c)` by least squares of `log G - log shape` against
/// `|x-y|²/t`, then shifts `C` so the envelope dominates (upper) or is
/// dominated by (lower) every sample. Samples are `(t, x, y, G)`.
pub fn fit_envelope(samples: &[(f64, Vec<f64>, Vec<f64>, f64)], eig: &EigenPair, a: f64, side: Side) -> Result<EnvelopeFit> {
    let mu = eig.mu1;
    let pts: Vec<(f64, f64)> = samples
        .iter()
        .filter(|s| s.3 > 0.0)
        .map(|(t, x, y, g)| {
            let base = envelope_shape(0.0, a, mu, eig, *t, x, y);
            (dist2(x, y) / t, g.ln() - base.ln())
        })
        .filter(|p| p.1.is_finite())
        .collect();
    if pts.len() < 3 {
        return invalid("not enough positive samples to fit an envelope");
    }
    let n = pts.len() as f64;
    let mq = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let mr = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sqq: f64 = pts.iter().map(|p| (p.0 - mq).powi(2)).sum();
    let sqr: f64 = pts.iter().map(|p| (p.0 - mq) * (p.1 - mr)).sum();
    let slope = if sqq > 0.0 { sqr / sqq } else { 0.0 };
    let c = (-slope).max(1e-6);
    let resid: Vec<f64> = pts.iter().map(|p| p.1 + c * p.0).collect();
    let hi = resid.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let lo = resid.iter().cloned().fold(f64::INFINITY, f64::min);
    let log_c = match side {
        Side::Upper => hi,
        Side::Lower => lo,
    };
    Ok(EnvelopeFit {
        envelope: BoundEnvelope { amp: log_c.exp(), c, a, mu, side },
        kappa: (hi - lo).exp(),
    })
}

/// Envelope fit of the interval kernel over a log-spaced grid
/// `t in [1e-3, 5]` and interior `(x, y)` pairs.
pub fn fit_interval_envelope(l: f64, bc: Bc, side: Side) -> Result<EnvelopeFit> {
    let dom = Domain::interval(l);
    let hk = HeatKernel::new(&dom, bc)?;
    let eig = leading_eigenpair(&dom, bc)?;
    let mut samples = Vec::new();
    for it in 0..=16 {
        let t = 1e-3 * (5.0f64 / 1e-3).powf(it as f64 / 16.0);
        for ix in 1..20 {
            for iy in 1..20 {
                let x = l * ix as f64 / 20.0;
                let y = l * iy as f64 / 20.0;
                // keep samples inside the Gaussian core where the kernel is resolved in f64
                if (x - y).powi(2) / t > 40.0 {
                    continue;
                }
                let g = hk.eval(t, &[x], &[y])?;
                samples.push((t, vec![x], vec![y], g));
            }
        }
    }
    fit_envelope(&samples, &eig, 1.0, side)
}

/// `J(t, x) = ∫ G(t, x, y) nu(dy)`.
pub fn homogeneous_solution(hk: &HeatKernel, nu: &InitialMeasure, t: f64, x: &[f64]) -> Result<f64> {
    if !(t > 0.0) {
        return invalid("t must be positive");
    }
    nu.integrate(&hk.domain, |y| hk.eval(t, x, y).unwrap_or(f64::NAN))
}

/// `J_c(t, x) = ∫ e^{-c|x-y|²/t} / (1 ∧ t^{d/2}) |nu|(dy)`, over `U_eps` when
/// `eps` is given.
pub fn j_c(domain: &Domain, nu: &InitialMeasure, c: f64, t: f64, x: &[f64], eps: Option<f64>) -> Result<f64> {
    if !(c > 0.0 && t > 0.0) {
        return invalid("J_c needs c > 0 and t > 0");
    }
    let d = domain.dim() as f64;
    let pref = 1.0 / t.powf(d / 2.0).min(1.0);
    let g = |y: &[f64]| pref * (-c * dist2(x, y) / t).exp();
    match eps {
        Some(e) => nu.integrate_abs_inner(domain, e, g),
        None => nu.integrate_abs(domain, g),
    }
}

/// `Ψ(t, x) = 1 ∧ Φ1(x) / (1 ∧ t^{1/2})`.
pub fn psi(eig: &EigenPair, t: f64, x: &[f64]) -> f64 {
    (eig.phi1(x) / t.sqrt().min(1.0)).min(1.0)
}

/// Product form `Ψ*(t, x) = Π_i (1 ∧ Φ1^{U_i}(x_i) / (1 ∧ t^{1/2}))`.
pub fn psi_star(eig: &EigenPair, t: f64, x: &[f64]) -> f64 {
    let mut off = 0;
    let mut p = 1.0;
    for (k, e) in eig.factors() {
        p *= psi(&e, t, &x[off..off + k]);
        off += k;
    }
    p
}

/// `J*_c(t, x) = ∫ Ψ(t, y) e^{-c|x-y|²/t} / (1 ∧ t^{d/2}) |nu|(dy)`.
pub fn j_c_star(domain: &Domain, eig: &EigenPair, nu: &InitialMeasure, c: f64, t: f64, x: &[f64]) -> Result<f64> {
    if !(c > 0.0 && t > 0.0) {
        return invalid("J*_c needs c > 0 and t > 0");
    }
    phi1_measure_integral(domain, eig, nu)?;
    let d = domain.dim() as f64;
    let pref = 1.0 / t.powf(d / 2.0).min(1.0);
    nu.integrate_abs(domain, |y| psi(eig, t, y) * pref * (-c * dist2(x, y) / t).exp())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::measure::DensityProfile;
    use crate::quadrature::{adaptive, GaussRule};

    fn unit(bc: Bc) -> HeatKernel {
        HeatKernel::new(&Domain::unit_interval(), bc).unwrap()
    }

    #[test]
    fn neumann_conservation() {
        let hk = unit(Bc::Neumann);
        for &t in &[0.01, 0.049, 0.05, 0.3, 2.0] {
            let m = adaptive(|y| hk.eval_1d(t, 0.3, y), 0.0, 1.0, 1e-14, 1e-14, 10_000).unwrap().value;
            assert!((m - 1.0).abs() < 1e-8, "t={t} m={m}");
        }
    }

    #[test]
    fn one_mode_dominance() {
        let hk = unit(Bc::Dirichlet);
        let (x, y) = (0.3, 0.8);
        let v = hk.eval(3.0, &[x], &[y]).unwrap() * (PI * PI * 3.0).exp();
        let target = 2.0 * (PI * x).sin() * (PI * y).sin();
        assert!((v - target).abs() < 1e-6);
    }

    #[test]
    fn chapman_kolmogorov() {
        let rule = GaussRule::new(30);
        for bc in [Bc::Dirichlet, Bc::Neumann] {
            let hk = unit(bc);
            let (t, s, x, y) = (0.05, 0.07, 0.2, 0.65);
            let lhs = rule.integrate(0.0, 1.0, 32, |z| hk.eval_1d(t, x, z) * hk.eval_1d(s, z, y));
            assert!((lhs - hk.eval_1d(t + s, x, y)).abs() < 1e-8);
        }
    }

    #[test]
    fn images_match_eigen_at_switch() {
        for bc in [Bc::Dirichlet, Bc::Neumann] {
            let hk = unit(bc);
            for &(x, y) in &[(0.1, 0.2), (0.5, 0.5), (0.01, 0.99), (0.7, 0.3)] {
                let a = hk.image_sum(hk.t_switch, x, y);
                let b = hk.eigen_sum(hk.t_switch, x, y);
                assert!((a - b).abs() < 1e-10, "{bc:?} {x} {y} {a} {b}");
            }
        }
    }

    #[test]
    fn symmetry_and_sign() {
        let hk = unit(Bc::Dirichlet);
        for &t in &[1e-3, 0.02, 0.2, 1.0] {
            for &(x, y) in &[(0.1, 0.25), (0.4, 0.9), (0.001, 0.5)] {
                let a = hk.eval_1d(t, x, y);
                assert!((a - hk.eval_1d(t, y, x)).abs() < 1e-10);
                assert!(a >= -1e-8);
            }
        }
    }

    #[test]
    fn truncation_stable_beyond_128() {
        let d = Domain::unit_interval();
        let a = HeatKernel::with_modes(&d, Bc::Dirichlet, 128).unwrap();
        let b = HeatKernel::with_modes(&d, Bc::Dirichlet, 512).unwrap();
        for &t in &[0.01, 0.1, 1.0] {
            let (va, vb) = (a.eigen_sum(t, 0.3, 0.4), b.eigen_sum(t, 0.3, 0.4));
            assert!((va - vb).abs() < 1e-10);
        }
    }

    #[test]
    fn dirichlet_mass_decay() {
        let hk = unit(Bc::Dirichlet);
        for &t in &[3.0, 5.0, 10.0] {
            let m = hk.mass(t, &[0.5]);
            let rate = -m.ln() / t;
            assert!((rate - PI * PI).abs() < 0.01 * PI * PI, "{rate}");
        }
        // closed-form mass agrees with quadrature on both sides of the switch
        for &t in &[0.01, 0.2] {
            let q = adaptive(|y| hk.eval_1d(t, 0.3, y), 0.0, 1.0, 1e-14, 1e-14, 10_000).unwrap().value;
            assert!((hk.mass(t, &[0.3]) - q).abs() < 1e-10, "t={t}");
            assert!(q <= 1.0 + 1e-8);
        }
    }

    #[test]
    fn homogeneous_solutions() {
        let d = Domain::unit_interval();
        let n = unit(Bc::Neumann);
        let one = InitialMeasure::uniform(1.0);
        for &(t, x) in &[(0.01, 0.3), (0.5, 0.9)] {
            assert!((homogeneous_solution(&n, &one, t, &[x]).unwrap() - 1.0).abs() < 1e-8);
        }
        let dk = unit(Bc::Dirichlet);
        let (t, x) = (0.1, 0.3);
        let mut series = 0.0;
        for k in (1..400).step_by(2) {
            let kf = k as f64;
            series += 2.0 * 2f64.sqrt() / (kf * PI) * 2f64.sqrt() * (kf * PI * x).sin() * (-kf * kf * PI * PI * t).exp();
        }
        assert!((homogeneous_solution(&dk, &one, t, &[x]).unwrap() - series).abs() < 1e-8);
        let atom = InitialMeasure::atom(vec![0.4], 2.0);
        assert_eq!(homogeneous_solution(&dk, &atom, t, &[x]).unwrap(), 2.0 * dk.eval(t, &[x], &[0.4]).unwrap());
        let _ = d;
    }

    #[test]
    fn jc_values() {
        let d = Domain::unit_interval();
        let atom = InitialMeasure::dirac(0.2);
        let v = j_c(&d, &atom, 1.0, 0.25, &[0.5], None).unwrap();
        assert!((v - 2.0 * (-0.09f64 / 0.25).exp()).abs() < 1e-15);
        let u = InitialMeasure::uniform(1.0);
        assert!((j_c(&d, &u, 1e-12, 2.0, &[0.3], None).unwrap() - 1.0).abs() < 1e-9);
        let v = j_c(&d, &u, 1.0, 0.25, &[0.5], None).unwrap();
        let oracle = 2.0 * adaptive(|y| (-4.0 * (0.5 - y) * (0.5 - y)).exp(), 0.0, 1.0, 1e-15, 1e-13, 1000).unwrap().value;
        assert!((v - oracle).abs() < 1e-10);
    }

    #[test]
    fn psi_values() {
        let e = leading_eigenpair(&Domain::interval(2.0), Bc::Dirichlet).unwrap();
        // Φ1 = sin(pi x/2) on (0,2) with norm 1: at x = 0.5, sin(pi/4)/0.5 > 1
        assert_eq!(psi(&e, 0.25, &[0.5]), 1.0);
        let b = leading_eigenpair(&Domain::cube(2, 1.0), Bc::Dirichlet).unwrap();
        assert_eq!(psi_star(&b, 4.0, &[0.5, 0.5]), 1.0);
        let p = leading_eigenpair(&Domain::product(vec![Domain::unit_interval(), Domain::unit_interval()]), Bc::Dirichlet).unwrap();
        let v = psi_star(&p, 0.01, &[0.001, 0.5]);
        assert!((v - (2f64.sqrt() * (PI * 0.001).sin() / 0.1).min(1.0)).abs() < 1e-12);
    }

    #[test]
    fn jc_star_sandwich_and_rough_data() {
        let d = Domain::unit_interval();
        let e = leading_eigenpair(&d, Bc::Dirichlet).unwrap();
        let u = InitialMeasure::uniform(1.0);
        let phi_norm = phi1_measure_integral(&d, &e, &u).unwrap();
        let c = 1.0;
        // c0 from Φ1(z) >= dist(z)/c0 with D the diameter: Φ1(z) = √2 sin(πz) >= 2√2 z
        let c0 = 1.0 / (2.0 * 2f64.sqrt());
        let diam: f64 = 1.0;
        for &x in &[0.1, 0.5, 0.9] {
            let v = j_c_star(&d, &e, &u, c, 1.0, &[x]).unwrap();
            let lower = (1.0 / (c0 * diam)).min(1.0) * (-c * diam * diam).exp() * phi_norm;
            assert!(lower <= v && v <= phi_norm, "{lower} {v} {phi_norm}");
            assert!(v <= j_c(&d, &u, c, 1.0, &[x], None).unwrap());
        }
        let rough = InitialMeasure::density(DensityProfile::BoundaryPower { exponent: 1.5 });
        assert!(j_c_star(&d, &e, &rough, c, 1.0, &[0.5]).unwrap().is_finite());
        assert!(matches!(j_c(&d, &rough, c, 1.0, &[0.5], None), Err(Error::Divergent(_))));
    }

    #[test]
    fn envelopes() {
        let e = leading_eigenpair(&Domain::unit_interval(), Bc::Neumann).unwrap();
        let env = BoundEnvelope { amp: 3.0, c: 0.1, a: 1.0, mu: 0.0, side: Side::Upper };
        assert_eq!(envelope_eval(&env, &e, 2.0, &[0.4], &[0.4]), 3.0);
        let ed = leading_eigenpair(&Domain::unit_interval(), Bc::Dirichlet).unwrap();
        let env = BoundEnvelope { amp: 3.0, c: 0.1, a: 1.0, mu: PI * PI, side: Side::Upper };
        let c0 = PI * 2f64.sqrt();
        let t: f64 = 0.5;
        assert!(envelope_eval(&env, &ed, t, &[1e-3], &[0.5]) < 3.0 * c0 * 1e-3 / t.sqrt().min(1.0));
        for side in [Side::Upper, Side::Lower] {
            for bc in [Bc::Dirichlet, Bc::Neumann] {
                let fit = fit_interval_envelope(1.0, bc, side).unwrap();
                assert!(fit.kappa.is_finite() && fit.kappa >= 1.0, "{bc:?} {side:?} {}", fit.kappa);
                assert!(fit.envelope.c > 0.0);
            }
        }
    }
}
