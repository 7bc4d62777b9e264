//! Leading eigenpairs of the Laplacian for the domain catalog, and full
//! spectra for intervals and boxes.

pub mod bessel;

use crate::error::{invalid, Error, Result};
use crate::geometry::Domain;
use crate::measure::InitialMeasure;
use serde::{Deserialize, Serialize};
use statrs::function::gamma::gamma;
use std::f64::consts::PI;

pub use bessel::{annulus_z, annulus_z_prime, bessel_j, bessel_y, cross_product_zero, first_bessel_zero};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Bc {
    Dirichlet,
    Neumann,
}

impl std::str::FromStr for Bc {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "dirichlet" => Ok(Bc::Dirichlet),
            "neumann" => Ok(Bc::Neumann),
            _ => invalid(format!("unknown boundary condition '{s}'")),
        }
    }
}

#[derive(Clone, Debug)]
enum Shape {
    Constant,
    Sine { l: f64 },
    SineBox { l: f64 },
    Ball { d: usize, r: f64, z0: f64 },
    Annulus { r1: f64, r2: f64, z0: f64, sign: f64 },
    Product(Vec<(usize, EigenPair)>),
}

/// Leading eigenvalue `mu1` and L²-normalized positive eigenfunction.
#[derive(Clone, Debug)]
pub struct EigenPair {
    pub mu1: f64,
    pub bc: Bc,
    /// Multiplier applied to the raw profile so that `||phi1||_2 = 1`.
    pub norm: f64,
    dim: usize,
    shape: Shape,
}

impl EigenPair {
    pub fn dim(&self) -> usize {
        self.dim
    }

    /// `Phi_1(x)`; points outside the domain evaluate through the formula.
    pub fn phi1(&self, x: &[f64]) -> f64 {
        self.norm * self.raw(x)
    }

    fn raw(&self, x: &[f64]) -> f64 {
        match &self.shape {
            Shape::Constant => 1.0,
            Shape::Sine { l } => (PI * x[0] / l).sin(),
            Shape::SineBox { l, .. } => x.iter().map(|v| (PI * v / l).sin()).product(),
            Shape::Ball { d, r, z0 } => ball_profile(*d, *r, *z0, norm2(x)),
            Shape::Annulus { r1, r2, z0, sign } => sign * annulus_z(norm2(x), *r1, *r2, *z0).unwrap_or(0.0),
            Shape::Product(f) => {
                let mut off = 0;
                let mut p = 1.0;
                for (k, e) in f {
                    p *= e.phi1(&x[off..off + k]);
                    off += k;
                }
                p
            }
        }
    }

    /// Factor eigenpairs of a product domain (a single entry otherwise).
    pub fn factors(&self) -> Vec<(usize, EigenPair)> {
        match &self.shape {
            Shape::Product(f) => f.clone(),
            _ => vec![(self.dim, self.clone())],
        }
    }

    /// Maximum of `Phi_1` over the domain (sampled for curved domains).
    pub fn sup_phi1(&self) -> f64 {
        match &self.shape {
            Shape::Constant | Shape::Sine { .. } | Shape::SineBox { .. } => self.norm,
            Shape::Ball { d, r, z0 } => self.norm * ball_profile(*d, *r, *z0, 0.0),
            Shape::Annulus { r1, r2, .. } => (0..=2000)
                .map(|i| self.phi1(&[r1 + (r2 - r1) * i as f64 / 2000.0, 0.0]))
                .fold(0.0, f64::max),
            Shape::Product(f) => f.iter().map(|(_, e)| e.sup_phi1()).product(),
        }
    }
}

fn norm2(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum::<f64>().sqrt()
}

/// `r^{(2-d)/2} J_{(d-2)/2}(z0 r / R)`, continuous at `r = 0`.
fn ball_profile(d: usize, r_ball: f64, z0: f64, r: f64) -> f64 {
    let nu = (d as f64 - 2.0) / 2.0;
    let s = z0 / r_ball;
    if r == 0.0 || (nu > 0.0 && r < 1e-8) {
        if nu < 0.0 {
            // d = 1: r^{1/2} J_{-1/2}(s r) = sqrt(2/(pi s)) cos(s r)
            return (2.0 / (PI * s)).sqrt();
        }
        return (0.5 * s).powf(nu) / gamma(nu + 1.0);
    }
    r.powf(-nu) * bessel_j(nu, s * r).unwrap_or(0.0)
}

/// Composite Simpson with panel doubling until the relative change is below
/// `tol`.
pub fn simpson_refined<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, tol: f64) -> f64 {
    let mut n = 64usize;
    let simpson = |n: usize| {
        let h = (b - a) / n as f64;
        let mut s = f(a) + f(b);
        for i in 1..n {
            s += f(a + i as f64 * h) * if i % 2 == 1 { 4.0 } else { 2.0 };
        }
        s * h / 3.0
    };
    let mut prev = simpson(n);
    while n < 1 << 20 {
        n *= 2;
        let cur = simpson(n);
        if (cur - prev).abs() <= tol * cur.abs() {
            return cur;
        }
        prev = cur;
    }
    prev
}

/// Plotting-convention constant for the unit-ball eigenfunction,
/// `C_d = 2^{-d/2} d z0^{(d-2)/2} / Gamma(1 + d/2)`; equals 1 for `d = 2`.
pub fn ball_plot_constant(d: usize, z0: f64) -> f64 {
    let df = d as f64;
    2f64.powf(-df / 2.0) * df * z0.powf((df - 2.0) / 2.0) / gamma(1.0 + df / 2.0)
}

/// Leading eigenpair of `-Laplacian` with the given boundary condition.
pub fn leading_eigenpair(domain: &Domain, bc: Bc) -> Result<EigenPair> {
    domain.validate()?;
    let dim = domain.dim();
    if bc == Bc::Neumann {
        return Ok(EigenPair { mu1: 0.0, bc, norm: domain.volume().powf(-0.5), dim, shape: Shape::Constant });
    }
    match domain {
        Domain::Interval { l } => Ok(EigenPair {
            mu1: (PI / l).powi(2),
            bc,
            norm: (2.0 / l).sqrt(),
            dim,
            shape: Shape::Sine { l: *l },
        }),
        Domain::Box { d, l } => Ok(EigenPair {
            mu1: *d as f64 * (PI / l).powi(2),
            bc,
            norm: (2.0 / l).powf(*d as f64 / 2.0),
            dim,
            shape: Shape::SineBox { l: *l },
        }),
        Domain::Ball { d, r } => {
            let nu = (*d as f64 - 2.0) / 2.0;
            let (z0, _) = first_bessel_zero(nu)?;
            let sphere = 2.0 * PI.powf(*d as f64 / 2.0) / gamma(*d as f64 / 2.0);
            let int = simpson_refined(|s| s.powi(*d as i32 - 1) * ball_profile(*d, *r, z0, s).powi(2), 0.0, *r, 1e-12);
            Ok(EigenPair {
                mu1: (z0 / r).powi(2),
                bc,
                norm: 1.0 / (sphere * int).sqrt(),
                dim,
                shape: Shape::Ball { d: *d, r: *r, z0 },
            })
        }
        Domain::Annulus { r1, r2 } => {
            let z0 = cross_product_zero(*r1, *r2)?;
            let mid = annulus_z(0.5 * (r1 + r2), *r1, *r2, z0)?;
            let sign = if mid >= 0.0 { 1.0 } else { -1.0 };
            let int = simpson_refined(|s| s * annulus_z(s, *r1, *r2, z0).unwrap_or(0.0).powi(2), *r1, *r2, 1e-12);
            Ok(EigenPair {
                mu1: z0 * z0,
                bc,
                norm: 1.0 / (2.0 * PI * int).sqrt(),
                dim,
                shape: Shape::Annulus { r1: *r1, r2: *r2, z0, sign },
            })
        }
        Domain::Product { factors } => {
            let mut parts = Vec::new();
            let mut mu = 0.0;
            for f in factors {
                let e = leading_eigenpair(f, bc)?;
                mu += e.mu1;
                parts.push((f.dim(), e));
            }
            Ok(EigenPair { mu1: mu, bc, norm: 1.0, dim, shape: Shape::Product(parts) })
        }
    }
}

/// Hard cap on the number of modes returned by [`full_spectrum`].
pub const MAX_MODES: usize = 1 << 16;

/// One eigenmode of an interval or box: per-axis indices and eigenvalue.
#[derive(Clone, Debug, PartialEq)]
pub struct Mode {
    pub mu: f64,
    pub k: Vec<usize>,
}

/// The `N` lowest modes of an interval or box, sorted by eigenvalue.
/// Dirichlet indices start at 1, Neumann indices at 0.
#[derive(Clone, Debug)]
pub struct Spectrum {
    pub l: f64,
    pub d: usize,
    pub bc: Bc,
    pub modes: Vec<Mode>,
}

/// One-dimensional mode `k` on `(0, L)`.
#[inline]
pub fn mode_1d(bc: Bc, l: f64, k: usize, x: f64) -> f64 {
    match bc {
        Bc::Dirichlet => (2.0 / l).sqrt() * (k as f64 * PI * x / l).sin(),
        Bc::Neumann => {
            if k == 0 {
                l.powf(-0.5)
            } else {
                (2.0 / l).sqrt() * (k as f64 * PI * x / l).cos()
            }
        }
    }
}

impl Spectrum {
    pub fn len(&self) -> usize {
        self.modes.len()
    }
    pub fn is_empty(&self) -> bool {
        self.modes.is_empty()
    }
    pub fn eval(&self, idx: usize, x: &[f64]) -> f64 {
        self.modes[idx].k.iter().zip(x).map(|(&k, &xi)| mode_1d(self.bc, self.l, k, xi)).product()
    }
}

pub fn full_spectrum(domain: &Domain, bc: Bc, n: usize) -> Result<Spectrum> {
    if n == 0 {
        return invalid("need at least one mode");
    }
    if n > MAX_MODES {
        return invalid(format!("at most {MAX_MODES} modes supported, asked for {n}"));
    }
    let (l, d) = match domain {
        Domain::Interval { l } => (*l, 1),
        Domain::Box { d, l } => (*l, *d),
        _ => return Err(Error::Unsupported("full spectrum only for Interval and Box".into())),
    };
    let base = |k: usize| (k as f64 * PI / l).powi(2);
    let start = if bc == Bc::Dirichlet { 1 } else { 0 };
    let modes = if d == 1 {
        (start..start + n).map(|k| Mode { mu: base(k), k: vec![k] }).collect()
    } else {
        let m = (n as f64).powf(1.0 / d as f64).ceil() as usize + start;
        let kmax = ((d as f64).sqrt() * m as f64).ceil() as usize + 1;
        let range = kmax + 1 - start;
        let total = range.pow(d as u32);
        let mut all = Vec::with_capacity(total);
        for lin in 0..total {
            let mut rem = lin;
            let mut k = Vec::with_capacity(d);
            for _ in 0..d {
                k.push(start + rem % range);
                rem /= range;
            }
            let mu = k.iter().map(|&ki| base(ki)).sum();
            all.push(Mode { mu, k });
        }
        all.sort_by(|a, b| a.mu.partial_cmp(&b.mu).unwrap().then_with(|| a.k.cmp(&b.k)));
        all.truncate(n);
        all
    };
    Ok(Spectrum { l, d, bc, modes })
}

/// `∫ Phi_1 d|nu|`; divergence is reported as `Error::Divergent`.
pub fn phi1_measure_integral(domain: &Domain, eig: &EigenPair, nu: &InitialMeasure) -> Result<f64> {
    nu.integrate_abs(domain, |y| eig.phi1(y))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::measure::{DensityProfile, InitialMeasure};

    #[test]
    fn interval_and_box() {
        let e = leading_eigenpair(&Domain::unit_interval(), Bc::Dirichlet).unwrap();
        assert!((e.mu1 - PI * PI).abs() < 1e-12);
        assert!((e.phi1(&[0.25]) - 2f64.sqrt() * (PI / 4.0).sin()).abs() < 1e-15);
        let e = leading_eigenpair(&Domain::cube(3, 1.0), Bc::Dirichlet).unwrap();
        assert!((e.mu1 - 3.0 * PI * PI).abs() < 1e-12);
        let n = leading_eigenpair(&Domain::ball(2, 1.0), Bc::Neumann).unwrap();
        assert_eq!(n.mu1, 0.0);
        assert!((n.phi1(&[0.3, 0.1]) - PI.powf(-0.5)).abs() < 1e-15);
    }

    #[test]
    fn ball_eigenpair() {
        let e = leading_eigenpair(&Domain::ball(2, 1.0), Bc::Dirichlet).unwrap();
        let (z0, _) = first_bessel_zero(0.0).unwrap();
        assert!((e.mu1 - z0 * z0).abs() < 1e-12);
        assert!((ball_plot_constant(2, z0) - 1.0).abs() < 1e-15);
        // normalization by an independent polar Gauss rule
        let rule = crate::quadrature::GaussRule::new(20);
        let int = 2.0 * PI * rule.integrate(0.0, 1.0, 64, |r| r * e.phi1(&[r, 0.0]).powi(2));
        assert!((int - 1.0).abs() < 1e-8);
        assert!(e.phi1(&[0.999, 0.0]) > 0.0 && e.phi1(&[0.0, 0.0]) > e.phi1(&[0.5, 0.0]));
        let e3 = leading_eigenpair(&Domain::ball(3, 1.0), Bc::Dirichlet).unwrap();
        assert!((e3.mu1 - PI * PI).abs() < 1e-10);
        // the d = 3 profile is sin(pi r)/r up to normalization: Phi(r) = sin(pi r)/(r sqrt(2 pi))
        assert!((e3.phi1(&[0.5, 0.0, 0.0]) - (PI * 0.5).sin() / (0.5 * (2.0 * PI).sqrt())).abs() < 1e-8);
        let e1 = leading_eigenpair(&Domain::ball(1, 1.0), Bc::Dirichlet).unwrap();
        assert!((e1.mu1 - PI * PI / 4.0).abs() < 1e-12);
    }

    #[test]
    fn annulus_eigenpair() {
        let e = leading_eigenpair(&Domain::annulus(1.0, 3.0), Bc::Dirichlet).unwrap();
        assert!(e.phi1(&[2.0, 0.0]) > 0.0);
        assert!(e.phi1(&[1.0 + 1e-9, 0.0]).abs() < 1e-7);
        let rule = crate::quadrature::GaussRule::new(20);
        let int = 2.0 * PI * rule.integrate(1.0, 3.0, 64, |r| r * e.phi1(&[r, 0.0]).powi(2));
        assert!((int - 1.0).abs() < 1e-8);
    }

    #[test]
    fn product_eigenpair() {
        let d = Domain::product(vec![Domain::interval(1.0), Domain::interval(2.0)]);
        let e = leading_eigenpair(&d, Bc::Dirichlet).unwrap();
        assert!((e.mu1 - (PI * PI + PI * PI / 4.0)).abs() < 1e-12);
        let v = e.phi1(&[0.5, 1.0]);
        assert!((v - 2f64.sqrt() * 1.0).abs() < 1e-12);
    }

    #[test]
    fn spectra() {
        let s = full_spectrum(&Domain::unit_interval(), Bc::Dirichlet, 1).unwrap();
        assert!((s.modes[0].mu - PI * PI).abs() < 1e-12);
        let s = full_spectrum(&Domain::unit_interval(), Bc::Neumann, 2).unwrap();
        assert_eq!(s.modes[0].mu, 0.0);
        assert!((s.eval(0, &[0.3]) - 1.0).abs() < 1e-15);
        assert!((s.eval(1, &[0.3]) - 2f64.sqrt() * (0.3 * PI).cos()).abs() < 1e-15);
        let s = full_spectrum(&Domain::cube(2, 1.0), Bc::Dirichlet, 2).unwrap();
        assert!((s.modes[0].mu - 2.0 * PI * PI).abs() < 1e-12);
        assert!((s.modes[1].mu - 5.0 * PI * PI).abs() < 1e-12);
        assert!(full_spectrum(&Domain::ball(2, 1.0), Bc::Dirichlet, 2).is_err());
        assert!(full_spectrum(&Domain::unit_interval(), Bc::Dirichlet, MAX_MODES + 1).is_err());
        let s = full_spectrum(&Domain::cube(2, 1.0), Bc::Neumann, 30).unwrap();
        assert!(s.modes.windows(2).all(|w| w[0].mu <= w[1].mu));
    }

    #[test]
    fn orthonormality() {
        for (dom, bc) in [(Domain::unit_interval(), Bc::Dirichlet), (Domain::interval(2.0), Bc::Neumann)] {
            let s = full_spectrum(&dom, bc, 64).unwrap();
            let l = s.l;
            let n = 1 << 12;
            let h = l / n as f64;
            for i in 0..64 {
                for j in i..64 {
                    let mut acc = 0.0;
                    for p in 0..=n {
                        let x = p as f64 * h;
                        let w = if p == 0 || p == n { 1.0 } else if p % 2 == 1 { 4.0 } else { 2.0 };
                        acc += w * s.eval(i, &[x]) * s.eval(j, &[x]);
                    }
                    acc *= h / 3.0;
                    let target = if i == j { 1.0 } else { 0.0 };
                    assert!((acc - target).abs() < 1e-8, "{i} {j} {acc}");
                }
            }
        }
    }

    #[test]
    fn eigen_residual_second_order() {
        let s = full_spectrum(&Domain::unit_interval(), Bc::Dirichlet, 4).unwrap();
        let err = |h: f64| {
            let x = 0.37;
            let f = |x: f64| s.eval(3, &[x]);
            let d2 = (f(x + h) - 2.0 * f(x) + f(x - h)) / (h * h);
            (d2 + s.modes[3].mu * f(x)).abs()
        };
        let slope = (err(1e-2) / err(5e-3)).log2();
        assert!((slope - 2.0).abs() < 0.05, "{slope}");
    }

    #[test]
    fn phi1_over_distance_bounded() {
        for dom in [Domain::unit_interval(), Domain::ball(2, 1.0), Domain::annulus(1.0, 3.0)] {
            let e = leading_eigenpair(&dom, Bc::Dirichlet).unwrap();
            let (lo, hi) = dom.bounding_box();
            let mut rmin = f64::INFINITY;
            let mut rmax: f64 = 0.0;
            for i in 1..200 {
                let mut x = vec![0.0; dom.dim()];
                x[0] = lo[0] + (hi[0] - lo[0]) * i as f64 / 200.0;
                if !dom.contains(&x).unwrap() {
                    continue;
                }
                let r = e.phi1(&x) / dom.dist_to_boundary(&x).unwrap();
                rmin = rmin.min(r);
                rmax = rmax.max(r);
            }
            assert!(rmin > 0.0 && rmax.is_finite(), "{dom:?} {rmin} {rmax}");
        }
    }

    #[test]
    fn bessel_max_ratio_stabilizes() {
        // sup over r in (0,1) of r^{-nu} J_nu(r z0) / (1 - r)
        let sup = |n: usize| {
            let (z0, _) = first_bessel_zero(1.0).unwrap();
            (1..n).map(|i| {
                let r = i as f64 / n as f64;
                r.powf(-1.0) * bessel_j(1.0, r * z0).unwrap() / (1.0 - r)
            }).fold(0.0, f64::max)
        };
        let a = sup(1000);
        let b = sup(4000);
        assert!(a.is_finite() && (a - b).abs() < 1e-3 * b);
    }

    #[test]
    fn phi1_integrals() {
        let dom = Domain::unit_interval();
        let e = leading_eigenpair(&dom, Bc::Dirichlet).unwrap();
        let atom = InitialMeasure::atom(vec![0.5], 1.0);
        assert!((phi1_measure_integral(&dom, &e, &atom).unwrap() - 2f64.sqrt()).abs() < 1e-15);
        let rough = InitialMeasure::density(DensityProfile::BoundaryPower { exponent: 1.5 });
        assert!(phi1_measure_integral(&dom, &e, &rough).unwrap().is_finite());
        let worse = InitialMeasure::density(DensityProfile::BoundaryPower { exponent: 2.5 });
        assert!(matches!(phi1_measure_integral(&dom, &e, &worse), Err(Error::Divergent(_))));
    }
}
