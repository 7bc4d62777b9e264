//! Initial measures: densities (possibly blowing up at the boundary), atoms
//! and finite sums of these, with quadrature against test functions.

use crate::error::{invalid, Error, Result};
use crate::geometry::Domain;
use crate::quadrature::{adaptive, integrate_two_sided};
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

/// Relative tolerance of the measure quadratures.
pub const MEASURE_REL_TOL: f64 = 1e-10;

pub type DensityFn = Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>;

/// User-supplied density for library callers.
#[derive(Clone)]
pub struct CustomDensity {
    pub f: DensityFn,
    /// Whether the density is bounded (used by the admissibility classifier).
    pub bounded: bool,
}

impl fmt::Debug for CustomDensity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "CustomDensity {{ bounded: {} }}", self.bounded)
    }
}

impl PartialEq for CustomDensity {
    fn eq(&self, other: &Self) -> bool {
        Arc::ptr_eq(&self.f, &other.f)
    }
}

/// Density shapes. Boundary powers are written for the domain they are used
/// on: `[x(L-x)]^{-e}` per coordinate on intervals and boxes,
/// `(R-|x|)^{-e}` on balls and `((|x|-R1)(R2-|x|))^{-e}` on annuli.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", deny_unknown_fields)]
pub enum DensityProfile {
    Uniform { value: f64 },
    BoundaryPower { exponent: f64 },
    /// `sin(pi x / L)^{-e}` per coordinate (intervals and boxes).
    SinPower { exponent: f64 },
    /// `|x|^{-beta0} (R - |x|)^{-beta1}` on balls.
    RadialPower { beta0: f64, beta1: f64 },
    #[serde(skip)]
    Custom(CustomDensity),
}

impl DensityProfile {
    pub fn eval(&self, domain: &Domain, x: &[f64]) -> f64 {
        match self {
            DensityProfile::Uniform { value } => *value,
            DensityProfile::BoundaryPower { exponent } => match domain {
                Domain::Interval { l } | Domain::Box { l, .. } => {
                    x.iter().map(|&v| (v * (l - v)).powf(-exponent)).product()
                }
                Domain::Ball { r, .. } => (r - norm(x)).powf(-exponent),
                Domain::Annulus { r1, r2 } => {
                    let n = norm(x);
                    ((n - r1) * (r2 - n)).powf(-exponent)
                }
                Domain::Product { .. } => domain.dist_unchecked(x).powf(-exponent),
            },
            DensityProfile::SinPower { exponent } => match domain {
                Domain::Interval { l } | Domain::Box { l, .. } => {
                    x.iter().map(|&v| (PI * v / l).sin().powf(-exponent)).product()
                }
                _ => domain.dist_unchecked(x).powf(-exponent),
            },
            DensityProfile::RadialPower { beta0, beta1 } => {
                let n = norm(x);
                let outer = match domain {
                    Domain::Ball { r, .. } => r - n,
                    _ => domain.dist_unchecked(x),
                };
                n.powf(-beta0) * outer.powf(-beta1)
            }
            DensityProfile::Custom(c) => (c.f)(x),
        }
    }

    /// Whether the profile is bounded on the domain.
    pub fn is_bounded(&self) -> bool {
        match self {
            DensityProfile::Uniform { value } => value.is_finite(),
            DensityProfile::BoundaryPower { exponent } | DensityProfile::SinPower { exponent } => *exponent <= 0.0,
            DensityProfile::RadialPower { beta0, beta1 } => *beta0 <= 0.0 && *beta1 <= 0.0,
            DensityProfile::Custom(c) => c.bounded,
        }
    }
}

fn norm(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum::<f64>().sqrt()
}

/// A signed initial measure.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", deny_unknown_fields)]
pub enum InitialMeasure {
    Density {
        profile: DensityProfile,
        #[serde(default = "one")]
        scale: f64,
    },
    Atom { y0: Vec<f64>, mass: f64 },
    Sum { parts: Vec<InitialMeasure> },
}

fn one() -> f64 {
    1.0
}

/// Integration region: the domain, optionally shrunk to `U_eps`.
#[derive(Clone, Copy, Debug)]
struct Region {
    eps: f64,
}

impl InitialMeasure {
    pub fn atom(y0: Vec<f64>, mass: f64) -> Self {
        InitialMeasure::Atom { y0, mass }
    }
    pub fn density(profile: DensityProfile) -> Self {
        InitialMeasure::Density { profile, scale: 1.0 }
    }
    pub fn uniform(value: f64) -> Self {
        InitialMeasure::density(DensityProfile::Uniform { value })
    }
    pub fn dirac(y0: f64) -> Self {
        InitialMeasure::atom(vec![y0], 1.0)
    }

    /// Atoms must be interior and of the domain's dimension.
    pub fn validate(&self, domain: &Domain) -> Result<()> {
        match self {
            InitialMeasure::Atom { y0, mass } => {
                if !mass.is_finite() {
                    return invalid("atom mass must be finite");
                }
                if !domain.contains(y0)? {
                    return invalid(format!("atom at {y0:?} is not strictly interior"));
                }
                Ok(())
            }
            InitialMeasure::Density { scale, .. } => {
                if !scale.is_finite() {
                    return invalid("density scale must be finite");
                }
                Ok(())
            }
            InitialMeasure::Sum { parts } => parts.iter().try_for_each(|p| p.validate(domain)),
        }
    }

    /// Atoms as (location, signed mass) pairs.
    pub fn atoms(&self) -> Vec<(Vec<f64>, f64)> {
        match self {
            InitialMeasure::Atom { y0, mass } => vec![(y0.clone(), *mass)],
            InitialMeasure::Density { .. } => vec![],
            InitialMeasure::Sum { parts } => parts.iter().flat_map(|p| p.atoms()).collect(),
        }
    }

    /// Densities as (profile, signed scale) pairs.
    pub fn densities(&self) -> Vec<(DensityProfile, f64)> {
        match self {
            InitialMeasure::Atom { .. } => vec![],
            InitialMeasure::Density { profile, scale } => vec![(profile.clone(), *scale)],
            InitialMeasure::Sum { parts } => parts.iter().flat_map(|p| p.densities()).collect(),
        }
    }

    /// `∫ g dnu` over the domain.
    pub fn integrate<G: Fn(&[f64]) -> f64>(&self, domain: &Domain, g: G) -> Result<f64> {
        self.integrate_impl(domain, &g, false, Region { eps: 0.0 })
    }

    /// `∫ g d|nu|`. For sums, |nu| is taken as the sum of the component
    /// variations (exact when the components are mutually singular).
    pub fn integrate_abs<G: Fn(&[f64]) -> f64>(&self, domain: &Domain, g: G) -> Result<f64> {
        self.integrate_impl(domain, &g, true, Region { eps: 0.0 })
    }

    /// `∫_{U_eps} g d|nu|`.
    pub fn integrate_abs_inner<G: Fn(&[f64]) -> f64>(&self, domain: &Domain, eps: f64, g: G) -> Result<f64> {
        self.integrate_impl(domain, &g, true, Region { eps })
    }

    /// Total variation `|nu|(U)`.
    pub fn total_variation(&self, domain: &Domain) -> Result<f64> {
        self.integrate_abs(domain, |_| 1.0)
    }

    fn integrate_impl(&self, domain: &Domain, g: &dyn Fn(&[f64]) -> f64, abs: bool, region: Region) -> Result<f64> {
        match self {
            InitialMeasure::Atom { y0, mass } => {
                if region.eps > 0.0 && domain.dist_unchecked(y0) <= region.eps {
                    return Ok(0.0);
                }
                let m = if abs { mass.abs() } else { *mass };
                Ok(m * g(y0))
            }
            InitialMeasure::Density { profile, scale } => {
                let s = if abs { scale.abs() } else { *scale };
                if s == 0.0 {
                    return Ok(0.0);
                }
                let p = |x: &[f64]| {
                    let v = profile.eval(domain, x);
                    if abs {
                        v.abs()
                    } else {
                        v
                    }
                };
                Ok(s * integrate_density(domain, region.eps, &|x: &[f64]| g(x) * p(x))?)
            }
            InitialMeasure::Sum { parts } => {
                let mut acc = 0.0;
                for part in parts {
                    acc += part.integrate_impl(domain, g, abs, region)?;
                }
                Ok(acc)
            }
        }
    }
}

fn integrate_density(domain: &Domain, eps: f64, h: &dyn Fn(&[f64]) -> f64) -> Result<f64> {
    let tol = MEASURE_REL_TOL;
    match domain {
        Domain::Interval { l } => {
            if 2.0 * eps >= *l {
                return Ok(0.0);
            }
            integrate_two_sided(|x| h(&[x]), eps, l - eps, tol)
        }
        Domain::Box { d: 1, l } => integrate_density(&Domain::Interval { l: *l }, eps, h),
        Domain::Box { d: 2, l } => {
            if 2.0 * eps >= *l {
                return Ok(0.0);
            }
            let (a, b) = (eps, l - eps);
            let mut failure = None;
            let v = integrate_two_sided(
                |x| match integrate_two_sided(|y| h(&[x, y]), a, b, tol * 10.0) {
                    Ok(v) => v,
                    Err(e) => {
                        failure.get_or_insert(e);
                        0.0
                    }
                },
                a,
                b,
                tol,
            )?;
            match failure {
                Some(e) => Err(e),
                None => Ok(v),
            }
        }
        Domain::Ball { d: 1, r } => {
            if eps >= *r {
                return Ok(0.0);
            }
            integrate_two_sided(|x| h(&[x]), -r + eps, r - eps, tol)
        }
        Domain::Ball { d: 2, r } => polar(h, 0.0, r - eps, tol),
        Domain::Annulus { r1, r2 } => {
            if r1 + eps >= r2 - eps {
                return Ok(0.0);
            }
            polar(h, r1 + eps, r2 - eps, tol)
        }
        Domain::Product { factors } if factors.iter().all(|f| matches!(f, Domain::Interval { .. })) => {
            let ls: Vec<f64> = factors
                .iter()
                .map(|f| if let Domain::Interval { l } = f { *l } else { unreachable!() })
                .collect();
            rectangle(h, &ls, eps, tol)
        }
        _ => Err(Error::Unsupported(format!("density quadrature on {domain:?}"))),
    }
}

fn rectangle(h: &dyn Fn(&[f64]) -> f64, ls: &[f64], eps: f64, tol: f64) -> Result<f64> {
    match ls.len() {
        1 => integrate_two_sided(|x| h(&[x]), eps, ls[0] - eps, tol),
        2 => {
            let mut failure = None;
            let v = integrate_two_sided(
                |x| match integrate_two_sided(|y| h(&[x, y]), eps, ls[1] - eps, tol * 10.0) {
                    Ok(v) => v,
                    Err(e) => {
                        failure.get_or_insert(e);
                        0.0
                    }
                },
                eps,
                ls[0] - eps,
                tol,
            )?;
            failure.map_or(Ok(v), Err)
        }
        _ => Err(Error::Unsupported("density quadrature in more than two dimensions".into())),
    }
}

fn polar(h: &dyn Fn(&[f64]) -> f64, r0: f64, r1: f64, tol: f64) -> Result<f64> {
    if r1 <= r0 {
        return Ok(0.0);
    }
    let mut failure = None;
    let v = integrate_two_sided(
        |r| {
            let ang = adaptive(|th| h(&[r * th.cos(), r * th.sin()]), 0.0, 2.0 * PI, 0.0, tol * 10.0, 10_000);
            match ang {
                Ok(q) => r * q.value,
                Err(e) => {
                    failure.get_or_insert(e);
                    0.0
                }
            }
        },
        r0,
        r1,
        tol,
    )?;
    failure.map_or(Ok(v), Err)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn atoms_and_uniform() {
        let d = Domain::unit_interval();
        assert_eq!(InitialMeasure::dirac(0.5).integrate(&d, |y| y[0] * 2.0).unwrap(), 1.0);
        let u = InitialMeasure::uniform(1.0);
        assert!((u.integrate(&d, |y| y[0]).unwrap() - 0.5).abs() < 1e-12);
        assert!(InitialMeasure::dirac(1.0).validate(&d).is_err());
    }

    #[test]
    fn boundary_powers() {
        let d = Domain::unit_interval();
        // ∫ [x(1-x)]^{-1/2} dx = pi
        let m = InitialMeasure::density(DensityProfile::BoundaryPower { exponent: 0.5 });
        assert!((m.total_variation(&d).unwrap() - PI).abs() < 1e-9);
        let m = InitialMeasure::density(DensityProfile::BoundaryPower { exponent: 1.5 });
        assert!(matches!(m.total_variation(&d), Err(Error::Divergent(_))));
    }

    #[test]
    fn disc_and_annulus_areas() {
        let u = InitialMeasure::uniform(1.0);
        assert!((u.total_variation(&Domain::ball(2, 1.0)).unwrap() - PI).abs() < 1e-9);
        assert!((u.total_variation(&Domain::annulus(1.0, 3.0)).unwrap() - 8.0 * PI).abs() < 1e-8);
        assert!((u.total_variation(&Domain::cube(2, 2.0)).unwrap() - 4.0).abs() < 1e-9);
        let inner = u.integrate_abs_inner(&Domain::unit_interval(), 0.2, |_| 1.0).unwrap();
        assert!((inner - 0.6).abs() < 1e-12);
    }

    #[test]
    fn json_shapes() {
        let m: InitialMeasure = serde_json::from_str(r#"{"kind":"Atom","y0":[0.5],"mass":1}"#).unwrap();
        assert_eq!(m, InitialMeasure::dirac(0.5));
        let m: InitialMeasure =
            serde_json::from_str(r#"{"kind":"Density","profile":{"type":"BoundaryPower","exponent":1.5}}"#).unwrap();
        let s = serde_json::to_string(&m).unwrap();
        assert_eq!(serde_json::from_str::<InitialMeasure>(&s).unwrap(), m);
        assert!(serde_json::from_str::<InitialMeasure>(r#"{"kind":"Atom","y0":[0.5],"mass":1,"z":0}"#).is_err());
    }
}
