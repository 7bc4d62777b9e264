//! Catalog of bounded domains: intervals, boxes, balls, planar annuli and
//! Cartesian products of these.
//!
//! Coordinates: `Interval(L)` is `(0, L)`, `Box(d, L)` is `(0, L)^d`,
//! balls and annuli are centered at the origin, and a product concatenates
//! the coordinates of its factors in order.

use crate::error::{invalid, Error, Result};
use serde::{Deserialize, Serialize};

/// A member of the domain catalog.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", deny_unknown_fields)]
pub enum Domain {
    Interval {
        #[serde(rename = "L")]
        l: f64,
    },
    Box {
        d: usize,
        #[serde(rename = "L")]
        l: f64,
    },
    Ball {
        d: usize,
        #[serde(rename = "R")]
        r: f64,
    },
    /// Planar annulus `R1 < |x| < R2`.
    Annulus {
        #[serde(rename = "R1")]
        r1: f64,
        #[serde(rename = "R2")]
        r2: f64,
    },
    Product { factors: Vec<Domain> },
}

fn norm(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum::<f64>().sqrt()
}

impl Domain {
    pub fn interval(l: f64) -> Self {
        Domain::Interval { l }
    }
    pub fn unit_interval() -> Self {
        Domain::Interval { l: 1.0 }
    }
    pub fn cube(d: usize, l: f64) -> Self {
        Domain::Box { d, l }
    }
    pub fn ball(d: usize, r: f64) -> Self {
        Domain::Ball { d, r }
    }
    pub fn annulus(r1: f64, r2: f64) -> Self {
        Domain::Annulus { r1, r2 }
    }
    pub fn product(factors: Vec<Domain>) -> Self {
        Domain::Product { factors }
    }

    /// Checks the catalog invariants.
    pub fn validate(&self) -> Result<()> {
        let pos = |v: f64, name: &str| -> Result<()> {
            if v.is_finite() && v > 0.0 {
                Ok(())
            } else {
                invalid(format!("{name} must be positive and finite, got {v}"))
            }
        };
        match self {
            Domain::Interval { l } => pos(*l, "L"),
            Domain::Box { d, l } => {
                if *d == 0 {
                    return invalid("box dimension must be at least 1");
                }
                pos(*l, "L")
            }
            Domain::Ball { d, r } => {
                if *d == 0 {
                    return invalid("ball dimension must be at least 1");
                }
                pos(*r, "R")
            }
            Domain::Annulus { r1, r2 } => {
                pos(*r1, "R1")?;
                pos(*r2, "R2")?;
                if r1 >= r2 {
                    return invalid(format!("annulus needs R1 < R2, got {r1} >= {r2}"));
                }
                Ok(())
            }
            Domain::Product { factors } => {
                if factors.is_empty() {
                    return invalid("product needs at least one factor");
                }
                factors.iter().try_for_each(|f| f.validate())
            }
        }
    }

    pub fn dim(&self) -> usize {
        match self {
            Domain::Interval { .. } => 1,
            Domain::Box { d, .. } | Domain::Ball { d, .. } => *d,
            Domain::Annulus { .. } => 2,
            Domain::Product { factors } => factors.iter().map(|f| f.dim()).sum(),
        }
    }

    pub fn diameter(&self) -> f64 {
        match self {
            Domain::Interval { l } => *l,
            Domain::Box { d, l } => l * (*d as f64).sqrt(),
            Domain::Ball { r, .. } => 2.0 * r,
            Domain::Annulus { r2, .. } => 2.0 * r2,
            Domain::Product { factors } => {
                factors.iter().map(|f| f.diameter().powi(2)).sum::<f64>().sqrt()
            }
        }
    }

    pub fn volume(&self) -> f64 {
        match self {
            Domain::Interval { l } => *l,
            Domain::Box { d, l } => l.powi(*d as i32),
            Domain::Ball { d, r } => unit_ball_volume(*d) * r.powi(*d as i32),
            Domain::Annulus { r1, r2 } => std::f64::consts::PI * (r2 * r2 - r1 * r1),
            Domain::Product { factors } => factors.iter().map(|f| f.volume()).product(),
        }
    }

    /// Axis-aligned bounding box as (lower, upper) corners.
    pub fn bounding_box(&self) -> (Vec<f64>, Vec<f64>) {
        match self {
            Domain::Interval { l } => (vec![0.0], vec![*l]),
            Domain::Box { d, l } => (vec![0.0; *d], vec![*l; *d]),
            Domain::Ball { d, r } => (vec![-r; *d], vec![*r; *d]),
            Domain::Annulus { r2, .. } => (vec![-r2; 2], vec![*r2; 2]),
            Domain::Product { factors } => {
                let mut lo = Vec::new();
                let mut hi = Vec::new();
                for f in factors {
                    let (a, b) = f.bounding_box();
                    lo.extend(a);
                    hi.extend(b);
                }
                (lo, hi)
            }
        }
    }

    fn check_dim(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.dim() {
            return Err(Error::Dimension { expected: self.dim(), got: x.len() });
        }
        Ok(())
    }

    /// Whether `x` lies in the open domain.
    pub fn contains(&self, x: &[f64]) -> Result<bool> {
        self.check_dim(x)?;
        Ok(self.contains_unchecked(x))
    }

    pub(crate) fn contains_unchecked(&self, x: &[f64]) -> bool {
        match self {
            Domain::Interval { l } => x[0] > 0.0 && x[0] < *l,
            Domain::Box { l, .. } => x.iter().all(|&v| v > 0.0 && v < *l),
            Domain::Ball { r, .. } => norm(x) < *r,
            Domain::Annulus { r1, r2 } => {
                let n = norm(x);
                n > *r1 && n < *r2
            }
            Domain::Product { factors } => {
                let mut off = 0;
                factors.iter().all(|f| {
                    let k = f.dim();
                    let ok = f.contains_unchecked(&x[off..off + k]);
                    off += k;
                    ok
                })
            }
        }
    }

    /// Distance from an interior point to the boundary.
    pub fn dist_to_boundary(&self, x: &[f64]) -> Result<f64> {
        if !self.contains(x)? {
            return Err(Error::OutsideDomain);
        }
        Ok(self.dist_unchecked(x))
    }

    pub(crate) fn dist_unchecked(&self, x: &[f64]) -> f64 {
        match self {
            Domain::Interval { l } => x[0].min(l - x[0]),
            Domain::Box { l, .. } => x.iter().map(|&v| v.min(l - v)).fold(f64::INFINITY, f64::min),
            Domain::Ball { r, .. } => r - norm(x),
            Domain::Annulus { r1, r2 } => {
                let n = norm(x);
                (n - r1).min(r2 - n)
            }
            Domain::Product { factors } => {
                let mut off = 0;
                let mut best = f64::INFINITY;
                for f in factors {
                    let k = f.dim();
                    best = best.min(f.dist_unchecked(&x[off..off + k]));
                    off += k;
                }
                best
            }
        }
    }

    /// Membership in `U_eps = {x in U : dist(x, boundary) > eps}`.
    pub fn inner_region_contains(&self, eps: f64, x: &[f64]) -> Result<bool> {
        if eps < 0.0 {
            return invalid("eps must be nonnegative");
        }
        if !self.contains(x)? {
            return Ok(false);
        }
        Ok(self.dist_unchecked(x) > eps)
    }

    /// Volume of `U ∩ B(y, r)`. Exact for intervals; otherwise counts grid
    /// cells of side `h` whose centers lie in both sets.
    pub fn vol_ball_cap(&self, y: &[f64], r: f64, h: f64) -> Result<f64> {
        self.check_dim(y)?;
        if r <= 0.0 || h <= 0.0 {
            return invalid("radius and resolution must be positive");
        }
        if let Domain::Interval { l } = self {
            let lo = (y[0] - r).max(0.0);
            let hi = (y[0] + r).min(*l);
            return Ok((hi - lo).max(0.0));
        }
        let (blo, bhi) = self.bounding_box();
        let d = self.dim();
        let lo: Vec<f64> = (0..d).map(|i| blo[i].max(y[i] - r)).collect();
        let hi: Vec<f64> = (0..d).map(|i| bhi[i].min(y[i] + r)).collect();
        let counts: Vec<usize> = (0..d)
            .map(|i| (((hi[i] - lo[i]) / h).ceil().max(0.0)) as usize)
            .collect();
        if counts.contains(&0) {
            return Ok(0.0);
        }
        let total: usize = counts.iter().product();
        let mut x = vec![0.0; d];
        let mut hits = 0usize;
        let r2 = r * r;
        for lin in 0..total {
            let mut rem = lin;
            for i in 0..d {
                x[i] = lo[i] + (rem % counts[i]) as f64 * h + 0.5 * h;
                rem /= counts[i];
            }
            let dd: f64 = x.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum();
            if dd < r2 && self.contains_unchecked(&x) {
                hits += 1;
            }
        }
        Ok(hits as f64 * h.powi(d as i32))
    }
}

/// Volume of the unit ball in `R^d`.
pub fn unit_ball_volume(d: usize) -> f64 {
    let dh = d as f64 / 2.0;
    std::f64::consts::PI.powf(dh) / statrs::function::gamma::gamma(dh + 1.0)
}

/// Cone parameter `delta = min(arctan(1/K_U), r0)` of a Lipschitz domain.
pub fn delta_cone_parameter(k_u: f64, r0: f64) -> Result<f64> {
    if !(k_u > 0.0 && r0 > 0.0) {
        return invalid("K_U and r0 must be positive");
    }
    Ok((1.0 / k_u).atan().min(r0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn membership() {
        assert!(Domain::unit_interval().contains(&[0.5]).unwrap());
        assert!(!Domain::ball(2, 1.0).contains(&[1.0, 0.0]).unwrap());
        assert!(Domain::annulus(1.0, 3.0).contains(&[2.0, 0.0]).unwrap());
        assert!(Domain::unit_interval().contains(&[0.5, 0.1]).is_err());
    }

    #[test]
    fn distances() {
        assert_eq!(Domain::unit_interval().dist_to_boundary(&[0.3]).unwrap(), 0.3);
        assert_eq!(Domain::ball(3, 1.0).dist_to_boundary(&[0.5, 0.0, 0.0]).unwrap(), 0.5);
        assert!((Domain::cube(2, 1.0).dist_to_boundary(&[0.1, 0.4]).unwrap() - 0.1).abs() < 1e-15);
        assert!(Domain::unit_interval().dist_to_boundary(&[1.5]).is_err());
    }

    #[test]
    fn inner_region() {
        let i = Domain::unit_interval();
        assert!(i.inner_region_contains(0.2, &[0.5]).unwrap());
        assert!(!i.inner_region_contains(0.2, &[0.1]).unwrap());
        assert!(!Domain::annulus(1.0, 3.0).inner_region_contains(0.5, &[1.4, 0.0]).unwrap());
    }

    #[test]
    fn cone_parameter() {
        assert!((delta_cone_parameter(1.0, 10.0).unwrap() - PI / 4.0).abs() < 1e-15);
        assert!((delta_cone_parameter(1e6, 1.0).unwrap() - 1e-6).abs() < 1e-12);
        assert_eq!(delta_cone_parameter(1.0, 0.1).unwrap(), 0.1);
        assert!(delta_cone_parameter(0.0, 1.0).is_err());
    }

    #[test]
    fn ball_caps() {
        let i = Domain::unit_interval();
        assert!((i.vol_ball_cap(&[0.0], 0.3, 1e-3).unwrap() - 0.3).abs() < 1e-15);
        assert_eq!(i.vol_ball_cap(&[0.5], 2.0, 1e-3).unwrap(), 1.0);
        let v = Domain::ball(2, 1.0).vol_ball_cap(&[1.0, 0.0], 0.2, 1e-3).unwrap();
        // lens of two circles; the curvature correction shrinks the half disc slightly
        let half = PI * 0.04 / 2.0;
        let lens = {
            let (r, rr, d) = (0.2f64, 1.0f64, 1.0f64);
            r * r * ((d * d + r * r - rr * rr) / (2.0 * d * r)).acos()
                + rr * rr * ((d * d + rr * rr - r * r) / (2.0 * d * rr)).acos()
                - 0.5 * ((-d + r + rr) * (d + r - rr) * (d - r + rr) * (d + r + rr)).sqrt()
        };
        assert!((v - lens).abs() < 2e-3 * half, "{v} vs {lens}");
        assert!(v < half);
    }

    #[test]
    fn json_round_trip() {
        let d = Domain::product(vec![Domain::ball(2, 1.0), Domain::interval(2.0)]);
        let s = serde_json::to_string(&d).unwrap();
        assert_eq!(serde_json::from_str::<Domain>(&s).unwrap(), d);
        let i: Domain = serde_json::from_str(r#"{"kind":"Interval","L":1}"#).unwrap();
        assert_eq!(i, Domain::unit_interval());
        assert!(serde_json::from_str::<Domain>(r#"{"kind":"Interval","L":1,"x":2}"#).is_err());
        assert_eq!(d.dim(), 3);
    }

    fn lcg(state: &mut u64) -> f64 {
        *state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
        (*state >> 11) as f64 / (1u64 << 53) as f64
    }

    #[test]
    fn distance_at_most_half_diameter() {
        let cat = [
            Domain::unit_interval(),
            Domain::cube(2, 1.0),
            Domain::cube(3, 2.0),
            Domain::ball(2, 1.0),
            Domain::ball(3, 1.5),
            Domain::annulus(1.0, 3.0),
            Domain::product(vec![Domain::ball(2, 1.0), Domain::interval(0.5)]),
        ];
        let mut s = 7u64;
        for dom in &cat {
            let (lo, hi) = dom.bounding_box();
            let mut n = 0;
            while n < 1000 {
                let x: Vec<f64> = lo.iter().zip(&hi).map(|(a, b)| a + (b - a) * lcg(&mut s)).collect();
                if !dom.contains(&x).unwrap() {
                    continue;
                }
                n += 1;
                assert!(dom.dist_to_boundary(&x).unwrap() <= dom.diameter() / 2.0 + 1e-12);
                if let Domain::Product { factors } = dom {
                    let a = factors[0].dist_to_boundary(&x[..2]).unwrap();
                    let b = factors[1].dist_to_boundary(&x[2..]).unwrap();
                    assert_eq!(dom.dist_to_boundary(&x).unwrap(), a.min(b));
                }
            }
        }
    }

    #[test]
    fn volume_sandwich() {
        let cat = [Domain::unit_interval(), Domain::cube(2, 1.0), Domain::ball(2, 1.0), Domain::annulus(1.0, 3.0)];
        for dom in &cat {
            let d = dom.dim() as i32;
            let (lo, hi) = dom.bounding_box();
            let mut ratios = Vec::new();
            let pts: Vec<Vec<f64>> = match dom.dim() {
                1 => vec![vec![0.0], vec![0.3], vec![0.5]],
                _ => {
                    let mut v = Vec::new();
                    for a in [0.05, 0.3, 0.5, 0.8] {
                        for b in [0.1, 0.5, 0.9] {
                            let p = vec![lo[0] + a * (hi[0] - lo[0]), lo[1] + b * (hi[1] - lo[1])];
                            if dom.contains(&p).unwrap() {
                                v.push(p);
                            }
                        }
                    }
                    v
                }
            };
            for y in &pts {
                for r in [2e-2, 0.05, 0.2, 0.5, 1.0, 2.0 * dom.diameter()] {
                    let h = (r / 40.0).max(dom.diameter() / 400.0);
                    let v = dom.vol_ball_cap(y, r, h).unwrap();
                    ratios.push(v / r.min(1.0).powi(d));
                }
            }
            let lo_r = ratios.iter().cloned().fold(f64::INFINITY, f64::min);
            let hi_r = ratios.iter().cloned().fold(0.0, f64::max);
            assert!(lo_r > 0.0 && hi_r.is_finite(), "{lo_r} {hi_r}");
        }
    }
}
