//! `k(t) = sup_{x,x'} ∬ G(t,x,y) G(t,x',y') f(y - y') dy dy'` on an
//! interval, through the modal form
//! `Σ_{k,l} e^{-(μ_k+μ_l)t} φ_k(x) φ_l(x') F_kl`, `F_kl = ∬ φ_k(y) φ_l(y') f(y-y')`.
//!
//! Each `F_kl` reduces to `∫_0^L r^{-β} (g_kl(r) + g_lk(r)) dr` with the
//! closed-form overlap `g_kl(r) = ∫ φ_k(y) φ_l(y + r) dy`; the substitution
//! `r = L z^{1/(1-β)}` removes the singularity.

use crate::error::{invalid, Error, Result};
use crate::geometry::Domain;
use crate::quadrature::GaussRule;
use crate::spectral::{mode_1d, Bc};
use nalgebra::{DMatrix, DVector};
use std::f64::consts::PI;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct KoConfig {
    /// Points per side of the sup grid (including the endpoints).
    pub grid: usize,
    pub max_modes: usize,
}

impl Default for KoConfig {
    fn default() -> Self {
        KoConfig { grid: 33, max_modes: 400 }
    }
}

/// Precomputed `F` for the first `modes` modes.
#[derive(Clone, Debug)]
pub struct KoTable {
    pub bc: Bc,
    pub l: f64,
    pub beta: f64,
    pub ks: Vec<usize>,
    pub f: DMatrix<f64>,
}

/// `∫_0^y cos(ω s + θ) ds`.
fn cos_integral(omega: f64, theta: f64, y: f64) -> f64 {
    if omega.abs() * y < 1e-8 {
        y * theta.cos() - 0.5 * omega * y * y * theta.sin()
    } else {
        ((omega * y + theta).sin() - theta.sin()) / omega
    }
}

fn norm(bc: Bc, l: f64, k: usize) -> f64 {
    if bc == Bc::Neumann && k == 0 {
        l.powf(-0.5)
    } else {
        (2.0 / l).sqrt()
    }
}

/// `g_kl(r) = ∫_0^{L-r} φ_k(y) φ_l(y + r) dy` for `0 <= r <= L`.
pub fn overlap(bc: Bc, l: f64, k: usize, m: usize, r: f64) -> f64 {
    let a = k as f64 * PI / l;
    let g = m as f64 * PI / l;
    let y = l - r;
    let diff = cos_integral(a - g, -g * r, y);
    let sum = cos_integral(a + g, g * r, y);
    let sign = if bc == Bc::Dirichlet { -1.0 } else { 1.0 };
    norm(bc, l, k) * norm(bc, l, m) * 0.5 * (diff + sign * sum)
}

impl KoTable {
    pub fn new(bc: Bc, l: f64, beta: f64, modes: usize) -> Result<Self> {
        if !(beta > 0.0 && beta < 1.0) {
            return invalid("beta must lie in (0, 1) on an interval");
        }
        let start = if bc == Bc::Dirichlet { 1 } else { 0 };
        let ks: Vec<usize> = (start..start + modes).collect();
        let q = 1.0 / (1.0 - beta);
        let kmax = *ks.last().unwrap() as f64;
        let (z, w) = GaussRule::new(10).nodes(0.0, 1.0, 16 + 2 * kmax as usize);
        let r: Vec<f64> = z.iter().map(|zi| l * zi.powf(q)).collect();
        let pref = l.powf(1.0 - beta) * q;
        let mut f = DMatrix::zeros(modes, modes);
        for i in 0..modes {
            for j in i..modes {
                let (a, b) = (ks[i], ks[j]);
                let v: f64 = r.iter().zip(&w).map(|(&ri, &wi)| wi * (overlap(bc, l, a, b, ri) + overlap(bc, l, b, a, ri))).sum();
                f[(i, j)] = pref * v;
                f[(j, i)] = pref * v;
            }
        }
        Ok(KoTable { bc, l, beta, ks, f })
    }

    /// `∬ G(t,x,y) G(t,x',y') f(y-y') dy dy'`.
    pub fn value(&self, t: f64, x: f64, x2: f64) -> f64 {
        let e = self.decayed(t, x);
        let e2 = self.decayed(t, x2);
        (e.transpose() * &self.f * e2)[0]
    }

    fn decayed(&self, t: f64, x: f64) -> DVector<f64> {
        DVector::from_iterator(
            self.ks.len(),
            self.ks.iter().map(|&k| mode_1d(self.bc, self.l, k, x) * (-(k as f64 * PI / self.l).powi(2) * t).exp()),
        )
    }

    /// Sup over a uniform `grid × grid` set of points in `[0, L]²`.
    pub fn sup(&self, t: f64, grid: usize) -> f64 {
        let xs: Vec<f64> = (0..grid).map(|i| self.l * i as f64 / (grid - 1) as f64).collect();
        let vs: Vec<DVector<f64>> = xs.iter().map(|&x| self.decayed(t, x)).collect();
        let fv: Vec<DVector<f64>> = vs.iter().map(|v| &self.f * v).collect();
        let mut best = f64::NEG_INFINITY;
        for a in &vs {
            for b in &fv {
                best = best.max(a.dot(b));
            }
        }
        best
    }
}

/// Modes needed so that `e^{-μ_k t}` falls below `1e-16`.
pub fn modes_for(l: f64, t: f64, cap: usize) -> usize {
    ((l / PI * (36.8 / t).sqrt()).ceil() as usize + 2).min(cap)
}

pub fn ko_quadrature(domain: &Domain, bc: Bc, beta: f64, t: f64, cfg: &KoConfig) -> Result<f64> {
    let l = match domain {
        Domain::Interval { l } => *l,
        _ => return Err(Error::Unsupported("kO quadrature is implemented for intervals".into())),
    };
    if !(t > 0.0) {
        return invalid("t must be positive");
    }
    if cfg.grid < 2 {
        return invalid("sup grid needs at least 2 points");
    }
    let table = KoTable::new(bc, l, beta, modes_for(l, t, cfg.max_modes))?;
    Ok(table.sup(t, cfg.grid))
}
