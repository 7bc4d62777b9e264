//! Space-time Gaussian noise, white in time and correlated in space by the
//! Riesz kernel `|x|^{-β}`, discretized by cell averages.

use crate::error::{invalid, Error, Result};
use crate::grid::Grid;
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use std::collections::HashMap;
use std::f64::consts::FRAC_PI_4;

/// Riesz correlation `f(x) = |x|^{-β}`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CorrelationFn {
    pub beta: f64,
}

impl CorrelationFn {
    pub fn new(beta: f64, d: usize) -> Result<Self> {
        let cap = (d as f64).min(2.0);
        if !(beta > 0.0 && beta < cap) {
            return invalid(format!("beta must lie in (0, {cap}) for d = {d}, got {beta}"));
        }
        Ok(CorrelationFn { beta })
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        x.iter().map(|v| v * v).sum::<f64>().sqrt().powf(-self.beta)
    }
}

/// `∬_{[0,1]²} |y - y' - k|^{-β} dy dy'` for unit cells `k` apart.
pub fn unit_cell_cov_1d(k: usize, beta: f64) -> f64 {
    let kf = k as f64;
    if k < 64 {
        let g = |u: f64| u.abs().powf(2.0 - beta) / ((1.0 - beta) * (2.0 - beta));
        g(kf + 1.0) - 2.0 * g(kf) + g(kf - 1.0)
    } else {
        // second central difference of G expanded in even derivatives
        let b = beta;
        let k2 = 1.0 / (kf * kf);
        kf.powf(-b)
            * (1.0
                + b * (b + 1.0) / 12.0 * k2
                + b * (b + 1.0) * (b + 2.0) * (b + 3.0) / 360.0 * k2 * k2
                + b * (b + 1.0) * (b + 2.0) * (b + 3.0) * (b + 4.0) * (b + 5.0) / 20160.0 * k2 * k2 * k2)
    }
}

/// Same for unit squares offset by the integer vector `(d1, d2)`: the tent
/// weight `(1-|z1|)(1-|z2|)` on `[-1,1]²` against `|z + Δ|^{-β}`, one unit
/// square at a time. A square with the singular point at a corner is done
/// in polar coordinates about that corner (exact in r), the others by a
/// tensor Gauss rule.
pub fn unit_cell_cov_2d(d1: i64, d2: i64, beta: f64) -> f64 {
    let (gx, gw) = crate::quadrature::gauss_legendre(16);
    let p = [-(d1 as f64), -(d2 as f64)];
    let mut total = 0.0;
    for a in [-1.0f64, 0.0] {
        for b in [-1.0f64, 0.0] {
            let s1 = if a < 0.0 { -1.0 } else { 1.0 };
            let s2 = if b < 0.0 { -1.0 } else { 1.0 };
            let corner_x = p[0] == a || p[0] == a + 1.0;
            let corner_y = p[1] == b || p[1] == b + 1.0;
            if corner_x && corner_y {
                let ex = if p[0] == a { 1.0 } else { -1.0 };
                let ey = if p[1] == b { 1.0 } else { -1.0 };
                let a1 = 1.0 - s1 * p[0];
                let a2 = 1.0 - s2 * p[1];
                let radial = |th: f64, rmax: f64| {
                    let b1 = s1 * ex * th.cos();
                    let b2 = s2 * ey * th.sin();
                    a1 * a2 * rmax.powf(2.0 - beta) / (2.0 - beta) - (a1 * b2 + a2 * b1) * rmax.powf(3.0 - beta) / (3.0 - beta)
                        + b1 * b2 * rmax.powf(4.0 - beta) / (4.0 - beta)
                };
                let (tx, tw) = crate::quadrature::gauss_legendre(24);
                for (x, w) in tx.iter().zip(&tw) {
                    let th = FRAC_PI_4 * 0.5 * (x + 1.0);
                    total += FRAC_PI_4 * 0.5 * w * radial(th, 1.0 / th.cos());
                    let th2 = FRAC_PI_4 + th;
                    total += FRAC_PI_4 * 0.5 * w * radial(th2, 1.0 / th2.sin());
                }
            } else {
                for (x, wx) in gx.iter().zip(&gw) {
                    let z1 = a + 0.5 * (x + 1.0);
                    for (y, wy) in gx.iter().zip(&gw) {
                        let z2 = b + 0.5 * (y + 1.0);
                        let r = ((z1 - p[0]).powi(2) + (z2 - p[1]).powi(2)).sqrt();
                        total += 0.25 * wx * wy * (1.0 - z1.abs()) * (1.0 - z2.abs()) * r.powf(-beta);
                    }
                }
            }
        }
    }
    total
}

/// `C_ij = h^{-2d} ∬_{cell_i × cell_j} |y - y'|^{-β} dy dy'` over the
/// active cells of `grid`.
pub fn build_covariance(grid: &Grid, beta: f64) -> Result<DMatrix<f64>> {
    CorrelationFn::new(beta, grid.d)?;
    let n = grid.len();
    let scale = grid.h.powf(-beta);
    let mut c = DMatrix::zeros(n, n);
    match grid.d {
        1 => {
            let table: Vec<f64> = (0..grid.n).map(|k| scale * unit_cell_cov_1d(k, beta)).collect();
            for i in 0..n {
                for j in 0..n {
                    let k = grid.cells[i][0].abs_diff(grid.cells[j][0]);
                    c[(i, j)] = table[k];
                }
            }
        }
        2 => {
            let mut cache: HashMap<(usize, usize), f64> = HashMap::new();
            for i in 0..n {
                for j in i..n {
                    let a = grid.cells[i][0].abs_diff(grid.cells[j][0]);
                    let b = grid.cells[i][1].abs_diff(grid.cells[j][1]);
                    let key = (a.min(b), a.max(b));
                    let v = *cache.entry(key).or_insert_with(|| scale * unit_cell_cov_2d(key.0 as i64, key.1 as i64, beta));
                    c[(i, j)] = v;
                    c[(j, i)] = v;
                }
            }
        }
        d => return Err(Error::Unsupported(format!("covariance for d = {d}"))),
    }
    Ok(c)
}

/// Square root of a covariance matrix.
#[derive(Clone, Debug)]
pub struct NoiseFactor {
    pub cov: DMatrix<f64>,
    /// `factor · factorᵀ = cov`; lower triangular when `cholesky`.
    pub factor: DMatrix<f64>,
    pub cholesky: bool,
    pub clip_tol: f64,
    /// Sum of the magnitudes of clipped negative eigenvalues.
    pub clipped: f64,
}

/// Default clipping threshold relative to the largest eigenvalue.
pub const CLIP_TOL: f64 = 1e-10;

/// Cholesky factorization, falling back to a clipped symmetric
/// eigen-decomposition. Eigenvalues below `-clip_tol · λ_max` are an error.
pub fn factorize(cov: &DMatrix<f64>, clip_tol: f64) -> Result<NoiseFactor> {
    if !cov.is_square() {
        return invalid("covariance must be square");
    }
    let n = cov.nrows();
    for i in 0..n {
        for j in 0..i {
            if (cov[(i, j)] - cov[(j, i)]).abs() > 1e-12 * (cov[(i, i)].abs() + cov[(j, j)].abs()) {
                return invalid("covariance must be symmetric");
            }
        }
    }
    if let Some(ch) = nalgebra::Cholesky::new(cov.clone()) {
        return Ok(NoiseFactor { cov: cov.clone(), factor: ch.l(), cholesky: true, clip_tol, clipped: 0.0 });
    }
    let eig = nalgebra::SymmetricEigen::new(cov.clone());
    let max = eig.eigenvalues.iter().cloned().fold(0.0, f64::max);
    let mut clipped = 0.0;
    let mut roots = DVector::zeros(n);
    for (k, &l) in eig.eigenvalues.iter().enumerate() {
        if l < -clip_tol * max {
            return Err(Error::Factorization(format!("covariance eigenvalue {l:e} below -{clip_tol:e} x {max:e}")));
        }
        if l < 0.0 {
            clipped += -l;
        } else {
            roots[k] = l.sqrt();
        }
    }
    let factor = &eig.eigenvectors * DMatrix::from_diagonal(&roots);
    Ok(NoiseFactor { cov: cov.clone(), factor, cholesky: false, clip_tol, clipped })
}

impl NoiseFactor {
    pub fn dim(&self) -> usize {
        self.cov.nrows()
    }

    /// Max-norm distance between `factor · factorᵀ` and `cov`.
    pub fn reconstruction_error(&self) -> f64 {
        (&self.factor * self.factor.transpose() - &self.cov).amax()
    }
}

/// Counter-based key of one noise draw: the ChaCha stream is the
/// trajectory and each step owns its own 2³² word block.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct StreamKey {
    pub seed: u64,
    pub trajectory: u64,
    pub step: u64,
}

/// Fills `out` with standard normals determined by `key` alone.
pub fn fill_normals(key: StreamKey, out: &mut [f64]) {
    let mut rng = ChaCha8Rng::seed_from_u64(key.seed);
    rng.set_stream(key.trajectory);
    rng.set_word_pos((key.step as u128) << 32);
    for v in out.iter_mut() {
        *v = rng.sample(StandardNormal);
    }
}

/// `√dt · factor · ξ` with `ξ` drawn from `key`.
pub fn sample_increment(factor: &NoiseFactor, dt: f64, key: StreamKey) -> Result<DVector<f64>> {
    if !(dt >= 0.0) {
        return invalid("dt must be nonnegative");
    }
    let n = factor.dim();
    if dt == 0.0 {
        return Ok(DVector::zeros(n));
    }
    let mut xi = DVector::zeros(n);
    fill_normals(key, xi.as_mut_slice());
    Ok(&factor.factor * xi * dt.sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Domain;
    use crate::quadrature::adaptive;

    fn grid(n: usize) -> Grid {
        Grid::new(&Domain::unit_interval(), n).unwrap()
    }

    #[test]
    fn closed_form_cells() {
        assert!((unit_cell_cov_1d(0, 0.5) - 8.0 / 3.0).abs() < 1e-14);
        // adjacent cells against the tent-weighted one-dimensional integral
        let q = adaptive(|z: f64| (1.0 - z.abs()) * (z + 1.0).abs().powf(-0.5), -1.0, 1.0, 1e-13, 1e-12, 100_000)
            .map(|r| r.value)
            .unwrap_or_else(|_| crate::quadrature::integrate_two_sided(|z: f64| (1.0 - z.abs()) * (z + 1.0).abs().powf(-0.5), -1.0, 1.0, 1e-11).unwrap());
        assert!((unit_cell_cov_1d(1, 0.5) - q).abs() < 1e-10, "{} {q}", unit_cell_cov_1d(1, 0.5));
        // asymptotic branch continues the exact one
        for &b in &[0.2, 0.5, 0.9] {
            let kf = 64.0;
            let g = |u: f64| u.abs().powf(2.0 - b) / ((1.0 - b) * (2.0 - b));
            let exact = g(kf + 1.0) - 2.0 * g(kf) + g(kf - 1.0);
            assert!((unit_cell_cov_1d(64, b) - exact).abs() < 1e-11 * exact);
        }
    }

    #[test]
    fn far_cells_approach_pointwise() {
        let h: f64 = 1e-3;
        let v = h.powf(-0.5) * unit_cell_cov_1d(500, 0.5);
        assert!((v / 0.5f64.powf(-0.5) - 1.0).abs() < 0.01);
        let v2 = h.powf(-1.0) * unit_cell_cov_2d(300, 400, 1.0);
        assert!((v2 / 0.5f64.powf(-1.0) - 1.0).abs() < 0.01);
    }

    #[test]
    fn two_d_cells_against_brute_force() {
        // diagonal cell, β = 1: ∬ over unit squares of 1/|y-y'| has the
        // closed form 4 (ln(1+√2) - (√2-1)/3)
        let exact = 4.0 * ((1.0 + 2f64.sqrt()).ln() - (2f64.sqrt() - 1.0) / 3.0);
        assert!((unit_cell_cov_2d(0, 0, 1.0) - exact).abs() < 1e-10, "{}", unit_cell_cov_2d(0, 0, 1.0));
        // adjacent cell by nested one-dimensional quadrature on the tent form
        let beta = 1.3;
        let inner = |z1: f64| {
            adaptive(|z2: f64| (1.0 - z2.abs()) * ((z1 + 1.0).powi(2) + z2 * z2).sqrt().powf(-beta), -1.0, 1.0, 1e-13, 1e-11, 100_000)
                .unwrap()
                .value
        };
        let brute = adaptive(|z1: f64| (1.0 - z1.abs()) * inner(z1), -1.0, 1.0, 1e-12, 1e-9, 100_000).unwrap().value;
        assert!((unit_cell_cov_2d(1, 0, beta) - brute).abs() < 1e-7 * brute, "{} {brute}", unit_cell_cov_2d(1, 0, beta));
        assert!((unit_cell_cov_2d(1, 0, beta) - unit_cell_cov_2d(0, 1, beta)).abs() < 1e-13);
    }

    #[test]
    fn translation_structure_and_refinement() {
        let c = build_covariance(&grid(32), 0.5).unwrap();
        for i in 0..32 {
            for j in 0..32 {
                assert_eq!(c[(i, j)], c[(i.abs_diff(j), 0)]);
            }
        }
        // averaging 2x2 blocks of the fine covariance gives the coarse one
        let fine = build_covariance(&grid(128), 0.5).unwrap();
        let coarse = build_covariance(&grid(64), 0.5).unwrap();
        for i in 0..64 {
            for j in 0..64 {
                let avg = 0.25 * (fine[(2 * i, 2 * j)] + fine[(2 * i + 1, 2 * j)] + fine[(2 * i, 2 * j + 1)] + fine[(2 * i + 1, 2 * j + 1)]);
                assert!((avg - coarse[(i, j)]).abs() < 1e-10 * coarse[(i, j)]);
            }
        }
    }

    #[test]
    fn positive_definite() {
        for &n in &[16, 64, 256] {
            let c = build_covariance(&grid(n), 0.5).unwrap();
            let e = nalgebra::SymmetricEigen::new(c).eigenvalues;
            let max = e.max();
            assert!(e.min() >= -1e-10 * max);
        }
        let f = factorize(&build_covariance(&grid(64), 0.5).unwrap(), CLIP_TOL).unwrap();
        assert!(f.cholesky && f.reconstruction_error() < 1e-8);
        let g2 = Grid::new(&Domain::cube(2, 1.0), 8).unwrap();
        let f2 = factorize(&build_covariance(&g2, 1.0).unwrap(), CLIP_TOL).unwrap();
        assert!(f2.reconstruction_error() < 1e-8);
    }

    #[test]
    fn small_factorizations() {
        let id = DMatrix::<f64>::identity(3, 3);
        assert_eq!(factorize(&id, CLIP_TOL).unwrap().factor, id);
        let r = 0.3;
        let f = factorize(&DMatrix::from_row_slice(2, 2, &[1.0, r, r, 1.0]), CLIP_TOL).unwrap();
        let want = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, r, (1.0 - r * r).sqrt()]);
        assert!((f.factor - want).amax() < 1e-15);
        // singular but semidefinite goes through the eigen path
        let s = DMatrix::from_row_slice(2, 2, &[1.0, 1.0, 1.0, 1.0]);
        let f = factorize(&s, CLIP_TOL).unwrap();
        assert!(f.reconstruction_error() < 1e-12);
        let bad = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 1.0]);
        assert!(matches!(factorize(&bad, CLIP_TOL), Err(Error::Factorization(_))));
    }

    #[test]
    fn sampling_contract() {
        let f = factorize(&build_covariance(&grid(4), 0.5).unwrap(), CLIP_TOL).unwrap();
        let key = StreamKey { seed: 7, trajectory: 3, step: 11 };
        assert_eq!(sample_increment(&f, 0.0, key).unwrap(), DVector::zeros(4));
        assert_eq!(sample_increment(&f, 0.1, key).unwrap(), sample_increment(&f, 0.1, key).unwrap());
        assert_ne!(sample_increment(&f, 0.1, key).unwrap(), sample_increment(&f, 0.1, StreamKey { step: 12, ..key }).unwrap());
    }

    #[test]
    fn empirical_covariance() {
        let f = factorize(&build_covariance(&grid(4), 0.5).unwrap(), CLIP_TOL).unwrap();
        let dt = 0.01;
        let m = 100_000;
        let mut acc = DMatrix::<f64>::zeros(4, 4);
        let mut acc2 = DMatrix::<f64>::zeros(4, 4);
        let mut lag = 0.0;
        let mut prev: Option<DVector<f64>> = None;
        for s in 0..m {
            let x = sample_increment(&f, dt, StreamKey { seed: 1, trajectory: 0, step: s as u64 }).unwrap();
            let xx = &x * x.transpose();
            acc2 += xx.component_mul(&xx);
            acc += xx;
            if let Some(p) = &prev {
                lag += p[0] * x[0];
            }
            prev = Some(x);
        }
        let mean = &acc / m as f64;
        for i in 0..4 {
            for j in 0..4 {
                let var = acc2[(i, j)] / m as f64 - mean[(i, j)].powi(2);
                let se = (var / m as f64).sqrt();
                assert!((mean[(i, j)] - dt * f.cov[(i, j)]).abs() < 5.0 * se);
            }
        }
        let corr = lag / m as f64 / (dt * f.cov[(0, 0)]);
        assert!(corr.abs() < 5.0 / (m as f64).sqrt());
    }
}
