//! Semi-implicit finite differences: `(I - dt Δ_h) u' = rhs` on the active
//! cells of a grid, solved by a cached banded Cholesky factor.
//!
//! Cells outside the domain (or the bounding box) act as ghosts. Dirichlet
//! ghosts are odd reflections (`-u`, placing the wall on the cell face);
//! Neumann ghosts are even reflections (`u`).

use crate::error::{Error, Result};
use crate::grid::Grid;
use crate::spectral::Bc;
use nalgebra::DMatrix;

/// Lower Cholesky factor in band storage, `bw` sub-diagonals.
#[derive(Clone, Debug)]
pub struct BandedCholesky {
    n: usize,
    bw: usize,
    band: Vec<f64>,
}

impl BandedCholesky {
    /// Factors the symmetric band matrix given by `entry(i, j)` for
    /// `i - bw <= j <= i`.
    pub fn factor(n: usize, bw: usize, entry: impl Fn(usize, usize) -> f64) -> Result<Self> {
        let w = bw + 1;
        let mut band = vec![0.0; n * w];
        for i in 0..n {
            for j in i.saturating_sub(bw)..=i {
                let mut s = entry(i, j);
                for k in i.saturating_sub(bw).max(j.saturating_sub(bw))..j {
                    s -= band[i * w + k + bw - i] * band[j * w + k + bw - j];
                }
                if i == j {
                    if !(s > 0.0) {
                        return Err(Error::Factorization(format!("pivot {s:e} at row {i}")));
                    }
                    band[i * w + bw] = s.sqrt();
                } else {
                    band[i * w + j + bw - i] = s / band[j * w + bw];
                }
            }
        }
        Ok(BandedCholesky { n, bw, band })
    }

    fn l(&self, i: usize, j: usize) -> f64 {
        self.band[i * (self.bw + 1) + j + self.bw - i]
    }

    pub fn solve_in_place(&self, x: &mut [f64]) {
        let (n, bw) = (self.n, self.bw);
        for i in 0..n {
            let mut s = x[i];
            for k in i.saturating_sub(bw)..i {
                s -= self.l(i, k) * x[k];
            }
            x[i] = s / self.l(i, i);
        }
        for i in (0..n).rev() {
            let mut s = x[i];
            for k in i + 1..(i + bw + 1).min(n) {
                s -= self.l(k, i) * x[k];
            }
            x[i] = s / self.l(i, i);
        }
    }

    pub fn dim(&self) -> usize {
        self.n
    }
}

/// Implicit heat step on a grid.
#[derive(Clone, Debug)]
pub struct FdSolver {
    pub chol: BandedCholesky,
}

impl FdSolver {
    pub fn new(grid: &Grid, bc: Bc, dt: f64) -> Result<Self> {
        let n = grid.len();
        let r = dt / (grid.h * grid.h);
        let mut diag = vec![1.0; n];
        let mut lower: Vec<Vec<(usize, f64)>> = vec![Vec::new(); n];
        let mut bw = 0;
        for (p, idx) in grid.cells.iter().enumerate() {
            for axis in 0..grid.d {
                for step in [-1i64, 1] {
                    let mut nb = idx.clone();
                    let v = idx[axis] as i64 + step;
                    let q = if v < 0 {
                        None
                    } else {
                        nb[axis] = v as usize;
                        grid.position(&nb)
                    };
                    match q {
                        Some(q) => {
                            diag[p] += r;
                            if q < p {
                                lower[p].push((q, -r));
                                bw = bw.max(p - q);
                            }
                        }
                        None => {
                            if bc == Bc::Dirichlet {
                                diag[p] += 2.0 * r;
                            }
                        }
                    }
                }
            }
        }
        let chol = BandedCholesky::factor(n, bw, |i, j| {
            if i == j {
                diag[i]
            } else {
                lower[i].iter().find(|(q, _)| *q == j).map_or(0.0, |e| e.1)
            }
        })?;
        Ok(FdSolver { chol })
    }

    pub fn solve_in_place(&self, x: &mut [f64]) {
        self.chol.solve_in_place(x)
    }

    /// Dense `(I - dt Δ_h)^{-1}`.
    pub fn dense_inverse(&self) -> DMatrix<f64> {
        let n = self.chol.dim();
        let mut m = DMatrix::identity(n, n);
        for mut c in m.column_iter_mut() {
            self.solve_in_place(c.as_mut_slice());
        }
        m
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Domain;

    #[test]
    fn banded_matches_dense() {
        let n = 9;
        let a = |i: usize, j: usize| -> f64 {
            match i.abs_diff(j) {
                0 => 4.0,
                1 => -1.0,
                3 => -0.5,
                _ => 0.0,
            }
        };
        let ch = BandedCholesky::factor(n, 3, a).unwrap();
        let dense = DMatrix::from_fn(n, n, a);
        let b: Vec<f64> = (0..n).map(|i| (i as f64).sin()).collect();
        let mut x = b.clone();
        ch.solve_in_place(&mut x);
        let r = &dense * nalgebra::DVector::from_vec(x) - nalgebra::DVector::from_vec(b);
        assert!(r.amax() < 1e-13);
    }

    #[test]
    fn neumann_preserves_constants() {
        let g = Grid::new(&Domain::ball(2, 1.0), 16).unwrap();
        let s = FdSolver::new(&g, Bc::Neumann, 0.01).unwrap();
        let mut x = vec![2.5; g.len()];
        s.solve_in_place(&mut x);
        assert!(x.iter().all(|v| (v - 2.5).abs() < 1e-12));
    }
}
