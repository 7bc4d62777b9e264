//! Cell-centered simulation grids.

use crate::error::{invalid, Error, Result};
use crate::geometry::Domain;

/// Uniform cells of side `h` covering the bounding box of a domain; a cell
/// is active when its center lies in the open domain.
#[derive(Clone, Debug, PartialEq)]
pub struct Grid {
    pub domain: Domain,
    pub d: usize,
    /// Cells per bounding-box side.
    pub n: usize,
    pub h: f64,
    pub lo: Vec<f64>,
    /// Multi-indices of the active cells, row-major (last index fastest).
    pub cells: Vec<Vec<usize>>,
    /// Flat bounding-box index -> active position.
    slot: Vec<Option<usize>>,
}

/// Largest supported `n^d`.
pub const MAX_CELLS: usize = 1 << 16;

impl Grid {
    pub fn new(domain: &Domain, n: usize) -> Result<Self> {
        domain.validate()?;
        let d = domain.dim();
        if d > 2 {
            return Err(Error::Unsupported(format!("simulation grids support d <= 2, got d = {d}")));
        }
        if n < 2 {
            return invalid("grid needs at least 2 cells per side");
        }
        if n.pow(d as u32) > MAX_CELLS {
            return invalid(format!("grid of {n}^{d} cells exceeds {MAX_CELLS}"));
        }
        let (lo, hi) = domain.bounding_box();
        let side = hi[0] - lo[0];
        if hi.iter().zip(&lo).any(|(a, b)| ((a - b) - side).abs() > 1e-12 * side) {
            return Err(Error::Unsupported("grids need a square bounding box".into()));
        }
        let h = side / n as f64;
        let total = n.pow(d as u32);
        let mut cells = Vec::new();
        let mut slot = vec![None; total];
        for flat in 0..total {
            let idx = unflatten(flat, n, d);
            let c: Vec<f64> = idx.iter().zip(&lo).map(|(&i, &l)| l + (i as f64 + 0.5) * h).collect();
            if domain.contains(&c)? {
                slot[flat] = Some(cells.len());
                cells.push(idx);
            }
        }
        if cells.is_empty() {
            return invalid("no cell center lies inside the domain");
        }
        Ok(Grid { domain: domain.clone(), d, n, h, lo, cells, slot })
    }

    pub fn len(&self) -> usize {
        self.cells.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cells.is_empty()
    }

    /// True when every bounding-box cell is active (intervals and boxes).
    pub fn is_full(&self) -> bool {
        self.cells.len() == self.n.pow(self.d as u32)
    }

    pub fn cell_volume(&self) -> f64 {
        self.h.powi(self.d as i32)
    }

    pub fn center(&self, c: usize) -> Vec<f64> {
        self.cells[c].iter().zip(&self.lo).map(|(&i, &l)| l + (i as f64 + 0.5) * self.h).collect()
    }

    pub fn centers_1d(&self) -> Vec<f64> {
        (0..self.n).map(|i| self.lo[0] + (i as f64 + 0.5) * self.h).collect()
    }

    /// Active position of a multi-index.
    pub fn position(&self, idx: &[usize]) -> Option<usize> {
        if idx.iter().any(|&i| i >= self.n) {
            return None;
        }
        self.slot[flatten(idx, self.n)]
    }

    /// Cell containing `x`; a point on a face goes to the lower-index cell.
    pub fn locate(&self, x: &[f64]) -> Result<usize> {
        if x.len() != self.d {
            return Err(Error::Dimension { expected: self.d, got: x.len() });
        }
        let mut idx = Vec::with_capacity(self.d);
        for (xi, l) in x.iter().zip(&self.lo) {
            let u = (xi - l) / self.h;
            let mut i = u.floor();
            if u == i && i > 0.0 {
                i -= 1.0;
            }
            if i < 0.0 || i >= self.n as f64 {
                return Err(Error::OutsideDomain);
            }
            idx.push(i as usize);
        }
        self.position(&idx).ok_or(Error::OutsideDomain)
    }
}

fn unflatten(mut flat: usize, n: usize, d: usize) -> Vec<usize> {
    let mut idx = vec![0; d];
    for k in (0..d).rev() {
        idx[k] = flat % n;
        flat /= n;
    }
    idx
}

fn flatten(idx: &[usize], n: usize) -> usize {
    idx.iter().fold(0, |acc, &i| acc * n + i)
}
