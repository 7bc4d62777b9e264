//! Discrete eigenbasis of the cell-centered Laplacian on `(0, L)`.

use crate::spectral::{mode_1d, Bc};
use nalgebra::{DMatrix, DVector};
use std::f64::consts::PI;

/// Modes sampled at cell centers. Dirichlet uses `k = 1..=n`, Neumann
/// `k = 0..n`; both families are orthogonal on the centers, so the
/// synthesis matrix has the exact inverse `analysis`.
#[derive(Clone, Debug)]
pub struct EigenBasis {
    pub bc: Bc,
    pub l: f64,
    pub n: usize,
    /// `synthesis[(i, j)] = φ_{k_j}(x_i)`.
    pub synthesis: DMatrix<f64>,
    pub analysis: DMatrix<f64>,
    /// Continuum eigenvalues `(k π / L)²`.
    pub mu: Vec<f64>,
}

impl EigenBasis {
    pub fn new(bc: Bc, l: f64, n: usize) -> Self {
        let h = l / n as f64;
        let ks = Self::indices(bc, n);
        let synthesis = DMatrix::from_fn(n, n, |i, j| mode_1d(bc, l, ks[j], (i as f64 + 0.5) * h));
        let mut analysis = synthesis.transpose() * h;
        for j in 0..n {
            let norm: f64 = synthesis.column(j).iter().map(|v| h * v * v).sum();
            analysis.row_mut(j).scale_mut(1.0 / norm);
        }
        let mu = ks.iter().map(|&k| (k as f64 * PI / l).powi(2)).collect();
        EigenBasis { bc, l, n, synthesis, analysis, mu }
    }

    pub fn indices(bc: Bc, n: usize) -> Vec<usize> {
        match bc {
            Bc::Dirichlet => (1..=n).collect(),
            Bc::Neumann => (0..n).collect(),
        }
    }

    pub fn wavenumbers(&self) -> Vec<usize> {
        Self::indices(self.bc, self.n)
    }

    /// `S diag(e^{-μ dt}) A`.
    pub fn propagator(&self, dt: f64) -> DMatrix<f64> {
        let mut scaled = self.synthesis.clone();
        for (j, &m) in self.mu.iter().enumerate() {
            scaled.column_mut(j).scale_mut((-m * dt).exp());
        }
        scaled * &self.analysis
    }

    /// Mode values `φ_k(x)`.
    pub fn modes_at(&self, x: f64) -> DVector<f64> {
        DVector::from_iterator(self.n, self.wavenumbers().into_iter().map(|k| mode_1d(self.bc, self.l, k, x)))
    }

    /// Row `r` with `r · u` the spectral interpolant of the cell vector `u`
    /// at `x`.
    pub fn probe_row(&self, x: f64) -> DVector<f64> {
        self.analysis.tr_mul(&self.modes_at(x))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn analysis_inverts_synthesis() {
        for bc in [Bc::Dirichlet, Bc::Neumann] {
            let b = EigenBasis::new(bc, 1.3, 24);
            let id = &b.analysis * &b.synthesis;
            assert!((id - DMatrix::identity(24, 24)).amax() < 1e-12);
        }
    }

    #[test]
    fn propagator_scales_modes() {
        let b = EigenBasis::new(Bc::Dirichlet, 1.0, 16);
        let p = b.propagator(0.01);
        let v = b.synthesis.column(0).into_owned();
        let w = &p * &v;
        assert!((w - v * (-PI * PI * 0.01f64).exp()).amax() < 1e-13);
    }

    #[test]
    fn probe_row_interpolates_modes() {
        let b = EigenBasis::new(Bc::Neumann, 1.0, 16);
        let u = b.synthesis.column(3).into_owned();
        let x = 0.37;
        assert!((b.probe_row(x).dot(&u) - mode_1d(Bc::Neumann, 1.0, 3, x)).abs() < 1e-12);
    }
}
