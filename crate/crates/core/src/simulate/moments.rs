//! Exact second moments of the discrete Anderson scheme.
//!
//! For `σ(u) = u` the step `u' = Q (u + λ u ∘ ΔW)` gives the closed
//! recursion `M' = Q (M + λ² dt M ∘ C) Qᵀ` for `M = E[u uᵀ]`, with `C` the
//! cell covariance. This is the Monte-Carlo limit of the same scheme, free of
//! sampling error, and is used where moments are too heavy-tailed to sample.

use super::{SigmaSpec, SimConfig, Simulation};
use crate::error::{invalid, Result};
use nalgebra::{DMatrix, DVector};

/// Largest grid for the dense recursion.
pub const MAX_MOMENT_CELLS: usize = 1024;

#[derive(Clone, Debug)]
pub struct SecondMoments {
    pub times: Vec<f64>,
    /// `E[u uᵀ] = e^{ln_scale[k]} · m[k]`.
    pub m: Vec<DMatrix<f64>>,
    pub ln_scale: Vec<f64>,
    pub cell_volume: f64,
    pub probe_rows: DMatrix<f64>,
}

impl SecondMoments {
    /// `ln E[u(t_k, x_i) u(t_k, x_j)]` over the config probes (NaN where the
    /// correlation is not positive).
    pub fn ln_probe_corr(&self, k: usize) -> DMatrix<f64> {
        let r = &self.probe_rows;
        (r * &self.m[k] * r.transpose()).map(|v| v.ln() + self.ln_scale[k])
    }

    /// `ln E[u(t_k, x) u(t_k, x')]` for arbitrary probe rows.
    pub fn ln_corr(&self, k: usize, rx: &DVector<f64>, ry: &DVector<f64>) -> f64 {
        (rx.transpose() * &self.m[k] * ry)[0].ln() + self.ln_scale[k]
    }

    /// `ln ℰ`, with `ℰ² = ∫ E u² dx`.
    pub fn ln_energy(&self, k: usize) -> f64 {
        0.5 * ((self.cell_volume * self.m[k].trace()).ln() + self.ln_scale[k])
    }
}

/// Runs the second-moment recursion for an Anderson config.
pub fn second_moments(config: &SimConfig) -> Result<SecondMoments> {
    if config.sigma != SigmaSpec::Anderson {
        return invalid("the second-moment recursion needs sigma = Anderson");
    }
    let sim = Simulation::new(config)?;
    let n = sim.grid.len();
    if n > MAX_MOMENT_CELLS {
        return invalid(format!("second-moment recursion limited to {MAX_MOMENT_CELLS} cells"));
    }
    let q = sim.heat_operator();
    let c = &sim.noise.cov * (config.lambda * config.lambda * config.dt);
    let mut m = &sim.initial * sim.initial.transpose();
    let mut ln_scale = 0.0;
    let steps: Vec<usize> = config.recorded_times().iter().map(|&t| config.step_of(t)).collect::<Result<_>>()?;
    let mut out = SecondMoments {
        times: config.recorded_times(),
        m: Vec::new(),
        ln_scale: Vec::new(),
        cell_volume: sim.grid.cell_volume(),
        probe_rows: sim.probe_rows.clone(),
    };
    let mut tmp = DMatrix::zeros(n, n);
    let mut next = 0;
    for step in 0..=config.steps() {
        if step > 0 {
            let t = &m + m.component_mul(&c);
            tmp.gemm(1.0, &q, &t, 0.0);
            m.gemm_tr(1.0, &tmp, &q, 0.0);
            let big = m.amax();
            if big > 1e100 || (big < 1e-100 && big > 0.0) {
                m /= big;
                ln_scale += big.ln();
            }
        }
        while next < steps.len() && steps[next] == step {
            out.m.push(m.clone());
            out.ln_scale.push(ln_scale);
            next += 1;
        }
    }
    Ok(out)
}
