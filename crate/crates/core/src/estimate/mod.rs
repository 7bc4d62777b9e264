//! Estimates from ensembles (moments, correlations, Lyapunov slopes, energy)
//! and deterministic oracles for the two-point correlation.

pub mod ko;
pub mod series;

use crate::error::{invalid, Error, Result};
use crate::quadrature::compensated_sum;
use crate::simulate::Ensemble;
use crate::spectral::EigenPair;
use serde::Serialize;
use statrs::distribution::{ContinuousCDF, StudentsT};

pub use crate::bounds::Regime;
pub use ko::{ko_quadrature, KoConfig};
pub use series::{corr_series, resolvent_series, resolvent_sum, resolvent_terms, triangle_op, CorrSeries, CorrSeriesConfig, TimeRule, TupleSpace};

/// Sample moment with its standard error.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct MomentEstimate {
    pub value: f64,
    pub se: f64,
    pub m: usize,
    pub t: f64,
    pub x: Vec<f64>,
    /// Second point for correlations.
    pub x2: Option<Vec<f64>>,
    pub p: f64,
}

/// Mean and jackknife standard error. For the mean the delete-one
/// jackknife equals `std / √M`.
pub fn mean_se(samples: &[f64]) -> Result<(f64, f64)> {
    let m = samples.len();
    if m == 0 {
        return invalid("empty sample");
    }
    let mean = compensated_sum(samples.iter().cloned()) / m as f64;
    if m == 1 {
        return Ok((mean, 0.0));
    }
    let var = compensated_sum(samples.iter().map(|v| (v - mean).powi(2))) / (m - 1) as f64;
    Ok((mean, (var / m as f64).sqrt()))
}

/// `E|u(t, x)|^p`.
pub fn moment_estimate(ens: &Ensemble, p: f64, t: f64, x: &[f64]) -> Result<MomentEstimate> {
    if !(p > 0.0) {
        return invalid("moment order must be positive");
    }
    let u = ens.samples(t, x)?;
    let vals: Vec<f64> = u.iter().map(|v| v.abs().powf(p)).collect();
    let (value, se) = mean_se(&vals)?;
    Ok(MomentEstimate { value, se, m: vals.len(), t, x: x.to_vec(), x2: None, p })
}

/// `E[u(t, x) u(t, x')]`.
pub fn corr_estimate(ens: &Ensemble, t: f64, x: &[f64], x2: &[f64]) -> Result<MomentEstimate> {
    let a = ens.samples(t, x)?;
    let b = ens.samples(t, x2)?;
    let vals: Vec<f64> = a.iter().zip(&b).map(|(u, v)| u * v).collect();
    let (value, se) = mean_se(&vals)?;
    Ok(MomentEstimate { value, se, m: vals.len(), t, x: x.to_vec(), x2: Some(x2.to_vec()), p: 2.0 })
}

/// Least-squares line with a two-sided 95% confidence interval.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SlopeFit {
    pub slope: f64,
    pub intercept: f64,
    pub se: f64,
    pub ci: (f64, f64),
    pub points: usize,
}

fn line(xs: &[f64], ys: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let slope = sxy / sxx;
    (slope, my - slope * mx)
}

fn t_quantile(dof: usize) -> f64 {
    StudentsT::new(0.0, 1.0, dof as f64).map(|d| d.inverse_cdf(0.975)).unwrap_or(f64::INFINITY)
}

/// Slope of `ln y` against `x` with residual-based CI.
pub fn log_slope(xs: &[f64], ys: &[f64]) -> Result<SlopeFit> {
    if xs.len() != ys.len() || xs.len() < 3 {
        return invalid("need at least 3 matching points");
    }
    if ys.iter().any(|&y| !(y > 0.0)) {
        return Err(Error::Numerical("log fit of nonpositive values".into()));
    }
    let ly: Vec<f64> = ys.iter().map(|y| y.ln()).collect();
    let (slope, intercept) = line(xs, &ly);
    let n = xs.len();
    let mx = xs.iter().sum::<f64>() / n as f64;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let rss: f64 = xs.iter().zip(&ly).map(|(x, y)| (y - intercept - slope * x).powi(2)).sum();
    let se = (rss / (n - 2) as f64 / sxx).sqrt();
    let q = t_quantile(n - 2);
    Ok(SlopeFit { slope, intercept, se, ci: (slope - q * se, slope + q * se), points: n })
}

/// Growth rate of a moment curve `m(t)` over `window`: the least-squares
/// slope of `ln m` against `t`.
pub fn lyapunov_fit(times: &[f64], moments: &[f64], window: (f64, f64)) -> Result<SlopeFit> {
    let (ts, ms): (Vec<f64>, Vec<f64>) = times
        .iter()
        .zip(moments)
        .filter(|(t, _)| **t >= window.0 - 1e-12 && **t <= window.1 + 1e-12)
        .map(|(t, m)| (*t, *m))
        .unzip();
    if ts.len() < 5 {
        return invalid(format!("lyapunov fit needs at least 5 times in the window, got {}", ts.len()));
    }
    log_slope(&ts, &ms)
}

/// What a jackknifed Lyapunov fit measures.
#[derive(Clone, Debug, PartialEq)]
pub enum Observable {
    /// `E|u(t, x)|²` at a probe.
    Probe(Vec<f64>),
    /// `E ∫ |u(t, x)|² dx`.
    Energy,
}

/// Lyapunov slope of a second moment from an ensemble, with a grouped
/// jackknife interval over trajectories (`groups` blocks).
pub fn lyapunov_fit_ensemble(ens: &Ensemble, obs: &Observable, window: (f64, f64), groups: usize) -> Result<SlopeFit> {
    let idx: Vec<usize> = (0..ens.times.len())
        .filter(|&k| ens.times[k] >= window.0 - 1e-12 && ens.times[k] <= window.1 + 1e-12)
        .collect();
    if idx.len() < 5 {
        return invalid(format!("lyapunov fit needs at least 5 times in the window, got {}", idx.len()));
    }
    let m = ens.len();
    if groups < 2 || m < groups {
        return invalid("jackknife needs at least 2 groups and one trajectory per group");
    }
    let values: Vec<Vec<f64>> = idx
        .iter()
        .map(|&k| match obs {
            Observable::Probe(x) => {
                let p = ens.probe_index(x)?;
                Ok(ens.probe_values[k].column(p).iter().map(|v| v * v).collect())
            }
            Observable::Energy => Ok(ens.sq_norms[k].clone()),
        })
        .collect::<Result<_>>()?;
    let ts: Vec<f64> = idx.iter().map(|&k| ens.times[k]).collect();
    let bounds: Vec<usize> = (0..=groups).map(|g| g * m / groups).collect();
    let group_sums: Vec<Vec<f64>> = values
        .iter()
        .map(|v| (0..groups).map(|g| compensated_sum(v[bounds[g]..bounds[g + 1]].iter().cloned())).collect())
        .collect();
    let totals: Vec<f64> = group_sums.iter().map(|g| compensated_sum(g.iter().cloned())).collect();
    let full: Vec<f64> = totals.iter().map(|s| s / m as f64).collect();
    let fit = log_slope(&ts, &full)?;
    let mut slopes = Vec::with_capacity(groups);
    for g in 0..groups {
        let size = (m - (bounds[g + 1] - bounds[g])) as f64;
        let loo: Vec<f64> = totals.iter().zip(&group_sums).map(|(t, gs)| (t - gs[g]) / size).collect();
        slopes.push(log_slope(&ts, &loo)?.slope);
    }
    let mean = slopes.iter().sum::<f64>() / groups as f64;
    let var = (groups - 1) as f64 / groups as f64 * slopes.iter().map(|s| (s - mean).powi(2)).sum::<f64>();
    let se = var.sqrt();
    let q = t_quantile(groups - 1);
    Ok(SlopeFit { slope: fit.slope, intercept: fit.intercept, se, ci: (fit.slope - q * se, fit.slope + q * se), points: ts.len() })
}

/// `ℰ_t = (E ∫ u² dx)^{1/2}` with a delta-method standard error.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct EnergyEstimate {
    pub value: f64,
    pub se: f64,
    pub t: f64,
}

/// `L²` energy from the per-trajectory cell sums (midpoint rule).
pub fn l2_energy(ens: &Ensemble, t: f64) -> Result<EnergyEstimate> {
    let k = ens.time_index(t)?;
    energy_from(&ens.sq_norms[k], t)
}

/// Weighted energy `(E ∫ u² / Φ1² dx)^{1/2}`; needs kept fields.
pub fn l2_energy_weighted(ens: &Ensemble, t: f64, eig: &EigenPair) -> Result<EnergyEstimate> {
    let k = ens.time_index(t)?;
    let fields = ens.fields.as_ref().ok_or_else(|| Error::Validation("weighted energy needs keep_fields".into()))?;
    let w: Vec<f64> = ens.centers.iter().map(|c| ens.cell_volume / eig.phi1(c).powi(2)).collect();
    let f = &fields[k];
    let sums: Vec<f64> = (0..f.nrows()).map(|j| compensated_sum(f.row(j).iter().zip(&w).map(|(u, w)| w * u * u))).collect();
    energy_from(&sums, t)
}

fn energy_from(sq: &[f64], t: f64) -> Result<EnergyEstimate> {
    let (mean, se) = mean_se(sq)?;
    if !(mean > 0.0) {
        return Err(Error::Numerical("nonpositive energy".into()));
    }
    let value = mean.sqrt();
    Ok(EnergyEstimate { value, se: se / (2.0 * value), t })
}

/// Slope of `ln ln ℰ` against `ln λ`. Needs at least 4 points and
/// `ℰ > 1` throughout.
pub fn excitation_fit(lambdas: &[f64], energies: &[f64], regime: Regime) -> Result<SlopeFit> {
    let ln: Vec<f64> = energies.iter().map(|e| e.ln()).collect();
    excitation_fit_ln(lambdas, &ln, regime)
}

/// As [`excitation_fit`], from `ln ℰ` (energies can exceed `f64`).
pub fn excitation_fit_ln(lambdas: &[f64], ln_energies: &[f64], regime: Regime) -> Result<SlopeFit> {
    if lambdas.len() != ln_energies.len() || lambdas.len() < 4 {
        return invalid("excitation fit needs at least 4 (lambda, energy) pairs");
    }
    if lambdas.iter().any(|&l| !(l > 0.0)) {
        return invalid("lambdas must be positive");
    }
    let ok = match regime {
        Regime::LargeLambda => lambdas.iter().all(|&l| l >= 1.0),
        Regime::SmallLambda => lambdas.iter().all(|&l| l <= 1.0),
    };
    if !ok {
        return invalid(format!("lambda grid does not fit the {regime:?} regime"));
    }
    if ln_energies.iter().any(|&l| !(l > 0.0)) {
        return Err(Error::Numerical("ln ln E needs energies above 1".into()));
    }
    let xs: Vec<f64> = lambdas.iter().map(|l| l.ln()).collect();
    log_slope(&xs, ln_energies)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn exact_exponential_slope() {
        let ts: Vec<f64> = (0..10).map(|i| 1.0 + 0.5 * i as f64).collect();
        let ms: Vec<f64> = ts.iter().map(|t| 3.0 * (-2.0 * PI * PI * t).exp()).collect();
        let f = lyapunov_fit(&ts, &ms, (1.0, 5.5)).unwrap();
        assert!((f.slope + 2.0 * PI * PI).abs() < 1e-10);
        assert!(f.ci.1 - f.ci.0 < 1e-8);
        let flat = lyapunov_fit(&ts, &[2.0; 10], (0.0, 10.0)).unwrap();
        assert!(flat.slope.abs() < 1e-14);
    }

    #[test]
    fn window_needs_five_points() {
        let ts = [1.0, 2.0, 3.0, 4.0];
        assert!(lyapunov_fit(&ts, &[1.0; 4], (0.0, 5.0)).is_err());
    }

    #[test]
    fn se_is_std_over_root_m() {
        let v = [1.0, 2.0, 4.0, 7.0];
        let (m, se) = mean_se(&v).unwrap();
        assert_eq!(m, 3.5);
        let var = v.iter().map(|x| (x - 3.5f64).powi(2)).sum::<f64>() / 3.0;
        assert!((se - (var / 4.0).sqrt()).abs() < 1e-15);
    }

    #[test]
    fn excitation_recovers_power() {
        let ls = [4.0, 6.0, 8.0, 12.0, 16.0];
        let e: Vec<f64> = ls.iter().map(|l: &f64| (0.01 * l.powf(8.0 / 3.0)).exp()).collect();
        let f = excitation_fit(&ls, &e, Regime::LargeLambda).unwrap();
        assert!((f.slope - 8.0 / 3.0).abs() < 1e-10);
        assert!(excitation_fit(&ls, &[0.5; 5], Regime::LargeLambda).is_err());
    }
}
