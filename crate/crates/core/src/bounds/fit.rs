//! Fitting bound constants on an interval.
//!
//! Heat-kernel Gaussian constants come from the kernel envelope fits. The
//! amplitude and growth constant of each resolvent envelope are fitted by
//! least squares in log space against the resolvent series, with `c = c′`
//! (and `c̄ = c̃`), then the amplitude is shifted so the envelope dominates
//! (upper) or is dominated by (lower) every sample.

use super::{BoundConstants, BoundContext, BoundKind, ModelParams, Regularity};
use crate::error::{invalid, Result};
use crate::estimate::series::{resolvent_sum, resolvent_terms, CorrSeriesConfig};
use crate::geometry::Domain;
use crate::heatkernel::{fit_interval_envelope, Side};
use crate::spectral::Bc;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FitConfig {
    pub l: f64,
    pub beta: f64,
    pub lambdas: Vec<f64>,
    pub times: Vec<f64>,
    /// Sample coordinates for `x, x′, y, y′` (fractions of `l`).
    pub points: Vec<f64>,
    /// Depth of `U_ε` for Dirichlet lower bounds (fraction of `l`).
    pub eps: f64,
    pub series: CorrSeriesConfig,
}

impl Default for FitConfig {
    fn default() -> Self {
        FitConfig {
            l: 1.0,
            beta: 0.5,
            lambdas: vec![0.5, 1.0, 1.5],
            times: vec![0.05, 0.1, 0.2, 0.4],
            points: vec![0.15, 0.3, 0.5, 0.7, 0.85],
            eps: 0.1,
            series: CorrSeriesConfig { n_max: 10, n_space: 32, n_time: 48, tail_tol: 0.05, backward: false },
        }
    }
}

/// One resolvent value `𝒦^λ(t, x, x′, y, y′)`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ResolventSample {
    pub lambda: f64,
    pub t: f64,
    pub x: f64,
    pub x2: f64,
    pub y: f64,
    pub y2: f64,
    pub value: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ConstantsFit {
    pub consts: BoundConstants,
    pub regularity: Regularity,
    /// Spread `exp(max - min)` of the log residuals of each envelope.
    pub kappa_upper: f64,
    pub kappa_lower: f64,
    pub samples: usize,
}

/// Resolvent values on the tensor grid of `cfg`.
pub fn resolvent_samples(bc: Bc, cfg: &FitConfig) -> Result<Vec<ResolventSample>> {
    let dom = Domain::interval(cfg.l);
    let pts: Vec<f64> = cfg.points.iter().map(|p| p * cfg.l).collect();
    let targets: Vec<(Vec<f64>, Vec<f64>)> = pts.iter().flat_map(|&y| pts.iter().map(move |&y2| (vec![y], vec![y2]))).collect();
    let mut out = Vec::new();
    for &t in &cfg.times {
        for &x in &pts {
            for &x2 in &pts {
                let terms = resolvent_terms(&dom, bc, cfg.beta, t, &[x], &[x2], &targets, &cfg.series)?;
                for ((y, y2), tn) in targets.iter().zip(&terms) {
                    for &lambda in &cfg.lambdas {
                        let value = resolvent_sum(tn, lambda, cfg.series.tail_tol)?;
                        out.push(ResolventSample { lambda, t, x, x2, y: y[0], y2: y2[0], value });
                    }
                }
            }
        }
    }
    Ok(out)
}

/// `ln 𝒦 - ln(envelope shape with unit amplitude and zero growth)` and the
/// growth regressor `g t (λ² + λ^{4/(2−β)})`.
fn residuals(kind: BoundKind, consts: &BoundConstants, ctx: &BoundContext, beta: f64, samples: &[ResolventSample]) -> Result<Vec<(f64, f64)>> {
    let zero = BoundConstants { c: 1e-300, c_prime: 1e-300, c_bar: 1e-300, c_tilde: 1e-300, amp: 1.0, amp_bar: 1.0, ..*consts };
    let growth = if kind.bc == Bc::Dirichlet { 2.0 } else { 1.0 };
    let mut out = Vec::new();
    for s in samples.iter().filter(|s| s.value > 0.0) {
        let params = ModelParams::anderson(s.lambda, beta);
        let shape = super::resolvent_envelope(kind, &zero, &params, ctx, s.t, &[s.x], &[s.x2], &[s.y], &[s.y2])?;
        if !(shape > 0.0) {
            continue;
        }
        let z = growth * s.t * (s.lambda.powi(2) + s.lambda.powf(4.0 / (2.0 - beta)));
        out.push((z, s.value.ln() - shape.ln()));
    }
    if out.len() < 3 {
        return invalid("not enough positive resolvent samples");
    }
    Ok(out)
}

/// `(ln amplitude, growth constant, kappa)`.
fn fit_line(pts: &[(f64, f64)], side: Side) -> (f64, f64, f64) {
    let n = pts.len() as f64;
    let mz = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let mr = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let szz: f64 = pts.iter().map(|p| (p.0 - mz).powi(2)).sum();
    let szr: f64 = pts.iter().map(|p| (p.0 - mz) * (p.1 - mr)).sum();
    let c = if szz > 0.0 { (szr / szz).max(1e-6) } else { 1e-6 };
    let resid: Vec<f64> = pts.iter().map(|p| p.1 - c * p.0).collect();
    let hi = resid.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let lo = resid.iter().cloned().fold(f64::INFINITY, f64::min);
    let amp = match side {
        Side::Upper => hi,
        Side::Lower => lo,
    };
    (amp, c, (hi - lo).exp())
}

/// Fits every constant of [`BoundConstants`] on `Interval(l)`.
pub fn fit_interval_constants(bc: Bc, regularity: Regularity, cfg: &FitConfig) -> Result<ConstantsFit> {
    if cfg.points.iter().any(|&p| !(p > 0.0 && p < 1.0)) {
        return invalid("fit points must be fractions in (0, 1)");
    }
    let upper = fit_interval_envelope(cfg.l, bc, Side::Upper)?.envelope;
    let lower = fit_interval_envelope(cfg.l, bc, Side::Lower)?.envelope;
    let mu = if bc == Bc::Dirichlet { (PI / cfg.l).powi(2) } else { 0.0 };
    let mut consts = BoundConstants { kernel_upper: upper.c, kernel_lower: lower.c, ..BoundConstants::unit(mu) };
    let dom = Domain::interval(cfg.l);
    let ctx = BoundContext::new(&dom, bc)?.with_eps(cfg.eps * cfg.l).with_neumann_lower_kernel(bc == Bc::Neumann);
    let samples = resolvent_samples(bc, cfg)?;
    let kind = |side| BoundKind { bc, side, regularity };
    let (la, c, kappa_upper) = fit_line(&residuals(kind(Side::Upper), &consts, &ctx, cfg.beta, &samples)?, Side::Upper);
    let (lb, cb, kappa_lower) = fit_line(&residuals(kind(Side::Lower), &consts, &ctx, cfg.beta, &samples)?, Side::Lower);
    consts.amp = la.exp();
    consts.c = c;
    consts.c_prime = c;
    consts.amp_bar = lb.exp();
    consts.c_bar = cb;
    consts.c_tilde = cb;
    Ok(ConstantsFit { consts, regularity, kappa_upper, kappa_lower, samples: samples.len() })
}
