//! Moment, correlation and resolvent bounds evaluated with explicit
//! constants, the intermittency thresholds `λ₀ < λ₁`, predicted excitation
//! indices and the admissibility class of initial data.
//!
//! The constants are existential in the theory; callers supply them or fit
//! them on an interval with [`fit`].

pub mod fit;

use crate::error::{invalid, Error, Result};
use crate::geometry::Domain;
use crate::heatkernel::{j_c, j_c_star, psi, Side};
use crate::measure::InitialMeasure;
use crate::spectral::{leading_eigenpair, phi1_measure_integral, Bc, EigenPair};
use serde::{Deserialize, Serialize};

pub use fit::{fit_interval_constants, ConstantsFit, FitConfig};

fn one() -> f64 {
    1.0
}

fn two() -> f64 {
    2.0
}

/// Noise level, noise exponent and the bounds on `σ`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelParams {
    pub lambda: f64,
    pub beta: f64,
    /// `|σ(u)| <= L_σ |u|`.
    #[serde(rename = "L_sigma")]
    pub lip: f64,
    /// `σ(u) >= l_σ |u|`; zero when only the upper cone holds.
    pub l_sigma: f64,
    /// `C_f^{-1} |x|^{-β} <= f(x) <= C_f |x|^{-β}`.
    #[serde(rename = "C_f", default = "one")]
    pub c_f: f64,
    #[serde(default = "two")]
    pub p: f64,
    /// `σ(u) = u`, so `L_σ = l_σ = 1`.
    #[serde(default)]
    pub anderson: bool,
}

impl ModelParams {
    pub fn anderson(lambda: f64, beta: f64) -> Self {
        ModelParams { lambda, beta, lip: 1.0, l_sigma: 1.0, c_f: 1.0, p: 2.0, anderson: true }
    }

    pub fn validate(&self, d: usize) -> Result<()> {
        if !(self.beta > 0.0 && self.beta < (d as f64).min(2.0)) {
            return invalid(format!("beta must lie in (0, min(2, d)) = (0, {})", (d as f64).min(2.0)));
        }
        if !(self.lambda >= 0.0 && self.lambda.is_finite()) {
            return invalid("lambda must be finite and nonnegative");
        }
        if !(self.lip > 0.0 && self.lip >= self.l_sigma && self.l_sigma >= 0.0) {
            return invalid("need L_sigma >= l_sigma >= 0 and L_sigma > 0");
        }
        if !(self.c_f >= 1.0) {
            return invalid("C_f must be at least 1");
        }
        if !(self.p >= 2.0) {
            return invalid("moment order p must be at least 2");
        }
        if self.anderson && (self.lip != 1.0 || self.l_sigma != 1.0) {
            return invalid("the Anderson model has L_sigma = l_sigma = 1");
        }
        Ok(())
    }

    /// Noise level seen by upper bounds (`f <= C_f |x|^{-β}`).
    fn lambda_upper(&self) -> f64 {
        self.lambda * self.c_f.sqrt()
    }

    /// Noise level seen by lower bounds (`f >= C_f^{-1} |x|^{-β}`).
    fn lambda_lower(&self) -> f64 {
        self.lambda / self.c_f.sqrt()
    }
}

/// Constants of the bounds. `C`, `c`, `c′` enter upper bounds and the
/// barred/tilde variants lower bounds; `kernel_upper` and `kernel_lower`
/// are the Gaussian constants of the heat-kernel bounds (`c₁`, `c₂` under
/// Dirichlet, `c₃`, `c₄` under Neumann).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoundConstants {
    #[serde(rename = "C")]
    pub amp: f64,
    pub c: f64,
    pub c_prime: f64,
    #[serde(rename = "C_bar")]
    pub amp_bar: f64,
    pub c_bar: f64,
    pub c_tilde: f64,
    pub kernel_upper: f64,
    pub kernel_lower: f64,
    /// `μ₁` under Dirichlet, `0` under Neumann.
    pub mu: f64,
}

impl BoundConstants {
    /// All constants equal to one with the given `μ`.
    pub fn unit(mu: f64) -> Self {
        BoundConstants { amp: 1.0, c: 1.0, c_prime: 1.0, amp_bar: 1.0, c_bar: 1.0, c_tilde: 1.0, kernel_upper: 1.0, kernel_lower: 1.0, mu }
    }

    pub fn validate(&self) -> Result<()> {
        let pos = [self.amp, self.c, self.c_prime, self.amp_bar, self.c_bar, self.c_tilde, self.kernel_upper, self.kernel_lower];
        if pos.iter().any(|v| !(*v > 0.0 && v.is_finite())) {
            return invalid("bound constants must be positive and finite");
        }
        if !(self.mu >= 0.0 && self.mu.is_finite()) {
            return invalid("mu must be nonnegative");
        }
        Ok(())
    }

    fn check_bc(&self, bc: Bc) -> Result<()> {
        self.validate()?;
        if bc == Bc::Neumann && self.mu != 0.0 {
            return invalid("Neumann bounds carry mu = 0");
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Regularity {
    Lipschitz,
    #[serde(rename = "c1alpha")]
    C1Alpha,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct BoundKind {
    pub bc: Bc,
    pub side: Side,
    pub regularity: Regularity,
}

/// Geometry shared by the correlation and resolvent bounds.
#[derive(Clone, Debug)]
pub struct BoundContext {
    pub domain: Domain,
    pub eig: EigenPair,
    /// Depth of `U_ε` for Lipschitz-Dirichlet lower bounds.
    pub eps: f64,
    /// The Gaussian lower bound of the Neumann heat kernel is available
    /// (smooth convex domains).
    pub neumann_lower_kernel: bool,
}

impl BoundContext {
    pub fn new(domain: &Domain, bc: Bc) -> Result<Self> {
        Ok(BoundContext { domain: domain.clone(), eig: leading_eigenpair(domain, bc)?, eps: 0.0, neumann_lower_kernel: false })
    }

    pub fn with_eps(mut self, eps: f64) -> Self {
        self.eps = eps;
        self
    }

    pub fn with_neumann_lower_kernel(mut self, on: bool) -> Self {
        self.neumann_lower_kernel = on;
        self
    }

    fn check(&self, kind: BoundKind, points: &[&[f64]]) -> Result<()> {
        if kind.bc != self.eig.bc {
            return invalid("boundary condition differs from the context eigenpair");
        }
        for p in points {
            if p.len() != self.domain.dim() {
                return Err(Error::Dimension { expected: self.domain.dim(), got: p.len() });
            }
        }
        if kind.regularity == Regularity::C1Alpha {
            if kind.bc != Bc::Dirichlet {
                return Err(Error::Unsupported("C^{1,α} bounds are stated for Dirichlet conditions".into()));
            }
            if !matches!(self.domain, Domain::Interval { .. } | Domain::Ball { .. } | Domain::Annulus { .. }) {
                return Err(Error::Unsupported("boxes and products are Lipschitz, not C^{1,α}".into()));
            }
            return Ok(());
        }
        if kind.side == Side::Lower {
            match kind.bc {
                Bc::Dirichlet => {
                    if !(self.eps > 0.0) {
                        return invalid("Lipschitz Dirichlet lower bounds need eps > 0");
                    }
                    for p in points {
                        if !self.domain.inner_region_contains(self.eps, p)? {
                            return invalid(format!("point {p:?} is not in U_eps with eps = {}", self.eps));
                        }
                    }
                }
                Bc::Neumann => {
                    if !self.neumann_lower_kernel {
                        return invalid("Neumann lower bounds need the Gaussian heat-kernel lower bound (smooth convex domain)");
                    }
                }
            }
        }
        Ok(())
    }
}

/// `2/(2-β)`.
fn q(beta: f64) -> f64 {
    2.0 / (2.0 - beta)
}

/// `c p s² + c′ p^{2/(2−β)} s^{4/(2−β)}` with `s = λ L_σ`.
pub fn growth_rate(c: f64, c_prime: f64, beta: f64, p: f64, s: f64) -> f64 {
    let e = q(beta);
    c * p * s * s + c_prime * p.powf(e) * s.powf(2.0 * e)
}

fn dist2(x: &[f64], y: &[f64]) -> f64 {
    x.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum()
}

/// `‖u(t,x)‖_p <= C e^{t(c p λ²L² + c′ p^{2/(2−β)} (λL)^{4/(2−β)} − μ)} D(t,x)`
/// with `D = J_{c₁}` (Lipschitz) or `Ψ J*_{2c₁/3}` (`C^{1,α}`) supplied.
pub fn moment_upper(bc: Bc, consts: &BoundConstants, params: &ModelParams, t: f64, data: f64) -> Result<f64> {
    consts.check_bc(bc)?;
    if !(t > 0.0) {
        return invalid("t must be positive");
    }
    let rate = growth_rate(consts.c, consts.c_prime, params.beta, params.p, params.lambda_upper() * params.lip);
    Ok(consts.amp * (t * (rate - consts.mu)).exp() * data)
}

/// The data functional that multiplies the bound of `kind` at `(t, x)`:
/// `J_{c₁}`, `J_{12c₂,ε}`, `Ψ J*_{2c₁/3}` or `Ψ J*_{12c₂}`.
pub fn data_functional(kind: BoundKind, consts: &BoundConstants, ctx: &BoundContext, nu: &InitialMeasure, t: f64, x: &[f64]) -> Result<f64> {
    ctx.check(kind, &[x])?;
    let dom = &ctx.domain;
    match (kind.regularity, kind.side) {
        (Regularity::Lipschitz, Side::Upper) => j_c(dom, nu, consts.kernel_upper, t, x, None),
        (Regularity::Lipschitz, Side::Lower) => {
            let eps = if kind.bc == Bc::Dirichlet { Some(ctx.eps) } else { None };
            j_c(dom, nu, 12.0 * consts.kernel_lower, t, x, eps)
        }
        (Regularity::C1Alpha, Side::Upper) => {
            Ok(psi(&ctx.eig, t, x) * j_c_star(dom, &ctx.eig, nu, 2.0 * consts.kernel_upper / 3.0, t, x)?)
        }
        (Regularity::C1Alpha, Side::Lower) => Ok(psi(&ctx.eig, t, x) * j_c_star(dom, &ctx.eig, nu, 12.0 * consts.kernel_lower, t, x)?),
    }
}

/// Upper or lower bound on `E[u(t,x) u(t,x′)]`; `data` holds the
/// functional of [`data_functional`] at `x` and `x′`.
///
/// The upper bound assumes `σ(u) = u` or a nonnegative solution.
#[allow(clippy::too_many_arguments)]
pub fn corr_bounds(
    kind: BoundKind,
    consts: &BoundConstants,
    params: &ModelParams,
    ctx: &BoundContext,
    t: f64,
    x: &[f64],
    x2: &[f64],
    data: [f64; 2],
) -> Result<f64> {
    consts.check_bc(kind.bc)?;
    params.validate(ctx.domain.dim())?;
    ctx.check(kind, &[x, x2])?;
    if !(t > 0.0) {
        return invalid("t must be positive");
    }
    let prod = data[0] * data[1];
    match kind.side {
        Side::Upper => {
            let rate = growth_rate(consts.c, consts.c_prime, params.beta, 1.0, params.lambda_upper() * params.lip);
            Ok(consts.amp * (2.0 * t * (rate - consts.mu)).exp() * prod)
        }
        Side::Lower => {
            if params.l_sigma == 0.0 {
                return invalid("lower bounds need l_sigma > 0 or the Anderson model");
            }
            let rate = growth_rate(consts.c_bar, consts.c_tilde, params.beta, 1.0, params.lambda_lower() * params.l_sigma);
            let gauss = (-16.0 * consts.kernel_lower * dist2(x, x2) / t).exp();
            Ok(consts.amp_bar * (2.0 * t * (rate - consts.mu)).exp() * gauss * prod)
        }
    }
}

/// Envelope of the resolvent kernel `𝒦^λ(t, x, x′, y, y′)`. Dirichlet
/// envelopes grow like `e^{2t(·)}`, Neumann ones like `e^{t(·)}`.
#[allow(clippy::too_many_arguments)]
pub fn resolvent_envelope(
    kind: BoundKind,
    consts: &BoundConstants,
    params: &ModelParams,
    ctx: &BoundContext,
    t: f64,
    x: &[f64],
    x2: &[f64],
    y: &[f64],
    y2: &[f64],
) -> Result<f64> {
    consts.check_bc(kind.bc)?;
    params.validate(ctx.domain.dim())?;
    ctx.check(kind, &[x, x2, y, y2])?;
    if !(t > 0.0) {
        return invalid("t must be positive");
    }
    let d = ctx.domain.dim() as f64;
    let spread = (dist2(x, y) + dist2(x2, y2)) / t;
    let growth = if kind.bc == Bc::Dirichlet { 2.0 } else { 1.0 };
    let boundary = match kind.regularity {
        Regularity::Lipschitz => 1.0,
        Regularity::C1Alpha => [x, x2, y, y2].iter().map(|p| psi(&ctx.eig, t, p)).product(),
    };
    let heat = 1.0 / t.powf(d).min(1.0);
    let value = match kind.side {
        Side::Upper => {
            let lam = params.lambda_upper();
            let gauss = match kind.regularity {
                Regularity::Lipschitz => consts.kernel_upper,
                Regularity::C1Alpha => 2.0 * consts.kernel_upper / 3.0,
            };
            let rate = growth_rate(consts.c, consts.c_prime, params.beta, 1.0, lam);
            consts.amp * lam * lam * heat * (-gauss * spread).exp() * (growth * t * (rate - consts.mu)).exp()
        }
        Side::Lower => {
            let lam = params.lambda_lower();
            let k = consts.kernel_lower;
            let rate = growth_rate(consts.c_bar, consts.c_tilde, params.beta, 1.0, lam);
            consts.amp_bar * lam * lam * heat * (-16.0 * k * dist2(x, x2) / t - 12.0 * k * spread).exp() * (growth * t * (rate - consts.mu)).exp()
        }
    };
    Ok(value * boundary)
}

/// `λ₀` and `λ₁`; `lambda1 = None` stands for `λ₁ = ∞` (no cone constant).
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Thresholds {
    pub lambda0: f64,
    pub lambda1: Option<f64>,
    /// `|map(λ₀) - μ₁|`.
    pub residual0: f64,
    pub residual1: Option<f64>,
}

/// Root of an increasing `f` with `f(0) = 0`; zero when `target <= 0`.
fn solve_increasing<F: Fn(f64) -> f64>(f: F, target: f64) -> Result<f64> {
    if target <= 0.0 {
        return Ok(0.0);
    }
    let mut hi = 1.0;
    let mut guard = 0;
    while f(hi) < target {
        hi *= 2.0;
        guard += 1;
        if guard > 2000 || !hi.is_finite() {
            return Err(Error::Bracketing("threshold map never reaches mu1".into()));
        }
    }
    let mut lo = 0.0;
    for _ in 0..400 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if f(mid) < target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(if (f(lo) - target).abs() < (f(hi) - target).abs() { lo } else { hi })
}

/// Thresholds from
/// `2c(λL)² + 2^{2/(2−β)} c′ (λL)^{4/(2−β)} = μ₁` and
/// `c̄(λl)² + c̃(λl)^{4/(2−β)} = μ₁`.
pub fn lambda_thresholds(consts: &BoundConstants, params: &ModelParams, mu1: f64) -> Result<Thresholds> {
    consts.validate()?;
    if !(mu1 >= 0.0) {
        return invalid("mu1 must be nonnegative");
    }
    if !(params.beta > 0.0 && params.beta < 2.0) {
        return invalid("beta must lie in (0, 2)");
    }
    let beta = params.beta;
    let su = params.c_f.sqrt() * params.lip;
    let map0 = |lam: f64| growth_rate(consts.c, consts.c_prime, beta, 2.0, lam * su);
    let lambda0 = solve_increasing(map0, mu1)?;
    let residual0 = (map0(lambda0) - mu1).abs();
    let (lambda1, residual1) = if params.l_sigma == 0.0 {
        (None, None)
    } else {
        let sl = params.l_sigma / params.c_f.sqrt();
        let map1 = |lam: f64| growth_rate(consts.c_bar, consts.c_tilde, beta, 1.0, lam * sl);
        let l1 = solve_increasing(map1, mu1)?;
        (Some(l1), Some((map1(l1) - mu1).abs()))
    };
    let tol = 1e-10 * mu1.max(1.0);
    if residual0 > tol || residual1.is_some_and(|r| r > tol) {
        return Err(Error::Numerical("threshold bisection did not reach the residual tolerance".into()));
    }
    Ok(Thresholds { lambda0, lambda1, residual0, residual1 })
}

/// `p (c p λ²L² + c′ p^{2/(2−β)} (λL)^{4/(2−β)} − μ)`, the bound on
/// `limsup t⁻¹ log E|u(t,x)|^p`.
pub fn lyapunov_bound(params: &ModelParams, consts: &BoundConstants, p: f64) -> f64 {
    p * (growth_rate(consts.c, consts.c_prime, params.beta, p, params.lambda_upper() * params.lip) - consts.mu)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Regime {
    LargeLambda,
    SmallLambda,
}

/// `lim log log ℰ_t(λ) / log λ`: `4/(2−β)` as `λ → ∞`, `2` as `λ → 0⁺`
/// (Neumann only; Dirichlet solutions decay for small `λ`).
pub fn excitation_index(regime: Regime, bc: Bc, beta: f64) -> Result<f64> {
    if !(beta > 0.0 && beta < 2.0) {
        return invalid("beta must lie in (0, 2)");
    }
    match (regime, bc) {
        (Regime::LargeLambda, _) => Ok(4.0 / (2.0 - beta)),
        (Regime::SmallLambda, Bc::Neumann) => Ok(2.0),
        (Regime::SmallLambda, Bc::Dirichlet) => invalid("no small-lambda excitation index under Dirichlet conditions"),
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Admissibility {
    BoundedDensity,
    FiniteMeasure,
    Phi1Integrable,
    Inadmissible,
}

fn finite_or_divergent(r: Result<f64>) -> Result<bool> {
    match r {
        Ok(v) => Ok(v.is_finite()),
        Err(Error::Divergent(_)) => Ok(false),
        Err(e) => Err(e),
    }
}

/// Strongest class of initial data `nu` satisfies. `∫Φ₁ d|ν| < ∞` counts
/// for Dirichlet `C^{1,α}` domains and, factor by factor, for boxes.
pub fn admissibility(domain: &Domain, bc: Bc, regularity: Regularity, nu: &InitialMeasure) -> Result<Admissibility> {
    nu.validate(domain)?;
    if nu.atoms().is_empty() && nu.densities().iter().all(|(p, _)| p.is_bounded()) {
        return Ok(Admissibility::BoundedDensity);
    }
    if finite_or_divergent(nu.total_variation(domain))? {
        return Ok(Admissibility::FiniteMeasure);
    }
    if bc == Bc::Dirichlet && regularity == Regularity::C1Alpha {
        let eig = leading_eigenpair(domain, bc)?;
        if finite_or_divergent(phi1_measure_integral(domain, &eig, nu))? {
            return Ok(Admissibility::Phi1Integrable);
        }
    }
    Ok(Admissibility::Inadmissible)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::measure::DensityProfile;
    use std::f64::consts::PI;

    fn dir_kind(side: Side) -> BoundKind {
        BoundKind { bc: Bc::Dirichlet, side, regularity: Regularity::Lipschitz }
    }

    #[test]
    fn lambda0_closed_form() {
        // β = 1: 2λ² + 4λ⁴ = π², a quadratic in λ²
        let params = ModelParams { beta: 1.0, ..ModelParams::anderson(1.0, 1.0) };
        let th = lambda_thresholds(&BoundConstants::unit(PI * PI), &params, PI * PI).unwrap();
        let s = (-2.0 + (4.0 + 16.0 * PI * PI).sqrt()) / 8.0;
        assert!((th.lambda0 - s.sqrt()).abs() < 1e-12);
        assert!(th.residual0 < 1e-10);
        // λ₁ solves λ² + λ⁴ = π²
        let s1 = (-1.0 + (1.0 + 4.0 * PI * PI).sqrt()) / 2.0;
        assert!((th.lambda1.unwrap() - s1.sqrt()).abs() < 1e-12);
        assert!(th.lambda0 < th.lambda1.unwrap());
    }

    #[test]
    fn thresholds_monotone_and_degenerate() {
        let c = BoundConstants::unit(PI * PI);
        let p = ModelParams::anderson(1.0, 0.5);
        let base = lambda_thresholds(&c, &p, PI * PI).unwrap().lambda0;
        let doubled = ModelParams { lip: 2.0, l_sigma: 1.0, anderson: false, ..p };
        assert!(lambda_thresholds(&c, &doubled, PI * PI).unwrap().lambda0 <= base / 2.0 + 1e-12);
        assert!(lambda_thresholds(&c, &p, 1e-12).unwrap().lambda0 < 1e-5);
        let cone_free = ModelParams { l_sigma: 0.0, anderson: false, ..p };
        assert_eq!(lambda_thresholds(&c, &cone_free, PI * PI).unwrap().lambda1, None);
    }

    #[test]
    fn moment_and_lyapunov() {
        let c = BoundConstants { amp: 1.7, ..BoundConstants::unit(PI * PI) };
        let mut p = ModelParams::anderson(0.0, 0.5);
        let v = moment_upper(Bc::Dirichlet, &c, &p, 0.3, 2.0).unwrap();
        assert!((v - 1.7 * (-0.3 * PI * PI).exp() * 2.0).abs() < 1e-14);
        assert!((lyapunov_bound(&p, &c, 3.0) + 3.0 * PI * PI).abs() < 1e-12);
        // Neumann, p = 2, β = 1/2: rate 2λ² + 2^{4/3} λ^{8/3}
        p.lambda = 1.3;
        let n = BoundConstants::unit(0.0);
        let rate = 2.0 * 1.3f64.powi(2) + 2f64.powf(4.0 / 3.0) * 1.3f64.powf(8.0 / 3.0);
        assert!((moment_upper(Bc::Neumann, &n, &p, 1.0, 1.0).unwrap().ln() - rate).abs() < 1e-12);
        assert!(moment_upper(Bc::Neumann, &c, &p, 1.0, 1.0).is_err());
        // β = 1, p = 2, λ = 1: 2(2 + 4 - π²)
        let p1 = ModelParams::anderson(1.0, 1.0);
        assert!((lyapunov_bound(&p1, &c, 2.0) - 2.0 * (6.0 - PI * PI)).abs() < 1e-12);
    }

    #[test]
    fn corr_bounds_rules() {
        let dom = Domain::unit_interval();
        let ctx = BoundContext::new(&dom, Bc::Dirichlet).unwrap();
        let c = BoundConstants::unit(PI * PI);
        let p = ModelParams::anderson(0.0, 0.5);
        // the lower bound needs eps > 0 and points in U_eps
        assert!(corr_bounds(dir_kind(Side::Lower), &c, &p, &ctx, 0.1, &[0.5], &[0.5], [1.0, 1.0]).is_err());
        let ctx = ctx.with_eps(0.1);
        assert!(corr_bounds(dir_kind(Side::Lower), &c, &p, &ctx, 0.1, &[0.05], &[0.5], [1.0, 1.0]).is_err());
        let lo = corr_bounds(dir_kind(Side::Lower), &c, &p, &ctx, 0.1, &[0.5], &[0.5], [2.0, 3.0]).unwrap();
        assert!((lo - 6.0 * (-0.2 * PI * PI).exp()).abs() < 1e-14);
        let cone_free = ModelParams { l_sigma: 0.0, anderson: false, ..p };
        assert!(corr_bounds(dir_kind(Side::Lower), &c, &cone_free, &ctx, 0.1, &[0.5], &[0.5], [1.0, 1.0]).is_err());
        let nctx = BoundContext::new(&dom, Bc::Neumann).unwrap();
        let nk = BoundKind { bc: Bc::Neumann, side: Side::Lower, regularity: Regularity::Lipschitz };
        let n = BoundConstants::unit(0.0);
        assert!(corr_bounds(nk, &n, &p, &nctx, 0.1, &[0.5], &[0.5], [1.0, 1.0]).is_err());
        let nctx = nctx.with_neumann_lower_kernel(true);
        assert!(corr_bounds(nk, &n, &p, &nctx, 0.1, &[0.5], &[0.5], [1.0, 1.0]).is_ok());
        let ck = BoundKind { bc: Bc::Neumann, side: Side::Upper, regularity: Regularity::C1Alpha };
        assert!(matches!(corr_bounds(ck, &n, &p, &nctx, 0.1, &[0.5], &[0.5], [1.0, 1.0]), Err(Error::Unsupported(_))));
    }

    #[test]
    fn exponents_match_moment_square() {
        // corr upper at x = x' has the exponent of the p = 2 moment bound
        // with p-free coefficients: compare log-derivatives in t
        let dom = Domain::unit_interval();
        let ctx = BoundContext::new(&dom, Bc::Dirichlet).unwrap();
        let c = BoundConstants::unit(PI * PI);
        let p = ModelParams::anderson(1.5, 0.5);
        let k = dir_kind(Side::Upper);
        let f = |t: f64| corr_bounds(k, &c, &p, &ctx, t, &[0.5], &[0.5], [1.0, 1.0]).unwrap().ln();
        let slope = f(2.0) - f(1.0);
        let rate = growth_rate(1.0, 1.0, 0.5, 1.0, 1.5);
        assert!((slope - 2.0 * (rate - PI * PI)).abs() < 1e-10);
    }

    #[test]
    fn c1alpha_envelope_vanishes_at_boundary() {
        let dom = Domain::unit_interval();
        let ctx = BoundContext::new(&dom, Bc::Dirichlet).unwrap();
        let c = BoundConstants::unit(PI * PI);
        let p = ModelParams::anderson(1.0, 0.5);
        let k = BoundKind { bc: Bc::Dirichlet, side: Side::Upper, regularity: Regularity::C1Alpha };
        let inner = resolvent_envelope(k, &c, &p, &ctx, 0.2, &[0.5], &[0.4], &[0.5], &[0.5]).unwrap();
        let edge = resolvent_envelope(k, &c, &p, &ctx, 0.2, &[1e-9], &[0.4], &[0.5], &[0.5]).unwrap();
        assert!(inner > 0.0 && edge < 1e-7 * inner);
        let small = resolvent_envelope(k, &c, &ModelParams::anderson(1e-4, 0.5), &ctx, 0.2, &[0.5], &[0.4], &[0.5], &[0.5]).unwrap();
        assert!(small < 1e-7);
    }

    #[test]
    fn monotone_in_lambda() {
        let dom = Domain::unit_interval();
        let ctx = BoundContext::new(&dom, Bc::Dirichlet).unwrap().with_eps(0.1);
        let c = BoundConstants { c: 0.3, c_prime: 2.0, c_bar: 0.1, c_tilde: 0.5, ..BoundConstants::unit(PI * PI) };
        let mut prev = [0.0; 5];
        for i in 0..=40 {
            let p = ModelParams::anderson(0.1 * i as f64, 0.7);
            let vals = [
                moment_upper(Bc::Dirichlet, &c, &p, 0.4, 1.0).unwrap(),
                corr_bounds(dir_kind(Side::Upper), &c, &p, &ctx, 0.4, &[0.3], &[0.6], [1.0, 1.0]).unwrap(),
                corr_bounds(dir_kind(Side::Lower), &c, &p, &ctx, 0.4, &[0.3], &[0.6], [1.0, 1.0]).unwrap(),
                resolvent_envelope(dir_kind(Side::Upper), &c, &p, &ctx, 0.4, &[0.3], &[0.6], &[0.5], &[0.5]).unwrap(),
                lyapunov_bound(&p, &c, 2.0),
            ];
            if i > 0 {
                for (v, w) in vals.iter().zip(&prev) {
                    assert!(v > w);
                }
            }
            prev = vals;
        }
    }

    #[test]
    fn excitation_indices() {
        assert_eq!(excitation_index(Regime::LargeLambda, Bc::Dirichlet, 1.0).unwrap(), 4.0);
        assert!((excitation_index(Regime::LargeLambda, Bc::Neumann, 1e-9).unwrap() - 2.0).abs() < 1e-8);
        assert_eq!(excitation_index(Regime::SmallLambda, Bc::Neumann, 0.5).unwrap(), 2.0);
        assert!(excitation_index(Regime::SmallLambda, Bc::Dirichlet, 0.5).is_err());
    }

    #[test]
    fn admissibility_classes() {
        let dom = Domain::unit_interval();
        let rough = InitialMeasure::density(DensityProfile::BoundaryPower { exponent: 1.5 });
        assert_eq!(admissibility(&dom, Bc::Dirichlet, Regularity::C1Alpha, &rough).unwrap(), Admissibility::Phi1Integrable);
        assert_eq!(admissibility(&dom, Bc::Neumann, Regularity::Lipschitz, &rough).unwrap(), Admissibility::Inadmissible);
        assert_eq!(admissibility(&dom, Bc::Dirichlet, Regularity::Lipschitz, &rough).unwrap(), Admissibility::Inadmissible);
        assert_eq!(admissibility(&dom, Bc::Neumann, Regularity::Lipschitz, &InitialMeasure::dirac(0.5)).unwrap(), Admissibility::FiniteMeasure);
        assert_eq!(admissibility(&dom, Bc::Neumann, Regularity::Lipschitz, &InitialMeasure::uniform(1.0)).unwrap(), Admissibility::BoundedDensity);
        let mild = InitialMeasure::density(DensityProfile::BoundaryPower { exponent: 0.5 });
        assert_eq!(admissibility(&dom, Bc::Dirichlet, Regularity::C1Alpha, &mild).unwrap(), Admissibility::FiniteMeasure);
    }
}
