//! The `▷` product of four-point kernels and the series
//! `E[u(t,x)u(t,x')] = J̃ + Σ λ^{2n} (G̃^{▷n} ▷ J̃)(t, x, x')` for `σ(u) = u`.
//!
//! Space is discretized by the eigenbasis on a cell grid: a function of
//! `(y, y')` is a coefficient matrix `a` with values `S a Sᵀ` at the cell
//! centers, and the pairing with `f(y - y')` uses cell-averaged Riesz weights
//! (the same weights as the simulated noise). Time convolutions against
//! `e^{-(μ_k + μ_l)(t - s)}` are integrated exactly for piecewise-linear
//! integrands on a graded grid `s_i = t (i/N)³`.

use crate::error::{invalid, Error, Result};
use crate::geometry::Domain;
use crate::grid::Grid;
use crate::measure::InitialMeasure;
use crate::noise::build_covariance;
use crate::quadrature::GaussRule;
use crate::simulate::eigen::EigenBasis;
use crate::simulate::modal_coefficients;
use crate::spectral::Bc;
use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CorrSeriesConfig {
    /// Number of `▷` iterations.
    pub n_max: usize,
    /// Cells (and modes) per side.
    pub n_space: usize,
    /// Time panels of the graded grid.
    pub n_time: usize,
    /// Largest accepted tail estimate relative to the value.
    pub tail_tol: f64,
    /// Also evaluate the resolvent form `a⁻² ∬ K^a ν ν`.
    #[serde(default)]
    pub backward: bool,
}

impl Default for CorrSeriesConfig {
    fn default() -> Self {
        CorrSeriesConfig { n_max: 3, n_space: 128, n_time: 96, tail_tol: 0.05, backward: false }
    }
}

/// Series values at a list of point pairs.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CorrSeries {
    pub t: f64,
    pub lambda: f64,
    pub pairs: Vec<(Vec<f64>, Vec<f64>)>,
    /// Truncated sums.
    pub values: Vec<f64>,
    /// `λ^{2n}`-weighted terms, `n = 0..=n_max` (term 0 is `J̃`).
    pub terms: Vec<Vec<f64>>,
    /// Geometric tail estimates.
    pub tails: Vec<f64>,
    /// Truncated sums of the resolvent form, when requested.
    pub backward: Option<Vec<f64>>,
}

/// Tensor eigenbasis with cell-averaged correlation weights.
struct ModalSpace {
    d: usize,
    basis: EigenBasis,
    grid: Grid,
    s: DMatrix<f64>,
    mu: DVector<f64>,
    /// `vol² · C` on cell pairs.
    w: DMatrix<f64>,
}

impl ModalSpace {
    fn new(domain: &Domain, bc: Bc, beta: f64, n: usize) -> Result<Self> {
        let l = match domain {
            Domain::Interval { l } => *l,
            Domain::Box { d: 2, l } => *l,
            _ => return Err(Error::Unsupported("the correlation series needs an Interval or a 2-d Box".into())),
        };
        let grid = Grid::new(domain, n)?;
        let basis = EigenBasis::new(bc, l, n);
        let mu1 = DVector::from_vec(basis.mu.clone());
        let (s, mu) = if grid.d == 1 {
            (basis.synthesis.clone(), mu1)
        } else {
            (basis.synthesis.kronecker(&basis.synthesis), DVector::from_fn(n * n, |i, _| mu1[i / n] + mu1[i % n]))
        };
        let w = build_covariance(&grid, beta)? * grid.cell_volume().powi(2);
        Ok(ModalSpace { d: grid.d, basis, grid, s, mu, w })
    }

    fn modes_at(&self, x: &[f64]) -> DVector<f64> {
        if self.d == 1 {
            self.basis.modes_at(x[0])
        } else {
            self.basis.modes_at(x[0]).kronecker(&self.basis.modes_at(x[1]))
        }
    }

    /// Coefficients of `f(y - y') T(y, y')` for `T` with coefficients `a`.
    fn hadamard(&self, a: &DMatrix<f64>) -> DMatrix<f64> {
        let vals = &self.s * a * self.s.transpose();
        self.s.tr_mul(&vals.component_mul(&self.w)) * &self.s
    }
}

/// `∫_0^Δ e^{-μu} du` and `∫_0^Δ e^{-μu} u/Δ du`.
fn panel_weights(mu: f64, delta: f64) -> (f64, f64) {
    let x = mu * delta;
    if x < 1e-3 {
        let w0 = 1.0 - x / 2.0 + x * x / 6.0 - x * x * x / 24.0;
        let w1 = 0.5 - x / 3.0 + x * x / 8.0 - x * x * x / 30.0;
        (delta * w0, delta * w1)
    } else {
        let e = (-x).exp();
        (delta * -(-x).exp_m1() / x, delta * (-(-x).exp_m1() - x * e) / (x * x))
    }
}

/// `T_n(t)` for `n = 0..=n_max`, from `T_0(s) = e^{-μ s} ∘ a0` and
/// `T_n(t) = ∫_0^t e^{-μ(t-s)} ∘ H(T_{n-1}(s)) ds`.
fn iterate(space: &ModalSpace, a0: &DMatrix<f64>, t: f64, cfg: &CorrSeriesConfig) -> Vec<DMatrix<f64>> {
    let nt = cfg.n_time;
    let k = space.mu.len();
    let s: Vec<f64> = (0..=nt).map(|i| t * (i as f64 / nt as f64).powi(3)).collect();
    let decay = |tau: f64| space.mu.map(|m| (-m * tau).exp());
    let scale = |a: &DMatrix<f64>, e: &DVector<f64>| DMatrix::from_fn(k, k, |i, j| e[i] * a[(i, j)] * e[j]);
    let mut level: Vec<DMatrix<f64>> = s.iter().map(|&si| scale(a0, &decay(si))).collect();
    let mut out = vec![level[nt].clone()];
    for n in 1..=cfg.n_max {
        let h: Vec<DMatrix<f64>> = crate::parallel::install(|| level.par_iter().map(|a| space.hadamard(a)).collect());
        let g: Vec<DMatrix<f64>> = (0..nt)
            .map(|j| {
                let delta = s[j + 1] - s[j];
                DMatrix::from_fn(k, k, |p, q| {
                    let (w0, w1) = panel_weights(space.mu[p] + space.mu[q], delta);
                    w1 * h[j][(p, q)] + (w0 - w1) * h[j + 1][(p, q)]
                })
            })
            .collect();
        let targets: Vec<usize> = if n < cfg.n_max { (0..=nt).collect() } else { vec![nt] };
        let eval = |i: usize| {
            let mut acc = DMatrix::zeros(k, k);
            for (j, gj) in g.iter().enumerate().take(i) {
                let e = decay(s[i] - s[j + 1]);
                for q in 0..k {
                    for p in 0..k {
                        acc[(p, q)] += e[p] * e[q] * gj[(p, q)];
                    }
                }
            }
            acc
        };
        let next: Vec<DMatrix<f64>> = crate::parallel::install(|| targets.par_iter().map(|&i| eval(i)).collect());
        out.push(next.last().unwrap().clone());
        level = next;
    }
    out
}

fn tail_of(terms: &[f64]) -> f64 {
    let n = terms.len();
    if n < 2 {
        return f64::INFINITY;
    }
    let last = terms[n - 1];
    let prev = terms[n - 2];
    if last == 0.0 {
        return 0.0;
    }
    let r = (last / prev).abs();
    if r < 1.0 {
        last.abs() * r / (1.0 - r)
    } else {
        f64::INFINITY
    }
}

/// Two-point correlation of the Anderson model at time `t` for each pair
/// `(x, x')`, truncated after `n_max` iterations with a geometric tail.
#[allow(clippy::too_many_arguments)]
pub fn corr_series(
    domain: &Domain,
    bc: Bc,
    beta: f64,
    nu: &InitialMeasure,
    lambda: f64,
    t: f64,
    pairs: &[(Vec<f64>, Vec<f64>)],
    cfg: &CorrSeriesConfig,
) -> Result<CorrSeries> {
    if cfg.n_max < 1 || cfg.n_time < 2 {
        return invalid("need n_max >= 1 and n_time >= 2");
    }
    if !(t > 0.0) || !(lambda >= 0.0) {
        return invalid("need t > 0 and lambda >= 0");
    }
    crate::noise::CorrelationFn::new(beta, domain.dim())?;
    for (x, y) in pairs {
        if !domain.contains(x)? || !domain.contains(y)? {
            return invalid(format!("pair ({x:?}, {y:?}) is not inside the domain"));
        }
    }
    let space = ModalSpace::new(domain, bc, beta, cfg.n_space)?;
    let nu_hat = modal_coefficients(nu, &space.grid, &space.basis)?;
    let weights: Vec<f64> = (0..=cfg.n_max).map(|n| lambda.powi(2 * n as i32)).collect();
    let forward = iterate(&space, &(&nu_hat * nu_hat.transpose()), t, cfg);
    let mut values = Vec::new();
    let mut terms = Vec::new();
    let mut tails = Vec::new();
    for (x, y) in pairs {
        let (vx, vy) = (space.modes_at(x), space.modes_at(y));
        let tn: Vec<f64> = forward.iter().zip(&weights).map(|(a, w)| w * (vx.transpose() * a * &vy)[0]).collect();
        let value: f64 = tn.iter().sum();
        let tail = if lambda == 0.0 { 0.0 } else { tail_of(&tn[1..]) };
        if tail > cfg.tail_tol * value.abs() {
            return Err(Error::NonConvergent(format!("series tail {tail:e} exceeds {} x {value:e} at n_max = {}", cfg.tail_tol, cfg.n_max)));
        }
        values.push(value);
        terms.push(tn);
        tails.push(tail);
    }
    let backward = if cfg.backward {
        let mut out = Vec::new();
        for (x, y) in pairs {
            let a0 = space.modes_at(x) * space.modes_at(y).transpose();
            let levels = iterate(&space, &a0, t, cfg);
            out.push(levels.iter().zip(&weights).map(|(a, w)| w * (nu_hat.transpose() * a * &nu_hat)[0]).sum());
        }
        Some(out)
    } else {
        None
    };
    Ok(CorrSeries { t, lambda, pairs: pairs.to_vec(), values, terms, tails, backward })
}

/// Terms `G̃^{▷n}(t, x, x', y, y')`, `n = 1..=n_max + 1`, at each target
/// `(y, y')`.
#[allow(clippy::too_many_arguments)]
pub fn resolvent_terms(
    domain: &Domain,
    bc: Bc,
    beta: f64,
    t: f64,
    x: &[f64],
    x2: &[f64],
    targets: &[(Vec<f64>, Vec<f64>)],
    cfg: &CorrSeriesConfig,
) -> Result<Vec<Vec<f64>>> {
    if !(t > 0.0) {
        return invalid("t must be positive");
    }
    crate::noise::CorrelationFn::new(beta, domain.dim())?;
    for p in [x, x2].into_iter().chain(targets.iter().flat_map(|(a, b)| [a.as_slice(), b.as_slice()])) {
        if !domain.contains(p)? {
            return invalid(format!("point {p:?} is not inside the domain"));
        }
    }
    let space = ModalSpace::new(domain, bc, beta, cfg.n_space)?;
    let a0 = space.modes_at(x) * space.modes_at(x2).transpose();
    let levels = iterate(&space, &a0, t, cfg);
    Ok(targets
        .iter()
        .map(|(y, y2)| {
            let (vy, vy2) = (space.modes_at(y), space.modes_at(y2));
            levels.iter().map(|a| (vy.transpose() * a * &vy2)[0]).collect()
        })
        .collect())
}

/// Sums `Σ_n λ^{2n} G̃^{▷n}` of [`resolvent_terms`] with the geometric
/// tail check of [`corr_series`].
pub fn resolvent_sum(terms: &[f64], lambda: f64, tail_tol: f64) -> Result<f64> {
    let tn: Vec<f64> = terms.iter().enumerate().map(|(n, v)| lambda.powi(2 * n as i32 + 2) * v).collect();
    let value: f64 = tn.iter().sum();
    let tail = tail_of(&tn);
    if tail > tail_tol * value.abs() {
        return Err(Error::NonConvergent(format!("resolvent tail {tail:e} exceeds {tail_tol} x {value:e}")));
    }
    Ok(value)
}

/// `𝒦^λ(t, x, x', y, y') = Σ_{n≥1} λ^{2n} G̃^{▷n}(t, x, x', y, y')` at each
/// target `(y, y')`, truncated after `n_max + 1` terms.
#[allow(clippy::too_many_arguments)]
pub fn resolvent_series(
    domain: &Domain,
    bc: Bc,
    beta: f64,
    lambda: f64,
    t: f64,
    x: &[f64],
    x2: &[f64],
    targets: &[(Vec<f64>, Vec<f64>)],
    cfg: &CorrSeriesConfig,
) -> Result<Vec<f64>> {
    if !(lambda > 0.0) {
        return invalid("lambda must be positive");
    }
    resolvent_terms(domain, bc, beta, t, x, x2, targets, cfg)?
        .iter()
        .map(|tn| resolvent_sum(tn, lambda, cfg.tail_tol))
        .collect()
}

/// Composite Gauss rule on `[0, t]` split at `t/2`, with the substitution
/// `s = (t/2) v²` toward each end.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TimeRule {
    pub panels: usize,
    pub order: usize,
}

impl Default for TimeRule {
    fn default() -> Self {
        TimeRule { panels: 4, order: 12 }
    }
}

impl TimeRule {
    pub fn nodes(&self, t: f64) -> (Vec<f64>, Vec<f64>) {
        let (v, w) = GaussRule::new(self.order).nodes(0.0, 1.0, self.panels);
        let half = 0.5 * t;
        let mut s = Vec::with_capacity(2 * v.len());
        let mut ws = Vec::with_capacity(2 * v.len());
        for (vi, wi) in v.iter().zip(&w) {
            let jac = half * 2.0 * vi * wi;
            s.push(half * vi * vi);
            ws.push(jac);
            s.push(t - half * vi * vi);
            ws.push(jac);
        }
        (s, ws)
    }
}

/// Four-point kernels on the cell centers of an interval, as `n² × n²`
/// matrices indexed by `((x, x'), (y, y'))` with row-major pairs.
#[derive(Clone, Debug)]
pub struct TupleSpace {
    pub n: usize,
    pub basis: EigenBasis,
    /// `h² C_{zz'}` flattened row-major.
    pub weight: DVector<f64>,
}

impl TupleSpace {
    pub fn new(l: f64, bc: Bc, beta: f64, n: usize) -> Result<Self> {
        let grid = Grid::new(&Domain::interval(l), n)?;
        let c = build_covariance(&grid, beta)? * (grid.h * grid.h);
        let weight = DVector::from_fn(n * n, |i, _| c[(i / n, i % n)]);
        Ok(TupleSpace { n, basis: EigenBasis::new(bc, l, n), weight })
    }

    /// Truncated heat kernel `G(t, x_i, x_j)`.
    pub fn heat(&self, t: f64) -> DMatrix<f64> {
        let mut s = self.basis.synthesis.clone();
        for (j, m) in self.basis.mu.iter().enumerate() {
            s.column_mut(j).scale_mut((-m * t).exp());
        }
        s * self.basis.synthesis.transpose()
    }

    /// `G̃(t, x, x', y, y') = G(t, x, y) G(t, x', y')`.
    pub fn g_tilde(&self, t: f64) -> DMatrix<f64> {
        let g = self.heat(t);
        g.kronecker(&g)
    }
}

/// `(k1 ▷ k2)(t) = ∫_0^t k1(t - s) diag(h² C) k2(s) ds`.
pub fn triangle_op<K1, K2>(k1: &K1, k2: &K2, space: &TupleSpace, t: f64, rule: &TimeRule) -> DMatrix<f64>
where
    K1: Fn(f64) -> DMatrix<f64> + Sync,
    K2: Fn(f64) -> DMatrix<f64> + Sync,
{
    let m = space.n * space.n;
    if t <= 0.0 {
        return DMatrix::zeros(m, m);
    }
    let (s, w) = rule.nodes(t);
    let parts: Vec<DMatrix<f64>> = s
        .iter()
        .zip(&w)
        .map(|(&si, &wi)| {
            let mut right = k2(si);
            for (mut row, &c) in right.row_iter_mut().zip(space.weight.iter()) {
                row *= c * wi;
            }
            k1(t - si) * right
        })
        .collect();
    parts.into_iter().fold(DMatrix::zeros(m, m), |acc, p| acc + p)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn panel_weights_match_quadrature() {
        for (mu, d) in [(0.0, 0.3), (1e-4, 0.1), (50.0, 0.02), (1e4, 1e-3), (0.02, 0.04)] {
            let (w0, w1) = panel_weights(mu, d);
            let rule = GaussRule::new(20);
            let q0 = rule.integrate(0.0, d, 40, |u| (-mu * u).exp());
            let q1 = rule.integrate(0.0, d, 40, |u| (-mu * u).exp() * u / d);
            assert!((w0 - q0).abs() < 1e-13 * (1.0 + q0));
            assert!((w1 - q1).abs() < 1e-13 * (1.0 + q1));
        }
    }

    #[test]
    fn zero_kernel_and_zero_time() {
        let sp = TupleSpace::new(1.0, Bc::Dirichlet, 0.5, 4).unwrap();
        let z = |_: f64| DMatrix::zeros(16, 16);
        let g = |t: f64| sp.g_tilde(t);
        assert_eq!(triangle_op(&g, &z, &sp, 0.1, &TimeRule::default()).amax(), 0.0);
        assert_eq!(triangle_op(&g, &g, &sp, 0.0, &TimeRule::default()).amax(), 0.0);
    }

    #[test]
    fn zero_lambda_is_product_of_heat_flows() {
        let nu = InitialMeasure::dirac(0.5);
        let cfg = CorrSeriesConfig { n_space: 32, n_time: 16, n_max: 1, ..Default::default() };
        let pairs = vec![(vec![0.4], vec![0.6])];
        let r = corr_series(&Domain::unit_interval(), Bc::Dirichlet, 0.5, &nu, 0.0, 0.1, &pairs, &cfg).unwrap();
        let j = |x: f64| {
            (1..=32).map(|k| 2.0 * (k as f64 * std::f64::consts::PI * 0.5).sin() * (k as f64 * std::f64::consts::PI * x).sin() * (-(k as f64 * std::f64::consts::PI).powi(2) * 0.1).exp()).sum::<f64>()
        };
        assert!((r.values[0] - j(0.4) * j(0.6)).abs() < 1e-12);
    }
}
