//! Renewal series for the kernel `k̂(t) = (1 ∧ t)^{-ρ}`: the iterated
//! convolutions `ĥ_n`, their closed-form majorants `h*_n`, the two-sided
//! variant `h̃_n`, the resolvent sum `K̂_λ`, and a few identities used as
//! test oracles.

use crate::error::{invalid, Error, Result};
use crate::quadrature::{gauss_legendre, GaussRule};
use std::sync::OnceLock;
use statrs::function::gamma::{gamma, ln_gamma};

/// Hard cap on the number of series terms.
pub const SERIES_CAP: usize = 60;
/// Relative tail tolerance for `K̂_λ`.
pub const TAIL_TOL: f64 = 1e-8;

fn check_rho(rho: f64) -> Result<()> {
    if !(rho > 0.0 && rho < 1.0) {
        return invalid(format!("rho must lie in (0,1), got {rho}"));
    }
    Ok(())
}

/// `k̂(t) = (1 ∧ t)^{-ρ}`.
pub fn khat(rho: f64, t: f64) -> Result<f64> {
    check_rho(rho)?;
    if !(t > 0.0) {
        return invalid(format!("khat needs t > 0, got {t}"));
    }
    Ok(t.min(1.0).powf(-rho))
}

fn ln_binom(n: usize, k: usize) -> f64 {
    ln_gamma(n as f64 + 1.0) - ln_gamma(k as f64 + 1.0) - ln_gamma((n - k) as f64 + 1.0)
}

/// `h*_n(t) = Σ_k C(n,k) Γ(1-ρ)^k t^{n-kρ} / Γ(n-kρ+1)`, the n-fold
/// convolution of `1 + s^{-ρ}` with 1.
pub fn hstar_n_closed(rho: f64, n: usize, t: f64) -> Result<f64> {
    check_rho(rho)?;
    if n > SERIES_CAP {
        return Err(Error::Numerical(format!("h*_n evaluated only for n <= {SERIES_CAP}")));
    }
    if !(t > 0.0) {
        return invalid("t must be positive");
    }
    Ok(hstar_unchecked(rho, n, t))
}

fn hstar_unchecked(rho: f64, n: usize, t: f64) -> f64 {
    let lg = ln_gamma(1.0 - rho);
    let lt = t.ln();
    (0..=n)
        .map(|k| {
            let e = n as f64 - k as f64 * rho;
            (ln_binom(n, k) + k as f64 * lg + e * lt - ln_gamma(e + 1.0)).exp()
        })
        .sum()
}

/// `ĥ_n(t)` for `t <= 1`, where only the singular part of `k̂` is seen.
pub fn hhat_n_small(rho: f64, n: usize, t: f64) -> f64 {
    let e = n as f64 * (1.0 - rho);
    (n as f64 * ln_gamma(1.0 - rho) + e * t.ln() - ln_gamma(e + 1.0)).exp()
}

/// Nodes on `[0, t_max]`: graded toward 0 on `[0, 1]`, uniform beyond,
/// plus any requested points.
#[derive(Clone, Debug)]
pub struct ConvGrid {
    pub rho: f64,
    pub nodes: Vec<f64>,
    weights: OnceLock<Vec<Vec<f64>>>,
}

fn gauss8() -> &'static (Vec<f64>, Vec<f64>) {
    static RULE: OnceLock<(Vec<f64>, Vec<f64>)> = OnceLock::new();
    RULE.get_or_init(|| gauss_legendre(8))
}

impl ConvGrid {
    /// Spacing `(i/400)^4` near 0 until it reaches `1/200`, uniform after.
    pub fn new(rho: f64, t_max: f64, extra: &[f64]) -> Result<Self> {
        Self::with_resolution(rho, t_max, extra, 400, 200)
    }

    pub fn with_resolution(rho: f64, t_max: f64, extra: &[f64], graded: usize, per_unit: usize) -> Result<Self> {
        check_rho(rho)?;
        if !(t_max > 0.0 && t_max.is_finite()) {
            return invalid("grid end must be positive and finite");
        }
        let h_max = 1.0 / per_unit as f64;
        let mut nodes = vec![0.0];
        let mut i = 0usize;
        loop {
            let s = *nodes.last().unwrap();
            i += 1;
            let graded_next = (i as f64 / graded as f64).powi(4);
            let next = if graded_next - s < h_max { graded_next } else { s + h_max };
            if next >= t_max * (1.0 - 1e-12) {
                break;
            }
            nodes.push(next);
        }
        nodes.push(t_max);
        nodes.extend(extra.iter().filter(|&&e| e > 0.0 && e <= t_max));
        nodes.sort_by(|a, b| a.partial_cmp(b).unwrap());
        nodes.dedup_by(|a, b| (*a - *b).abs() <= 1e-12 * b.abs().max(1e-300));
        Ok(ConvGrid { rho, nodes, weights: OnceLock::new() })
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Index of the node equal to `t`.
    pub fn index_of(&self, t: f64) -> Option<usize> {
        self.nodes.iter().position(|&s| (s - t).abs() <= 1e-12 * t.max(1.0))
    }

    /// Product-integration weights of `∫_0^{s_m} k̂(s_m - s) f(s) ds` with `f`
    /// piecewise quadratic: each panel interpolates through its two nodes and
    /// the next node to the right (the left one on the last panel).
    fn weights(&self, m: usize) -> Vec<f64> {
        let t = self.nodes[m];
        let r = self.rho;
        let mut w = vec![0.0; m + 1];
        if m == 1 {
            // single panel from 0: linear interpolation, exact moments
            let p = |e: f64, x: f64| if x < 1.0 { x.powf(e) / e } else { 1.0 / e };
            let i0 = p(1.0 - r, t) + (t - 1.0).max(0.0);
            let i1 = p(2.0 - r, t) + 0.5 * (t * t - 1.0).max(0.0);
            w[1] += i0 - i1 / t;
            w[0] += i1 / t;
            return w;
        }
        let (gx, gw) = gauss8();
        for j in 0..m {
            let trio = if j + 2 <= m { [j, j + 1, j + 2] } else { [j - 1, j, j + 1] };
            let sn = [self.nodes[trio[0]], self.nodes[trio[1]], self.nodes[trio[2]]];
            let basis = |s: f64| {
                [
                    (s - sn[1]) * (s - sn[2]) / ((sn[0] - sn[1]) * (sn[0] - sn[2])),
                    (s - sn[0]) * (s - sn[2]) / ((sn[1] - sn[0]) * (sn[1] - sn[2])),
                    (s - sn[0]) * (s - sn[1]) / ((sn[2] - sn[0]) * (sn[2] - sn[1])),
                ]
            };
            let (a, b) = ((t - self.nodes[j + 1]).max(0.0), t - self.nodes[j]);
            let mut pieces = [(a, b.min(1.0), true), (a.max(1.0), b, false)];
            if a >= 1.0 {
                pieces[0].2 = false;
                pieces[0].1 = a;
            }
            for &(lo, hi, singular) in &pieces {
                if !(hi > lo) {
                    continue;
                }
                if singular && lo < hi - lo {
                    // u^{-ρ} near its singularity: exact power moments of the
                    // basis written as quadratics in u
                    let mom = |e: f64| (hi.powf(e) - lo.powf(e)) / e;
                    let (m0, m1, m2) = (mom(1.0 - r), mom(2.0 - r), mom(3.0 - r));
                    for (q, &i) in trio.iter().enumerate() {
                        let o: Vec<f64> = (0..3).filter(|&k| k != q).map(|k| t - sn[k]).collect();
                        let denom = (sn[q] - sn[(q + 1) % 3]) * (sn[q] - sn[(q + 2) % 3]);
                        w[i] += (o[0] * o[1] * m0 - (o[0] + o[1]) * m1 + m2) / denom;
                    }
                } else {
                    let (mid, half) = (0.5 * (lo + hi), 0.5 * (hi - lo));
                    for (x, wq) in gx.iter().zip(gw.iter()) {
                        let u = mid + half * x;
                        let k = if singular { u.powf(-r) } else { 1.0 };
                        let l = basis(t - u);
                        for q in 0..3 {
                            w[trio[q]] += half * wq * k * l[q];
                        }
                    }
                }
            }
        }
        w
    }

    /// Lower-triangular table of all weight rows, built once.
    fn table(&self) -> &Vec<Vec<f64>> {
        self.weights.get_or_init(|| (0..self.len()).map(|m| if m == 0 { vec![0.0] } else { self.weights(m) }).collect())
    }

    /// `(k̂ * f)` at every node.
    pub fn convolve(&self, f: &[f64]) -> Vec<f64> {
        self.table().iter().enumerate().map(|(m, w)| if m == 0 { 0.0 } else { w.iter().zip(f).map(|(a, v)| a * v).sum() }).collect()
    }

    /// Solves `H = b + λ² k̂ * H` on the nodes by implicit product
    /// integration and returns `ln H`. The stored history is rescaled
    /// whenever it grows past `1e200`, so rates far beyond the f64 range of
    /// `H` itself are representable.
    pub fn volterra_ln(&self, lambda2: f64, b: &[f64]) -> Vec<f64> {
        let mut h = vec![0.0; self.len()];
        let mut b: Vec<f64> = b.to_vec();
        let mut ln_scale = 0.0;
        let mut out = vec![0.0; self.len()];
        h[0] = b[0];
        out[0] = b[0].ln();
        for m in 1..self.len() {
            let w = &self.table()[m];
            let known: f64 = w[..m].iter().zip(&h[..m]).map(|(a, v)| a * v).sum();
            h[m] = (b[m] + lambda2 * known) / (1.0 - lambda2 * w[m]);
            out[m] = h[m].ln() + ln_scale;
            if h[m].abs() > 1e200 {
                let f = 1e-200;
                h[..=m].iter_mut().for_each(|v| *v *= f);
                b.iter_mut().for_each(|v| *v *= f);
                ln_scale -= f.ln();
            }
        }
        out
    }

    /// Linear scale version of [`ConvGrid::volterra_ln`].
    pub fn volterra(&self, lambda2: f64, b: &[f64]) -> Vec<f64> {
        self.volterra_ln(lambda2, b).into_iter().map(f64::exp).collect()
    }

    /// `ĥ_0 .. ĥ_n` at every node. Values on `[0, 1]` are replaced by the
    /// closed form before each convolution.
    pub fn hhat_table(&self, n: usize) -> Vec<Vec<f64>> {
        let mut out = vec![vec![1.0; self.len()]];
        for k in 1..=n {
            let mut next = self.convolve(&out[k - 1]);
            for (v, &s) in next.iter_mut().zip(&self.nodes) {
                if s <= 1.0 {
                    *v = if s == 0.0 { 0.0 } else { hhat_n_small(self.rho, k, s) };
                }
            }
            out.push(next);
        }
        out
    }
}

/// `ĥ_n(t) = (k̂^{*n} * 1)(t)`. Closed form for `t <= 1`; product
/// integration on a graded grid otherwise. `quad_tol` selects the grid
/// resolution.
pub fn hhat_n(rho: f64, n: usize, t: f64, quad_tol: f64) -> Result<f64> {
    check_rho(rho)?;
    if !(t > 0.0) {
        return invalid("t must be positive");
    }
    if n == 0 {
        return Ok(1.0);
    }
    if t <= 1.0 {
        return Ok(hhat_n_small(rho, n, t));
    }
    let per_unit = if quad_tol < 1e-6 { 800 } else { 200 };
    let g = ConvGrid::with_resolution(rho, t, &[], 400, per_unit)?;
    Ok(g.hhat_table(n)[n][g.len() - 1])
}

/// `∫_a^b f` for `f` with algebraic endpoint behaviour `(s-a)^{alpha_a}`
/// and `(b-s)^{alpha_b}`: the interval is split at its midpoint and each
/// half mapped by a power substitution that cancels the singular factor.
pub fn singular_integral<F: FnMut(f64) -> f64>(mut f: F, a: f64, b: f64, alpha_a: f64, alpha_b: f64, rule: &GaussRule) -> f64 {
    let mid = 0.5 * (a + b);
    let qa = substitution_power(alpha_a);
    let qb = substitution_power(alpha_b);
    let wa = mid - a;
    let left = rule.integrate(0.0, 1.0, 1, |v| {
        let s = a + wa * v.powf(qa);
        f(s) * wa * qa * v.powf(qa - 1.0)
    });
    let wb = b - mid;
    let right = rule.integrate(0.0, 1.0, 1, |v| {
        let s = b - wb * v.powf(qb);
        f(s) * wb * qb * v.powf(qb - 1.0)
    });
    left + right
}

/// `1/(1+α)` cancels a singular power; a positive non-integer power is
/// smoothed by `s = v²`.
fn substitution_power(alpha: f64) -> f64 {
    if alpha < 0.0 {
        1.0 / (1.0 + alpha)
    } else if alpha.fract() != 0.0 {
        2.0
    } else {
        1.0
    }
}

/// Two-sided kernel `(1 ∧ (t-s)s/t)^{-ρ}`.
fn tilde_kernel(rho: f64, t: f64, s: f64) -> f64 {
    ((t - s) * s / t).min(1.0).powf(-rho)
}

/// Maximum order accepted by [`htilde_n`].
pub const HTILDE_MAX: usize = 4;

/// `h̃_n(t)` via the recursion `h̃_{n+1}(t) = ∫_0^t (1 ∧ (t-s)s/t)^{-ρ} h̃_n(s) ds`
/// with nested Gauss rules, endpoint substitutions and splits at the kinks
/// `(t-s)s/t = 1`.
pub fn htilde_n(rho: f64, n: usize, t: f64, quad_tol: f64) -> Result<f64> {
    check_rho(rho)?;
    if !(t > 0.0) {
        return invalid("t must be positive");
    }
    if n > HTILDE_MAX {
        return invalid(format!("htilde_n supports n <= {HTILDE_MAX}"));
    }
    let nodes = if quad_tol < 1e-8 { 40 } else { 24 };
    let rule = GaussRule::new(nodes);
    Ok(htilde_rec(rho, n, t, &rule))
}

fn htilde_rec(rho: f64, n: usize, t: f64, rule: &GaussRule) -> f64 {
    if n == 0 {
        return 1.0;
    }
    if n == 1 && t <= 4.0 {
        // no kink: t^{1-ρ} B(1-ρ, 1-ρ)
        let b = gamma(1.0 - rho).powi(2) / gamma(2.0 - 2.0 * rho);
        return t.powf(1.0 - rho) * b;
    }
    let g = |s: f64| tilde_kernel(rho, t, s) * htilde_rec(rho, n - 1, s, rule);
    let lead = (n - 1) as f64 * (1.0 - rho);
    if t <= 4.0 {
        return singular_integral(g, 0.0, t, lead - rho, -rho, rule);
    }
    let disc = (t * t - 4.0 * t).sqrt();
    let (k1, k2) = (0.5 * (t - disc), 0.5 * (t + disc));
    let mut acc = singular_integral(g, 0.0, k1, lead - rho, 0.0, rule);
    acc += singular_integral(|s| htilde_rec(rho, n - 1, s, rule), k1, k2, 0.0, 0.0, rule);
    acc += singular_integral(g, k2, t, 0.0, -rho, rule);
    acc
}

/// Truncated series with its tail estimate.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SeriesValue {
    pub value: f64,
    pub tail: f64,
    pub terms: usize,
}

/// Upper estimate of `Σ_{n > n0} x^n h*_n(t)`: explicit terms up to the cap,
/// then a geometric continuation with the last term ratio.
fn hstar_tail(rho: f64, lambda2: f64, t: f64, n0: usize) -> f64 {
    let term = |n: usize| (n as f64 * lambda2.ln() + hstar_unchecked(rho, n, t).ln()).exp();
    let mut tail = 0.0;
    for n in n0 + 1..=SERIES_CAP {
        tail += term(n);
    }
    let r = term(SERIES_CAP) / term(SERIES_CAP - 1);
    if r >= 1.0 {
        return f64::INFINITY;
    }
    tail + term(SERIES_CAP) * r / (1.0 - r)
}

/// Upper estimate of `Σ_{n > n0} λ^{2n} ĥ_n(t)` through `ĥ_n <= h*_n`;
/// infinite when the geometric continuation does not converge.
pub fn series_tail(rho: f64, lambda: f64, t: f64, n0: usize) -> Result<f64> {
    check_rho(rho)?;
    if !(t > 0.0 && lambda >= 0.0) {
        return invalid("tail needs t > 0 and lambda >= 0");
    }
    if lambda == 0.0 {
        return Ok(0.0);
    }
    if n0 >= SERIES_CAP {
        return Err(Error::Unsupported(format!("tail estimate limited to n0 < {SERIES_CAP}")));
    }
    Ok(hstar_tail(rho, lambda * lambda, t, n0))
}

/// Parameters of `K̂_λ`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RenewalParams {
    pub rho: f64,
    pub lambda: f64,
    /// Starting truncation; raised until the tail passes `quad_tol` or the cap.
    pub n: usize,
    pub quad_tol: f64,
}

impl RenewalParams {
    pub fn new(rho: f64, lambda: f64) -> Self {
        RenewalParams { rho, lambda, n: 1, quad_tol: TAIL_TOL }
    }
}

/// `K̂_λ(t) = Σ λ^{2n} ĥ_n(t)`, with the tail bounded through `ĥ_n <= h*_n`.
/// Fails with `NonConvergent` when the relative tail exceeds `quad_tol` at
/// the cap.
pub fn khat_lambda(p: &RenewalParams, t: f64) -> Result<SeriesValue> {
    check_rho(p.rho)?;
    if !(t > 0.0 && p.lambda >= 0.0) {
        return invalid("K̂ needs t > 0 and lambda >= 0");
    }
    if p.lambda == 0.0 {
        return Ok(SeriesValue { value: 1.0, tail: 0.0, terms: 1 });
    }
    let l2 = p.lambda * p.lambda;
    let grid = ConvGrid::new(p.rho, t, &[])?;
    let table = grid.hhat_table(SERIES_CAP);
    let last = grid.len() - 1;
    let mut sum = 0.0;
    for n in 0..=SERIES_CAP {
        sum += l2.powi(n as i32) * table[n][last];
        if n + 1 >= p.n.max(1) {
            let tail = hstar_tail(p.rho, l2, t, n);
            if tail <= p.quad_tol * sum {
                return Ok(SeriesValue { value: sum, tail, terms: n + 1 });
            }
        }
    }
    Err(Error::NonConvergent(format!(
        "K̂_λ tail above {} at the {SERIES_CAP}-term cap (lambda={}, t={t})",
        p.quad_tol, p.lambda
    )))
}

/// `K̂_λ` on every node of `grid` from the resolvent equation
/// `K = 1 + λ² k̂ * K`, which sums the whole series at once.
pub fn khat_lambda_resolvent(grid: &ConvGrid, lambda: f64) -> Vec<f64> {
    grid.volterra(lambda * lambda, &vec![1.0; grid.len()])
}

/// `ln K̂_λ` on every node; stays finite where `K̂_λ` overflows.
pub fn ln_khat_lambda_resolvent(grid: &ConvGrid, lambda: f64) -> Vec<f64> {
    grid.volterra_ln(lambda * lambda, &vec![1.0; grid.len()])
}

/// `Γ(n + Σ r_i + 1)^{-1} Π Γ(1 + r_i) t^{n + Σ r_i}` for exponents
/// `r_0..r_n`, the value of the nested simplex integral
/// `∫_{0<s_n<..<s_1<t} Π_j (s_{j-1}-s_j)^{r_{j-1}} s_n^{r_n}`.
pub fn beta_integral_closed(r: &[f64], t: f64) -> Result<f64> {
    if r.is_empty() {
        return invalid("need at least one exponent");
    }
    if r.iter().any(|&x| !(x > -1.0)) {
        return invalid("Beta identity needs every exponent > -1");
    }
    if !(t > 0.0) {
        return invalid("t must be positive");
    }
    let n = (r.len() - 1) as f64;
    let sr: f64 = r.iter().sum();
    let ln = r.iter().map(|&x| ln_gamma(1.0 + x)).sum::<f64>() - ln_gamma(n + sr + 1.0) + (n + sr) * t.ln();
    Ok(ln.exp())
}

/// `|LHS - RHS|` of the Gaussian product identity
/// `e^{-C|v|²/(t-s)} e^{-C|v-w|²/s} = e^{-C|w|²/t} e^{-C|v-(t-s)w/t|²/((t-s)s/t)}`.
pub fn exp_identity_residual(c: f64, t: f64, s: f64, v: &[f64], w: &[f64]) -> Result<f64> {
    if !(0.0 < s && s < t) {
        return invalid("identity needs 0 < s < t");
    }
    if v.len() != w.len() {
        return Err(Error::Dimension { expected: v.len(), got: w.len() });
    }
    let n2 = |x: &mut dyn Iterator<Item = f64>| x.map(|a| a * a).sum::<f64>();
    let v2 = n2(&mut v.iter().copied());
    let vw = n2(&mut v.iter().zip(w).map(|(a, b)| a - b));
    let w2 = n2(&mut w.iter().copied());
    let shift = n2(&mut v.iter().zip(w).map(|(a, b)| a - (t - s) / t * b));
    let lhs = (-c * v2 / (t - s) - c * vw / s).exp();
    let rhs = (-c * w2 / t - c * shift / ((t - s) * s / t)).exp();
    Ok((lhs - rhs).abs())
}

/// `Σ x^n / (n!)^a`, summed until terms stop contributing.
pub fn mittag_sum(x: f64, a: f64) -> Result<f64> {
    if !(x >= 0.0 && a > 0.0) {
        return invalid("mittag_sum needs x >= 0 and a > 0");
    }
    if x == 0.0 {
        return Ok(1.0);
    }
    let mut sum = 1.0;
    let mut past_peak = false;
    for n in 1..100_000 {
        let ln_t = n as f64 * x.ln() - a * ln_gamma(n as f64 + 1.0);
        let term = ln_t.exp();
        if !term.is_finite() {
            return Err(Error::Numerical(format!("mittag_sum overflow at x={x}, a={a}")));
        }
        sum += term;
        let ratio = x / (n as f64 + 1.0).powf(a);
        past_peak |= ratio < 1.0;
        if past_peak && term < 1e-17 * sum {
            return Ok(sum);
        }
    }
    Err(Error::NonConvergent("mittag_sum did not converge".into()))
}

/// `b(t) + Σ_{n<=N} λ^{2n} (k̂^{*n} * b)(t)` with `b` sampled on `grid`;
/// the tail is the last included term times `r/(1-r)` for the observed
/// term ratio `r`, infinite while terms still grow.
pub fn gronwall_series(grid: &ConvGrid, b: &[f64], lambda: f64, n: usize, t: f64) -> Result<SeriesValue> {
    let m = grid.index_of(t).ok_or_else(|| Error::Validation(format!("t={t} is not a grid node")))?;
    if b.len() != grid.len() {
        return Err(Error::Dimension { expected: grid.len(), got: b.len() });
    }
    let l2 = lambda * lambda;
    let mut cur = b.to_vec();
    let mut sum = cur[m];
    let mut prev = cur[m].abs();
    let mut last = cur[m].abs();
    for _ in 1..=n {
        cur = grid.convolve(&cur);
        cur.iter_mut().for_each(|v| *v *= l2);
        prev = last;
        last = cur[m].abs();
        sum += cur[m];
    }
    let tail = if last == 0.0 {
        0.0
    } else {
        let r = last / prev;
        if r < 1.0 {
            last * r / (1.0 - r)
        } else if n >= SERIES_CAP {
            return Err(Error::NonConvergent(format!("Gronwall series still growing at the {SERIES_CAP}-term cap")));
        } else {
            f64::INFINITY
        }
    };
    Ok(SeriesValue { value: sum, tail, terms: n + 1 })
}
