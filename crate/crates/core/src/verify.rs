//! Self-checks run by `spde verify` and the acceptance tests.
//!
//! Each check returns a [`Check`] instead of panicking, so a failure is
//! reported alongside the others. The fast suite holds the cheap identity,
//! spectral and determinism checks; the full suite adds the renewal series,
//! kernel rates and the Monte-Carlo comparisons.

use crate::bounds::{data_functional, BoundConstants, BoundContext, BoundKind, Regularity};
use crate::error::{Error, Result};
use crate::estimate::{
    corr_estimate, corr_series, excitation_fit_ln, ko_quadrature, log_slope, lyapunov_fit_ensemble, mean_se, moment_estimate, CorrSeriesConfig,
    KoConfig, Observable, Regime,
};
use crate::geometry::Domain;
use crate::heatkernel::{fit_interval_envelope, homogeneous_solution, HeatKernel, Side};
use crate::measure::InitialMeasure;
use crate::quadrature::{adaptive, GaussRule};
use crate::renewal::{beta_integral_closed, exp_identity_residual, hhat_n, hstar_n_closed, htilde_n, singular_integral};
use crate::simulate::{run_ensemble, second_moments, Scheme, SimConfig};
use crate::spectral::{annulus_z, annulus_z_prime, bessel_j, cross_product_zero, first_bessel_zero, leading_eigenpair, Bc};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::f64::consts::PI;
use std::fmt;
use std::path::{Path, PathBuf};
use std::time::Instant;

#[derive(Clone, Debug)]
pub struct Check {
    pub id: u32,
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
    pub seconds: f64,
}

impl fmt::Display for Check {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let tag = if self.passed { "PASS" } else { "FAIL" };
        write!(f, "{tag} {:>2} {}: {} ({:.1} s)", self.id, self.name, self.detail, self.seconds)
    }
}

/// Runs `body`, which returns `(passed, detail)`; an error fails the check.
fn check(id: u32, name: &'static str, body: impl FnOnce() -> Result<(bool, String)>) -> Check {
    let start = Instant::now();
    let (passed, detail) = match body() {
        Ok(r) => r,
        Err(e) => (false, format!("error: {e}")),
    };
    Check { id, name, passed, detail, seconds: start.elapsed().as_secs_f64() }
}

/// Nested quadrature of the simplex integral behind the Beta identity, one
/// variable at a time from the innermost.
fn beta_nested(r: &[f64], t: f64, rule: &GaussRule) -> f64 {
    fn level(r: &[f64], j: usize, s: f64, rule: &GaussRule) -> f64 {
        let n = r.len() - 1;
        if j == n {
            return s.powf(r[n]);
        }
        let inner_power = (n - j - 1) as f64 + r[j + 1..].iter().sum::<f64>();
        singular_integral(|u| (s - u).powf(r[j]) * level(r, j + 1, u, rule), 0.0, s, inner_power, r[j], rule)
    }
    level(r, 0, t, rule)
}

/// Gaussian product identity, Beta identity, Chapman–Kolmogorov and
/// Neumann mass conservation.
pub fn criterion_1() -> Check {
    check(1, "identity suite", || {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let mut worst_exp = 0.0f64;
        for _ in 0..1000 {
            let d = rng.random_range(1..=3);
            let c = rng.random_range(0.1..2.0);
            let t = rng.random_range(0.1..5.0);
            let s = t * rng.random_range(0.01..0.99);
            let v: Vec<f64> = (0..d).map(|_| rng.random_range(-1.0..1.0)).collect();
            let w: Vec<f64> = (0..d).map(|_| rng.random_range(-1.0..1.0)).collect();
            worst_exp = worst_exp.max(exp_identity_residual(c, t, s, &v, &w)?);
        }
        let rule = GaussRule::new(30);
        let mut worst_beta = 0.0f64;
        for n in 0..=3 {
            for _ in 0..4 {
                let r: Vec<f64> = (0..=n).map(|_| rng.random_range(-0.5..1.0)).collect();
                let t = rng.random_range(0.5..2.0);
                let closed = beta_integral_closed(&r, t)?;
                worst_beta = worst_beta.max((beta_nested(&r, t, &rule) - closed).abs() / closed);
            }
        }
        let mut worst_ck = 0.0f64;
        let mut worst_mass = 0.0f64;
        for bc in [Bc::Dirichlet, Bc::Neumann] {
            let hk = HeatKernel::new(&Domain::unit_interval(), bc)?;
            for _ in 0..5 {
                let (t, s) = (rng.random_range(0.01..0.5), rng.random_range(0.01..0.5));
                let (x, y) = (rng.random_range(0.0..1.0), rng.random_range(0.0..1.0));
                let lhs = hk.eval_1d(t + s, x, y);
                let rhs = adaptive(|z| hk.eval_1d(t, x, z) * hk.eval_1d(s, z, y), 0.0, 1.0, 1e-13, 1e-13, 4000)?.value;
                worst_ck = worst_ck.max((lhs - rhs).abs());
                if bc == Bc::Neumann {
                    let m = adaptive(|z| hk.eval_1d(t, x, z), 0.0, 1.0, 1e-13, 1e-13, 4000)?.value;
                    worst_mass = worst_mass.max((m - 1.0).abs());
                }
            }
        }
        let ok = worst_exp < 1e-12 && worst_beta < 1e-6 && worst_ck < 1e-8 && worst_mass < 1e-8;
        Ok((ok, format!("exp {worst_exp:.1e}, beta rel {worst_beta:.1e}, CK {worst_ck:.1e}, mass {worst_mass:.1e}")))
    })
}

/// Sandwiches of `ĥ_n` and `h̃_n` and monotonicity of `ĥ_n` in `t`.
pub fn criterion_2() -> Check {
    check(2, "series suite", || {
        let tol = 1e-4;
        let times = [0.1, 1.0, 5.0];
        let mut bad = Vec::new();
        for rho in [0.25, 0.5, 0.75] {
            for n in 0..=6 {
                let mut prev = 0.0;
                for &t in &times {
                    let h = hhat_n(rho, n, t, tol)?;
                    let hs = hstar_n_closed(rho, n, t)?;
                    let lo = 0.5f64.powi(n as i32) * hs;
                    if h < lo * (1.0 - tol) || h > hs * (1.0 + tol) {
                        bad.push(format!("hhat rho={rho} n={n} t={t}"));
                    }
                    if h < prev * (1.0 - tol) {
                        bad.push(format!("monotone rho={rho} n={n} t={t}"));
                    }
                    prev = h;
                    if n <= 3 {
                        let ht = htilde_n(rho, n, t, tol)?;
                        let (a, b) = (0.5f64.powi(n as i32) * h, 2f64.powf((1.0 + rho) * n as f64) * h);
                        if ht < a * (1.0 - tol) || ht > b * (1.0 + tol) {
                            bad.push(format!("htilde rho={rho} n={n} t={t}"));
                        }
                    }
                }
            }
        }
        let detail = if bad.is_empty() { "all sandwiches hold".to_string() } else { format!("violations: {}", bad.join("; ")) };
        Ok((bad.is_empty(), detail))
    })
}

/// `μ₁ = π²`, the first zero of `J₀`, and the annulus boundary values with
/// the Wronskian.
pub fn criterion_3() -> Check {
    check(3, "spectral suite", || {
        let e = leading_eigenpair(&Domain::unit_interval(), Bc::Dirichlet)?;
        let mu_err = (e.mu1 - PI * PI).abs();
        let (z0, _) = first_bessel_zero(0.0)?;
        let j0 = bessel_j(0.0, z0)?.abs();
        let in_bracket = z0 > 2.404825 && z0 < 2.404826;
        let (r1, r2) = (1.0, 3.0);
        let za = cross_product_zero(r1, r2)?;
        let z1 = annulus_z(r1, r1, r2, za)?.abs();
        let z2 = annulus_z(r2, r1, r2, za)?.abs();
        let wr = (annulus_z_prime(r1, r1, za)? / za - 2.0 / (PI * r1 * za)).abs();
        let ok = mu_err < 1e-12 && j0 < 1e-12 && in_bracket && z1 < 1e-9 && z2 < 1e-9 && wr < 1e-6;
        Ok((ok, format!("|mu1-pi^2| {mu_err:.1e}, z0 {z0:.9}, |J0(z0)| {j0:.1e}, |Z(R1)| {z1:.1e}, |Z(R2)| {z2:.1e}, Wronskian {wr:.1e}")))
    })
}

/// Small-time and large-time slopes of `kO(t)` on the Dirichlet interval.
pub fn criterion_4() -> Check {
    check(4, "kernel-rate suite", || {
        let dom = Domain::unit_interval();
        let cfg = KoConfig::default();
        let small: Vec<f64> = (0..9).map(|i| 10f64.powf(-3.0 + 2.0 * i as f64 / 8.0)).collect();
        let ks: Vec<f64> = small.iter().map(|&t| ko_quadrature(&dom, Bc::Dirichlet, 0.5, t, &cfg)).collect::<Result<_>>()?;
        let lt: Vec<f64> = small.iter().map(|t| t.ln()).collect();
        let s1 = log_slope(&lt, &ks)?.slope;
        // slope over the first decade only, where the boundary is not yet felt
        let s_decade = log_slope(&lt[..5], &ks[..5])?.slope;
        let large: Vec<f64> = (0..7).map(|i| 2.0 + i as f64).collect();
        let kl: Vec<f64> = large.iter().map(|&t| ko_quadrature(&dom, Bc::Dirichlet, 0.5, t, &cfg)).collect::<Result<_>>()?;
        let s2 = log_slope(&large, &kl)?.slope;
        let target = -2.0 * PI * PI;
        let ok = (s1 + 0.25).abs() <= 0.025 && (s2 - target).abs() <= 0.05 * target.abs();
        Ok((ok, format!("small-t log-log slope {s1:.4} (target -0.25; {s_decade:.4} on [1e-3, 1e-2]), large-t slope {s2:.4} (target {target:.4})")))
    })
}

/// Monte-Carlo correlations of the Anderson model against the series.
pub fn criterion_5(trajectories: usize) -> Check {
    check(5, "correlation equality", || {
        let pairs = [(0.4, 0.6), (0.5, 0.5), (0.3, 0.7)];
        let cfg = SimConfig {
            trajectories,
            probes: vec![vec![0.3], vec![0.4], vec![0.5], vec![0.6], vec![0.7]],
            ..SimConfig::desk_default()
        };
        let ens = run_ensemble(&cfg)?;
        let pv: Vec<(Vec<f64>, Vec<f64>)> = pairs.iter().map(|&(a, b)| (vec![a], vec![b])).collect();
        let series = corr_series(&cfg.domain, cfg.bc, cfg.beta, &cfg.initial, cfg.lambda, cfg.t_end, &pv, &CorrSeriesConfig::default())?;
        let mut ok = true;
        let mut parts = Vec::new();
        for (i, (x, y)) in pv.iter().enumerate() {
            let mc = corr_estimate(&ens, cfg.t_end, x, y)?;
            let (s, tail) = (series.values[i], series.tails[i]);
            let within = (mc.value - s).abs() <= 3.0 * (mc.se + tail);
            ok &= within;
            parts.push(format!("({}, {}): MC {:.5} ± {:.5} vs series {:.5} (tail {:.1e})", x[0], y[0], mc.value, mc.se, s, tail));
        }
        Ok((ok, parts.join("; ")))
    })
}

fn mean_config(bc: Bc, trajectories: usize) -> SimConfig {
    let xs: Vec<Vec<f64>> = (1..=9).map(|i| vec![i as f64 / 10.0]).collect();
    SimConfig {
        bc,
        initial: InitialMeasure::dirac(0.3),
        n_space: 64,
        dt: 1e-3,
        t_end: 0.4,
        trajectories,
        output_times: vec![0.02, 0.05, 0.1, 0.2, 0.4],
        probes: xs,
        ..SimConfig::desk_default()
    }
}

/// Ensemble mean against `J(t, x)` on a 5×9 grid for both conditions.
pub fn criterion_6(trajectories: usize) -> Check {
    check(6, "mean identity", || {
        let mut ok = true;
        let mut worst = 0.0f64;
        for bc in [Bc::Dirichlet, Bc::Neumann] {
            let cfg = mean_config(bc, trajectories);
            let ens = run_ensemble(&cfg)?;
            let hk = HeatKernel::new(&cfg.domain, bc)?;
            for &t in &ens.times {
                for x in &ens.probes {
                    let (mean, se) = mean_se(&ens.samples(t, x)?)?;
                    let j = homogeneous_solution(&hk, &cfg.initial, t, x)?;
                    let z = (mean - j).abs() / se;
                    worst = worst.max(z);
                    ok &= z <= 4.0;
                }
            }
        }
        Ok((ok, format!("largest deviation {worst:.2} SE over 90 cells")))
    })
}

fn lyapunov_config(bc: Bc, lambda: f64, trajectories: usize) -> SimConfig {
    SimConfig {
        bc,
        lambda,
        initial: InitialMeasure::uniform(1.0),
        n_space: 32,
        dt: 5e-3,
        t_end: 5.0,
        trajectories,
        seed: 7,
        output_times: (0..=16).map(|i| 1.0 + 0.25 * i as f64).collect(),
        probes: vec![vec![0.5]],
        ..SimConfig::desk_default()
    }
}

/// Sign of the second-moment Lyapunov slope: positive for Neumann at
/// `λ = 0.5`, close to `−2μ₁` for Dirichlet at `λ = 0.05`.
pub fn criterion_7(trajectories: usize) -> Check {
    check(7, "intermittency signs", || {
        let obs = Observable::Probe(vec![0.5]);
        let n = run_ensemble(&lyapunov_config(Bc::Neumann, 0.5, trajectories))?;
        let fit_n = lyapunov_fit_ensemble(&n, &obs, (1.0, 5.0), 20)?;
        let d = run_ensemble(&lyapunov_config(Bc::Dirichlet, 0.05, trajectories))?;
        let fit_d = lyapunov_fit_ensemble(&d, &obs, (1.0, 5.0), 20)?;
        let target = -2.0 * PI * PI;
        let ok = fit_n.slope > 0.0 && fit_n.ci.0 > 0.0 && (fit_d.slope - target).abs() <= 0.2 * target.abs();
        Ok((
            ok,
            format!(
                "Neumann slope {:.4} CI ({:.4}, {:.4}); Dirichlet slope {:.3} (target {target:.3})",
                fit_n.slope, fit_n.ci.0, fit_n.ci.1, fit_d.slope
            ),
        ))
    })
}

/// `m₂ / (Ψ² J*²)` across the Dirichlet interval at `t = 0.5`.
pub fn criterion_8(trajectories: usize) -> Check {
    check(8, "boundary factor", || {
        let xs = [0.02, 0.1, 0.25, 0.5];
        let t = 0.5;
        let cfg = SimConfig {
            n_space: 64,
            dt: 1e-3,
            t_end: t,
            trajectories,
            seed: 3,
            probes: xs.iter().map(|&x| vec![x]).collect(),
            ..SimConfig::desk_default()
        };
        let ens = run_ensemble(&cfg)?;
        let env = fit_interval_envelope(1.0, Bc::Dirichlet, Side::Upper)?.envelope;
        let consts = BoundConstants { kernel_upper: env.c, ..BoundConstants::unit(PI * PI) };
        let ctx = BoundContext::new(&cfg.domain, Bc::Dirichlet)?;
        let kind = BoundKind { bc: Bc::Dirichlet, side: Side::Upper, regularity: Regularity::C1Alpha };
        let mut m2 = Vec::new();
        let mut ratio = Vec::new();
        for &x in &xs {
            let m = moment_estimate(&ens, 2.0, t, &[x])?.value;
            let shape = data_functional(kind, &consts, &ctx, &cfg.initial, t, &[x])?;
            m2.push(m);
            ratio.push(m / (shape * shape));
        }
        let hi = ratio.iter().cloned().fold(f64::MIN, f64::max);
        let lo = ratio.iter().cloned().fold(f64::MAX, f64::min);
        let spread = hi / lo;
        let drop = m2[3] / m2[0];
        let ok = spread < 10.0 && drop >= 10.0;
        Ok((ok, format!("ratio spread {spread:.3}, m2(0.5)/m2(0.02) = {drop:.1}")))
    })
}

/// Grid of `λ` and the fitted `ln ln ℰ` slope for the excitation check.
pub fn excitation_slope(lambdas: &[f64], regime: Regime, dt: f64) -> Result<(f64, Vec<f64>)> {
    let mut ln_e = Vec::with_capacity(lambdas.len());
    for &lambda in lambdas {
        let cfg = SimConfig {
            bc: Bc::Neumann,
            lambda,
            initial: InitialMeasure::uniform(1.0),
            n_space: 64,
            dt,
            t_end: 1.0,
            trajectories: 1,
            probes: vec![],
            ..SimConfig::desk_default()
        };
        let sm = second_moments(&cfg)?;
        ln_e.push(sm.ln_energy(sm.times.len() - 1));
    }
    Ok((excitation_fit_ln(lambdas, &ln_e, regime)?.slope, ln_e))
}

/// Excitation index brackets from the exact second moments of the scheme.
pub fn criterion_9() -> Check {
    check(9, "excitation-index bracket", || {
        let small: Vec<f64> = (0..5).map(|i| 0.125 * 2f64.powf(i as f64 / 2.0)).collect();
        let large: Vec<f64> = (0..5).map(|i| 4.0 * 2f64.powf(i as f64 / 2.0)).collect();
        let (s_small, _) = excitation_slope(&small, Regime::SmallLambda, 1e-3)?;
        let (s_large, _) = excitation_slope(&large, Regime::LargeLambda, 1e-5)?;
        let ok = (1.5..=2.6).contains(&s_small) && (2.0..=3.4).contains(&s_large);
        Ok((ok, format!("small-lambda slope {s_small:.3} in [1.5, 2.6], large-lambda slope {s_large:.3} in [2, 3.4]")))
    })
}

fn scratch_dir(tag: &str) -> PathBuf {
    static COUNTER: std::sync::atomic::AtomicUsize = std::sync::atomic::AtomicUsize::new(0);
    let k = COUNTER.fetch_add(1, std::sync::atomic::Ordering::Relaxed);
    std::env::temp_dir().join(format!("spde-{tag}-{}-{k}", std::process::id()))
}

/// Small config used by the determinism check.
pub fn determinism_config() -> SimConfig {
    SimConfig {
        n_space: 32,
        dt: 1e-3,
        t_end: 0.05,
        trajectories: 96,
        seed: 42,
        scheme: Scheme::ExpEulerEigen,
        output_times: vec![0.01, 0.05],
        probes: vec![vec![0.25], vec![0.5]],
        keep_fields: true,
        ..SimConfig::desk_default()
    }
}

/// Files of a run directory whose bytes must repeat; the metadata is
/// compared with its timestamp removed.
fn compare_runs(a: &Path, b: &Path) -> Result<Vec<String>> {
    let mut diffs = Vec::new();
    let mut names: Vec<String> = std::fs::read_dir(a)?.filter_map(|e| e.ok()).map(|e| e.file_name().to_string_lossy().into_owned()).collect();
    names.sort();
    for name in names {
        let (fa, fb) = (std::fs::read(a.join(&name))?, std::fs::read(b.join(&name)).unwrap_or_default());
        if name == "metadata.json" {
            let strip = |bytes: &[u8]| -> Result<serde_json::Value> {
                let mut v: serde_json::Value = serde_json::from_slice(bytes).map_err(|e| Error::Numerical(format!("metadata: {e}")))?;
                v.as_object_mut().map(|o| o.remove("created_unix"));
                Ok(v)
            };
            if strip(&fa)? != strip(&fb)? {
                diffs.push(name);
            }
        } else if fa != fb {
            diffs.push(name);
        }
    }
    Ok(diffs)
}

/// Runs `spde simulate` twice with one seed and compares the outputs. With
/// `exe` the given binary is used, otherwise the command runs in-process.
pub fn criterion_10(exe: Option<&Path>) -> Check {
    check(10, "determinism", || {
        let root = scratch_dir("determinism");
        std::fs::create_dir_all(&root)?;
        let config = root.join("sim.json");
        let text = serde_json::to_string_pretty(&determinism_config()).map_err(|e| Error::Numerical(e.to_string()))?;
        std::fs::write(&config, text)?;
        let dirs = [root.join("a"), root.join("b")];
        for d in &dirs {
            let args = ["spde".as_ref(), "simulate".as_ref(), "--config".as_ref(), config.as_os_str(), "--out".as_ref(), d.as_os_str()];
            let code = match exe {
                Some(bin) => std::process::Command::new(bin).args(&args[1..]).output()?.status.code().unwrap_or(-1),
                None => crate::cli::run_with(args, &mut std::io::sink()),
            };
            if code != 0 {
                let _ = std::fs::remove_dir_all(&root);
                return Ok((false, format!("simulate exited with {code}")));
            }
        }
        let diffs = compare_runs(&dirs[0], &dirs[1])?;
        let files = std::fs::read_dir(&dirs[0])?.count();
        let _ = std::fs::remove_dir_all(&root);
        let detail = if diffs.is_empty() { format!("{files} files identical") } else { format!("differing: {}", diffs.join(", ")) };
        Ok((diffs.is_empty(), detail))
    })
}

/// Identity, spectral and determinism checks.
pub fn fast_suite() -> Vec<Check> {
    vec![criterion_1(), criterion_3(), criterion_10(None)]
}

/// Every check at its stated scale.
pub fn full_suite() -> Vec<Check> {
    vec![
        criterion_1(),
        criterion_2(),
        criterion_3(),
        criterion_4(),
        criterion_5(20_000),
        criterion_6(2_000),
        criterion_7(4_000),
        criterion_8(2_000),
        criterion_9(),
        criterion_10(None),
    ]
}
