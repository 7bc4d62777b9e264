use super::config::{BoundsConfig, EnergyConfig, EnergyMethod};
use super::output::{coord_headers, create_file, sample_points, write_json, Table};
use super::*;
use crate::bounds::{
    admissibility, corr_bounds, data_functional, excitation_index, fit_interval_constants, lambda_thresholds, lyapunov_bound, moment_upper,
    resolvent_envelope, BoundContext, BoundKind, FitConfig, Regime, Regularity,
};
use crate::error::invalid;
use crate::estimate::{
    corr_estimate, excitation_fit_ln, l2_energy, l2_energy_weighted, lyapunov_fit_ensemble, moment_estimate, Observable,
};
use crate::geometry::Domain;
use crate::grid::Grid;
use crate::heatkernel::{HeatKernel, Side};
use crate::measure::InitialMeasure;
use crate::noise::{build_covariance, factorize, fill_normals, StreamKey, CLIP_TOL};
use crate::renewal::{ln_khat_lambda_resolvent, series_tail, ConvGrid};
use crate::simulate::moments::MAX_MOMENT_CELLS;
use crate::simulate::{run_ensemble, second_moments, SigmaSpec};
use crate::spectral::{full_spectrum, leading_eigenpair, phi1_measure_integral};
use nalgebra::{DMatrix, SymmetricEigen};
use serde_json::{json, Value};

pub(super) fn run(cmd: &Command, out: &mut dyn Write) -> Result<i32> {
    match cmd {
        Command::Eig(a) => eig(a, out),
        Command::Kernel(a) => kernel(a, out),
        Command::Data(a) => data(a, out),
        Command::Series(a) => series(a, out),
        Command::Bounds(a) => bounds(a, out),
        Command::NoiseCheck(a) => noise_check(a, out),
        Command::Simulate(a) => simulate(a, out),
        Command::Estimate(a) => estimate(a, out),
        Command::Energy(a) => energy(a, out),
        Command::Verify(a) => verify(a, out),
    }
    .map(|code| code.unwrap_or(0))
}

type Outcome = Result<Option<i32>>;

/// A finite number or JSON null.
fn num(v: f64) -> Value {
    if v.is_finite() {
        json!(v)
    } else {
        Value::Null
    }
}

fn eig(a: &EigArgs, out: &mut dyn Write) -> Outcome {
    let domain: Domain = json_arg(&a.domain, "--domain")?;
    domain.validate()?;
    let bc = Bc::from(a.bc);
    let e = leading_eigenpair(&domain, bc)?;
    let mu: Vec<f64> = match full_spectrum(&domain, bc, a.modes) {
        Ok(s) => s.modes.iter().map(|m| m.mu).collect(),
        Err(Error::Unsupported(_)) => vec![e.mu1],
        Err(err) => return Err(err),
    };
    write_json(out, &json!({ "domain": domain, "bc": bc, "mu1": e.mu1, "mu": mu, "sup_phi1": e.sup_phi1() }))?;
    if let Some(path) = &a.csv {
        let mut header = coord_headers("x", domain.dim());
        header.push("phi".into());
        let mut t = Table::new(create_file(path)?, &header)?;
        for x in sample_points(&domain, a.samples)? {
            let mut row = x.clone();
            row.push(e.phi1(&x));
            t.row(&row)?;
        }
        t.finish()?;
    }
    Ok(None)
}

fn kernel(a: &KernelArgs, out: &mut dyn Write) -> Outcome {
    let domain: Domain = json_arg(&a.domain, "--domain")?;
    let hk = HeatKernel::new(&domain, Bc::from(a.bc))?;
    if !(a.t > 0.0) {
        return invalid("--t must be positive");
    }
    let d = domain.dim();
    match (&a.x, &a.y) {
        (Some(x), Some(y)) => {
            let g = hk.eval(a.t, x, y)?;
            write_json(out, &json!({ "t": a.t, "x": x, "y": y, "G": g }))?;
        }
        (Some(x), None) | (None, Some(x)) => {
            let mut header = coord_headers("y", d);
            header.push("G".into());
            let mut t = Table::new(&mut *out, &header)?;
            for y in sample_points(&domain, a.n)? {
                let mut row = y.clone();
                row.push(hk.eval(a.t, x, &y)?);
                t.row(&row)?;
            }
            t.finish()?;
        }
        (None, None) => {
            if d != 1 {
                return invalid("full kernel grids need a one-dimensional domain; pass --x");
            }
            let pts = sample_points(&domain, a.n)?;
            let mut t = Table::new(&mut *out, &["x", "y", "G"].map(String::from))?;
            for x in &pts {
                for y in &pts {
                    t.row(&[x[0], y[0], hk.eval(a.t, x, y)?])?;
                }
            }
            t.finish()?;
        }
    }
    Ok(None)
}

fn regularity(r: RegularityArg) -> Regularity {
    match r {
        RegularityArg::Lipschitz => Regularity::Lipschitz,
        RegularityArg::C1alpha => Regularity::C1Alpha,
    }
}

/// Finite value, or null when the integral diverges.
fn finite_or_null(r: Result<f64>) -> Result<Value> {
    match r {
        Ok(v) if v.is_finite() => Ok(json!(v)),
        Ok(_) | Err(Error::Divergent(_)) => Ok(Value::Null),
        Err(e) => Err(e),
    }
}

fn data(a: &DataArgs, out: &mut dyn Write) -> Outcome {
    let domain: Domain = json_arg(&a.domain, "--domain")?;
    domain.validate()?;
    let nu: InitialMeasure = json_arg(&a.measure, "--measure")?;
    let bc = Bc::from(a.bc);
    let class = admissibility(&domain, bc, regularity(a.regularity), &nu)?;
    let e = leading_eigenpair(&domain, bc)?;
    write_json(
        out,
        &json!({
            "admissibility": class,
            "total_variation": finite_or_null(nu.total_variation(&domain))?,
            "phi1_l1": finite_or_null(phi1_measure_integral(&domain, &e, &nu))?,
        }),
    )?;
    Ok(None)
}

fn series(a: &SeriesArgs, out: &mut dyn Write) -> Outcome {
    if a.t_grid.iter().any(|&t| !(t > 0.0 && t.is_finite())) {
        return invalid("--t-grid values must be positive");
    }
    if !(a.lambda >= 0.0) {
        return invalid("--lambda must be nonnegative");
    }
    let tmax = a.t_grid.iter().cloned().fold(0.0, f64::max);
    let grid = ConvGrid::new(a.rho, tmax, &a.t_grid)?;
    let table = grid.hhat_table(a.n);
    let mut header = vec!["t".to_string()];
    header.extend((0..=a.n).map(|n| format!("hhat_{n}")));
    header.extend(["khat", "tail"].map(String::from));
    // K̂ sums the whole series through the resolvent equation; the tail
    // column bounds what the truncation at N leaves out
    let khat = ln_khat_lambda_resolvent(&grid, a.lambda);
    let mut rows = Vec::new();
    for &t in &a.t_grid {
        let i = grid.index_of(t).ok_or_else(|| Error::Numerical(format!("time {t} missing from the grid")))?;
        let mut row = vec![t];
        row.extend(table.iter().map(|h| h[i]));
        row.extend([khat[i].exp(), series_tail(a.rho, a.lambda, t, a.n)?]);
        rows.push(row);
    }
    let mut w = Table::new(&mut *out, &header)?;
    for r in &rows {
        w.row(r)?;
    }
    w.finish()?;
    Ok(None)
}

fn bounds(a: &ConfigArgs, out: &mut dyn Write) -> Outcome {
    let cfg: BoundsConfig = parse_json(&read_text(&a.config)?, "bounds config")?;
    cfg.validate()?;
    let (bc, reg) = (cfg.bc, cfg.regularity);
    let ctx = BoundContext::new(&cfg.domain, bc)?.with_eps(cfg.eps).with_neumann_lower_kernel(cfg.neumann_lower_kernel);
    let mu1 = ctx.eig.mu1;
    let (consts, fit) = match cfg.constants {
        Some(c) => (c, Value::Null),
        None => {
            let Domain::Interval { l } = cfg.domain else { unreachable!("validated") };
            let fc = FitConfig { l, beta: cfg.params.beta, ..cfg.fit.clone().unwrap_or_default() };
            let f = fit_interval_constants(bc, reg, &fc)?;
            (f.consts, json!({ "kappa_upper": num(f.kappa_upper), "kappa_lower": num(f.kappa_lower), "samples": f.samples }))
        }
    };
    let kind = |side| BoundKind { bc, side, regularity: reg };
    // lower bounds carry extra hypotheses; report why they are missing
    let lower = |r: Result<f64>| -> Result<Value> {
        match r {
            Ok(v) => Ok(num(v)),
            Err(e) if e.is_validation() || matches!(e, Error::Unsupported(_)) => Ok(json!({ "unavailable": e.to_string() })),
            Err(e) => Err(e),
        }
    };
    let mut moments = Vec::new();
    let mut corrs = Vec::new();
    for &t in &cfg.times {
        for x in &cfg.points {
            let dat = data_functional(kind(Side::Upper), &consts, &ctx, &cfg.initial, t, x)?;
            let m = moment_upper(bc, &consts, &cfg.params, t, dat)?;
            moments.push(json!({ "t": t, "x": x, "data": num(dat), "moment_upper": num(m) }));
        }
        for [x, x2] in &cfg.pairs {
            let d0 = data_functional(kind(Side::Upper), &consts, &ctx, &cfg.initial, t, x)?;
            let d1 = data_functional(kind(Side::Upper), &consts, &ctx, &cfg.initial, t, x2)?;
            let up = corr_bounds(kind(Side::Upper), &consts, &cfg.params, &ctx, t, x, x2, [d0, d1])?;
            let lo = (|| {
                let d0 = data_functional(kind(Side::Lower), &consts, &ctx, &cfg.initial, t, x)?;
                let d1 = data_functional(kind(Side::Lower), &consts, &ctx, &cfg.initial, t, x2)?;
                corr_bounds(kind(Side::Lower), &consts, &cfg.params, &ctx, t, x, x2, [d0, d1])
            })();
            corrs.push(json!({ "t": t, "x": x, "x2": x2, "upper": num(up), "lower": lower(lo)? }));
        }
    }
    let mut resolvent = Vec::new();
    for q in &cfg.resolvent {
        let up = resolvent_envelope(kind(Side::Upper), &consts, &cfg.params, &ctx, q.t, &q.x, &q.x2, &q.y, &q.y2)?;
        let lo = resolvent_envelope(kind(Side::Lower), &consts, &cfg.params, &ctx, q.t, &q.x, &q.x2, &q.y, &q.y2);
        resolvent.push(json!({ "query": q, "upper": num(up), "lower": lower(lo)? }));
    }
    let th = lambda_thresholds(&consts, &cfg.params, if bc == Bc::Dirichlet { mu1 } else { 0.0 })?;
    let small = match excitation_index(Regime::SmallLambda, bc, cfg.params.beta) {
        Ok(v) => json!(v),
        Err(_) => Value::Null,
    };
    write_json(
        out,
        &json!({
            "constants": consts,
            "fit": fit,
            "mu1": mu1,
            "thresholds": th,
            "lyapunov_bound": num(lyapunov_bound(&cfg.params, &consts, cfg.params.p)),
            "excitation_index": {
                "large_lambda": excitation_index(Regime::LargeLambda, bc, cfg.params.beta)?,
                "small_lambda": small,
            },
            "admissibility": admissibility(&cfg.domain, bc, reg, &cfg.initial)?,
            "moments": moments,
            "correlations": corrs,
            "resolvent": resolvent,
        }),
    )?;
    Ok(None)
}

fn noise_check(a: &NoiseArgs, out: &mut dyn Write) -> Outcome {
    let domain = match a.d {
        1 => Domain::unit_interval(),
        2 => Domain::cube(2, 1.0),
        d => return invalid(format!("noise-check supports d = 1 or 2, got {d}")),
    };
    if a.samples < 2 {
        return invalid("need at least 2 samples");
    }
    let grid = Grid::new(&domain, a.n)?;
    let cov = build_covariance(&grid, a.beta)?;
    let eig = SymmetricEigen::new(cov.clone()).eigenvalues;
    let (lo, hi) = (eig.min(), eig.max());
    let f = factorize(&cov, CLIP_TOL)?;
    let n = f.dim();
    let m = a.samples;
    let mut acc = DMatrix::<f64>::zeros(n, n);
    let mut xi = vec![0.0; n];
    let chunk = 256;
    let mut start = 0;
    while start < m {
        let b = chunk.min(m - start);
        let mut z = DMatrix::zeros(n, b);
        for j in 0..b {
            fill_normals(StreamKey { seed: a.seed, trajectory: (start + j) as u64, step: 0 }, &mut xi);
            z.set_column(j, &nalgebra::DVector::from_column_slice(&xi));
        }
        let v = &f.factor * z;
        acc += &v * v.transpose();
        start += b;
    }
    let emp = acc / m as f64;
    let mut max_abs = 0.0f64;
    let mut max_z = 0.0f64;
    for i in 0..n {
        for j in 0..n {
            let c = cov[(i, j)];
            let err = (emp[(i, j)] - c).abs();
            max_abs = max_abs.max(err);
            let sd = ((cov[(i, i)] * cov[(j, j)] + c * c) / m as f64).sqrt();
            max_z = max_z.max(err / sd);
        }
    }
    write_json(
        out,
        &json!({
            "n": a.n,
            "d": a.d,
            "beta": a.beta,
            "cells": n,
            "h": grid.h,
            "min_eigenvalue": lo,
            "max_eigenvalue": hi,
            "min_over_max": lo / hi,
            "cholesky": f.cholesky,
            "clipped": f.clipped,
            "reconstruction_error": f.reconstruction_error(),
            "samples": m,
            "seed": a.seed,
            "max_abs_cov_error": max_abs,
            "max_z_score": max_z,
        }),
    )?;
    Ok(None)
}

fn simulate(a: &SimulateArgs, out: &mut dyn Write) -> Outcome {
    let cfg: crate::simulate::SimConfig = parse_json(&read_text(&a.config)?, "simulate config")?;
    cfg.validate()?;
    let ens = run_ensemble(&cfg)?;
    let meta = save_run(&ens, &a.out)?;
    write_json(
        out,
        &json!({
            "out": a.out,
            "trajectories": meta.trajectories,
            "rejected": meta.rejected,
            "config_hash": meta.config_hash,
            "files": meta.files,
        }),
    )?;
    Ok(None)
}

fn estimate(a: &EstimateArgs, out: &mut dyn Write) -> Outcome {
    let ens = load_run(&a.runs)?;
    let d = ens.config.domain.dim();
    let times: Vec<f64> = match a.t {
        Some(t) => vec![ens.times[ens.time_index(t)?]],
        None => ens.times.clone(),
    };
    match a.what {
        What::Moments => {
            let probes = match &a.x {
                Some(x) => vec![ens.probes[ens.probe_index(x)?].clone()],
                None => ens.probes.clone(),
            };
            let mut header = vec!["time".to_string()];
            header.extend(coord_headers("x", d));
            header.extend(["p", "value", "se", "m"].map(String::from));
            let mut w = Table::new(&mut *out, &header)?;
            for &t in &times {
                for x in &probes {
                    let e = moment_estimate(&ens, a.p, t, x)?;
                    let mut row = vec![t];
                    row.extend(x);
                    row.extend([e.p, e.value, e.se, e.m as f64]);
                    w.row(&row)?;
                }
            }
            w.finish()?;
        }
        What::Corr => {
            let (Some(x), Some(x2)) = (&a.x, &a.x2) else {
                return invalid("--what corr needs --x and --x2");
            };
            let mut header = vec!["time".to_string()];
            header.extend(coord_headers("x", d));
            header.extend(coord_headers("xp", d));
            header.extend(["value", "se", "m"].map(String::from));
            let mut w = Table::new(&mut *out, &header)?;
            for &t in &times {
                let e = corr_estimate(&ens, t, x, x2)?;
                let mut row = vec![t];
                row.extend(x);
                row.extend(x2);
                row.extend([e.value, e.se, e.m as f64]);
                w.row(&row)?;
            }
            w.finish()?;
        }
        What::Lyapunov => {
            let window = match &a.window {
                Some(w) if w.len() == 2 => (w[0], w[1]),
                Some(_) => return invalid("--window takes two values a,b"),
                None => (ens.times[0], *ens.times.last().unwrap()),
            };
            let obs = match &a.x {
                Some(x) => Observable::Probe(x.clone()),
                None => Observable::Energy,
            };
            let fit = lyapunov_fit_ensemble(&ens, &obs, window, a.groups)?;
            let observable = match &obs {
                Observable::Probe(x) => json!({ "probe": x }),
                Observable::Energy => json!("energy"),
            };
            write_json(out, &json!({ "observable": observable, "window": [window.0, window.1], "fit": fit }))?;
        }
        What::Energy => {
            let eig = if a.weighted { Some(leading_eigenpair(&ens.config.domain, ens.config.bc)?) } else { None };
            let rows: Vec<[f64; 3]> = times
                .iter()
                .map(|&t| {
                    let e = match &eig {
                        Some(e) => l2_energy_weighted(&ens, t, e)?,
                        None => l2_energy(&ens, t)?,
                    };
                    Ok([t, e.value, e.se])
                })
                .collect::<Result<_>>()?;
            let mut w = Table::new(&mut *out, &["time", "energy", "se"].map(String::from))?;
            for r in &rows {
                w.row(r)?;
            }
            w.finish()?;
        }
    }
    Ok(None)
}

fn energy(a: &EnergyArgs, out: &mut dyn Write) -> Outcome {
    let cfg: EnergyConfig = parse_json(&read_text(&a.config)?, "energy config")?;
    cfg.validate()?;
    let t = cfg.t.unwrap_or(cfg.base.t_end);
    let mut base = cfg.base.clone();
    base.t_end = t;
    base.output_times = vec![];
    base.validate()?;
    let moments_ok = base.sigma == SigmaSpec::Anderson && Grid::new(&base.domain, base.n_space)?.len() <= MAX_MOMENT_CELLS;
    let use_moments = match cfg.method {
        EnergyMethod::Auto => moments_ok,
        EnergyMethod::Moments => true,
        EnergyMethod::MonteCarlo => false,
    };
    let mut rows = Vec::new();
    let mut ln_e = Vec::new();
    for &lambda in &cfg.lambdas {
        let c = crate::simulate::SimConfig { lambda, ..base.clone() };
        if use_moments {
            let sm = second_moments(&c)?;
            let v = sm.ln_energy(sm.times.len() - 1);
            ln_e.push(v);
            rows.push([lambda, v, f64::NAN]);
        } else {
            let ens = run_ensemble(&c)?;
            let e = l2_energy(&ens, t)?;
            ln_e.push(e.value.ln());
            rows.push([lambda, e.value.ln(), e.se / e.value]);
        }
    }
    if let Some(path) = &a.csv {
        let mut w = Table::new(create_file(path)?, &["lambda", "ln_energy", "ln_energy_se"].map(String::from))?;
        for r in &rows {
            w.row(r)?;
        }
        w.finish()?;
    }
    let fit = excitation_fit_ln(&cfg.lambdas, &ln_e, cfg.regime)?;
    let predicted = excitation_index(cfg.regime, base.bc, base.beta).ok();
    let table: Vec<Value> = rows.iter().map(|r| json!({ "lambda": r[0], "ln_energy": num(r[1]), "ln_energy_se": num(r[2]) })).collect();
    write_json(
        out,
        &json!({
            "t": t,
            "method": if use_moments { "moments" } else { "monte_carlo" },
            "regime": cfg.regime,
            "rows": table,
            "fit": fit,
            "predicted_index": predicted,
        }),
    )?;
    Ok(None)
}

fn verify(a: &VerifyArgs, out: &mut dyn Write) -> Outcome {
    let checks = match a.suite {
        Suite::Fast => crate::verify::fast_suite(),
        Suite::Full => crate::verify::full_suite(),
    };
    let mut failed = 0;
    for c in &checks {
        writeln!(out, "{c}")?;
        if !c.passed {
            failed += 1;
        }
    }
    writeln!(out, "{} checks, {failed} failed", checks.len())?;
    Ok(Some(if failed == 0 { 0 } else { 2 }))
}
