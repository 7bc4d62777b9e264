//! Monte-Carlo integration of the mild equation
//! `u = J + λ ∫∫ G σ(u) W(ds, dy)` on cell-centered grids.
//!
//! Two schemes are available. `exp_euler_eigen` (intervals and boxes) steps
//! `u ← P (u + λ σ(u) ∘ ΔW)` with `P = S diag(e^{-μ dt}) S^{-1}` in the
//! discrete eigenbasis, which is exact when `λ = 0`. `semi_implicit_fd`
//! solves `(I - dt Δ_h) u' = u + λ σ(u) ∘ ΔW` on any grid, including masked
//! balls and annuli.

pub mod binary;
pub mod eigen;
pub mod fd;
pub mod moments;

use crate::error::{invalid, Error, Result};
use crate::geometry::Domain;
use crate::grid::Grid;
use crate::measure::{DensityProfile, InitialMeasure};
use crate::noise::{build_covariance, factorize, fill_normals, CorrelationFn, NoiseFactor, StreamKey, CLIP_TOL};
use crate::quadrature::{adaptive, integrate_endpoint_singular, integrate_two_sided, GaussRule};
use crate::spectral::{mode_1d, Bc};
use eigen::EigenBasis;
use fd::FdSolver;
use nalgebra::{DMatrix, DMatrixView, DVector};
use rand::{Rng, SeedableRng};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::fmt;
use std::sync::Arc;

pub use moments::{second_moments, SecondMoments};

/// Schema tag of simulation configs.
pub const SIM_SCHEMA: &str = "spde.simulate/1";
/// Trajectories advanced together; batches start at multiples of this.
pub const BATCH: usize = 32;
/// Largest tolerated fraction of rejected (non-finite) trajectories.
pub const MAX_REJECT_RATE: f64 = 1e-3;
/// Largest number of active cells (dense noise factor).
pub const MAX_SIM_CELLS: usize = 4096;

/// Library-supplied `σ` with its declared cone and Lipschitz constants.
#[derive(Clone)]
pub struct CustomSigma {
    pub f: Arc<dyn Fn(f64) -> f64 + Send + Sync>,
    pub l: f64,
    pub lip: f64,
}

impl fmt::Debug for CustomSigma {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "CustomSigma {{ l: {}, L: {} }}", self.l, self.lip)
    }
}

impl PartialEq for CustomSigma {
    fn eq(&self, other: &Self) -> bool {
        Arc::ptr_eq(&self.f, &other.f) && self.l == other.l && self.lip == other.lip
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", deny_unknown_fields)]
pub enum SigmaSpec {
    /// `σ(u) = u`.
    Anderson,
    /// `σ(u) = (l + L)/2 · |u|`, which sits between `l|u|` and `L|u|`.
    LinearCone {
        l: f64,
        #[serde(rename = "L")]
        lip: f64,
    },
    #[serde(skip)]
    Custom(CustomSigma),
}

impl SigmaSpec {
    #[inline]
    pub fn eval(&self, u: f64) -> f64 {
        match self {
            SigmaSpec::Anderson => u,
            SigmaSpec::LinearCone { l, lip } => 0.5 * (l + lip) * u.abs(),
            SigmaSpec::Custom(c) => (c.f)(u),
        }
    }

    pub fn lipschitz(&self) -> f64 {
        match self {
            SigmaSpec::Anderson => 1.0,
            SigmaSpec::LinearCone { lip, .. } => *lip,
            SigmaSpec::Custom(c) => c.lip,
        }
    }

    pub fn cone(&self) -> f64 {
        match self {
            SigmaSpec::Anderson => 1.0,
            SigmaSpec::LinearCone { l, .. } => *l,
            SigmaSpec::Custom(c) => c.l,
        }
    }

    /// Checks `0 <= l <= L`, `σ(0) = 0`, and for custom `σ` spot-checks the
    /// Lipschitz and cone bounds on random pairs.
    pub fn validate(&self) -> Result<()> {
        let (l, lip) = (self.cone(), self.lipschitz());
        if !(l >= 0.0 && lip >= l && lip.is_finite()) {
            return invalid(format!("sigma needs 0 <= l <= L, got l = {l}, L = {lip}"));
        }
        if let SigmaSpec::Custom(c) = self {
            if (c.f)(0.0) != 0.0 {
                return invalid("custom sigma must vanish at 0");
            }
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(0x5157);
            for _ in 0..256 {
                let u: f64 = rng.random_range(-10.0..10.0);
                let v: f64 = rng.random_range(-10.0..10.0);
                let (fu, fv) = ((c.f)(u), (c.f)(v));
                let slack = 1e-9 * (1.0 + fu.abs() + fv.abs());
                if (fu - fv).abs() > lip * (u - v).abs() + slack {
                    return invalid(format!("custom sigma violates the Lipschitz bound {lip} at ({u}, {v})"));
                }
                if fu.abs() + slack < l * u.abs() || fu.abs() > lip * u.abs() + slack {
                    return invalid(format!("custom sigma violates the cone bounds at {u}"));
                }
            }
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scheme {
    ExpEulerEigen,
    SemiImplicitFd,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimConfig {
    pub schema: String,
    pub domain: Domain,
    pub bc: Bc,
    pub sigma: SigmaSpec,
    pub lambda: f64,
    pub beta: f64,
    pub initial: InitialMeasure,
    /// Cells per bounding-box side.
    pub n_space: usize,
    pub dt: f64,
    pub t_end: f64,
    pub trajectories: usize,
    pub seed: u64,
    pub scheme: Scheme,
    /// Recorded times, multiples of `dt`; empty means `[t_end]`.
    #[serde(default)]
    pub output_times: Vec<f64>,
    /// Points where values are recorded for every trajectory.
    #[serde(default)]
    pub probes: Vec<Vec<f64>>,
    /// Keep whole fields, not just probes and norms.
    #[serde(default)]
    pub keep_fields: bool,
}

impl SimConfig {
    /// Desk-scale default: Interval(1), Dirichlet, Anderson, `β = 1/2`,
    /// `ν = δ_{1/2}`, 128 cells, `dt = 1e-4`, `10⁴` trajectories.
    pub fn desk_default() -> Self {
        SimConfig {
            schema: SIM_SCHEMA.into(),
            domain: Domain::unit_interval(),
            bc: Bc::Dirichlet,
            sigma: SigmaSpec::Anderson,
            lambda: 1.0,
            beta: 0.5,
            initial: InitialMeasure::dirac(0.5),
            n_space: 128,
            dt: 1e-4,
            t_end: 0.1,
            trajectories: 10_000,
            seed: 1,
            scheme: Scheme::ExpEulerEigen,
            output_times: vec![],
            probes: vec![vec![0.5]],
            keep_fields: false,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.schema != SIM_SCHEMA {
            return invalid(format!("schema must be \"{SIM_SCHEMA}\", got \"{}\"", self.schema));
        }
        self.domain.validate()?;
        CorrelationFn::new(self.beta, self.domain.dim())?;
        self.sigma.validate()?;
        self.initial.validate(&self.domain)?;
        if !(self.lambda >= 0.0 && self.lambda.is_finite()) {
            return invalid("lambda must be finite and nonnegative");
        }
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return invalid("dt must be positive");
        }
        if !(self.t_end > 0.0 && self.t_end.is_finite()) {
            return invalid("t_end must be positive");
        }
        if self.trajectories == 0 {
            return invalid("need at least one trajectory");
        }
        self.step_of(self.t_end)?;
        for &t in &self.output_times {
            if !(t >= 0.0 && t <= self.t_end * (1.0 + 1e-12)) {
                return invalid(format!("output time {t} outside [0, t_end]"));
            }
            self.step_of(t)?;
        }
        for p in &self.probes {
            if !self.domain.contains(p)? {
                return invalid(format!("probe {p:?} is not inside the domain"));
            }
        }
        if self.scheme == Scheme::ExpEulerEigen && !matches!(self.domain, Domain::Interval { .. } | Domain::Box { .. }) {
            return Err(Error::Unsupported("exp_euler_eigen needs an Interval or Box; use semi_implicit_fd".into()));
        }
        Ok(())
    }

    /// Number of steps reaching `t`; `t` must be a multiple of `dt`.
    pub fn step_of(&self, t: f64) -> Result<usize> {
        let k = (t / self.dt).round();
        if (k * self.dt - t).abs() > 1e-9 * t.max(self.dt) {
            return invalid(format!("time {t} is not a multiple of dt = {}", self.dt));
        }
        Ok(k as usize)
    }

    pub fn steps(&self) -> usize {
        (self.t_end / self.dt).round() as usize
    }

    /// Recorded times in increasing order.
    pub fn recorded_times(&self) -> Vec<f64> {
        let mut ts = if self.output_times.is_empty() { vec![self.t_end] } else { self.output_times.clone() };
        ts.sort_by(|a, b| a.partial_cmp(b).unwrap());
        ts.dedup_by(|a, b| (*a - *b).abs() < 1e-12 * b.abs().max(1.0));
        ts
    }

    /// FNV-1a hash of the JSON form.
    pub fn hash(&self) -> u64 {
        let text = serde_json::to_string(self).unwrap_or_else(|_| format!("{self:?}"));
        text.bytes().fold(0xcbf29ce484222325u64, |h, b| (h ^ b as u64).wrapping_mul(0x100000001b3))
    }
}

/// Cell average of a density over one cell.
pub fn cell_average(profile: &DensityProfile, grid: &Grid, cell: usize) -> Result<f64> {
    let c = grid.center(cell);
    let h = grid.h;
    match grid.d {
        1 => {
            let (a, b) = (c[0] - 0.5 * h, c[0] + 0.5 * h);
            let f = |x: f64| profile.eval(&grid.domain, &[x]);
            let edge = cell == 0 || cell + 1 == grid.len();
            let v = if edge && !profile.is_bounded() {
                integrate_two_sided(f, a, b, 1e-10)?
            } else {
                adaptive(f, a, b, 0.0, 1e-11, 4096)?.value
            };
            if !v.is_finite() {
                return Err(Error::Divergent(format!("density is not integrable on cell {cell}")));
            }
            Ok(v / h)
        }
        _ => {
            let rule = GaussRule::new(8);
            let (xs, ws) = rule.nodes(c[0] - 0.5 * h, c[0] + 0.5 * h, 1);
            let (ys, vs) = rule.nodes(c[1] - 0.5 * h, c[1] + 0.5 * h, 1);
            let mut s = 0.0;
            for (x, w) in xs.iter().zip(&ws) {
                for (y, v) in ys.iter().zip(&vs) {
                    let p = [*x, *y];
                    if grid.domain.contains(&p)? {
                        s += w * v * profile.eval(&grid.domain, &p);
                    }
                }
            }
            if !s.is_finite() {
                return Err(Error::Divergent(format!("density is not integrable on cell {cell}")));
            }
            Ok(s / grid.cell_volume())
        }
    }
}

/// Cell averages of the initial measure; an atom puts `m / h^d` on its cell
/// (a point on a face belongs to the lower-index cell).
pub fn discretize_initial(initial: &InitialMeasure, grid: &Grid) -> Result<DVector<f64>> {
    initial.validate(&grid.domain)?;
    let mut u = DVector::zeros(grid.len());
    for (y, m) in initial.atoms() {
        u[grid.locate(&y)?] += m / grid.cell_volume();
    }
    for (profile, scale) in initial.densities() {
        for c in 0..grid.len() {
            u[c] += scale * cell_average(&profile, grid, c)?;
        }
    }
    Ok(u)
}

enum Stepper {
    Eigen1(DMatrix<f64>),
    /// Separable propagator applied as `P X Pᵀ` to each `n × n` field.
    Eigen2(DMatrix<f64>),
    Fd(FdSolver),
}

/// A validated configuration with its operators assembled.
pub struct Simulation {
    pub config: SimConfig,
    pub grid: Grid,
    pub noise: NoiseFactor,
    pub initial: DVector<f64>,
    /// One row per probe.
    pub probe_rows: DMatrix<f64>,
    pub basis: Option<EigenBasis>,
    stepper: Stepper,
    out_steps: Vec<usize>,
}

impl Simulation {
    pub fn new(config: &SimConfig) -> Result<Self> {
        config.validate()?;
        let grid = Grid::new(&config.domain, config.n_space)?;
        if grid.len() > MAX_SIM_CELLS {
            return Err(Error::Unsupported(format!("{} cells exceed the dense-noise limit {MAX_SIM_CELLS}", grid.len())));
        }
        let cov = build_covariance(&grid, config.beta)?;
        let noise = factorize(&cov, CLIP_TOL)?;
        let (stepper, basis) = match config.scheme {
            Scheme::ExpEulerEigen => {
                let l = grid.h * grid.n as f64;
                let basis = EigenBasis::new(config.bc, l, grid.n);
                let p = basis.propagator(config.dt);
                (if grid.d == 1 { Stepper::Eigen1(p) } else { Stepper::Eigen2(p) }, Some(basis))
            }
            Scheme::SemiImplicitFd => (Stepper::Fd(FdSolver::new(&grid, config.bc, config.dt)?), None),
        };
        let initial = match &basis {
            Some(b) => modal_initial(&config.initial, &grid, b)?,
            None => discretize_initial(&config.initial, &grid)?,
        };
        let mut probe_rows = DMatrix::zeros(config.probes.len(), grid.len());
        for (i, p) in config.probes.iter().enumerate() {
            probe_rows.set_row(i, &probe_row(&grid, basis.as_ref(), p)?.transpose());
        }
        let out_steps = config.recorded_times().iter().map(|&t| config.step_of(t)).collect::<Result<Vec<_>>>()?;
        Ok(Simulation { config: config.clone(), grid, noise, initial, probe_rows, basis, stepper, out_steps })
    }

    /// Row `r` with `r · u` the value of the discrete field `u` at `x`:
    /// the spectral interpolant for the eigen scheme, the containing cell
    /// for finite differences.
    pub fn probe_row(&self, x: &[f64]) -> Result<DVector<f64>> {
        probe_row(&self.grid, self.basis.as_ref(), x)
    }

    pub fn times(&self) -> Vec<f64> {
        self.config.recorded_times()
    }

    /// Dense one-step heat operator `Q`, so that `u' = Q (u + λσ(u)∘ΔW)`.
    pub fn heat_operator(&self) -> DMatrix<f64> {
        match &self.stepper {
            Stepper::Eigen1(p) => p.clone(),
            Stepper::Eigen2(p) => p.kronecker(p),
            Stepper::Fd(s) => s.dense_inverse(),
        }
    }

    /// Runs every trajectory, in parallel over fixed batches.
    pub fn run(&self) -> Result<Ensemble> {
        let m = self.config.trajectories;
        let batches: Vec<usize> = (0..m.div_ceil(BATCH)).collect();
        let outs: Vec<BatchOut> =
            crate::parallel::install(|| batches.par_iter().map(|&b| self.run_batch(b * BATCH, BATCH.min(m - b * BATCH))).collect());
        self.assemble(outs)
    }

    fn run_batch(&self, first: usize, count: usize) -> BatchOut {
        let n = self.grid.len();
        let cfg = &self.config;
        let noisy = cfg.lambda > 0.0;
        let scale = cfg.lambda * cfg.dt.sqrt();
        let mut u = DMatrix::from_fn(n, count, |i, _| self.initial[i]);
        let mut xi = DMatrix::zeros(n, count);
        let mut dw = DMatrix::zeros(n, count);
        let mut tmp = DMatrix::zeros(n, count);
        let mut out = BatchOut::new(first, count, self.out_steps.len());
        let mut next = 0;
        while next < self.out_steps.len() && self.out_steps[next] == 0 {
            out.record(self, next, &u);
            next += 1;
        }
        for step in 1..=cfg.steps() {
            if noisy {
                for j in 0..count {
                    let key = StreamKey { seed: cfg.seed, trajectory: (first + j) as u64, step: step as u64 };
                    fill_normals(key, xi.column_mut(j).as_mut_slice());
                }
                dw.gemm(scale, &self.noise.factor, &xi, 0.0);
                for (ui, wi) in u.iter_mut().zip(dw.iter()) {
                    *ui += cfg.sigma.eval(*ui) * wi;
                }
            }
            match &self.stepper {
                Stepper::Eigen1(p) => {
                    tmp.gemm(1.0, p, &u, 0.0);
                    std::mem::swap(&mut u, &mut tmp);
                }
                Stepper::Eigen2(p) => {
                    let k = self.grid.n;
                    for j in 0..count {
                        let y = {
                            let x = DMatrixView::from_slice(u.column(j).as_slice(), k, k).into_owned();
                            p * x * p.transpose()
                        };
                        u.column_mut(j).copy_from_slice(y.as_slice());
                    }
                }
                Stepper::Fd(s) => {
                    for j in 0..count {
                        s.solve_in_place(u.column_mut(j).as_mut_slice());
                    }
                }
            }
            while next < self.out_steps.len() && self.out_steps[next] == step {
                out.record(self, next, &u);
                next += 1;
            }
        }
        out
    }

    fn assemble(&self, outs: Vec<BatchOut>) -> Result<Ensemble> {
        let cfg = &self.config;
        let nt = self.out_steps.len();
        let np = cfg.probes.len();
        let n = self.grid.len();
        let mut ids = Vec::new();
        let mut probe = vec![Vec::new(); nt];
        let mut norms = vec![Vec::new(); nt];
        let mut fields = vec![Vec::new(); nt];
        let mut negative = vec![0usize; nt];
        let mut rejected = Vec::new();
        for b in outs {
            for j in 0..b.count {
                let id = (b.first + j) as u64;
                if !b.finite[j] {
                    rejected.push(id);
                    continue;
                }
                ids.push(id);
                for k in 0..nt {
                    probe[k].extend_from_slice(&b.probe[k][j * np..(j + 1) * np]);
                    norms[k].push(b.norms[k][j]);
                    negative[k] += b.negative[k][j];
                    if cfg.keep_fields {
                        fields[k].extend_from_slice(&b.fields[k][j * n..(j + 1) * n]);
                    }
                }
            }
        }
        if rejected.len() as f64 > MAX_REJECT_RATE * cfg.trajectories as f64 {
            return Err(Error::Numerical(format!(
                "{} of {} trajectories became non-finite (first: {:?})",
                rejected.len(),
                cfg.trajectories,
                &rejected[..rejected.len().min(5)]
            )));
        }
        let m = ids.len();
        Ok(Ensemble {
            config_hash: cfg.hash(),
            seed: cfg.seed,
            times: self.times(),
            probes: cfg.probes.clone(),
            centers: (0..n).map(|c| self.grid.center(c)).collect(),
            cell_volume: self.grid.cell_volume(),
            trajectory_ids: ids,
            probe_values: probe.iter().map(|v| DMatrix::from_row_slice(m, np, v)).collect(),
            sq_norms: norms,
            fields: cfg.keep_fields.then(|| fields.iter().map(|v| DMatrix::from_row_slice(m, n, v)).collect()),
            rejected: rejected.len(),
            negative_fraction: negative.iter().map(|&c| c as f64 / (m * n).max(1) as f64).collect(),
            config: cfg.clone(),
        })
    }
}

/// Runs `config` from scratch.
pub fn run_ensemble(config: &SimConfig) -> Result<Ensemble> {
    Simulation::new(config)?.run()
}

struct BatchOut {
    first: usize,
    count: usize,
    finite: Vec<bool>,
    /// Per time: trajectory-major probe values.
    probe: Vec<Vec<f64>>,
    norms: Vec<Vec<f64>>,
    negative: Vec<Vec<usize>>,
    fields: Vec<Vec<f64>>,
}

impl BatchOut {
    fn new(first: usize, count: usize, nt: usize) -> Self {
        BatchOut {
            first,
            count,
            finite: vec![true; count],
            probe: vec![Vec::new(); nt],
            norms: vec![Vec::new(); nt],
            negative: vec![Vec::new(); nt],
            fields: vec![Vec::new(); nt],
        }
    }

    fn record(&mut self, sim: &Simulation, k: usize, u: &DMatrix<f64>) {
        let vol = sim.grid.cell_volume();
        let vals = &sim.probe_rows * u;
        for j in 0..self.count {
            let col = u.column(j);
            if col.iter().any(|v| !v.is_finite()) {
                self.finite[j] = false;
            }
            self.probe[k].extend(vals.column(j).iter());
            self.norms[k].push(vol * col.norm_squared());
            self.negative[k].push(col.iter().filter(|&&v| v < 0.0).count());
            if sim.config.keep_fields {
                self.fields[k].extend(col.iter());
            }
        }
    }
}

/// Recorded output of an ensemble run. Rows are accepted trajectories.
#[derive(Clone, Debug)]
pub struct Ensemble {
    pub config: SimConfig,
    pub config_hash: u64,
    pub seed: u64,
    pub times: Vec<f64>,
    pub probes: Vec<Vec<f64>>,
    pub centers: Vec<Vec<f64>>,
    pub cell_volume: f64,
    pub trajectory_ids: Vec<u64>,
    /// Per time, `M × P` probe values.
    pub probe_values: Vec<DMatrix<f64>>,
    /// Per time, `∫ u² dx` of each trajectory.
    pub sq_norms: Vec<Vec<f64>>,
    /// Per time, `M × N` fields when `keep_fields` was set.
    pub fields: Option<Vec<DMatrix<f64>>>,
    pub rejected: usize,
    /// Per time, fraction of negative cell values (diagnostic only).
    pub negative_fraction: Vec<f64>,
}

impl Ensemble {
    pub fn len(&self) -> usize {
        self.trajectory_ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.trajectory_ids.is_empty()
    }

    pub fn time_index(&self, t: f64) -> Result<usize> {
        self.times
            .iter()
            .position(|&s| (s - t).abs() <= 1e-9 * t.abs().max(1e-12))
            .ok_or_else(|| Error::Validation(format!("time {t} is not an output time")))
    }

    pub fn probe_index(&self, x: &[f64]) -> Result<usize> {
        self.probes
            .iter()
            .position(|p| p.len() == x.len() && p.iter().zip(x).all(|(a, b)| (a - b).abs() <= 1e-12))
            .ok_or_else(|| Error::Validation(format!("{x:?} is not a probe point")))
    }

    /// Samples of `u(t, x)` over trajectories.
    pub fn samples(&self, t: f64, x: &[f64]) -> Result<Vec<f64>> {
        let (k, p) = (self.time_index(t)?, self.probe_index(x)?);
        Ok(self.probe_values[k].column(p).iter().cloned().collect())
    }

    /// Raw fields as a rank-3 array (trajectory, time, cell).
    pub fn write_fields<W: std::io::Write>(&self, w: W) -> Result<()> {
        let fields = self.fields.as_ref().ok_or_else(|| Error::Validation("fields were not kept".into()))?;
        let (m, nt, n) = (self.len(), self.times.len(), self.centers.len());
        let mut values = Vec::with_capacity(m * nt * n);
        for j in 0..m {
            for f in fields {
                values.extend(f.row(j).iter());
            }
        }
        binary::write_array(w, &[m, nt, n], &values)
    }
}

fn probe_row(grid: &Grid, basis: Option<&EigenBasis>, x: &[f64]) -> Result<DVector<f64>> {
    match basis {
        Some(b) if grid.d == 1 => Ok(b.probe_row(x[0])),
        Some(b) => {
            let (r0, r1) = (b.probe_row(x[0]), b.probe_row(x[1]));
            Ok(DVector::from_fn(grid.len(), |i, _| r0[i / grid.n] * r1[i % grid.n]))
        }
        None => {
            let mut r = DVector::zeros(grid.len());
            r[grid.locate(x)?] = 1.0;
            Ok(r)
        }
    }
}

/// Initial field of the eigen scheme: the synthesis of
/// [`modal_coefficients`], so the discrete flow reproduces the truncated
/// eigen-expansion of `J`.
fn modal_initial(initial: &InitialMeasure, grid: &Grid, basis: &EigenBasis) -> Result<DVector<f64>> {
    let c = modal_coefficients(initial, grid, basis)?;
    if grid.d == 1 {
        return Ok(&basis.synthesis * c);
    }
    let n = basis.n;
    let coef = DMatrix::from_row_slice(n, n, c.as_slice());
    let field = &basis.synthesis * coef * basis.synthesis.transpose();
    Ok(DVector::from_fn(grid.len(), |i, _| field[(i / n, i % n)]))
}

/// Coefficients `ν(φ_k)` of the initial measure on the tensor eigenbasis,
/// flattened row-major in two dimensions. One-dimensional densities are
/// integrated against each mode; in two dimensions densities enter through
/// their cell averages.
pub fn modal_coefficients(initial: &InitialMeasure, grid: &Grid, basis: &EigenBasis) -> Result<DVector<f64>> {
    let (bc, l, n) = (basis.bc, basis.l, basis.n);
    if grid.d == 1 {
        let mut c = DVector::zeros(n);
        let densities = initial.densities();
        for (j, &k) in basis.wavenumbers().iter().enumerate() {
            let mode = |x: f64| mode_1d(bc, l, k, x);
            c[j] = initial.atoms().iter().map(|(y, m)| m * mode(y[0])).sum::<f64>();
            for (profile, scale) in &densities {
                c[j] += scale * density_moment(profile, &grid.domain, l, 2 * n, mode)?;
            }
            if !c[j].is_finite() {
                return Err(Error::Divergent(format!("initial measure does not integrate mode {k}")));
            }
        }
        return Ok(c);
    }
    let mut coef = DMatrix::zeros(n, n);
    for (y, m) in initial.atoms() {
        coef += basis.modes_at(y[0]) * basis.modes_at(y[1]).transpose() * m;
    }
    let dens = InitialMeasure::Sum {
        parts: initial.densities().into_iter().map(|(profile, scale)| InitialMeasure::Density { profile, scale }).collect(),
    };
    if !dens.densities().is_empty() {
        let u = discretize_initial(&dens, grid)?;
        let field = DMatrix::from_row_slice(n, n, u.as_slice());
        coef += &basis.analysis * field * basis.analysis.transpose();
    }
    Ok(DVector::from_fn(n * n, |i, _| coef[(i / n, i % n)]))
}

/// `∫_0^L ρ(x) g(x) dx` on `panels` Gauss panels; the end panels use the
/// endpoint-singular rule when `ρ` is unbounded.
fn density_moment(profile: &DensityProfile, domain: &Domain, l: f64, panels: usize, g: impl Fn(f64) -> f64) -> Result<f64> {
    let f = |x: f64| profile.eval(domain, &[x]) * g(x);
    let w = l / panels as f64;
    let rule = GaussRule::new(10);
    if profile.is_bounded() {
        return Ok(rule.integrate(0.0, l, panels, f));
    }
    let inner = rule.integrate(w, l - w, panels - 2, f);
    let left = integrate_endpoint_singular(f, 0.0, w, 1e-10)?;
    let right = integrate_endpoint_singular(|x| f(l - x), 0.0, w, 1e-10)?;
    Ok(left + inner + right)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::heatkernel::{homogeneous_solution, HeatKernel};

    fn small(bc: Bc, scheme: Scheme) -> SimConfig {
        SimConfig {
            bc,
            scheme,
            n_space: 32,
            dt: 1e-3,
            t_end: 0.05,
            trajectories: 40,
            probes: vec![vec![0.3], vec![0.5]],
            output_times: vec![0.0, 0.02, 0.05],
            ..SimConfig::desk_default()
        }
    }

    #[test]
    fn atom_goes_to_lower_cell() {
        let g = Grid::new(&Domain::unit_interval(), 100).unwrap();
        let u = discretize_initial(&InitialMeasure::dirac(0.5), &g).unwrap();
        assert!((u[49] - 100.0).abs() < 1e-12);
        assert_eq!(u.iter().filter(|v| **v != 0.0).count(), 1);
    }

    #[test]
    fn uniform_is_constant() {
        let g = Grid::new(&Domain::unit_interval(), 16).unwrap();
        let u = discretize_initial(&InitialMeasure::uniform(2.0), &g).unwrap();
        assert!(u.iter().all(|v| (v - 2.0).abs() < 1e-12));
    }

    #[test]
    fn boundary_power_cells() {
        let g = Grid::new(&Domain::unit_interval(), 20).unwrap();
        let prof = DensityProfile::BoundaryPower { exponent: 1.5 };
        for c in [3, 10, 18] {
            let x = g.center(c)[0];
            let oracle = adaptive(|y| (y * (1.0 - y)).powf(-1.5), x - 0.025, x + 0.025, 0.0, 1e-13, 10_000).unwrap().value / 0.05;
            assert!((cell_average(&prof, &g, c).unwrap() - oracle).abs() < 1e-6 * oracle);
        }
        assert!(matches!(cell_average(&prof, &g, 0), Err(Error::Divergent(_))));
    }

    #[test]
    fn zero_noise_matches_heat_flow() {
        let mut cfg = small(Bc::Dirichlet, Scheme::ExpEulerEigen);
        cfg.lambda = 0.0;
        cfg.trajectories = 1;
        cfg.n_space = 128;
        let ens = run_ensemble(&cfg).unwrap();
        let hk = HeatKernel::new(&cfg.domain, cfg.bc).unwrap();
        for x in [0.3, 0.5] {
            let j = homogeneous_solution(&hk, &cfg.initial, 0.05, &[x]).unwrap();
            let u = ens.samples(0.05, &[x]).unwrap()[0];
            assert!((u - j).abs() < 1e-8 * j.abs(), "{u} vs {j}");
        }
    }

    #[test]
    fn replay_is_bit_identical() {
        let cfg = small(Bc::Neumann, Scheme::ExpEulerEigen);
        let a = run_ensemble(&cfg).unwrap();
        let b = run_ensemble(&cfg).unwrap();
        assert_eq!(a.probe_values, b.probe_values);
        let mut other = cfg.clone();
        other.seed = 2;
        assert_ne!(run_ensemble(&other).unwrap().probe_values, a.probe_values);
    }

    #[test]
    fn fd_keeps_neumann_constants() {
        let mut cfg = small(Bc::Neumann, Scheme::SemiImplicitFd);
        cfg.initial = InitialMeasure::uniform(1.5);
        cfg.lambda = 0.0;
        cfg.trajectories = 2;
        let ens = run_ensemble(&cfg).unwrap();
        assert!(ens.probe_values[2].iter().all(|v| (v - 1.5).abs() < 1e-12));
    }

    #[test]
    fn ball_runs_with_fd() {
        let mut cfg = small(Bc::Dirichlet, Scheme::SemiImplicitFd);
        cfg.domain = Domain::ball(2, 1.0);
        cfg.beta = 1.0;
        cfg.n_space = 16;
        cfg.initial = InitialMeasure::uniform(1.0);
        cfg.probes = vec![vec![0.0, 0.0]];
        let ens = run_ensemble(&cfg).unwrap();
        assert_eq!(ens.len(), 40);
        assert!(ens.probe_values[2].iter().all(|v| v.is_finite()));
    }

    #[test]
    fn rejects_unknown_keys_and_schema() {
        let mut v = serde_json::to_value(SimConfig::desk_default()).unwrap();
        assert!(serde_json::from_value::<SimConfig>(v.clone()).is_ok());
        v["extra"] = serde_json::json!(1);
        assert!(serde_json::from_value::<SimConfig>(v).is_err());
        let mut cfg = SimConfig::desk_default();
        cfg.schema = "v0".into();
        assert!(cfg.validate().is_err());
    }
}
