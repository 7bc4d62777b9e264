//! Run directories written by `spde simulate`.
//!
//! | file | content |
//! |---|---|
//! | `metadata.json` | [`RunMetadata`]: config echo, hash, seed, times, probes, cell centers, diagnostics |
//! | `probes.csv` | `time, probe, x..., mean, se, m2, m2_se` |
//! | `energy.csv` | `time, energy, se` |
//! | `stats_KKKK.csv` | per output time `K`: `x..., mean, se, m2, m2_se` over cells (kept fields) or probes |
//! | `probes.bin` | rank 3 (time, trajectory, probe) |
//! | `norms.bin` | rank 2 (time, trajectory) of `∫ u² dx` |
//! | `fields.bin` | rank 3 (trajectory, time, cell), only with `keep_fields` |
//!
//! Binary files use the layout of [`crate::simulate::binary`]. Everything
//! except `created_unix` in the metadata is a function of the config.

use super::output::{coord_headers, create_file, Table};
use super::parse_json;
use crate::error::{invalid, Error, Result};
use crate::estimate::{l2_energy, mean_se};
use crate::simulate::binary::{read_array, write_array};
use crate::simulate::{Ensemble, SimConfig};
use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};
use std::path::Path;

pub const RUN_SCHEMA: &str = "spde.run/1";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunMetadata {
    pub schema: String,
    pub created_unix: u64,
    pub config: SimConfig,
    pub config_hash: u64,
    pub seed: u64,
    pub trajectories: usize,
    pub rejected: usize,
    pub times: Vec<f64>,
    pub probes: Vec<Vec<f64>>,
    pub centers: Vec<Vec<f64>>,
    pub cell_volume: f64,
    pub negative_fraction: Vec<f64>,
    pub trajectory_ids: Vec<u64>,
    pub files: Vec<String>,
}

fn column_stats(values: impl Iterator<Item = f64> + Clone) -> Result<[f64; 4]> {
    let v: Vec<f64> = values.collect();
    let sq: Vec<f64> = v.iter().map(|u| u * u).collect();
    let (mean, se) = mean_se(&v)?;
    let (m2, m2_se) = mean_se(&sq)?;
    Ok([mean, se, m2, m2_se])
}

fn stats_table(path: &Path, points: &[Vec<f64>], samples: &DMatrix<f64>) -> Result<()> {
    let d = points.first().map_or(1, |p| p.len());
    let mut header = coord_headers("x", d);
    header.extend(["mean", "se", "m2", "m2_se"].map(String::from));
    let mut t = Table::new(create_file(path)?, &header)?;
    for (j, p) in points.iter().enumerate() {
        let mut row = p.clone();
        row.extend(column_stats(samples.column(j).iter().cloned())?);
        t.row(&row)?;
    }
    t.finish()
}

/// Writes `ens` into `dir` (created if missing).
pub fn save_run(ens: &Ensemble, dir: &Path) -> Result<RunMetadata> {
    std::fs::create_dir_all(dir).map_err(|e| Error::Validation(format!("cannot create {}: {e}", dir.display())))?;
    let (nt, m, np) = (ens.times.len(), ens.len(), ens.probes.len());
    let mut files = vec!["probes.csv".to_string(), "energy.csv".to_string()];

    let d = ens.config.domain.dim();
    let mut header = vec!["time".to_string(), "probe".to_string()];
    header.extend(coord_headers("x", d));
    header.extend(["mean", "se", "m2", "m2_se"].map(String::from));
    let mut probes = Table::new(create_file(&dir.join("probes.csv"))?, &header)?;
    for (k, &t) in ens.times.iter().enumerate() {
        for (j, x) in ens.probes.iter().enumerate() {
            let mut row = vec![t, j as f64];
            row.extend(x);
            row.extend(column_stats(ens.probe_values[k].column(j).iter().cloned())?);
            probes.row(&row)?;
        }
    }
    probes.finish()?;

    let mut energy = Table::new(create_file(&dir.join("energy.csv"))?, &["time", "energy", "se"].map(String::from))?;
    for &t in &ens.times {
        match l2_energy(ens, t) {
            Ok(e) => energy.row(&[t, e.value, e.se])?,
            Err(Error::Numerical(_)) => energy.row(&[t, 0.0, 0.0])?,
            Err(e) => return Err(e),
        }
    }
    energy.finish()?;

    for (k, _) in ens.times.iter().enumerate() {
        let name = format!("stats_{k:04}.csv");
        match &ens.fields {
            Some(f) => stats_table(&dir.join(&name), &ens.centers, &f[k])?,
            None if np > 0 => stats_table(&dir.join(&name), &ens.probes, &ens.probe_values[k])?,
            None => continue,
        }
        files.push(name);
    }

    let mut pv = Vec::with_capacity(nt * m * np);
    for p in &ens.probe_values {
        for j in 0..m {
            pv.extend(p.row(j).iter());
        }
    }
    write_array(create_file(&dir.join("probes.bin"))?, &[nt, m, np], &pv)?;
    let norms: Vec<f64> = ens.sq_norms.iter().flatten().cloned().collect();
    write_array(create_file(&dir.join("norms.bin"))?, &[nt, m], &norms)?;
    files.push("probes.bin".into());
    files.push("norms.bin".into());
    if ens.fields.is_some() {
        ens.write_fields(create_file(&dir.join("fields.bin"))?)?;
        files.push("fields.bin".into());
    }

    let meta = RunMetadata {
        schema: RUN_SCHEMA.into(),
        created_unix: std::time::SystemTime::now().duration_since(std::time::UNIX_EPOCH).map_or(0, |d| d.as_secs()),
        config: ens.config.clone(),
        config_hash: ens.config_hash,
        seed: ens.seed,
        trajectories: m,
        rejected: ens.rejected,
        times: ens.times.clone(),
        probes: ens.probes.clone(),
        centers: ens.centers.clone(),
        cell_volume: ens.cell_volume,
        negative_fraction: ens.negative_fraction.clone(),
        trajectory_ids: ens.trajectory_ids.clone(),
        files,
    };
    let text = serde_json::to_string_pretty(&meta).map_err(|e| Error::Numerical(format!("json: {e}")))?;
    std::fs::write(dir.join("metadata.json"), text + "\n")?;
    Ok(meta)
}

fn read_bin(path: &Path, dims: &[usize]) -> Result<Vec<f64>> {
    let f = std::fs::File::open(path).map_err(|e| Error::Validation(format!("cannot open {}: {e}", path.display())))?;
    let a = read_array(std::io::BufReader::new(f))?;
    if a.dims != dims {
        return invalid(format!("{} has dims {:?}, metadata implies {dims:?}", path.display(), a.dims));
    }
    Ok(a.values)
}

/// Reads a run directory back into an [`Ensemble`].
pub fn load_run(dir: &Path) -> Result<Ensemble> {
    let meta: RunMetadata = parse_json(&super::read_text(&dir.join("metadata.json"))?, "metadata.json")?;
    if meta.schema != RUN_SCHEMA {
        return invalid(format!("run schema must be \"{RUN_SCHEMA}\", got \"{}\"", meta.schema));
    }
    let (nt, m, np, n) = (meta.times.len(), meta.trajectory_ids.len(), meta.probes.len(), meta.centers.len());
    let pv = read_bin(&dir.join("probes.bin"), &[nt, m, np])?;
    let probe_values = (0..nt).map(|k| DMatrix::from_row_slice(m, np, &pv[k * m * np..(k + 1) * m * np])).collect();
    let norms = read_bin(&dir.join("norms.bin"), &[nt, m])?;
    let sq_norms = norms.chunks(m.max(1)).take(nt).map(|c| c.to_vec()).collect();
    let fpath = dir.join("fields.bin");
    let fields = if fpath.exists() {
        let raw = read_bin(&fpath, &[m, nt, n])?;
        Some((0..nt).map(|k| DMatrix::from_fn(m, n, |j, i| raw[(j * nt + k) * n + i])).collect())
    } else {
        None
    };
    Ok(Ensemble {
        config: meta.config,
        config_hash: meta.config_hash,
        seed: meta.seed,
        times: meta.times,
        probes: meta.probes,
        centers: meta.centers,
        cell_volume: meta.cell_volume,
        trajectory_ids: meta.trajectory_ids,
        probe_values,
        sq_norms,
        fields,
        rejected: meta.rejected,
        negative_fraction: meta.negative_fraction,
    })
}
