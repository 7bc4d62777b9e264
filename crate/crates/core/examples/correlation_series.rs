//! Two-point correlation of the Anderson model from the iterated kernel
//! series, against the second-moment recursion, and the overlap kernel kO.

use spde::estimate::{corr_series, ko_quadrature, CorrSeriesConfig, KoConfig};
use spde::simulate::{second_moments, SimConfig};
use spde::spectral::Bc;

fn main() -> spde::Result<()> {
    let cfg = SimConfig { probes: vec![vec![0.4], vec![0.6]], ..SimConfig::desk_default() };
    let pairs = vec![(vec![0.4], vec![0.6])];
    let s = corr_series(&cfg.domain, cfg.bc, cfg.beta, &cfg.initial, cfg.lambda, cfg.t_end, &pairs, &CorrSeriesConfig::default())?;
    println!("series: {:.6} (tail {:.1e}), terms {:?}", s.values[0], s.tails[0], s.terms[0]);
    let m = second_moments(&cfg)?;
    println!("recursion: {:.6}", m.ln_probe_corr(m.times.len() - 1)[(0, 1)].exp());
    for t in [1e-3, 1e-2, 0.1, 1.0] {
        println!("kO({t}) = {:.6e}", ko_quadrature(&cfg.domain, Bc::Dirichlet, cfg.beta, t, &KoConfig::default())?);
    }
    Ok(())
}
