//! Fit bound constants on the unit interval against the resolvent series,
//! then print thresholds and a correlation bracket.

use spde::bounds::{fit_interval_constants, lambda_thresholds, FitConfig, ModelParams, Regularity};
use spde::spectral::Bc;
use std::time::Instant;

fn main() -> spde::Result<()> {
    let cfg = FitConfig::default();
    for bc in [Bc::Dirichlet, Bc::Neumann] {
        let start = Instant::now();
        let fit = fit_interval_constants(bc, Regularity::Lipschitz, &cfg)?;
        println!("{bc:?}: {:#?}", fit);
        let th = lambda_thresholds(&fit.consts, &ModelParams::anderson(1.0, cfg.beta), fit.consts.mu)?;
        println!("thresholds {th:?}  ({:.1?})", start.elapsed());
    }
    Ok(())
}
