//! Energy growth in the noise level from the second-moment recursion and
//! the fitted excitation index.

use spde::bounds::{excitation_index, Regime};
use spde::estimate::excitation_fit_ln;
use spde::measure::InitialMeasure;
use spde::simulate::{second_moments, SimConfig};
use spde::spectral::Bc;

fn main() -> spde::Result<()> {
    let lambdas = [0.05, 0.1, 0.2, 0.4];
    let mut ln_e = Vec::new();
    for &lambda in &lambdas {
        let cfg = SimConfig {
            bc: Bc::Neumann,
            lambda,
            initial: InitialMeasure::uniform(1.0),
            n_space: 32,
            dt: 1e-3,
            t_end: 1.0,
            probes: vec![],
            ..SimConfig::desk_default()
        };
        let m = second_moments(&cfg)?;
        let k = m.times.len() - 1;
        ln_e.push(m.ln_energy(k));
        println!("lambda {lambda}: ln energy {:.6}", m.ln_energy(k));
    }
    let fit = excitation_fit_ln(&lambdas, &ln_e, Regime::SmallLambda)?;
    println!("fitted index {:.3} (predicted {})", fit.slope, excitation_index(Regime::SmallLambda, Bc::Neumann, 0.5)?);
    Ok(())
}
