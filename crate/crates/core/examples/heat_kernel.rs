//! Dirichlet heat kernel on [0, 1]: eigenfunction and image sums agree, and
//! the fitted Gaussian envelopes bracket it.

use spde::geometry::Domain;
use spde::heatkernel::{fit_interval_envelope, HeatKernel, Side};
use spde::spectral::Bc;

fn main() -> spde::Result<()> {
    let hk = HeatKernel::new(&Domain::unit_interval(), Bc::Dirichlet)?;
    println!("{:>6} {:>6} {:>16} {:>16}", "t", "y", "eigen", "images");
    for t in [2e-3, 1e-2, 0.1, 1.0] {
        for y in [0.1, 0.5, 0.9] {
            println!("{t:>6} {y:>6} {:>16.10e} {:>16.10e}", hk.eigen_sum(t, 0.5, y), hk.image_sum(t, 0.5, y));
        }
    }
    for side in [Side::Upper, Side::Lower] {
        println!("{side:?} envelope: {:?}", fit_interval_envelope(1.0, Bc::Dirichlet, side)?);
    }
    let neumann = HeatKernel::new(&Domain::unit_interval(), Bc::Neumann)?;
    println!("Neumann mass at t = 0.3: {:.12}", neumann.mass(0.3, &[0.2]));
    Ok(())
}
