//! Classifies initial data by integrability against the boundary weight.
//! Only C^{1,α} Dirichlet domains admit data that is merely Φ₁-integrable.

use spde::bounds::{admissibility, Regularity};
use spde::geometry::Domain;
use spde::measure::{DensityProfile, InitialMeasure};
use spde::spectral::Bc;

fn main() -> spde::Result<()> {
    let dom = Domain::unit_interval();
    let cases = [
        ("dirac at 0.3", InitialMeasure::dirac(0.3)),
        ("uniform", InitialMeasure::uniform(1.0)),
        ("sin^-1.5", InitialMeasure::density(DensityProfile::SinPower { exponent: 1.5 })),
        ("sin^-2.5", InitialMeasure::density(DensityProfile::SinPower { exponent: 2.5 })),
    ];
    for (name, nu) in &cases {
        for (bc, reg) in [(Bc::Dirichlet, Regularity::C1Alpha), (Bc::Dirichlet, Regularity::Lipschitz), (Bc::Neumann, Regularity::Lipschitz)] {
            let class = admissibility(&dom, bc, reg, nu)?;
            println!("{name:>14} {bc:?} {reg:?}: {class:?}");
        }
    }
    Ok(())
}
