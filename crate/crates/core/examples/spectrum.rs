//! Leading Dirichlet and Neumann eigenpairs on the supported domains.

use spde::geometry::Domain;
use spde::spectral::{first_bessel_zero, leading_eigenpair, Bc};

fn main() -> spde::Result<()> {
    let domains = [
        Domain::unit_interval(),
        Domain::cube(2, 1.0),
        Domain::ball(2, 1.0),
        Domain::ball(3, 1.0),
        Domain::annulus(0.5, 1.0),
    ];
    for dom in &domains {
        let eig = leading_eigenpair(dom, Bc::Dirichlet)?;
        println!("{dom:?}: mu1 = {:.10}, sup phi1 = {:.6}", eig.mu1, eig.sup_phi1());
    }
    let (z0, _) = first_bessel_zero(0.0)?;
    println!("disc check: z0^2 = {:.10}", z0 * z0);
    println!("Neumann interval: mu1 = {}", leading_eigenpair(&Domain::unit_interval(), Bc::Neumann)?.mu1);
    Ok(())
}
