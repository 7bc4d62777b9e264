//! Renewal functions: closed-form terms, quadrature terms and the
//! resolvent of the whole series.

use spde::renewal::{hhat_n, hstar_n_closed, htilde_n, ln_khat_lambda_resolvent, series_tail, ConvGrid};

fn main() -> spde::Result<()> {
    let rho = 0.5;
    println!("{:>3} {:>14} {:>14} {:>14}", "n", "hstar", "hhat", "htilde");
    for n in 0..5 {
        let t = 1.0;
        println!("{n:>3} {:>14.8e} {:>14.8e} {:>14.8e}", hstar_n_closed(rho, n, t)?, hhat_n(rho, n, t, 1e-10)?, htilde_n(rho, n, t, 1e-10)?);
    }
    let grid = ConvGrid::new(rho, 5.0, &[0.5, 1.0, 2.0, 5.0])?;
    let ln_k = ln_khat_lambda_resolvent(&grid, 1.0);
    for t in [0.5, 1.0, 2.0, 5.0] {
        let i = grid.index_of(t).expect("grid point");
        // the tail is the h* upper bound, loose at large t
        println!("K(t = {t}) = {:.6e}, tail beyond n = 6: {:.2e}", ln_k[i].exp(), series_tail(rho, 1.0, t, 6)?);
    }
    Ok(())
}
