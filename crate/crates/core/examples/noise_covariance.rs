//! Cell-averaged Riesz covariance, its factorization and an empirical check.

use spde::geometry::Domain;
use spde::grid::Grid;
use spde::noise::{build_covariance, factorize, fill_normals, StreamKey, CLIP_TOL};

fn main() -> spde::Result<()> {
    let grid = Grid::new(&Domain::unit_interval(), 32)?;
    for beta in [0.2, 0.5, 0.9] {
        let cov = build_covariance(&grid, beta)?;
        let f = factorize(&cov, CLIP_TOL)?;
        let n = f.dim();
        let samples = 4000;
        let mut emp = nalgebra::DMatrix::<f64>::zeros(n, n);
        let mut z = vec![0.0; n];
        for s in 0..samples {
            fill_normals(StreamKey { seed: 1, trajectory: s, step: 0 }, &mut z);
            let x = &f.factor * nalgebra::DVector::from_column_slice(&z);
            emp += &x * x.transpose();
        }
        emp /= samples as f64;
        let err = (&emp - &f.cov).amax() / f.cov.amax();
        println!(
            "beta {beta}: cholesky {}, clipped {:.1e}, reconstruction {:.1e}, empirical rel. error {err:.3}",
            f.cholesky,
            f.clipped,
            f.reconstruction_error()
        );
    }
    Ok(())
}
