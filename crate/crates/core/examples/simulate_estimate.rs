//! Small Anderson ensemble: mean against the heat flow, second moments,
//! a correlation and the energy.

use spde::estimate::{corr_estimate, l2_energy, moment_estimate};
use spde::heatkernel::{homogeneous_solution, HeatKernel};
use spde::simulate::{run_ensemble, SimConfig};

fn main() -> spde::Result<()> {
    let cfg = SimConfig {
        n_space: 64,
        dt: 1e-3,
        trajectories: 2000,
        output_times: vec![0.05, 0.1],
        probes: vec![vec![0.3], vec![0.5], vec![0.7]],
        ..SimConfig::desk_default()
    };
    let ens = run_ensemble(&cfg)?;
    let hk = HeatKernel::new(&cfg.domain, cfg.bc)?;
    for &t in &ens.times {
        for x in &cfg.probes {
            let m1 = moment_estimate(&ens, 1.0, t, x)?;
            let m2 = moment_estimate(&ens, 2.0, t, x)?;
            let j = homogeneous_solution(&hk, &cfg.initial, t, x)?;
            println!("t {t} x {:.1}: mean {:.4} ± {:.4} (heat flow {j:.4}), E u^2 {:.4}", x[0], m1.value, m1.se, m2.value);
        }
        let c = corr_estimate(&ens, t, &[0.3], &[0.7])?;
        let e = l2_energy(&ens, t)?;
        println!("t {t}: E u(.3)u(.7) = {:.4} ± {:.4}, energy {:.4} ± {:.4}", c.value, c.se, e.value, e.se);
    }
    Ok(())
}
