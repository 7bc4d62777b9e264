//! Fitted constants on the unit interval: held-out sandwich of the resolvent
//! series and the correlation bracket.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use spde::bounds::{
    corr_bounds, data_functional, fit_interval_constants, resolvent_envelope, BoundContext, BoundKind, FitConfig, ModelParams,
    Regularity,
};
use spde::estimate::resolvent_series;
use spde::geometry::Domain;
use spde::heatkernel::Side;
use spde::measure::InitialMeasure;
use spde::spectral::Bc;

#[test]
fn envelopes_sandwich_resolvent_and_bracket_correlation() {
    let cfg = FitConfig::default();
    let dom = Domain::unit_interval();
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    for bc in [Bc::Dirichlet, Bc::Neumann] {
        let fit = fit_interval_constants(bc, Regularity::Lipschitz, &cfg).unwrap();
        let c = fit.consts;
        let ctx = BoundContext::new(&dom, bc).unwrap().with_eps(cfg.eps).with_neumann_lower_kernel(bc == Bc::Neumann);
        let kind = |side| BoundKind { bc, side, regularity: Regularity::Lipschitz };
        let mut misses = 0;
        for _ in 0..100 {
            let t = rng.random_range(0.05..0.4);
            let lambda = rng.random_range(0.5..1.5);
            let p: Vec<f64> = (0..4).map(|_| rng.random_range(0.15..0.85)).collect();
            let k = resolvent_series(&dom, bc, cfg.beta, lambda, t, &[p[0]], &[p[1]], &[(vec![p[2]], vec![p[3]])], &cfg.series).unwrap()[0];
            let params = ModelParams::anderson(lambda, cfg.beta);
            let up = resolvent_envelope(kind(Side::Upper), &c, &params, &ctx, t, &[p[0]], &[p[1]], &[p[2]], &[p[3]]).unwrap();
            let lo = resolvent_envelope(kind(Side::Lower), &c, &params, &ctx, t, &[p[0]], &[p[1]], &[p[2]], &[p[3]]).unwrap();
            if !(lo <= k && k <= up) {
                misses += 1;
                eprintln!("{bc:?} t={t:.3} lambda={lambda:.3} {p:?}: {lo:e} <= {k:e} <= {up:e}");
            }
        }
        assert_eq!(misses, 0);
        let nu = InitialMeasure::dirac(0.5);
        for _ in 0..1000 {
            let t = rng.random_range(0.01..2.0);
            let lambda = rng.random_range(0.0..3.0);
            let x = rng.random_range(0.1 + 1e-9..0.9);
            let x2 = rng.random_range(0.1 + 1e-9..0.9);
            let params = ModelParams::anderson(lambda, cfg.beta);
            let d = |side, y: f64| data_functional(kind(side), &c, &ctx, &nu, t, &[y]).unwrap();
            let up = corr_bounds(kind(Side::Upper), &c, &params, &ctx, t, &[x], &[x2], [d(Side::Upper, x), d(Side::Upper, x2)]).unwrap();
            let lo = corr_bounds(kind(Side::Lower), &c, &params, &ctx, t, &[x], &[x2], [d(Side::Lower, x), d(Side::Lower, x2)]).unwrap();
            assert!(up >= lo, "{bc:?} t={t} lambda={lambda} x={x} x2={x2}: {up} < {lo}");
        }
    }
}
