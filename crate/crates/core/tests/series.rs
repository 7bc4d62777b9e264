//! Correlation series: frozen value, moment-recursion cross-check and the
//! associativity of the triangle operation.

use nalgebra::DMatrix;
use spde::estimate::{corr_series, triangle_op, CorrSeriesConfig, TimeRule, TupleSpace};
use spde::simulate::{second_moments, SimConfig};
use spde::spectral::Bc;

#[test]
fn series_value_is_frozen_and_matches_moment_recursion() {
    let cfg = SimConfig { probes: vec![vec![0.4], vec![0.6]], ..SimConfig::desk_default() };
    let pairs = vec![(vec![0.4], vec![0.6]), (vec![0.5], vec![0.5])];
    let s = corr_series(&cfg.domain, cfg.bc, cfg.beta, &cfg.initial, cfg.lambda, cfg.t_end, &pairs, &CorrSeriesConfig::default()).unwrap();
    // computed once with the default series config and frozen
    assert!((s.values[0] - 0.721008370946).abs() < 1e-9, "{}", s.values[0]);
    assert!((s.values[1] - 0.821057431193).abs() < 1e-9, "{}", s.values[1]);
    assert!(s.tails.iter().all(|&t| t < 1e-3));

    let m = second_moments(&cfg).unwrap();
    let k = m.times.len() - 1;
    let rec = m.ln_probe_corr(k)[(0, 1)].exp();
    assert!((rec - s.values[0]).abs() < 3.0 * s.tails[0] + 1e-3 * s.values[0], "recursion {rec} vs series {}", s.values[0]);
}

#[test]
fn triangle_op_is_associative() {
    let sp = TupleSpace::new(1.0, Bc::Dirichlet, 0.5, 4).unwrap();
    let rule = TimeRule::default();
    let g = |t: f64| sp.g_tilde(t);
    let t = 0.3;
    let left_inner = |s: f64| triangle_op(&g, &g, &sp, s, &rule);
    let right_inner = |s: f64| triangle_op(&g, &g, &sp, s, &rule);
    let left: DMatrix<f64> = triangle_op(&left_inner, &g, &sp, t, &rule);
    let right: DMatrix<f64> = triangle_op(&g, &right_inner, &sp, t, &rule);
    let scale = left.amax();
    assert!(scale > 0.0);
    assert!((&left - &right).amax() < 1e-6 * scale, "{} vs {}", (&left - &right).amax(), scale);
}
