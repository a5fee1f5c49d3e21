use linni::branch::{el_normalization, equation_residual, trace_branch};
use linni::constants::theta_star;
use linni::klt::{klt_with, log_spaced};
use linni::*;

#[test]
fn rigidity_regime_on_square() {
    let g = build_grid(&Domain::unit_square(), 16).unwrap();
    let p = 2.0;
    let prob = Problem::new(&g, Exponent::Power(p)).unwrap();
    let lambda = 0.5 * (1.0 - theta_star(p, 2)) * prob.lambda2() / (p - 1.0);
    let s = prob.threshold_quotient(lambda, &DescentOptions::default()).unwrap();
    assert!((s.mu_out - lambda).abs() <= 1e-6 * lambda);
    assert!(s.constant_deviation < 1e-6);
}

#[test]
fn branch_threshold_matches_variational_threshold() {
    let g = build_grid(&Domain::unit_interval(), 128).unwrap();
    let prob = Problem::new(&g, Exponent::Power(2.0)).unwrap();
    let bracket = prob.estimate_mu2(1e-4, &DescentOptions::default()).unwrap();
    let trace = trace_branch(&g, 2.0, 0.5 * prob.bifurcation(), 1.0).unwrap();
    let mu1 = estimate_mu1(&[trace]).unwrap();
    assert!(mu1 <= bracket.hi * 1.02);
    assert!(bracket.lo <= prob.bifurcation() * 1.02);
}

#[test]
fn branch_points_are_quotient_critical_points() {
    // A branch solution u of the equation is a critical point of the
    // quotient with value ‖u‖^{p-1}; its rescaling is the identity.
    let g = build_grid(&Domain::unit_interval(), 96).unwrap();
    let p = 2.0;
    let trace = trace_branch(&g, p, 5.0, 1.0).unwrap();
    let pt = trace.points.iter().rev().find(|q| q.relative_deviation() > 0.1).unwrap();
    let (mu, w) = el_normalization(&pt.solution, p, 1.0).unwrap();
    let (_, back) = el_normalization(&w, p, mu).unwrap();
    assert!(equation_residual(&back, p, pt.lambda).unwrap() < 1e-8);
}

#[test]
fn klt_sweep_is_monotone() {
    let g = build_grid(&Domain::unit_interval(), 128).unwrap();
    let prob = Problem::new(&g, Exponent::Power(2.0)).unwrap();
    let nus: Vec<f64> = log_spaced(2.0, 80.0, 6)
        .into_iter()
        .map(|mu| klt_with(&prob, mu, &DescentOptions::default()).unwrap().nu)
        .collect();
    for w in nus.windows(2) {
        assert!(w[1] >= w[0]);
    }
}

#[test]
fn heat_flow_from_random_data_relaxes() {
    let g = build_grid(&Domain::unit_interval(), 64).unwrap();
    let v0 = Field::new(&g, linni::rng::random_smooth_positive(&g, 11, 0.8)).unwrap();
    let tr = heat_flow_run(&g, 0.3, &v0, 0.5).unwrap();
    assert!(tr.worst_j_increase(1e-10, 1e-14) <= 0.0);
    assert!(tr.production_i.last().unwrap() < &(1e-3 * tr.production_i[0]));
}

#[test]
fn bounds_report_is_consistent_with_numerics() {
    let g = build_grid(&Domain::unit_square(), 24).unwrap();
    let l2 = spectral_gap(&g).unwrap().eigenvalue;
    let rep = rigidity_bounds(Exponent::Power(2.0), 2, l2, None).unwrap();
    assert!(rep.best_lower.unwrap() <= rep.upper);
    assert!((rep.upper - l2).abs() < 1e-12);
}
