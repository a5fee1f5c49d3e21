//! Neumann spectral gap and Schrödinger ground states.

use crate::error::{Error, Result};
use crate::grid::{Field, Grid};
use crate::linalg::{conjugate_gradient, remove_mean, wdot, wnorm};

const MAX_OUTER: usize = 500;
const CG_TOL: f64 = 1e-12;
const TARGET_RESIDUAL: f64 = 1e-10;
const ACCEPT_RESIDUAL: f64 = 1e-8;

/// Eigenvalue, eigenfunction and the residual `‖Af - λf‖₂/‖f‖₂`.
#[derive(Debug, Clone)]
pub struct EigenPair<'g> {
    pub eigenvalue: f64,
    pub eigenfunction: Field<'g>,
    pub residual: f64,
    pub iterations: usize,
}

/// Residual of `(-L + V) x = λ x` in the weighted norm, with `‖x‖ = 1`.
fn residual(grid: &Grid, potential: Option<&[f64]>, x: &[f64], lambda: f64) -> f64 {
    let mut ax = vec![0.0; x.len()];
    grid.laplacian(x, &mut ax);
    for i in 0..x.len() {
        ax[i] = -ax[i] + potential.map_or(0.0, |v| v[i] * x[i]) - lambda * x[i];
    }
    wnorm(grid.weights(), &ax) / wnorm(grid.weights(), x)
}

fn normalize(w: &[f64], x: &mut [f64]) {
    let n = wnorm(w, x);
    x.iter_mut().for_each(|v| *v /= n);
}

/// Smallest nonzero eigenvalue of `-L`, by inverse iteration with
/// conjugate-gradient solves on the mean-zero subspace.
pub fn spectral_gap(grid: &Grid) -> Result<EigenPair<'_>> {
    let w = grid.weights();
    let n = grid.len();
    // Start from the first coordinate: it is orthogonal to the second axis
    // modes on a square, which keeps the iterate in one eigenvector family.
    let mut x: Vec<f64> = (0..n).map(|i| grid.point(i)[0]).collect();
    remove_mean(w, &mut x);
    normalize(w, &mut x);
    let apply = |u: &[f64], out: &mut [f64]| {
        grid.laplacian(u, out);
        out.iter_mut().for_each(|v| *v = -*v);
    };
    let mut lambda = grid.energy(&x);
    let mut res = f64::INFINITY;
    for it in 1..=MAX_OUTER {
        let mut y: Vec<f64> = x.iter().map(|v| v / lambda.max(1e-300)).collect();
        conjugate_gradient(apply, w, &x, &mut y, CG_TOL, 20 * n + 100, true)?;
        remove_mean(w, &mut y);
        normalize(w, &mut y);
        x = y;
        lambda = grid.energy(&x);
        res = residual(grid, None, &x, lambda);
        if res <= TARGET_RESIDUAL * lambda.max(1.0) {
            return Ok(finish_gap(grid, x, lambda, res, it));
        }
    }
    if res <= ACCEPT_RESIDUAL {
        return Ok(finish_gap(grid, x, lambda, res, MAX_OUTER));
    }
    Err(Error::NonConvergence {
        solver: "spectral gap inverse iteration",
        iterations: MAX_OUTER,
        residual: res,
    })
}

fn finish_gap(grid: &Grid, mut x: Vec<f64>, lambda: f64, res: f64, it: usize) -> EigenPair<'_> {
    if x[0] < 0.0 {
        x.iter_mut().for_each(|v| *v = -*v);
    }
    EigenPair {
        eigenvalue: lambda,
        eigenfunction: Field::new(grid, x).expect("finite eigenvector"),
        residual: res,
        iterations: it,
    }
}

/// Lowest eigenvalue of `-Δ + sign·φ` with Neumann conditions; the
/// eigenfunction is positive and normalized in `L²`.
pub fn schrodinger_ground_state<'g>(
    grid: &'g Grid,
    potential: &Field<'_>,
    sign: f64,
) -> Result<EigenPair<'g>> {
    if sign != 1.0 && sign != -1.0 {
        return Err(Error::InvalidParameter(format!("sign must be ±1, got {sign}")));
    }
    if potential.values().len() != grid.len() {
        return Err(Error::InvalidParameter("potential lives on another grid".into()));
    }
    let w = grid.weights();
    let v: Vec<f64> = potential.values().iter().map(|p| sign * p).collect();
    let vmin = v.iter().copied().fold(f64::INFINITY, f64::min);
    let vmax = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let rayleigh = |x: &[f64]| {
        let pot: f64 = (0..x.len()).map(|i| w[i] * v[i] * x[i] * x[i]).sum();
        (grid.energy(x) + pot) / wdot(w, x, x)
    };
    let mut x = vec![1.0; grid.len()];
    normalize(w, &mut x);
    let mut lambda = rayleigh(&x);
    let mut res = residual(grid, Some(&v), &x, lambda);
    let scale = 1.0 + vmax.abs().max(vmin.abs());
    if res <= TARGET_RESIDUAL * scale {
        return Ok(finish_ground(grid, x, lambda, res, 0));
    }
    // The first shift keeps the operator positive definite; once the iterate
    // is close, the shift is moved next to the current estimate.
    let mut shift = vmin - 1.0;
    let mut refined = false;
    let mut lu = factor_shifted(grid, &v, shift)?;
    for it in 1..=MAX_OUTER {
        let mut y: Vec<f64> = x.iter().zip(w).map(|(x, w)| x * w).collect();
        lu.solve_in_place(&mut y);
        normalize(w, &mut y);
        x = y;
        lambda = rayleigh(&x);
        res = residual(grid, Some(&v), &x, lambda);
        if res <= TARGET_RESIDUAL * scale {
            return Ok(finish_ground(grid, x, lambda, res, it));
        }
        if !refined && res <= 1e-4 * scale {
            let candidate = lambda - 10.0 * res - 1e-6 * scale;
            if candidate > shift {
                shift = candidate;
                lu = factor_shifted(grid, &v, shift)?;
            }
            refined = true;
        }
    }
    if res <= ACCEPT_RESIDUAL * scale {
        return Ok(finish_ground(grid, x, lambda, res, MAX_OUTER));
    }
    Err(Error::NonConvergence {
        solver: "ground state inverse iteration",
        iterations: MAX_OUTER,
        residual: res,
    })
}

fn factor_shifted(grid: &Grid, v: &[f64], shift: f64) -> Result<crate::linalg::BandLu> {
    let diag: Vec<f64> = v.iter().map(|v| v - shift).collect();
    grid.stiffness_plus_diagonal(&diag).factor()
}

fn finish_ground(grid: &Grid, mut x: Vec<f64>, lambda: f64, res: f64, it: usize) -> EigenPair<'_> {
    if grid.integrate(&x) < 0.0 {
        x.iter_mut().for_each(|v| *v = -*v);
    }
    EigenPair {
        eigenvalue: lambda,
        eigenfunction: Field::new(grid, x).expect("finite eigenvector"),
        residual: res,
        iterations: it,
    }
}

/// Both sides of `(∫|∇f|²)² ≤ ∫|Δf|² ∫f²`.
pub fn check_lin_interp_inequality(f: &Field) -> (f64, f64) {
    let g = f.grid();
    let u = f.values();
    let mut lu = vec![0.0; u.len()];
    g.laplacian(u, &mut lu);
    let e = g.energy(u);
    let w = g.weights();
    (e * e, wdot(w, &lu, &lu) * wdot(w, u, u))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{build_grid, Domain};
    use crate::rng::random_smooth_positive;
    use std::f64::consts::PI;

    #[test]
    fn interval_gap_and_mode() {
        let g = build_grid(&Domain::unit_interval(), 256).unwrap();
        let pair = spectral_gap(&g).unwrap();
        assert!((pair.eigenvalue / (PI * PI) - 1.0).abs() < 2e-3);
        // Exact discrete eigenvalue of the mirror-ghost stencil.
        let h = g.spacing()[0];
        let exact = 4.0 / (h * h) * (PI * h / 2.0).sin().powi(2);
        assert!((pair.eigenvalue - exact).abs() < 1e-9 * exact);
        let u = pair.eigenfunction.values();
        let c = (2.0f64).sqrt();
        for (i, v) in u.iter().enumerate() {
            assert!((v - c * (PI * g.point(i)[0]).cos()).abs() < 1e-3);
        }
        assert!(pair.eigenfunction.mean().abs() < 1e-8);
        assert!(pair.residual <= 1e-8);
    }

    #[test]
    fn gap_converges_at_second_order() {
        let err = |n| {
            let g = build_grid(&Domain::unit_interval(), n).unwrap();
            (spectral_gap(&g).unwrap().eigenvalue - PI * PI).abs()
        };
        let ratio = err(33) / err(65);
        assert!((ratio - 4.0).abs() < 0.3, "ratio {ratio}");
    }

    #[test]
    fn radial_disk_gap() {
        let g = build_grid(&Domain::radial_ball(2, 1.0), 256).unwrap();
        let j11 = 3.831_705_970_207_512_f64;
        let pair = spectral_gap(&g).unwrap();
        assert!((pair.eigenvalue / (PI * j11 * j11) - 1.0).abs() < 5e-3);
    }

    #[test]
    fn lin_interp_equality_for_eigenfunction() {
        let g = build_grid(&Domain::unit_interval(), 128).unwrap();
        let pair = spectral_gap(&g).unwrap();
        let (l, r) = check_lin_interp_inequality(&pair.eigenfunction);
        assert!((l - r).abs() <= 1e-8 * r);
        let c = Field::constant(&g, 2.0);
        assert_eq!(check_lin_interp_inequality(&c), (0.0, 0.0));
    }

    #[test]
    fn lin_interp_holds_for_random_fields() {
        let g = build_grid(&Domain::unit_square(), 16).unwrap();
        for seed in 0..20 {
            let f = Field::new(&g, random_smooth_positive(&g, seed, 0.7)).unwrap();
            let (l, r) = check_lin_interp_inequality(&f);
            assert!(l <= r * (1.0 + 1e-12));
        }
    }

    #[test]
    fn poincare_type_inequality_on_mean_zero_fields() {
        let g = build_grid(&Domain::unit_square(), 16).unwrap();
        let lambda2 = spectral_gap(&g).unwrap().eigenvalue;
        for seed in 0..10 {
            let mut u = random_smooth_positive(&g, seed, 0.5);
            remove_mean(g.weights(), &mut u);
            let mut lu = vec![0.0; u.len()];
            g.laplacian(&u, &mut lu);
            let lap2 = wdot(g.weights(), &lu, &lu);
            assert!(lap2 >= lambda2 * g.energy(&u) * (1.0 - 1e-12));
        }
    }

    #[test]
    fn zero_potential_ground_state() {
        for g in [
            build_grid(&Domain::unit_interval(), 64).unwrap(),
            build_grid(&Domain::unit_square(), 12).unwrap(),
            build_grid(&Domain::radial_ball(3, 1.0), 40).unwrap(),
        ] {
            let pair = schrodinger_ground_state(&g, &Field::constant(&g, 0.0), -1.0).unwrap();
            assert!(pair.eigenvalue.abs() < 1e-10);
            let u = pair.eigenfunction.values();
            assert!(u.iter().all(|v| (v - 1.0).abs() < 1e-10));
        }
    }

    #[test]
    fn constant_potential_shifts_spectrum() {
        let g = build_grid(&Domain::unit_interval(), 64).unwrap();
        let pair = schrodinger_ground_state(&g, &Field::constant(&g, 3.5), -1.0).unwrap();
        assert!((pair.eigenvalue + 3.5).abs() < 1e-12);
    }

    #[test]
    fn small_cosine_potential_is_second_order() {
        let g = build_grid(&Domain::unit_interval(), 128).unwrap();
        let eps = 1e-2;
        let phi = Field::from_fn(&g, |x| eps * (PI * x[0]).cos());
        let pair = schrodinger_ground_state(&g, &phi, -1.0).unwrap();
        assert!(pair.eigenvalue < 0.0);
        // Second-order perturbation: -Σ |<φ,1><φ,u_k>|²/λ_k = -(ε²/2)/π².
        let expected = -(eps * eps / 2.0) / (PI * PI);
        assert!((pair.eigenvalue / expected - 1.0).abs() < 0.05);
        assert!(pair.eigenfunction.min() > 0.0);
    }

    #[test]
    fn peaked_potential_converges() {
        let g = build_grid(&Domain::unit_interval(), 256).unwrap();
        let phi = Field::from_fn(&g, |x| 80.0 * (-(x[0] / 0.05).powi(2)).exp());
        let pair = schrodinger_ground_state(&g, &phi, -1.0).unwrap();
        assert!(pair.residual < 1e-8);
        let plus = schrodinger_ground_state(&g, &phi, 1.0).unwrap();
        assert!(plus.eigenvalue > 0.0 && pair.eigenvalue < 0.0);
    }
}
