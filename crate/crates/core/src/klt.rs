//! Keller-Lieb-Thirring duality: the optimal potential built from a
//! minimizer of `λ(μ)` has a Schrödinger ground state energy reproducing
//! `λ(μ)`.
//!
//! With `ε = ε(p)` the admissible potentials satisfy `‖φ^ε‖_q^ε = μ`,
//! `q = (p+1)/|p-1|`, and `ν(μ) = -ε λ₁(-Δ - εφ)`.

use std::io::Write;

use crate::constants::Exponent;
use crate::error::{invalid, Result};
use crate::grid::{Field, Grid};
use crate::spectral::schrodinger_ground_state;
use crate::variational::{DescentOptions, Problem};

#[derive(Debug, Clone)]
pub struct KltResult<'g> {
    pub mu: f64,
    pub nu: f64,
    pub lambda_of_mu: f64,
    pub potential: Field<'g>,
    pub q: f64,
    /// `‖φ^ε‖_q^ε`, equal to `mu` for an admissible potential.
    pub holder_norm: f64,
    /// Relative deviation of the minimizer from its mean.
    pub constant_deviation: f64,
}

impl KltResult<'_> {
    pub fn relative_gap(&self) -> f64 {
        (self.nu - self.lambda_of_mu).abs() / self.lambda_of_mu.abs()
    }
}

fn setup(p: f64) -> Result<(f64, f64)> {
    if !(p > 0.0 && p.is_finite()) || p == 1.0 {
        return invalid(format!("p = {p} must be positive, finite and different from 1"));
    }
    let eps = if p > 1.0 { 1.0 } else { -1.0 };
    Ok((eps, (p + 1.0) / (p - 1.0).abs()))
}

/// `φ = μ (u/‖u‖_{p+1})^{p-1}`.
pub fn optimal_potential<'g>(u: &Field<'g>, mu: f64, p: f64) -> Result<Field<'g>> {
    setup(p)?;
    if !(mu > 0.0) {
        return invalid("μ must be positive");
    }
    let n = u.grid().lp_norm(u.values(), p + 1.0)?;
    if n == 0.0 {
        return invalid("the zero field has no optimal potential");
    }
    if p < 1.0 && u.min() <= 0.0 {
        return invalid("p < 1 needs a strictly positive field");
    }
    Ok(u.map(|v| mu * (v.abs() / n).powf(p - 1.0)))
}

/// `‖φ^ε‖_q^ε`.
pub fn holder_norm(phi: &Field, p: f64) -> Result<f64> {
    let (eps, q) = setup(p)?;
    let g = phi.grid();
    let powered: Vec<f64> = phi.values().iter().map(|v| v.powf(eps)).collect();
    Ok(g.lp_norm(&powered, q)?.powf(eps))
}

/// Hölder pairing. For `p > 1`: `(∫φu², ‖φ‖_q ‖u‖²_{p+1})`. For `p < 1`:
/// `(∫u^{p+1}, (∫φu²)^{(p+1)/2} ‖φ⁻¹‖_q^{(p+1)/2})`. The first entry never
/// exceeds the second.
pub fn holder_pairing_check(phi: &Field, u: &Field, p: f64) -> Result<(f64, f64)> {
    let (_, q) = setup(p)?;
    if phi.min() < 0.0 {
        return invalid("φ must be nonnegative");
    }
    let g = phi.grid();
    let phi_u2: Vec<f64> = phi.values().iter().zip(u.values()).map(|(f, u)| f * u * u).collect();
    let pairing = g.integrate(&phi_u2);
    if p > 1.0 {
        let rhs = g.lp_norm(phi.values(), q)? * g.lp_norm(u.values(), p + 1.0)?.powi(2);
        Ok((pairing, rhs))
    } else {
        if phi.min() <= 0.0 {
            return invalid("p < 1 needs a strictly positive φ");
        }
        let inv: Vec<f64> = phi.values().iter().map(|f| 1.0 / f).collect();
        let half = 0.5 * (p + 1.0);
        let lhs = g.lp_norm(u.values(), p + 1.0)?.powf(p + 1.0);
        Ok((lhs, pairing.powf(half) * g.lp_norm(&inv, q)?.powf(half)))
    }
}

/// Computes `λ(μ)` variationally, builds the optimal potential from the
/// minimizer and compares with the ground state energy.
pub fn klt_duality_check(grid: &Grid, p: f64, mu: f64) -> Result<KltResult<'_>> {
    let problem = Problem::new(grid, Exponent::Power(p))?;
    klt_with(&problem, mu, &DescentOptions::default())
}

pub fn klt_with<'g>(problem: &Problem<'g>, mu: f64, opts: &DescentOptions) -> Result<KltResult<'g>> {
    let p = match problem.exponent {
        Exponent::Power(p) => p,
        Exponent::LogSobolev => return invalid("the duality check needs a power exponent"),
    };
    let (eps, q) = setup(p)?;
    let solve = problem.lambda_of_mu(mu, opts)?;
    let u = solve.minimizer.map(f64::abs);
    let potential = optimal_potential(&u, mu, p)?;
    let ground = schrodinger_ground_state(problem.grid, &potential, -eps)?;
    Ok(KltResult {
        mu,
        nu: -eps * ground.eigenvalue,
        lambda_of_mu: solve.mu_out,
        holder_norm: holder_norm(&potential, p)?,
        potential,
        q,
        constant_deviation: solve.constant_deviation,
    })
}

/// `count` log-spaced values covering `[lo, hi]`.
pub fn log_spaced(lo: f64, hi: f64, count: usize) -> Vec<f64> {
    if count == 1 {
        return vec![lo];
    }
    let (a, b) = (lo.ln(), hi.ln());
    (0..count)
        .map(|k| (a + (b - a) * k as f64 / (count - 1) as f64).exp())
        .collect()
}

/// Rows `μ, ν, λ(μ), relative gap`.
pub fn write_klt_csv<W: Write>(rows: &[KltResult<'_>], out: &mut W, comment: Option<&str>) -> Result<()> {
    if let Some(c) = comment {
        writeln!(out, "# {c}")?;
    }
    writeln!(out, "mu,nu,lambda_of_mu,relative_gap")?;
    for r in rows {
        writeln!(out, "{},{},{},{}", r.mu, r.nu, r.lambda_of_mu, r.relative_gap())?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{build_grid, Domain};
    use crate::rng::random_smooth_positive;
    use proptest::prelude::*;

    #[test]
    fn constant_field_gives_constant_potential() {
        let g = build_grid(&Domain::unit_interval(), 32).unwrap();
        for p in [0.5, 2.0, 3.0] {
            let phi = optimal_potential(&Field::constant(&g, 2.5), 4.0, p).unwrap();
            assert!(phi.values().iter().all(|v| (v - 4.0).abs() < 1e-12));
            assert!((holder_norm(&phi, p).unwrap() - 4.0).abs() < 1e-12);
        }
        assert!(optimal_potential(&Field::constant(&g, 0.0), 1.0, 2.0).is_err());
    }

    #[test]
    fn potential_is_scale_free_and_admissible() {
        let g = build_grid(&Domain::unit_interval(), 64).unwrap();
        let u = Field::new(&g, random_smooth_positive(&g, 9, 0.6)).unwrap();
        for p in [0.5, 2.0] {
            let a = optimal_potential(&u, 7.0, p).unwrap();
            let b = optimal_potential(&u.map(|v| 3.0 * v), 7.0, p).unwrap();
            for (x, y) in a.values().iter().zip(b.values()) {
                assert!((x - y).abs() < 1e-12 * x);
            }
            assert!((holder_norm(&a, p).unwrap() - 7.0).abs() < 1e-8 * 7.0);
            let (l, r) = holder_pairing_check(&a, &u, p).unwrap();
            assert!((l - r).abs() < 1e-8 * r, "p = {p}: {l} {r}");
        }
    }

    #[test]
    fn constant_potential_shifts_spectrum() {
        let g = build_grid(&Domain::unit_interval(), 64).unwrap();
        let phi = Field::constant(&g, 3.0);
        let gs = schrodinger_ground_state(&g, &phi, -1.0).unwrap();
        assert!((gs.eigenvalue + 3.0).abs() < 1e-10);
    }

    #[test]
    fn duality_below_and_above_threshold() {
        let g = build_grid(&Domain::unit_interval(), 128).unwrap();
        let problem = Problem::new(&g, Exponent::Power(2.0)).unwrap();
        let b = problem.bifurcation();
        let opts = DescentOptions::default();
        let low = klt_with(&problem, 0.5 * b, &opts).unwrap();
        assert!((low.nu - low.mu).abs() < 1e-6 * low.mu);
        assert!(low.relative_gap() < 1e-6);
        let high = klt_with(&problem, 3.0 * b, &opts).unwrap();
        assert!(high.constant_deviation > 1e-3);
        assert!(high.relative_gap() < 1e-4, "{}", high.relative_gap());
        // For p > 1 the sup formulation gives ν(μ) ≥ μ.
        assert!(high.nu > high.mu);
        assert!((high.holder_norm - high.mu).abs() < 1e-8 * high.mu);
        assert!(high.potential.min() >= 0.0);
    }

    #[test]
    fn duality_sublinear() {
        let g = build_grid(&Domain::unit_interval(), 128).unwrap();
        let problem = Problem::new(&g, Exponent::Power(0.5)).unwrap();
        let b = problem.bifurcation();
        let r = klt_with(&problem, 1.3 * b, &DescentOptions::default()).unwrap();
        assert!(r.constant_deviation > 1e-3);
        assert!(r.relative_gap() < 1e-4, "{}", r.relative_gap());
        assert!(r.nu < r.mu);
    }

    #[test]
    fn log_spacing() {
        let v = log_spaced(1.0, 100.0, 3);
        assert!((v[1] - 10.0).abs() < 1e-12 && (v[2] - 100.0).abs() < 1e-12);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]
        #[test]
        fn holder_inequality(s1 in any::<u64>(), s2 in any::<u64>(), a in 0.05f64..0.9, p in prop_oneof![0.2f64..0.9, 1.2f64..4.0]) {
            let g = build_grid(&Domain::unit_interval(), 48).unwrap();
            let phi = Field::new(&g, random_smooth_positive(&g, s1, a)).unwrap();
            let u = Field::new(&g, random_smooth_positive(&g, s2, a)).unwrap();
            let (l, r) = holder_pairing_check(&phi, &u, p).unwrap();
            prop_assert!(l <= r * (1.0 + 1e-12));
        }
    }
}
