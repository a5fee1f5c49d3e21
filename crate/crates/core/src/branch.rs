//! Positive solutions of `-ε(p)Δu + λu - u^p = 0` with Neumann conditions:
//! damped Newton, continuation of the branch bifurcating from the
//! constants, and the resulting estimate of `μ₁`.
//!
//! Internally the equation is written `G(u) = -Lu + ε(λu - u^p) = 0`, whose
//! Jacobian along the constants `c = λ^{1/(p-1)}` is `-L - |p-1|λ`.

use std::io::Write;

use serde::Serialize;

use crate::error::{invalid, Error, Result};
use crate::grid::{Field, Grid};
use crate::linalg::{wdot, wnorm, BandLu, BandMatrix};
use crate::spectral::spectral_gap;

/// Relative deviation above which a branch point counts as non-constant.
pub const NONCONSTANT_THRESHOLD: f64 = 1e-4;

const NEWTON_TOL: f64 = 1e-9;
const NEWTON_MAX_ITER: usize = 60;

#[derive(Debug, Clone)]
pub struct BranchPoint<'g> {
    pub lambda: f64,
    pub solution: Field<'g>,
    /// `‖u - ∫u‖₂`.
    pub deviation: f64,
    /// `‖G(u)‖₂ / (λ‖u‖₂)`.
    pub newton_residual: f64,
    /// Cumulative distance along the branch in the scaled metric.
    pub arclength: f64,
    pub newton_iterations: usize,
}

impl BranchPoint<'_> {
    pub fn relative_deviation(&self) -> f64 {
        self.deviation / self.solution.mean().abs().max(1e-300)
    }

    pub fn sup_norm(&self) -> f64 {
        self.solution.max()
    }
}

#[derive(Debug, Clone)]
pub struct BranchTrace<'g> {
    pub p: f64,
    pub points: Vec<BranchPoint<'g>>,
    /// Parameter at which the constant branch lost stability, if crossed.
    pub bifurcation: Option<f64>,
    /// Set when continuation stopped after repeated step failures.
    pub truncated: bool,
}

fn check_p(p: f64) -> Result<f64> {
    if !(p > 0.0 && p.is_finite()) || p == 1.0 {
        return invalid(format!("p = {p} must be positive, finite and different from 1"));
    }
    Ok(if p > 1.0 { 1.0 } else { -1.0 })
}

/// `G(u)` and its weighted norm relative to `λ‖u‖`.
fn residual(grid: &Grid, p: f64, eps: f64, lambda: f64, u: &[f64], out: &mut [f64]) -> f64 {
    grid.laplacian(u, out);
    for i in 0..u.len() {
        out[i] = -out[i] + eps * (lambda * u[i] - u[i].powf(p));
    }
    let w = grid.weights();
    wnorm(w, out) / (lambda * wnorm(w, u)).max(1e-300)
}

/// `W·J = K + W diag(ε(λ - p u^{p-1}))`.
fn jacobian(grid: &Grid, p: f64, eps: f64, lambda: f64, u: &[f64]) -> BandMatrix {
    let diag: Vec<f64> = u.iter().map(|v| eps * (lambda - p * v.powf(p - 1.0))).collect();
    grid.stiffness_plus_diagonal(&diag)
}

/// Damped Newton iteration from a positive initial guess.
pub fn newton_solve<'g>(grid: &'g Grid, p: f64, lambda: f64, initial: &Field<'_>) -> Result<BranchPoint<'g>> {
    let eps = check_p(p)?;
    if !(lambda > 0.0) {
        return invalid("λ must be positive");
    }
    if initial.values().len() != grid.len() {
        return invalid("initial field lives on another grid");
    }
    if initial.min() <= 0.0 {
        return invalid("initial guess must be positive");
    }
    let n = grid.len();
    let w = grid.weights();
    let mut u = initial.values().to_vec();
    let mut g = vec![0.0; n];
    let mut res = residual(grid, p, eps, lambda, &u, &mut g);
    let mut trial = vec![0.0; n];
    let mut g_trial = vec![0.0; n];
    let mut it = 0;
    while res > NEWTON_TOL {
        if it >= NEWTON_MAX_ITER {
            return Err(Error::NonConvergence {
                solver: "Newton",
                iterations: it,
                residual: res,
            });
        }
        it += 1;
        let lu = jacobian(grid, p, eps, lambda, &u).factor()?;
        let mut delta: Vec<f64> = g.iter().zip(w).map(|(g, w)| -g * w).collect();
        lu.solve_in_place(&mut delta);
        let mut t = 1.0;
        loop {
            for i in 0..n {
                trial[i] = u[i] + t * delta[i];
            }
            let positive = trial.iter().all(|v| *v > 0.0);
            if positive {
                let r = residual(grid, p, eps, lambda, &trial, &mut g_trial);
                if r < res * (1.0 - 1e-4 * t) || r <= NEWTON_TOL {
                    res = r;
                    std::mem::swap(&mut u, &mut trial);
                    std::mem::swap(&mut g, &mut g_trial);
                    break;
                }
            }
            t *= 0.5;
            if t < 1e-8 {
                let min = trial.iter().copied().fold(f64::INFINITY, f64::min);
                return Err(if positive {
                    Error::NonConvergence {
                        solver: "Newton (damping failed)",
                        iterations: it,
                        residual: res,
                    }
                } else {
                    Error::Positivity {
                        min,
                        time: it as f64,
                        hint: "Newton step halving could not keep the iterate positive".into(),
                    }
                });
            }
        }
    }
    let solution = Field::new(grid, u)?;
    Ok(BranchPoint {
        lambda,
        deviation: solution.deviation(),
        solution,
        newton_residual: res,
        arclength: 0.0,
        newton_iterations: it,
    })
}

/// Continuation settings.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BranchOptions {
    /// Sign of the `u₂` component used to leave the constant branch.
    pub orientation: f64,
    pub max_points: usize,
    /// Continuation stops once `λ` exceeds this multiple of `λ₂/|p-1|`.
    pub lambda_cap_factor: f64,
    /// Step along the constant branch, relative to `λ₂/|p-1|`.
    pub constant_step: f64,
    /// Largest pseudo-arclength step in the scaled metric.
    pub max_step: f64,
}

impl Default for BranchOptions {
    fn default() -> Self {
        Self {
            orientation: 1.0,
            max_points: 400,
            lambda_cap_factor: 10.0,
            constant_step: 0.05,
            max_step: 0.25,
        }
    }
}

/// Follows the constant branch from `lambda_start` in `direction`; when the
/// smallest nonconstant Jacobian eigenvalue `λ₂ - |p-1|λ` changes sign, the
/// bifurcating branch is followed by pseudo-arclength continuation.
pub fn trace_branch<'g>(grid: &'g Grid, p: f64, lambda_start: f64, direction: f64) -> Result<BranchTrace<'g>> {
    trace_branch_with(grid, p, lambda_start, direction, &BranchOptions::default())
}

pub fn trace_branch_with<'g>(
    grid: &'g Grid,
    p: f64,
    lambda_start: f64,
    direction: f64,
    opts: &BranchOptions,
) -> Result<BranchTrace<'g>> {
    let eps = check_p(p)?;
    if !(lambda_start > 0.0) {
        return invalid("λ must be positive");
    }
    if direction != 1.0 && direction != -1.0 {
        return invalid("direction must be ±1");
    }
    let gap = spectral_gap(grid)?;
    let scale = (p - 1.0).abs();
    let lambda_b = gap.eigenvalue / scale;
    let cap = opts.lambda_cap_factor * lambda_b;
    let constant_at = |lambda: f64| -> BranchPoint<'g> {
        let c = lambda.powf(1.0 / (p - 1.0));
        let solution = Field::constant(grid, c);
        let mut g = vec![0.0; grid.len()];
        let res = residual(grid, p, eps, lambda, solution.values(), &mut g);
        BranchPoint {
            lambda,
            solution,
            deviation: 0.0,
            newton_residual: res,
            arclength: 0.0,
            newton_iterations: 0,
        }
    };
    let stability = |lambda: f64| gap.eigenvalue - scale * lambda;

    let mut trace = BranchTrace {
        p,
        points: Vec::new(),
        bifurcation: None,
        truncated: false,
    };
    let dl = opts.constant_step * lambda_b * direction;
    let mut lambda = lambda_start;
    let mut arclength = 0.0;
    loop {
        let mut pt = constant_at(lambda);
        pt.arclength = arclength;
        trace.points.push(pt);
        let next = lambda + dl;
        if next <= 0.0 || next > cap || trace.points.len() >= opts.max_points {
            return Ok(trace);
        }
        if stability(lambda) * stability(next) <= 0.0 && stability(lambda) != 0.0 {
            break;
        }
        arclength += dl.abs() / lambda_b;
        lambda = next;
    }
    trace.bifurcation = Some(lambda_b);

    // Leave the constants at two small amplitudes along u₂.
    let c_b = lambda_b.powf(1.0 / (p - 1.0));
    let u2 = gap.eigenfunction.values();
    let w = grid.weights();
    let n = grid.len();
    let amp = opts.orientation * 1e-3 * c_b;
    let mut cont = Continuation {
        grid,
        p,
        eps,
        c_b,
        lambda_b,
    };
    let mut pts: Vec<(Vec<f64>, f64)> = Vec::new();
    for k in 1..=2 {
        let a = amp * k as f64;
        let guess: Vec<f64> = u2.iter().map(|v| c_b + a * v).collect();
        let wu2: Vec<f64> = u2.iter().zip(w).map(|(u, w)| u * w).collect();
        let constraint = Constraint {
            c: wu2,
            d: 0.0,
            rhs: a,
        };
        let (u, l, its) = cont.corrector(guess, lambda_b, &constraint)?;
        let prev_arc = trace.points.last().map_or(0.0, |q| q.arclength);
        let prev = pts.last().cloned().unwrap_or_else(|| (vec![c_b; n], lambda_b));
        let arc = prev_arc + cont.distance(&prev.0, prev.1, &u, l);
        trace.points.push(cont.point(u.clone(), l, arc, its)?);
        pts.push((u, l));
    }

    let mut step = cont.distance(&pts[0].0, pts[0].1, &pts[1].0, pts[1].1).max(1e-4);
    let mut failures = 0;
    while trace.points.len() < opts.max_points {
        let (u1, l1) = &pts[pts.len() - 1];
        let (u0, l0) = &pts[pts.len() - 2];
        let dist = cont.distance(u0, *l0, u1, *l1);
        let tu: Vec<f64> = u1.iter().zip(u0).map(|(a, b)| (a - b) / (c_b * dist)).collect();
        let tl = (l1 - l0) / (lambda_b * dist);
        let pred_u: Vec<f64> = u1.iter().zip(&tu).map(|(u, t)| u + step * c_b * t).collect();
        let pred_l = l1 + step * lambda_b * tl;
        // ⟨t_u, (u - u_pred)/c_b⟩ + t_λ (λ - λ_pred)/λ_b = 0.
        let c: Vec<f64> = tu.iter().zip(w).map(|(t, w)| t * w / c_b).collect();
        let d = tl / lambda_b;
        let rhs = wdot(w, &tu, &pred_u) / c_b + d * pred_l;
        let constraint = Constraint { c, d, rhs };
        match cont.corrector(pred_u, pred_l, &constraint) {
            Ok((u, l, its)) if l > 0.0 => {
                failures = 0;
                let arc = trace.points.last().map_or(0.0, |q| q.arclength) + cont.distance(u1, *l1, &u, l);
                let pt = cont.point(u.clone(), l, arc, its)?;
                let reconnected = pt.relative_deviation() < 1e-6;
                trace.points.push(pt);
                pts.push((u, l));
                if l > cap || reconnected {
                    break;
                }
                if its <= 4 {
                    step = (step * 1.5).min(opts.max_step);
                }
            }
            Ok(_) => break,
            Err(_) => {
                failures += 1;
                step *= 0.5;
                if failures > 8 {
                    trace.truncated = true;
                    break;
                }
            }
        }
    }
    Ok(trace)
}

/// Linear side condition `c·u + d·λ = rhs`.
struct Constraint {
    c: Vec<f64>,
    d: f64,
    rhs: f64,
}

struct Continuation<'g> {
    grid: &'g Grid,
    p: f64,
    eps: f64,
    c_b: f64,
    lambda_b: f64,
}

impl<'g> Continuation<'g> {
    fn distance(&self, u0: &[f64], l0: f64, u1: &[f64], l1: f64) -> f64 {
        let du: Vec<f64> = u1.iter().zip(u0).map(|(a, b)| (a - b) / self.c_b).collect();
        let dl = (l1 - l0) / self.lambda_b;
        (wdot(self.grid.weights(), &du, &du) + dl * dl).sqrt()
    }

    fn point(&self, u: Vec<f64>, lambda: f64, arclength: f64, its: usize) -> Result<BranchPoint<'g>> {
        let mut g = vec![0.0; u.len()];
        let res = residual(self.grid, self.p, self.eps, lambda, &u, &mut g);
        let solution = Field::new(self.grid, u)?;
        Ok(BranchPoint {
            lambda,
            deviation: solution.deviation(),
            solution,
            newton_residual: res,
            arclength,
            newton_iterations: its,
        })
    }

    /// Newton on `(G(u, λ), constraint) = 0` with bordered solves.
    fn corrector(&mut self, mut u: Vec<f64>, mut lambda: f64, k: &Constraint) -> Result<(Vec<f64>, f64, usize)> {
        let grid = self.grid;
        let (p, eps) = (self.p, self.eps);
        let w = grid.weights();
        let n = u.len();
        let mut g = vec![0.0; n];
        let merit = |res: f64, con: f64| res + con.abs();
        let constraint_value = |u: &[f64], l: f64| {
            (u.iter().zip(&k.c).map(|(u, c)| u * c).sum::<f64>() + k.d * l - k.rhs) / self.c_b.max(1.0)
        };
        let mut res = residual(grid, p, eps, lambda, &u, &mut g);
        let mut con = constraint_value(&u, lambda);
        let mut g_trial = vec![0.0; n];
        for it in 1..=NEWTON_MAX_ITER {
            let m = jacobian(grid, p, eps, lambda, &u);
            let b: Vec<f64> = u.iter().zip(w).map(|(u, w)| eps * u * w).collect();
            let r: Vec<f64> = g.iter().zip(w).map(|(g, w)| -g * w).collect();
            let q = -(u.iter().zip(&k.c).map(|(u, c)| u * c).sum::<f64>() + k.d * lambda - k.rhs);
            let (du, dl) = bordered_solve(m, &b, &k.c, k.d, &r, q)?;
            let mut t = 1.0;
            loop {
                let trial: Vec<f64> = u.iter().zip(&du).map(|(u, d)| u + t * d).collect();
                let tl = lambda + t * dl;
                if trial.iter().all(|v| *v > 0.0) && tl > 0.0 {
                    let r2 = residual(grid, p, eps, tl, &trial, &mut g_trial);
                    let c2 = constraint_value(&trial, tl);
                    if merit(r2, c2) < merit(res, con) * (1.0 - 1e-4 * t) || (r2 <= NEWTON_TOL && c2.abs() <= 1e-10) {
                        u = trial;
                        lambda = tl;
                        res = r2;
                        con = c2;
                        std::mem::swap(&mut g, &mut g_trial);
                        break;
                    }
                }
                t *= 0.5;
                if t < 1e-6 {
                    return Err(Error::NonConvergence {
                        solver: "continuation corrector",
                        iterations: it,
                        residual: res,
                    });
                }
            }
            if res <= NEWTON_TOL && con.abs() <= 1e-10 {
                return Ok((u, lambda, it));
            }
        }
        Err(Error::NonConvergence {
            solver: "continuation corrector",
            iterations: NEWTON_MAX_ITER,
            residual: res,
        })
    }
}

/// Solves `[M b; cᵀ d][x; y] = [r; q]` by block elimination with two steps
/// of iterative refinement.
fn bordered_solve(m: BandMatrix, b: &[f64], c: &[f64], d: f64, r: &[f64], q: f64) -> Result<(Vec<f64>, f64)> {
    let lu: BandLu = m.clone().factor()?;
    let mut z = b.to_vec();
    lu.solve_in_place(&mut z);
    let schur = d - dot(c, &z);
    if schur.abs() < 1e-300 {
        return Err(Error::SingularSystem { row: b.len(), pivot: schur });
    }
    let solve = |r: &[f64], q: f64| -> (Vec<f64>, f64) {
        let mut x = r.to_vec();
        lu.solve_in_place(&mut x);
        let y = (q - dot(c, &x)) / schur;
        x.iter_mut().zip(&z).for_each(|(x, z)| *x -= y * z);
        (x, y)
    };
    let (mut x, mut y) = solve(r, q);
    let mut mx = vec![0.0; x.len()];
    for _ in 0..2 {
        m.mul_vec(&x, &mut mx);
        let rr: Vec<f64> = (0..x.len()).map(|i| r[i] - mx[i] - b[i] * y).collect();
        let qq = q - dot(c, &x) - d * y;
        let (dx, dy) = solve(&rr, qq);
        x.iter_mut().zip(&dx).for_each(|(x, d)| *x += d);
        y += dy;
    }
    Ok((x, y))
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(a, b)| a * b).sum()
}

/// Smallest `λ` over non-constant points (relative deviation above
/// [`NONCONSTANT_THRESHOLD`]) of all traces.
pub fn estimate_mu1(traces: &[BranchTrace<'_>]) -> Option<f64> {
    estimate_mu1_with(traces, NONCONSTANT_THRESHOLD)
}

pub fn estimate_mu1_with(traces: &[BranchTrace<'_>], threshold: f64) -> Option<f64> {
    traces
        .iter()
        .flat_map(|t| t.points.iter())
        .filter(|pt| pt.relative_deviation() > threshold)
        .map(|pt| pt.lambda)
        .reduce(f64::min)
}

/// Returns `‖u‖_{p+1}^{p-1}` and the multiple of `u` whose norm satisfies
/// `‖·‖_{p+1}^{p-1} = mu`. A critical point of the quotient with value `mu`
/// becomes, after this rescaling, a solution of the equation.
pub fn el_normalization<'g>(u: &Field<'g>, p: f64, mu: f64) -> Result<(f64, Field<'g>)> {
    check_p(p)?;
    let n = u.grid().lp_norm(u.values(), p + 1.0)?;
    if n == 0.0 {
        return invalid("cannot normalize the zero field");
    }
    if !(mu > 0.0) {
        return invalid("μ must be positive");
    }
    let own = n.powf(p - 1.0);
    let k = (mu / own).powf(1.0 / (p - 1.0));
    Ok((own, u.map(|v| v * k)))
}

/// Scaled residual of the equation at `(u, λ)`.
pub fn equation_residual(u: &Field, p: f64, lambda: f64) -> Result<f64> {
    let eps = check_p(p)?;
    let mut g = vec![0.0; u.values().len()];
    Ok(residual(u.grid(), p, eps, lambda, u.values(), &mut g))
}

/// Branch diagram rows: `λ, deviation, ‖u‖∞, arclength`.
pub fn write_branch_csv<W: Write>(trace: &BranchTrace<'_>, out: &mut W, comment: Option<&str>) -> Result<()> {
    if let Some(c) = comment {
        writeln!(out, "# {c}")?;
    }
    writeln!(out, "lambda,deviation,sup_norm,arclength")?;
    for pt in &trace.points {
        writeln!(out, "{},{},{},{}", pt.lambda, pt.deviation, pt.sup_norm(), pt.arclength)?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::constants::theta_star;
    use crate::grid::{build_grid, Domain};
    use crate::rng::random_smooth_positive;
    use crate::variational::{DescentOptions, Problem};
    use crate::constants::Exponent;

    #[test]
    fn constant_is_exact_root() {
        let g = build_grid(&Domain::unit_interval(), 64).unwrap();
        for (p, lambda) in [(2.0, 3.0), (3.0, 0.7), (0.5, 4.0)] {
            let c = Field::constant(&g, f64::powf(lambda, 1.0 / (p - 1.0)));
            assert!(equation_residual(&c, p, lambda).unwrap() <= 1e-12);
            let pt = newton_solve(&g, p, lambda, &c).unwrap();
            assert!(pt.newton_iterations <= 2);
            assert!(pt.deviation < 1e-12);
        }
    }

    #[test]
    fn non_constant_root_above_bifurcation() {
        let g = build_grid(&Domain::unit_interval(), 128).unwrap();
        let gap = spectral_gap(&g).unwrap();
        let lambda = 1.3 * gap.eigenvalue;
        let init = gap.eigenfunction.map(|v| lambda + 0.3 * lambda * v);
        let pt = newton_solve(&g, 2.0, lambda, &init).unwrap();
        assert!(pt.deviation > 1e-3);
        assert!(pt.newton_residual <= 1e-9);
        assert!(pt.solution.min() > 0.0);
    }

    #[test]
    fn rigidity_regime_lands_on_constant() {
        let g = build_grid(&Domain::unit_interval(), 128).unwrap();
        let l2 = spectral_gap(&g).unwrap().eigenvalue;
        // d = 1 gives θ⋆ = 0.
        let lambda = 0.5 * (1.0 - theta_star(2.0, 1)) * l2;
        for seed in 0..5 {
            let init = Field::new(&g, random_smooth_positive(&g, seed, 0.5))
                .unwrap()
                .map(|v| v * lambda);
            let pt = newton_solve(&g, 2.0, lambda, &init).unwrap();
            assert!(pt.deviation < 1e-7);
            assert!((pt.solution.mean() - lambda).abs() < 1e-9 * lambda);
        }
    }

    #[test]
    fn newton_rejects_bad_input() {
        let g = build_grid(&Domain::unit_interval(), 16).unwrap();
        let z = Field::constant(&g, 0.0);
        assert!(newton_solve(&g, 2.0, 1.0, &z).is_err());
        assert!(newton_solve(&g, 1.0, 1.0, &Field::constant(&g, 1.0)).is_err());
    }

    #[test]
    fn interval_branch_emanates_from_bifurcation() {
        let g = build_grid(&Domain::unit_interval(), 128).unwrap();
        let l2 = spectral_gap(&g).unwrap().eigenvalue;
        let trace = trace_branch(&g, 2.0, 0.5 * l2, 1.0).unwrap();
        let b = trace.bifurcation.unwrap();
        assert!((b / (std::f64::consts::PI.powi(2)) - 1.0).abs() < 0.02);
        let nonconst: Vec<_> = trace.points.iter().filter(|p| p.relative_deviation() > 1e-4).collect();
        assert!(nonconst.len() > 10);
        for pt in &trace.points {
            assert!(pt.solution.min() > 0.0);
            assert!(pt.newton_residual <= 1e-9);
        }
        let mu1 = estimate_mu1(std::slice::from_ref(&trace)).unwrap();
        assert!(mu1 <= std::f64::consts::PI.powi(2) * 1.02);
        // Arclength increases along the trace.
        for w in trace.points.windows(2) {
            assert!(w[1].arclength >= w[0].arclength);
        }
    }

    #[test]
    fn downward_walk_below_bifurcation_stays_constant() {
        let g = build_grid(&Domain::unit_interval(), 64).unwrap();
        let trace = trace_branch(&g, 2.0, 5.0, -1.0).unwrap();
        assert!(trace.bifurcation.is_none());
        assert!(trace.points.iter().all(|p| p.deviation <= 1e-8));
        assert_eq!(estimate_mu1(&[trace]), None);
        assert_eq!(estimate_mu1(&[]), None);
    }

    #[test]
    fn radial_disk_branch() {
        let g = build_grid(&Domain::radial_ball(2, 1.0), 96).unwrap();
        let l2 = spectral_gap(&g).unwrap().eigenvalue;
        let trace = trace_branch(&g, 2.0, 0.8 * l2, 1.0).unwrap();
        assert!(trace.bifurcation.is_some());
        assert!(estimate_mu1(&[trace]).is_some());
    }

    #[test]
    fn el_normalization_properties() {
        let g = build_grid(&Domain::unit_interval(), 64).unwrap();
        let c = Field::constant(&g, 3.0);
        let (mu, r) = el_normalization(&c, 2.0, 5.0).unwrap();
        assert!((mu - 3.0).abs() < 1e-12);
        assert!(r.values().iter().all(|v| (v - 5.0).abs() < 1e-12));
        let u = Field::new(&g, random_smooth_positive(&g, 4, 0.5)).unwrap();
        let (m1, r1) = el_normalization(&u, 2.5, 2.0).unwrap();
        let (m2, r2) = el_normalization(&u.map(|v| 2.0 * v), 2.5, 2.0).unwrap();
        assert!((m2 / m1 - 2f64.powf(1.5)).abs() < 1e-12);
        for (a, b) in r1.values().iter().zip(r2.values()) {
            assert!((a - b).abs() < 1e-10);
        }
        assert!(el_normalization(&Field::constant(&g, 0.0), 2.0, 1.0).is_err());
    }

    #[test]
    fn rescaled_minimizer_solves_equation() {
        let g = build_grid(&Domain::unit_interval(), 128).unwrap();
        for p in [2.0, 0.5] {
            let prob = Problem::new(&g, Exponent::Power(p)).unwrap();
            // Far above threshold the sublinear minimizer develops a dead core.
            let param = if p > 1.0 { 3.0 } else { 1.3 } * prob.bifurcation();
            let s = prob.threshold_quotient(param, &DescentOptions::default()).unwrap();
            assert!(s.constant_deviation > 1e-3);
            // p > 1: μ(λ) minimizer solves -Δu + λu = μ N^{1-p} u^p.
            // p < 1: λ(μ) minimizer solves Δu + λu = μ N^{1-p} u^p.
            let (lambda, mu) = if p > 1.0 { (param, s.mu_out) } else { (s.mu_out, param) };
            let (_, w) = el_normalization(&s.minimizer, p, mu).unwrap();
            let r = equation_residual(&w, p, lambda).unwrap();
            assert!(r <= 1e-6, "p = {p}: {r} min {} conv {} grad {}", w.min(), s.converged, s.gradient_norm);
        }
    }

    #[test]
    fn branch_csv_header() {
        let g = build_grid(&Domain::unit_interval(), 16).unwrap();
        let trace = trace_branch(&g, 2.0, 1.0, -1.0).unwrap();
        let mut buf = Vec::new();
        write_branch_csv(&trace, &mut buf, Some("h")).unwrap();
        let s = String::from_utf8(buf).unwrap();
        assert!(s.starts_with("# h\nlambda,deviation,sup_norm,arclength\n"));
    }
}
