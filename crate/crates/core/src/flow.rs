//! Heat flow and the conservative nonlinear flow
//! `∂v/∂t = v^{2-2β}(Δv + κ|∇v|²/v)`, with their entropy ledgers and the
//! Demange interpolation inequality.
//!
//! The nonlinear flow is integrated in the conserved variable
//! `U = v^{β(p+1)}`, where it reads `∂U/∂t = c Δ(U^γ)` with
//! `c = β(p+1)/(κ+1)` and `γ = (κ+1)/(β(p+1))`. Forward Euler on this form
//! conserves `Σ W_i U_i` up to rounding.

use std::io::Write;

use serde::Serialize;

use crate::constants::{delta, kappa_flow, r_coefficient, ExponentSet};
use crate::error::{invalid, Error, Result};
use crate::grid::{Field, Grid};
use crate::spectral::spectral_gap;

/// Fraction of the explicit stability limit used for the time step.
pub const CFL_FRACTION: f64 = 0.4;
/// Positivity floor relative to `max v₀`.
pub const POSITIVITY_FLOOR: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FlowTrace {
    pub p: f64,
    /// 1 for the heat flow.
    pub beta: f64,
    /// `Λ` used in `j_lambda`.
    pub big_lambda: f64,
    /// Discrete spectral gap of the grid.
    pub lambda2: f64,
    pub times: Vec<f64>,
    pub entropy_e: Vec<f64>,
    pub production_i: Vec<f64>,
    pub j_lambda: Vec<f64>,
    pub mass: Vec<f64>,
    pub min_v: Vec<f64>,
    /// Step that produced each entry (0 for the initial state).
    pub dt_used: Vec<f64>,
    /// Time-integrated dissipation up to each entry. Nonlinear flow:
    /// `∫ Rβ² ∫|∇v|⁴/v²`. Heat flow: `∫ (4/r) ∫|∇u|²`.
    pub dissipation: Vec<f64>,
}

impl FlowTrace {
    fn new(p: f64, beta: f64, big_lambda: f64, lambda2: f64) -> Self {
        Self {
            p,
            beta,
            big_lambda,
            lambda2,
            times: Vec::new(),
            entropy_e: Vec::new(),
            production_i: Vec::new(),
            j_lambda: Vec::new(),
            mass: Vec::new(),
            min_v: Vec::new(),
            dt_used: Vec::new(),
            dissipation: Vec::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    /// Largest relative drift of the conserved mass.
    pub fn mass_drift(&self) -> f64 {
        let m0 = self.mass[0];
        self.mass.iter().map(|m| (m - m0).abs() / m0.abs()).fold(0.0, f64::max)
    }

    /// Largest step-to-step increase of `J_Λ` in excess of
    /// `rel·|J| + abs`; nonpositive means monotone.
    pub fn worst_j_increase(&self, rel: f64, abs: f64) -> f64 {
        self.j_lambda
            .windows(2)
            .map(|w| w[1] - w[0] - (rel * w[0].abs() + abs))
            .fold(f64::NEG_INFINITY, f64::max)
    }

    /// Least-squares exponential rate of `i(t)` over entries with
    /// `i > floor·i(0)`.
    pub fn production_decay_rate(&self, floor: f64) -> Option<f64> {
        let i0 = self.production_i[0];
        let (t, y): (Vec<f64>, Vec<f64>) = self
            .times
            .iter()
            .zip(&self.production_i)
            .filter(|(_, i)| **i > floor * i0 && **i > 0.0)
            .map(|(t, i)| (*t, i.ln()))
            .unzip();
        if t.len() < 3 {
            return None;
        }
        let (slope, _) = crate::numerics::linear_fit(&t, &y);
        Some(-slope)
    }

    /// CSV columns `t, e, i, J_Λ, mass, min_v, dt`.
    pub fn write_csv<W: Write>(&self, out: &mut W, comment: Option<&str>) -> Result<()> {
        if let Some(c) = comment {
            writeln!(out, "# {c}")?;
        }
        writeln!(out, "t,e,i,j_lambda,mass,min_v,dt")?;
        for k in 0..self.len() {
            writeln!(
                out,
                "{},{},{},{},{},{},{}",
                self.times[k],
                self.entropy_e[k],
                self.production_i[k],
                self.j_lambda[k],
                self.mass[k],
                self.min_v[k],
                self.dt_used[k]
            )?;
        }
        Ok(())
    }
}

/// `(e, i)` of `u` for exponent `p`.
fn entropy_production(grid: &Grid, p: f64, u: &[f64]) -> Result<(f64, f64)> {
    let s = grid.integrate(&u.iter().map(|x| x * x).collect::<Vec<_>>());
    let f = grid.lp_norm(u, p + 1.0)?.powi(2);
    Ok(((f - s) / (p - 1.0), grid.energy(u)))
}

fn check_initial(grid: &Grid, v0: &Field, t_end: f64) -> Result<()> {
    if v0.values().len() != grid.len() {
        return invalid("initial field lives on another grid");
    }
    if v0.min() <= 0.0 {
        return invalid("initial data must be strictly positive");
    }
    if !(t_end > 0.0 && t_end.is_finite()) {
        return invalid("t_end must be positive and finite");
    }
    Ok(())
}

/// `∂v/∂t = Δv`, recording quantities of `u = v^{1/(p+1)}`. The deficit
/// `‖∇u‖² - λ₂(‖u‖₂² - ‖u‖²_{p+1})` is stored as `j_lambda`
/// (`Λ = (1-p)λ₂`).
pub fn heat_flow_run(grid: &Grid, p: f64, v0: &Field, t_end: f64) -> Result<FlowTrace> {
    if !(p > 0.0 && p < 1.0) {
        return invalid(format!("heat flow ledger needs p in (0, 1), got {p}"));
    }
    check_initial(grid, v0, t_end)?;
    let lambda2 = spectral_gap(grid)?.eigenvalue;
    let big_lambda = (1.0 - p) * lambda2;
    let r = 2.0 / (p + 1.0);
    let mut trace = FlowTrace::new(p, 1.0, big_lambda, lambda2);
    let n = grid.len();
    let dt0 = CFL_FRACTION * 2.0 / grid.laplacian_bound();
    let floor = POSITIVITY_FLOOR * v0.max();
    let mut v = v0.values().to_vec();
    let mut lv = vec![0.0; n];
    let mut next = vec![0.0; n];
    let mut t = 0.0;
    let mut acc = 0.0;
    let record = |v: &[f64], t: f64, dt: f64, acc: f64, trace: &mut FlowTrace| -> Result<f64> {
        let u: Vec<f64> = v.iter().map(|x| x.powf(1.0 / (p + 1.0))).collect();
        let (e, i) = entropy_production(grid, p, &u)?;
        trace.times.push(t);
        trace.entropy_e.push(e);
        trace.production_i.push(i);
        trace.j_lambda.push(i - big_lambda * e);
        trace.mass.push(grid.integrate(v));
        trace.min_v.push(v.iter().copied().fold(f64::INFINITY, f64::min));
        trace.dt_used.push(dt);
        trace.dissipation.push(acc);
        Ok(i)
    };
    let mut i_now = record(&v, t, 0.0, acc, &mut trace)?;
    while t < t_end * (1.0 - 1e-12) {
        let dt = dt0.min(t_end - t);
        grid.laplacian(&v, &mut lv);
        for k in 0..n {
            next[k] = v[k] + dt * lv[k];
        }
        let min = next.iter().copied().fold(f64::INFINITY, f64::min);
        if min < floor {
            return Err(Error::Positivity {
                min,
                time: t,
                hint: format!("heat flow with dt = {dt:.3e} left the positive cone; the step is above the stability limit"),
            });
        }
        std::mem::swap(&mut v, &mut next);
        t += dt;
        let i_prev = i_now;
        // Trapezoid rule for the dissipation ledger.
        let i_new = {
            let u: Vec<f64> = v.iter().map(|x| x.powf(1.0 / (p + 1.0))).collect();
            grid.energy(&u)
        };
        acc += 0.5 * dt * (4.0 / r) * (i_prev + i_new);
        i_now = record(&v, t, dt, acc, &mut trace)?;
    }
    Ok(trace)
}

/// Nonlinear flow for `u = v^β` with `Λ = (1-θ)λ₂` in `j_lambda`.
pub fn nonlinear_flow_run(grid: &Grid, p: f64, beta: f64, theta: f64, v0: &Field, t_end: f64) -> Result<FlowTrace> {
    if !(p > 0.0) || p == 1.0 {
        return invalid(format!("p = {p} must be positive and different from 1"));
    }
    if !(beta.is_finite() && beta != 0.0) {
        return invalid("β must be finite and nonzero");
    }
    if !(theta > 0.0 && theta <= 1.0) {
        return invalid(format!("θ = {theta} must lie in (0, 1]"));
    }
    check_initial(grid, v0, t_end)?;
    let kappa = kappa_flow(beta, p);
    let m = beta * (p + 1.0);
    if !(kappa + 1.0 > 0.0 && m > 0.0) {
        return invalid(format!("κ + 1 = {} and β(p+1) = {m} must be positive", kappa + 1.0));
    }
    let c = m / (kappa + 1.0);
    let gamma = (kappa + 1.0) / m;
    let lambda2 = spectral_gap(grid)?.eigenvalue;
    let big_lambda = (1.0 - theta) * lambda2;
    let rcoef = r_coefficient(theta, beta, p, grid.dimension())?;
    let bound = grid.laplacian_bound();
    let floor = POSITIVITY_FLOOR * v0.max();
    let n = grid.len();

    let mut trace = FlowTrace::new(p, beta, big_lambda, lambda2);
    let dissipation_rate = |v: &[f64]| rcoef * beta * beta * grid.cell_integral(v, |g2, vb| g2 * g2 / (vb * vb));
    let record = |v: &[f64], big_u: &[f64], t: f64, dt: f64, acc: f64, trace: &mut FlowTrace| -> Result<()> {
        let u: Vec<f64> = v.iter().map(|x| x.powf(beta)).collect();
        let (e, i) = entropy_production(grid, p, &u)?;
        trace.times.push(t);
        trace.entropy_e.push(e);
        trace.production_i.push(i);
        trace.j_lambda.push(i - big_lambda * e);
        trace.mass.push(grid.integrate(big_u));
        trace.min_v.push(v.iter().copied().fold(f64::INFINITY, f64::min));
        trace.dt_used.push(dt);
        trace.dissipation.push(acc);
        Ok(())
    };

    let mut v = v0.values().to_vec();
    let mut big_u: Vec<f64> = v.iter().map(|x| x.powf(m)).collect();
    let mut flux = vec![0.0; n];
    let mut lap = vec![0.0; n];
    let mut next_u = vec![0.0; n];
    let mut t = 0.0;
    let mut acc = 0.0;
    let mut rate = dissipation_rate(&v);
    record(&v, &big_u, t, 0.0, acc, &mut trace)?;
    while t < t_end * (1.0 - 1e-12) {
        // Effective diffusivity of the linearized flow is v^{2-2β}.
        let diff = v.iter().map(|x| x.powf(2.0 - 2.0 * beta)).fold(0.0, f64::max);
        let mut dt = (CFL_FRACTION * 2.0 / (bound * diff)).min(t_end - t);
        for (f, u) in flux.iter_mut().zip(&big_u) {
            *f = u.powf(gamma);
        }
        grid.laplacian(&flux, &mut lap);
        loop {
            for k in 0..n {
                next_u[k] = big_u[k] + dt * c * lap[k];
            }
            let min_u = next_u.iter().copied().fold(f64::INFINITY, f64::min);
            if min_u > 0.0 && min_u.powf(1.0 / m) >= floor {
                break;
            }
            dt *= 0.5;
            if dt < 1e-14 * t_end {
                return Err(Error::Positivity {
                    min: min_u.max(0.0).powf(1.0 / m),
                    time: t,
                    hint: format!("time step halved to {dt:.3e} without restoring positivity; reduce the CFL fraction"),
                });
            }
        }
        std::mem::swap(&mut big_u, &mut next_u);
        for (x, u) in v.iter_mut().zip(&big_u) {
            *x = u.powf(1.0 / m);
        }
        t += dt;
        let new_rate = dissipation_rate(&v);
        acc += 0.5 * dt * (rate + new_rate);
        rate = new_rate;
        record(&v, &big_u, t, dt, acc, &mut trace)?;
    }
    Ok(trace)
}

/// Both sides of `∫|∇v|⁴/v² ≥ β⁻² ∫|∇u|² ∫|∇v|² / (∫u²)^δ` for `u = v^β`,
/// after rescaling `v` so that `‖u‖_{p+1} = 1`. All integrals use the same
/// cell quadrature, so the discrete statement inherits the Hölder argument.
pub fn demange_check(v: &Field, beta: f64, p: f64) -> Result<(f64, f64)> {
    if !(p > 0.0) || p == 1.0 {
        return invalid(format!("p = {p} must be positive and different from 1"));
    }
    if !(beta > 1.0) || (p < 3.0 && beta > 2.0 / (3.0 - p)) {
        return invalid(format!("β = {beta} outside (1, 2/(3-p)] for p = {p}"));
    }
    if v.min() <= 0.0 {
        return invalid("v must be positive");
    }
    let g = v.grid();
    let norm = g
        .cell_integral(v.values(), |_, vb| vb.powf(beta * (p + 1.0)))
        .powf(1.0 / (p + 1.0));
    let k = norm.powf(-1.0 / beta);
    let w: Vec<f64> = v.values().iter().map(|x| x * k).collect();
    let dl = delta(beta, p).expect("β > 1 and p ≠ 1");
    let lhs = g.cell_integral(&w, |g2, vb| g2 * g2 / (vb * vb));
    let grad_u = g.cell_integral(&w, |g2, vb| beta * beta * vb.powf(2.0 * beta - 2.0) * g2);
    let grad_v = g.cell_integral(&w, |g2, _| g2);
    let u2 = g.cell_integral(&w, |_, vb| vb.powf(2.0 * beta));
    Ok((lhs, grad_u * grad_v / (beta * beta * u2.powf(dl))))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EntropyProductionReport {
    pub checked: usize,
    pub satisfied: usize,
    pub tolerance: f64,
    /// Largest value of the left-hand side and where it occurs.
    pub worst: f64,
    pub worst_index: usize,
    pub violations: Vec<usize>,
}

impl EntropyProductionReport {
    pub fn fraction(&self) -> f64 {
        self.satisfied as f64 / self.checked.max(1) as f64
    }
}

/// Checks `i' - Λe' - (R/2β²) i e' / (1-(p-1)e)^δ ≤ 0` with centred
/// differences, after rescaling to `‖u‖_{p+1} = 1`. Tolerance is
/// `1e-6·max|i'|`.
pub fn entropy_production_inequality_check(
    trace: &FlowTrace,
    exponents: &ExponentSet,
    theta: f64,
    lambda2: f64,
) -> Result<EntropyProductionReport> {
    if trace.len() < 10 {
        return invalid(format!("trace has {} entries, at least 10 are needed", trace.len()));
    }
    let p = exponents.p;
    let beta = exponents.beta;
    let dl = match exponents.delta {
        Some(d) => d,
        None => return invalid("δ is undefined for this exponent set (β ≤ 1)"),
    };
    let r = r_coefficient(theta, beta, p, exponents.d)?;
    let big_lambda = (1.0 - theta) * lambda2;
    let scale: Vec<f64> = trace.mass.iter().map(|m| m.powf(2.0 / (p + 1.0))).collect();
    let e: Vec<f64> = trace.entropy_e.iter().zip(&scale).map(|(e, s)| e / s).collect();
    let i: Vec<f64> = trace.production_i.iter().zip(&scale).map(|(i, s)| i / s).collect();
    let t = &trace.times;
    let n = t.len();
    let deriv = |y: &[f64], k: usize| (y[k + 1] - y[k - 1]) / (t[k + 1] - t[k - 1]);
    let max_di = (1..n - 1).map(|k| deriv(&i, k).abs()).fold(0.0, f64::max);
    let tol = 1e-6 * max_di;
    let mut report = EntropyProductionReport {
        checked: 0,
        satisfied: 0,
        tolerance: tol,
        worst: f64::NEG_INFINITY,
        worst_index: 0,
        violations: Vec::new(),
    };
    for k in 1..n - 1 {
        let (di, de) = (deriv(&i, k), deriv(&e, k));
        let lhs = di - big_lambda * de - r / (2.0 * beta * beta) * i[k] * de / (1.0 - (p - 1.0) * e[k]).powf(dl);
        report.checked += 1;
        if lhs <= tol {
            report.satisfied += 1;
        } else {
            report.violations.push(k);
        }
        if lhs > report.worst {
            report.worst = lhs;
            report.worst_index = k;
        }
    }
    Ok(report)
}
