//! Interpolation quotients, the functional `J_Λ` and threshold estimates.
//!
//! Four 0-homogeneous quotients are minimized, with `E = ‖∇u‖²`,
//! `S = ‖u‖₂²` and `F = ‖u‖²_{p+1}`:
//!
//! * `(E + λS)/F`, whose infimum is `μ(λ)` for `p > 1`;
//! * `(E + μF)/S`, whose infimum is `λ(μ)` for `p < 1`;
//! * `(E - μF)/S`, whose infimum is `-λ(μ)` for `p > 1`;
//! * `J_Λ/V` with `V = ‖u - ∫u‖₂²`, for any `p` including the log-Sobolev
//!   endpoint; near the constants it tends to `λ₂ - Λ`.
//!
//! The first two are bounded above by their parameter (take `u = 1`), and
//! the threshold `μ₂` is the largest parameter for which they are equal to
//! it. Descent uses the preconditioner `(-L + s)⁻¹` (a banded solve),
//! Barzilai-Borwein step lengths and Armijo backtracking; iterates are
//! renormalized and replaced by their absolute value after each step.

use std::io::Write;

use serde::Serialize;

use crate::constants::Exponent;
use crate::error::{invalid, Error, Result};
use crate::grid::{Field, Grid};
use crate::linalg::{wdot, BandLu};
use crate::numerics::linear_fit;
use crate::rng::random_smooth_positive;
use crate::spectral::{spectral_gap, EigenPair};

/// Which quotient to minimize.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum Quotient {
    /// `(E + λS)/F`, `p > 1`.
    MuOfLambda { lambda: f64 },
    /// `(E + μF)/S`, `p < 1`.
    LambdaOfMuSublinear { mu: f64 },
    /// `(E - μF)/S`, `p > 1`.
    LambdaOfMuSuperlinear { mu: f64 },
    /// `J_Λ[u]/‖u - ∫u‖₂²`.
    Deficit { big_lambda: f64 },
}

impl Quotient {
    fn parameter(self) -> f64 {
        match self {
            Quotient::MuOfLambda { lambda } => lambda,
            Quotient::LambdaOfMuSublinear { mu } | Quotient::LambdaOfMuSuperlinear { mu } => mu,
            Quotient::Deficit { big_lambda } => big_lambda,
        }
    }
}

/// Value of a quotient at `u` and, if requested, its gradient in the
/// weighted inner product.
pub(crate) struct Evaluator<'a> {
    grid: &'a Grid,
    exponent: Exponent,
    quotient: Quotient,
    lu: Vec<f64>,
}

impl<'a> Evaluator<'a> {
    pub(crate) fn new(grid: &'a Grid, exponent: Exponent, quotient: Quotient) -> Self {
        Self {
            grid,
            exponent,
            quotient,
            lu: vec![0.0; grid.len()],
        }
    }

    pub(crate) fn eval(&mut self, u: &[f64], grad: Option<&mut [f64]>) -> f64 {
        let g = self.grid;
        let w = g.weights();
        let p = self.exponent.value();
        let e = g.energy(u);
        let s = wdot(w, u, u);
        // F and its gradient factor 2 N^{1-p} sign(u)|u|^p.
        let (f, fscale) = if self.exponent == Exponent::LogSobolev {
            (0.0, 0.0)
        } else {
            let m: f64 = w.iter().zip(u).map(|(w, u)| w * u.abs().powf(p + 1.0)).sum();
            let n = m.powf(1.0 / (p + 1.0));
            (n * n, 2.0 * n.powf(1.0 - p))
        };
        let fgrad = |x: f64| fscale * x.signum() * x.abs().powf(p);
        let mean: f64 = w.iter().zip(u).map(|(w, u)| w * u).sum();
        let var = s - mean * mean;
        let q = match self.quotient {
            Quotient::MuOfLambda { lambda } => (e + lambda * s) / f,
            Quotient::LambdaOfMuSublinear { mu } => (e + mu * f) / s,
            Quotient::LambdaOfMuSuperlinear { mu } => (e - mu * f) / s,
            Quotient::Deficit { big_lambda } => (e - big_lambda * entropy(g, self.exponent, u, s, f)) / var,
        };
        if let Some(grad) = grad {
            g.laplacian(u, &mut self.lu);
            for i in 0..u.len() {
                let ge = -2.0 * self.lu[i];
                grad[i] = match self.quotient {
                    Quotient::MuOfLambda { lambda } => (ge + 2.0 * lambda * u[i] - q * fgrad(u[i])) / f,
                    Quotient::LambdaOfMuSublinear { mu } => (ge + mu * fgrad(u[i]) - 2.0 * q * u[i]) / s,
                    Quotient::LambdaOfMuSuperlinear { mu } => (ge - mu * fgrad(u[i]) - 2.0 * q * u[i]) / s,
                    Quotient::Deficit { big_lambda } => {
                        let ge_ent = match self.exponent {
                            Exponent::LogSobolev => {
                                let x = u[i] * u[i];
                                if x > 0.0 {
                                    u[i] * (x / s).ln()
                                } else {
                                    0.0
                                }
                            }
                            Exponent::Power(p) => (fgrad(u[i]) - 2.0 * u[i]) / (p - 1.0),
                        };
                        (ge - big_lambda * ge_ent - 2.0 * q * (u[i] - mean)) / var
                    }
                };
            }
        }
        q
    }
}

/// `e(u) = (F - S)/(p-1)`, or `½∫u² log(u²/S)` at the log-Sobolev endpoint.
fn entropy(g: &Grid, exponent: Exponent, u: &[f64], s: f64, f: f64) -> f64 {
    match exponent {
        Exponent::Power(p) => (f - s) / (p - 1.0),
        Exponent::LogSobolev => {
            0.5 * g
                .weights()
                .iter()
                .zip(u)
                .map(|(w, u)| {
                    let x = u * u;
                    if x > 0.0 {
                        w * x * (x / s).ln()
                    } else {
                        0.0
                    }
                })
                .sum::<f64>()
        }
    }
}

/// `J_Λ[u] = ‖∇u‖² - Λ e(u)`.
pub fn j_lambda(u: &Field, big_lambda: f64, exponent: Exponent) -> Result<f64> {
    let g = u.grid();
    let v = u.values();
    match exponent {
        Exponent::LogSobolev => {
            if v.iter().any(|x| *x <= 0.0) {
                return Err(Error::Domain("the logarithmic entropy needs u > 0".into()));
            }
        }
        Exponent::Power(p) => {
            if !(p > 0.0) || p == 1.0 {
                return invalid(format!("p = {p} must be positive and different from 1"));
            }
        }
    }
    let s = wdot(g.weights(), v, v);
    let f = match exponent {
        Exponent::Power(p) => g.lp_norm(v, p + 1.0)?.powi(2),
        Exponent::LogSobolev => 0.0,
    };
    Ok(g.energy(v) - big_lambda * entropy(g, exponent, v, s, f))
}

/// Per-start iteration cap inside threshold bisections.
pub const BISECTION_MAX_ITER: usize = 1000;

/// Tuning of the descent.
#[derive(Debug, Clone, PartialEq)]
pub struct DescentOptions {
    pub seed: u64,
    pub max_iter: usize,
    /// Stop a start as soon as the quotient drops below this value.
    pub target: Option<f64>,
    /// Skip the constant start (its value is known exactly).
    pub skip_constant: bool,
    /// Additional starting fields.
    pub extra_starts: Vec<Vec<f64>>,
}

impl Default for DescentOptions {
    fn default() -> Self {
        Self {
            seed: 0x5eed,
            max_iter: 6000,
            target: None,
            skip_constant: false,
            extra_starts: Vec::new(),
        }
    }
}

/// Result of minimizing a quotient. `lambda_in` is the parameter of the
/// quotient (`λ`, `μ` or `Λ`), `mu_out` its infimum.
#[derive(Debug, Clone)]
pub struct QuotientSolve<'g> {
    pub lambda_in: f64,
    pub mu_out: f64,
    pub minimizer: Field<'g>,
    pub constant_deviation: f64,
    pub iterations: usize,
    pub converged: bool,
    pub restarts_used: usize,
    pub gradient_norm: f64,
}

struct Descent {
    value: f64,
    u: Vec<f64>,
    iterations: usize,
    converged: bool,
    grad_norm: f64,
}

/// Grid, exponent and spectral data shared by repeated minimizations.
pub struct Problem<'g> {
    pub grid: &'g Grid,
    pub exponent: Exponent,
    pub gap: EigenPair<'g>,
}

impl<'g> Problem<'g> {
    pub fn new(grid: &'g Grid, exponent: Exponent) -> Result<Self> {
        if let Exponent::Power(p) = exponent {
            if !(p > 0.0 && p.is_finite()) || p == 1.0 {
                return invalid(format!("p = {p} must be positive, finite and different from 1"));
            }
        }
        Ok(Self {
            grid,
            exponent,
            gap: spectral_gap(grid)?,
        })
    }

    pub fn lambda2(&self) -> f64 {
        self.gap.eigenvalue
    }

    /// Bifurcation value `λ₂/|p-1|` of the discrete problem.
    pub fn bifurcation(&self) -> f64 {
        self.lambda2() / self.exponent.scale()
    }

    fn starts(&self, parameter: f64, opts: &DescentOptions) -> Vec<Vec<f64>> {
        let g = self.grid;
        let u2 = self.gap.eigenfunction.values();
        let mut starts = Vec::new();
        if !opts.skip_constant {
            starts.push(vec![1.0; g.len()]);
        }
        starts.push(u2.iter().map(|v| 1.0 + 0.1 * v).collect());
        starts.push(u2.iter().map(|v| 1.0 - 0.1 * v).collect());
        starts.push(random_smooth_positive(g, opts.seed, 0.6));
        // Peak at the first node (a corner, or the centre of a ball).
        let width = (3.0 * g.spacing()[0]).max(1.0 / parameter.abs().max(1.0).sqrt());
        starts.push(
            (0..g.len())
                .map(|i| {
                    let x = g.point(i);
                    0.05 + (-(x[0] * x[0] + x[1] * x[1]) / (width * width)).exp()
                })
                .collect(),
        );
        starts.extend(opts.extra_starts.iter().cloned());
        starts
    }

    /// Multi-start minimization of `quotient`.
    pub fn minimize(&self, quotient: Quotient, opts: &DescentOptions) -> Result<QuotientSolve<'g>> {
        let param = quotient.parameter();
        if !param.is_finite() {
            return invalid("quotient parameter must be finite");
        }
        match (quotient, self.exponent) {
            (Quotient::MuOfLambda { .. } | Quotient::LambdaOfMuSuperlinear { .. }, e)
                if e.value() <= 1.0 =>
            {
                return invalid("this quotient needs p > 1");
            }
            (Quotient::LambdaOfMuSublinear { .. }, e) if e.value() >= 1.0 => {
                return invalid("this quotient needs p < 1");
            }
            _ => {}
        }
        let shift = param.abs().max(1.0);
        let lu = self
            .grid
            .stiffness_plus_diagonal(&vec![shift; self.grid.len()])
            .factor()?;
        let mut best: Option<Descent> = None;
        let mut total_iter = 0;
        let mut used = 0;
        let mut last_err = None;
        for start in self.starts(param, opts) {
            used += 1;
            match descend(self.grid, self.exponent, quotient, &lu, shift, start, opts) {
                Ok(d) => {
                    total_iter += d.iterations;
                    let hit = opts.target.is_some_and(|t| d.value < t);
                    if best.as_ref().map_or(true, |b| d.value < b.value) {
                        best = Some(d);
                    }
                    if hit {
                        break;
                    }
                }
                Err(e) => last_err = Some(e),
            }
        }
        let best = match best {
            Some(b) => b,
            None => {
                return Err(last_err.unwrap_or(Error::NonConvergence {
                    solver: "quotient descent",
                    iterations: total_iter,
                    residual: f64::NAN,
                }))
            }
        };
        let minimizer = Field::new(self.grid, best.u)?;
        Ok(QuotientSolve {
            lambda_in: param,
            mu_out: best.value,
            constant_deviation: minimizer.deviation() / minimizer.mean().abs().max(1e-300),
            minimizer,
            iterations: total_iter,
            converged: best.converged,
            restarts_used: used,
            gradient_norm: best.grad_norm,
        })
    }

    /// `μ(λ)` for `p > 1`, or `λ(μ)` for `p < 1`: the quotient whose value
    /// equals its parameter exactly in the rigidity regime.
    pub fn threshold_quotient(&self, parameter: f64, opts: &DescentOptions) -> Result<QuotientSolve<'g>> {
        if !(parameter > 0.0) {
            return invalid("the parameter must be positive");
        }
        let q = match self.exponent {
            Exponent::Power(p) if p > 1.0 => Quotient::MuOfLambda { lambda: parameter },
            Exponent::Power(_) => Quotient::LambdaOfMuSublinear { mu: parameter },
            Exponent::LogSobolev => return invalid("use the deficit quotient at p = 1"),
        };
        self.minimize(q, opts)
    }

    /// `λ(μ)`; for `p > 1` the returned `mu_out` is already `-inf (E - μF)/S`.
    pub fn lambda_of_mu(&self, mu: f64, opts: &DescentOptions) -> Result<QuotientSolve<'g>> {
        if !(mu > 0.0) {
            return invalid("μ must be positive");
        }
        match self.exponent {
            Exponent::Power(p) if p > 1.0 => {
                let mut s = self.minimize(Quotient::LambdaOfMuSuperlinear { mu }, opts)?;
                s.mu_out = -s.mu_out;
                Ok(s)
            }
            Exponent::Power(_) => self.minimize(Quotient::LambdaOfMuSublinear { mu }, opts),
            Exponent::LogSobolev => invalid("λ(μ) needs p ≠ 1"),
        }
    }

    /// Brackets the largest parameter at which the threshold quotient still
    /// equals its parameter. Equality at `λ` holds exactly when
    /// `J_{|p-1|λ} ≥ 0`, so the bisection runs on the sign of the minimized
    /// `J_Λ/‖u - ∫u‖²`, which near the constants is linear in `λ₂ - Λ`
    /// rather than quadratic.
    pub fn estimate_mu2(&self, tol: f64, opts: &DescentOptions) -> Result<Mu2Bracket> {
        let scale = match self.exponent {
            Exponent::Power(p) => (p - 1.0).abs(),
            Exponent::LogSobolev => return invalid("μ₂ needs p ≠ 1; use estimate_lambda_star at p = 1"),
        };
        let b = self.estimate_lambda_star(tol, opts)?;
        Ok(Mu2Bracket {
            lo: b.lo / scale,
            hi: b.hi / scale,
            ..b
        })
    }

    /// Brackets `Λ⋆ = sup{Λ : J_Λ ≥ 0}` by bisection on the sign of the
    /// minimized `J_Λ/‖u - ∫u‖²` (negative means `Λ > Λ⋆`).
    pub fn estimate_lambda_star(&self, tol: f64, opts: &DescentOptions) -> Result<Mu2Bracket> {
        if !(tol > 0.0) {
            return invalid("tolerance must be positive");
        }
        let breaks = |big: f64| -> Result<bool> {
            // Below the threshold the iterates drift slowly into the
            // constants, so each start gets a shorter budget.
            let o = DescentOptions {
                target: Some(-tol * big),
                skip_constant: true,
                max_iter: opts.max_iter.min(BISECTION_MAX_ITER),
                ..opts.clone()
            };
            Ok(self.minimize(Quotient::Deficit { big_lambda: big }, &o)?.mu_out < -tol * big)
        };
        bisect_threshold(self.lambda2(), self.lambda2() * tol, breaks)
    }
}

/// Bracket `[lo, hi]` around a threshold; `open` means no breaking value was
/// found below the search cap, and `hi` is then infinite.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Mu2Bracket {
    pub lo: f64,
    pub hi: f64,
    pub open: bool,
    pub evaluations: usize,
}

impl Mu2Bracket {
    pub fn mid(&self) -> f64 {
        0.5 * (self.lo + self.hi)
    }
}

fn bisect_threshold<F: Fn(f64) -> Result<bool>>(guess: f64, width: f64, breaks: F) -> Result<Mu2Bracket> {
    let mut evals = 0;
    let mut lo = 0.25 * guess;
    let mut hi = 1.5 * guess;
    let mut tries = 0;
    loop {
        evals += 1;
        if !breaks(lo)? {
            break;
        }
        hi = lo;
        lo *= 0.5;
        tries += 1;
        if tries > 20 {
            return Ok(Mu2Bracket {
                lo: 0.0,
                hi,
                open: false,
                evaluations: evals,
            });
        }
    }
    if hi > lo * 1.5 || tries == 0 {
        loop {
            evals += 1;
            if breaks(hi)? {
                break;
            }
            lo = hi;
            hi *= 1.5;
            if hi > 10.0 * guess {
                return Ok(Mu2Bracket {
                    lo,
                    hi: f64::INFINITY,
                    open: true,
                    evaluations: evals,
                });
            }
        }
    }
    while hi - lo > width {
        let mid = 0.5 * (lo + hi);
        evals += 1;
        if breaks(mid)? {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(Mu2Bracket {
        lo,
        hi,
        open: false,
        evaluations: evals,
    })
}

fn descend(
    grid: &Grid,
    exponent: Exponent,
    quotient: Quotient,
    lu: &BandLu,
    shift: f64,
    start: Vec<f64>,
    opts: &DescentOptions,
) -> Result<Descent> {
    let w = grid.weights();
    let n = grid.len();
    let mut ev = Evaluator::new(grid, exponent, quotient);
    let normalize = |u: &mut Vec<f64>| {
        u.iter_mut().for_each(|v| *v = v.abs());
        let s = wdot(w, u, u).sqrt();
        u.iter_mut().for_each(|v| *v /= s);
    };
    let precondition = |g: &[f64], out: &mut Vec<f64>| {
        out.clear();
        out.extend(g.iter().zip(w).map(|(g, w)| g * w));
        lu.solve_in_place(out);
    };
    let mut u = start;
    if u.len() != n || u.iter().any(|v| !v.is_finite()) {
        return invalid("starting field does not match the grid");
    }
    normalize(&mut u);
    let mut g = vec![0.0; n];
    let mut q = ev.eval(&u, Some(&mut g));
    let mut d = Vec::with_capacity(n);
    precondition(&g, &mut d);
    let mut gpg = wdot(w, &g, &d).max(0.0);
    let scale = q.abs().max(1.0);
    let mut tau = 0.5;
    let mut history = vec![q];
    let mut u_new = vec![0.0; n];
    let mut g_new = vec![0.0; n];
    let mut lap = vec![0.0; n];
    let mut converged = false;
    let mut it = 0;
    while it < opts.max_iter {
        if gpg.sqrt() <= 1e-12 * scale {
            converged = true;
            break;
        }
        if opts.target.is_some_and(|t| q < t) {
            break;
        }
        let mut accepted = false;
        let mut q_new = q;
        for _ in 0..60 {
            for i in 0..n {
                u_new[i] = u[i] - tau * d[i];
            }
            normalize(&mut u_new);
            q_new = ev.eval(&u_new, None);
            if q_new.is_finite() && q_new <= q - 1e-4 * tau * gpg {
                accepted = true;
                break;
            }
            tau *= 0.5;
        }
        if !accepted {
            // No decrease is possible at round-off level: stationary.
            converged = gpg.sqrt() <= 1e-6 * scale;
            break;
        }
        ev.eval(&u_new, Some(&mut g_new));
        it += 1;
        // Barzilai-Borwein length in the metric of the preconditioner.
        let s: Vec<f64> = u_new.iter().zip(&u).map(|(a, b)| a - b).collect();
        let y: Vec<f64> = g_new.iter().zip(&g).map(|(a, b)| a - b).collect();
        grid.laplacian(&s, &mut lap);
        let sps: f64 = (0..n).map(|i| w[i] * s[i] * (shift * s[i] - lap[i])).sum();
        let sy = wdot(w, &s, &y);
        tau = if sy > 0.0 { (sps / sy).clamp(1e-6, 1e6) } else { (2.0 * tau).min(1e6) };
        std::mem::swap(&mut u, &mut u_new);
        std::mem::swap(&mut g, &mut g_new);
        q = q_new;
        precondition(&g, &mut d);
        gpg = wdot(w, &g, &d).max(0.0);
        history.push(q);
        let k = history.len();
        if k > 20 {
            let old = history[k - 21];
            let stalled = (old - q).abs() <= 1e-10 * scale;
            if stalled && gpg.sqrt() <= 1e-8 * scale {
                converged = true;
                break;
            }
        }
        let spread = relative_spread(grid, &u);
        if spread < 1e-9 && gpg.sqrt() <= 1e-6 * scale {
            // Collapsed onto the constants, which are critical points.
            converged = true;
            break;
        }
        if matches!(quotient, Quotient::Deficit { .. }) && spread < 1e-5 && q > 0.0 {
            // The deficit quotient is singular at the constants and tends
            // to `λ₂ - Λ` there; drifting into them means no negative value
            // is reachable from this start.
            converged = true;
            break;
        }
    }
    Ok(Descent {
        value: q,
        u,
        iterations: it,
        converged,
        grad_norm: gpg.sqrt(),
    })
}

fn relative_spread(grid: &Grid, u: &[f64]) -> f64 {
    let m = grid.integrate(u);
    let dev: f64 = grid
        .weights()
        .iter()
        .zip(u)
        .map(|(w, v)| w * (v - m) * (v - m))
        .sum();
    dev.sqrt() / m.abs().max(1e-300)
}

/// `μ(λ)` for `p > 1` or `λ(μ)` for `p < 1`, with default options.
pub fn minimize_quotient(grid: &Grid, lambda: f64, p: f64) -> Result<QuotientSolve<'_>> {
    Problem::new(grid, Exponent::Power(p))?.threshold_quotient(lambda, &DescentOptions::default())
}

/// See [`Problem::estimate_mu2`].
pub fn estimate_mu2(grid: &Grid, p: f64, tol: f64) -> Result<Mu2Bracket> {
    Problem::new(grid, Exponent::Power(p))?.estimate_mu2(tol, &DescentOptions::default())
}

/// Least-squares slope of `log μ(λ)` against `log λ`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScalingFit {
    pub slope: f64,
    pub intercept: f64,
    pub lambdas: Vec<f64>,
    pub mus: Vec<f64>,
}

pub fn fit_scaling_exponent(grid: &Grid, p: f64, lambda_list: &[f64]) -> Result<ScalingFit> {
    if !(p > 1.0) {
        return invalid("the scaling fit needs p > 1");
    }
    if lambda_list.len() < 3 {
        return invalid("need at least three values of λ");
    }
    let lo = lambda_list.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = lambda_list.iter().copied().fold(0.0, f64::max);
    if !(lo > 0.0) || (hi / lo).log10() < 1.5 {
        return invalid("λ values must be positive and span at least 1.5 decades");
    }
    let prob = Problem::new(grid, Exponent::Power(p))?;
    let mut mus = Vec::with_capacity(lambda_list.len());
    for &l in lambda_list {
        let opts = DescentOptions {
            max_iter: 20000,
            ..DescentOptions::default()
        };
        mus.push(prob.threshold_quotient(l, &opts)?.mu_out);
    }
    let x: Vec<f64> = lambda_list.iter().map(|l| l.ln()).collect();
    let y: Vec<f64> = mus.iter().map(|m| m.ln()).collect();
    let (slope, intercept) = linear_fit(&x, &y);
    Ok(ScalingFit {
        slope,
        intercept,
        lambdas: lambda_list.to_vec(),
        mus,
    })
}

/// One row of a parameter sweep.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRow {
    pub parameter: f64,
    pub value: f64,
    pub constant_deviation: f64,
    pub iterations: usize,
}

impl From<&QuotientSolve<'_>> for SweepRow {
    fn from(s: &QuotientSolve<'_>) -> Self {
        Self {
            parameter: s.lambda_in,
            value: s.mu_out,
            constant_deviation: s.constant_deviation,
            iterations: s.iterations,
        }
    }
}

pub fn write_sweep_csv<W: Write>(rows: &[SweepRow], out: &mut W, comment: Option<&str>) -> Result<()> {
    if let Some(c) = comment {
        writeln!(out, "# {c}")?;
    }
    writeln!(out, "parameter,value,constant_deviation,iterations")?;
    for r in rows {
        writeln!(out, "{},{},{},{}", r.parameter, r.value, r.constant_deviation, r.iterations)?;
    }
    Ok(())
}
