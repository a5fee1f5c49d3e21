//! Closed-form exponents, thresholds and bound functions.
//!
//! Everything here is a pure function of `(p, d, β, θ, λ₂)`. The exponent
//! `p = 1` is the logarithmic Sobolev endpoint; it is selected explicitly
//! through [`Exponent::LogSobolev`] because the sign `ε(p) = (p-1)/|p-1|`
//! has no value there.
//!
//! Bounds in [`BoundsReport`] are expressed on the threshold scale
//! `μ = Λ/|p-1|` (the scale of `μ₁`, `μ₂`); at the log-Sobolev endpoint the
//! scale factor is one.

use serde::Serialize;

use crate::error::{invalid, Error, Result};
use crate::numerics::{dormand_prince, integrate_adaptive};

/// Nonlinearity exponent, with the logarithmic Sobolev endpoint flagged.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum Exponent {
    Power(f64),
    LogSobolev,
}

impl Exponent {
    pub fn value(self) -> f64 {
        match self {
            Exponent::Power(p) => p,
            Exponent::LogSobolev => 1.0,
        }
    }

    /// `ε(p)`; `None` at the log-Sobolev endpoint.
    pub fn epsilon(self) -> Option<f64> {
        match self {
            Exponent::Power(p) if p > 1.0 => Some(1.0),
            Exponent::Power(_) => Some(-1.0),
            Exponent::LogSobolev => None,
        }
    }

    /// `|p-1|`, or 1 at the log-Sobolev endpoint.
    pub fn scale(self) -> f64 {
        match self {
            Exponent::Power(p) => (p - 1.0).abs(),
            Exponent::LogSobolev => 1.0,
        }
    }
}

/// Critical Sobolev exponent `2* = 2d/(d-2)`, finite only for `d ≥ 3`.
pub fn two_star(d: usize) -> Option<f64> {
    (d >= 3).then(|| 2.0 * d as f64 / (d as f64 - 2.0))
}

/// Validates `p` against `(0,1) ∪ (1, 2*-1)`.
pub fn check_exponent(p: f64, d: usize) -> Result<()> {
    if d == 0 {
        return invalid("dimension must be at least 1");
    }
    if !p.is_finite() || p <= 0.0 {
        return Err(Error::ExponentRange {
            p,
            d,
            reason: "p must be positive and finite".into(),
        });
    }
    if p == 1.0 {
        return invalid("p = 1 requires the log-Sobolev flag");
    }
    if let Some(ts) = two_star(d) {
        if p >= ts - 1.0 {
            return Err(Error::ExponentRange {
                p,
                d,
                reason: format!("p must stay below the critical exponent 2*-1 = {}", ts - 1.0),
            });
        }
    }
    Ok(())
}

/// `θ⋆(p,d) = (d-1)² p / (d(d+2) + p)`.
pub fn theta_star(p: f64, d: usize) -> f64 {
    let d = d as f64;
    (d - 1.0).powi(2) * p / (d * (d + 2.0) + p)
}

/// `ϑ(p,d) = p (d-1)² / (d(d+2))`.
pub fn vartheta(p: f64, d: usize) -> f64 {
    let d = d as f64;
    p * (d - 1.0).powi(2) / (d * (d + 2.0))
}

/// `p♯ = d(d+2)/(d-1)²`; infinite for `d = 1`.
pub fn p_sharp(d: usize) -> Option<f64> {
    let df = d as f64;
    (d >= 2).then(|| df * (df + 2.0) / (df - 1.0).powi(2))
}

/// Flow exponent `κ = β(p-1) + 1`.
pub fn kappa_flow(beta: f64, p: f64) -> f64 {
    beta * (p - 1.0) + 1.0
}

/// Exponent `δ = (p+1+β(p-3)) / (2β(p-1))`, defined for `β > 1`, `p ≠ 1`.
pub fn delta(beta: f64, p: f64) -> Option<f64> {
    (beta > 1.0 && p != 1.0).then(|| (p + 1.0 + beta * (p - 3.0)) / (2.0 * beta * (p - 1.0)))
}

/// Large-λ power law of `μ(λ)`: `1 - (d/2)(p-1)/(p+1)`.
pub fn scaling_exponent(p: f64, d: usize) -> f64 {
    1.0 - 0.5 * d as f64 * (p - 1.0) / (p + 1.0)
}

/// Every closed-form constant attached to `(p, d, β)`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExponentSet {
    pub exponent: Exponent,
    pub p: f64,
    pub d: usize,
    pub epsilon: Option<f64>,
    pub two_star: Option<f64>,
    pub theta_star: f64,
    pub vartheta: f64,
    pub p_sharp: Option<f64>,
    pub beta: f64,
    pub kappa_flow: f64,
    pub delta: Option<f64>,
    pub q_holder: Option<f64>,
}

impl ExponentSet {
    pub fn is_log_sobolev(&self) -> bool {
        self.exponent == Exponent::LogSobolev
    }
}

/// Builds the exponent set for `p ≠ 1`.
pub fn make_exponents(p: f64, d: usize, beta: f64) -> Result<ExponentSet> {
    check_exponent(p, d)?;
    make_exponent_set(Exponent::Power(p), d, beta)
}

/// Builds the exponent set at the log-Sobolev endpoint `p = 1`.
pub fn make_log_sobolev_exponents(d: usize, beta: f64) -> Result<ExponentSet> {
    if d == 0 {
        return invalid("dimension must be at least 1");
    }
    make_exponent_set(Exponent::LogSobolev, d, beta)
}

/// Dispatches on [`Exponent`].
pub fn make_exponent_set(exponent: Exponent, d: usize, beta: f64) -> Result<ExponentSet> {
    if let Exponent::Power(p) = exponent {
        check_exponent(p, d)?;
    }
    if !beta.is_finite() {
        return invalid("β must be finite");
    }
    let p = exponent.value();
    let q_holder = match exponent {
        Exponent::Power(p) => Some((p + 1.0) / (p - 1.0).abs()),
        Exponent::LogSobolev => None,
    };
    Ok(ExponentSet {
        exponent,
        p,
        d,
        epsilon: exponent.epsilon(),
        two_star: two_star(d),
        theta_star: theta_star(p, d),
        vartheta: vartheta(p, d),
        p_sharp: p_sharp(d),
        beta,
        kappa_flow: kappa_flow(beta, p),
        delta: delta(beta, p),
        q_holder,
    })
}

/// Dissipation coefficient
/// `R = -(1/θ)((d-1)/(d+2))²(κ+β-1)² + κ(β-1) + (κ+β-1) d/(d+2)`.
pub fn r_coefficient(theta: f64, beta: f64, p: f64, d: usize) -> Result<f64> {
    if theta == 0.0 || !theta.is_finite() {
        return invalid("θ must be nonzero and finite");
    }
    let df = d as f64;
    let kappa = kappa_flow(beta, p);
    let c = (df - 1.0) / (df + 2.0);
    let s = kappa + beta - 1.0;
    Ok(-c * c * s * s / theta + kappa * (beta - 1.0) + s * df / (df + 2.0))
}

/// Shape of the root set of `R(β) = 0`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum RootKind {
    Distinct,
    Double,
    /// The leading coefficient vanishes and only one root remains.
    Single,
}

/// Roots of `R(β) = 0` written as `Aβ² - 2Bβ + 1 = 0` with
/// `A = ((d-1)/(d+2))² p²/θ - p + 1` and `B = 1 - p/(d+2)`; `R = -(Aβ² - 2Bβ + 1)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BetaRoots {
    pub minus: f64,
    pub plus: f64,
    pub leading: f64,
    pub half_linear: f64,
    pub discriminant: f64,
    pub kind: RootKind,
}

impl BetaRoots {
    /// Interval of positive `β` on which `R > 0`; unbounded above when the
    /// leading coefficient is not positive.
    pub fn admissible_interval(&self) -> (f64, f64) {
        if self.leading > 0.0 {
            (self.minus, self.plus)
        } else {
            let lo = [self.minus, self.plus]
                .into_iter()
                .filter(|b| *b > 0.0)
                .fold(f64::INFINITY, f64::min);
            (if lo.is_finite() { lo } else { 0.0 }, f64::INFINITY)
        }
    }

    /// Representative admissible exponent.
    ///
    /// Arithmetic midpoint of the roots when the admissible set is bounded;
    /// otherwise the midpoint of the roots in the reciprocal variable `1/β`,
    /// which is `1/B = (d+2)/(d+2-p)`.
    pub fn midpoint(&self) -> f64 {
        if self.leading > 0.0 {
            0.5 * (self.minus + self.plus)
        } else {
            1.0 / self.half_linear
        }
    }
}

/// Solves `R(β) = 0` for `θ ∈ [θ⋆(p,d), 1]`.
pub fn beta_roots(theta: f64, p: f64, d: usize) -> Result<BetaRoots> {
    if !(theta > 0.0 && theta <= 1.0) {
        return invalid(format!("θ = {theta} must lie in (0, 1]"));
    }
    let df = d as f64;
    let c = (df - 1.0) / (df + 2.0);
    let a = c * c * p * p / theta - p + 1.0;
    let b = 1.0 - p / (df + 2.0);
    let disc = b * b - a;
    let scale = (b * b).max(a.abs()).max(1e-300);
    if disc < -1e-12 * scale {
        return Err(Error::NoRealRoots(format!(
            "θ = {theta} ≤ θ⋆ = {}: discriminant {disc:.3e}",
            theta_star(p, d)
        )));
    }
    if a.abs() <= 1e-14 * scale {
        let root = 1.0 / (2.0 * b);
        return Ok(BetaRoots {
            minus: root,
            plus: root,
            leading: a,
            half_linear: b,
            discriminant: disc,
            kind: RootKind::Single,
        });
    }
    let sq = disc.max(0.0).sqrt();
    let (kind, r1, r2) = if sq <= 1e-7 * b.abs().max(1e-300) {
        let r = b / a;
        (RootKind::Double, r, r)
    } else {
        // Stable form: the product of the roots is 1/A.
        let q = b + b.signum() * sq;
        (RootKind::Distinct, q / a, 1.0 / q)
    };
    Ok(BetaRoots {
        minus: r1.min(r2),
        plus: r1.max(r2),
        leading: a,
        half_linear: b,
        discriminant: disc,
        kind,
    })
}

/// Explicit rigidity bounds on the threshold scale `Λ/|p-1|`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BoundsReport {
    pub exponent: Exponent,
    pub p: f64,
    pub d: usize,
    pub lambda2: f64,
    /// `(1-θ⋆) λ₂ / |p-1|`, convex domains with `d ≥ 2`.
    pub lower_nonlinear: Option<f64>,
    /// `λ₂ / |p-1|`.
    pub upper: f64,
    /// Heat-flow bound, `p ∈ (0,1)`.
    pub lower_heat: Option<f64>,
    /// `(1-ϑ) λ₂ / (2|p-1|)`, `d ≥ 2` and `p < p♯`.
    pub lower_heat_traceless: Option<f64>,
    /// Beckner-type bound `(1-p)/(1-p^α) λ₂ / (1-p)`, `p ∈ (0,1)`.
    pub lower_beckner: Option<f64>,
    /// Largest applicable lower bound.
    pub best_lower: Option<f64>,
}

impl BoundsReport {
    /// `best_lower` rescaled to a bound on `Λ⋆`.
    pub fn best_lower_lambda_star(&self) -> Option<f64> {
        self.best_lower.map(|b| b * self.exponent.scale())
    }
}

/// Collects every explicit bound that applies to `(p, d)`; `lsi_constant`
/// is an optional value of the log-Sobolev constant `Λ⋆(1)`.
pub fn rigidity_bounds(
    exponent: Exponent,
    d: usize,
    lambda2: f64,
    lsi_constant: Option<f64>,
) -> Result<BoundsReport> {
    if !(lambda2 > 0.0 && lambda2.is_finite()) {
        return invalid("λ₂ must be positive and finite");
    }
    if let Exponent::Power(p) = exponent {
        check_exponent(p, d)?;
    } else if d == 0 {
        return invalid("dimension must be at least 1");
    }
    let p = exponent.value();
    let scale = exponent.scale();
    let lower_nonlinear = (d >= 2).then(|| (1.0 - theta_star(p, d)) * lambda2 / scale);
    let lower_heat = (p < 1.0).then_some(lambda2);
    let lower_heat_traceless = p_sharp(d)
        .filter(|ps| p < *ps)
        .map(|_| 0.5 * (1.0 - vartheta(p, d)) * lambda2 / scale);
    let lower_beckner = match (exponent, lsi_constant) {
        (Exponent::Power(p), Some(lsi)) if p < 1.0 => Some(beckner_bound(p, lambda2, lsi)? / (1.0 - p)),
        _ => None,
    };
    let best_lower = [lower_nonlinear, lower_heat, lower_heat_traceless, lower_beckner]
        .into_iter()
        .flatten()
        .reduce(f64::max);
    Ok(BoundsReport {
        exponent,
        p,
        d,
        lambda2,
        lower_nonlinear,
        upper: lambda2 / scale,
        lower_heat,
        lower_heat_traceless,
        lower_beckner,
        best_lower,
    })
}

/// `(1-p)/(1-p^α) λ₂` with `α = λ₂/Λ⋆(1)`, a lower bound on `Λ⋆(p)` for `p ∈ (0,1)`.
pub fn beckner_bound(p: f64, lambda2: f64, lsi_constant: f64) -> Result<f64> {
    if !(p > 0.0 && p < 1.0) {
        return invalid(format!("p = {p} must lie in (0,1)"));
    }
    if !(lambda2 > 0.0) {
        return invalid("λ₂ must be positive");
    }
    if !(lsi_constant > 0.0) {
        return invalid("Λ⋆(1) must be positive");
    }
    if lsi_constant > lambda2 {
        return invalid(format!(
            "Λ⋆(1) = {lsi_constant} exceeds λ₂ = {lambda2}, which no domain allows"
        ));
    }
    let alpha = lambda2 / lsi_constant;
    if alpha == 1.0 {
        return Ok(lambda2);
    }
    Ok((1.0 - p) / (1.0 - p.powf(alpha)) * lambda2)
}

/// Values of the improvement functions at one point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Improvement {
    pub s: f64,
    /// `φ(s)` from the integral representation.
    pub phi_closed: f64,
    /// `φ(s)` from the initial value problem.
    pub phi_ode: f64,
    /// `Φ(s) = (1+(p-1)s) φ(s/(1+(p-1)s))`, with `φ` from the ODE.
    pub phi_big: f64,
    pub r: f64,
}

impl Improvement {
    pub fn discrepancy(&self) -> f64 {
        (self.phi_closed - self.phi_ode).abs()
    }
}

/// Evaluates `φ` (two ways) and `Φ` at `s ≥ 0` for the exponents in
/// `exponents` (which fix `p`, `d`, `β`) and the parameter `θ`.
pub fn improvement_phi(s: f64, exponents: &ExponentSet, theta: f64) -> Result<Improvement> {
    let p = exponents.p;
    let d = exponents.d;
    let beta = exponents.beta;
    if exponents.is_log_sobolev() {
        return invalid("the improvement function needs p ≠ 1");
    }
    let delta = exponents
        .delta
        .ok_or_else(|| Error::InvalidParameter(format!("β = {beta} must exceed 1")))?;
    if !(s >= 0.0 && s.is_finite()) {
        return invalid(format!("s = {s} must be nonnegative"));
    }
    let ts = theta_star(p, d);
    if !(theta >= ts * (1.0 - 1e-12) && theta <= 1.0) {
        return invalid(format!("θ = {theta} must lie in [θ⋆, 1] = [{ts}, 1]"));
    }
    let r = r_coefficient(theta, beta, p, d)?;
    if r < -1e-12 {
        return invalid(format!("β = {beta} is outside the admissible range (R = {r:.3e})"));
    }
    let r = r.max(0.0);
    if s == 0.0 {
        return Ok(Improvement {
            s,
            phi_closed: 0.0,
            phi_ode: 0.0,
            phi_big: 0.0,
            r,
        });
    }
    let phi_closed = phi_integral(s, p, beta, delta, r)?;
    let phi_ode = phi_initial_value(s, p, beta, delta, r)?;
    let denom = 1.0 + (p - 1.0) * s;
    if denom <= 0.0 {
        return Err(Error::Domain(format!("1+(p-1)s = {denom} ≤ 0")));
    }
    let phi_big = denom * phi_initial_value(s / denom, p, beta, delta, r)?;
    Ok(Improvement {
        s,
        phi_closed,
        phi_ode,
        phi_big,
        r,
    })
}

fn base_positive(p: f64, z: f64) -> Result<f64> {
    let b = 1.0 - (p - 1.0) * z;
    if b <= 0.0 {
        return Err(Error::Domain(format!(
            "1-(p-1)z = {b} ≤ 0 at z = {z}: outside the integration domain"
        )));
    }
    Ok(b)
}

fn phi_integral(s: f64, p: f64, beta: f64, delta: f64, r: f64) -> Result<f64> {
    base_positive(p, s)?;
    let kappa = r / (beta * (beta - 1.0) * (p + 1.0));
    let e = 1.0 - delta;
    let end = (1.0 - (p - 1.0) * s).powf(e);
    integrate_adaptive(
        |z| (kappa * ((1.0 - (p - 1.0) * z).powf(e) - end)).exp(),
        0.0,
        s,
        1e-10,
    )
}

fn phi_initial_value(s: f64, p: f64, beta: f64, delta: f64, r: f64) -> Result<f64> {
    base_positive(p, s)?;
    let c = r / (2.0 * beta * beta);
    dormand_prince(
        |z, phi| 1.0 + phi * c * (1.0 - (p - 1.0) * z).powf(-delta),
        0.0,
        0.0,
        s,
        1e-10,
        1e-14,
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn log_sobolev_theta_star_in_three_dimensions() {
        let e = make_log_sobolev_exponents(3, 1.0).unwrap();
        assert!((e.theta_star - 0.25).abs() < 1e-15);
        assert_eq!(e.epsilon, None);
        assert_eq!(e.kappa_flow, 1.0);
    }

    #[test]
    fn theta_star_tends_to_one_at_critical_exponent() {
        let t = theta_star(5.0 - 1e-9, 3);
        assert!((t - 1.0).abs() < 1e-9);
        assert!(t < 1.0);
        assert!(matches!(
            make_exponents(5.0, 3, 1.0),
            Err(Error::ExponentRange { .. })
        ));
    }

    #[test]
    fn hand_evaluated_constants() {
        let e = make_exponents(2.0, 2, 1.5).unwrap();
        assert!((e.theta_star - 0.2).abs() < 1e-15);
        assert_eq!(e.epsilon, Some(1.0));
        assert_eq!(e.q_holder, Some(3.0));
        let e = make_exponents(2.0, 3, 5.0 / 3.0).unwrap();
        assert!((e.kappa_flow - 8.0 / 3.0).abs() < 1e-15);
        // δ = (3 + (5/3)(-1)) / (2 (5/3)) = 2/5
        assert!((e.delta.unwrap() - 0.4).abs() < 1e-15);
        let e = make_exponents(0.5, 2, 2.0).unwrap();
        assert_eq!(e.epsilon, Some(-1.0));
        assert_eq!(e.q_holder, Some(3.0));
    }

    #[test]
    fn exponent_validation() {
        assert!(matches!(make_exponents(1.0, 2, 1.0), Err(Error::InvalidParameter(_))));
        assert!(make_exponents(-0.5, 2, 1.0).is_err());
        assert!(make_exponents(2.0, 0, 1.0).is_err());
        assert!(make_exponents(50.0, 2, 1.0).is_ok());
        assert_eq!(make_exponents(2.0, 2, 1.0).unwrap().delta, None);
        assert_eq!(make_exponents(2.0, 2, 0.0).unwrap().kappa_flow, 1.0);
    }

    #[test]
    fn vartheta_below_one_iff_below_p_sharp() {
        for d in 2..7 {
            let ps = p_sharp(d).unwrap();
            assert!(vartheta(ps * 0.999, d) < 1.0);
            assert!(vartheta(ps * 1.001, d) > 1.0);
        }
        assert_eq!(p_sharp(1), None);
    }

    #[test]
    fn r_vanishes_at_threshold_pair() {
        for (p, d) in [(2.0, 3), (0.5, 2), (3.0, 2), (1.5, 4)] {
            let beta = (d as f64 + 2.0) / (d as f64 + 2.0 - p);
            let r = r_coefficient(theta_star(p, d), beta, p, d).unwrap();
            assert!(r.abs() < 1e-12, "p={p} d={d} R={r}");
        }
    }

    #[test]
    fn r_at_theta_one_beta_one() {
        for (p, d) in [(2.0, 3usize), (0.5, 2), (3.0, 5)] {
            let df = d as f64;
            let expected = p * df / (df + 2.0) - p * p * ((df - 1.0) / (df + 2.0)).powi(2);
            let r = r_coefficient(1.0, 1.0, p, d).unwrap();
            assert!((r - expected).abs() < 1e-14);
        }
        assert!(r_coefficient(0.0, 1.0, 2.0, 3).is_err());
    }

    #[test]
    fn r_positive_between_roots_near_threshold() {
        let (p, d) = (2.0, 3);
        let theta = theta_star(p, d) + 0.05;
        let roots = beta_roots(theta, p, d).unwrap();
        assert!(roots.leading > 0.0);
        let mid = 0.5 * (roots.minus + roots.plus);
        assert_eq!(roots.midpoint(), mid);
        assert!(r_coefficient(theta, mid, p, d).unwrap() > 0.0);
    }

    #[test]
    fn double_root_at_threshold() {
        let roots = beta_roots(theta_star(2.0, 3), 2.0, 3).unwrap();
        assert_eq!(roots.kind, RootKind::Double);
        assert!((roots.minus - 5.0 / 3.0).abs() < 1e-7);
        assert!((roots.plus - 5.0 / 3.0).abs() < 1e-7);
        assert!(roots.discriminant.abs() < 1e-10);
    }

    #[test]
    fn distinct_roots_satisfy_r_zero() {
        let roots = beta_roots(0.9, 2.0, 3).unwrap();
        assert_eq!(roots.kind, RootKind::Distinct);
        assert!(roots.minus < roots.plus);
        for b in [roots.minus, roots.plus] {
            // Substitution oracle straight into the unsimplified R.
            assert!(r_coefficient(0.9, b, 2.0, 3).unwrap().abs() < 1e-10);
        }
        // Negative leading coefficient: admissible set is unbounded above and
        // the representative exponent is (d+2)/(d+2-p).
        assert!(roots.leading < 0.0);
        assert!((roots.midpoint() - 5.0 / 3.0).abs() < 1e-15);
        assert!(r_coefficient(0.9, roots.midpoint(), 2.0, 3).unwrap() > 0.0);
        assert!(roots.admissible_interval().1.is_infinite());
    }

    #[test]
    fn no_roots_below_threshold() {
        let t = theta_star(2.0, 3) - 0.05;
        assert!(matches!(beta_roots(t, 2.0, 3), Err(Error::NoRealRoots(_))));
    }

    #[test]
    fn single_root_when_leading_coefficient_vanishes() {
        // A = c²p²/θ - p + 1 = 0  <=>  θ = c²p²/(p-1).
        let (p, d) = (2.0, 3usize);
        let c2 = (2.0_f64 / 5.0).powi(2);
        let theta = c2 * p * p / (p - 1.0);
        let roots = beta_roots(theta, p, d).unwrap();
        assert_eq!(roots.kind, RootKind::Single);
        assert!(r_coefficient(theta, roots.minus, p, d).unwrap().abs() < 1e-12);
    }

    #[test]
    fn log_sobolev_bounds_in_two_dimensions() {
        let b = rigidity_bounds(Exponent::LogSobolev, 2, 1.0, None).unwrap();
        assert!((b.lower_nonlinear.unwrap() - 8.0 / 9.0).abs() < 1e-15);
        assert_eq!(b.upper, 1.0);
        assert!(b.best_lower.unwrap() <= b.upper);
    }

    #[test]
    fn heat_bound_for_sublinear_exponent() {
        let l2 = std::f64::consts::PI.powi(2);
        let b = rigidity_bounds(Exponent::Power(0.5), 2, l2, None).unwrap();
        assert_eq!(b.lower_heat, Some(l2));
        assert!(b.lower_beckner.is_none());
        assert!((b.upper - 2.0 * l2).abs() < 1e-12);
    }

    #[test]
    fn superlinear_bounds_in_three_dimensions() {
        let b = rigidity_bounds(Exponent::Power(2.0), 3, 1.0, None).unwrap();
        assert!((b.lower_nonlinear.unwrap() - 9.0 / 17.0).abs() < 1e-15);
        assert_eq!(b.upper, 1.0);
        assert!(b.lower_heat.is_none());
    }

    #[test]
    fn one_dimensional_superlinear_has_no_lower_bound() {
        let b = rigidity_bounds(Exponent::Power(2.0), 1, 1.0, None).unwrap();
        assert!(b.best_lower.is_none());
    }

    #[test]
    fn bounds_continuous_at_log_sobolev_endpoint() {
        let b = rigidity_bounds(Exponent::Power(0.999), 3, 1.0, None).unwrap();
        assert!((b.best_lower_lambda_star().unwrap() - 0.75).abs() < 1e-3);
    }

    #[test]
    fn beckner_examples() {
        for p in [0.1, 0.5, 0.9] {
            assert_eq!(beckner_bound(p, 3.0, 3.0).unwrap(), 3.0);
        }
        let (l2, lsi) = (10.0, 7.0);
        assert!((beckner_bound(1e-9, l2, lsi).unwrap() - l2).abs() < 1e-6);
        assert!((beckner_bound(1.0 - 1e-9, l2, lsi).unwrap() - lsi).abs() < 1e-6);
        assert!(beckner_bound(0.5, 1.0, 1.5).is_err());
        assert!(beckner_bound(1.5, 1.0, 0.5).is_err());
    }

    #[test]
    fn beckner_bound_stored_on_threshold_scale() {
        let b = rigidity_bounds(Exponent::Power(0.5), 2, 10.0, Some(8.0)).unwrap();
        let expected = beckner_bound(0.5, 10.0, 8.0).unwrap() / 0.5;
        assert!((b.lower_beckner.unwrap() - expected).abs() < 1e-12);
        assert!(b.best_lower.unwrap() <= b.upper);
    }

    #[test]
    fn improvement_at_zero() {
        let e = make_exponents(2.0, 3, 5.0 / 3.0).unwrap();
        let imp = improvement_phi(0.0, &e, 0.9).unwrap();
        assert_eq!((imp.phi_closed, imp.phi_ode, imp.phi_big), (0.0, 0.0, 0.0));
    }

    #[test]
    fn improvement_is_identity_when_r_vanishes() {
        let (p, d) = (2.0, 3);
        let beta = 5.0 / 3.0;
        let e = make_exponents(p, d, beta).unwrap();
        for s in [0.05, 0.2, 0.5] {
            let imp = improvement_phi(s, &e, theta_star(p, d)).unwrap();
            assert!(imp.r.abs() < 1e-12);
            assert!((imp.phi_ode - s).abs() < 1e-10);
            assert!((imp.phi_big - s).abs() < 1e-10);
        }
    }

    #[test]
    fn improvement_exceeds_identity_and_routes_agree() {
        let e = make_exponents(2.0, 3, beta_roots(0.9, 2.0, 3).unwrap().midpoint()).unwrap();
        let imp = improvement_phi(0.1, &e, 0.9).unwrap();
        assert!(imp.r > 0.0);
        assert!(imp.phi_big > 0.1);
        assert!(imp.discrepancy() < 1e-8, "discrepancy {}", imp.discrepancy());
    }

    #[test]
    fn improvement_domain_errors() {
        let e = make_exponents(0.5, 2, 1.5).unwrap();
        // 1 + (p-1) s ≤ 0 for s ≥ 2.
        let r = improvement_phi(2.5, &e, 0.5);
        assert!(r.is_err());
        let e = make_exponents(2.0, 3, 1.0).unwrap();
        assert!(improvement_phi(0.1, &e, 0.9).is_err());
    }

    #[test]
    fn scaling_exponent_examples() {
        assert!((scaling_exponent(3.0, 2) - 0.5).abs() < 1e-15);
        assert!((scaling_exponent(1.0 + 1e-12, 4) - 1.0).abs() < 1e-11);
        assert!(scaling_exponent(5.0, 3).abs() < 1e-15);
    }

    proptest! {
        #[test]
        fn theta_star_in_unit_interval(d in 2usize..8, frac in 0.001f64..0.999) {
            let pmax = two_star(d).map(|t| t - 1.0).unwrap_or(200.0);
            let p = frac * pmax;
            let t = theta_star(p, d);
            prop_assert!(t > 0.0 && t < 1.0);
        }

        #[test]
        fn log_sobolev_identity(d in 2usize..40) {
            let df = d as f64;
            let lhs = 1.0 - theta_star(1.0, d);
            prop_assert!((lhs - 4.0 * df / (df + 1.0).powi(2)).abs() < 1e-14);
        }

        #[test]
        fn roots_annihilate_r(d in 2usize..6, frac in 0.05f64..0.95, t in 0.01f64..0.99) {
            let pmax = two_star(d).map(|t| t - 1.0).unwrap_or(8.0);
            let p = frac * pmax;
            if (p - 1.0).abs() < 1e-3 { return Ok(()); }
            let ts = theta_star(p, d);
            let theta = ts + t * (1.0 - ts);
            let roots = beta_roots(theta, p, d).unwrap();
            for b in [roots.minus, roots.plus] {
                let scale = 1.0 + b * b * (1.0 + p * p);
                prop_assert!(r_coefficient(theta, b, p, d).unwrap().abs() < 1e-10 * scale);
            }
            prop_assert!(r_coefficient(theta, roots.midpoint(), p, d).unwrap() > 0.0);
            if theta > ts * 1.01 {
                prop_assert!(beta_roots(ts * 0.99, p, d).is_err());
            }
        }

        #[test]
        fn beckner_monotone_decreasing(ratio in 0.3f64..0.99) {
            let l2 = 9.0;
            let lsi = ratio * l2;
            let mut prev = f64::INFINITY;
            for k in 1..40 {
                let p = k as f64 / 40.0;
                let v = beckner_bound(p, l2, lsi).unwrap();
                prop_assert!(v <= prev + 1e-12);
                prop_assert!(v <= l2 + 1e-12);
                prev = v;
            }
        }

        #[test]
        fn best_lower_below_upper(d in 1usize..7, frac in 0.01f64..0.99, l2 in 0.1f64..50.0) {
            let pmax = two_star(d).map(|t| t - 1.0).unwrap_or(20.0);
            let p = frac * pmax;
            if p == 1.0 { return Ok(()); }
            let b = rigidity_bounds(Exponent::Power(p), d, l2, None).unwrap();
            if let Some(lo) = b.best_lower {
                prop_assert!(lo <= b.upper * (1.0 + 1e-12));
            }
        }

        #[test]
        fn phi_monotone_and_improving(s1 in 0.01f64..0.4, ds in 0.01f64..0.1) {
            let roots = beta_roots(0.9, 2.0, 3).unwrap();
            let e = make_exponents(2.0, 3, roots.midpoint()).unwrap();
            let a = improvement_phi(s1, &e, 0.9).unwrap();
            let b = improvement_phi(s1 + ds, &e, 0.9).unwrap();
            prop_assert!(b.phi_ode > a.phi_ode);
            prop_assert!(a.phi_big >= s1);
        }
    }
}
