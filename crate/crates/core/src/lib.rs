//! Numerical toolkit for the Neumann problem `-ε(p)Δu + λu - u^p = 0` on
//! convex domains of unit measure: explicit rigidity bounds, interpolation
//! quotients, bifurcation branches, entropy flows and the Keller-Lieb-Thirring
//! duality.

pub mod branch;
pub mod constants;
pub mod error;
pub mod flow;
pub mod grid;
pub mod klt;
pub mod linalg;
pub mod numerics;
pub mod rng;
pub mod spectral;
pub mod variational;

pub use constants::{
    beckner_bound, beta_roots, improvement_phi, make_exponents, make_log_sobolev_exponents,
    r_coefficient, rigidity_bounds, scaling_exponent, BetaRoots, BoundsReport, Exponent,
    ExponentSet, Improvement, RootKind,
};
pub use branch::{estimate_mu1, newton_solve, trace_branch, BranchPoint, BranchTrace};
pub use error::{Error, Result};
pub use flow::{demange_check, heat_flow_run, nonlinear_flow_run, FlowTrace};
pub use grid::{build_grid, Domain, DomainKind, Field, Grid};
pub use klt::{holder_pairing_check, klt_duality_check, optimal_potential, KltResult};
pub use spectral::{schrodinger_ground_state, spectral_gap, EigenPair};
pub use variational::{
    estimate_mu2, fit_scaling_exponent, minimize_quotient, DescentOptions, Mu2Bracket, Problem,
    Quotient, QuotientSolve,
};
