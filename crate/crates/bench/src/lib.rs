//! Fixtures shared by the benchmarks.

use linni::{build_grid, spectral_gap, Domain, Field, Grid};

pub fn interval(n: usize) -> Grid {
    build_grid(&Domain::unit_interval(), n).expect("valid interval grid")
}

pub fn square(n: usize) -> Grid {
    build_grid(&Domain::unit_square(), n).expect("valid square grid")
}

/// `max(1 + a·u₂, 1e-3)` with `u₂` the spectral gap eigenfunction.
pub fn perturbed_constant(grid: &Grid, amplitude: f64) -> Field<'_> {
    spectral_gap(grid)
        .expect("spectral gap converges")
        .eigenfunction
        .map(|u| (1.0 + amplitude * u).max(1e-3))
}
