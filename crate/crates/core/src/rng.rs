//! Seeded random fields. The only generator used anywhere is SplitMix64.

use rand_core::{RngCore, SeedableRng};
use rand_xoshiro::SplitMix64;

use crate::grid::{DomainKind, Grid};

/// Uniform sample in `[0, 1)` with 53 random bits.
pub fn uniform(rng: &mut SplitMix64) -> f64 {
    (rng.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}

pub fn seeded(seed: u64) -> SplitMix64 {
    SplitMix64::seed_from_u64(seed)
}

/// Smooth strictly positive field: one plus a random combination of the
/// lowest Neumann cosine modes, rescaled so the perturbation has sup norm
/// `amplitude < 1`.
pub fn random_smooth_positive(grid: &Grid, seed: u64, amplitude: f64) -> Vec<f64> {
    let mut rng = seeded(seed);
    let modes = 4usize;
    let lengths = grid.lengths().to_vec();
    let two_d = grid.domain().kind == DomainKind::Rectangle;
    let mut coeffs = Vec::new();
    for kx in 0..=modes {
        for ky in 0..=(if two_d { modes } else { 0 }) {
            if kx + ky == 0 || kx + ky > modes {
                continue;
            }
            let decay = 1.0 / (1.0 + (kx * kx + ky * ky) as f64);
            coeffs.push((kx, ky, (2.0 * uniform(&mut rng) - 1.0) * decay));
        }
    }
    let mut pert: Vec<f64> = (0..grid.len())
        .map(|i| {
            let x = grid.point(i);
            coeffs
                .iter()
                .map(|&(kx, ky, c)| {
                    let cx = (kx as f64 * std::f64::consts::PI * x[0] / lengths[0]).cos();
                    let cy = if two_d {
                        (ky as f64 * std::f64::consts::PI * x[1] / lengths[1]).cos()
                    } else {
                        1.0
                    };
                    c * cx * cy
                })
                .sum()
        })
        .collect();
    let sup = pert.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
    if sup > 0.0 {
        pert.iter_mut().for_each(|v| *v *= amplitude / sup);
    }
    pert.into_iter().map(|v| 1.0 + v).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{build_grid, Domain};

    #[test]
    fn same_seed_same_field() {
        let g = build_grid(&Domain::unit_square(), 12).unwrap();
        assert_eq!(random_smooth_positive(&g, 7, 0.5), random_smooth_positive(&g, 7, 0.5));
        assert_ne!(random_smooth_positive(&g, 7, 0.5), random_smooth_positive(&g, 8, 0.5));
    }

    #[test]
    fn fields_are_positive() {
        let g = build_grid(&Domain::unit_interval(), 64).unwrap();
        for seed in 0..20 {
            let f = random_smooth_positive(&g, seed, 0.9);
            assert!(f.iter().all(|v| *v >= 0.1 - 1e-12));
        }
    }

    #[test]
    fn uniform_in_unit_interval() {
        let mut r = seeded(1);
        for _ in 0..1000 {
            let u = uniform(&mut r);
            assert!((0.0..1.0).contains(&u));
        }
    }
}
