//! Convex domains of unit measure, vertex-centred grids and the discrete
//! operators on them.
//!
//! Every grid is described by its node weights `W_i` and a list of edges
//! carrying coefficients `c_e = |e-dual| / h_e²`. The Dirichlet energy is
//! `Σ_e c_e (u_b - u_a)²` and the Laplacian is
//! `(Lu)_i = W_i⁻¹ Σ_{e ∋ i} c_e (u_other - u_i)`, so that
//! `Σ_i W_i u_i (-Lu)_i` equals the energy exactly. At boundary nodes this is
//! the mirror-ghost Neumann stencil.

use std::io::Write;

use serde::Serialize;

use crate::error::{invalid, Error, Result};
use crate::linalg::{wdot, BandMatrix};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum DomainKind {
    Interval,
    Rectangle,
    RadialBall,
}

/// Convex computational domain before normalization.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Domain {
    pub kind: DomainKind,
    /// Space dimension `d` (the ambient dimension for radial balls).
    pub dimension: usize,
    /// Side lengths, or `[radius]` for a ball.
    pub extents: Vec<f64>,
}

impl Domain {
    pub fn interval(length: f64) -> Self {
        Self {
            kind: DomainKind::Interval,
            dimension: 1,
            extents: vec![length],
        }
    }

    pub fn unit_interval() -> Self {
        Self::interval(1.0)
    }

    pub fn rectangle(lx: f64, ly: f64) -> Self {
        Self {
            kind: DomainKind::Rectangle,
            dimension: 2,
            extents: vec![lx, ly],
        }
    }

    pub fn unit_square() -> Self {
        Self::rectangle(1.0, 1.0)
    }

    /// Ball in `R^d`, discretized for radial functions only.
    pub fn radial_ball(d: usize, radius: f64) -> Self {
        Self {
            kind: DomainKind::RadialBall,
            dimension: d,
            extents: vec![radius],
        }
    }

    pub fn measure(&self) -> f64 {
        match self.kind {
            DomainKind::Interval => self.extents[0],
            DomainKind::Rectangle => self.extents[0] * self.extents[1],
            DomainKind::RadialBall => unit_ball_volume(self.dimension) * self.extents[0].powi(self.dimension as i32),
        }
    }

    fn validate(&self) -> Result<()> {
        let expected = match self.kind {
            DomainKind::Interval | DomainKind::RadialBall => 1,
            DomainKind::Rectangle => 2,
        };
        if self.extents.len() != expected {
            return invalid(format!("{:?} needs {expected} extent(s)", self.kind));
        }
        if self.extents.iter().any(|e| !(*e > 0.0 && e.is_finite())) {
            return invalid("domain extents must be positive and finite");
        }
        if self.dimension == 0 {
            return invalid("dimension must be at least 1");
        }
        Ok(())
    }
}

/// Volume of the unit ball in `R^d`.
pub fn unit_ball_volume(d: usize) -> f64 {
    match d {
        0 => 1.0,
        1 => 2.0,
        _ => 2.0 * std::f64::consts::PI / d as f64 * unit_ball_volume(d - 2),
    }
}

/// One finite-difference edge.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Edge {
    pub a: usize,
    pub b: usize,
    /// Length of the edge.
    pub h: f64,
    /// Measure of the region the edge gradient represents.
    pub measure: f64,
    /// `measure / h²`.
    pub coef: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct Cell {
    /// Corners `(0,0)`, `(1,0)`, `(0,1)`, `(1,1)`.
    corners: [usize; 4],
}

/// Discretized domain, rescaled to unit measure.
#[derive(Debug, Clone, PartialEq)]
pub struct Grid {
    domain: Domain,
    scale: f64,
    shape: Vec<usize>,
    spacing: Vec<f64>,
    lengths: Vec<f64>,
    points: Vec<[f64; 2]>,
    weights: Vec<f64>,
    edges: Vec<Edge>,
    cells: Vec<Cell>,
    bandwidth: usize,
}

/// Builds a grid with `resolution` nodes per axis on the domain rescaled
/// to unit measure.
pub fn build_grid(domain: &Domain, resolution: usize) -> Result<Grid> {
    domain.validate()?;
    if resolution < 8 {
        return invalid(format!("resolution {resolution} is below the minimum of 8"));
    }
    let n = resolution;
    match domain.kind {
        DomainKind::Interval => {
            let scale = 1.0 / domain.extents[0];
            Ok(interval_grid(domain.clone(), scale, n))
        }
        DomainKind::Rectangle => {
            let scale = 1.0 / (domain.extents[0] * domain.extents[1]).sqrt();
            Ok(rectangle_grid(domain.clone(), scale, n))
        }
        DomainKind::RadialBall => {
            let radius = unit_ball_volume(domain.dimension).powf(-1.0 / domain.dimension as f64);
            let scale = radius / domain.extents[0];
            Ok(radial_grid(domain.clone(), scale, radius, n))
        }
    }
}

fn trapezoid(n: usize, h: f64) -> Vec<f64> {
    let mut w = vec![h; n];
    w[0] = 0.5 * h;
    w[n - 1] = 0.5 * h;
    w
}

fn interval_grid(domain: Domain, scale: f64, n: usize) -> Grid {
    let len = domain.extents[0] * scale;
    let h = len / (n - 1) as f64;
    let points = (0..n).map(|i| [i as f64 * h, 0.0]).collect();
    let edges = (0..n - 1)
        .map(|i| Edge {
            a: i,
            b: i + 1,
            h,
            measure: h,
            coef: 1.0 / h,
        })
        .collect();
    Grid {
        domain,
        scale,
        shape: vec![n],
        spacing: vec![h],
        lengths: vec![len],
        points,
        weights: trapezoid(n, h),
        edges,
        cells: Vec::new(),
        bandwidth: 1,
    }
}

fn rectangle_grid(domain: Domain, scale: f64, n: usize) -> Grid {
    let (lx, ly) = (domain.extents[0] * scale, domain.extents[1] * scale);
    let (hx, hy) = (lx / (n - 1) as f64, ly / (n - 1) as f64);
    let (wx, wy) = (trapezoid(n, hx), trapezoid(n, hy));
    let idx = |i: usize, j: usize| i + n * j;
    let mut points = Vec::with_capacity(n * n);
    let mut weights = Vec::with_capacity(n * n);
    for j in 0..n {
        for i in 0..n {
            points.push([i as f64 * hx, j as f64 * hy]);
            weights.push(wx[i] * wy[j]);
        }
    }
    let mut edges = Vec::with_capacity(2 * n * (n - 1));
    for j in 0..n {
        for i in 0..n - 1 {
            let measure = hx * wy[j];
            edges.push(Edge {
                a: idx(i, j),
                b: idx(i + 1, j),
                h: hx,
                measure,
                coef: measure / (hx * hx),
            });
        }
    }
    for j in 0..n - 1 {
        for i in 0..n {
            let measure = hy * wx[i];
            edges.push(Edge {
                a: idx(i, j),
                b: idx(i, j + 1),
                h: hy,
                measure,
                coef: measure / (hy * hy),
            });
        }
    }
    let mut cells = Vec::with_capacity((n - 1) * (n - 1));
    for j in 0..n - 1 {
        for i in 0..n - 1 {
            cells.push(Cell {
                corners: [idx(i, j), idx(i + 1, j), idx(i, j + 1), idx(i + 1, j + 1)],
            });
        }
    }
    Grid {
        domain,
        scale,
        shape: vec![n, n],
        spacing: vec![hx, hy],
        lengths: vec![lx, ly],
        points,
        weights,
        edges,
        cells,
        bandwidth: n,
    }
}

fn radial_grid(domain: Domain, scale: f64, radius: f64, n: usize) -> Grid {
    let d = domain.dimension as i32;
    let h = radius / (n - 1) as f64;
    // Volume of the ball of radius r, normalized so the whole ball has volume 1.
    let vol = |r: f64| (r / radius).powi(d);
    let points: Vec<[f64; 2]> = (0..n).map(|i| [i as f64 * h, 0.0]).collect();
    let mut weights = vec![0.0; n];
    for (i, w) in weights.iter_mut().enumerate() {
        let r = i as f64 * h;
        let lo = (r - 0.5 * h).max(0.0);
        let hi = (r + 0.5 * h).min(radius);
        *w = vol(hi) - vol(lo);
    }
    let edges = (0..n - 1)
        .map(|i| {
            let measure = vol((i + 1) as f64 * h) - vol(i as f64 * h);
            Edge {
                a: i,
                b: i + 1,
                h,
                measure,
                coef: measure / (h * h),
            }
        })
        .collect();
    Grid {
        domain,
        scale,
        shape: vec![n],
        spacing: vec![h],
        lengths: vec![radius],
        points,
        weights,
        edges,
        cells: Vec::new(),
        bandwidth: 1,
    }
}

impl Grid {
    pub fn domain(&self) -> &Domain {
        &self.domain
    }

    pub fn kind(&self) -> DomainKind {
        self.domain.kind
    }

    /// Space dimension `d`.
    pub fn dimension(&self) -> usize {
        self.domain.dimension
    }

    /// Length factor applied to the input domain.
    pub fn scale(&self) -> f64 {
        self.scale
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn spacing(&self) -> &[f64] {
        &self.spacing
    }

    /// Side lengths (or radius) after normalization.
    pub fn lengths(&self) -> &[f64] {
        &self.lengths
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    /// Number of coordinates per node (1, or 2 for rectangles).
    pub fn coord_dim(&self) -> usize {
        self.shape.len()
    }

    /// Coordinates of node `i`; the second entry is zero for 1D grids.
    pub fn point(&self, i: usize) -> [f64; 2] {
        self.points[i]
    }

    /// Half bandwidth of the stiffness matrix in natural node order.
    pub fn bandwidth(&self) -> usize {
        self.bandwidth
    }

    pub fn integrate(&self, u: &[f64]) -> f64 {
        self.weights.iter().zip(u).map(|(w, u)| w * u).sum()
    }

    /// `(Σ W_i |u_i|^q)^{1/q}`.
    pub fn lp_norm(&self, u: &[f64], q: f64) -> Result<f64> {
        if !(q > 0.0 && q.is_finite()) {
            return invalid(format!("norm exponent {q} must be positive"));
        }
        let s: f64 = if q == 2.0 {
            wdot(&self.weights, u, u)
        } else {
            self.weights.iter().zip(u).map(|(w, u)| w * u.abs().powf(q)).sum()
        };
        Ok(s.powf(1.0 / q))
    }

    /// `Σ_e c_e (u_b - u_a)²`.
    pub fn energy(&self, u: &[f64]) -> f64 {
        self.edges
            .iter()
            .map(|e| {
                let du = u[e.b] - u[e.a];
                e.coef * du * du
            })
            .sum()
    }

    /// `out = L u` (Neumann Laplacian).
    pub fn laplacian(&self, u: &[f64], out: &mut [f64]) {
        out.iter_mut().for_each(|v| *v = 0.0);
        for e in &self.edges {
            let flux = e.coef * (u[e.b] - u[e.a]);
            out[e.a] += flux;
            out[e.b] -= flux;
        }
        for (o, w) in out.iter_mut().zip(&self.weights) {
            *o /= w;
        }
    }

    /// Gershgorin bound on the spectral radius of `-L`.
    pub fn laplacian_bound(&self) -> f64 {
        let mut row = vec![0.0; self.len()];
        for e in &self.edges {
            row[e.a] += e.coef;
            row[e.b] += e.coef;
        }
        row.iter()
            .zip(&self.weights)
            .map(|(r, w)| 2.0 * r / w)
            .fold(0.0, f64::max)
    }

    /// Band matrix `K + diag(W_i s_i)`, where `K` is the stiffness matrix
    /// (`u·Ku` is the energy). Multiplying `-L + diag(s)` by `W` gives it.
    pub fn stiffness_plus_diagonal(&self, s: &[f64]) -> BandMatrix {
        let bw = self.bandwidth;
        let mut m = BandMatrix::zeros(self.len(), bw, bw);
        for e in &self.edges {
            m.add(e.a, e.a, e.coef);
            m.add(e.b, e.b, e.coef);
            m.add(e.a, e.b, -e.coef);
            m.add(e.b, e.a, -e.coef);
        }
        for (i, (w, s)) in self.weights.iter().zip(s).enumerate() {
            m.add(i, i, w * s);
        }
        m
    }

    /// Cell quadrature `Σ_cells |cell| f(|∇v|², v̄)` with cell-averaged
    /// gradients and corner-averaged values. In 1D the cells are the edges.
    pub fn cell_integral<F: Fn(f64, f64) -> f64>(&self, v: &[f64], f: F) -> f64 {
        if self.cells.is_empty() {
            return self
                .edges
                .iter()
                .map(|e| {
                    let g = (v[e.b] - v[e.a]) / e.h;
                    e.measure * f(g * g, 0.5 * (v[e.a] + v[e.b]))
                })
                .sum();
        }
        let (hx, hy) = (self.spacing[0], self.spacing[1]);
        self.cells
            .iter()
            .map(|c| {
                let [v00, v10, v01, v11] = c.corners.map(|k| v[k]);
                let gx = 0.5 * ((v10 - v00) + (v11 - v01)) / hx;
                let gy = 0.5 * ((v01 - v00) + (v11 - v10)) / hy;
                hx * hy * f(gx * gx + gy * gy, 0.25 * (v00 + v10 + v01 + v11))
            })
            .sum()
    }

    /// Discrete `∫|Hess u|²`.
    pub fn hessian_sq_integral(&self, u: &[f64]) -> f64 {
        match self.domain.kind {
            DomainKind::Interval => {
                let mut lu = vec![0.0; self.len()];
                self.laplacian(u, &mut lu);
                wdot(&self.weights, &lu, &lu)
            }
            DomainKind::Rectangle => {
                let n = self.shape[0];
                let (hx, hy) = (self.spacing[0], self.spacing[1]);
                let second = |i: usize, j: usize, along_x: bool| -> f64 {
                    let (k, h) = if along_x { (i, hx) } else { (j, hy) };
                    let at = |m: usize| if along_x { u[m + n * j] } else { u[i + n * m] };
                    let c = at(k);
                    let lo = if k == 0 { at(1) } else { at(k - 1) };
                    let hi = if k == n - 1 { at(n - 2) } else { at(k + 1) };
                    (lo - 2.0 * c + hi) / (h * h)
                };
                let mut total = 0.0;
                for j in 0..n {
                    for i in 0..n {
                        let w = self.weights[i + n * j];
                        let fxx = second(i, j, true);
                        let fyy = second(i, j, false);
                        total += w * (fxx * fxx + fyy * fyy);
                    }
                }
                for c in &self.cells {
                    let [v00, v10, v01, v11] = c.corners.map(|k| u[k]);
                    let fxy = (v11 - v10 - v01 + v00) / (hx * hy);
                    total += 2.0 * hx * hy * fxy * fxy;
                }
                total
            }
            DomainKind::RadialBall => {
                let n = self.len();
                let h = self.spacing[0];
                let dm1 = self.domain.dimension as f64 - 1.0;
                let mut total = 0.0;
                for i in 0..n {
                    let (urr, ur_over_r) = if i == 0 {
                        let urr = 2.0 * (u[1] - u[0]) / (h * h);
                        (urr, urr)
                    } else if i == n - 1 {
                        (2.0 * (u[n - 2] - u[n - 1]) / (h * h), 0.0)
                    } else {
                        let r = i as f64 * h;
                        (
                            (u[i + 1] - 2.0 * u[i] + u[i - 1]) / (h * h),
                            (u[i + 1] - u[i - 1]) / (2.0 * h * r),
                        )
                    };
                    total += self.weights[i] * (urr * urr + dm1 * ur_over_r * ur_over_r);
                }
                total
            }
        }
    }
}

/// Grid function.
#[derive(Debug, Clone, PartialEq)]
pub struct Field<'g> {
    grid: &'g Grid,
    values: Vec<f64>,
}

impl<'g> Field<'g> {
    pub fn new(grid: &'g Grid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return invalid(format!(
                "field has {} values but the grid has {} nodes",
                values.len(),
                grid.len()
            ));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::Domain("field contains non-finite values".into()));
        }
        Ok(Self { grid, values })
    }

    pub fn constant(grid: &'g Grid, c: f64) -> Self {
        Self {
            grid,
            values: vec![c; grid.len()],
        }
    }

    /// Samples `f` at the node coordinates (`[x]`, `[x, y]` or `[r]`).
    pub fn from_fn<F: Fn(&[f64]) -> f64>(grid: &'g Grid, f: F) -> Self {
        let k = grid.coord_dim();
        let values = (0..grid.len()).map(|i| f(&grid.point(i)[..k])).collect();
        Self { grid, values }
    }

    pub fn grid(&self) -> &'g Grid {
        self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    /// `∫u`, which is also the mean since `|Ω| = 1`.
    pub fn mean(&self) -> f64 {
        self.grid.integrate(&self.values)
    }

    /// `‖u - ∫u‖₂`.
    pub fn deviation(&self) -> f64 {
        let m = self.mean();
        let d: Vec<f64> = self.values.iter().map(|v| v - m).collect();
        wdot(self.grid.weights(), &d, &d).sqrt()
    }

    pub fn map<F: Fn(f64) -> f64>(&self, f: F) -> Self {
        Self {
            grid: self.grid,
            values: self.values.iter().map(|v| f(*v)).collect(),
        }
    }

    /// Writes node coordinates and values as CSV.
    pub fn write_csv<W: Write>(&self, out: &mut W, comment: Option<&str>) -> Result<()> {
        if let Some(c) = comment {
            writeln!(out, "# {c}")?;
        }
        let header = match self.grid.kind() {
            DomainKind::Interval => "x,value",
            DomainKind::Rectangle => "x,y,value",
            DomainKind::RadialBall => "r,value",
        };
        writeln!(out, "{header}")?;
        let k = self.grid.coord_dim();
        for (i, v) in self.values.iter().enumerate() {
            let p = self.grid.point(i);
            if k == 1 {
                writeln!(out, "{},{}", p[0], v)?;
            } else {
                writeln!(out, "{},{},{}", p[0], p[1], v)?;
            }
        }
        Ok(())
    }
}

pub fn integrate(f: &Field) -> f64 {
    f.mean()
}

pub fn lp_norm(f: &Field, exp: f64) -> Result<f64> {
    f.grid.lp_norm(&f.values, exp)
}

pub fn dirichlet_energy(f: &Field) -> f64 {
    f.grid.energy(&f.values)
}

pub fn neumann_laplacian_apply<'g>(f: &Field<'g>) -> Field<'g> {
    let mut out = vec![0.0; f.values.len()];
    f.grid.laplacian(&f.values, &mut out);
    Field {
        grid: f.grid,
        values: out,
    }
}

pub fn hessian_frobenius_integral(f: &Field) -> f64 {
    f.grid.hessian_sq_integral(&f.values)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::random_smooth_positive;
    use proptest::prelude::*;
    use std::f64::consts::PI;

    fn all_grids() -> Vec<Grid> {
        vec![
            build_grid(&Domain::interval(2.0), 64).unwrap(),
            build_grid(&Domain::rectangle(2.0, 0.5), 17).unwrap(),
            build_grid(&Domain::radial_ball(2, 1.0), 40).unwrap(),
            build_grid(&Domain::radial_ball(3, 0.3), 40).unwrap(),
        ]
    }

    #[test]
    fn unit_measure_and_positive_weights() {
        for g in all_grids() {
            let total: f64 = g.weights().iter().sum();
            assert!((total - 1.0).abs() < 1e-12, "{:?}: {total}", g.kind());
            assert!(g.weights().iter().all(|w| *w > 0.0));
        }
    }

    #[test]
    fn interval_is_rescaled() {
        let g = build_grid(&Domain::interval(2.0), 64).unwrap();
        assert_eq!(g.lengths(), &[1.0]);
        assert_eq!(g.scale(), 0.5);
    }

    #[test]
    fn square_node_count() {
        let g = build_grid(&Domain::unit_square(), 32).unwrap();
        assert_eq!(g.len(), 1024);
    }

    #[test]
    fn disk_radius_gives_unit_area() {
        let g = build_grid(&Domain::radial_ball(2, 5.0), 128).unwrap();
        assert!((g.lengths()[0] - 1.0 / PI.sqrt()).abs() < 1e-15);
        // Weight of the node at radius r is close to 2πr h.
        let h = g.spacing()[0];
        let r = g.point(60)[0];
        assert!((g.weights()[60] - 2.0 * PI * r * h).abs() < 1e-12);
    }

    #[test]
    fn ball_volumes() {
        assert!((unit_ball_volume(2) - PI).abs() < 1e-15);
        assert!((unit_ball_volume(3) - 4.0 * PI / 3.0).abs() < 1e-14);
        assert!((unit_ball_volume(4) - PI * PI / 2.0).abs() < 1e-14);
    }

    #[test]
    fn rejects_bad_input() {
        assert!(build_grid(&Domain::unit_interval(), 7).is_err());
        assert!(build_grid(&Domain::interval(-1.0), 16).is_err());
        assert!(build_grid(&Domain::rectangle(1.0, 0.0), 16).is_err());
    }

    #[test]
    fn constant_norms() {
        for g in all_grids() {
            let f = Field::constant(&g, -3.0);
            for q in [0.5, 1.0, 2.0, 3.7] {
                assert!((lp_norm(&f, q).unwrap() - 3.0).abs() < 1e-12);
            }
            assert_eq!(dirichlet_energy(&f), 0.0);
            assert!(neumann_laplacian_apply(&f).values().iter().all(|v| *v == 0.0));
            assert_eq!(hessian_frobenius_integral(&f), 0.0);
        }
    }

    #[test]
    fn cosine_integrals_on_interval() {
        let g = build_grid(&Domain::unit_interval(), 256).unwrap();
        let f = Field::from_fn(&g, |x| (PI * x[0]).cos());
        let e = dirichlet_energy(&f);
        assert!((e / (PI * PI / 2.0) - 1.0).abs() < 5e-3);
        let n2 = lp_norm(&f, 2.0).unwrap().powi(2);
        assert!((n2 / 0.5 - 1.0).abs() < 5e-3);
    }

    #[test]
    fn cosine_laplacian_second_order() {
        let mut errs = Vec::new();
        for n in [65, 129] {
            let g = build_grid(&Domain::unit_interval(), n).unwrap();
            let f = Field::from_fn(&g, |x| (PI * x[0]).cos());
            let lf = neumann_laplacian_apply(&f);
            let err = (0..g.len())
                .map(|i| (lf.values()[i] + PI * PI * f.values()[i]).abs())
                .fold(0.0, f64::max);
            errs.push(err);
        }
        let ratio = errs[0] / errs[1];
        assert!(ratio > 3.5 && ratio < 4.5, "ratio {ratio}");
    }

    #[test]
    fn summation_by_parts_is_exact() {
        for g in all_grids() {
            let u = random_smooth_positive(&g, 3, 0.5);
            let mut lu = vec![0.0; g.len()];
            g.laplacian(&u, &mut lu);
            let lhs = -wdot(g.weights(), &u, &lu);
            assert!((lhs - g.energy(&u)).abs() < 1e-10 * g.energy(&u).max(1.0));
        }
    }

    #[test]
    fn radial_laplacian_consistent_away_from_centre() {
        // u = r² has Δu = 2d in R^d. The finite-volume stencil is consistent
        // at interior nodes with an O(h²/r²) error; the rim is skipped because
        // r² does not satisfy the Neumann condition.
        let g = build_grid(&Domain::radial_ball(3, 1.0), 200).unwrap();
        let f = Field::from_fn(&g, |r| r[0] * r[0]);
        let lf = neumann_laplacian_apply(&f);
        for i in 20..150 {
            assert!((lf.values()[i] - 6.0).abs() < 1e-3, "{i}: {}", lf.values()[i]);
        }
    }

    #[test]
    fn hessian_identity_in_one_dimension() {
        let g = build_grid(&Domain::unit_interval(), 64).unwrap();
        let f = Field::new(&g, random_smooth_positive(&g, 11, 0.4)).unwrap();
        let lf = neumann_laplacian_apply(&f);
        let lap2 = wdot(g.weights(), lf.values(), lf.values());
        assert!((hessian_frobenius_integral(&f) - lap2).abs() < 1e-12 * lap2.max(1.0));
    }

    #[test]
    fn hessian_matches_laplacian_for_product_cosine() {
        let g = build_grid(&Domain::unit_square(), 64).unwrap();
        let f = Field::from_fn(&g, |x| (PI * x[0]).cos() * (PI * x[1]).cos());
        let lf = neumann_laplacian_apply(&f);
        let lap2 = wdot(g.weights(), lf.values(), lf.values());
        assert!(lap2 - hessian_frobenius_integral(&f) >= -1e-6);
    }

    #[test]
    fn csv_layout() {
        let g = build_grid(&Domain::unit_square(), 8).unwrap();
        let f = Field::constant(&g, 1.5);
        let mut buf = Vec::new();
        f.write_csv(&mut buf, Some("hash abc")).unwrap();
        let s = String::from_utf8(buf).unwrap();
        let mut lines = s.lines();
        assert_eq!(lines.next(), Some("# hash abc"));
        assert_eq!(lines.next(), Some("x,y,value"));
        assert_eq!(s.lines().count(), 2 + 64);
    }

    #[test]
    fn field_rejects_nan() {
        let g = build_grid(&Domain::unit_interval(), 8).unwrap();
        assert!(Field::new(&g, vec![f64::NAN; 8]).is_err());
        assert!(Field::new(&g, vec![1.0; 7]).is_err());
    }

    proptest! {
        #[test]
        fn convexity_inequality_on_rectangles(seed in 0u64..1000, n in 9usize..24) {
            let g = build_grid(&Domain::rectangle(1.3, 0.7), n).unwrap();
            let f = Field::new(&g, random_smooth_positive(&g, seed, 0.5)).unwrap();
            let lf = neumann_laplacian_apply(&f);
            let lap2 = wdot(g.weights(), lf.values(), lf.values());
            let hess = hessian_frobenius_integral(&f);
            prop_assert!(lap2 - hess >= -1e-9 * lap2.max(1.0));
        }

        #[test]
        fn energy_nonnegative_and_quadrature_exact(seed in 0u64..1000) {
            for g in all_grids() {
                let u = random_smooth_positive(&g, seed, 0.9);
                prop_assert!(g.energy(&u) >= 0.0);
                prop_assert!((g.integrate(&vec![1.0; g.len()]) - 1.0).abs() < 1e-10);
            }
        }
    }
}
