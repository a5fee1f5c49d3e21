//! Small dependency-free linear algebra kernels: a banded LU factorization
//! with partial pivoting and a conjugate-gradient solver in a weighted inner
//! product.

use crate::error::{Error, Result};

/// Square band matrix with `kl` sub- and `ku` super-diagonals.
///
/// Storage keeps `kl` extra super-diagonals per row for pivoting fill-in,
/// in the same way LAPACK's `gbtrf` does.
#[derive(Debug, Clone)]
pub struct BandMatrix {
    n: usize,
    kl: usize,
    ku: usize,
    width: usize,
    data: Vec<f64>,
}

impl BandMatrix {
    pub fn zeros(n: usize, kl: usize, ku: usize) -> Self {
        let width = 2 * kl + ku + 1;
        Self {
            n,
            kl,
            ku,
            width,
            data: vec![0.0; n * width],
        }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    #[inline]
    fn idx(&self, i: usize, j: usize) -> usize {
        debug_assert!(j + self.kl >= i && j <= i + self.ku + self.kl);
        i * self.width + (j + self.kl - i)
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        if j + self.kl < i || j > i + self.ku {
            0.0
        } else {
            self.data[self.idx(i, j)]
        }
    }

    /// Adds `v` to entry `(i, j)`, which must lie inside the band.
    #[inline]
    pub fn add(&mut self, i: usize, j: usize, v: f64) {
        assert!(
            j + self.kl >= i && j <= i + self.ku,
            "entry ({i},{j}) outside band"
        );
        let k = self.idx(i, j);
        self.data[k] += v;
    }

    /// Matrix-vector product `y = A x`.
    pub fn mul_vec(&self, x: &[f64], y: &mut [f64]) {
        for (i, yi) in y.iter_mut().enumerate().take(self.n) {
            let lo = i.saturating_sub(self.kl);
            let hi = (i + self.ku).min(self.n - 1);
            *yi = (lo..=hi).map(|j| self.data[self.idx(i, j)] * x[j]).sum();
        }
    }

    /// LU factorization with partial (row) pivoting.
    pub fn factor(mut self) -> Result<BandLu> {
        let n = self.n;
        let scale = self.data.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
        let tiny = scale * 1e-14;
        let mut pivots = vec![0usize; n];
        for k in 0..n {
            let last_row = (k + self.kl).min(n - 1);
            let mut p = k;
            let mut best = self.data[self.idx(k, k)].abs();
            for r in k + 1..=last_row {
                let v = self.data[self.idx(r, k)].abs();
                if v > best {
                    best = v;
                    p = r;
                }
            }
            if best <= tiny || !best.is_finite() {
                return Err(Error::SingularSystem { row: k, pivot: best });
            }
            let last_col = (k + self.kl + self.ku).min(n - 1);
            if p != k {
                for j in k..=last_col {
                    let a = self.idx(k, j);
                    let b = self.idx(p, j);
                    self.data.swap(a, b);
                }
            }
            pivots[k] = p;
            let diag = self.data[self.idx(k, k)];
            for r in k + 1..=last_row {
                let ir = self.idx(r, k);
                let m = self.data[ir] / diag;
                self.data[ir] = m;
                if m != 0.0 {
                    for j in k + 1..=last_col {
                        let a = self.idx(k, j);
                        let b = self.idx(r, j);
                        self.data[b] -= m * self.data[a];
                    }
                }
            }
        }
        Ok(BandLu { m: self, pivots })
    }
}

/// Factors produced by [`BandMatrix::factor`].
#[derive(Debug, Clone)]
pub struct BandLu {
    m: BandMatrix,
    pivots: Vec<usize>,
}

impl BandLu {
    pub fn dim(&self) -> usize {
        self.m.n
    }

    /// Solves `A x = b` in place.
    pub fn solve_in_place(&self, b: &mut [f64]) {
        let a = &self.m;
        let n = a.n;
        for k in 0..n {
            let p = self.pivots[k];
            if p != k {
                b.swap(k, p);
            }
            let bk = b[k];
            if bk != 0.0 {
                for r in k + 1..=(k + a.kl).min(n - 1) {
                    b[r] -= a.data[a.idx(r, k)] * bk;
                }
            }
        }
        for k in (0..n).rev() {
            let last_col = (k + a.kl + a.ku).min(n - 1);
            let mut s = b[k];
            for j in k + 1..=last_col {
                s -= a.data[a.idx(k, j)] * b[j];
            }
            b[k] = s / a.data[a.idx(k, k)];
        }
    }
}

/// Weighted inner product `sum_i w_i x_i y_i`.
#[inline]
pub fn wdot(w: &[f64], x: &[f64], y: &[f64]) -> f64 {
    w.iter().zip(x).zip(y).map(|((w, x), y)| w * x * y).sum()
}

#[inline]
pub fn wnorm(w: &[f64], x: &[f64]) -> f64 {
    wdot(w, x, x).sqrt()
}

/// Removes the weighted mean of `x` (projection orthogonal to constants).
pub fn remove_mean(w: &[f64], x: &mut [f64]) {
    let total: f64 = w.iter().sum();
    let mean = w.iter().zip(x.iter()).map(|(w, x)| w * x).sum::<f64>() / total;
    x.iter_mut().for_each(|v| *v -= mean);
}

/// Outcome of a conjugate-gradient solve.
#[derive(Debug, Clone, Copy)]
pub struct CgReport {
    pub iterations: usize,
    pub relative_residual: f64,
}

/// Conjugate gradients for `A x = b` with `A` self-adjoint and positive
/// definite in the inner product weighted by `w`.
///
/// When `deflate` is set, every residual is projected orthogonally to the
/// constants, which solves the consistent singular system on the mean-zero
/// subspace.
pub fn conjugate_gradient<F>(
    apply: F,
    w: &[f64],
    b: &[f64],
    x: &mut [f64],
    rel_tol: f64,
    max_iter: usize,
    deflate: bool,
) -> Result<CgReport>
where
    F: Fn(&[f64], &mut [f64]),
{
    let n = b.len();
    let mut ax = vec![0.0; n];
    if deflate {
        remove_mean(w, x);
    }
    apply(x, &mut ax);
    let mut r: Vec<f64> = b.iter().zip(&ax).map(|(b, a)| b - a).collect();
    if deflate {
        remove_mean(w, &mut r);
    }
    let bnorm = wnorm(w, b).max(f64::MIN_POSITIVE);
    let mut rr = wdot(w, &r, &r);
    let mut p = r.clone();
    let mut ap = vec![0.0; n];
    for it in 0..max_iter {
        let rel = rr.sqrt() / bnorm;
        if rel <= rel_tol {
            return Ok(CgReport {
                iterations: it,
                relative_residual: rel,
            });
        }
        apply(&p, &mut ap);
        let pap = wdot(w, &p, &ap);
        if pap <= 0.0 || !pap.is_finite() {
            return Err(Error::NonConvergence {
                solver: "conjugate gradient (non-positive curvature)",
                iterations: it,
                residual: rel,
            });
        }
        let alpha = rr / pap;
        for i in 0..n {
            x[i] += alpha * p[i];
            r[i] -= alpha * ap[i];
        }
        if deflate {
            remove_mean(w, &mut r);
        }
        let rr_new = wdot(w, &r, &r);
        let beta = rr_new / rr;
        rr = rr_new;
        for i in 0..n {
            p[i] = r[i] + beta * p[i];
        }
    }
    let rel = rr.sqrt() / bnorm;
    if rel <= rel_tol * 1e3 {
        // Stagnation at round-off level: accept.
        return Ok(CgReport {
            iterations: max_iter,
            relative_residual: rel,
        });
    }
    Err(Error::NonConvergence {
        solver: "conjugate gradient",
        iterations: max_iter,
        residual: rel,
    })
}
