//! Banded solvers used by the age stepping, plus a few vector helpers.
//!
//! Every implicit age step is a symmetric tridiagonal system with a constant
//! off-diagonal (the scaled Laplacian) and a node-dependent diagonal. The
//! coupled steps have the same shape with 2x2 diagonal blocks.

use crate::error::{Error, Result};

/// LU factors of a tridiagonal matrix with constant off-diagonal `off`.
pub(crate) struct Tridiag {
    mult: Vec<f64>,
    inv_pivot: Vec<f64>,
    off: f64,
}

impl Tridiag {
    /// Factor `diag` / `off`. Fails on a non-positive pivot, which for these
    /// Z-matrices means the step matrix is no longer an M-matrix.
    pub fn factor(diag: &[f64], off: f64) -> Result<Self> {
        let n = diag.len();
        let mut mult = vec![0.0; n];
        let mut inv_pivot = vec![0.0; n];
        let mut p = diag[0];
        if !(p > 0.0) {
            return Err(Error::Singular("tridiagonal step"));
        }
        inv_pivot[0] = 1.0 / p;
        for i in 1..n {
            let m = off * inv_pivot[i - 1];
            p = diag[i] - m * off;
            if !(p > 0.0) {
                return Err(Error::Singular("tridiagonal step"));
            }
            mult[i] = m;
            inv_pivot[i] = 1.0 / p;
        }
        Ok(Tridiag { mult, inv_pivot, off })
    }

    pub fn solve(&self, x: &mut [f64]) {
        let n = x.len();
        for i in 1..n {
            x[i] -= self.mult[i] * x[i - 1];
        }
        x[n - 1] *= self.inv_pivot[n - 1];
        for i in (0..n - 1).rev() {
            x[i] = (x[i] - self.off * x[i + 1]) * self.inv_pivot[i];
        }
    }

    /// Solve for `ncols` right-hand sides stored node-major: `x[i * ncols + j]`.
    pub fn solve_many(&self, x: &mut [f64], ncols: usize) {
        let n = self.mult.len();
        for i in 1..n {
            let m = self.mult[i];
            let (prev, cur) = x.split_at_mut(i * ncols);
            let prev = &prev[(i - 1) * ncols..];
            for (c, p) in cur[..ncols].iter_mut().zip(prev) {
                *c -= m * p;
            }
        }
        let ip = self.inv_pivot[n - 1];
        for c in &mut x[(n - 1) * ncols..n * ncols] {
            *c *= ip;
        }
        for i in (0..n - 1).rev() {
            let ip = self.inv_pivot[i];
            let off = self.off;
            let (cur, next) = x.split_at_mut((i + 1) * ncols);
            for (c, nx) in cur[i * ncols..].iter_mut().zip(&next[..ncols]) {
                *c = (*c - off * nx) * ip;
            }
        }
    }
}

/// Row-major 2x2 block `[a b; c d]`.
pub(crate) type Block = [f64; 4];

fn inv2(m: &Block) -> Option<Block> {
    let det = m[0] * m[3] - m[1] * m[2];
    if !(det.abs() > 0.0) || !det.is_finite() {
        return None;
    }
    let r = 1.0 / det;
    Some([m[3] * r, -m[1] * r, -m[2] * r, m[0] * r])
}

/// Block tridiagonal factors for 2x2 diagonal blocks and scalar off-diagonal
/// `off * I`.
pub(crate) struct BlockTridiag {
    inv_gamma: Vec<Block>,
    off: f64,
}

impl BlockTridiag {
    pub fn factor(diag: &[Block], off: f64) -> Result<Self> {
        let n = diag.len();
        let mut inv_gamma = Vec::with_capacity(n);
        let mut g = inv2(&diag[0]).ok_or(Error::Singular("coupled step"))?;
        inv_gamma.push(g);
        let o2 = off * off;
        for d in &diag[1..] {
            let gamma = [d[0] - o2 * g[0], d[1] - o2 * g[1], d[2] - o2 * g[2], d[3] - o2 * g[3]];
            g = inv2(&gamma).ok_or(Error::Singular("coupled step"))?;
            inv_gamma.push(g);
        }
        Ok(BlockTridiag { inv_gamma, off })
    }

    /// Solve in place for `ncols` right-hand side pairs; `x` and `y` hold the
    /// first and second component node-major.
    pub fn solve_many(&self, x: &mut [f64], y: &mut [f64], ncols: usize) {
        let n = self.inv_gamma.len();
        let o = self.off;
        for i in 1..n {
            let g = &self.inv_gamma[i - 1];
            for j in 0..ncols {
                let px = x[(i - 1) * ncols + j];
                let py = y[(i - 1) * ncols + j];
                x[i * ncols + j] -= o * (g[0] * px + g[1] * py);
                y[i * ncols + j] -= o * (g[2] * px + g[3] * py);
            }
        }
        let g = &self.inv_gamma[n - 1];
        for j in 0..ncols {
            let k = (n - 1) * ncols + j;
            let (a, b) = (x[k], y[k]);
            x[k] = g[0] * a + g[1] * b;
            y[k] = g[2] * a + g[3] * b;
        }
        for i in (0..n - 1).rev() {
            let g = &self.inv_gamma[i];
            for j in 0..ncols {
                let k = i * ncols + j;
                let a = x[k] - o * x[k + ncols];
                let b = y[k] - o * y[k + ncols];
                x[k] = g[0] * a + g[1] * b;
                y[k] = g[2] * a + g[3] * b;
            }
        }
    }
}

pub(crate) fn sup_norm(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

pub(crate) fn min_value(v: &[f64]) -> f64 {
    v.iter().copied().fold(f64::INFINITY, f64::min)
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::{DMatrix, DVector};

    fn dense(diag: &[f64], off: f64) -> DMatrix<f64> {
        let n = diag.len();
        DMatrix::from_fn(n, n, |i, j| {
            if i == j {
                diag[i]
            } else if i.abs_diff(j) == 1 {
                off
            } else {
                0.0
            }
        })
    }

    #[test]
    fn tridiagonal_solve_matches_dense_lu() {
        let diag = [4.0, 3.5, 5.0, 2.5, 3.0];
        let off = -1.2;
        let rhs = [1.0, -2.0, 0.5, 3.0, 1.5];
        let f = Tridiag::factor(&diag, off).unwrap();
        let mut x = rhs.to_vec();
        f.solve(&mut x);
        let exact = dense(&diag, off).lu().solve(&DVector::from_row_slice(&rhs)).unwrap();
        for i in 0..5 {
            assert!((x[i] - exact[i]).abs() < 1e-13);
        }
        let mut many: Vec<f64> = rhs.iter().flat_map(|r| [*r, 2.0 * r]).collect();
        f.solve_many(&mut many, 2);
        for i in 0..5 {
            assert!((many[2 * i] - exact[i]).abs() < 1e-13);
            assert!((many[2 * i + 1] - 2.0 * exact[i]).abs() < 1e-13);
        }
    }

    #[test]
    fn block_solve_matches_dense_lu() {
        let n = 4;
        let off = -0.7;
        let blocks: Vec<Block> = (0..n)
            .map(|i| [3.0 + i as f64, 0.4, -0.3, 2.5 + 0.5 * i as f64])
            .collect();
        let mut a = DMatrix::zeros(2 * n, 2 * n);
        for i in 0..n {
            let b = &blocks[i];
            a[(2 * i, 2 * i)] = b[0];
            a[(2 * i, 2 * i + 1)] = b[1];
            a[(2 * i + 1, 2 * i)] = b[2];
            a[(2 * i + 1, 2 * i + 1)] = b[3];
            if i + 1 < n {
                for c in 0..2 {
                    a[(2 * i + c, 2 * (i + 1) + c)] = off;
                    a[(2 * (i + 1) + c, 2 * i + c)] = off;
                }
            }
        }
        let rx = [1.0, 0.0, -1.0, 2.0];
        let ry = [0.5, 1.5, 0.0, -0.5];
        let mut rhs = DVector::zeros(2 * n);
        for i in 0..n {
            rhs[2 * i] = rx[i];
            rhs[2 * i + 1] = ry[i];
        }
        let exact = a.lu().solve(&rhs).unwrap();
        let f = BlockTridiag::factor(&blocks, off).unwrap();
        let (mut x, mut y) = (rx.to_vec(), ry.to_vec());
        f.solve_many(&mut x, &mut y, 1);
        for i in 0..n {
            assert!((x[i] - exact[2 * i]).abs() < 1e-13);
            assert!((y[i] - exact[2 * i + 1]).abs() < 1e-13);
        }
    }

    #[test]
    fn indefinite_tridiagonal_is_refused() {
        assert!(Tridiag::factor(&[1.0, 1.0], -2.0).is_err());
    }
}
