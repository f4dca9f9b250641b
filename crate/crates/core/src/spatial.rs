//! Interior-node grid on `(0, L)`, the Dirichlet Laplacian and its principal
//! eigenpair.

use std::f64::consts::PI;

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::linalg::{sup_norm, Tridiag};

/// Uniform grid of `n` interior nodes on `(0, L)`; `h = L / (n + 1)`.
#[derive(Debug, Clone, PartialEq)]
pub struct SpatialGrid {
    n: usize,
    length: f64,
    spacing: f64,
}

impl SpatialGrid {
    pub fn new(n: usize, length: f64) -> Result<Self> {
        if n < 3 {
            return Err(Error::InvalidGrid(format!("need at least 3 interior nodes, got {n}")));
        }
        if !(length > 0.0 && length.is_finite()) {
            return Err(Error::InvalidGrid(format!(
                "domain length must be positive, got {length}"
            )));
        }
        Ok(SpatialGrid {
            n,
            length,
            spacing: length / (n as f64 + 1.0),
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn length(&self) -> f64 {
        self.length
    }

    pub fn spacing(&self) -> f64 {
        self.spacing
    }

    /// Interior node positions `x_j = j h`, `j = 1..=n`.
    pub fn nodes(&self) -> Vec<f64> {
        (1..=self.n).map(|j| j as f64 * self.spacing).collect()
    }
}

/// `-Δ` with homogeneous Dirichlet data: tridiagonal `(-1, 2, -1) / h²`.
#[derive(Debug, Clone, PartialEq)]
pub struct LaplacianMatrix {
    n: usize,
    diag: f64,
    off: f64,
}

pub fn assemble_laplacian(grid: &SpatialGrid) -> LaplacianMatrix {
    let h2 = grid.spacing * grid.spacing;
    LaplacianMatrix {
        n: grid.n,
        diag: 2.0 / h2,
        off: -1.0 / h2,
    }
}

impl LaplacianMatrix {
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn diag(&self) -> f64 {
        self.diag
    }

    pub fn off(&self) -> f64 {
        self.off
    }

    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        let n = self.n;
        (0..n)
            .map(|i| {
                let mut s = self.diag * x[i];
                if i > 0 {
                    s += self.off * x[i - 1];
                }
                if i + 1 < n {
                    s += self.off * x[i + 1];
                }
                s
            })
            .collect()
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        DMatrix::from_fn(self.n, self.n, |i, j| {
            if i == j {
                self.diag
            } else if i.abs_diff(j) == 1 {
                self.off
            } else {
                0.0
            }
        })
    }

    /// `k`-th eigenvalue of the discrete operator, `k >= 1`.
    pub fn closed_form_eigenvalue(&self, k: usize) -> f64 {
        let theta = k as f64 * PI / (self.n as f64 + 1.0);
        self.diag * (1.0 - theta.cos())
    }

    fn norm_inf(&self) -> f64 {
        self.diag.abs() + 2.0 * self.off.abs()
    }
}

/// Principal Dirichlet eigenpair, `φ₁` sup-normalized and positive.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralData {
    pub lambda1: f64,
    pub phi1: Vec<f64>,
    /// `‖-Δφ₁ - λ₁φ₁‖∞` with `‖φ₁‖∞ = 1`.
    pub residual: f64,
    pub iterations: usize,
}

const EIGEN_MAX_ITER: usize = 500;

/// Inverse power iteration with zero shift from the all-ones vector.
pub fn principal_eigenpair(lap: &LaplacianMatrix) -> Result<SpectralData> {
    let n = lap.n;
    let factor = Tridiag::factor(&vec![lap.diag; n], lap.off)?;
    // below this the residual is dominated by rounding in the stencil
    let tol = (1e-12 * lap.closed_form_eigenvalue(1)).max(f64::EPSILON * lap.norm_inf());
    let mut x = vec![1.0; n];
    let mut best = f64::INFINITY;
    let mut stalled = 0;
    for it in 1..=EIGEN_MAX_ITER {
        factor.solve(&mut x);
        let s = sup_norm(&x);
        x.iter_mut().for_each(|v| *v /= s);
        let ax = lap.apply(&x);
        let lambda = ax.iter().zip(&x).map(|(a, b)| a * b).sum::<f64>() / x.iter().map(|v| v * v).sum::<f64>();
        let residual = ax
            .iter()
            .zip(&x)
            .fold(0.0f64, |m, (a, b)| m.max((a - lambda * b).abs()));
        if residual <= tol || (stalled > 5 && best <= 4.0 * tol) {
            return Ok(SpectralData {
                lambda1: lambda,
                phi1: x,
                residual,
                iterations: it,
            });
        }
        if residual < best {
            best = residual;
            stalled = 0;
        } else {
            stalled += 1;
        }
    }
    Err(Error::NonConvergence {
        what: "principal eigenpair",
        iterations: EIGEN_MAX_ITER,
        residual: best,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn eigenvalue_matches_closed_form() {
        for &(n, l) in &[(16usize, 1.0), (64, 1.0), (99, 1.0), (40, 2.5)] {
            let grid = SpatialGrid::new(n, l).unwrap();
            let lap = assemble_laplacian(&grid);
            let sd = principal_eigenpair(&lap).unwrap();
            let h = grid.spacing();
            let exact = 2.0 / (h * h) * (1.0 - (PI * h / l).cos());
            assert!((sd.lambda1 - exact).abs() <= 1e-12 * exact, "n={n}");
            assert!(sd.residual <= 1e-12 * exact || sd.residual <= f64::EPSILON * 4.0 / (h * h));
        }
    }

    #[test]
    fn eigenvector_is_sampled_sine() {
        let grid = SpatialGrid::new(64, 1.0).unwrap();
        let sd = principal_eigenpair(&assemble_laplacian(&grid)).unwrap();
        // symmetric grid with odd count has its peak at a node; even count does not
        let peak = grid.nodes().iter().map(|x| (PI * x).sin()).fold(0.0, f64::max);
        for (p, x) in sd.phi1.iter().zip(grid.nodes()) {
            assert!((p - (PI * x).sin() / peak).abs() < 1e-10);
            assert!(*p > 0.0);
        }
    }

    #[test]
    fn eigenvalue_converges_to_pi_squared() {
        let sd = principal_eigenpair(&assemble_laplacian(&SpatialGrid::new(99, 1.0).unwrap())).unwrap();
        assert!((sd.lambda1 - PI * PI).abs() <= 0.01);
    }

    #[test]
    fn degenerate_grids_are_rejected() {
        assert!(SpatialGrid::new(2, 1.0).is_err());
        assert!(SpatialGrid::new(10, 0.0).is_err());
        assert!(SpatialGrid::new(10, -1.0).is_err());
    }
}
