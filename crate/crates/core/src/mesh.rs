//! The full tensor discretization: spatial grid, Laplacian, principal
//! eigenpair and age grid, built once and shared by every solver.

use crate::error::{Error, Result};
use crate::spatial::{assemble_laplacian, principal_eigenpair, LaplacianMatrix, SpatialGrid, SpectralData};

/// Uniform age grid on `[0, a_m]` with `M` steps; stepping and quadrature
/// share the same nodes.
#[derive(Debug, Clone, PartialEq)]
pub struct AgeGrid {
    a_max: f64,
    steps: usize,
    da: f64,
}

pub const MIN_AGE_STEPS: usize = 16;

impl AgeGrid {
    pub fn new(a_max: f64, steps: usize) -> Result<Self> {
        if steps < MIN_AGE_STEPS {
            return Err(Error::InvalidGrid(format!(
                "need at least {MIN_AGE_STEPS} age steps, got {steps}"
            )));
        }
        if !(a_max > 0.0 && a_max.is_finite()) {
            return Err(Error::InvalidGrid(format!("maximal age must be positive, got {a_max}")));
        }
        Ok(AgeGrid {
            a_max,
            steps,
            da: a_max / steps as f64,
        })
    }

    pub fn a_max(&self) -> f64 {
        self.a_max
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    pub fn da(&self) -> f64 {
        self.da
    }

    pub fn age(&self, k: usize) -> f64 {
        k as f64 * self.da
    }

    pub fn ages(&self) -> Vec<f64> {
        (0..=self.steps).map(|k| self.age(k)).collect()
    }

    /// Composite trapezoid weights on the `M + 1` age nodes.
    pub fn trapezoid_weights(&self) -> Vec<f64> {
        let mut w = vec![self.da; self.steps + 1];
        w[0] *= 0.5;
        w[self.steps] *= 0.5;
        w
    }
}

#[derive(Debug, Clone)]
pub struct Grids {
    pub space: SpatialGrid,
    pub laplacian: LaplacianMatrix,
    pub spectral: SpectralData,
    pub age: AgeGrid,
}

impl Grids {
    pub fn new(n: usize, length: f64, a_max: f64, steps: usize) -> Result<Self> {
        let space = SpatialGrid::new(n, length)?;
        let age = AgeGrid::new(a_max, steps)?;
        let laplacian = assemble_laplacian(&space);
        let spectral = principal_eigenpair(&laplacian)?;
        Ok(Grids {
            space,
            laplacian,
            spectral,
            age,
        })
    }

    pub fn n(&self) -> usize {
        self.space.n()
    }

    pub fn rows(&self) -> usize {
        self.age.steps() + 1
    }

    pub fn da(&self) -> f64 {
        self.age.da()
    }

    pub fn lambda1(&self) -> f64 {
        self.spectral.lambda1
    }

    pub fn phi1(&self) -> &[f64] {
        &self.spectral.phi1
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn trapezoid_weights_integrate_linear_exactly() {
        let age = AgeGrid::new(2.0, 20).unwrap();
        let s: f64 = age.trapezoid_weights().iter().zip(age.ages()).map(|(w, a)| w * a).sum();
        assert!((s - 2.0).abs() < 1e-14);
    }

    #[test]
    fn too_few_age_steps_rejected() {
        assert!(AgeGrid::new(1.0, 15).is_err());
        assert!(AgeGrid::new(0.0, 32).is_err());
    }
}
