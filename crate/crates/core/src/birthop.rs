//! Birth operators `H[h] φ = ∫ b(a) Π[h](a, 0) φ da` on the trace space,
//! their principal eigenvalue and resolvents.

use std::fmt;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::evolve::{propagate_columns, propagate_linear, AgeSpaceField, PotentialField};
use crate::linalg::{min_value, sup_norm};
use crate::mesh::Grids;

/// Above this many nodes the operator is applied matrix-free.
pub const DENSE_LIMIT: usize = 512;
pub const KR_MAX_ITER: usize = 10_000;
/// Relative eigen-residual accepted as converged.
pub const KR_TOL: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Species {
    Prey,
    Predator,
}

impl fmt::Display for Species {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Species::Prey => "prey",
            Species::Predator => "predator",
        })
    }
}

/// Birth rate sampled on the age grid together with its trapezoid
/// quadrature weights `q_k = w_k b(a_k)`.
#[derive(Debug, Clone, PartialEq)]
pub struct BirthProfile {
    species: Species,
    samples: Vec<f64>,
    quadrature: Vec<f64>,
    scale: f64,
}

impl BirthProfile {
    /// `scale * raw` without normalization; used to build deliberately
    /// mis-scaled profiles.
    pub fn with_scale(species: Species, raw: &[f64], scale: f64, grids: &Grids) -> Result<Self> {
        validate_raw(raw, grids)?;
        let samples: Vec<f64> = raw.iter().map(|b| b * scale).collect();
        let quadrature = grids
            .age
            .trapezoid_weights()
            .iter()
            .zip(&samples)
            .map(|(w, b)| w * b)
            .collect();
        Ok(BirthProfile {
            species,
            samples,
            quadrature,
            scale,
        })
    }

    pub fn species(&self) -> Species {
        self.species
    }

    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    pub fn quadrature(&self) -> &[f64] {
        &self.quadrature
    }

    /// Factor applied to the raw samples.
    pub fn scale(&self) -> f64 {
        self.scale
    }

    pub fn sup_norm(&self) -> f64 {
        sup_norm(&self.samples)
    }

    /// `1/q_0`. At or above this intensity the birth law `c = η Σ q_k u_k`
    /// with `u_k >= 0` admits only `c = 0`.
    pub fn intensity_limit(&self) -> f64 {
        1.0 / self.quadrature[0]
    }

    /// Fails with [`Error::BeyondResolution`] unless `intensity` is below
    /// [`Self::intensity_limit`].
    pub fn check_intensity(&self, intensity: f64) -> Result<()> {
        let limit = self.intensity_limit();
        if intensity < limit {
            Ok(())
        } else {
            Err(Error::BeyondResolution { intensity, limit })
        }
    }

    /// `Σ_k q_k w(a_k)`, the discrete `∫ b w da`.
    pub fn birth_integral(&self, field: &AgeSpaceField) -> Vec<f64> {
        let mut out = vec![0.0; field.cols()];
        for (k, q) in self.quadrature.iter().enumerate() {
            if *q != 0.0 {
                for (o, v) in out.iter_mut().zip(field.row(k)) {
                    *o += q * v;
                }
            }
        }
        out
    }

    /// Principal eigenvalue of `H[c]` for a constant potential `c`:
    /// `Σ q_k (1 + da(λ₁ + c))^{-k}`.
    pub fn scalar_reduction(&self, grids: &Grids, c: f64) -> f64 {
        let ratio = 1.0 / (1.0 + grids.da() * (grids.lambda1() + c));
        let mut p = 1.0;
        let mut s = 0.0;
        for q in &self.quadrature {
            s += q * p;
            p *= ratio;
        }
        s
    }
}

fn validate_raw(raw: &[f64], grids: &Grids) -> Result<()> {
    if raw.len() != grids.rows() {
        return Err(Error::InvalidProfile(format!(
            "profile has {} samples, age grid has {}",
            raw.len(),
            grids.rows()
        )));
    }
    if raw.iter().any(|b| !b.is_finite() || *b < 0.0) {
        return Err(Error::InvalidProfile("samples must be finite and nonnegative".into()));
    }
    if raw.iter().all(|b| *b == 0.0) {
        return Err(Error::InvalidProfile("profile is identically zero".into()));
    }
    let a_max = grids.age.a_max();
    let tail_ok = grids
        .age
        .ages()
        .iter()
        .zip(raw)
        .filter(|(a, _)| **a >= 0.9 * a_max - 1e-12 * a_max)
        .all(|(_, b)| *b > 0.0);
    if !tail_ok {
        return Err(Error::InvalidProfile(
            "profile must be strictly positive on the last tenth of the age interval".into(),
        ));
    }
    Ok(())
}

/// Scales `raw` so that the discrete `H[0]` has principal eigenvalue 1.
pub fn normalize_profile(species: Species, raw: &[f64], grids: &Grids) -> Result<BirthProfile> {
    let unit = BirthProfile::with_scale(species, raw, 1.0, grids)?;
    let s = unit.scalar_reduction(grids, 0.0);
    BirthProfile::with_scale(species, raw, 1.0 / s, grids)
}

/// Principal eigenpair of a positive operator.
#[derive(Debug, Clone, PartialEq)]
pub struct KreinRutmanResult {
    pub radius: f64,
    /// Positive, sup-norm 1.
    pub eigvec: Vec<f64>,
    /// `‖Hx - r x‖∞ / r`.
    pub residual: f64,
    pub iterations: usize,
    pub converged: bool,
}

enum Repr<'a> {
    Dense(DMatrix<f64>),
    Implicit {
        grids: &'a Grids,
        potential: &'a PotentialField,
        profile: &'a BirthProfile,
    },
}

/// `H[h]` for a fixed potential and profile, materialized when `n <= 512`.
pub struct BirthOperator<'a> {
    repr: Repr<'a>,
    phi1: &'a [f64],
}

/// Dense `n x n` matrix of `H[h]`, column `j` being `H e_j`.
pub fn assemble_birth_matrix(
    grids: &Grids,
    potential: &PotentialField,
    profile: &BirthProfile,
) -> Result<DMatrix<f64>> {
    let n = grids.n();
    let mut identity = vec![0.0; n * n];
    for i in 0..n {
        identity[i * n + i] = 1.0;
    }
    let mut acc = vec![0.0; n * n];
    let q = profile.quadrature();
    propagate_columns(grids, potential, identity, n, |k, state| {
        if q[k] != 0.0 {
            for (a, s) in acc.iter_mut().zip(state) {
                *a += q[k] * s;
            }
        }
    })?;
    Ok(DMatrix::from_row_slice(n, n, &acc))
}

impl<'a> BirthOperator<'a> {
    pub fn new(grids: &'a Grids, potential: &'a PotentialField, profile: &'a BirthProfile) -> Result<Self> {
        let repr = if grids.n() <= DENSE_LIMIT {
            Repr::Dense(assemble_birth_matrix(grids, potential, profile)?)
        } else {
            Repr::Implicit {
                grids,
                potential,
                profile,
            }
        };
        Ok(BirthOperator {
            repr,
            phi1: grids.phi1(),
        })
    }

    pub fn matrix(&self) -> Option<&DMatrix<f64>> {
        match &self.repr {
            Repr::Dense(m) => Some(m),
            Repr::Implicit { .. } => None,
        }
    }

    pub fn apply(&self, phi: &[f64]) -> Result<Vec<f64>> {
        match &self.repr {
            Repr::Dense(m) => Ok((m * DVector::from_column_slice(phi)).as_slice().to_vec()),
            Repr::Implicit {
                grids,
                potential,
                profile,
            } => apply_birth_operator(grids, potential, profile, phi),
        }
    }

    /// Power iteration started at `φ₁`.
    pub fn spectral_radius(&self) -> Result<KreinRutmanResult> {
        let mut x = self.phi1.to_vec();
        let mut best = f64::INFINITY;
        let mut stalled = 0;
        for it in 1..=KR_MAX_ITER {
            let y = self.apply(&x)?;
            let rho = sup_norm(&y);
            if !(rho > 0.0 && rho.is_finite()) {
                return Err(Error::Singular("birth operator power iteration"));
            }
            let residual = y.iter().zip(&x).fold(0.0f64, |m, (a, b)| m.max((a - rho * b).abs())) / rho;
            let done = residual <= 1e-14 || (residual <= KR_TOL && stalled >= 3);
            if done || it == KR_MAX_ITER {
                let converged = residual <= KR_TOL;
                return Ok(KreinRutmanResult {
                    radius: rho,
                    eigvec: x,
                    residual,
                    iterations: it,
                    converged,
                });
            }
            if residual < 0.5 * best {
                best = residual;
                stalled = 0;
            } else {
                stalled += 1;
            }
            x = y.iter().map(|v| v / rho).collect();
        }
        unreachable!()
    }

    /// Solves `(1 - η H) x = rhs`; refuses unless `η r(H) < 1`.
    pub fn resolve(&self, eta: f64, rhs: &[f64]) -> Result<Vec<f64>> {
        let r = self.spectral_radius()?.radius;
        if eta * r >= 1.0 {
            return Err(Error::SpectralCondition {
                radius: r,
                product: eta * r,
            });
        }
        match &self.repr {
            Repr::Dense(m) => {
                let n = m.nrows();
                let a = DMatrix::identity(n, n) - m * eta;
                a.lu()
                    .solve(&DVector::from_column_slice(rhs))
                    .map(|x| x.as_slice().to_vec())
                    .ok_or(Error::Singular("birth resolvent"))
            }
            Repr::Implicit { .. } => {
                // Neumann series; converges geometrically since η r < 1
                let mut x = rhs.to_vec();
                let mut term = rhs.to_vec();
                for it in 0..KR_MAX_ITER {
                    term = self.apply(&term)?.iter().map(|v| eta * v).collect();
                    for (a, t) in x.iter_mut().zip(&term) {
                        *a += t;
                    }
                    if sup_norm(&term) <= 1e-15 * sup_norm(&x) {
                        return Ok(x);
                    }
                    if it + 1 == KR_MAX_ITER {
                        break;
                    }
                }
                Err(Error::NonConvergence {
                    what: "birth resolvent series",
                    iterations: KR_MAX_ITER,
                    residual: sup_norm(&term),
                })
            }
        }
    }
}

/// Matrix-free `H[h] φ`.
pub fn apply_birth_operator(
    grids: &Grids,
    potential: &PotentialField,
    profile: &BirthProfile,
    phi: &[f64],
) -> Result<Vec<f64>> {
    let w = propagate_linear(grids, potential, phi)?;
    Ok(profile.birth_integral(&w))
}

pub fn spectral_radius(grids: &Grids, potential: &PotentialField, profile: &BirthProfile) -> Result<KreinRutmanResult> {
    BirthOperator::new(grids, potential, profile)?.spectral_radius()
}

pub fn resolve_birth(
    grids: &Grids,
    eta: f64,
    potential: &PotentialField,
    profile: &BirthProfile,
    rhs: &[f64],
) -> Result<Vec<f64>> {
    BirthOperator::new(grids, potential, profile)?.resolve(eta, rhs)
}

/// True when every entry is strictly positive.
pub fn strictly_positive(v: &[f64]) -> bool {
    min_value(v) > 0.0
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grids() -> Grids {
        Grids::new(24, 1.0, 1.0, 48).unwrap()
    }

    #[test]
    fn normalized_profile_has_unit_radius() {
        let g = grids();
        for raw in [vec![1.0; g.rows()], g.age.ages().iter().map(|a| (-a).exp()).collect()] {
            let b = normalize_profile(Species::Prey, &raw, &g).unwrap();
            let kr = spectral_radius(&g, &PotentialField::zero(&g), &b).unwrap();
            assert!((kr.radius - 1.0).abs() <= 1e-12);
            assert!(kr.converged);
        }
    }

    #[test]
    fn profile_validation() {
        let g = grids();
        assert!(normalize_profile(Species::Prey, &vec![0.0; g.rows()], &g).is_err());
        let mut early = vec![0.0; g.rows()];
        early[1] = 1.0;
        assert!(normalize_profile(Species::Prey, &early, &g).is_err());
        assert!(normalize_profile(Species::Prey, &[1.0; 3], &g).is_err());
    }

    #[test]
    fn dense_matrix_columns_match_matrix_free_application() {
        let g = grids();
        let b = normalize_profile(Species::Predator, &vec![1.0; g.rows()], &g).unwrap();
        let h = PotentialField::from_fn(&g, |a, x| 3.0 * a * x - 1.0);
        let m = assemble_birth_matrix(&g, &h, &b).unwrap();
        let mut e = vec![0.0; g.n()];
        e[7] = 1.0;
        let col = apply_birth_operator(&g, &h, &b, &e).unwrap();
        for i in 0..g.n() {
            assert!((m[(i, 7)] - col[i]).abs() < 1e-14);
        }
    }

    #[test]
    fn resolvent_refuses_supercritical_intensity() {
        let g = grids();
        let b = normalize_profile(Species::Prey, &vec![1.0; g.rows()], &g).unwrap();
        let z = PotentialField::zero(&g);
        assert!(matches!(
            resolve_birth(&g, 1.0, &z, &b, g.phi1()),
            Err(Error::SpectralCondition { .. })
        ));
        let x = resolve_birth(&g, 0.5, &z, &b, g.phi1()).unwrap();
        // φ₁ is an eigenvector of H[0] with eigenvalue 1
        for (a, p) in x.iter().zip(g.phi1()) {
            assert!((a - 2.0 * p).abs() < 1e-12);
        }
    }
}
