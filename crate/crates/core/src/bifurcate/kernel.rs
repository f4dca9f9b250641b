use crate::birthop::{resolve_birth, spectral_radius, BirthProfile};
use crate::error::{Error, Result};
use crate::evolve::{propagate_forced, propagate_linear, AgeSpaceField, PotentialField};
use crate::mesh::Grids;
use crate::model::Model;

use super::points::{BifurcationPoint, PointKind};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum KernelSite {
    /// On `B2` at `ξ₀(η)`, branch parameter `ξ`.
    PreyBranchXi,
    /// On `B2` at `η₁(ξ)`, branch parameter `η`.
    PreyBranchEta,
    /// On `B1` at `η₀(ξ)`, branch parameter `η`.
    PredatorBranchEta,
}

/// Direction `(φ*, ψ*)` spanning the kernel of the linearization at a
/// bifurcation point, and the traces `φ₀ = φ*(0)`, `ψ₀ = ψ*(0)`.
///
/// On `B2` the coexistence branch is `(u_η - εφ*, εψ*)`; on `B1` it is
/// `(εφ*, v_ξ + εψ*)`. Both components are positive.
#[derive(Debug, Clone)]
pub struct KernelBasis {
    pub site: KernelSite,
    pub eta: f64,
    pub xi: f64,
    pub phi_star: AgeSpaceField,
    pub psi_star: AgeSpaceField,
    pub phi0: Vec<f64>,
    pub psi0: Vec<f64>,
    /// `‖K(φ*, ψ*) - (φ*, ψ*)‖∞ / ‖(φ*, ψ*)‖∞` for the discrete map `K`.
    pub eigen_residual: f64,
}

/// The invading species' direction is the principal eigenvector of its birth
/// operator on the background; the resident's direction solves a forced
/// evolution and a resolvent equation.
struct Construction<'a> {
    grids: &'a Grids,
    /// Potential and profile of the invading species.
    invader_potential: PotentialField,
    invader_profile: &'a BirthProfile,
    invader_intensity: f64,
    /// Linearized potential, profile and intensity of the resident.
    resident_potential: PotentialField,
    resident_profile: &'a BirthProfile,
    resident_intensity: f64,
    /// Background times the coupling coefficient, multiplying the invader in
    /// the resident's forcing.
    coupling: AgeSpaceField,
}

impl Construction<'_> {
    /// Returns `(invader direction, its trace, resident direction, its trace,
    /// residual)`.
    fn build(&self) -> Result<(AgeSpaceField, Vec<f64>, AgeSpaceField, Vec<f64>, f64)> {
        let g = self.grids;
        let kr = spectral_radius(g, &self.invader_potential, self.invader_profile)?;
        if !kr.converged {
            return Err(Error::NonConvergence {
                what: "kernel principal eigenvector",
                iterations: kr.iterations,
                residual: kr.residual,
            });
        }
        let inv0 = kr.eigvec;
        let inv = propagate_linear(g, &self.invader_potential, &inv0)?;
        let source = self.coupling.hadamard(&inv);
        let forced = propagate_forced(g, &self.resident_potential, &source, &vec![0.0; g.n()])?;
        let s = self.resident_intensity;
        let rhs: Vec<f64> = self
            .resident_profile
            .birth_integral(&forced)
            .iter()
            .map(|v| s * v)
            .collect();
        let res0 = resolve_birth(g, s, &self.resident_potential, self.resident_profile, &rhs)?;
        let res = propagate_forced(g, &self.resident_potential, &source, &res0)?;

        // apply the discrete linearized fixed-point map once more
        let t = self.invader_intensity;
        let k_inv0: Vec<f64> = self
            .invader_profile
            .birth_integral(&inv)
            .iter()
            .map(|v| t * v)
            .collect();
        let k_inv = propagate_linear(g, &self.invader_potential, &k_inv0)?;
        let k_res0: Vec<f64> = self
            .resident_profile
            .birth_integral(&res)
            .iter()
            .map(|v| s * v)
            .collect();
        let k_res = propagate_forced(g, &self.resident_potential, &source, &k_res0)?;
        let scale = inv.sup_norm().max(res.sup_norm());
        let residual = k_inv.max_abs_diff(&inv).max(k_res.max_abs_diff(&res)) / scale;
        Ok((inv, inv0, res, res0, residual))
    }
}

/// Kernel direction at a bifurcation point of kind `Xi0`, `Eta1` or `Eta0`.
pub fn kernel_basis(model: &Model, point: &BifurcationPoint) -> Result<KernelBasis> {
    let p = &model.params;
    let bg = &point.background.field;
    let (eta, xi) = (point.eta(), point.xi());
    match point.kind {
        PointKind::Xi0 | PointKind::Eta1 => {
            let c = Construction {
                grids: &model.grids,
                invader_potential: PotentialField::from_field(bg, -p.beta2),
                invader_profile: &model.predator,
                invader_intensity: xi,
                resident_potential: PotentialField::from_field(bg, 2.0 * p.alpha1),
                resident_profile: &model.prey,
                resident_intensity: eta,
                coupling: bg.scaled(p.alpha2),
            };
            let (psi_star, psi0, phi_star, phi0, eigen_residual) = c.build()?;
            Ok(KernelBasis {
                site: if point.kind == PointKind::Xi0 {
                    KernelSite::PreyBranchXi
                } else {
                    KernelSite::PreyBranchEta
                },
                eta,
                xi,
                phi_star,
                psi_star,
                phi0,
                psi0,
                eigen_residual,
            })
        }
        PointKind::Eta0 => {
            let c = Construction {
                grids: &model.grids,
                invader_potential: PotentialField::from_field(bg, p.alpha2),
                invader_profile: &model.prey,
                invader_intensity: eta,
                resident_potential: PotentialField::from_field(bg, 2.0 * p.beta1),
                resident_profile: &model.predator,
                resident_intensity: xi,
                coupling: bg.scaled(p.beta2),
            };
            let (phi_star, phi0, psi_star, psi0, eigen_residual) = c.build()?;
            Ok(KernelBasis {
                site: KernelSite::PredatorBranchEta,
                eta,
                xi,
                phi_star,
                psi_star,
                phi0,
                psi0,
                eigen_residual,
            })
        }
        PointKind::Xi1 => Err(Error::InvalidArgument(
            "the join point on the predator branch carries no kernel construction".into(),
        )),
    }
}
