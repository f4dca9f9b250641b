//! Bifurcation points from the semi-trivial branches, kernel directions at
//! those points and continuation of the coexistence branches.
//!
//! Branch names follow the usual diagram: `B1` is the predator-only branch
//! `(0, v_ξ)`, `B2` the prey-only branch `(u_η, 0)`. `B3` leaves `B2` at
//! `ξ₀(η)` and travels in `ξ` until it meets `B1` near `ξ₁(η)`; `S3` leaves
//! `B1` at `η₀(ξ)` and `S4` leaves `B2` at `η₁(ξ)`, both travelling in `η`.

mod branch;
mod kernel;
mod points;

pub use branch::{continue_branch, continue_from, Branch, BranchKind, BranchPoint, ContinuationSettings, Termination};
pub use kernel::{kernel_basis, KernelBasis, KernelSite};
pub use points::{
    estimate_limits, eta0, eta1, xi0, xi1, BifurcationPoint, LimitEstimates, Located, PointKind, TrendRow,
};

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{Model, ModelParams};

    fn model() -> Model {
        Model::uniform(16, 32, ModelParams::default()).unwrap()
    }

    #[test]
    fn onset_points_are_ordered() {
        let m = model();
        let a = xi0(&m, 1.3).unwrap();
        let b = xi0(&m, 2.0).unwrap();
        assert!(0.0 < b.value && b.value < a.value && a.value < 1.0);
        assert_eq!((a.eta(), a.xi()), (1.3, a.value));
        let e = eta0(&m, 1.5).unwrap();
        assert!(e.value > 1.0 && e.spectral_residual <= 1e-8);
        assert_eq!(e.eta(), e.value);
    }

    #[test]
    fn kernel_direction_is_positive() {
        let m = model();
        let p = xi0(&m, 1.3).unwrap();
        let k = kernel_basis(&m, &p).unwrap();
        assert_eq!(k.site, KernelSite::PreyBranchXi);
        assert!(k.eigen_residual <= 1e-6, "{}", k.eigen_residual);
        assert!(k.psi0.iter().all(|v| *v > 0.0));
        assert!(k.phi0.iter().all(|v| *v > 0.0));
    }

    #[test]
    fn join_point_search_reports_absence() {
        let m = model();
        match xi1(&m, 1.3, 1.05).unwrap() {
            Located::NotFound { searched_to, gap } => {
                assert_eq!(searched_to, 1.05);
                assert!(gap.is_finite());
            }
            Located::Found(p) => panic!("unexpected join at {}", p.value),
        }
    }

    #[test]
    fn prey_branch_joins_predator_branch() {
        let m = model();
        let settings = ContinuationSettings {
            max_step: 0.05,
            param_limit: 5.0,
            ..Default::default()
        };
        let b = continue_branch(&m, BranchKind::B3, 1.3, &settings).unwrap();
        let x1 = xi1(&m, 1.3, 5.0).unwrap().found().unwrap();
        match b.termination {
            Termination::JoinedB1 { xi_hat } => assert!((xi_hat - x1.value).abs() < 2e-2, "{xi_hat} vs {}", x1.value),
            ref t => panic!("terminated with {t:?}"),
        }
        assert!(b.points.len() >= 5);
        assert!(b.points.windows(2).all(|w| w[1].param > w[0].param));
        assert!(b
            .points
            .iter()
            .all(|p| p.param > b.anchor && p.sup_u > 0.0 && p.sup_v > 0.0));
    }

    #[test]
    fn invalid_settings_are_rejected() {
        let m = model();
        let bad = ContinuationSettings {
            min_step: 1.0,
            ..Default::default()
        };
        assert!(continue_branch(&m, BranchKind::S3, 2.0, &bad).is_err());
    }
}
