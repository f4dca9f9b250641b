//! Continues the branch leaving the predator-only state at eta0(xi) in the
//! prey intensity, with an exponentially decaying predator fertility.

use agebif::bifurcate::{continue_branch, BranchKind, ContinuationSettings};
use agebif::mesh::Grids;
use agebif::steady::{Model, ModelParams};

fn main() -> agebif::error::Result<()> {
    let grids = Grids::new(64, 1.0, 1.0, 128)?;
    let ages = grids.age.ages();
    let prey = vec![1.0; ages.len()];
    let predator: Vec<f64> = ages.iter().map(|a| (-1.5 * a).exp()).collect();
    let params = ModelParams {
        alpha2: 0.5,
        ..Default::default()
    };
    let model = Model::new(grids, params, &prey, &predator)?;
    let settings = ContinuationSettings {
        param_limit: 6.0,
        ..Default::default()
    };
    for xi in [1.5, 2.0] {
        let b = continue_branch(&model, BranchKind::S3, xi, &settings)?;
        let last = b.points.last().expect("nonempty branch");
        println!(
            "xi {xi}: eta0 {:.6}, {} points, {} at eta {:.3}, sup u {:.4e}, sup v {:.4e}",
            b.anchor,
            b.points.len(),
            b.termination.label(),
            last.param,
            last.sup_u,
            last.sup_v
        );
    }
    Ok(())
}
