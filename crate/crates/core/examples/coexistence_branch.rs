//! Continues the coexistence branch leaving the prey-only state at xi0(eta)
//! until it meets the predator-only state.

use agebif::bifurcate::{continue_branch, xi1, BranchKind, ContinuationSettings, Termination};
use agebif::steady::{Model, ModelParams};

fn main() -> agebif::error::Result<()> {
    let model = Model::uniform(64, 128, ModelParams::default())?;
    let eta = 1.3;
    let settings = ContinuationSettings {
        max_step: 0.05,
        ..Default::default()
    };
    let branch = continue_branch(&model, BranchKind::B3, eta, &settings)?;
    println!("anchor xi0({eta}) = {:.6}", branch.anchor);
    println!("{:>10} {:>12} {:>12} {:>9}", "xi", "sup u", "sup v", "residual");
    for p in &branch.points {
        println!(
            "{:>10.5} {:>12.5e} {:>12.5e} {:>9.1e}",
            p.param, p.sup_u, p.sup_v, p.residual
        );
    }
    if let Termination::JoinedB1 { xi_hat } = branch.termination {
        let target = xi1(&model, eta, 10.0)?.found().map_or(f64::NAN, |p| p.value);
        println!("joined at {xi_hat:.8}, xi1 by bisection {target:.8}");
    } else {
        println!("stopped: {}", branch.termination.label());
    }
    Ok(())
}
