//! Single-species steady states across the threshold intensity 1.

use agebif::steady::{
    derivative_wrt_param, solve_species, verify_envelopes, Model, ModelParams, SemiTrivialOutcome, Species,
};

fn main() -> agebif::error::Result<()> {
    let model = Model::uniform(64, 128, ModelParams::default())?;
    for eta in [0.8, 1.0, 1.2, 2.0, 5.0] {
        match solve_species(&model, Species::Prey, eta, None)? {
            SemiTrivialOutcome::Trivial { iterations } => println!("eta {eta}: trivial ({iterations} Newton steps)"),
            SemiTrivialOutcome::NonTrivial(s) => {
                let env = verify_envelopes(&model.grids, &s, 0.05);
                println!(
                    "eta {eta}: sup {:.6e}, trace {:.6e}, |eta r - 1| {:.1e}, envelopes ok {}",
                    s.sup_norm(),
                    s.trace_sup(),
                    s.consistency,
                    env.all_ok()
                );
            }
        }
    }

    let s = solve_species(&model, Species::Prey, 2.0, None)?
        .nontrivial()
        .expect("supercritical");
    let z = derivative_wrt_param(&model.grids, &s)?;
    println!("d u / d eta at 2: min {:.3e}, max {:.3e}", z.min(), z.sup_norm());
    Ok(())
}
