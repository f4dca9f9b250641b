//! Onset and join points of the coexistence branches, plus the limits of
//! the onset curves at large intensity.

use agebif::bifurcate::{estimate_limits, eta0, eta1, xi0, xi1, Located};
use agebif::steady::{Model, ModelParams};

fn show(name: &str, fixed: f64, found: Located) {
    match found {
        Located::Found(p) => println!("{name}({fixed}) = {:.8}", p.value),
        Located::NotFound { searched_to, .. } => println!("{name}({fixed}) not found up to {searched_to}"),
    }
}

fn main() -> agebif::error::Result<()> {
    let model = Model::uniform(64, 128, ModelParams::default())?;
    for eta in [1.2, 1.5, 2.0, 3.0] {
        println!("xi0({eta}) = {:.8}", xi0(&model, eta)?.value);
        show("xi1", eta, xi1(&model, eta, 10.0)?);
    }
    for xi in [1.2, 2.0, 3.0] {
        println!("eta0({xi}) = {:.8}", eta0(&model, xi)?.value);
    }
    show("eta1", 0.9, eta1(&model, 0.9, 10.0)?);

    let lim = estimate_limits(&model, 10.0, 10.0, 5)?;
    println!("N >= {:.6}, delta <= {:.6}", lim.n_lower, lim.delta_upper);
    Ok(())
}
