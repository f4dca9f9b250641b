//! Principal Dirichlet eigenpair of the discrete Laplacian and its approach
//! to the continuum value under refinement.

use agebif::spatial::{assemble_laplacian, principal_eigenpair, SpatialGrid};

fn main() -> agebif::error::Result<()> {
    let pi2 = std::f64::consts::PI.powi(2);
    println!("{:>5} {:>18} {:>18} {:>10}", "n", "lambda1", "closed form", "pi^2 gap");
    for n in [8, 16, 32, 64, 99, 128] {
        let lap = assemble_laplacian(&SpatialGrid::new(n, 1.0)?);
        let sd = principal_eigenpair(&lap)?;
        println!(
            "{n:>5} {:>18.12} {:>18.12} {:>10.3e}",
            sd.lambda1,
            lap.closed_form_eigenvalue(1),
            pi2 - sd.lambda1
        );
    }
    Ok(())
}
