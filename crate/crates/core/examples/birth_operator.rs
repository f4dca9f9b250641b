//! Birth operator spectral radius: normalization, constant potentials
//! against the scalar sum, and the effect of an age-dependent potential.

use agebif::birthop::{normalize_profile, spectral_radius, Species};
use agebif::evolve::PotentialField;
use agebif::mesh::Grids;

fn main() -> agebif::error::Result<()> {
    let grids = Grids::new(64, 1.0, 1.0, 128)?;
    // births concentrated at older ages
    let raw: Vec<f64> = grids.age.ages().iter().map(|a| a * a).collect();
    let profile = normalize_profile(Species::Prey, &raw, &grids)?;
    println!("normalization scale {:.6e}", profile.scale());

    let zero = spectral_radius(&grids, &PotentialField::zero(&grids), &profile)?;
    println!("r(H[0]) = {:.15} after {} iterations", zero.radius, zero.iterations);

    for c in [0.5, 1.0, 5.0] {
        let kr = spectral_radius(&grids, &PotentialField::constant(&grids, c), &profile)?;
        println!(
            "c = {c}: r = {:.12}, scalar sum {:.12}",
            kr.radius,
            profile.scalar_reduction(&grids, c)
        );
    }

    let h = PotentialField::from_fn(&grids, |a, x| 2.0 * a * (std::f64::consts::PI * x).sin());
    let kr = spectral_radius(&grids, &h, &profile)?;
    println!(
        "age-dependent potential: r = {:.10}, residual {:.1e}",
        kr.radius, kr.residual
    );
    Ok(())
}
