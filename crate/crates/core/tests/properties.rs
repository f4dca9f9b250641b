use agebif::birthop::{spectral_radius, Species};
use agebif::evolve::{propagate_coupled, propagate_linear, propagate_logistic, AgeSpaceField, PotentialField};
use agebif::mesh::Grids;
use agebif::steady::{decay_envelope, solve_species, Model, ModelParams};
use proptest::prelude::*;

const N: usize = 8;
const STEPS: usize = 16;

fn grids() -> Grids {
    Grids::new(N, 1.0, 1.0, STEPS).unwrap()
}

fn trace() -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(0.0..5.0f64, N)
}

fn potential_values() -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-2.0..4.0f64, N * (STEPS + 1))
}

fn field(g: &Grids, values: &[f64]) -> PotentialField {
    PotentialField::from_field(
        &AgeSpaceField::from_data(g.rows(), g.n(), values.to_vec()).unwrap(),
        1.0,
    )
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn radius_decreases_when_potential_grows(base in potential_values(), bump in prop::collection::vec(0.0..1.0f64, N * (STEPS + 1)), at in 0..N * (STEPS + 1)) {
        let g = grids();
        let model = Model::uniform(N, STEPS, ModelParams::default()).unwrap();
        let mut upper = bump.clone();
        upper[at] += 0.5;
        let larger: Vec<f64> = base.iter().zip(&upper).map(|(b, d)| b + d).collect();
        let lo = spectral_radius(&g, &field(&g, &base), &model.prey).unwrap().radius;
        let hi = spectral_radius(&g, &field(&g, &larger), &model.prey).unwrap().radius;
        prop_assert!(hi < lo, "{hi} !< {lo}");
    }

    #[test]
    fn linear_propagation_preserves_order(a in trace(), d in trace(), values in potential_values()) {
        let g = grids();
        let h = field(&g, &values);
        let b: Vec<f64> = a.iter().zip(&d).map(|(x, y)| x + y).collect();
        let wa = propagate_linear(&g, &h, &a).unwrap();
        let wb = propagate_linear(&g, &h, &b).unwrap();
        prop_assert!(wa.min() >= 0.0);
        prop_assert!(wa.data().iter().zip(wb.data()).all(|(x, y)| x <= y));
    }

    #[test]
    fn logistic_evolution_stays_under_decay_envelope(a in trace(), alpha in 0.2..3.0f64) {
        let g = grids();
        let u = propagate_logistic(&g, &a, alpha).unwrap();
        let top = a.iter().cloned().fold(0.0, f64::max);
        let env = decay_envelope(&g, alpha, top);
        prop_assert!(u.min() >= 0.0);
        for (k, e) in env.iter().enumerate() {
            let row_max = u.row(k).iter().cloned().fold(0.0, f64::max);
            prop_assert!(row_max <= e * (1.0 + 1e-12), "row {k}: {row_max} > {e}");
        }
    }

    #[test]
    fn coupled_evolution_stays_nonnegative(a in trace(), b in trace(), alpha2 in 0.0..2.0f64, beta2 in 0.0..2.0f64) {
        let g = grids();
        let params = ModelParams { alpha2, beta2, ..Default::default() };
        let (u, v) = propagate_coupled(&g, &params, &a, &b).unwrap();
        prop_assert!(u.min() >= 0.0 && v.min() >= 0.0);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn semitrivial_state_grows_with_intensity(eta in 1.1..2.5f64, step in 0.05..0.5f64) {
        let model = Model::uniform(N, 32, ModelParams::default()).unwrap();
        let lo = solve_species(&model, Species::Prey, eta, None).unwrap().nontrivial().unwrap();
        let hi = solve_species(&model, Species::Prey, eta + step, None).unwrap().nontrivial().unwrap();
        prop_assert!(lo.field.data().iter().zip(hi.field.data()).all(|(x, y)| x <= y));
        prop_assert!(hi.trace.iter().zip(&lo.trace).all(|(x, y)| x > y));
    }
}
