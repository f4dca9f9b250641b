//! Cross-checks against independent dense computations: explicit matrix
//! inverses, a general eigenvalue solver, finite differences and a global
//! Newton solve of the whole age-space system.

use agebif::bifurcate::{xi1, PointKind};
use agebif::birthop::{assemble_birth_matrix, spectral_radius, BirthOperator, Species};
use agebif::evolve::{
    propagate_coupled, propagate_linear, propagate_linearized, propagate_logistic, AgeSpaceField, PotentialField,
};
use agebif::mesh::Grids;
use agebif::steady::{derivative_wrt_param, solve_species, Model, ModelParams};
use nalgebra::{DMatrix, DVector};

fn max_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).fold(0.0f64, |m, (x, y)| m.max((x - y).abs()))
}

/// Backward-Euler step matrices `(I + da(-Δ + diag h_{k+1}))^{-1}` inverted
/// densely.
fn dense_steps(g: &Grids, h: &PotentialField) -> Vec<DMatrix<f64>> {
    let a = g.laplacian.to_dense();
    let n = g.n();
    (0..g.age.steps())
        .map(|k| {
            let m = DMatrix::identity(n, n)
                + (&a + DMatrix::from_diagonal(&DVector::from_row_slice(h.row(k + 1)))) * g.da();
            m.try_inverse().unwrap()
        })
        .collect()
}

fn potential(g: &Grids) -> PotentialField {
    PotentialField::from_fn(g, |a, x| 0.5 + (3.0 * x).sin() * (1.0 + a))
}

#[test]
fn linear_propagation_matches_dense_inverse() {
    let g = Grids::new(12, 1.0, 1.0, 32).unwrap();
    let h = potential(&g);
    let phi0: Vec<f64> = (0..12).map(|i| 1.0 + 0.1 * i as f64).collect();
    let w = propagate_linear(&g, &h, &phi0).unwrap();
    let mut x = DVector::from_vec(phi0);
    for (k, step) in dense_steps(&g, &h).iter().enumerate() {
        x = step * x;
        let scale = x.amax();
        assert!(max_diff(w.row(k + 1), x.as_slice()) <= 1e-12 * scale, "row {}", k + 1);
    }
}

#[test]
fn birth_matrix_and_radius_match_dense_eigensolver() {
    let g = Grids::new(10, 1.0, 1.0, 32).unwrap();
    let model = Model::new(g.clone(), ModelParams::default(), &vec![1.0; 33], &vec![1.0; 33]).unwrap();
    let h = potential(&g);
    let q = model.prey.quadrature();
    let mut pi = DMatrix::<f64>::identity(10, 10);
    let mut oracle = pi.clone() * q[0];
    for (k, step) in dense_steps(&g, &h).iter().enumerate() {
        pi = step * pi;
        oracle += &pi * q[k + 1];
    }
    let assembled = assemble_birth_matrix(&g, &h, &model.prey).unwrap();
    assert!((&assembled - &oracle).amax() <= 1e-13 * oracle.amax());

    let kr = spectral_radius(&g, &h, &model.prey).unwrap();
    let dense = oracle
        .complex_eigenvalues()
        .iter()
        .map(|z| z.norm())
        .fold(0.0, f64::max);
    assert!((kr.radius - dense).abs() <= 1e-10 * dense, "{} vs {dense}", kr.radius);
    assert!(kr.eigvec.iter().all(|v| *v > 0.0));
}

#[test]
fn resolvent_solves_the_dense_system() {
    let g = Grids::new(10, 1.0, 1.0, 32).unwrap();
    let model = Model::uniform(10, 32, ModelParams::default()).unwrap();
    let h = potential(&g);
    let op = BirthOperator::new(&g, &h, &model.predator).unwrap();
    let eta = 0.9 / op.spectral_radius().unwrap().radius;
    let rhs: Vec<f64> = (0..10).map(|i| (i as f64).cos()).collect();
    let x = op.resolve(eta, &rhs).unwrap();
    let m = assemble_birth_matrix(&g, &h, &model.predator).unwrap();
    let back = (DMatrix::identity(10, 10) - m * eta) * DVector::from_vec(x);
    assert!(max_diff(back.as_slice(), &rhs) <= 1e-11);
    assert!(op.resolve(1.1 * eta / 0.9, &rhs).is_err());
}

#[test]
fn linearized_propagation_matches_finite_differences() {
    let g = Grids::new(8, 1.0, 1.0, 32).unwrap();
    let params = ModelParams {
        alpha2: 0.7,
        beta2: 1.3,
        ..Default::default()
    };
    let u0: Vec<f64> = g.phi1().iter().map(|p| 2.0 * p).collect();
    let v0: Vec<f64> = g.phi1().iter().map(|p| 0.5 + p).collect();
    let (u, v) = propagate_coupled(&g, &params, &u0, &v0).unwrap();
    let du: Vec<f64> = (0..8).map(|i| (i as f64 * 0.7).sin()).collect();
    let dv: Vec<f64> = (0..8).map(|i| (i as f64 * 1.3).cos()).collect();
    let (pu, pv) = propagate_linearized(&g, &params, &u, &v, None, &du, &dv).unwrap();
    let eps = 1e-6;
    let shift = |s: f64| {
        let a: Vec<f64> = u0.iter().zip(&du).map(|(x, d)| x + s * d).collect();
        let b: Vec<f64> = v0.iter().zip(&dv).map(|(x, d)| x + s * d).collect();
        propagate_coupled(&g, &params, &a, &b).unwrap()
    };
    let (up, vp) = shift(eps);
    let (um, vm) = shift(-eps);
    let fd = |p: &AgeSpaceField, m: &AgeSpaceField| -> Vec<f64> {
        p.data()
            .iter()
            .zip(m.data())
            .map(|(a, b)| (a - b) / (2.0 * eps))
            .collect()
    };
    assert!(max_diff(&fd(&up, &um), pu.data()) <= 1e-6 * (1.0 + pu.sup_norm()));
    assert!(max_diff(&fd(&vp, &vm), pv.data()) <= 1e-6 * (1.0 + pv.sup_norm()));
}

/// All rows of the implicit coupled scheme solved at once by Newton with a
/// dense Jacobian, started from the initial datum repeated over all ages.
fn global_coupled(g: &Grids, p: &ModelParams, u0: &[f64], v0: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let n = g.n();
    let m = g.age.steps();
    let da = g.da();
    let a = g.laplacian.to_dense();
    let size = 2 * n * m;
    let mut z = DVector::from_iterator(size, (0..m).flat_map(|_| u0.iter().chain(v0).copied()));
    let row = |z: &DVector<f64>, k: usize| -> (Vec<f64>, Vec<f64>) {
        if k == 0 {
            return (u0.to_vec(), v0.to_vec());
        }
        let base = 2 * n * (k - 1);
        (
            z.rows(base, n).iter().copied().collect(),
            z.rows(base + n, n).iter().copied().collect(),
        )
    };
    for _ in 0..40 {
        let mut f = DVector::zeros(size);
        let mut j = DMatrix::zeros(size, size);
        for k in 1..=m {
            let (uk, vk) = row(&z, k);
            let (up, vp) = row(&z, k - 1);
            let au = &a * DVector::from_column_slice(&uk);
            let av = &a * DVector::from_column_slice(&vk);
            let base = 2 * n * (k - 1);
            for i in 0..n {
                f[base + i] = uk[i] + da * (au[i] + (p.alpha1 * uk[i] + p.alpha2 * vk[i]) * uk[i]) - up[i];
                f[base + n + i] = vk[i] + da * (av[i] + (p.beta1 * vk[i] - p.beta2 * uk[i]) * vk[i]) - vp[i];
                for l in 0..n {
                    j[(base + i, base + l)] = da * a[(i, l)];
                    j[(base + n + i, base + n + l)] = da * a[(i, l)];
                }
                j[(base + i, base + i)] += 1.0 + da * (2.0 * p.alpha1 * uk[i] + p.alpha2 * vk[i]);
                j[(base + i, base + n + i)] = da * p.alpha2 * uk[i];
                j[(base + n + i, base + i)] = -da * p.beta2 * vk[i];
                j[(base + n + i, base + n + i)] += 1.0 + da * (2.0 * p.beta1 * vk[i] - p.beta2 * uk[i]);
                if k > 1 {
                    j[(base + i, base - 2 * n + i)] = -1.0;
                    j[(base + n + i, base - n + i)] = -1.0;
                }
            }
        }
        let dz = j.lu().solve(&f).unwrap();
        z -= &dz;
        if dz.amax() < 1e-14 * (1.0 + z.amax()) {
            break;
        }
    }
    let mut u = u0.to_vec();
    let mut v = v0.to_vec();
    for k in 1..=m {
        let (uk, vk) = row(&z, k);
        u.extend(uk);
        v.extend(vk);
    }
    (u, v)
}

#[test]
fn coupled_propagation_matches_global_newton() {
    let g = Grids::new(5, 1.0, 1.0, 16).unwrap();
    let params = ModelParams {
        alpha2: 0.5,
        beta1: 2.0,
        beta2: 1.5,
        ..Default::default()
    };
    let u0 = [0.5, 1.5, 3.0, 1.5, 0.5];
    let v0 = [2.0, 1.0, 0.2, 1.0, 2.0];
    let (u, v) = propagate_coupled(&g, &params, &u0, &v0).unwrap();
    let (gu, gv) = global_coupled(&g, &params, &u0, &v0);
    assert!(max_diff(u.data(), &gu) <= 1e-11, "{}", max_diff(u.data(), &gu));
    assert!(max_diff(v.data(), &gv) <= 1e-11, "{}", max_diff(v.data(), &gv));
}

#[test]
fn semitrivial_trace_is_a_fixed_point_of_the_birth_law() {
    let model = Model::uniform(16, 64, ModelParams::default()).unwrap();
    for eta in [1.2, 2.0, 3.5] {
        let s = solve_species(&model, Species::Prey, eta, None)
            .unwrap()
            .nontrivial()
            .unwrap();
        let u = propagate_logistic(&model.grids, &s.trace, 1.0).unwrap();
        let image: Vec<f64> = model.prey.birth_integral(&u).iter().map(|b| eta * b).collect();
        assert!(max_diff(&image, &s.trace) <= 1e-9 * s.trace_sup(), "eta = {eta}");
    }
}

#[test]
fn intensity_derivative_matches_central_difference() {
    let model = Model::uniform(16, 64, ModelParams::default()).unwrap();
    let eta = 2.0;
    let s = solve_species(&model, Species::Prey, eta, None)
        .unwrap()
        .nontrivial()
        .unwrap();
    let d = derivative_wrt_param(&model.grids, &s).unwrap();
    let eps = 1e-4;
    let at = |e: f64| {
        solve_species(&model, Species::Prey, e, Some(&s.trace))
            .unwrap()
            .nontrivial()
            .unwrap()
            .field
    };
    let (p, m) = (at(eta + eps), at(eta - eps));
    let fd: Vec<f64> = p
        .data()
        .iter()
        .zip(m.data())
        .map(|(a, b)| (a - b) / (2.0 * eps))
        .collect();
    assert!(max_diff(&fd, d.data()) <= 1e-5 * d.sup_norm());
}

#[test]
fn join_point_agrees_with_false_position() {
    let model = Model::uniform(12, 32, ModelParams::default()).unwrap();
    let eta = 1.4;
    let found = xi1(&model, eta, 5.0).unwrap().found().unwrap();
    assert_eq!(found.kind, PointKind::Xi1);
    let g = |xi: f64| {
        let v = solve_species(&model, Species::Predator, xi, None)
            .unwrap()
            .nontrivial()
            .unwrap();
        let h = PotentialField::from_field(&v.field, model.params.alpha2);
        eta * spectral_radius(&model.grids, &h, &model.prey).unwrap().radius - 1.0
    };
    // Illinois false position keeps the bracket, unlike plain secant
    let (mut a, mut b) = (1.05, 3.0);
    let (mut ga, mut gb) = (g(a), g(b));
    assert!(ga * gb < 0.0);
    let mut side = 0;
    for _ in 0..60 {
        let c = (a * gb - b * ga) / (gb - ga);
        let gc = g(c);
        if gc * gb < 0.0 {
            a = b;
            ga = gb;
            side = 0;
        } else if side == 1 {
            ga *= 0.5;
        } else {
            side = 1;
        }
        b = c;
        gb = gc;
        if gc.abs() < 1e-13 {
            break;
        }
    }
    assert!((found.value - b).abs() <= 1e-7, "{} vs {b}", found.value);
}
