//! Coexistence steady states of the predator-prey system.
//!
//! Unknowns are the stacked traces `(u(0), v(0)) ∈ ℝ²ⁿ`; the residual is
//! `(c_u - η B₁[u], c_v - ξ B₂[v])` with `(u, v)` the coupled age evolution
//! from those traces.

use nalgebra::{DMatrix, DVector};

use crate::birthop::spectral_radius;
use crate::error::{Error, Result};
use crate::evolve::{linearized_columns, propagate_coupled, AgeSpaceField, PotentialField};
use crate::linalg::{min_value, sup_norm};
use crate::model::Model;
use crate::steady::{SemiTrivialSolution, MAX_HALVINGS, NEWTON_MAX_STEPS, NEWTON_TOL};

/// Relative size below which a trace counts as zero.
pub const ZERO_FRACTION: f64 = 1e-8;
const CONE_SLACK: f64 = 1e-12;
const STATIONARY_STEP: f64 = 1e-6;

#[derive(Debug, Clone)]
pub struct CoexistenceSolution {
    pub eta: f64,
    pub xi: f64,
    pub u: AgeSpaceField,
    pub v: AgeSpaceField,
    pub trace_u: Vec<f64>,
    pub trace_v: Vec<f64>,
    /// `‖F‖∞` at the returned traces.
    pub residual: f64,
    pub iterations: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StateClass {
    Coexistence,
    /// `v = 0`, `u > 0`.
    PreyOnly,
    /// `u = 0`, `v > 0`.
    PredatorOnly,
    Trivial,
}

#[derive(Debug, Clone)]
pub struct CoexistOutcome {
    pub class: StateClass,
    pub state: CoexistenceSolution,
}

/// Reference magnitudes for deciding that a trace vanished, normally the
/// sup-norms of the companion semi-trivial traces.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ZeroScales {
    pub prey: f64,
    pub predator: f64,
}

impl Default for ZeroScales {
    fn default() -> Self {
        ZeroScales {
            prey: 1.0,
            predator: 1.0,
        }
    }
}

pub fn classify(trace_u: &[f64], trace_v: &[f64], scales: ZeroScales) -> StateClass {
    let u_zero = sup_norm(trace_u) < ZERO_FRACTION * scales.prey;
    let v_zero = sup_norm(trace_v) < ZERO_FRACTION * scales.predator;
    match (u_zero, v_zero) {
        (false, false) => StateClass::Coexistence,
        (false, true) => StateClass::PreyOnly,
        (true, false) => StateClass::PredatorOnly,
        (true, true) => StateClass::Trivial,
    }
}

struct Evaluation {
    f: Vec<f64>,
    u: AgeSpaceField,
    v: AgeSpaceField,
}

fn evaluate(model: &Model, eta: f64, xi: f64, c: &[f64]) -> Result<Evaluation> {
    let n = model.grids.n();
    let (cu, cv) = c.split_at(n);
    let (u, v) = propagate_coupled(&model.grids, &model.params, cu, cv)?;
    let bu = model.prey.birth_integral(&u);
    let bv = model.predator.birth_integral(&v);
    let mut f = Vec::with_capacity(2 * n);
    f.extend(cu.iter().zip(&bu).map(|(c, b)| c - eta * b));
    f.extend(cv.iter().zip(&bv).map(|(c, b)| c - xi * b));
    Ok(Evaluation { f, u, v })
}

/// `I - diag(η B₁, ξ B₂) ∂(u, v)/∂(c_u, c_v)` from the linearized evolution.
fn jacobian(model: &Model, eta: f64, xi: f64, u: &AgeSpaceField, v: &AgeSpaceField) -> Result<DMatrix<f64>> {
    let n = model.grids.n();
    let m = 2 * n;
    let mut x = vec![0.0; n * m];
    let mut y = vec![0.0; n * m];
    for i in 0..n {
        x[i * m + i] = 1.0;
        y[i * m + n + i] = 1.0;
    }
    let mut ju = vec![0.0; n * m];
    let mut jv = vec![0.0; n * m];
    let (q1, q2) = (model.prey.quadrature(), model.predator.quadrature());
    linearized_columns(&model.grids, &model.params, u, v, x, y, m, |k, xs, ys| {
        let (a, b) = (eta * q1[k], xi * q2[k]);
        for ((j, s), t) in ju.iter_mut().zip(xs).zip(jv.iter_mut().zip(ys)) {
            *j += a * s;
            *t.0 += b * t.1;
        }
    })?;
    let mut out = DMatrix::identity(m, m);
    for i in 0..n {
        for j in 0..m {
            out[(i, j)] -= ju[i * m + j];
            out[(n + i, j)] -= jv[i * m + j];
        }
    }
    Ok(out)
}

fn in_cone(c: &[f64], n: usize, scales: ZeroScales) -> bool {
    let (cu, cv) = c.split_at(n);
    min_value(cu) >= -CONE_SLACK * scales.prey.max(sup_norm(cu))
        && min_value(cv) >= -CONE_SLACK * scales.predator.max(sup_norm(cv))
}

/// Damped Newton for the stacked trace system from `(seed_u, seed_v)`.
/// Steps leaving the positive cone are halved; the converged state is
/// classified against `scales`.
pub fn solve_coexistence(
    model: &Model,
    eta: f64,
    xi: f64,
    seed_u: &[f64],
    seed_v: &[f64],
    scales: ZeroScales,
) -> Result<CoexistOutcome> {
    let n = model.grids.n();
    if seed_u.len() != n || seed_v.len() != n {
        return Err(Error::InvalidArgument("seed traces must match the spatial grid".into()));
    }
    if !(eta > 0.0 && xi > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "intensities must be positive, got ({eta}, {xi})"
        )));
    }
    model.prey.check_intensity(eta)?;
    model.predator.check_intensity(xi)?;
    let mut c: Vec<f64> = seed_u.iter().chain(seed_v).map(|v| v.max(0.0)).collect();
    let mut ev = evaluate(model, eta, xi, &c)?;
    for it in 0..=NEWTON_MAX_STEPS {
        let cn = sup_norm(&c);
        let fnorm = sup_norm(&ev.f);
        let j = jacobian(model, eta, xi, &ev.u, &ev.v)?;
        let rhs = DVector::from_iterator(2 * n, ev.f.iter().map(|v| -v));
        let delta = j.lu().solve(&rhs).ok_or(Error::Singular("coexistence Newton"))?;
        if fnorm <= NEWTON_TOL * (1.0 + cn) && delta.amax() <= STATIONARY_STEP * cn.max(f64::MIN_POSITIVE) {
            let polished: Vec<f64> = c.iter().zip(delta.iter()).map(|(c, d)| (c + d).max(0.0)).collect();
            if let Ok(ep) = evaluate(model, eta, xi, &polished) {
                if sup_norm(&ep.f) < fnorm {
                    c = polished;
                    ev = ep;
                }
            }
            let (cu, cv) = c.split_at(n);
            let class = classify(cu, cv, scales);
            return Ok(CoexistOutcome {
                class,
                state: CoexistenceSolution {
                    eta,
                    xi,
                    trace_u: cu.to_vec(),
                    trace_v: cv.to_vec(),
                    residual: sup_norm(&ev.f),
                    u: ev.u,
                    v: ev.v,
                    iterations: it,
                },
            });
        }
        if it == NEWTON_MAX_STEPS {
            break;
        }
        let mut t = 1.0;
        let mut accepted = false;
        for _ in 0..=MAX_HALVINGS {
            let trial: Vec<f64> = c.iter().zip(delta.iter()).map(|(c, d)| c + t * d).collect();
            if in_cone(&trial, n, scales) {
                let trial: Vec<f64> = trial.iter().map(|v| v.max(0.0)).collect();
                if let Ok(et) = evaluate(model, eta, xi, &trial) {
                    if sup_norm(&et.f) < fnorm {
                        c = trial;
                        ev = et;
                        accepted = true;
                        break;
                    }
                }
            }
            t *= 0.5;
        }
        if !accepted {
            return Err(Error::NonConvergence {
                what: "coexistence Newton line search",
                iterations: it,
                residual: fnorm,
            });
        }
    }
    Err(Error::NonConvergence {
        what: "coexistence Newton",
        iterations: NEWTON_MAX_STEPS,
        residual: sup_norm(&ev.f),
    })
}

/// `‖F‖∞` of the trace system at given traces, for re-validating stored
/// branch points.
pub fn coexist_residual(model: &Model, eta: f64, xi: f64, trace_u: &[f64], trace_v: &[f64]) -> Result<f64> {
    let c: Vec<f64> = trace_u.iter().chain(trace_v).copied().collect();
    Ok(sup_norm(&evaluate(model, eta, xi, &c)?.f))
}

/// Pointwise comparison with the semi-trivial solutions: `u <= u_η` and,
/// when `v_ξ` exists, `v >= v_ξ`.
#[derive(Debug, Clone, PartialEq)]
pub struct OrderingReport {
    /// `max (u - u_η)`, should be `<= tolerance`.
    pub prey_excess: f64,
    /// `max (v_ξ - v)`, should be `<= tolerance`; `-inf` without `v_ξ`.
    pub predator_deficit: f64,
    pub tolerance: f64,
}

impl OrderingReport {
    pub fn ok(&self) -> bool {
        self.prey_excess <= self.tolerance && self.predator_deficit <= self.tolerance
    }
}

pub fn ordering_check(
    sol: &CoexistenceSolution,
    u_eta: &SemiTrivialSolution,
    v_xi: Option<&SemiTrivialSolution>,
) -> OrderingReport {
    let max_diff = |a: &AgeSpaceField, b: &AgeSpaceField| {
        a.data()
            .iter()
            .zip(b.data())
            .fold(f64::NEG_INFINITY, |m, (x, y)| m.max(x - y))
    };
    let prey_excess = max_diff(&sol.u, &u_eta.field);
    let predator_deficit = v_xi.map_or(f64::NEG_INFINITY, |v| max_diff(&v.field, &sol.v));
    let scale = u_eta.sup_norm().max(v_xi.map_or(0.0, |v| v.sup_norm()));
    OrderingReport {
        prey_excess,
        predator_deficit,
        tolerance: 1e-8 * (1.0 + scale),
    }
}

/// Necessary conditions for coexistence: `ξ >= 1/r(Ĥ[-β₂u_η])` and, for
/// `ξ > 1`, `η >= 1/r(H[α₂v_ξ])`.
#[derive(Debug, Clone, PartialEq)]
pub struct ConstraintReport {
    pub xi_min: f64,
    pub eta_min: Option<f64>,
    pub xi: f64,
    pub eta: f64,
}

impl ConstraintReport {
    pub fn ok(&self) -> bool {
        self.xi >= self.xi_min && self.eta_min.is_none_or(|e| self.eta >= e)
    }
}

pub fn parameter_constraints(
    model: &Model,
    eta: f64,
    xi: f64,
    u_eta: &SemiTrivialSolution,
    v_xi: Option<&SemiTrivialSolution>,
) -> Result<ConstraintReport> {
    let g = &model.grids;
    let h = PotentialField::from_field(&u_eta.field, -model.params.beta2);
    let xi_min = 1.0 / spectral_radius(g, &h, &model.predator)?.radius;
    let eta_min = match v_xi {
        Some(v) => {
            let h = PotentialField::from_field(&v.field, model.params.alpha2);
            Some(1.0 / spectral_radius(g, &h, &model.prey)?.radius)
        }
        None => None,
    };
    Ok(ConstraintReport {
        xi_min,
        eta_min,
        xi,
        eta,
    })
}

/// A priori bounds for coexistence states whose prey stays below `u_max`.
///
/// The predator obeys `∂ₐv - Δv <= v(m - β₁v)` with `m = β₂ u_max`, so
/// `v(a) <= f(a)` for the logistic
/// `f(a) = m f₀ / (β₁ f₀ (1 - e^{-ma}) + m e^{-ma})`, `f₀ = ‖v(0)‖∞`.
/// The birth law then forces `f₀ <= ξ ∫ b₂ f`, whose right side grows
/// sublinearly in `f₀`; `trace` is the largest admissible `f₀` and `sup`
/// the resulting bound on `‖v‖∞`.
#[derive(Debug, Clone, PartialEq)]
pub struct PredatorBound {
    pub m: f64,
    pub trace: f64,
    pub sup: f64,
}

pub fn logistic_envelope(m: f64, beta1: f64, f0: f64, a: f64) -> f64 {
    if m == 0.0 {
        return f0 / (1.0 + beta1 * f0 * a);
    }
    let e = (-m * a).exp();
    m * f0 / (beta1 * f0 * (1.0 - e) + m * e)
}

pub fn predator_bound(model: &Model, xi: f64, u_max: f64) -> PredatorBound {
    let beta1 = model.params.beta1;
    let m = model.params.beta2 * u_max;
    let ages = model.grids.age.ages();
    let q = model.predator.quadrature();
    let excess = |f0: f64| -> f64 {
        let total: f64 = q
            .iter()
            .zip(&ages)
            .map(|(q, a)| q * logistic_envelope(m, beta1, f0, *a))
            .sum();
        xi * total - f0
    };
    let unbounded = PredatorBound {
        m,
        trace: f64::INFINITY,
        sup: f64::INFINITY,
    };
    if xi * q[0] >= 1.0 {
        return unbounded;
    }
    let mut hi = (m / beta1).max(1.0);
    while excess(hi) > 0.0 {
        hi *= 2.0;
        if !hi.is_finite() {
            return unbounded;
        }
    }
    // slope of ξ ∫ b₂ f at f₀ = 0; at most 1 means only v = 0 is admissible
    let slope: f64 = xi * q.iter().zip(&ages).map(|(q, a)| q * (m * a).exp()).sum::<f64>();
    if slope <= 1.0 {
        hi = 0.0;
    }
    let mut lo = 0.0;
    while hi - lo > 1e-12 * hi {
        let mid = 0.5 * (lo + hi);
        if excess(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    PredatorBound {
        m,
        trace: hi,
        sup: hi.max(m / beta1),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::birthop::Species;
    use crate::model::ModelParams;
    use crate::steady::solve_species;

    #[test]
    fn classification_uses_relative_zero_threshold() {
        let s = ZeroScales {
            prey: 1.0,
            predator: 100.0,
        };
        assert_eq!(classify(&[0.5], &[0.5], s), StateClass::Coexistence);
        assert_eq!(classify(&[0.5], &[1e-7], s), StateClass::PreyOnly);
        assert_eq!(classify(&[1e-9], &[0.5], s), StateClass::PredatorOnly);
        assert_eq!(classify(&[0.0], &[0.0], s), StateClass::Trivial);
    }

    #[test]
    fn logistic_envelope_solves_its_ode() {
        let (m, beta1, f0) = (1.5, 2.0, 0.3);
        assert!((logistic_envelope(m, beta1, f0, 0.0) - f0).abs() < 1e-15);
        let h = 1e-5;
        for a in [0.1, 0.5, 2.0] {
            let f = logistic_envelope(m, beta1, f0, a);
            let df = (logistic_envelope(m, beta1, f0, a + h) - logistic_envelope(m, beta1, f0, a - h)) / (2.0 * h);
            assert!((df - (m * f - beta1 * f * f)).abs() < 1e-8);
        }
        assert!((logistic_envelope(m, beta1, f0, 50.0) - m / beta1).abs() < 1e-12);
        let decay = logistic_envelope(0.0, beta1, f0, 2.0);
        assert!((decay - f0 / (1.0 + beta1 * f0 * 2.0)).abs() < 1e-15);
    }

    #[test]
    fn predator_bound_regimes() {
        let model = Model::uniform(8, 32, ModelParams::default()).unwrap();
        let total: f64 = model.predator.quadrature().iter().sum();
        let none = predator_bound(&model, 0.5 / total, 0.0);
        assert_eq!(none.trace, 0.0);
        let q0 = model.predator.quadrature()[0];
        assert!(predator_bound(&model, 1.0 / q0, 1.0).trace.is_infinite());
        let lo = predator_bound(&model, 2.0, 0.5);
        let hi = predator_bound(&model, 2.0, 1.0);
        assert!(lo.trace > 0.0 && lo.trace.is_finite());
        assert!(hi.trace >= lo.trace && hi.sup >= hi.m / model.params.beta1);
    }

    #[test]
    fn prey_only_seed_converges_to_the_semitrivial_state() {
        let model = Model::uniform(16, 32, ModelParams::default()).unwrap();
        let u = solve_species(&model, Species::Prey, 1.5, None)
            .unwrap()
            .nontrivial()
            .unwrap();
        let zeros = vec![0.0; model.grids.n()];
        let out = solve_coexistence(&model, 1.5, 0.5, &u.trace, &zeros, ZeroScales::default()).unwrap();
        assert_eq!(out.class, StateClass::PreyOnly);
        let diff = out
            .state
            .trace_u
            .iter()
            .zip(&u.trace)
            .fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
        assert!(diff < 1e-8, "{diff}");
        assert!(coexist_residual(&model, 1.5, 0.5, &out.state.trace_u, &out.state.trace_v).unwrap() < 1e-9);
    }

    #[test]
    fn intensity_beyond_grid_resolution_is_rejected() {
        let model = Model::uniform(8, 16, ModelParams::default()).unwrap();
        let big = 1.5 * model.prey.intensity_limit();
        let seed = vec![1.0; 8];
        let err = solve_coexistence(&model, big, 1.2, &seed, &seed, ZeroScales::default()).unwrap_err();
        assert!(matches!(err, Error::BeyondResolution { .. }));
    }
}
