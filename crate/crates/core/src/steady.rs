//! Semi-trivial steady states: one species alone, `u(0) = η ∫ b u da` with
//! logistic age evolution.
//!
//! The unknown is the trace `c = u(0)`. Newton's method is applied to
//! `F(c) = c - η B[u(c)]`; its Jacobian `1 - η H[2αu]` comes from the exact
//! linearization of the discrete logistic map.

use nalgebra::{DMatrix, DVector};

pub use crate::birthop::Species;
use crate::birthop::{assemble_birth_matrix, resolve_birth, spectral_radius, BirthProfile};
use crate::error::{Error, Result};
use crate::evolve::{propagate_linear, propagate_logistic, AgeSpaceField, PotentialField};
use crate::linalg::{dot, min_value, sup_norm};
use crate::mesh::Grids;
pub use crate::model::{Model, ModelParams};

pub const NEWTON_MAX_STEPS: usize = 50;
pub const MAX_HALVINGS: usize = 8;
/// Newton stops when `‖F‖∞ <= NEWTON_TOL (1 + ‖c‖∞)`.
pub const NEWTON_TOL: f64 = 1e-10;
/// Traces below this sup-norm count as the trivial solution.
pub const TRIVIAL_THRESHOLD: f64 = 1e-10;
const MAX_DOUBLINGS: usize = 60;
/// Relative Newton correction below which a small-residual iterate is a root.
const STATIONARY_STEP: f64 = 1e-6;

#[derive(Debug, Clone)]
pub struct SemiTrivialSolution {
    pub species: Species,
    /// `η` for the prey, `ξ` for the predator.
    pub intensity: f64,
    /// `α₁` for the prey, `β₁` for the predator.
    pub self_limitation: f64,
    pub profile: BirthProfile,
    pub field: AgeSpaceField,
    pub trace: Vec<f64>,
    pub newton_residual: f64,
    /// `|intensity * r(H[self_limitation * field]) - 1|`.
    pub consistency: f64,
    pub iterations: usize,
}

impl SemiTrivialSolution {
    pub fn sup_norm(&self) -> f64 {
        self.field.sup_norm()
    }

    pub fn trace_sup(&self) -> f64 {
        sup_norm(&self.trace)
    }
}

#[derive(Debug, Clone)]
pub enum SemiTrivialOutcome {
    Trivial { iterations: usize },
    NonTrivial(SemiTrivialSolution),
}

impl SemiTrivialOutcome {
    pub fn is_trivial(&self) -> bool {
        matches!(self, SemiTrivialOutcome::Trivial { .. })
    }

    pub fn nontrivial(self) -> Option<SemiTrivialSolution> {
        match self {
            SemiTrivialOutcome::NonTrivial(s) => Some(s),
            SemiTrivialOutcome::Trivial { .. } => None,
        }
    }
}

/// Lower envelope of the trace at age 0:
/// `(λ₁/α)(η - 1) / (1 - e^{-λ₁ a_m})`.
pub fn trace_lower_bound(grids: &Grids, intensity: f64, alpha: f64) -> f64 {
    let l = grids.lambda1();
    l / alpha * (intensity - 1.0) / (1.0 - (-l * grids.age.a_max()).exp())
}

/// `max(lower envelope, λ₁/α) φ₁`.
pub fn default_seed(grids: &Grids, intensity: f64, alpha: f64) -> Vec<f64> {
    let amp = trace_lower_bound(grids, intensity, alpha).max(grids.lambda1() / alpha);
    grids.phi1().iter().map(|p| amp * p).collect()
}

struct Problem<'a> {
    grids: &'a Grids,
    intensity: f64,
    alpha: f64,
    profile: &'a BirthProfile,
}

impl Problem<'_> {
    fn residual(&self, c: &[f64]) -> Result<(Vec<f64>, AgeSpaceField)> {
        let u = propagate_logistic(self.grids, c, self.alpha)?;
        let b = self.profile.birth_integral(&u);
        let f = c.iter().zip(&b).map(|(c, b)| c - self.intensity * b).collect();
        Ok((f, u))
    }

    fn jacobian(&self, u: &AgeSpaceField) -> Result<DMatrix<f64>> {
        let h = PotentialField::from_field(u, 2.0 * self.alpha);
        let m = assemble_birth_matrix(self.grids, &h, self.profile)?;
        let n = m.nrows();
        Ok(DMatrix::identity(n, n) - m * self.intensity)
    }
}

/// Damped Newton from a single seed, without falling back to other seeds.
///
/// A seed lying below the positive solution (`⟨φ₁, F(c)⟩ < 0`) is first
/// doubled until it is not, so the iteration approaches from above.
pub fn newton_semitrivial(
    grids: &Grids,
    intensity: f64,
    alpha: f64,
    profile: &BirthProfile,
    seed: &[f64],
) -> Result<SemiTrivialOutcome> {
    if !(intensity > 0.0 && intensity.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "birth intensity must be positive, got {intensity}"
        )));
    }
    profile.check_intensity(intensity)?;
    if seed.len() != grids.n() || seed.iter().any(|v| *v < 0.0 || !v.is_finite()) {
        return Err(Error::InvalidArgument("seed must be a nonnegative trace".into()));
    }
    let pb = Problem {
        grids,
        intensity,
        alpha,
        profile,
    };
    let mut c = seed.to_vec();
    let (mut f, mut u) = pb.residual(&c)?;
    for _ in 0..MAX_DOUBLINGS {
        if sup_norm(&c) < TRIVIAL_THRESHOLD || dot(grids.phi1(), &f) >= 0.0 {
            break;
        }
        c.iter_mut().for_each(|v| *v *= 2.0);
        (f, u) = pb.residual(&c)?;
    }
    for it in 0..=NEWTON_MAX_STEPS {
        let cn = sup_norm(&c);
        if cn < TRIVIAL_THRESHOLD {
            return Ok(SemiTrivialOutcome::Trivial { iterations: it });
        }
        let fnorm = sup_norm(&f);
        let j = pb.jacobian(&u)?;
        let rhs = DVector::from_iterator(f.len(), f.iter().map(|v| -v));
        let delta = j.lu().solve(&rhs).ok_or(Error::Singular("semi-trivial Newton"))?;
        // a small residual alone is not enough near a degenerate trivial root,
        // where F is quadratic and Newton only halves the iterate
        if fnorm <= NEWTON_TOL * (1.0 + cn) && delta.amax() <= STATIONARY_STEP * cn {
            let polished: Vec<f64> = c.iter().zip(delta.iter()).map(|(c, d)| (c + d).max(0.0)).collect();
            let (fp, up) = pb.residual(&polished)?;
            let (c, u, fnorm) = if sup_norm(&fp) < fnorm {
                (polished, up, sup_norm(&fp))
            } else {
                (c, u, fnorm)
            };
            let pot = PotentialField::from_field(&u, alpha);
            let r = spectral_radius(grids, &pot, profile)?.radius;
            return Ok(SemiTrivialOutcome::NonTrivial(SemiTrivialSolution {
                species: profile.species(),
                intensity,
                self_limitation: alpha,
                profile: profile.clone(),
                field: u,
                trace: c,
                newton_residual: fnorm,
                consistency: (intensity * r - 1.0).abs(),
                iterations: it,
            }));
        }
        if it == NEWTON_MAX_STEPS {
            break;
        }
        let mut t = 1.0;
        let mut accepted = false;
        for _ in 0..=MAX_HALVINGS {
            let mut trial: Vec<f64> = c.iter().zip(delta.iter()).map(|(c, d)| c + t * d).collect();
            if min_value(&trial) >= -1e-12 * cn {
                trial.iter_mut().for_each(|v| *v = v.max(0.0));
                if let Ok((ft, ut)) = pb.residual(&trial) {
                    let from_above = min_value(&ft) >= 0.0 && trial.iter().zip(&c).all(|(a, b)| a <= b);
                    if sup_norm(&ft) < fnorm || from_above {
                        c = trial;
                        f = ft;
                        u = ut;
                        accepted = true;
                        break;
                    }
                }
            }
            t *= 0.5;
        }
        if !accepted {
            return Err(Error::NonConvergence {
                what: "semi-trivial Newton line search",
                iterations: it,
                residual: fnorm,
            });
        }
    }
    Err(Error::NonConvergence {
        what: "semi-trivial Newton",
        iterations: NEWTON_MAX_STEPS,
        residual: sup_norm(&f),
    })
}

/// Nonnegative steady state of one species. Tries `seed` and then the
/// default seed; reports the trivial solution only if every attempt
/// collapses.
pub fn solve_semitrivial(
    grids: &Grids,
    intensity: f64,
    alpha: f64,
    profile: &BirthProfile,
    seed: Option<&[f64]>,
) -> Result<SemiTrivialOutcome> {
    let fallback = default_seed(grids, intensity, alpha);
    let first = newton_semitrivial(grids, intensity, alpha, profile, seed.unwrap_or(&fallback));
    match (seed, first) {
        (None, r) => r,
        (Some(_), Ok(SemiTrivialOutcome::NonTrivial(s))) => Ok(SemiTrivialOutcome::NonTrivial(s)),
        (Some(_), first) => match newton_semitrivial(grids, intensity, alpha, profile, &fallback) {
            Ok(SemiTrivialOutcome::Trivial { .. }) if first.is_ok() => first,
            other => other,
        },
    }
}

/// `u_η` (prey, intensity `η`) or `v_ξ` (predator, intensity `ξ`) of a model.
pub fn solve_species(
    model: &Model,
    species: Species,
    intensity: f64,
    seed: Option<&[f64]>,
) -> Result<SemiTrivialOutcome> {
    solve_semitrivial(
        &model.grids,
        intensity,
        model.self_limitation(species),
        model.profile(species),
        seed,
    )
}

/// Derivative of the solution in its intensity:
/// `z(0) = (1 - η H[2αu])^{-1} B[u]`, `z = Π[2αu] z(0)`.
pub fn derivative_wrt_param(grids: &Grids, sol: &SemiTrivialSolution) -> Result<AgeSpaceField> {
    let h = PotentialField::from_field(&sol.field, 2.0 * sol.self_limitation);
    let birth = sol.profile.birth_integral(&sol.field);
    let z0 = resolve_birth(grids, sol.intensity, &h, &sol.profile, &birth)?;
    propagate_linear(grids, &h, &z0)
}

/// Outcome of comparing a semi-trivial solution with its explicit envelopes.
#[derive(Debug, Clone, PartialEq)]
pub struct EnvelopeReport {
    /// `min u / lower envelope` over nodes where the envelope is positive.
    pub lower_ratio: f64,
    /// `max_k ‖u(a_k)‖∞ / ψ_k`, with `ψ` the discrete decay envelope.
    pub upper_ratio: f64,
    /// `‖u(0)‖∞` over `(η ‖b‖∞ / α) log(α a_m ‖u(0)‖∞ + 1)`.
    pub trace_ratio: f64,
    pub tolerance: f64,
}

impl EnvelopeReport {
    pub fn lower_ok(&self) -> bool {
        self.lower_ratio >= 1.0 - self.tolerance
    }

    pub fn upper_ok(&self) -> bool {
        self.upper_ratio <= 1.0 + self.tolerance
    }

    pub fn trace_ok(&self) -> bool {
        self.trace_ratio <= 1.0 + self.tolerance
    }

    pub fn all_ok(&self) -> bool {
        self.lower_ok() && self.upper_ok() && self.trace_ok()
    }
}

/// Backward-Euler solution of `ψ' = -α ψ²` from `ψ₀` on the age grid. It
/// dominates the sup-norm of the discrete logistic evolution started below
/// `ψ₀` and tends to `1/(α a + 1/ψ₀)` as `da -> 0`.
pub fn decay_envelope(grids: &Grids, alpha: f64, psi0: f64) -> Vec<f64> {
    let q = grids.da() * alpha;
    let mut out = Vec::with_capacity(grids.rows());
    let mut psi = psi0;
    out.push(psi);
    for _ in 0..grids.age.steps() {
        psi = 2.0 * psi / (1.0 + (1.0 + 4.0 * q * psi).sqrt());
        out.push(psi);
    }
    out
}

/// Largest `ψ₀` with `ψ₀ <= η Σ_k q_k ψ_k(ψ₀)`, where `ψ(ψ₀)` is the
/// [`decay_envelope`]. Since `‖u(a_k)‖∞ <= ψ_k(‖u(0)‖∞)`, the birth law
/// forces `‖u(0)‖∞` below this value. Because `ψ_1` only grows like
/// `√ψ₀`, the bound is `O(η²)`. Infinite once `η q_0 >= 1`.
pub fn discrete_trace_bound(grids: &Grids, intensity: f64, alpha: f64, profile: &BirthProfile) -> f64 {
    let q = profile.quadrature();
    if intensity * q[0] >= 1.0 {
        return f64::INFINITY;
    }
    let excess = |psi0: f64| -> f64 {
        let psi = decay_envelope(grids, alpha, psi0);
        intensity * q.iter().zip(&psi).map(|(q, p)| q * p).sum::<f64>() - psi0
    };
    let mut hi = 1.0;
    while excess(hi) > 0.0 {
        hi *= 2.0;
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
    hi
}

/// Checks the lower envelope
/// `u(a) >= (λ₁/α)(η-1) / (η(e^{λ₁a} - 1) + 1 - e^{-λ₁(a_m - a)}) φ₁`,
/// the decay bound `‖u(a)‖∞ <= ψ(a)` (see [`decay_envelope`]) and the trace
/// inequality `‖u(0)‖∞ <= (η‖b‖∞/α) log(α a_m ‖u(0)‖∞ + 1)`, each with
/// relative slack `tolerance`.
pub fn verify_envelopes(grids: &Grids, sol: &SemiTrivialSolution, tolerance: f64) -> EnvelopeReport {
    let l = grids.lambda1();
    let eta = sol.intensity;
    let alpha = sol.self_limitation;
    let am = grids.age.a_max();
    let phi1 = grids.phi1();
    let mut lower_ratio = f64::INFINITY;
    if eta > 1.0 {
        for k in 0..grids.rows() {
            let a = grids.age.age(k);
            let amp = l / alpha * (eta - 1.0) / (eta * ((l * a).exp() - 1.0) + 1.0 - (-l * (am - a)).exp());
            for (u, p) in sol.field.row(k).iter().zip(phi1) {
                lower_ratio = lower_ratio.min(u / (amp * p));
            }
        }
    }
    let u0 = sup_norm(sol.field.row(0));
    let upper_ratio = decay_envelope(grids, alpha, u0)
        .iter()
        .enumerate()
        .map(|(k, psi)| sup_norm(sol.field.row(k)) / psi)
        .fold(0.0, f64::max);
    let trace_bound = eta * sol.profile.sup_norm() / alpha * (alpha * am * u0 + 1.0).ln();
    EnvelopeReport {
        lower_ratio,
        upper_ratio,
        trace_ratio: u0 / trace_bound,
        tolerance,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn model() -> Model {
        Model::uniform(16, 32, ModelParams::default()).unwrap()
    }

    #[test]
    fn subcritical_intensity_is_trivial() {
        let m = model();
        for eta in [0.5, 0.9, 1.0] {
            let out = solve_species(&m, Species::Prey, eta, None).unwrap();
            assert!(out.is_trivial(), "eta = {eta}");
        }
    }

    #[test]
    fn supercritical_solution_satisfies_spectral_identity() {
        let m = model();
        let s = solve_species(&m, Species::Prey, 2.0, None)
            .unwrap()
            .nontrivial()
            .unwrap();
        assert!(s.consistency <= 1e-8, "{}", s.consistency);
        assert!(s.field.min() >= 0.0);
        let env = verify_envelopes(&m.grids, &s, 0.05);
        assert!(env.all_ok(), "{env:?}");
    }

    #[test]
    fn decay_envelope_approaches_closed_form() {
        let g = Grids::new(8, 1.0, 1.0, 4096).unwrap();
        let psi = decay_envelope(&g, 2.0, 5.0);
        for (k, p) in psi.iter().enumerate() {
            let exact = 1.0 / (2.0 * g.age.age(k) + 0.2);
            assert!(*p >= exact && (p - exact) <= 1e-2 * exact);
        }
    }

    #[test]
    fn small_seed_is_lifted_to_the_positive_solution() {
        let m = model();
        let tiny: Vec<f64> = m.grids.phi1().iter().map(|p| 1e-6 * p).collect();
        let a = newton_semitrivial(&m.grids, 1.5, 1.0, &m.prey, &tiny)
            .unwrap()
            .nontrivial()
            .unwrap();
        let b = solve_species(&m, Species::Prey, 1.5, None)
            .unwrap()
            .nontrivial()
            .unwrap();
        for (x, y) in a.trace.iter().zip(&b.trace) {
            assert!((x - y).abs() < 1e-8 * (1.0 + y.abs()));
        }
    }
}
