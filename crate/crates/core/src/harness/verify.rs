//! The verification suite: the invariants of every module as runnable
//! checks at the configured discretization.

use std::f64::consts::PI;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::bifurcate::{
    continue_branch, eta0, eta1, kernel_basis, xi0, xi1, Branch, BranchKind, ContinuationSettings, Located, Termination,
};
use crate::birthop::{spectral_radius, strictly_positive, BirthOperator, Species};
use crate::coexist::{
    coexist_residual, ordering_check, parameter_constraints, predator_bound, solve_coexistence, CoexistenceSolution,
    StateClass, ZeroScales,
};
use crate::error::Result;
use crate::evolve::{
    propagate_coupled, propagate_linear, propagate_logistic, propagate_logistic_forced, AgeSpaceField, PotentialField,
};
use crate::linalg::{dot, min_value, sup_norm};
use crate::mesh::Grids;
use crate::model::Model;
use crate::spatial::{assemble_laplacian, principal_eigenpair, SpatialGrid};
use crate::steady::{
    derivative_wrt_param, discrete_trace_bound, newton_semitrivial, solve_species, verify_envelopes, EnvelopeReport,
    SemiTrivialSolution,
};

use super::config::{ScenarioConfig, Tolerances};
use super::report::{CheckRecord, RunReport};
use super::HarnessError;

pub const SUBCRITICAL: [f64; 3] = [0.5, 0.9, 1.0];
pub const SUPERCRITICAL: [f64; 3] = [1.2, 2.0, 5.0];
pub const POINT_SWEEP: [f64; 4] = [1.2, 1.5, 2.0, 3.0];
pub const GROWTH_SWEEP: [f64; 4] = [2.0, 4.0, 8.0, 16.0];
pub const DERIVATIVE_AT: [f64; 2] = [1.5, 3.0];
pub const FD_STEP: f64 = 1e-4;
pub const B3_ETA: f64 = 1.3;
pub const S3_XI: f64 = 2.0;
pub const S3_LIMIT: f64 = 6.0;
pub const KERNEL_ETAS: [f64; 2] = [1.3, 2.0];
pub const KERNEL_XI: f64 = 0.9;
/// Random seeds per Newton-seeding check.
pub const SEED_TRIALS: usize = 10;

/// Settings of the reference `B3` run.
pub fn b3_settings(xi_max: f64) -> ContinuationSettings {
    ContinuationSettings {
        step0: 0.01,
        min_step: 1e-4,
        max_step: 0.05,
        param_limit: xi_max,
        point_cap: 500,
    }
}

/// Settings of the reference `S3` run up to `limit`.
pub fn s3_settings(limit: f64) -> ContinuationSettings {
    ContinuationSettings {
        step0: 0.01,
        min_step: 1e-4,
        max_step: 0.5,
        param_limit: limit,
        point_cap: 500,
    }
}

/// Widening of discretization-limited tolerances: 1 at `n >= 64`,
/// `M >= 128` and growing like the coarser of `64/n`, `128/M` below that.
/// Tolerances fixed by solver precision (normalization, residuals,
/// spectral identity) never widen.
pub fn discretization_slack(n: usize, steps: usize) -> f64 {
    (64.0 / n as f64).max(128.0 / steps as f64).max(1.0)
}

/// Fraction of the age-grid intensity limit `1/q_0` up to which sweeps
/// sample. Beyond `1/q_0` only the trivial state exists; close to it the
/// traces blow up like `(1 - η q_0)^{-2}`.
pub const RESOLUTION_FRACTION: f64 = 0.75;

/// Largest intensity the suite samples on this model's age grid.
pub fn intensity_cap(model: &Model) -> f64 {
    RESOLUTION_FRACTION * model.prey.intensity_limit().min(model.predator.intensity_limit())
}

struct Ctx<'a> {
    model: &'a Model,
    tol: &'a Tolerances,
    slack: f64,
    trials: usize,
    xi_max: f64,
    eta_max: f64,
    cap: f64,
    s3_limit: f64,
}

impl Ctx<'_> {
    fn within(&self, values: &[f64]) -> Vec<f64> {
        values.iter().copied().filter(|v| *v <= self.cap).collect()
    }

    /// Notes the sampled values dropped by the intensity cap.
    fn capped(&self, m: Measure, values: &[f64]) -> Measure {
        let dropped: Vec<String> = values
            .iter()
            .filter(|v| **v > self.cap)
            .map(|v| v.to_string())
            .collect();
        if dropped.is_empty() {
            m
        } else {
            m.detail(format!(
                "skipped {} beyond intensity cap {:.4}",
                dropped.join(","),
                self.cap
            ))
        }
    }
}

struct Measure {
    pass: bool,
    measured: f64,
    tolerance: f64,
    detail: String,
}

impl Measure {
    fn at_most(measured: f64, tolerance: f64) -> Self {
        Self::new(measured <= tolerance, measured, tolerance)
    }

    fn new(pass: bool, measured: f64, tolerance: f64) -> Self {
        Measure {
            pass,
            measured,
            tolerance,
            detail: String::new(),
        }
    }

    fn detail(mut self, d: impl Into<String>) -> Self {
        let d = d.into();
        if !d.is_empty() {
            if !self.detail.is_empty() {
                self.detail.push_str("; ");
            }
            self.detail.push_str(&d);
        }
        self
    }
}

fn check(name: &str, claim: &str, f: impl FnOnce() -> Result<Measure>) -> CheckRecord {
    match f() {
        Ok(m) => CheckRecord::new(name, claim, m.pass, m.measured, m.tolerance).with_detail(m.detail),
        Err(e) => CheckRecord::errored(name, claim, e),
    }
}

fn random_field(g: &Grids, rng: &mut ChaCha8Rng, lo: f64, hi: f64) -> AgeSpaceField {
    let mut f = AgeSpaceField::for_grids(g);
    for k in 0..g.rows() {
        for v in f.row_mut(k) {
            *v = rng.gen_range(lo..hi);
        }
    }
    f
}

fn random_vec(n: usize, rng: &mut ChaCha8Rng, lo: f64, hi: f64) -> Vec<f64> {
    (0..n).map(|_| rng.gen_range(lo..hi)).collect()
}

fn nontrivial(model: &Model, species: Species, intensity: f64, seed: Option<&[f64]>) -> Result<SemiTrivialSolution> {
    solve_species(model, species, intensity, seed)?
        .nontrivial()
        .ok_or_else(|| {
            crate::error::Error::InvalidArgument(format!("{species} state at intensity {intensity} is trivial"))
        })
}

fn spatial_checks(cx: &Ctx, _rng: &mut ChaCha8Rng) -> Vec<CheckRecord> {
    let g = &cx.model.grids;
    vec![
        check(
            "eigen_closed_form",
            "discrete principal eigenvalue equals (2/h^2)(1 - cos(pi h/L))",
            || {
                let cf = g.laplacian.closed_form_eigenvalue(1);
                Ok(Measure::at_most(((g.lambda1() - cf) / cf).abs(), 1e-12))
            },
        ),
        check(
            "eigen_vector_shape",
            "sup-normalized principal eigenvector equals sin(pi x/L) at the nodes",
            || {
                let l = g.space.length();
                let sines: Vec<f64> = g.space.nodes().iter().map(|x| (PI * x / l).sin()).collect();
                let top = sup_norm(&sines);
                let err = sines
                    .iter()
                    .zip(g.phi1())
                    .map(|(s, p)| (p - s / top).abs())
                    .fold(0.0, f64::max);
                Ok(Measure::at_most(err, 1e-10))
            },
        ),
        check(
            "eigen_refinement",
            "principal eigenvalue approaches (pi/L)^2 monotonically with error pi^4 h^2/(12 L^4) to leading order",
            || {
                let l = g.space.length();
                let k2 = (PI / l).powi(2);
                let mut n = g.n();
                let mut prev = 0.0;
                let mut monotone = true;
                let mut worst: f64 = 0.0;
                for _ in 0..3 {
                    let grid = SpatialGrid::new(n, l)?;
                    let lam = principal_eigenpair(&assemble_laplacian(&grid))?.lambda1;
                    let h = grid.spacing();
                    let lead = k2 * k2 * h * h / 12.0;
                    worst = worst.max((1.0 - (k2 - lam) / lead).abs());
                    monotone &= lam > prev && lam < k2;
                    prev = lam;
                    n = 2 * n + 1;
                }
                let m = Measure::new(monotone && worst <= 1e-2, worst, 1e-2);
                Ok(if monotone {
                    m
                } else {
                    m.detail("not monotone under refinement")
                })
            },
        ),
        check(
            "eigen_continuum_n99",
            "|lambda1 - pi^2| <= 0.01 on the unit interval with 99 interior nodes",
            || {
                let grid = SpatialGrid::new(99, 1.0)?;
                let lam = principal_eigenpair(&assemble_laplacian(&grid))?.lambda1;
                Ok(Measure::at_most((lam - PI * PI).abs(), 0.01))
            },
        ),
    ]
}

fn evolve_checks(cx: &Ctx, rng: &mut ChaCha8Rng) -> Vec<CheckRecord> {
    let g = &cx.model.grids;
    let da = g.da();
    let n = g.n();
    let alpha = cx.model.params.alpha1;
    vec![
        check(
            "propagation_positivity",
            "nonnegative data stay nonnegative when da * max(0, -min h) <= 1/2",
            || {
                let mut worst: f64 = 0.0;
                for _ in 0..cx.trials {
                    let h = PotentialField::from_field(&random_field(g, rng, -0.45 / da, 5.0), 1.0);
                    let phi0: Vec<f64> = random_vec(n, rng, -0.5, 1.0).iter().map(|v| v.max(0.0)).collect();
                    let w = propagate_linear(g, &h, &phi0)?;
                    worst = worst.max(-w.min() / w.sup_norm().max(f64::MIN_POSITIVE));
                }
                Ok(Measure::at_most(worst, 0.0))
            },
        ),
        check(
            "eigenmode_exactness",
            "a constant potential scales the principal mode by (1 + da(lambda1 + c))^-1 per step",
            || {
                let c = 0.7;
                let w = propagate_linear(g, &PotentialField::constant(g, c), g.phi1())?;
                let ratio = 1.0 / (1.0 + da * (g.lambda1() + c));
                let mut p = 1.0;
                let mut worst: f64 = 0.0;
                for k in 0..g.rows() {
                    for (x, phi) in w.row(k).iter().zip(g.phi1()) {
                        worst = worst.max((x - p * phi).abs() / p);
                    }
                    p *= ratio;
                }
                Ok(Measure::at_most(worst, 1e-12))
            },
        ),
        check(
            "comparison_principle",
            "a nonnegative source makes the logistic evolution larger at every node",
            || {
                let mut worst: f64 = 0.0;
                for _ in 0..cx.trials.min(SEED_TRIALS) {
                    let phi0 = random_vec(n, rng, 0.0, 5.0);
                    let f = random_field(g, rng, 0.0, 5.0);
                    let plain = propagate_logistic(g, &phi0, alpha)?;
                    let forced = propagate_logistic_forced(g, &phi0, alpha, &f)?;
                    let scale = forced.sup_norm().max(f64::MIN_POSITIVE);
                    let excess = plain
                        .data()
                        .iter()
                        .zip(forced.data())
                        .map(|(p, q)| p - q)
                        .fold(f64::NEG_INFINITY, f64::max);
                    worst = worst.max(excess / scale);
                }
                Ok(Measure::at_most(worst, 1e-12))
            },
        ),
        check(
            "initial_data_order",
            "ordered initial data give ordered linear evolutions at every age",
            || {
                let mut worst: f64 = 0.0;
                for _ in 0..cx.trials.min(SEED_TRIALS) {
                    let h = PotentialField::from_field(&random_field(g, rng, -0.45 / da, 5.0), 1.0);
                    let low = random_vec(n, rng, 0.0, 1.0);
                    let high: Vec<f64> = low.iter().map(|v| v + rng.gen_range(0.0..0.5)).collect();
                    let wl = propagate_linear(g, &h, &low)?;
                    let wh = propagate_linear(g, &h, &high)?;
                    let excess = wl
                        .data()
                        .iter()
                        .zip(wh.data())
                        .map(|(l, h)| l - h)
                        .fold(f64::NEG_INFINITY, f64::max);
                    worst = worst.max(excess / wh.sup_norm());
                }
                Ok(Measure::at_most(worst, 1e-13))
            },
        ),
        check(
            "age_first_order",
            "the principal-mode coefficient converges at first order in the age step",
            || {
                let c = 1.0;
                let am = g.age.a_max();
                let exact = (-g.lambda1() * am - c * (am + 0.5 * am * am)).exp();
                let mut errors = Vec::new();
                for steps in [g.age.steps(), 2 * g.age.steps()] {
                    let gr = Grids::new(n, g.space.length(), am, steps)?;
                    let h = PotentialField::from_fn(&gr, |a, _| c * (1.0 + a));
                    let w = propagate_linear(&gr, &h, gr.phi1())?;
                    let coef = dot(w.row(gr.age.steps()), gr.phi1()) / dot(gr.phi1(), gr.phi1());
                    errors.push((coef - exact).abs());
                }
                let order = (errors[0] / errors[1]).log2();
                let tol = 0.2 * cx.slack;
                Ok(Measure::at_most((order - 1.0).abs(), tol).detail(format!("observed order {order:.4}")))
            },
        ),
    ]
}

fn birth_checks(cx: &Ctx, rng: &mut ChaCha8Rng) -> Vec<CheckRecord> {
    let m = cx.model;
    let g = &m.grids;
    let zero = PotentialField::zero(g);
    let mut out = Vec::new();
    for (name, profile) in [("prey_normalization", &m.prey), ("predator_normalization", &m.predator)] {
        out.push(check(
            name,
            "normalized profile gives a zero-potential birth operator with spectral radius 1",
            || {
                let r = spectral_radius(g, &zero, profile)?.radius;
                Ok(Measure::at_most((r - 1.0).abs(), 1e-8))
            },
        ));
    }
    out.push(check(
        "scalar_reduction",
        "for constant potentials the spectral radius equals the principal-mode scalar sum",
        || {
            let mut worst: f64 = 0.0;
            for c in [0.5, 1.0, 5.0] {
                let h = PotentialField::constant(g, c);
                for p in [&m.prey, &m.predator] {
                    let r = spectral_radius(g, &h, p)?.radius;
                    worst = worst.max((r - p.scalar_reduction(g, c)).abs());
                }
            }
            Ok(Measure::at_most(worst, 1e-10))
        },
    ));
    out.push(check(
        "spectral_monotonicity",
        "a larger potential gives a strictly smaller spectral radius",
        || {
            let mut worst = f64::NEG_INFINITY;
            for _ in 0..cx.trials {
                let base = random_field(g, rng, 0.0, 3.0);
                let mut bigger = base.clone();
                let k0 = rng.gen_range(1..g.rows());
                let k1 = rng.gen_range(k0..g.rows());
                let j0 = rng.gen_range(0..g.n());
                let j1 = rng.gen_range(j0..g.n());
                for k in k0..=k1 {
                    for v in &mut bigger.row_mut(k)[j0..=j1] {
                        *v += rng.gen_range(0.1..1.0);
                    }
                }
                let rh = spectral_radius(g, &PotentialField::from_field(&base, 1.0), &m.prey)?.radius;
                let rg = spectral_radius(g, &PotentialField::from_field(&bigger, 1.0), &m.prey)?.radius;
                worst = worst.max((rg - rh) / rh);
            }
            Ok(Measure::new(worst < 0.0, worst, 0.0).detail(format!("{} ordered pairs", cx.trials)))
        },
    ));
    out.push(check(
        "spectral_continuity",
        "difference quotients of the spectral radius stay bounded as the perturbation shrinks",
        || {
            let h = random_field(g, rng, 0.0, 3.0);
            let d = random_field(g, rng, 0.0, 1.0);
            let r0 = spectral_radius(g, &PotentialField::from_field(&h, 1.0), &m.prey)?.radius;
            let mut quotients = Vec::new();
            for eps in [1e-1, 1e-2, 1e-3, 1e-4] {
                let p = PotentialField::combination(&[(1.0, &h), (eps, &d)]);
                let r = spectral_radius(g, &p, &m.prey)?.radius;
                quotients.push((r - r0).abs() / eps);
            }
            let worst = quotients.iter().fold(0.0, |a: f64, q| a.max(q / quotients[0]));
            Ok(Measure::at_most(worst, 2.0))
        },
    ));
    out.push(check(
        "krein_rutman_eigvec",
        "power iteration converges with small eigen-residual and a strictly positive eigenvector",
        || {
            let h = PotentialField::from_field(&random_field(g, rng, 0.0, 3.0), 1.0);
            let kr = spectral_radius(g, &h, &m.prey)?;
            let pass = kr.converged && kr.residual <= 1e-10 && strictly_positive(&kr.eigvec);
            Ok(Measure::new(pass, kr.residual, 1e-10))
        },
    ));
    out.push(check(
        "resolvent_positivity",
        "(1 - eta H)^-1 maps nonnegative data to nonnegative solutions when eta r < 1",
        || {
            let mut worst_neg: f64 = 0.0;
            let mut worst_res: f64 = 0.0;
            for i in 0..cx.trials.min(SEED_TRIALS) {
                let field = random_field(g, rng, 0.0, 3.0);
                let h = PotentialField::from_field(&field, 1.0);
                let op = BirthOperator::new(g, &h, &m.prey)?;
                let r = op.spectral_radius()?.radius;
                let eta = if i % 2 == 0 { 0.9 } else { 0.999 } / r;
                let rhs: Vec<f64> = random_vec(g.n(), rng, -0.5, 1.0).iter().map(|v| v.max(0.0)).collect();
                let x = op.resolve(eta, &rhs)?;
                let hx = op.apply(&x)?;
                let res = x
                    .iter()
                    .zip(&hx)
                    .zip(&rhs)
                    .map(|((x, h), b)| (x - eta * h - b).abs())
                    .fold(0.0, f64::max);
                worst_res = worst_res.max(res / sup_norm(&x));
                worst_neg = worst_neg.max(-min_value(&x) / sup_norm(&x));
            }
            let pass = worst_neg <= 0.0 && worst_res <= 1e-10;
            Ok(Measure::new(pass, worst_neg, 0.0).detail(format!("relative residual {worst_res:.2e}")))
        },
    ));
    out
}

fn steady_checks(cx: &Ctx, rng: &mut ChaCha8Rng) -> Vec<CheckRecord> {
    let m = cx.model;
    let g = &m.grids;
    let n = g.n();
    let mut out = Vec::new();
    let collapse = |species: Species, intensities: &[f64], rng: &mut ChaCha8Rng| -> Result<Measure> {
        let (alpha, profile) = (m.self_limitation(species), m.profile(species));
        let mut bad = 0usize;
        let mut notes = Vec::new();
        for &eta in intensities {
            for _ in 0..SEED_TRIALS {
                let amp = 10f64.powf(rng.gen_range(-2.0..1.0));
                let seed = random_vec(n, rng, 0.0, amp);
                match newton_semitrivial(g, eta, alpha, profile, &seed) {
                    Ok(o) if o.is_trivial() => {}
                    Ok(_) => {
                        bad += 1;
                        notes.push(format!("nontrivial at {eta}"));
                    }
                    Err(e) => {
                        bad += 1;
                        notes.push(format!("{e} at {eta}"));
                    }
                }
            }
        }
        notes.dedup();
        Ok(Measure::at_most(bad as f64, 0.0).detail(notes.join("; ")))
    };
    out.push(check(
        "prey_trivial_subcritical",
        "for intensity <= 1 every positive seed collapses to the trivial prey state",
        || collapse(Species::Prey, &SUBCRITICAL, rng),
    ));
    out.push(check(
        "predator_trivial_subcritical",
        "at intensity 0.9 every positive seed collapses to the trivial predator state",
        || collapse(Species::Predator, &[0.9], rng),
    ));
    let states = |species: Species| -> Result<Vec<SemiTrivialSolution>> {
        cx.within(&SUPERCRITICAL)
            .iter()
            .map(|e| nontrivial(m, species, *e, None))
            .collect()
    };
    let prey = states(Species::Prey);
    for species in [Species::Prey, Species::Predator] {
        out.push(check(
            &format!("spectral_identity_{species}"),
            "a positive semi-trivial state satisfies intensity * r(H[self-limitation * state]) = 1",
            || {
                let sols = match species {
                    Species::Prey => prey.clone()?,
                    Species::Predator => states(species)?,
                };
                let mut worst: f64 = 0.0;
                for s in &sols {
                    let h = PotentialField::from_field(&s.field, s.self_limitation);
                    let r = spectral_radius(g, &h, m.profile(species))?.radius;
                    worst = worst.max((s.intensity * r - 1.0).abs());
                }
                Ok(cx.capped(Measure::at_most(worst, cx.tol.spectral_identity), &SUPERCRITICAL))
            },
        ));
    }
    let env_tol = cx.tol.envelope * cx.slack;
    let envelope_checks: [(&str, &str, fn(&EnvelopeReport) -> f64); 3] = [
        (
            "envelope_lower",
            "the prey state dominates its explicit lower envelope",
            |r| 1.0 - r.lower_ratio,
        ),
        (
            "envelope_upper",
            "the prey sup-norm stays below the logistic decay envelope",
            |r| r.upper_ratio - 1.0,
        ),
        (
            "envelope_trace",
            "the prey trace satisfies the logarithmic trace inequality",
            |r| r.trace_ratio - 1.0,
        ),
    ];
    for (name, claim, pick) in envelope_checks {
        out.push(check(name, claim, || {
            let worst = prey
                .clone()?
                .iter()
                .map(|s| pick(&verify_envelopes(g, s, env_tol)))
                .fold(f64::NEG_INFINITY, f64::max);
            Ok(cx.capped(Measure::at_most(worst, env_tol), &SUPERCRITICAL))
        }));
    }
    out.push(check(
        "semitrivial_uniqueness",
        "Newton from random positive seeds reaches the same prey trace",
        || {
            let eta = 2.0;
            let reference = nontrivial(m, Species::Prey, eta, None)?;
            let scale = 1.0 + reference.trace_sup();
            let mut worst: f64 = 0.0;
            for _ in 0..SEED_TRIALS {
                let amp = 10f64.powf(rng.gen_range(-3.0..2.0));
                let seed = random_vec(n, rng, 0.0, amp);
                let s = newton_semitrivial(g, eta, m.params.alpha1, &m.prey, &seed)?
                    .nontrivial()
                    .ok_or(crate::error::Error::InvalidArgument("seed collapsed".into()))?;
                let d = s
                    .trace
                    .iter()
                    .zip(&reference.trace)
                    .map(|(a, b)| (a - b).abs())
                    .fold(0.0, f64::max);
                worst = worst.max(d / scale);
            }
            Ok(Measure::at_most(worst, 1e-8))
        },
    ));
    out.push(check(
        "monotone_in_intensity",
        "the prey state increases pointwise with its birth intensity",
        || {
            let sweep = [1.2, 1.5, 2.0, 3.0, 5.0];
            let etas = cx.within(&sweep);
            let states: Result<Vec<_>> = etas.iter().map(|e| nontrivial(m, Species::Prey, *e, None)).collect();
            let states = states?;
            let mut worst = f64::NEG_INFINITY;
            for w in states.windows(2) {
                let excess = w[0]
                    .field
                    .data()
                    .iter()
                    .zip(w[1].field.data())
                    .map(|(a, b)| a - b)
                    .fold(f64::NEG_INFINITY, f64::max);
                worst = worst.max(excess / (1.0 + w[1].sup_norm()));
            }
            Ok(cx.capped(Measure::at_most(worst, 1e-10), &sweep))
        },
    ));
    out.push(check(
        "unbounded_growth",
        "the prey trace grows strictly with intensity and stays below its quadratic-growth trace bound",
        || {
            let mut traces = Vec::new();
            let mut worst: f64 = 0.0;
            let etas = cx.within(&GROWTH_SWEEP);
            for &eta in &etas {
                let t = nontrivial(m, Species::Prey, eta, None)?.trace_sup();
                worst = worst.max(t / discrete_trace_bound(g, eta, m.params.alpha1, &m.prey));
                traces.push(t);
            }
            let increasing = traces.windows(2).all(|w| w[1] > w[0]);
            let detail = traces
                .iter()
                .zip(&etas)
                .map(|(t, e)| format!("{:.3e}", t / (e * e)))
                .collect::<Vec<_>>();
            let m = Measure::new(increasing && worst <= 1.0, worst, 1.0)
                .detail(format!("trace/eta^2 {}", detail.join(" ")));
            Ok(cx.capped(m, &GROWTH_SWEEP))
        },
    ));
    let mut derivs = Vec::new();
    out.push(check(
        "derivative_positive",
        "the derivative of the prey state in its intensity is strictly positive at every node",
        || {
            let mut worst = f64::INFINITY;
            for eta in cx.within(&DERIVATIVE_AT) {
                let s = nontrivial(m, Species::Prey, eta, None)?;
                let z = derivative_wrt_param(g, &s)?;
                worst = worst.min(z.min() / z.sup_norm());
                derivs.push((s, z));
            }
            Ok(cx.capped(Measure::new(worst > 0.0, worst, 0.0), &DERIVATIVE_AT))
        },
    ));
    out.push(check(
        "derivative_fd",
        "the intensity derivative matches central finite differences",
        || {
            let tol = cx.tol.derivative_fd.max(10.0 * FD_STEP * FD_STEP);
            let mut worst: f64 = 0.0;
            if derivs.is_empty() {
                for eta in cx.within(&DERIVATIVE_AT) {
                    let s = nontrivial(m, Species::Prey, eta, None)?;
                    let z = derivative_wrt_param(g, &s)?;
                    derivs.push((s, z));
                }
            }
            for (s, z) in &derivs {
                let eta = s.intensity;
                let hi = nontrivial(m, Species::Prey, eta + FD_STEP, Some(&s.trace))?;
                let lo = nontrivial(m, Species::Prey, eta - FD_STEP, Some(&s.trace))?;
                for ((zv, a), b) in z.data().iter().zip(hi.field.data()).zip(lo.field.data()) {
                    worst = worst.max((zv - (a - b) / (2.0 * FD_STEP)).abs());
                }
            }
            Ok(Measure::at_most(worst, tol))
        },
    ));
    out
}

fn coexist_checks(cx: &Ctx, rng: &mut ChaCha8Rng) -> Vec<CheckRecord> {
    let m = cx.model;
    let g = &m.grids;
    vec![
        check(
            "coexist_self_consistency",
            "re-propagating a coexistence state from its traces reproduces its fields and birth law",
            || {
                let settings = ContinuationSettings {
                    point_cap: 3,
                    ..b3_settings(cx.xi_max)
                };
                let branch = continue_branch(m, BranchKind::B3, B3_ETA, &settings)?;
                let p = branch
                    .points
                    .last()
                    .ok_or(crate::error::Error::InvalidArgument("empty branch".into()))?;
                let scales = ZeroScales {
                    prey: sup_norm(&p.trace_u),
                    predator: sup_norm(&p.trace_u),
                };
                let sol = solve_coexistence(m, p.eta, p.xi, &p.trace_u, &p.trace_v, scales)?.state;
                let (u, v) = propagate_coupled(g, &m.params, &sol.trace_u, &sol.trace_v)?;
                let scale = 1.0 + sol.u.sup_norm().max(sol.v.sup_norm());
                let field_err = u.max_abs_diff(&sol.u).max(v.max_abs_diff(&sol.v));
                let bu = m.prey.birth_integral(&u);
                let bv = m.predator.birth_integral(&v);
                let birth_err = sol
                    .trace_u
                    .iter()
                    .zip(&bu)
                    .map(|(c, b)| (c - sol.eta * b).abs())
                    .chain(sol.trace_v.iter().zip(&bv).map(|(c, b)| (c - sol.xi * b).abs()))
                    .fold(0.0, f64::max);
                Ok(Measure::at_most(field_err.max(birth_err) / scale, 1e-10))
            },
        ),
        check(
            "no_coexistence_subcritical",
            "for prey intensity 0.9 every seed collapses to a state without prey",
            || {
                let (eta, xi) = (0.9, 1.5);
                let v = nontrivial(m, Species::Predator, xi, None)?;
                let scales = ZeroScales {
                    prey: v.trace_sup(),
                    predator: v.trace_sup(),
                };
                let mut bad = 0;
                let mut notes = Vec::new();
                for _ in 0..SEED_TRIALS {
                    let amp = v.trace_sup() * rng.gen_range(0.01..2.0);
                    let su: Vec<f64> = g.phi1().iter().map(|p| amp * p * rng.gen_range(0.5..1.5)).collect();
                    let f = rng.gen_range(0.5..2.0);
                    let sv: Vec<f64> = v.trace.iter().map(|t| f * t).collect();
                    match solve_coexistence(m, eta, xi, &su, &sv, scales) {
                        Ok(o) if o.class != StateClass::Coexistence => {}
                        Ok(_) => {
                            bad += 1;
                            notes.push("coexistence found".to_string());
                        }
                        Err(e) => {
                            bad += 1;
                            notes.push(e.to_string());
                        }
                    }
                }
                notes.dedup();
                Ok(Measure::at_most(bad as f64, 0.0).detail(notes.join("; ")))
            },
        ),
    ]
}

/// Coexistence state at a stored branch point, rebuilt by propagation.
fn rebuild(m: &Model, eta: f64, xi: f64, tu: &[f64], tv: &[f64]) -> Result<CoexistenceSolution> {
    let (u, v) = propagate_coupled(&m.grids, &m.params, tu, tv)?;
    Ok(CoexistenceSolution {
        eta,
        xi,
        u,
        v,
        trace_u: tu.to_vec(),
        trace_v: tv.to_vec(),
        residual: coexist_residual(m, eta, xi, tu, tv)?,
        iterations: 0,
    })
}

/// Worst ordering and constraint violations over a branch, relative to
/// the semi-trivial scale.
fn branch_membership(m: &Model, b: &Branch) -> Result<(f64, f64)> {
    let mut ordering = f64::NEG_INFINITY;
    let mut constraint = f64::NEG_INFINITY;
    let mut u_cache: Option<SemiTrivialSolution> = None;
    let mut v_cache: Option<SemiTrivialSolution> = None;
    for p in &b.points {
        let sol = rebuild(m, p.eta, p.xi, &p.trace_u, &p.trace_v)?;
        let u_eta = nontrivial(m, Species::Prey, p.eta, u_cache.as_ref().map(|s| s.trace.as_slice()))?;
        let v_xi = if p.xi > 1.0 {
            let seed = v_cache.as_ref().map(|s| s.trace.clone());
            solve_species(m, Species::Predator, p.xi, seed.as_deref())?.nontrivial()
        } else {
            None
        };
        let rep = ordering_check(&sol, &u_eta, v_xi.as_ref());
        let scale = 1.0 + u_eta.sup_norm().max(v_xi.as_ref().map_or(0.0, |v| v.sup_norm()));
        ordering = ordering.max(rep.prey_excess.max(rep.predator_deficit) / scale);
        let c = parameter_constraints(m, p.eta, p.xi, &u_eta, v_xi.as_ref())?;
        constraint = constraint.max(c.xi_min - c.xi);
        if let Some(e) = c.eta_min {
            constraint = constraint.max(e - c.eta);
        }
        u_cache = Some(u_eta);
        if v_xi.is_some() {
            v_cache = v_xi;
        }
    }
    Ok((ordering, constraint))
}

fn branch(b: &Result<Branch>) -> Result<&Branch> {
    b.as_ref().map_err(|e| e.clone())
}

fn bifurcate_checks(cx: &Ctx, _rng: &mut ChaCha8Rng) -> Vec<CheckRecord> {
    let m = cx.model;
    let mut out = Vec::new();
    let sweep = cx.within(&POINT_SWEEP);
    let xi0s: Result<Vec<_>> = sweep.iter().map(|e| xi0(m, *e)).collect();
    let eta0s: Result<Vec<_>> = sweep.iter().map(|x| eta0(m, *x)).collect();
    out.push(check(
        "xi0_structure",
        "predator onset on the prey branch lies in (0,1) and decreases with prey intensity",
        || {
            let v: Vec<f64> = xi0s.as_ref().map_err(|e| e.clone())?.iter().map(|p| p.value).collect();
            let pass = v.iter().all(|x| *x > 0.0 && *x < 1.0) && v.windows(2).all(|w| w[1] < w[0]);
            let worst = v.iter().fold(f64::NEG_INFINITY, |a, b| a.max(*b));
            Ok(Measure::new(pass, worst, 1.0).detail(format!("{v:.6?}")))
        },
    ));
    out.push(check(
        "eta0_structure",
        "prey onset on the predator branch exceeds 1 and increases with predator intensity",
        || {
            let v: Vec<f64> = eta0s.as_ref().map_err(|e| e.clone())?.iter().map(|p| p.value).collect();
            let pass = v.iter().all(|x| *x > 1.0) && v.windows(2).all(|w| w[1] > w[0]);
            let worst = v.iter().fold(f64::INFINITY, |a, b| a.min(*b));
            Ok(Measure::new(pass, worst, 1.0).detail(format!("{v:.6?}")))
        },
    ));
    out.push(check(
        "bifpoint_residuals",
        "every bifurcation point carries a spectral residual below 1e-8",
        || {
            let a = xi0s.as_ref().map_err(|e| e.clone())?;
            let b = eta0s.as_ref().map_err(|e| e.clone())?;
            let worst = a.iter().chain(b).map(|p| p.spectral_residual).fold(0.0, f64::max);
            Ok(Measure::at_most(worst, 1e-8))
        },
    ));
    let mut xi1_b3 = None;
    out.push(check(
        "coexistence_window",
        "below the prey-onset limit the predator thresholds satisfy xi0 < 1 < xi1",
        || {
            let n_lower = eta0(m, cx.xi_max)?.value;
            let mut margin = f64::INFINITY;
            let mut notes = Vec::new();
            for eta in sweep.iter().copied().chain([B3_ETA]).filter(|e| *e < n_lower) {
                let lo = xi0(m, eta)?.value;
                match xi1(m, eta, cx.xi_max)? {
                    Located::Found(p) => {
                        margin = margin.min(1.0 - lo).min(p.value - 1.0);
                        if eta == B3_ETA {
                            xi1_b3 = Some(p.value);
                        }
                    }
                    Located::NotFound { searched_to, .. } => {
                        margin = f64::NEG_INFINITY;
                        notes.push(format!("xi1({eta}) not found up to {searched_to}"));
                    }
                }
            }
            Ok(Measure::new(margin > 0.0, margin, 0.0).detail(notes.join("; ")))
        },
    ));
    out.push(check(
        "kernel_residuals",
        "kernel directions at the bifurcation points solve the linearized problem with positive predator trace",
        || {
            let mut worst: f64 = 0.0;
            let mut positive = true;
            let mut notes = Vec::new();
            let mut points = Vec::new();
            for eta in KERNEL_ETAS {
                points.push(xi0(m, eta)?);
            }
            match eta1(m, KERNEL_XI, cx.eta_max)? {
                Located::Found(p) => points.push(p),
                Located::NotFound { searched_to, .. } => {
                    notes.push(format!("eta1({KERNEL_XI}) not found up to {searched_to}"))
                }
            }
            for p in &points {
                let k = kernel_basis(m, p)?;
                worst = worst.max(k.eigen_residual);
                positive &= strictly_positive(&k.psi0);
            }
            if !positive {
                notes.push("psi0 not strictly positive".into());
            }
            Ok(Measure::new(positive && worst <= 1e-6, worst, 1e-6).detail(notes.join("; ")))
        },
    ));

    let b3 = continue_branch(m, BranchKind::B3, B3_ETA, &b3_settings(cx.xi_max));
    let s3 = continue_branch(m, BranchKind::S3, S3_XI, &s3_settings(cx.s3_limit));
    out.push(check(
        "b3_point_count",
        "the coexistence branch from the prey branch has at least 10 points",
        || {
            Ok(Measure::new(
                branch(&b3)?.points.len() >= 10,
                branch(&b3)?.points.len() as f64,
                10.0,
            ))
        },
    ));
    out.push(check(
        "b3_right_bifurcation",
        "every point of the prey-side branch lies strictly right of its onset",
        || {
            let b = branch(&b3)?;
            let gap = b
                .points
                .iter()
                .map(|p| p.param - b.anchor)
                .fold(f64::INFINITY, f64::min);
            Ok(Measure::new(gap > 0.0, gap, 0.0))
        },
    ));
    out.push(check(
        "b3_join",
        "the prey-side branch ends on the predator branch at xi1",
        || {
            let b = branch(&b3)?;
            let tol = cx.tol.join * cx.slack;
            let Termination::JoinedB1 { xi_hat } = b.termination else {
                return Ok(
                    Measure::new(false, f64::NAN, tol).detail(format!("terminated by {}", b.termination.label()))
                );
            };
            let target = match xi1_b3 {
                Some(x) => x,
                None => {
                    xi1(m, B3_ETA, cx.xi_max)?
                        .found()
                        .ok_or(crate::error::Error::InvalidArgument("xi1 not found".into()))?
                        .value
                }
            };
            Ok(Measure::at_most((xi_hat - target).abs(), tol).detail(format!("xi_hat {xi_hat:.8}, xi1 {target:.8}")))
        },
    ));
    out.push(check(
        "b3_join_trace",
        "the terminal predator trace is close to the predator-only state at the join",
        || {
            let b = branch(&b3)?;
            let tol = cx.tol.join_trace * cx.slack;
            let Termination::JoinedB1 { xi_hat } = b.termination else {
                return Ok(Measure::new(false, f64::NAN, tol).detail("branch did not join"));
            };
            let last = b
                .points
                .last()
                .ok_or(crate::error::Error::InvalidArgument("empty branch".into()))?;
            let v = nontrivial(m, Species::Predator, xi_hat, Some(&last.trace_v))?;
            let d = last
                .trace_v
                .iter()
                .zip(&v.trace)
                .map(|(a, b)| (a - b).abs())
                .fold(0.0, f64::max);
            Ok(Measure::at_most(d / v.trace_sup(), tol))
        },
    ));
    out.push(check(
        "s3_param_limit",
        "the predator-side branch reaches the parameter limit without joining, all points coexisting",
        || {
            let b = branch(&s3)?;
            let coexisting = b.points.iter().all(|p| p.sup_u > 0.0 && p.sup_v > 0.0);
            let last = b.points.last().map_or(f64::NAN, |p| p.param);
            let pass = b.termination == Termination::ParamLimit && coexisting && last >= cx.s3_limit;
            Ok(cx
                .capped(Measure::new(pass, last, cx.s3_limit), &[S3_LIMIT])
                .detail(format!("{} points, {}", b.points.len(), b.termination.label())))
        },
    ));
    out.push(check(
        "s3_sup_bound",
        "sup-norms along the predator-side branch stay below the a priori bound for bounded prey intensity",
        || {
            let b = branch(&s3)?;
            let top = b.points.iter().map(|p| p.eta).fold(cx.s3_limit, f64::max);
            let u_top = nontrivial(m, Species::Prey, top, None)?;
            let bound = predator_bound(m, b.fixed, u_top.sup_norm());
            let worst = b
                .points
                .iter()
                .map(|p| {
                    (p.sup_u / u_top.sup_norm())
                        .max(p.sup_v / bound.sup)
                        .max(sup_norm(&p.trace_v) / bound.trace)
                })
                .fold(0.0, f64::max);
            Ok(Measure::at_most(worst, 1.0).detail(format!(
                "u bound {:.4e}, v bound {:.4e}",
                u_top.sup_norm(),
                bound.sup
            )))
        },
    ));
    let membership = [(&b3, "b3"), (&s3, "s3")].map(|(b, label)| {
        (
            label,
            b.as_ref().map_err(|e| e.clone()).and_then(|b| branch_membership(m, b)),
        )
    });
    out.push(check(
        "branch_ordering",
        "branch points lie below the prey-only state and above the predator-only state",
        || {
            let mut worst = f64::NEG_INFINITY;
            for (_, r) in &membership {
                worst = worst.max(r.as_ref().map_err(|e| e.clone())?.0);
            }
            Ok(Measure::at_most(worst, cx.tol.constraint))
        },
    ));
    out.push(check(
        "branch_constraints",
        "branch points satisfy the spectral lower bounds on both intensities",
        || {
            let mut worst = f64::NEG_INFINITY;
            for (_, r) in &membership {
                worst = worst.max(r.as_ref().map_err(|e| e.clone())?.1);
            }
            Ok(Measure::at_most(worst, cx.tol.constraint))
        },
    ));
    out.push(check(
        "branch_revalidation",
        "every stored branch point re-solves with a residual below the configured bound",
        || {
            let mut worst: f64 = 0.0;
            for b in [&b3, &s3] {
                for p in &branch(b)?.points {
                    worst = worst.max(coexist_residual(m, p.eta, p.xi, &p.trace_u, &p.trace_v)?);
                }
            }
            Ok(Measure::at_most(worst, cx.tol.branch_residual))
        },
    ));
    out
}

type Group = fn(&Ctx, &mut ChaCha8Rng) -> Vec<CheckRecord>;

const GROUPS: [(&str, Group); 6] = [
    ("spatial", spatial_checks),
    ("evolve", evolve_checks),
    ("birthop", birth_checks),
    ("steady", steady_checks),
    ("coexist", coexist_checks),
    ("bifurcate", bifurcate_checks),
];

/// Runs every check group. `seed` overrides the configured seed; each group
/// draws from its own stream so results do not depend on `parallel`.
pub fn verify_suite(
    config: &ScenarioConfig,
    seed: Option<u64>,
    parallel: bool,
) -> std::result::Result<RunReport, HarnessError> {
    let start = Instant::now();
    let model = config.build_verify_model()?;
    let cap = intensity_cap(&model);
    let cx = Ctx {
        model: &model,
        tol: &config.run.tolerances,
        slack: discretization_slack(model.grids.n(), model.grids.age.steps()),
        trials: config.verify.trials,
        xi_max: config.run.xi_max.min(cap),
        eta_max: config.run.eta_max.min(cap),
        cap,
        s3_limit: S3_LIMIT.min(cap),
    };
    let seed = seed.unwrap_or(config.verify.seed);
    let run = |(i, (name, group)): (usize, &(&str, Group))| {
        let t = Instant::now();
        let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(i as u64));
        let records = group(&cx, &mut rng);
        (name.to_string(), t.elapsed().as_secs_f64(), records)
    };
    let results: Vec<_> = if parallel {
        GROUPS.par_iter().enumerate().map(run).collect()
    } else {
        GROUPS.iter().enumerate().map(run).collect()
    };
    let mut records = Vec::new();
    let mut timings = Vec::new();
    for (name, secs, recs) in results {
        timings.push((name, secs));
        records.extend(recs);
    }
    Ok(RunReport {
        records,
        elapsed_seconds: start.elapsed().as_secs_f64(),
        timings,
        config: config.clone(),
    })
}
