use serde::{Deserialize, Serialize};

use crate::coexist::{solve_coexistence, CoexistOutcome, StateClass, ZeroScales};
use crate::error::{Error, Result};
use crate::linalg::sup_norm;
use crate::model::Model;

use super::kernel::{kernel_basis, KernelBasis, KernelSite};
use super::points::{eta0, eta1, xi0, BifurcationPoint, PointKind};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BranchKind {
    /// From `ξ₀(η)` on `B2`, continued in `ξ` at fixed `η`.
    B3,
    /// From `η₀(ξ)` on `B1`, continued in `η` at fixed `ξ > 1`.
    S3,
    /// From `η₁(ξ)` on `B2`, continued in `η` at fixed `ξ < 1`.
    S4,
}

impl BranchKind {
    pub fn label(self) -> &'static str {
        match self {
            BranchKind::B3 => "b3",
            BranchKind::S3 => "s3",
            BranchKind::S4 => "s4",
        }
    }

    fn continues_in_xi(self) -> bool {
        self == BranchKind::B3
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ContinuationSettings {
    pub step0: f64,
    pub min_step: f64,
    pub max_step: f64,
    /// The branch stops on reaching this value of its parameter.
    pub param_limit: f64,
    pub point_cap: usize,
}

impl Default for ContinuationSettings {
    fn default() -> Self {
        ContinuationSettings {
            step0: 0.01,
            min_step: 1e-4,
            max_step: 0.5,
            param_limit: 10.0,
            point_cap: 500,
        }
    }
}

impl ContinuationSettings {
    pub fn validate(&self) -> Result<()> {
        let ok = self.min_step > 0.0
            && self.min_step <= self.step0
            && self.step0 <= self.max_step
            && self.param_limit.is_finite()
            && self.point_cap > 0;
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidArgument(format!(
                "inconsistent continuation settings {self:?}"
            )))
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Termination {
    /// The prey density vanished: the branch reached `B1`. `xi_hat` is the
    /// join parameter extrapolated from the last coexistence points.
    JoinedB1 {
        xi_hat: f64,
    },
    ParamLimit,
    PointCap,
    StepFailure {
        reason: String,
    },
}

impl Termination {
    pub fn label(&self) -> &'static str {
        match self {
            Termination::JoinedB1 { .. } => "joined_B1",
            Termination::ParamLimit => "param_limit",
            Termination::PointCap => "point_cap",
            Termination::StepFailure { .. } => "step_failure",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BranchPoint {
    pub param: f64,
    pub eta: f64,
    pub xi: f64,
    pub trace_u: Vec<f64>,
    pub trace_v: Vec<f64>,
    pub sup_u: f64,
    pub sup_v: f64,
    pub l2_u: f64,
    pub l2_v: f64,
    pub residual: f64,
    pub iterations: usize,
}

#[derive(Debug, Clone)]
pub struct Branch {
    pub kind: BranchKind,
    /// `η` for `B3`, `ξ` for `S3`/`S4`.
    pub fixed: f64,
    /// Parameter value of the bifurcation point the branch leaves from.
    pub anchor: f64,
    pub points: Vec<BranchPoint>,
    pub termination: Termination,
}

/// Locates the anchor point of `kind` at the fixed parameter, builds its
/// kernel direction and continues.
pub fn continue_branch(model: &Model, kind: BranchKind, fixed: f64, settings: &ContinuationSettings) -> Result<Branch> {
    let anchor = match kind {
        BranchKind::B3 => xi0(model, fixed)?,
        BranchKind::S3 => eta0(model, fixed)?,
        BranchKind::S4 => eta1(model, fixed, settings.param_limit)?
            .found()
            .ok_or_else(|| Error::InvalidArgument(format!("no eta1 below {} at xi = {fixed}", settings.param_limit)))?,
    };
    let kernel = kernel_basis(model, &anchor)?;
    continue_from(model, kind, &anchor, &kernel, settings)
}

struct State {
    param: f64,
    cu: Vec<f64>,
    cv: Vec<f64>,
}

/// Multipliers tried on the initial amplitude before shrinking the first
/// step.
const FIRST_AMPLITUDES: [f64; 6] = [1.0, 2.0, 4.0, 8.0, 0.5, 0.25];
const STEP_GROWTH: f64 = 1.5;
/// Once the step is below this many minimal steps a landing on `B1` is
/// accepted as the join.
const JOIN_RESOLUTION: f64 = 4.0;

/// Natural-parameter continuation with secant predictor and Newton
/// corrector from a located bifurcation point.
pub fn continue_from(
    model: &Model,
    kind: BranchKind,
    anchor: &BifurcationPoint,
    kernel: &KernelBasis,
    settings: &ContinuationSettings,
) -> Result<Branch> {
    settings.validate()?;
    let expected = match kind {
        BranchKind::B3 => (PointKind::Xi0, KernelSite::PreyBranchXi),
        BranchKind::S3 => (PointKind::Eta0, KernelSite::PredatorBranchEta),
        BranchKind::S4 => (PointKind::Eta1, KernelSite::PreyBranchEta),
    };
    if (anchor.kind, kernel.site) != expected {
        return Err(Error::InvalidArgument(format!(
            "branch {kind:?} cannot start from {:?} with kernel at {:?}",
            anchor.kind, kernel.site
        )));
    }
    let n = model.grids.n();
    let bg = &anchor.background;
    let on_prey_branch = kind != BranchKind::S3;
    let start = if on_prey_branch {
        State {
            param: anchor.value,
            cu: bg.trace.clone(),
            cv: vec![0.0; n],
        }
    } else {
        State {
            param: anchor.value,
            cu: vec![0.0; n],
            cv: bg.trace.clone(),
        }
    };
    let scale = bg.trace_sup();
    let scales = ZeroScales {
        prey: scale,
        predator: scale,
    };
    // amplitude per unit parameter so the resident moves by about its own
    // size times the step
    let amp_per_step = if on_prey_branch {
        bg.sup_norm() / kernel.phi_star.sup_norm()
    } else {
        bg.sup_norm() / kernel.psi_star.sup_norm()
    };
    let at = |param: f64| {
        if kind.continues_in_xi() {
            (anchor.fixed, param)
        } else {
            (param, anchor.fixed)
        }
    };

    let mut points: Vec<BranchPoint> = Vec::new();
    let mut history: Vec<State> = vec![start];
    let mut step = settings.step0;
    let termination = loop {
        if points.len() >= settings.point_cap {
            break Termination::PointCap;
        }
        let last = history.last().expect("history starts with the anchor");
        if last.param >= settings.param_limit {
            break Termination::ParamLimit;
        }
        if step < settings.min_step {
            break Termination::StepFailure {
                reason: format!("step fell below {} at parameter {}", settings.min_step, last.param),
            };
        }
        let target = (last.param + step).min(settings.param_limit);
        let (eta, xi) = at(target);
        let attempt = if points.is_empty() {
            let mut found = None;
            for mult in FIRST_AMPLITUDES {
                let eps = mult * (target - anchor.value) * amp_per_step;
                let (su, sv) = kernel_seed(kernel, on_prey_branch, &history[0], eps);
                if let Ok(out) = solve_coexistence(model, eta, xi, &su, &sv, scales) {
                    if out.class == StateClass::Coexistence {
                        found = Some(out);
                        break;
                    }
                }
            }
            found.ok_or(StateClass::Trivial)
        } else {
            let (su, sv) = secant(&history, target);
            match solve_coexistence(model, eta, xi, &su, &sv, scales) {
                Ok(out) if out.class == StateClass::Coexistence => Ok(out),
                Ok(out) => Err(out.class),
                Err(_) => Err(StateClass::Trivial),
            }
        };
        match attempt {
            Ok(CoexistOutcome { state, .. }) => {
                points.push(BranchPoint {
                    param: target,
                    eta,
                    xi,
                    sup_u: state.u.sup_norm(),
                    sup_v: state.v.sup_norm(),
                    l2_u: state.u.l2_norm(&model.grids),
                    l2_v: state.v.l2_norm(&model.grids),
                    residual: state.residual,
                    iterations: state.iterations,
                    trace_u: state.trace_u.clone(),
                    trace_v: state.trace_v.clone(),
                });
                history.push(State {
                    param: target,
                    cu: state.trace_u,
                    cv: state.trace_v,
                });
                if state.iterations <= 4 {
                    step = (step * STEP_GROWTH).min(settings.max_step);
                }
            }
            Err(StateClass::PredatorOnly) if kind.continues_in_xi() && !points.is_empty() => {
                if step > JOIN_RESOLUTION * settings.min_step {
                    step *= 0.5;
                } else {
                    break Termination::JoinedB1 {
                        xi_hat: extrapolate_join(&history, target),
                    };
                }
            }
            Err(_) => step *= 0.5,
        }
    };
    Ok(Branch {
        kind,
        fixed: anchor.fixed,
        anchor: anchor.value,
        points,
        termination,
    })
}

fn kernel_seed(kernel: &KernelBasis, on_prey_branch: bool, base: &State, eps: f64) -> (Vec<f64>, Vec<f64>) {
    if on_prey_branch {
        let u = base
            .cu
            .iter()
            .zip(&kernel.phi0)
            .map(|(b, p)| (b - eps * p).max(0.0))
            .collect();
        let v = kernel.psi0.iter().map(|p| eps * p).collect();
        (u, v)
    } else {
        let u = kernel.phi0.iter().map(|p| eps * p).collect();
        let v = base.cv.iter().zip(&kernel.psi0).map(|(b, p)| b + eps * p).collect();
        (u, v)
    }
}

/// Linear extrapolation through the last two states, clipped to the cone.
fn secant(history: &[State], target: f64) -> (Vec<f64>, Vec<f64>) {
    let b = &history[history.len() - 1];
    let a = &history[history.len() - 2];
    let t = (target - b.param) / (b.param - a.param);
    let ext = |x: &[f64], y: &[f64]| -> Vec<f64> { x.iter().zip(y).map(|(p, q)| (q + t * (q - p)).max(0.0)).collect() };
    (ext(&a.cu, &b.cu), ext(&a.cv, &b.cv))
}

/// Parameter where the prey trace extrapolates to zero, kept between the
/// last coexistence point and the failed target.
fn extrapolate_join(history: &[State], failed: f64) -> f64 {
    let b = &history[history.len() - 1];
    let a = &history[history.len() - 2];
    let (sa, sb) = (sup_norm(&a.cu), sup_norm(&b.cu));
    if sa <= sb {
        return b.param;
    }
    let hat = b.param + sb * (b.param - a.param) / (sa - sb);
    hat.clamp(b.param, failed)
}
