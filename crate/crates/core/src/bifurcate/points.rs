use serde::Serialize;

use crate::birthop::spectral_radius;
use crate::error::{Error, Result};
use crate::evolve::PotentialField;
use crate::model::Model;
use crate::steady::{solve_species, SemiTrivialSolution, Species};

/// Bisection stops once the bracket is this narrow.
pub const BISECTION_TOL: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum PointKind {
    /// `ξ₀(η) = 1/r(Ĥ[-β₂u_η])`, onset of predators on `B2`.
    Xi0,
    /// `η₀(ξ) = 1/r(H[α₂v_ξ])`, onset of prey on `B1`.
    Eta0,
    /// `ξ₁(η)`: root of `η r(H[α₂v_ξ]) = 1`, where `B3` meets `B1`.
    Xi1,
    /// `η₁(ξ)`: root of `ξ r(Ĥ[-β₂u_η]) = 1` for `ξ < 1`.
    Eta1,
}

#[derive(Debug, Clone)]
pub struct BifurcationPoint {
    pub kind: PointKind,
    pub value: f64,
    /// The parameter held fixed: `η` for `Xi0`/`Xi1`, `ξ` for `Eta0`/`Eta1`.
    pub fixed: f64,
    /// Relative eigen-residual of the principal eigenpair, or `|g|` at the
    /// root for the bisection-defined points.
    pub spectral_residual: f64,
    /// Semi-trivial solution the point lies on.
    pub background: SemiTrivialSolution,
}

impl BifurcationPoint {
    pub fn eta(&self) -> f64 {
        match self.kind {
            PointKind::Xi0 | PointKind::Xi1 => self.fixed,
            PointKind::Eta0 | PointKind::Eta1 => self.value,
        }
    }

    pub fn xi(&self) -> f64 {
        match self.kind {
            PointKind::Xi0 | PointKind::Xi1 => self.value,
            PointKind::Eta0 | PointKind::Eta1 => self.fixed,
        }
    }
}

#[derive(Debug, Clone)]
pub enum Located {
    Found(BifurcationPoint),
    /// No sign change up to `searched_to`; `gap` is the defining function
    /// there.
    NotFound {
        searched_to: f64,
        gap: f64,
    },
}

impl Located {
    pub fn found(self) -> Option<BifurcationPoint> {
        match self {
            Located::Found(p) => Some(p),
            Located::NotFound { .. } => None,
        }
    }
}

fn require(model: &Model, species: Species, intensity: f64, seed: Option<&[f64]>) -> Result<SemiTrivialSolution> {
    solve_species(model, species, intensity, seed)?
        .nontrivial()
        .ok_or_else(|| Error::InvalidArgument(format!("no positive {species} state at intensity {intensity}")))
}

/// `r(Ĥ[-β₂u])`, the predator birth operator on a prey background.
fn predator_radius(model: &Model, u: &SemiTrivialSolution) -> Result<(f64, f64)> {
    let h = PotentialField::from_field(&u.field, -model.params.beta2);
    let kr = spectral_radius(&model.grids, &h, &model.predator)?;
    Ok((kr.radius, kr.residual))
}

/// `r(H[α₂v])`, the prey birth operator on a predator background.
fn prey_radius(model: &Model, v: &SemiTrivialSolution) -> Result<(f64, f64)> {
    let h = PotentialField::from_field(&v.field, model.params.alpha2);
    let kr = spectral_radius(&model.grids, &h, &model.prey)?;
    Ok((kr.radius, kr.residual))
}

pub fn xi0(model: &Model, eta: f64) -> Result<BifurcationPoint> {
    let u = require(model, Species::Prey, eta, None)?;
    let (r, res) = predator_radius(model, &u)?;
    Ok(BifurcationPoint {
        kind: PointKind::Xi0,
        value: 1.0 / r,
        fixed: eta,
        spectral_residual: res,
        background: u,
    })
}

pub fn eta0(model: &Model, xi: f64) -> Result<BifurcationPoint> {
    let v = require(model, Species::Predator, xi, None)?;
    let (r, res) = prey_radius(model, &v)?;
    Ok(BifurcationPoint {
        kind: PointKind::Eta0,
        value: 1.0 / r,
        fixed: xi,
        spectral_residual: res,
        background: v,
    })
}

/// Root of `g` on `(lo, hi]` given `g(lo) = g_lo` and a sign change at
/// `hi`. Bisection to [`BISECTION_TOL`] followed by one secant step inside
/// the final bracket.
fn bracketed_root(
    mut lo: f64,
    mut g_lo: f64,
    mut hi: f64,
    mut g_hi: f64,
    mut g: impl FnMut(f64) -> Result<f64>,
) -> Result<f64> {
    while hi - lo > BISECTION_TOL {
        let mid = 0.5 * (lo + hi);
        let gm = g(mid)?;
        if gm == 0.0 {
            return Ok(mid);
        }
        if (gm > 0.0) == (g_lo > 0.0) {
            lo = mid;
            g_lo = gm;
        } else {
            hi = mid;
            g_hi = gm;
        }
    }
    Ok(lo - g_lo * (hi - lo) / (g_hi - g_lo))
}

/// `ξ₁(η)` searched on `(1, xi_max]`.
pub fn xi1(model: &Model, eta: f64, xi_max: f64) -> Result<Located> {
    if !(eta > 1.0) || !(xi_max > 1.0) {
        return Err(Error::InvalidArgument(format!(
            "xi1 needs eta > 1 and xi_max > 1, got ({eta}, {xi_max})"
        )));
    }
    let mut seed: Option<Vec<f64>> = None;
    let mut g = |xi: f64| -> Result<(f64, SemiTrivialSolution)> {
        let v = require(model, Species::Predator, xi, seed.as_deref())?;
        seed = Some(v.trace.clone());
        Ok((eta * prey_radius(model, &v)?.0 - 1.0, v))
    };
    let (g_hi, _) = g(xi_max)?;
    if g_hi > 0.0 {
        return Ok(Located::NotFound {
            searched_to: xi_max,
            gap: g_hi,
        });
    }
    // g(1) = η - 1 because v_ξ vanishes at ξ = 1
    let root = bracketed_root(1.0, eta - 1.0, xi_max, g_hi, |x| g(x).map(|r| r.0))?;
    let (gr, v) = g(root)?;
    Ok(Located::Found(BifurcationPoint {
        kind: PointKind::Xi1,
        value: root,
        fixed: eta,
        spectral_residual: gr.abs(),
        background: v,
    }))
}

/// `η₁(ξ)` for `ξ < 1`, searched on `(1, eta_max]`.
pub fn eta1(model: &Model, xi: f64, eta_max: f64) -> Result<Located> {
    if !(xi > 0.0 && xi < 1.0) || !(eta_max > 1.0) {
        return Err(Error::InvalidArgument(format!(
            "eta1 needs 0 < xi < 1 and eta_max > 1, got ({xi}, {eta_max})"
        )));
    }
    let mut seed: Option<Vec<f64>> = None;
    let mut g = |eta: f64| -> Result<(f64, SemiTrivialSolution)> {
        let u = require(model, Species::Prey, eta, seed.as_deref())?;
        seed = Some(u.trace.clone());
        Ok((xi * predator_radius(model, &u)?.0 - 1.0, u))
    };
    let (g_hi, _) = g(eta_max)?;
    if g_hi < 0.0 {
        return Ok(Located::NotFound {
            searched_to: eta_max,
            gap: g_hi,
        });
    }
    let root = bracketed_root(1.0, xi - 1.0, eta_max, g_hi, |x| g(x).map(|r| r.0))?;
    let (gr, u) = g(root)?;
    Ok(Located::Found(BifurcationPoint {
        kind: PointKind::Eta1,
        value: root,
        fixed: xi,
        spectral_residual: gr.abs(),
        background: u,
    }))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrendRow {
    pub param: f64,
    /// `η₀(param)`, with `param` read as `ξ`.
    pub eta0: f64,
    /// `ξ₀(param)`, with `param` read as `η`.
    pub xi0: f64,
}

/// Estimates of `N = lim η₀(ξ)` and `δ = lim ξ₀(η)` from the largest
/// sampled parameter, with the trend on a log-spaced grid in `(1, max]`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LimitEstimates {
    /// `η₀(xi_max)`, a lower bound for `N` since `η₀` increases.
    pub n_lower: f64,
    /// `ξ₀(eta_max)`, an upper bound for `δ` since `ξ₀` decreases.
    pub delta_upper: f64,
    pub trend: Vec<TrendRow>,
}

pub fn estimate_limits(model: &Model, eta_max: f64, xi_max: f64, samples: usize) -> Result<LimitEstimates> {
    if !(eta_max > 1.0 && xi_max > 1.0) || samples < 2 {
        return Err(Error::InvalidArgument(
            "limit estimation needs maxima above 1 and two samples".into(),
        ));
    }
    let top = eta_max.max(xi_max);
    let start: f64 = 1.1f64.min(0.5 * (1.0 + top));
    let mut trend = Vec::with_capacity(samples);
    for i in 0..samples {
        let p = start * (top / start).powf(i as f64 / (samples - 1) as f64);
        trend.push(TrendRow {
            param: p,
            eta0: eta0(model, p)?.value,
            xi0: xi0(model, p)?.value,
        });
    }
    Ok(LimitEstimates {
        n_lower: eta0(model, xi_max)?.value,
        delta_upper: xi0(model, eta_max)?.value,
        trend,
    })
}
