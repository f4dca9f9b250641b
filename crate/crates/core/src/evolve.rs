//! Age stepping on the tensor grid.
//!
//! All propagators are backward Euler in age with the potential, source and
//! nonlinear terms evaluated at the new age row. The nonlinear steps are
//! solved to rounding accuracy by Newton's method, so the linearized
//! propagator is the exact derivative of the discrete nonlinear one and the
//! discrete steady states satisfy the discrete spectral identities exactly.

use crate::error::{Error, Result};
use crate::linalg::{min_value, sup_norm, Block, BlockTridiag, Tridiag};
use crate::mesh::Grids;
use crate::model::ModelParams;

/// Upper limit on uniform substeps inside one age step.
pub const MAX_SUBSTEPS: usize = 4096;
const STEP_NEWTON_MAX: usize = 60;

/// Values on the `(M + 1) x n` age-space grid, row `k` holding age `k da`.
#[derive(Debug, Clone, PartialEq)]
pub struct AgeSpaceField {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl AgeSpaceField {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        AgeSpaceField {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn for_grids(grids: &Grids) -> Self {
        AgeSpaceField::zeros(grids.rows(), grids.n())
    }

    /// Samples `f(a, x)` at every age row and interior node.
    pub fn from_fn(grids: &Grids, f: impl Fn(f64, f64) -> f64) -> Self {
        let xs = grids.space.nodes();
        let mut out = AgeSpaceField::for_grids(grids);
        for k in 0..out.rows {
            let a = grids.age.age(k);
            for (v, &x) in out.row_mut(k).iter_mut().zip(&xs) {
                *v = f(a, x);
            }
        }
        out
    }

    pub fn from_data(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::InvalidArgument(format!(
                "field data has {} values, expected {rows} x {cols}",
                data.len()
            )));
        }
        Ok(AgeSpaceField { rows, cols, data })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn row(&self, k: usize) -> &[f64] {
        &self.data[k * self.cols..(k + 1) * self.cols]
    }

    pub fn row_mut(&mut self, k: usize) -> &mut [f64] {
        &mut self.data[k * self.cols..(k + 1) * self.cols]
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn sup_norm(&self) -> f64 {
        sup_norm(&self.data)
    }

    pub fn min(&self) -> f64 {
        min_value(&self.data)
    }

    pub fn scaled(&self, s: f64) -> Self {
        AgeSpaceField {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|v| v * s).collect(),
        }
    }

    /// `self += a * other`.
    pub fn axpy(&mut self, a: f64, other: &AgeSpaceField) {
        assert_eq!(self.data.len(), other.data.len());
        for (x, y) in self.data.iter_mut().zip(&other.data) {
            *x += a * y;
        }
    }

    pub fn hadamard(&self, other: &AgeSpaceField) -> Self {
        assert_eq!(self.data.len(), other.data.len());
        AgeSpaceField {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().zip(&other.data).map(|(x, y)| x * y).collect(),
        }
    }

    pub fn max_abs_diff(&self, other: &AgeSpaceField) -> f64 {
        self.data
            .iter()
            .zip(&other.data)
            .fold(0.0, |m, (x, y)| m.max((x - y).abs()))
    }

    /// Discrete `L²((0, a_m) x (0, L))` norm: trapezoid in age, `h`-weighted
    /// sum in space.
    pub fn l2_norm(&self, grids: &Grids) -> f64 {
        let h = grids.space.spacing();
        let s: f64 = grids
            .age
            .trapezoid_weights()
            .iter()
            .enumerate()
            .map(|(k, w)| w * h * self.row(k).iter().map(|v| v * v).sum::<f64>())
            .sum();
        s.sqrt()
    }
}

/// Potential `h(a, x)` multiplying the density in a linear age-space
/// evolution.
#[derive(Debug, Clone, PartialEq)]
pub struct PotentialField(AgeSpaceField);

impl PotentialField {
    pub fn zero(grids: &Grids) -> Self {
        PotentialField(AgeSpaceField::for_grids(grids))
    }

    pub fn constant(grids: &Grids, c: f64) -> Self {
        PotentialField::from_fn(grids, |_, _| c)
    }

    pub fn from_fn(grids: &Grids, f: impl Fn(f64, f64) -> f64) -> Self {
        PotentialField(AgeSpaceField::from_fn(grids, f))
    }

    /// `scale * field`, e.g. `α u` from a population density.
    pub fn from_field(field: &AgeSpaceField, scale: f64) -> Self {
        PotentialField(field.scaled(scale))
    }

    /// `Σ cᵢ fieldᵢ`.
    pub fn combination(terms: &[(f64, &AgeSpaceField)]) -> Self {
        let (c0, f0) = terms[0];
        let mut out = f0.scaled(c0);
        for (c, f) in &terms[1..] {
            out.axpy(*c, f);
        }
        PotentialField(out)
    }

    pub fn field(&self) -> &AgeSpaceField {
        &self.0
    }

    pub fn row(&self, k: usize) -> &[f64] {
        self.0.row(k)
    }

    pub fn min(&self) -> f64 {
        self.0.min()
    }
}

fn check_shape(grids: &Grids, f: &AgeSpaceField, what: &str) -> Result<()> {
    if f.rows() != grids.rows() || f.cols() != grids.n() {
        return Err(Error::InvalidArgument(format!(
            "{what} is {} x {}, grid is {} x {}",
            f.rows(),
            f.cols(),
            grids.rows(),
            grids.n()
        )));
    }
    Ok(())
}

fn check_initial(grids: &Grids, phi0: &[f64]) -> Result<()> {
    if phi0.len() != grids.n() {
        return Err(Error::InvalidArgument(format!(
            "initial datum has {} nodes, grid has {}",
            phi0.len(),
            grids.n()
        )));
    }
    Ok(())
}

/// Number of uniform substeps keeping `da_sub * (-min h) <= 1/2`.
fn substeps(step: usize, da: f64, row: &[f64]) -> Result<usize> {
    let worst = -min_value(row);
    if worst * da <= 0.5 {
        return Ok(1);
    }
    let required = (2.0 * da * worst).ceil() as usize;
    if required > MAX_SUBSTEPS {
        return Err(Error::SubstepLimit {
            step,
            min_potential: -worst,
            required,
            limit: MAX_SUBSTEPS,
        });
    }
    Ok(required)
}

fn linear_factor(grids: &Grids, row: &[f64], dt: f64) -> Result<Tridiag> {
    let lap = &grids.laplacian;
    let diag: Vec<f64> = row.iter().map(|h| 1.0 + dt * (lap.diag() + h)).collect();
    Tridiag::factor(&diag, dt * lap.off())
}

/// `∂ₐw - Δw + h w = 0`, `w(0) = φ₀`: solves
/// `(I + da(-Δ + diag h(a_{k+1}))) w_{k+1} = w_k`.
pub fn propagate_linear(grids: &Grids, h: &PotentialField, phi0: &[f64]) -> Result<AgeSpaceField> {
    propagate_affine(grids, h, None, phi0)
}

/// `∂ₐw - Δw + h w = f`, `w(0) = φ₀`, with `f` taken at the new row.
pub fn propagate_forced(
    grids: &Grids,
    h: &PotentialField,
    source: &AgeSpaceField,
    phi0: &[f64],
) -> Result<AgeSpaceField> {
    check_shape(grids, source, "source")?;
    propagate_affine(grids, h, Some(source), phi0)
}

fn propagate_affine(
    grids: &Grids,
    h: &PotentialField,
    source: Option<&AgeSpaceField>,
    phi0: &[f64],
) -> Result<AgeSpaceField> {
    check_shape(grids, h.field(), "potential")?;
    check_initial(grids, phi0)?;
    let da = grids.da();
    let mut out = AgeSpaceField::for_grids(grids);
    out.row_mut(0).copy_from_slice(phi0);
    let mut w = phi0.to_vec();
    for k in 0..grids.age.steps() {
        let row = h.row(k + 1);
        let s = substeps(k, da, row)?;
        let dt = da / s as f64;
        let factor = linear_factor(grids, row, dt)?;
        for _ in 0..s {
            if let Some(src) = source {
                for (x, f) in w.iter_mut().zip(src.row(k + 1)) {
                    *x += dt * f;
                }
            }
            factor.solve(&mut w);
        }
        out.row_mut(k + 1).copy_from_slice(&w);
    }
    Ok(out)
}

/// Propagates `ncols` initial data at once (node-major `n x ncols`) and
/// hands every age row to `visit`.
pub(crate) fn propagate_columns(
    grids: &Grids,
    h: &PotentialField,
    mut state: Vec<f64>,
    ncols: usize,
    mut visit: impl FnMut(usize, &[f64]),
) -> Result<()> {
    check_shape(grids, h.field(), "potential")?;
    let da = grids.da();
    visit(0, &state);
    for k in 0..grids.age.steps() {
        let row = h.row(k + 1);
        let s = substeps(k, da, row)?;
        let factor = linear_factor(grids, row, da / s as f64)?;
        for _ in 0..s {
            factor.solve_many(&mut state, ncols);
        }
        visit(k + 1, &state);
    }
    Ok(())
}

/// Logistic evolution `∂ₐu - Δu + α u² = 0` from a nonnegative `u(0)`.
pub fn propagate_logistic(grids: &Grids, phi0: &[f64], alpha: f64) -> Result<AgeSpaceField> {
    logistic(grids, phi0, alpha, None)
}

/// Logistic evolution with an additional source, `∂ₐu - Δu + α u² = f`.
pub fn propagate_logistic_forced(
    grids: &Grids,
    phi0: &[f64],
    alpha: f64,
    source: &AgeSpaceField,
) -> Result<AgeSpaceField> {
    check_shape(grids, source, "source")?;
    logistic(grids, phi0, alpha, Some(source))
}

fn logistic(grids: &Grids, phi0: &[f64], alpha: f64, source: Option<&AgeSpaceField>) -> Result<AgeSpaceField> {
    check_initial(grids, phi0)?;
    if phi0.iter().any(|v| *v < 0.0 || !v.is_finite()) {
        return Err(Error::ConeViolation(
            "logistic initial datum has negative entries".into(),
        ));
    }
    let da = grids.da();
    let mut out = AgeSpaceField::for_grids(grids);
    out.row_mut(0).copy_from_slice(phi0);
    for k in 0..grids.age.steps() {
        let mut rhs = out.row(k).to_vec();
        if let Some(src) = source {
            for (r, f) in rhs.iter_mut().zip(src.row(k + 1)) {
                *r += da * f;
            }
        }
        let next = logistic_step(grids, alpha, out.row(k), &rhs)?;
        out.row_mut(k + 1).copy_from_slice(&next);
    }
    Ok(out)
}

/// Tracks Newton corrections and decides when the step equation is solved
/// to rounding.
struct StepConvergence {
    last: f64,
}

impl StepConvergence {
    fn done(&mut self, delta: f64, scale: f64) -> bool {
        let tiny = delta <= 4.0 * f64::EPSILON * scale;
        let stalled = delta <= 1e-12 * scale.max(f64::MIN_POSITIVE) && delta >= 0.5 * self.last;
        self.last = delta;
        tiny || stalled
    }
}

/// Solves `(I + da(-Δ)) x + da α x² = rhs`.
fn logistic_step(grids: &Grids, alpha: f64, prev: &[f64], rhs: &[f64]) -> Result<Vec<f64>> {
    let da = grids.da();
    let lap = &grids.laplacian;
    let off = da * lap.off();
    // semi-implicit guess, then Newton on the fully implicit equation
    let guess_diag: Vec<f64> = prev
        .iter()
        .map(|p| 1.0 + da * (lap.diag() + alpha * p.max(0.0)))
        .collect();
    let mut x = rhs.to_vec();
    Tridiag::factor(&guess_diag, off)?.solve(&mut x);
    let mut conv = StepConvergence { last: f64::INFINITY };
    for _ in 0..STEP_NEWTON_MAX {
        let ax = lap.apply(&x);
        let mut d: Vec<f64> = (0..x.len())
            .map(|i| x[i] + da * (ax[i] + alpha * x[i] * x[i]) - rhs[i])
            .collect();
        let jd: Vec<f64> = x.iter().map(|v| 1.0 + da * (lap.diag() + 2.0 * alpha * v)).collect();
        Tridiag::factor(&jd, off)?.solve(&mut d);
        for (xi, di) in x.iter_mut().zip(&d) {
            *xi -= di;
        }
        if conv.done(sup_norm(&d), sup_norm(&x)) {
            return Ok(x);
        }
    }
    Err(Error::NonConvergence {
        what: "logistic age step",
        iterations: STEP_NEWTON_MAX,
        residual: conv.last,
    })
}

/// Jacobian blocks of the coupled step at the new row `(u, v)`:
/// `[1 + da(2/h² + 2α₁u + α₂v),  da α₂ u ; -da β₂ v,  1 + da(2/h² + 2β₁v - β₂u)]`.
fn coupled_blocks(grids: &Grids, p: &ModelParams, u: &[f64], v: &[f64]) -> Vec<Block> {
    let da = grids.da();
    let d0 = 1.0 + da * grids.laplacian.diag();
    u.iter()
        .zip(v)
        .map(|(&u, &v)| {
            [
                d0 + da * (2.0 * p.alpha1 * u + p.alpha2 * v),
                da * p.alpha2 * u,
                -da * p.beta2 * v,
                d0 + da * (2.0 * p.beta1 * v - p.beta2 * u),
            ]
        })
        .collect()
}

/// Predator-prey evolution
/// `∂ₐu - Δu + (α₁u + α₂v)u = 0`, `∂ₐv - Δv + (β₁v - β₂u)v = 0`.
pub fn propagate_coupled(
    grids: &Grids,
    params: &ModelParams,
    phi0_u: &[f64],
    phi0_v: &[f64],
) -> Result<(AgeSpaceField, AgeSpaceField)> {
    check_initial(grids, phi0_u)?;
    check_initial(grids, phi0_v)?;
    if phi0_u.iter().chain(phi0_v).any(|v| *v < 0.0 || !v.is_finite()) {
        return Err(Error::ConeViolation(
            "coupled initial datum has negative entries".into(),
        ));
    }
    let mut u = AgeSpaceField::for_grids(grids);
    let mut v = AgeSpaceField::for_grids(grids);
    u.row_mut(0).copy_from_slice(phi0_u);
    v.row_mut(0).copy_from_slice(phi0_v);
    for k in 0..grids.age.steps() {
        let (nu, nv) = coupled_step(grids, params, u.row(k), v.row(k))?;
        let scale = sup_norm(&nu).max(sup_norm(&nv)).max(1.0);
        if min_value(&nu) < -1e-12 * scale || min_value(&nv) < -1e-12 * scale {
            return Err(Error::ConeViolation(format!(
                "coupled step {k} produced negative density"
            )));
        }
        u.row_mut(k + 1).copy_from_slice(&nu);
        v.row_mut(k + 1).copy_from_slice(&nv);
    }
    Ok((u, v))
}

fn coupled_step(grids: &Grids, p: &ModelParams, uk: &[f64], vk: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
    let da = grids.da();
    let lap = &grids.laplacian;
    let off = da * lap.off();
    let n = uk.len();
    let diag_u: Vec<f64> = (0..n)
        .map(|i| 1.0 + da * (lap.diag() + p.alpha1 * uk[i] + p.alpha2 * vk[i]))
        .collect();
    let mut x = uk.to_vec();
    Tridiag::factor(&diag_u, off)?.solve(&mut x);
    let diag_v: Vec<f64> = (0..n)
        .map(|i| 1.0 + da * (lap.diag() + p.beta1 * vk[i] - p.beta2 * uk[i]))
        .collect();
    let mut y = vk.to_vec();
    if let Ok(f) = Tridiag::factor(&diag_v, off) {
        f.solve(&mut y);
    }
    let mut conv = StepConvergence { last: f64::INFINITY };
    for _ in 0..STEP_NEWTON_MAX {
        let ax = lap.apply(&x);
        let ay = lap.apply(&y);
        let mut gx: Vec<f64> = (0..n)
            .map(|i| x[i] + da * (ax[i] + (p.alpha1 * x[i] + p.alpha2 * y[i]) * x[i]) - uk[i])
            .collect();
        let mut gy: Vec<f64> = (0..n)
            .map(|i| y[i] + da * (ay[i] + (p.beta1 * y[i] - p.beta2 * x[i]) * y[i]) - vk[i])
            .collect();
        BlockTridiag::factor(&coupled_blocks(grids, p, &x, &y), off)?.solve_many(&mut gx, &mut gy, 1);
        for i in 0..n {
            x[i] -= gx[i];
            y[i] -= gy[i];
        }
        let delta = sup_norm(&gx).max(sup_norm(&gy));
        if conv.done(delta, sup_norm(&x).max(sup_norm(&y))) {
            return Ok((x, y));
        }
    }
    Err(Error::NonConvergence {
        what: "coupled age step",
        iterations: STEP_NEWTON_MAX,
        residual: conv.last,
    })
}

/// Linearization of [`propagate_coupled`] about `(u, v)`:
///
/// `∂ₐφ - Δφ + (2α₁u + α₂v)φ + α₂u ψ = f`,
/// `∂ₐψ - Δψ + (2β₁v - β₂u)ψ - β₂v φ = g`.
///
/// With zero sources this is exactly the derivative of the discrete coupled
/// map with respect to its initial data.
pub fn propagate_linearized(
    grids: &Grids,
    params: &ModelParams,
    base_u: &AgeSpaceField,
    base_v: &AgeSpaceField,
    rhs: Option<(&AgeSpaceField, &AgeSpaceField)>,
    phi0_u: &[f64],
    phi0_v: &[f64],
) -> Result<(AgeSpaceField, AgeSpaceField)> {
    check_shape(grids, base_u, "prey background")?;
    check_shape(grids, base_v, "predator background")?;
    check_initial(grids, phi0_u)?;
    check_initial(grids, phi0_v)?;
    if let Some((f, g)) = rhs {
        check_shape(grids, f, "prey source")?;
        check_shape(grids, g, "predator source")?;
    }
    let da = grids.da();
    let off = da * grids.laplacian.off();
    let mut pu = AgeSpaceField::for_grids(grids);
    let mut pv = AgeSpaceField::for_grids(grids);
    pu.row_mut(0).copy_from_slice(phi0_u);
    pv.row_mut(0).copy_from_slice(phi0_v);
    let mut x = phi0_u.to_vec();
    let mut y = phi0_v.to_vec();
    for k in 0..grids.age.steps() {
        if let Some((f, g)) = rhs {
            for i in 0..x.len() {
                x[i] += da * f.row(k + 1)[i];
                y[i] += da * g.row(k + 1)[i];
            }
        }
        let blocks = coupled_blocks(grids, params, base_u.row(k + 1), base_v.row(k + 1));
        BlockTridiag::factor(&blocks, off)?.solve_many(&mut x, &mut y, 1);
        pu.row_mut(k + 1).copy_from_slice(&x);
        pv.row_mut(k + 1).copy_from_slice(&y);
    }
    Ok((pu, pv))
}

/// Batched homogeneous linearized propagation; `visit` sees every age row.
pub(crate) fn linearized_columns(
    grids: &Grids,
    params: &ModelParams,
    base_u: &AgeSpaceField,
    base_v: &AgeSpaceField,
    mut x: Vec<f64>,
    mut y: Vec<f64>,
    ncols: usize,
    mut visit: impl FnMut(usize, &[f64], &[f64]),
) -> Result<()> {
    let off = grids.da() * grids.laplacian.off();
    visit(0, &x, &y);
    for k in 0..grids.age.steps() {
        let blocks = coupled_blocks(grids, params, base_u.row(k + 1), base_v.row(k + 1));
        BlockTridiag::factor(&blocks, off)?.solve_many(&mut x, &mut y, ncols);
        visit(k + 1, &x, &y);
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::{DMatrix, DVector};

    fn small() -> Grids {
        Grids::new(5, 1.0, 1.0, 16).unwrap()
    }

    #[test]
    fn constant_potential_scales_principal_mode() {
        let g = Grids::new(32, 1.0, 1.0, 64).unwrap();
        let c = 2.5;
        let w = propagate_linear(&g, &PotentialField::constant(&g, c), g.phi1()).unwrap();
        let q = 1.0 / (1.0 + g.da() * (g.lambda1() + c));
        for k in 0..g.rows() {
            for (a, b) in w.row(k).iter().zip(g.phi1()) {
                assert!((a - q.powi(k as i32) * b).abs() < 1e-13);
            }
        }
    }

    #[test]
    fn linear_step_matches_dense_inverse() {
        let g = small();
        let h = PotentialField::from_fn(&g, |a, x| 1.0 + a * x);
        let phi0 = [0.3, 1.0, 0.2, 0.7, 0.5];
        let w = propagate_linear(&g, &h, &phi0).unwrap();
        let a = g.laplacian.to_dense();
        let mut cur = DVector::from_row_slice(&phi0);
        for k in 0..g.age.steps() {
            let m = DMatrix::identity(5, 5)
                + (a.clone() + DMatrix::from_diagonal(&DVector::from_row_slice(h.row(k + 1)))) * g.da();
            cur = m.try_inverse().unwrap() * cur;
            for i in 0..5 {
                assert!((w.row(k + 1)[i] - cur[i]).abs() < 1e-13);
            }
        }
    }

    #[test]
    fn strongly_negative_potential_substeps() {
        let g = small();
        let h = PotentialField::constant(&g, -200.0);
        let w = propagate_linear(&g, &h, g.phi1()).unwrap();
        assert!(w.min() > 0.0);
        let s = (2.0 * g.da() * 200.0f64).ceil();
        let q = (1.0 + g.da() / s * (g.lambda1() - 200.0)).recip().powf(s);
        assert!((w.row(1)[2] / g.phi1()[2] - q).abs() < 1e-12 * q);
    }

    #[test]
    fn substep_limit_is_reported() {
        let g = small();
        let h = PotentialField::constant(&g, -1e7);
        assert!(matches!(
            propagate_linear(&g, &h, g.phi1()),
            Err(Error::SubstepLimit { .. })
        ));
    }

    #[test]
    fn logistic_rejects_negative_data() {
        let g = small();
        assert!(propagate_logistic(&g, &[1.0, -0.1, 0.0, 0.0, 0.0], 1.0).is_err());
    }

    #[test]
    fn logistic_step_solves_implicit_equation() {
        let g = small();
        let u = propagate_logistic(&g, &[5.0, 8.0, 10.0, 8.0, 5.0], 2.0).unwrap();
        let da = g.da();
        for k in 0..g.age.steps() {
            let x = u.row(k + 1);
            let ax = g.laplacian.apply(x);
            for i in 0..5 {
                let r = x[i] + da * (ax[i] + 2.0 * x[i] * x[i]) - u.row(k)[i];
                assert!(r.abs() < 1e-12);
            }
        }
        assert!(u.min() >= 0.0);
    }

    #[test]
    fn coupled_reduces_to_logistic_without_predator() {
        let g = small();
        let p = ModelParams::default();
        let phi = [2.0, 4.0, 5.0, 4.0, 2.0];
        let (u, v) = propagate_coupled(&g, &p, &phi, &[0.0; 5]).unwrap();
        let w = propagate_logistic(&g, &phi, p.alpha1).unwrap();
        assert!(u.max_abs_diff(&w) < 1e-12);
        assert_eq!(v.sup_norm(), 0.0);
    }
}
