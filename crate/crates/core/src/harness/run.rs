//! Scenario runners behind the CLI subcommands.

use std::f64::consts::PI;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::Serialize;

use crate::bifurcate::{continue_branch, estimate_limits, eta0, eta1, xi0, xi1, Branch, BranchKind, Located, TrendRow};
use crate::birthop::Species;
use crate::error::Result as CoreResult;
use crate::model::Model;
use crate::steady::{solve_species, SemiTrivialOutcome};

use super::config::{Format, Mode, ScenarioConfig};
use super::output::{branch_csv, field_csv, fmt_num, to_json, write_file, Num, BRANCH_HEADER, SEMITRIVIAL_HEADER};
use super::report::RunReport;
use super::verify::verify_suite;
use super::HarnessError;

#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    /// Overrides `output.directory`.
    pub out: Option<PathBuf>,
    pub parallel: bool,
    /// Overrides `verify.seed`.
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, Default)]
pub struct RunOutcome {
    pub files: Vec<PathBuf>,
    pub report: Option<RunReport>,
    /// Human-readable summary for the terminal.
    pub summary: String,
}

impl RunOutcome {
    /// 0 unless a verification report has failures (3).
    pub fn exit_code(&self) -> i32 {
        match &self.report {
            Some(r) if !r.all_pass() => 3,
            _ => 0,
        }
    }
}

fn par_map<T: Sync, R: Send>(items: &[T], parallel: bool, f: impl Fn(&T) -> R + Sync + Send) -> Vec<R> {
    if parallel {
        items.par_iter().map(f).collect()
    } else {
        items.iter().map(f).collect()
    }
}

struct Writer<'a> {
    dir: &'a Path,
    config: &'a ScenarioConfig,
    files: Vec<PathBuf>,
}

impl Writer<'_> {
    fn put(&mut self, format: Format, name: &str, contents: &str) -> Result<(), HarnessError> {
        if self.config.output.wants(format) {
            self.files.push(write_file(self.dir, name, contents)?);
        }
        Ok(())
    }
}

/// Dispatches one subcommand. A configured `run.mode` must match it.
/// Solver failures leave a `status.json` marking the outputs partial.
pub fn run_mode(mode: Mode, config: &ScenarioConfig, opts: &RunOptions) -> Result<RunOutcome, HarnessError> {
    if let Some(m) = config.run.mode {
        if m != mode {
            return Err(HarnessError::Validation(format!(
                "config run.mode is {m} but the command is {mode}"
            )));
        }
    }
    let dir = opts.out.clone().unwrap_or_else(|| config.output.directory.clone());
    let result = match mode {
        Mode::Eigen => run_eigen(config, &dir),
        Mode::Semitrivial => run_semitrivial(config, &dir, opts.parallel),
        Mode::Bifpoints => run_bifpoints(config, &dir, opts.parallel),
        Mode::Continue => run_continue(config, &dir, opts.parallel),
        Mode::Diagram => run_diagram(config, &dir, opts.parallel),
        Mode::Verify => run_verify(config, &dir, opts),
    };
    if let Err(HarnessError::Solver(e)) = &result {
        let status = format!(
            "{{\n  \"complete\": false,\n  \"error\": {}\n}}\n",
            serde_json::Value::from(e.to_string())
        );
        let _ = write_file(&dir, "status.json", &status);
    }
    result
}

#[derive(Debug, Serialize)]
struct EigenSummary {
    n_interior: usize,
    length: Num,
    spacing: Num,
    lambda1: Num,
    closed_form: Num,
    continuum: Num,
    residual: Num,
    iterations: usize,
}

pub fn run_eigen(config: &ScenarioConfig, dir: &Path) -> Result<RunOutcome, HarnessError> {
    let g = config.build_grids()?;
    let l = g.space.length();
    let s = EigenSummary {
        n_interior: g.n(),
        length: Num(l),
        spacing: Num(g.space.spacing()),
        lambda1: Num(g.lambda1()),
        closed_form: Num(g.laplacian.closed_form_eigenvalue(1)),
        continuum: Num((PI / l).powi(2)),
        residual: Num(g.spectral.residual),
        iterations: g.spectral.iterations,
    };
    let mut w = Writer {
        dir,
        config,
        files: Vec::new(),
    };
    w.put(Format::Json, "eigen.json", &to_json(&s)?)?;
    let summary = format!(
        "lambda1 = {} (closed form {}, continuum {})",
        fmt_num(s.lambda1.0),
        fmt_num(s.closed_form.0),
        fmt_num(s.continuum.0)
    );
    Ok(RunOutcome {
        files: w.files,
        report: None,
        summary,
    })
}

fn semitrivial_table(
    model: &Model,
    species: Species,
    values: &[f64],
    parallel: bool,
) -> CoreResult<Vec<(f64, SemiTrivialOutcome)>> {
    par_map(values, parallel, |v| {
        solve_species(model, species, *v, None).map(|o| (*v, o))
    })
    .into_iter()
    .collect()
}

fn semitrivial_csv(model: &Model, rows: &[(f64, SemiTrivialOutcome)]) -> String {
    let mut out = String::from(SEMITRIVIAL_HEADER);
    out.push('\n');
    for (param, o) in rows {
        let _ = match o {
            SemiTrivialOutcome::Trivial { .. } => {
                writeln!(out, "{},trivial,{z},{z},{z},{z},{z}", fmt_num(*param), z = fmt_num(0.0))
            }
            SemiTrivialOutcome::NonTrivial(s) => writeln!(
                out,
                "{},positive,{},{},{},{},{}",
                fmt_num(*param),
                fmt_num(s.trace_sup()),
                fmt_num(s.sup_norm()),
                fmt_num(s.field.l2_norm(&model.grids)),
                fmt_num(s.newton_residual),
                fmt_num(s.consistency)
            ),
        };
    }
    out
}

fn write_semitrivial(w: &mut Writer, model: &Model, parallel: bool) -> Result<String, HarnessError> {
    let values = &w.config.run.semitrivial_values;
    let mut summary = String::new();
    for species in [Species::Prey, Species::Predator] {
        let rows = semitrivial_table(model, species, values, parallel)?;
        w.put(
            Format::Csv,
            &format!("semitrivial_{species}.csv"),
            &semitrivial_csv(model, &rows),
        )?;
        if w.config.output.fields {
            for (param, o) in &rows {
                if let SemiTrivialOutcome::NonTrivial(s) = o {
                    w.put(
                        Format::Csv,
                        &format!("field_{species}_{param}.csv"),
                        &field_csv(&s.field),
                    )?;
                }
            }
        }
        let positive = rows.iter().filter(|(_, o)| !o.is_trivial()).count();
        let _ = writeln!(summary, "{species}: {} intensities, {positive} positive", rows.len());
    }
    Ok(summary)
}

pub fn run_semitrivial(config: &ScenarioConfig, dir: &Path, parallel: bool) -> Result<RunOutcome, HarnessError> {
    let model = config.build_model()?;
    let mut w = Writer {
        dir,
        config,
        files: Vec::new(),
    };
    let summary = write_semitrivial(&mut w, &model, parallel)?;
    Ok(RunOutcome {
        files: w.files,
        report: None,
        summary,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct PointEntry {
    /// The fixed intensity.
    pub fixed: Num,
    /// `null` when the point was not found in the searched range.
    pub value: Option<Num>,
    pub spectral_residual: Option<Num>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub searched_to: Option<Num>,
}

impl PointEntry {
    fn found(at: f64, value: f64, residual: f64) -> Self {
        PointEntry {
            fixed: Num(at),
            value: Some(Num(value)),
            spectral_residual: Some(Num(residual)),
            searched_to: None,
        }
    }

    fn located(at: f64, l: Located) -> Self {
        match l {
            Located::Found(p) => Self::found(at, p.value, p.spectral_residual),
            Located::NotFound { searched_to, .. } => PointEntry {
                fixed: Num(at),
                value: None,
                spectral_residual: None,
                searched_to: Some(Num(searched_to)),
            },
        }
    }
}

#[derive(Debug, Clone, Serialize)]
struct TrendEntry {
    param: Num,
    eta0: Num,
    xi0: Num,
}

/// Contents of `bifpoints.json`. `xi0`/`xi1` are indexed by `η > 1`,
/// `eta0` by `ξ > 1` and `eta1` by `ξ < 1`.
#[derive(Debug, Clone, Serialize)]
pub struct BifPointsSummary {
    pub xi0: Vec<PointEntry>,
    pub xi1: Vec<PointEntry>,
    pub eta0: Vec<PointEntry>,
    pub eta1: Vec<PointEntry>,
    /// Lower bound for `N`, `η₀(xi_max)`.
    pub n_lower: Option<Num>,
    /// Upper bound for `δ`, `ξ₀(eta_max)`.
    pub delta_upper: Option<Num>,
    trend: Vec<TrendEntry>,
}

fn bifpoints(config: &ScenarioConfig, model: &Model, parallel: bool) -> CoreResult<BifPointsSummary> {
    let run = &config.run;
    let etas: Vec<f64> = run.eta_values.iter().copied().filter(|e| *e > 1.0).collect();
    let xis_up: Vec<f64> = run.xi_values.iter().copied().filter(|x| *x > 1.0).collect();
    let xis_down: Vec<f64> = run.xi_values.iter().copied().filter(|x| *x < 1.0).collect();
    let collect = |v: Vec<CoreResult<PointEntry>>| v.into_iter().collect::<CoreResult<Vec<_>>>();
    let xi0s = collect(par_map(&etas, parallel, |e| {
        xi0(model, *e).map(|p| PointEntry::found(*e, p.value, p.spectral_residual))
    }))?;
    let xi1s = collect(par_map(&etas, parallel, |e| {
        xi1(model, *e, run.xi_max).map(|l| PointEntry::located(*e, l))
    }))?;
    let eta0s = collect(par_map(&xis_up, parallel, |x| {
        eta0(model, *x).map(|p| PointEntry::found(*x, p.value, p.spectral_residual))
    }))?;
    let eta1s = collect(par_map(&xis_down, parallel, |x| {
        eta1(model, *x, run.eta_max).map(|l| PointEntry::located(*x, l))
    }))?;
    let empty = run.eta_values.is_empty() && run.xi_values.is_empty();
    let (n_lower, delta_upper, trend) = if run.limit_samples >= 2 && !empty {
        let lim = estimate_limits(model, run.eta_max, run.xi_max, run.limit_samples)?;
        let trend = lim
            .trend
            .iter()
            .map(|t: &TrendRow| TrendEntry {
                param: Num(t.param),
                eta0: Num(t.eta0),
                xi0: Num(t.xi0),
            })
            .collect();
        (Some(Num(lim.n_lower)), Some(Num(lim.delta_upper)), trend)
    } else {
        (None, None, Vec::new())
    };
    Ok(BifPointsSummary {
        xi0: xi0s,
        xi1: xi1s,
        eta0: eta0s,
        eta1: eta1s,
        n_lower,
        delta_upper,
        trend,
    })
}

fn bifpoints_summary(s: &BifPointsSummary) -> String {
    let list = |v: &[PointEntry]| {
        v.iter()
            .map(|p| match p.value {
                Some(x) => format!("{}:{:.6}", p.fixed.0, x.0),
                None => format!("{}:not found", p.fixed.0),
            })
            .collect::<Vec<_>>()
            .join(" ")
    };
    let mut out = String::new();
    let _ = writeln!(out, "xi0  {}", list(&s.xi0));
    let _ = writeln!(out, "xi1  {}", list(&s.xi1));
    let _ = writeln!(out, "eta0 {}", list(&s.eta0));
    let _ = writeln!(out, "eta1 {}", list(&s.eta1));
    if let (Some(n), Some(d)) = (s.n_lower, s.delta_upper) {
        let _ = writeln!(out, "N >= {:.6}, delta <= {:.6}", n.0, d.0);
    }
    out
}

pub fn run_bifpoints(config: &ScenarioConfig, dir: &Path, parallel: bool) -> Result<RunOutcome, HarnessError> {
    let model = config.build_model()?;
    let s = bifpoints(config, &model, parallel)?;
    let mut w = Writer {
        dir,
        config,
        files: Vec::new(),
    };
    w.put(Format::Json, "bifpoints.json", &to_json(&s)?)?;
    Ok(RunOutcome {
        files: w.files,
        report: None,
        summary: bifpoints_summary(&s),
    })
}

#[derive(Debug, Serialize)]
struct BranchEntry {
    kind: BranchKind,
    fixed: Num,
    anchor: Num,
    termination: &'static str,
    #[serde(skip_serializing_if = "Option::is_none")]
    xi_hat: Option<Num>,
    #[serde(skip_serializing_if = "Option::is_none")]
    reason: Option<String>,
    /// Data rows of this branch in `branch_<kind>.csv`, header excluded.
    first_row: usize,
    rows: usize,
}

/// Fixed parameters continued for a branch kind.
fn branch_params(config: &ScenarioConfig, kind: BranchKind) -> Vec<f64> {
    let run = &config.run;
    match kind {
        BranchKind::B3 => run.eta_values.iter().copied().filter(|e| *e > 1.0).collect(),
        BranchKind::S3 => run.xi_values.iter().copied().filter(|x| *x > 1.0).collect(),
        BranchKind::S4 => run.xi_values.iter().copied().filter(|x| *x < 1.0).collect(),
    }
}

fn write_branches(w: &mut Writer, model: &Model, parallel: bool) -> Result<String, HarnessError> {
    let config = w.config;
    let mut entries = Vec::new();
    let mut summary = String::new();
    for &kind in &config.run.branches {
        let params = branch_params(config, kind);
        let branches: Vec<CoreResult<Branch>> = par_map(&params, parallel, |p| {
            continue_branch(model, kind, *p, &config.run.continuation)
        });
        let branches: Vec<Branch> = branches.into_iter().collect::<CoreResult<_>>()?;
        let mut csv = String::from(BRANCH_HEADER);
        csv.push('\n');
        let mut row = 0;
        for b in &branches {
            csv.push_str(branch_csv(b).split_once('\n').map_or("", |(_, body)| body));
            let (xi_hat, reason) = match &b.termination {
                crate::bifurcate::Termination::JoinedB1 { xi_hat } => (Some(Num(*xi_hat)), None),
                crate::bifurcate::Termination::StepFailure { reason } => (None, Some(reason.clone())),
                _ => (None, None),
            };
            entries.push(BranchEntry {
                kind,
                fixed: Num(b.fixed),
                anchor: Num(b.anchor),
                termination: b.termination.label(),
                xi_hat,
                reason,
                first_row: row,
                rows: b.points.len(),
            });
            row += b.points.len();
            let _ = writeln!(
                summary,
                "{} at {}: anchor {:.6}, {} points, {}",
                kind.label(),
                b.fixed,
                b.anchor,
                b.points.len(),
                b.termination.label()
            );
        }
        if !branches.is_empty() {
            w.put(Format::Csv, &format!("branch_{}.csv", kind.label()), &csv)?;
        }
    }
    if !entries.is_empty() {
        w.put(Format::Json, "branches.json", &to_json(&entries)?)?;
    }
    Ok(summary)
}

pub fn run_continue(config: &ScenarioConfig, dir: &Path, parallel: bool) -> Result<RunOutcome, HarnessError> {
    let model = config.build_model()?;
    let mut w = Writer {
        dir,
        config,
        files: Vec::new(),
    };
    let summary = write_branches(&mut w, &model, parallel)?;
    Ok(RunOutcome {
        files: w.files,
        report: None,
        summary,
    })
}

/// Bifurcation points, coexistence branches and semi-trivial samples.
pub fn run_diagram(config: &ScenarioConfig, dir: &Path, parallel: bool) -> Result<RunOutcome, HarnessError> {
    let model = config.build_model()?;
    let mut w = Writer {
        dir,
        config,
        files: Vec::new(),
    };
    let points = bifpoints(config, &model, parallel)?;
    w.put(Format::Json, "bifpoints.json", &to_json(&points)?)?;
    let mut summary = bifpoints_summary(&points);
    summary.push_str(&write_branches(&mut w, &model, parallel)?);
    summary.push_str(&write_semitrivial(&mut w, &model, parallel)?);
    Ok(RunOutcome {
        files: w.files,
        report: None,
        summary,
    })
}

fn run_verify(config: &ScenarioConfig, dir: &Path, opts: &RunOptions) -> Result<RunOutcome, HarnessError> {
    let report = verify_suite(config, opts.seed, opts.parallel)?;
    let mut w = Writer {
        dir,
        config,
        files: Vec::new(),
    };
    w.put(Format::Json, "report.json", &to_json(&report)?)?;
    Ok(RunOutcome {
        files: w.files,
        summary: report.to_string(),
        report: Some(report),
    })
}
