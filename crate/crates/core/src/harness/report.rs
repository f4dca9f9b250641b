use std::fmt;

use serde::Serialize;

use super::config::ScenarioConfig;
use super::output::Num;

/// Outcome of one verification check. `claim` states the property in
/// words; `measured` and `tolerance` are in the units the check names.
#[derive(Debug, Clone, Serialize)]
pub struct CheckRecord {
    pub name: String,
    pub claim: String,
    pub pass: bool,
    pub measured: Num,
    pub tolerance: Num,
    #[serde(skip_serializing_if = "String::is_empty")]
    pub detail: String,
}

impl CheckRecord {
    /// Passes when `measured <= tolerance`.
    pub fn at_most(name: &str, claim: &str, measured: f64, tolerance: f64) -> Self {
        Self::new(name, claim, measured <= tolerance, measured, tolerance)
    }

    pub fn new(name: &str, claim: &str, pass: bool, measured: f64, tolerance: f64) -> Self {
        CheckRecord {
            name: name.into(),
            claim: claim.into(),
            pass,
            measured: Num(measured),
            tolerance: Num(tolerance),
            detail: String::new(),
        }
    }

    /// A check whose computation itself failed.
    pub fn errored(name: &str, claim: &str, err: impl fmt::Display) -> Self {
        let mut r = Self::new(name, claim, false, f64::NAN, f64::NAN);
        r.detail = format!("error: {err}");
        r
    }

    pub fn with_detail(mut self, detail: impl Into<String>) -> Self {
        self.detail = detail.into();
        self
    }
}

impl fmt::Display for CheckRecord {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{} {:<28} measured {:>10.3e} tol {:>10.3e}  {}",
            if self.pass { "PASS" } else { "FAIL" },
            self.name,
            self.measured.0,
            self.tolerance.0,
            self.claim
        )?;
        if !self.detail.is_empty() {
            write!(f, " [{}]", self.detail)?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct RunReport {
    pub records: Vec<CheckRecord>,
    pub elapsed_seconds: f64,
    /// Wall time of each check group, e.g. `("steady", 1.2)`.
    pub timings: Vec<(String, f64)>,
    pub config: ScenarioConfig,
}

impl RunReport {
    pub fn all_pass(&self) -> bool {
        self.records.iter().all(|r| r.pass)
    }

    pub fn failures(&self) -> impl Iterator<Item = &CheckRecord> {
        self.records.iter().filter(|r| !r.pass)
    }

    pub fn get(&self, name: &str) -> Option<&CheckRecord> {
        self.records.iter().find(|r| r.name == name)
    }
}

impl fmt::Display for RunReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for r in &self.records {
            writeln!(f, "{r}")?;
        }
        let failed = self.failures().count();
        write!(
            f,
            "{} checks, {} failed, {:.2} s",
            self.records.len(),
            failed,
            self.elapsed_seconds
        )
    }
}
