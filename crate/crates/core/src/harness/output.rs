//! Deterministic CSV/JSON emission: 17 significant digits, `\n` endings,
//! fixed column order.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Serialize, Serializer};
use serde_json::value::RawValue;

use crate::bifurcate::Branch;
use crate::evolve::AgeSpaceField;

use super::HarnessError;

pub const BRANCH_HEADER: &str = "param,sup_u,sup_v,l2_u,l2_v,residual,termination";
pub const SEMITRIVIAL_HEADER: &str = "param,status,trace_sup,sup,l2,newton_residual,consistency";

/// `x` with 17 significant digits; non-finite values print as `nan`,
/// `inf` or `-inf`.
pub fn fmt_num(x: f64) -> String {
    if x.is_finite() {
        format!("{x:.16e}")
    } else if x.is_nan() {
        "nan".into()
    } else if x > 0.0 {
        "inf".into()
    } else {
        "-inf".into()
    }
}

/// JSON number with 17 significant digits; non-finite values become
/// `null`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Num(pub f64);

impl Serialize for Num {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        if !self.0.is_finite() {
            return s.serialize_none();
        }
        let raw = RawValue::from_string(fmt_num(self.0)).map_err(serde::ser::Error::custom)?;
        raw.serialize(s)
    }
}

pub fn branch_csv(branch: &Branch) -> String {
    let mut out = String::from(BRANCH_HEADER);
    out.push('\n');
    let term = branch.termination.label();
    for p in &branch.points {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{term}",
            fmt_num(p.param),
            fmt_num(p.sup_u),
            fmt_num(p.sup_v),
            fmt_num(p.l2_u),
            fmt_num(p.l2_v),
            fmt_num(p.residual)
        );
    }
    out
}

/// Age rows by space columns.
pub fn field_csv(field: &AgeSpaceField) -> String {
    let mut out = String::new();
    for k in 0..field.rows() {
        let row: Vec<String> = field.row(k).iter().map(|v| fmt_num(*v)).collect();
        out.push_str(&row.join(","));
        out.push('\n');
    }
    out
}

pub fn to_json<T: Serialize>(value: &T) -> Result<String, HarnessError> {
    let mut s = serde_json::to_string_pretty(value).map_err(|e| HarnessError::Output(e.to_string()))?;
    s.push('\n');
    Ok(s)
}

/// Writes `contents` to `dir/name`, creating `dir` as needed.
pub fn write_file(dir: &Path, name: &str, contents: &str) -> Result<PathBuf, HarnessError> {
    fs::create_dir_all(dir).map_err(|e| HarnessError::Io {
        path: dir.to_path_buf(),
        source: e,
    })?;
    let path = dir.join(name);
    fs::write(&path, contents).map_err(|e| HarnessError::Io {
        path: path.clone(),
        source: e,
    })?;
    Ok(path)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn numbers_carry_seventeen_digits() {
        assert_eq!(fmt_num(0.1), "1.0000000000000001e-1");
        assert_eq!(fmt_num(-2.0), "-2.0000000000000000e0");
        assert_eq!(fmt_num(f64::NAN), "nan");
        let parsed: f64 = fmt_num(std::f64::consts::PI).parse().unwrap();
        assert_eq!(parsed, std::f64::consts::PI);
    }

    #[test]
    fn json_numbers_round_trip_and_null_non_finite() {
        let s = serde_json::to_string(&[Num(1.5), Num(f64::INFINITY)]).unwrap();
        assert_eq!(s, "[1.5000000000000000e0,null]");
        let back: Vec<Option<f64>> = serde_json::from_str(&s).unwrap();
        assert_eq!(back, vec![Some(1.5), None]);
    }
}
