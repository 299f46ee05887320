//! Verification harness: every asymptotic statement becomes a desk-scale
//! check against a target within a tolerance.

pub mod dims;
pub mod identities;
pub mod longtime;
pub mod simulation;
pub mod suite;

use std::io::Write;
use std::path::Path;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::jsonio;

pub use dims::{excursion_short_time, level_set_dimension, resolution_window, short_time_exponent, ShortTime};
pub use identities::{identity_suite, IdentityBudget};
pub use longtime::{longtime_checks, LongtimeSetup};
pub use suite::{run_theorem_suite, Group, SuiteConfig};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub tag: String,
    pub estimate: f64,
    pub target: f64,
    pub tol: f64,
    pub pass: bool,
    pub runtime_s: f64,
}

impl Check {
    /// `|estimate − target| ≤ tol`.
    pub fn close(name: impl Into<String>, tag: &str, estimate: f64, target: f64, tol: f64) -> Self {
        Check {
            name: name.into(),
            tag: tag.to_string(),
            estimate,
            target,
            tol,
            pass: (estimate - target).abs() <= tol,
            runtime_s: 0.0,
        }
    }

    /// `|estimate/target − 1| ≤ tol`.
    pub fn relative(name: impl Into<String>, tag: &str, estimate: f64, target: f64, tol: f64) -> Self {
        let mut c = Self::close(name, tag, estimate, target, tol);
        c.pass = (estimate / target - 1.0).abs() <= tol;
        c
    }

    /// `estimate ≤ target` (the tolerance column is reported as zero).
    pub fn at_most(name: impl Into<String>, tag: &str, estimate: f64, target: f64) -> Self {
        let mut c = Self::close(name, tag, estimate, target, 0.0);
        c.pass = estimate <= target;
        c
    }

    /// A boolean outcome recorded as 1/0.
    pub fn holds(name: impl Into<String>, tag: &str, ok: bool) -> Self {
        Self::close(name, tag, if ok { 1.0 } else { 0.0 }, 1.0, 0.0)
    }

    /// A step that raised an error instead of producing an estimate.
    pub fn failed(name: impl Into<String>, tag: &str, err: &Error) -> Self {
        let mut c = Self::close(format!("{} [error: {err}]", name.into()), tag, f64::NAN, f64::NAN, 0.0);
        c.pass = false;
        c
    }

    pub fn timed(mut self, start: Instant) -> Self {
        self.runtime_s = start.elapsed().as_secs_f64();
        self
    }
}

/// A named (x, y) series for plotting.
#[derive(Debug, Clone, PartialEq)]
pub struct Series {
    pub name: String,
    pub points: Vec<(f64, f64)>,
}

#[derive(Debug, Clone, Default)]
pub struct Report {
    pub config: serde_json::Value,
    pub fingerprint: String,
    pub checks: Vec<Check>,
    pub series: Vec<Series>,
}

#[derive(Serialize)]
struct ReportFile<'a> {
    config: &'a serde_json::Value,
    fingerprint: &'a str,
    checks: &'a [Check],
}

impl Report {
    pub fn all_pass(&self) -> bool {
        self.checks.iter().all(|c| c.pass)
    }

    pub fn extend(&mut self, checks: impl IntoIterator<Item = Check>) {
        self.checks.extend(checks);
    }

    pub fn to_json(&self) -> Result<String> {
        jsonio::to_string(&ReportFile {
            config: &self.config,
            fingerprint: &self.fingerprint,
            checks: &self.checks,
        })
    }

    /// Writes `report.json` at `path` and one TSV per series next to it,
    /// named `<stem>.<series>.tsv`.
    pub fn write(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json()?)?;
        let stem = path.file_stem().and_then(|s| s.to_str()).unwrap_or("report");
        let dir = path.parent().unwrap_or_else(|| Path::new("."));
        for s in &self.series {
            let name: String = s.name.chars().map(|c| if c.is_alphanumeric() || c == '.' || c == '-' { c } else { '_' }).collect();
            let mut f = std::fs::File::create(dir.join(format!("{stem}.{name}.tsv")))?;
            write_tsv(s, &mut f)?;
        }
        Ok(())
    }
}

pub fn write_tsv<W: Write>(s: &Series, out: &mut W) -> Result<()> {
    writeln!(out, "# {}", s.name)?;
    writeln!(out, "x\ty")?;
    for (x, y) in &s.points {
        writeln!(out, "{x:.16e}\t{y:.16e}")?;
    }
    Ok(())
}

/// Run `f`, stamping the runtime onto every check it returns, and turn an
/// error into a single failed check.
pub fn timed_checks(name: &str, tag: &str, f: impl FnOnce() -> Result<Vec<Check>>) -> Vec<Check> {
    let start = Instant::now();
    match f() {
        Ok(checks) => {
            let dt = start.elapsed().as_secs_f64();
            checks
                .into_iter()
                .map(|mut c| {
                    c.runtime_s = dt;
                    c
                })
                .collect()
        }
        Err(e) => vec![Check::failed(name, tag, &e).timed(start)],
    }
}
