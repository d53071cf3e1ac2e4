//! Run reports and artifact emission: a JSON summary at the output root plus
//! plot-ready CSV/text artifacts, each written atomically and formatted so
//! identical inputs produce byte-identical files.

use std::path::{Path, PathBuf};

use affine_spectra_core::frames::FrameReport;
use affine_spectra_core::lattice::IntVector;
use anyhow::{Context, Result};
use serde::Serialize;
use serde_json::Value;

use crate::config::ProblemConfig;

/// Mathematical outcome of a command.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Verdict {
    /// The property checked holds (exit code 0).
    Pass,
    /// The property fails or an obstruction was found (exit code 1).
    Fail(String),
}

impl Verdict {
    pub fn is_pass(&self) -> bool {
        matches!(self, Verdict::Pass)
    }
}

/// Summary written to `report.json` at the output root.
#[derive(Serialize)]
pub struct RunReport {
    pub command: String,
    pub inputs: ProblemConfig,
    pub tolerance: f64,
    pub verdict: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub reason: Option<String>,
    pub details: Value,
    pub artifacts: Vec<String>,
    pub wall_time_ms: u128,
}

/// Writes `contents` to `path` via a temporary sibling and an atomic rename.
pub fn write_atomic(path: &Path, contents: &str) -> Result<()> {
    let dir = path.parent().unwrap_or_else(|| Path::new("."));
    std::fs::create_dir_all(dir)
        .with_context(|| format!("creating output directory {}", dir.display()))?;
    let tmp = path.with_extension("tmp");
    std::fs::write(&tmp, contents).with_context(|| format!("writing {}", tmp.display()))?;
    std::fs::rename(&tmp, path)
        .with_context(|| format!("moving {} into place", path.display()))?;
    Ok(())
}

/// Accumulates artifacts under one output directory and finalizes the report.
pub struct ArtifactSink {
    out_dir: PathBuf,
    written: Vec<String>,
}

impl ArtifactSink {
    pub fn new(out_dir: &Path) -> ArtifactSink {
        ArtifactSink { out_dir: out_dir.to_path_buf(), written: Vec::new() }
    }

    /// Writes one named artifact and records it for the report.
    pub fn write(&mut self, name: &str, contents: &str) -> Result<()> {
        write_atomic(&self.out_dir.join(name), contents)?;
        self.written.push(name.to_string());
        Ok(())
    }

    /// Writes `report.json` and returns the full report for printing.
    pub fn finish(
        self,
        command: &str,
        inputs: &ProblemConfig,
        tolerance: f64,
        verdict: &Verdict,
        details: Value,
        wall_time_ms: u128,
    ) -> Result<RunReport> {
        let report = RunReport {
            command: command.to_string(),
            inputs: inputs.clone(),
            tolerance,
            verdict: if verdict.is_pass() { "pass" } else { "fail" }.to_string(),
            reason: match verdict {
                Verdict::Pass => None,
                Verdict::Fail(reason) => Some(reason.clone()),
            },
            details,
            artifacts: self.written.clone(),
            wall_time_ms,
        };
        let json = serde_json::to_string_pretty(&report).context("serializing report")?;
        write_atomic(&self.out_dir.join("report.json"), &json)?;
        Ok(report)
    }
}

/// One float in the fixed artifact format: 17 significant decimal digits.
pub fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

/// CSV of exact integer vectors, one per row, columns `v1..vd`.
pub fn integer_vectors_csv(prefix: &str, rows: &[IntVector]) -> String {
    let d = rows.first().map(|v| v.dim()).unwrap_or(0);
    let mut out = String::new();
    let header: Vec<String> = (1..=d).map(|i| format!("{prefix}{i}")).collect();
    out.push_str(&header.join(","));
    out.push('\n');
    for v in rows {
        let coords: Vec<String> = v.coords.iter().map(|c| c.to_string()).collect();
        out.push_str(&coords.join(","));
        out.push('\n');
    }
    out
}

/// Frame report in the fixed structured-text layout.
pub fn frame_report_text(report: &FrameReport) -> String {
    let j: Vec<String> = report
        .j_set
        .iter()
        .map(|v| {
            let coords: Vec<String> = v.coords.iter().map(|c| c.to_string()).collect();
            format!("({})", coords.join(", "))
        })
        .collect();
    format!(
        "method {}\nn {}\nJ [{}]\nsigma2_min {}\nsigma2_max {}\nepsilon {}\n",
        report.method,
        report.level,
        j.join(", "),
        fmt_f64(report.sigma2_min),
        fmt_f64(report.sigma2_max),
        fmt_f64(report.epsilon),
    )
}
