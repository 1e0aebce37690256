//! Run reports: line-delimited JSON records, flat CSV and markdown.

use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::scenario::ScenarioConfig;
use crate::error::{GeometryError, Result};
use crate::obstruction::NegativePlaneCertificate;

pub const TOOL_VERSION: &str = concat!(env!("CARGO_PKG_NAME"), " ", env!("CARGO_PKG_VERSION"));

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Status {
    Pass,
    Fail,
    Info,
}

impl Status {
    pub fn as_str(self) -> &'static str {
        match self {
            Status::Pass => "pass",
            Status::Fail => "fail",
            Status::Info => "info",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckRecord {
    pub name: String,
    pub status: Status,
    pub value: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tolerance: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub witness: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub detail: Option<String>,
}

impl CheckRecord {
    /// `value <= tolerance` passes.
    pub fn bound(name: impl Into<String>, value: f64, tolerance: f64) -> Self {
        let status = if value <= tolerance { Status::Pass } else { Status::Fail };
        Self { name: name.into(), status, value, tolerance: Some(tolerance), witness: None, detail: None }
    }

    pub fn info(name: impl Into<String>, value: f64) -> Self {
        Self { name: name.into(), status: Status::Info, value, tolerance: None, witness: None, detail: None }
    }

    pub fn with_witness(mut self, w: Vec<f64>) -> Self {
        if !w.is_empty() {
            self.witness = Some(w);
        }
        self
    }

    pub fn with_detail(mut self, d: impl Into<String>) -> Self {
        self.detail = Some(d.into());
        self
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurvatureTable {
    pub count: usize,
    pub min: f64,
    pub max: f64,
    pub mean: f64,
    /// `(q, value)` pairs.
    pub quantiles: Vec<(f64, f64)>,
    pub worst_point: Vec<f64>,
    pub worst_plane: [Vec<f64>; 2],
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunReport {
    pub scenario: String,
    pub command: String,
    pub tool_version: String,
    pub config: ScenarioConfig,
    pub verdict: Option<String>,
    pub exit_code: i32,
    pub wall_clock_ms: u64,
    pub checks: Vec<CheckRecord>,
    pub certificates: Vec<NegativePlaneCertificate>,
    pub curvature: Option<CurvatureTable>,
}

impl RunReport {
    pub fn new(config: &ScenarioConfig, command: &str) -> Self {
        Self {
            scenario: config.name.clone(),
            command: command.into(),
            tool_version: TOOL_VERSION.into(),
            config: config.clone(),
            verdict: None,
            exit_code: 0,
            wall_clock_ms: 0,
            checks: Vec::new(),
            certificates: Vec::new(),
            curvature: None,
        }
    }

    pub fn all_pass(&self) -> bool {
        self.checks.iter().all(|c| c.status != Status::Fail)
    }

    pub fn check(&self, name: &str) -> Option<&CheckRecord> {
        self.checks.iter().find(|c| c.name == name)
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct RunHeader {
    scenario: String,
    command: String,
    tool_version: String,
    config: ScenarioConfig,
    verdict: Option<String>,
    exit_code: i32,
    wall_clock_ms: u64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "record", rename_all = "snake_case")]
enum Record {
    Run(RunHeader),
    Check {
        scenario: String,
        #[serde(flatten)]
        check: CheckRecord,
    },
    Certificate {
        scenario: String,
        #[serde(flatten)]
        certificate: NegativePlaneCertificate,
    },
    Curvature {
        scenario: String,
        #[serde(flatten)]
        table: CurvatureTable,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Format {
    Json,
    Csv,
    Md,
}

impl std::str::FromStr for Format {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "json" => Ok(Format::Json),
            "csv" => Ok(Format::Csv),
            "md" => Ok(Format::Md),
            other => Err(format!("unknown format `{other}` (expected json, csv or md)")),
        }
    }
}

fn io_error(e: impl std::fmt::Display) -> GeometryError {
    GeometryError::Config(e.to_string())
}

pub fn to_jsonl(report: &RunReport) -> String {
    let mut records = vec![Record::Run(RunHeader {
        scenario: report.scenario.clone(),
        command: report.command.clone(),
        tool_version: report.tool_version.clone(),
        config: report.config.clone(),
        verdict: report.verdict.clone(),
        exit_code: report.exit_code,
        wall_clock_ms: report.wall_clock_ms,
    })];
    for c in &report.checks {
        records.push(Record::Check { scenario: report.scenario.clone(), check: c.clone() });
    }
    for c in &report.certificates {
        records.push(Record::Certificate { scenario: report.scenario.clone(), certificate: c.clone() });
    }
    if let Some(t) = &report.curvature {
        records.push(Record::Curvature { scenario: report.scenario.clone(), table: t.clone() });
    }
    let mut out = String::new();
    for r in records {
        out.push_str(&serde_json::to_string(&r).expect("records serialize"));
        out.push('\n');
    }
    out
}

/// Parses the records of one run file. Errors name the file, the line and
/// the offending field.
pub fn parse_jsonl(text: &str, source: &str) -> Result<Vec<RunReport>> {
    let mut runs: Vec<RunReport> = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let record: Record = serde_json::from_str(line)
            .map_err(|e| GeometryError::Config(format!("{source}:{}: {e}", i + 1)))?;
        let current = |runs: &mut Vec<RunReport>| -> Result<usize> {
            if runs.is_empty() {
                return Err(GeometryError::Config(format!("{source}:{}: record before the `run` header", i + 1)));
            }
            Ok(runs.len() - 1)
        };
        match record {
            Record::Run(h) => runs.push(RunReport {
                scenario: h.scenario,
                command: h.command,
                tool_version: h.tool_version,
                config: h.config,
                verdict: h.verdict,
                exit_code: h.exit_code,
                wall_clock_ms: h.wall_clock_ms,
                checks: Vec::new(),
                certificates: Vec::new(),
                curvature: None,
            }),
            Record::Check { check, .. } => {
                let k = current(&mut runs)?;
                runs[k].checks.push(check);
            }
            Record::Certificate { certificate, .. } => {
                let k = current(&mut runs)?;
                runs[k].certificates.push(certificate);
            }
            Record::Curvature { table, .. } => {
                let k = current(&mut runs)?;
                runs[k].curvature = Some(table);
            }
        }
    }
    if runs.is_empty() {
        return Err(GeometryError::Config(format!("{source}: no `run` record found")));
    }
    Ok(runs)
}

pub fn to_csv(reports: &[RunReport]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["scenario", "command", "record", "name", "status", "value", "tolerance", "detail"]).map_err(io_error)?;
    for r in reports {
        let verdict = r.verdict.clone().unwrap_or_default();
        w.write_record([&r.scenario, &r.command, "run", "exit_code", &verdict, &r.exit_code.to_string(), "", ""])
            .map_err(io_error)?;
        for c in &r.checks {
            w.write_record([
                r.scenario.as_str(),
                &r.command,
                "check",
                &c.name,
                c.status.as_str(),
                &c.value.to_string(),
                &c.tolerance.map(|t| t.to_string()).unwrap_or_default(),
                c.detail.as_deref().unwrap_or(""),
            ])
            .map_err(io_error)?;
        }
        for (k, c) in r.certificates.iter().enumerate() {
            w.write_record([
                r.scenario.as_str(),
                &r.command,
                "certificate",
                &format!("certificate_{k}"),
                "info",
                &c.sec_value.to_string(),
                "",
                &format!("t={} predicted={}", c.t, c.predicted),
            ])
            .map_err(io_error)?;
        }
        if let Some(t) = &r.curvature {
            for (name, v) in [("min", t.min), ("max", t.max), ("mean", t.mean)]
                .into_iter()
                .map(|(n, v)| (n.to_string(), v))
                .chain(t.quantiles.iter().map(|(q, v)| (format!("q{q}"), *v)))
            {
                w.write_record([r.scenario.as_str(), &r.command, "curvature", &name, "info", &v.to_string(), "", ""])
                    .map_err(io_error)?;
            }
        }
    }
    String::from_utf8(w.into_inner().map_err(io_error)?).map_err(io_error)
}

fn fmt_value(v: f64) -> String {
    if v == 0.0 || (1e-3..1e4).contains(&v.abs()) {
        format!("{v:.6}")
    } else {
        format!("{v:.3e}")
    }
}

pub fn to_markdown(reports: &[RunReport]) -> String {
    let mut out = String::new();
    out.push_str("| scenario | command | verdict | exit |\n|---|---|---|---|\n");
    for r in reports {
        out.push_str(&format!(
            "| {} | {} | {} | {} |\n",
            r.scenario,
            r.command,
            r.verdict.as_deref().unwrap_or("-"),
            r.exit_code
        ));
    }
    for r in reports {
        out.push_str(&format!("\n## {} ({})\n\n", r.scenario, r.command));
        out.push_str(&format!("bundle `{}`, base map `{}`, seed {}, samples {}\n\n", r.config.bundle, r.config.base_map, r.config.seed, r.config.samples));
        if !r.checks.is_empty() {
            out.push_str("| check | status | value | tolerance |\n|---|---|---|---|\n");
            for c in &r.checks {
                out.push_str(&format!(
                    "| {} | {} | {} | {} |\n",
                    c.name,
                    c.status.as_str(),
                    fmt_value(c.value),
                    c.tolerance.map(fmt_value).unwrap_or_else(|| "-".into())
                ));
            }
        }
        for (k, c) in r.certificates.iter().enumerate() {
            out.push_str(&format!(
                "\ncertificate {k}: sec = {}, predicted = {}, t = {}\n",
                fmt_value(c.sec_value),
                fmt_value(c.predicted),
                fmt_value(c.t)
            ));
        }
        if let Some(t) = &r.curvature {
            out.push_str(&format!(
                "\ncurvature over {} planes: min {}, max {}, mean {}\n",
                t.count,
                fmt_value(t.min),
                fmt_value(t.max),
                fmt_value(t.mean)
            ));
        }
    }
    out
}

pub fn render(reports: &[RunReport], format: Format) -> Result<String> {
    match format {
        Format::Json => Ok(reports.iter().map(to_jsonl).collect()),
        Format::Csv => to_csv(reports),
        Format::Md => Ok(to_markdown(reports)),
    }
}

/// Reads run files and orders them by scenario name (stable within a name).
pub fn merge_runs(paths: &[impl AsRef<Path>]) -> Result<Vec<RunReport>> {
    let mut runs = Vec::new();
    for p in paths {
        let p = p.as_ref();
        let text = std::fs::read_to_string(p).map_err(|e| GeometryError::Config(format!("cannot read {}: {e}", p.display())))?;
        runs.extend(parse_jsonl(&text, &p.display().to_string())?);
    }
    runs.sort_by(|a, b| a.scenario.cmp(&b.scenario));
    Ok(runs)
}

pub fn write_output(text: &str, out: Option<&Path>) -> Result<()> {
    match out {
        Some(path) => std::fs::write(path, text).map_err(|e| GeometryError::Config(format!("cannot write {}: {e}", path.display()))),
        None => {
            let mut stdout = std::io::stdout().lock();
            stdout.write_all(text.as_bytes()).map_err(io_error)
        }
    }
}
