//! JSON result records and their flat CSV view.

use std::fs;
use std::path::Path;

use fermi_ee::asymptotics::{ScalingFit, SweepRow, TheoryComparison};
use fermi_ee::geometry::{WidomCoefficient, WidomMethod};
use fermi_ee::RenyiOrder;
use serde::{Deserialize, Serialize};

use crate::config::RunConfig;
use crate::error::{config, CliError};

pub const SCHEMA_VERSION: &str = "fermi-ee.result/1";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultRecord {
    pub schema_version: String,
    pub command: String,
    pub seed: u64,
    #[serde(default)]
    pub self_test: bool,
    /// The parsed configuration with defaults filled in.
    pub config: Option<RunConfig>,
    /// The configuration file exactly as read.
    pub config_text: Option<String>,
    #[serde(default)]
    pub rows: Vec<EntropyRow>,
    #[serde(default)]
    pub fits: Vec<FitBlock>,
    pub j: Option<JBlock>,
    pub jcoeff: Option<JcoeffReport>,
    pub functional: Option<FunctionalReport>,
    pub validation: Option<ValidationReport>,
    #[serde(default)]
    pub warnings: Vec<String>,
}

impl ResultRecord {
    pub fn new(command: &str, cfg: Option<(&RunConfig, &str)>, seed: u64) -> Self {
        ResultRecord {
            schema_version: SCHEMA_VERSION.into(),
            command: command.into(),
            seed,
            self_test: false,
            config: cfg.map(|(c, _)| c.clone()),
            config_text: cfg.map(|(_, t)| t.to_string()),
            rows: Vec::new(),
            fits: Vec::new(),
            j: None,
            jcoeff: None,
            functional: None,
            validation: None,
            warnings: Vec::new(),
        }
    }

    /// Appends one row per order and keeps rows sorted by `(alpha, L)`.
    pub fn add_sweep_rows(&mut self, rows: &[SweepRow]) {
        for r in rows {
            for e in &r.entropies {
                self.rows.push(EntropyRow {
                    alpha: e.alpha,
                    l: r.l,
                    n: r.n,
                    s: e.s,
                    clamp_count: e.provenance.clamp_count,
                    max_violation: e.provenance.max_violation,
                    particle_number: r.particle_number,
                    route: serde_json::to_value(e.provenance.route)
                        .ok()
                        .and_then(|v| v.as_str().map(String::from))
                        .unwrap_or_default(),
                    rule: e.provenance.rule.clone(),
                    wall_time_s: r.wall_time_s,
                });
            }
        }
        self.sort_rows();
    }

    pub fn sort_rows(&mut self) {
        self.rows.sort_by(|a, b| a.alpha.value().total_cmp(&b.alpha.value()).then(a.l.total_cmp(&b.l)));
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("records serialize")
    }

    pub fn write_json(&self, path: &Path) -> Result<(), CliError> {
        let mut text = self.to_json();
        text.push('\n');
        fs::write(path, text).map_err(|e| CliError::Computation(format!("writing {}: {e}", path.display())))
    }

    pub fn write_csv(&self, path: &Path) -> Result<(), CliError> {
        let d = self.config.as_ref().map_or(1, RunConfig::dim);
        let io = |e: csv::Error| CliError::Computation(format!("writing {}: {e}", path.display()));
        let mut w = csv::Writer::from_path(path).map_err(io)?;
        w.write_record(CSV_COLUMNS).map_err(io)?;
        for r in &self.rows {
            let area = r.l.powi(d as i32 - 1);
            w.write_record([
                r.alpha.to_string(),
                fmt(r.l),
                r.n.to_string(),
                fmt(r.s),
                fmt(r.l.ln()),
                fmt(r.s / area),
                fmt(r.particle_number),
                r.clamp_count.to_string(),
                fmt(r.max_violation),
                r.route.clone(),
                fmt(r.wall_time_s),
            ])
            .map_err(io)?;
        }
        w.flush().map_err(|e| CliError::Computation(format!("writing {}: {e}", path.display())))
    }
}

pub const CSV_COLUMNS: [&str; 11] = [
    "alpha",
    "L",
    "n",
    "S",
    "ln_L",
    "S_over_area",
    "particle_number",
    "clamp_count",
    "max_violation",
    "route",
    "wall_time_s",
];

/// Shortest representation that reads back to the same `f64`.
fn fmt(x: f64) -> String {
    format!("{x:?}")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EntropyRow {
    pub alpha: RenyiOrder,
    #[serde(rename = "L")]
    pub l: f64,
    pub n: usize,
    #[serde(rename = "S")]
    pub s: f64,
    pub clamp_count: usize,
    pub max_violation: f64,
    pub particle_number: f64,
    pub route: String,
    pub rule: String,
    pub wall_time_s: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitBlock {
    pub alpha: RenyiOrder,
    pub a: f64,
    pub b: f64,
    pub stderr_a: f64,
    pub stderr_b: f64,
    pub theory: f64,
    pub rel_dev: f64,
    pub window: [f64; 2],
    pub points_used: usize,
    pub residual_norm: f64,
    pub condition_number: f64,
    pub terms: Vec<String>,
}

impl FitBlock {
    pub fn new(alpha: RenyiOrder, fit: &ScalingFit, cmp: &TheoryComparison) -> Self {
        FitBlock {
            alpha,
            a: fit.a,
            b: fit.b,
            stderr_a: fit.stderr_a,
            stderr_b: fit.stderr_b,
            theory: cmp.theory,
            rel_dev: cmp.rel_dev,
            window: fit.window,
            points_used: fit.points_used,
            residual_norm: fit.residual_norm,
            condition_number: fit.condition_number,
            terms: fit.terms.clone(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct JBlock {
    pub value: f64,
    pub method: WidomMethod,
    pub error_estimate: f64,
}

impl From<WidomCoefficient> for JBlock {
    fn from(w: WidomCoefficient) -> Self {
        JBlock { value: w.value, method: w.method, error_estimate: w.error_estimate }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JcoeffReport {
    pub estimates: Vec<JBlock>,
    /// Extra closed-form values not tied to a [`WidomMethod`].
    pub density_form: Option<f64>,
    pub checks: Vec<CrossCheck>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CrossCheck {
    pub name: String,
    pub value: f64,
    pub reference: f64,
    pub deviation: f64,
    pub tolerance: f64,
    pub passed: bool,
}

impl CrossCheck {
    /// Absolute deviation against `tolerance`.
    pub fn absolute(name: &str, value: f64, reference: f64, tolerance: f64) -> Self {
        let deviation = (value - reference).abs();
        CrossCheck { name: name.into(), value, reference, deviation, tolerance, passed: deviation <= tolerance }
    }

    pub fn relative(name: &str, value: f64, reference: f64, tolerance: f64) -> Self {
        let deviation = (value - reference).abs() / reference.abs();
        CrossCheck { name: name.into(), value, reference, deviation, tolerance, passed: deviation <= tolerance }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FunctionalEntry {
    pub alpha: RenyiOrder,
    pub numeric: f64,
    pub abs_error_estimate: f64,
    pub closed_form: f64,
    pub abs_dev: f64,
    /// Independent route through the dilogarithm, where it applies.
    pub via_dilog: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DilogLimit {
    pub y: f64,
    /// `Li₂(1 - y) + ½ ln² y`
    pub bracket: f64,
    pub limit: f64,
    pub abs_dev: f64,
    /// The bracket's known approach `-π²/6 + (ln y + 1)/y`.
    pub expected_at_y: f64,
    pub abs_dev_expected: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FunctionalReport {
    pub tol: f64,
    pub entries: Vec<FunctionalEntry>,
    /// `I(t ↦ t)`, which vanishes.
    pub linear_value: f64,
    pub dilog_limit: DilogLimit,
    pub checks: Vec<CrossCheck>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckOutcome {
    pub name: String,
    pub passed: bool,
    pub detail: String,
    pub seconds: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub checks: Vec<CheckOutcome>,
    pub injected_fault: Option<String>,
}

/// Reads partial sweep rows written one JSON object per line. Lines that do
/// not parse (a torn final write) are dropped.
pub fn read_partial_rows(path: &Path, fingerprint: &str) -> Result<Vec<SweepRow>, CliError> {
    let text = match fs::read_to_string(path) {
        Ok(t) => t,
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(Vec::new()),
        Err(e) => return Err(config(format!("reading {}: {e}", path.display()))),
    };
    let mut lines = text.lines();
    match lines.next() {
        Some(head) if head == fingerprint_line(fingerprint) => {}
        _ => return Ok(Vec::new()),
    }
    Ok(lines.filter_map(|l| serde_json::from_str(l).ok()).collect())
}

pub fn fingerprint_line(fingerprint: &str) -> String {
    serde_json::to_string(&serde_json::json!({ "partial_sweep_of": fingerprint })).expect("string serializes")
}
