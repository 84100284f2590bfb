//! Report output: a versioned JSON envelope, aligned text tables, and
//! plot-ready CSV.

use std::fmt::Write as _;
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};

use crate::experiments::{MetricsReport, RecsysReport, SweepColumn};
use crate::techmodel::TechProfile;

pub const SCHEMA_VERSION: u32 = 1;

/// Where a profile's searchline parameters came from.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CalibrationProvenance {
    pub profile: String,
    pub skew_target_percent: Option<f64>,
    pub skew_target_rows: Option<usize>,
    pub skew_target_hdist: Option<usize>,
    pub r_sl_row: f64,
    pub c_sl_row: f64,
    pub ir_gamma: f64,
    pub ir_ref_rows: usize,
    pub eps_intercept_pj: f64,
    pub eps_slope_pj: f64,
}

impl From<&TechProfile> for CalibrationProvenance {
    fn from(p: &TechProfile) -> Self {
        CalibrationProvenance {
            profile: p.label.clone(),
            skew_target_percent: p.skew_target_percent,
            skew_target_rows: p.skew_target_rows,
            skew_target_hdist: p.skew_target_hdist,
            r_sl_row: p.r_sl_row,
            c_sl_row: p.c_sl_row,
            ir_gamma: p.ir_gamma,
            ir_ref_rows: p.ir_ref_rows,
            eps_intercept_pj: p.eps_intercept,
            eps_slope_pj: p.eps_slope,
        }
    }
}

/// Run facts that legitimately differ between identical runs.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Metadata {
    pub generated_unix_s: u64,
    pub tool_version: String,
}

impl Metadata {
    pub fn now() -> Self {
        Metadata {
            generated_unix_s: SystemTime::now()
                .duration_since(UNIX_EPOCH)
                .map_or(0, |d| d.as_secs()),
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub schema_version: u32,
    pub command: String,
    /// Fully resolved configuration of the run.
    pub config: serde_json::Value,
    pub calibration: Vec<CalibrationProvenance>,
    pub results: serde_json::Value,
    pub metadata: Metadata,
}

impl Report {
    pub fn new(
        command: &str,
        config: serde_json::Value,
        calibration: Vec<CalibrationProvenance>,
        results: serde_json::Value,
    ) -> Self {
        Report {
            schema_version: SCHEMA_VERSION,
            command: command.to_string(),
            config,
            calibration,
            results,
            metadata: Metadata::now(),
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("reports serialize")
    }

    /// JSON of everything but `metadata`; equal for equal runs.
    pub fn deterministic_json(&self) -> String {
        let mut v = serde_json::to_value(self).expect("reports serialize");
        if let Some(obj) = v.as_object_mut() {
            obj.remove("metadata");
        }
        serde_json::to_string_pretty(&v).expect("reports serialize")
    }
}

/// Column-aligned plain-text table with a two-line header.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct TextTable {
    pub title: String,
    pub groups: Vec<String>,
    pub headers: Vec<String>,
    pub rows: Vec<(String, Vec<String>)>,
}

impl TextTable {
    pub fn render(&self) -> String {
        let label_w = self
            .rows
            .iter()
            .map(|(l, _)| l.len())
            .max()
            .unwrap_or(0)
            .max(8);
        let widths: Vec<usize> = (0..self.headers.len())
            .map(|c| {
                let cells = self
                    .rows
                    .iter()
                    .map(|(_, r)| r.get(c).map_or(0, String::len));
                cells
                    .chain([
                        self.headers[c].len(),
                        self.groups.get(c).map_or(0, String::len),
                    ])
                    .max()
                    .unwrap_or(0)
            })
            .collect();
        let line = |label: &str, cells: &[String]| {
            let mut s = format!("{label:<label_w$}");
            for (c, w) in widths.iter().enumerate() {
                let cell = cells.get(c).map_or("", String::as_str);
                let _ = write!(s, "  {cell:>w$}");
            }
            s.trim_end().to_string() + "\n"
        };
        let mut out = String::new();
        if !self.title.is_empty() {
            out.push_str(&self.title);
            out.push('\n');
        }
        if self.groups.iter().any(|g| !g.is_empty()) {
            // Show each group name once, over its first column.
            let mut shown = Vec::with_capacity(self.groups.len());
            let mut prev = "";
            for g in &self.groups {
                shown.push(if g == prev { String::new() } else { g.clone() });
                prev = g;
            }
            out.push_str(&line("", &shown));
        }
        out.push_str(&line("", &self.headers));
        for (label, cells) in &self.rows {
            out.push_str(&line(label, cells));
        }
        out
    }
}

fn fmt2(x: f64) -> String {
    format!("{x:.2}")
}

/// Recall, precision, F, EPS and delay per column; the ideal column leaves
/// energy and delay blank.
pub fn metrics_table(title: &str, columns: &[(SweepColumn, MetricsReport)]) -> TextTable {
    let cell = |f: &dyn Fn(&SweepColumn, &MetricsReport) -> String| {
        columns.iter().map(|(c, r)| f(c, r)).collect::<Vec<_>>()
    };
    let physical = |f: fn(&MetricsReport) -> f64| {
        cell(&|c: &SweepColumn, r: &MetricsReport| {
            if c.ideal {
                String::new()
            } else {
                fmt2(f(r))
            }
        })
    };
    TextTable {
        title: title.to_string(),
        groups: columns.iter().map(|(c, _)| c.group().to_string()).collect(),
        headers: columns.iter().map(|(c, _)| c.label()).collect(),
        rows: vec![
            ("Recall Rate (%)".into(), cell(&|_, r| fmt2(r.recall))),
            ("Precision (%)".into(), cell(&|_, r| fmt2(r.precision))),
            ("F-score".into(), cell(&|_, r| fmt2(r.f_score))),
            ("EPS (pJ)".into(), physical(|r| r.eps_pj)),
            ("Delay (ns)".into(), physical(|r| r.latency_ns)),
        ],
    }
}

/// Mean ± standard deviation of a Monte Carlo run next to its nominal
/// reference.
pub fn variation_table(title: &str, reports: &[MetricsReport]) -> TextTable {
    let mut headers = Vec::new();
    let mut recall = Vec::new();
    let mut precision = Vec::new();
    let mut f = Vec::new();
    for r in reports {
        if let Some(nominal) = &r.reference {
            headers.push(format!("L={} nominal", r.hdist_limit));
            recall.push(fmt2(nominal.recall));
            precision.push(fmt2(nominal.precision));
            f.push(fmt2(nominal.f_score));
        }
        headers.push(format!("L={} variation", r.hdist_limit));
        recall.push(format!("{:.2} ± {:.2}", r.recall, r.recall_std));
        precision.push(format!("{:.2} ± {:.2}", r.precision, r.precision_std));
        f.push(format!("{:.2} ± {:.2}", r.f_score, r.f_score_std));
    }
    TextTable {
        title: title.to_string(),
        groups: Vec::new(),
        headers,
        rows: vec![
            ("Recall Rate (%)".into(), recall),
            ("Precision (%)".into(), precision),
            ("F-score".into(), f),
        ],
    }
}

pub fn recsys_table(title: &str, columns: &[(SweepColumn, RecsysReport)]) -> TextTable {
    let cell =
        |f: fn(&RecsysReport) -> String| columns.iter().map(|(_, r)| f(r)).collect::<Vec<_>>();
    let k = columns.first().map_or(10, |(_, r)| r.k);
    TextTable {
        title: title.to_string(),
        groups: columns.iter().map(|(c, _)| c.group().to_string()).collect(),
        headers: columns.iter().map(|(c, _)| c.label()).collect(),
        rows: vec![
            (
                "Mean pool size".into(),
                cell(|r| format!("{:.1}", r.mean_pool_size)),
            ),
            (
                "DPR reduction".into(),
                cell(|r| format!("{:.1}x", r.dpr_reduction)),
            ),
            (format!("HR@{k}"), cell(|r| fmt2(r.cam_hr_at_k))),
            (
                format!("Baseline HR@{k}"),
                cell(|r| fmt2(r.baseline_hr_at_k)),
            ),
            ("EPS (pJ)".into(), cell(|r| fmt2(r.energy_pj))),
            ("Delay (ns)".into(), cell(|r| fmt2(r.latency_ns))),
        ],
    }
}

/// Two-column CSV with the given header.
pub fn points_csv(header: &str, points: &[(f64, f64)]) -> String {
    let mut out = format!("{header}\n");
    for (x, y) in points {
        let _ = writeln!(out, "{x},{y}");
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn table_columns_align() {
        let t = TextTable {
            title: "T".into(),
            groups: vec!["".into(), "Baseline".into(), "Baseline".into()],
            headers: vec!["Ideal".into(), "64".into(), "128".into()],
            rows: vec![
                (
                    "Recall".into(),
                    vec!["100.00".into(), "100.00".into(), "100.00".into()],
                ),
                (
                    "F-score".into(),
                    vec!["1.00".into(), "0.99".into(), "0.9".into()],
                ),
            ],
        };
        let text = t.render();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "T");
        assert_eq!(lines.len(), 5);
        assert_eq!(lines[1].matches("Baseline").count(), 1);
        // Right-aligned cells end at the same column.
        assert_eq!(lines[3].len(), lines[4].len());
    }

    #[test]
    fn deterministic_json_drops_metadata() {
        let a = Report::new(
            "x",
            serde_json::json!({"k": 1}),
            vec![],
            serde_json::json!([1, 2]),
        );
        let mut b = a.clone();
        b.metadata.generated_unix_s += 100;
        assert_eq!(a.deterministic_json(), b.deterministic_json());
        assert_ne!(a.to_json(), b.to_json());
        let v: serde_json::Value = serde_json::from_str(&a.to_json()).unwrap();
        assert_eq!(v["schema_version"], SCHEMA_VERSION);
    }
}
