use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::config::{ExperimentConfig, Method};
use crate::BenchError;

pub const SCHEMA_VERSION: u32 = 1;
pub const ARTIFACT_VERSION: &str = env!("CARGO_PKG_VERSION");

/// One (trial, method, weights[, σ]) outcome. Failed solves carry `error`
/// and no loss.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrialRecord {
    pub trial: usize,
    /// Seed of the method's random stream in this trial.
    pub seed: u64,
    pub method: Method,
    /// Weight triple rendered for grouping, e.g. `(0.2,0.7,0.1)`.
    pub setting: String,
    pub weights: [f64; 3],
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sigma: Option<f64>,
    /// Expected loss of `decision` under the evaluation model.
    pub loss: Option<f64>,
    /// `(ℒ₁, ℒ₂, ℒ₃)` before weighting.
    pub components: Option<[f64; 3]>,
    pub lower_bound: Option<f64>,
    pub iterations: Option<usize>,
    pub runtime_ms: f64,
    /// Removal decision as a string of `0`/`1`, node 0 first.
    pub decision: Option<String>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SummaryRow {
    pub method: Method,
    pub setting: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sigma: Option<f64>,
    pub completed: usize,
    pub failed: usize,
    pub mean_loss: Option<f64>,
    pub std_loss: Option<f64>,
}

/// Least-squares slope of mean loss against noise level.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Trend {
    pub method: Method,
    pub setting: String,
    pub slope: f64,
    pub monotone_nondecreasing: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReportKind {
    Benchmark,
    Sensitivity,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Report {
    pub schema_version: u32,
    pub artifact_version: String,
    pub kind: ReportKind,
    pub config: ExperimentConfig,
    pub records: Vec<TrialRecord>,
    pub summary: Vec<SummaryRow>,
    #[serde(default)]
    pub trends: Vec<Trend>,
}

fn mean_std(xs: &[f64]) -> (Option<f64>, Option<f64>) {
    if xs.is_empty() {
        return (None, None);
    }
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = if xs.len() > 1 {
        xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)
    } else {
        0.0
    };
    (Some(mean), Some(var.sqrt()))
}

pub(crate) fn summarize(records: &[TrialRecord]) -> Vec<SummaryRow> {
    let mut keys: Vec<(Method, String, Option<f64>)> = Vec::new();
    for r in records {
        let key = (r.method, r.setting.clone(), r.sigma);
        if !keys.contains(&key) {
            keys.push(key);
        }
    }
    keys.into_iter()
        .map(|(method, setting, sigma)| {
            let group: Vec<&TrialRecord> = records
                .iter()
                .filter(|r| r.method == method && r.setting == setting && r.sigma == sigma)
                .collect();
            let losses: Vec<f64> = group.iter().filter_map(|r| r.loss).collect();
            let (mean_loss, std_loss) = mean_std(&losses);
            SummaryRow {
                method,
                setting,
                sigma,
                completed: losses.len(),
                failed: group.len() - losses.len(),
                mean_loss,
                std_loss,
            }
        })
        .collect()
}

pub(crate) fn trends(summary: &[SummaryRow]) -> Vec<Trend> {
    let mut out: Vec<Trend> = Vec::new();
    for row in summary {
        if out.iter().any(|t| t.method == row.method && t.setting == row.setting) {
            continue;
        }
        let points: Vec<(f64, f64)> = summary
            .iter()
            .filter(|r| r.method == row.method && r.setting == row.setting)
            .filter_map(|r| Some((r.sigma?, r.mean_loss?)))
            .collect();
        let n = points.len() as f64;
        let mx = points.iter().map(|p| p.0).sum::<f64>() / n;
        let my = points.iter().map(|p| p.1).sum::<f64>() / n;
        let sxx: f64 = points.iter().map(|p| (p.0 - mx).powi(2)).sum();
        let sxy: f64 = points.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
        let slope = if sxx > 0.0 { sxy / sxx } else { 0.0 };
        out.push(Trend {
            method: row.method,
            setting: row.setting.clone(),
            slope,
            monotone_nondecreasing: points.windows(2).all(|w| w[1].1 >= w[0].1),
        });
    }
    out
}

impl Report {
    pub fn to_json(&self) -> String {
        let mut text = serde_json::to_string_pretty(self).expect("report fields are serializable");
        text.push('\n');
        text
    }

    /// Copy with every runtime zeroed, for comparing runs.
    pub fn without_timing(&self) -> Report {
        let mut out = self.clone();
        for r in &mut out.records {
            r.runtime_ms = 0.0;
        }
        out
    }

    pub fn mean_loss(&self, method: Method, setting: &str) -> Option<f64> {
        self.summary
            .iter()
            .find(|r| r.method == method && r.setting == setting && r.sigma.is_none())
            .and_then(|r| r.mean_loss)
    }

    /// `method,setting,trial,loss` for every successful record.
    pub fn boxplot_csv(&self) -> String {
        let mut out = String::from("method,setting,trial,loss\n");
        for r in &self.records {
            if let Some(loss) = r.loss {
                let setting = match r.sigma {
                    Some(s) => format!("{} sigma={s}", r.setting),
                    None => r.setting.clone(),
                };
                let _ = writeln!(out, "{},\"{}\",{},{}", r.method, setting, r.trial, loss);
            }
        }
        out
    }
}

/// Parses a report, rejecting unknown fields and other schema versions.
pub fn parse_report(text: &str) -> Result<Report, BenchError> {
    let report: Report = serde_json::from_str(text).map_err(|e| BenchError::Report(e.to_string()))?;
    if report.schema_version != SCHEMA_VERSION {
        return Err(BenchError::Report(format!(
            "schema version {} is not {SCHEMA_VERSION}",
            report.schema_version
        )));
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn record(method: Method, sigma: Option<f64>, loss: Option<f64>) -> TrialRecord {
        TrialRecord {
            trial: 0,
            seed: 1,
            method,
            setting: "(1/3,1/3,1/3)".into(),
            weights: [1.0 / 3.0; 3],
            sigma,
            loss,
            components: loss.map(|_| [0.0; 3]),
            lower_bound: None,
            iterations: None,
            runtime_ms: 1.5,
            decision: loss.map(|_| "01".into()),
            error: loss.is_none().then(|| "failed".into()),
        }
    }

    #[test]
    fn summary_groups_and_skips_failures() {
        let recs = vec![
            record(Method::Pgd, None, Some(1.0)),
            record(Method::Pgd, None, Some(3.0)),
            record(Method::Pgd, None, None),
            record(Method::Baseline, None, Some(2.0)),
        ];
        let s = summarize(&recs);
        assert_eq!(s.len(), 2);
        assert_eq!((s[0].completed, s[0].failed, s[0].mean_loss), (2, 1, Some(2.0)));
        assert!((s[0].std_loss.unwrap() - 2.0_f64.sqrt()).abs() < 1e-15);
        assert_eq!(s[1].std_loss, Some(0.0));
    }

    #[test]
    fn trend_slope_is_least_squares() {
        let recs: Vec<TrialRecord> = [0.0, 0.1, 0.2]
            .iter()
            .map(|&s| record(Method::Relax, Some(s), Some(1.0 + 2.0 * s)))
            .collect();
        let t = trends(&summarize(&recs));
        assert_eq!(t.len(), 1);
        assert!((t[0].slope - 2.0).abs() < 1e-12);
        assert!(t[0].monotone_nondecreasing);
    }

    #[test]
    fn boxplot_csv_lists_successful_records() {
        let cfg = crate::ExperimentConfig::from_json(
            r#"{"graph": {"kind": "barabasi_albert", "n": 8, "m": 1}, "methods": ["pgd"], "trials": 1, "master_seed": 0}"#,
        )
        .unwrap();
        let report = Report {
            schema_version: SCHEMA_VERSION,
            artifact_version: ARTIFACT_VERSION.into(),
            kind: ReportKind::Benchmark,
            config: cfg,
            records: vec![record(Method::Pgd, None, Some(0.5)), record(Method::Pgd, None, None)],
            summary: Vec::new(),
            trends: Vec::new(),
        };
        assert_eq!(report.boxplot_csv(), "method,setting,trial,loss\npgd,\"(1/3,1/3,1/3)\",0,0.5\n");
        let parsed = parse_report(&report.to_json()).unwrap();
        assert_eq!(parsed, report);
        assert_eq!(report.without_timing().records[0].runtime_ms, 0.0);
        let bumped = report.to_json().replace("\"schema_version\": 1", "\"schema_version\": 2");
        assert!(parse_report(&bumped).is_err());
        let extra = report.to_json().replacen("\"kind\"", "\"extra\": 1,\n  \"kind\"", 1);
        assert!(parse_report(&extra).is_err());
    }
}
