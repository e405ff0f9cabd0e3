//! Running a suite and summarising its measurements.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::{ExperimentConfig, SuiteEntry};
use crate::fit::spread;
use crate::suites::{self, Condition, Evaluation, Finding, Instance, Measurement, STABILITY_FACTOR};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckSummary {
    pub check: String,
    /// Largest recorded ratio over all instances and depths.
    pub fitted: f64,
    pub per_depth: Vec<(u32, f64)>,
    /// `max/min` of the per-depth constants.
    pub spread: f64,
    pub finite: bool,
    /// `Some` when the suite asserts resolution stability.
    pub stable: Option<bool>,
    pub passed: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InstanceRecord {
    pub label: String,
    pub depth: u32,
    pub passed: bool,
    pub error: Option<String>,
    pub measurements: Vec<Measurement>,
    /// Only the conditions that fail.
    pub failed_conditions: Vec<Condition>,
    pub facts: Vec<(String, f64)>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InequalityReport {
    pub suite: String,
    pub description: String,
    pub depths: Vec<u32>,
    pub instances: usize,
    pub conditions: usize,
    pub failed_conditions: usize,
    pub checks: Vec<CheckSummary>,
    pub findings: Vec<Finding>,
    pub records: Vec<InstanceRecord>,
    /// Index into `records` of the first failing instance.
    pub first_failure: Option<usize>,
    pub passed: bool,
}

/// A report together with the failing instance, for dumping.
pub struct SuiteRun {
    pub report: InequalityReport,
    pub failure: Option<(Instance, Option<Evaluation>)>,
}

pub fn run_suite(cfg: &ExperimentConfig, entry: &SuiteEntry) -> Result<SuiteRun, String> {
    let suite = suites::find(entry.name()).ok_or_else(|| format!("unknown suite `{}`", entry.name()))?;
    let depths = cfg.resolutions_for(entry);
    let instances: Vec<Instance> = depths.iter().flat_map(|&d| (suite.corpus)(cfg, d)).collect();
    let results: Vec<Result<Evaluation, String>> = instances.par_iter().map(|i| (suite.evaluate)(i)).collect();
    let mut records = Vec::with_capacity(instances.len());
    let mut ok_runs = Vec::new();
    let mut conditions = 0;
    let mut failed_conditions = 0;
    for (inst, res) in instances.iter().zip(&results) {
        let rec = match res {
            Ok(e) => {
                conditions += e.conditions.len();
                let failed: Vec<Condition> = e.conditions.iter().filter(|c| !c.holds).cloned().collect();
                failed_conditions += failed.len();
                ok_runs.push((inst.clone(), e.clone()));
                InstanceRecord {
                    label: inst.label.clone(),
                    depth: inst.depth,
                    passed: e.passed(),
                    error: None,
                    measurements: e.measurements.iter().map(|m| Measurement { cells: None, ..m.clone() }).collect(),
                    failed_conditions: failed,
                    facts: e.facts.clone(),
                }
            }
            Err(msg) => InstanceRecord {
                label: inst.label.clone(),
                depth: inst.depth,
                passed: false,
                error: Some(msg.clone()),
                measurements: Vec::new(),
                failed_conditions: Vec::new(),
                facts: Vec::new(),
            },
        };
        records.push(rec);
    }
    let checks = summarise(&records, &depths, suite.stable);
    let findings = suite.finish.map(|f| f(cfg, &ok_runs)).unwrap_or_default();
    let first_failure = records.iter().position(|r| !r.passed);
    let passed = first_failure.is_none()
        && checks.iter().all(|c| c.passed)
        && findings.iter().all(|f| f.holds != Some(false))
        && !instances.is_empty();
    let failure = first_failure.map(|i| (instances[i].clone(), results[i].clone().ok()));
    let report = InequalityReport {
        suite: suite.name.into(),
        description: suite.description.into(),
        depths,
        instances: instances.len(),
        conditions,
        failed_conditions,
        checks,
        findings,
        records,
        first_failure,
        passed,
    };
    Ok(SuiteRun { report, failure })
}

fn summarise(records: &[InstanceRecord], depths: &[u32], stable: bool) -> Vec<CheckSummary> {
    let mut by_check: BTreeMap<&str, BTreeMap<u32, f64>> = BTreeMap::new();
    let mut order: Vec<&str> = Vec::new();
    for r in records {
        for m in &r.measurements {
            if !by_check.contains_key(m.check.as_str()) {
                order.push(&m.check);
            }
            let e = by_check.entry(&m.check).or_default().entry(r.depth).or_insert(0.0);
            *e = e.max(m.ratio);
        }
    }
    order
        .into_iter()
        .map(|check| {
            let per: &BTreeMap<u32, f64> = &by_check[check];
            let per_depth: Vec<(u32, f64)> = depths.iter().filter_map(|d| per.get(d).map(|v| (*d, *v))).collect();
            let values: Vec<f64> = per_depth.iter().map(|x| x.1).collect();
            let fitted = values.iter().copied().fold(0.0, f64::max);
            let finite = fitted.is_finite();
            let sp = spread(&values);
            let stable = (stable && values.len() >= 2).then_some(sp <= STABILITY_FACTOR);
            CheckSummary {
                check: check.into(),
                fitted,
                per_depth,
                spread: sp,
                finite,
                stable,
                passed: finite && stable != Some(false),
            }
        })
        .collect()
}

fn num(x: f64) -> String {
    if x.is_finite() {
        format!("{x:.6e}")
    } else {
        format!("{x}")
    }
}

/// One row per instance and check.
pub fn table_csv(report: &InequalityReport) -> Result<String, String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["suite", "depth", "instance", "check", "lhs", "rhs", "ratio", "passed"]).map_err(|e| e.to_string())?;
    for r in &report.records {
        if let Some(e) = &r.error {
            w.write_record([report.suite.as_str(), &r.depth.to_string(), &r.label, "error", "", "", "", e])
                .map_err(|e| e.to_string())?;
        }
        for m in &r.measurements {
            w.write_record([
                report.suite.as_str(),
                &r.depth.to_string(),
                &r.label,
                &m.check,
                &num(m.lhs),
                &num(m.rhs),
                &num(m.ratio),
                if r.passed { "true" } else { "false" },
            ])
            .map_err(|e| e.to_string())?;
        }
    }
    String::from_utf8(w.into_inner().map_err(|e| e.to_string())?).map_err(|e| e.to_string())
}

/// Bar chart of `log10` fitted constants per check and depth.
pub fn constants_svg(report: &InequalityReport) -> String {
    let rows: Vec<(String, f64)> = report
        .checks
        .iter()
        .flat_map(|c| c.per_depth.iter().map(move |(d, v)| (format!("{} L{d}", c.check), *v)))
        .collect();
    let bar_h = 18.0;
    let left = 260.0;
    let width = 720.0;
    let height = 40.0 + bar_h * rows.len() as f64;
    let logs: Vec<f64> = rows.iter().map(|(_, v)| if *v > 0.0 && v.is_finite() { v.log10() } else { 0.0 }).collect();
    let lo = logs.iter().copied().fold(0.0f64, f64::min).floor();
    let hi = logs.iter().copied().fold(1.0f64, f64::max).ceil();
    let scale = (width - left - 20.0) / (hi - lo);
    let x0 = left + (0.0 - lo) * scale;
    let mut s = String::new();
    let _ = writeln!(s, r#"<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" font-family="monospace" font-size="11">"#);
    let _ = writeln!(s, r#"<text x="10" y="16">{} : log10 fitted constant</text>"#, escape(&report.suite));
    for (i, ((label, v), l)) in rows.iter().zip(&logs).enumerate() {
        let y = 28.0 + i as f64 * bar_h;
        let (a, b) = if *l >= 0.0 { (x0, x0 + l * scale) } else { (x0 + l * scale, x0) };
        let fill = if v.is_finite() { "#4a7ab0" } else { "#c0392b" };
        let _ = writeln!(s, r#"<text x="10" y="{:.1}">{}</text>"#, y + 12.0, escape(label));
        let _ = writeln!(s, r#"<rect x="{a:.1}" y="{y:.1}" width="{:.1}" height="{:.1}" fill="{fill}"/>"#, (b - a).max(1.0), bar_h - 4.0);
        let _ = writeln!(s, r#"<text x="{:.1}" y="{:.1}">{}</text>"#, b.max(a) + 4.0, y + 12.0, num(*v));
    }
    let _ = writeln!(s, r#"<line x1="{x0:.1}" y1="24" x2="{x0:.1}" y2="{:.1}" stroke="black"/>"#, height - 8.0);
    s.push_str("</svg>\n");
    s
}

/// Polyline plot of `y` against `x`, one series per entry; axes are as given.
pub fn line_svg(title: &str, xlabel: &str, ylabel: &str, series: &[(String, Vec<(f64, f64)>)]) -> String {
    let (w, h, m) = (640.0, 400.0, 50.0);
    let pts = series.iter().flat_map(|s| s.1.iter()).filter(|p| p.0.is_finite() && p.1.is_finite());
    let (mut xmin, mut xmax, mut ymin, mut ymax) = (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY);
    for p in pts {
        xmin = xmin.min(p.0);
        xmax = xmax.max(p.0);
        ymin = ymin.min(p.1);
        ymax = ymax.max(p.1);
    }
    if !(xmin < xmax) {
        xmax = xmin + 1.0;
    }
    if !(ymin < ymax) {
        ymax = ymin + 1.0;
    }
    let sx = |x: f64| m + (x - xmin) / (xmax - xmin) * (w - 2.0 * m);
    let sy = |y: f64| h - m - (y - ymin) / (ymax - ymin) * (h - 2.0 * m);
    let colours = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"];
    let mut s = String::new();
    let _ = writeln!(s, r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" font-family="monospace" font-size="11">"#);
    let _ = writeln!(s, r#"<text x="{m}" y="20">{}</text>"#, escape(title));
    let _ = writeln!(s, r#"<rect x="{m}" y="{m}" width="{}" height="{}" fill="none" stroke="black"/>"#, w - 2.0 * m, h - 2.0 * m);
    let _ = writeln!(s, r#"<text x="{}" y="{}">{}</text>"#, w / 2.0, h - 10.0, escape(xlabel));
    let _ = writeln!(s, r#"<text x="5" y="{}">{}</text>"#, m - 8.0, escape(ylabel));
    let _ = writeln!(s, r#"<text x="{m}" y="{}">{}</text>"#, h - m + 14.0, num(xmin));
    let _ = writeln!(s, r#"<text x="{}" y="{}">{}</text>"#, w - m - 60.0, h - m + 14.0, num(xmax));
    let _ = writeln!(s, r#"<text x="5" y="{}">{}</text>"#, h - m, num(ymin));
    let _ = writeln!(s, r#"<text x="5" y="{}">{}</text>"#, m + 10.0, num(ymax));
    for (i, (name, data)) in series.iter().enumerate() {
        let c = colours[i % colours.len()];
        let path: Vec<String> = data
            .iter()
            .filter(|p| p.0.is_finite() && p.1.is_finite())
            .map(|p| format!("{:.2},{:.2}", sx(p.0), sy(p.1)))
            .collect();
        let _ = writeln!(s, r#"<polyline points="{}" fill="none" stroke="{c}"/>"#, path.join(" "));
        let _ = writeln!(s, r#"<text x="{}" y="{}" fill="{c}">{}</text>"#, w - m + 4.0 - 120.0, m + 14.0 * (i as f64 + 1.0), escape(name));
    }
    s.push_str("</svg>\n");
    s
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

#[cfg(test)]
mod tests {
    use super::*;

    fn record(depth: u32, ratio: f64) -> InstanceRecord {
        InstanceRecord {
            label: format!("x{depth}"),
            depth,
            passed: ratio.is_finite(),
            error: None,
            measurements: vec![Measurement { check: "c".into(), lhs: ratio, rhs: 1.0, ratio, cells: None }],
            failed_conditions: vec![],
            facts: vec![],
        }
    }

    #[test]
    fn fitted_is_max_over_records() {
        let recs = vec![record(6, 1.0), record(6, 2.5), record(8, 2.0)];
        let c = &summarise(&recs, &[6, 8], true)[0];
        assert_eq!(c.fitted, 2.5);
        assert_eq!(c.per_depth, vec![(6, 2.5), (8, 2.0)]);
        assert_eq!(c.stable, Some(true));
        assert!(c.passed);
    }

    #[test]
    fn spread_over_three_fails_stability() {
        let recs = vec![record(6, 1.0), record(8, 3.5)];
        let c = &summarise(&recs, &[6, 8], true)[0];
        assert_eq!(c.stable, Some(false));
        assert!(!c.passed);
        assert_eq!(summarise(&recs, &[6, 8], false)[0].stable, None);
    }

    #[test]
    fn svg_is_well_formed_enough() {
        let s = line_svg("t", "x", "y", &[("a".into(), vec![(0.0, 1.0), (1.0, 2.0)])]);
        assert!(s.starts_with("<svg") && s.trim_end().ends_with("</svg>"));
        assert!(s.contains("polyline"));
    }
}
