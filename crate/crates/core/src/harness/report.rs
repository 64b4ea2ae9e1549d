use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::path::Path;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::metrics::{format_score, parse_score, Fingerprint};

use super::lint::Lint;

pub const CSV_HEADER: [&str; 6] = ["case_id", "scenario", "variant", "metric_id", "params_fingerprint", "score"];

/// `case_id` of the per-variant mean rows.
pub const MEAN_CASE: &str = "mean";

#[derive(Debug, Clone, PartialEq)]
pub struct ReportRow {
    pub case_id: String,
    pub scenario: String,
    pub variant: String,
    pub metric_id: String,
    pub params_fingerprint: String,
    pub score: f64,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Report {
    pub rows: Vec<ReportRow>,
    pub lints: Vec<Lint>,
}

impl Report {
    /// Sorts rows by `(case_id, variant, metric_id)`, then scenario and
    /// fingerprint so that ties are ordered too.
    pub fn sort(&mut self) {
        self.rows.sort_by(|a, b| {
            (&a.case_id, &a.variant, &a.metric_id, &a.scenario, &a.params_fingerprint).cmp(&(
                &b.case_id,
                &b.variant,
                &b.metric_id,
                &b.scenario,
                &b.params_fingerprint,
            ))
        });
    }

    pub fn extend(&mut self, other: Report) {
        self.rows.extend(other.rows);
        for l in other.lints {
            if !self.lints.contains(&l) {
                self.lints.push(l);
            }
        }
    }

    pub fn means(&self) -> impl Iterator<Item = &ReportRow> {
        self.rows.iter().filter(|r| r.case_id == MEAN_CASE)
    }

    pub fn to_csv(&self) -> Result<String> {
        let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(Vec::new());
        let csv_err = |e: csv::Error| Error::Config(format!("csv encoding failed: {e}"));
        w.write_record(CSV_HEADER).map_err(csv_err)?;
        for r in &self.rows {
            w.write_record([
                r.case_id.as_str(),
                &r.scenario,
                &r.variant,
                &r.metric_id,
                &r.params_fingerprint,
                &format_score(r.score),
            ])
            .map_err(csv_err)?;
        }
        let bytes = w.into_inner().map_err(|e| Error::Config(format!("csv encoding failed: {e}")))?;
        Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
    }

    /// One table per scenario: a row per metric configuration, a column per
    /// variant, cells holding the mean over cases.
    pub fn to_markdown(&self) -> String {
        let mut out = String::new();
        let mut by_scenario: BTreeMap<&str, Vec<&ReportRow>> = BTreeMap::new();
        for r in self.means() {
            by_scenario.entry(&r.scenario).or_default().push(r);
        }
        for (scenario, rows) in &by_scenario {
            let variants: BTreeSet<&str> = rows.iter().map(|r| r.variant.as_str()).collect();
            let cases = rows
                .first()
                .and_then(|r| r.params_fingerprint.parse::<Fingerprint>().ok())
                .and_then(|fp| fp.get("phantom_seeds").map(|s| s.split(',').count()))
                .unwrap_or(0);
            let labels = metric_labels(rows);
            let mut table: BTreeMap<&str, BTreeMap<&str, f64>> = BTreeMap::new();
            for r in rows {
                table
                    .entry(labels[&(r.metric_id.as_str(), r.params_fingerprint.as_str())].as_str())
                    .or_default()
                    .insert(&r.variant, r.score);
            }
            let _ = writeln!(out, "## {scenario}\n\nMean over {cases} cases.\n");
            let _ = writeln!(out, "| metric | {} |", variants.iter().copied().collect::<Vec<_>>().join(" | "));
            let _ = writeln!(out, "|---|{}", "---|".repeat(variants.len()));
            for (label, cells) in &table {
                let vals: Vec<String> = variants
                    .iter()
                    .map(|v| cells.get(v).map_or("n/a".to_string(), |&s| markdown_score(s)))
                    .collect();
                let _ = writeln!(out, "| {label} | {} |", vals.join(" | "));
            }
            out.push('\n');
        }
        if !self.lints.is_empty() {
            out.push_str("## lints\n\n| code | severity | message |\n|---|---|---|\n");
            for l in &self.lints {
                let _ = writeln!(out, "| {} | {} | {} |", l.code, l.severity, l.message.replace('|', "\\|"));
            }
        }
        out
    }
}

fn markdown_score(s: f64) -> String {
    if s == f64::INFINITY {
        "inf".into()
    } else {
        format!("{s:.4}")
    }
}

const HARNESS_KEYS: [&str; 6] = ["aggregate", "chain", "mask", "phantom_seeds", "preprocess", "roi"];

fn metric_part(fp: &str) -> BTreeMap<String, String> {
    fp.parse::<Fingerprint>()
        .map(|fp| {
            fp.iter()
                .filter(|(k, _)| !k.starts_with("phantom_") && !HARNESS_KEYS.contains(k) && *k != "metric")
                .map(|(k, v)| (k.to_string(), v.to_string()))
                .collect()
        })
        .unwrap_or_default()
}

/// Metric id, extended with the parameters that tell same-id rows apart.
fn metric_labels<'a>(rows: &[&'a ReportRow]) -> BTreeMap<(&'a str, &'a str), String> {
    let mut by_id: BTreeMap<&str, Vec<&ReportRow>> = BTreeMap::new();
    for r in rows {
        by_id.entry(&r.metric_id).or_default().push(r);
    }
    let mut labels = BTreeMap::new();
    for (id, group) in by_id {
        let parts: Vec<BTreeMap<String, String>> = group.iter().map(|r| metric_part(&r.params_fingerprint)).collect();
        let keys: BTreeSet<&String> = parts.iter().flat_map(|p| p.keys()).collect();
        let varying: Vec<&String> = keys
            .into_iter()
            .filter(|k| parts.iter().map(|p| p.get(*k)).collect::<BTreeSet<_>>().len() > 1)
            .collect();
        let base = if id == "dice" { "proxy-task DICE" } else { id };
        for (r, part) in group.iter().zip(&parts) {
            let extra: Vec<String> = varying
                .iter()
                .filter_map(|k| part.get(*k).map(|v| format!("{k}={v}")))
                .collect();
            let label = if extra.is_empty() {
                base.to_string()
            } else {
                format!("{base} ({})", extra.join(", "))
            };
            labels.insert((r.metric_id.as_str(), r.params_fingerprint.as_str()), label);
        }
    }
    labels
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReportFormat {
    Csv,
    Markdown,
}

impl FromStr for ReportFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "csv" => Ok(ReportFormat::Csv),
            "markdown" | "md" => Ok(ReportFormat::Markdown),
            _ => Err(Error::InvalidParam(format!("unknown report format `{s}`"))),
        }
    }
}

pub fn write_report(report: &Report, path: impl AsRef<Path>, format: ReportFormat) -> Result<()> {
    let path = path.as_ref();
    let text = match format {
        ReportFormat::Csv => report.to_csv()?,
        ReportFormat::Markdown => report.to_markdown(),
    };
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

/// Parses CSV written by [`Report::to_csv`].
pub fn parse_csv(text: &str) -> Result<Vec<ReportRow>> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(text.as_bytes());
    let bad = |e: csv::Error| Error::Config(format!("malformed report csv: {e}"));
    let header = rdr.headers().map_err(bad)?;
    if header.iter().ne(CSV_HEADER) {
        return Err(Error::Config(format!("unexpected report header {header:?}")));
    }
    let mut rows = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(bad)?;
        rows.push(ReportRow {
            case_id: rec[0].to_string(),
            scenario: rec[1].to_string(),
            variant: rec[2].to_string(),
            metric_id: rec[3].to_string(),
            params_fingerprint: rec[4].to_string(),
            score: parse_score(&rec[5])?,
        });
    }
    Ok(rows)
}
