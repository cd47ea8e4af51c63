use std::fmt::Write as _;
use std::fs;
use std::io::{self, Read};
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::config::{Role, Setting};
use super::report::FairnessReport;
use super::HarnessError;
use crate::queue::Algorithm;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Format {
    Csv,
    Json,
}

impl FromStr for Format {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "csv" => Ok(Format::Csv),
            "json" => Ok(Format::Json),
            _ => Err(format!("unknown format `{s}` (expected csv or json)")),
        }
    }
}

/// One line of the CSV report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CsvRow {
    #[serde(rename = "impl")]
    pub algorithm: Algorithm,
    pub process: usize,
    pub role: Role,
    pub slowdown: u32,
    pub ops: u64,
    pub fair_share: f64,
    pub attainment: f64,
}

pub fn csv_rows(report: &FairnessReport) -> Vec<CsvRow> {
    report
        .processes
        .iter()
        .map(|p| CsvRow {
            algorithm: report.config.algorithm,
            process: p.process,
            role: p.role,
            slowdown: p.slowdown,
            ops: p.ops,
            fair_share: p.fair_share,
            attainment: p.attainment,
        })
        .collect()
}

pub fn write_csv_rows(rows: &[CsvRow]) -> Result<String, HarnessError> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in rows {
        w.serialize(r)?;
    }
    let bytes = w
        .into_inner()
        .map_err(|e| HarnessError::Io(e.into_error()))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

/// CSV text for one report. The configuration and group totals travel as
/// `#` comment lines above the header.
pub fn to_csv(report: &FairnessReport) -> Result<String, HarnessError> {
    let mut out = String::new();
    writeln!(out, "# config {}", serde_json::to_string(&report.config)?).unwrap();
    for g in &report.groups {
        writeln!(
            out,
            "# group {} processes={} throughput={}",
            g.role, g.processes, g.throughput
        )
        .unwrap();
    }
    writeln!(out, "# total throughput={}", report.total_throughput).unwrap();
    out.push_str(&write_csv_rows(&csv_rows(report))?);
    Ok(out)
}

pub fn to_json(report: &FairnessReport) -> Result<String, HarnessError> {
    Ok(serde_json::to_string_pretty(report)? + "\n")
}

pub fn emit_report(
    report: &FairnessReport,
    path: &Path,
    format: Format,
) -> Result<(), HarnessError> {
    let text = match format {
        Format::Csv => to_csv(report)?,
        Format::Json => to_json(report)?,
    };
    fs::write(path, text)?;
    Ok(())
}

/// Per-implementation, per-role totals recomputed from CSV rows.
#[derive(Debug, Clone, PartialEq)]
pub struct GroupLine {
    pub algorithm: Algorithm,
    pub role: Role,
    pub processes: usize,
    pub ops: u64,
    pub min_attainment: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CsvSummary {
    pub rows: Vec<CsvRow>,
    pub groups: Vec<GroupLine>,
}

impl CsvSummary {
    pub fn render(&self) -> String {
        let mut out = String::from("impl  role      procs         ops  min attainment\n");
        for g in &self.groups {
            writeln!(
                out,
                "{:<5} {:<9} {:>5} {:>11}  {:>13.1}%",
                g.algorithm.name(),
                g.role.to_string(),
                g.processes,
                g.ops,
                g.min_attainment * 100.0
            )
            .unwrap();
        }
        out
    }
}

/// Read CSV produced by [`to_csv`] (any number of concatenated reports).
pub fn summarize_csv<R: Read>(input: R) -> Result<CsvSummary, HarnessError> {
    let mut rd = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .from_reader(input);
    let mut rows = Vec::new();
    for r in rd.deserialize() {
        let row: CsvRow = match r {
            Ok(row) => row,
            // repeated header line from a concatenated file
            Err(e) if matches!(e.kind(), csv::ErrorKind::Deserialize { .. }) => continue,
            Err(e) => return Err(e.into()),
        };
        rows.push(row);
    }
    let mut groups: Vec<GroupLine> = Vec::new();
    for r in &rows {
        match groups
            .iter_mut()
            .find(|g| g.algorithm == r.algorithm && g.role == r.role)
        {
            Some(g) => {
                g.processes += 1;
                g.ops += r.ops;
                g.min_attainment = g.min_attainment.min(r.attainment);
            }
            None => groups.push(GroupLine {
                algorithm: r.algorithm,
                role: r.role,
                processes: 1,
                ops: r.ops,
                min_attainment: r.attainment,
            }),
        }
    }
    Ok(CsvSummary { rows, groups })
}

pub fn summarize_csv_file(path: &Path) -> Result<CsvSummary, HarnessError> {
    summarize_csv(io::BufReader::new(fs::File::open(path)?))
}

/// Throughput ratios (percent, second implementation over the first)
/// reported for a reference 8+8 test bed, to print beside local numbers.
pub fn reference_ratio(setting: Setting) -> f64 {
    match setting {
        Setting::Uniform => 92.61,
        Setting::Linear => 89.61,
        Setting::Geometric => 83.57,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Throughput {
    pub enqueue: u64,
    pub dequeue: u64,
    pub total: u64,
}

impl From<&FairnessReport> for Throughput {
    fn from(r: &FairnessReport) -> Self {
        Throughput {
            enqueue: r.group_throughput(Role::Enqueuer),
            dequeue: r.group_throughput(Role::Dequeuer),
            total: r.total_throughput,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ThroughputRow {
    pub setting: Setting,
    pub ms: Throughput,
    pub dnb2: Throughput,
}

impl ThroughputRow {
    /// DNB-2 total as a percentage of MS total.
    pub fn ratio(&self) -> f64 {
        if self.ms.total == 0 {
            return f64::NAN;
        }
        100.0 * self.dnb2.total as f64 / self.ms.total as f64
    }
}

/// Side-by-side table: per setting, both implementations' enqueue,
/// dequeue and total throughput, their ratio and the reference ratio.
pub fn throughput_table(rows: &[ThroughputRow]) -> String {
    let mut out = String::new();
    writeln!(
        out,
        "{:<10} | {:>8} {:>8} {:>8} | {:>8} {:>8} {:>8} | {:>8} | {:>9}",
        "setting",
        "MS NQ",
        "MS DQ",
        "MS total",
        "DNB2 NQ",
        "DNB2 DQ",
        "DNB2 tot",
        "DNB2/MS",
        "reference"
    )
    .unwrap();
    for r in rows {
        writeln!(
            out,
            "{:<10} | {:>8} {:>8} {:>8} | {:>8} {:>8} {:>8} | {:>7.2}% | {:>8.2}%",
            r.setting.name(),
            r.ms.enqueue,
            r.ms.dequeue,
            r.ms.total,
            r.dnb2.enqueue,
            r.dnb2.dequeue,
            r.dnb2.total,
            r.ratio(),
            reference_ratio(r.setting)
        )
        .unwrap();
    }
    out
}
