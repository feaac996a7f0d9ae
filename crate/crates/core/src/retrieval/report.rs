//! Sweep reports and their CSV / JSON encodings.
//!
//! CSV schema, one row per (method, d): `method,d,mean_precision,mean_query_ms,fit_ms`.
//! Failed records leave the three numeric columns empty.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const CSV_HEADER: [&str; 5] = ["method", "d", "mean_precision", "mean_query_ms", "fit_ms"];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DimRecord {
    pub d: usize,
    /// `None` when this dimension failed.
    pub mean_precision: Option<f64>,
    pub mean_query_ms: f64,
    pub fit_ms: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

/// Mea.P. / Max.P. / Mea.T. over the successful records.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub mean_precision: f64,
    pub max_precision: f64,
    pub mean_query_ms: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RetrievalReport {
    pub method: String,
    pub records: Vec<DimRecord>,
    pub summary: Option<Summary>,
}

impl RetrievalReport {
    pub fn new(method: impl Into<String>, records: Vec<DimRecord>) -> Self {
        let summary = summarize(&records);
        RetrievalReport {
            method: method.into(),
            records,
            summary,
        }
    }

    pub fn succeeded(&self) -> usize {
        self.records.iter().filter(|r| r.mean_precision.is_some()).count()
    }
}

fn summarize(records: &[DimRecord]) -> Option<Summary> {
    let ok: Vec<&DimRecord> = records.iter().filter(|r| r.mean_precision.is_some()).collect();
    if ok.is_empty() {
        return None;
    }
    let n = ok.len() as f64;
    let precisions = ok.iter().map(|r| r.mean_precision.unwrap_or(0.0));
    Some(Summary {
        mean_precision: precisions.clone().sum::<f64>() / n,
        max_precision: precisions.fold(f64::NEG_INFINITY, f64::max),
        mean_query_ms: ok.iter().map(|r| r.mean_query_ms).sum::<f64>() / n,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReportFormat {
    Csv,
    Json,
}

impl ReportFormat {
    pub fn from_path(path: &Path) -> Self {
        match path.extension().and_then(|e| e.to_str()) {
            Some(ext) if ext.eq_ignore_ascii_case("json") => ReportFormat::Json,
            _ => ReportFormat::Csv,
        }
    }
}

pub fn report_csv(reports: &[RetrievalReport]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let fail = |e: csv::Error| Error::Format(e.to_string());
    w.write_record(CSV_HEADER).map_err(fail)?;
    for report in reports {
        for r in &report.records {
            let (p, q, f) = match r.mean_precision {
                Some(p) => (format!("{p:?}"), format!("{:?}", r.mean_query_ms), format!("{:?}", r.fit_ms)),
                None => (String::new(), String::new(), String::new()),
            };
            w.write_record([report.method.clone(), r.d.to_string(), p, q, f])
                .map_err(fail)?;
        }
    }
    let bytes = w.into_inner().map_err(|e| Error::Format(e.to_string()))?;
    String::from_utf8(bytes).map_err(|e| Error::Format(e.to_string()))
}

/// Parses the CSV encoding back into per-method reports, in first-seen order.
pub fn parse_report_csv(text: &str) -> Result<Vec<RetrievalReport>> {
    let mut rdr = csv::Reader::from_reader(text.as_bytes());
    let header = rdr
        .headers()
        .map_err(|e| Error::Parse { line: 1, message: e.to_string() })?;
    if header.iter().ne(CSV_HEADER) {
        return Err(Error::Parse {
            line: 1,
            message: format!("unexpected report header {header:?}"),
        });
    }
    let mut grouped: Vec<(String, Vec<DimRecord>)> = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let line = i + 2;
        let rec = rec.map_err(|e| Error::Parse { line, message: e.to_string() })?;
        let num = |field: &str| -> Result<Option<f64>> {
            if field.is_empty() {
                return Ok(None);
            }
            field.parse().map(Some).map_err(|_| Error::Parse {
                line,
                message: format!("bad number '{field}'"),
            })
        };
        let d = rec[1].parse().map_err(|_| Error::Parse {
            line,
            message: format!("bad dimension '{}'", &rec[1]),
        })?;
        let record = DimRecord {
            d,
            mean_precision: num(&rec[2])?,
            mean_query_ms: num(&rec[3])?.unwrap_or(0.0),
            fit_ms: num(&rec[4])?.unwrap_or(0.0),
            error: None,
        };
        match grouped.iter_mut().find(|(m, _)| m == &rec[0]) {
            Some((_, recs)) => recs.push(record),
            None => grouped.push((rec[0].to_string(), vec![record])),
        }
    }
    Ok(grouped
        .into_iter()
        .map(|(m, recs)| RetrievalReport::new(m, recs))
        .collect())
}

pub fn export_report(reports: &[RetrievalReport], path: &Path, format: ReportFormat) -> Result<()> {
    let text = match format {
        ReportFormat::Csv => report_csv(reports)?,
        ReportFormat::Json => {
            let mut s = serde_json::to_string_pretty(reports)
                .map_err(|e| Error::Format(e.to_string()))?;
            s.push('\n');
            s
        }
    };
    fs::write(path, text)?;
    Ok(())
}

pub fn import_report(path: &Path, format: ReportFormat) -> Result<Vec<RetrievalReport>> {
    let text = fs::read_to_string(path)?;
    match format {
        ReportFormat::Csv => parse_report_csv(&text),
        ReportFormat::Json => serde_json::from_str(&text).map_err(|e| Error::Parse {
            line: e.line(),
            message: e.to_string(),
        }),
    }
}
