use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::eval::metrics::EvalReport;

/// One CSV row: a model or order label, a cutoff and its metrics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurveRow {
    pub series: String,
    pub k: usize,
    pub recall: f64,
    pub precision: f64,
}

pub fn curve_rows<S: AsRef<str>>(reports: &[(S, &EvalReport)]) -> Vec<CurveRow> {
    reports
        .iter()
        .flat_map(|(label, r)| {
            r.ks.iter().enumerate().map(move |(i, &k)| CurveRow {
                series: label.as_ref().to_owned(),
                k,
                recall: r.recall[i],
                precision: r.precision[i],
            })
        })
        .collect()
}

/// Writes `series,k,recall,precision` rows, one per (report, k), in input
/// order. Floats use the shortest representation that parses back exactly.
pub fn emit_curves<S: AsRef<str>>(reports: &[(S, &EvalReport)], path: &Path) -> Result<()> {
    if reports.is_empty() {
        return Err(Error::Empty("reports to emit"));
    }
    let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(Vec::new());
    for row in curve_rows(reports) {
        w.serialize(row).map_err(|e| Error::Format(e.to_string()))?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Format(e.to_string()))?;
    fs::write(path, bytes).map_err(Error::at(path))
}

pub fn read_curves(path: &Path) -> Result<Vec<CurveRow>> {
    let mut r = csv::Reader::from_path(path).map_err(|e| Error::Format(format!("{}: {e}", path.display())))?;
    r.deserialize()
        .collect::<std::result::Result<Vec<CurveRow>, _>>()
        .map_err(|e| Error::Format(format!("{}: {e}", path.display())))
}
