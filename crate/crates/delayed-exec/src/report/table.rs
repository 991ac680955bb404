use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::ReportError;

/// z-value of a two-sided 95% normal interval.
const Z95: f64 = 1.96;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub axis: Vec<f64>,
    pub values: Vec<f64>,
    /// 95% half-widths, `None` for analytic values or a single seed.
    pub half_width: Vec<Option<f64>>,
}

/// A table of parameter points: axis columns, then metric columns.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepResult {
    pub figure: String,
    pub axes: Vec<String>,
    pub metrics: Vec<String>,
    pub rows: Vec<SweepRow>,
}

/// Mean and 95% half-width of per-seed samples; the width needs two samples.
pub fn mean_ci(samples: &[f64]) -> (f64, Option<f64>) {
    let n = samples.len();
    if n == 0 {
        return (f64::NAN, None);
    }
    let mean = samples.iter().sum::<f64>() / n as f64;
    if n < 2 {
        return (mean, None);
    }
    let var = samples.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    (mean, Some(Z95 * (var / n as f64).sqrt()))
}

impl SweepResult {
    pub fn new(figure: &str, axes: &[&str], metrics: &[&str]) -> Self {
        SweepResult {
            figure: figure.to_string(),
            axes: axes.iter().map(|s| s.to_string()).collect(),
            metrics: metrics.iter().map(|s| s.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    /// Adds a row of exact values.
    pub fn push(&mut self, axis: Vec<f64>, values: Vec<f64>) {
        let n = values.len();
        self.push_with_ci(axis, values, vec![None; n]);
    }

    pub fn push_with_ci(&mut self, axis: Vec<f64>, values: Vec<f64>, half_width: Vec<Option<f64>>) {
        assert_eq!(axis.len(), self.axes.len(), "axis arity");
        assert_eq!(values.len(), self.metrics.len(), "metric arity");
        assert_eq!(half_width.len(), values.len(), "half-width arity");
        self.rows.push(SweepRow { axis, values, half_width });
    }

    /// Sorts rows lexicographically by axis values.
    pub fn sort(&mut self) {
        self.rows.sort_by(|a, b| {
            a.axis.iter().zip(&b.axis).map(|(x, y)| x.total_cmp(y)).find(|o| o.is_ne()).unwrap_or(std::cmp::Ordering::Equal)
        });
    }

    /// Metric columns that carry a confidence width in at least one row.
    fn ci_columns(&self) -> Vec<bool> {
        (0..self.metrics.len()).map(|k| self.rows.iter().any(|r| r.half_width[k].is_some())).collect()
    }

    pub fn column(&self, metric: &str) -> Option<Vec<f64>> {
        let k = self.metrics.iter().position(|m| m == metric)?;
        Some(self.rows.iter().map(|r| r.values[k]).collect())
    }

    /// CSV text: a header row, then one line per row. Metrics with
    /// confidence widths get a `<metric>_ci95` column after them.
    pub fn to_csv(&self) -> Result<String, ReportError> {
        let ci = self.ci_columns();
        let mut w = csv::Writer::from_writer(Vec::new());
        let mut header: Vec<String> = self.axes.clone();
        for (k, m) in self.metrics.iter().enumerate() {
            header.push(m.clone());
            if ci[k] {
                header.push(format!("{m}_ci95"));
            }
        }
        w.write_record(&header)?;
        for row in &self.rows {
            let mut rec: Vec<String> = row.axis.iter().map(|v| fmt(*v)).collect();
            for (k, v) in row.values.iter().enumerate() {
                rec.push(fmt(*v));
                if ci[k] {
                    rec.push(row.half_width[k].map(fmt).unwrap_or_default());
                }
            }
            w.write_record(&rec)?;
        }
        let bytes = w.into_inner().map_err(|e| ReportError::Io(e.into_error()))?;
        Ok(String::from_utf8(bytes).expect("csv of ascii numbers"))
    }
}

/// Shortest text that reads back to the same f64.
fn fmt(v: f64) -> String {
    if v.is_nan() {
        "NaN".into()
    } else {
        format!("{v:?}")
    }
}

/// Writes `<stem>.csv` and a `<stem>.json` manifest holding `manifest` plus
/// the table layout. Both files are written to a temporary name and renamed.
pub fn write_table(
    table: &SweepResult,
    manifest: &serde_json::Value,
    dir: &Path,
    stem: &str,
) -> Result<(PathBuf, PathBuf), ReportError> {
    fs::create_dir_all(dir)?;
    let csv_path = dir.join(format!("{stem}.csv"));
    let json_path = dir.join(format!("{stem}.json"));
    write_atomic(&csv_path, table.to_csv()?.as_bytes())?;
    let doc = serde_json::json!({
        "table": format!("{stem}.csv"),
        "figure": table.figure,
        "axes": table.axes,
        "metrics": table.metrics,
        "rows": table.rows.len(),
        "manifest": manifest,
    });
    let mut text = serde_json::to_string_pretty(&doc)?;
    text.push('\n');
    write_atomic(&json_path, text.as_bytes())?;
    Ok((csv_path, json_path))
}

/// Writes through a sibling temporary file and renames it over `path`.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), ReportError> {
    let name = path.file_name().and_then(|n| n.to_str()).unwrap_or("out");
    let tmp = path.with_file_name(format!(".{name}.tmp{}", std::process::id()));
    let res = (|| {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
        fs::rename(&tmp, path)
    })();
    if res.is_err() {
        let _ = fs::remove_file(&tmp);
    }
    Ok(res?)
}
