//! Tabular metric export: one CSV with a fixed header, preceded by a
//! `#`-commented run manifest that embeds the full configuration, so a
//! result file is self-describing and byte-reproducible.

use std::fs::File;
use std::io::{BufWriter, Write as _};
use std::path::Path;

use crate::error::{Error, Result};

pub const CSV_HEADER: &str = "metric,dataset,method,seed,k,value";

#[derive(Clone, Debug, PartialEq)]
pub struct MetricRow {
    pub metric: String,
    pub dataset: String,
    pub method: String,
    pub seed: u64,
    /// Ranking depth / removal count where applicable, blank otherwise.
    pub k: Option<usize>,
    pub value: f64,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct MetricsReport {
    /// Key/value provenance lines written as `# key=value` above the header.
    pub manifest: Vec<(String, String)>,
    pub rows: Vec<MetricRow>,
}

fn field_ok(s: &str) -> bool {
    !s.is_empty() && !s.contains([',', '\n', '\r', '#'])
}

impl MetricsReport {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn note(&mut self, key: &str, value: impl ToString) {
        self.manifest.push((key.to_string(), value.to_string()));
    }

    pub fn push(
        &mut self,
        metric: &str,
        dataset: &str,
        method: &str,
        seed: u64,
        k: Option<usize>,
        value: f64,
    ) {
        self.rows.push(MetricRow {
            metric: metric.to_string(),
            dataset: dataset.to_string(),
            method: method.to_string(),
            seed,
            k,
            value,
        });
    }

    pub fn to_csv_string(&self) -> Result<String> {
        let mut out = String::new();
        for (key, value) in &self.manifest {
            if !field_ok(key) || value.contains(['\n', '\r']) {
                return Err(Error::Config(format!("manifest entry {key:?} is not writable")));
            }
            out.push_str(&format!("# {key}={value}\n"));
        }
        out.push_str(CSV_HEADER);
        out.push('\n');
        for row in &self.rows {
            for field in [&row.metric, &row.dataset, &row.method] {
                if !field_ok(field) {
                    return Err(Error::Config(format!("CSV field {field:?} is not writable")));
                }
            }
            if !row.value.is_finite() {
                return Err(Error::Config(format!(
                    "metric {} has non-finite value {}",
                    row.metric, row.value
                )));
            }
            let k = row.k.map(|k| k.to_string()).unwrap_or_default();
            out.push_str(&format!(
                "{},{},{},{},{},{:.10e}\n",
                row.metric, row.dataset, row.method, row.seed, k, row.value
            ));
        }
        Ok(out)
    }

    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let text = self.to_csv_string()?;
        let mut w = BufWriter::new(File::create(path).map_err(|e| Error::io(path, e))?);
        w.write_all(text.as_bytes()).map_err(|e| Error::io(path, e))?;
        Ok(())
    }

    pub fn read_csv(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut report = MetricsReport::new();
        let mut seen_header = false;
        for (ln, raw) in text.lines().enumerate() {
            let fail = |msg: String| Error::parse(path, ln + 1, msg);
            let line = raw.trim();
            if line.is_empty() {
                continue;
            }
            if let Some(note) = line.strip_prefix('#') {
                if let Some((k, v)) = note.trim().split_once('=') {
                    report.note(k.trim(), v.trim());
                }
                continue;
            }
            if !seen_header {
                if line != CSV_HEADER {
                    return Err(fail(format!("expected header {CSV_HEADER:?}, got {line:?}")));
                }
                seen_header = true;
                continue;
            }
            let fields: Vec<&str> = line.split(',').collect();
            if fields.len() != 6 {
                return Err(fail(format!("expected 6 fields, got {}", fields.len())));
            }
            let seed: u64 = fields[3].parse().map_err(|_| fail(format!("bad seed {:?}", fields[3])))?;
            let k: Option<usize> = if fields[4].is_empty() {
                None
            } else {
                Some(fields[4].parse().map_err(|_| fail(format!("bad k {:?}", fields[4])))?)
            };
            let value: f64 =
                fields[5].parse().map_err(|_| fail(format!("bad value {:?}", fields[5])))?;
            if !value.is_finite() {
                return Err(fail(format!("non-finite value {value}")));
            }
            report.push(fields[0], fields[1], fields[2], seed, k, value);
        }
        if !seen_header {
            return Err(Error::parse(path, 1, "missing CSV header"));
        }
        Ok(report)
    }
}
