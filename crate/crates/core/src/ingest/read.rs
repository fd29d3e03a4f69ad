use std::collections::{BTreeMap, HashMap};
use std::fs::File;
use std::io::{BufRead, BufReader};
use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use super::{split_flags, BuildConfig, KernelRef, ProfileRecord, RawCounters, RecordCounters};
use crate::roofline::{CounterVector, Metric, NormRanges};

/// Record fields a file column can be mapped onto.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Field {
    KernelId,
    Fingerprint,
    SourcePath,
    Architecture,
    CompilerFlags,
    Toolkit,
    Flops,
    L1Bytes,
    L2Bytes,
    HbmReadBytes,
    HbmWriteBytes,
    DurationS,
    L1Requests,
    L1Hits,
    L2Requests,
    L2Hits,
}

impl Field {
    pub const ALL: [Field; 16] = [
        Field::KernelId,
        Field::Fingerprint,
        Field::SourcePath,
        Field::Architecture,
        Field::CompilerFlags,
        Field::Toolkit,
        Field::Flops,
        Field::L1Bytes,
        Field::L2Bytes,
        Field::HbmReadBytes,
        Field::HbmWriteBytes,
        Field::DurationS,
        Field::L1Requests,
        Field::L1Hits,
        Field::L2Requests,
        Field::L2Hits,
    ];

    const RAW: [Field; 10] = [
        Field::Flops,
        Field::L1Bytes,
        Field::L2Bytes,
        Field::HbmReadBytes,
        Field::HbmWriteBytes,
        Field::DurationS,
        Field::L1Requests,
        Field::L1Hits,
        Field::L2Requests,
        Field::L2Hits,
    ];

    /// Default column name.
    pub fn name(self) -> &'static str {
        match self {
            Field::KernelId => "kernel_id",
            Field::Fingerprint => "fingerprint",
            Field::SourcePath => "source_path",
            Field::Architecture => "architecture",
            Field::CompilerFlags => "compiler_flags",
            Field::Toolkit => "toolkit",
            Field::Flops => "flops",
            Field::L1Bytes => "l1_bytes",
            Field::L2Bytes => "l2_bytes",
            Field::HbmReadBytes => "hbm_read_bytes",
            Field::HbmWriteBytes => "hbm_write_bytes",
            Field::DurationS => "duration_s",
            Field::L1Requests => "l1_requests",
            Field::L1Hits => "l1_hits",
            Field::L2Requests => "l2_requests",
            Field::L2Hits => "l2_hits",
        }
    }
}

/// Assignment of file columns to record fields and metrics. Anything not
/// mapped explicitly is looked up under its default name (the field name,
/// or the metric key for pre-derived records).
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ColumnMap {
    #[serde(default)]
    pub fields: BTreeMap<Field, String>,
    #[serde(default)]
    pub metrics: BTreeMap<Metric, String>,
}

impl ColumnMap {
    pub fn from_toml_str(text: &str) -> Result<Self, IngestError> {
        toml::from_str(text).map_err(|e| IngestError::Config(e.to_string()))
    }

    fn field(&self, f: Field) -> &str {
        self.fields.get(&f).map_or(f.name(), String::as_str)
    }

    fn metric(&self, m: Metric) -> &str {
        self.metrics.get(&m).map_or(m.key(), String::as_str)
    }

    fn explicit_columns(&self) -> impl Iterator<Item = &str> {
        self.fields.values().chain(self.metrics.values()).map(String::as_str)
    }
}

#[derive(Debug, thiserror::Error)]
pub enum IngestError {
    #[error("i/o: {0}")]
    Io(#[from] std::io::Error),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("mapped column `{0}` does not exist in the file")]
    UnknownColumn(String),
    #[error("unsupported input format `{0}` (expected .csv or .jsonl)")]
    Format(String),
    #[error("configuration: {0}")]
    Config(String),
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RowDiagnostic {
    pub row: usize,
    pub message: String,
}

#[derive(Debug, Default)]
pub struct IngestResult {
    pub records: Vec<ProfileRecord>,
    pub rejected: Vec<RowDiagnostic>,
}

/// Reads a CSV or JSON-lines file (chosen by extension). Rows that fail
/// validation are rejected whole with a diagnostic; the rest are kept.
/// Pre-derived metric values are checked against `ranges`.
pub fn ingest(path: impl AsRef<Path>, map: &ColumnMap, ranges: &NormRanges) -> Result<IngestResult, IngestError> {
    let path = path.as_ref();
    let ext = path.extension().and_then(|e| e.to_str()).unwrap_or("").to_ascii_lowercase();
    match ext.as_str() {
        "csv" => ingest_csv(File::open(path)?, map, ranges),
        "jsonl" | "ndjson" => ingest_jsonl(File::open(path)?, map, ranges),
        other => Err(IngestError::Format(other.to_string())),
    }
}

pub(crate) fn ingest_csv(
    reader: impl std::io::Read,
    map: &ColumnMap,
    ranges: &NormRanges,
) -> Result<IngestResult, IngestError> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let headers = rdr.headers()?.clone();
    for col in map.explicit_columns() {
        if !headers.iter().any(|h| h == col) {
            return Err(IngestError::UnknownColumn(col.to_string()));
        }
    }
    let mut out = IngestResult::default();
    for (i, rec) in rdr.records().enumerate() {
        let row = i + 1;
        let rec = match rec {
            Ok(r) => r,
            Err(e) => {
                out.rejected.push(RowDiagnostic { row, message: e.to_string() });
                continue;
            }
        };
        let cells: HashMap<&str, String> =
            headers.iter().zip(rec.iter()).filter(|(_, v)| !v.is_empty()).map(|(h, v)| (h, v.to_string())).collect();
        push_row(&mut out, row, parse_row(&cells, map, ranges));
    }
    Ok(out)
}

pub(crate) fn ingest_jsonl(
    reader: impl std::io::Read,
    map: &ColumnMap,
    ranges: &NormRanges,
) -> Result<IngestResult, IngestError> {
    let mut out = IngestResult::default();
    for (i, line) in BufReader::new(reader).lines().enumerate() {
        let row = i + 1;
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let obj = match serde_json::from_str::<Value>(&line) {
            Ok(Value::Object(o)) => o,
            Ok(_) => {
                out.rejected.push(RowDiagnostic { row, message: "line is not a JSON object".into() });
                continue;
            }
            Err(e) => {
                out.rejected.push(RowDiagnostic { row, message: e.to_string() });
                continue;
            }
        };
        let cells: HashMap<&str, String> = obj
            .iter()
            .filter_map(|(k, v)| {
                let text = match v {
                    Value::Null => return None,
                    Value::String(s) => s.clone(),
                    Value::Array(items) => items
                        .iter()
                        .map(|x| x.as_str().map_or_else(|| x.to_string(), str::to_string))
                        .collect::<Vec<_>>()
                        .join(" "),
                    other => other.to_string(),
                };
                Some((k.as_str(), text))
            })
            .collect();
        if let Some(col) = map.explicit_columns().find(|c| !obj.contains_key(*c)) {
            out.rejected.push(RowDiagnostic { row, message: format!("mapped column `{col}` missing") });
            continue;
        }
        push_row(&mut out, row, parse_row(&cells, map, ranges));
    }
    Ok(out)
}

fn push_row(out: &mut IngestResult, row: usize, parsed: Result<ProfileRecord, String>) {
    match parsed {
        Ok(mut r) => {
            r.row = row;
            out.records.push(r);
        }
        Err(message) => out.rejected.push(RowDiagnostic { row, message }),
    }
}

fn number(cells: &HashMap<&str, String>, col: &str) -> Result<f64, String> {
    let text = cells.get(col).ok_or_else(|| format!("missing column `{col}`"))?;
    let v: f64 = text.trim().parse().map_err(|_| format!("`{col}` is not numeric: {text:?}"))?;
    if !v.is_finite() || v < 0.0 {
        return Err(format!("`{col}` must be finite and non-negative, got {v}"));
    }
    Ok(v)
}

fn parse_row(cells: &HashMap<&str, String>, map: &ColumnMap, ranges: &NormRanges) -> Result<ProfileRecord, String> {
    let text = |f: Field| cells.get(map.field(f)).cloned();
    let kernel = KernelRef {
        id: text(Field::KernelId).ok_or_else(|| format!("missing column `{}`", map.field(Field::KernelId)))?,
        fingerprint: text(Field::Fingerprint),
        source_path: text(Field::SourcePath),
    };
    let architecture = text(Field::Architecture)
        .filter(|a| !a.trim().is_empty())
        .ok_or_else(|| format!("missing column `{}`", map.field(Field::Architecture)))?;
    let config = BuildConfig {
        architecture: architecture.trim().to_string(),
        compiler_flags: text(Field::CompilerFlags).map(|f| split_flags(&f)).unwrap_or_default(),
        toolkit: text(Field::Toolkit),
    };

    let has_raw = Field::RAW.iter().any(|&f| cells.contains_key(map.field(f)));
    let has_metrics = Metric::ALL.iter().any(|&m| cells.contains_key(map.metric(m)));
    let counters = if has_raw || !has_metrics {
        let n = |f: Field| number(cells, map.field(f));
        let raw = RawCounters {
            flops: n(Field::Flops)?,
            l1_bytes: n(Field::L1Bytes)?,
            l2_bytes: n(Field::L2Bytes)?,
            hbm_read_bytes: n(Field::HbmReadBytes)?,
            hbm_write_bytes: n(Field::HbmWriteBytes)?,
            duration_s: n(Field::DurationS)?,
            l1_requests: n(Field::L1Requests)?,
            l1_hits: n(Field::L1Hits)?,
            l2_requests: n(Field::L2Requests)?,
            l2_hits: n(Field::L2Hits)?,
        };
        if raw.duration_s <= 0.0 {
            return Err(format!("duration must be positive, got {}", raw.duration_s));
        }
        if raw.l1_hits > raw.l1_requests || raw.l2_hits > raw.l2_requests {
            return Err("cache hits exceed requests".into());
        }
        RecordCounters::Raw(raw)
    } else {
        let mut metrics = CounterVector::new();
        for m in Metric::ALL {
            let v = number(cells, map.metric(m))?;
            metrics.set(m, v).map_err(|e| e.to_string())?;
        }
        let metrics = metrics.clamped(ranges).map_err(|e| e.to_string())?;
        RecordCounters::PreDerived { metrics }
    };
    Ok(ProfileRecord { row: 0, kernel, config, counters })
}
