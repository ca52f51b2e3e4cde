//! CSV ingestion with feature-kind inference.

use std::collections::{BTreeSet, HashMap};
use std::io::{Read, Write};
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::references::Dataset;
use crate::types::{FeatureKind, FeatureSchema, FeatureVector};

/// Header of the optional column carrying row probabilities.
pub const WEIGHT_COLUMN: &str = "__weight__";

/// Columns with at most this many distinct integral values are discrete.
pub const DEFAULT_DISCRETE_THRESHOLD: usize = 16;

const WEIGHT_WARN_TOLERANCE: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq)]
pub struct CsvSource {
    pub path: PathBuf,
    pub delimiter: u8,
    /// Per-feature kind overrides by column name.
    pub kind_overrides: HashMap<String, FeatureKind>,
    pub discrete_threshold: usize,
}

impl CsvSource {
    pub fn new(path: impl Into<PathBuf>) -> Self {
        CsvSource {
            path: path.into(),
            delimiter: b',',
            kind_overrides: HashMap::new(),
            discrete_threshold: DEFAULT_DISCRETE_THRESHOLD,
        }
    }

    pub fn with_delimiter(mut self, delimiter: u8) -> Self {
        self.delimiter = delimiter;
        self
    }

    pub fn with_kind(mut self, column: impl Into<String>, kind: FeatureKind) -> Self {
        self.kind_overrides.insert(column.into(), kind);
        self
    }
}

/// Discrete iff every value is integral and there are at most `threshold`
/// distinct values.
pub fn infer_kind(column: impl IntoIterator<Item = f64>, threshold: usize) -> FeatureKind {
    let mut distinct = BTreeSet::new();
    for v in column {
        if v.fract() != 0.0 {
            return FeatureKind::Continuous;
        }
        distinct.insert(v.to_bits());
        if distinct.len() > threshold {
            return FeatureKind::Continuous;
        }
    }
    FeatureKind::Discrete
}

pub fn load_dataset(src: &CsvSource) -> Result<Dataset> {
    let file = std::fs::File::open(&src.path).map_err(|e| {
        std::io::Error::new(e.kind(), format!("{}: {e}", src.path.display()))
    })?;
    read_dataset(file, src)
}

/// Parses CSV text. Rows and columns in errors are 1-based, counting the
/// header as row 1.
pub fn read_dataset<R: Read>(reader: R, src: &CsvSource) -> Result<Dataset> {
    let mut rdr = csv::ReaderBuilder::new()
        .delimiter(src.delimiter)
        .has_headers(true)
        .flexible(false)
        .from_reader(reader);
    let headers = rdr
        .headers()
        .map_err(|e| csv_error(&e, 1))?
        .iter()
        .map(|h| h.trim().to_string())
        .collect::<Vec<_>>();
    if headers.is_empty() || headers.iter().all(|h| h.is_empty()) {
        return Err(Error::EmptyDataset);
    }
    let weight_col = headers.iter().position(|h| h == WEIGHT_COLUMN);
    if headers.iter().filter(|h| *h == WEIGHT_COLUMN).count() > 1 {
        return Err(Error::Schema(format!("duplicate {WEIGHT_COLUMN} column")));
    }
    let feature_cols: Vec<usize> = (0..headers.len()).filter(|&c| Some(c) != weight_col).collect();
    if feature_cols.is_empty() {
        return Err(Error::Schema("no feature columns".into()));
    }

    let mut rows: Vec<Vec<f64>> = Vec::new();
    let mut weights: Vec<f64> = Vec::new();
    for (i, record) in rdr.records().enumerate() {
        let row_no = i + 2;
        let record = record.map_err(|e| csv_error(&e, row_no))?;
        let mut values = Vec::with_capacity(feature_cols.len());
        for (c, cell) in record.iter().enumerate() {
            let v: f64 = cell.trim().parse().map_err(|_| Error::Csv {
                row: row_no,
                column: c + 1,
                message: format!("cell `{cell}` is not a number"),
            })?;
            if !v.is_finite() {
                return Err(Error::Csv {
                    row: row_no,
                    column: c + 1,
                    message: format!("cell `{cell}` is not finite"),
                });
            }
            if Some(c) == weight_col {
                if v < 0.0 {
                    return Err(Error::Csv {
                        row: row_no,
                        column: c + 1,
                        message: format!("negative weight {v}"),
                    });
                }
                weights.push(v);
            } else {
                values.push(v);
            }
        }
        rows.push(values);
    }
    if rows.is_empty() {
        return Err(Error::EmptyDataset);
    }

    let names: Vec<String> = feature_cols.iter().map(|&c| headers[c].clone()).collect();
    let kinds = names
        .iter()
        .enumerate()
        .map(|(j, name)| {
            src.kind_overrides
                .get(name)
                .copied()
                .unwrap_or_else(|| infer_kind(rows.iter().map(|r| r[j]), src.discrete_threshold))
        })
        .collect();
    if let Some(unknown) = src.kind_overrides.keys().find(|k| !names.contains(k)) {
        return Err(Error::Schema(format!("kind override for unknown column `{unknown}`")));
    }
    let schema = FeatureSchema::new(names, kinds)?;

    let weights = weight_col.map(|_| normalize_weights(weights)).transpose()?;
    let rows = rows.into_iter().map(FeatureVector::new).collect::<Result<Vec<_>>>()?;
    Dataset::new(schema, rows, weights)
}

fn normalize_weights(weights: Vec<f64>) -> Result<Vec<f64>> {
    let total: f64 = weights.iter().sum();
    if !(total > 0.0) {
        return Err(Error::InvalidValue(format!("{WEIGHT_COLUMN} column sums to {total}")));
    }
    if (total - 1.0).abs() > WEIGHT_WARN_TOLERANCE {
        log::warn!("{WEIGHT_COLUMN} column sums to {total}; renormalizing");
    }
    Ok(weights.into_iter().map(|w| w / total).collect())
}

fn csv_error(e: &csv::Error, fallback_row: usize) -> Error {
    let row = e
        .position()
        .map(|p| p.line() as usize)
        .unwrap_or(fallback_row);
    let message = match e.kind() {
        csv::ErrorKind::UnequalLengths { expected_len, len, .. } => {
            format!("expected {expected_len} fields, found {len}")
        }
        _ => e.to_string(),
    };
    let column = match e.kind() {
        csv::ErrorKind::UnequalLengths { expected_len, len, .. } => (*expected_len.min(len) as usize) + 1,
        _ => 0,
    };
    Error::Csv { row, column, message }
}

/// Writes `dataset` as CSV, with a weight column when weights were explicit.
/// Floats use the shortest representation that parses back identically.
pub fn write_dataset<W: Write>(dataset: &Dataset, writer: W) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(writer);
    let mut header: Vec<String> = dataset.schema().names().to_vec();
    if dataset.has_explicit_weights() {
        header.push(WEIGHT_COLUMN.to_string());
    }
    wtr.write_record(&header).map_err(|e| csv_error(&e, 1))?;
    for (i, (row, w)) in dataset.rows().iter().zip(dataset.weights()).enumerate() {
        let mut cells: Vec<String> = row.values().iter().map(|v| format!("{v:?}")).collect();
        if dataset.has_explicit_weights() {
            cells.push(format!("{w:?}"));
        }
        wtr.write_record(&cells).map_err(|e| csv_error(&e, i + 2))?;
    }
    wtr.flush()?;
    Ok(())
}

pub fn save_dataset(dataset: &Dataset, path: &Path) -> Result<()> {
    let file = std::fs::File::create(path)?;
    write_dataset(dataset, std::io::BufWriter::new(file))
}
