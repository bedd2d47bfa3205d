use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::graph::GraphSpec;
use super::sample::MarginalTransform;
use crate::diffcore::Tensor;
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ColumnScale {
    pub mean: f64,
    pub std: f64,
}

/// Provenance of a dataset.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DatasetMeta {
    pub source: String,
    pub graph: Option<GraphSpec>,
    pub transform: Option<MarginalTransform>,
    pub seed: Option<u64>,
    pub column_names: Option<Vec<String>>,
    /// Per-column constants removed by standardization, if any was applied.
    pub standardization: Option<Vec<ColumnScale>>,
    pub notes: Vec<String>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    /// `[n × d]`.
    pub samples: Tensor,
    pub meta: DatasetMeta,
}

/// Formats a float with 17 significant digits, enough to round-trip any `f64`.
pub fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

/// `data.csv` → `data.meta.json`.
pub fn meta_path(csv_path: &Path) -> PathBuf {
    let stem = csv_path.file_stem().and_then(|s| s.to_str()).unwrap_or("data");
    csv_path.with_file_name(format!("{stem}.meta.json"))
}

impl Dataset {
    pub fn new(samples: Tensor, meta: DatasetMeta) -> Result<Self> {
        let (n, _) = samples.dims2()?;
        if n == 0 {
            return Err(Error::InsufficientData("dataset has no rows".into()));
        }
        Ok(Self { samples, meta })
    }

    pub fn n(&self) -> usize {
        self.samples.rows()
    }

    pub fn d(&self) -> usize {
        self.samples.cols()
    }

    /// Writes `x0,…,x{d−1}` CSV plus a `<stem>.meta.json` sidecar.
    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        write_matrix_csv(path, &self.samples, &default_header(self.d()))?;
        let meta = serde_json::to_string_pretty(&self.meta).expect("dataset meta always serializes");
        let mp = meta_path(path);
        std::fs::write(&mp, meta + "\n").map_err(|e| Error::io(&mp, e))
    }

    /// Reads a CSV written by [`Dataset::save`]. The meta sidecar is optional.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let (header, samples) = read_matrix_csv(path)?;
        let mp = meta_path(path);
        let mut meta = if mp.exists() {
            let text = std::fs::read_to_string(&mp).map_err(|e| Error::io(&mp, e))?;
            serde_json::from_str(&text).map_err(|e| Error::Format(format!("{}: {e}", mp.display())))?
        } else {
            DatasetMeta {
                source: path.display().to_string(),
                ..DatasetMeta::default()
            }
        };
        if meta.column_names.is_none() && header != default_header(header.len()) {
            meta.column_names = Some(header);
        }
        Dataset::new(samples, meta)
    }
}

pub(crate) fn default_header(d: usize) -> Vec<String> {
    (0..d).map(|j| format!("x{j}")).collect()
}

/// Writes a matrix as CSV with the given header and 17-significant-digit cells.
pub fn write_matrix_csv(path: &Path, m: &Tensor, header: &[String]) -> Result<()> {
    let (n, d) = m.dims2()?;
    if header.len() != d {
        return Err(Error::Shape(format!("{} header names for {d} columns", header.len())));
    }
    let mut w = csv::Writer::from_path(path).map_err(|e| csv_err(path, e))?;
    w.write_record(header).map_err(|e| csv_err(path, e))?;
    for i in 0..n {
        w.write_record(m.row(i).iter().map(|&v| fmt_f64(v)))
            .map_err(|e| csv_err(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// Reads a numeric CSV with a header row. Returns the header and an `[n × d]` matrix.
pub fn read_matrix_csv(path: &Path) -> Result<(Vec<String>, Tensor)> {
    let mut r = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .from_path(path)
        .map_err(|e| csv_err(path, e))?;
    let header: Vec<String> = r
        .headers()
        .map_err(|e| csv_err(path, e))?
        .iter()
        .map(|s| s.trim().to_string())
        .collect();
    let d = header.len();
    let mut data = Vec::new();
    let mut n = 0;
    for (i, rec) in r.records().enumerate() {
        let rec = rec.map_err(|e| csv_err(path, e))?;
        let row = i + 1;
        if rec.len() != d {
            return Err(Error::Ingestion {
                row,
                column: rec.len().min(d),
                reason: format!("expected {d} fields, found {}", rec.len()),
            });
        }
        for (j, cell) in rec.iter().enumerate() {
            let cell = cell.trim();
            let v: f64 = cell.parse().map_err(|_| Error::Ingestion {
                row,
                column: j,
                reason: if cell.is_empty() {
                    "missing value".into()
                } else {
                    format!("not a number: {cell:?}")
                },
            })?;
            if !v.is_finite() {
                return Err(Error::Ingestion {
                    row,
                    column: j,
                    reason: format!("non-finite value {cell:?}"),
                });
            }
            data.push(v);
        }
        n += 1;
    }
    if n == 0 {
        return Err(Error::InsufficientData(format!("{} has no data rows", path.display())));
    }
    Ok((header, Tensor::new(vec![n, d], data)?))
}

fn csv_err(path: &Path, e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::io(path, io),
        other => Error::Format(format!("{}: {other:?}", path.display())),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::datagen::{generate, GraphSpec, MarginalTransform};

    #[test]
    fn csv_round_trip_is_bit_exact_and_keeps_meta() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("data.csv");
        let (_, ds) = generate(&GraphSpec::chain(6, vec![0.8]), &MarginalTransform::truncated(), 20, 3).unwrap();
        ds.save(&path).unwrap();
        assert!(dir.path().join("data.meta.json").exists());
        let text = std::fs::read_to_string(&path).unwrap();
        assert!(text.starts_with("x0,x1,x2,x3,x4,x5\n"));
        let back = Dataset::load(&path).unwrap();
        assert_eq!(back, ds);
    }

    #[test]
    fn negative_infinite_tau_survives_json() {
        let meta = DatasetMeta {
            transform: Some(MarginalTransform::Truncated {
                tau: f64::NEG_INFINITY,
                gibbs_burnin: 1,
                gibbs_thin: 1,
            }),
            ..DatasetMeta::default()
        };
        let back: DatasetMeta = serde_json::from_str(&serde_json::to_string(&meta).unwrap()).unwrap();
        assert_eq!(back, meta);
    }

    #[test]
    fn bad_cells_name_their_row_and_column() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.csv");
        std::fs::write(&path, "a,b\n1,2\n3,oops\n").unwrap();
        match read_matrix_csv(&path).unwrap_err() {
            Error::Ingestion { row, column, .. } => assert_eq!((row, column), (2, 1)),
            e => panic!("{e}"),
        }
        std::fs::write(&path, "a,b\n1,2\n3\n").unwrap();
        assert!(matches!(read_matrix_csv(&path), Err(Error::Ingestion { row: 2, .. })));
        std::fs::write(&path, "a,b\n").unwrap();
        assert!(matches!(read_matrix_csv(&path), Err(Error::InsufficientData(_))));
    }

    #[test]
    fn seventeen_digits_round_trip() {
        for v in [0.1, 1.0 / 3.0, -2.5e-300, 1.7976931348623157e308, f64::MIN_POSITIVE] {
            assert_eq!(fmt_f64(v).parse::<f64>().unwrap().to_bits(), v.to_bits());
        }
    }
}
