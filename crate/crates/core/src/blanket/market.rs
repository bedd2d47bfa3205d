use std::path::Path;

use serde::{Deserialize, Serialize};

use super::query::{select, BlanketRule};
use crate::datagen::{fmt_f64, standardize_columns, Dataset, DatasetMeta};
use crate::diffcore::Tensor;
use crate::error::{Error, Result};
use crate::models::Checkpoint;

pub const DEFAULT_WINDOW: usize = 5;
pub const DEFAULT_TOPK: usize = 50;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct IngestOptions {
    /// Treat the first column as a row label (e.g. a ticker) and skip it.
    pub row_labels: bool,
}

/// Reads an entity × feature price table and standardizes each column.
pub fn ingest_market_csv(path: impl AsRef<Path>) -> Result<Dataset> {
    ingest_market_csv_with(path, IngestOptions::default())
}

pub fn ingest_market_csv_with(path: impl AsRef<Path>, opts: IngestOptions) -> Result<Dataset> {
    let path = path.as_ref();
    let mut r = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .from_path(path)
        .map_err(|e| Error::Format(format!("{}: {e}", path.display())))?;
    let skip = usize::from(opts.row_labels);
    let header: Vec<String> = r
        .headers()
        .map_err(|e| Error::Format(format!("{}: {e}", path.display())))?
        .iter()
        .skip(skip)
        .map(|s| s.trim().to_string())
        .collect();
    let d = header.len();
    if d < 2 {
        return Err(Error::InsufficientData(format!("{} has fewer than 2 feature columns", path.display())));
    }
    let mut data = Vec::new();
    let mut row_labels = Vec::new();
    for (i, rec) in r.records().enumerate() {
        let row = i + 1;
        let rec = rec.map_err(|e| Error::Ingestion {
            row,
            column: 0,
            reason: e.to_string(),
        })?;
        if rec.len() != d + skip {
            return Err(Error::Ingestion {
                row,
                column: rec.len().min(d + skip),
                reason: format!("expected {} fields, found {}", d + skip, rec.len()),
            });
        }
        if opts.row_labels {
            row_labels.push(rec[0].trim().to_string());
        }
        for (j, cell) in rec.iter().enumerate().skip(skip) {
            let cell = cell.trim();
            let reason = if cell.is_empty() {
                Some("missing value".to_string())
            } else {
                match cell.parse::<f64>() {
                    Ok(v) if v.is_finite() => {
                        data.push(v);
                        None
                    }
                    Ok(_) => Some(format!("non-finite value {cell:?}")),
                    Err(_) => Some(format!("not a number: {cell:?}")),
                }
            };
            if let Some(reason) = reason {
                return Err(Error::Ingestion { row, column: j, reason });
            }
        }
    }
    let n = data.len() / d;
    if n < 2 {
        return Err(Error::InsufficientData(format!("{} has fewer than 2 data rows", path.display())));
    }
    let (samples, scales) = standardize_columns(&Tensor::new(vec![n, d], data)?)?;
    let mut notes = vec!["columns standardized to mean 0, variance 1".to_string()];
    if opts.row_labels {
        notes.push(format!("row labels: {}", row_labels.join(" ")));
    }
    Ok(Dataset {
        samples,
        meta: DatasetMeta {
            source: path.display().to_string(),
            column_names: Some(header),
            standardization: Some(scales),
            notes,
            ..DatasetMeta::default()
        },
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WindowRecord {
    pub start: usize,
    pub past_fraction: f64,
    pub future_fraction: f64,
    pub selected: Vec<usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MarketReport {
    pub window_len: usize,
    pub topk: usize,
    pub windows: Vec<WindowRecord>,
}

/// Splits a window's top-k blanket into days before and after the window.
///
/// Fractions are taken over the selected days, so they sum to 1 even when
/// fewer than `topk` days lie outside the window.
pub fn window_blanket(ckpt: &Checkpoint, start: usize, window_len: usize, topk: usize) -> Result<WindowRecord> {
    window_records(ckpt, &[start], window_len, topk).map(|mut v| v.remove(0))
}

fn window_records(ckpt: &Checkpoint, starts: &[usize], window_len: usize, topk: usize) -> Result<Vec<WindowRecord>> {
    let d = ckpt.d;
    if window_len == 0 || window_len >= d {
        return Err(Error::Parameter(format!("window length {window_len} must lie in 1..{d}")));
    }
    if let Some(&s) = starts.iter().find(|&&s| s + window_len > d) {
        return Err(Error::Parameter(format!("window [{s}, {}) exceeds d = {d}", s + window_len)));
    }
    let mut masks = vec![0.0; starts.len() * d];
    for (r, &s) in starts.iter().enumerate() {
        masks[r * d + s..r * d + s + window_len].fill(1.0);
    }
    let masks = Tensor::new(vec![starts.len(), d], masks)?;
    let gates = ckpt.encoder.gates(&masks)?;
    starts
        .iter()
        .enumerate()
        .map(|(r, &start)| {
            let selected = select(gates.row(r), masks.row(r), BlanketRule::TopK { k: topk })?;
            let past = selected.iter().filter(|&&j| j < start).count();
            let total = selected.len() as f64;
            Ok(WindowRecord {
                start,
                past_fraction: past as f64 / total,
                future_fraction: (selected.len() - past) as f64 / total,
                selected,
            })
        })
        .collect()
}

/// Sweeps every window position of a checkpoint trained with window masks.
pub fn market_analysis(data: &Dataset, ckpt: &Checkpoint, window_len: usize, topk: usize) -> Result<MarketReport> {
    if data.d() != ckpt.d {
        return Err(Error::Shape(format!("data has d = {} but checkpoint has d = {}", data.d(), ckpt.d)));
    }
    if topk == 0 {
        return Err(Error::Parameter("top-k needs k ≥ 1".into()));
    }
    if window_len == 0 || window_len >= ckpt.d {
        return Err(Error::Parameter(format!("window length {window_len} must lie in 1..{}", ckpt.d)));
    }
    let starts: Vec<usize> = (0..=ckpt.d - window_len).collect();
    Ok(MarketReport {
        window_len,
        topk,
        windows: window_records(ckpt, &starts, window_len, topk)?,
    })
}

impl MarketReport {
    /// `window_start,past_fraction,future_fraction`.
    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let mut out = String::from("window_start,past_fraction,future_fraction\n");
        for w in &self.windows {
            out.push_str(&format!("{},{},{}\n", w.start, fmt_f64(w.past_fraction), fmt_f64(w.future_fraction)));
        }
        std::fs::write(path, out).map_err(|e| Error::io(path, e))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::{AmortizedGateEncoder, Encoder, VelocityNet, FORMAT_VERSION};
    use crate::trainer::TrainConfig;

    fn ckpt(d: usize) -> Checkpoint {
        Checkpoint {
            format_version: FORMAT_VERSION,
            d,
            seed: 0,
            train_config: TrainConfig::default(),
            encoder: Encoder::Amortized(AmortizedGateEncoder::new(d, 16, 7).unwrap()),
            velocity: VelocityNet::new(d, 4, 0).unwrap(),
            meta: Default::default(),
        }
    }

    fn write(dir: &tempfile::TempDir, name: &str, text: &str) -> std::path::PathBuf {
        let p = dir.path().join(name);
        std::fs::write(&p, text).unwrap();
        p
    }

    #[test]
    fn ingestion_standardizes_and_keeps_names() {
        let dir = tempfile::tempdir().unwrap();
        let p = write(&dir, "m.csv", "d1,d2,d3\n1,2,3\n2,4,9\n3,6,0\n");
        let ds = ingest_market_csv(&p).unwrap();
        assert_eq!((ds.n(), ds.d()), (3, 3));
        assert_eq!(ds.meta.column_names.as_deref().unwrap(), ["d1", "d2", "d3"]);
        let scales = ds.meta.standardization.unwrap();
        assert_eq!(scales[0].mean, 2.0);
        let col0: Vec<f64> = (0..3).map(|i| ds.samples.get2(i, 0)).collect();
        assert!(col0.iter().sum::<f64>().abs() < 1e-12);

        let labelled = write(&dir, "l.csv", "ticker,d1,d2\nAAA,1,5\nBBB,2,3\n");
        let ds = ingest_market_csv_with(&labelled, IngestOptions { row_labels: true }).unwrap();
        assert_eq!(ds.d(), 2);
    }

    #[test]
    fn ingestion_errors_name_positions() {
        let dir = tempfile::tempdir().unwrap();
        let missing = write(&dir, "a.csv", "d1,d2,d3\n1,2,3\n4,,6\n7,8,1\n");
        match ingest_market_csv(&missing).unwrap_err() {
            Error::Ingestion { row, column, reason } => {
                assert_eq!((row, column), (2, 1));
                assert!(reason.contains("missing"));
            }
            e => panic!("{e}"),
        }
        let ragged = write(&dir, "b.csv", "d1,d2\n1,2\n3\n");
        assert!(matches!(ingest_market_csv(&ragged), Err(Error::Ingestion { row: 2, .. })));
        let text = write(&dir, "c.csv", "d1,d2\n1,x\n3,4\n");
        assert!(matches!(ingest_market_csv(&text), Err(Error::Ingestion { row: 1, column: 1, .. })));
        let constant = write(&dir, "e.csv", "d1,d2\n1,5\n2,5\n");
        assert!(matches!(ingest_market_csv(&constant), Err(Error::Degenerate(_))));
    }

    #[test]
    fn market_fractions_partition_the_blanket() {
        let d = 30;
        let c = ckpt(d);
        let data = crate::datagen::isotropic_gaussian(10, d, 0.0, 1.0, 1).unwrap();
        let report = market_analysis(&data, &c, 5, 8).unwrap();
        assert_eq!(report.windows.len(), d - 5 + 1);
        for w in &report.windows {
            assert!((w.past_fraction + w.future_fraction - 1.0).abs() < 1e-15);
            assert_eq!(w.selected.len(), 8);
            assert!(w.selected.iter().all(|&j| j < w.start || j >= w.start + 5));
        }
        assert_eq!(report.windows[0].past_fraction, 0.0);
        assert_eq!(report.windows.last().unwrap().future_fraction, 0.0);
        assert_eq!(window_blanket(&c, 3, 5, 8).unwrap(), report.windows[3]);
        assert!(matches!(market_analysis(&data, &c, d, 8), Err(Error::Parameter(_))));
    }
}
