use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::datagen::{fmt_f64, PrecisionMatrix};
use crate::diffcore::Tensor;
use crate::error::{Error, Result};
use crate::models::{Checkpoint, Encoder};

/// Default threshold on `|Θ_ij|` that defines a true edge.
pub const EDGE_EPS: f64 = 1e-8;

/// `G_ij` = gate on coordinate `j` when the encoder is queried with the one-hot mask `e_i`.
pub fn gate_matrix(ckpt: &Checkpoint) -> Result<Tensor> {
    if let Encoder::Fixed(_) = ckpt.encoder {
        return Err(Error::UnsupportedEncoder(
            "a gate matrix needs an amortized encoder; this checkpoint has fixed gates".into(),
        ));
    }
    ckpt.encoder.gates(&Tensor::identity(ckpt.d))
}

/// Upper-triangular index pairs `(i, j)`, `i < j`, in row-major order.
pub fn upper_pairs(d: usize) -> Vec<(usize, usize)> {
    (0..d).flat_map(|i| (i + 1..d).map(move |j| (i, j))).collect()
}

/// `s_ij = max(G_ij, G_ji)` for `i < j`, ordered as [`upper_pairs`].
pub fn symmetrize(g: &Tensor) -> Result<Vec<f64>> {
    let (r, c) = g.dims2()?;
    if r != c {
        return Err(Error::Shape(format!("gate matrix must be square, got {r}×{c}")));
    }
    Ok(upper_pairs(r)
        .into_iter()
        .map(|(i, j)| g.get2(i, j).max(g.get2(j, i)))
        .collect())
}

/// `|Θ_ij| > eps` for `i < j`, ordered as [`upper_pairs`].
pub fn ground_truth_edges(theta: &PrecisionMatrix, eps: f64) -> Result<Vec<bool>> {
    if !(eps >= 0.0) {
        return Err(Error::Parameter(format!("edge eps must be non-negative, got {eps}")));
    }
    Ok(upper_pairs(theta.d())
        .into_iter()
        .map(|(i, j)| theta.get(i, j).abs() > eps)
        .collect())
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RocPoint {
    /// Scores `≥ threshold` are predicted edges; the first point uses `+∞`.
    pub threshold: f64,
    pub fpr: f64,
    pub tpr: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RocCurve {
    pub points: Vec<RocPoint>,
    pub auc: f64,
}

/// ROC sweep over the distinct scores, highest first. Tied scores flip
/// together, so the trapezoid area equals the Mann–Whitney statistic.
pub fn roc_auc(scores: &[f64], labels: &[bool]) -> Result<RocCurve> {
    if scores.len() != labels.len() {
        return Err(Error::Shape(format!("{} scores for {} labels", scores.len(), labels.len())));
    }
    if scores.iter().any(|s| !s.is_finite()) {
        return Err(Error::Numeric("edge scores must be finite".into()));
    }
    let pos = labels.iter().filter(|&&l| l).count();
    let neg = labels.len() - pos;
    if pos == 0 || neg == 0 {
        return Err(Error::Degenerate(format!(
            "ROC rates are undefined with {pos} positive and {neg} negative labels"
        )));
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]));

    let mut points = vec![RocPoint {
        threshold: f64::INFINITY,
        fpr: 0.0,
        tpr: 0.0,
    }];
    let (mut tp, mut fp) = (0usize, 0usize);
    let mut auc = 0.0;
    let mut k = 0;
    while k < order.len() {
        let threshold = scores[order[k]];
        while k < order.len() && scores[order[k]] == threshold {
            if labels[order[k]] {
                tp += 1;
            } else {
                fp += 1;
            }
            k += 1;
        }
        let point = RocPoint {
            threshold,
            fpr: fp as f64 / neg as f64,
            tpr: tp as f64 / pos as f64,
        };
        let prev = points.last().expect("curve starts at the origin");
        auc += (point.fpr - prev.fpr) * (point.tpr + prev.tpr) / 2.0;
        points.push(point);
    }
    Ok(RocCurve { points, auc })
}

impl RocCurve {
    /// `threshold,fpr,tpr`, one line per swept threshold.
    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let mut out = String::from("threshold,fpr,tpr\n");
        for p in &self.points {
            out.push_str(&format!("{},{},{}\n", fmt_f64(p.threshold), fmt_f64(p.fpr), fmt_f64(p.tpr)));
        }
        std::fs::write(path, out).map_err(|e| Error::io(path, e))
    }
}

/// Gate matrix, symmetrized scores and labels for one checkpoint.
#[derive(Clone, Debug, PartialEq)]
pub struct EdgeScores {
    pub gate_matrix: Tensor,
    pub scores: Vec<f64>,
    pub labels: Vec<bool>,
}

impl EdgeScores {
    pub fn new(ckpt: &Checkpoint, theta: &PrecisionMatrix) -> Result<Self> {
        if theta.d() != ckpt.d {
            return Err(Error::Shape(format!(
                "checkpoint has d = {} but the precision matrix is {}×{}",
                ckpt.d,
                theta.d(),
                theta.d()
            )));
        }
        let gate_matrix = gate_matrix(ckpt)?;
        Ok(Self {
            scores: symmetrize(&gate_matrix)?,
            labels: ground_truth_edges(theta, EDGE_EPS)?,
            gate_matrix,
        })
    }

    pub fn roc(&self) -> Result<RocCurve> {
        roc_auc(&self.scores, &self.labels)
    }

    /// Mean gate over true-edge entries and over non-edge entries (both directions).
    pub fn mean_on_off(&self) -> (f64, f64) {
        let d = self.gate_matrix.rows();
        let (mut on, mut n_on, mut off, mut n_off) = (0.0, 0, 0.0, 0);
        for (&(i, j), &l) in upper_pairs(d).iter().zip(&self.labels) {
            let v = self.gate_matrix.get2(i, j) + self.gate_matrix.get2(j, i);
            if l {
                on += v;
                n_on += 2;
            } else {
                off += v;
                n_off += 2;
            }
        }
        (on / n_on.max(1) as f64, off / n_off.max(1) as f64)
    }
}
