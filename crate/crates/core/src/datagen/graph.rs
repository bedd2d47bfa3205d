use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::diffcore::Tensor;
use crate::error::{Error, Result};

/// Sparsity pattern of a Gaussian graphical model.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum GraphKind {
    /// Band structure: `Θ_ij = weights[|i−j|−1]` for `0 < |i−j| ≤ weights.len()`.
    Chain { d: usize, weights: Vec<f64> },
    /// `side × side` grid with 4-neighbour edges of constant weight.
    Lattice { side: usize, weight: f64 },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GraphSpec {
    pub kind: GraphKind,
    /// Added to each row's absolute off-diagonal sum to form the diagonal.
    pub margin: f64,
}

impl GraphSpec {
    pub const DEFAULT_MARGIN: f64 = 1.0;
    pub const DEFAULT_LATTICE_WEIGHT: f64 = 0.3;

    pub fn chain(d: usize, weights: Vec<f64>) -> Self {
        Self {
            kind: GraphKind::Chain { d, weights },
            margin: Self::DEFAULT_MARGIN,
        }
    }

    pub fn lattice(side: usize) -> Self {
        Self {
            kind: GraphKind::Lattice {
                side,
                weight: Self::DEFAULT_LATTICE_WEIGHT,
            },
            margin: Self::DEFAULT_MARGIN,
        }
    }

    pub fn d(&self) -> usize {
        match &self.kind {
            GraphKind::Chain { d, .. } => *d,
            GraphKind::Lattice { side, .. } => side * side,
        }
    }

    pub fn build(&self) -> Result<PrecisionMatrix> {
        match &self.kind {
            GraphKind::Chain { .. } => build_chain_precision(self),
            GraphKind::Lattice { .. } => build_lattice_precision(self),
        }
    }
}

/// Symmetric, strictly diagonally dominant precision matrix `Θ`.
#[derive(Clone, Debug, PartialEq)]
pub struct PrecisionMatrix {
    pub theta: Tensor,
}

impl PrecisionMatrix {
    /// Wraps a square matrix after checking symmetry and positive definiteness.
    pub fn new(theta: Tensor) -> Result<Self> {
        let (r, c) = theta.dims2()?;
        if r != c {
            return Err(Error::Shape(format!("precision matrix must be square, got {r}×{c}")));
        }
        for i in 0..r {
            for j in 0..i {
                if theta.get2(i, j) != theta.get2(j, i) {
                    return Err(Error::Parameter(format!("precision matrix is not symmetric at ({i},{j})")));
                }
            }
        }
        let p = Self { theta };
        p.cholesky()?;
        Ok(p)
    }

    pub fn d(&self) -> usize {
        self.theta.rows()
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.theta.get2(i, j)
    }

    pub(crate) fn to_dmatrix(&self) -> DMatrix<f64> {
        let d = self.d();
        DMatrix::from_row_slice(d, d, self.theta.data())
    }

    /// Lower Cholesky factor `L` with `Θ = L Lᵀ`.
    pub fn cholesky(&self) -> Result<DMatrix<f64>> {
        self.to_dmatrix()
            .cholesky()
            .map(|c| c.l())
            .ok_or(Error::NotPositiveDefinite)
    }

    /// `Σ = Θ⁻¹`.
    pub fn covariance(&self) -> Result<Tensor> {
        let chol = self.to_dmatrix().cholesky().ok_or(Error::NotPositiveDefinite)?;
        let sigma = chol.inverse();
        let d = self.d();
        let data = (0..d).flat_map(|i| (0..d).map(move |j| (i, j))).map(|(i, j)| sigma[(i, j)]).collect();
        Tensor::new(vec![d, d], data)
    }
}

fn with_dominant_diagonal(mut theta: Vec<f64>, d: usize, margin: f64) -> Result<PrecisionMatrix> {
    for i in 0..d {
        let off: f64 = (0..d).filter(|&j| j != i).map(|j| theta[i * d + j].abs()).sum();
        theta[i * d + i] = off + margin;
    }
    PrecisionMatrix::new(Tensor::new(vec![d, d], theta)?)
}

fn check_margin(margin: f64) -> Result<()> {
    if !(margin > 0.0 && margin.is_finite()) {
        return Err(Error::Parameter(format!("diagonal margin must be positive, got {margin}")));
    }
    Ok(())
}

/// `k`-th order Markov chain precision matrix.
pub fn build_chain_precision(spec: &GraphSpec) -> Result<PrecisionMatrix> {
    let GraphKind::Chain { d, weights } = &spec.kind else {
        return Err(Error::Parameter("expected a chain graph".into()));
    };
    check_margin(spec.margin)?;
    let (d, k) = (*d, weights.len());
    if d <= k {
        return Err(Error::Parameter(format!("chain needs d > k, got d={d}, k={k}")));
    }
    if weights.iter().any(|w| !w.is_finite()) {
        return Err(Error::Parameter("chain weights must be finite".into()));
    }
    let mut theta = vec![0.0; d * d];
    for i in 0..d {
        for j in 0..d {
            let lag = i.abs_diff(j);
            if lag >= 1 && lag <= k {
                theta[i * d + j] = weights[lag - 1];
            }
        }
    }
    with_dominant_diagonal(theta, d, spec.margin)
}

/// Grid node index of `(row, col)` on a `side × side` lattice.
pub fn lattice_index(side: usize, row: usize, col: usize) -> usize {
    row * side + col
}

/// The up-to-four grid neighbours of node `idx`, in up/down/left/right order.
pub fn lattice_neighbors(side: usize, idx: usize) -> Vec<usize> {
    let (r, c) = (idx / side, idx % side);
    let mut out = Vec::with_capacity(4);
    if r > 0 {
        out.push(lattice_index(side, r - 1, c));
    }
    if r + 1 < side {
        out.push(lattice_index(side, r + 1, c));
    }
    if c > 0 {
        out.push(lattice_index(side, r, c - 1));
    }
    if c + 1 < side {
        out.push(lattice_index(side, r, c + 1));
    }
    out
}

/// Lattice precision matrix with constant edge weight.
pub fn build_lattice_precision(spec: &GraphSpec) -> Result<PrecisionMatrix> {
    let GraphKind::Lattice { side, weight } = &spec.kind else {
        return Err(Error::Parameter("expected a lattice graph".into()));
    };
    check_margin(spec.margin)?;
    let side = *side;
    if side < 2 {
        return Err(Error::Parameter(format!("lattice side must be at least 2, got {side}")));
    }
    if !weight.is_finite() {
        return Err(Error::Parameter("lattice weight must be finite".into()));
    }
    let d = side * side;
    let mut theta = vec![0.0; d * d];
    for i in 0..d {
        for j in lattice_neighbors(side, i) {
            theta[i * d + j] = *weight;
        }
    }
    with_dominant_diagonal(theta, d, spec.margin)
}
