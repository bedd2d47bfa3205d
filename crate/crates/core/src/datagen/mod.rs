//! Synthetic data: precision matrices, graphical-model samplers and small demo distributions.

mod dataset;
mod graph;
mod sample;

pub use dataset::{fmt_f64, meta_path, read_matrix_csv, write_matrix_csv, ColumnScale, Dataset, DatasetMeta};
pub use graph::{
    build_chain_precision, build_lattice_precision, lattice_index, lattice_neighbors, GraphKind, GraphSpec,
    PrecisionMatrix,
};
pub use sample::{
    conditional_demo_data, conditional_demo_data_with_noise, generate, isotropic_gaussian, mixture2d,
    nonparanormal_transform, sample_gaussian, sample_truncated, MarginalTransform, MIXTURE_CENTER, MIXTURE_STD,
};
pub(crate) use dataset::default_header;
pub(crate) use sample::standardize_columns;
