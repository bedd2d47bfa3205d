//! Structure recovery from a trained encoder: gate matrices, ROC/AUC,
//! blanket queries and the market window analysis.

mod edges;
mod market;
mod query;

pub use edges::{gate_matrix, ground_truth_edges, roc_auc, symmetrize, upper_pairs, EdgeScores, RocCurve, RocPoint, EDGE_EPS};
pub use market::{
    ingest_market_csv, ingest_market_csv_with, market_analysis, window_blanket, IngestOptions, MarketReport,
    WindowRecord, DEFAULT_TOPK, DEFAULT_WINDOW,
};
pub use query::{query_blanket, recall, true_blanket, BlanketResult, BlanketRule, DEFAULT_GATE_THRESHOLD};
