//! Window-mask training and the past/future blanket sweep, on a price CSV or
//! on a synthetic chain when no file is given.
//!
//! ```text
//! cargo run --release --example market_windows -- [prices.csv] [iterations]
//! ```
//!
//! The CSV has one row per ticker, one column per day, and a leading label column.

use zeroflow::blanket::{ingest_market_csv_with, market_analysis, IngestOptions, DEFAULT_TOPK, DEFAULT_WINDOW};
use zeroflow::datagen::{generate, GraphSpec, MarginalTransform};
use zeroflow::trainer::{train, MaskStrategy, TrainConfig};

fn main() -> zeroflow::Result<()> {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let iterations = args.get(1).and_then(|s| s.parse().ok()).unwrap_or(2000);
    let (data, topk) = match args.first() {
        Some(path) => {
            (ingest_market_csv_with(path, IngestOptions { row_labels: true })?, DEFAULT_TOPK)
        }
        None => {
            let (_, data) = generate(&GraphSpec::chain(40, vec![0.8, 0.4]), &MarginalTransform::Gaussian, 1024, 0)?;
            (data, 8)
        }
    };
    let topk = topk.min(data.d() - DEFAULT_WINDOW);
    println!("n = {}, d = {} days", data.n(), data.d());

    let cfg = TrainConfig {
        iterations,
        ..TrainConfig::default()
    };
    let ckpt = train(&data, &MaskStrategy::Window { length: DEFAULT_WINDOW }, &cfg)?.checkpoint;
    let report = market_analysis(&data, &ckpt, DEFAULT_WINDOW, topk)?;
    println!("start  past  future");
    for w in &report.windows {
        println!("{:>5}  {:.2}  {:.2}", w.start, w.past_fraction, w.future_fraction);
    }
    Ok(())
}
