//! Serve the blanket query API for a checkpoint, training a small one if none is given.
//!
//! ```text
//! cargo run --release --example serve_api -- [ckpt.json] [addr]
//! curl -s localhost:8080/api/model
//! curl -s -X POST localhost:8080/api/blanket -d '{"mask":[0,0,1,0,0,0,0,0,0,0],"rule":{"topk":3}}'
//! ```

use std::net::SocketAddr;

use zeroflow::datagen::{generate, GraphSpec, MarginalTransform};
use zeroflow::models::load_checkpoint;
use zeroflow::trainer::{train, MaskStrategy, TrainConfig};

#[tokio::main]
async fn main() -> zeroflow::Result<()> {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let ckpt = match args.first() {
        Some(path) => load_checkpoint(path)?,
        None => {
            let (_, data) = generate(&GraphSpec::chain(10, vec![0.8, 0.4]), &MarginalTransform::Gaussian, 1024, 0)?;
            let cfg = TrainConfig {
                iterations: 1000,
                ..TrainConfig::default()
            };
            train(&data, &MaskStrategy::OneHot, &cfg)?.checkpoint
        }
    };
    let addr: SocketAddr = args
        .get(1)
        .map(String::as_str)
        .unwrap_or("127.0.0.1:8080")
        .parse()
        .map_err(|e| zeroflow::Error::Parameter(format!("bad address: {e}")))?;
    println!("serving d = {} on http://{addr}", ckpt.d);
    zeroflow::serve::serve(ckpt, addr, None).await
}
