//! The `zeroflow` command line.

mod commands;
mod config;

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

pub use config::{DataOptions, FileConfig, GraphChoice, MarketOptions, TransformChoice, CHAIN_WEIGHTS};

use crate::error::Error;
use crate::trainer::{EncoderKind, TrainConfig, ZfMode};

#[derive(Parser, Debug)]
#[command(name = "zeroflow", version, about = "Zero-flow encoders: training, evaluation and blanket queries")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Sample a synthetic graphical-model dataset; writes data.csv and theta.csv.
    GenData(GenDataArgs),
    /// Train an encoder and velocity field; writes ckpt.json and loss.csv.
    Train(TrainArgs),
    /// Score edge recovery by ROC AUC; writes roc.csv and auc.json.
    EvalRoc(EvalRocArgs),
    /// Flow demos with CSV field dumps.
    #[command(subcommand)]
    Demo(DemoCommand),
    /// Markov blanket of one query mask, printed as JSON.
    Query(QueryArgs),
    /// Past/future split of window blankets over a time series; writes market.csv.
    Market(MarketArgs),
    /// Serve blanket queries over HTTP.
    Serve(ServeArgs),
}

#[derive(Subcommand, Debug)]
enum DemoCommand {
    /// Unconditional flow between a distribution and itself (or a shifted copy).
    Zeroflow(ZeroflowArgs),
    /// Midpoint scores of fixed statistics f(Y) on the X = Y/2 + noise demo.
    Sufficiency(SufficiencyArgs),
}

#[derive(Args, Debug, Default, Clone)]
struct DataFlags {
    /// Graph family.
    #[arg(long, value_enum)]
    graph: Option<GraphChoice>,
    /// Number of variables.
    #[arg(long)]
    d: Option<usize>,
    /// Chain order.
    #[arg(long)]
    k: Option<usize>,
    /// Chain weights by lag, comma separated.
    #[arg(long, value_delimiter = ',')]
    weights: Option<Vec<f64>>,
    /// Diagonal-dominance margin.
    #[arg(long)]
    margin: Option<f64>,
    /// Lattice edge weight.
    #[arg(long)]
    lattice_weight: Option<f64>,
    /// Marginal transform.
    #[arg(long, value_enum)]
    transform: Option<TransformChoice>,
    /// Nonparanormal exponent.
    #[arg(long)]
    gamma: Option<f64>,
    /// Truncation threshold.
    #[arg(long, allow_negative_numbers = true)]
    tau: Option<f64>,
    /// Gibbs burn-in sweeps.
    #[arg(long)]
    gibbs_burnin: Option<usize>,
    /// Gibbs thinning interval.
    #[arg(long)]
    gibbs_thin: Option<usize>,
    /// Number of samples.
    #[arg(long)]
    n: Option<usize>,
}

impl DataFlags {
    fn apply(&self, o: &mut DataOptions) {
        set(&mut o.graph, self.graph);
        set(&mut o.d, self.d);
        set(&mut o.k, self.k);
        if self.weights.is_some() {
            o.weights = self.weights.clone();
        }
        set(&mut o.margin, self.margin);
        set(&mut o.lattice_weight, self.lattice_weight);
        set(&mut o.transform, self.transform);
        set(&mut o.gamma, self.gamma);
        set(&mut o.tau, self.tau);
        set(&mut o.gibbs_burnin, self.gibbs_burnin);
        set(&mut o.gibbs_thin, self.gibbs_thin);
        set(&mut o.n, self.n);
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, clap::ValueEnum)]
enum ZfModeArg {
    Midpoint,
    Kernel,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, clap::ValueEnum)]
enum EncoderArg {
    Amortized,
    Fixed,
}

#[derive(Args, Debug, Default, Clone)]
struct TrainFlags {
    /// Adam learning rate.
    #[arg(long)]
    lr: Option<f64>,
    /// Pairs per batch.
    #[arg(long)]
    batch_size: Option<usize>,
    /// Optimizer steps.
    #[arg(long)]
    iterations: Option<usize>,
    /// Gate sparsity weight λ.
    #[arg(long)]
    lambda_sparsity: Option<f64>,
    /// Kernel bandwidth b for the zero-flow weight.
    #[arg(long)]
    omega_bandwidth: Option<f64>,
    /// Beta(α, α) time distribution.
    #[arg(long)]
    beta_alpha: Option<f64>,
    /// Zero-flow weight κ.
    #[arg(long)]
    zf_weight: Option<f64>,
    /// Zero-flow evaluation.
    #[arg(long, value_enum)]
    zf_mode: Option<ZfModeArg>,
    /// Decoupled weight decay.
    #[arg(long)]
    weight_decay: Option<f64>,
    /// Encoder family.
    #[arg(long, value_enum)]
    encoder: Option<EncoderArg>,
    /// Gate-network hidden width.
    #[arg(long)]
    encoder_hidden: Option<usize>,
    /// Velocity-network hidden width.
    #[arg(long)]
    velocity_hidden: Option<usize>,
}

impl TrainFlags {
    fn apply(&self, c: &mut TrainConfig) {
        set(&mut c.lr, self.lr);
        set(&mut c.batch_size, self.batch_size);
        set(&mut c.iterations, self.iterations);
        set(&mut c.lambda_sparsity, self.lambda_sparsity);
        set(&mut c.omega_bandwidth, self.omega_bandwidth);
        set(&mut c.beta_alpha, self.beta_alpha);
        set(&mut c.zf_weight, self.zf_weight);
        set(
            &mut c.zf_mode,
            self.zf_mode.map(|m| match m {
                ZfModeArg::Midpoint => ZfMode::Midpoint,
                ZfModeArg::Kernel => ZfMode::Kernel,
            }),
        );
        set(&mut c.weight_decay, self.weight_decay);
        set(
            &mut c.encoder,
            self.encoder.map(|e| match e {
                EncoderArg::Amortized => EncoderKind::Amortized,
                EncoderArg::Fixed => EncoderKind::Fixed,
            }),
        );
        set(&mut c.encoder_hidden, self.encoder_hidden);
        set(&mut c.velocity_hidden, self.velocity_hidden);
    }
}

fn set<T>(slot: &mut T, v: Option<T>) {
    if let Some(v) = v {
        *slot = v;
    }
}

#[derive(Args, Debug)]
struct GenDataArgs {
    #[command(flatten)]
    data: DataFlags,
    /// Sampler seed.
    #[arg(long)]
    seed: Option<u64>,
    /// TOML config; flags take precedence.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, default_value = ".")]
    out: PathBuf,
}

#[derive(Args, Debug)]
struct TrainArgs {
    /// Training data CSV.
    #[arg(long)]
    data: PathBuf,
    /// Mask strategy: one-hot, window:K, lattice:P[:prob], bernoulli:P or fixed:0110…
    #[arg(long)]
    mask: Option<String>,
    #[command(flatten)]
    train: TrainFlags,
    /// Training seed.
    #[arg(long)]
    seed: Option<u64>,
    /// TOML config; flags take precedence.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory (default: the data file's directory).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct EvalRocArgs {
    /// Trained checkpoint.
    #[arg(long, required_unless_present = "seeds", conflicts_with = "seeds")]
    ckpt: Option<PathBuf>,
    /// Ground-truth precision matrix CSV.
    #[arg(long, required_unless_present = "seeds", conflicts_with = "seeds")]
    theta: Option<PathBuf>,
    /// Run generate → train → evaluate once per seed and report mean ± std.
    #[arg(long, value_delimiter = ',')]
    seeds: Option<Vec<u64>>,
    /// Mask strategy for seeded runs.
    #[arg(long)]
    mask: Option<String>,
    #[command(flatten)]
    data: DataFlags,
    #[command(flatten)]
    train: TrainFlags,
    /// TOML config; flags take precedence.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory (default: the checkpoint's directory, or `.` with --seeds).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, clap::ValueEnum)]
enum DemoDist {
    /// N(0,1) onto N(0,1).
    Gaussian,
    /// N(0,1) onto N(1,1).
    Shifted,
    /// Four-component 2-D mixture onto itself.
    Mixture2d,
}

#[derive(Args, Debug)]
struct ZeroflowArgs {
    /// Source/target pair.
    #[arg(long, value_enum, default_value = "gaussian")]
    dist: DemoDist,
    /// Samples per side.
    #[arg(long, default_value_t = 2048)]
    n: usize,
    /// Data and training seed.
    #[arg(long)]
    seed: Option<u64>,
    #[command(flatten)]
    train: TrainFlags,
    /// TOML config; flags take precedence.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, default_value = ".")]
    out: PathBuf,
}

#[derive(Args, Debug)]
struct SufficiencyArgs {
    /// Demo samples.
    #[arg(long, default_value_t = 2048)]
    n: usize,
    /// Data and training seed.
    #[arg(long)]
    seed: Option<u64>,
    #[command(flatten)]
    train: TrainFlags,
    /// TOML config; flags take precedence.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, default_value = ".")]
    out: PathBuf,
}

#[derive(Args, Debug)]
struct QueryArgs {
    /// Trained checkpoint.
    #[arg(long)]
    ckpt: PathBuf,
    /// Query mask as a 0/1 string (`00100…`) or comma list (`0,0,1,…`).
    #[arg(long, required_unless_present = "targets", conflicts_with = "targets")]
    mask: Option<String>,
    /// Target indices, comma separated.
    #[arg(long, value_delimiter = ',')]
    targets: Option<Vec<usize>>,
    /// Select off-mask gates above this value (default 0.1).
    #[arg(long, conflicts_with = "topk")]
    threshold: Option<f64>,
    /// Select the k largest off-mask gates.
    #[arg(long)]
    topk: Option<usize>,
    /// Also write blanket.json here.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct MarketArgs {
    /// Price table: header of feature names, one row per entity.
    #[arg(long)]
    data: PathBuf,
    /// The first column holds row labels.
    #[arg(long)]
    row_labels: bool,
    /// Checkpoint trained with window masks; trained here when absent.
    #[arg(long)]
    ckpt: Option<PathBuf>,
    /// Window length.
    #[arg(long)]
    window: Option<usize>,
    /// Blanket size per window.
    #[arg(long)]
    topk: Option<usize>,
    #[command(flatten)]
    train: TrainFlags,
    /// Training seed.
    #[arg(long)]
    seed: Option<u64>,
    /// TOML config; flags take precedence.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, default_value = ".")]
    out: PathBuf,
}

#[derive(Args, Debug)]
struct ServeArgs {
    /// Trained checkpoint.
    #[arg(long)]
    ckpt: PathBuf,
    /// Bind address.
    #[arg(long, default_value = "127.0.0.1:8080")]
    addr: std::net::SocketAddr,
    /// Static UI bundle served at `/`.
    #[arg(long)]
    ui_dir: Option<PathBuf>,
}

pub(crate) enum CliError {
    Usage(String),
    Domain(Error),
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        CliError::Domain(e)
    }
}

/// Runs one command line (including the program name) and returns the exit
/// code: 0 on success, 1 on domain errors, 2 on usage errors.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    let result = match cli.command {
        Command::GenData(a) => commands::gen_data(a),
        Command::Train(a) => commands::train(a),
        Command::EvalRoc(a) => commands::eval_roc(a),
        Command::Demo(DemoCommand::Zeroflow(a)) => commands::demo_zeroflow(a),
        Command::Demo(DemoCommand::Sufficiency(a)) => commands::demo_sufficiency(a),
        Command::Query(a) => commands::query(a),
        Command::Market(a) => commands::market(a),
        Command::Serve(a) => commands::serve(a),
    };
    match result {
        Ok(()) => 0,
        Err(CliError::Usage(msg)) => {
            eprintln!("usage error: {msg}");
            2
        }
        Err(CliError::Domain(e)) => {
            eprintln!("error: {e}");
            1
        }
    }
}
