use std::path::{Path, PathBuf};

use serde::Serialize;
use serde_json::json;

use super::config::{DataOptions, FileConfig};
use super::{
    CliError, DemoDist, EvalRocArgs, GenDataArgs, MarketArgs, QueryArgs, ServeArgs, SufficiencyArgs, TrainArgs,
    TrainFlags, ZeroflowArgs,
};
use crate::blanket::{ingest_market_csv_with, market_analysis, BlanketRule, EdgeScores, IngestOptions};
use crate::datagen::{
    conditional_demo_data, default_header, generate, isotropic_gaussian, mixture2d, read_matrix_csv,
    write_matrix_csv, Dataset, PrecisionMatrix, MIXTURE_CENTER, MIXTURE_STD,
};
use crate::diffcore::sigmoid_scalar;
use crate::error::{Error, Result};
use crate::flowdiag::{
    diagnose, field_mae, field_norm, plane_grid, sufficiency_score, t_grid, train_unconditional, write_field_1d,
    write_field_2d, z_grid, AnalyticField, DiagnosticsReport, GaussianPair,
};
use crate::models::{load_checkpoint, save_checkpoint, Checkpoint};
use crate::rng::derive_seed;
use crate::serve::{blanket_json, serve as serve_http};
use crate::trainer::{train_with_observer, write_loss_csv, MaskStrategy, TrainConfig, TrainOutput};

type CliResult = std::result::Result<(), CliError>;

const PROGRESS_EVERY: usize = 500;

fn usage(msg: impl Into<String>) -> CliError {
    CliError::Usage(msg.into())
}

fn ensure_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

fn write_json(path: &Path, value: &impl Serialize) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value).map_err(|e| Error::Format(e.to_string()))?;
    text.push('\n');
    write_text(path, &text)
}

/// Prints the resolved config and writes it to `<out>/resolved.toml`.
fn write_resolved(out: &Path, cfg: &FileConfig) -> Result<()> {
    let text = cfg.to_toml();
    print!("{text}");
    write_text(&out.join("resolved.toml"), &text)
}

fn path_str(p: &Path) -> String {
    p.display().to_string()
}

fn parent_dir(p: &Path) -> PathBuf {
    match p.parent() {
        Some(d) if !d.as_os_str().is_empty() => d.to_path_buf(),
        _ => PathBuf::from("."),
    }
}

fn resolve_train(file: &FileConfig, flags: &TrainFlags, seed: Option<u64>) -> Result<TrainConfig> {
    let mut cfg = file.train.clone().unwrap_or_default();
    flags.apply(&mut cfg);
    if let Some(s) = seed {
        cfg.seed = s;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn resolve_mask(flag: Option<&str>, file: &FileConfig, default: &str) -> std::result::Result<MaskStrategy, CliError> {
    let text = flag.or(file.mask.as_deref()).unwrap_or(default);
    text.parse().map_err(|e: Error| usage(e.to_string()))
}

pub(crate) fn save_theta(path: &Path, theta: &PrecisionMatrix) -> Result<()> {
    write_matrix_csv(path, &theta.theta, &default_header(theta.d()))
}

pub(crate) fn load_theta(path: &Path) -> Result<PrecisionMatrix> {
    let (_, theta) = read_matrix_csv(path)?;
    PrecisionMatrix::new(theta)
}

fn train_logged(data: &Dataset, strategy: &MaskStrategy, cfg: &TrainConfig) -> Result<TrainOutput> {
    let last = cfg.iterations.saturating_sub(1);
    train_with_observer(data, strategy, cfg, |r| {
        if r.iter % PROGRESS_EVERY == 0 || r.iter == last {
            eprintln!(
                "iter {:>6}  rf {:.5}  zf {:.5}  sparsity {:.3}  total {:.5}",
                r.iter, r.loss.rf, r.loss.zf, r.loss.sparsity, r.loss.total
            );
        }
    })
}

fn save_training(out: &Path, result: &TrainOutput) -> Result<()> {
    save_checkpoint(&result.checkpoint, out.join("ckpt.json"))?;
    write_loss_csv(out.join("loss.csv"), &result.history)
}

fn resolve_data(file: &FileConfig, flags: &super::DataFlags, seed: Option<u64>) -> DataOptions {
    let mut data = file.data.clone().unwrap_or_default();
    flags.apply(&mut data);
    if let Some(s) = seed {
        data.seed = s;
    }
    data
}

fn generate_into(dir: &Path, data: &DataOptions) -> Result<(PrecisionMatrix, Dataset)> {
    let (theta, ds) = generate(&data.graph_spec()?, &data.marginal(), data.n, data.seed)?;
    ensure_dir(dir)?;
    ds.save(dir.join("data.csv"))?;
    save_theta(&dir.join("theta.csv"), &theta)?;
    Ok((theta, ds))
}

pub(super) fn gen_data(a: GenDataArgs) -> CliResult {
    let file = FileConfig::load(a.config.as_deref())?;
    let data = resolve_data(&file, &a.data, a.seed);
    ensure_dir(&a.out)?;
    write_resolved(
        &a.out,
        &FileConfig {
            command: Some("gen-data".into()),
            data: Some(data.clone()),
            ..FileConfig::default()
        },
    )?;
    let (theta, ds) = generate_into(&a.out, &data)?;
    println!(
        "wrote {} samples × {} variables and Θ to {}",
        ds.n(),
        theta.d(),
        a.out.display()
    );
    Ok(())
}

pub(super) fn train(a: TrainArgs) -> CliResult {
    let file = FileConfig::load(a.config.as_deref())?;
    let cfg = resolve_train(&file, &a.train, a.seed)?;
    let strategy = resolve_mask(a.mask.as_deref(), &file, "one-hot")?;
    let out = a.out.clone().unwrap_or_else(|| parent_dir(&a.data));
    let data = Dataset::load(&a.data)?;
    ensure_dir(&out)?;
    write_resolved(
        &out,
        &FileConfig {
            command: Some("train".into()),
            mask: Some(strategy.to_string()),
            train: Some(cfg.clone()),
            inputs: [("data".to_string(), path_str(&a.data))].into(),
            ..FileConfig::default()
        },
    )?;
    let result = train_logged(&data, &strategy, &cfg)?;
    save_training(&out, &result)?;
    println!("wrote ckpt.json and loss.csv to {}", out.display());
    Ok(())
}

fn evaluate(ckpt: &Checkpoint, theta: &PrecisionMatrix, out: &Path) -> Result<f64> {
    if ckpt.d != theta.d() {
        return Err(Error::Shape(format!(
            "checkpoint has d = {} but theta has d = {}",
            ckpt.d,
            theta.d()
        )));
    }
    let scores = EdgeScores::new(ckpt, theta)?;
    let roc = scores.roc()?;
    roc.write_csv(out.join("roc.csv"))?;
    let edges = scores.labels.iter().filter(|&&l| l).count();
    write_json(
        &out.join("auc.json"),
        &json!({ "auc": roc.auc, "edges": edges, "pairs": scores.labels.len() }),
    )?;
    Ok(roc.auc)
}

pub(super) fn eval_roc(a: EvalRocArgs) -> CliResult {
    let file = FileConfig::load(a.config.as_deref())?;
    let Some(seeds) = a.seeds.clone() else {
        let (ckpt_path, theta_path) = match (&a.ckpt, &a.theta) {
            (Some(c), Some(t)) => (c.clone(), t.clone()),
            _ => return Err(usage("eval-roc needs --ckpt and --theta, or --seeds")),
        };
        let out = a.out.clone().unwrap_or_else(|| parent_dir(&ckpt_path));
        ensure_dir(&out)?;
        write_resolved(
            &out,
            &FileConfig {
                command: Some("eval-roc".into()),
                inputs: [
                    ("ckpt".to_string(), path_str(&ckpt_path)),
                    ("theta".to_string(), path_str(&theta_path)),
                ]
                .into(),
                ..FileConfig::default()
            },
        )?;
        let auc = evaluate(&load_checkpoint(&ckpt_path)?, &load_theta(&theta_path)?, &out)?;
        println!("AUC {auc:.4}");
        return Ok(());
    };
    if seeds.is_empty() {
        return Err(usage("--seeds needs at least one seed"));
    }
    let data = resolve_data(&file, &a.data, None);
    let cfg = resolve_train(&file, &a.train, None)?;
    let strategy = resolve_mask(a.mask.as_deref(), &file, "one-hot")?;
    let out = a.out.clone().unwrap_or_else(|| PathBuf::from("."));
    ensure_dir(&out)?;
    let seed_list = seeds.iter().map(u64::to_string).collect::<Vec<_>>().join(",");
    write_resolved(
        &out,
        &FileConfig {
            command: Some("eval-roc".into()),
            mask: Some(strategy.to_string()),
            data: Some(data.clone()),
            train: Some(cfg.clone()),
            inputs: [("seeds".to_string(), seed_list)].into(),
            ..FileConfig::default()
        },
    )?;
    let mut aucs = Vec::with_capacity(seeds.len());
    for &seed in &seeds {
        let dir = out.join(format!("seed_{seed}"));
        let (theta, ds) = generate_into(&dir, &DataOptions { seed, ..data.clone() })?;
        let run_cfg = TrainConfig { seed, ..cfg.clone() };
        let result = train_logged(&ds, &strategy, &run_cfg)?;
        save_training(&dir, &result)?;
        let auc = evaluate(&result.checkpoint, &theta, &dir)?;
        println!("seed {seed}: AUC {auc:.4}");
        aucs.push(auc);
    }
    let n = aucs.len() as f64;
    let mean = aucs.iter().sum::<f64>() / n;
    let std = if aucs.len() > 1 {
        (aucs.iter().map(|a| (a - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
    } else {
        0.0
    };
    write_json(
        &out.join("auc.json"),
        &json!({ "seeds": seeds, "auc": aucs, "mean": mean, "std": std }),
    )?;
    println!("AUC {mean:.4} ± {std:.4} over {} seeds", seeds.len());
    Ok(())
}

#[derive(Serialize)]
struct ZeroflowSummary {
    dist: &'static str,
    diagnostics: DiagnosticsReport,
    /// Mean speed at t = 0.1 over the evaluation points.
    early_norm: f64,
    /// Mean absolute error against the closed-form field (1-D cases).
    #[serde(skip_serializing_if = "Option::is_none")]
    oracle_mae: Option<f64>,
}

pub(super) fn demo_zeroflow(a: ZeroflowArgs) -> CliResult {
    let file = FileConfig::load(a.config.as_deref())?;
    let cfg = resolve_train(&file, &a.train, a.seed)?;
    ensure_dir(&a.out)?;
    let name = match a.dist {
        DemoDist::Gaussian => "gaussian",
        DemoDist::Shifted => "shifted",
        DemoDist::Mixture2d => "mixture2d",
    };
    write_resolved(
        &a.out,
        &FileConfig {
            command: Some(format!("demo zeroflow --dist {name}")),
            train: Some(cfg.clone()),
            inputs: [("n".to_string(), a.n.to_string())].into(),
            ..FileConfig::default()
        },
    )?;
    let s = cfg.seed;
    let times = t_grid();
    let field_path = a.out.join(format!("field_{name}.csv"));
    let summary = match a.dist {
        DemoDist::Gaussian | DemoDist::Shifted => {
            let mu1 = if a.dist == DemoDist::Shifted { 1.0 } else { 0.0 };
            let p = isotropic_gaussian(a.n, 1, 0.0, 1.0, derive_seed(s, 10))?;
            let q = isotropic_gaussian(a.n, 1, mu1, 1.0, derive_seed(s, 11))?;
            let net = train_unconditional(&p, &q, &cfg)?;
            let x0 = isotropic_gaussian(4096, 1, 0.0, 1.0, derive_seed(s, 12))?.samples;
            let z = z_grid();
            write_field_1d(&field_path, &net, &z, &times)?;
            let oracle = AnalyticField {
                pair: GaussianPair::new(0.0, 1.0, mu1, 1.0)?,
                d: 1,
            };
            ZeroflowSummary {
                dist: name,
                diagnostics: diagnose(&net, &z, &x0, mu1, 1.0)?,
                early_norm: field_norm(&net, &z, 0.1)?,
                oracle_mae: Some(field_mae(&net, &oracle, &z, &times)?),
            }
        }
        DemoDist::Mixture2d => {
            let p = mixture2d(a.n, derive_seed(s, 10))?;
            let q = mixture2d(a.n, derive_seed(s, 11))?;
            let net = train_unconditional(&p, &q, &cfg)?;
            let x0 = mixture2d(4096, derive_seed(s, 12))?.samples;
            let points = mixture2d(1024, derive_seed(s, 13))?.samples;
            write_field_2d(&field_path, &net, &plane_grid(21, 2.5)?, &times)?;
            let var = MIXTURE_CENTER * MIXTURE_CENTER + MIXTURE_STD * MIXTURE_STD;
            ZeroflowSummary {
                dist: name,
                diagnostics: diagnose(&net, &points, &x0, 0.0, var)?,
                early_norm: field_norm(&net, &points, 0.1)?,
                oracle_mae: None,
            }
        }
    };
    write_json(&a.out.join("diagnostics.json"), &summary)?;
    println!(
        "midpoint norm {:.4}, t = 0.1 norm {:.4}, antisymmetry residual {:.4}",
        summary.diagnostics.midpoint_norm, summary.early_norm, summary.diagnostics.antisymmetry_residual
    );
    Ok(())
}

fn sigmoid_neg2(y: f64) -> f64 {
    sigmoid_scalar(-2.0 * y)
}

fn sin2(y: f64) -> f64 {
    (2.0 * y).sin()
}

pub(super) fn demo_sufficiency(a: SufficiencyArgs) -> CliResult {
    let file = FileConfig::load(a.config.as_deref())?;
    let cfg = resolve_train(&file, &a.train, a.seed)?;
    ensure_dir(&a.out)?;
    write_resolved(
        &a.out,
        &FileConfig {
            command: Some("demo sufficiency".into()),
            train: Some(cfg.clone()),
            inputs: [("n".to_string(), a.n.to_string())].into(),
            ..FileConfig::default()
        },
    )?;
    let demo = conditional_demo_data(a.n, cfg.seed)?;
    let identity = sufficiency_score(&demo, &|y| y, &cfg)?;
    let sigmoid = sufficiency_score(&demo, &sigmoid_neg2, &cfg)?;
    let sin = sufficiency_score(&demo, &sin2, &cfg)?;
    let ratio = sin / sigmoid;
    write_json(
        &a.out.join("sufficiency.json"),
        &json!({ "identity": identity, "sigmoid_neg2y": sigmoid, "sin_2y": sin, "ratio_sin_over_sigmoid": ratio }),
    )?;
    println!("identity {identity:.4}  sigmoid(-2y) {sigmoid:.4}  sin(2y) {sin:.4}  ratio {ratio:.2}");
    Ok(())
}

pub(crate) fn parse_mask_text(text: &str) -> std::result::Result<Vec<f64>, String> {
    let bit = |c: &str| match c.trim() {
        "0" => Ok(0.0),
        "1" => Ok(1.0),
        other => Err(format!("mask entries must be 0 or 1, got {other:?}")),
    };
    if text.contains(',') {
        text.split(',').map(bit).collect()
    } else {
        text.chars().map(|c| bit(&c.to_string())).collect()
    }
}

pub(super) fn query(a: QueryArgs) -> CliResult {
    let ckpt = load_checkpoint(&a.ckpt)?;
    let mask = match (&a.mask, &a.targets) {
        (Some(m), _) => parse_mask_text(m).map_err(usage)?,
        (None, Some(t)) => {
            let mut m = vec![0.0; ckpt.d];
            for &j in t {
                if j >= ckpt.d {
                    return Err(Error::Shape(format!("target {j} out of range for d = {}", ckpt.d)).into());
                }
                m[j] = 1.0;
            }
            m
        }
        (None, None) => return Err(usage("query needs --mask or --targets")),
    };
    let rule = match (a.threshold, a.topk) {
        (_, Some(k)) => BlanketRule::TopK { k },
        (Some(value), None) => BlanketRule::Threshold { value },
        (None, None) => BlanketRule::default(),
    };
    let body = blanket_json(&ckpt, &mask, rule)?;
    println!("{body}");
    if let Some(out) = &a.out {
        ensure_dir(out)?;
        write_text(&out.join("blanket.json"), &format!("{body}\n"))?;
    }
    Ok(())
}

pub(super) fn market(a: MarketArgs) -> CliResult {
    let file = FileConfig::load(a.config.as_deref())?;
    let mut opts = file.market.unwrap_or_default();
    if let Some(w) = a.window {
        opts.window = w;
    }
    if let Some(k) = a.topk {
        opts.topk = k;
    }
    let data = ingest_market_csv_with(&a.data, IngestOptions { row_labels: a.row_labels })?;
    ensure_dir(&a.out)?;
    let mut resolved = FileConfig {
        command: Some("market".into()),
        market: Some(opts),
        inputs: [("data".to_string(), path_str(&a.data))].into(),
        ..FileConfig::default()
    };
    let ckpt = match &a.ckpt {
        Some(p) => {
            resolved.inputs.insert("ckpt".into(), path_str(p));
            write_resolved(&a.out, &resolved)?;
            let ckpt = load_checkpoint(p)?;
            let expected = MaskStrategy::Window { length: opts.window }.to_string();
            if ckpt.meta.mask_kind != expected {
                eprintln!(
                    "warning: checkpoint was trained with {} masks, market queries use {expected}",
                    ckpt.meta.mask_kind
                );
            }
            ckpt
        }
        None => {
            let cfg = resolve_train(&file, &a.train, a.seed)?;
            let strategy = MaskStrategy::Window { length: opts.window };
            resolved.mask = Some(strategy.to_string());
            resolved.train = Some(cfg.clone());
            write_resolved(&a.out, &resolved)?;
            let result = train_logged(&data, &strategy, &cfg)?;
            save_training(&a.out, &result)?;
            result.checkpoint
        }
    };
    let report = market_analysis(&data, &ckpt, opts.window, opts.topk)?;
    report.write_csv(a.out.join("market.csv"))?;
    println!("wrote {} windows to {}", report.windows.len(), a.out.join("market.csv").display());
    Ok(())
}

pub(super) fn serve(a: ServeArgs) -> CliResult {
    let ckpt = load_checkpoint(&a.ckpt)?;
    let rt = tokio::runtime::Builder::new_multi_thread()
        .enable_all()
        .build()
        .map_err(|e| Error::io("tokio runtime", e))?;
    rt.block_on(serve_http(ckpt, a.addr, a.ui_dir))?;
    Ok(())
}
