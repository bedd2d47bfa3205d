//! One PASS/FAIL line per acceptance criterion. Always exits 0; read the lines.
//!
//! Set `ZEROFLOW_ACCEPT_ONLY=name,name` to run a subset.

use std::path::Path;
use std::time::Instant;

use rand::Rng;

use zeroflow::blanket::{
    market_analysis, query_blanket, recall, roc_auc, true_blanket, BlanketRule, EdgeScores, EDGE_EPS,
};
use zeroflow::datagen::{conditional_demo_data, generate, isotropic_gaussian, GraphSpec, MarginalTransform};
use zeroflow::diffcore::{grad_check, Tensor};
use zeroflow::flowdiag::{
    antisymmetry_residual, euler_integrate, field_mae, midpoint_norm, sufficiency_score, t_grid,
    train_unconditional, transport_error, z_grid, AnalyticField, GaussianPair, UncondVelocityNet, VelocityField,
    EULER_STEPS,
};
use zeroflow::models::{AmortizedGateEncoder, Encoder, EncoderVars, MlpVars, VelocityNet};
use zeroflow::rng::{derive_seed, seeded};
use zeroflow::trainer::{
    objective_on_tape, train, unseen_lattice_pairs, Batch, MaskStrategy, TrainConfig, ZfMode,
};

type Outcome = zeroflow::Result<(bool, String)>;

fn main() {
    let only: Option<Vec<String>> =
        std::env::var("ZEROFLOW_ACCEPT_ONLY").ok().map(|s| s.split(',').map(str::to_string).collect());
    let criteria: [(&str, fn() -> Outcome); 11] = [
        ("gradient_fidelity", gradient_fidelity),
        ("analytic_oracle_match", analytic_oracle_match),
        ("inequality_detection", inequality_detection),
        ("antisymmetry", antisymmetry),
        ("transport", transport),
        ("sufficiency_separation", sufficiency_separation),
        ("table1_chain_auc", table1_chain_auc),
        ("out_of_sample_amortization", out_of_sample_amortization),
        ("roc_correctness", roc_correctness),
        ("determinism", determinism),
        ("market_pipeline", market_pipeline),
    ];
    let mut failed = 0;
    for (name, check) in criteria {
        if only.as_ref().is_some_and(|o| !o.iter().any(|n| n == name)) {
            continue;
        }
        let start = Instant::now();
        let (pass, detail) = check().unwrap_or_else(|e| (false, format!("error: {e}")));
        failed += usize::from(!pass);
        println!(
            "{} {name}: {detail} [{:.1}s]",
            if pass { "PASS" } else { "FAIL" },
            start.elapsed().as_secs_f64()
        );
    }
    println!("acceptance: {failed} criteria failed");
}

fn gradient_fidelity() -> Outcome {
    let (d, n) = (4, 8);
    let start = Instant::now();
    let mut rng = seeded(3);
    let mut normal = |k: usize| -> Tensor {
        Tensor::new(vec![n, k], (0..n * k).map(|_| rng.sample::<f64, _>(rand_distr::StandardNormal)).collect())
            .unwrap()
    };
    let (z1, z2) = (normal(d), normal(d));
    let mut m = vec![0.0; n * d];
    for i in 0..n {
        m[i * d + i % d] = 1.0;
        if i % 3 == 0 {
            m[i * d + (i + 1) % d] = 1.0;
        }
    }
    let m = Tensor::new(vec![n, d], m)?;
    let t = Tensor::vector((0..n).map(|i| 0.1 + 0.8 * i as f64 / (n - 1) as f64).collect())?;
    let batch = Batch::from_parts(&z1, &z2, &m, &t)?;

    let encoder = Encoder::Amortized(AmortizedGateEncoder::new(d, 8, 5)?);
    let vnet = VelocityNet::new(d, 12, 6)?;
    let mut worst: f64 = 0.0;
    for mode in [ZfMode::Midpoint, ZfMode::Kernel] {
        let cfg = TrainConfig {
            zf_mode: mode,
            omega_bandwidth: 0.2,
            lambda_sparsity: 0.05,
            ..TrainConfig::default()
        };
        let mut params = encoder.params();
        let n_enc = params.len();
        params.extend(vnet.net.params());
        let err = grad_check(
            |tape, vars| {
                let ev = EncoderVars::Amortized(MlpVars::from_flat(&vars[..n_enc]));
                let vv = MlpVars::from_flat(&vars[n_enc..]);
                Ok(objective_on_tape(tape, &encoder, &ev, &vnet, &vv, &batch, &cfg)?.total)
            },
            &params,
            1e-5,
        )?;
        worst = worst.max(err);
    }
    let secs = start.elapsed().as_secs_f64();
    Ok((worst < 1e-4 && secs < 5.0, format!("max relative error {worst:.2e} (< 1e-4), {secs:.2}s (< 5s)")))
}

fn gaussian_pair_run(mu1: f64) -> zeroflow::Result<(UncondVelocityNet, AnalyticField)> {
    let source = isotropic_gaussian(2048, 1, 0.0, 1.0, 10)?;
    let target = isotropic_gaussian(2048, 1, mu1, 1.0, 11)?;
    let net = train_unconditional(&source, &target, &TrainConfig::default())?;
    let oracle = AnalyticField {
        pair: GaussianPair::new(0.0, 1.0, mu1, 1.0)?,
        d: 1,
    };
    Ok((net, oracle))
}

fn analytic_oracle_match() -> Outcome {
    let start = Instant::now();
    let (net, oracle) = gaussian_pair_run(0.0)?;
    let secs = start.elapsed().as_secs_f64();
    let mae = field_mae(&net, &oracle, &z_grid(), &t_grid())?;
    let mid = midpoint_norm(&net, &z_grid())?;
    Ok((
        mae < 0.1 && mid < 0.05 && secs < 120.0,
        format!("MAE {mae:.4} (< 0.1), midpoint norm {mid:.4} (< 0.05), trained in {secs:.1}s (< 120s)"),
    ))
}

fn inequality_detection() -> Outcome {
    let (equal, _) = gaussian_pair_run(0.0)?;
    let (shifted, _) = gaussian_pair_run(1.0)?;
    let z = z_grid();
    let mean_mid = shifted.velocity(&z, 0.5)?.data().iter().sum::<f64>() / z.rows() as f64;
    let ratio = midpoint_norm(&shifted, &z)? / midpoint_norm(&equal, &z)?;
    Ok((
        (mean_mid - 1.0).abs() <= 0.2 && ratio >= 5.0,
        format!("mean v(·, 0.5) {mean_mid:.4} (1 ± 0.2), shifted/equal midpoint norm {ratio:.1}x (≥ 5x)"),
    ))
}

fn antisymmetry() -> Outcome {
    let (net, oracle) = gaussian_pair_run(0.0)?;
    let (z, ts) = (z_grid(), t_grid());
    let trained = antisymmetry_residual(&net, &z, &ts)?;
    let exact = antisymmetry_residual(&oracle, &z, &ts)?;
    Ok((
        trained < 0.1 && exact.abs() <= 1e-12,
        format!("trained residual {trained:.4} (< 0.1), oracle residual {exact:.1e} (≤ 1e-12)"),
    ))
}

fn transport() -> Outcome {
    let oracle = AnalyticField {
        pair: GaussianPair::new(0.0, 1.0, 1.0, 1.0)?,
        d: 1,
    };
    let x0 = isotropic_gaussian(4096, 1, 0.0, 1.0, 12)?.samples;
    let err = transport_error(&euler_integrate(&oracle, &x0, EULER_STEPS)?, 1.0, 1.0)?;
    Ok((
        err.mean_err <= 0.1 && err.var_err <= 0.15,
        format!("mean error {:.4} (≤ 0.1), variance error {:.4} (≤ 0.15)", err.mean_err, err.var_err),
    ))
}

fn sufficiency_separation() -> Outcome {
    let start = Instant::now();
    let demo = conditional_demo_data(2048, 0)?;
    let cfg = TrainConfig::default();
    let suf = sufficiency_score(&demo, &|y| 1.0 / (1.0 + (2.0 * y).exp()), &cfg)?;
    let insuf = sufficiency_score(&demo, &|y| (2.0 * y).sin(), &cfg)?;
    let secs = start.elapsed().as_secs_f64();
    let ratio = insuf / suf;
    Ok((
        ratio >= 5.0 && secs < 180.0,
        format!("S(sin 2y) {insuf:.4} / S(σ(−2y)) {suf:.4} = {ratio:.2} (≥ 5), {secs:.1}s (< 180s)"),
    ))
}

fn table1_chain_auc() -> Outcome {
    let spec = GraphSpec::chain(50, vec![0.8, 0.4, 0.2]);
    let mut pass = true;
    let mut parts = Vec::new();
    let mut slowest: f64 = 0.0;
    for (transform, bound) in [
        (MarginalTransform::Gaussian, 0.93),
        (MarginalTransform::nonparanormal(), 0.72),
        (MarginalTransform::truncated(), 0.90),
    ] {
        let mut aucs = Vec::new();
        for seed in 0..3 {
            let start = Instant::now();
            let (theta, data) = generate(&spec, &transform, 2048, seed)?;
            let cfg = TrainConfig { seed, ..TrainConfig::default() };
            let out = train(&data, &MaskStrategy::OneHot, &cfg)?;
            aucs.push(EdgeScores::new(&out.checkpoint, &theta)?.roc()?.auc);
            slowest = slowest.max(start.elapsed().as_secs_f64());
        }
        let mean = aucs.iter().sum::<f64>() / 3.0;
        let std = (aucs.iter().map(|a| (a - mean).powi(2)).sum::<f64>() / 2.0).sqrt();
        pass &= mean >= bound;
        parts.push(format!("{} {mean:.3}±{std:.3} (≥ {bound})", transform.name()));
    }
    pass &= slowest <= 300.0;
    Ok((pass, format!("{}; slowest run {slowest:.0}s (≤ 300s)", parts.join(", "))))
}

fn out_of_sample_amortization() -> Outcome {
    let side = 8;
    let (theta, data) = generate(&GraphSpec::lattice(side), &MarginalTransform::Gaussian, 2048, 0)?;
    let out = train(&data, &MaskStrategy::lattice(side), &TrainConfig::default())?;
    let pairs = unseen_lattice_pairs(side, 20, &mut seeded(derive_seed(0, 20)))?;
    let (mut total_recall, mut total_selected) = (0.0, 0usize);
    for pair in &pairs {
        let mut mask = vec![0.0; side * side];
        for &v in pair {
            mask[v] = 1.0;
        }
        let got = query_blanket(&out.checkpoint, &mask, BlanketRule::Threshold { value: 0.1 })?;
        total_recall += recall(&got.selected, &true_blanket(&theta, pair, EDGE_EPS)?);
        total_selected += got.selected.len();
    }
    let k = pairs.len() as f64;
    let mean = total_recall / k;
    Ok((
        mean >= 0.8,
        format!(
            "mean recall {mean:.3} (≥ 0.8) over {} unseen pairs; mean blanket size {:.1} of 62 candidates",
            pairs.len(),
            total_selected as f64 / k
        ),
    ))
}

fn mann_whitney_twice(scores: &[f64], labels: &[bool]) -> u64 {
    let mut u2 = 0;
    for (i, &li) in labels.iter().enumerate() {
        for (j, &lj) in labels.iter().enumerate() {
            if li && !lj {
                u2 += match scores[i].partial_cmp(&scores[j]).unwrap() {
                    std::cmp::Ordering::Greater => 2,
                    std::cmp::Ordering::Equal => 1,
                    std::cmp::Ordering::Less => 0,
                };
            }
        }
    }
    u2
}

fn roc_correctness() -> Outcome {
    let mut rng = seeded(2024);
    let mut mismatches = 0;
    let mut invariance = 0;
    for _ in 0..200 {
        let len = rng.random_range(2..=12);
        let labels: Vec<bool> = loop {
            let l: Vec<bool> = (0..len).map(|_| rng.random_bool(0.5)).collect();
            if l.contains(&true) && l.contains(&false) {
                break l;
            }
        };
        let scores: Vec<f64> = (0..len).map(|_| f64::from(rng.random_range(0..6u8)) / 5.0).collect();
        let (pos, neg) = (labels.iter().filter(|&&l| l).count() as u64, labels.iter().filter(|&&l| !l).count() as u64);
        let auc = roc_auc(&scores, &labels)?.auc;
        let scaled = auc * (2 * pos * neg) as f64;
        if (scaled - scaled.round()).abs() > 1e-9 || scaled.round() as u64 != mann_whitney_twice(&scores, &labels) {
            mismatches += 1;
        }
        let warped: Vec<f64> = scores.iter().map(|s| (3.0 * s).exp() - 7.0).collect();
        if roc_auc(&warped, &labels)?.auc != auc {
            invariance += 1;
        }
    }
    let labels = [true, false, true, false, false];
    let perfect = roc_auc(&[0.9, 0.1, 0.8, 0.2, 0.3], &labels)?.auc;
    let inverted = roc_auc(&[0.1, 0.9, 0.2, 0.8, 0.7], &labels)?.auc;
    Ok((
        mismatches == 0 && invariance == 0 && perfect == 1.0 && inverted == 0.0,
        format!(
            "{mismatches}/200 Mann–Whitney mismatches, {invariance}/200 monotone-transform changes, perfect {perfect}, inverted {inverted}"
        ),
    ))
}

fn fnv1a(bytes: &[u8]) -> u64 {
    bytes.iter().fold(0xcbf2_9ce4_8422_2325, |h, &b| (h ^ u64::from(b)).wrapping_mul(0x0100_0000_01b3))
}

fn run_cli(args: &[&str]) -> zeroflow::Result<()> {
    let mut argv = vec!["zeroflow"];
    argv.extend_from_slice(args);
    match zeroflow::cli::run(argv) {
        0 => Ok(()),
        code => Err(zeroflow::Error::Parameter(format!("`{}` exited with {code}", args.join(" ")))),
    }
}

fn write_prices(path: &Path) -> zeroflow::Result<()> {
    let mut text = String::from("ticker");
    for j in 0..16 {
        text.push_str(&format!(",day{j}"));
    }
    text.push('\n');
    for i in 0..24 {
        text.push_str(&format!("S{i}"));
        for j in 0..16 {
            text.push_str(&format!(",{}", 50.0 + ((i * 5 + j * 7) % 13) as f64 + 0.25 * j as f64));
        }
        text.push('\n');
    }
    std::fs::write(path, text).map_err(|e| zeroflow::Error::io(path, e))
}

/// Every file under `dir`, relative path to checksum.
fn checksums(dir: &Path) -> zeroflow::Result<Vec<(String, u64)>> {
    let mut out = Vec::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for entry in std::fs::read_dir(&d).map_err(|e| zeroflow::Error::io(&d, e))? {
            let path = entry.map_err(|e| zeroflow::Error::io(&d, e))?.path();
            if path.is_dir() {
                stack.push(path);
            } else {
                let bytes = std::fs::read(&path).map_err(|e| zeroflow::Error::io(&path, e))?;
                let rel = path.strip_prefix(dir).unwrap().display().to_string();
                out.push((rel, fnv1a(&bytes)));
            }
        }
    }
    out.sort();
    Ok(out)
}

fn pipeline_in(root: &Path) -> zeroflow::Result<Vec<(String, u64)>> {
    let cwd = std::env::current_dir().map_err(|e| zeroflow::Error::io(".", e))?;
    std::env::set_current_dir(root).map_err(|e| zeroflow::Error::io(root, e))?;
    let small = ["--iterations", "60", "--batch-size", "32", "--velocity-hidden", "16", "--encoder-hidden", "16"];
    let with_small = |args: &[&str]| -> Vec<String> {
        args.iter().chain(small.iter()).map(|s| s.to_string()).collect()
    };
    let result = (|| {
        run_cli(&["gen-data", "--d", "8", "--k", "2", "--transform", "truncated", "--n", "96", "--seed", "4", "--out", "run"])?;
        let train = with_small(&["train", "--data", "run/data.csv", "--mask", "one-hot"]);
        run_cli(&train.iter().map(String::as_str).collect::<Vec<_>>())?;
        run_cli(&["eval-roc", "--ckpt", "run/ckpt.json", "--theta", "run/theta.csv", "--out", "run/eval"])?;
        let seeds = with_small(&["eval-roc", "--seeds", "1,2", "--d", "6", "--k", "1", "--n", "64", "--out", "seeds"]);
        run_cli(&seeds.iter().map(String::as_str).collect::<Vec<_>>())?;
        for dist in ["shifted", "mixture2d"] {
            let demo = with_small(&["demo", "zeroflow", "--dist", dist, "--n", "128", "--out", "demo"]);
            run_cli(&demo.iter().map(String::as_str).collect::<Vec<_>>())?;
        }
        let suf = with_small(&["demo", "sufficiency", "--n", "700", "--out", "suff"]);
        run_cli(&suf.iter().map(String::as_str).collect::<Vec<_>>())?;
        write_prices(Path::new("prices.csv"))?;
        let market = with_small(&["market", "--data", "prices.csv", "--row-labels", "--window", "4", "--topk", "3", "--out", "market"]);
        run_cli(&market.iter().map(String::as_str).collect::<Vec<_>>())?;
        run_cli(&["query", "--ckpt", "run/ckpt.json", "--mask", "01000000", "--out", "query"])
    })();
    std::env::set_current_dir(&cwd).map_err(|e| zeroflow::Error::io(&cwd, e))?;
    result?;
    checksums(root)
}

fn determinism() -> Outcome {
    let dir = tempfile::tempdir().map_err(|e| zeroflow::Error::io("tempdir", e))?;
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    for p in [&a, &b] {
        std::fs::create_dir_all(p).map_err(|e| zeroflow::Error::io(p, e))?;
    }
    let first = pipeline_in(&a)?;
    let second = pipeline_in(&b)?;
    let differing: Vec<&str> = first
        .iter()
        .zip(&second)
        .filter(|(x, y)| x != y)
        .map(|(x, _)| x.0.as_str())
        .collect();
    let same_files = first.len() == second.len() && first.iter().zip(&second).all(|(x, y)| x.0 == y.0);
    let combined = fnv1a(format!("{first:?}").as_bytes());
    Ok((
        same_files && differing.is_empty(),
        format!(
            "{} artifacts, {} differing {:?}, combined checksum {combined:016x}",
            first.len(),
            differing.len(),
            differing
        ),
    ))
}

fn market_pipeline() -> Outcome {
    let (d, window, topk) = (30, 5, 6);
    let (_, data) = generate(&GraphSpec::chain(d, vec![0.8, 0.4]), &MarginalTransform::Gaussian, 1024, 9)?;
    let cfg = TrainConfig {
        iterations: 400,
        ..TrainConfig::default()
    };
    let out = train(&data, &MaskStrategy::Window { length: window }, &cfg)?;
    let report = market_analysis(&data, &out.checkpoint, window, topk)?;
    let sums_ok = report
        .windows
        .iter()
        .all(|w| (w.past_fraction + w.future_fraction - 1.0).abs() < 1e-12);
    let first = &report.windows[0];
    let last = report.windows.last().unwrap();
    let boundary_ok = first.past_fraction == 0.0 && last.future_fraction == 0.0;
    let count_ok = report.windows.len() == d - window + 1;
    let sizes_ok = report.windows.iter().all(|w| w.selected.len() == topk);
    Ok((
        sums_ok && boundary_ok && count_ok && sizes_ok,
        format!(
            "{} windows, fractions sum to 1: {sums_ok}, first past {} / last future {}, top-{topk} sizes ok: {sizes_ok}",
            report.windows.len(),
            first.past_fraction,
            last.future_fraction
        ),
    ))
}

