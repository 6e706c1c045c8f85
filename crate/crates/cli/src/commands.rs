use std::path::{Path, PathBuf};

use clap::Args;
use log::{info, warn};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde_json::json;

use prosail_tvae::forward::Prosail;
use prosail_tvae::metrics::{
    ccc_posterior, evaluate as score, read_field_csv, record_rng, write_scatter_csv, FieldRecord,
};
use prosail_tvae::params::VARIABLES;
use prosail_tvae::sampler::{generate_dataset, simulate_sample, Dataset, DatasetWriter};
use prosail_tvae::spectral::{Assets, ASSET_FILES};
use prosail_tvae::tvae::{
    check_loss_gradients, infer as retrieve, train as fit, Checkpoint, EpochLog, Normalization, TrainedModel,
    TrainingManifest,
};

use crate::error::{CliError, CliResult};
use crate::manifest::{read, write, FileDigest, RunManifest};
use crate::Context;

fn with_suffix(path: &Path, suffix: &str) -> PathBuf {
    let mut p = path.as_os_str().to_owned();
    p.push(suffix);
    PathBuf::from(p)
}

fn load_dataset(path: &Path) -> CliResult<(Dataset, FileDigest)> {
    let bytes = read(path)?;
    let data = Dataset::decode(&bytes, &path.display().to_string())?;
    Ok((data, FileDigest::of_bytes(path, &bytes)))
}

fn load_checkpoint(path: &Path) -> CliResult<(Checkpoint, FileDigest)> {
    let bytes = read(path)?;
    let ck = Checkpoint::decode(&bytes, &path.display().to_string())?;
    Ok((ck, FileDigest::of_bytes(path, &bytes)))
}

fn load_records(path: &Path, require_truth: bool) -> CliResult<Vec<FieldRecord>> {
    let parsed = read_field_csv(path, require_truth)?;
    for (line, why) in &parsed.malformed {
        warn!("{}: line {line} skipped: {why}", path.display());
    }
    if !parsed.malformed.is_empty() {
        warn!("{}: {} malformed row(s) skipped", path.display(), parsed.malformed.len());
    }
    Ok(parsed.records)
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    /// Seeds the parameter draws and the noise.
    #[arg(long)]
    seed: u64,
    /// Number of samples (overrides `simulate.rows`).
    #[arg(long)]
    rows: Option<usize>,
    /// Binary dataset output.
    #[arg(long)]
    out: PathBuf,
    /// Also export the dataset as CSV.
    #[arg(long, value_name = "PATH")]
    csv: Option<PathBuf>,
}

pub fn simulate(ctx: &mut Context, a: SimulateArgs) -> CliResult<()> {
    if let Some(n) = a.rows {
        ctx.cfg.simulate.rows = n;
    }
    let rows = ctx.cfg.simulate.rows;
    if rows == 0 {
        return Err(CliError::Usage("simulate.rows must be positive".into()));
    }
    let sampler = ctx.cfg.sampler()?;
    let prosail = Prosail::new(&ctx.assets);
    let mut sink = DatasetWriter::new(Vec::new(), rows)?;
    let (dm, summary) = generate_dataset(rows, &sampler, a.seed, &prosail, &ctx.assets.checksums, &mut sink)?;
    let bytes = sink.finish()?;
    write(&a.out, &bytes)?;
    let (back, digest) = load_dataset(&a.out)?;
    if back.len() != rows || digest.sha256 != dm.data_sha256 {
        return Err(CliError::Failed(format!("{}: written dataset does not read back", a.out.display())));
    }
    let mut m = RunManifest::new("simulate", Some(a.seed), &ctx.cfg, &ctx.assets, digest.clone());
    m.summary = json!({ "generation": summary, "dataset": dm });
    m.write()?;
    if let Some(csv) = &a.csv {
        let mut text = Vec::new();
        back.write_csv(&mut text)?;
        write(csv, &text)?;
        let mut m = RunManifest::new("simulate", Some(a.seed), &ctx.cfg, &ctx.assets, FileDigest::of_bytes(csv, &text));
        m.inputs.push(digest);
        m.write()?;
    }
    let ok = summary.bound_violations == 0;
    println!(
        "{}: {} rows, LAI rule fired {} times, bound violations {} ({})",
        a.out.display(),
        summary.rows,
        summary.rule_fired,
        summary.bound_violations,
        if ok { "pass" } else { "FAIL" }
    );
    if !ok {
        return Err(CliError::Failed(format!("{} samples violate their bounds", summary.bound_violations)));
    }
    Ok(())
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    /// Seeds initialization, shuffling and latent draws.
    #[arg(long)]
    seed: u64,
    /// Training dataset from `simulate`.
    #[arg(long = "train", value_name = "PATH")]
    train_set: PathBuf,
    /// Validation dataset from `simulate`.
    #[arg(long = "val", value_name = "PATH")]
    val_set: PathBuf,
    /// Checkpoint output.
    #[arg(long)]
    out: PathBuf,
    /// Continue the run stored in `--out` up to `train.epochs`.
    #[arg(long)]
    resume: bool,
    /// Epoch log CSV (default: `<out>.log.csv`).
    #[arg(long, value_name = "PATH")]
    log: Option<PathBuf>,
    /// Overrides `train.epochs`.
    #[arg(long)]
    epochs: Option<usize>,
}

pub fn train(ctx: &mut Context, a: TrainArgs) -> CliResult<()> {
    if let Some(e) = a.epochs {
        ctx.cfg.train.epochs = e;
    }
    ctx.cfg.validate()?;
    let cfg = ctx.cfg.train;
    let (train_set, train_digest) = load_dataset(&a.train_set)?;
    let (val_set, val_digest) = load_dataset(&a.val_set)?;
    let resume = if a.resume {
        let (ck, _) = load_checkpoint(&a.out)?;
        let m = &ck.manifest;
        if m.seed != a.seed || m.train_sha256 != train_digest.sha256 || m.val_sha256 != val_digest.sha256 {
            return Err(CliError::Usage(format!(
                "{}: --resume needs the seed and datasets of the stored run (seed {})",
                a.out.display(),
                m.seed
            )));
        }
        info!("resuming after epoch {} of {}", ck.state.epochs_done, cfg.epochs);
        Some(ck.state)
    } else {
        None
    };
    let prosail = Prosail::new(&ctx.assets);
    let mut on_epoch = |r: &EpochLog| {
        info!(
            "epoch {:>3}  beta {:.4}  train {:.4} (rec {:.4}, kl {:.4})  val {:.4}  {:.1}s",
            r.epoch, r.beta, r.train.total, r.train.rec, r.train.kl, r.val.total, r.wall_seconds
        )
    };
    let outcome = fit(&prosail, &train_set, &val_set, &cfg, a.seed, resume, &mut on_epoch)?;
    let diverged = outcome.diverged.map(|(epoch, why)| format!("epoch {epoch}: {why}"));
    let ck = Checkpoint {
        manifest: TrainingManifest {
            seed: a.seed,
            config: cfg,
            train_sha256: train_digest.sha256.clone(),
            val_sha256: val_digest.sha256.clone(),
            train_rows: train_set.len(),
            val_rows: val_set.len(),
            asset_checksums: ctx.assets.checksums.clone(),
            code_version: env!("CARGO_PKG_VERSION").to_string(),
            diverged: diverged.clone(),
        },
        state: outcome.state,
    };
    let bytes = ck.encode();
    write(&a.out, &bytes)?;
    write(&Checkpoint::summary_path(&a.out), ck.summary().as_bytes())?;
    let (back, digest) = load_checkpoint(&a.out)?;
    if back.encode() != bytes {
        return Err(CliError::Failed(format!("{}: checkpoint does not read back", a.out.display())));
    }
    let summary = json!({
        "epochs_done": ck.state.epochs_done,
        "best_epoch": ck.state.best_epoch,
        "best_score": ck.state.best_score,
        "diverged": diverged,
    });
    let mut m = RunManifest::new("train", Some(a.seed), &ctx.cfg, &ctx.assets, digest.clone());
    m.inputs = vec![train_digest, val_digest];
    m.summary = summary.clone();
    m.write()?;

    let log_path = a.log.unwrap_or_else(|| with_suffix(&a.out, ".log.csv"));
    let mut text = Vec::new();
    EpochLog::write_csv(&ck.state.log, &mut text)?;
    write(&log_path, &text)?;
    let mut m = RunManifest::new("train", Some(a.seed), &ctx.cfg, &ctx.assets, FileDigest::of_bytes(&log_path, &text));
    m.inputs = vec![digest];
    m.summary = summary;
    m.write()?;

    println!("{}", ck.summary().trim_end());
    match diverged {
        Some(why) => Err(CliError::Failed(format!("training diverged at {why}; the checkpoint holds the last stable state"))),
        None => Ok(()),
    }
}

#[derive(Debug, Args)]
pub struct InferArgs {
    /// Seeds the chlorophyll draws.
    #[arg(long)]
    seed: u64,
    /// Checkpoint from `train`.
    #[arg(long)]
    checkpoint: PathBuf,
    /// Field CSV; the truth columns are optional.
    #[arg(long)]
    input: PathBuf,
    /// Per-row estimates CSV.
    #[arg(long)]
    out: PathBuf,
    /// Overrides `evaluate.ccc_samples`.
    #[arg(long)]
    ccc_samples: Option<usize>,
}

pub fn infer(ctx: &mut Context, a: InferArgs) -> CliResult<()> {
    if let Some(m) = a.ccc_samples {
        ctx.cfg.evaluate.ccc_samples = m;
    }
    ctx.cfg.validate()?;
    let m = ctx.cfg.evaluate.ccc_samples;
    let (ck, ck_digest) = load_checkpoint(&a.checkpoint)?;
    let input_digest = FileDigest::of(&a.input)?;
    let records = load_records(&a.input, false)?;
    let model = ck.model();

    let mut header = vec!["site".to_string(), "date".to_string()];
    for v in &VARIABLES[..model.encoder.n_latent] {
        for s in ["mean", "sd", "lower", "upper"] {
            header.push(format!("{}_{s}", v.name));
        }
    }
    header.extend(["CCC_mean", "CCC_lower", "CCC_upper", "CCC_unit"].map(String::from));
    let mut w = csv::Writer::from_writer(Vec::new());
    let csv_err = |e: csv::Error| CliError::Failed(format!("{}: {e}", a.out.display()));
    w.write_record(&header).map_err(csv_err)?;
    for r in &records {
        let est = retrieve(model, &r.bands, &r.geometry)?;
        // Every row uses the same draws, so identical rows get identical output.
        let ccc = ccc_posterior(&est.posterior, m, &mut record_rng(a.seed, 0))?;
        let mut row = vec![r.site.clone(), r.date.clone()];
        for v in &est.variables {
            row.extend([v.mean, v.sd, v.lower, v.upper].map(|x| x.to_string()));
        }
        row.extend([ccc.mean, ccc.lower, ccc.upper].map(|x| x.to_string()));
        row.push("ug/cm2".to_string());
        w.write_record(&row).map_err(csv_err)?;
    }
    let bytes = w.into_inner().map_err(|e| CliError::Failed(format!("{}: {e}", a.out.display())))?;
    write(&a.out, &bytes)?;
    let mut man = RunManifest::new("infer", Some(a.seed), &ctx.cfg, &ctx.assets, FileDigest::of_bytes(&a.out, &bytes));
    man.inputs = vec![ck_digest, input_digest];
    man.summary = json!({ "rows": records.len() });
    man.write()?;
    println!("{}: {} rows", a.out.display(), records.len());
    Ok(())
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    /// Seeds the chlorophyll draws.
    #[arg(long)]
    seed: u64,
    /// Checkpoint from `train`.
    #[arg(long)]
    checkpoint: PathBuf,
    /// Field CSV with truth columns.
    #[arg(long)]
    field: PathBuf,
    /// Long-format metrics report.
    #[arg(long)]
    out: PathBuf,
    /// Prediction-versus-truth table (default: `<out>.scatter.csv`).
    #[arg(long, value_name = "PATH")]
    scatter: Option<PathBuf>,
    /// Overrides `evaluate.ccc_samples`.
    #[arg(long)]
    ccc_samples: Option<usize>,
}

pub fn evaluate(ctx: &mut Context, a: EvaluateArgs) -> CliResult<()> {
    if let Some(m) = a.ccc_samples {
        ctx.cfg.evaluate.ccc_samples = m;
    }
    ctx.cfg.validate()?;
    let (ck, ck_digest) = load_checkpoint(&a.checkpoint)?;
    let field_digest = FileDigest::of(&a.field)?;
    let records = load_records(&a.field, true)?;
    let ev = score(ck.model(), &records, ctx.cfg.evaluate.ccc_samples, a.seed)?;
    if ev.skipped > 0 {
        warn!("{} record(s) without LAI or CCC skipped", ev.skipped);
    }
    let summary = json!({ "records": records.len(), "skipped": ev.skipped });

    let mut report = Vec::new();
    ev.report.write_csv(&mut report)?;
    write(&a.out, &report)?;
    let mut m = RunManifest::new("evaluate", Some(a.seed), &ctx.cfg, &ctx.assets, FileDigest::of_bytes(&a.out, &report));
    m.inputs = vec![ck_digest.clone(), field_digest.clone()];
    m.summary = summary.clone();
    m.write()?;

    let scatter_path = a.scatter.unwrap_or_else(|| with_suffix(&a.out, ".scatter.csv"));
    let mut scatter = Vec::new();
    write_scatter_csv(&ev.scatter, &mut scatter)?;
    write(&scatter_path, &scatter)?;
    let mut m = RunManifest::new("evaluate", Some(a.seed), &ctx.cfg, &ctx.assets, FileDigest::of_bytes(&scatter_path, &scatter));
    m.inputs = vec![ck_digest, field_digest];
    m.summary = summary;
    m.write()?;

    println!("{:<12} {:<8} {:<6} {:>12} {:>6}", "group", "variable", "metric", "value", "n");
    for r in &ev.report.rows {
        println!("{:<12} {:<8} {:<6} {:>12.4} {:>6}", r.group, r.variable, r.metric, r.value, r.n);
    }
    Ok(())
}

#[derive(Debug, Args)]
pub struct VerifyAssetsArgs {
    /// Write the bundled asset files and SHA256SUMS into this directory.
    #[arg(long, value_name = "DIR")]
    export: Option<PathBuf>,
}

pub fn verify_assets(ctx: &Context, a: VerifyAssetsArgs) -> CliResult<()> {
    println!("assets: {}", ctx.assets.origin);
    for name in ASSET_FILES {
        println!("  {name}  sha256 {}  ok", ctx.assets.checksums[name]);
    }
    if let Some(dir) = a.export {
        for (name, text) in Assets::bundled_files() {
            write(&dir.join(name), text.as_bytes())?;
        }
        Assets::from_dir(&dir)?;
        println!("bundled assets written to {}", dir.display());
    }
    Ok(())
}

#[derive(Debug, Args)]
pub struct GradCheckArgs {
    /// Seeds the samples, the fresh model and the checked coordinates.
    #[arg(long)]
    seed: u64,
    /// Overrides `grad_check.samples`.
    #[arg(long)]
    samples: Option<usize>,
    /// Check a trained model instead of a fresh one built from `train.encoder`.
    #[arg(long)]
    checkpoint: Option<PathBuf>,
}

pub fn grad_check(ctx: &mut Context, a: GradCheckArgs) -> CliResult<()> {
    if let Some(n) = a.samples {
        ctx.cfg.grad_check.samples = n;
    }
    ctx.cfg.validate()?;
    let gc = ctx.cfg.grad_check.clone();
    let sampler = ctx.cfg.sampler()?;
    let prosail = Prosail::new(&ctx.assets);
    let samples = (0..gc.samples as u64)
        .map(|i| simulate_sample(&prosail, &sampler, a.seed, i))
        .collect::<Result<Vec<_>, _>>()?;
    let model = match &a.checkpoint {
        Some(p) => load_checkpoint(p)?.0.model().clone(),
        None => {
            let t = &ctx.cfg.train;
            let norm = Normalization::fit(samples.iter().map(|s| &s.noisy_bands))?;
            let mut rng = ChaCha8Rng::seed_from_u64(a.seed);
            TrainedModel::new(t.encoder, t.init_sigma, t.init_noise_sd, norm, &mut rng)?
        }
    };
    let mut rng = ChaCha8Rng::seed_from_u64(a.seed.wrapping_add(1));
    let mut failed = 0;
    for (i, s) in samples.iter().enumerate() {
        let r = check_loss_gradients(&prosail, &model, s, gc.beta, gc.tolerance, &mut rng)?;
        println!(
            "sample {i:>3}: {} weight and {} latent coordinates, worst relative error {:.3e}  {}",
            r.weights.rows.len(),
            r.latents.rows.len(),
            r.worst_error(),
            if r.passed() { "ok" } else { "FAIL" }
        );
        if !r.passed() {
            failed += 1;
            println!("weights (index = tensor)\n{}\nlatents (index = variable)\n{}", r.weights, r.latents);
        }
    }
    if failed > 0 {
        return Err(CliError::Failed(format!("{failed} of {} samples exceed tolerance {:e}", samples.len(), gc.tolerance)));
    }
    println!("all {} samples within tolerance {:e}", samples.len(), gc.tolerance);
    Ok(())
}
