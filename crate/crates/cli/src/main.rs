//! `ccl` — cascaded underwater image enhancement: train, enhance, evaluate,
//! grid and synth subcommands.

use std::path::PathBuf;
use std::sync::Arc;

use anyhow::{bail, Context, Result};
use ccl::config::{self, pick};
use ccl::weights::BackboneSource;
use ccl::{dataset, enhance, evaluate, grid, synth, trainer};
use ccl_core::ccnet::CcNetConfig;
use ccl_core::data::DegradePreset;
use ccl_core::hrnet::HrNetConfig;
use ccl_core::losses::LossWeights;
use ccl_core::train::{NegativeSource, Stage, TrainConfig};
use clap::{Args, Parser, Subcommand};

#[derive(Parser)]
#[command(name = "ccl", version, about = "Cascaded color correction + haze removal for underwater images")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Train the cascade (stage cc, hr, or all).
    Train(TrainArgs),
    /// Enhance a directory of images with trained checkpoints.
    Enhance(EnhanceArgs),
    /// Compute PSNR/SSIM/UIQM/UCIQE over a directory and write a CSV report.
    Evaluate(EvalArgs),
    /// Compose a labeled side-by-side comparison grid from directories.
    Grid(GridArgs),
    /// Generate a synthetic paired corpus.
    Synth(SynthArgs),
}

#[derive(Args)]
struct TrainArgs {
    /// cc, hr or all
    #[arg(long)]
    stage: String,
    /// Dataset root containing raw/ and reference/
    #[arg(long)]
    data: PathBuf,
    /// Output directory for checkpoints, logs and stage-1 outputs
    #[arg(long)]
    out: PathBuf,
    /// JSON config file; flags override file values
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    batch_size: Option<usize>,
    #[arg(long)]
    lr_cc: Option<f64>,
    #[arg(long)]
    lr_hr: Option<f64>,
    #[arg(long)]
    beta1: Option<f64>,
    #[arg(long)]
    decay_start_epoch: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// Train without the contrastive terms (pure color / SSIM losses)
    #[arg(long)]
    no_contrastive: bool,
    /// Stage-2 contrastive negative: cc_output (default) or raw
    #[arg(long)]
    negative_source: Option<String>,
    /// Feature width of the color correction network
    #[arg(long)]
    cc_width: Option<usize>,
    /// Attention block count of the color correction network
    #[arg(long)]
    num_fab: Option<usize>,
    /// Dehazer widths at full,half,quarter resolution, e.g. 32,64,128
    #[arg(long)]
    hr_widths: Option<String>,
    /// Square training resolution
    #[arg(long)]
    train_size: Option<usize>,
    #[arg(long)]
    jobs: Option<usize>,
    /// Backbone: weight file path, `random`, or `random:<div>[:<seed>]`.
    /// Defaults to $CCL_BACKBONE_WEIGHTS, falling back to `random:4`.
    #[arg(long)]
    backbone: Option<String>,
    #[arg(long)]
    checkpoint_every: Option<usize>,
    /// Reuse an existing stage-1 checkpoint (stage hr only)
    #[arg(long)]
    cc_ckpt: Option<PathBuf>,
    /// Reuse already materialized stage-1 outputs (stage hr only)
    #[arg(long)]
    cc_outputs: Option<PathBuf>,
    #[arg(long)]
    quiet: bool,
}

#[derive(Args)]
struct EnhanceArgs {
    #[arg(long)]
    input: PathBuf,
    #[arg(long)]
    cc_ckpt: PathBuf,
    #[arg(long)]
    hr_ckpt: PathBuf,
    #[arg(long)]
    out: PathBuf,
    /// Also write the stage-1 intermediate as <id>_cc.png
    #[arg(long)]
    emit_intermediate: bool,
}

#[derive(Args)]
struct EvalArgs {
    /// Directory of images to score
    #[arg(long)]
    pred: PathBuf,
    /// Reference directory (enables PSNR/SSIM)
    #[arg(long = "ref")]
    reference: Option<PathBuf>,
    /// CSV output path
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct GridArgs {
    /// Input directories (repeat the flag; order defines column order)
    #[arg(long = "dir", required = true)]
    dirs: Vec<PathBuf>,
    #[arg(long)]
    out: PathBuf,
    /// Cell side length in pixels
    #[arg(long, default_value_t = 192)]
    cell: usize,
}

#[derive(Args)]
struct SynthArgs {
    #[arg(long)]
    count: usize,
    /// greenish, bluish or hazy
    #[arg(long, default_value = "greenish")]
    preset: String,
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 256)]
    size: usize,
}

fn main() {
    if let Err(e) = run() {
        eprintln!("error: {e:#}");
        std::process::exit(1);
    }
}

fn run() -> Result<()> {
    match Cli::parse().cmd {
        Cmd::Train(args) => cmd_train(args),
        Cmd::Enhance(args) => {
            let n = enhance::enhance_dir(
                &args.input,
                &args.cc_ckpt,
                &args.hr_ckpt,
                &args.out,
                args.emit_intermediate,
            )?;
            println!("enhanced {n} image(s) into {}", args.out.display());
            Ok(())
        }
        Cmd::Evaluate(args) => {
            let report = evaluate::evaluate_dataset(&args.pred, args.reference.as_deref())?;
            report.write_csv(&args.out)?;
            let psnr = report.mean_psnr().map(|v| format!(" psnr {v:.3}")).unwrap_or_default();
            let ssim = report.mean_ssim().map(|v| format!(" ssim {v:.4}")).unwrap_or_default();
            println!(
                "{} image(s):{psnr}{ssim} uiqm {:.3} uciqe {:.3} -> {}",
                report.rows.len(),
                report.mean_uiqm(),
                report.mean_uciqe(),
                args.out.display()
            );
            Ok(())
        }
        Cmd::Grid(args) => {
            grid::make_grid(&args.dirs, &args.out, args.cell)?;
            println!("wrote {}", args.out.display());
            Ok(())
        }
        Cmd::Synth(args) => {
            let preset = DegradePreset::parse(&args.preset).map_err(|e| anyhow::anyhow!("{e}"))?;
            synth::generate_corpus(&args.out, args.count, preset, args.seed, args.size)?;
            println!(
                "wrote {} pair(s) under {} (preset {}, seed {})",
                args.count,
                args.out.display(),
                preset.name(),
                args.seed
            );
            Ok(())
        }
    }
}

fn cmd_train(args: TrainArgs) -> Result<()> {
    let file = args.config.as_deref().map(config::load).transpose()?.unwrap_or_default();

    let stage = args.stage.as_str();
    if !["cc", "hr", "all"].contains(&stage) {
        bail!("--stage must be cc, hr or all (got `{stage}`)");
    }

    let negative_source = match pick(
        args.negative_source.clone(),
        file.negative_source.clone(),
        "cc_output".to_string(),
    )
    .as_str()
    {
        "cc_output" | "cc" => NegativeSource::CcOutput,
        "raw" => NegativeSource::Raw,
        other => bail!("--negative-source must be cc_output or raw (got `{other}`)"),
    };

    let use_contrastive = if args.no_contrastive { false } else { file.use_contrastive.unwrap_or(true) };

    let base = TrainConfig::default();
    let mut train_config = TrainConfig {
        stage: Stage::Cc,
        batch_size: pick(args.batch_size, file.batch_size, base.batch_size),
        epochs: pick(args.epochs, file.epochs, base.epochs),
        lr_cc: pick(args.lr_cc, file.lr_cc, base.lr_cc),
        lr_hr: pick(args.lr_hr, file.lr_hr, base.lr_hr),
        beta1: pick(args.beta1, file.beta1, base.beta1),
        decay_start_epoch: pick(args.decay_start_epoch, file.decay_start_epoch, base.decay_start_epoch),
        seed: pick(args.seed, file.seed, base.seed),
        use_contrastive,
        negative_source,
    };

    let cc_config = CcNetConfig {
        base_width: pick(args.cc_width, file.cc_width, CcNetConfig::default().base_width),
        num_fab: pick(args.num_fab, file.num_fab, CcNetConfig::default().num_fab),
        kernel_size: 3,
    };
    let hr_widths = match args.hr_widths.as_deref() {
        Some(s) => {
            let parts: Vec<usize> = s
                .split(',')
                .map(|p| p.trim().parse().context("parsing --hr-widths"))
                .collect::<Result<_>>()?;
            let [a, b, c] = parts[..] else { bail!("--hr-widths needs exactly three values") };
            [a, b, c]
        }
        None => file.hr_widths.unwrap_or(HrNetConfig::default().scale_widths),
    };
    let hr_config = HrNetConfig { scale_widths: hr_widths, kernel_size: 3 };

    let mut loss_weights = LossWeights::<f32>::default();
    if let Some(v) = file.lambda_cc {
        loss_weights.lambda_cc = v as f32;
    }
    if let Some(v) = file.lambda_hr {
        loss_weights.lambda_hr = v as f32;
    }
    if let Some(v) = file.s_cc {
        loss_weights.s_cc = v as f32;
    }
    if let Some(v) = file.s_hr {
        loss_weights.s_hr = v as f32;
    }
    loss_weights.validate().map_err(|e| anyhow::anyhow!("{e}"))?;

    let backbone_spec = pick(args.backbone.clone(), file.backbone.clone(), String::new());
    let source = if backbone_spec.is_empty() {
        BackboneSource::default_from_env()
    } else {
        BackboneSource::parse(&backbone_spec)?
    };
    let backbone = Arc::new(source.load()?);

    let opts = trainer::TrainerOptions {
        out_dir: args.out.clone(),
        cc_config,
        hr_config,
        loss_weights,
        backbone,
        backbone_desc: source.describe(),
        jobs: pick(args.jobs, file.jobs, 1).max(1),
        checkpoint_every: pick(args.checkpoint_every, file.checkpoint_every, 1),
        train_size: pick(args.train_size, file.train_size, ccl_core::data::TRAIN_SIZE),
        quiet: args.quiet,
    };

    std::fs::create_dir_all(&args.out)?;
    let effective = serde_json::json!({
        "stage": stage,
        "data": args.data,
        "out": args.out,
        "train": train_config,
        "cc_config": cc_config,
        "hr_config": hr_config,
        "train_size": opts.train_size,
        "jobs": opts.jobs,
        "backbone": opts.backbone_desc,
        "loss_weights": loss_weights,
    });
    let echoed = serde_json::to_string_pretty(&effective)?;
    std::fs::write(args.out.join("run_config.json"), &echoed)?;
    if !args.quiet {
        println!("effective config:\n{echoed}");
    }

    let manifest = dataset::load_paired_dataset(&args.data, "train")?;

    match stage {
        "cc" => {
            train_config.stage = Stage::Cc;
            let ckpt = trainer::train_stage1(&manifest, &train_config, &opts)?;
            println!("stage 1 checkpoint: {}", ckpt.display());
        }
        "hr" => {
            let outputs = stage1_outputs_for_hr(&args, &manifest)?;
            train_config.stage = Stage::Hr;
            let ckpt = trainer::train_stage2(&outputs, &train_config, &opts)?;
            println!("stage 2 checkpoint: {}", ckpt.display());
        }
        "all" => {
            train_config.stage = Stage::Cc;
            let cc_ckpt = trainer::train_stage1(&manifest, &train_config, &opts)?;
            let out_dir = args.out.join("cc_outputs");
            let outputs = trainer::generate_stage1_outputs(&cc_ckpt, &manifest, &out_dir)?;
            println!("materialized {} stage-1 output(s) into {}", outputs.entries.len(), out_dir.display());
            train_config.stage = Stage::Hr;
            let hr_ckpt = trainer::train_stage2(&outputs, &train_config, &opts)?;
            println!("stage 1 checkpoint: {}", cc_ckpt.display());
            println!("stage 2 checkpoint: {}", hr_ckpt.display());
        }
        _ => unreachable!(),
    }
    Ok(())
}

/// For `--stage hr`: take pre-generated outputs, or generate them from a
/// stage-1 checkpoint.
fn stage1_outputs_for_hr(
    args: &TrainArgs,
    manifest: &dataset::DatasetManifest,
) -> Result<trainer::OutputsManifest> {
    if let Some(dir) = &args.cc_outputs {
        let text = std::fs::read_to_string(dir.join("outputs.json"))
            .with_context(|| format!("{} has no outputs.json; generate stage-1 outputs first", dir.display()))?;
        return Ok(serde_json::from_str(&text)?);
    }
    let Some(ckpt) = &args.cc_ckpt else {
        bail!("--stage hr needs --cc-ckpt or --cc-outputs");
    };
    let out_dir = args.out.join("cc_outputs");
    trainer::generate_stage1_outputs(ckpt, manifest, &out_dir)
}
