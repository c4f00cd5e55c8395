//! Two-stage training harness. Stage 1 fits the chroma corrector against
//! reference chroma (hybrid color + contrastive loss, negatives = raw
//! inputs). Its outputs are then materialized to disk, and stage 2 fits the
//! dehazer on those outputs (hybrid SSIM + contrastive loss, negatives =
//! stage-1 outputs, or raw images under the raw-as-negative ablation).
//!
//! Batch gradients are averaged in sample order regardless of worker count,
//! so a fixed seed reproduces the loss curve bit-for-bit even with
//! `jobs > 1`.

use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use anyhow::{bail, Context, Result};
use ccl_core::backbone::FeatureExtractor;
use ccl_core::ccnet::{build_ccnet, CcNet, CcNetConfig};
use ccl_core::color::{chroma_to_rgb, rgb_to_lab, split_lab};
use ccl_core::data::PairedSample;
use ccl_core::graph::Graph;
use ccl_core::hrnet::{build_hrnet, HrNet, HrNetConfig};
use ccl_core::image::RgbImage;
use ccl_core::losses::{self, LossWeights};
use ccl_core::rng::Rng;
use ccl_core::tensor::Tensor;
use ccl_core::train::{lr_at_epoch, Adam, NegativeSource, TrainConfig};
use serde::{Deserialize, Serialize};

use crate::checkpoint::{self, Manifest, ModelKind};
use crate::dataset::DatasetManifest;
use crate::io;

/// Everything a training run needs besides the stage hyperparameters.
pub struct TrainerOptions {
    pub out_dir: PathBuf,
    pub cc_config: CcNetConfig,
    pub hr_config: HrNetConfig,
    pub loss_weights: LossWeights<f32>,
    pub backbone: Arc<FeatureExtractor<f32>>,
    pub backbone_desc: String,
    pub jobs: usize,
    pub checkpoint_every: usize,
    /// Square side images are resized to for training.
    pub train_size: usize,
    pub quiet: bool,
}

impl TrainerOptions {
    fn say(&self, msg: std::fmt::Arguments<'_>) {
        if !self.quiet {
            println!("{msg}");
        }
    }
}

struct LossLog {
    file: std::io::BufWriter<std::fs::File>,
}

impl LossLog {
    fn create(path: &Path) -> Result<Self> {
        if let Some(parent) = path.parent() {
            std::fs::create_dir_all(parent)?;
        }
        let mut file = std::io::BufWriter::new(std::fs::File::create(path)?);
        writeln!(file, "epoch,iter,loss_total,loss_main,loss_ctr,lr")?;
        Ok(LossLog { file })
    }

    fn push(&mut self, epoch: usize, iter: usize, total: f64, main: f64, ctr: Option<f64>, lr: f64) -> Result<()> {
        let ctr = ctr.map(|v| format!("{v:.8}")).unwrap_or_default();
        writeln!(self.file, "{epoch},{iter},{total:.8},{main:.8},{ctr},{lr:.8}")?;
        self.file.flush()?;
        Ok(())
    }
}

/// Gradient + loss components of one sample.
struct SampleGrad {
    grads: Vec<Tensor<f32>>,
    total: f64,
    main: f64,
    ctr: Option<f64>,
}

/// Average per-sample gradients in index order (deterministic reduction).
fn reduce_batch(per_sample: Vec<SampleGrad>) -> (Vec<Tensor<f32>>, f64, f64, Option<f64>) {
    let n = per_sample.len() as f64;
    let scale = (1.0 / n) as f32;
    let mut iter = per_sample.into_iter();
    let first = iter.next().expect("non-empty batch");
    let mut grads = first.grads;
    let mut total = first.total;
    let mut main = first.main;
    let mut ctr = first.ctr;
    for s in iter {
        for (acc, g) in grads.iter_mut().zip(&s.grads) {
            acc.add_assign(g);
        }
        total += s.total;
        main += s.main;
        ctr = match (ctr, s.ctr) {
            (Some(a), Some(b)) => Some(a + b),
            _ => None,
        };
    }
    for g in grads.iter_mut() {
        g.scale_assign(scale);
    }
    (grads, total / n, main / n, ctr.map(|c| c / n))
}

/// Run `work` over the indices with `jobs` scoped workers, collecting results
/// in index order.
fn parallel_map<T: Send>(
    indices: usize,
    jobs: usize,
    work: impl Fn(usize) -> Result<T> + Sync,
) -> Result<Vec<T>> {
    if jobs <= 1 || indices <= 1 {
        return (0..indices).map(&work).collect();
    }
    let mut slots: Vec<Option<Result<T>>> = (0..indices).map(|_| None).collect();
    let next = std::sync::atomic::AtomicUsize::new(0);
    let slots_ref = std::sync::Mutex::new(&mut slots);
    std::thread::scope(|scope| {
        for _ in 0..jobs.min(indices) {
            scope.spawn(|| loop {
                let i = next.fetch_add(1, std::sync::atomic::Ordering::Relaxed);
                if i >= indices {
                    break;
                }
                let r = work(i);
                slots_ref.lock().expect("worker lock")[i] = Some(r);
            });
        }
    });
    slots.into_iter().map(|s| s.expect("worker filled slot")).collect()
}

fn augment_pair(sample: &PairedSample<f32>, size: usize, seed: u64, epoch: usize) -> Result<PairedSample<f32>> {
    let mut rng = Rng::derive(seed.wrapping_add(epoch as u64).wrapping_mul(0x9e37), &sample.id);
    ccl_core::data::augment(sample, size, &mut rng).map_err(|e| anyhow::anyhow!("{e}"))
}

fn shuffled_indices(n: usize, seed: u64, epoch: usize) -> Vec<usize> {
    let mut order: Vec<usize> = (0..n).collect();
    let mut rng = Rng::derive(seed, &format!("epoch-{epoch}"));
    rng.shuffle(&mut order);
    order
}

// ---- stage 1 ---------------------------------------------------------------

/// Train the color correction network. Returns the base path of the final
/// checkpoint (`<out>/cc_last`).
pub fn train_stage1(
    manifest: &DatasetManifest,
    config: &TrainConfig,
    opts: &TrainerOptions,
) -> Result<PathBuf> {
    config.validate().map_err(|e| anyhow::anyhow!("{e}"))?;
    let entries: Vec<_> = manifest.paired_entries().cloned().collect();
    if entries.is_empty() {
        bail!("stage 1 needs paired samples (raw + reference)");
    }
    let mut model = build_ccnet::<f32>(opts.cc_config, config.seed).map_err(|e| anyhow::anyhow!("{e}"))?;
    opts.say(format_args!(
        "stage 1: {} pairs, {} params, {} epochs, batch {}, {}",
        entries.len(),
        model.param_count(),
        config.epochs,
        config.batch_size,
        opts.backbone_desc
    ));

    let shapes: Vec<_> = model.params().iter().map(|(_, p)| p.shape()).collect();
    let mut adam = Adam::new(&shapes, config.beta1);
    let mut log = LossLog::create(&opts.out_dir.join("loss_cc.csv"))?;

    // decoded samples stay in memory; corpora are desk-scale by design
    let samples: Vec<PairedSample<f32>> = entries
        .iter()
        .map(|e| manifest.load_sample(e))
        .collect::<Result<_>>()?;

    let mut iter_count = 0usize;
    let mut last_loss = 0.0f64;
    for epoch in 0..config.epochs {
        let lr = lr_at_epoch(config, epoch).map_err(|e| anyhow::anyhow!("{e}"))?;
        let order = shuffled_indices(samples.len(), config.seed, epoch);
        for batch in order.chunks(config.batch_size) {
            let per_sample = parallel_map(batch.len(), opts.jobs, |bi| {
                let sample = &samples[batch[bi]];
                let aug = augment_pair(sample, opts.train_size, config.seed, epoch)?;
                cc_sample_grad(&model, &aug, opts, config)
            })
            .with_context(|| format!("epoch {epoch}, iteration {iter_count}"))?;

            let (grads, total, main, ctr) = reduce_batch(per_sample);
            if !total.is_finite() {
                let ids: Vec<_> = batch.iter().map(|&i| samples[i].id.as_str()).collect();
                eprintln!("aborting: non-finite loss in batch {ids:?} (epoch {epoch}, iter {iter_count})");
                bail!("non-finite loss at epoch {epoch}, iteration {iter_count}; offending batch: {ids:?}");
            }
            adam.step(model.params_mut(), &grads, lr);
            log.push(epoch, iter_count, total, main, ctr, lr)?;
            last_loss = total;
            iter_count += 1;
        }
        let mut m = Manifest::new(ModelKind::Cc, model.param_count(), config.seed);
        m.epoch = epoch;
        m.train_config = Some(*config);
        m.final_loss = Some(last_loss);
        m.notes.insert("backbone".into(), opts.backbone_desc.clone());
        if (epoch + 1) % opts.checkpoint_every.max(1) == 0 || epoch + 1 == config.epochs {
            checkpoint::save_ccnet(&opts.out_dir.join(format!("cc_epoch{epoch:04}")), &model, m.clone())?;
        }
        checkpoint::save_ccnet(&opts.out_dir.join("cc_last"), &model, m)?;
        opts.say(format_args!("stage 1 epoch {epoch}: loss {last_loss:.6} (lr {lr:.2e})"));
    }
    Ok(opts.out_dir.join("cc_last"))
}

/// Loss gradient of one stage-1 sample.
fn cc_sample_grad(
    model: &CcNet<f32>,
    aug: &PairedSample<f32>,
    opts: &TrainerOptions,
    config: &TrainConfig,
) -> Result<SampleGrad> {
    let reference = aug.reference.as_ref().expect("paired sample");
    let raw_lab = rgb_to_lab(&aug.raw).map_err(|e| anyhow::anyhow!("{e}"))?;
    let (raw_chroma, raw_luma) = split_lab(&raw_lab).map_err(|e| anyhow::anyhow!("{e}"))?;
    let ref_lab = rgb_to_lab(reference).map_err(|e| anyhow::anyhow!("{e}"))?;
    let (ref_chroma, _) = split_lab(&ref_lab).map_err(|e| anyhow::anyhow!("{e}"))?;
    let luma = Arc::new(raw_luma.tensor().clone());

    // positive: reference chroma merged with the raw lightness; negative: raw
    let (pos, neg);
    if config.use_contrastive {
        let ref_hat = chroma_to_rgb(ref_chroma.tensor(), &luma);
        pos = opts.backbone.features(&ref_hat);
        neg = opts.backbone.features(aug.raw.tensor());
    } else {
        let empty = || std::array::from_fn(|_| Arc::new(Tensor::scalar(0.0f32)));
        pos = empty();
        neg = empty();
    }

    let mut g = Graph::recording();
    let x = g.input(raw_chroma.into_tensor(), false);
    let pred = model.forward(&mut g, &x);
    let refv = g.constant(ref_chroma.into_tensor());
    let terms = losses::hybrid_cc_graph(
        &mut g,
        &pred,
        &luma,
        &refv,
        &pos,
        &neg,
        &opts.backbone,
        &opts.loss_weights,
        config.use_contrastive,
    )
    .map_err(|e| anyhow::anyhow!("{e}"))?;
    let grads = g.backward(&terms.total);
    let gvec = model
        .params()
        .into_iter()
        .map(|(_, p)| g.param_grad(&grads, p).cloned().unwrap_or_else(|| Tensor::zeros(p.shape())))
        .collect();
    Ok(SampleGrad {
        grads: gvec,
        total: terms.total.item() as f64,
        main: terms.main.item() as f64,
        ctr: terms.ctr.as_ref().map(|c| c.item() as f64),
    })
}

// ---- stage-1 output materialization ---------------------------------------

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Stage2Entry {
    pub id: String,
    pub cc_output: PathBuf,
    pub reference: Option<PathBuf>,
    pub raw: PathBuf,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct OutputsManifest {
    pub checkpoint: PathBuf,
    pub entries: Vec<Stage2Entry>,
}

/// Run the trained stage-1 model over every raw image at native resolution
/// and write `<out_dir>/<id>.png` plus a pairing manifest.
pub fn generate_stage1_outputs(
    ckpt_base: &Path,
    manifest: &DatasetManifest,
    out_dir: &Path,
) -> Result<OutputsManifest> {
    let (model, _) = checkpoint::load_ccnet(ckpt_base)?;
    std::fs::create_dir_all(out_dir)?;
    let mut entries = Vec::new();
    for entry in &manifest.entries {
        let raw = match io::load_rgb(&entry.raw_path) {
            Ok(img) => img,
            Err(e) => {
                eprintln!("warning: skipping {}: {e}", entry.id);
                continue;
            }
        };
        let enhanced = crate::enhance::enhance_cc(&model, &raw)?;
        let out_path = out_dir.join(format!("{}.png", entry.id));
        io::save_rgb_png(&out_path, &enhanced)?;
        entries.push(Stage2Entry {
            id: entry.id.clone(),
            cc_output: out_path,
            reference: entry.reference_path.clone(),
            raw: entry.raw_path.clone(),
        });
    }
    let outputs = OutputsManifest { checkpoint: ckpt_base.to_path_buf(), entries };
    std::fs::write(out_dir.join("outputs.json"), serde_json::to_string_pretty(&outputs)?)?;
    Ok(outputs)
}

// ---- stage 2 ---------------------------------------------------------------

/// Train the haze removal network on materialized stage-1 outputs. Returns
/// the base path of the final checkpoint (`<out>/hr_last`).
pub fn train_stage2(
    stage2: &OutputsManifest,
    config: &TrainConfig,
    opts: &TrainerOptions,
) -> Result<PathBuf> {
    config.validate().map_err(|e| anyhow::anyhow!("{e}"))?;
    let entries: Vec<_> = stage2.entries.iter().filter(|e| e.reference.is_some()).cloned().collect();
    if entries.is_empty() {
        bail!("stage 2 needs stage-1 outputs paired with references");
    }
    if opts.train_size < losses::SSIM_WINDOW {
        bail!("train size {} is below the SSIM window", opts.train_size);
    }
    let mut model = build_hrnet::<f32>(opts.hr_config, config.seed).map_err(|e| anyhow::anyhow!("{e}"))?;
    opts.say(format_args!(
        "stage 2: {} pairs, {} params, {} epochs, batch {}, negatives from {}",
        entries.len(),
        model.param_count(),
        config.epochs,
        config.batch_size,
        match config.negative_source {
            NegativeSource::CcOutput => "stage-1 outputs",
            NegativeSource::Raw => "raw images (ablation)",
        },
    ));

    struct Triple {
        id: String,
        cc: RgbImage<f32>,
        reference: RgbImage<f32>,
        raw: RgbImage<f32>,
    }
    let samples: Vec<Triple> = entries
        .iter()
        .map(|e| {
            Ok(Triple {
                id: e.id.clone(),
                cc: io::load_rgb(&e.cc_output)?,
                reference: io::load_rgb(e.reference.as_ref().expect("filtered"))?,
                raw: io::load_rgb(&e.raw)?,
            })
        })
        .collect::<Result<_>>()?;

    let shapes: Vec<_> = model.params().iter().map(|(_, p)| p.shape()).collect();
    let mut adam = Adam::new(&shapes, config.beta1);
    let mut log = LossLog::create(&opts.out_dir.join("loss_hr.csv"))?;

    let mut iter_count = 0usize;
    let mut last_loss = 0.0f64;
    for epoch in 0..config.epochs {
        let lr = lr_at_epoch(config, epoch).map_err(|e| anyhow::anyhow!("{e}"))?;
        let order = shuffled_indices(samples.len(), config.seed, epoch);
        for batch in order.chunks(config.batch_size) {
            let per_sample = parallel_map(batch.len(), opts.jobs, |bi| {
                let s = &samples[batch[bi]];
                // identical geometric transform for all three images
                let mut rng = Rng::derive(config.seed.wrapping_add(epoch as u64).wrapping_mul(0x5851), &s.id);
                let flip = rng.next_bool(0.5);
                let prep = |img: &RgbImage<f32>| -> Result<RgbImage<f32>> {
                    let r = img.resize(opts.train_size, opts.train_size).map_err(|e| anyhow::anyhow!("{e}"))?;
                    Ok(if flip { r.hflip() } else { r })
                };
                let cc = prep(&s.cc)?;
                let reference = prep(&s.reference)?;
                let negative = match config.negative_source {
                    NegativeSource::CcOutput => cc.clone(),
                    NegativeSource::Raw => prep(&s.raw)?,
                };
                hr_sample_grad(&model, &cc, &reference, &negative, opts, config)
            })
            .with_context(|| format!("epoch {epoch}, iteration {iter_count}"))?;

            let (grads, total, main, ctr) = reduce_batch(per_sample);
            if !total.is_finite() {
                let ids: Vec<_> = batch.iter().map(|&i| samples[i].id.as_str()).collect();
                eprintln!("aborting: non-finite loss in batch {ids:?} (epoch {epoch}, iter {iter_count})");
                bail!("non-finite loss at epoch {epoch}, iteration {iter_count}; offending batch: {ids:?}");
            }
            adam.step(model.params_mut(), &grads, lr);
            log.push(epoch, iter_count, total, main, ctr, lr)?;
            last_loss = total;
            iter_count += 1;
        }
        let mut m = Manifest::new(ModelKind::Hr, model.param_count(), config.seed);
        m.epoch = epoch;
        m.train_config = Some(*config);
        m.final_loss = Some(last_loss);
        m.notes.insert("backbone".into(), opts.backbone_desc.clone());
        m.notes.insert(
            "negative_source".into(),
            match config.negative_source {
                NegativeSource::CcOutput => "cc_output".into(),
                NegativeSource::Raw => "raw".into(),
            },
        );
        if (epoch + 1) % opts.checkpoint_every.max(1) == 0 || epoch + 1 == config.epochs {
            checkpoint::save_hrnet(&opts.out_dir.join(format!("hr_epoch{epoch:04}")), &model, m.clone())?;
        }
        checkpoint::save_hrnet(&opts.out_dir.join("hr_last"), &model, m)?;
        opts.say(format_args!("stage 2 epoch {epoch}: loss {last_loss:.6} (lr {lr:.2e})"));
    }
    Ok(opts.out_dir.join("hr_last"))
}

fn hr_sample_grad(
    model: &HrNet<f32>,
    cc: &RgbImage<f32>,
    reference: &RgbImage<f32>,
    negative: &RgbImage<f32>,
    opts: &TrainerOptions,
    config: &TrainConfig,
) -> Result<SampleGrad> {
    let (pos, neg);
    if config.use_contrastive {
        pos = opts.backbone.features(reference.tensor());
        neg = opts.backbone.features(negative.tensor());
    } else {
        let empty = || std::array::from_fn(|_| Arc::new(Tensor::scalar(0.0f32)));
        pos = empty();
        neg = empty();
    }

    let mut g = Graph::recording();
    let x = g.input(cc.to_network(), false);
    let pred = model.forward(&mut g, &x).map_err(|e| anyhow::anyhow!("{e}"))?;
    let pred01 = g.affine(&pred, 0.5, 0.5);
    let refv = g.constant(reference.tensor().clone());
    let terms = losses::hybrid_hr_graph(
        &mut g,
        &pred01,
        &refv,
        &pos,
        &neg,
        &opts.backbone,
        &opts.loss_weights,
        config.use_contrastive,
    )
    .map_err(|e| anyhow::anyhow!("{e}"))?;
    let grads = g.backward(&terms.total);
    let gvec = model
        .params()
        .into_iter()
        .map(|(_, p)| g.param_grad(&grads, p).cloned().unwrap_or_else(|| Tensor::zeros(p.shape())))
        .collect();
    Ok(SampleGrad {
        grads: gvec,
        total: terms.total.item() as f64,
        main: terms.main.item() as f64,
        ctr: terms.ctr.as_ref().map(|c| c.item() as f64),
    })
}
