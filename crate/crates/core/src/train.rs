//! Two-stage training: reconstruction pre-training of the encoder, then
//! supervised refinement with a classification head.

use std::collections::HashMap;
use std::time::Instant;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::data::{batch_tensor, Dataset};
use crate::error::{Error, Result};
use crate::layers::PoolKind;
use crate::losses::{cross_entropy, reconstruction_loss, ssim, SsimConfig};
use crate::models::{
    build_autoencoder, build_classifier, Autoencoder, Classifier, HeadKind, NamedTensors,
};
use crate::rng::{stream, tags};
use crate::tape::{Gradients, Tape};
use crate::tensor::{Tensor, TensorId};

/// Hyperparameters for one training run.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainConfig {
    /// 1 = unsupervised reconstruction, 2 = supervised classification.
    pub stage: u8,
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f32,
    pub momentum: f32,
    pub weight_decay: f32,
    pub seed: u64,
    pub pool: PoolKind,
    pub head: HeadKind,
    /// Fraction of the training pool held out for validation, per class.
    pub val_fraction: f32,
    /// Learning rate drops by `lr_decay_factor` at this fraction of epochs.
    pub lr_decay_at: f32,
    pub lr_decay_factor: f32,
    /// Keep the encoder fixed during stage 2.
    pub freeze_encoder: bool,
    /// Stop once the validation metric reaches this value.
    pub target_metric: Option<f32>,
    /// Emit one progress line per epoch on stdout.
    pub log_progress: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            stage: 2,
            epochs: 15,
            batch_size: 16,
            learning_rate: 0.01,
            momentum: 0.9,
            weight_decay: 1e-4,
            seed: 7,
            pool: PoolKind::Eap,
            head: HeadKind::Tel,
            val_fraction: 0.2,
            lr_decay_at: 0.6,
            lr_decay_factor: 0.1,
            freeze_encoder: false,
            target_metric: None,
            log_progress: true,
        }
    }
}

impl TrainConfig {
    /// Reconstruction defaults. The SSIM objective averages over every
    /// window position, which scales per-pixel gradients down by the window
    /// count; the learning rate is sized accordingly.
    pub fn stage1() -> Self {
        TrainConfig {
            stage: 1,
            epochs: 20,
            learning_rate: 2.0,
            lr_decay_at: 0.8,
            ..TrainConfig::default()
        }
    }

    pub fn stage2() -> Self {
        TrainConfig::default()
    }

    pub fn validate(&self) -> Result<()> {
        if self.stage != 1 && self.stage != 2 {
            return Err(Error::Config(format!("stage must be 1 or 2, got {}", self.stage)));
        }
        if !(self.learning_rate >= 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::Config("learning rate must be finite and >= 0".into()));
        }
        if self.batch_size < 2 {
            return Err(Error::Config(
                "batch size must be >= 2 (batch norm needs more than one value)".into(),
            ));
        }
        if !(self.val_fraction > 0.0 && self.val_fraction < 1.0) {
            return Err(Error::Config("validation fraction must be in (0,1)".into()));
        }
        if !(0.0..1.0).contains(&self.momentum) {
            return Err(Error::Config("momentum must be in [0,1)".into()));
        }
        if self.epochs == 0 {
            return Err(Error::Config("need at least one epoch".into()));
        }
        Ok(())
    }

    fn lr_at(&self, epoch: usize) -> f32 {
        let knee = (self.lr_decay_at * self.epochs as f32).ceil() as usize;
        if epoch >= knee {
            self.learning_rate * self.lr_decay_factor
        } else {
            self.learning_rate
        }
    }
}

/// Per-epoch training history.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TrainReport {
    pub stage: u8,
    pub epoch_loss: Vec<f32>,
    /// Mean validation SSIM (stage 1) or validation accuracy (stage 2).
    pub val_metric: Vec<f32>,
    pub best_epoch: usize,
    pub best_metric: f32,
    pub wall_secs: f64,
    pub stopped_early: bool,
}

impl TrainReport {
    /// CSV with header `epoch,loss,val_metric`.
    pub fn loss_csv(&self) -> String {
        let mut s = String::from("epoch,loss,val_metric\n");
        for (i, (l, m)) in self.epoch_loss.iter().zip(self.val_metric.iter()).enumerate() {
            s.push_str(&format!("{i},{l},{m}\n"));
        }
        s
    }
}

// ── optimizer ────────────────────────────────────────────────────────

/// SGD with momentum and weight decay:
/// `v ← μ·v + g + wd·p`, `p ← p − lr·v`.
pub struct Sgd {
    pub lr: f32,
    pub momentum: f32,
    pub weight_decay: f32,
    velocity: HashMap<TensorId, Vec<f32>>,
}

impl Sgd {
    pub fn new(lr: f32, momentum: f32, weight_decay: f32) -> Self {
        Sgd {
            lr,
            momentum,
            weight_decay,
            velocity: HashMap::new(),
        }
    }

    /// Apply one update to every parameter that received a gradient.
    pub fn step<'a>(
        &mut self,
        params: impl IntoIterator<Item = &'a mut Tensor>,
        grads: &Gradients,
    ) {
        for p in params {
            let Some(g) = grads.get(p) else { continue };
            let g = g.data();
            let v = self
                .velocity
                .entry(p.id())
                .or_insert_with(|| vec![0.0; g.len()]);
            let data = p.data_mut();
            for ((pv, vv), gv) in data.iter_mut().zip(v.iter_mut()).zip(g.iter()) {
                *vv = self.momentum * *vv + gv + self.weight_decay * *pv;
                *pv -= self.lr * *vv;
            }
        }
    }
}

// ── data plumbing ────────────────────────────────────────────────────

/// Class-stratified split of sample indices into (train, validation).
/// Every class keeps at least one training sample; classes with a single
/// sample contribute nothing to validation.
pub fn split_stratified(
    dataset: &Dataset,
    val_fraction: f32,
    seed: u64,
) -> (Vec<usize>, Vec<usize>) {
    let mut rng = stream(seed, tags::SPLIT);
    let mut train = Vec::new();
    let mut val = Vec::new();
    for mut idx in dataset.indices_by_class() {
        if idx.is_empty() {
            continue;
        }
        idx.shuffle(&mut rng);
        let n_val = ((idx.len() as f32 * val_fraction).floor() as usize).min(idx.len() - 1);
        val.extend_from_slice(&idx[..n_val]);
        train.extend_from_slice(&idx[n_val..]);
    }
    train.sort_unstable();
    val.sort_unstable();
    (train, val)
}

fn check_labels_contiguous(dataset: &Dataset) -> Result<()> {
    let mut seen = vec![false; dataset.num_classes];
    for &l in &dataset.labels {
        seen[l] = true;
    }
    if let Some(missing) = seen.iter().position(|s| !s) {
        return Err(Error::Input(format!(
            "labels are not contiguous: class {missing} has no samples"
        )));
    }
    Ok(())
}

fn epoch_batches(
    train_idx: &[usize],
    batch_size: usize,
    seed: u64,
    epoch: usize,
) -> Vec<Vec<usize>> {
    let mut order = train_idx.to_vec();
    let mut rng = stream(seed ^ (epoch as u64).wrapping_mul(0x9e37), tags::SHUFFLE);
    order.shuffle(&mut rng);
    order
        .chunks(batch_size)
        .filter(|c| c.len() >= 2) // batch norm needs more than one value
        .map(|c| c.to_vec())
        .collect()
}

fn gather<'a>(dataset: &'a Dataset, idx: &[usize]) -> Vec<&'a crate::data::IrisImage> {
    idx.iter().map(|&i| &dataset.images[i]).collect()
}

// ── stage 1: reconstruction pre-training ─────────────────────────────

/// Pre-train the encoder by minimizing `1 − SSIM` between the input and
/// its reconstruction. Returns the autoencoder snapshot from the epoch
/// with the best validation SSIM.
pub fn train_stage1(dataset: &Dataset, cfg: &TrainConfig) -> Result<(Autoencoder, TrainReport)> {
    cfg.validate()?;
    if cfg.stage != 1 {
        return Err(Error::Contract(format!(
            "train_stage1 called with stage {} config",
            cfg.stage
        )));
    }
    if dataset.is_empty() {
        return Err(Error::Input("dataset has no images".into()));
    }
    let started = Instant::now();
    let ssim_cfg = SsimConfig::default();
    let mut rng = stream(cfg.seed, tags::MODEL_INIT);
    let mut model = build_autoencoder(cfg.pool, &mut rng);
    let mut opt = Sgd::new(cfg.learning_rate, cfg.momentum, cfg.weight_decay);

    let (train_idx, val_idx) = split_stratified(dataset, cfg.val_fraction, cfg.seed);
    // degenerate tiny datasets validate on the training pool
    let val_idx = if val_idx.is_empty() { train_idx.clone() } else { val_idx };

    let mut report = TrainReport {
        stage: 1,
        epoch_loss: Vec::new(),
        val_metric: Vec::new(),
        best_epoch: 0,
        best_metric: f32::NEG_INFINITY,
        wall_secs: 0.0,
        stopped_early: false,
    };
    let mut best: Option<Autoencoder> = None;

    for epoch in 0..cfg.epochs {
        opt.lr = cfg.lr_at(epoch);
        let mut loss_sum = 0.0f64;
        let mut seen = 0usize;
        let batches = if train_idx.len() == 1 {
            // single-image corpus: batch norm still works (spatial extent > 1)
            vec![train_idx.clone()]
        } else {
            epoch_batches(&train_idx, cfg.batch_size, cfg.seed, epoch)
        };
        for batch in &batches {
            let x = batch_tensor(&gather(dataset, batch))?;
            let mut tape = Tape::training();
            let xv = tape.input(&x);
            let recon = model.forward_train(&mut tape, xv)?;
            let loss = reconstruction_loss(&mut tape, xv, recon, &ssim_cfg)?;
            let loss_value = tape.value(loss).item()?;
            if !loss_value.is_finite() {
                return Err(Error::Training {
                    epoch,
                    what: format!("reconstruction loss diverged ({loss_value})"),
                });
            }
            let grads = tape.backward(loss)?;
            let params = model
                .encoder
                .trainable_params()
                .into_iter()
                .map(|(_, t)| t);
            opt.step(params, &grads);
            loss_sum += loss_value as f64 * batch.len() as f64;
            seen += batch.len();
        }
        let epoch_loss = (loss_sum / seen.max(1) as f64) as f32;

        let val_ssim = validation_ssim(&model, dataset, &val_idx, cfg.batch_size, &ssim_cfg)?;
        report.epoch_loss.push(epoch_loss);
        report.val_metric.push(val_ssim);
        if val_ssim > report.best_metric {
            report.best_metric = val_ssim;
            report.best_epoch = epoch;
            best = Some(model.clone());
        }
        if cfg.log_progress {
            println!(
                "stage=1 epoch={}/{} loss={:.6} val_ssim={:.4} lr={}",
                epoch + 1,
                cfg.epochs,
                epoch_loss,
                val_ssim,
                opt.lr
            );
        }
        if let Some(target) = cfg.target_metric {
            if val_ssim >= target {
                report.stopped_early = true;
                break;
            }
        }
    }
    report.wall_secs = started.elapsed().as_secs_f64();
    Ok((best.unwrap_or(model), report))
}

fn validation_ssim(
    model: &Autoencoder,
    dataset: &Dataset,
    val_idx: &[usize],
    batch_size: usize,
    ssim_cfg: &SsimConfig,
) -> Result<f32> {
    let mut sum = 0.0f64;
    let mut seen = 0usize;
    for chunk in val_idx.chunks(batch_size) {
        let x = batch_tensor(&gather(dataset, chunk))?;
        let mut tape = Tape::inference();
        let xv = tape.input(&x);
        let recon = model.forward_infer(&mut tape, xv)?;
        let clamped = tape.clamp01(recon)?;
        let s = ssim(&mut tape, xv, clamped, ssim_cfg)?;
        sum += tape.value(s).item()? as f64 * chunk.len() as f64;
        seen += chunk.len();
    }
    Ok((sum / seen.max(1) as f64) as f32)
}

// ── stage 2: supervised refinement ───────────────────────────────────

/// Encoder initialization for stage 2.
pub enum EncoderInit {
    Random,
    /// Named tensors carrying the `encoder.` prefix (a stage-1 result).
    Pretrained(NamedTensors),
}

/// Train encoder + head with cross-entropy. Returns the snapshot with the
/// best validation accuracy.
pub fn train_stage2(
    dataset: &Dataset,
    init: EncoderInit,
    cfg: &TrainConfig,
) -> Result<(Classifier, TrainReport)> {
    cfg.validate()?;
    if cfg.stage != 2 {
        return Err(Error::Contract(format!(
            "train_stage2 called with stage {} config",
            cfg.stage
        )));
    }
    check_labels_contiguous(dataset)?;
    let started = Instant::now();
    let mut rng = stream(cfg.seed, tags::MODEL_INIT);
    let mut model = build_classifier(
        cfg.pool,
        cfg.head,
        dataset.num_classes,
        dataset.width,
        dataset.height,
        &mut rng,
    )?;
    if let EncoderInit::Pretrained(state) = &init {
        model.load_encoder_state(state)?;
    }
    let mut opt = Sgd::new(cfg.learning_rate, cfg.momentum, cfg.weight_decay);

    let (train_idx, val_idx) = split_stratified(dataset, cfg.val_fraction, cfg.seed);
    let val_idx = if val_idx.is_empty() { train_idx.clone() } else { val_idx };

    let mut report = TrainReport {
        stage: 2,
        epoch_loss: Vec::new(),
        val_metric: Vec::new(),
        best_epoch: 0,
        best_metric: f32::NEG_INFINITY,
        wall_secs: 0.0,
        stopped_early: false,
    };
    let mut best: Option<Classifier> = None;

    for epoch in 0..cfg.epochs {
        opt.lr = cfg.lr_at(epoch);
        let mut loss_sum = 0.0f64;
        let mut seen = 0usize;
        for batch in epoch_batches(&train_idx, cfg.batch_size, cfg.seed, epoch) {
            let x = batch_tensor(&gather(dataset, &batch))?;
            let labels: Vec<usize> = batch.iter().map(|&i| dataset.labels[i]).collect();
            let mut tape = Tape::training();
            let xv = tape.input(&x);
            let out = model.forward_train(&mut tape, xv)?;
            let loss = cross_entropy(&mut tape, out.logits, &labels)?;
            let loss_value = tape.value(loss).item()?;
            if !loss_value.is_finite() {
                return Err(Error::Training {
                    epoch,
                    what: format!("cross-entropy diverged ({loss_value})"),
                });
            }
            let grads = tape.backward(loss)?;
            let params = model
                .trainable_params()
                .into_iter()
                .filter(|(name, _)| !(cfg.freeze_encoder && name.starts_with("encoder.")))
                .map(|(_, t)| t);
            opt.step(params, &grads);
            loss_sum += loss_value as f64 * batch.len() as f64;
            seen += batch.len();
        }
        let epoch_loss = (loss_sum / seen.max(1) as f64) as f32;

        let accuracy = validation_accuracy(&model, dataset, &val_idx, cfg.batch_size)?;
        report.epoch_loss.push(epoch_loss);
        report.val_metric.push(accuracy);
        if accuracy > report.best_metric {
            report.best_metric = accuracy;
            report.best_epoch = epoch;
            best = Some(model.clone());
        }
        if cfg.log_progress {
            println!(
                "stage=2 epoch={}/{} loss={:.6} val_acc={:.4} lr={}",
                epoch + 1,
                cfg.epochs,
                epoch_loss,
                accuracy,
                opt.lr
            );
        }
        if let Some(target) = cfg.target_metric {
            if accuracy >= target {
                report.stopped_early = true;
                break;
            }
        }
    }
    report.wall_secs = started.elapsed().as_secs_f64();
    Ok((best.unwrap_or(model), report))
}

/// Fraction of correctly classified samples under inference-mode forward.
pub fn validation_accuracy(
    model: &Classifier,
    dataset: &Dataset,
    idx: &[usize],
    batch_size: usize,
) -> Result<f32> {
    if idx.is_empty() {
        return Ok(0.0);
    }
    let mut correct = 0usize;
    for chunk in idx.chunks(batch_size) {
        let x = batch_tensor(&gather(dataset, chunk))?;
        let mut tape = Tape::inference();
        let xv = tape.input(&x);
        let out = model.forward_infer(&mut tape, xv)?;
        let logits = tape.value(out.logits);
        let (_, k) = logits.dims2()?;
        for (row, &i) in logits.data().chunks_exact(k).zip(chunk.iter()) {
            // total ordering: a diverged model yields garbage accuracy here
            // and the training loop's finiteness guard reports it next step
            let pred = row
                .iter()
                .enumerate()
                .max_by(|a, b| a.1.total_cmp(b.1))
                .map(|(j, _)| j)
                .unwrap_or(0);
            if pred == dataset.labels[i] {
                correct += 1;
            }
        }
    }
    Ok(correct as f32 / idx.len() as f32)
}
