//! Model assembly: the 4-block convolutional encoder, the parameter-free
//! pixel-shuffle decoder, and the classifier variants built on the encoder,
//! together with exact parameter accounting.

use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::layers::{BatchNorm, Conv2d, Linear, PixelShuffle, Pool, PoolKind};
use crate::tape::{Tape, Var};
use crate::tensor::Tensor;

/// Channel progression of the encoder blocks.
pub const ENCODER_CHANNELS: [usize; 4] = [32, 64, 128, 256];
/// Kernel sizes per block (5×5 first, then 3×3).
pub const ENCODER_KERNELS: [usize; 4] = [5, 3, 3, 3];
/// Padding per block keeps spatial extents until pooling halves them.
pub const ENCODER_PADDINGS: [usize; 4] = [2, 1, 1, 1];
/// Total spatial downsampling of the encoder (four 2× poolings).
pub const ENCODER_STRIDE: usize = 16;
/// Width of the signature produced by the global-averaging head.
pub const SIGNATURE_WIDTH: usize = 1024;
/// Hidden width of the two-layer fully connected baseline head.
pub const FC_HIDDEN_WIDTH: usize = 4096;

/// Classification head flavor.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum HeadKind {
    /// Flatten → FC(4096) → FC(classes): the heavy baseline.
    #[serde(rename = "fc")]
    TwoFc,
    /// Conv(3×3, 1024) → BN → ReLU → global spatial mean → FC(classes).
    Tel,
}

impl HeadKind {
    pub fn as_str(self) -> &'static str {
        match self {
            HeadKind::TwoFc => "fc",
            HeadKind::Tel => "tel",
        }
    }
}

impl std::str::FromStr for HeadKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "fc" => Ok(HeadKind::TwoFc),
            "tel" => Ok(HeadKind::Tel),
            other => Err(Error::Config(format!(
                "unknown head kind {other:?} (expected \"tel\" or \"fc\")"
            ))),
        }
    }
}

/// Named view of a model's tensors (parameters plus normalization state).
pub type NamedTensors = Vec<(String, Tensor)>;

// ── encoder ──────────────────────────────────────────────────────────

#[derive(Debug, Clone)]
pub struct ConvBlock {
    pub conv: Conv2d,
    pub bn: BatchNorm,
    pub pool: Pool,
}

impl ConvBlock {
    fn forward_train(&mut self, tape: &mut Tape, x: Var) -> Result<Var> {
        let x = self.conv.forward(tape, x)?;
        let x = self.bn.forward_train(tape, x)?;
        let x = tape.relu(x)?;
        self.pool.forward(tape, x)
    }

    fn forward_infer(&self, tape: &mut Tape, x: Var) -> Result<Var> {
        let x = self.conv.forward(tape, x)?;
        let x = self.bn.forward_infer(tape, x)?;
        let x = tape.relu(x)?;
        self.pool.forward(tape, x)
    }
}

/// Four Conv→BN→ReLU→Pool blocks; maps `[n,1,h,w]` to `[n,256,h/16,w/16]`.
#[derive(Debug, Clone)]
pub struct Encoder {
    pub blocks: Vec<ConvBlock>,
    pub pool_kind: PoolKind,
}

impl Encoder {
    pub fn new(pool_kind: PoolKind, rng: &mut ChaCha8Rng) -> Self {
        let mut blocks = Vec::with_capacity(4);
        let mut in_c = 1;
        for i in 0..4 {
            let out_c = ENCODER_CHANNELS[i];
            blocks.push(ConvBlock {
                conv: Conv2d::new(in_c, out_c, ENCODER_KERNELS[i], 1, ENCODER_PADDINGS[i], rng),
                bn: BatchNorm::new(out_c),
                pool: Pool::new(pool_kind, 2, 2),
            });
            in_c = out_c;
        }
        Encoder { blocks, pool_kind }
    }

    fn check_input(&self, t: &Tensor) -> Result<()> {
        let (_, c, h, w) = t.dims4()?;
        if c != 1 {
            return Err(Error::ShapeMismatch {
                op: "encoder",
                left: vec![1],
                right: vec![c],
            });
        }
        if h % ENCODER_STRIDE != 0 || w % ENCODER_STRIDE != 0 {
            return Err(Error::ShapeMismatch {
                op: "encoder (extents must be divisible by 16)",
                left: vec![h, w],
                right: vec![ENCODER_STRIDE, ENCODER_STRIDE],
            });
        }
        Ok(())
    }

    pub fn forward_train(&mut self, tape: &mut Tape, x: Var) -> Result<Var> {
        self.check_input(tape.value(x))?;
        let mut v = x;
        for block in &mut self.blocks {
            v = block.forward_train(tape, v)?;
        }
        Ok(v)
    }

    pub fn forward_infer(&self, tape: &mut Tape, x: Var) -> Result<Var> {
        self.check_input(tape.value(x))?;
        let mut v = x;
        for block in &self.blocks {
            v = block.forward_infer(tape, v)?;
        }
        Ok(v)
    }

    pub fn trainable_params(&mut self) -> Vec<(&'static str, &mut Tensor)> {
        let mut out = Vec::new();
        for block in &mut self.blocks {
            out.push(("conv.weight", &mut block.conv.weight));
            out.push(("conv.bias", &mut block.conv.bias));
            out.push(("bn.gamma", &mut block.bn.gamma));
            out.push(("bn.beta", &mut block.bn.beta));
        }
        out
    }

    /// Parameters plus batch-norm running statistics, for persistence.
    pub fn state(&self) -> NamedTensors {
        let mut out = Vec::new();
        for (i, b) in self.blocks.iter().enumerate() {
            let p = format!("block{i}");
            out.push((format!("{p}.conv.weight"), b.conv.weight.clone()));
            out.push((format!("{p}.conv.bias"), b.conv.bias.clone()));
            out.push((format!("{p}.bn.gamma"), b.bn.gamma.clone()));
            out.push((format!("{p}.bn.beta"), b.bn.beta.clone()));
            out.push((format!("{p}.bn.running_mean"), b.bn.running_mean.clone()));
            out.push((format!("{p}.bn.running_var"), b.bn.running_var.clone()));
        }
        out
    }

    /// Replace the full encoder state from named tensors. All entries must
    /// be present with matching shapes before anything is applied.
    pub fn load_state(&mut self, entries: &[(String, Tensor)]) -> Result<()> {
        let lookup: std::collections::HashMap<&str, &Tensor> =
            entries.iter().map(|(n, t)| (n.as_str(), t)).collect();
        // validate first: no partial application
        for (name, current) in self.state() {
            let incoming = lookup.get(name.as_str()).ok_or_else(|| {
                Error::State(format!("missing encoder tensor {name:?} in provided state"))
            })?;
            if incoming.shape() != current.shape() {
                return Err(Error::State(format!(
                    "encoder tensor {name:?} has shape {:?}, expected {:?}",
                    incoming.shape(),
                    current.shape()
                )));
            }
        }
        for (i, b) in self.blocks.iter_mut().enumerate() {
            let p = format!("block{i}");
            let fetch = |suffix: &str| lookup[format!("{p}.{suffix}").as_str()];
            copy_into(&mut b.conv.weight, fetch("conv.weight"));
            copy_into(&mut b.conv.bias, fetch("conv.bias"));
            copy_into(&mut b.bn.gamma, fetch("bn.gamma"));
            copy_into(&mut b.bn.beta, fetch("bn.beta"));
            copy_into(&mut b.bn.running_mean, fetch("bn.running_mean"));
            copy_into(&mut b.bn.running_var, fetch("bn.running_var"));
        }
        Ok(())
    }
}

/// Overwrite `dst` contents in place, keeping its identity.
fn copy_into(dst: &mut Tensor, src: &Tensor) {
    dst.data_mut().copy_from_slice(src.data());
}

// ── decoder ──────────────────────────────────────────────────────────

/// Four ×2 pixel shuffles: `[n,256,h,w]` → `[n,1,16h,16w]`. Zero parameters.
#[derive(Debug, Clone)]
pub struct Decoder {
    pub stages: [PixelShuffle; 4],
}

impl Decoder {
    pub fn new() -> Self {
        Decoder {
            stages: [PixelShuffle { upscale: 2 }; 4],
        }
    }

    pub fn forward(&self, tape: &mut Tape, x: Var) -> Result<Var> {
        let mut v = x;
        for s in &self.stages {
            v = s.forward(tape, v)?;
        }
        Ok(v)
    }

    pub fn param_count(&self) -> usize {
        0
    }
}

impl Default for Decoder {
    fn default() -> Self {
        Self::new()
    }
}

// ── autoencoder ──────────────────────────────────────────────────────

#[derive(Debug, Clone)]
pub struct Autoencoder {
    pub encoder: Encoder,
    pub decoder: Decoder,
}

impl Autoencoder {
    pub fn forward_train(&mut self, tape: &mut Tape, x: Var) -> Result<Var> {
        let z = self.encoder.forward_train(tape, x)?;
        self.decoder.forward(tape, z)
    }

    pub fn forward_infer(&self, tape: &mut Tape, x: Var) -> Result<Var> {
        let z = self.encoder.forward_infer(tape, x)?;
        self.decoder.forward(tape, z)
    }
}

/// Encoder/decoder pair with the requested pooling kind.
pub fn build_autoencoder(pool: PoolKind, rng: &mut ChaCha8Rng) -> Autoencoder {
    Autoencoder {
        encoder: Encoder::new(pool, rng),
        decoder: Decoder::new(),
    }
}

// ── classifier ───────────────────────────────────────────────────────

#[derive(Debug, Clone)]
pub enum Head {
    TwoFc { fc1: Linear, fc2: Linear },
    Tel { conv: Conv2d, bn: BatchNorm, fc: Linear },
}

/// Encoder plus classification head.
#[derive(Debug, Clone)]
pub struct Classifier {
    pub encoder: Encoder,
    pub head: Head,
    pub num_classes: usize,
    /// Input resolution the head was sized for (width, height).
    pub input_width: usize,
    pub input_height: usize,
}

/// Forward result: logits plus the signature activation when the head has one.
pub struct ClassifierOutput {
    pub logits: Var,
    /// Global-average (texture energy) activation `[n, 1024]`; present for
    /// the `Tel` head only.
    pub embedding: Option<Var>,
}

impl Classifier {
    pub fn head_kind(&self) -> HeadKind {
        match self.head {
            Head::TwoFc { .. } => HeadKind::TwoFc,
            Head::Tel { .. } => HeadKind::Tel,
        }
    }

    pub fn forward_train(&mut self, tape: &mut Tape, x: Var) -> Result<ClassifierOutput> {
        let z = self.encoder.forward_train(tape, x)?;
        match &mut self.head {
            Head::TwoFc { fc1, fc2 } => {
                let flat = tape.flatten(z)?;
                let h = fc1.forward(tape, flat)?;
                let h = tape.relu(h)?;
                let logits = fc2.forward(tape, h)?;
                Ok(ClassifierOutput {
                    logits,
                    embedding: None,
                })
            }
            Head::Tel { conv, bn, fc } => {
                let x = conv.forward(tape, z)?;
                let x = bn.forward_train(tape, x)?;
                let x = tape.relu(x)?;
                let emb = tape.spatial_mean(x)?;
                let logits = fc.forward(tape, emb)?;
                Ok(ClassifierOutput {
                    logits,
                    embedding: Some(emb),
                })
            }
        }
    }

    pub fn forward_infer(&self, tape: &mut Tape, x: Var) -> Result<ClassifierOutput> {
        let z = self.encoder.forward_infer(tape, x)?;
        match &self.head {
            Head::TwoFc { fc1, fc2 } => {
                let flat = tape.flatten(z)?;
                let h = fc1.forward(tape, flat)?;
                let h = tape.relu(h)?;
                let logits = fc2.forward(tape, h)?;
                Ok(ClassifierOutput {
                    logits,
                    embedding: None,
                })
            }
            Head::Tel { conv, bn, fc } => {
                let x = conv.forward(tape, z)?;
                let x = bn.forward_infer(tape, x)?;
                let x = tape.relu(x)?;
                let emb = tape.spatial_mean(x)?;
                let logits = fc.forward(tape, emb)?;
                Ok(ClassifierOutput {
                    logits,
                    embedding: Some(emb),
                })
            }
        }
    }

    pub fn trainable_params(&mut self) -> Vec<(String, &mut Tensor)> {
        let mut out: Vec<(String, &mut Tensor)> = Vec::new();
        for (i, block) in self.encoder.blocks.iter_mut().enumerate() {
            let p = format!("encoder.block{i}");
            out.push((format!("{p}.conv.weight"), &mut block.conv.weight));
            out.push((format!("{p}.conv.bias"), &mut block.conv.bias));
            out.push((format!("{p}.bn.gamma"), &mut block.bn.gamma));
            out.push((format!("{p}.bn.beta"), &mut block.bn.beta));
        }
        match &mut self.head {
            Head::TwoFc { fc1, fc2 } => {
                out.push(("head.fc1.weight".into(), &mut fc1.weight));
                out.push(("head.fc1.bias".into(), &mut fc1.bias));
                out.push(("head.fc2.weight".into(), &mut fc2.weight));
                out.push(("head.fc2.bias".into(), &mut fc2.bias));
            }
            Head::Tel { conv, bn, fc } => {
                out.push(("head.conv.weight".into(), &mut conv.weight));
                out.push(("head.conv.bias".into(), &mut conv.bias));
                out.push(("head.bn.gamma".into(), &mut bn.gamma));
                out.push(("head.bn.beta".into(), &mut bn.beta));
                out.push(("head.fc.weight".into(), &mut fc.weight));
                out.push(("head.fc.bias".into(), &mut fc.bias));
            }
        }
        out
    }

    /// Every tensor of the model (parameters and BN running statistics).
    pub fn state(&self) -> NamedTensors {
        let mut out: NamedTensors = self
            .encoder
            .state()
            .into_iter()
            .map(|(n, t)| (format!("encoder.{n}"), t))
            .collect();
        match &self.head {
            Head::TwoFc { fc1, fc2 } => {
                out.push(("head.fc1.weight".into(), fc1.weight.clone()));
                out.push(("head.fc1.bias".into(), fc1.bias.clone()));
                out.push(("head.fc2.weight".into(), fc2.weight.clone()));
                out.push(("head.fc2.bias".into(), fc2.bias.clone()));
            }
            Head::Tel { conv, bn, fc } => {
                out.push(("head.conv.weight".into(), conv.weight.clone()));
                out.push(("head.conv.bias".into(), conv.bias.clone()));
                out.push(("head.bn.gamma".into(), bn.gamma.clone()));
                out.push(("head.bn.beta".into(), bn.beta.clone()));
                out.push(("head.bn.running_mean".into(), bn.running_mean.clone()));
                out.push(("head.bn.running_var".into(), bn.running_var.clone()));
                out.push(("head.fc.weight".into(), fc.weight.clone()));
                out.push(("head.fc.bias".into(), fc.bias.clone()));
            }
        }
        out
    }

    /// Replace the full model state (all entries required, validated first).
    pub fn load_state(&mut self, entries: &[(String, Tensor)]) -> Result<()> {
        let lookup: std::collections::HashMap<&str, &Tensor> =
            entries.iter().map(|(n, t)| (n.as_str(), t)).collect();
        for (name, current) in self.state() {
            match lookup.get(name.as_str()) {
                None => {
                    return Err(Error::State(format!(
                        "missing model tensor {name:?} in provided state"
                    )))
                }
                Some(incoming) if incoming.shape() != current.shape() => {
                    return Err(Error::State(format!(
                        "model tensor {name:?} has shape {:?}, expected {:?}",
                        incoming.shape(),
                        current.shape()
                    )));
                }
                _ => {}
            }
        }
        let encoder_entries: Vec<(String, Tensor)> = entries
            .iter()
            .filter_map(|(n, t)| {
                n.strip_prefix("encoder.")
                    .map(|rest| (rest.to_string(), t.clone()))
            })
            .collect();
        self.encoder.load_state(&encoder_entries)?;
        match &mut self.head {
            Head::TwoFc { fc1, fc2 } => {
                copy_into(&mut fc1.weight, lookup["head.fc1.weight"]);
                copy_into(&mut fc1.bias, lookup["head.fc1.bias"]);
                copy_into(&mut fc2.weight, lookup["head.fc2.weight"]);
                copy_into(&mut fc2.bias, lookup["head.fc2.bias"]);
            }
            Head::Tel { conv, bn, fc } => {
                copy_into(&mut conv.weight, lookup["head.conv.weight"]);
                copy_into(&mut conv.bias, lookup["head.conv.bias"]);
                copy_into(&mut bn.gamma, lookup["head.bn.gamma"]);
                copy_into(&mut bn.beta, lookup["head.bn.beta"]);
                copy_into(&mut bn.running_mean, lookup["head.bn.running_mean"]);
                copy_into(&mut bn.running_var, lookup["head.bn.running_var"]);
                copy_into(&mut fc.weight, lookup["head.fc.weight"]);
                copy_into(&mut fc.bias, lookup["head.fc.bias"]);
            }
        }
        Ok(())
    }

    /// Load only the encoder portion from named tensors carrying the
    /// `encoder.` prefix (a stage-1 checkpoint), leaving the head untouched.
    pub fn load_encoder_state(&mut self, entries: &[(String, Tensor)]) -> Result<()> {
        let encoder_entries: Vec<(String, Tensor)> = entries
            .iter()
            .filter_map(|(n, t)| {
                n.strip_prefix("encoder.")
                    .map(|rest| (rest.to_string(), t.clone()))
            })
            .collect();
        if encoder_entries.is_empty() {
            return Err(Error::State(
                "provided state contains no encoder.* tensors".into(),
            ));
        }
        self.encoder.load_state(&encoder_entries)
    }
}

/// Build a classifier variant for a given input resolution.
pub fn build_classifier(
    pool: PoolKind,
    head: HeadKind,
    num_classes: usize,
    input_width: usize,
    input_height: usize,
    rng: &mut ChaCha8Rng,
) -> Result<Classifier> {
    if num_classes < 2 {
        return Err(Error::Config(format!(
            "classifier needs at least 2 classes, got {num_classes}"
        )));
    }
    if input_width % ENCODER_STRIDE != 0 || input_height % ENCODER_STRIDE != 0 {
        return Err(Error::Config(format!(
            "input resolution {input_width}x{input_height} must be divisible by {ENCODER_STRIDE}"
        )));
    }
    let encoder = Encoder::new(pool, rng);
    let feat_c = ENCODER_CHANNELS[3];
    let (fh, fw) = (input_height / ENCODER_STRIDE, input_width / ENCODER_STRIDE);
    let head = match head {
        HeadKind::TwoFc => {
            let flat = feat_c * fh * fw;
            Head::TwoFc {
                fc1: Linear::new(flat, FC_HIDDEN_WIDTH, rng),
                fc2: Linear::new(FC_HIDDEN_WIDTH, num_classes, rng),
            }
        }
        HeadKind::Tel => Head::Tel {
            conv: Conv2d::new(feat_c, SIGNATURE_WIDTH, 3, 1, 1, rng),
            bn: BatchNorm::new(SIGNATURE_WIDTH),
            fc: Linear::new(SIGNATURE_WIDTH, num_classes, rng),
        },
    };
    Ok(Classifier {
        encoder,
        head,
        num_classes,
        input_width,
        input_height,
    })
}

// ── parameter accounting ─────────────────────────────────────────────

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ParamKind {
    Conv,
    Bn,
    Fc,
    /// Pooling, pixel shuffle, global averaging: structurally present,
    /// zero learnable parameters.
    Free,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ParamRow {
    pub name: String,
    pub kind: ParamKind,
    pub count: usize,
}

/// Per-layer learnable parameter counts with conv/bn/fc breakdown.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ParamReport {
    pub rows: Vec<ParamRow>,
}

impl ParamReport {
    pub fn by_kind(&self, kind: ParamKind) -> usize {
        self.rows
            .iter()
            .filter(|r| r.kind == kind)
            .map(|r| r.count)
            .sum()
    }

    pub fn conv_total(&self) -> usize {
        self.by_kind(ParamKind::Conv)
    }

    pub fn bn_total(&self) -> usize {
        self.by_kind(ParamKind::Bn)
    }

    pub fn fc_total(&self) -> usize {
        self.by_kind(ParamKind::Fc)
    }

    pub fn total(&self) -> usize {
        self.rows.iter().map(|r| r.count).sum()
    }

    /// Plain-text table, one row per layer plus the breakdown and total.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let width = self.rows.iter().map(|r| r.name.len()).max().unwrap_or(0);
        for r in &self.rows {
            s.push_str(&format!("{:<width$}  {:>12}\n", r.name, r.count));
        }
        s.push_str(&format!("{:<width$}  {:>12}\n", "conv subtotal", self.conv_total()));
        s.push_str(&format!("{:<width$}  {:>12}\n", "bn subtotal", self.bn_total()));
        s.push_str(&format!("{:<width$}  {:>12}\n", "fc subtotal", self.fc_total()));
        s.push_str(&format!("{:<width$}  {:>12}\n", "total", self.total()));
        s
    }
}

fn conv_params(in_c: usize, out_c: usize, k: usize) -> usize {
    out_c * in_c * k * k + out_c
}

fn fc_params(inp: usize, out: usize) -> usize {
    inp * out + out
}

/// Analytic parameter report for a classifier variant, computed from the
/// architecture description alone (no tensors allocated).
pub fn classifier_param_report(
    head: HeadKind,
    num_classes: usize,
    input_width: usize,
    input_height: usize,
) -> Result<ParamReport> {
    if num_classes < 2 {
        return Err(Error::Config(format!(
            "classifier needs at least 2 classes, got {num_classes}"
        )));
    }
    if input_width % ENCODER_STRIDE != 0 || input_height % ENCODER_STRIDE != 0 {
        return Err(Error::Config(format!(
            "input resolution {input_width}x{input_height} must be divisible by {ENCODER_STRIDE}"
        )));
    }
    let mut rows = Vec::new();
    let mut in_c = 1;
    for (i, &out_c) in ENCODER_CHANNELS.iter().enumerate() {
        let k = ENCODER_KERNELS[i];
        rows.push(ParamRow {
            name: format!("encoder.block{i}.conv {k}x{k} {in_c}->{out_c}"),
            kind: ParamKind::Conv,
            count: conv_params(in_c, out_c, k),
        });
        rows.push(ParamRow {
            name: format!("encoder.block{i}.bn {out_c}"),
            kind: ParamKind::Bn,
            count: 2 * out_c,
        });
        rows.push(ParamRow {
            name: format!("encoder.block{i}.pool 2x2"),
            kind: ParamKind::Free,
            count: 0,
        });
        in_c = out_c;
    }
    let (fh, fw) = (input_height / ENCODER_STRIDE, input_width / ENCODER_STRIDE);
    match head {
        HeadKind::TwoFc => {
            let flat = in_c * fh * fw;
            rows.push(ParamRow {
                name: format!("head.fc1 {flat}->{FC_HIDDEN_WIDTH}"),
                kind: ParamKind::Fc,
                count: fc_params(flat, FC_HIDDEN_WIDTH),
            });
            rows.push(ParamRow {
                name: format!("head.fc2 {FC_HIDDEN_WIDTH}->{num_classes}"),
                kind: ParamKind::Fc,
                count: fc_params(FC_HIDDEN_WIDTH, num_classes),
            });
        }
        HeadKind::Tel => {
            rows.push(ParamRow {
                name: format!("head.conv 3x3 {in_c}->{SIGNATURE_WIDTH}"),
                kind: ParamKind::Conv,
                count: conv_params(in_c, SIGNATURE_WIDTH, 3),
            });
            rows.push(ParamRow {
                name: format!("head.bn {SIGNATURE_WIDTH}"),
                kind: ParamKind::Bn,
                count: 2 * SIGNATURE_WIDTH,
            });
            rows.push(ParamRow {
                name: "head.global-avg".into(),
                kind: ParamKind::Free,
                count: 0,
            });
            rows.push(ParamRow {
                name: format!("head.fc {SIGNATURE_WIDTH}->{num_classes}"),
                kind: ParamKind::Fc,
                count: fc_params(SIGNATURE_WIDTH, num_classes),
            });
        }
    }
    Ok(ParamReport { rows })
}

/// Parameter report read off a built classifier's tensors.
pub fn count_params(model: &Classifier) -> ParamReport {
    let mut rows = Vec::new();
    for (i, b) in model.encoder.blocks.iter().enumerate() {
        rows.push(ParamRow {
            name: format!("encoder.block{i}.conv"),
            kind: ParamKind::Conv,
            count: b.conv.param_count(),
        });
        rows.push(ParamRow {
            name: format!("encoder.block{i}.bn"),
            kind: ParamKind::Bn,
            count: b.bn.param_count(),
        });
    }
    match &model.head {
        Head::TwoFc { fc1, fc2 } => {
            rows.push(ParamRow {
                name: "head.fc1".into(),
                kind: ParamKind::Fc,
                count: fc1.param_count(),
            });
            rows.push(ParamRow {
                name: "head.fc2".into(),
                kind: ParamKind::Fc,
                count: fc2.param_count(),
            });
        }
        Head::Tel { conv, bn, fc } => {
            rows.push(ParamRow {
                name: "head.conv".into(),
                kind: ParamKind::Conv,
                count: conv.param_count(),
            });
            rows.push(ParamRow {
                name: "head.bn".into(),
                kind: ParamKind::Bn,
                count: bn.param_count(),
            });
            rows.push(ParamRow {
                name: "head.fc".into(),
                kind: ParamKind::Fc,
                count: fc.param_count(),
            });
        }
    }
    ParamReport { rows }
}
