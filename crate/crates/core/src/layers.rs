//! Neural layers: convolution, batch normalization, pooling, pixel shuffle,
//! and fully connected, with Kaiming-uniform initialization.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::kernels;
use crate::tape::{Tape, Var};
use crate::tensor::Tensor;

/// Spatial sub-sampling flavor.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PoolKind {
    /// Window maximum (the conventional choice).
    Max,
    /// Window mean: keeps the local energy of the window instead of its peak.
    Eap,
}

impl PoolKind {
    pub fn as_str(self) -> &'static str {
        match self {
            PoolKind::Max => "max",
            PoolKind::Eap => "eap",
        }
    }
}

impl std::str::FromStr for PoolKind {
    type Err = crate::error::Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "max" => Ok(PoolKind::Max),
            "eap" => Ok(PoolKind::Eap),
            other => Err(crate::error::Error::Config(format!(
                "unknown pooling kind {other:?} (expected \"max\" or \"eap\")"
            ))),
        }
    }
}

fn kaiming_uniform(shape: Vec<usize>, fan_in: usize, rng: &mut ChaCha8Rng) -> Tensor {
    // gain sqrt(2) for relu; bound = gain * sqrt(3 / fan_in)
    let bound = (6.0 / fan_in as f64).sqrt() as f32;
    let numel: usize = shape.iter().product();
    let data: Vec<f32> = (0..numel).map(|_| rng.gen_range(-bound..bound)).collect();
    Tensor::from_vec(shape, data).expect("shape/data consistent")
}

// ── convolution ──────────────────────────────────────────────────────

#[derive(Debug, Clone)]
pub struct Conv2d {
    /// `[out_channels, in_channels, kh, kw]`
    pub weight: Tensor,
    /// `[out_channels]`
    pub bias: Tensor,
    pub stride: usize,
    pub padding: usize,
}

impl Conv2d {
    pub fn new(
        in_channels: usize,
        out_channels: usize,
        kernel: usize,
        stride: usize,
        padding: usize,
        rng: &mut ChaCha8Rng,
    ) -> Self {
        let fan_in = in_channels * kernel * kernel;
        Conv2d {
            weight: kaiming_uniform(
                vec![out_channels, in_channels, kernel, kernel],
                fan_in,
                rng,
            ),
            bias: Tensor::zeros(vec![out_channels]),
            stride,
            padding,
        }
    }

    pub fn forward(&self, tape: &mut Tape, x: Var) -> Result<Var> {
        tape.conv2d(x, &self.weight, &self.bias, self.stride, self.padding)
    }

    pub fn param_count(&self) -> usize {
        self.weight.numel() + self.bias.numel()
    }
}

// ── batch normalization ──────────────────────────────────────────────

pub const BN_EPSILON: f32 = 1e-5;
pub const BN_MOMENTUM: f32 = 0.1;

#[derive(Debug, Clone)]
pub struct BatchNorm {
    pub gamma: Tensor,
    pub beta: Tensor,
    pub running_mean: Tensor,
    pub running_var: Tensor,
    pub epsilon: f32,
    pub momentum: f32,
}

impl BatchNorm {
    pub fn new(channels: usize) -> Self {
        BatchNorm {
            gamma: Tensor::full(vec![channels], 1.0),
            beta: Tensor::zeros(vec![channels]),
            running_mean: Tensor::zeros(vec![channels]),
            running_var: Tensor::full(vec![channels], 1.0),
            epsilon: BN_EPSILON,
            momentum: BN_MOMENTUM,
        }
    }

    /// Normalize by batch statistics and fold them into the running
    /// estimates with momentum. Mutates `self` (running stats only).
    pub fn forward_train(&mut self, tape: &mut Tape, x: Var) -> Result<Var> {
        let (y, mean, var) = tape.batchnorm_train(x, &self.gamma, &self.beta, self.epsilon)?;
        let m = self.momentum;
        for (r, b) in self.running_mean.data_mut().iter_mut().zip(mean.iter()) {
            *r = (1.0 - m) * *r + m * b;
        }
        for (r, b) in self.running_var.data_mut().iter_mut().zip(var.iter()) {
            *r = (1.0 - m) * *r + m * b;
        }
        Ok(y)
    }

    /// Normalize by the frozen running statistics.
    pub fn forward_infer(&self, tape: &mut Tape, x: Var) -> Result<Var> {
        tape.batchnorm_infer(
            x,
            &self.gamma,
            &self.beta,
            &self.running_mean,
            &self.running_var,
            self.epsilon,
        )
    }

    pub fn param_count(&self) -> usize {
        // learnable only; running stats are state, not parameters
        self.gamma.numel() + self.beta.numel()
    }
}

// ── pooling ──────────────────────────────────────────────────────────

#[derive(Debug, Clone, Copy)]
pub struct Pool {
    pub kind: PoolKind,
    pub kernel: usize,
    pub stride: usize,
}

impl Pool {
    pub fn new(kind: PoolKind, kernel: usize, stride: usize) -> Self {
        Pool {
            kind,
            kernel,
            stride,
        }
    }

    pub fn forward(&self, tape: &mut Tape, x: Var) -> Result<Var> {
        match self.kind {
            PoolKind::Max => tape.max_pool(x, self.kernel, self.stride),
            PoolKind::Eap => tape.avg_pool(x, self.kernel, self.stride),
        }
    }
}

// ── pixel shuffle ────────────────────────────────────────────────────

/// Parameter-free sub-pixel upsampling: `[n,c,h,w]` → `[n,c/r²,rh,rw]`.
#[derive(Debug, Clone, Copy)]
pub struct PixelShuffle {
    pub upscale: usize,
}

impl PixelShuffle {
    pub fn forward(&self, tape: &mut Tape, x: Var) -> Result<Var> {
        tape.pixel_shuffle(x, self.upscale)
    }
}

/// Inverse of the shuffle as a plain tensor function (`[n,c,h,w]` →
/// `[n,c·r²,h/r,w/r]`), used to verify the permutation round-trips.
pub fn pixel_unshuffle(x: &Tensor, r: usize) -> Result<Tensor> {
    let (n, c, h, w) = x.dims4()?;
    if h % r != 0 || w % r != 0 {
        return Err(crate::error::Error::Config(format!(
            "pixel unshuffle needs extents divisible by r={r}, got {h}x{w}"
        )));
    }
    let data = kernels::pixel_shuffle_backward(x.data(), n, c * r * r, h / r, w / r, r);
    Tensor::from_vec(vec![n, c * r * r, h / r, w / r], data)
}

// ── fully connected ──────────────────────────────────────────────────

#[derive(Debug, Clone)]
pub struct Linear {
    /// `[in_features, out_features]`
    pub weight: Tensor,
    /// `[out_features]`
    pub bias: Tensor,
}

impl Linear {
    pub fn new(in_features: usize, out_features: usize, rng: &mut ChaCha8Rng) -> Self {
        Linear {
            weight: kaiming_uniform(vec![in_features, out_features], in_features, rng),
            bias: Tensor::zeros(vec![out_features]),
        }
    }

    pub fn forward(&self, tape: &mut Tape, x: Var) -> Result<Var> {
        tape.linear(x, &self.weight, &self.bias)
    }

    pub fn param_count(&self) -> usize {
        self.weight.numel() + self.bias.numel()
    }
}
