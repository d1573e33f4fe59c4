//! Training objectives: SSIM reconstruction loss and cross-entropy.

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::kernels;
use crate::tape::{Tape, Var};
use crate::tensor::Tensor;

/// Configuration of the windowed SSIM measure.
///
/// Stability constants follow the reference choice `C1 = (0.01·L)²`,
/// `C2 = (0.03·L)²` with dynamic range `L = 1` for images in `[0,1]`.
#[derive(Debug, Clone)]
pub struct SsimConfig {
    pub window_size: usize,
    pub sigma: f64,
    pub dynamic_range: f64,
    window: Arc<Vec<f64>>,
}

impl SsimConfig {
    pub fn new(window_size: usize, sigma: f64, dynamic_range: f64) -> Result<Self> {
        if window_size < 3 || window_size % 2 == 0 {
            return Err(Error::Config(format!(
                "SSIM window size must be odd and >= 3, got {window_size}"
            )));
        }
        if sigma <= 0.0 || dynamic_range <= 0.0 {
            return Err(Error::Config(
                "SSIM sigma and dynamic range must be positive".into(),
            ));
        }
        Ok(SsimConfig {
            window_size,
            sigma,
            dynamic_range,
            window: Arc::new(kernels::gaussian_window(window_size, sigma)),
        })
    }

    pub fn c1(&self) -> f64 {
        (0.01 * self.dynamic_range).powi(2)
    }

    pub fn c2(&self) -> f64 {
        (0.03 * self.dynamic_range).powi(2)
    }

    pub fn window(&self) -> Arc<Vec<f64>> {
        Arc::clone(&self.window)
    }
}

impl Default for SsimConfig {
    /// 11×11 Gaussian window, σ = 1.5, unit dynamic range.
    fn default() -> Self {
        SsimConfig::new(11, 1.5, 1.0).expect("valid default")
    }
}

/// Differentiable mean SSIM between two same-shape single-channel images
/// (or batches). Value is in (-1, 1]; exactly 1 iff the images are equal.
pub fn ssim(tape: &mut Tape, a: Var, b: Var, cfg: &SsimConfig) -> Result<Var> {
    tape.ssim(a, b, cfg.window(), cfg.window_size, cfg.c1(), cfg.c2())
}

/// Plain (non-recorded) mean SSIM of two tensors, as an evaluation metric.
pub fn ssim_value(a: &Tensor, b: &Tensor, cfg: &SsimConfig) -> Result<f32> {
    let mut tape = Tape::inference();
    let av = tape.input(a);
    let bv = tape.input(b);
    let s = ssim(&mut tape, av, bv, cfg)?;
    tape.value(s).item()
}

/// Reconstruction loss `1 - SSIM(original, reconstruction)`.
///
/// The reconstruction is clamped to `[0,1]` before the comparison; the
/// original is expected to already be in range.
pub fn reconstruction_loss(
    tape: &mut Tape,
    original: Var,
    reconstruction: Var,
    cfg: &SsimConfig,
) -> Result<Var> {
    let clamped = tape.clamp01(reconstruction)?;
    let s = ssim(tape, original, clamped, cfg)?;
    let one = tape.input(&Tensor::scalar(1.0));
    tape.sub(one, s)
}

/// Mean cross-entropy between logits `[n, k]` and class indices.
pub fn cross_entropy(tape: &mut Tape, logits: Var, labels: &[usize]) -> Result<Var> {
    let logp = tape.log_softmax(logits)?;
    tape.nll_mean(logp, labels)
}
