//! Synthetic texture dataset generation.
//!
//! Each class is a fixed mixture of oriented sinusoids (a crude stand-in
//! for band-limited iris texture); samples within a class share the mixture
//! but get per-image phase jitter and pixel noise. Classes are kept
//! pairwise distinct by enforcing a minimum distance between their spatial
//! frequency vectors.

use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::data::{Dataset, IrisImage};
use crate::error::{Error, Result};
use crate::models::ENCODER_STRIDE;
use crate::rng::{stream, tags};

fn default_components() -> (usize, usize) {
    (2, 4)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SynthSpec {
    pub num_classes: usize,
    pub samples_per_class: usize,
    pub width: usize,
    pub height: usize,
    /// Inclusive range for the number of sinusoid components per class.
    pub components_min: usize,
    pub components_max: usize,
    /// Spatial frequency range in cycles across the image width.
    pub freq_min: f64,
    pub freq_max: f64,
    pub amplitude_min: f64,
    pub amplitude_max: f64,
    /// Std-dev of the per-image, per-component phase jitter (radians).
    pub phase_jitter: f64,
    /// Std-dev of additive per-pixel Gaussian noise.
    pub noise_sigma: f64,
    /// Minimum euclidean distance between any two classes' frequency vectors.
    pub min_class_distance: f64,
    pub seed: u64,
}

impl Default for SynthSpec {
    fn default() -> Self {
        let (components_min, components_max) = default_components();
        SynthSpec {
            num_classes: 20,
            samples_per_class: 20,
            width: 128,
            height: 32,
            components_min,
            components_max,
            freq_min: 3.0,
            freq_max: 24.0,
            amplitude_min: 0.5,
            amplitude_max: 1.0,
            phase_jitter: 1.0,
            noise_sigma: 0.02,
            min_class_distance: 0.9,
            seed: 7,
        }
    }
}

impl SynthSpec {
    pub fn validate(&self) -> Result<()> {
        if self.num_classes == 0 || self.samples_per_class == 0 {
            return Err(Error::Config("need at least one class and one sample".into()));
        }
        if self.width % ENCODER_STRIDE != 0 || self.height % ENCODER_STRIDE != 0 {
            return Err(Error::Config(format!(
                "resolution {}x{} must be divisible by {ENCODER_STRIDE}",
                self.width, self.height
            )));
        }
        if self.freq_min <= 0.0 || self.freq_max < self.freq_min {
            return Err(Error::Config("invalid frequency range".into()));
        }
        if self.components_min < 1 || self.components_max < self.components_min {
            return Err(Error::Config("invalid component count range".into()));
        }
        if self.noise_sigma < 0.0 || self.phase_jitter < 0.0 {
            return Err(Error::Config("jitter and noise must be non-negative".into()));
        }
        Ok(())
    }
}

/// One sinusoid: spatial frequency vector (cycles per image width along
/// x/y), amplitude, base phase.
#[derive(Debug, Clone, Copy)]
struct Component {
    fx: f64,
    fy: f64,
    amplitude: f64,
    phase: f64,
}

#[derive(Debug, Clone)]
struct ClassTexture {
    components: Vec<Component>,
}

fn draw_class(
    spec: &SynthSpec,
    rng: &mut impl Rng,
    taken: &[(f64, f64)],
) -> Option<ClassTexture> {
    let n = rng.gen_range(spec.components_min..=spec.components_max);
    let mut components = Vec::with_capacity(n);
    let mut mine: Vec<(f64, f64)> = Vec::with_capacity(n);
    for _ in 0..n {
        let mut placed = false;
        for _attempt in 0..200 {
            let f = rng.gen_range(spec.freq_min..spec.freq_max);
            // orientation in [0, pi): (fx, fy) and (-fx, -fy) describe the
            // same wave family
            let theta = rng.gen_range(0.0..std::f64::consts::PI);
            let (fx, fy) = (f * theta.cos(), f * theta.sin());
            let far_enough = taken
                .iter()
                .chain(mine.iter())
                .all(|&(ox, oy)| ((fx - ox).powi(2) + (fy - oy).powi(2)).sqrt() >= spec.min_class_distance);
            if far_enough {
                components.push(Component {
                    fx,
                    fy,
                    amplitude: rng.gen_range(spec.amplitude_min..spec.amplitude_max),
                    phase: rng.gen_range(0.0..std::f64::consts::TAU),
                });
                mine.push((fx, fy));
                placed = true;
                break;
            }
        }
        if !placed {
            return None;
        }
    }
    Some(ClassTexture { components })
}

fn render(
    spec: &SynthSpec,
    class: &ClassTexture,
    jitter: &[f64],
    noise_rng: &mut impl Rng,
) -> IrisImage {
    let (w, h) = (spec.width, spec.height);
    let amp_total: f64 = class.components.iter().map(|c| c.amplitude).sum();
    let noise = Normal::new(0.0, spec.noise_sigma.max(f64::MIN_POSITIVE)).unwrap();
    let mut pixels = Vec::with_capacity(w * h);
    for y in 0..h {
        for x in 0..w {
            let mut v = 0.0f64;
            for (c, dphi) in class.components.iter().zip(jitter.iter()) {
                let arg = std::f64::consts::TAU
                    * (c.fx * x as f64 / w as f64 + c.fy * y as f64 / w as f64)
                    + c.phase
                    + dphi;
                v += c.amplitude * arg.sin();
            }
            let mut p = 0.5 + 0.5 * v / amp_total;
            if spec.noise_sigma > 0.0 {
                p += noise.sample(noise_rng);
            }
            pixels.push(p.clamp(0.0, 1.0) as f32);
        }
    }
    IrisImage::new(w, h, pixels).expect("consistent by construction")
}

/// Generate a synthetic dataset. Deterministic in `spec.seed`; class `c`
/// plays the role of subject `c/2`'s left or right eye.
pub fn generate_synthetic(spec: &SynthSpec) -> Result<Dataset> {
    spec.validate()?;
    let mut class_rng = stream(spec.seed, tags::SYNTH_CLASS);
    let mut textures = Vec::with_capacity(spec.num_classes);
    let mut taken: Vec<(f64, f64)> = Vec::new();
    for class in 0..spec.num_classes {
        let tex = draw_class(spec, &mut class_rng, &taken).ok_or_else(|| {
            Error::Config(format!(
                "could not place class {class}: frequency space exhausted \
                 (lower min_class_distance or num_classes)"
            ))
        })?;
        for c in &tex.components {
            taken.push((c.fx, c.fy));
        }
        textures.push(tex);
    }

    let mut images = Vec::with_capacity(spec.num_classes * spec.samples_per_class);
    let mut labels = Vec::with_capacity(images.capacity());
    for (class, tex) in textures.iter().enumerate() {
        for sample in 0..spec.samples_per_class {
            let tag = (class * spec.samples_per_class + sample) as u64;
            let mut rng = stream(spec.seed ^ tags::SYNTH_SAMPLE, tag);
            let jitter: Vec<f64> = if spec.phase_jitter > 0.0 {
                let d = Normal::new(0.0, spec.phase_jitter).unwrap();
                tex.components.iter().map(|_| d.sample(&mut rng)).collect()
            } else {
                vec![0.0; tex.components.len()]
            };
            images.push(render(spec, tex, &jitter, &mut rng));
            labels.push(class);
        }
    }
    Dataset::new(images, labels)
}
