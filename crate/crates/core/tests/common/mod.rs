//! Naive f64 reference implementations used as independent oracles for the
//! production kernels, plus finite-difference helpers.
//!
//! Everything here is written as directly as possible from the defining
//! formulas (plain loops, no layout tricks) and stays independent of the
//! crate's compute paths.

#![allow(dead_code)]

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn random_vec(rng: &mut ChaCha8Rng, len: usize, lo: f32, hi: f32) -> Vec<f32> {
    (0..len).map(|_| rng.gen_range(lo..hi)).collect()
}

/// Relative error with an absolute floor: |a-b| / max(|a|, |b|, floor).
pub fn rel_err(a: f64, b: f64, floor: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(floor)
}

pub fn to_f64(x: &[f32]) -> Vec<f64> {
    x.iter().map(|&v| v as f64).collect()
}

// ── reference forward implementations (f64) ──────────────────────────

/// Plain quadruple-loop cross-correlation with zero padding.
#[allow(clippy::too_many_arguments)]
pub fn conv2d(
    x: &[f64],
    n: usize,
    c: usize,
    h: usize,
    w: usize,
    weight: &[f64],
    bias: &[f64],
    oc: usize,
    kh: usize,
    kw: usize,
    stride: usize,
    padding: usize,
) -> Vec<f64> {
    let oh = (h + 2 * padding - kh) / stride + 1;
    let ow = (w + 2 * padding - kw) / stride + 1;
    let mut out = vec![0.0f64; n * oc * oh * ow];
    for img in 0..n {
        for o in 0..oc {
            for oy in 0..oh {
                for ox in 0..ow {
                    let mut acc = 0.0f64;
                    for ci in 0..c {
                        for ky in 0..kh {
                            for kx in 0..kw {
                                let iy = (oy * stride + ky) as isize - padding as isize;
                                let ix = (ox * stride + kx) as isize - padding as isize;
                                if iy < 0 || iy >= h as isize || ix < 0 || ix >= w as isize {
                                    continue;
                                }
                                let xv = x[((img * c + ci) * h + iy as usize) * w + ix as usize];
                                let wv = weight[((o * c + ci) * kh + ky) * kw + kx];
                                acc += xv * wv;
                            }
                        }
                    }
                    out[((img * oc + o) * oh + oy) * ow + ox] = acc + bias[o];
                }
            }
        }
    }
    out
}

/// Training-mode batch normalization from per-channel batch statistics.
#[allow(clippy::too_many_arguments)]
pub fn batchnorm_train(
    x: &[f64],
    n: usize,
    c: usize,
    h: usize,
    w: usize,
    gamma: &[f64],
    beta: &[f64],
    eps: f64,
) -> Vec<f64> {
    let hw = h * w;
    let m = (n * hw) as f64;
    let mut out = vec![0.0f64; x.len()];
    for ch in 0..c {
        let mut mean = 0.0f64;
        for img in 0..n {
            for i in 0..hw {
                mean += x[(img * c + ch) * hw + i];
            }
        }
        mean /= m;
        let mut var = 0.0f64;
        for img in 0..n {
            for i in 0..hw {
                let d = x[(img * c + ch) * hw + i] - mean;
                var += d * d;
            }
        }
        var /= m;
        let istd = 1.0 / (var + eps).sqrt();
        for img in 0..n {
            for i in 0..hw {
                let idx = (img * c + ch) * hw + i;
                out[idx] = gamma[ch] * (x[idx] - mean) * istd + beta[ch];
            }
        }
    }
    out
}

/// Per-channel batch statistics (mean, biased variance).
pub fn channel_stats(x: &[f64], n: usize, c: usize, h: usize, w: usize) -> (Vec<f64>, Vec<f64>) {
    let hw = h * w;
    let m = (n * hw) as f64;
    let mut means = vec![0.0f64; c];
    let mut vars = vec![0.0f64; c];
    for ch in 0..c {
        for img in 0..n {
            for i in 0..hw {
                means[ch] += x[(img * c + ch) * hw + i];
            }
        }
        means[ch] /= m;
        for img in 0..n {
            for i in 0..hw {
                let d = x[(img * c + ch) * hw + i] - means[ch];
                vars[ch] += d * d;
            }
        }
        vars[ch] /= m;
    }
    (means, vars)
}

pub fn max_pool(
    x: &[f64],
    n: usize,
    c: usize,
    h: usize,
    w: usize,
    k: usize,
    s: usize,
) -> Vec<f64> {
    let oh = (h - k) / s + 1;
    let ow = (w - k) / s + 1;
    let mut out = vec![0.0f64; n * c * oh * ow];
    for p in 0..n * c {
        for oy in 0..oh {
            for ox in 0..ow {
                let mut best = f64::NEG_INFINITY;
                for ky in 0..k {
                    for kx in 0..k {
                        best = best.max(x[p * h * w + (oy * s + ky) * w + ox * s + kx]);
                    }
                }
                out[p * oh * ow + oy * ow + ox] = best;
            }
        }
    }
    out
}

pub fn avg_pool(
    x: &[f64],
    n: usize,
    c: usize,
    h: usize,
    w: usize,
    k: usize,
    s: usize,
) -> Vec<f64> {
    let oh = (h - k) / s + 1;
    let ow = (w - k) / s + 1;
    let mut out = vec![0.0f64; n * c * oh * ow];
    for p in 0..n * c {
        for oy in 0..oh {
            for ox in 0..ow {
                let mut acc = 0.0f64;
                for ky in 0..k {
                    for kx in 0..k {
                        acc += x[p * h * w + (oy * s + ky) * w + ox * s + kx];
                    }
                }
                out[p * oh * ow + oy * ow + ox] = acc / (k * k) as f64;
            }
        }
    }
    out
}

/// out(n, co, y, x) = in(n, co·r² + r·(y mod r) + (x mod r), y/r, x/r).
pub fn pixel_shuffle(x: &[f64], n: usize, c: usize, h: usize, w: usize, r: usize) -> Vec<f64> {
    let co = c / (r * r);
    let (ho, wo) = (h * r, w * r);
    let mut out = vec![0.0f64; x.len()];
    for img in 0..n {
        for cout in 0..co {
            for y in 0..ho {
                for xx in 0..wo {
                    let cin = cout * r * r + r * (y % r) + (xx % r);
                    out[((img * co + cout) * ho + y) * wo + xx] =
                        x[((img * c + cin) * h + y / r) * w + xx / r];
                }
            }
        }
    }
    out
}

/// Per-channel spatial mean: `[n,c,h,w]` → `[n,c]`.
pub fn spatial_mean(x: &[f64], n: usize, c: usize, h: usize, w: usize) -> Vec<f64> {
    let hw = h * w;
    let mut out = vec![0.0f64; n * c];
    for p in 0..n * c {
        let mut acc = 0.0f64;
        for i in 0..hw {
            acc += x[p * hw + i];
        }
        out[p] = acc / hw as f64;
    }
    out
}

pub fn matmul(a: &[f64], b: &[f64], m: usize, k: usize, n: usize) -> Vec<f64> {
    let mut c = vec![0.0f64; m * n];
    for i in 0..m {
        for j in 0..n {
            let mut acc = 0.0f64;
            for kk in 0..k {
                acc += a[i * k + kk] * b[kk * n + j];
            }
            c[i * n + j] = acc;
        }
    }
    c
}

pub fn log_softmax(x: &[f64], rows: usize, cols: usize) -> Vec<f64> {
    let mut out = vec![0.0f64; x.len()];
    for r in 0..rows {
        let row = &x[r * cols..(r + 1) * cols];
        let mx = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let denom: f64 = row.iter().map(|v| (v - mx).exp()).sum();
        for (o, v) in out[r * cols..(r + 1) * cols].iter_mut().zip(row.iter()) {
            *o = (v - mx) - denom.ln();
        }
    }
    out
}

pub fn cross_entropy(logits: &[f64], rows: usize, cols: usize, labels: &[usize]) -> f64 {
    let lp = log_softmax(logits, rows, cols);
    let mut acc = 0.0f64;
    for (r, &label) in labels.iter().enumerate() {
        acc -= lp[r * cols + label];
    }
    acc / rows as f64
}

/// Windowed SSIM over valid positions with Gaussian weights, the defining
/// per-window formula (centered moments).
pub fn ssim_mean(
    a: &[f64],
    b: &[f64],
    n: usize,
    h: usize,
    w: usize,
    ws: usize,
    sigma: f64,
    c1: f64,
    c2: f64,
) -> f64 {
    // build the normalized Gaussian window directly
    let center = (ws as f64 - 1.0) / 2.0;
    let mut win = vec![0.0f64; ws * ws];
    let mut total = 0.0;
    for y in 0..ws {
        for x in 0..ws {
            let (dy, dx) = (y as f64 - center, x as f64 - center);
            win[y * ws + x] = (-(dx * dx + dy * dy) / (2.0 * sigma * sigma)).exp();
            total += win[y * ws + x];
        }
    }
    for v in &mut win {
        *v /= total;
    }

    let (oh, ow) = (h - ws + 1, w - ws + 1);
    let mut acc = 0.0f64;
    for img in 0..n {
        let ai = &a[img * h * w..(img + 1) * h * w];
        let bi = &b[img * h * w..(img + 1) * h * w];
        for y0 in 0..oh {
            for x0 in 0..ow {
                let mut mu_a = 0.0;
                let mut mu_b = 0.0;
                for ky in 0..ws {
                    for kx in 0..ws {
                        let wv = win[ky * ws + kx];
                        mu_a += wv * ai[(y0 + ky) * w + x0 + kx];
                        mu_b += wv * bi[(y0 + ky) * w + x0 + kx];
                    }
                }
                let (mut va, mut vb, mut cov) = (0.0, 0.0, 0.0);
                for ky in 0..ws {
                    for kx in 0..ws {
                        let wv = win[ky * ws + kx];
                        let da = ai[(y0 + ky) * w + x0 + kx] - mu_a;
                        let db = bi[(y0 + ky) * w + x0 + kx] - mu_b;
                        va += wv * da * da;
                        vb += wv * db * db;
                        cov += wv * da * db;
                    }
                }
                acc += ((2.0 * mu_a * mu_b + c1) * (2.0 * cov + c2))
                    / ((mu_a * mu_a + mu_b * mu_b + c1) * (va + vb + c2));
            }
        }
    }
    acc / (n * oh * ow) as f64
}

// ── finite differences ───────────────────────────────────────────────

/// Central finite difference of `f` with respect to `x[idx]`.
pub fn central_diff(x: &[f64], idx: usize, eps: f64, mut f: impl FnMut(&[f64]) -> f64) -> f64 {
    let mut xp = x.to_vec();
    xp[idx] += eps;
    let fp = f(&xp);
    xp[idx] = x[idx] - eps;
    let fm = f(&xp);
    (fp - fm) / (2.0 * eps)
}

/// Pick `count` distinct probe indices.
pub fn probe_indices(rng: &mut ChaCha8Rng, len: usize, count: usize) -> Vec<usize> {
    if len <= count {
        return (0..len).collect();
    }
    let mut picked = std::collections::BTreeSet::new();
    while picked.len() < count {
        picked.insert(rng.gen_range(0..len));
    }
    picked.into_iter().collect()
}

pub mod gradchecks;
pub mod metric_checks;
pub mod oracle_checks;
