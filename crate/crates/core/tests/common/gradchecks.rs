//! Per-seed gradient checks shared by the dedicated suite and the
//! acceptance suite. See `tests/gradcheck.rs` for the strategy notes.

#![allow(dead_code)]

use super::*;
use iristex::losses::{cross_entropy, reconstruction_loss, ssim, SsimConfig};
use iristex::tape::{Tape, Var};
use iristex::tensor::Tensor;

const EPS: f64 = 1e-6;
const TOL: f64 = 1e-3;
const FLOOR: f64 = 1e-3;
const PROBES: usize = 6;

fn tensor(shape: &[usize], data: Vec<f32>) -> Tensor {
    Tensor::from_vec(shape.to_vec(), data).unwrap()
}

/// Scalarize `y` as a weighted sum so every output element influences the
/// loss; returns the weights used.
fn scalarize(tape: &mut Tape, y: Var, rng: &mut rand_chacha::ChaCha8Rng) -> (Var, Vec<f32>) {
    let numel = tape.value(y).numel();
    let w = random_vec(rng, numel, -1.0, 1.0);
    let shape = tape.value(y).shape().to_vec();
    let wt = tape.input(&tensor(&shape, w.clone()));
    let prod = tape.mul(y, wt).unwrap();
    let loss = tape.sum(prod).unwrap();
    (loss, w)
}

fn weighted_sum(values: &[f64], weights: &[f32]) -> f64 {
    values
        .iter()
        .zip(weights.iter())
        .map(|(v, w)| v * *w as f64)
        .sum()
}

/// Compare autodiff gradients of one input tensor against finite
/// differences of `f` at `PROBES` random coordinates.
fn check_grad(
    name: &str,
    seed: u64,
    base: &[f32],
    analytic: &[f32],
    rng: &mut rand_chacha::ChaCha8Rng,
    skip: impl Fn(usize) -> bool,
    f: impl Fn(&[f64]) -> f64,
) {
    let base64 = to_f64(base);
    for idx in probe_indices(rng, base.len(), PROBES) {
        if skip(idx) {
            continue;
        }
        let fd = central_diff(&base64, idx, EPS, &f);
        let ad = analytic[idx] as f64;
        let err = rel_err(ad, fd, FLOOR);
        assert!(
            err < TOL,
            "{name} seed {seed}: grad[{idx}] analytic {ad} vs fd {fd} (rel err {err})"
        );
    }
}

pub fn conv2d_gradcheck(seed: u64) {
    {
        let mut r = rng(seed);
        use rand::Rng;
        let n = r.gen_range(1..3usize);
        let c = r.gen_range(1..3usize);
        let oc = r.gen_range(1..4usize);
        let k = [1, 3][r.gen_range(0..2usize)];
        let padding = r.gen_range(0..2usize);
        let h = r.gen_range(4..7usize);
        let w = r.gen_range(4..7usize);
        let x = random_vec(&mut r, n * c * h * w, -1.0, 1.0);
        let wt = random_vec(&mut r, oc * c * k * k, -0.7, 0.7);
        let b = random_vec(&mut r, oc, -0.3, 0.3);

        let xt = tensor(&[n, c, h, w], x.clone());
        let wtt = tensor(&[oc, c, k, k], wt.clone());
        let bt = tensor(&[oc], b.clone());
        let mut tape = Tape::training();
        let xv = tape.param(&xt);
        let y = tape.conv2d(xv, &wtt, &bt, 1, padding).unwrap();
        let (loss, lw) = scalarize(&mut tape, y, &mut r);
        let grads = tape.backward(loss).unwrap();

        let (w64, b64) = (to_f64(&wt), to_f64(&b));
        let x64 = to_f64(&x);
        let lww = lw.clone();
        check_grad(
            "conv2d/x",
            seed,
            &x,
            grads.wrt(xv).unwrap().data(),
            &mut r,
            |_| false,
            move |xp| {
                weighted_sum(
                    &conv2d(xp, n, c, h, w, &w64, &b64, oc, k, k, 1, padding),
                    &lww,
                )
            },
        );
        let x64c = x64.clone();
        let b64c = to_f64(&b);
        let lww = lw.clone();
        check_grad(
            "conv2d/w",
            seed,
            &wt,
            grads.get(&wtt).unwrap().data(),
            &mut r,
            |_| false,
            move |wp| {
                weighted_sum(
                    &conv2d(&x64c, n, c, h, w, wp, &b64c, oc, k, k, 1, padding),
                    &lww,
                )
            },
        );
        let x64c = x64.clone();
        let w64c = to_f64(&wt);
        check_grad(
            "conv2d/b",
            seed,
            &b,
            grads.get(&bt).unwrap().data(),
            &mut r,
            |_| false,
            move |bp| {
                weighted_sum(
                    &conv2d(&x64c, n, c, h, w, &w64c, bp, oc, k, k, 1, padding),
                    &lw,
                )
            },
        );
    }
}

pub fn batchnorm_gradcheck(seed: u64) {
    {
        let mut r = rng(1000 + seed);
        use rand::Rng;
        let n = r.gen_range(2..4usize);
        let c = r.gen_range(1..4usize);
        let h = r.gen_range(2..5usize);
        let w = r.gen_range(2..5usize);
        let x = random_vec(&mut r, n * c * h * w, -1.5, 1.5);
        let gamma = random_vec(&mut r, c, 0.5, 1.5);
        let beta = random_vec(&mut r, c, -0.5, 0.5);
        let eps_bn = 1e-5f32;

        let xt = tensor(&[n, c, h, w], x.clone());
        let gt = tensor(&[c], gamma.clone());
        let bt = tensor(&[c], beta.clone());
        let mut tape = Tape::training();
        let xv = tape.param(&xt);
        let (y, _, _) = tape.batchnorm_train(xv, &gt, &bt, eps_bn).unwrap();
        let (loss, lw) = scalarize(&mut tape, y, &mut r);
        let grads = tape.backward(loss).unwrap();

        let (g64, b64) = (to_f64(&gamma), to_f64(&beta));
        let lww = lw.clone();
        check_grad(
            "batchnorm/x",
            seed,
            &x,
            grads.wrt(xv).unwrap().data(),
            &mut r,
            |_| false,
            move |xp| {
                weighted_sum(
                    &batchnorm_train(xp, n, c, h, w, &g64, &b64, eps_bn as f64),
                    &lww,
                )
            },
        );
        let x64 = to_f64(&x);
        let b64c = to_f64(&beta);
        let lww = lw.clone();
        check_grad(
            "batchnorm/gamma",
            seed,
            &gamma,
            grads.get(&gt).unwrap().data(),
            &mut r,
            |_| false,
            move |gp| {
                weighted_sum(
                    &batchnorm_train(&x64, n, c, h, w, gp, &b64c, eps_bn as f64),
                    &lww,
                )
            },
        );
        let x64 = to_f64(&x);
        let g64c = to_f64(&gamma);
        check_grad(
            "batchnorm/beta",
            seed,
            &beta,
            grads.get(&bt).unwrap().data(),
            &mut r,
            |_| false,
            move |bp| {
                weighted_sum(
                    &batchnorm_train(&x64, n, c, h, w, &g64c, bp, eps_bn as f64),
                    &lw,
                )
            },
        );
    }
}

pub fn pooling_gradcheck(seed: u64) {
    {
        let mut r = rng(2000 + seed);
        use rand::Rng;
        let n = r.gen_range(1..3usize);
        let c = r.gen_range(1..3usize);
        let h = 2 * r.gen_range(2..4usize);
        let w = 2 * r.gen_range(2..4usize);
        let x = random_vec(&mut r, n * c * h * w, -1.0, 1.0);
        let xt = tensor(&[n, c, h, w], x.clone());

        // window-mean pooling
        let mut tape = Tape::training();
        let xv = tape.param(&xt);
        let y = tape.avg_pool(xv, 2, 2).unwrap();
        let (loss, lw) = scalarize(&mut tape, y, &mut r);
        let grads = tape.backward(loss).unwrap();
        check_grad(
            "avg_pool/x",
            seed,
            &x,
            grads.wrt(xv).unwrap().data(),
            &mut r,
            |_| false,
            move |xp| weighted_sum(&avg_pool(xp, n, c, h, w, 2, 2), &lw),
        );

        // max pooling: gradient is one-hot per window; finite differences
        // agree away from argmax ties
        let mut tape = Tape::training();
        let xv = tape.param(&xt);
        let y = tape.max_pool(xv, 2, 2).unwrap();
        let (loss, lw) = scalarize(&mut tape, y, &mut r);
        let grads = tape.backward(loss).unwrap();
        check_grad(
            "max_pool/x",
            seed,
            &x,
            grads.wrt(xv).unwrap().data(),
            &mut r,
            |_| false,
            move |xp| weighted_sum(&max_pool(xp, n, c, h, w, 2, 2), &lw),
        );
    }
}

pub fn shuffle_and_global_mean_gradcheck(seed: u64) {
    {
        let mut r = rng(3000 + seed);
        use rand::Rng;
        let n = r.gen_range(1..3usize);
        let co = r.gen_range(1..3usize);
        let c = co * 4;
        let h = r.gen_range(1..4usize);
        let w = r.gen_range(1..4usize);
        let x = random_vec(&mut r, n * c * h * w, -1.0, 1.0);
        let xt = tensor(&[n, c, h, w], x.clone());

        let mut tape = Tape::training();
        let xv = tape.param(&xt);
        let y = tape.pixel_shuffle(xv, 2).unwrap();
        let (loss, lw) = scalarize(&mut tape, y, &mut r);
        let grads = tape.backward(loss).unwrap();
        check_grad(
            "pixel_shuffle/x",
            seed,
            &x,
            grads.wrt(xv).unwrap().data(),
            &mut r,
            |_| false,
            move |xp| weighted_sum(&pixel_shuffle(xp, n, c, h, w, 2), &lw),
        );

        let mut tape = Tape::training();
        let xv = tape.param(&xt);
        let y = tape.spatial_mean(xv).unwrap();
        let (loss, lw) = scalarize(&mut tape, y, &mut r);
        let grads = tape.backward(loss).unwrap();
        check_grad(
            "spatial_mean/x",
            seed,
            &x,
            grads.wrt(xv).unwrap().data(),
            &mut r,
            |_| false,
            move |xp| weighted_sum(&spatial_mean(xp, n, c, h, w), &lw),
        );
    }
}

pub fn matmul_gradcheck(seed: u64) {
    {
        let mut r = rng(4000 + seed);
        use rand::Rng;
        let m = r.gen_range(1..5usize);
        let k = r.gen_range(1..6usize);
        let n = r.gen_range(1..5usize);
        let a = random_vec(&mut r, m * k, -1.0, 1.0);
        let b = random_vec(&mut r, k * n, -1.0, 1.0);
        let at = tensor(&[m, k], a.clone());
        let bt = tensor(&[k, n], b.clone());

        let mut tape = Tape::training();
        let av = tape.param(&at);
        let bv = tape.param(&bt);
        let y = tape.matmul(av, bv).unwrap();
        let (loss, lw) = scalarize(&mut tape, y, &mut r);
        let grads = tape.backward(loss).unwrap();

        let b64 = to_f64(&b);
        let lww = lw.clone();
        check_grad(
            "matmul/a",
            seed,
            &a,
            grads.wrt(av).unwrap().data(),
            &mut r,
            |_| false,
            move |ap| weighted_sum(&matmul(ap, &b64, m, k, n), &lww),
        );
        let a64 = to_f64(&a);
        check_grad(
            "matmul/b",
            seed,
            &b,
            grads.wrt(bv).unwrap().data(),
            &mut r,
            |_| false,
            move |bp| weighted_sum(&matmul(&a64, bp, m, k, n), &lw),
        );
    }
}

/// Covers mul, add, div, sqrt, scale, relu, clamp, mean in one expression.
pub fn elementwise_gradcheck(seed: u64) {
    {
        let mut r = rng(5000 + seed);
        let n = 12usize;
        let a = random_vec(&mut r, n, 0.3, 1.6);
        let b = random_vec(&mut r, n, 0.4, 1.4);
        let d = random_vec(&mut r, n, 0.5, 1.5);
        let at = tensor(&[n], a.clone());
        let bt = tensor(&[n], b.clone());
        let dt = tensor(&[n], d.clone());

        let mut tape = Tape::training();
        let av = tape.param(&at);
        let bv = tape.param(&bt);
        let dv = tape.input(&dt);
        let prod = tape.mul(av, bv).unwrap();
        let shifted = tape.scale(prod, 1.5).unwrap();
        let quot = tape.div(shifted, dv).unwrap();
        let root = tape.sqrt(quot).unwrap();
        let rel = tape.relu(root).unwrap();
        let clamped = tape.clamp01(rel).unwrap();
        let loss = tape.mean(clamped).unwrap();
        let grads = tape.backward(loss).unwrap();

        let f = {
            let b64 = to_f64(&b);
            let d64 = to_f64(&d);
            move |ap: &[f64]| {
                let mut acc = 0.0f64;
                for i in 0..ap.len() {
                    let v = (ap[i] * b64[i] * 1.5 / d64[i]).sqrt().max(0.0).clamp(0.0, 1.0);
                    acc += v;
                }
                acc / ap.len() as f64
            }
        };
        // probes must stay away from the clamp corner at 1
        let vals: Vec<f32> = (0..n)
            .map(|i| (a[i] * b[i] * 1.5 / d[i]).sqrt())
            .collect();
        check_grad(
            "composite/a",
            seed,
            &a,
            grads.wrt(av).unwrap().data(),
            &mut r,
            |i| (vals[i] - 1.0).abs() < 1e-3,
            f,
        );
    }
}

pub fn softmax_and_cross_entropy_gradcheck(seed: u64) {
    {
        let mut r = rng(6000 + seed);
        use rand::Rng;
        let rows = r.gen_range(1..4usize);
        let cols = r.gen_range(2..6usize);
        let x = random_vec(&mut r, rows * cols, -2.0, 2.0);
        let labels: Vec<usize> = (0..rows).map(|_| r.gen_range(0..cols)).collect();
        let xt = tensor(&[rows, cols], x.clone());

        // cross entropy (log-softmax + nll)
        let mut tape = Tape::training();
        let xv = tape.param(&xt);
        let loss = cross_entropy(&mut tape, xv, &labels).unwrap();
        let grads = tape.backward(loss).unwrap();
        let labels64 = labels.clone();
        check_grad(
            "cross_entropy/logits",
            seed,
            &x,
            grads.wrt(xv).unwrap().data(),
            &mut r,
            |_| false,
            move |xp| super::cross_entropy(xp, rows, cols, &labels64),
        );

        // raw softmax scalarized
        let mut tape = Tape::training();
        let xv = tape.param(&xt);
        let y = tape.softmax(xv).unwrap();
        let (loss, lw) = scalarize(&mut tape, y, &mut r);
        let grads = tape.backward(loss).unwrap();
        check_grad(
            "softmax/logits",
            seed,
            &x,
            grads.wrt(xv).unwrap().data(),
            &mut r,
            |_| false,
            move |xp| {
                let mut out = vec![0.0f64; xp.len()];
                for rr in 0..rows {
                    let row = &xp[rr * cols..(rr + 1) * cols];
                    let mx = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                    let denom: f64 = row.iter().map(|v| (v - mx).exp()).sum();
                    for (o, v) in out[rr * cols..(rr + 1) * cols].iter_mut().zip(row.iter()) {
                        *o = (v - mx).exp() / denom;
                    }
                }
                weighted_sum(&out, &lw)
            },
        );
    }
}

pub fn ssim_gradcheck(seed: u64) {
    let cfg = SsimConfig::default();
    {
        let mut r = rng(7000 + seed);
        let (h, w) = (16, 16);
        let a = random_vec(&mut r, h * w, 0.05, 0.95);
        let b = random_vec(&mut r, h * w, 0.05, 0.95);
        let at = tensor(&[h, w], a.clone());
        let bt = tensor(&[h, w], b.clone());

        let mut tape = Tape::training();
        let av = tape.param(&at);
        let bv = tape.param(&bt);
        let s = ssim(&mut tape, av, bv, &cfg).unwrap();
        let grads = tape.backward(s).unwrap();

        let (c1, c2) = (cfg.c1(), cfg.c2());
        let b64 = to_f64(&b);
        check_grad(
            "ssim/a",
            seed,
            &a,
            grads.wrt(av).unwrap().data(),
            &mut r,
            |_| false,
            move |ap| ssim_mean(ap, &b64, 1, h, w, 11, 1.5, c1, c2),
        );
        let a64 = to_f64(&a);
        check_grad(
            "ssim/b",
            seed,
            &b,
            grads.wrt(bv).unwrap().data(),
            &mut r,
            |_| false,
            move |bp| ssim_mean(&a64, bp, 1, h, w, 11, 1.5, c1, c2),
        );
    }
}

/// Reconstruction loss gradient with respect to the reconstruction,
/// checked on 10 sampled pixels per image pair.
pub fn reconstruction_loss_gradcheck(seed: u64) {
    let cfg = SsimConfig::default();
    {
        let mut r = rng(8000 + seed);
        let (h, w) = (16, 16);
        let original = random_vec(&mut r, h * w, 0.05, 0.95);
        let recon = random_vec(&mut r, h * w, 0.05, 0.95);
        let ot = tensor(&[h, w], original.clone());
        let rt = tensor(&[h, w], recon.clone());

        let mut tape = Tape::training();
        let ov = tape.input(&ot);
        let rv = tape.param(&rt);
        let loss = reconstruction_loss(&mut tape, ov, rv, &cfg).unwrap();
        let grads = tape.backward(loss).unwrap();

        let (c1, c2) = (cfg.c1(), cfg.c2());
        let o64 = to_f64(&original);
        let analytic = grads.wrt(rv).unwrap().data().to_vec();
        let o64c = o64.clone();
        let f = move |rp: &[f64]| {
            let clamped: Vec<f64> = rp.iter().map(|v| v.clamp(0.0, 1.0)).collect();
            1.0 - ssim_mean(&o64c, &clamped, 1, h, w, 11, 1.5, c1, c2)
        };
        let recon64 = to_f64(&recon);
        for idx in probe_indices(&mut r, recon.len(), 10) {
            let fd = central_diff(&recon64, idx, EPS, &f);
            let ad = analytic[idx] as f64;
            let err = rel_err(ad, fd, FLOOR);
            assert!(err < 1e-2, "seed {seed}: grad[{idx}] {ad} vs {fd} ({err})");
        }
    }
}
