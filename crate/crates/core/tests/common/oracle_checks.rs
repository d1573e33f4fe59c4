//! Forward-path oracle checks shared by the dedicated suite and the
//! acceptance suite; see `tests/oracles.rs`.

#![allow(dead_code)]

use super::*;
use iristex::tape::Tape;
use iristex::tensor::Tensor;
use rand::Rng;

fn tensor(shape: &[usize], data: Vec<f32>) -> Tensor {
    Tensor::from_vec(shape.to_vec(), data).unwrap()
}

/// Quadruple-loop f32 conv with the same accumulation order as the
/// production kernel (channel, then kernel row, then kernel column).
#[allow(clippy::too_many_arguments)]
fn conv2d_f32_naive(
    x: &[f32],
    n: usize,
    c: usize,
    h: usize,
    w: usize,
    weight: &[f32],
    bias: &[f32],
    oc: usize,
    k: usize,
    stride: usize,
    padding: usize,
) -> Vec<f32> {
    let oh = (h + 2 * padding - k) / stride + 1;
    let ow = (w + 2 * padding - k) / stride + 1;
    let mut out = vec![0.0f32; n * oc * oh * ow];
    for img in 0..n {
        for o in 0..oc {
            for oy in 0..oh {
                for ox in 0..ow {
                    let mut acc = 0.0f32;
                    for ci in 0..c {
                        for ky in 0..k {
                            for kx in 0..k {
                                let iy = (oy * stride + ky) as isize - padding as isize;
                                let ix = (ox * stride + kx) as isize - padding as isize;
                                let xv = if iy < 0 || iy >= h as isize || ix < 0 || ix >= w as isize
                                {
                                    0.0
                                } else {
                                    x[((img * c + ci) * h + iy as usize) * w + ix as usize]
                                };
                                acc += xv * weight[((o * c + ci) * k + ky) * k + kx];
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

pub fn conv_exact_small_case() {
    // random 1x2x6x6 input, 3x3 kernel, stride 1, padding 1
    let mut r = rng(100);
    let x = random_vec(&mut r, 2 * 6 * 6, -1.0, 1.0);
    let w = random_vec(&mut r, 4 * 2 * 3 * 3, -1.0, 1.0);
    let b = random_vec(&mut r, 4, -0.5, 0.5);
    let mut tape = Tape::inference();
    let xv = tape.input(&tensor(&[1, 2, 6, 6], x.clone()));
    let y = tape
        .conv2d(xv, &tensor(&[4, 2, 3, 3], w.clone()), &tensor(&[4], b.clone()), 1, 1)
        .unwrap();
    let reference = conv2d_f32_naive(&x, 1, 2, 6, 6, &w, &b, 4, 3, 1, 1);
    assert_eq!(tape.value(y).data(), reference.as_slice());
}

pub fn conv_forward_oracle(trial: u64) {
    {
        let mut r = rng(200 + trial);
        let n = r.gen_range(1..3usize);
        let c = r.gen_range(1..4usize);
        let oc = r.gen_range(1..5usize);
        let k = [1, 3, 5][r.gen_range(0..3usize)];
        let padding = r.gen_range(0..=k / 2);
        let h = r.gen_range(k..k + 6);
        let w = r.gen_range(k..k + 6);
        let x = random_vec(&mut r, n * c * h * w, -1.0, 1.0);
        let wt = random_vec(&mut r, oc * c * k * k, -1.0, 1.0);
        let b = random_vec(&mut r, oc, -0.5, 0.5);

        let mut tape = Tape::inference();
        let xv = tape.input(&tensor(&[n, c, h, w], x.clone()));
        let y = tape
            .conv2d(
                xv,
                &tensor(&[oc, c, k, k], wt.clone()),
                &tensor(&[oc], b.clone()),
                1,
                padding,
            )
            .unwrap();
        let reference = conv2d(
            &to_f64(&x),
            n,
            c,
            h,
            w,
            &to_f64(&wt),
            &to_f64(&b),
            oc,
            k,
            k,
            1,
            padding,
        );
        for (got, want) in tape.value(y).data().iter().zip(reference.iter()) {
            assert!(
                (*got as f64 - want).abs() < 1e-5,
                "trial {trial}: {got} vs {want}"
            );
        }
    }
}

pub fn batchnorm_forward_oracle(trial: u64) {
    {
        let mut r = rng(400 + trial);
        let n = r.gen_range(2..4usize);
        let c = r.gen_range(1..4usize);
        let h = r.gen_range(2..6usize);
        let w = r.gen_range(2..6usize);
        let x = random_vec(&mut r, n * c * h * w, -2.0, 2.0);
        let gamma = random_vec(&mut r, c, 0.5, 1.5);
        let beta = random_vec(&mut r, c, -0.5, 0.5);

        let mut tape = Tape::training();
        let xv = tape.input(&tensor(&[n, c, h, w], x.clone()));
        let (y, mean, var) = tape
            .batchnorm_train(xv, &tensor(&[c], gamma.clone()), &tensor(&[c], beta.clone()), 1e-5)
            .unwrap();
        let reference = batchnorm_train(
            &to_f64(&x),
            n,
            c,
            h,
            w,
            &to_f64(&gamma),
            &to_f64(&beta),
            1e-5,
        );
        for (got, want) in tape.value(y).data().iter().zip(reference.iter()) {
            assert!(
                (*got as f64 - want).abs() < 1e-5,
                "trial {trial}: {got} vs {want}"
            );
        }
        // reported batch statistics agree with the direct computation
        let (rm, rv) = channel_stats(&to_f64(&x), n, c, h, w);
        for ch in 0..c {
            assert!((mean[ch] as f64 - rm[ch]).abs() < 1e-5);
            assert!((var[ch] as f64 - rv[ch]).abs() < 1e-5);
        }
    }
}

pub fn pooling_forward_oracle(trial: u64) {
    {
        let mut r = rng(600 + trial);
        let n = r.gen_range(1..3usize);
        let c = r.gen_range(1..4usize);
        let k = r.gen_range(1..4usize);
        let s = r.gen_range(1..3usize);
        let h = r.gen_range(k..k + 6);
        let w = r.gen_range(k..k + 6);
        let x = random_vec(&mut r, n * c * h * w, -2.0, 2.0);
        let x64 = to_f64(&x);
        let xt = tensor(&[n, c, h, w], x.clone());

        let mut tape = Tape::inference();
        let xv = tape.input(&xt);
        let ymax = tape.max_pool(xv, k, s).unwrap();
        // max of f32 values is representable exactly: f64 reference comparable
        let r64 = max_pool(&x64, n, c, h, w, k, s);
        for (got, want) in tape.value(ymax).data().iter().zip(r64.iter()) {
            assert_eq!(*got as f64, *want, "trial {trial} max");
        }

        // window-mean: reference mirrors the kernel's row-major f32
        // accumulation and multiply-by-reciprocal
        let yavg = tape.avg_pool(xv, k, s).unwrap();
        let oh = (h - k) / s + 1;
        let ow = (w - k) / s + 1;
        let inv = 1.0f32 / (k * k) as f32;
        let mut want = vec![0.0f32; n * c * oh * ow];
        for p in 0..n * c {
            for oy in 0..oh {
                for ox in 0..ow {
                    let mut acc = 0.0f32;
                    for ky in 0..k {
                        for kx in 0..k {
                            acc += x[p * h * w + (oy * s + ky) * w + ox * s + kx];
                        }
                    }
                    want[p * oh * ow + oy * ow + ox] = acc * inv;
                }
            }
        }
        assert_eq!(tape.value(yavg).data(), want.as_slice(), "trial {trial} avg");
    }
}

pub fn shuffle_and_global_mean_forward_oracle(trial: u64) {
    {
        let mut r = rng(800 + trial);
        let n = r.gen_range(1..3usize);
        let rr = r.gen_range(1..4usize);
        let co = r.gen_range(1..3usize);
        let c = co * rr * rr;
        let h = r.gen_range(1..4usize);
        let w = r.gen_range(1..4usize);
        let x = random_vec(&mut r, n * c * h * w, -2.0, 2.0);
        let x64 = to_f64(&x);
        let xt = tensor(&[n, c, h, w], x.clone());

        let mut tape = Tape::inference();
        let xv = tape.input(&xt);
        let y = tape.pixel_shuffle(xv, rr).unwrap();
        let want = pixel_shuffle(&x64, n, c, h, w, rr);
        for (got, want) in tape.value(y).data().iter().zip(want.iter()) {
            assert_eq!(*got as f64, *want, "trial {trial} shuffle");
        }

        // global spatial mean: reference mirrors f64 row-major accumulation
        let tel = tape.spatial_mean(xv).unwrap();
        let hw = h * w;
        let mut want = vec![0.0f32; n * c];
        for p in 0..n * c {
            let mut acc = 0.0f64;
            for i in 0..hw {
                acc += x[p * hw + i] as f64;
            }
            want[p] = (acc / hw as f64) as f32;
        }
        assert_eq!(tape.value(tel).data(), want.as_slice(), "trial {trial} tel");
    }
}

pub fn softmax_forward_oracle(trial: u64) {
    {
        let mut r = rng(1000 + trial);
        let rows = r.gen_range(1..4usize);
        let cols = r.gen_range(2..8usize);
        let x = random_vec(&mut r, rows * cols, -30.0, 30.0);
        let mut tape = Tape::inference();
        let xv = tape.input(&tensor(&[rows, cols], x.clone()));
        let y = tape.log_softmax(xv).unwrap();
        let want = log_softmax(&to_f64(&x), rows, cols);
        for (got, want) in tape.value(y).data().iter().zip(want.iter()) {
            assert!(
                (*got as f64 - want).abs() < 1e-5,
                "trial {trial}: {got} vs {want}"
            );
        }
    }
}

pub fn ssim_forward_oracle(trial: u64) {
    let cfg = iristex::losses::SsimConfig::default();
    {
        let mut r = rng(1200 + trial);
        let h = r.gen_range(11..20usize);
        let w = r.gen_range(11..20usize);
        let a = random_vec(&mut r, h * w, 0.0, 1.0);
        let b = random_vec(&mut r, h * w, 0.0, 1.0);
        let got = iristex::losses::ssim_value(
            &tensor(&[h, w], a.clone()),
            &tensor(&[h, w], b.clone()),
            &cfg,
        )
        .unwrap() as f64;
        let want = ssim_mean(&to_f64(&a), &to_f64(&b), 1, h, w, 11, 1.5, cfg.c1(), cfg.c2());
        assert!((got - want).abs() < 1e-6, "trial {trial}: {got} vs {want}");
    }
}

pub fn cross_entropy_forward_oracle(trial: u64) {
    {
        let mut r = rng(1400 + trial);
        let rows = r.gen_range(1..5usize);
        let cols = r.gen_range(2..9usize);
        let x = random_vec(&mut r, rows * cols, -10.0, 10.0);
        let labels: Vec<usize> = (0..rows).map(|_| r.gen_range(0..cols)).collect();
        let mut tape = Tape::training();
        let xv = tape.input(&tensor(&[rows, cols], x.clone()));
        let loss = iristex::losses::cross_entropy(&mut tape, xv, &labels).unwrap();
        let got = tape.value(loss).item().unwrap() as f64;
        let want = cross_entropy(&to_f64(&x), rows, cols, &labels);
        assert!(
            (got - want).abs() < 1e-5,
            "trial {trial}: {got} vs {want}"
        );
    }
}
