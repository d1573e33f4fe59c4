//! Raw numeric kernels on flat `f32` slices.
//!
//! Everything here is serial with a fixed accumulation order, so results are
//! bit-identical across runs and across SIMD widths (the compiler may
//! vectorize across output lanes but never reassociates a single
//! accumulation chain). Reductions that feed statistics (batch norm, spatial
//! means, SSIM moments) accumulate in `f64`; matrix products accumulate in
//! `f32` with a fixed k-order.

use crate::error::{Error, Result};

// ── matrix products ──────────────────────────────────────────────────

/// C[m,n] = A[m,k] · B[k,n], row-major.
///
/// Four output rows advance together so each pass over B feeds four rows
/// (B traffic /4). Per-element accumulation order over k is unchanged, so
/// the result is bit-identical to the plain triple loop.
pub fn matmul(a: &[f32], b: &[f32], m: usize, k: usize, n: usize) -> Vec<f32> {
    let mut c = vec![0.0f32; m * n];
    let blocks = m / 4;
    for blk in 0..blocks {
        let i = blk * 4;
        let (r0, rest) = c[i * n..(i + 4) * n].split_at_mut(n);
        let (r1, rest) = rest.split_at_mut(n);
        let (r2, r3) = rest.split_at_mut(n);
        for kk in 0..k {
            let a0 = a[i * k + kk];
            let a1 = a[(i + 1) * k + kk];
            let a2 = a[(i + 2) * k + kk];
            let a3 = a[(i + 3) * k + kk];
            let b_row = &b[kk * n..(kk + 1) * n];
            for j in 0..n {
                let bj = b_row[j];
                r0[j] += a0 * bj;
                r1[j] += a1 * bj;
                r2[j] += a2 * bj;
                r3[j] += a3 * bj;
            }
        }
    }
    for i in blocks * 4..m {
        let c_row = &mut c[i * n..(i + 1) * n];
        for kk in 0..k {
            let aik = a[i * k + kk];
            let b_row = &b[kk * n..(kk + 1) * n];
            for (cj, bj) in c_row.iter_mut().zip(b_row.iter()) {
                *cj += aik * bj;
            }
        }
    }
    c
}

/// Dot product with eight independent partial accumulators so the
/// compiler can vectorize the reduction. Fixed combining order keeps the
/// result deterministic.
fn dot(a: &[f32], b: &[f32]) -> f32 {
    const LANES: usize = 8;
    let mut acc = [0.0f32; LANES];
    let mut ac = a.chunks_exact(LANES);
    let mut bc = b.chunks_exact(LANES);
    for (ca, cb) in (&mut ac).zip(&mut bc) {
        for l in 0..LANES {
            acc[l] += ca[l] * cb[l];
        }
    }
    let mut tail = 0.0f32;
    for (x, y) in ac.remainder().iter().zip(bc.remainder().iter()) {
        tail += x * y;
    }
    (((acc[0] + acc[1]) + (acc[2] + acc[3])) + ((acc[4] + acc[5]) + (acc[6] + acc[7]))) + tail
}

/// C[m,n] = A[m,k] · B[n,k]ᵀ — rows of A dotted with rows of B.
pub fn matmul_nt(a: &[f32], b: &[f32], m: usize, k: usize, n: usize) -> Vec<f32> {
    let mut c = vec![0.0f32; m * n];
    for i in 0..m {
        let a_row = &a[i * k..(i + 1) * k];
        for j in 0..n {
            c[i * n + j] = dot(a_row, &b[j * k..(j + 1) * k]);
        }
    }
    c
}

/// C[k,n] = A[m,k]ᵀ · B[m,n].
///
/// Four A-rows advance together so each pass over C feeds from four B rows
/// (C traffic /4); per-element accumulation order over m is unchanged.
pub fn matmul_tn(a: &[f32], b: &[f32], m: usize, k: usize, n: usize) -> Vec<f32> {
    let mut c = vec![0.0f32; k * n];
    let blocks = m / 4;
    for blk in 0..blocks {
        let i = blk * 4;
        let b0 = &b[i * n..(i + 1) * n];
        let b1 = &b[(i + 1) * n..(i + 2) * n];
        let b2 = &b[(i + 2) * n..(i + 3) * n];
        let b3 = &b[(i + 3) * n..(i + 4) * n];
        for kk in 0..k {
            let a0 = a[i * k + kk];
            let a1 = a[(i + 1) * k + kk];
            let a2 = a[(i + 2) * k + kk];
            let a3 = a[(i + 3) * k + kk];
            let c_row = &mut c[kk * n..(kk + 1) * n];
            for j in 0..n {
                // fixed i-ascending order per element
                c_row[j] = ((c_row[j] + a0 * b0[j]) + a1 * b1[j]) + (a2 * b2[j]) + (a3 * b3[j]);
            }
        }
    }
    for i in blocks * 4..m {
        let b_row = &b[i * n..(i + 1) * n];
        for kk in 0..k {
            let aik = a[i * k + kk];
            if aik == 0.0 {
                continue;
            }
            let c_row = &mut c[kk * n..(kk + 1) * n];
            for (cj, bj) in c_row.iter_mut().zip(b_row.iter()) {
                *cj += aik * bj;
            }
        }
    }
    c
}

// ── convolution ──────────────────────────────────────────────────────

/// Output extent of a convolution; the stride must divide exactly.
pub fn conv_out_extent(input: usize, kernel: usize, stride: usize, padding: usize) -> Result<usize> {
    let padded = input + 2 * padding;
    if padded < kernel {
        return Err(Error::Config(format!(
            "kernel {kernel} larger than padded input {padded}"
        )));
    }
    let span = padded - kernel;
    if span % stride != 0 {
        return Err(Error::Config(format!(
            "non-integral conv output extent: ({input} + 2*{padding} - {kernel}) not divisible by stride {stride}"
        )));
    }
    Ok(span / stride + 1)
}

/// Unfold one image `[c,h,w]` into a `[c*kh*kw, oh*ow]` patch matrix.
/// Out-of-bounds positions are zero (zero padding).
#[allow(clippy::too_many_arguments)]
pub fn im2col(
    x: &[f32],
    c: usize,
    h: usize,
    w: usize,
    kh: usize,
    kw: usize,
    stride: usize,
    padding: usize,
    oh: usize,
    ow: usize,
    col: &mut [f32],
) {
    let patch = oh * ow;
    debug_assert_eq!(col.len(), c * kh * kw * patch);
    let mut row = 0;
    for ci in 0..c {
        let plane = &x[ci * h * w..(ci + 1) * h * w];
        for ky in 0..kh {
            for kx in 0..kw {
                let dst = &mut col[row * patch..(row + 1) * patch];
                row += 1;
                for oy in 0..oh {
                    let iy = (oy * stride + ky) as isize - padding as isize;
                    let dst_row = &mut dst[oy * ow..(oy + 1) * ow];
                    if iy < 0 || iy >= h as isize {
                        dst_row.fill(0.0);
                        continue;
                    }
                    let iy = iy as usize;
                    for (ox, d) in dst_row.iter_mut().enumerate() {
                        let ix = (ox * stride + kx) as isize - padding as isize;
                        *d = if ix < 0 || ix >= w as isize {
                            0.0
                        } else {
                            plane[iy * w + ix as usize]
                        };
                    }
                }
            }
        }
    }
}

/// Transposed unfold: `[oh*ow, c*kh*kw]` — one contiguous row per output
/// position. Preferable when the spatial map is small and `c*kh*kw` large.
#[allow(clippy::too_many_arguments)]
pub fn im2col_t(
    x: &[f32],
    c: usize,
    h: usize,
    w: usize,
    kh: usize,
    kw: usize,
    stride: usize,
    padding: usize,
    oh: usize,
    ow: usize,
    col_t: &mut [f32],
) {
    let krows = c * kh * kw;
    debug_assert_eq!(col_t.len(), oh * ow * krows);
    for oy in 0..oh {
        for ox in 0..ow {
            let dst = &mut col_t[(oy * ow + ox) * krows..(oy * ow + ox + 1) * krows];
            let mut i = 0;
            for ci in 0..c {
                let plane = &x[ci * h * w..(ci + 1) * h * w];
                for ky in 0..kh {
                    let iy = (oy * stride + ky) as isize - padding as isize;
                    for kx in 0..kw {
                        let ix = (ox * stride + kx) as isize - padding as isize;
                        dst[i] = if iy < 0 || iy >= h as isize || ix < 0 || ix >= w as isize {
                            0.0
                        } else {
                            plane[iy as usize * w + ix as usize]
                        };
                        i += 1;
                    }
                }
            }
        }
    }
}

/// Fold a transposed patch-gradient matrix `[oh*ow, c*kh*kw]` back into
/// `[c,h,w]`, accumulating overlaps.
#[allow(clippy::too_many_arguments)]
pub fn col2im_t(
    col_t: &[f32],
    c: usize,
    h: usize,
    w: usize,
    kh: usize,
    kw: usize,
    stride: usize,
    padding: usize,
    oh: usize,
    ow: usize,
    x: &mut [f32],
) {
    let krows = c * kh * kw;
    for oy in 0..oh {
        for ox in 0..ow {
            let src = &col_t[(oy * ow + ox) * krows..(oy * ow + ox + 1) * krows];
            let mut i = 0;
            for ci in 0..c {
                let plane_off = ci * h * w;
                for ky in 0..kh {
                    let iy = (oy * stride + ky) as isize - padding as isize;
                    for kx in 0..kw {
                        let ix = (ox * stride + kx) as isize - padding as isize;
                        if iy >= 0 && iy < h as isize && ix >= 0 && ix < w as isize {
                            x[plane_off + iy as usize * w + ix as usize] += src[i];
                        }
                        i += 1;
                    }
                }
            }
        }
    }
}

/// Fold a `[c*kh*kw, oh*ow]` patch-gradient matrix back into `[c,h,w]`,
/// accumulating overlaps.
#[allow(clippy::too_many_arguments)]
pub fn col2im(
    col: &[f32],
    c: usize,
    h: usize,
    w: usize,
    kh: usize,
    kw: usize,
    stride: usize,
    padding: usize,
    oh: usize,
    ow: usize,
    x: &mut [f32],
) {
    let patch = oh * ow;
    let mut row = 0;
    for ci in 0..c {
        let plane = &mut x[ci * h * w..(ci + 1) * h * w];
        for ky in 0..kh {
            for kx in 0..kw {
                let src = &col[row * patch..(row + 1) * patch];
                row += 1;
                for oy in 0..oh {
                    let iy = (oy * stride + ky) as isize - padding as isize;
                    if iy < 0 || iy >= h as isize {
                        continue;
                    }
                    let iy = iy as usize;
                    for ox in 0..ow {
                        let ix = (ox * stride + kx) as isize - padding as isize;
                        if ix < 0 || ix >= w as isize {
                            continue;
                        }
                        plane[iy * w + ix as usize] += src[oy * ow + ox];
                    }
                }
            }
        }
    }
}

/// Below this spatial-map size the transposed patch layout wins: its inner
/// loops run over the (large) kernel rows instead of the (tiny) map.
const SMALL_PATCH: usize = 32;

/// Cross-correlation forward over a batch: x `[n,c,h,w]`, weight
/// `[oc,c,kh,kw]`, bias `[oc]` → `[n,oc,oh,ow]`.
#[allow(clippy::too_many_arguments)]
pub fn conv2d_forward(
    x: &[f32],
    n: usize,
    c: usize,
    h: usize,
    w: usize,
    weight: &[f32],
    bias: &[f32],
    oc: usize,
    kh: usize,
    kw: usize,
    stride: usize,
    padding: usize,
    oh: usize,
    ow: usize,
) -> Vec<f32> {
    let patch = oh * ow;
    let krows = c * kh * kw;
    let mut out = vec![0.0f32; n * oc * patch];
    let mut col = vec![0.0f32; krows * patch];
    let transposed = patch < SMALL_PATCH;
    for img in 0..n {
        let xi = &x[img * c * h * w..(img + 1) * c * h * w];
        let y = if transposed {
            im2col_t(xi, c, h, w, kh, kw, stride, padding, oh, ow, &mut col);
            matmul_nt(weight, &col, oc, krows, patch)
        } else {
            im2col(xi, c, h, w, kh, kw, stride, padding, oh, ow, &mut col);
            matmul(weight, &col, oc, krows, patch)
        };
        let dst = &mut out[img * oc * patch..(img + 1) * oc * patch];
        dst.copy_from_slice(&y);
        for (ocid, chunk) in dst.chunks_exact_mut(patch).enumerate() {
            let b = bias[ocid];
            for v in chunk {
                *v += b;
            }
        }
    }
    out
}

/// Backward of [`conv2d_forward`]; returns (dx, dweight, dbias).
#[allow(clippy::too_many_arguments)]
pub fn conv2d_backward(
    x: &[f32],
    n: usize,
    c: usize,
    h: usize,
    w: usize,
    weight: &[f32],
    oc: usize,
    kh: usize,
    kw: usize,
    stride: usize,
    padding: usize,
    oh: usize,
    ow: usize,
    dout: &[f32],
) -> (Vec<f32>, Vec<f32>, Vec<f32>) {
    let patch = oh * ow;
    let krows = c * kh * kw;
    let mut dx = vec![0.0f32; n * c * h * w];
    let mut dw = vec![0.0f32; oc * krows];
    let mut db = vec![0.0f64; oc];
    let mut col = vec![0.0f32; krows * patch];
    let transposed = patch < SMALL_PATCH;
    for img in 0..n {
        let dy = &dout[img * oc * patch..(img + 1) * oc * patch];
        let xi = &x[img * c * h * w..(img + 1) * c * h * w];
        let dxi = &mut dx[img * c * h * w..(img + 1) * c * h * w];
        if transposed {
            // dXᵀcol = dYᵀ·W, then fold; dW += dY·colᵀ with col in
            // transposed layout
            let dcol_t = matmul_tn(dy, weight, oc, patch, krows);
            col2im_t(&dcol_t, c, h, w, kh, kw, stride, padding, oh, ow, dxi);
            im2col_t(xi, c, h, w, kh, kw, stride, padding, oh, ow, &mut col);
            let dwi = matmul(dy, &col, oc, patch, krows);
            for (acc, v) in dw.iter_mut().zip(dwi.iter()) {
                *acc += v;
            }
        } else {
            let dcol = matmul_tn(weight, dy, oc, krows, patch);
            col2im(&dcol, c, h, w, kh, kw, stride, padding, oh, ow, dxi);
            im2col(xi, c, h, w, kh, kw, stride, padding, oh, ow, &mut col);
            let dwi = matmul_nt(dy, &col, oc, patch, krows);
            for (acc, v) in dw.iter_mut().zip(dwi.iter()) {
                *acc += v;
            }
        }
        for ocid in 0..oc {
            let mut s = 0.0f64;
            for v in &dy[ocid * patch..(ocid + 1) * patch] {
                s += *v as f64;
            }
            db[ocid] += s;
        }
    }
    let db = db.into_iter().map(|v| v as f32).collect();
    (dx, dw, db)
}

// ── pooling ──────────────────────────────────────────────────────────

/// Output extent of an unpadded pooling window (floor division).
pub fn pool_out_extent(input: usize, kernel: usize, stride: usize) -> Result<usize> {
    if kernel > input {
        return Err(Error::Config(format!(
            "pooling kernel {kernel} larger than input extent {input}"
        )));
    }
    Ok((input - kernel) / stride + 1)
}

/// Window-mean pooling over `[n,c,h,w]`.
#[allow(clippy::too_many_arguments)]
pub fn avg_pool_forward(
    x: &[f32],
    n: usize,
    c: usize,
    h: usize,
    w: usize,
    k: usize,
    s: usize,
    oh: usize,
    ow: usize,
) -> Vec<f32> {
    let planes = n * c;
    let inv = 1.0f32 / (k * k) as f32;
    let mut out = vec![0.0f32; planes * oh * ow];
    for p in 0..planes {
        let src = &x[p * h * w..(p + 1) * h * w];
        let dst = &mut out[p * oh * ow..(p + 1) * oh * ow];
        for oy in 0..oh {
            for ox in 0..ow {
                let mut acc = 0.0f32;
                for ky in 0..k {
                    let row = (oy * s + ky) * w + ox * s;
                    for v in &src[row..row + k] {
                        acc += v;
                    }
                }
                dst[oy * ow + ox] = acc * inv;
            }
        }
    }
    out
}

#[allow(clippy::too_many_arguments)]
pub fn avg_pool_backward(
    dout: &[f32],
    n: usize,
    c: usize,
    h: usize,
    w: usize,
    k: usize,
    s: usize,
    oh: usize,
    ow: usize,
) -> Vec<f32> {
    let planes = n * c;
    let inv = 1.0f32 / (k * k) as f32;
    let mut dx = vec![0.0f32; planes * h * w];
    for p in 0..planes {
        let dsrc = &dout[p * oh * ow..(p + 1) * oh * ow];
        let ddst = &mut dx[p * h * w..(p + 1) * h * w];
        for oy in 0..oh {
            for ox in 0..ow {
                let g = dsrc[oy * ow + ox] * inv;
                for ky in 0..k {
                    let row = (oy * s + ky) * w + ox * s;
                    for v in &mut ddst[row..row + k] {
                        *v += g;
                    }
                }
            }
        }
    }
    dx
}

/// Window-max pooling; `argmax` receives the flat input index of each
/// window's maximum (first occurrence in row-major scan wins ties).
#[allow(clippy::too_many_arguments)]
pub fn max_pool_forward(
    x: &[f32],
    n: usize,
    c: usize,
    h: usize,
    w: usize,
    k: usize,
    s: usize,
    oh: usize,
    ow: usize,
    argmax: &mut Vec<u32>,
) -> Vec<f32> {
    let planes = n * c;
    let mut out = vec![0.0f32; planes * oh * ow];
    argmax.clear();
    argmax.resize(planes * oh * ow, 0);
    for p in 0..planes {
        let src = &x[p * h * w..(p + 1) * h * w];
        let base = p * h * w;
        for oy in 0..oh {
            for ox in 0..ow {
                let mut best = f32::NEG_INFINITY;
                let mut best_idx = 0usize;
                for ky in 0..k {
                    let row = (oy * s + ky) * w + ox * s;
                    for (dx_, v) in src[row..row + k].iter().enumerate() {
                        if *v > best {
                            best = *v;
                            best_idx = row + dx_;
                        }
                    }
                }
                out[p * oh * ow + oy * ow + ox] = best;
                argmax[p * oh * ow + oy * ow + ox] = (base + best_idx) as u32;
            }
        }
    }
    out
}

pub fn max_pool_backward(dout: &[f32], argmax: &[u32], input_len: usize) -> Vec<f32> {
    let mut dx = vec![0.0f32; input_len];
    for (g, idx) in dout.iter().zip(argmax.iter()) {
        dx[*idx as usize] += g;
    }
    dx
}

// ── pixel shuffle ────────────────────────────────────────────────────

/// Rearrange `[n, c, h, w]` → `[n, c/r², r·h, r·w]`:
/// out(n, co, y, x) = in(n, co·r² + r·(y mod r) + (x mod r), y/r, x/r).
pub fn pixel_shuffle_forward(
    x: &[f32],
    n: usize,
    c: usize,
    h: usize,
    w: usize,
    r: usize,
) -> Vec<f32> {
    let co = c / (r * r);
    let (ho, wo) = (h * r, w * r);
    let mut out = vec![0.0f32; n * co * ho * wo];
    for img in 0..n {
        for cout in 0..co {
            for y in 0..ho {
                for x_ in 0..wo {
                    let cin = cout * r * r + r * (y % r) + (x_ % r);
                    let v = x[((img * c + cin) * h + y / r) * w + x_ / r];
                    out[((img * co + cout) * ho + y) * wo + x_] = v;
                }
            }
        }
    }
    out
}

/// Inverse rearrangement (also the exact backward, since the op is a permutation).
pub fn pixel_shuffle_backward(
    dout: &[f32],
    n: usize,
    c: usize,
    h: usize,
    w: usize,
    r: usize,
) -> Vec<f32> {
    let co = c / (r * r);
    let (ho, wo) = (h * r, w * r);
    let mut dx = vec![0.0f32; n * c * h * w];
    for img in 0..n {
        for cout in 0..co {
            for y in 0..ho {
                for x_ in 0..wo {
                    let cin = cout * r * r + r * (y % r) + (x_ % r);
                    dx[((img * c + cin) * h + y / r) * w + x_ / r] =
                        dout[((img * co + cout) * ho + y) * wo + x_];
                }
            }
        }
    }
    dx
}

// ── batch normalization ──────────────────────────────────────────────

pub struct BnForward {
    pub y: Vec<f32>,
    pub xhat: Vec<f32>,
    pub mean: Vec<f32>,
    /// Biased per-channel variance of the batch.
    pub var: Vec<f32>,
    pub inv_std: Vec<f32>,
}

/// Training-mode batch norm: normalize by the batch statistics of each
/// channel over (n, h, w), then apply the affine pair.
#[allow(clippy::too_many_arguments)]
pub fn batchnorm_train_forward(
    x: &[f32],
    n: usize,
    c: usize,
    h: usize,
    w: usize,
    gamma: &[f32],
    beta: &[f32],
    eps: f32,
) -> Result<BnForward> {
    let m = n * h * w;
    if m < 2 {
        return Err(Error::DegenerateBatch);
    }
    let hw = h * w;
    let mut mean = vec![0.0f32; c];
    let mut var = vec![0.0f32; c];
    let mut inv_std = vec![0.0f32; c];
    let mut xhat = vec![0.0f32; x.len()];
    let mut y = vec![0.0f32; x.len()];
    for ch in 0..c {
        let mut s = 0.0f64;
        for img in 0..n {
            let plane = &x[(img * c + ch) * hw..(img * c + ch + 1) * hw];
            for v in plane {
                s += *v as f64;
            }
        }
        let mu = s / m as f64;
        let mut vs = 0.0f64;
        for img in 0..n {
            let plane = &x[(img * c + ch) * hw..(img * c + ch + 1) * hw];
            for v in plane {
                let d = *v as f64 - mu;
                vs += d * d;
            }
        }
        let variance = vs / m as f64;
        let istd = 1.0 / (variance + eps as f64).sqrt();
        mean[ch] = mu as f32;
        var[ch] = variance as f32;
        inv_std[ch] = istd as f32;
        let (mu32, istd32) = (mean[ch], inv_std[ch]);
        let (g, b) = (gamma[ch], beta[ch]);
        for img in 0..n {
            let off = (img * c + ch) * hw;
            for i in off..off + hw {
                let xh = (x[i] - mu32) * istd32;
                xhat[i] = xh;
                y[i] = g * xh + b;
            }
        }
    }
    Ok(BnForward {
        y,
        xhat,
        mean,
        var,
        inv_std,
    })
}

/// Backward of training-mode batch norm; returns (dx, dgamma, dbeta).
#[allow(clippy::too_many_arguments)]
pub fn batchnorm_train_backward(
    dout: &[f32],
    xhat: &[f32],
    inv_std: &[f32],
    gamma: &[f32],
    n: usize,
    c: usize,
    h: usize,
    w: usize,
) -> (Vec<f32>, Vec<f32>, Vec<f32>) {
    let m = (n * h * w) as f64;
    let hw = h * w;
    let mut dx = vec![0.0f32; dout.len()];
    let mut dgamma = vec![0.0f32; c];
    let mut dbeta = vec![0.0f32; c];
    for ch in 0..c {
        let mut s1 = 0.0f64; // Σ dy
        let mut s2 = 0.0f64; // Σ dy·x̂
        for img in 0..n {
            let off = (img * c + ch) * hw;
            for i in off..off + hw {
                s1 += dout[i] as f64;
                s2 += dout[i] as f64 * xhat[i] as f64;
            }
        }
        dgamma[ch] = s2 as f32;
        dbeta[ch] = s1 as f32;
        let k = gamma[ch] as f64 * inv_std[ch] as f64;
        let (m1, m2) = (s1 / m, s2 / m);
        for img in 0..n {
            let off = (img * c + ch) * hw;
            for i in off..off + hw {
                dx[i] = (k * (dout[i] as f64 - m1 - xhat[i] as f64 * m2)) as f32;
            }
        }
    }
    (dx, dgamma, dbeta)
}

/// Inference-mode batch norm using frozen running statistics.
#[allow(clippy::too_many_arguments)]
pub fn batchnorm_infer_forward(
    x: &[f32],
    n: usize,
    c: usize,
    h: usize,
    w: usize,
    gamma: &[f32],
    beta: &[f32],
    running_mean: &[f32],
    running_var: &[f32],
    eps: f32,
) -> Vec<f32> {
    let hw = h * w;
    let mut y = vec![0.0f32; x.len()];
    for ch in 0..c {
        let istd = 1.0 / (running_var[ch] as f64 + eps as f64).sqrt() as f32;
        let (mu, g, b) = (running_mean[ch], gamma[ch], beta[ch]);
        for img in 0..n {
            let off = (img * c + ch) * hw;
            for i in off..off + hw {
                y[i] = g * (x[i] - mu) * istd + b;
            }
        }
    }
    y
}

// ── global spatial averaging (signature layer) ───────────────────────

/// Per-channel spatial mean: `[n,c,h,w]` → `[n,c]`.
pub fn spatial_mean_forward(x: &[f32], n: usize, c: usize, h: usize, w: usize) -> Vec<f32> {
    let hw = h * w;
    let mut out = vec![0.0f32; n * c];
    for p in 0..n * c {
        let mut s = 0.0f64;
        for v in &x[p * hw..(p + 1) * hw] {
            s += *v as f64;
        }
        out[p] = (s / hw as f64) as f32;
    }
    out
}

pub fn spatial_mean_backward(dout: &[f32], n: usize, c: usize, h: usize, w: usize) -> Vec<f32> {
    let hw = h * w;
    let inv = 1.0f32 / hw as f32;
    let mut dx = vec![0.0f32; n * c * hw];
    for p in 0..n * c {
        let g = dout[p] * inv;
        for v in &mut dx[p * hw..(p + 1) * hw] {
            *v = g;
        }
    }
    dx
}

// ── softmax family ───────────────────────────────────────────────────

/// Row-wise log-softmax with max-subtraction, computed in f64.
pub fn log_softmax_rows(x: &[f32], rows: usize, cols: usize) -> Vec<f32> {
    let mut out = vec![0.0f32; x.len()];
    for r in 0..rows {
        let row = &x[r * cols..(r + 1) * cols];
        let mx = row.iter().copied().fold(f64::NEG_INFINITY, |a, v| a.max(v as f64));
        let mut denom = 0.0f64;
        for v in row {
            denom += (*v as f64 - mx).exp();
        }
        let log_denom = denom.ln();
        for (o, v) in out[r * cols..(r + 1) * cols].iter_mut().zip(row.iter()) {
            *o = ((*v as f64 - mx) - log_denom) as f32;
        }
    }
    out
}

/// Row-wise softmax with max-subtraction, computed in f64.
pub fn softmax_rows(x: &[f32], rows: usize, cols: usize) -> Vec<f32> {
    let mut out = vec![0.0f32; x.len()];
    for r in 0..rows {
        let row = &x[r * cols..(r + 1) * cols];
        let mx = row.iter().copied().fold(f64::NEG_INFINITY, |a, v| a.max(v as f64));
        let mut denom = 0.0f64;
        let mut exps = vec![0.0f64; cols];
        for (e, v) in exps.iter_mut().zip(row.iter()) {
            *e = (*v as f64 - mx).exp();
            denom += *e;
        }
        for (o, e) in out[r * cols..(r + 1) * cols].iter_mut().zip(exps.iter()) {
            *o = (e / denom) as f32;
        }
    }
    out
}

// ── SSIM ─────────────────────────────────────────────────────────────

/// Normalized 2-D Gaussian window, row-major `size × size`, weights sum to 1.
pub fn gaussian_window(size: usize, sigma: f64) -> Vec<f64> {
    let c = (size as f64 - 1.0) / 2.0;
    let mut win = vec![0.0f64; size * size];
    let mut total = 0.0f64;
    for y in 0..size {
        for x in 0..size {
            let dy = y as f64 - c;
            let dx = x as f64 - c;
            let v = (-(dx * dx + dy * dy) / (2.0 * sigma * sigma)).exp();
            win[y * size + x] = v;
            total += v;
        }
    }
    for v in &mut win {
        *v /= total;
    }
    win
}

struct WindowMoments {
    mu_a: f64,
    mu_b: f64,
    var_a: f64,
    var_b: f64,
    cov: f64,
}

#[allow(clippy::too_many_arguments)]
fn window_moments(
    a: &[f32],
    b: &[f32],
    w: usize,
    y0: usize,
    x0: usize,
    win: &[f64],
    ws: usize,
) -> WindowMoments {
    let mut mu_a = 0.0f64;
    let mut mu_b = 0.0f64;
    for ky in 0..ws {
        let row = (y0 + ky) * w + x0;
        let wrow = &win[ky * ws..(ky + 1) * ws];
        for kx in 0..ws {
            mu_a += wrow[kx] * a[row + kx] as f64;
            mu_b += wrow[kx] * b[row + kx] as f64;
        }
    }
    // centered second moments: robust against cancellation for
    // near-constant windows
    let mut var_a = 0.0f64;
    let mut var_b = 0.0f64;
    let mut cov = 0.0f64;
    for ky in 0..ws {
        let row = (y0 + ky) * w + x0;
        let wrow = &win[ky * ws..(ky + 1) * ws];
        for kx in 0..ws {
            let da = a[row + kx] as f64 - mu_a;
            let db = b[row + kx] as f64 - mu_b;
            var_a += wrow[kx] * da * da;
            var_b += wrow[kx] * db * db;
            cov += wrow[kx] * da * db;
        }
    }
    WindowMoments {
        mu_a,
        mu_b,
        var_a,
        var_b,
        cov,
    }
}

/// Mean of the valid-window SSIM map over every image of a batch of
/// single-channel images laid out `[n, h*w]`.
#[allow(clippy::too_many_arguments)]
pub fn ssim_mean(
    a: &[f32],
    b: &[f32],
    n: usize,
    h: usize,
    w: usize,
    win: &[f64],
    ws: usize,
    c1: f64,
    c2: f64,
) -> f64 {
    let (oh, ow) = (h - ws + 1, w - ws + 1);
    let mut total = 0.0f64;
    for img in 0..n {
        let ai = &a[img * h * w..(img + 1) * h * w];
        let bi = &b[img * h * w..(img + 1) * h * w];
        for y0 in 0..oh {
            for x0 in 0..ow {
                let m = window_moments(ai, bi, w, y0, x0, win, ws);
                let a1 = 2.0 * m.mu_a * m.mu_b + c1;
                let a2 = 2.0 * m.cov + c2;
                let b1 = m.mu_a * m.mu_a + m.mu_b * m.mu_b + c1;
                let b2 = m.var_a + m.var_b + c2;
                total += (a1 * a2) / (b1 * b2);
            }
        }
    }
    total / (n * oh * ow) as f64
}

/// Gradients of [`ssim_mean`] with respect to both inputs, scaled by `dout`.
#[allow(clippy::too_many_arguments)]
pub fn ssim_backward(
    a: &[f32],
    b: &[f32],
    n: usize,
    h: usize,
    w: usize,
    win: &[f64],
    ws: usize,
    c1: f64,
    c2: f64,
    dout: f64,
) -> (Vec<f32>, Vec<f32>) {
    let (oh, ow) = (h - ws + 1, w - ws + 1);
    let scale = dout / (n * oh * ow) as f64;
    let mut da = vec![0.0f64; a.len()];
    let mut db = vec![0.0f64; b.len()];
    for img in 0..n {
        let base = img * h * w;
        let ai = &a[base..base + h * w];
        let bi = &b[base..base + h * w];
        for y0 in 0..oh {
            for x0 in 0..ow {
                let m = window_moments(ai, bi, w, y0, x0, win, ws);
                let a1 = 2.0 * m.mu_a * m.mu_b + c1;
                let a2 = 2.0 * m.cov + c2;
                let b1 = m.mu_a * m.mu_a + m.mu_b * m.mu_b + c1;
                let b2 = m.var_a + m.var_b + c2;
                let denom = b1 * b2;
                let s = (a1 * a2) / denom;
                for ky in 0..ws {
                    let row = (y0 + ky) * w + x0;
                    let wrow = &win[ky * ws..(ky + 1) * ws];
                    for kx in 0..ws {
                        let wi = wrow[kx];
                        let dev_a = ai[row + kx] as f64 - m.mu_a;
                        let dev_b = bi[row + kx] as f64 - m.mu_b;
                        let ds_da = wi
                            * ((2.0 * m.mu_b * a2 + 2.0 * dev_b * a1) / denom
                                - s * (2.0 * m.mu_a / b1 + 2.0 * dev_a / b2));
                        let ds_db = wi
                            * ((2.0 * m.mu_a * a2 + 2.0 * dev_a * a1) / denom
                                - s * (2.0 * m.mu_b / b1 + 2.0 * dev_b / b2));
                        da[base + row + kx] += scale * ds_da;
                        db[base + row + kx] += scale * ds_db;
                    }
                }
            }
        }
    }
    (
        da.into_iter().map(|v| v as f32).collect(),
        db.into_iter().map(|v| v as f32).collect(),
    )
}
