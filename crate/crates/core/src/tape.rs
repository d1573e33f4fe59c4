//! Reverse-mode automatic differentiation on a recording tape.
//!
//! A [`Tape`] owns every value produced during one forward pass. Operations
//! append nodes (and, in training mode, backward records) in execution
//! order, which is already a topological order: replaying the records in
//! reverse propagates gradients from a scalar loss to every parameter leaf.
//! A tape is single-use — [`Tape::backward`] consumes the recording and a
//! second call is a state error.

use std::collections::HashMap;

use crate::error::{Error, Result};
use crate::kernels;
use crate::tensor::{Tensor, TensorId};

/// Handle to a value on the tape.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Var(usize);

/// How the right operand of a binary op is broadcast over the left.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Broadcast {
    /// Identical shapes.
    Same,
    /// Left operand is a scalar.
    ScalarLhs,
    /// Right operand is a scalar.
    ScalarRhs,
    /// Left is `[n,c,h,w]`, right is per-channel `[c]`.
    ChanRhs { chan: usize, plane: usize },
    /// Left is `[n,k]`, right is a row vector `[k]`.
    RowRhs { cols: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum BinKind {
    Add,
    Sub,
    Mul,
    Div,
}

/// Saved SSIM call configuration (window is shared per call).
#[derive(Debug, Clone)]
struct SsimSaved {
    n: usize,
    h: usize,
    w: usize,
    window: std::sync::Arc<Vec<f64>>,
    wsize: usize,
    c1: f64,
    c2: f64,
}

#[derive(Debug, Clone)]
enum Op {
    Matmul {
        a: usize,
        b: usize,
    },
    Conv2d {
        x: usize,
        w: usize,
        b: usize,
        stride: usize,
        padding: usize,
    },
    BatchNormTrain {
        x: usize,
        gamma: usize,
        beta: usize,
        xhat: Tensor,
        inv_std: Vec<f32>,
    },
    MaxPool {
        x: usize,
        argmax: Vec<u32>,
    },
    AvgPool {
        x: usize,
        k: usize,
        s: usize,
    },
    PixelShuffle {
        x: usize,
        r: usize,
    },
    Relu {
        x: usize,
    },
    Binary {
        kind: BinKind,
        a: usize,
        b: usize,
        bc: Broadcast,
    },
    Sqrt {
        x: usize,
    },
    MeanAll {
        x: usize,
    },
    SumAll {
        x: usize,
    },
    Scale {
        x: usize,
        c: f32,
    },
    Clamp01 {
        x: usize,
    },
    SpatialMean {
        x: usize,
    },
    LogSoftmax {
        x: usize,
        cols: usize,
    },
    Softmax {
        x: usize,
        cols: usize,
    },
    NllMean {
        logp: usize,
        labels: Vec<usize>,
    },
    Ssim {
        a: usize,
        b: usize,
        saved: SsimSaved,
    },
    Reshape {
        x: usize,
    },
}

struct Node {
    value: Tensor,
    requires_grad: bool,
    param_id: Option<TensorId>,
}

/// Gradients produced by one backward pass.
#[derive(Debug)]
pub struct Gradients {
    by_node: Vec<Option<Tensor>>,
    by_param: HashMap<TensorId, usize>,
}

impl Gradients {
    /// Gradient of the loss with respect to a parameter tensor (by identity).
    pub fn get(&self, param: &Tensor) -> Option<&Tensor> {
        self.by_param
            .get(&param.id())
            .and_then(|&idx| self.by_node[idx].as_ref())
    }

    /// Gradient with respect to any tape variable, when one flowed to it.
    pub fn wrt(&self, var: Var) -> Option<&Tensor> {
        self.by_node.get(var.0).and_then(|g| g.as_ref())
    }
}

/// Recording tape; see module docs.
pub struct Tape {
    training: bool,
    nodes: Vec<Node>,
    steps: Vec<(usize, Op)>,
    param_cache: HashMap<TensorId, usize>,
    consumed: bool,
}

impl Tape {
    /// A tape that records backward rules and tracks parameter gradients.
    pub fn training() -> Self {
        Tape {
            training: true,
            nodes: Vec::new(),
            steps: Vec::new(),
            param_cache: HashMap::new(),
            consumed: false,
        }
    }

    /// A tape that only evaluates forward; `backward` on it is an error.
    pub fn inference() -> Self {
        Tape {
            training: false,
            nodes: Vec::new(),
            steps: Vec::new(),
            param_cache: HashMap::new(),
            consumed: false,
        }
    }

    pub fn is_training(&self) -> bool {
        self.training
    }

    pub fn value(&self, v: Var) -> &Tensor {
        &self.nodes[v.0].value
    }

    /// Register an input that never needs a gradient.
    pub fn input(&mut self, t: &Tensor) -> Var {
        self.push_node(t.clone(), false, None)
    }

    /// Register a trainable parameter leaf. Repeated registration of the
    /// same tensor (by identity) returns the same variable, so gradients
    /// from multiple uses accumulate.
    pub fn param(&mut self, t: &Tensor) -> Var {
        if let Some(&idx) = self.param_cache.get(&t.id()) {
            return Var(idx);
        }
        let requires = self.training;
        let v = self.push_node(t.clone(), requires, Some(t.id()));
        self.param_cache.insert(t.id(), v.0);
        v
    }

    fn push_node(&mut self, value: Tensor, requires_grad: bool, param_id: Option<TensorId>) -> Var {
        self.nodes.push(Node {
            value,
            requires_grad,
            param_id,
        });
        Var(self.nodes.len() - 1)
    }

    fn push_op(&mut self, value: Tensor, inputs: &[usize], op: Op) -> Var {
        let requires = self.training && inputs.iter().any(|&i| self.nodes[i].requires_grad);
        let out = self.push_node(value, requires, None);
        if requires {
            self.steps.push((out.0, op));
        }
        out
    }

    // ── linear algebra ───────────────────────────────────────────────

    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var> {
        let (m, ka) = self.value(a).dims2()?;
        let (kb, n) = self.value(b).dims2()?;
        if ka != kb {
            return Err(Error::ShapeMismatch {
                op: "matmul",
                left: self.value(a).shape().to_vec(),
                right: self.value(b).shape().to_vec(),
            });
        }
        let y = kernels::matmul(self.value(a).data(), self.value(b).data(), m, ka, n);
        let t = Tensor::from_vec(vec![m, n], y)?;
        Ok(self.push_op(t, &[a.0, b.0], Op::Matmul { a: a.0, b: b.0 }))
    }

    /// Affine layer: `x·w + bias` with `x: [n,in]`, `w: [in,out]`, `bias: [out]`.
    pub fn linear(&mut self, x: Var, w: &Tensor, bias: &Tensor) -> Result<Var> {
        let wv = self.param(w);
        let bv = self.param(bias);
        let y = self.matmul(x, wv)?;
        self.add(y, bv)
    }

    // ── convolution / normalization / pooling ────────────────────────

    pub fn conv2d(
        &mut self,
        x: Var,
        weight: &Tensor,
        bias: &Tensor,
        stride: usize,
        padding: usize,
    ) -> Result<Var> {
        if stride == 0 {
            return Err(Error::Config("conv stride must be >= 1".into()));
        }
        let (n, c, h, w) = self.value(x).dims4()?;
        let wshape = weight.shape().to_vec();
        let (oc, ic, kh, kw) = match wshape.as_slice() {
            &[oc, ic, kh, kw] => (oc, ic, kh, kw),
            _ => {
                return Err(Error::Contract(format!(
                    "conv weight must be 4-D, got {wshape:?}"
                )))
            }
        };
        if ic != c {
            return Err(Error::ShapeMismatch {
                op: "conv2d",
                left: self.value(x).shape().to_vec(),
                right: wshape,
            });
        }
        if bias.shape() != [oc] {
            return Err(Error::ShapeMismatch {
                op: "conv2d bias",
                left: vec![oc],
                right: bias.shape().to_vec(),
            });
        }
        let oh = kernels::conv_out_extent(h, kh, stride, padding)?;
        let ow = kernels::conv_out_extent(w, kw, stride, padding)?;
        let wv = self.param(weight);
        let bv = self.param(bias);
        let y = kernels::conv2d_forward(
            self.value(x).data(),
            n,
            c,
            h,
            w,
            weight.data(),
            bias.data(),
            oc,
            kh,
            kw,
            stride,
            padding,
            oh,
            ow,
        );
        let t = Tensor::from_vec(vec![n, oc, oh, ow], y)?;
        Ok(self.push_op(
            t,
            &[x.0, wv.0, bv.0],
            Op::Conv2d {
                x: x.0,
                w: wv.0,
                b: bv.0,
                stride,
                padding,
            },
        ))
    }

    /// Training-mode batch norm. Returns the output along with the batch
    /// mean and (biased) variance so the caller can update running stats.
    pub fn batchnorm_train(
        &mut self,
        x: Var,
        gamma: &Tensor,
        beta: &Tensor,
        eps: f32,
    ) -> Result<(Var, Vec<f32>, Vec<f32>)> {
        let (n, c, h, w) = self.value(x).dims4()?;
        if gamma.shape() != [c] || beta.shape() != [c] {
            return Err(Error::ShapeMismatch {
                op: "batchnorm",
                left: vec![c],
                right: gamma.shape().to_vec(),
            });
        }
        let fwd = kernels::batchnorm_train_forward(
            self.value(x).data(),
            n,
            c,
            h,
            w,
            gamma.data(),
            beta.data(),
            eps,
        )?;
        let gv = self.param(gamma);
        let bv = self.param(beta);
        let xhat = Tensor::from_vec(vec![n, c, h, w], fwd.xhat)?;
        let t = Tensor::from_vec(vec![n, c, h, w], fwd.y)?;
        let out = self.push_op(
            t,
            &[x.0, gv.0, bv.0],
            Op::BatchNormTrain {
                x: x.0,
                gamma: gv.0,
                beta: bv.0,
                xhat,
                inv_std: fwd.inv_std,
            },
        );
        Ok((out, fwd.mean, fwd.var))
    }

    /// Inference-mode batch norm with frozen statistics (not differentiable
    /// through this path; recorded tapes are for training mode).
    pub fn batchnorm_infer(
        &mut self,
        x: Var,
        gamma: &Tensor,
        beta: &Tensor,
        running_mean: &Tensor,
        running_var: &Tensor,
        eps: f32,
    ) -> Result<Var> {
        let (n, c, h, w) = self.value(x).dims4()?;
        if gamma.shape() != [c] {
            return Err(Error::ShapeMismatch {
                op: "batchnorm",
                left: vec![c],
                right: gamma.shape().to_vec(),
            });
        }
        let y = kernels::batchnorm_infer_forward(
            self.value(x).data(),
            n,
            c,
            h,
            w,
            gamma.data(),
            beta.data(),
            running_mean.data(),
            running_var.data(),
            eps,
        );
        let t = Tensor::from_vec(vec![n, c, h, w], y)?;
        if self.training {
            return Err(Error::State(
                "inference-mode batch norm is not recordable on a training tape".into(),
            ));
        }
        Ok(self.push_node(t, false, None))
    }

    pub fn max_pool(&mut self, x: Var, k: usize, s: usize) -> Result<Var> {
        if k == 0 || s == 0 {
            return Err(Error::Config("pool kernel and stride must be >= 1".into()));
        }
        let (n, c, h, w) = self.value(x).dims4()?;
        let oh = kernels::pool_out_extent(h, k, s)?;
        let ow = kernels::pool_out_extent(w, k, s)?;
        let mut argmax = Vec::new();
        let y = kernels::max_pool_forward(
            self.value(x).data(),
            n,
            c,
            h,
            w,
            k,
            s,
            oh,
            ow,
            &mut argmax,
        );
        let t = Tensor::from_vec(vec![n, c, oh, ow], y)?;
        Ok(self.push_op(t, &[x.0], Op::MaxPool { x: x.0, argmax }))
    }

    /// Window-mean (energy-preserving) pooling.
    pub fn avg_pool(&mut self, x: Var, k: usize, s: usize) -> Result<Var> {
        if k == 0 || s == 0 {
            return Err(Error::Config("pool kernel and stride must be >= 1".into()));
        }
        let (n, c, h, w) = self.value(x).dims4()?;
        let oh = kernels::pool_out_extent(h, k, s)?;
        let ow = kernels::pool_out_extent(w, k, s)?;
        let y = kernels::avg_pool_forward(self.value(x).data(), n, c, h, w, k, s, oh, ow);
        let t = Tensor::from_vec(vec![n, c, oh, ow], y)?;
        Ok(self.push_op(t, &[x.0], Op::AvgPool { x: x.0, k, s }))
    }

    pub fn pixel_shuffle(&mut self, x: Var, r: usize) -> Result<Var> {
        let (n, c, h, w) = self.value(x).dims4()?;
        if r == 0 || c % (r * r) != 0 {
            return Err(Error::Config(format!(
                "pixel shuffle needs channels divisible by r^2: c={c}, r={r}"
            )));
        }
        let y = kernels::pixel_shuffle_forward(self.value(x).data(), n, c, h, w, r);
        let t = Tensor::from_vec(vec![n, c / (r * r), h * r, w * r], y)?;
        Ok(self.push_op(t, &[x.0], Op::PixelShuffle { x: x.0, r }))
    }

    /// Per-channel global spatial mean: `[n,c,h,w]` → `[n,c]`.
    pub fn spatial_mean(&mut self, x: Var) -> Result<Var> {
        let (n, c, h, w) = self.value(x).dims4()?;
        let y = kernels::spatial_mean_forward(self.value(x).data(), n, c, h, w);
        let t = Tensor::from_vec(vec![n, c], y)?;
        Ok(self.push_op(t, &[x.0], Op::SpatialMean { x: x.0 }))
    }

    // ── elementwise ──────────────────────────────────────────────────

    pub fn relu(&mut self, x: Var) -> Result<Var> {
        let v = self.value(x);
        let y: Vec<f32> = v.data().iter().map(|&a| a.max(0.0)).collect();
        let t = Tensor::from_vec(v.shape().to_vec(), y)?;
        Ok(self.push_op(t, &[x.0], Op::Relu { x: x.0 }))
    }

    pub fn sqrt(&mut self, x: Var) -> Result<Var> {
        let v = self.value(x);
        let y: Vec<f32> = v.data().iter().map(|&a| a.sqrt()).collect();
        let t = Tensor::from_vec(v.shape().to_vec(), y)?;
        Ok(self.push_op(t, &[x.0], Op::Sqrt { x: x.0 }))
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        self.binary(BinKind::Add, a, b)
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var> {
        self.binary(BinKind::Sub, a, b)
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        self.binary(BinKind::Mul, a, b)
    }

    pub fn div(&mut self, a: Var, b: Var) -> Result<Var> {
        self.binary(BinKind::Div, a, b)
    }

    pub fn scale(&mut self, x: Var, c: f32) -> Result<Var> {
        let v = self.value(x);
        let y: Vec<f32> = v.data().iter().map(|&a| a * c).collect();
        let t = Tensor::from_vec(v.shape().to_vec(), y)?;
        Ok(self.push_op(t, &[x.0], Op::Scale { x: x.0, c }))
    }

    pub fn clamp01(&mut self, x: Var) -> Result<Var> {
        let v = self.value(x);
        let y: Vec<f32> = v.data().iter().map(|&a| a.clamp(0.0, 1.0)).collect();
        let t = Tensor::from_vec(v.shape().to_vec(), y)?;
        Ok(self.push_op(t, &[x.0], Op::Clamp01 { x: x.0 }))
    }

    pub fn mean(&mut self, x: Var) -> Result<Var> {
        let v = self.value(x);
        let mut s = 0.0f64;
        for a in v.data() {
            s += *a as f64;
        }
        let t = Tensor::scalar((s / v.numel() as f64) as f32);
        Ok(self.push_op(t, &[x.0], Op::MeanAll { x: x.0 }))
    }

    pub fn sum(&mut self, x: Var) -> Result<Var> {
        let v = self.value(x);
        let mut s = 0.0f64;
        for a in v.data() {
            s += *a as f64;
        }
        let t = Tensor::scalar(s as f32);
        Ok(self.push_op(t, &[x.0], Op::SumAll { x: x.0 }))
    }

    pub fn reshape(&mut self, x: Var, shape: impl Into<Vec<usize>>) -> Result<Var> {
        let t = self.value(x).reshaped(shape)?;
        Ok(self.push_op(t, &[x.0], Op::Reshape { x: x.0 }))
    }

    /// Flatten `[n, ...]` to `[n, rest]`.
    pub fn flatten(&mut self, x: Var) -> Result<Var> {
        let shape = self.value(x).shape().to_vec();
        if shape.is_empty() {
            return Err(Error::Contract("cannot flatten a rank-0 tensor".into()));
        }
        let n = shape[0];
        let rest: usize = shape[1..].iter().product();
        self.reshape(x, vec![n, rest])
    }

    // ── softmax / losses ─────────────────────────────────────────────

    pub fn log_softmax(&mut self, x: Var) -> Result<Var> {
        let (rows, cols) = self.value(x).dims2()?;
        let y = kernels::log_softmax_rows(self.value(x).data(), rows, cols);
        let t = Tensor::from_vec(vec![rows, cols], y)?;
        Ok(self.push_op(t, &[x.0], Op::LogSoftmax { x: x.0, cols }))
    }

    pub fn softmax(&mut self, x: Var) -> Result<Var> {
        let (rows, cols) = self.value(x).dims2()?;
        let y = kernels::softmax_rows(self.value(x).data(), rows, cols);
        let t = Tensor::from_vec(vec![rows, cols], y)?;
        Ok(self.push_op(t, &[x.0], Op::Softmax { x: x.0, cols }))
    }

    /// Mean negative log-likelihood of per-row log-probabilities.
    pub fn nll_mean(&mut self, logp: Var, labels: &[usize]) -> Result<Var> {
        let (rows, cols) = self.value(logp).dims2()?;
        if labels.len() != rows {
            return Err(Error::Contract(format!(
                "expected {rows} labels, got {}",
                labels.len()
            )));
        }
        if let Some(bad) = labels.iter().find(|&&l| l >= cols) {
            return Err(Error::Contract(format!(
                "label {bad} out of range for {cols} classes"
            )));
        }
        let data = self.value(logp).data();
        let mut s = 0.0f64;
        for (r, &label) in labels.iter().enumerate() {
            s -= data[r * cols + label] as f64;
        }
        let t = Tensor::scalar((s / rows as f64) as f32);
        Ok(self.push_op(
            t,
            &[logp.0],
            Op::NllMean {
                logp: logp.0,
                labels: labels.to_vec(),
            },
        ))
    }

    /// Mean SSIM over all valid windows of a batch of single-channel images.
    /// Accepts `[n,1,h,w]`, `[1,h,w]` or `[h,w]`.
    pub fn ssim(
        &mut self,
        a: Var,
        b: Var,
        window: std::sync::Arc<Vec<f64>>,
        wsize: usize,
        c1: f64,
        c2: f64,
    ) -> Result<Var> {
        let sa = self.value(a).shape().to_vec();
        let sb = self.value(b).shape().to_vec();
        if sa != sb {
            return Err(Error::ShapeMismatch {
                op: "ssim",
                left: sa,
                right: sb,
            });
        }
        let (n, h, w) = match sa.as_slice() {
            &[h, w] => (1, h, w),
            &[n, h, w] => (n, h, w),
            &[n, 1, h, w] => (n, h, w),
            _ => {
                return Err(Error::Contract(format!(
                    "ssim expects single-channel images, got shape {sa:?}"
                )))
            }
        };
        if h < wsize || w < wsize {
            return Err(Error::Config(format!(
                "image {h}x{w} smaller than SSIM window {wsize}"
            )));
        }
        let s = kernels::ssim_mean(
            self.value(a).data(),
            self.value(b).data(),
            n,
            h,
            w,
            &window,
            wsize,
            c1,
            c2,
        );
        let t = Tensor::scalar(s as f32);
        Ok(self.push_op(
            t,
            &[a.0, b.0],
            Op::Ssim {
                a: a.0,
                b: b.0,
                saved: SsimSaved {
                    n,
                    h,
                    w,
                    window,
                    wsize,
                    c1,
                    c2,
                },
            },
        ))
    }

    fn binary(&mut self, kind: BinKind, a: Var, b: Var) -> Result<Var> {
        let sa = self.value(a).shape().to_vec();
        let sb = self.value(b).shape().to_vec();
        let na = self.value(a).numel();
        let nb = self.value(b).numel();
        let bc = if sa == sb {
            Broadcast::Same
        } else if na == 1 {
            Broadcast::ScalarLhs
        } else if nb == 1 {
            Broadcast::ScalarRhs
        } else if sa.len() == 4 && sb.len() == 1 && sb[0] == sa[1] {
            Broadcast::ChanRhs {
                chan: sa[1],
                plane: sa[2] * sa[3],
            }
        } else if sa.len() == 2 && sb.len() == 1 && sb[0] == sa[1] {
            Broadcast::RowRhs { cols: sa[1] }
        } else {
            return Err(Error::ShapeMismatch {
                op: "elementwise",
                left: sa,
                right: sb,
            });
        };
        let (out_shape, out_len) = if matches!(bc, Broadcast::ScalarLhs) {
            (sb, nb)
        } else {
            (sa, na)
        };
        let ad = self.value(a).data();
        let bd = self.value(b).data();
        let mut y = vec![0.0f32; out_len];
        for (i, yv) in y.iter_mut().enumerate() {
            let av = ad[lhs_index(bc, i)];
            let bv = bd[rhs_index(bc, i)];
            *yv = match kind {
                BinKind::Add => av + bv,
                BinKind::Sub => av - bv,
                BinKind::Mul => av * bv,
                BinKind::Div => av / bv,
            };
        }
        let t = Tensor::from_vec(out_shape, y)?;
        Ok(self.push_op(
            t,
            &[a.0, b.0],
            Op::Binary {
                kind,
                a: a.0,
                b: b.0,
                bc,
            },
        ))
    }

    // ── backward ─────────────────────────────────────────────────────

    /// Propagate gradients from a scalar loss back to every parameter.
    /// Consumes the recording; a second call is a state error.
    pub fn backward(&mut self, loss: Var) -> Result<Gradients> {
        if !self.training {
            return Err(Error::State("backward on an inference tape".into()));
        }
        if self.consumed {
            return Err(Error::State("backward on a consumed tape".into()));
        }
        if self.nodes[loss.0].value.numel() != 1 {
            return Err(Error::Contract(format!(
                "backward requires a scalar loss, got shape {:?}",
                self.nodes[loss.0].value.shape()
            )));
        }
        self.consumed = true;

        let mut grads: Vec<Option<Vec<f32>>> = (0..self.nodes.len()).map(|_| None).collect();
        grads[loss.0] = Some(vec![1.0]);

        let steps = std::mem::take(&mut self.steps);
        for (out, op) in steps.into_iter().rev() {
            let Some(dout) = grads[out].take() else {
                continue;
            };
            self.backward_op(&op, &dout, &mut grads);
            // the loss node keeps its seed for inspection
            if out == loss.0 {
                grads[out] = Some(dout);
            }
        }

        let mut by_node: Vec<Option<Tensor>> = Vec::with_capacity(self.nodes.len());
        let mut by_param = HashMap::new();
        for (idx, (node, g)) in self.nodes.iter().zip(grads).enumerate() {
            let tensor = match g {
                Some(buf) => Some(Tensor::from_vec(node.value.shape().to_vec(), buf)?),
                None => None,
            };
            if let Some(pid) = node.param_id {
                by_param.insert(pid, idx);
            }
            by_node.push(tensor);
        }
        Ok(Gradients { by_node, by_param })
    }

    fn accumulate(
        &self,
        grads: &mut [Option<Vec<f32>>],
        node: usize,
        contribution: impl FnOnce() -> Vec<f32>,
    ) {
        if !self.nodes[node].requires_grad {
            return;
        }
        let c = contribution();
        match &mut grads[node] {
            Some(existing) => {
                for (e, v) in existing.iter_mut().zip(c.iter()) {
                    *e += v;
                }
            }
            slot @ None => *slot = Some(c),
        }
    }

    fn backward_op(&self, op: &Op, dout: &[f32], grads: &mut [Option<Vec<f32>>]) {
        match op {
            Op::Matmul { a, b } => {
                let (m, k) = self.nodes[*a].value.dims2().expect("recorded shape");
                let n = self.nodes[*b].value.shape()[1];
                self.accumulate(grads, *a, || {
                    kernels::matmul_nt(dout, self.nodes[*b].value.data(), m, n, k)
                });
                self.accumulate(grads, *b, || {
                    kernels::matmul_tn(self.nodes[*a].value.data(), dout, m, k, n)
                });
            }
            Op::Conv2d {
                x,
                w,
                b,
                stride,
                padding,
            } => {
                let (n, c, h, wd) = self.nodes[*x].value.dims4().expect("recorded shape");
                let ws = self.nodes[*w].value.shape();
                let (oc, kh, kw) = (ws[0], ws[2], ws[3]);
                let oh = (h + 2 * padding - kh) / stride + 1;
                let ow = (wd + 2 * padding - kw) / stride + 1;
                let (dx, dw, db) = kernels::conv2d_backward(
                    self.nodes[*x].value.data(),
                    n,
                    c,
                    h,
                    wd,
                    self.nodes[*w].value.data(),
                    oc,
                    kh,
                    kw,
                    *stride,
                    *padding,
                    oh,
                    ow,
                    dout,
                );
                self.accumulate(grads, *x, || dx);
                self.accumulate(grads, *w, || dw);
                self.accumulate(grads, *b, || db);
            }
            Op::BatchNormTrain {
                x,
                gamma,
                beta,
                xhat,
                inv_std,
            } => {
                let (n, c, h, w) = self.nodes[*x].value.dims4().expect("recorded shape");
                let (dx, dgamma, dbeta) = kernels::batchnorm_train_backward(
                    dout,
                    xhat.data(),
                    inv_std,
                    self.nodes[*gamma].value.data(),
                    n,
                    c,
                    h,
                    w,
                );
                self.accumulate(grads, *x, || dx);
                self.accumulate(grads, *gamma, || dgamma);
                self.accumulate(grads, *beta, || dbeta);
            }
            Op::MaxPool { x, argmax } => {
                let len = self.nodes[*x].value.numel();
                self.accumulate(grads, *x, || kernels::max_pool_backward(dout, argmax, len));
            }
            Op::AvgPool { x, k, s } => {
                let (n, c, h, w) = self.nodes[*x].value.dims4().expect("recorded shape");
                let oh = (h - k) / s + 1;
                let ow = (w - k) / s + 1;
                self.accumulate(grads, *x, || {
                    kernels::avg_pool_backward(dout, n, c, h, w, *k, *s, oh, ow)
                });
            }
            Op::PixelShuffle { x, r } => {
                let (n, c, h, w) = self.nodes[*x].value.dims4().expect("recorded shape");
                self.accumulate(grads, *x, || {
                    kernels::pixel_shuffle_backward(dout, n, c, h, w, *r)
                });
            }
            Op::Relu { x } => {
                let xd = self.nodes[*x].value.data();
                self.accumulate(grads, *x, || {
                    dout.iter()
                        .zip(xd.iter())
                        .map(|(g, v)| if *v > 0.0 { *g } else { 0.0 })
                        .collect()
                });
            }
            Op::Sqrt { x } => {
                let xd = self.nodes[*x].value.data();
                self.accumulate(grads, *x, || {
                    dout.iter()
                        .zip(xd.iter())
                        .map(|(g, v)| g / (2.0 * v.sqrt()))
                        .collect()
                });
            }
            Op::Binary { kind, a, b, bc } => {
                let ad = self.nodes[*a].value.data();
                let bd = self.nodes[*b].value.data();
                let an = ad.len();
                let bn = bd.len();
                self.accumulate(grads, *a, || {
                    let mut da = vec![0.0f32; an];
                    for (i, g) in dout.iter().enumerate() {
                        let v = match kind {
                            BinKind::Add | BinKind::Sub => *g,
                            BinKind::Mul => g * bd[rhs_index(*bc, i)],
                            BinKind::Div => g / bd[rhs_index(*bc, i)],
                        };
                        da[lhs_index(*bc, i)] += v;
                    }
                    da
                });
                self.accumulate(grads, *b, || {
                    let mut db = vec![0.0f32; bn];
                    for (i, g) in dout.iter().enumerate() {
                        let v = match kind {
                            BinKind::Add => *g,
                            BinKind::Sub => -*g,
                            BinKind::Mul => g * ad[lhs_index(*bc, i)],
                            BinKind::Div => {
                                let bi = bd[rhs_index(*bc, i)];
                                -g * ad[lhs_index(*bc, i)] / (bi * bi)
                            }
                        };
                        db[rhs_index(*bc, i)] += v;
                    }
                    db
                });
            }
            Op::MeanAll { x } => {
                let n = self.nodes[*x].value.numel();
                let g = dout[0] / n as f32;
                self.accumulate(grads, *x, || vec![g; n]);
            }
            Op::SumAll { x } => {
                let n = self.nodes[*x].value.numel();
                let g = dout[0];
                self.accumulate(grads, *x, || vec![g; n]);
            }
            Op::Scale { x, c } => {
                self.accumulate(grads, *x, || dout.iter().map(|g| g * c).collect());
            }
            Op::Clamp01 { x } => {
                let xd = self.nodes[*x].value.data();
                self.accumulate(grads, *x, || {
                    dout.iter()
                        .zip(xd.iter())
                        .map(|(g, v)| if (0.0..=1.0).contains(v) { *g } else { 0.0 })
                        .collect()
                });
            }
            Op::SpatialMean { x } => {
                let (n, c, h, w) = self.nodes[*x].value.dims4().expect("recorded shape");
                self.accumulate(grads, *x, || {
                    kernels::spatial_mean_backward(dout, n, c, h, w)
                });
            }
            Op::LogSoftmax { x, cols } => {
                let rows = dout.len() / cols;
                let xd = self.nodes[*x].value.data();
                self.accumulate(grads, *x, || {
                    // recompute softmax from the inputs
                    let sm = kernels::softmax_rows(xd, rows, *cols);
                    let mut dx = vec![0.0f32; dout.len()];
                    for r in 0..rows {
                        let mut gsum = 0.0f64;
                        for g in &dout[r * cols..(r + 1) * cols] {
                            gsum += *g as f64;
                        }
                        for j in 0..*cols {
                            let i = r * cols + j;
                            dx[i] = dout[i] - (gsum as f32) * sm[i];
                        }
                    }
                    dx
                });
            }
            Op::Softmax { x, cols } => {
                let rows = dout.len() / cols;
                let xd = self.nodes[*x].value.data();
                self.accumulate(grads, *x, || {
                    let sm = kernels::softmax_rows(xd, rows, *cols);
                    let mut dx = vec![0.0f32; dout.len()];
                    for r in 0..rows {
                        let mut dot = 0.0f64;
                        for j in 0..*cols {
                            let i = r * cols + j;
                            dot += dout[i] as f64 * sm[i] as f64;
                        }
                        for j in 0..*cols {
                            let i = r * cols + j;
                            dx[i] = sm[i] * (dout[i] - dot as f32);
                        }
                    }
                    dx
                });
            }
            Op::NllMean { logp, labels } => {
                let cols = self.nodes[*logp].value.shape()[1];
                let rows = labels.len();
                let g = dout[0] / rows as f32;
                self.accumulate(grads, *logp, || {
                    let mut dx = vec![0.0f32; rows * cols];
                    for (r, &label) in labels.iter().enumerate() {
                        dx[r * cols + label] = -g;
                    }
                    dx
                });
            }
            Op::Ssim { a, b, saved } => {
                let (da, db) = kernels::ssim_backward(
                    self.nodes[*a].value.data(),
                    self.nodes[*b].value.data(),
                    saved.n,
                    saved.h,
                    saved.w,
                    &saved.window,
                    saved.wsize,
                    saved.c1,
                    saved.c2,
                    dout[0] as f64,
                );
                self.accumulate(grads, *a, || da);
                self.accumulate(grads, *b, || db);
            }
            Op::Reshape { x } => {
                self.accumulate(grads, *x, || dout.to_vec());
            }
        }
    }
}

fn lhs_index(bc: Broadcast, i: usize) -> usize {
    match bc {
        Broadcast::ScalarLhs => 0,
        _ => i,
    }
}

fn rhs_index(bc: Broadcast, i: usize) -> usize {
    match bc {
        Broadcast::Same | Broadcast::ScalarLhs => i,
        Broadcast::ScalarRhs => 0,
        Broadcast::ChanRhs { chan, plane } => (i / plane) % chan,
        Broadcast::RowRhs { cols } => i % cols,
    }
}
