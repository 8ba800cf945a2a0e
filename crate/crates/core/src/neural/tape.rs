//! Reverse-mode differentiation over a flat list of recorded operations.

use super::Tensor;
use crate::error::{Error, Result};

/// Clamp applied inside every logarithm of the loss functions.
pub const LOG_EPS: f64 = 1e-7;

/// Handle to a value recorded on a [`Tape`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Var(pub(crate) usize);

#[derive(Debug)]
enum Op {
    Leaf,
    Conv2d {
        x: Var,
        w: Var,
        b: Var,
        stride: usize,
        pad: usize,
    },
    MaxPool2 {
        x: Var,
        argmax: Vec<usize>,
    },
    Upsample2 {
        x: Var,
    },
    Concat {
        a: Var,
        b: Var,
    },
    Relu {
        x: Var,
    },
    Sigmoid {
        x: Var,
    },
    GlobalAvgPool {
        x: Var,
    },
    Dropout {
        x: Var,
        mask: Vec<f64>,
    },
    Dense {
        x: Var,
        w: Var,
        b: Var,
    },
    Softmax {
        x: Var,
    },
    Bce {
        p: Var,
        target: Vec<f64>,
        per_image: usize,
    },
    Cce {
        p: Var,
        classes: Vec<usize>,
    },
    Add {
        a: Var,
        b: Var,
    },
    Sum {
        x: Var,
    },
    WeightedSum {
        x: Var,
        w: Vec<f64>,
    },
}

#[derive(Debug)]
struct Node {
    value: Tensor,
    op: Op,
}

/// Record of one forward pass. Each tape supports a single backward pass.
#[derive(Debug, Default)]
pub struct Tape {
    nodes: Vec<Node>,
    consumed: bool,
}

/// Gradients of one backward pass, indexed by [`Var`].
#[derive(Debug)]
pub struct Gradients {
    grads: Vec<Option<Tensor>>,
    shapes: Vec<Vec<usize>>,
}

impl Gradients {
    /// Gradient with respect to `v`; zeros when `v` does not reach the loss.
    pub fn wrt(&self, v: Var) -> Tensor {
        self.grads[v.0]
            .clone()
            .unwrap_or_else(|| Tensor::zeros(&self.shapes[v.0]))
    }
}

fn shape_err(layer: &str, message: String) -> Error {
    Error::Shape {
        layer: layer.to_string(),
        message,
    }
}

/// Output positions `o` whose input coordinate `o * stride + offset - pad`
/// falls inside `[0, len)`.
fn valid_range(out_len: usize, len: usize, offset: usize, pad: usize, stride: usize) -> (usize, usize) {
    let lo = pad.saturating_sub(offset).div_ceil(stride);
    let limit = len + pad;
    let hi = if limit <= offset {
        0
    } else {
        (limit - offset).div_ceil(stride).min(out_len)
    };
    (lo, hi.max(lo))
}

impl Tape {
    pub fn new() -> Self {
        Self::default()
    }

    fn push(&mut self, value: Tensor, op: Op) -> Var {
        self.nodes.push(Node { value, op });
        Var(self.nodes.len() - 1)
    }

    pub fn value(&self, v: Var) -> &Tensor {
        &self.nodes[v.0].value
    }

    /// Records an input or parameter.
    pub fn leaf(&mut self, t: Tensor) -> Var {
        self.push(t, Op::Leaf)
    }

    /// 2-D convolution over `[N, C, H, W]` with weights `[O, C, k, k]`.
    /// `pad = (before, after)` zero padding on both spatial axes.
    pub fn conv2d(
        &mut self,
        x: Var,
        w: Var,
        b: Var,
        stride: usize,
        pad: (usize, usize),
        layer: &str,
    ) -> Result<Var> {
        let xv = self.value(x);
        let wv = self.value(w);
        let (n, c, h, wd) = xv
            .dims4()
            .ok_or_else(|| shape_err(layer, format!("expected [N, C, H, W] input, got {:?}", xv.shape)))?;
        let (o, ci, k, k2) = wv
            .dims4()
            .ok_or_else(|| shape_err(layer, "weights must be 4-D".into()))?;
        if ci != c {
            return Err(shape_err(layer, format!("expected {ci} input channels, got {c}")));
        }
        if k != k2 || stride == 0 {
            return Err(shape_err(layer, "kernel must be square and stride positive".into()));
        }
        let (pb, pa) = pad;
        if h + pb + pa < k || wd + pb + pa < k {
            return Err(shape_err(layer, format!("{h}x{wd} input smaller than the {k}x{k} kernel")));
        }
        let ho = (h + pb + pa - k) / stride + 1;
        let wo = (wd + pb + pa - k) / stride + 1;
        let bias = &self.value(b).data;
        let mut out = vec![0.0; n * o * ho * wo];
        for ni in 0..n {
            for oi in 0..o {
                let oplane = &mut out[(ni * o + oi) * ho * wo..(ni * o + oi + 1) * ho * wo];
                oplane.fill(bias[oi]);
                for cc in 0..c {
                    let iplane = &xv.data[(ni * c + cc) * h * wd..(ni * c + cc + 1) * h * wd];
                    for ki in 0..k {
                        let (r0, r1) = valid_range(ho, h, ki, pb, stride);
                        for kj in 0..k {
                            let wgt = wv.data[((oi * c + cc) * k + ki) * k + kj];
                            let (c0, c1) = valid_range(wo, wd, kj, pb, stride);
                            for oh in r0..r1 {
                                let ih = oh * stride + ki - pb;
                                let irow = &iplane[ih * wd..(ih + 1) * wd];
                                let orow = &mut oplane[oh * wo..(oh + 1) * wo];
                                if stride == 1 {
                                    let iw0 = c0 + kj - pb;
                                    for (ov, iv) in orow[c0..c1].iter_mut().zip(&irow[iw0..]) {
                                        *ov += wgt * iv;
                                    }
                                } else {
                                    for ow in c0..c1 {
                                        orow[ow] += wgt * irow[ow * stride + kj - pb];
                                    }
                                }
                            }
                        }
                    }
                }
            }
        }
        let value = Tensor {
            shape: vec![n, o, ho, wo],
            data: out,
        };
        Ok(self.push(
            value,
            Op::Conv2d {
                x,
                w,
                b,
                stride,
                pad: pb,
            },
        ))
    }

    /// 2x2 max pooling with stride 2; odd trailing rows/columns are dropped.
    pub fn max_pool2(&mut self, x: Var, layer: &str) -> Result<Var> {
        let xv = self.value(x);
        let (n, c, h, w) = xv
            .dims4()
            .ok_or_else(|| shape_err(layer, format!("expected [N, C, H, W], got {:?}", xv.shape)))?;
        let (ho, wo) = (h / 2, w / 2);
        if ho == 0 || wo == 0 {
            return Err(shape_err(layer, format!("{h}x{w} map too small to pool")));
        }
        let mut out = Vec::with_capacity(n * c * ho * wo);
        let mut argmax = Vec::with_capacity(n * c * ho * wo);
        for p in 0..n * c {
            let base = p * h * w;
            for i in 0..ho {
                for j in 0..wo {
                    let mut best = base + 2 * i * w + 2 * j;
                    for (di, dj) in [(0, 1), (1, 0), (1, 1)] {
                        let idx = base + (2 * i + di) * w + 2 * j + dj;
                        if xv.data[idx] > xv.data[best] {
                            best = idx;
                        }
                    }
                    out.push(xv.data[best]);
                    argmax.push(best);
                }
            }
        }
        let value = Tensor {
            shape: vec![n, c, ho, wo],
            data: out,
        };
        Ok(self.push(value, Op::MaxPool2 { x, argmax }))
    }

    /// Nearest-neighbour 2x upsampling.
    pub fn upsample2(&mut self, x: Var, layer: &str) -> Result<Var> {
        let xv = self.value(x);
        let (n, c, h, w) = xv
            .dims4()
            .ok_or_else(|| shape_err(layer, format!("expected [N, C, H, W], got {:?}", xv.shape)))?;
        let (ho, wo) = (2 * h, 2 * w);
        let mut out = vec![0.0; n * c * ho * wo];
        for p in 0..n * c {
            for i in 0..ho {
                for j in 0..wo {
                    out[(p * ho + i) * wo + j] = xv.data[(p * h + i / 2) * w + j / 2];
                }
            }
        }
        let value = Tensor {
            shape: vec![n, c, ho, wo],
            data: out,
        };
        Ok(self.push(value, Op::Upsample2 { x }))
    }

    /// Channel concatenation `[a, b]`.
    pub fn concat(&mut self, a: Var, b: Var, layer: &str) -> Result<Var> {
        let (av, bv) = (self.value(a), self.value(b));
        let (n, ca, h, w) = av
            .dims4()
            .ok_or_else(|| shape_err(layer, "concat needs 4-D inputs".into()))?;
        let (nb, cb, hb, wb) = bv
            .dims4()
            .ok_or_else(|| shape_err(layer, "concat needs 4-D inputs".into()))?;
        if (n, h, w) != (nb, hb, wb) {
            return Err(shape_err(
                layer,
                format!("skip tensor is {nb}x{hb}x{wb}, decoder tensor {n}x{h}x{w}"),
            ));
        }
        let plane = h * w;
        let mut out = Vec::with_capacity(n * (ca + cb) * plane);
        for ni in 0..n {
            out.extend_from_slice(&av.data[ni * ca * plane..(ni + 1) * ca * plane]);
            out.extend_from_slice(&bv.data[ni * cb * plane..(ni + 1) * cb * plane]);
        }
        let value = Tensor {
            shape: vec![n, ca + cb, h, w],
            data: out,
        };
        Ok(self.push(value, Op::Concat { a, b }))
    }

    pub fn relu(&mut self, x: Var) -> Var {
        let xv = self.value(x);
        let value = Tensor {
            shape: xv.shape.clone(),
            data: xv.data.iter().map(|&v| v.max(0.0)).collect(),
        };
        self.push(value, Op::Relu { x })
    }

    pub fn sigmoid(&mut self, x: Var) -> Var {
        let xv = self.value(x);
        let value = Tensor {
            shape: xv.shape.clone(),
            data: xv.data.iter().map(|&v| 1.0 / (1.0 + (-v).exp())).collect(),
        };
        self.push(value, Op::Sigmoid { x })
    }

    /// `[N, C, H, W] -> [N, C]` spatial mean.
    pub fn global_avg_pool(&mut self, x: Var, layer: &str) -> Result<Var> {
        let xv = self.value(x);
        let (n, c, h, w) = xv
            .dims4()
            .ok_or_else(|| shape_err(layer, format!("expected [N, C, H, W], got {:?}", xv.shape)))?;
        let plane = (h * w) as f64;
        let data = xv
            .data
            .chunks(h * w)
            .map(|p| p.iter().sum::<f64>() / plane)
            .collect();
        let value = Tensor {
            shape: vec![n, c],
            data,
        };
        Ok(self.push(value, Op::GlobalAvgPool { x }))
    }

    /// Multiplies by a fixed mask (already scaled by `1 / keep`).
    pub fn dropout(&mut self, x: Var, mask: Vec<f64>) -> Var {
        let xv = self.value(x);
        debug_assert_eq!(mask.len(), xv.len());
        let value = Tensor {
            shape: xv.shape.clone(),
            data: xv.data.iter().zip(&mask).map(|(v, m)| v * m).collect(),
        };
        self.push(value, Op::Dropout { x, mask })
    }

    /// `y = x W^T + b` with `x: [N, in]`, `W: [out, in]`.
    pub fn dense(&mut self, x: Var, w: Var, b: Var, layer: &str) -> Result<Var> {
        let (xv, wv, bv) = (self.value(x), self.value(w), self.value(b));
        let (n, fin) = xv
            .dims2()
            .ok_or_else(|| shape_err(layer, format!("expected [N, features], got {:?}", xv.shape)))?;
        let (fout, win) = wv
            .dims2()
            .ok_or_else(|| shape_err(layer, "weights must be 2-D".into()))?;
        if win != fin {
            return Err(shape_err(layer, format!("expected {win} features, got {fin}")));
        }
        let mut out = Vec::with_capacity(n * fout);
        for row in xv.data.chunks(fin) {
            for (o, wrow) in wv.data.chunks(fin).enumerate() {
                out.push(bv.data[o] + row.iter().zip(wrow).map(|(a, b)| a * b).sum::<f64>());
            }
        }
        let value = Tensor {
            shape: vec![n, fout],
            data: out,
        };
        Ok(self.push(value, Op::Dense { x, w, b }))
    }

    /// Row-wise softmax of `[N, K]`.
    pub fn softmax(&mut self, x: Var, layer: &str) -> Result<Var> {
        let xv = self.value(x);
        let (_, k) = xv
            .dims2()
            .ok_or_else(|| shape_err(layer, format!("expected [N, K], got {:?}", xv.shape)))?;
        let mut data = Vec::with_capacity(xv.len());
        for row in xv.data.chunks(k) {
            let m = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let e: Vec<f64> = row.iter().map(|v| (v - m).exp()).collect();
            let s: f64 = e.iter().sum();
            data.extend(e.iter().map(|v| v / s));
        }
        let value = Tensor {
            shape: xv.shape.clone(),
            data,
        };
        Ok(self.push(value, Op::Softmax { x }))
    }

    /// Binary cross-entropy: pixel mean within each image, then batch mean.
    pub fn bce(&mut self, p: Var, target: &Tensor) -> Result<Var> {
        let pv = self.value(p);
        if pv.shape != target.shape {
            return Err(Error::input(format!(
                "prediction shape {:?} differs from target shape {:?}",
                pv.shape, target.shape
            )));
        }
        let n = pv.shape.first().copied().unwrap_or(1).max(1);
        let per_image = pv.len() / n;
        let mut total = 0.0;
        for (&pr, &y) in pv.data.iter().zip(&target.data) {
            let q = pr.clamp(LOG_EPS, 1.0 - LOG_EPS);
            total -= y * q.ln() + (1.0 - y) * (1.0 - q).ln();
        }
        let loss = total / (n * per_image) as f64;
        Ok(self.push(
            Tensor::scalar(loss),
            Op::Bce {
                p,
                target: target.data.clone(),
                per_image,
            },
        ))
    }

    /// Categorical cross-entropy of probability rows against class indices.
    pub fn cce(&mut self, p: Var, classes: &[usize]) -> Result<Var> {
        let pv = self.value(p);
        let (n, k) = pv
            .dims2()
            .ok_or_else(|| Error::input(format!("expected [N, K] probabilities, got {:?}", pv.shape)))?;
        if classes.len() != n {
            return Err(Error::input(format!("{n} rows but {} labels", classes.len())));
        }
        let mut total = 0.0;
        for (i, row) in pv.data.chunks(k).enumerate() {
            let s: f64 = row.iter().sum();
            if (s - 1.0).abs() > 1e-6 {
                return Err(Error::input(format!("probability row {i} sums to {s}")));
            }
            let c = classes[i];
            if c >= k {
                return Err(Error::input(format!("class {c} out of range for {k} outputs")));
            }
            total -= row[c].max(LOG_EPS).ln();
        }
        Ok(self.push(
            Tensor::scalar(total / n as f64),
            Op::Cce {
                p,
                classes: classes.to_vec(),
            },
        ))
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        let (av, bv) = (self.value(a), self.value(b));
        if av.shape != bv.shape {
            return Err(Error::input(format!(
                "cannot add shapes {:?} and {:?}",
                av.shape, bv.shape
            )));
        }
        let value = Tensor {
            shape: av.shape.clone(),
            data: av.data.iter().zip(&bv.data).map(|(x, y)| x + y).collect(),
        };
        Ok(self.push(value, Op::Add { a, b }))
    }

    pub fn sum(&mut self, x: Var) -> Var {
        let s = self.value(x).data.iter().sum();
        self.push(Tensor::scalar(s), Op::Sum { x })
    }

    /// `sum(x * w)` for a constant `w` of the same shape.
    pub fn weighted_sum(&mut self, x: Var, w: &Tensor) -> Result<Var> {
        let xv = self.value(x);
        if xv.shape != w.shape {
            return Err(Error::input(format!(
                "weights {:?} do not match {:?}",
                w.shape, xv.shape
            )));
        }
        let s = xv.data.iter().zip(&w.data).map(|(a, b)| a * b).sum();
        Ok(self.push(
            Tensor::scalar(s),
            Op::WeightedSum {
                x,
                w: w.data.clone(),
            },
        ))
    }

    /// Back-propagates from the one-element `loss`.
    pub fn backward(&mut self, loss: Var) -> Result<Gradients> {
        if self.consumed {
            return Err(Error::StaleTape);
        }
        if self.value(loss).len() != 1 {
            return Err(Error::input("backward needs a scalar loss"));
        }
        self.consumed = true;
        let mut grads: Vec<Option<Tensor>> = vec![None; self.nodes.len()];
        grads[loss.0] = Some(Tensor::filled(&self.value(loss).shape, 1.0));

        for i in (0..=loss.0).rev() {
            let Some(g) = grads[i].take() else { continue };
            self.backprop_node(i, &g, &mut grads);
            grads[i] = Some(g);
        }
        Ok(Gradients {
            grads,
            shapes: self.nodes.iter().map(|n| n.value.shape.clone()).collect(),
        })
    }

    fn backprop_node(&self, i: usize, g: &Tensor, grads: &mut [Option<Tensor>]) {
        let node = &self.nodes[i];
        let acc = |grads: &mut [Option<Tensor>], v: Var, t: Tensor| match &mut grads[v.0] {
            Some(existing) => existing.add_assign(&t),
            slot @ None => *slot = Some(t),
        };
        let like = |v: Var| Tensor::zeros(&self.nodes[v.0].value.shape);
        match &node.op {
            Op::Leaf => {}
            Op::Conv2d {
                x,
                w,
                b,
                stride,
                pad,
            } => {
                let (xv, wv) = (self.value(*x), self.value(*w));
                let (n, c, h, wd) = xv.dims4().expect("checked in forward");
                let (o, _, k, _) = wv.dims4().expect("checked in forward");
                let (_, _, ho, wo) = node.value.dims4().expect("conv output is 4-D");
                let (stride, pb) = (*stride, *pad);
                let mut dx = like(*x);
                let mut dw = like(*w);
                let mut db = like(*b);
                for ni in 0..n {
                    for oi in 0..o {
                        let gplane = &g.data[(ni * o + oi) * ho * wo..(ni * o + oi + 1) * ho * wo];
                        db.data[oi] += gplane.iter().sum::<f64>();
                        for cc in 0..c {
                            let ioff = (ni * c + cc) * h * wd;
                            for ki in 0..k {
                                let (r0, r1) = valid_range(ho, h, ki, pb, stride);
                                for kj in 0..k {
                                    let widx = ((oi * c + cc) * k + ki) * k + kj;
                                    let wgt = wv.data[widx];
                                    let (c0, c1) = valid_range(wo, wd, kj, pb, stride);
                                    let mut gw = 0.0;
                                    for oh in r0..r1 {
                                        let ih = oh * stride + ki - pb;
                                        let grow = &gplane[oh * wo..(oh + 1) * wo];
                                        let rbase = ioff + ih * wd;
                                        if stride == 1 {
                                            let iw0 = c0 + kj - pb;
                                            let len = c1 - c0;
                                            let xrow = &xv.data[rbase + iw0..rbase + iw0 + len];
                                            let dxrow = &mut dx.data[rbase + iw0..rbase + iw0 + len];
                                            for ((gv, xvv), dxv) in
                                                grow[c0..c1].iter().zip(xrow).zip(dxrow.iter_mut())
                                            {
                                                gw += gv * xvv;
                                                *dxv += wgt * gv;
                                            }
                                        } else {
                                            for ow in c0..c1 {
                                                let idx = rbase + ow * stride + kj - pb;
                                                gw += grow[ow] * xv.data[idx];
                                                dx.data[idx] += wgt * grow[ow];
                                            }
                                        }
                                    }
                                    dw.data[widx] += gw;
                                }
                            }
                        }
                    }
                }
                acc(grads, *x, dx);
                acc(grads, *w, dw);
                acc(grads, *b, db);
            }
            Op::MaxPool2 { x, argmax } => {
                let mut dx = like(*x);
                for (gv, &src) in g.data.iter().zip(argmax) {
                    dx.data[src] += gv;
                }
                acc(grads, *x, dx);
            }
            Op::Upsample2 { x } => {
                let mut dx = like(*x);
                let (_, _, h, w) = dx.dims4().expect("checked in forward");
                let (ho, wo) = (2 * h, 2 * w);
                for (idx, gv) in g.data.iter().enumerate() {
                    let p = idx / (ho * wo);
                    let (i, j) = ((idx / wo) % ho, idx % wo);
                    dx.data[(p * h + i / 2) * w + j / 2] += gv;
                }
                acc(grads, *x, dx);
            }
            Op::Concat { a, b } => {
                let (n, ca, h, w) = self.value(*a).dims4().expect("checked in forward");
                let cb = self.value(*b).shape[1];
                let plane = h * w;
                let mut da = Vec::with_capacity(n * ca * plane);
                let mut dbv = Vec::with_capacity(n * cb * plane);
                for ni in 0..n {
                    let base = ni * (ca + cb) * plane;
                    da.extend_from_slice(&g.data[base..base + ca * plane]);
                    dbv.extend_from_slice(&g.data[base + ca * plane..base + (ca + cb) * plane]);
                }
                acc(
                    grads,
                    *a,
                    Tensor {
                        shape: vec![n, ca, h, w],
                        data: da,
                    },
                );
                acc(
                    grads,
                    *b,
                    Tensor {
                        shape: vec![n, cb, h, w],
                        data: dbv,
                    },
                );
            }
            Op::Relu { x } => {
                let xv = self.value(*x);
                let data = g
                    .data
                    .iter()
                    .zip(&xv.data)
                    .map(|(gv, v)| if *v > 0.0 { *gv } else { 0.0 })
                    .collect();
                acc(
                    grads,
                    *x,
                    Tensor {
                        shape: xv.shape.clone(),
                        data,
                    },
                );
            }
            Op::Sigmoid { x } => {
                let data = g
                    .data
                    .iter()
                    .zip(&node.value.data)
                    .map(|(gv, y)| gv * y * (1.0 - y))
                    .collect();
                acc(
                    grads,
                    *x,
                    Tensor {
                        shape: node.value.shape.clone(),
                        data,
                    },
                );
            }
            Op::GlobalAvgPool { x } => {
                let mut dx = like(*x);
                let (_, _, h, w) = dx.dims4().expect("checked in forward");
                let plane = h * w;
                for (p, gv) in g.data.iter().enumerate() {
                    for v in &mut dx.data[p * plane..(p + 1) * plane] {
                        *v = gv / plane as f64;
                    }
                }
                acc(grads, *x, dx);
            }
            Op::Dropout { x, mask } => {
                let data = g.data.iter().zip(mask).map(|(gv, m)| gv * m).collect();
                acc(
                    grads,
                    *x,
                    Tensor {
                        shape: g.shape.clone(),
                        data,
                    },
                );
            }
            Op::Dense { x, w, b } => {
                let (xv, wv) = (self.value(*x), self.value(*w));
                let (n, fin) = xv.dims2().expect("checked in forward");
                let fout = wv.shape[0];
                let mut dx = like(*x);
                let mut dw = like(*w);
                let mut db = like(*b);
                for ni in 0..n {
                    let xrow = &xv.data[ni * fin..(ni + 1) * fin];
                    for o in 0..fout {
                        let gv = g.data[ni * fout + o];
                        db.data[o] += gv;
                        let wrow = &wv.data[o * fin..(o + 1) * fin];
                        for j in 0..fin {
                            dx.data[ni * fin + j] += gv * wrow[j];
                            dw.data[o * fin + j] += gv * xrow[j];
                        }
                    }
                }
                acc(grads, *x, dx);
                acc(grads, *w, dw);
                acc(grads, *b, db);
            }
            Op::Softmax { x } => {
                let k = node.value.shape[1];
                let mut data = Vec::with_capacity(g.len());
                for (grow, yrow) in g.data.chunks(k).zip(node.value.data.chunks(k)) {
                    let dot: f64 = grow.iter().zip(yrow).map(|(a, b)| a * b).sum();
                    data.extend(grow.iter().zip(yrow).map(|(gv, y)| y * (gv - dot)));
                }
                acc(
                    grads,
                    *x,
                    Tensor {
                        shape: node.value.shape.clone(),
                        data,
                    },
                );
            }
            Op::Bce {
                p,
                target,
                per_image,
            } => {
                let pv = self.value(*p);
                let n = pv.len() / per_image;
                let scale = g.item() / (n * per_image) as f64;
                let data = pv
                    .data
                    .iter()
                    .zip(target)
                    .map(|(&pr, &y)| {
                        if pr <= LOG_EPS || pr >= 1.0 - LOG_EPS {
                            0.0
                        } else {
                            scale * (-y / pr + (1.0 - y) / (1.0 - pr))
                        }
                    })
                    .collect();
                acc(
                    grads,
                    *p,
                    Tensor {
                        shape: pv.shape.clone(),
                        data,
                    },
                );
            }
            Op::Cce { p, classes } => {
                let pv = self.value(*p);
                let (n, k) = pv.dims2().expect("checked in forward");
                let mut dp = like(*p);
                for (i, &c) in classes.iter().enumerate() {
                    let q = pv.data[i * k + c];
                    if q > LOG_EPS {
                        dp.data[i * k + c] = -g.item() / (n as f64 * q);
                    }
                }
                acc(grads, *p, dp);
            }
            Op::Add { a, b } => {
                acc(grads, *a, g.clone());
                acc(grads, *b, g.clone());
            }
            Op::Sum { x } => {
                acc(grads, *x, Tensor::filled(&self.value(*x).shape, g.item()));
            }
            Op::WeightedSum { x, w } => {
                acc(
                    grads,
                    *x,
                    Tensor {
                        shape: self.value(*x).shape.clone(),
                        data: w.iter().map(|v| v * g.item()).collect(),
                    },
                );
            }
        }
    }
}
