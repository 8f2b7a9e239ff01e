//! Differentiable layers: 2-D convolution, 2×2 max pooling, fully connected,
//! inverted dropout and flatten.

use rand::Rng;

use crate::autodiff::{Graph, NodeId, Op};
use crate::error::{Error, Result};
use crate::tensor::{gemm, Layout, Real, Tensor};

/// Whether stochastic layers are active.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Train,
    Eval,
}

/// Dimensions of a 2-D convolution. Weights (`out×in×K×K`) and bias (`out`)
/// live in the parameter store.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ConvSpec {
    pub in_channels: usize,
    pub out_channels: usize,
    pub kernel: usize,
    pub stride: usize,
    pub padding: usize,
}

impl ConvSpec {
    pub fn new(in_channels: usize, out_channels: usize, kernel: usize, stride: usize, padding: usize) -> Self {
        Self {
            in_channels,
            out_channels,
            kernel,
            stride,
            padding,
        }
    }

    /// `(W − K + 2P)/S + 1`, which must be a positive integer.
    pub fn output_size(&self, input: usize) -> Result<usize> {
        let Self {
            kernel: k,
            stride: s,
            padding: p,
            ..
        } = *self;
        let span = (input + 2 * p) as isize - k as isize;
        if s == 0 || k == 0 || span < 0 || !(span as usize).is_multiple_of(s) {
            return Err(Error::Shape {
                op: "conv2d",
                detail: format!("(W − K + 2P)/S + 1 is not a positive integer for W={input}, K={k}, P={p}, S={s}"),
            });
        }
        Ok(span as usize / s + 1)
    }

    pub fn weight_shape(&self) -> [usize; 4] {
        [self.out_channels, self.in_channels, self.kernel, self.kernel]
    }

    pub fn num_params(&self) -> usize {
        self.out_channels * self.in_channels * self.kernel * self.kernel + self.out_channels
    }
}

/// Resolved shapes of one convolution call.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) struct ConvGeometry {
    batch: usize,
    in_c: usize,
    in_h: usize,
    in_w: usize,
    out_c: usize,
    k: usize,
    stride: usize,
    pad: usize,
    out_h: usize,
    out_w: usize,
}

impl ConvGeometry {
    fn patch_len(&self) -> usize {
        self.in_c * self.k * self.k
    }

    fn positions(&self) -> usize {
        self.out_h * self.out_w
    }

    /// Source pixel for output position `o` along one axis and kernel tap `t`,
    /// or `None` when it falls in the zero padding.
    #[inline]
    fn source(&self, o: usize, t: usize, extent: usize) -> Option<usize> {
        let v = (o * self.stride + t) as isize - self.pad as isize;
        (v >= 0 && (v as usize) < extent).then_some(v as usize)
    }
}

/// Output columns `lo..hi` whose tap `t` lands inside `0..extent`.
#[inline]
fn valid_range(geom: &ConvGeometry, t: usize, extent: usize, outputs: usize) -> (usize, usize) {
    let s = geom.stride;
    // need o·s + t ≥ pad and o·s + t < extent + pad
    let lo = geom.pad.saturating_sub(t).div_ceil(s);
    let hi = if extent + geom.pad > t {
        (extent + geom.pad - t).div_ceil(s)
    } else {
        0
    };
    (lo.min(outputs), hi.min(outputs).max(lo.min(outputs)))
}

/// Gathers every receptive field of one sample into a `(C·K·K) × (H′·W′)`
/// matrix.
fn im2col<T: Real>(geom: &ConvGeometry, x: &[T], cols: &mut [T]) {
    let (h, w, k) = (geom.in_h, geom.in_w, geom.k);
    let (oh, ow, s) = (geom.out_h, geom.out_w, geom.stride);
    let positions = geom.positions();
    for c in 0..geom.in_c {
        let plane = &x[c * h * w..(c + 1) * h * w];
        for ky in 0..k {
            for kx in 0..k {
                let row = ((c * k + ky) * k + kx) * positions;
                let (lo, hi) = valid_range(geom, kx, w, ow);
                for oy in 0..oh {
                    let dst = &mut cols[row + oy * ow..row + (oy + 1) * ow];
                    let Some(iy) = geom.source(oy, ky, h) else {
                        dst.fill(T::zero());
                        continue;
                    };
                    dst[..lo].fill(T::zero());
                    dst[hi..].fill(T::zero());
                    let src = &plane[iy * w..(iy + 1) * w];
                    let first = lo * s + kx - geom.pad;
                    if s == 1 {
                        dst[lo..hi].copy_from_slice(&src[first..first + hi - lo]);
                    } else {
                        for (d, &v) in dst[lo..hi].iter_mut().zip(src[first..].iter().step_by(s)) {
                            *d = v;
                        }
                    }
                }
            }
        }
    }
}

/// Scatter-adds a column matrix back onto one sample's input gradient.
fn col2im<T: Real>(geom: &ConvGeometry, cols: &[T], dx: &mut [T]) {
    let (h, w, k) = (geom.in_h, geom.in_w, geom.k);
    let (oh, ow, s) = (geom.out_h, geom.out_w, geom.stride);
    let positions = geom.positions();
    for c in 0..geom.in_c {
        let plane = &mut dx[c * h * w..(c + 1) * h * w];
        for ky in 0..k {
            for kx in 0..k {
                let row = ((c * k + ky) * k + kx) * positions;
                let (lo, hi) = valid_range(geom, kx, w, ow);
                for oy in 0..oh {
                    let Some(iy) = geom.source(oy, ky, h) else { continue };
                    let src = &cols[row + oy * ow + lo..row + oy * ow + hi];
                    let first = lo * s + kx - geom.pad;
                    let dst = &mut plane[iy * w..(iy + 1) * w];
                    if s == 1 {
                        for (d, &v) in dst[first..first + hi - lo].iter_mut().zip(src) {
                            *d += v;
                        }
                    } else {
                        for (d, &v) in dst[first..].iter_mut().step_by(s).zip(src) {
                            *d += v;
                        }
                    }
                }
            }
        }
    }
}

pub(crate) fn conv2d_backward<T: Real>(
    geom: &ConvGeometry,
    x: &[T],
    weight: &Tensor<T>,
    g: &[T],
    need: [bool; 3],
) -> [Option<Vec<T>>; 3] {
    let (patch, positions, out_c) = (geom.patch_len(), geom.positions(), geom.out_c);
    let in_len = geom.in_c * geom.in_h * geom.in_w;
    let mut dx = need[0].then(|| vec![T::zero(); geom.batch * in_len]);
    let mut dw = need[1].then(|| vec![T::zero(); out_c * patch]);
    let db = need[2].then(|| {
        let mut db = vec![T::zero(); out_c];
        for chunk in g.chunks_exact(positions).enumerate() {
            db[chunk.0 % out_c] += chunk.1.iter().copied().sum::<T>();
        }
        db
    });
    let mut dcols = vec![T::zero(); if need[0] { patch * positions } else { 0 }];
    let mut cols = vec![T::zero(); if need[1] { patch * positions } else { 0 }];
    for b in 0..geom.batch {
        let gy = &g[b * out_c * positions..(b + 1) * out_c * positions];
        if let Some(dw) = dw.as_mut() {
            // dW += dY_b · cols_bᵀ, with the columns gathered again
            im2col(geom, &x[b * in_len..(b + 1) * in_len], &mut cols);
            gemm(
                out_c,
                positions,
                patch,
                gy,
                Layout::Normal,
                &cols,
                Layout::Transposed,
                T::one(),
                dw,
            );
        }
        if let Some(dx) = dx.as_mut() {
            // dcols = Wᵀ · dY_b
            gemm(
                patch,
                out_c,
                positions,
                weight.data(),
                Layout::Transposed,
                gy,
                Layout::Normal,
                T::zero(),
                &mut dcols,
            );
            col2im(geom, &dcols, &mut dx[b * in_len..(b + 1) * in_len]);
        }
    }
    [dx, dw, db]
}

pub(crate) fn linear_backward<T: Real>(x: &Tensor<T>, w: &Tensor<T>, g: &[T], need: [bool; 3]) -> [Option<Vec<T>>; 3] {
    let (batch, n) = (x.shape()[0], x.shape()[1]);
    let m = w.shape()[0];
    let dx = need[0].then(|| {
        let mut dx = vec![T::zero(); batch * n];
        gemm(
            batch,
            m,
            n,
            g,
            Layout::Normal,
            w.data(),
            Layout::Normal,
            T::zero(),
            &mut dx,
        );
        dx
    });
    let dw = need[1].then(|| {
        let mut dw = vec![T::zero(); m * n];
        gemm(
            m,
            batch,
            n,
            g,
            Layout::Transposed,
            x.data(),
            Layout::Normal,
            T::zero(),
            &mut dw,
        );
        dw
    });
    let db = need[2].then(|| {
        let mut db = vec![T::zero(); m];
        for row in g.chunks_exact(m) {
            for (d, &v) in db.iter_mut().zip(row) {
                *d += v;
            }
        }
        db
    });
    [dx, dw, db]
}

/// Drop probability and whether dropout is active.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DropoutSpec {
    p: f64,
    pub mode: Mode,
}

impl DropoutSpec {
    pub fn new(p: f64, mode: Mode) -> Result<Self> {
        if !(0.0..1.0).contains(&p) {
            return Err(Error::Config(format!("dropout probability {p} not in [0, 1)")));
        }
        Ok(Self { p, mode })
    }

    pub fn p(&self) -> f64 {
        self.p
    }
}

impl<T: Real> Graph<T> {
    /// Cross-correlation of `x: B×C×H×W` with `weight: out×C×K×K`, plus a
    /// per-output-channel bias.
    pub fn conv2d(&mut self, x: NodeId, weight: NodeId, bias: NodeId, spec: &ConvSpec) -> Result<NodeId> {
        let xs = self.value(x).shape().to_vec();
        let &[batch, in_c, in_h, in_w] = xs.as_slice() else {
            return Err(Error::Shape {
                op: "conv2d",
                detail: format!("expected B×C×H×W input, got {xs:?}"),
            });
        };
        if in_c != spec.in_channels {
            return Err(Error::Shape {
                op: "conv2d",
                detail: format!("input has {in_c} channels, layer expects {}", spec.in_channels),
            });
        }
        if self.value(weight).shape() != spec.weight_shape() {
            return Err(Error::ShapeMismatch {
                op: "conv2d",
                left: self.value(weight).shape().to_vec(),
                right: spec.weight_shape().to_vec(),
            });
        }
        if self.value(bias).shape() != [spec.out_channels] {
            return Err(Error::ShapeMismatch {
                op: "conv2d",
                left: self.value(bias).shape().to_vec(),
                right: vec![spec.out_channels],
            });
        }
        let geom = ConvGeometry {
            batch,
            in_c,
            in_h,
            in_w,
            out_c: spec.out_channels,
            k: spec.kernel,
            stride: spec.stride,
            pad: spec.padding,
            out_h: spec.output_size(in_h)?,
            out_w: spec.output_size(in_w)?,
        };
        let (patch, positions, out_c) = (geom.patch_len(), geom.positions(), geom.out_c);
        let in_len = in_c * in_h * in_w;
        let mut cols = vec![T::zero(); patch * positions];
        let mut out = vec![T::zero(); batch * out_c * positions];
        {
            let xv = self.value(x).data();
            let wv = self.value(weight).data();
            let bv = self.value(bias).data();
            for b in 0..batch {
                im2col(&geom, &xv[b * in_len..(b + 1) * in_len], &mut cols);
                let ob = &mut out[b * out_c * positions..(b + 1) * out_c * positions];
                for (o, row) in ob.chunks_exact_mut(positions).enumerate() {
                    row.fill(bv[o]);
                }
                gemm(
                    out_c,
                    patch,
                    positions,
                    wv,
                    Layout::Normal,
                    &cols,
                    Layout::Normal,
                    T::one(),
                    ob,
                );
            }
        }
        let value = Tensor::new([batch, out_c, geom.out_h, geom.out_w], out)?;
        let rg = self.any_grad(&[x, weight, bias]);
        Ok(self.push(value, Op::Conv2d { x, weight, bias, geom }, rg))
    }

    /// 2×2 max pooling with stride 2. Ties go to the lowest linear index.
    pub fn maxpool2d(&mut self, x: NodeId) -> Result<NodeId> {
        let xs = self.value(x).shape().to_vec();
        let &[batch, channels, h, w] = xs.as_slice() else {
            return Err(Error::Shape {
                op: "maxpool2d",
                detail: format!("expected B×C×H×W input, got {xs:?}"),
            });
        };
        if h % 2 != 0 || w % 2 != 0 {
            return Err(Error::Shape {
                op: "maxpool2d",
                detail: format!("spatial size {h}×{w} is not divisible by the 2×2 window"),
            });
        }
        let (oh, ow) = (h / 2, w / 2);
        let xv = self.value(x).data();
        let mut out = Vec::with_capacity(batch * channels * oh * ow);
        let mut argmax = Vec::with_capacity(out.capacity());
        for plane in 0..batch * channels {
            let base = plane * h * w;
            for oy in 0..oh {
                for ox in 0..ow {
                    let mut best = base + 2 * oy * w + 2 * ox;
                    for idx in [best + 1, best + w, best + w + 1] {
                        if xv[idx] > xv[best] {
                            best = idx;
                        }
                    }
                    out.push(xv[best]);
                    argmax.push(best);
                }
            }
        }
        let value = Tensor::new([batch, channels, oh, ow], out)?;
        let rg = self.any_grad(&[x]);
        Ok(self.push(value, Op::MaxPool2d { x, argmax }, rg))
    }

    /// `x·Wᵀ + b` for `x: B×n`, `W: m×n`, `b: m`.
    pub fn linear(&mut self, x: NodeId, weight: NodeId, bias: NodeId) -> Result<NodeId> {
        let (batch, n) = self.value(x).as_matrix("linear")?;
        let (m, n2) = self.value(weight).as_matrix("linear")?;
        if n != n2 {
            return Err(Error::ShapeMismatch {
                op: "linear",
                left: self.value(x).shape().to_vec(),
                right: self.value(weight).shape().to_vec(),
            });
        }
        if self.value(bias).shape() != [m] {
            return Err(Error::ShapeMismatch {
                op: "linear",
                left: self.value(bias).shape().to_vec(),
                right: vec![m],
            });
        }
        let mut out = Vec::with_capacity(batch * m);
        for _ in 0..batch {
            out.extend_from_slice(self.value(bias).data());
        }
        gemm(
            batch,
            n,
            m,
            self.value(x).data(),
            Layout::Normal,
            self.value(weight).data(),
            Layout::Transposed,
            T::one(),
            &mut out,
        );
        let value = Tensor::new([batch, m], out)?;
        let rg = self.any_grad(&[x, weight, bias]);
        Ok(self.push(value, Op::Linear { x, weight, bias }, rg))
    }

    /// Inverted dropout: survivors are scaled by `1/(1−p)` so evaluation is
    /// the identity. Returns `x` itself in eval mode or when `p == 0`.
    pub fn dropout<R: Rng + ?Sized>(&mut self, x: NodeId, spec: &DropoutSpec, rng: &mut R) -> NodeId {
        if spec.mode == Mode::Eval || spec.p == 0.0 {
            return x;
        }
        let keep_scale = T::from_f64_lossy(1.0 / (1.0 - spec.p));
        let mask: Vec<T> = (0..self.value(x).len())
            .map(|_| {
                if rng.random::<f64>() < spec.p {
                    T::zero()
                } else {
                    keep_scale
                }
            })
            .collect();
        let xv = self.value(x);
        let data = xv.data().iter().zip(&mask).map(|(&v, &m)| v * m).collect();
        let value = Tensor::new(xv.shape().to_vec(), data).expect("same shape");
        let rg = self.any_grad(&[x]);
        self.push(value, Op::Dropout { x, mask }, rg)
    }

    /// `B×C×H×W → B×(C·H·W)`, row-major per sample.
    pub fn flatten(&mut self, x: NodeId) -> Result<NodeId> {
        let shape = self.value(x).shape();
        let batch = *shape.first().ok_or_else(|| Error::Shape {
            op: "flatten",
            detail: "rank-0 tensor".into(),
        })?;
        let rest = shape[1..].iter().product::<usize>();
        self.reshape(x, [batch, rest])
    }
}
