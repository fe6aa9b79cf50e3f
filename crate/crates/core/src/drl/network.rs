//! Convolutional Q-networks with hand-written backpropagation.
//!
//! Layers keep activations in height-width-channel order. Convolutions are
//! bias-free and followed by ReLU; hidden dense layers use ReLU and the
//! last dense layer is linear. Kernels are stored `[kh][kw][cin][cout]` and
//! dense weights `[in][out]`, so the innermost loops run over contiguous
//! output channels. All parameters live in one flat vector in layer order.
//!
//! Zero activations are skipped in both passes. State images are mostly
//! empty, so a sparse first layer and the zero skip carry most of the
//! speed.

use alloc::vec::Vec;

use rand::Rng as _;
use serde::{Deserialize, Serialize};

use super::tensor::{Input, Shape};
use crate::rng::Rng;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum LayerSpec {
    /// Valid convolution with ReLU.
    Conv { kh: usize, kw: usize, sh: usize, sw: usize, filters: usize },
    /// Max pooling; windows equal strides.
    MaxPool { ph: usize, pw: usize },
    /// Centered zero padding to the given spatial size.
    Pad { h: usize, w: usize },
    /// Flatten to a `n x 1` vector.
    Reshape,
    /// Fully connected with bias; ReLU when `relu`.
    Dense { out: usize, relu: bool },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct NetSpec {
    pub input: Shape,
    pub layers: Vec<LayerSpec>,
}

impl LayerSpec {
    fn output_shape(&self, s: Shape) -> Result<Shape> {
        match *self {
            LayerSpec::Conv { kh, kw, sh, sw, filters } => {
                if kh == 0 || kw == 0 || sh == 0 || sw == 0 || filters == 0 || kh > s.h || kw > s.w {
                    return Err(Error::Shape(alloc::format!("convolution {kh}x{kw} does not fit input {s}")));
                }
                Ok(Shape::new((s.h - kh) / sh + 1, (s.w - kw) / sw + 1, filters))
            }
            LayerSpec::MaxPool { ph, pw } => {
                if ph == 0 || pw == 0 || ph > s.h || pw > s.w {
                    return Err(Error::Shape(alloc::format!("pooling {ph}x{pw} does not fit input {s}")));
                }
                Ok(Shape::new(s.h / ph, s.w / pw, s.c))
            }
            LayerSpec::Pad { h, w } => {
                if h < s.h || w < s.w {
                    return Err(Error::Shape(alloc::format!("padding {s} to smaller {h}x{w}")));
                }
                Ok(Shape::new(h, w, s.c))
            }
            LayerSpec::Reshape => Ok(Shape::flat(s.len())),
            LayerSpec::Dense { out, .. } => {
                if s.h != 1 || s.w != 1 || out == 0 {
                    return Err(Error::Shape(alloc::format!("dense layer on unflattened input {s}")));
                }
                Ok(Shape::flat(out))
            }
        }
    }

    fn param_count(&self, s: Shape) -> usize {
        match *self {
            LayerSpec::Conv { kh, kw, filters, .. } => kh * kw * s.c * filters,
            LayerSpec::Dense { out, .. } => s.c * out + out,
            _ => 0,
        }
    }
}

impl NetSpec {
    /// Input shape followed by every layer's output shape.
    pub fn shapes(&self) -> Result<Vec<Shape>> {
        let mut out = alloc::vec![self.input];
        for l in &self.layers {
            let next = l.output_shape(*out.last().expect("starts non-empty"))?;
            out.push(next);
        }
        Ok(out)
    }

    pub fn param_count(&self) -> Result<usize> {
        let shapes = self.shapes()?;
        Ok(self.layers.iter().zip(&shapes).map(|(l, s)| l.param_count(*s)).sum())
    }

    pub fn outputs(&self) -> Result<usize> {
        Ok(self.shapes()?.last().expect("non-empty").len())
    }
}

/// Formation-layer network: `160x160x4` state image to `actions` values.
pub fn formation_net_spec(actions: usize) -> NetSpec {
    NetSpec {
        input: Shape::new(160, 160, 4),
        layers: alloc::vec![
            LayerSpec::Conv { kh: 5, kw: 5, sh: 3, sw: 3, filters: 32 },
            LayerSpec::MaxPool { ph: 2, pw: 2 },
            LayerSpec::Conv { kh: 3, kw: 3, sh: 2, sw: 2, filters: 32 },
            LayerSpec::Pad { h: 26, w: 26 },
            LayerSpec::Conv { kh: 3, kw: 3, sh: 2, sw: 2, filters: 64 },
            LayerSpec::Conv { kh: 3, kw: 3, sh: 2, sw: 2, filters: 64 },
            LayerSpec::Reshape,
            LayerSpec::Dense { out: 100, relu: true },
            LayerSpec::Dense { out: actions, relu: false },
        ],
    }
}

/// Coordination-layer network for a `g x g x 4` zone image.
pub fn coordination_net_spec(granularity: usize, actions: usize) -> Result<NetSpec> {
    let g = granularity;
    let layers = match g {
        6 => alloc::vec![
            LayerSpec::Pad { h: 16, w: 16 },
            LayerSpec::Conv { kh: 3, kw: 3, sh: 1, sw: 1, filters: 32 },
            LayerSpec::Conv { kh: 3, kw: 3, sh: 2, sw: 2, filters: 64 },
            LayerSpec::Conv { kh: 3, kw: 3, sh: 2, sw: 2, filters: 64 },
            LayerSpec::Reshape,
            LayerSpec::Dense { out: 16, relu: true },
            LayerSpec::Dense { out: actions, relu: false },
        ],
        12 => alloc::vec![
            LayerSpec::Pad { h: 20, w: 20 },
            LayerSpec::Conv { kh: 3, kw: 3, sh: 1, sw: 1, filters: 32 },
            LayerSpec::Conv { kh: 3, kw: 3, sh: 3, sw: 3, filters: 64 },
            LayerSpec::Conv { kh: 3, kw: 3, sh: 2, sw: 2, filters: 64 },
            LayerSpec::Reshape,
            LayerSpec::Dense { out: 16, relu: true },
            LayerSpec::Dense { out: actions, relu: false },
        ],
        24 => alloc::vec![
            LayerSpec::Pad { h: 30, w: 30 },
            LayerSpec::Conv { kh: 3, kw: 3, sh: 1, sw: 1, filters: 32 },
            LayerSpec::Conv { kh: 3, kw: 3, sh: 3, sw: 3, filters: 64 },
            LayerSpec::Conv { kh: 3, kw: 3, sh: 2, sw: 2, filters: 64 },
            LayerSpec::MaxPool { ph: 2, pw: 2 },
            LayerSpec::Reshape,
            LayerSpec::Dense { out: 16, relu: true },
            LayerSpec::Dense { out: actions, relu: false },
        ],
        _ => return Err(Error::Config(alloc::format!("no coordination network for granularity {g}"))),
    };
    Ok(NetSpec { input: Shape::new(g, g, 4), layers })
}

/// A network: spec, derived shapes and flat parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct Network {
    pub spec: NetSpec,
    pub shapes: Vec<Shape>,
    /// Start of each layer's parameters in `params`.
    pub offsets: Vec<usize>,
    pub params: Vec<f64>,
}

/// Per-layer activations recorded by a training forward pass.
#[derive(Debug, Clone, Default)]
pub struct Workspace {
    /// `acts[i]` is the output of layer `i`.
    acts: Vec<Vec<f64>>,
    /// Argmax input index per output for pooling layers.
    argmax: Vec<Vec<u32>>,
    grads_a: Vec<f64>,
    grads_b: Vec<f64>,
    nonzeros: Vec<(u32, f64)>,
}

impl Network {
    /// Network with He-uniform weights and zero biases.
    pub fn new(spec: NetSpec, rng: &mut Rng) -> Result<Self> {
        let mut net = Self::zeros(spec)?;
        for (i, l) in net.spec.layers.clone().iter().enumerate() {
            let s = net.shapes[i];
            let off = net.offsets[i];
            match *l {
                LayerSpec::Conv { kh, kw, filters, .. } => {
                    let fan_in = (kh * kw * s.c) as f64;
                    let lim = libm::sqrt(6.0 / fan_in);
                    for p in &mut net.params[off..off + kh * kw * s.c * filters] {
                        *p = rng.random_range(-lim..lim);
                    }
                }
                LayerSpec::Dense { out, .. } => {
                    let lim = libm::sqrt(6.0 / s.c as f64);
                    for p in &mut net.params[off..off + s.c * out] {
                        *p = rng.random_range(-lim..lim);
                    }
                }
                _ => {}
            }
        }
        Ok(net)
    }

    pub fn zeros(spec: NetSpec) -> Result<Self> {
        let shapes = spec.shapes()?;
        let mut offsets = Vec::with_capacity(spec.layers.len());
        let mut n = 0;
        for (l, s) in spec.layers.iter().zip(&shapes) {
            offsets.push(n);
            n += l.param_count(*s);
        }
        Ok(Self { spec, shapes, offsets, params: alloc::vec![0.0; n] })
    }

    pub fn param_count(&self) -> usize {
        self.params.len()
    }

    pub fn outputs(&self) -> usize {
        self.shapes.last().expect("non-empty").len()
    }

    /// Index of the convolution that reads the (padded) input image
    /// directly and therefore runs on its nonzero entries.
    fn sparse_conv_layer(&self) -> Option<usize> {
        let i = usize::from(matches!(self.spec.layers.first(), Some(LayerSpec::Pad { .. })));
        matches!(self.spec.layers.get(i), Some(LayerSpec::Conv { .. })).then_some(i)
    }

    fn check_input(&self, input: &Input) -> Result<()> {
        if input.shape() != self.spec.input {
            return Err(Error::Shape(alloc::format!("input {} for network expecting {}", input.shape(), self.spec.input)));
        }
        Ok(())
    }

    /// Action values for one input.
    pub fn forward(&self, input: &Input) -> Result<Vec<f64>> {
        let mut ws = Workspace::default();
        self.forward_with(&self.params, input, &mut ws)
    }

    /// Forward pass with alternative parameters (a target copy).
    pub fn forward_params(&self, params: &[f64], input: &Input) -> Result<Vec<f64>> {
        let mut ws = Workspace::default();
        self.forward_with(params, input, &mut ws)
    }

    /// Forward pass recording activations in `ws` for [`Network::backward`].
    pub fn forward_with(&self, params: &[f64], input: &Input, ws: &mut Workspace) -> Result<Vec<f64>> {
        self.check_input(input)?;
        let n = self.spec.layers.len();
        ws.acts.resize_with(n, Vec::new);
        ws.argmax.resize_with(n, Vec::new);
        // Leading padding is folded into the sparse index remap.
        let mut first = 0;
        let mut in_shape = self.spec.input;
        ws.nonzeros.clear();
        match input {
            Input::Sparse { entries, .. } => ws.nonzeros.extend_from_slice(entries),
            Input::Dense(t) => {
                ws.nonzeros.extend(t.data.iter().enumerate().filter(|(_, v)| **v != 0.0).map(|(i, v)| (i as u32, *v)))
            }
        }
        if let Some(LayerSpec::Pad { .. }) = self.spec.layers.first() {
            let out = self.shapes[1];
            remap_padded(&mut ws.nonzeros, in_shape, out);
            let act = &mut ws.acts[0];
            act.clear();
            act.resize(out.len(), 0.0);
            for &(i, v) in &ws.nonzeros {
                act[i as usize] = v;
            }
            in_shape = out;
            first = 1;
        }
        if first < n {
            if let LayerSpec::Conv { kh, kw, sh, sw, filters } = self.spec.layers[first] {
                let out_shape = self.shapes[first + 1];
                let w = &params[self.offsets[first]..];
                let act = &mut ws.acts[first];
                act.clear();
                act.resize(out_shape.len(), 0.0);
                conv_forward_sparse(&ws.nonzeros, in_shape, w, kh, kw, sh, sw, filters, out_shape, act);
                relu(act);
                first += 1;
            } else if first == 0 {
                let act = &mut ws.acts[0];
                act.clear();
                act.resize(in_shape.len(), 0.0);
                for &(i, v) in &ws.nonzeros {
                    act[i as usize] = v;
                }
                // Layer 0 consumes this dense copy below.
                let copy = core::mem::take(act);
                self.layer_forward(params, 0, &copy, ws);
                first = 1;
            }
        }
        for i in first..n {
            let input_act = core::mem::take(&mut ws.acts[i - 1]);
            self.layer_forward(params, i, &input_act, ws);
            ws.acts[i - 1] = input_act;
        }
        Ok(ws.acts[n - 1].clone())
    }

    fn layer_forward(&self, params: &[f64], i: usize, x: &[f64], ws: &mut Workspace) {
        let s_in = self.shapes[i];
        let s_out = self.shapes[i + 1];
        let mut out = core::mem::take(&mut ws.acts[i]);
        out.clear();
        out.resize(s_out.len(), 0.0);
        match self.spec.layers[i] {
            LayerSpec::Conv { kh, kw, sh, sw, filters } => {
                conv_forward_dense(x, s_in, &params[self.offsets[i]..], kh, kw, sh, sw, filters, s_out, &mut out);
                relu(&mut out);
            }
            LayerSpec::MaxPool { ph, pw } => {
                let am = &mut ws.argmax[i];
                am.clear();
                am.resize(s_out.len(), 0);
                maxpool_forward(x, s_in, ph, pw, s_out, &mut out, am);
            }
            LayerSpec::Pad { .. } => {
                let (top, left) = pad_offsets(s_in, s_out);
                for y in 0..s_in.h {
                    let src = &x[s_in.index(y, 0, 0)..s_in.index(y, 0, 0) + s_in.w * s_in.c];
                    let dst = s_out.index(y + top, left, 0);
                    out[dst..dst + src.len()].copy_from_slice(src);
                }
            }
            LayerSpec::Reshape => out.copy_from_slice(x),
            LayerSpec::Dense { out: n_out, relu: r } => {
                let off = self.offsets[i];
                let w = &params[off..off + s_in.c * n_out];
                let b = &params[off + s_in.c * n_out..off + s_in.c * n_out + n_out];
                out.copy_from_slice(b);
                for (k, &xv) in x.iter().enumerate() {
                    if xv == 0.0 {
                        continue;
                    }
                    axpy(&mut out, xv, &w[k * n_out..(k + 1) * n_out]);
                }
                if r {
                    relu(&mut out);
                }
            }
        }
        ws.acts[i] = out;
    }

    /// Whether the input of layer `i` has passed through a ReLU with only
    /// padding, pooling or reshaping since. Input gradients at zero entries
    /// of such an input are discarded by that ReLU and are not computed.
    fn rectified_input(&self, i: usize) -> bool {
        for l in self.spec.layers[..i].iter().rev() {
            match l {
                LayerSpec::Conv { .. } => return true,
                LayerSpec::Dense { relu, .. } => return *relu,
                LayerSpec::MaxPool { .. } | LayerSpec::Pad { .. } | LayerSpec::Reshape => {}
            }
        }
        false
    }

    /// Accumulate parameter gradients of `dout . output` into `grads`,
    /// using activations from the last [`Network::forward_with`] on the same
    /// input.
    pub fn backward(&self, params: &[f64], ws: &mut Workspace, dout: &[f64], grads: &mut [f64]) {
        let n = self.spec.layers.len();
        let mut g = core::mem::take(&mut ws.grads_a);
        let mut gin = core::mem::take(&mut ws.grads_b);
        g.clear();
        g.extend_from_slice(dout);
        // The first parametrized layer never needs an input gradient.
        let first_param = self
            .spec
            .layers
            .iter()
            .position(|l| matches!(l, LayerSpec::Conv { .. } | LayerSpec::Dense { .. }))
            .unwrap_or(n);
        for i in (0..n).rev() {
            if i < first_param {
                break;
            }
            let need_dx = i > first_param;
            let rectified = self.rectified_input(i);
            let s_in = self.shapes[i];
            let s_out = self.shapes[i + 1];
            let out = &ws.acts[i];
            gin.clear();
            if need_dx {
                gin.resize(s_in.len(), 0.0);
            }
            match self.spec.layers[i] {
                LayerSpec::Conv { kh, kw, sh, sw, filters } => {
                    for (gv, &o) in g.iter_mut().zip(out.iter()) {
                        if o <= 0.0 {
                            *gv = 0.0;
                        }
                    }
                    let off = self.offsets[i];
                    let len = kh * kw * s_in.c * filters;
                    let gw = &mut grads[off..off + len];
                    let w = &params[off..off + len];
                    if Some(i) == self.sparse_conv_layer() {
                        // First convolution: the input is the (padded) sparse image.
                        conv_backward_sparse(&ws.nonzeros, s_in, kh, kw, sh, sw, filters, s_out, &g, gw);
                    } else {
                        let x = &ws.acts[i - 1];
                        let gx = if need_dx { Some(&mut gin) } else { None };
                        conv_backward_dense(x, s_in, w, kh, kw, sh, sw, filters, s_out, &g, gw, gx, rectified);
                    }
                }
                LayerSpec::MaxPool { .. } => {
                    if need_dx {
                        for (k, &src) in ws.argmax[i].iter().enumerate() {
                            gin[src as usize] += g[k];
                        }
                    }
                }
                LayerSpec::Pad { .. } => {
                    if need_dx {
                        let (top, left) = pad_offsets(s_in, s_out);
                        for y in 0..s_in.h {
                            let src = s_out.index(y + top, left, 0);
                            let dst = s_in.index(y, 0, 0);
                            let w = s_in.w * s_in.c;
                            gin[dst..dst + w].copy_from_slice(&g[src..src + w]);
                        }
                    }
                }
                LayerSpec::Reshape => {
                    if need_dx {
                        gin.copy_from_slice(&g);
                    }
                }
                LayerSpec::Dense { out: n_out, relu: r } => {
                    if r {
                        for (gv, &o) in g.iter_mut().zip(out.iter()) {
                            if o <= 0.0 {
                                *gv = 0.0;
                            }
                        }
                    }
                    let off = self.offsets[i];
                    let n_in = s_in.c;
                    let x: &[f64] = if i == 0 { &[] } else { &ws.acts[i - 1] };
                    let x_at = |k: usize| -> f64 {
                        if i == 0 {
                            ws.nonzeros.iter().find(|(j, _)| *j as usize == k).map(|p| p.1).unwrap_or(0.0)
                        } else {
                            x[k]
                        }
                    };
                    let (gw, gb) = grads[off..off + n_in * n_out + n_out].split_at_mut(n_in * n_out);
                    for (b, gv) in gb.iter_mut().zip(&g) {
                        *b += gv;
                    }
                    let w = &params[off..off + n_in * n_out];
                    for k in 0..n_in {
                        let xv = x_at(k);
                        if xv != 0.0 {
                            axpy(&mut gw[k * n_out..(k + 1) * n_out], xv, &g);
                        }
                        if need_dx && (xv != 0.0 || !rectified) {
                            gin[k] = dot(&w[k * n_out..(k + 1) * n_out], &g);
                        }
                    }
                }
            }
            if need_dx {
                core::mem::swap(&mut g, &mut gin);
            }
        }
        ws.grads_a = g;
        ws.grads_b = gin;
    }
}

fn pad_offsets(s_in: Shape, s_out: Shape) -> (usize, usize) {
    ((s_out.h - s_in.h) / 2, (s_out.w - s_in.w) / 2)
}

fn remap_padded(entries: &mut [(u32, f64)], s_in: Shape, s_out: Shape) {
    let (top, left) = pad_offsets(s_in, s_out);
    for e in entries.iter_mut() {
        let i = e.0 as usize;
        let c = i % s_in.c;
        let x = (i / s_in.c) % s_in.w;
        let y = i / (s_in.c * s_in.w);
        e.0 = s_out.index(y + top, x + left, c) as u32;
    }
}

#[inline]
fn axpy(y: &mut [f64], a: f64, x: &[f64]) {
    for (yv, xv) in y.iter_mut().zip(x) {
        *yv += a * xv;
    }
}

/// Dot product with four fixed partial sums (deterministic order).
#[inline]
fn dot(a: &[f64], b: &[f64]) -> f64 {
    let mut s = [0.0; 4];
    let chunks = a.len() / 4;
    for k in 0..chunks {
        for j in 0..4 {
            s[j] += a[4 * k + j] * b[4 * k + j];
        }
    }
    let mut tail = 0.0;
    for k in chunks * 4..a.len() {
        tail += a[k] * b[k];
    }
    (s[0] + s[1]) + (s[2] + s[3]) + tail
}

fn relu(x: &mut [f64]) {
    for v in x {
        if *v < 0.0 {
            *v = 0.0;
        }
    }
}

/// Output positions along one axis whose window covers input index `i`.
#[inline]
fn covering(i: usize, k: usize, s: usize, n_out: usize) -> core::ops::Range<usize> {
    // o * s <= i < o * s + k
    let lo = if i + 1 > k { (i + 1 - k).div_ceil(s) } else { 0 };
    let hi = (i / s + 1).min(n_out);
    lo..hi.max(lo)
}

#[allow(clippy::too_many_arguments)]
fn conv_forward_sparse(entries: &[(u32, f64)], s_in: Shape, w: &[f64], kh: usize, kw: usize, sh: usize, sw: usize, co: usize, s_out: Shape, out: &mut [f64]) {
    let ci = s_in.c;
    for &(idx, v) in entries {
        let idx = idx as usize;
        let c = idx % ci;
        let x = (idx / ci) % s_in.w;
        let y = idx / (ci * s_in.w);
        for oy in covering(y, kh, sh, s_out.h) {
            let ky = y - oy * sh;
            for ox in covering(x, kw, sw, s_out.w) {
                let kx = x - ox * sw;
                let wrow = &w[((ky * kw + kx) * ci + c) * co..][..co];
                let o = (oy * s_out.w + ox) * co;
                axpy(&mut out[o..o + co], v, wrow);
            }
        }
    }
}

#[allow(clippy::too_many_arguments)]
fn conv_backward_sparse(entries: &[(u32, f64)], s_in: Shape, kh: usize, kw: usize, sh: usize, sw: usize, co: usize, s_out: Shape, g: &[f64], gw: &mut [f64]) {
    let ci = s_in.c;
    for &(idx, v) in entries {
        let idx = idx as usize;
        let c = idx % ci;
        let x = (idx / ci) % s_in.w;
        let y = idx / (ci * s_in.w);
        for oy in covering(y, kh, sh, s_out.h) {
            let ky = y - oy * sh;
            for ox in covering(x, kw, sw, s_out.w) {
                let kx = x - ox * sw;
                let o = (oy * s_out.w + ox) * co;
                axpy(&mut gw[((ky * kw + kx) * ci + c) * co..][..co], v, &g[o..o + co]);
            }
        }
    }
}

#[allow(clippy::too_many_arguments)]
fn conv_forward_dense(x: &[f64], s_in: Shape, w: &[f64], kh: usize, kw: usize, sh: usize, sw: usize, co: usize, s_out: Shape, out: &mut [f64]) {
    let ci = s_in.c;
    for oy in 0..s_out.h {
        for ox in 0..s_out.w {
            let o = (oy * s_out.w + ox) * co;
            let acc = &mut out[o..o + co];
            for ky in 0..kh {
                let iy = oy * sh + ky;
                for kx in 0..kw {
                    let ix = ox * sw + kx;
                    let base = (iy * s_in.w + ix) * ci;
                    let wbase = (ky * kw + kx) * ci * co;
                    for c in 0..ci {
                        let xv = x[base + c];
                        if xv != 0.0 {
                            axpy(acc, xv, &w[wbase + c * co..wbase + (c + 1) * co]);
                        }
                    }
                }
            }
        }
    }
}

#[allow(clippy::too_many_arguments)]
fn conv_backward_dense(
    x: &[f64],
    s_in: Shape,
    w: &[f64],
    kh: usize,
    kw: usize,
    sh: usize,
    sw: usize,
    co: usize,
    s_out: Shape,
    g: &[f64],
    gw: &mut [f64],
    mut gx: Option<&mut Vec<f64>>,
    rectified: bool,
) {
    let ci = s_in.c;
    for oy in 0..s_out.h {
        for ox in 0..s_out.w {
            let o = (oy * s_out.w + ox) * co;
            let go = &g[o..o + co];
            if go.iter().all(|v| *v == 0.0) {
                continue;
            }
            for ky in 0..kh {
                let iy = oy * sh + ky;
                for kx in 0..kw {
                    let ix = ox * sw + kx;
                    let base = (iy * s_in.w + ix) * ci;
                    let wbase = (ky * kw + kx) * ci * co;
                    for c in 0..ci {
                        let xv = x[base + c];
                        let range = wbase + c * co..wbase + (c + 1) * co;
                        if xv != 0.0 {
                            axpy(&mut gw[range.clone()], xv, go);
                        } else if rectified {
                            continue;
                        }
                        if let Some(gx) = gx.as_deref_mut() {
                            gx[base + c] += dot(&w[range], go);
                        }
                    }
                }
            }
        }
    }
}

fn maxpool_forward(x: &[f64], s_in: Shape, ph: usize, pw: usize, s_out: Shape, out: &mut [f64], argmax: &mut [u32]) {
    let c = s_in.c;
    for oy in 0..s_out.h {
        for ox in 0..s_out.w {
            for ch in 0..c {
                let mut best = f64::NEG_INFINITY;
                let mut arg = 0;
                for dy in 0..ph {
                    for dx in 0..pw {
                        let i = s_in.index(oy * ph + dy, ox * pw + dx, ch);
                        if x[i] > best {
                            best = x[i];
                            arg = i;
                        }
                    }
                }
                let o = s_out.index(oy, ox, ch);
                out[o] = best;
                argmax[o] = arg as u32;
            }
        }
    }
}
