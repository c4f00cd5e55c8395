//! Reverse-mode autodiff over a recorded tape.
//!
//! A [`Graph`] evaluates operations immediately. In recording mode every
//! result that (transitively) depends on a gradient-requiring leaf also gets
//! a tape node, so [`Graph::backward`] can replay the chain in reverse. In
//! inference mode nothing is recorded and intermediate tensors are freed as
//! soon as the caller drops its handles, which keeps full-resolution
//! enhancement memory-bounded.
//!
//! Values are shared via `Arc`, so model parameters enter the tape without
//! being copied, and frozen branches (e.g. the perceptual backbone applied to
//! reference images) cost no tape space at all.

use alloc::sync::Arc;
use alloc::vec;
use alloc::vec::Vec;

use crate::color;
use crate::ops::{self, ConvSpec};
use crate::scalar::Scalar;
use crate::tensor::{Shape, Tensor};

/// Handle to a tensor produced on a [`Graph`].
#[derive(Debug, Clone)]
pub struct Value<T> {
    data: Arc<Tensor<T>>,
    node: Option<usize>,
}

impl<T: Scalar> Value<T> {
    pub fn tensor(&self) -> &Tensor<T> {
        &self.data
    }

    pub fn shape(&self) -> Shape {
        self.data.shape()
    }

    /// Scalar payload of a 1x1x1 value.
    pub fn item(&self) -> T {
        self.data.item()
    }

    pub fn on_tape(&self) -> bool {
        self.node.is_some()
    }
}

enum Parent<T> {
    Node(usize),
    Const(Arc<Tensor<T>>),
}

impl<T> Parent<T> {
    fn node(&self) -> Option<usize> {
        match self {
            Parent::Node(i) => Some(*i),
            Parent::Const(_) => None,
        }
    }
}

enum Op<T: Scalar> {
    Leaf,
    Conv2d { spec: ConvSpec },
    SeparableValid { window: Arc<Vec<T>> },
    MaxPool2 { arg: Vec<u32> },
    Upsample2,
    ReflectPad { pads: (usize, usize, usize, usize) },
    Crop { y0: usize, x0: usize },
    GlobalAvgPool,
    Relu,
    Sigmoid,
    Tanh,
    Abs,
    Add,
    Sub,
    Mul,
    Div,
    Affine { mul: T },
    ChannelScale,
    PlaneScale,
    ChannelAffine { scale: Vec<T> },
    Mean,
    Sum,
    ChromaToRgb { luma: Arc<Tensor<T>> },
}

struct Node<T: Scalar> {
    value: Arc<Tensor<T>>,
    op: Op<T>,
    parents: Vec<Parent<T>>,
}

/// Immediate-mode computation tape.
pub struct Graph<T: Scalar> {
    nodes: Vec<Node<T>>,
    recording: bool,
    /// Parameter dedup: (Arc pointer, node index).
    param_nodes: Vec<(usize, usize)>,
}

impl<T: Scalar> Graph<T> {
    /// Graph that records for backpropagation.
    pub fn recording() -> Self {
        Graph { nodes: Vec::new(), recording: true, param_nodes: Vec::new() }
    }

    /// Graph that only evaluates; `backward` is unavailable.
    pub fn inference() -> Self {
        Graph { nodes: Vec::new(), recording: false, param_nodes: Vec::new() }
    }

    pub fn is_recording(&self) -> bool {
        self.recording
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    /// Introduce an input tensor. With `requires_grad`, gradients w.r.t. this
    /// leaf are available after `backward`.
    pub fn input(&mut self, t: Tensor<T>, requires_grad: bool) -> Value<T> {
        let data = Arc::new(t);
        if self.recording && requires_grad {
            self.nodes.push(Node { value: data.clone(), op: Op::Leaf, parents: vec![] });
            Value { data, node: Some(self.nodes.len() - 1) }
        } else {
            Value { data, node: None }
        }
    }

    /// Introduce a constant (never differentiated, never recorded).
    pub fn constant(&mut self, t: Tensor<T>) -> Value<T> {
        Value { data: Arc::new(t), node: None }
    }

    /// Register a shared parameter. Repeated registration of the same `Arc`
    /// yields the same tape leaf so gradients accumulate in one slot.
    pub fn param(&mut self, p: &Arc<Tensor<T>>) -> Value<T> {
        if !self.recording {
            return Value { data: p.clone(), node: None };
        }
        let key = Arc::as_ptr(p) as usize;
        if let Some(&(_, idx)) = self.param_nodes.iter().find(|(k, _)| *k == key) {
            return Value { data: p.clone(), node: Some(idx) };
        }
        self.nodes.push(Node { value: p.clone(), op: Op::Leaf, parents: vec![] });
        let idx = self.nodes.len() - 1;
        self.param_nodes.push((key, idx));
        Value { data: p.clone(), node: Some(idx) }
    }

    /// Use a shared tensor without tracking gradients (frozen weights).
    pub fn frozen(&mut self, p: &Arc<Tensor<T>>) -> Value<T> {
        Value { data: p.clone(), node: None }
    }

    fn record(&mut self, out: Tensor<T>, op: Op<T>, inputs: &[&Value<T>]) -> Value<T> {
        let data = Arc::new(out);
        let tracked = self.recording && inputs.iter().any(|v| v.node.is_some());
        if !tracked {
            return Value { data, node: None };
        }
        let parents = inputs
            .iter()
            .map(|v| match v.node {
                Some(i) => Parent::Node(i),
                None => Parent::Const(v.data.clone()),
            })
            .collect();
        self.nodes.push(Node { value: data.clone(), op, parents });
        Value { data, node: Some(self.nodes.len() - 1) }
    }

    // ---- spatial ops -------------------------------------------------

    /// Convolution with weights `[c_out, c_in, k*k]` and bias `[c_out, 1, 1]`.
    pub fn conv2d(&mut self, x: &Value<T>, w: &Value<T>, b: &Value<T>, spec: ConvSpec) -> Value<T> {
        debug_assert_eq!(
            w.shape().h * w.shape().w,
            x.shape().c * spec.k * spec.k,
            "conv weight {} does not fit input {} with k={}",
            w.shape(),
            x.shape(),
            spec.k
        );
        let out = ops::conv2d(&x.data, &w.data, &b.data, spec);
        self.record(out, Op::Conv2d { spec }, &[x, w, b])
    }

    /// Per-channel separable valid filtering with a fixed window.
    pub fn separable_valid(&mut self, x: &Value<T>, window: &Arc<Vec<T>>) -> Value<T> {
        let out = ops::separable_valid(&x.data, window);
        self.record(out, Op::SeparableValid { window: window.clone() }, &[x])
    }

    pub fn maxpool2(&mut self, x: &Value<T>) -> Value<T> {
        let (out, arg) = ops::maxpool2(&x.data);
        self.record(out, Op::MaxPool2 { arg }, &[x])
    }

    pub fn upsample2(&mut self, x: &Value<T>) -> Value<T> {
        let out = ops::upsample2(&x.data);
        self.record(out, Op::Upsample2, &[x])
    }

    pub fn reflect_pad(&mut self, x: &Value<T>, pads: (usize, usize, usize, usize)) -> Value<T> {
        let out = ops::reflect_pad(&x.data, pads);
        self.record(out, Op::ReflectPad { pads }, &[x])
    }

    pub fn crop(&mut self, x: &Value<T>, y0: usize, x0: usize, h: usize, w: usize) -> Value<T> {
        let out = ops::crop(&x.data, y0, x0, h, w);
        self.record(out, Op::Crop { y0, x0 }, &[x])
    }

    pub fn global_avg_pool(&mut self, x: &Value<T>) -> Value<T> {
        let out = ops::global_avg_pool(&x.data);
        self.record(out, Op::GlobalAvgPool, &[x])
    }

    // ---- pointwise ops ------------------------------------------------

    pub fn relu(&mut self, x: &Value<T>) -> Value<T> {
        let out = x.data.map(|v| v.max(T::zero()));
        self.record(out, Op::Relu, &[x])
    }

    pub fn sigmoid(&mut self, x: &Value<T>) -> Value<T> {
        let out = x.data.map(|v| T::one() / (T::one() + (-v).exp()));
        self.record(out, Op::Sigmoid, &[x])
    }

    pub fn tanh(&mut self, x: &Value<T>) -> Value<T> {
        let out = x.data.map(|v| v.tanh());
        self.record(out, Op::Tanh, &[x])
    }

    pub fn abs(&mut self, x: &Value<T>) -> Value<T> {
        let out = x.data.map(|v| v.abs());
        self.record(out, Op::Abs, &[x])
    }

    /// `mul * x + add`, elementwise with scalars.
    pub fn affine(&mut self, x: &Value<T>, mul: T, add: T) -> Value<T> {
        let out = x.data.map(|v| mul * v + add);
        self.record(out, Op::Affine { mul }, &[x])
    }

    fn zip(&mut self, a: &Value<T>, b: &Value<T>, op: Op<T>, f: impl Fn(T, T) -> T) -> Value<T> {
        debug_assert_eq!(a.shape(), b.shape(), "elementwise shape mismatch");
        let data = a
            .data
            .data()
            .iter()
            .zip(b.data.data())
            .map(|(&x, &y)| f(x, y))
            .collect();
        let out = Tensor::from_vec(a.shape(), data).expect("zip shape");
        self.record(out, op, &[a, b])
    }

    pub fn add(&mut self, a: &Value<T>, b: &Value<T>) -> Value<T> {
        self.zip(a, b, Op::Add, |x, y| x + y)
    }

    pub fn sub(&mut self, a: &Value<T>, b: &Value<T>) -> Value<T> {
        self.zip(a, b, Op::Sub, |x, y| x - y)
    }

    pub fn mul(&mut self, a: &Value<T>, b: &Value<T>) -> Value<T> {
        self.zip(a, b, Op::Mul, |x, y| x * y)
    }

    pub fn div(&mut self, a: &Value<T>, b: &Value<T>) -> Value<T> {
        self.zip(a, b, Op::Div, |x, y| x / y)
    }

    /// Multiply `[C, H, W]` by per-channel gains `[C, 1, 1]`.
    pub fn channel_scale(&mut self, x: &Value<T>, s: &Value<T>) -> Value<T> {
        debug_assert_eq!(s.shape(), Shape::new(x.shape().c, 1, 1));
        let mut out = (*x.data).clone();
        for c in 0..out.shape().c {
            let g = s.data.data()[c];
            for v in out.channel_mut(c) {
                *v = *v * g;
            }
        }
        self.record(out, Op::ChannelScale, &[x, s])
    }

    /// Multiply `[C, H, W]` by a spatial gate `[1, H, W]`.
    pub fn plane_scale(&mut self, x: &Value<T>, m: &Value<T>) -> Value<T> {
        debug_assert_eq!(m.shape(), Shape::new(1, x.shape().h, x.shape().w));
        let mut out = (*x.data).clone();
        let plane = m.data.data();
        let hw = plane.len();
        for c in 0..out.shape().c {
            for (v, g) in out.channel_mut(c).iter_mut().zip(plane.iter().take(hw)) {
                *v = *v * *g;
            }
        }
        self.record(out, Op::PlaneScale, &[x, m])
    }

    /// Fixed per-channel affine `scale[c] * x + shift[c]` (normalization with
    /// constants, e.g. backbone preprocessing).
    pub fn channel_affine(&mut self, x: &Value<T>, scale: &[T], shift: &[T]) -> Value<T> {
        debug_assert_eq!(scale.len(), x.shape().c);
        debug_assert_eq!(shift.len(), x.shape().c);
        let mut out = (*x.data).clone();
        for c in 0..out.shape().c {
            let (s, b) = (scale[c], shift[c]);
            for v in out.channel_mut(c) {
                *v = s * *v + b;
            }
        }
        self.record(out, Op::ChannelAffine { scale: scale.to_vec() }, &[x])
    }

    // ---- reductions ----------------------------------------------------

    pub fn mean(&mut self, x: &Value<T>) -> Value<T> {
        let out = Tensor::scalar(x.data.mean());
        self.record(out, Op::Mean, &[x])
    }

    pub fn sum(&mut self, x: &Value<T>) -> Value<T> {
        let out = Tensor::scalar(x.data.sum());
        self.record(out, Op::Sum, &[x])
    }

    // ---- domain ops ------------------------------------------------------

    /// Merge normalized chroma `[2, H, W]` with a constant lightness plane and
    /// convert to clamped sRGB `[3, H, W]`.
    pub fn chroma_to_rgb(&mut self, chroma: &Value<T>, luma: &Arc<Tensor<T>>) -> Value<T> {
        let out = color::chroma_to_rgb(&chroma.data, luma);
        self.record(out, Op::ChromaToRgb { luma: luma.clone() }, &[chroma])
    }

    // ---- backward --------------------------------------------------------

    /// Backpropagate from a scalar loss. Returns gradients for every tape
    /// node; look them up through the `Value`s you kept.
    pub fn backward(&self, loss: &Value<T>) -> Gradients<T> {
        let root = loss.node.expect("backward requires a recorded value (is the graph in inference mode?)");
        assert_eq!(loss.data.len(), 1, "backward requires a scalar loss");

        let mut grads: Vec<Option<Tensor<T>>> = (0..self.nodes.len()).map(|_| None).collect();
        grads[root] = Some(Tensor::scalar(T::one()));

        for idx in (0..=root).rev() {
            let Some(dy) = grads[idx].take() else { continue };
            let node = &self.nodes[idx];
            self.push_to_parents(node, &dy, &mut grads);
            // Leaf gradients are the caller-visible results.
            if matches!(node.op, Op::Leaf) {
                grads[idx] = Some(dy);
            }
        }

        Gradients { by_node: grads }
    }

    fn push_to_parents(&self, node: &Node<T>, dy: &Tensor<T>, grads: &mut [Option<Tensor<T>>]) {
        let parent_value = |p: &Parent<T>| -> Arc<Tensor<T>> {
            match p {
                Parent::Node(i) => self.nodes[*i].value.clone(),
                Parent::Const(t) => t.clone(),
            }
        };
        let mut send = |p: &Parent<T>, g: Tensor<T>| {
            if let Some(i) = p.node() {
                match &mut grads[i] {
                    Some(acc) => acc.add_assign(&g),
                    slot @ None => *slot = Some(g),
                }
            }
        };

        match &node.op {
            Op::Leaf => {}
            Op::Conv2d { spec } => {
                let x = parent_value(&node.parents[0]);
                let w = parent_value(&node.parents[1]);
                let need_dx = node.parents[0].node().is_some();
                let need_dw = node.parents[1].node().is_some() || node.parents[2].node().is_some();
                let (dx, dw, db) = ops::conv2d_backward(&x, &w, dy, *spec, need_dx, need_dw);
                if let Some(dx) = dx {
                    send(&node.parents[0], dx);
                }
                if let Some(dw) = dw {
                    send(&node.parents[1], dw);
                }
                if let Some(db) = db {
                    send(&node.parents[2], db);
                }
            }
            Op::SeparableValid { window } => {
                let x = parent_value(&node.parents[0]);
                send(&node.parents[0], ops::separable_valid_backward(x.shape(), dy, window));
            }
            Op::MaxPool2 { arg } => {
                let x = parent_value(&node.parents[0]);
                send(&node.parents[0], ops::maxpool2_backward(x.shape(), dy, arg));
            }
            Op::Upsample2 => {
                let x = parent_value(&node.parents[0]);
                send(&node.parents[0], ops::upsample2_backward(x.shape(), dy));
            }
            Op::ReflectPad { pads } => {
                let x = parent_value(&node.parents[0]);
                send(&node.parents[0], ops::reflect_pad_backward(x.shape(), dy, *pads));
            }
            Op::Crop { y0, x0 } => {
                let x = parent_value(&node.parents[0]);
                send(&node.parents[0], ops::crop_backward(x.shape(), dy, *y0, *x0));
            }
            Op::GlobalAvgPool => {
                let x = parent_value(&node.parents[0]);
                send(&node.parents[0], ops::global_avg_pool_backward(x.shape(), dy));
            }
            Op::Relu => {
                let x = parent_value(&node.parents[0]);
                let mut g = dy.clone();
                for (gv, &xv) in g.data_mut().iter_mut().zip(x.data()) {
                    if xv <= T::zero() {
                        *gv = T::zero();
                    }
                }
                send(&node.parents[0], g);
            }
            Op::Sigmoid => {
                let y = &node.value;
                let mut g = dy.clone();
                for (gv, &yv) in g.data_mut().iter_mut().zip(y.data()) {
                    *gv = *gv * yv * (T::one() - yv);
                }
                send(&node.parents[0], g);
            }
            Op::Tanh => {
                let y = &node.value;
                let mut g = dy.clone();
                for (gv, &yv) in g.data_mut().iter_mut().zip(y.data()) {
                    *gv = *gv * (T::one() - yv * yv);
                }
                send(&node.parents[0], g);
            }
            Op::Abs => {
                let x = parent_value(&node.parents[0]);
                let mut g = dy.clone();
                for (gv, &xv) in g.data_mut().iter_mut().zip(x.data()) {
                    *gv = *gv * if xv > T::zero() {
                        T::one()
                    } else if xv < T::zero() {
                        -T::one()
                    } else {
                        T::zero()
                    };
                }
                send(&node.parents[0], g);
            }
            Op::Add => {
                send(&node.parents[0], dy.clone());
                send(&node.parents[1], dy.clone());
            }
            Op::Sub => {
                send(&node.parents[0], dy.clone());
                let mut g = dy.clone();
                g.scale_assign(-T::one());
                send(&node.parents[1], g);
            }
            Op::Mul => {
                let a = parent_value(&node.parents[0]);
                let b = parent_value(&node.parents[1]);
                if node.parents[0].node().is_some() {
                    let mut g = dy.clone();
                    for (gv, &bv) in g.data_mut().iter_mut().zip(b.data()) {
                        *gv = *gv * bv;
                    }
                    send(&node.parents[0], g);
                }
                if node.parents[1].node().is_some() {
                    let mut g = dy.clone();
                    for (gv, &av) in g.data_mut().iter_mut().zip(a.data()) {
                        *gv = *gv * av;
                    }
                    send(&node.parents[1], g);
                }
            }
            Op::Div => {
                let b = parent_value(&node.parents[1]);
                let y = &node.value;
                if node.parents[0].node().is_some() {
                    let mut g = dy.clone();
                    for (gv, &bv) in g.data_mut().iter_mut().zip(b.data()) {
                        *gv = *gv / bv;
                    }
                    send(&node.parents[0], g);
                }
                if node.parents[1].node().is_some() {
                    let mut g = dy.clone();
                    for ((gv, &bv), &yv) in g.data_mut().iter_mut().zip(b.data()).zip(y.data()) {
                        *gv = -*gv * yv / bv;
                    }
                    send(&node.parents[1], g);
                }
            }
            Op::Affine { mul } => {
                let mut g = dy.clone();
                g.scale_assign(*mul);
                send(&node.parents[0], g);
            }
            Op::ChannelScale => {
                let x = parent_value(&node.parents[0]);
                let s = parent_value(&node.parents[1]);
                let c = x.shape().c;
                if node.parents[0].node().is_some() {
                    let mut g = dy.clone();
                    for ci in 0..c {
                        let gain = s.data()[ci];
                        for v in g.channel_mut(ci) {
                            *v = *v * gain;
                        }
                    }
                    send(&node.parents[0], g);
                }
                if node.parents[1].node().is_some() {
                    let mut gs = Tensor::zeros(Shape::new(c, 1, 1));
                    for ci in 0..c {
                        let mut acc = T::zero();
                        for (&g, &xv) in dy.channel(ci).iter().zip(x.channel(ci)) {
                            acc = acc + g * xv;
                        }
                        gs.data_mut()[ci] = acc;
                    }
                    send(&node.parents[1], gs);
                }
            }
            Op::PlaneScale => {
                let x = parent_value(&node.parents[0]);
                let m = parent_value(&node.parents[1]);
                let c = x.shape().c;
                if node.parents[0].node().is_some() {
                    let mut g = dy.clone();
                    let plane = m.data();
                    for ci in 0..c {
                        for (v, &gate) in g.channel_mut(ci).iter_mut().zip(plane) {
                            *v = *v * gate;
                        }
                    }
                    send(&node.parents[0], g);
                }
                if node.parents[1].node().is_some() {
                    let mut gm = Tensor::zeros(m.shape());
                    for ci in 0..c {
                        for ((o, &g), &xv) in
                            gm.data_mut().iter_mut().zip(dy.channel(ci)).zip(x.channel(ci))
                        {
                            *o = *o + g * xv;
                        }
                    }
                    send(&node.parents[1], gm);
                }
            }
            Op::ChannelAffine { scale } => {
                let mut g = dy.clone();
                for (ci, &s) in scale.iter().enumerate() {
                    for v in g.channel_mut(ci) {
                        *v = *v * s;
                    }
                }
                send(&node.parents[0], g);
            }
            Op::Mean => {
                let x = parent_value(&node.parents[0]);
                let g = dy.item() / T::from_f64(x.len() as f64);
                send(&node.parents[0], Tensor::full(x.shape(), g));
            }
            Op::Sum => {
                let x = parent_value(&node.parents[0]);
                send(&node.parents[0], Tensor::full(x.shape(), dy.item()));
            }
            Op::ChromaToRgb { luma } => {
                let chroma = parent_value(&node.parents[0]);
                send(&node.parents[0], color::chroma_to_rgb_backward(&chroma, luma, dy));
            }
        }
    }
}

impl<T: Scalar> Graph<T> {
    /// Gradient w.r.t. a parameter registered via [`Graph::param`], found by
    /// `Arc` identity.
    pub fn param_grad<'g>(&self, grads: &'g Gradients<T>, p: &Arc<Tensor<T>>) -> Option<&'g Tensor<T>> {
        let key = Arc::as_ptr(p) as usize;
        self.param_nodes
            .iter()
            .find(|(k, _)| *k == key)
            .and_then(|&(_, idx)| grads.by_node.get(idx).and_then(|g| g.as_ref()))
    }
}

/// Gradients produced by [`Graph::backward`].
pub struct Gradients<T> {
    by_node: Vec<Option<Tensor<T>>>,
}

impl<T: Scalar> Gradients<T> {
    /// Gradient w.r.t. a value (must be a gradient-requiring leaf).
    pub fn wrt(&self, v: &Value<T>) -> Option<&Tensor<T>> {
        v.node.and_then(|i| self.by_node.get(i).and_then(|g| g.as_ref()))
    }
}
