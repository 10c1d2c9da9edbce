use crate::error::{Error, Result};

use super::conv::{self, ConvShape};
use super::Scalar;

/// Handle to a tensor recorded in a [`Graph`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Var(pub(crate) usize);

#[derive(Debug, Clone)]
enum Op<T> {
    Leaf,
    Add(Var, Var),
    Sub(Var, Var),
    Mul(Var, Var),
    Div(Var, Var),
    Scale(Var, T),
    AddScalar(Var),
    Relu(Var),
    Tanh(Var),
    Abs(Var),
    Clamp(Var, T, T),
    Sum(Var),
    Mean(Var),
    Concat(Var, Var),
    Conv2d {
        x: Var,
        w: Var,
        b: Var,
        shape: ConvShape,
    },
    GlobalAvgPool(Var),
    Linear {
        x: Var,
        w: Var,
        b: Var,
    },
    GaussianValid {
        x: Var,
        taps: Vec<T>,
    },
    AngularConv {
        x: Var,
        taps: Vec<(usize, T)>,
    },
}

#[derive(Debug, Clone)]
struct Node<T> {
    shape: Vec<usize>,
    value: Vec<T>,
    op: Op<T>,
    requires_grad: bool,
}

/// Tape of tensors and the operations that produced them.
///
/// Nodes are append-only, so every input of a node has a smaller index and
/// the recorded graph is acyclic by construction. Nothing is freed until the
/// graph is dropped.
#[derive(Debug, Clone, Default)]
pub struct Graph<T> {
    nodes: Vec<Node<T>>,
    grads: Vec<Option<Vec<T>>>,
}

fn numel(shape: &[usize]) -> usize {
    shape.iter().product()
}

fn mismatch(what: &str, a: &[usize], b: &[usize]) -> Error {
    Error::ShapeMismatch(format!("{what}: {a:?} vs {b:?}"))
}

fn add_into<T: Scalar>(slot: &mut Option<Vec<T>>, len: usize) -> &mut Vec<T> {
    slot.get_or_insert_with(|| vec![T::zero(); len])
}

impl<T: Scalar> Graph<T> {
    pub fn new() -> Self {
        Self {
            nodes: Vec::new(),
            grads: Vec::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    fn push(&mut self, shape: Vec<usize>, value: Vec<T>, op: Op<T>, requires_grad: bool) -> Var {
        debug_assert_eq!(numel(&shape), value.len());
        self.nodes.push(Node {
            shape,
            value,
            op,
            requires_grad,
        });
        self.grads.push(None);
        Var(self.nodes.len() - 1)
    }

    fn node(&self, v: Var) -> &Node<T> {
        &self.nodes[v.0]
    }

    /// Records an input tensor.
    pub fn leaf(&mut self, shape: &[usize], data: Vec<T>, requires_grad: bool) -> Result<Var> {
        if numel(shape) != data.len() {
            return Err(Error::ShapeMismatch(format!(
                "shape {shape:?} needs {} values, got {}",
                numel(shape),
                data.len()
            )));
        }
        Ok(self.push(shape.to_vec(), data, Op::Leaf, requires_grad))
    }

    pub fn constant(&mut self, shape: &[usize], data: Vec<T>) -> Result<Var> {
        self.leaf(shape, data, false)
    }

    pub fn param(&mut self, shape: &[usize], data: Vec<T>) -> Result<Var> {
        self.leaf(shape, data, true)
    }

    pub fn scalar(&mut self, v: T) -> Var {
        self.push(vec![1], vec![v], Op::Leaf, false)
    }

    pub fn shape(&self, v: Var) -> &[usize] {
        &self.node(v).shape
    }

    pub fn value(&self, v: Var) -> &[T] {
        &self.node(v).value
    }

    pub fn item(&self, v: Var) -> T {
        self.node(v).value[0]
    }

    pub fn requires_grad(&self, v: Var) -> bool {
        self.node(v).requires_grad
    }

    /// Accumulated gradient of a `requires_grad` leaf, if any backward reached it.
    pub fn grad(&self, v: Var) -> Option<&[T]> {
        self.grads[v.0].as_deref()
    }

    pub fn zero_grad(&mut self) {
        self.grads.iter_mut().for_each(|g| *g = None);
    }

    fn unary(&mut self, x: Var, op: Op<T>, f: impl Fn(T) -> T) -> Var {
        let n = self.node(x);
        let value = n.value.iter().map(|&a| f(a)).collect();
        let (shape, rg) = (n.shape.clone(), n.requires_grad);
        self.push(shape, value, op, rg)
    }

    fn binary(
        &mut self,
        what: &str,
        x: Var,
        y: Var,
        op: Op<T>,
        f: impl Fn(T, T) -> T,
    ) -> Result<Var> {
        let (a, b) = (self.node(x), self.node(y));
        if a.shape != b.shape {
            return Err(mismatch(what, &a.shape, &b.shape));
        }
        let value = a
            .value
            .iter()
            .zip(&b.value)
            .map(|(&p, &q)| f(p, q))
            .collect();
        let (shape, rg) = (a.shape.clone(), a.requires_grad || b.requires_grad);
        Ok(self.push(shape, value, op, rg))
    }

    pub fn add(&mut self, x: Var, y: Var) -> Result<Var> {
        self.binary("add", x, y, Op::Add(x, y), |a, b| a + b)
    }

    pub fn sub(&mut self, x: Var, y: Var) -> Result<Var> {
        self.binary("sub", x, y, Op::Sub(x, y), |a, b| a - b)
    }

    pub fn mul(&mut self, x: Var, y: Var) -> Result<Var> {
        self.binary("mul", x, y, Op::Mul(x, y), |a, b| a * b)
    }

    pub fn div(&mut self, x: Var, y: Var) -> Result<Var> {
        self.binary("div", x, y, Op::Div(x, y), |a, b| a / b)
    }

    pub fn scale(&mut self, x: Var, s: T) -> Var {
        self.unary(x, Op::Scale(x, s), |a| a * s)
    }

    pub fn add_scalar(&mut self, x: Var, s: T) -> Var {
        self.unary(x, Op::AddScalar(x), |a| a + s)
    }

    pub fn relu(&mut self, x: Var) -> Var {
        self.unary(
            x,
            Op::Relu(x),
            |a| if a > T::zero() { a } else { T::zero() },
        )
    }

    pub fn tanh(&mut self, x: Var) -> Var {
        self.unary(x, Op::Tanh(x), |a| a.tanh())
    }

    pub fn abs(&mut self, x: Var) -> Var {
        self.unary(x, Op::Abs(x), |a| a.abs())
    }

    pub fn clamp(&mut self, x: Var, lo: T, hi: T) -> Var {
        self.unary(x, Op::Clamp(x, lo, hi), |a| a.max(lo).min(hi))
    }

    pub fn sum(&mut self, x: Var) -> Var {
        let n = self.node(x);
        let s = n.value.iter().copied().sum();
        let rg = n.requires_grad;
        self.push(vec![1], vec![s], Op::Sum(x), rg)
    }

    pub fn mean(&mut self, x: Var) -> Var {
        let n = self.node(x);
        let s: T = n.value.iter().copied().sum();
        let m = s / T::of(n.value.len() as f64);
        let rg = n.requires_grad;
        self.push(vec![1], vec![m], Op::Mean(x), rg)
    }

    /// Concatenation along dimension 1 (channels for NCHW, features for NF).
    pub fn concat(&mut self, x: Var, y: Var) -> Result<Var> {
        let (a, b) = (self.node(x), self.node(y));
        if a.shape.len() < 2
            || a.shape.len() != b.shape.len()
            || a.shape[0] != b.shape[0]
            || a.shape[2..] != b.shape[2..]
        {
            return Err(mismatch("concat", &a.shape, &b.shape));
        }
        let n = a.shape[0];
        let (ia, ib) = (a.value.len() / n, b.value.len() / n);
        let mut value = Vec::with_capacity(a.value.len() + b.value.len());
        for s in 0..n {
            value.extend_from_slice(&a.value[s * ia..(s + 1) * ia]);
            value.extend_from_slice(&b.value[s * ib..(s + 1) * ib]);
        }
        let mut shape = a.shape.clone();
        shape[1] += b.shape[1];
        let rg = a.requires_grad || b.requires_grad;
        Ok(self.push(shape, value, Op::Concat(x, y), rg))
    }

    /// Cross-correlation of NCHW `x` with OIkk `w` plus bias `b`.
    ///
    /// Padding is `k/2` on each side: circular along width, zero along height.
    pub fn conv2d(&mut self, x: Var, w: Var, b: Var, stride: usize) -> Result<Var> {
        let (xs, ws, bs) = (self.shape(x), self.shape(w), self.shape(b));
        if xs.len() != 4 || ws.len() != 4 {
            return Err(mismatch("conv2d input/weight rank", xs, ws));
        }
        if ws[1] != xs[1] || ws[2] != ws[3] || ws[2] % 2 == 0 || bs != [ws[0]] {
            return Err(mismatch("conv2d weight", xs, ws));
        }
        if !(stride == 1 || stride == 2) {
            return Err(Error::InvalidArgument(format!(
                "conv2d stride {stride} not in {{1, 2}}"
            )));
        }
        let shape = ConvShape::new(xs, ws, stride);
        let value = conv::forward(self.value(x), self.value(w), self.value(b), &shape);
        let rg = self.requires_grad(x) || self.requires_grad(w) || self.requires_grad(b);
        Ok(self.push(
            shape.output_shape(),
            value,
            Op::Conv2d { x, w, b, shape },
            rg,
        ))
    }

    /// NCHW → NC mean over the spatial dimensions.
    pub fn global_avg_pool(&mut self, x: Var) -> Result<Var> {
        let xs = self.shape(x);
        if xs.len() != 4 {
            return Err(Error::ShapeMismatch(format!(
                "global_avg_pool expects NCHW, got {xs:?}"
            )));
        }
        let (n, c, hw) = (xs[0], xs[1], xs[2] * xs[3]);
        let inv = T::of(1.0 / hw as f64);
        let value = self
            .value(x)
            .chunks_exact(hw)
            .map(|p| p.iter().copied().sum::<T>() * inv)
            .collect();
        let rg = self.requires_grad(x);
        Ok(self.push(vec![n, c], value, Op::GlobalAvgPool(x), rg))
    }

    /// `y = x·wᵀ + b` for `x: N×F`, `w: G×F`, `b: G`.
    pub fn linear(&mut self, x: Var, w: Var, b: Var) -> Result<Var> {
        let (xs, ws, bs) = (self.shape(x), self.shape(w), self.shape(b));
        if xs.len() != 2 || ws.len() != 2 || xs[1] != ws[1] || bs != [ws[0]] {
            return Err(mismatch("linear", xs, ws));
        }
        let (n, f, g) = (xs[0], xs[1], ws[0]);
        let mut value = vec![T::zero(); n * g];
        for s in 0..n {
            value[s * g..(s + 1) * g].copy_from_slice(self.value(b));
        }
        T::gemm(
            n,
            f,
            g,
            self.value(x),
            false,
            self.value(w),
            true,
            T::one(),
            &mut value,
        );
        let rg = self.requires_grad(x) || self.requires_grad(w) || self.requires_grad(b);
        Ok(self.push(vec![n, g], value, Op::Linear { x, w, b }, rg))
    }

    /// Fixed separable filter over every H×W plane, keeping only windows
    /// that fit entirely ("valid" mode).
    pub fn gaussian_valid(&mut self, x: Var, taps: &[T]) -> Result<Var> {
        let xs = self.shape(x).to_vec();
        let k = taps.len();
        if xs.len() != 4 || xs[2] < k || xs[3] < k {
            return Err(Error::ImageTooSmall(format!(
                "{xs:?} cannot hold a {k}x{k} window"
            )));
        }
        let (h, w) = (xs[2], xs[3]);
        let (oh, ow) = (h - k + 1, w - k + 1);
        let mut value = Vec::with_capacity(xs[0] * xs[1] * oh * ow);
        let mut horiz = vec![T::zero(); h * ow];
        for plane in self.value(x).chunks_exact(h * w) {
            for r in 0..h {
                for c in 0..ow {
                    let mut acc = T::zero();
                    for (t, &g) in taps.iter().enumerate() {
                        acc += g * plane[r * w + c + t];
                    }
                    horiz[r * ow + c] = acc;
                }
            }
            for r in 0..oh {
                for c in 0..ow {
                    let mut acc = T::zero();
                    for (t, &g) in taps.iter().enumerate() {
                        acc += g * horiz[(r + t) * ow + c];
                    }
                    value.push(acc);
                }
            }
        }
        let rg = self.requires_grad(x);
        let op = Op::GaussianValid {
            x,
            taps: taps.to_vec(),
        };
        Ok(self.push(vec![xs[0], xs[1], oh, ow], value, op, rg))
    }

    /// Circular convolution along the last axis: `y[t] = Σ w·x[t − m]`.
    pub fn angular_conv(&mut self, x: Var, taps: &[(usize, T)]) -> Result<Var> {
        let xs = self.shape(x).to_vec();
        let Some(&width) = xs.last() else {
            return Err(Error::ShapeMismatch(
                "angular_conv on a rank-0 tensor".into(),
            ));
        };
        let mut value = vec![T::zero(); numel(&xs)];
        for (row_in, row_out) in self
            .value(x)
            .chunks_exact(width)
            .zip(value.chunks_exact_mut(width))
        {
            for &(m, wgt) in taps {
                let m = m % width;
                for t in 0..width {
                    row_out[t] += wgt * row_in[(t + width - m) % width];
                }
            }
        }
        let rg = self.requires_grad(x);
        let op = Op::AngularConv {
            x,
            taps: taps.to_vec(),
        };
        Ok(self.push(xs, value, op, rg))
    }

    /// Reverse-mode sweep from a scalar `loss`.
    ///
    /// Gradients of `requires_grad` leaves accumulate across calls until
    /// [`Graph::zero_grad`].
    pub fn backward(&mut self, loss: Var) -> Result<()> {
        let shape = self.shape(loss).to_vec();
        if numel(&shape) != 1 {
            return Err(Error::NonScalarLoss(shape));
        }
        if !self.requires_grad(loss) {
            return Ok(());
        }
        let mut temp: Vec<Option<Vec<T>>> = vec![None; loss.0 + 1];
        temp[loss.0] = Some(vec![T::one()]);
        for i in (0..=loss.0).rev() {
            let Some(g) = temp[i].take() else { continue };
            let node = &self.nodes[i];
            if !node.requires_grad {
                continue;
            }
            if let Op::Leaf = node.op {
                let slot = add_into(&mut self.grads[i], g.len());
                slot.iter_mut().zip(&g).for_each(|(s, &d)| *s += d);
                continue;
            }
            self.propagate(i, &g, &mut temp);
        }
        Ok(())
    }

    fn propagate(&self, i: usize, g: &[T], temp: &mut [Option<Vec<T>>]) {
        let node = &self.nodes[i];
        let nodes = &self.nodes;
        let needs = |v: Var| nodes[v.0].requires_grad;
        let len = |v: Var| nodes[v.0].value.len();
        let val = |v: Var| nodes[v.0].value.as_slice();
        macro_rules! acc {
            ($v:expr, |$j:ident| $e:expr) => {{
                let v: Var = $v;
                if needs(v) {
                    let slot = add_into(&mut temp[v.0], len(v));
                    for $j in 0..slot.len() {
                        slot[$j] += $e;
                    }
                }
            }};
        }
        match &node.op {
            Op::Leaf => {}
            Op::Add(a, b) => {
                acc!(*a, |j| g[j]);
                acc!(*b, |j| g[j]);
            }
            Op::Sub(a, b) => {
                acc!(*a, |j| g[j]);
                acc!(*b, |j| -g[j]);
            }
            Op::Mul(a, b) => {
                let (va, vb) = (val(*a), val(*b));
                acc!(*a, |j| g[j] * vb[j]);
                acc!(*b, |j| g[j] * va[j]);
            }
            Op::Div(a, b) => {
                let (va, vb) = (val(*a), val(*b));
                acc!(*a, |j| g[j] / vb[j]);
                acc!(*b, |j| -g[j] * va[j] / (vb[j] * vb[j]));
            }
            Op::Scale(a, s) => acc!(*a, |j| g[j] * *s),
            Op::AddScalar(a) => acc!(*a, |j| g[j]),
            Op::Relu(a) => {
                let va = val(*a);
                acc!(*a, |j| if va[j] > T::zero() { g[j] } else { T::zero() });
            }
            Op::Tanh(a) => {
                let y = &node.value;
                acc!(*a, |j| g[j] * (T::one() - y[j] * y[j]));
            }
            Op::Abs(a) => {
                let va = val(*a);
                acc!(*a, |j| {
                    if va[j] > T::zero() {
                        g[j]
                    } else if va[j] < T::zero() {
                        -g[j]
                    } else {
                        T::zero()
                    }
                });
            }
            Op::Clamp(a, lo, hi) => {
                let va = val(*a);
                acc!(*a, |j| if va[j] >= *lo && va[j] <= *hi {
                    g[j]
                } else {
                    T::zero()
                });
            }
            Op::Sum(a) => acc!(*a, |_j| g[0]),
            Op::Mean(a) => {
                let s = g[0] / T::of(len(*a) as f64);
                acc!(*a, |_j| s);
            }
            Op::Concat(a, b) => {
                let n = node.shape[0];
                let (ia, ib) = (len(*a) / n, len(*b) / n);
                acc!(*a, |j| g[(j / ia) * (ia + ib) + j % ia]);
                acc!(*b, |j| g[(j / ib) * (ia + ib) + ia + j % ib]);
            }
            Op::Conv2d { x, w, b, shape } => {
                let grads = conv::backward(val(*x), val(*w), g, shape, needs(*x), needs(*w));
                if let Some(dx) = grads.dx {
                    acc!(*x, |j| dx[j]);
                }
                if let Some(dw) = grads.dw {
                    acc!(*w, |j| dw[j]);
                }
                let db = grads.db;
                acc!(*b, |j| db[j]);
            }
            Op::GlobalAvgPool(a) => {
                let hw = len(*a) / g.len();
                let inv = T::of(1.0 / hw as f64);
                acc!(*a, |j| g[j / hw] * inv);
            }
            Op::Linear { x, w, b } => {
                let (xs, ws) = (&nodes[x.0].shape, &nodes[w.0].shape);
                let (n, f, gg) = (xs[0], xs[1], ws[0]);
                if needs(*x) {
                    let mut dx = vec![T::zero(); n * f];
                    T::gemm(n, gg, f, g, false, val(*w), false, T::zero(), &mut dx);
                    acc!(*x, |j| dx[j]);
                }
                if needs(*w) {
                    let mut dw = vec![T::zero(); gg * f];
                    T::gemm(gg, n, f, g, true, val(*x), false, T::zero(), &mut dw);
                    acc!(*w, |j| dw[j]);
                }
                acc!(*b, |j| (0..n).map(|s| g[s * gg + j]).sum::<T>());
            }
            Op::GaussianValid { x, taps } => {
                let xs = &nodes[x.0].shape;
                let k = taps.len();
                let (h, w) = (xs[2], xs[3]);
                let (oh, ow) = (h - k + 1, w - k + 1);
                let mut dx = vec![T::zero(); len(*x)];
                let mut dh = vec![T::zero(); h * ow];
                for (gp, dp) in g.chunks_exact(oh * ow).zip(dx.chunks_exact_mut(h * w)) {
                    dh.iter_mut().for_each(|v| *v = T::zero());
                    for r in 0..oh {
                        for c in 0..ow {
                            let d = gp[r * ow + c];
                            for (t, &tap) in taps.iter().enumerate() {
                                dh[(r + t) * ow + c] += tap * d;
                            }
                        }
                    }
                    for r in 0..h {
                        for c in 0..ow {
                            let d = dh[r * ow + c];
                            for (t, &tap) in taps.iter().enumerate() {
                                dp[r * w + c + t] += tap * d;
                            }
                        }
                    }
                }
                acc!(*x, |j| dx[j]);
            }
            Op::AngularConv { x, taps } => {
                let width = *node.shape.last().expect("rank >= 1");
                let mut dx = vec![T::zero(); len(*x)];
                for (go, di) in g.chunks_exact(width).zip(dx.chunks_exact_mut(width)) {
                    for &(m, wgt) in taps {
                        let m = m % width;
                        for t in 0..width {
                            di[(t + width - m) % width] += wgt * go[t];
                        }
                    }
                }
                acc!(*x, |j| dx[j]);
            }
        }
    }
}
