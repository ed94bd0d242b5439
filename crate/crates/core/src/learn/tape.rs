use crate::error::{Error, Result};

/// Dense row-major f64 matrix; column vectors are shaped (n, 1).
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<f64>,
}

impl Tensor {
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Self {
        assert_eq!(rows * cols, data.len());
        Tensor { rows, cols, data }
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Tensor { rows, cols, data: vec![0.0; rows * cols] }
    }

    pub fn vector(data: Vec<f64>) -> Self {
        let rows = data.len();
        Tensor { rows, cols: 1, data }
    }

    pub fn scalar(x: f64) -> Self {
        Tensor { rows: 1, cols: 1, data: vec![x] }
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|x| x.is_finite())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Var(pub usize);

enum Op {
    Leaf,
    MatMul(Var, Var),
    Add(Var, Var),
    Sub(Var, Var),
    Mul(Var, Var),
    /// a * c (+ constant shift, applied at construction; only the scale
    /// matters for the gradient)
    Affine(Var, f64),
    /// vector times scalar node
    MulScalar(Var, Var),
    Tanh(Var),
    Logistic(Var),
    Exp(Var),
    Ln(Var),
    Abs(Var),
    Sqrt(Var),
    Recip(Var),
    Sum(Var),
    Dot(Var, Var),
    Concat(Vec<Var>),
    Gather(Var, Vec<usize>),
    /// Scalar node with an externally supplied local gradient w.r.t. its
    /// parent; lets non-tape differentiable code (robustness) join the graph.
    Custom(Var, Vec<f64>),
}

struct Node {
    value: Tensor,
    op: Op,
}

/// Reverse-mode tape. Nodes are appended in topological order; `backward`
/// visits them exactly once in reverse.
#[derive(Default)]
pub struct Tape {
    nodes: Vec<Node>,
}

impl Tape {
    pub fn new() -> Self {
        Tape::default()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn value(&self, v: Var) -> &Tensor {
        &self.nodes[v.0].value
    }

    pub fn scalar_value(&self, v: Var) -> f64 {
        let t = self.value(v);
        debug_assert_eq!(t.len(), 1);
        t.data[0]
    }

    fn push(&mut self, value: Tensor, op: Op) -> Var {
        self.nodes.push(Node { value, op });
        Var(self.nodes.len() - 1)
    }

    pub fn leaf(&mut self, t: Tensor) -> Var {
        self.push(t, Op::Leaf)
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Var {
        let (ta, tb) = (&self.nodes[a.0].value, &self.nodes[b.0].value);
        assert_eq!(ta.cols, tb.rows, "matmul shape mismatch");
        let (m, k, n) = (ta.rows, ta.cols, tb.cols);
        let mut out = vec![0.0; m * n];
        for i in 0..m {
            let arow = &ta.data[i * k..(i + 1) * k];
            for (kk, &av) in arow.iter().enumerate() {
                if av == 0.0 {
                    continue;
                }
                let brow = &tb.data[kk * n..(kk + 1) * n];
                let orow = &mut out[i * n..(i + 1) * n];
                for (o, &bv) in orow.iter_mut().zip(brow) {
                    *o += av * bv;
                }
            }
        }
        self.push(Tensor::new(m, n, out), Op::MatMul(a, b))
    }

    fn zip(&mut self, a: Var, b: Var, f: impl Fn(f64, f64) -> f64, op: Op) -> Var {
        let (ta, tb) = (&self.nodes[a.0].value, &self.nodes[b.0].value);
        assert_eq!((ta.rows, ta.cols), (tb.rows, tb.cols), "elementwise shape mismatch");
        let data = ta.data.iter().zip(&tb.data).map(|(&x, &y)| f(x, y)).collect();
        let t = Tensor::new(ta.rows, ta.cols, data);
        self.push(t, op)
    }

    pub fn add(&mut self, a: Var, b: Var) -> Var {
        self.zip(a, b, |x, y| x + y, Op::Add(a, b))
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Var {
        self.zip(a, b, |x, y| x - y, Op::Sub(a, b))
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Var {
        self.zip(a, b, |x, y| x * y, Op::Mul(a, b))
    }

    fn map(&mut self, a: Var, f: impl Fn(f64) -> f64, op: Op) -> Var {
        let ta = &self.nodes[a.0].value;
        let t = Tensor::new(ta.rows, ta.cols, ta.data.iter().map(|&x| f(x)).collect());
        self.push(t, op)
    }

    /// `a * scale + shift` with compile-time constants.
    pub fn affine(&mut self, a: Var, scale: f64, shift: f64) -> Var {
        self.map(a, |x| x * scale + shift, Op::Affine(a, scale))
    }

    pub fn mul_scalar(&mut self, a: Var, s: Var) -> Var {
        assert_eq!(self.nodes[s.0].value.len(), 1);
        let sv = self.nodes[s.0].value.data[0];
        self.map(a, |x| x * sv, Op::MulScalar(a, s))
    }

    pub fn tanh(&mut self, a: Var) -> Var {
        self.map(a, f64::tanh, Op::Tanh(a))
    }

    pub fn logistic(&mut self, a: Var) -> Var {
        self.map(a, |x| 1.0 / (1.0 + (-x).exp()), Op::Logistic(a))
    }

    pub fn exp(&mut self, a: Var) -> Var {
        self.map(a, f64::exp, Op::Exp(a))
    }

    pub fn ln(&mut self, a: Var) -> Var {
        self.map(a, f64::ln, Op::Ln(a))
    }

    pub fn abs(&mut self, a: Var) -> Var {
        self.map(a, f64::abs, Op::Abs(a))
    }

    pub fn sqrt(&mut self, a: Var) -> Var {
        self.map(a, f64::sqrt, Op::Sqrt(a))
    }

    pub fn recip(&mut self, a: Var) -> Var {
        self.map(a, |x| 1.0 / x, Op::Recip(a))
    }

    pub fn sum(&mut self, a: Var) -> Var {
        let s = self.nodes[a.0].value.data.iter().sum();
        self.push(Tensor::scalar(s), Op::Sum(a))
    }

    pub fn dot(&mut self, a: Var, b: Var) -> Var {
        let (ta, tb) = (&self.nodes[a.0].value, &self.nodes[b.0].value);
        assert_eq!(ta.len(), tb.len(), "dot length mismatch");
        let s = ta.data.iter().zip(&tb.data).map(|(&x, &y)| x * y).sum();
        self.push(Tensor::scalar(s), Op::Dot(a, b))
    }

    /// Stack column vectors into one column vector.
    pub fn concat(&mut self, parts: &[Var]) -> Var {
        let mut data = Vec::new();
        for &p in parts {
            let t = &self.nodes[p.0].value;
            assert_eq!(t.cols, 1, "concat expects column vectors");
            data.extend_from_slice(&t.data);
        }
        self.push(Tensor::vector(data), Op::Concat(parts.to_vec()))
    }

    /// Select elements of a column vector by index (duplicates allowed).
    pub fn gather(&mut self, a: Var, indices: &[usize]) -> Var {
        let ta = &self.nodes[a.0].value;
        let data = indices.iter().map(|&i| ta.data[i]).collect();
        self.push(Tensor::vector(data), Op::Gather(a, indices.to_vec()))
    }

    /// Scalar node `value` whose gradient w.r.t. `parent` is the supplied
    /// vector (one entry per parent element).
    pub fn custom_scalar(&mut self, parent: Var, value: f64, grad: Vec<f64>) -> Var {
        assert_eq!(self.nodes[parent.0].value.len(), grad.len());
        self.push(Tensor::scalar(value), Op::Custom(parent, grad))
    }

    /// Numerically stable log-sum-exp of `eps * x` divided by `eps`
    /// (the smooth max used throughout). The max shift is treated as a
    /// constant, which leaves the exact softmax gradient.
    pub fn smooth_max(&mut self, a: Var, eps: f64) -> Var {
        let m = self.nodes[a.0].value.data.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let shifted = self.affine(a, eps, -eps * m);
        let e = self.exp(shifted);
        let s = self.sum(e);
        let l = self.ln(s);
        self.affine(l, 1.0 / eps, m)
    }

    pub fn smooth_min(&mut self, a: Var, eps: f64) -> Var {
        let neg = self.affine(a, -1.0, 0.0);
        let sm = self.smooth_max(neg, eps);
        self.affine(sm, -1.0, 0.0)
    }

    /// Softmax of `x / temperature` as a tape node (max-shifted).
    pub fn softmax(&mut self, a: Var, temperature: f64) -> Var {
        let m = self.nodes[a.0].value.data.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let shifted = self.affine(a, 1.0 / temperature, -m / temperature);
        let e = self.exp(shifted);
        let s = self.sum(e);
        let r = self.recip(s);
        self.mul_scalar(e, r)
    }

    /// Mean of elementwise |a - b|.
    pub fn l1_loss(&mut self, a: Var, b: Var) -> Var {
        let n = self.nodes[a.0].value.len() as f64;
        let d = self.sub(a, b);
        let ad = self.abs(d);
        let s = self.sum(ad);
        self.affine(s, 1.0 / n, 0.0)
    }

    /// Euclidean distance between two equal-length vectors, smoothed at the
    /// origin by a tiny floor so the gradient stays finite.
    pub fn euclid(&mut self, a: Var, b: Var) -> Var {
        let d = self.sub(a, b);
        let sq = self.mul(d, d);
        let s = self.sum(sq);
        let floored = self.affine(s, 1.0, 1e-12);
        self.sqrt(floored)
    }

    /// Reverse pass from scalar `root`; returns one gradient tensor per node.
    pub fn backward(&self, root: Var) -> Result<Vec<Tensor>> {
        let root_t = &self.nodes[root.0].value;
        if root_t.len() != 1 {
            return Err(Error::ShapeMismatch("backward root must be scalar".into()));
        }
        if !root_t.is_finite() {
            return Err(Error::NonFinite("backward root".into()));
        }
        let mut grads: Vec<Tensor> = self
            .nodes
            .iter()
            .map(|n| Tensor::zeros(n.value.rows, n.value.cols))
            .collect();
        grads[root.0].data[0] = 1.0;
        for i in (0..=root.0).rev() {
            if grads[i].data.iter().all(|&g| g == 0.0) {
                continue;
            }
            let g = grads[i].clone();
            match &self.nodes[i].op {
                Op::Leaf => {}
                Op::MatMul(a, b) => {
                    let (a, b) = (*a, *b);
                    let ta = self.nodes[a.0].value.clone();
                    let tb = self.nodes[b.0].value.clone();
                    let (m, k, n) = (ta.rows, ta.cols, tb.cols);
                    // dA = G B^T
                    for r in 0..m {
                        for c in 0..k {
                            let mut acc = 0.0;
                            for j in 0..n {
                                acc += g.data[r * n + j] * tb.data[c * n + j];
                            }
                            grads[a.0].data[r * k + c] += acc;
                        }
                    }
                    // dB = A^T G
                    for r in 0..k {
                        for c in 0..n {
                            let mut acc = 0.0;
                            for j in 0..m {
                                acc += ta.data[j * k + r] * g.data[j * n + c];
                            }
                            grads[b.0].data[r * n + c] += acc;
                        }
                    }
                }
                Op::Add(a, b) => {
                    let (a, b) = (*a, *b);
                    for (j, &gv) in g.data.iter().enumerate() {
                        grads[a.0].data[j] += gv;
                        grads[b.0].data[j] += gv;
                    }
                }
                Op::Sub(a, b) => {
                    let (a, b) = (*a, *b);
                    for (j, &gv) in g.data.iter().enumerate() {
                        grads[a.0].data[j] += gv;
                        grads[b.0].data[j] -= gv;
                    }
                }
                Op::Mul(a, b) => {
                    let (a, b) = (*a, *b);
                    for j in 0..g.data.len() {
                        let (av, bv) =
                            (self.nodes[a.0].value.data[j], self.nodes[b.0].value.data[j]);
                        grads[a.0].data[j] += g.data[j] * bv;
                        grads[b.0].data[j] += g.data[j] * av;
                    }
                }
                Op::Affine(a, scale) => {
                    let (a, scale) = (*a, *scale);
                    for (j, &gv) in g.data.iter().enumerate() {
                        grads[a.0].data[j] += gv * scale;
                    }
                }
                Op::MulScalar(a, s) => {
                    let (a, s) = (*a, *s);
                    let sv = self.nodes[s.0].value.data[0];
                    let mut sacc = 0.0;
                    for (j, &gv) in g.data.iter().enumerate() {
                        grads[a.0].data[j] += gv * sv;
                        sacc += gv * self.nodes[a.0].value.data[j];
                    }
                    grads[s.0].data[0] += sacc;
                }
                Op::Tanh(a) => {
                    let a = *a;
                    for (j, &gv) in g.data.iter().enumerate() {
                        let y = self.nodes[i].value.data[j];
                        grads[a.0].data[j] += gv * (1.0 - y * y);
                    }
                }
                Op::Logistic(a) => {
                    let a = *a;
                    for (j, &gv) in g.data.iter().enumerate() {
                        let y = self.nodes[i].value.data[j];
                        grads[a.0].data[j] += gv * y * (1.0 - y);
                    }
                }
                Op::Exp(a) => {
                    let a = *a;
                    for (j, &gv) in g.data.iter().enumerate() {
                        grads[a.0].data[j] += gv * self.nodes[i].value.data[j];
                    }
                }
                Op::Ln(a) => {
                    let a = *a;
                    for (j, &gv) in g.data.iter().enumerate() {
                        grads[a.0].data[j] += gv / self.nodes[a.0].value.data[j];
                    }
                }
                Op::Abs(a) => {
                    let a = *a;
                    for (j, &gv) in g.data.iter().enumerate() {
                        let x = self.nodes[a.0].value.data[j];
                        grads[a.0].data[j] += gv * if x >= 0.0 { 1.0 } else { -1.0 };
                    }
                }
                Op::Sqrt(a) => {
                    let a = *a;
                    for (j, &gv) in g.data.iter().enumerate() {
                        let y = self.nodes[i].value.data[j];
                        grads[a.0].data[j] += gv * 0.5 / y;
                    }
                }
                Op::Recip(a) => {
                    let a = *a;
                    for (j, &gv) in g.data.iter().enumerate() {
                        let x = self.nodes[a.0].value.data[j];
                        grads[a.0].data[j] -= gv / (x * x);
                    }
                }
                Op::Sum(a) => {
                    let a = *a;
                    let gv = g.data[0];
                    for d in grads[a.0].data.iter_mut() {
                        *d += gv;
                    }
                }
                Op::Dot(a, b) => {
                    let (a, b) = (*a, *b);
                    let gv = g.data[0];
                    for j in 0..self.nodes[a.0].value.len() {
                        let (av, bv) =
                            (self.nodes[a.0].value.data[j], self.nodes[b.0].value.data[j]);
                        grads[a.0].data[j] += gv * bv;
                        grads[b.0].data[j] += gv * av;
                    }
                }
                Op::Concat(parts) => {
                    let parts = parts.clone();
                    let mut off = 0;
                    for p in parts {
                        let len = self.nodes[p.0].value.len();
                        for j in 0..len {
                            grads[p.0].data[j] += g.data[off + j];
                        }
                        off += len;
                    }
                }
                Op::Gather(a, indices) => {
                    let a = *a;
                    let indices = indices.clone();
                    for (j, &idx) in indices.iter().enumerate() {
                        grads[a.0].data[idx] += g.data[j];
                    }
                }
                Op::Custom(a, local) => {
                    let a = *a;
                    let local = local.clone();
                    let gv = g.data[0];
                    for (j, &lv) in local.iter().enumerate() {
                        grads[a.0].data[j] += gv * lv;
                    }
                }
            }
        }
        Ok(grads)
    }
}
