use super::tensor::Tensor;
use crate::error::{Error, Result};

/// Handle to a value recorded on a [`Tape`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Var(usize);

impl Var {
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Debug, Clone)]
enum Op {
    Leaf,
    MatMul(Var, Var),
    Add(Var, Var),
    Sub(Var, Var),
    Mul(Var, Var),
    Div(Var, Var),
    Scale(Var, f64),
    Offset(Var),
    Relu(Var),
    Tanh(Var),
    Sigmoid(Var),
    Exp(Var),
    Log(Var),
    Square(Var),
    Sqrt(Var),
    Clamp(Var, f64, f64),
    Sum(Var),
    Mean(Var),
    SumRows(Var),
    Broadcast(Var),
    Slice(Var, usize),
    Concat(Var, Var),
}

struct Node {
    value: Tensor,
    op: Op,
    needs_grad: bool,
}

/// Linear record of primitive applications, in evaluation (hence topological) order.
///
/// Leaves created with `requires_grad = false` are constants: gradients are
/// never propagated into them or into any node computed only from constants.
#[derive(Default)]
pub struct Tape {
    nodes: Vec<Node>,
}

/// Adjoints produced by [`Tape::backward`], indexed by [`Var`].
pub struct Gradients {
    grads: Vec<Option<Tensor>>,
}

impl Gradients {
    pub fn get(&self, v: Var) -> Option<&Tensor> {
        self.grads.get(v.0).and_then(|g| g.as_ref())
    }

    pub fn take(&mut self, v: Var) -> Option<Tensor> {
        self.grads.get_mut(v.0).and_then(|g| g.take())
    }
}

impl Tape {
    pub fn new() -> Self {
        Self::default()
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

    pub fn requires_grad(&self, v: Var) -> bool {
        self.nodes[v.0].needs_grad
    }

    pub fn leaf(&mut self, value: Tensor, requires_grad: bool) -> Var {
        self.push(value, Op::Leaf, requires_grad)
    }

    pub fn constant(&mut self, value: Tensor) -> Var {
        self.leaf(value, false)
    }

    pub fn param(&mut self, value: Tensor) -> Var {
        self.leaf(value, true)
    }

    fn push(&mut self, value: Tensor, op: Op, needs_grad: bool) -> Var {
        self.nodes.push(Node { value, op, needs_grad });
        Var(self.nodes.len() - 1)
    }

    fn record(&mut self, value: Tensor, op: Op, name: &'static str, inputs: &[Var]) -> Result<Var> {
        if !value.all_finite() {
            return Err(Error::NonFinite(name));
        }
        let needs = inputs.iter().any(|v| self.nodes[v.0].needs_grad);
        Ok(self.push(value, op, needs))
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var> {
        let out = self.value(a).matmul(self.value(b))?;
        self.record(out, Op::MatMul(a, b), "matmul", &[a, b])
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        let out = self.value(a).add(self.value(b))?;
        self.record(out, Op::Add(a, b), "add", &[a, b])
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var> {
        let out = self.value(a).sub(self.value(b))?;
        self.record(out, Op::Sub(a, b), "sub", &[a, b])
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        let out = self.value(a).mul(self.value(b))?;
        self.record(out, Op::Mul(a, b), "mul", &[a, b])
    }

    pub fn div(&mut self, a: Var, b: Var) -> Result<Var> {
        let out = self.value(a).div(self.value(b))?;
        self.record(out, Op::Div(a, b), "div", &[a, b])
    }

    pub fn scale(&mut self, a: Var, c: f64) -> Result<Var> {
        let out = self.value(a).scale(c);
        self.record(out, Op::Scale(a, c), "scale", &[a])
    }

    /// a + c elementwise.
    pub fn offset(&mut self, a: Var, c: f64) -> Result<Var> {
        let out = self.value(a).offset(c);
        self.record(out, Op::Offset(a), "offset", &[a])
    }

    pub fn relu(&mut self, a: Var) -> Result<Var> {
        let out = self.value(a).relu();
        self.record(out, Op::Relu(a), "relu", &[a])
    }

    pub fn tanh(&mut self, a: Var) -> Result<Var> {
        let out = self.value(a).tanh();
        self.record(out, Op::Tanh(a), "tanh", &[a])
    }

    pub fn sigmoid(&mut self, a: Var) -> Result<Var> {
        let out = self.value(a).sigmoid();
        self.record(out, Op::Sigmoid(a), "sigmoid", &[a])
    }

    pub fn exp(&mut self, a: Var) -> Result<Var> {
        let out = self.value(a).exp();
        self.record(out, Op::Exp(a), "exp", &[a])
    }

    pub fn log(&mut self, a: Var) -> Result<Var> {
        let out = self.value(a).ln()?;
        self.record(out, Op::Log(a), "log", &[a])
    }

    pub fn square(&mut self, a: Var) -> Result<Var> {
        let out = self.value(a).square();
        self.record(out, Op::Square(a), "square", &[a])
    }

    pub fn sqrt(&mut self, a: Var) -> Result<Var> {
        let out = self.value(a).sqrt()?;
        self.record(out, Op::Sqrt(a), "sqrt", &[a])
    }

    pub fn clamp(&mut self, a: Var, lo: f64, hi: f64) -> Result<Var> {
        if !(lo <= hi) {
            return Err(Error::InvalidArgument(format!("clamp bounds {lo} > {hi}")));
        }
        let out = self.value(a).clamp(lo, hi);
        self.record(out, Op::Clamp(a, lo, hi), "clamp", &[a])
    }

    /// Sum of all elements, as a scalar.
    pub fn sum(&mut self, a: Var) -> Result<Var> {
        let out = Tensor::scalar(self.value(a).sum());
        self.record(out, Op::Sum(a), "sum", &[a])
    }

    pub fn mean(&mut self, a: Var) -> Result<Var> {
        let out = Tensor::scalar(self.value(a).mean());
        self.record(out, Op::Mean(a), "mean", &[a])
    }

    /// Per-row sums as an r×1 column.
    pub fn sum_rows(&mut self, a: Var) -> Result<Var> {
        let out = self.value(a).sum_rows();
        self.record(out, Op::SumRows(a), "sum_rows", &[a])
    }

    pub fn broadcast(&mut self, a: Var, rows: usize, cols: usize) -> Result<Var> {
        let out = self.value(a).broadcast_to(rows, cols)?;
        self.record(out, Op::Broadcast(a), "broadcast", &[a])
    }

    /// Columns `[start, end)`.
    pub fn slice(&mut self, a: Var, start: usize, end: usize) -> Result<Var> {
        let out = self.value(a).slice_cols(start, end)?;
        self.record(out, Op::Slice(a, start), "slice", &[a])
    }

    pub fn concat(&mut self, a: Var, b: Var) -> Result<Var> {
        let out = self.value(a).concat_cols(self.value(b))?;
        self.record(out, Op::Concat(a, b), "concat", &[a, b])
    }

    /// Reverse sweep from a scalar output.
    pub fn backward(&self, output: Var) -> Result<Gradients> {
        if self.nodes.is_empty() {
            return Err(Error::EmptyTape);
        }
        let out = &self.nodes[output.0].value;
        if !out.is_scalar() {
            return Err(Error::NonScalarOutput(out.shape().to_vec()));
        }
        let mut grads: Vec<Option<Tensor>> = vec![None; self.nodes.len()];
        grads[output.0] = Some(out.with_data(vec![1.0]));

        for idx in (0..=output.0).rev() {
            let node = &self.nodes[idx];
            if !node.needs_grad {
                continue;
            }
            let Some(g) = grads[idx].take() else { continue };
            let y = &node.value;
            match node.op {
                Op::Leaf => {
                    grads[idx] = Some(g);
                    continue;
                }
                Op::MatMul(a, b) => {
                    if self.requires_grad(a) {
                        let ga = g.matmul_bt(self.value(b));
                        accumulate(&mut grads, a, ga);
                    }
                    if self.requires_grad(b) {
                        let gb = self.value(a).matmul_at(&g);
                        accumulate(&mut grads, b, gb);
                    }
                }
                Op::Add(a, b) => {
                    self.send(&mut grads, b, || g.clone());
                    self.send(&mut grads, a, || g.clone());
                }
                Op::Sub(a, b) => {
                    self.send(&mut grads, b, || g.scale(-1.0));
                    self.send(&mut grads, a, || g.clone());
                }
                Op::Mul(a, b) => {
                    self.send(&mut grads, a, || g.mul(self.value(b)).expect("shape"));
                    self.send(&mut grads, b, || g.mul(self.value(a)).expect("shape"));
                }
                Op::Div(a, b) => {
                    // y = a/b: da = g/b, db = −g·y/b
                    self.send(&mut grads, a, || g.div(self.value(b)).expect("shape"));
                    self.send(&mut grads, b, || {
                        let gy = g.mul(y).expect("shape");
                        gy.div(self.value(b)).expect("shape").scale(-1.0)
                    });
                }
                Op::Scale(a, c) => self.send(&mut grads, a, || g.scale(c)),
                Op::Offset(a) => self.send(&mut grads, a, || g.clone()),
                Op::Relu(a) => self.send(&mut grads, a, || {
                    let x = self.value(a);
                    g.with_data(
                        g.data()
                            .iter()
                            .zip(x.data())
                            .map(|(&gi, &xi)| if xi > 0.0 { gi } else { 0.0 })
                            .collect(),
                    )
                }),
                Op::Tanh(a) => self.send(&mut grads, a, || elementwise(&g, y, |gi, yi| gi * (1.0 - yi * yi))),
                Op::Sigmoid(a) => self.send(&mut grads, a, || elementwise(&g, y, |gi, yi| gi * yi * (1.0 - yi))),
                Op::Exp(a) => self.send(&mut grads, a, || elementwise(&g, y, |gi, yi| gi * yi)),
                Op::Log(a) => self.send(&mut grads, a, || elementwise(&g, self.value(a), |gi, xi| gi / xi)),
                Op::Square(a) => self.send(&mut grads, a, || elementwise(&g, self.value(a), |gi, xi| 2.0 * gi * xi)),
                Op::Sqrt(a) => self.send(&mut grads, a, || elementwise(&g, y, |gi, yi| gi / (2.0 * yi))),
                Op::Clamp(a, lo, hi) => self.send(&mut grads, a, || {
                    elementwise(&g, self.value(a), |gi, xi| if xi >= lo && xi <= hi { gi } else { 0.0 })
                }),
                Op::Sum(a) => self.send(&mut grads, a, || {
                    let x = self.value(a);
                    x.with_data(vec![g.data()[0]; x.len()])
                }),
                Op::Mean(a) => self.send(&mut grads, a, || {
                    let x = self.value(a);
                    x.with_data(vec![g.data()[0] / x.len() as f64; x.len()])
                }),
                Op::SumRows(a) => self.send(&mut grads, a, || {
                    let x = self.value(a);
                    let (r, c) = x.dims2();
                    g.broadcast_to(r, c).expect("shape").with_shape_of(x)
                }),
                Op::Broadcast(a) => self.send(&mut grads, a, || {
                    let x = self.value(a);
                    let (r, c) = x.dims2();
                    let (gr, gc) = g.dims2();
                    let mut red = g.clone();
                    if c == 1 && gc != 1 {
                        red = red.sum_rows();
                    }
                    if r == 1 && gr != 1 {
                        red = red.sum_cols();
                    }
                    red.with_shape_of(x)
                }),
                Op::Slice(a, start) => self.send(&mut grads, a, || {
                    let x = self.value(a);
                    let (r, c) = x.dims2();
                    let w = g.cols();
                    let mut out = vec![0.0; r * c];
                    for i in 0..r {
                        out[i * c + start..i * c + start + w].copy_from_slice(&g.data()[i * w..(i + 1) * w]);
                    }
                    x.with_data(out)
                }),
                Op::Concat(a, b) => {
                    let ca = self.value(a).cols();
                    let gc = g.cols();
                    if self.requires_grad(a) {
                        let ga = g.slice_cols(0, ca).expect("shape").with_shape_of(self.value(a));
                        accumulate(&mut grads, a, ga);
                    }
                    if self.requires_grad(b) {
                        let gb = g.slice_cols(ca, gc).expect("shape").with_shape_of(self.value(b));
                        accumulate(&mut grads, b, gb);
                    }
                }
            }
        }
        Ok(Gradients { grads })
    }

    fn send(&self, grads: &mut [Option<Tensor>], to: Var, g: impl FnOnce() -> Tensor) {
        if self.requires_grad(to) {
            accumulate(grads, to, g());
        }
    }
}

fn accumulate(grads: &mut [Option<Tensor>], to: Var, g: Tensor) {
    match &mut grads[to.0] {
        Some(existing) => existing.add_assign(&g),
        slot @ None => *slot = Some(g),
    }
}

fn elementwise(g: &Tensor, other: &Tensor, f: impl Fn(f64, f64) -> f64) -> Tensor {
    g.with_data(g.data().iter().zip(other.data()).map(|(&a, &b)| f(a, b)).collect())
}

impl Tensor {
    fn with_shape_of(self, like: &Tensor) -> Tensor {
        like.with_data(self.into_data())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn forward_examples() {
        let mut t = Tape::new();
        let a = t.constant(Tensor::row(vec![1.0, 2.0]));
        let b = t.constant(Tensor::row(vec![3.0, 4.0]));
        let s = t.add(a, b).unwrap();
        assert_eq!(t.value(s).data(), &[4.0, 6.0]);

        let r = t.constant(Tensor::row(vec![-1.0, 2.0]));
        let r = t.relu(r).unwrap();
        assert_eq!(t.value(r).data(), &[0.0, 2.0]);

        let bt = t.constant(Tensor::matrix(2, 1, vec![3.0, 4.0]).unwrap());
        let m = t.matmul(a, bt).unwrap();
        assert_eq!(t.value(m).data(), &[11.0]);
    }

    #[test]
    fn square_gradient() {
        let mut t = Tape::new();
        let w = t.param(Tensor::scalar(3.0));
        let y = t.square(w).unwrap();
        let g = t.backward(y).unwrap();
        assert_eq!(g.get(w).unwrap().data(), &[6.0]);
    }

    #[test]
    fn relu_sum_gradient_uses_zero_subgradient() {
        let mut t = Tape::new();
        let w = t.param(Tensor::row(vec![-1.0, 2.0]));
        let r = t.relu(w).unwrap();
        let s = t.sum(r).unwrap();
        let g = t.backward(s).unwrap();
        assert_eq!(g.get(w).unwrap().data(), &[0.0, 1.0]);

        let mut t = Tape::new();
        let w = t.param(Tensor::row(vec![0.0]));
        let r = t.relu(w).unwrap();
        let s = t.sum(r).unwrap();
        assert_eq!(t.backward(s).unwrap().get(w).unwrap().data(), &[0.0]);
    }

    #[test]
    fn errors() {
        let t = Tape::new();
        assert_eq!(t.backward(Var(0)).err(), Some(Error::EmptyTape));

        let mut t = Tape::new();
        let a = t.param(Tensor::row(vec![1.0, -1.0]));
        assert!(matches!(t.log(a), Err(Error::Domain { .. })));
        assert!(matches!(t.sqrt(a), Err(Error::Domain { .. })));
        assert!(matches!(t.backward(a), Err(Error::NonScalarOutput(_))));
        let z = t.constant(Tensor::row(vec![1.0, 0.0]));
        assert!(matches!(t.div(a, z), Err(Error::Domain { .. })));
        let b = t.constant(Tensor::row(vec![1.0, 2.0, 3.0]));
        assert!(matches!(t.add(a, b), Err(Error::ShapeMismatch { .. })));
        let big = t.constant(Tensor::row(vec![1000.0]));
        assert!(matches!(t.exp(big), Err(Error::NonFinite(_))));
    }

    #[test]
    fn constants_receive_no_gradient() {
        let mut t = Tape::new();
        let w = t.param(Tensor::row(vec![2.0]));
        let c = t.constant(Tensor::row(vec![5.0]));
        let y = t.mul(w, c).unwrap();
        let s = t.sum(y).unwrap();
        let g = t.backward(s).unwrap();
        assert_eq!(g.get(w).unwrap().data(), &[5.0]);
        assert!(g.get(c).is_none());
    }
}
