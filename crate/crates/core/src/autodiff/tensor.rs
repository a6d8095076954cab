use crate::error::{Error, Result};

/// Dense row-major tensor of `f64`.
///
/// Every kernel treats rank-0 as 1×1 and rank-1 `[n]` as a 1×n row, so the
/// tape only ever works with matrices.
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor {
    shape: Vec<usize>,
    data: Vec<f64>,
}

impl Tensor {
    pub fn new(shape: Vec<usize>, data: Vec<f64>) -> Result<Self> {
        let n: usize = shape.iter().product();
        if n != data.len() {
            return Err(Error::DimensionMismatch {
                expected: n,
                actual: data.len(),
            });
        }
        Ok(Self { shape, data })
    }

    pub fn matrix(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        Self::new(vec![rows, cols], data)
    }

    pub fn row(data: Vec<f64>) -> Self {
        Self {
            shape: vec![1, data.len()],
            data,
        }
    }

    pub fn scalar(v: f64) -> Self {
        Self {
            shape: vec![],
            data: vec![v],
        }
    }

    pub fn zeros(shape: &[usize]) -> Self {
        let n = shape.iter().product();
        Self {
            shape: shape.to_vec(),
            data: vec![0.0; n],
        }
    }

    pub fn full(shape: &[usize], v: f64) -> Self {
        let n = shape.iter().product();
        Self {
            shape: shape.to_vec(),
            data: vec![v; n],
        }
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    /// (rows, cols) under the rank-≤2 convention.
    pub fn dims2(&self) -> (usize, usize) {
        match self.shape.len() {
            0 => (1, 1),
            1 => (1, self.shape[0]),
            _ => {
                let cols = *self.shape.last().unwrap();
                (self.data.len() / cols.max(1), cols)
            }
        }
    }

    pub fn rows(&self) -> usize {
        self.dims2().0
    }

    pub fn cols(&self) -> usize {
        self.dims2().1
    }

    pub fn is_scalar(&self) -> bool {
        self.data.len() == 1
    }

    pub fn all_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    pub fn same_shape(&self, other: &Tensor) -> bool {
        self.dims2() == other.dims2()
    }

    pub(crate) fn with_data(&self, data: Vec<f64>) -> Self {
        Self {
            shape: self.shape.clone(),
            data,
        }
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        self.with_data(self.data.iter().map(|&v| f(v)).collect())
    }

    fn zip(&self, other: &Tensor, op: &'static str, f: impl Fn(f64, f64) -> f64) -> Result<Self> {
        if !self.same_shape(other) {
            return Err(mismatch(op, self, other));
        }
        Ok(self.with_data(self.data.iter().zip(&other.data).map(|(&a, &b)| f(a, b)).collect()))
    }

    pub fn add(&self, other: &Tensor) -> Result<Self> {
        self.zip(other, "add", |a, b| a + b)
    }

    pub fn sub(&self, other: &Tensor) -> Result<Self> {
        self.zip(other, "sub", |a, b| a - b)
    }

    pub fn mul(&self, other: &Tensor) -> Result<Self> {
        self.zip(other, "mul", |a, b| a * b)
    }

    pub fn div(&self, other: &Tensor) -> Result<Self> {
        if let Some(&z) = other.data.iter().find(|v| **v == 0.0) {
            return Err(Error::Domain { op: "div", value: z });
        }
        self.zip(other, "div", |a, b| a / b)
    }

    pub fn scale(&self, c: f64) -> Self {
        self.map(|v| v * c)
    }

    pub fn offset(&self, c: f64) -> Self {
        self.map(|v| v + c)
    }

    pub fn relu(&self) -> Self {
        self.map(|v| if v > 0.0 { v } else { 0.0 })
    }

    pub fn tanh(&self) -> Self {
        self.map(f64::tanh)
    }

    pub fn sigmoid(&self) -> Self {
        self.map(sigmoid)
    }

    pub fn exp(&self) -> Self {
        self.map(f64::exp)
    }

    pub fn ln(&self) -> Result<Self> {
        if let Some(&bad) = self.data.iter().find(|v| !(**v > 0.0)) {
            return Err(Error::Domain { op: "log", value: bad });
        }
        Ok(self.map(f64::ln))
    }

    pub fn sqrt(&self) -> Result<Self> {
        if let Some(&bad) = self.data.iter().find(|v| !(**v > 0.0)) {
            return Err(Error::Domain { op: "sqrt", value: bad });
        }
        Ok(self.map(f64::sqrt))
    }

    pub fn square(&self) -> Self {
        self.map(|v| v * v)
    }

    pub fn clamp(&self, lo: f64, hi: f64) -> Self {
        self.map(|v| v.clamp(lo, hi))
    }

    pub fn sum(&self) -> f64 {
        self.data.iter().sum()
    }

    pub fn mean(&self) -> f64 {
        self.sum() / self.data.len() as f64
    }

    /// Row sums as an r×1 column.
    pub fn sum_rows(&self) -> Self {
        let (r, c) = self.dims2();
        let data = (0..r).map(|i| self.data[i * c..(i + 1) * c].iter().sum()).collect();
        Self {
            shape: vec![r, 1],
            data,
        }
    }

    /// Column sums as a 1×c row.
    pub fn sum_cols(&self) -> Self {
        let (r, c) = self.dims2();
        let mut out = vec![0.0; c];
        for i in 0..r {
            for (o, v) in out.iter_mut().zip(&self.data[i * c..(i + 1) * c]) {
                *o += v;
            }
        }
        Self {
            shape: vec![1, c],
            data: out,
        }
    }

    /// Broadcasts a 1×1, 1×c or r×1 tensor up to rows×cols.
    pub fn broadcast_to(&self, rows: usize, cols: usize) -> Result<Self> {
        let (r, c) = self.dims2();
        let ok = (r == rows || r == 1) && (c == cols || c == 1);
        if !ok {
            return Err(Error::ShapeMismatch {
                op: "broadcast",
                lhs: self.shape.clone(),
                rhs: vec![rows, cols],
            });
        }
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            let si = if r == 1 { 0 } else { i };
            if c == 1 {
                data.extend(std::iter::repeat_n(self.data[si], cols));
            } else {
                data.extend_from_slice(&self.data[si * c..(si + 1) * c]);
            }
        }
        Ok(Self {
            shape: vec![rows, cols],
            data,
        })
    }

    /// Columns `[start, end)` of every row.
    pub fn slice_cols(&self, start: usize, end: usize) -> Result<Self> {
        let (r, c) = self.dims2();
        if start >= end || end > c {
            return Err(Error::InvalidArgument(format!(
                "column slice {start}..{end} out of range for {c} columns"
            )));
        }
        let w = end - start;
        let mut data = Vec::with_capacity(r * w);
        for i in 0..r {
            data.extend_from_slice(&self.data[i * c + start..i * c + end]);
        }
        Ok(Self {
            shape: vec![r, w],
            data,
        })
    }

    /// Row-wise concatenation `[self | other]`.
    pub fn concat_cols(&self, other: &Tensor) -> Result<Self> {
        let (r1, c1) = self.dims2();
        let (r2, c2) = other.dims2();
        if r1 != r2 {
            return Err(mismatch("concat", self, other));
        }
        let mut data = Vec::with_capacity(r1 * (c1 + c2));
        for i in 0..r1 {
            data.extend_from_slice(&self.data[i * c1..(i + 1) * c1]);
            data.extend_from_slice(&other.data[i * c2..(i + 1) * c2]);
        }
        Ok(Self {
            shape: vec![r1, c1 + c2],
            data,
        })
    }

    /// Matrix product of an m×k and k×n tensor.
    pub fn matmul(&self, other: &Tensor) -> Result<Self> {
        let (m, k) = self.dims2();
        let (k2, n) = other.dims2();
        if k != k2 {
            return Err(mismatch("matmul", self, other));
        }
        let mut out = vec![0.0; m * n];
        for i in 0..m {
            let orow = &mut out[i * n..(i + 1) * n];
            for p in 0..k {
                let a = self.data[i * k + p];
                if a == 0.0 {
                    continue;
                }
                let brow = &other.data[p * n..(p + 1) * n];
                for (o, &b) in orow.iter_mut().zip(brow) {
                    *o += a * b;
                }
            }
        }
        Ok(Self {
            shape: vec![m, n],
            data: out,
        })
    }

    /// self (m×n) · otherᵀ where other is k×n; result m×k.
    pub(crate) fn matmul_bt(&self, other: &Tensor) -> Self {
        let (m, n) = self.dims2();
        let (k, _) = other.dims2();
        let mut out = vec![0.0; m * k];
        for i in 0..m {
            let arow = &self.data[i * n..(i + 1) * n];
            for p in 0..k {
                let brow = &other.data[p * n..(p + 1) * n];
                out[i * k + p] = arow.iter().zip(brow).map(|(a, b)| a * b).sum();
            }
        }
        Self {
            shape: vec![m, k],
            data: out,
        }
    }

    /// selfᵀ · other where self is m×k and other m×n; result k×n.
    pub(crate) fn matmul_at(&self, other: &Tensor) -> Self {
        let (m, k) = self.dims2();
        let (_, n) = other.dims2();
        let mut out = vec![0.0; k * n];
        for i in 0..m {
            let brow = &other.data[i * n..(i + 1) * n];
            for p in 0..k {
                let a = self.data[i * k + p];
                if a == 0.0 {
                    continue;
                }
                let orow = &mut out[p * n..(p + 1) * n];
                for (o, &b) in orow.iter_mut().zip(brow) {
                    *o += a * b;
                }
            }
        }
        Self {
            shape: vec![k, n],
            data: out,
        }
    }

    pub(crate) fn add_assign(&mut self, other: &Tensor) {
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a += b;
        }
    }
}

pub fn sigmoid(v: f64) -> f64 {
    if v >= 0.0 {
        1.0 / (1.0 + (-v).exp())
    } else {
        let e = v.exp();
        e / (1.0 + e)
    }
}

fn mismatch(op: &'static str, a: &Tensor, b: &Tensor) -> Error {
    Error::ShapeMismatch {
        op,
        lhs: a.shape.clone(),
        rhs: b.shape.clone(),
    }
}
