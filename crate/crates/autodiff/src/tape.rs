//! Recorded computation trace over dense f64 tensors.
//!
//! A [`Tape`] owns every tensor produced during one forward pass. Ops return
//! lightweight [`Value`] handles; the producing primitive and its inputs are
//! recorded whenever any input requires a gradient, so [`Tape::backward`] can
//! replay the trace in reverse. Shapes are rank-1 or rank-2 and there is no
//! implicit broadcasting: the only broadcasting primitive is
//! [`Tape::broadcast_add_bias`].

use crate::error::{Result, TensorError};
use crate::params::ParamId;

/// Handle to a tensor on a [`Tape`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Value(pub(crate) u32);

#[derive(Debug, Clone)]
enum Op {
    Matmul(Value, Value),
    Add(Value, Value),
    Sub(Value, Value),
    Mul(Value, Value),
    Div(Value, Value),
    Concat { axis: usize, inputs: Vec<Value> },
    Slice { input: Value, axis: usize, start: usize, end: usize },
    IndexSelect { input: Value, rows: Vec<usize> },
    ScatterAdd { input: Value, rows: Vec<usize> },
    Sum { input: Value, axis: Option<usize> },
    Mean { input: Value, axis: Option<usize> },
    Sigmoid(Value),
    Tanh(Value),
    Relu(Value),
    Exp(Value),
    Log(Value),
    Sqrt(Value),
    Cos(Value),
    Softmax { input: Value, axis: usize },
    BroadcastAddBias { input: Value, bias: Value },
    Transpose(Value),
    Dropout { input: Value, mask: Vec<f64> },
}

struct Node {
    shape: Vec<usize>,
    data: Vec<f64>,
    requires_grad: bool,
    src: Option<Op>,
    param: Option<ParamId>,
}

/// Append-only trace of tensors and the primitives that produced them.
#[derive(Default)]
pub struct Tape {
    nodes: Vec<Node>,
    grads: Vec<Option<Vec<f64>>>,
}

fn numel(shape: &[usize]) -> usize {
    shape.iter().product()
}

/// Row-major C += A(m,k) * B(k,n). The inner axpy over B rows keeps memory
/// access sequential so the loop autovectorizes.
fn matmul_acc(c: &mut [f64], a: &[f64], b: &[f64], m: usize, k: usize, n: usize) {
    for i in 0..m {
        let arow = &a[i * k..(i + 1) * k];
        let crow = &mut c[i * n..(i + 1) * n];
        for (p, &av) in arow.iter().enumerate() {
            if av == 0.0 {
                continue;
            }
            let brow = &b[p * n..(p + 1) * n];
            for j in 0..n {
                crow[j] += av * brow[j];
            }
        }
    }
}

/// dA(m,k) += dC(m,n) * B(k,n)^T, expressed as row dot products.
fn matmul_acc_bt(da: &mut [f64], dc: &[f64], b: &[f64], m: usize, k: usize, n: usize) {
    for i in 0..m {
        let dcrow = &dc[i * n..(i + 1) * n];
        let darow = &mut da[i * k..(i + 1) * k];
        for p in 0..k {
            let brow = &b[p * n..(p + 1) * n];
            let mut acc = 0.0;
            for j in 0..n {
                acc += dcrow[j] * brow[j];
            }
            darow[p] += acc;
        }
    }
}

/// dB(k,n) += A(m,k)^T * dC(m,n), expressed as axpy over dC rows.
fn matmul_acc_at(db: &mut [f64], a: &[f64], dc: &[f64], m: usize, k: usize, n: usize) {
    for i in 0..m {
        let arow = &a[i * k..(i + 1) * k];
        let dcrow = &dc[i * n..(i + 1) * n];
        for (p, &av) in arow.iter().enumerate() {
            if av == 0.0 {
                continue;
            }
            let dbrow = &mut db[p * n..(p + 1) * n];
            for j in 0..n {
                dbrow[j] += av * dcrow[j];
            }
        }
    }
}

impl Tape {
    pub fn new() -> Self {
        Tape::default()
    }

    /// Number of tensors recorded so far.
    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    fn push(&mut self, shape: Vec<usize>, data: Vec<f64>, requires_grad: bool, src: Option<Op>) -> Value {
        debug_assert_eq!(numel(&shape), data.len());
        self.nodes.push(Node {
            shape,
            data,
            requires_grad,
            // Trace is recorded only when a gradient can flow through.
            src: if requires_grad { src } else { None },
            param: None,
        });
        self.grads.push(None);
        Value(self.nodes.len() as u32 - 1)
    }

    /// A tensor that does not participate in differentiation.
    pub fn constant(&mut self, shape: &[usize], data: Vec<f64>) -> Result<Value> {
        if numel(shape) != data.len() {
            return Err(TensorError::shape(
                "constant",
                format!("shape {:?} holds {} elements, got {}", shape, numel(shape), data.len()),
            ));
        }
        if shape.is_empty() || shape.len() > 2 {
            return Err(TensorError::shape("constant", format!("rank must be 1 or 2, got {:?}", shape)));
        }
        Ok(self.push(shape.to_vec(), data, false, None))
    }

    /// A leaf tensor that requires a gradient (used for parameter staging).
    pub fn leaf(&mut self, shape: &[usize], data: Vec<f64>) -> Result<Value> {
        if numel(shape) != data.len() {
            return Err(TensorError::shape(
                "leaf",
                format!("shape {:?} holds {} elements, got {}", shape, numel(shape), data.len()),
            ));
        }
        Ok(self.push(shape.to_vec(), data, true, None))
    }

    pub(crate) fn set_param(&mut self, v: Value, id: ParamId) {
        self.nodes[v.0 as usize].param = Some(id);
    }

    pub fn zeros(&mut self, shape: &[usize]) -> Result<Value> {
        self.constant(shape, vec![0.0; numel(shape)])
    }

    pub fn ones(&mut self, shape: &[usize]) -> Result<Value> {
        self.constant(shape, vec![1.0; numel(shape)])
    }

    /// 1x1 constant.
    pub fn scalar(&mut self, v: f64) -> Value {
        self.constant(&[1, 1], vec![v]).expect("scalar shape is valid")
    }

    pub fn shape(&self, v: Value) -> &[usize] {
        &self.nodes[v.0 as usize].shape
    }

    pub fn data(&self, v: Value) -> &[f64] {
        &self.nodes[v.0 as usize].data
    }

    pub fn requires_grad(&self, v: Value) -> bool {
        self.nodes[v.0 as usize].requires_grad
    }

    /// Gradient buffer populated by the last [`Tape::backward`] call, if the
    /// tensor was reached.
    pub fn grad(&self, v: Value) -> Option<&[f64]> {
        self.grads[v.0 as usize].as_deref()
    }

    pub fn numel(&self, v: Value) -> usize {
        self.nodes[v.0 as usize].data.len()
    }

    fn rows_cols(&self, v: Value, op: &'static str) -> Result<(usize, usize)> {
        let s = self.shape(v);
        if s.len() != 2 {
            return Err(TensorError::shape(op, format!("expected rank-2 tensor, got {:?}", s)));
        }
        Ok((s[0], s[1]))
    }

    fn binary_same_shape(&mut self, op: &'static str, a: Value, b: Value) -> Result<(Vec<usize>, bool)> {
        let sa = self.shape(a).to_vec();
        let sb = self.shape(b);
        if sa != sb {
            return Err(TensorError::shape(op, format!("{:?} vs {:?}", sa, sb)));
        }
        let rg = self.requires_grad(a) || self.requires_grad(b);
        Ok((sa, rg))
    }

    // ---- primitives -------------------------------------------------------

    pub fn matmul(&mut self, a: Value, b: Value) -> Result<Value> {
        let (m, k) = self.rows_cols(a, "matmul")?;
        let (k2, n) = self.rows_cols(b, "matmul")?;
        if k != k2 {
            return Err(TensorError::shape(
                "matmul",
                format!("inner dims differ: {:?} x {:?}", self.shape(a), self.shape(b)),
            ));
        }
        let mut out = vec![0.0; m * n];
        matmul_acc(&mut out, self.data(a), self.data(b), m, k, n);
        let rg = self.requires_grad(a) || self.requires_grad(b);
        Ok(self.push(vec![m, n], out, rg, Some(Op::Matmul(a, b))))
    }

    pub fn add(&mut self, a: Value, b: Value) -> Result<Value> {
        let (shape, rg) = self.binary_same_shape("add", a, b)?;
        let out = self.data(a).iter().zip(self.data(b)).map(|(x, y)| x + y).collect();
        Ok(self.push(shape, out, rg, Some(Op::Add(a, b))))
    }

    pub fn sub(&mut self, a: Value, b: Value) -> Result<Value> {
        let (shape, rg) = self.binary_same_shape("sub", a, b)?;
        let out = self.data(a).iter().zip(self.data(b)).map(|(x, y)| x - y).collect();
        Ok(self.push(shape, out, rg, Some(Op::Sub(a, b))))
    }

    pub fn mul(&mut self, a: Value, b: Value) -> Result<Value> {
        let (shape, rg) = self.binary_same_shape("mul", a, b)?;
        let out = self.data(a).iter().zip(self.data(b)).map(|(x, y)| x * y).collect();
        Ok(self.push(shape, out, rg, Some(Op::Mul(a, b))))
    }

    pub fn div(&mut self, a: Value, b: Value) -> Result<Value> {
        let (shape, rg) = self.binary_same_shape("div", a, b)?;
        let out = self.data(a).iter().zip(self.data(b)).map(|(x, y)| x / y).collect();
        Ok(self.push(shape, out, rg, Some(Op::Div(a, b))))
    }

    pub fn concat(&mut self, axis: usize, inputs: &[Value]) -> Result<Value> {
        if inputs.is_empty() {
            return Err(TensorError::shape("concat", "no inputs".to_string()));
        }
        let rank = self.shape(inputs[0]).len();
        if axis >= rank {
            return Err(TensorError::shape("concat", format!("axis {} out of rank {}", axis, rank)));
        }
        if rank == 1 {
            // rank-1 concat along axis 0
            let mut data = Vec::new();
            let mut rg = false;
            for &v in inputs {
                if self.shape(v).len() != 1 {
                    return Err(TensorError::shape("concat", "mixed ranks".to_string()));
                }
                data.extend_from_slice(self.data(v));
                rg |= self.requires_grad(v);
            }
            let shape = vec![data.len()];
            return Ok(self.push(shape, data, rg, Some(Op::Concat { axis, inputs: inputs.to_vec() })));
        }
        let (r0, c0) = self.rows_cols(inputs[0], "concat")?;
        let mut rg = false;
        let (mut rows, mut cols) = (r0, c0);
        for &v in &inputs[1..] {
            let (r, c) = self.rows_cols(v, "concat")?;
            match axis {
                0 => {
                    if c != c0 {
                        return Err(TensorError::shape("concat", format!("column counts differ: {} vs {}", c0, c)));
                    }
                    rows += r;
                }
                _ => {
                    if r != r0 {
                        return Err(TensorError::shape("concat", format!("row counts differ: {} vs {}", r0, r)));
                    }
                    cols += c;
                }
            }
        }
        for &v in inputs {
            rg |= self.requires_grad(v);
        }
        let mut data = vec![0.0; rows * cols];
        match axis {
            0 => {
                let mut off = 0;
                for &v in inputs {
                    let d = self.data(v);
                    data[off..off + d.len()].copy_from_slice(d);
                    off += d.len();
                }
            }
            _ => {
                let mut col_off = 0;
                for &v in inputs {
                    let (r, c) = (self.shape(v)[0], self.shape(v)[1]);
                    let d = self.data(v);
                    for i in 0..r {
                        data[i * cols + col_off..i * cols + col_off + c].copy_from_slice(&d[i * c..(i + 1) * c]);
                    }
                    col_off += c;
                }
            }
        }
        Ok(self.push(vec![rows, cols], data, rg, Some(Op::Concat { axis, inputs: inputs.to_vec() })))
    }

    pub fn slice(&mut self, input: Value, axis: usize, start: usize, end: usize) -> Result<Value> {
        let s = self.shape(input).to_vec();
        if axis >= s.len() {
            return Err(TensorError::shape("slice", format!("axis {} out of rank {}", axis, s.len())));
        }
        if start > end || end > s[axis] {
            return Err(TensorError::shape(
                "slice",
                format!("range {}..{} out of bounds for axis length {}", start, end, s[axis]),
            ));
        }
        let rg = self.requires_grad(input);
        if s.len() == 1 {
            let data = self.data(input)[start..end].to_vec();
            return Ok(self.push(vec![end - start], data, rg, Some(Op::Slice { input, axis, start, end })));
        }
        let (r, c) = (s[0], s[1]);
        let d = self.data(input);
        let (shape, data) = match axis {
            0 => (vec![end - start, c], d[start * c..end * c].to_vec()),
            _ => {
                let mut out = Vec::with_capacity(r * (end - start));
                for i in 0..r {
                    out.extend_from_slice(&d[i * c + start..i * c + end]);
                }
                (vec![r, end - start], out)
            }
        };
        Ok(self.push(shape, data, rg, Some(Op::Slice { input, axis, start, end })))
    }

    /// Gather rows of a rank-2 tensor; indices may repeat.
    pub fn index_select(&mut self, input: Value, rows: &[usize]) -> Result<Value> {
        let (r, c) = self.rows_cols(input, "index_select")?;
        if let Some(&bad) = rows.iter().find(|&&i| i >= r) {
            return Err(TensorError::shape(
                "index_select",
                format!("row {} out of bounds for {} rows", bad, r),
            ));
        }
        let d = self.data(input);
        let mut out = Vec::with_capacity(rows.len() * c);
        for &i in rows {
            out.extend_from_slice(&d[i * c..(i + 1) * c]);
        }
        let rg = self.requires_grad(input);
        Ok(self.push(vec![rows.len(), c], out, rg, Some(Op::IndexSelect { input, rows: rows.to_vec() })))
    }

    /// Scatter rows of `input` into a zero matrix with `num_rows` rows,
    /// accumulating where indices repeat.
    pub fn scatter_add(&mut self, input: Value, rows: &[usize], num_rows: usize) -> Result<Value> {
        let (r, c) = self.rows_cols(input, "scatter_add")?;
        if rows.len() != r {
            return Err(TensorError::shape(
                "scatter_add",
                format!("{} indices for {} input rows", rows.len(), r),
            ));
        }
        if let Some(&bad) = rows.iter().find(|&&i| i >= num_rows) {
            return Err(TensorError::shape(
                "scatter_add",
                format!("row {} out of bounds for {} rows", bad, num_rows),
            ));
        }
        let d = self.data(input);
        let mut out = vec![0.0; num_rows * c];
        for (i, &dst) in rows.iter().enumerate() {
            for j in 0..c {
                out[dst * c + j] += d[i * c + j];
            }
        }
        let rg = self.requires_grad(input);
        Ok(self.push(vec![num_rows, c], out, rg, Some(Op::ScatterAdd { input, rows: rows.to_vec() })))
    }

    fn reduce(&mut self, input: Value, axis: Option<usize>, mean: bool, op: &'static str) -> Result<Value> {
        let s = self.shape(input).to_vec();
        let rg = self.requires_grad(input);
        let d = self.data(input);
        let (shape, data) = match (s.len(), axis) {
            (1, None) | (1, Some(0)) => {
                let total: f64 = d.iter().sum();
                let denom = if mean { d.len().max(1) as f64 } else { 1.0 };
                (vec![1], vec![total / denom])
            }
            (2, None) => {
                let total: f64 = d.iter().sum();
                let denom = if mean { d.len().max(1) as f64 } else { 1.0 };
                (vec![1, 1], vec![total / denom])
            }
            (2, Some(0)) => {
                let (r, c) = (s[0], s[1]);
                let mut out = vec![0.0; c];
                for i in 0..r {
                    for j in 0..c {
                        out[j] += d[i * c + j];
                    }
                }
                if mean {
                    let denom = r.max(1) as f64;
                    out.iter_mut().for_each(|x| *x /= denom);
                }
                (vec![1, c], out)
            }
            (2, Some(1)) => {
                let (r, c) = (s[0], s[1]);
                let mut out = vec![0.0; r];
                for i in 0..r {
                    out[i] = d[i * c..(i + 1) * c].iter().sum();
                    if mean {
                        out[i] /= c.max(1) as f64;
                    }
                }
                (vec![r, 1], out)
            }
            _ => return Err(TensorError::shape(op, format!("axis {:?} invalid for shape {:?}", axis, s))),
        };
        let src = if mean { Op::Mean { input, axis } } else { Op::Sum { input, axis } };
        Ok(self.push(shape, data, rg, Some(src)))
    }

    pub fn sum(&mut self, input: Value, axis: Option<usize>) -> Result<Value> {
        self.reduce(input, axis, false, "sum")
    }

    pub fn mean(&mut self, input: Value, axis: Option<usize>) -> Result<Value> {
        self.reduce(input, axis, true, "mean")
    }

    fn unary(&mut self, input: Value, f: impl Fn(f64) -> f64, src: Op) -> Value {
        let shape = self.shape(input).to_vec();
        let out = self.data(input).iter().map(|&x| f(x)).collect();
        let rg = self.requires_grad(input);
        self.push(shape, out, rg, Some(src))
    }

    pub fn sigmoid(&mut self, input: Value) -> Value {
        self.unary(input, |x| 1.0 / (1.0 + (-x).exp()), Op::Sigmoid(input))
    }

    pub fn tanh(&mut self, input: Value) -> Value {
        self.unary(input, f64::tanh, Op::Tanh(input))
    }

    pub fn relu(&mut self, input: Value) -> Value {
        self.unary(input, |x| x.max(0.0), Op::Relu(input))
    }

    pub fn exp(&mut self, input: Value) -> Value {
        self.unary(input, f64::exp, Op::Exp(input))
    }

    pub fn log(&mut self, input: Value) -> Value {
        self.unary(input, f64::ln, Op::Log(input))
    }

    pub fn sqrt(&mut self, input: Value) -> Value {
        self.unary(input, f64::sqrt, Op::Sqrt(input))
    }

    pub fn cos(&mut self, input: Value) -> Value {
        self.unary(input, f64::cos, Op::Cos(input))
    }

    pub fn softmax(&mut self, input: Value, axis: usize) -> Result<Value> {
        let (r, c) = self.rows_cols(input, "softmax")?;
        let reduced_len = if axis == 0 { r } else { c };
        if axis > 1 {
            return Err(TensorError::shape("softmax", format!("axis {} out of rank 2", axis)));
        }
        if reduced_len == 0 {
            return Err(TensorError::Domain("softmax over an empty axis".to_string()));
        }
        let d = self.data(input);
        let mut out = vec![0.0; r * c];
        if axis == 1 {
            for i in 0..r {
                let row = &d[i * c..(i + 1) * c];
                let m = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                let mut z = 0.0;
                for j in 0..c {
                    let e = (row[j] - m).exp();
                    out[i * c + j] = e;
                    z += e;
                }
                for j in 0..c {
                    out[i * c + j] /= z;
                }
            }
        } else {
            for j in 0..c {
                let mut m = f64::NEG_INFINITY;
                for i in 0..r {
                    m = m.max(d[i * c + j]);
                }
                let mut z = 0.0;
                for i in 0..r {
                    let e = (d[i * c + j] - m).exp();
                    out[i * c + j] = e;
                    z += e;
                }
                for i in 0..r {
                    out[i * c + j] /= z;
                }
            }
        }
        let rg = self.requires_grad(input);
        Ok(self.push(vec![r, c], out, rg, Some(Op::Softmax { input, axis })))
    }

    /// Add a rank-1 bias of length `n` to every row of an `m x n` tensor.
    pub fn broadcast_add_bias(&mut self, input: Value, bias: Value) -> Result<Value> {
        let (r, c) = self.rows_cols(input, "broadcast_add_bias")?;
        let bs = self.shape(bias).to_vec();
        if bs.len() != 1 || bs[0] != c {
            return Err(TensorError::shape(
                "broadcast_add_bias",
                format!("bias {:?} does not match {} columns", bs, c),
            ));
        }
        let d = self.data(input);
        let b = self.data(bias);
        let mut out = vec![0.0; r * c];
        for i in 0..r {
            for j in 0..c {
                out[i * c + j] = d[i * c + j] + b[j];
            }
        }
        let rg = self.requires_grad(input) || self.requires_grad(bias);
        Ok(self.push(vec![r, c], out, rg, Some(Op::BroadcastAddBias { input, bias })))
    }

    pub fn transpose(&mut self, input: Value) -> Result<Value> {
        let (r, c) = self.rows_cols(input, "transpose")?;
        let d = self.data(input);
        let mut out = vec![0.0; r * c];
        for i in 0..r {
            for j in 0..c {
                out[j * r + i] = d[i * c + j];
            }
        }
        let rg = self.requires_grad(input);
        Ok(self.push(vec![c, r], out, rg, Some(Op::Transpose(input))))
    }

    /// Inverted dropout: keeps entries with probability `1 - p` scaled by
    /// `1/(1-p)`. The mask is drawn here and recorded on the trace, so the
    /// backward pass reuses it. At `p == 0` this is the identity.
    pub fn dropout(&mut self, input: Value, p: f64, rng: &mut impl rand::Rng) -> Result<Value> {
        if !(0.0..1.0).contains(&p) {
            return Err(TensorError::Domain(format!("dropout rate {} outside [0, 1)", p)));
        }
        let shape = self.shape(input).to_vec();
        let scale = 1.0 / (1.0 - p);
        let mask: Vec<f64> = (0..self.numel(input))
            .map(|_| if rng.random::<f64>() < p { 0.0 } else { scale })
            .collect();
        let out = self.data(input).iter().zip(&mask).map(|(x, m)| x * m).collect();
        let rg = self.requires_grad(input);
        Ok(self.push(shape, out, rg, Some(Op::Dropout { input, mask })))
    }

    // ---- backward ---------------------------------------------------------

    /// Populate gradients of everything reachable from the scalar `root`,
    /// accumulating leaf gradients into `store`. Gradients add across fan-out.
    pub fn backward(&mut self, root: Value, store: &mut crate::params::ParamStore) -> Result<()> {
        if self.numel(root) != 1 {
            return Err(TensorError::Contract(format!(
                "backward root must be scalar, got shape {:?}",
                self.shape(root)
            )));
        }
        for g in self.grads.iter_mut() {
            *g = None;
        }
        self.grads[root.0 as usize] = Some(vec![1.0]);

        for idx in (0..=root.0 as usize).rev() {
            let Some(grad) = self.grads[idx].take() else { continue };
            // Re-store for post-hoc inspection before distributing.
            self.grads[idx] = Some(grad.clone());
            if let Some(id) = self.nodes[idx].param {
                store.accumulate_grad(id, &grad);
            }
            let Some(op) = self.nodes[idx].src.clone() else { continue };
            self.apply_backward(&op, idx, &grad);
        }
        Ok(())
    }

    fn add_grad(&mut self, v: Value, contrib: &[f64]) {
        if !self.nodes[v.0 as usize].requires_grad {
            return;
        }
        let slot = &mut self.grads[v.0 as usize];
        match slot {
            Some(g) => {
                for (gi, ci) in g.iter_mut().zip(contrib) {
                    *gi += ci;
                }
            }
            None => *slot = Some(contrib.to_vec()),
        }
    }

    fn add_grad_fn(&mut self, v: Value, contrib: impl FnOnce(&Tape) -> Vec<f64>) {
        if !self.nodes[v.0 as usize].requires_grad {
            return;
        }
        let c = contrib(self);
        self.add_grad(v, &c);
    }

    fn apply_backward(&mut self, op: &Op, out_idx: usize, dout: &[f64]) {
        let out = Value(out_idx as u32);
        match *op {
            Op::Matmul(a, b) => {
                let (m, k) = (self.shape(a)[0], self.shape(a)[1]);
                let n = self.shape(b)[1];
                if self.requires_grad(a) {
                    let mut da = vec![0.0; m * k];
                    matmul_acc_bt(&mut da, dout, self.data(b), m, k, n);
                    self.add_grad(a, &da);
                }
                if self.requires_grad(b) {
                    let mut db = vec![0.0; k * n];
                    matmul_acc_at(&mut db, self.data(a), dout, m, k, n);
                    self.add_grad(b, &db);
                }
            }
            Op::Add(a, b) => {
                self.add_grad(a, dout);
                self.add_grad(b, dout);
            }
            Op::Sub(a, b) => {
                self.add_grad(a, dout);
                self.add_grad_fn(b, |_| dout.iter().map(|&g| -g).collect());
            }
            Op::Mul(a, b) => {
                self.add_grad_fn(a, |t| t.data(b).iter().zip(dout).map(|(&y, &g)| y * g).collect());
                self.add_grad_fn(b, |t| t.data(a).iter().zip(dout).map(|(&x, &g)| x * g).collect());
            }
            Op::Div(a, b) => {
                self.add_grad_fn(a, |t| t.data(b).iter().zip(dout).map(|(&y, &g)| g / y).collect());
                self.add_grad_fn(b, |t| {
                    t.data(a)
                        .iter()
                        .zip(t.data(b))
                        .zip(dout)
                        .map(|((&x, &y), &g)| -g * x / (y * y))
                        .collect()
                });
            }
            Op::Concat { axis, ref inputs } => {
                let rank = self.shape(out).len();
                if rank == 1 || axis == 0 {
                    let mut off = 0;
                    for &v in inputs {
                        let n = self.numel(v);
                        let chunk = dout[off..off + n].to_vec();
                        self.add_grad(v, &chunk);
                        off += n;
                    }
                } else {
                    let cols = self.shape(out)[1];
                    let mut col_off = 0;
                    for &v in inputs {
                        let (r, c) = (self.shape(v)[0], self.shape(v)[1]);
                        let mut chunk = vec![0.0; r * c];
                        for i in 0..r {
                            chunk[i * c..(i + 1) * c]
                                .copy_from_slice(&dout[i * cols + col_off..i * cols + col_off + c]);
                        }
                        self.add_grad(v, &chunk);
                        col_off += c;
                    }
                }
            }
            Op::Slice { input, axis, start, end } => {
                let s = self.shape(input).to_vec();
                let mut din = vec![0.0; numel(&s)];
                if s.len() == 1 {
                    din[start..end].copy_from_slice(dout);
                } else if axis == 0 {
                    let c = s[1];
                    din[start * c..end * c].copy_from_slice(dout);
                } else {
                    let c = s[1];
                    let w = end - start;
                    for i in 0..s[0] {
                        din[i * c + start..i * c + end].copy_from_slice(&dout[i * w..(i + 1) * w]);
                    }
                }
                self.add_grad(input, &din);
            }
            Op::IndexSelect { input, ref rows } => {
                let (r, c) = (self.shape(input)[0], self.shape(input)[1]);
                let mut din = vec![0.0; r * c];
                for (i, &src) in rows.iter().enumerate() {
                    for j in 0..c {
                        din[src * c + j] += dout[i * c + j];
                    }
                }
                self.add_grad(input, &din);
            }
            Op::ScatterAdd { input, ref rows } => {
                let c = self.shape(input)[1];
                let mut din = vec![0.0; rows.len() * c];
                for (i, &dst) in rows.iter().enumerate() {
                    din[i * c..(i + 1) * c].copy_from_slice(&dout[dst * c..(dst + 1) * c]);
                }
                self.add_grad(input, &din);
            }
            Op::Sum { input, axis } | Op::Mean { input, axis } => {
                let is_mean = matches!(op, Op::Mean { .. });
                let s = self.shape(input).to_vec();
                let n = numel(&s);
                let mut din = vec![0.0; n];
                match (s.len(), axis) {
                    (1, _) | (2, None) => {
                        let scale = if is_mean { 1.0 / n.max(1) as f64 } else { 1.0 };
                        din.iter_mut().for_each(|x| *x = dout[0] * scale);
                    }
                    (2, Some(0)) => {
                        let (r, c) = (s[0], s[1]);
                        let scale = if is_mean { 1.0 / r.max(1) as f64 } else { 1.0 };
                        for i in 0..r {
                            for j in 0..c {
                                din[i * c + j] = dout[j] * scale;
                            }
                        }
                    }
                    (2, Some(_)) => {
                        let (r, c) = (s[0], s[1]);
                        let scale = if is_mean { 1.0 / c.max(1) as f64 } else { 1.0 };
                        for i in 0..r {
                            for j in 0..c {
                                din[i * c + j] = dout[i] * scale;
                            }
                        }
                    }
                    _ => unreachable!("validated in forward"),
                }
                self.add_grad(input, &din);
            }
            Op::Sigmoid(a) => {
                self.add_grad_fn(a, |t| {
                    t.data(out).iter().zip(dout).map(|(&s, &g)| g * s * (1.0 - s)).collect()
                });
            }
            Op::Tanh(a) => {
                self.add_grad_fn(a, |t| {
                    t.data(out).iter().zip(dout).map(|(&y, &g)| g * (1.0 - y * y)).collect()
                });
            }
            Op::Relu(a) => {
                self.add_grad_fn(a, |t| {
                    t.data(a)
                        .iter()
                        .zip(dout)
                        .map(|(&x, &g)| if x > 0.0 { g } else { 0.0 })
                        .collect()
                });
            }
            Op::Exp(a) => {
                self.add_grad_fn(a, |t| t.data(out).iter().zip(dout).map(|(&y, &g)| g * y).collect());
            }
            Op::Log(a) => {
                self.add_grad_fn(a, |t| t.data(a).iter().zip(dout).map(|(&x, &g)| g / x).collect());
            }
            Op::Sqrt(a) => {
                self.add_grad_fn(a, |t| {
                    t.data(out).iter().zip(dout).map(|(&y, &g)| g / (2.0 * y)).collect()
                });
            }
            Op::Cos(a) => {
                self.add_grad_fn(a, |t| {
                    t.data(a).iter().zip(dout).map(|(&x, &g)| -g * x.sin()).collect()
                });
            }
            Op::Softmax { input, axis } => {
                let (r, c) = (self.shape(out)[0], self.shape(out)[1]);
                let s = self.data(out);
                let mut din = vec![0.0; r * c];
                if axis == 1 {
                    for i in 0..r {
                        let srow = &s[i * c..(i + 1) * c];
                        let grow = &dout[i * c..(i + 1) * c];
                        let dot: f64 = srow.iter().zip(grow).map(|(&si, &gi)| si * gi).sum();
                        for j in 0..c {
                            din[i * c + j] = srow[j] * (grow[j] - dot);
                        }
                    }
                } else {
                    for j in 0..c {
                        let mut dot = 0.0;
                        for i in 0..r {
                            dot += s[i * c + j] * dout[i * c + j];
                        }
                        for i in 0..r {
                            din[i * c + j] = s[i * c + j] * (dout[i * c + j] - dot);
                        }
                    }
                }
                self.add_grad(input, &din);
            }
            Op::BroadcastAddBias { input, bias } => {
                self.add_grad(input, dout);
                if self.requires_grad(bias) {
                    let (r, c) = (self.shape(input)[0], self.shape(input)[1]);
                    let mut db = vec![0.0; c];
                    for i in 0..r {
                        for j in 0..c {
                            db[j] += dout[i * c + j];
                        }
                    }
                    self.add_grad(bias, &db);
                }
            }
            Op::Transpose(a) => {
                let (r, c) = (self.shape(out)[0], self.shape(out)[1]);
                let mut din = vec![0.0; r * c];
                for i in 0..r {
                    for j in 0..c {
                        din[j * r + i] = dout[i * c + j];
                    }
                }
                self.add_grad(a, &din);
            }
            Op::Dropout { input, ref mask } => {
                self.add_grad_fn(input, |_| mask.iter().zip(dout).map(|(&m, &g)| m * g).collect());
            }
        }
    }
}
