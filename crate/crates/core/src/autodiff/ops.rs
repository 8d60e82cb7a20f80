use ndarray::{s, Array2, ArrayView2, Axis, Ix2, IxDyn, Slice};

use super::{accumulate, AdError, Array, Graph, Op, Var};

const SQRT_2_OVER_PI: f64 = 0.797_884_560_802_865_4;
const GELU_C: f64 = 0.044_715;

fn view2(a: &Array) -> ArrayView2<'_, f64> {
    a.view().into_dimensionality::<Ix2>().expect("checked 2-D")
}

fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

fn gelu(x: f64) -> f64 {
    0.5 * x * (1.0 + (SQRT_2_OVER_PI * (x + GELU_C * x * x * x)).tanh())
}

fn gelu_grad(x: f64) -> f64 {
    let u = SQRT_2_OVER_PI * (x + GELU_C * x * x * x);
    let t = u.tanh();
    let du = SQRT_2_OVER_PI * (1.0 + 3.0 * GELU_C * x * x);
    0.5 * (1.0 + t) + 0.5 * x * (1.0 - t * t) * du
}

impl Graph {
    fn shape_err(&self, op: &'static str, a: Var, b: Var) -> AdError {
        AdError::Shape { op, left: self.shape(a).to_vec(), right: self.shape(b).to_vec() }
    }

    fn require_2d(&self, op: &'static str, a: Var) -> Result<(), AdError> {
        if self.shape(a).len() == 2 {
            Ok(())
        } else {
            Err(AdError::Shape { op, left: self.shape(a).to_vec(), right: vec![] })
        }
    }

    fn unary(&mut self, a: Var, value: Array, op: Op) -> Var {
        let rg = self.rg(a);
        self.push(value, op, rg)
    }

    fn binary(&mut self, a: Var, b: Var, value: Array, op: Op) -> Var {
        let rg = self.rg(a) || self.rg(b);
        self.push(value, op, rg)
    }

    /// `[m, k] · [k, n]`
    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var, AdError> {
        let (sa, sb) = (self.shape(a), self.shape(b));
        if sa.len() != 2 || sb.len() != 2 || sa[1] != sb[0] {
            return Err(self.shape_err("matmul", a, b));
        }
        let v = view2(self.value(a)).dot(&view2(self.value(b))).into_dyn();
        Ok(self.binary(a, b, v, Op::MatMul(a, b)))
    }

    fn same_shape(&self, op: &'static str, a: Var, b: Var) -> Result<(), AdError> {
        if self.shape(a) == self.shape(b) {
            Ok(())
        } else {
            Err(self.shape_err(op, a, b))
        }
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var, AdError> {
        self.same_shape("add", a, b)?;
        let v = self.value(a) + self.value(b);
        Ok(self.binary(a, b, v, Op::Add(a, b)))
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var, AdError> {
        self.same_shape("sub", a, b)?;
        let v = self.value(a) - self.value(b);
        Ok(self.binary(a, b, v, Op::Sub(a, b)))
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var, AdError> {
        self.same_shape("mul", a, b)?;
        let v = self.value(a) * self.value(b);
        Ok(self.binary(a, b, v, Op::Mul(a, b)))
    }

    pub fn div(&mut self, a: Var, b: Var) -> Result<Var, AdError> {
        self.same_shape("div", a, b)?;
        let v = self.value(a) / self.value(b);
        Ok(self.binary(a, b, v, Op::Div(a, b)))
    }

    fn row_check(&self, op: &'static str, a: Var, row: Var) -> Result<usize, AdError> {
        let (sa, sr) = (self.shape(a), self.shape(row));
        let n = *sa.last().unwrap_or(&0);
        let ok = sa.len() == 2 && sr.iter().product::<usize>() == n && sr.last() == Some(&n);
        if ok {
            Ok(n)
        } else {
            Err(self.shape_err(op, a, row))
        }
    }

    /// `[m, n] + [n]` broadcast over rows (`row` may also be `[1, n]`).
    pub fn add_row(&mut self, a: Var, row: Var) -> Result<Var, AdError> {
        let n = self.row_check("add_row", a, row)?;
        let r = self.value(row).view().into_shape_with_order(n).expect("checked");
        let v = &view2(self.value(a)) + &r;
        Ok(self.binary(a, row, v.into_dyn(), Op::AddRow(a, row)))
    }

    /// `[m, n] ⊙ [n]` broadcast over rows.
    pub fn mul_row(&mut self, a: Var, row: Var) -> Result<Var, AdError> {
        let n = self.row_check("mul_row", a, row)?;
        let r = self.value(row).view().into_shape_with_order(n).expect("checked");
        let v = &view2(self.value(a)) * &r;
        Ok(self.binary(a, row, v.into_dyn(), Op::MulRow(a, row)))
    }

    pub fn scale(&mut self, a: Var, c: f64) -> Var {
        let v = self.value(a) * c;
        self.unary(a, v, Op::Scale(a, c))
    }

    pub fn add_scalar(&mut self, a: Var, c: f64) -> Var {
        let v = self.value(a) + c;
        self.unary(a, v, Op::AddScalar(a))
    }

    pub fn reshape(&mut self, a: Var, shape: &[usize]) -> Result<Var, AdError> {
        if shape.iter().product::<usize>() != self.value(a).len() {
            return Err(AdError::Shape { op: "reshape", left: self.shape(a).to_vec(), right: shape.to_vec() });
        }
        let v = self
            .value(a)
            .as_standard_layout()
            .into_owned()
            .into_shape_with_order(IxDyn(shape))
            .expect("checked");
        Ok(self.unary(a, v, Op::Reshape(a)))
    }

    pub fn transpose(&mut self, a: Var) -> Result<Var, AdError> {
        self.require_2d("transpose", a)?;
        let v = view2(self.value(a)).t().as_standard_layout().into_owned().into_dyn();
        Ok(self.unary(a, v, Op::Transpose(a)))
    }

    pub fn concat(&mut self, parts: &[Var], axis: usize) -> Result<Var, AdError> {
        let first = *parts.first().ok_or(AdError::Shape { op: "concat", left: vec![], right: vec![] })?;
        for &p in parts {
            let (s0, sp) = (self.shape(first), self.shape(p));
            let ok = s0.len() == sp.len()
                && axis < s0.len()
                && s0.iter().zip(sp).enumerate().all(|(d, (x, y))| d == axis || x == y);
            if !ok {
                return Err(self.shape_err("concat", first, p));
            }
        }
        let views: Vec<_> = parts.iter().map(|p| self.value(*p).view()).collect();
        let v = ndarray::concatenate(Axis(axis), &views).expect("checked").as_standard_layout().into_owned();
        let rg = parts.iter().any(|p| self.rg(*p));
        Ok(self.push(v, Op::Concat(parts.to_vec(), axis), rg))
    }

    /// `a[.., start..end, ..]` along `axis`.
    pub fn slice(&mut self, a: Var, axis: usize, start: usize, end: usize) -> Result<Var, AdError> {
        let s = self.shape(a);
        if axis >= s.len() || start > end || end > s[axis] {
            return Err(AdError::Index { op: "slice", index: end, len: s.get(axis).copied().unwrap_or(0) });
        }
        let v = self
            .value(a)
            .slice_axis(Axis(axis), Slice::from(start..end))
            .as_standard_layout()
            .into_owned();
        let rg = self.rg(a);
        Ok(self.push(v, Op::Slice(a, axis, start), rg))
    }

    pub fn sum(&mut self, a: Var) -> Var {
        let v = Array::from_elem(IxDyn(&[]), self.value(a).sum());
        self.unary(a, v, Op::Sum(a))
    }

    pub fn mean(&mut self, a: Var) -> Var {
        let n = self.value(a).len().max(1) as f64;
        let v = Array::from_elem(IxDyn(&[]), self.value(a).sum() / n);
        self.unary(a, v, Op::Mean(a))
    }

    /// Mean over axis 0 of `[m, n]`, giving `[1, n]`.
    pub fn mean_rows(&mut self, a: Var) -> Result<Var, AdError> {
        self.require_2d("mean_rows", a)?;
        let m = view2(self.value(a));
        let v = m.mean_axis(Axis(0)).expect("non-empty").insert_axis(Axis(0)).into_dyn();
        Ok(self.unary(a, v, Op::MeanRows(a)))
    }

    /// Row-wise softmax of `[m, n]`.
    pub fn softmax(&mut self, a: Var) -> Result<Var, AdError> {
        self.require_2d("softmax", a)?;
        let mut v = view2(self.value(a)).to_owned();
        for mut row in v.rows_mut() {
            let max = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            row.mapv_inplace(|x| (x - max).exp());
            let s = row.sum();
            row.mapv_inplace(|x| x / s);
        }
        Ok(self.unary(a, v.into_dyn(), Op::Softmax(a)))
    }

    /// Row-wise `(x − mean) / sqrt(var + eps)` of `[m, n]`, no affine part.
    pub fn normalize(&mut self, a: Var, eps: f64) -> Result<Var, AdError> {
        self.require_2d("normalize", a)?;
        let mut v = view2(self.value(a)).to_owned();
        let mut inv = Vec::with_capacity(v.nrows());
        for mut row in v.rows_mut() {
            let n = row.len() as f64;
            let mean = row.sum() / n;
            row.mapv_inplace(|x| x - mean);
            let var = row.iter().map(|x| x * x).sum::<f64>() / n;
            let is = 1.0 / (var + eps).sqrt();
            row.mapv_inplace(|x| x * is);
            inv.push(is);
        }
        Ok(self.unary(a, v.into_dyn(), Op::Normalize(a, inv)))
    }

    /// Layer normalization over the last axis with learnable scale and shift.
    pub fn layer_norm(&mut self, a: Var, gamma: Var, beta: Var, eps: f64) -> Result<Var, AdError> {
        let n = self.normalize(a, eps)?;
        let s = self.mul_row(n, gamma)?;
        self.add_row(s, beta)
    }

    pub fn tanh(&mut self, a: Var) -> Var {
        let v = self.value(a).mapv(f64::tanh);
        self.unary(a, v, Op::Tanh(a))
    }

    pub fn sigmoid(&mut self, a: Var) -> Var {
        let v = self.value(a).mapv(sigmoid);
        self.unary(a, v, Op::Sigmoid(a))
    }

    pub fn abs(&mut self, a: Var) -> Var {
        let v = self.value(a).mapv(f64::abs);
        self.unary(a, v, Op::Abs(a))
    }

    /// GELU, tanh approximation.
    pub fn gelu(&mut self, a: Var) -> Var {
        let v = self.value(a).mapv(gelu);
        self.unary(a, v, Op::Gelu(a))
    }

    pub fn silu(&mut self, a: Var) -> Var {
        let v = self.value(a).mapv(|x| x * sigmoid(x));
        self.unary(a, v, Op::Silu(a))
    }

    pub fn log(&mut self, a: Var) -> Var {
        let v = self.value(a).mapv(f64::ln);
        self.unary(a, v, Op::Log(a))
    }

    /// Clamp to `[lo, hi]`; gradient is zero where clamped.
    pub fn clamp(&mut self, a: Var, lo: f64, hi: f64) -> Var {
        let v = self.value(a).mapv(|x| x.clamp(lo, hi));
        self.unary(a, v, Op::Clamp(a, lo, hi))
    }

    /// Rows of a `[V, d]` table, e.g. an embedding lookup.
    pub fn gather_rows(&mut self, table: Var, indices: &[usize]) -> Result<Var, AdError> {
        self.require_2d("gather_rows", table)?;
        let t = view2(self.value(table));
        let (rows, d) = t.dim();
        if let Some(&bad) = indices.iter().find(|&&i| i >= rows) {
            return Err(AdError::Index { op: "gather_rows", index: bad, len: rows });
        }
        let mut out = Array2::zeros((indices.len(), d));
        for (r, &i) in indices.iter().enumerate() {
            out.row_mut(r).assign(&t.row(i));
        }
        Ok(self.unary(table, out.into_dyn(), Op::GatherRows(table, indices.to_vec())))
    }

    /// Node with externally computed `value` whose derivative with respect to
    /// `input` (flattened) is `jacobian` (`value.len() × input.len()`).
    pub fn apply_jacobian(&mut self, input: Var, value: Array, jacobian: Array2<f64>) -> Result<Var, AdError> {
        if jacobian.nrows() != value.len() || jacobian.ncols() != self.value(input).len() {
            return Err(AdError::Shape {
                op: "apply_jacobian",
                left: vec![jacobian.nrows(), jacobian.ncols()],
                right: vec![value.len(), self.value(input).len()],
            });
        }
        Ok(self.unary(input, value, Op::Jacobian(input, jacobian)))
    }

    pub(crate) fn backprop_node(&self, i: usize, g: &Array, grads: &mut [Option<Array>]) {
        let out = &self.nodes[i].value;
        let val = |v: Var| &self.nodes[v.0].value;
        let send = |v: Var, grad: Array, grads: &mut [Option<Array>]| {
            if self.nodes[v.0].requires_grad {
                accumulate(grads, v, grad);
            }
        };
        match &self.nodes[i].op {
            Op::Leaf => {}
            Op::MatMul(a, b) => {
                let g2 = view2(g);
                if self.rg(*a) {
                    send(*a, g2.dot(&view2(val(*b)).t()).into_dyn(), grads);
                }
                if self.rg(*b) {
                    send(*b, view2(val(*a)).t().dot(&g2).into_dyn(), grads);
                }
            }
            Op::Add(a, b) => {
                send(*a, g.clone(), grads);
                send(*b, g.clone(), grads);
            }
            Op::Sub(a, b) => {
                send(*a, g.clone(), grads);
                send(*b, -g, grads);
            }
            Op::Mul(a, b) => {
                send(*a, g * val(*b), grads);
                send(*b, g * val(*a), grads);
            }
            Op::Div(a, b) => {
                send(*a, g / val(*b), grads);
                if self.rg(*b) {
                    let bv = val(*b);
                    send(*b, -(g * out) / bv, grads);
                }
            }
            Op::AddRow(a, row) => {
                send(*a, g.clone(), grads);
                if self.rg(*row) {
                    let sum = view2(g).sum_axis(Axis(0));
                    let gr = sum.into_shape_with_order(IxDyn(val(*row).shape())).expect("row shape");
                    send(*row, gr, grads);
                }
            }
            Op::MulRow(a, row) => {
                let rv = val(*row);
                let n = rv.len();
                let r = rv.view().into_shape_with_order(n).expect("row");
                if self.rg(*a) {
                    send(*a, (&view2(g) * &r).into_dyn(), grads);
                }
                if self.rg(*row) {
                    let prod = &view2(g) * &view2(val(*a));
                    let gr = prod.sum_axis(Axis(0)).into_shape_with_order(IxDyn(rv.shape())).expect("row shape");
                    send(*row, gr, grads);
                }
            }
            Op::Scale(a, c) => send(*a, g * *c, grads),
            Op::AddScalar(a) => send(*a, g.clone(), grads),
            Op::Reshape(a) => {
                let gr = g
                    .as_standard_layout()
                    .into_owned()
                    .into_shape_with_order(IxDyn(val(*a).shape()))
                    .expect("same size");
                send(*a, gr, grads);
            }
            Op::Transpose(a) => send(*a, view2(g).t().as_standard_layout().into_owned().into_dyn(), grads),
            Op::Concat(parts, axis) => {
                let mut offset = 0;
                for p in parts {
                    let len = val(*p).shape()[*axis];
                    if self.rg(*p) {
                        let piece = g.slice_axis(Axis(*axis), Slice::from(offset..offset + len)).to_owned();
                        send(*p, piece, grads);
                    }
                    offset += len;
                }
            }
            Op::Slice(a, axis, start) => {
                let mut full = Array::zeros(val(*a).raw_dim());
                let len = g.shape()[*axis];
                full.slice_axis_mut(Axis(*axis), Slice::from(*start..*start + len)).assign(g);
                send(*a, full, grads);
            }
            Op::Sum(a) => {
                let s = *g.iter().next().expect("scalar");
                send(*a, Array::from_elem(val(*a).raw_dim(), s), grads);
            }
            Op::Mean(a) => {
                let n = val(*a).len().max(1) as f64;
                let s = *g.iter().next().expect("scalar") / n;
                send(*a, Array::from_elem(val(*a).raw_dim(), s), grads);
            }
            Op::MeanRows(a) => {
                let m = val(*a).shape()[0] as f64;
                let row = view2(g).row(0).to_owned() / m;
                let full = row.broadcast(val(*a).shape()[..2].to_vec()).expect("broadcast").to_owned();
                send(*a, full.into_dyn(), grads);
            }
            Op::Softmax(a) => {
                let y = view2(out);
                let g2 = view2(g);
                let mut gx = Array2::zeros(y.dim());
                for r in 0..y.nrows() {
                    let dot: f64 = y.row(r).iter().zip(g2.row(r)).map(|(a, b)| a * b).sum();
                    for c in 0..y.ncols() {
                        gx[(r, c)] = y[(r, c)] * (g2[(r, c)] - dot);
                    }
                }
                send(*a, gx.into_dyn(), grads);
            }
            Op::Normalize(a, inv) => {
                let xh = view2(out);
                let g2 = view2(g);
                let n = xh.ncols() as f64;
                let mut gx = Array2::zeros(xh.dim());
                for r in 0..xh.nrows() {
                    let gm = g2.row(r).sum() / n;
                    let gxm: f64 = g2.row(r).iter().zip(xh.row(r)).map(|(a, b)| a * b).sum::<f64>() / n;
                    for c in 0..xh.ncols() {
                        gx[(r, c)] = inv[r] * (g2[(r, c)] - gm - xh[(r, c)] * gxm);
                    }
                }
                send(*a, gx.into_dyn(), grads);
            }
            Op::Tanh(a) => send(*a, g * &out.mapv(|y| 1.0 - y * y), grads),
            Op::Sigmoid(a) => send(*a, g * &out.mapv(|y| y * (1.0 - y)), grads),
            Op::Abs(a) => send(*a, g * &val(*a).mapv(|x| if x > 0.0 { 1.0 } else if x < 0.0 { -1.0 } else { 0.0 }), grads),
            Op::Gelu(a) => send(*a, g * &val(*a).mapv(gelu_grad), grads),
            Op::Silu(a) => send(
                *a,
                g * &val(*a).mapv(|x| {
                    let s = sigmoid(x);
                    s * (1.0 + x * (1.0 - s))
                }),
                grads,
            ),
            Op::Log(a) => send(*a, g / val(*a), grads),
            Op::Clamp(a, lo, hi) => {
                let mask = val(*a).mapv(|x| if x >= *lo && x <= *hi { 1.0 } else { 0.0 });
                send(*a, g * &mask, grads);
            }
            Op::GatherRows(table, indices) => {
                let tv = val(*table);
                let mut gt = Array2::zeros((tv.shape()[0], tv.shape()[1]));
                let g2 = view2(g);
                for (r, &idx) in indices.iter().enumerate() {
                    let mut dst = gt.slice_mut(s![idx, ..]);
                    dst += &g2.row(r);
                }
                send(*table, gt.into_dyn(), grads);
            }
            Op::Jacobian(input, jac) => {
                let flat = g.iter().cloned().collect::<ndarray::Array1<f64>>();
                let gi = jac.t().dot(&flat);
                let gi = gi.into_shape_with_order(IxDyn(val(*input).shape())).expect("input shape");
                send(*input, gi, grads);
            }
        }
    }
}
