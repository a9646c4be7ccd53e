//! Forward and backward rules for every differentiable operation.

use super::{BackCtx, Matrix, Value};

fn same_shape(a: &Value, b: &Value, op: &str) {
    let (ar, ac) = a.shape();
    let (br, bc) = b.shape();
    assert!(
        ar == br && ac == bc,
        "{op}: shape mismatch {ar}x{ac} vs {br}x{bc}"
    );
}

impl Value {
    pub fn matmul(&self, rhs: &Value) -> Value {
        let (ar, ac) = self.shape();
        let (br, bc) = rhs.shape();
        assert!(ac == br, "matmul: shape mismatch {ar}x{ac} vs {br}x{bc}");
        let data = self.data().dot(&*rhs.data());
        Value::from_op(
            data,
            vec![self.clone(), rhs.clone()],
            "matmul",
            Box::new(|ctx: &BackCtx| {
                let a = ctx.parents[0].data();
                let b = ctx.parents[1].data();
                let da = if ctx.parents[0].needs_grad() {
                    Some(ctx.adj.dot(&b.t()))
                } else {
                    None
                };
                let db = if ctx.parents[1].needs_grad() {
                    Some(a.t().dot(ctx.adj))
                } else {
                    None
                };
                vec![da, db]
            }),
        )
    }

    pub fn add(&self, rhs: &Value) -> Value {
        same_shape(self, rhs, "add");
        let data = &*self.data() + &*rhs.data();
        Value::from_op(
            data,
            vec![self.clone(), rhs.clone()],
            "add",
            Box::new(|ctx| vec![Some(ctx.adj.clone()), Some(ctx.adj.clone())]),
        )
    }

    pub fn sub(&self, rhs: &Value) -> Value {
        same_shape(self, rhs, "sub");
        let data = &*self.data() - &*rhs.data();
        Value::from_op(
            data,
            vec![self.clone(), rhs.clone()],
            "sub",
            Box::new(|ctx| vec![Some(ctx.adj.clone()), Some(-ctx.adj.clone())]),
        )
    }

    pub fn hadamard(&self, rhs: &Value) -> Value {
        same_shape(self, rhs, "hadamard");
        let data = &*self.data() * &*rhs.data();
        Value::from_op(
            data,
            vec![self.clone(), rhs.clone()],
            "hadamard",
            Box::new(|ctx| {
                let a = ctx.parents[0].data();
                let b = ctx.parents[1].data();
                vec![Some(ctx.adj * &*b), Some(ctx.adj * &*a)]
            }),
        )
    }

    /// Elementwise division; used on 1x1 scalars for loss ratios.
    pub fn div(&self, rhs: &Value) -> Value {
        same_shape(self, rhs, "div");
        let data = &*self.data() / &*rhs.data();
        Value::from_op(
            data,
            vec![self.clone(), rhs.clone()],
            "div",
            Box::new(|ctx| {
                let a = ctx.parents[0].data();
                let b = ctx.parents[1].data();
                let da = ctx.adj / &*b;
                let db = -(ctx.adj * &*a) / (&*b * &*b);
                vec![Some(da), Some(db)]
            }),
        )
    }

    /// Divide every entry by a 1x1 scalar value.
    pub fn div_scalar(&self, s: &Value) -> Value {
        assert_eq!(s.shape(), (1, 1), "div_scalar takes a 1x1 divisor");
        let sv = s.item();
        let data = self.data().mapv(|v| v / sv);
        Value::from_op(
            data,
            vec![self.clone(), s.clone()],
            "div_scalar",
            Box::new(|ctx| {
                let a = ctx.parents[0].data();
                let sv = ctx.parents[1].data()[[0, 0]];
                let da = ctx.adj.mapv(|g| g / sv);
                let ds = -(ctx.adj * &*a).sum() / (sv * sv);
                vec![Some(da), Some(Matrix::from_elem((1, 1), ds))]
            }),
        )
    }

    pub fn scalar_mul(&self, c: f64) -> Value {
        let data = self.data().mapv(|v| v * c);
        Value::from_op(
            data,
            vec![self.clone()],
            "scalar_mul",
            Box::new(move |ctx| vec![Some(ctx.adj.mapv(|g| g * c))]),
        )
    }

    pub fn transpose(&self) -> Value {
        let data = self.data().t().to_owned();
        Value::from_op(
            data,
            vec![self.clone()],
            "transpose",
            Box::new(|ctx| vec![Some(ctx.adj.t().to_owned())]),
        )
    }

    pub fn concat_cols(&self, rhs: &Value) -> Value {
        let (ar, ac) = self.shape();
        let (br, bc) = rhs.shape();
        assert!(
            ar == br,
            "concat_cols: row mismatch {ar}x{ac} vs {br}x{bc}"
        );
        let mut data = Matrix::zeros((ar, ac + bc));
        {
            let a = self.data();
            let b = rhs.data();
            for i in 0..ar {
                for c in 0..ac {
                    data[[i, c]] = a[[i, c]];
                }
                for c in 0..bc {
                    data[[i, ac + c]] = b[[i, c]];
                }
            }
        }
        Value::from_op(
            data,
            vec![self.clone(), rhs.clone()],
            "concat_cols",
            Box::new(move |ctx| {
                let (r, _) = (ctx.adj.nrows(), ctx.adj.ncols());
                let mut da = Matrix::zeros((r, ac));
                let mut db = Matrix::zeros((r, bc));
                for i in 0..r {
                    for c in 0..ac {
                        da[[i, c]] = ctx.adj[[i, c]];
                    }
                    for c in 0..bc {
                        db[[i, c]] = ctx.adj[[i, ac + c]];
                    }
                }
                vec![Some(da), Some(db)]
            }),
        )
    }

    /// Select rows by index; gradients scatter back into place.
    pub fn gather_rows(&self, idx: &[usize]) -> Value {
        let (n, d) = self.shape();
        for &i in idx {
            assert!(i < n, "gather_rows: index {i} out of {n} rows");
        }
        let mut data = Matrix::zeros((idx.len(), d));
        {
            let a = self.data();
            for (r, &i) in idx.iter().enumerate() {
                for c in 0..d {
                    data[[r, c]] = a[[i, c]];
                }
            }
        }
        let idx: Vec<usize> = idx.to_vec();
        Value::from_op(
            data,
            vec![self.clone()],
            "gather_rows",
            Box::new(move |ctx| {
                let mut da = Matrix::zeros((n, d));
                for (r, &i) in idx.iter().enumerate() {
                    for c in 0..d {
                        da[[i, c]] += ctx.adj[[r, c]];
                    }
                }
                vec![Some(da)]
            }),
        )
    }

    /// Scale row i by the scalar in row i of a column vector (the
    /// broadcast gate of selection pooling).
    pub fn col_scale(&self, gate: &Value) -> Value {
        let (n, d) = self.shape();
        let (gr, gc) = gate.shape();
        assert!(
            gr == n && gc == 1,
            "col_scale: gate must be {n}x1, got {gr}x{gc}"
        );
        let mut data = self.data().clone();
        {
            let g = gate.data();
            for i in 0..n {
                for c in 0..d {
                    data[[i, c]] *= g[[i, 0]];
                }
            }
        }
        Value::from_op(
            data,
            vec![self.clone(), gate.clone()],
            "col_scale",
            Box::new(move |ctx| {
                let a = ctx.parents[0].data();
                let g = ctx.parents[1].data();
                let mut da = ctx.adj.clone();
                let mut dg = Matrix::zeros((n, 1));
                for i in 0..n {
                    for c in 0..d {
                        da[[i, c]] *= g[[i, 0]];
                        dg[[i, 0]] += ctx.adj[[i, c]] * a[[i, c]];
                    }
                }
                vec![Some(da), Some(dg)]
            }),
        )
    }

    /// Add a 1xd bias row to every row.
    pub fn add_row(&self, bias: &Value) -> Value {
        let (n, d) = self.shape();
        let (br, bc) = bias.shape();
        assert!(
            br == 1 && bc == d,
            "add_row: bias must be 1x{d}, got {br}x{bc}"
        );
        let mut data = self.data().clone();
        {
            let b = bias.data();
            for i in 0..n {
                for c in 0..d {
                    data[[i, c]] += b[[0, c]];
                }
            }
        }
        Value::from_op(
            data,
            vec![self.clone(), bias.clone()],
            "add_row",
            Box::new(move |ctx| {
                let mut db = Matrix::zeros((1, d));
                for i in 0..ctx.adj.nrows() {
                    for c in 0..d {
                        db[[0, c]] += ctx.adj[[i, c]];
                    }
                }
                vec![Some(ctx.adj.clone()), Some(db)]
            }),
        )
    }

    /// Column-wise mean over rows, producing 1xd.
    pub fn row_mean(&self) -> Value {
        let (n, d) = self.shape();
        let mut data = Matrix::zeros((1, d));
        {
            let a = self.data();
            for c in 0..d {
                let mut s = 0.0;
                for i in 0..n {
                    s += a[[i, c]];
                }
                data[[0, c]] = s / n as f64;
            }
        }
        Value::from_op(
            data,
            vec![self.clone()],
            "row_mean",
            Box::new(move |ctx| {
                let mut da = Matrix::zeros((n, d));
                for c in 0..d {
                    let g = ctx.adj[[0, c]] / n as f64;
                    for i in 0..n {
                        da[[i, c]] = g;
                    }
                }
                vec![Some(da)]
            }),
        )
    }

    /// Column-wise max over rows, producing 1xd. The gradient flows to
    /// the argmax entry only; ties go to the lowest row index.
    pub fn row_max(&self) -> Value {
        let (n, d) = self.shape();
        let mut data = Matrix::zeros((1, d));
        let mut argmax = vec![0usize; d];
        {
            let a = self.data();
            for c in 0..d {
                let mut best = a[[0, c]];
                let mut best_i = 0usize;
                for i in 1..n {
                    if a[[i, c]] > best {
                        best = a[[i, c]];
                        best_i = i;
                    }
                }
                data[[0, c]] = best;
                argmax[c] = best_i;
            }
        }
        Value::from_op(
            data,
            vec![self.clone()],
            "row_max",
            Box::new(move |ctx| {
                let mut da = Matrix::zeros((n, d));
                for c in 0..d {
                    da[[argmax[c], c]] = ctx.adj[[0, c]];
                }
                vec![Some(da)]
            }),
        )
    }

    /// Sum of all entries as a 1x1 value.
    pub fn sum(&self) -> Value {
        let (n, d) = self.shape();
        let data = Matrix::from_elem((1, 1), self.data().sum());
        Value::from_op(
            data,
            vec![self.clone()],
            "sum",
            Box::new(move |ctx| {
                vec![Some(Matrix::from_elem((n, d), ctx.adj[[0, 0]]))]
            }),
        )
    }

    /// Mean of all entries as a 1x1 value.
    pub fn mean_all(&self) -> Value {
        let (n, d) = self.shape();
        self.sum().scalar_mul(1.0 / (n as f64 * d as f64))
    }

    pub fn trace(&self) -> Value {
        let (n, d) = self.shape();
        assert!(n == d, "trace requires a square matrix, got {n}x{d}");
        let t = (0..n).map(|i| self.data()[[i, i]]).sum();
        Value::from_op(
            Matrix::from_elem((1, 1), t),
            vec![self.clone()],
            "trace",
            Box::new(move |ctx| {
                let mut da = Matrix::zeros((n, n));
                for i in 0..n {
                    da[[i, i]] = ctx.adj[[0, 0]];
                }
                vec![Some(da)]
            }),
        )
    }

    /// Frobenius norm as a 1x1 value. The gradient at the origin is 0.
    pub fn frobenius_norm(&self) -> Value {
        let norm = self.data().iter().map(|v| v * v).sum::<f64>().sqrt();
        Value::from_op(
            Matrix::from_elem((1, 1), norm),
            vec![self.clone()],
            "frobenius_norm",
            Box::new(|ctx| {
                let a = ctx.parents[0].data();
                let norm = ctx.out[[0, 0]];
                let factor = if norm > 0.0 {
                    ctx.adj[[0, 0]] / norm
                } else {
                    0.0
                };
                vec![Some(a.mapv(|v| v * factor))]
            }),
        )
    }

    pub fn relu(&self) -> Value {
        let data = self.data().mapv(|v| v.max(0.0));
        Value::from_op(
            data,
            vec![self.clone()],
            "relu",
            Box::new(|ctx| {
                let x = ctx.parents[0].data();
                let mut da = ctx.adj.clone();
                for (g, &v) in da.iter_mut().zip(x.iter()) {
                    if v <= 0.0 {
                        *g = 0.0;
                    }
                }
                vec![Some(da)]
            }),
        )
    }

    pub fn tanh(&self) -> Value {
        let data = self.data().mapv(f64::tanh);
        Value::from_op(
            data,
            vec![self.clone()],
            "tanh",
            Box::new(|ctx| {
                let mut da = ctx.adj.clone();
                for (g, &y) in da.iter_mut().zip(ctx.out.iter()) {
                    *g *= 1.0 - y * y;
                }
                vec![Some(da)]
            }),
        )
    }

    pub fn sigmoid(&self) -> Value {
        let data = self.data().mapv(|v| 1.0 / (1.0 + (-v).exp()));
        Value::from_op(
            data,
            vec![self.clone()],
            "sigmoid",
            Box::new(|ctx| {
                let mut da = ctx.adj.clone();
                for (g, &y) in da.iter_mut().zip(ctx.out.iter()) {
                    *g *= y * (1.0 - y);
                }
                vec![Some(da)]
            }),
        )
    }

    /// Row-wise softmax, stabilized by per-row max subtraction.
    pub fn softmax_rows(&self) -> Value {
        let (n, d) = self.shape();
        let mut data = Matrix::zeros((n, d));
        {
            let a = self.data();
            for i in 0..n {
                let m = a.row(i).iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                let mut z = 0.0;
                for c in 0..d {
                    let e = (a[[i, c]] - m).exp();
                    data[[i, c]] = e;
                    z += e;
                }
                for c in 0..d {
                    data[[i, c]] /= z;
                }
            }
        }
        Value::from_op(
            data,
            vec![self.clone()],
            "softmax_rows",
            Box::new(move |ctx| {
                let s = ctx.out;
                let mut da = Matrix::zeros((n, d));
                for i in 0..n {
                    let dot: f64 = (0..d).map(|c| ctx.adj[[i, c]] * s[[i, c]]).sum();
                    for c in 0..d {
                        da[[i, c]] = s[[i, c]] * (ctx.adj[[i, c]] - dot);
                    }
                }
                vec![Some(da)]
            }),
        )
    }

    /// Row-major reshape preserving the entry order.
    pub fn reshape(&self, rows: usize, cols: usize) -> Value {
        let (n, d) = self.shape();
        assert!(
            n * d == rows * cols,
            "reshape: cannot view {n}x{d} as {rows}x{cols}"
        );
        let flat: Vec<f64> = self.data().iter().cloned().collect();
        let data = Matrix::from_shape_vec((rows, cols), flat).expect("reshape");
        Value::from_op(
            data,
            vec![self.clone()],
            "reshape",
            Box::new(move |ctx| {
                let flat: Vec<f64> = ctx.adj.iter().cloned().collect();
                vec![Some(Matrix::from_shape_vec((n, d), flat).expect("reshape grad"))]
            }),
        )
    }

    /// Fused softmax cross-entropy of a 1xC logit row against a class
    /// index, computed through log-sum-exp.
    pub fn cross_entropy_logits(&self, label: usize) -> Value {
        let (n, c) = self.shape();
        assert!(n == 1, "cross_entropy_logits expects a 1xC row, got {n}x{c}");
        assert!(label < c, "label {label} outside 0..{c}");
        let x = self.data();
        let m = x.row(0).iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let lse = m + x.row(0).iter().map(|v| (v - m).exp()).sum::<f64>().ln();
        let loss = lse - x[[0, label]];
        drop(x);
        Value::from_op(
            Matrix::from_elem((1, 1), loss),
            vec![self.clone()],
            "cross_entropy_logits",
            Box::new(move |ctx| {
                let x = ctx.parents[0].data();
                let m = x.row(0).iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                let z: f64 = x.row(0).iter().map(|v| (v - m).exp()).sum();
                let g = ctx.adj[[0, 0]];
                let mut da = Matrix::zeros((1, x.ncols()));
                for j in 0..x.ncols() {
                    let p = (x[[0, j]] - m).exp() / z;
                    da[[0, j]] = g * (p - if j == label { 1.0 } else { 0.0 });
                }
                vec![Some(da)]
            }),
        )
    }

    /// Mean binary cross-entropy of probabilities against a fixed 0/1
    /// target, restricted to cells where `mask` is nonzero. Probabilities
    /// are clamped away from {0, 1} for numerical safety.
    pub fn bce_mean(&self, target: &Matrix, mask: &Matrix) -> Value {
        const EPS: f64 = 1e-12;
        let (n, d) = self.shape();
        assert_eq!((target.nrows(), target.ncols()), (n, d), "bce target shape");
        assert_eq!((mask.nrows(), mask.ncols()), (n, d), "bce mask shape");
        let count: f64 = mask.iter().filter(|&&m| m != 0.0).count() as f64;
        assert!(count > 0.0, "bce mask selects no cells");
        let mut total = 0.0;
        {
            let p = self.data();
            for i in 0..n {
                for c in 0..d {
                    if mask[[i, c]] == 0.0 {
                        continue;
                    }
                    let ph = p[[i, c]].clamp(EPS, 1.0 - EPS);
                    let t = target[[i, c]];
                    total -= t * ph.ln() + (1.0 - t) * (1.0 - ph).ln();
                }
            }
        }
        let target = target.clone();
        let mask = mask.clone();
        Value::from_op(
            Matrix::from_elem((1, 1), total / count),
            vec![self.clone()],
            "bce_mean",
            Box::new(move |ctx| {
                let p = ctx.parents[0].data();
                let g = ctx.adj[[0, 0]] / count;
                let mut da = Matrix::zeros((n, d));
                for i in 0..n {
                    for c in 0..d {
                        if mask[[i, c]] == 0.0 {
                            continue;
                        }
                        let ph = p[[i, c]].clamp(EPS, 1.0 - EPS);
                        let t = target[[i, c]];
                        da[[i, c]] = g * (ph - t) / (ph * (1.0 - ph));
                    }
                }
                vec![Some(da)]
            }),
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn eye(n: usize) -> Matrix {
        Matrix::from_shape_fn((n, n), |(i, j)| if i == j { 1.0 } else { 0.0 })
    }

    #[test]
    fn matmul_identity_and_grad() {
        use crate::autodiff::Parameter;
        let x = Parameter::new("x", Matrix::from_shape_fn((3, 2), |(i, j)| (i + 2 * j) as f64));
        let out = Value::constant(eye(3)).matmul(x.value());
        assert_eq!(*out.data(), *x.value().data());
        out.sum().backward();
        assert!(x.grad().iter().all(|&g| (g - 1.0).abs() < 1e-12));
    }

    #[test]
    fn trace_of_atb_matches_dot_and_gradient_is_b() {
        use crate::autodiff::Parameter;
        let a = Parameter::new("a", Matrix::from_shape_vec((2, 2), vec![0.3, -1.2, 2.0, 0.7]).unwrap());
        let b = Matrix::from_shape_vec((2, 2), vec![1.5, 0.4, -0.6, 2.2]).unwrap();
        let bv = Value::constant(b.clone());
        let loss = a.value().transpose().matmul(&bv).trace();
        let dot: f64 = (&*a.data() * &b).sum();
        assert!((loss.item() - dot).abs() < 1e-12);
        loss.backward();
        for (g, w) in a.grad().iter().zip(b.iter()) {
            assert!((g - w).abs() < 1e-12);
        }
    }

    #[test]
    fn frobenius_of_zero_is_zero_with_zero_grad() {
        use crate::autodiff::Parameter;
        let x = Parameter::new("x", Matrix::zeros((2, 3)));
        let loss = x.value().frobenius_norm();
        assert_eq!(loss.item(), 0.0);
        loss.backward();
        assert!(x.grad().iter().all(|&g| g == 0.0));
    }

    #[test]
    fn relu_clips_negatives() {
        let x = Value::constant(Matrix::from_shape_vec((1, 2), vec![-1.0, 2.0]).unwrap());
        let y = x.relu();
        assert_eq!(y.data()[[0, 0]], 0.0);
        assert_eq!(y.data()[[0, 1]], 2.0);
    }

    #[test]
    fn softmax_of_zero_row_is_uniform() {
        let x = Value::constant(Matrix::zeros((1, 4)));
        let s = x.softmax_rows();
        for c in 0..4 {
            assert!((s.data()[[0, c]] - 0.25).abs() < 1e-15);
        }
    }

    #[test]
    fn softmax_rows_sum_to_one_in_unit_interval() {
        let x = Value::constant(Matrix::from_shape_fn((5, 3), |(i, j)| {
            (i as f64 - 2.0) * 3.7 + j as f64
        }));
        let s = x.softmax_rows();
        for i in 0..5 {
            let row: f64 = (0..3).map(|c| s.data()[[i, c]]).sum();
            assert!((row - 1.0).abs() < 1e-9);
            for c in 0..3 {
                let v = s.data()[[i, c]];
                assert!(v > 0.0 && v < 1.0);
            }
        }
    }

    #[test]
    fn tanh_gradient_at_zero_is_one() {
        use crate::autodiff::Parameter;
        let x = Parameter::new("x", Matrix::zeros((1, 1)));
        x.value().tanh().sum().backward();
        assert!((x.grad()[[0, 0]] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn row_max_routes_gradient_to_lowest_tied_index() {
        use crate::autodiff::Parameter;
        let x = Parameter::new(
            "x",
            Matrix::from_shape_vec((3, 1), vec![5.0, 5.0, 1.0]).unwrap(),
        );
        x.value().row_max().sum().backward();
        let g = x.grad();
        assert_eq!(g[[0, 0]], 1.0);
        assert_eq!(g[[1, 0]], 0.0);
        assert_eq!(g[[2, 0]], 0.0);
    }

    #[test]
    fn cross_entropy_hand_values() {
        // uniform logits over two classes
        let logits = Value::constant(Matrix::zeros((1, 2)));
        let loss = logits.cross_entropy_logits(0);
        assert!((loss.item() - std::f64::consts::LN_2).abs() < 1e-12);

        // a 20-logit margin drives the loss to ~0
        let strong = Value::constant(Matrix::from_shape_vec((1, 2), vec![20.0, 0.0]).unwrap());
        assert!(strong.cross_entropy_logits(0).item() < 1e-8);

        // gradient at uniform logits is softmax - onehot
        use crate::autodiff::Parameter;
        let p = Parameter::new("logits", Matrix::zeros((1, 2)));
        p.value().cross_entropy_logits(1).backward();
        let g = p.grad();
        assert!((g[[0, 0]] - 0.5).abs() < 1e-12);
        assert!((g[[0, 1]] + 0.5).abs() < 1e-12);
    }

    #[test]
    fn gather_and_scatter_roundtrip() {
        use crate::autodiff::Parameter;
        let x = Parameter::new("x", Matrix::from_shape_fn((4, 2), |(i, j)| (i * 2 + j) as f64));
        let picked = x.value().gather_rows(&[2, 0]);
        assert_eq!(picked.data()[[0, 0]], 4.0);
        assert_eq!(picked.data()[[1, 0]], 0.0);
        picked.sum().backward();
        let g = x.grad();
        assert_eq!(g.row(0).sum(), 2.0);
        assert_eq!(g.row(1).sum(), 0.0);
        assert_eq!(g.row(2).sum(), 2.0);
    }

    #[test]
    #[should_panic(expected = "shape mismatch")]
    fn add_reports_both_shapes() {
        let a = Value::constant(Matrix::zeros((2, 3)));
        let b = Value::constant(Matrix::zeros((3, 2)));
        let _ = a.add(&b);
    }
}
