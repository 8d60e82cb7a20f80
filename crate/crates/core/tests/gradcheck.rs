use ndarray::IxDyn;
use proptest::prelude::*;
use qgst::autodiff::{Array, Graph, Var, LN_EPS};

/// Central-difference check of d(loss)/d(x) for a graph built by `f`.
fn check<F>(x0: Array, f: F, tol: f64)
where
    F: Fn(&mut Graph, Var) -> Var,
{
    let mut g = Graph::new();
    let x = g.input(x0.clone());
    let l = f(&mut g, x);
    let analytic = g.backward(l).unwrap().get_or_zeros(&g, x);
    let eval = |xv: Array| {
        let mut g = Graph::new();
        let x = g.constant(xv);
        let l = f(&mut g, x);
        g.scalar(l)
    };
    let h = 1e-6;
    for i in 0..x0.len() {
        let mut xp = x0.clone();
        let mut xm = x0.clone();
        xp.as_slice_mut().unwrap()[i] += h;
        xm.as_slice_mut().unwrap()[i] -= h;
        let numeric = (eval(xp) - eval(xm)) / (2.0 * h);
        let a = analytic.as_slice().unwrap()[i];
        let err = (a - numeric).abs() / numeric.abs().max(a.abs()).max(1e-3);
        assert!(err < tol, "component {i}: analytic {a}, numeric {numeric}");
    }
}

fn arr(shape: &[usize], seed: u64) -> Array {
    let n: usize = shape.iter().product();
    let data = (0..n).map(|i| ((i as f64 + 1.0) * 0.7 + seed as f64 * 1.3).sin()).collect();
    Array::from_shape_vec(IxDyn(shape), data).unwrap()
}

#[test]
fn matmul_gradients() {
    let b = arr(&[3, 2], 5);
    check(
        arr(&[4, 3], 1),
        |g, x| {
            let c = g.constant(b.clone());
            let y = g.matmul(x, c).unwrap();
            let y2 = g.mul(y, y).unwrap();
            g.sum(y2)
        },
        1e-6,
    );
    let a = arr(&[4, 3], 2);
    check(
        arr(&[3, 2], 3),
        |g, x| {
            let c = g.constant(a.clone());
            let y = g.matmul(c, x).unwrap();
            let t = g.tanh(y);
            g.sum(t)
        },
        1e-6,
    );
}

#[test]
fn attention_block_gradients() {
    let w = arr(&[4, 4], 9);
    check(
        arr(&[3, 4], 4),
        |g, x| {
            let wv = g.constant(w.clone());
            let q = g.matmul(x, wv).unwrap();
            let kt = g.transpose(x).unwrap();
            let s = g.matmul(q, kt).unwrap();
            let s = g.scale(s, 0.5);
            let a = g.softmax(s).unwrap();
            let o = g.matmul(a, x).unwrap();
            let n = g.normalize(o, LN_EPS).unwrap();
            let h = g.gelu(n);
            let m = g.mean_rows(h).unwrap();
            let m = g.silu(m);
            let m2 = g.mul(m, m).unwrap();
            g.sum(m2)
        },
        1e-5,
    );
}

#[test]
fn structural_op_gradients() {
    check(
        arr(&[4, 6], 7),
        |g, x| {
            let r = g.reshape(x, &[8, 3]).unwrap();
            let a = g.slice(r, 0, 2, 6).unwrap();
            let b = g.slice(r, 1, 0, 2).unwrap();
            let b = g.reshape(b, &[4, 4]).unwrap();
            let b = g.slice(b, 1, 0, 3).unwrap();
            let c = g.concat(&[a, b], 0).unwrap();
            let gathered = g.gather_rows(c, &[0, 3, 3, 7]).unwrap();
            let row = g.slice(x, 0, 0, 1).unwrap();
            let row = g.slice(row, 1, 0, 3).unwrap();
            let y = g.mul_row(gathered, row).unwrap();
            let y = g.add_row(y, row).unwrap();
            let s = g.sigmoid(y);
            let s2 = g.mul(s, y).unwrap();
            g.mean(s2)
        },
        1e-6,
    );
}

#[test]
fn elementwise_gradients() {
    check(
        arr(&[5], 11).mapv(|v| v + 2.0),
        |g, x| {
            let l = g.log(x);
            let a = g.abs(l);
            let d = g.div(a, x).unwrap();
            let c = g.clamp(d, -0.3, 0.3);
            let s = g.add_scalar(c, 1.0);
            let t = g.sub(s, x).unwrap();
            let t2 = g.mul(t, t).unwrap();
            g.sum(t2)
        },
        1e-6,
    );
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn backward_is_linear_in_the_loss(c in -3.0f64..3.0, seed in 0u64..100) {
        let x0 = arr(&[2, 3], seed);
        let grad = |scale: f64| {
            let mut g = Graph::new();
            let x = g.input(x0.clone());
            let t = g.tanh(x);
            let n = g.normalize(t, LN_EPS).unwrap();
            let s = g.sum(n);
            let s2 = g.mul(s, s).unwrap();
            let s3 = g.add(s2, s).unwrap();
            let l = g.scale(s3, scale);
            g.backward(l).unwrap().get_or_zeros(&g, x)
        };
        let base = grad(1.0);
        let scaled = grad(c);
        for (a, b) in base.iter().zip(scaled.iter()) {
            prop_assert!((a * c - b).abs() < 1e-9 * (1.0 + a.abs()));
        }
    }

    #[test]
    fn softmax_rows_are_distributions(v in proptest::collection::vec(-50.0f64..50.0, 12)) {
        let mut g = Graph::new();
        let x = g.constant_from(&[3, 4], v);
        let y = g.softmax(x).unwrap();
        for r in 0..3 {
            let row: f64 = (0..4).map(|c| g.value(y)[[r, c]]).sum();
            prop_assert!((row - 1.0).abs() < 1e-12);
        }
    }
}
