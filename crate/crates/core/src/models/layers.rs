use ndarray::{Array2, IxDyn};

use crate::autodiff::{AdError, Array, Graph, ParamStore, Rng, Var, LN_EPS};

use super::{Bound, ModelError};

/// `PE[pos, 2i] = sin(pos / 10000^(2i/d))`, `PE[pos, 2i+1] = cos(·)`.
pub fn positional_encoding_1d(length: usize, d_model: usize) -> Result<Array2<f64>, ModelError> {
    if d_model % 2 != 0 {
        return Err(ModelError::Config(format!("positional encoding needs an even width, got {d_model}")));
    }
    Ok(Array2::from_shape_fn((length, d_model), |(pos, c)| {
        let i = (c / 2) as f64;
        let angle = pos as f64 / 10000f64.powf(2.0 * i / d_model as f64);
        if c % 2 == 0 {
            angle.sin()
        } else {
            angle.cos()
        }
    }))
}

/// Row-major `(h·w) × d` encoding: the first `d/2` channels encode the row, the
/// rest the column.
pub fn positional_encoding_2d(h: usize, w: usize, d_model: usize) -> Result<Array2<f64>, ModelError> {
    if d_model % 4 != 0 {
        return Err(ModelError::Config(format!("2D positional encoding needs width divisible by 4, got {d_model}")));
    }
    let half = d_model / 2;
    let rows = positional_encoding_1d(h, half)?;
    let cols = positional_encoding_1d(w, half)?;
    Ok(Array2::from_shape_fn((h * w, d_model), |(k, c)| {
        let (r, col) = (k / w, k % w);
        if c < half {
            rows[(r, c)]
        } else {
            cols[(col, c - half)]
        }
    }))
}

/// Cell indices of an `h × w` row-major grid reordered patch by patch, each
/// patch listed row-major.
pub fn patch_indices(h: usize, w: usize, p: usize) -> Result<Vec<usize>, ModelError> {
    if p == 0 || h % p != 0 || w % p != 0 {
        return Err(ModelError::Config(format!("patch size {p} does not divide {h}×{w}")));
    }
    let mut out = Vec::with_capacity(h * w);
    for pr in 0..h / p {
        for pc in 0..w / p {
            for i in 0..p {
                for j in 0..p {
                    out.push((pr * p + i) * w + pc * p + j);
                }
            }
        }
    }
    Ok(out)
}

/// Softmax attention weights `softmax(q kᵀ / √d)` for plain matrices.
pub fn attention_weights(q: &Array2<f64>, k: &Array2<f64>) -> Result<Array2<f64>, ModelError> {
    let mut g = Graph::new();
    let qv = g.constant(q.clone().into_dyn());
    let kv = g.constant(k.clone().into_dyn());
    let kt = g.transpose(kv)?;
    let s = g.matmul(qv, kt)?;
    let s = g.scale(s, 1.0 / (q.ncols() as f64).sqrt());
    let a = g.softmax(s)?;
    Ok(g.value(a).clone().into_dimensionality().expect("2-D"))
}

pub(crate) fn constant2(g: &mut Graph, a: Array2<f64>) -> Var {
    g.constant(a.into_dyn())
}

pub(crate) fn init_linear(store: &mut ParamStore, name: &str, fan_in: usize, fan_out: usize, rng: &mut Rng) {
    store.init_linear(&format!("{name}.w"), fan_in, fan_out, rng);
    let bound = 1.0 / (fan_in as f64).sqrt();
    let b: Vec<f64> = (0..fan_out).map(|_| rand::Rng::random_range(rng, -bound..bound)).collect();
    store.insert(&format!("{name}.b"), Array::from_shape_vec(IxDyn(&[fan_out]), b).expect("sized"));
}

pub(crate) fn init_zero_linear(store: &mut ParamStore, name: &str, fan_in: usize, fan_out: usize) {
    store.init_const(&format!("{name}.w"), &[fan_in, fan_out], 0.0);
    store.init_const(&format!("{name}.b"), &[fan_out], 0.0);
}

pub(crate) fn init_layer_norm(store: &mut ParamStore, name: &str, d: usize) {
    store.init_const(&format!("{name}.g"), &[d], 1.0);
    store.init_const(&format!("{name}.b"), &[d], 0.0);
}

pub(crate) fn init_attention(store: &mut ParamStore, name: &str, d: usize, rng: &mut Rng) {
    for proj in ["q", "k", "v", "o"] {
        init_linear(store, &format!("{name}.{proj}"), d, d, rng);
    }
}

pub(crate) fn init_feed_forward(store: &mut ParamStore, name: &str, d: usize, ff: usize, rng: &mut Rng) {
    init_linear(store, &format!("{name}.ff1"), d, ff, rng);
    init_linear(store, &format!("{name}.ff2"), ff, d, rng);
}

pub(crate) fn linear(g: &mut Graph, p: &Bound, name: &str, x: Var) -> Result<Var, AdError> {
    let w = p.get(&format!("{name}.w"))?;
    let b = p.get(&format!("{name}.b"))?;
    let y = g.matmul(x, w)?;
    g.add_row(y, b)
}

pub(crate) fn layer_norm(g: &mut Graph, p: &Bound, name: &str, x: Var) -> Result<Var, AdError> {
    let gamma = p.get(&format!("{name}.g"))?;
    let beta = p.get(&format!("{name}.b"))?;
    g.layer_norm(x, gamma, beta, LN_EPS)
}

/// Multi-head attention with queries from `xq` and keys/values from `xkv`.
pub(crate) fn attention(g: &mut Graph, p: &Bound, name: &str, xq: Var, xkv: Var, n_heads: usize) -> Result<Var, AdError> {
    let d = g.shape(xq)[1];
    if g.shape(xkv)[1] != d {
        return Err(AdError::Shape { op: "attention", left: g.shape(xq).to_vec(), right: g.shape(xkv).to_vec() });
    }
    let dh = d / n_heads;
    let q = linear(g, p, &format!("{name}.q"), xq)?;
    let k = linear(g, p, &format!("{name}.k"), xkv)?;
    let v = linear(g, p, &format!("{name}.v"), xkv)?;
    let mut heads = Vec::with_capacity(n_heads);
    for h in 0..n_heads {
        let qh = g.slice(q, 1, h * dh, (h + 1) * dh)?;
        let kh = g.slice(k, 1, h * dh, (h + 1) * dh)?;
        let vh = g.slice(v, 1, h * dh, (h + 1) * dh)?;
        let kt = g.transpose(kh)?;
        let s = g.matmul(qh, kt)?;
        let s = g.scale(s, 1.0 / (dh as f64).sqrt());
        let a = g.softmax(s)?;
        heads.push(g.matmul(a, vh)?);
    }
    let cat = if heads.len() == 1 { heads[0] } else { g.concat(&heads, 1)? };
    linear(g, p, &format!("{name}.o"), cat)
}

pub(crate) fn feed_forward(g: &mut Graph, p: &Bound, name: &str, x: Var) -> Result<Var, AdError> {
    let h = linear(g, p, &format!("{name}.ff1"), x)?;
    let h = g.gelu(h);
    linear(g, p, &format!("{name}.ff2"), h)
}

/// Post-norm encoder block: attention, add & norm, feed-forward, add & norm.
pub(crate) fn encoder_block(g: &mut Graph, p: &Bound, name: &str, x: Var, n_heads: usize) -> Result<Var, AdError> {
    let a = attention(g, p, &format!("{name}.attn"), x, x, n_heads)?;
    let x = g.add(x, a)?;
    let x = layer_norm(g, p, &format!("{name}.ln1"), x)?;
    let f = feed_forward(g, p, name, x)?;
    let x = g.add(x, f)?;
    layer_norm(g, p, &format!("{name}.ln2"), x)
}

/// `x ⊙ (1 + scale) + shift` with row-vector modulation signals.
fn modulate(g: &mut Graph, x: Var, shift: Var, scale: Var) -> Result<Var, AdError> {
    let s = g.add_scalar(scale, 1.0);
    let y = g.mul_row(x, s)?;
    g.add_row(y, shift)
}

/// adaLN-zero block conditioned on the `[1, d]` vector `cond`:
/// `x + gate_a ⊙ Attn(mod(norm x)) + gate_m ⊙ MLP(mod(norm x))`.
pub(crate) fn adaln_zero_block(
    g: &mut Graph,
    p: &Bound,
    name: &str,
    x: Var,
    cond: Var,
    n_heads: usize,
) -> Result<Var, AdError> {
    let d = g.shape(x)[1];
    let c = g.silu(cond);
    let m = linear(g, p, &format!("{name}.mod"), c)?;
    if g.shape(m) != [1, 6 * d] {
        return Err(AdError::Shape { op: "adaln_zero_block", left: g.shape(m).to_vec(), right: vec![1, 6 * d] });
    }
    let mut sig = Vec::with_capacity(6);
    for i in 0..6 {
        sig.push(g.slice(m, 1, i * d, (i + 1) * d)?);
    }
    let n = g.normalize(x, LN_EPS)?;
    let ha = modulate(g, n, sig[0], sig[1])?;
    let a = attention(g, p, &format!("{name}.attn"), ha, ha, n_heads)?;
    let a = g.mul_row(a, sig[2])?;
    let hm = modulate(g, n, sig[3], sig[4])?;
    let f = feed_forward(g, p, name, hm)?;
    let f = g.mul_row(f, sig[5])?;
    let y = g.add(x, a)?;
    g.add(y, f)
}

/// Output heads: tanh for over-rotations, `depol` for depolarizations.
pub(crate) fn heads(g: &mut Graph, raw: Var, depol: fn(&mut Graph, Var) -> Var) -> Result<Var, AdError> {
    let k = g.shape(raw)[1] / 2;
    let e = g.slice(raw, 1, 0, k)?;
    let e = g.tanh(e);
    let pr = g.slice(raw, 1, k, 2 * k)?;
    let pr = depol(g, pr);
    g.concat(&[e, pr], 1)
}
