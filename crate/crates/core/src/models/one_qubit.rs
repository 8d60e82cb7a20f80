use crate::autodiff::{AdError, Graph, ParamStore, Rng, Var};

use super::layers::{
    attention, constant2, encoder_block, heads, init_attention, init_feed_forward, init_layer_norm, init_linear,
    layer_norm, linear, positional_encoding_1d,
};
use super::{Bound, GroupInput, ModelConfig};

pub(super) fn init(c: &ModelConfig, s: &mut ParamStore, rng: &mut Rng) {
    let d = c.d_model;
    s.init_normal("tok_emb", &[c.vocab_size, d], 0.02, rng);
    init_linear(s, "prob", c.n_outcomes(), c.l_pad * d, rng);
    init_attention(s, "xattn", d, rng);
    init_layer_norm(s, "xattn.ln", d);
    for i in 0..c.n_layers {
        let name = format!("enc{i}");
        init_attention(s, &format!("{name}.attn"), d, rng);
        init_layer_norm(s, &format!("{name}.ln1"), d);
        init_feed_forward(s, &name, d, c.ff_width, rng);
        init_layer_norm(s, &format!("{name}.ln2"), d);
    }
    init_linear(s, "fc", d, d, rng);
    init_linear(s, "head", d, c.n_outputs(), rng);
}

fn abs_tanh(g: &mut Graph, x: Var) -> Var {
    let t = g.tanh(x);
    g.abs(t)
}

pub(super) fn forward(
    c: &ModelConfig,
    g: &mut Graph,
    p: &Bound,
    input: &GroupInput,
) -> Result<(Var, Vec<(Var, Var)>), AdError> {
    let d = c.d_model;
    let t = c.group_size * c.l_pad;
    let pe = positional_encoding_1d(t, d).map_err(|_| AdError::Shape { op: "pe", left: vec![t, d], right: vec![] })?;
    let pe = constant2(g, pe);

    let idx: Vec<usize> = input.tokens.iter().flat_map(|tc| tc.tokens().iter().map(|&v| v as usize)).collect();
    let emb = p.get("tok_emb")?;
    let seq = g.gather_rows(emb, &idx)?;
    let seq = g.add(seq, pe)?;

    let f = g.constant_from(&[c.group_size, c.n_outcomes()], input.flat_freqs());
    let prob = linear(g, p, "prob", f)?;
    let prob = g.reshape(prob, &[t, d])?;
    let prob = g.add(prob, pe)?;

    let a = attention(g, p, "xattn", seq, prob, c.n_heads)?;
    let x = g.add(seq, a)?;
    let mut x = layer_norm(g, p, "xattn.ln", x)?;

    let mut trace = Vec::with_capacity(c.n_layers);
    for i in 0..c.n_layers {
        let y = encoder_block(g, p, &format!("enc{i}"), x, c.n_heads)?;
        trace.push((x, y));
        x = y;
    }
    let pooled = g.mean_rows(x)?;
    let h = linear(g, p, "fc", pooled)?;
    let h = g.gelu(h);
    let raw = linear(g, p, "head", h)?;
    Ok((heads(g, raw, abs_tanh)?, trace))
}
