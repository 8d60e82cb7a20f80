use crate::autodiff::{AdError, Graph, ParamStore, Rng, Var};

use super::layers::{
    adaln_zero_block, constant2, heads, init_attention, init_feed_forward, init_linear, init_zero_linear, linear,
    patch_indices, positional_encoding_2d,
};
use super::{Bound, GroupInput, ModelConfig};

pub(super) fn init(c: &ModelConfig, s: &mut ParamStore, rng: &mut Rng) {
    let d = c.d_model;
    let pp = c.patch_size * c.patch_size;
    s.init_normal("cell_emb", &[c.vocab_size, d], 0.02, rng);
    init_linear(s, "patch", pp * d, d, rng);
    init_linear(s, "cond", c.group_size * c.n_outcomes(), d, rng);
    for i in 0..c.n_layers {
        let name = format!("blk{i}");
        init_zero_linear(s, &format!("{name}.mod"), d, 6 * d);
        init_attention(s, &format!("{name}.attn"), d, rng);
        init_feed_forward(s, &name, d, c.ff_width, rng);
    }
    init_linear(s, "fc", d, d, rng);
    init_linear(s, "head", d, c.n_outputs(), rng);
}

fn sigmoid(g: &mut Graph, x: Var) -> Var {
    g.sigmoid(x)
}

pub(super) fn forward(
    c: &ModelConfig,
    g: &mut Graph,
    p: &Bound,
    input: &GroupInput,
) -> Result<(Var, Vec<(Var, Var)>), AdError> {
    let d = c.d_model;
    let ps = c.patch_size;
    let (h, w) = (c.group_size * c.n_qubits, c.l_pad);
    let (hp, wp) = (h / ps, w / ps);
    let shape_err = || AdError::Shape { op: "patch_embed", left: vec![h, w], right: vec![ps] };

    // Grid row 2·k + q holds qubit q of circuit k.
    let cells: Vec<usize> = input.tokens.iter().flat_map(|tc| tc.rows.iter().flatten().map(|&v| v as usize)).collect();
    let order = patch_indices(h, w, ps).map_err(|_| shape_err())?;
    let by_patch: Vec<usize> = order.iter().map(|&k| cells[k]).collect();
    let emb = p.get("cell_emb")?;
    let x = g.gather_rows(emb, &by_patch)?;
    let x = g.reshape(x, &[hp * wp, ps * ps * d])?;
    let x = linear(g, p, "patch", x)?;
    let pe = positional_encoding_2d(hp, wp, d).map_err(|_| shape_err())?;
    let pe = constant2(g, pe);
    let mut x = g.add(x, pe)?;

    let f = g.constant_from(&[1, c.group_size * c.n_outcomes()], input.flat_freqs());
    let cond = linear(g, p, "cond", f)?;

    let mut trace = Vec::with_capacity(c.n_layers);
    for i in 0..c.n_layers {
        let y = adaln_zero_block(g, p, &format!("blk{i}"), x, cond, c.n_heads)?;
        trace.push((x, y));
        x = y;
    }
    let pooled = g.mean_rows(x)?;
    let hdn = linear(g, p, "fc", pooled)?;
    let hdn = g.gelu(hdn);
    let raw = linear(g, p, "head", hdn)?;
    Ok((heads(g, raw, sigmoid)?, trace))
}
