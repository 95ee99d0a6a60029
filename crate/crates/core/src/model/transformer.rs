//! Pre-norm causal transformer with a scalar head on the EOS position, and
//! its hand-written reverse pass.

use super::ops::{gelu, gelu_grad, layer_norm, layer_norm_backward, linear, linear_backward, NormCache};
use super::params::{Block, Parameters};
use super::{EncodedInput, ModelError};

struct BlockCache {
    ln1: NormCache,
    /// LN1 output, `[T, d]`.
    a: Vec<f64>,
    /// `[T, 3d]`.
    qkv: Vec<f64>,
    /// Attention probabilities, `[H, T, T]` (upper triangle zero).
    probs: Vec<f64>,
    /// Concatenated head outputs, `[T, d]`.
    attn: Vec<f64>,
    ln2: NormCache,
    c: Vec<f64>,
    /// Feed-forward pre-activation, `[T, d_ff]`.
    h_pre: Vec<f64>,
    h_act: Vec<f64>,
}

pub(crate) struct ForwardCache {
    blocks: Vec<BlockCache>,
    final_norm: NormCache,
    /// Normalized EOS hidden state fed to the head.
    features: Vec<f64>,
}

/// Layer 0 is the embedding, block `l` is layer `l + 1`, and the head is
/// layer `n_layers + 1`.
fn check_finite(values: &[f64], layer: usize, site: &'static str) -> Result<(), ModelError> {
    if values.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(ModelError::NonFinite { layer, site })
    }
}

fn embed(params: &Parameters, input: &EncodedInput) -> Vec<f64> {
    let c = &params.config;
    let d = c.d_model;
    let vis = input.visual_positions();
    let mut x = Vec::with_capacity(input.len() * d);
    for (t, &id) in input.ids.iter().enumerate() {
        let pos = &params.position_embedding.data[t * d..(t + 1) * d];
        if vis.contains(&t) {
            let pooled = &input.visual[t - vis.start];
            let proj = linear(pooled, &params.projector_weight.data, &params.projector_bias.data, 1, c.d_img, d);
            x.extend(proj.iter().zip(pos).map(|(a, b)| a + b));
        } else {
            let row = &params.token_embedding.data[id as usize * d..(id as usize + 1) * d];
            x.extend(row.iter().zip(pos).map(|(a, b)| a + b));
        }
    }
    x
}

fn block_forward(block: &Block, x: &mut [f64], t_len: usize, n_heads: usize, d_ff: usize) -> BlockCache {
    let d = block.ln1_gain.len();
    let hd = d / n_heads;
    let scale = 1.0 / (hd as f64).sqrt();

    let (a, ln1) = layer_norm(x, &block.ln1_gain.data, &block.ln1_bias.data, d);
    let qkv = linear(&a, &block.qkv_weight.data, &block.qkv_bias.data, t_len, d, 3 * d);
    let mut probs = vec![0.0; n_heads * t_len * t_len];
    let mut attn = vec![0.0; t_len * d];
    for h in 0..n_heads {
        let (qo, ko, vo) = (h * hd, d + h * hd, 2 * d + h * hd);
        for t in 0..t_len {
            let q = &qkv[t * 3 * d + qo..t * 3 * d + qo + hd];
            let p = &mut probs[(h * t_len + t) * t_len..(h * t_len + t + 1) * t_len];
            let mut max = f64::NEG_INFINITY;
            for s in 0..=t {
                let k = &qkv[s * 3 * d + ko..s * 3 * d + ko + hd];
                let score = q.iter().zip(k).map(|(a, b)| a * b).sum::<f64>() * scale;
                p[s] = score;
                max = max.max(score);
            }
            let mut total = 0.0;
            for v in p[..=t].iter_mut() {
                *v = (*v - max).exp();
                total += *v;
            }
            let out = &mut attn[t * d + h * hd..t * d + (h + 1) * hd];
            for s in 0..=t {
                p[s] /= total;
                let v = &qkv[s * 3 * d + vo..s * 3 * d + vo + hd];
                for (o, vv) in out.iter_mut().zip(v) {
                    *o += p[s] * vv;
                }
            }
        }
    }
    let o = linear(&attn, &block.out_weight.data, &block.out_bias.data, t_len, d, d);
    x.iter_mut().zip(&o).for_each(|(xi, oi)| *xi += oi);

    let (c, ln2) = layer_norm(x, &block.ln2_gain.data, &block.ln2_bias.data, d);
    let h_pre = linear(&c, &block.ff1_weight.data, &block.ff1_bias.data, t_len, d, d_ff);
    let h_act: Vec<f64> = h_pre.iter().map(|&v| gelu(v)).collect();
    let f = linear(&h_act, &block.ff2_weight.data, &block.ff2_bias.data, t_len, d_ff, d);
    x.iter_mut().zip(&f).for_each(|(xi, fi)| *xi += fi);

    BlockCache { ln1, a, qkv, probs, attn, ln2, c, h_pre, h_act }
}

/// Runs the network and keeps every intermediate needed by [`backward`].
pub(crate) fn forward_cached(
    params: &Parameters,
    input: &EncodedInput,
) -> Result<(f64, ForwardCache), ModelError> {
    let c = &params.config;
    let d = c.d_model;
    let t_len = input.len();
    if t_len == 0 || t_len > c.max_seq_len {
        return Err(ModelError::TooLong { len: t_len, max: c.max_seq_len });
    }
    let mut x = embed(params, input);
    check_finite(&x, 0, "embedding")?;
    let mut caches = Vec::with_capacity(params.blocks.len());
    for (l, block) in params.blocks.iter().enumerate() {
        caches.push(block_forward(block, &mut x, t_len, c.n_heads, c.d_ff));
        check_finite(&x, l + 1, "block output")?;
    }
    let eos = &x[(t_len - 1) * d..];
    let (features, final_norm) = layer_norm(eos, &params.final_gain.data, &params.final_bias.data, d);
    let reward = params.head_bias.data[0]
        + features
            .iter()
            .zip(&params.head_weight.data)
            .map(|(a, b)| a * b)
            .sum::<f64>();
    if !reward.is_finite() {
        return Err(ModelError::NonFinite { layer: c.n_layers + 1, site: "reward head" });
    }
    Ok((reward, ForwardCache { blocks: caches, final_norm, features }))
}

/// Scalar reward: the head applied to the final-layer hidden state at EOS.
pub fn forward(params: &Parameters, input: &EncodedInput) -> Result<f64, ModelError> {
    forward_cached(params, input).map(|(r, _)| r)
}

fn block_backward(
    block: &Block,
    grad: &mut Block,
    cache: &BlockCache,
    dx: &mut [f64],
    t_len: usize,
    n_heads: usize,
    d_ff: usize,
) {
    let d = block.ln1_gain.len();
    let hd = d / n_heads;
    let scale = 1.0 / (hd as f64).sqrt();

    // Feed-forward residual branch.
    let dh_act = linear_backward(&cache.h_act, &block.ff2_weight.data, dx, &mut grad.ff2_weight.data, &mut grad.ff2_bias.data, d_ff, d);
    let dh_pre: Vec<f64> = dh_act.iter().zip(&cache.h_pre).map(|(g, &h)| g * gelu_grad(h)).collect();
    let dc = linear_backward(&cache.c, &block.ff1_weight.data, &dh_pre, &mut grad.ff1_weight.data, &mut grad.ff1_bias.data, d, d_ff);
    let dx_ln2 = layer_norm_backward(&cache.ln2, &block.ln2_gain.data, &dc, &mut grad.ln2_gain.data, &mut grad.ln2_bias.data, d);
    dx.iter_mut().zip(&dx_ln2).for_each(|(a, b)| *a += b);

    // Attention residual branch.
    let dattn = linear_backward(&cache.attn, &block.out_weight.data, dx, &mut grad.out_weight.data, &mut grad.out_bias.data, d, d);
    let mut dqkv = vec![0.0; t_len * 3 * d];
    for h in 0..n_heads {
        let (qo, ko, vo) = (h * hd, d + h * hd, 2 * d + h * hd);
        for t in 0..t_len {
            let dout = &dattn[t * d + h * hd..t * d + (h + 1) * hd];
            if dout.iter().all(|&v| v == 0.0) {
                continue;
            }
            let p = &cache.probs[(h * t_len + t) * t_len..(h * t_len + t + 1) * t_len];
            let mut dp = vec![0.0; t + 1];
            for s in 0..=t {
                let v = &cache.qkv[s * 3 * d + vo..s * 3 * d + vo + hd];
                dp[s] = dout.iter().zip(v).map(|(a, b)| a * b).sum();
                let dv = &mut dqkv[s * 3 * d + vo..s * 3 * d + vo + hd];
                dv.iter_mut().zip(dout).for_each(|(a, g)| *a += p[s] * g);
            }
            let weighted: f64 = (0..=t).map(|s| p[s] * dp[s]).sum();
            for s in 0..=t {
                let ds = p[s] * (dp[s] - weighted) * scale;
                if ds == 0.0 {
                    continue;
                }
                for j in 0..hd {
                    let q = cache.qkv[t * 3 * d + qo + j];
                    let k = cache.qkv[s * 3 * d + ko + j];
                    dqkv[t * 3 * d + qo + j] += ds * k;
                    dqkv[s * 3 * d + ko + j] += ds * q;
                }
            }
        }
    }
    let da = linear_backward(&cache.a, &block.qkv_weight.data, &dqkv, &mut grad.qkv_weight.data, &mut grad.qkv_bias.data, d, 3 * d);
    let dx_ln1 = layer_norm_backward(&cache.ln1, &block.ln1_gain.data, &da, &mut grad.ln1_gain.data, &mut grad.ln1_bias.data, d);
    dx.iter_mut().zip(&dx_ln1).for_each(|(a, b)| *a += b);
}

/// Accumulates `d_reward * d(reward)/d(theta)` into `grad`.
pub(crate) fn backward(
    params: &Parameters,
    input: &EncodedInput,
    cache: &ForwardCache,
    d_reward: f64,
    grad: &mut Parameters,
) {
    let c = &params.config;
    let d = c.d_model;
    let t_len = input.len();

    grad.head_bias.data[0] += d_reward;
    let mut dfeat = vec![0.0; d];
    for j in 0..d {
        grad.head_weight.data[j] += d_reward * cache.features[j];
        dfeat[j] = d_reward * params.head_weight.data[j];
    }
    let deos = layer_norm_backward(&cache.final_norm, &params.final_gain.data, &dfeat, &mut grad.final_gain.data, &mut grad.final_bias.data, d);
    let mut dx = vec![0.0; t_len * d];
    dx[(t_len - 1) * d..].copy_from_slice(&deos);

    for (l, block) in params.blocks.iter().enumerate().rev() {
        block_backward(block, &mut grad.blocks[l], &cache.blocks[l], &mut dx, t_len, c.n_heads, c.d_ff);
    }

    let vis = input.visual_positions();
    for (t, &id) in input.ids.iter().enumerate() {
        let g = &dx[t * d..(t + 1) * d];
        grad.position_embedding.data[t * d..(t + 1) * d]
            .iter_mut()
            .zip(g)
            .for_each(|(a, b)| *a += b);
        if vis.contains(&t) {
            let pooled = &input.visual[t - vis.start];
            linear_backward(pooled, &params.projector_weight.data, g, &mut grad.projector_weight.data, &mut grad.projector_bias.data, c.d_img, d);
        } else {
            grad.token_embedding.data[id as usize * d..(id as usize + 1) * d]
                .iter_mut()
                .zip(g)
                .for_each(|(a, b)| *a += b);
        }
    }
}

/// Hidden states after the last block, `[T, d]`. Exposed for tests of
/// causality.
pub fn final_hidden_states(params: &Parameters, input: &EncodedInput) -> Vec<f64> {
    let c = &params.config;
    let mut x = embed(params, input);
    for block in &params.blocks {
        block_forward(block, &mut x, input.len(), c.n_heads, c.d_ff);
    }
    x
}
