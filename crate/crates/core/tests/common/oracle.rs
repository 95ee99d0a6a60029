//! Independent reference computations used as test oracles.

use std::collections::HashSet;

use nalgebra::{DMatrix, DVector};
use reward_forge::model::tokenizer::VIS;
use reward_forge::model::{EncodedInput, Parameters, Tensor};
use reward_forge::training::{batch_loss, PreferencePair};

fn mat(t: &Tensor) -> DMatrix<f64> {
    DMatrix::from_row_slice(t.shape[0], t.shape[1], &t.data)
}

fn row_vec(t: &Tensor) -> DVector<f64> {
    DVector::from_column_slice(&t.data)
}

fn layer_norm_rows(x: &DMatrix<f64>, gain: &Tensor, bias: &Tensor) -> DMatrix<f64> {
    let d = x.ncols();
    let mut out = x.clone();
    for mut row in out.row_iter_mut() {
        let mean = row.sum() / d as f64;
        let var = row.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / d as f64;
        let inv = 1.0 / (var + 1e-5).sqrt();
        for j in 0..d {
            row[j] = (row[j] - mean) * inv * gain.data[j] + bias.data[j];
        }
    }
    out
}

fn add_bias(mut x: DMatrix<f64>, b: &Tensor) -> DMatrix<f64> {
    for mut row in x.row_iter_mut() {
        for j in 0..row.len() {
            row[j] += b.data[j];
        }
    }
    x
}

fn gelu(x: f64) -> f64 {
    let c = (2.0 / std::f64::consts::PI).sqrt();
    0.5 * x * (1.0 + (c * (x + 0.044715 * x.powi(3))).tanh())
}

/// Reward computed row by row with dense matrices.
pub fn oracle_reward(p: &Parameters, input: &EncodedInput) -> f64 {
    let c = &p.config;
    let (t_len, d) = (input.ids.len(), c.d_model);
    let hd = d / c.n_heads;
    let tok = mat(&p.token_embedding);
    let pos = mat(&p.position_embedding);
    let proj = mat(&p.projector_weight);

    let mut x = DMatrix::<f64>::zeros(t_len, d);
    let mut vis_idx = 0;
    for (t, &id) in input.ids.iter().enumerate() {
        let e = if id == VIS {
            let pooled = DMatrix::from_row_slice(1, c.d_img, &input.visual[vis_idx]);
            vis_idx += 1;
            (pooled * &proj).row(0).into_owned() + row_vec(&p.projector_bias).transpose()
        } else {
            tok.row(id as usize).into_owned()
        };
        x.set_row(t, &(e + pos.row(t)));
    }

    for b in &p.blocks {
        let a = layer_norm_rows(&x, &b.ln1_gain, &b.ln1_bias);
        let qkv = add_bias(&a * mat(&b.qkv_weight), &b.qkv_bias);
        let mut heads = DMatrix::<f64>::zeros(t_len, d);
        for h in 0..c.n_heads {
            let q = qkv.columns(h * hd, hd).into_owned();
            let k = qkv.columns(d + h * hd, hd).into_owned();
            let v = qkv.columns(2 * d + h * hd, hd).into_owned();
            let mut s = (&q * k.transpose()) / (hd as f64).sqrt();
            for i in 0..t_len {
                for j in i + 1..t_len {
                    s[(i, j)] = f64::NEG_INFINITY;
                }
                let max = s.row(i).max();
                let exps: Vec<f64> = s.row(i).iter().map(|v| (v - max).exp()).collect();
                let z: f64 = exps.iter().sum();
                for j in 0..t_len {
                    s[(i, j)] = exps[j] / z;
                }
            }
            heads.columns_mut(h * hd, hd).copy_from(&(s * v));
        }
        x += add_bias(heads * mat(&b.out_weight), &b.out_bias);
        let cn = layer_norm_rows(&x, &b.ln2_gain, &b.ln2_bias);
        let hidden = add_bias(cn * mat(&b.ff1_weight), &b.ff1_bias).map(gelu);
        x += add_bias(hidden * mat(&b.ff2_weight), &b.ff2_bias);
    }
    let last = DMatrix::from_row_slice(1, d, x.row(t_len - 1).transpose().as_slice());
    let y = layer_norm_rows(&last, &p.final_gain, &p.final_bias);
    y.row(0).dot(&row_vec(&p.head_weight).transpose()) + p.head_bias.data[0]
}

fn set(p: &mut Parameters, name: &str, idx: usize, value: f64) {
    for (n, t) in p.named_mut() {
        if n == name {
            t.data[idx] = value;
        }
    }
}

/// Central difference of the mean batch loss with respect to one coordinate.
pub fn finite_difference(p: &mut Parameters, batch: &[PreferencePair], name: &str, idx: usize, h: f64) -> f64 {
    let x = p.named().into_iter().find(|(n, _)| n == name).unwrap().1.data[idx];
    set(p, name, idx, x + h);
    let up = batch_loss(p, batch).unwrap();
    set(p, name, idx, x - h);
    let down = batch_loss(p, batch).unwrap();
    set(p, name, idx, x);
    (up - down) / (2.0 * h)
}

/// Exact Jaccard over word-shingle strings, computed independently of the
/// hashing path.
pub fn exact_jaccard(a: &str, b: &str, k: usize) -> f64 {
    let shingles = |t: &str| -> HashSet<String> {
        let lower = t.to_lowercase();
        let words: Vec<&str> = lower.split_whitespace().collect();
        if words.len() <= k {
            return std::iter::once(words.join(" ")).filter(|s| !s.is_empty()).collect();
        }
        words.windows(k).map(|w| w.join(" ")).collect()
    };
    let (x, y) = (shingles(a), shingles(b));
    let union = x.union(&y).count();
    if union == 0 {
        return 0.0;
    }
    x.intersection(&y).count() as f64 / union as f64
}

/// Linear-interpolation percentile, written out longhand.
pub fn oracle_percentile(values: &[f64], p: f64) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let rank = p / 100.0 * (v.len() - 1) as f64;
    let lo = rank.floor() as usize;
    let hi = rank.ceil() as usize;
    v[lo] + (v[hi] - v[lo]) * (rank - lo as f64)
}

