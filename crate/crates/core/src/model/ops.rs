//! Row-major dense kernels and their adjoints.

pub const LN_EPS: f64 = 1e-5;
const GELU_C: f64 = 0.797_884_560_802_865_4; // sqrt(2 / pi)
const GELU_A: f64 = 0.044_715;

/// `x[n, k] @ w[k, m] + bias[m]`.
pub fn linear(x: &[f64], w: &[f64], bias: &[f64], n: usize, k: usize, m: usize) -> Vec<f64> {
    debug_assert_eq!(x.len(), n * k);
    debug_assert_eq!(w.len(), k * m);
    let mut out = Vec::with_capacity(n * m);
    for row in x.chunks_exact(k) {
        let start = out.len();
        out.extend_from_slice(bias);
        let o = &mut out[start..];
        for (xi, wrow) in row.iter().zip(w.chunks_exact(m)) {
            if *xi == 0.0 {
                continue;
            }
            for (oj, wj) in o.iter_mut().zip(wrow) {
                *oj += xi * wj;
            }
        }
    }
    out
}

/// Adjoint of [`linear`]: accumulates `dw += x^T dy`, `db += sum_rows dy`
/// and returns `dx = dy w^T`.
pub fn linear_backward(
    x: &[f64],
    w: &[f64],
    dy: &[f64],
    dw: &mut [f64],
    db: &mut [f64],
    k: usize,
    m: usize,
) -> Vec<f64> {
    let mut dx = vec![0.0; x.len()];
    for ((xrow, dyrow), dxrow) in x.chunks_exact(k).zip(dy.chunks_exact(m)).zip(dx.chunks_exact_mut(k)) {
        if dyrow.iter().all(|&v| v == 0.0) {
            continue;
        }
        for (b, g) in db.iter_mut().zip(dyrow) {
            *b += g;
        }
        for (i, (xi, wrow)) in xrow.iter().zip(w.chunks_exact(m)).enumerate() {
            let dwrow = &mut dw[i * m..(i + 1) * m];
            let mut acc = 0.0;
            for ((dwj, wj), g) in dwrow.iter_mut().zip(wrow).zip(dyrow) {
                *dwj += xi * g;
                acc += wj * g;
            }
            dxrow[i] = acc;
        }
    }
    dx
}

/// Per-row normalization statistics kept for the backward pass.
#[derive(Debug, Clone, Default)]
pub struct NormCache {
    pub xhat: Vec<f64>,
    pub rstd: Vec<f64>,
}

pub fn layer_norm(x: &[f64], gain: &[f64], bias: &[f64], d: usize) -> (Vec<f64>, NormCache) {
    let mut out = Vec::with_capacity(x.len());
    let mut cache = NormCache { xhat: Vec::with_capacity(x.len()), rstd: Vec::new() };
    for row in x.chunks_exact(d) {
        let mean = row.iter().sum::<f64>() / d as f64;
        let var = row.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / d as f64;
        let rstd = 1.0 / (var + LN_EPS).sqrt();
        cache.rstd.push(rstd);
        for ((v, g), b) in row.iter().zip(gain).zip(bias) {
            let xh = (v - mean) * rstd;
            cache.xhat.push(xh);
            out.push(xh * g + b);
        }
    }
    (out, cache)
}

pub fn layer_norm_backward(
    cache: &NormCache,
    gain: &[f64],
    dy: &[f64],
    dgain: &mut [f64],
    dbias: &mut [f64],
    d: usize,
) -> Vec<f64> {
    let mut dx = vec![0.0; dy.len()];
    for (r, ((xh, g_out), dxrow)) in cache
        .xhat
        .chunks_exact(d)
        .zip(dy.chunks_exact(d))
        .zip(dx.chunks_exact_mut(d))
        .enumerate()
    {
        if g_out.iter().all(|&v| v == 0.0) {
            continue;
        }
        let mut mean_dxh = 0.0;
        let mut mean_dxh_xh = 0.0;
        for j in 0..d {
            dgain[j] += g_out[j] * xh[j];
            dbias[j] += g_out[j];
            let dxh = g_out[j] * gain[j];
            mean_dxh += dxh;
            mean_dxh_xh += dxh * xh[j];
        }
        mean_dxh /= d as f64;
        mean_dxh_xh /= d as f64;
        let rstd = cache.rstd[r];
        for j in 0..d {
            let dxh = g_out[j] * gain[j];
            dxrow[j] = rstd * (dxh - mean_dxh - xh[j] * mean_dxh_xh);
        }
    }
    dx
}

/// Tanh-approximated GELU.
pub fn gelu(x: f64) -> f64 {
    0.5 * x * (1.0 + (GELU_C * (x + GELU_A * x * x * x)).tanh())
}

pub fn gelu_grad(x: f64) -> f64 {
    let t = (GELU_C * (x + GELU_A * x * x * x)).tanh();
    0.5 * (1.0 + t) + 0.5 * x * (1.0 - t * t) * GELU_C * (1.0 + 3.0 * GELU_A * x * x)
}
