//! Additive self-attention over the encoder's hidden vectors.
//!
//! For positions `i` (query) and `j` (key):
//!
//! ```text
//! e_ij = v . tanh(W_q h_i + W_k h_j)
//! a_i  = softmax over j of e_i
//! c_i  = sum_j a_ij h_j
//! out_i = W_m [h_i ; c_i]
//! ```
//!
//! The weights `a_ij` are kept in the cache so callers can inspect which
//! tokens each position attended to.

use crate::error::{Error, Result};
use crate::numeric::{dot, init_weight, softmax, Matrix, ParamTensor, SeededRng, TensorSet};

#[derive(Clone, Debug)]
pub struct AttentionParams {
    pub w_query: ParamTensor,
    pub w_key: ParamTensor,
    pub v: ParamTensor,
    pub w_mix: ParamTensor,
}

impl AttentionParams {
    /// Parameters for hidden vectors of width `2 * hidden` (one BiLSTM
    /// output). The scoring space has `hidden` dimensions; the mix matrix
    /// maps the concatenated `[h ; c]` back to the input width.
    pub fn new(hidden: usize, rng: &mut SeededRng) -> Self {
        let width = 2 * hidden;
        AttentionParams {
            w_query: ParamTensor::new("attn.w_query", init_weight(hidden, width, rng)),
            w_key: ParamTensor::new("attn.w_key", init_weight(hidden, width, rng)),
            v: ParamTensor::new("attn.v", init_weight(hidden, 1, rng)),
            w_mix: ParamTensor::new("attn.w_mix", init_weight(width, 2 * width, rng)),
        }
    }

    /// Width of the hidden vectors this layer consumes and produces.
    pub fn width(&self) -> usize {
        self.w_query.value.cols()
    }

    fn score_dim(&self) -> usize {
        self.w_query.value.rows()
    }
}

impl TensorSet for AttentionParams {
    fn tensors(&self) -> Vec<&ParamTensor> {
        vec![&self.w_query, &self.w_key, &self.v, &self.w_mix]
    }

    fn tensors_mut(&mut self) -> Vec<&mut ParamTensor> {
        vec![&mut self.w_query, &mut self.w_key, &mut self.v, &mut self.w_mix]
    }
}

/// Intermediates recorded by [`attention`].
pub struct AttnCache {
    /// `u[i]` row `j` holds `tanh(q_i + k_j)`.
    u: Vec<Matrix>,
    /// Attention weights; row `i` is the softmax over keys for query `i`.
    pub weights: Matrix,
    ctx: Matrix,
}

/// Augment each hidden vector with its attention context.
#[allow(clippy::needless_range_loop)]
pub fn attention(p: &AttentionParams, hs: &Matrix) -> Result<(Matrix, AttnCache)> {
    let n = hs.rows();
    if n == 0 {
        return Err(Error::EmptyInput("attention input sequence"));
    }
    let width = p.width();
    if hs.cols() != width {
        return Err(Error::dimension(
            "attention",
            format!("hidden vectors are {}-wide, expected {width}", hs.cols()),
        ));
    }
    let dim = p.score_dim();

    let mut q = Matrix::zeros(n, dim);
    let mut k = Matrix::zeros(n, dim);
    for t in 0..n {
        q.row_mut(t).copy_from_slice(&p.w_query.value.matvec(hs.row(t))?);
        k.row_mut(t).copy_from_slice(&p.w_key.value.matvec(hs.row(t))?);
    }

    let v = p.v.value.data();
    let mut u = Vec::with_capacity(n);
    let mut weights = Matrix::zeros(n, n);
    let mut ctx = Matrix::zeros(n, width);
    for i in 0..n {
        let mut u_i = Matrix::zeros(n, dim);
        let mut scores = vec![0.0; n];
        for j in 0..n {
            let row = u_i.row_mut(j);
            for d in 0..dim {
                row[d] = (q.get(i, d) + k.get(j, d)).tanh();
            }
            scores[j] = dot(v, row);
        }
        let a_i = softmax(&scores);
        weights.row_mut(i).copy_from_slice(&a_i);
        let ctx_row = ctx.row_mut(i);
        for j in 0..n {
            for (cv, &hv) in ctx_row.iter_mut().zip(hs.row(j)) {
                *cv += a_i[j] * hv;
            }
        }
        u.push(u_i);
    }

    let mut out = Matrix::zeros(n, width);
    let mut z = vec![0.0; 2 * width];
    for i in 0..n {
        z[..width].copy_from_slice(hs.row(i));
        z[width..].copy_from_slice(ctx.row(i));
        out.row_mut(i).copy_from_slice(&p.w_mix.value.matvec(&z)?);
    }

    Ok((
        out,
        AttnCache {
            u,
            weights,
            ctx,
        },
    ))
}

/// Backpropagate through the attention layer. Parameter gradients accumulate
/// into `p`; returns the gradient with respect to `hs`.
pub fn attention_backward(
    p: &mut AttentionParams,
    cache: &AttnCache,
    hs: &Matrix,
    d_out: &Matrix,
) -> Result<Matrix> {
    let n = hs.rows();
    let width = p.width();
    let dim = p.score_dim();
    if d_out.rows() != n || d_out.cols() != width {
        return Err(Error::dimension(
            "attention_backward",
            format!(
                "upstream gradient is {}x{}, expected {n}x{width}",
                d_out.rows(),
                d_out.cols()
            ),
        ));
    }

    let v = p.v.value.data().to_vec();
    let mut d_hs = Matrix::zeros(n, width);
    let mut d_q = Matrix::zeros(n, dim);
    let mut d_k = Matrix::zeros(n, dim);
    let mut z = vec![0.0; 2 * width];

    for i in 0..n {
        z[..width].copy_from_slice(hs.row(i));
        z[width..].copy_from_slice(cache.ctx.row(i));
        p.w_mix.grad.add_outer(d_out.row(i), &z);
        let dz = p.w_mix.value.matvec_t(d_out.row(i))?;

        for (d, &g) in d_hs.row_mut(i).iter_mut().zip(&dz[..width]) {
            *d += g;
        }
        let dc = &dz[width..];

        // Through the context sum and the softmax.
        let a_i = cache.weights.row(i);
        let mut da = vec![0.0; n];
        for j in 0..n {
            da[j] = dot(dc, hs.row(j));
            for (d, &hv) in d_hs.row_mut(j).iter_mut().zip(dc) {
                *d += a_i[j] * hv;
            }
        }
        let dotted: f64 = (0..n).map(|j| da[j] * a_i[j]).sum();
        for j in 0..n {
            let de = a_i[j] * (da[j] - dotted);
            // e_ij = v . u_ij with u_ij = tanh(q_i + k_j).
            let u_row = cache.u[i].row(j);
            for d in 0..dim {
                p.v.grad.data_mut()[d] += de * u_row[d];
                let dpre = de * v[d] * (1.0 - u_row[d] * u_row[d]);
                d_q.set(i, d, d_q.get(i, d) + dpre);
                d_k.set(j, d, d_k.get(j, d) + dpre);
            }
        }
    }

    for t in 0..n {
        p.w_query.grad.add_outer(d_q.row(t), hs.row(t));
        p.w_key.grad.add_outer(d_k.row(t), hs.row(t));
        let via_q = p.w_query.value.matvec_t(d_q.row(t))?;
        let via_k = p.w_key.value.matvec_t(d_k.row(t))?;
        let row = d_hs.row_mut(t);
        for d in 0..width {
            row[d] += via_q[d] + via_k[d];
        }
    }
    Ok(d_hs)
}
