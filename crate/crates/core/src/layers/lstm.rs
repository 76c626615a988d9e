//! Peephole LSTM and its bidirectional wrapper.
//!
//! One step computes, in order:
//!
//! ```text
//! i_t = sigmoid(W_xi x_t + W_hi h_{t-1} + w_ci (*) c_{t-1} + b_i)
//! f_t = sigmoid(W_xf x_t + W_hf h_{t-1} + w_cf (*) c_{t-1} + b_f)
//! c_t = f_t (*) c_{t-1} + i_t (*) tanh(W_xc x_t + W_hc h_{t-1} + b_c)
//! o_t = sigmoid(W_xo x_t + W_ho h_{t-1} + w_co (*) c_{t-1} + b_o)
//! h_t = o_t (*) tanh(c_t)
//! ```
//!
//! where `(*)` is element-wise and the peepholes `w_ci`, `w_cf`, `w_co` are
//! element-wise (diagonal) weights. The output gate peeks at `c_{t-1}`, not
//! `c_t`. The reverse pass is hand-derived and checked against finite
//! differences in the tests below.

use crate::error::{Error, Result};
use crate::numeric::{init_weight, Matrix, ParamTensor, SeededRng, TensorSet};

#[derive(Clone, Debug)]
pub struct LstmParams {
    pub w_xi: ParamTensor,
    pub w_hi: ParamTensor,
    pub w_ci: ParamTensor,
    pub b_i: ParamTensor,
    pub w_xf: ParamTensor,
    pub w_hf: ParamTensor,
    pub w_cf: ParamTensor,
    pub b_f: ParamTensor,
    pub w_xc: ParamTensor,
    pub w_hc: ParamTensor,
    pub b_c: ParamTensor,
    pub w_xo: ParamTensor,
    pub w_ho: ParamTensor,
    pub w_co: ParamTensor,
    pub b_o: ParamTensor,
}

impl LstmParams {
    /// Fresh parameters for one direction. `prefix` namespaces the tensor
    /// names (for example `lstm.fwd`). Weights are scaled-uniform, biases
    /// zero except the forget-gate bias, which starts at 1.0 so early cell
    /// states are not washed out.
    pub fn new(prefix: &str, input_dim: usize, hidden: usize, rng: &mut SeededRng) -> Self {
        let name = |suffix: &str| format!("{prefix}.{suffix}");
        LstmParams {
            w_xi: ParamTensor::new(name("w_xi"), init_weight(hidden, input_dim, rng)),
            w_hi: ParamTensor::new(name("w_hi"), init_weight(hidden, hidden, rng)),
            w_ci: ParamTensor::new(name("w_ci"), init_weight(hidden, 1, rng)),
            b_i: ParamTensor::new(name("b_i"), Matrix::zeros(hidden, 1)),
            w_xf: ParamTensor::new(name("w_xf"), init_weight(hidden, input_dim, rng)),
            w_hf: ParamTensor::new(name("w_hf"), init_weight(hidden, hidden, rng)),
            w_cf: ParamTensor::new(name("w_cf"), init_weight(hidden, 1, rng)),
            b_f: ParamTensor::new(name("b_f"), Matrix::from_fn(hidden, 1, |_, _| 1.0)),
            w_xc: ParamTensor::new(name("w_xc"), init_weight(hidden, input_dim, rng)),
            w_hc: ParamTensor::new(name("w_hc"), init_weight(hidden, hidden, rng)),
            b_c: ParamTensor::new(name("b_c"), Matrix::zeros(hidden, 1)),
            w_xo: ParamTensor::new(name("w_xo"), init_weight(hidden, input_dim, rng)),
            w_ho: ParamTensor::new(name("w_ho"), init_weight(hidden, hidden, rng)),
            w_co: ParamTensor::new(name("w_co"), init_weight(hidden, 1, rng)),
            b_o: ParamTensor::new(name("b_o"), Matrix::zeros(hidden, 1)),
        }
    }

    pub fn hidden(&self) -> usize {
        self.w_hi.value.rows()
    }

    pub fn input_dim(&self) -> usize {
        self.w_xi.value.cols()
    }
}

impl TensorSet for LstmParams {
    fn tensors(&self) -> Vec<&ParamTensor> {
        vec![
            &self.w_xi, &self.w_hi, &self.w_ci, &self.b_i, &self.w_xf, &self.w_hf, &self.w_cf,
            &self.b_f, &self.w_xc, &self.w_hc, &self.b_c, &self.w_xo, &self.w_ho, &self.w_co,
            &self.b_o,
        ]
    }

    fn tensors_mut(&mut self) -> Vec<&mut ParamTensor> {
        vec![
            &mut self.w_xi, &mut self.w_hi, &mut self.w_ci, &mut self.b_i, &mut self.w_xf,
            &mut self.w_hf, &mut self.w_cf, &mut self.b_f, &mut self.w_xc, &mut self.w_hc,
            &mut self.b_c, &mut self.w_xo, &mut self.w_ho, &mut self.w_co, &mut self.b_o,
        ]
    }
}

/// Hidden and cell state carried between steps.
#[derive(Clone, Debug)]
pub struct LstmState {
    pub h: Vec<f64>,
    pub c: Vec<f64>,
}

impl LstmState {
    pub fn zeros(hidden: usize) -> Self {
        LstmState {
            h: vec![0.0; hidden],
            c: vec![0.0; hidden],
        }
    }
}

struct StepCache {
    i: Vec<f64>,
    f: Vec<f64>,
    g: Vec<f64>,
    o: Vec<f64>,
    c: Vec<f64>,
    tanh_c: Vec<f64>,
    h: Vec<f64>,
}

/// Pre-activation of one gate: `w_x x + w_h h_prev (+ peep (*) c_prev) + b`.
fn gate_pre(
    w_x: &Matrix,
    w_h: &Matrix,
    peep: Option<&Matrix>,
    b: &Matrix,
    x: &[f64],
    h_prev: &[f64],
    c_prev: &[f64],
) -> Result<Vec<f64>> {
    let mut pre = w_x.matvec(x)?;
    let rec = w_h.matvec(h_prev)?;
    for (k, p) in pre.iter_mut().enumerate() {
        *p += rec[k] + b.data()[k];
        if let Some(w) = peep {
            *p += w.data()[k] * c_prev[k];
        }
    }
    Ok(pre)
}

fn step(p: &LstmParams, x: &[f64], h_prev: &[f64], c_prev: &[f64]) -> Result<StepCache> {
    if x.len() != p.input_dim() {
        return Err(Error::dimension(
            "lstm_step",
            format!("input has {} entries, expected {}", x.len(), p.input_dim()),
        ));
    }
    let hidden = p.hidden();
    if h_prev.len() != hidden || c_prev.len() != hidden {
        return Err(Error::dimension(
            "lstm_step",
            format!(
                "state has {}/{} entries, expected {hidden}",
                h_prev.len(),
                c_prev.len()
            ),
        ));
    }

    let i = crate::numeric::sigmoid(&gate_pre(
        &p.w_xi.value, &p.w_hi.value, Some(&p.w_ci.value), &p.b_i.value, x, h_prev, c_prev,
    )?);
    let f = crate::numeric::sigmoid(&gate_pre(
        &p.w_xf.value, &p.w_hf.value, Some(&p.w_cf.value), &p.b_f.value, x, h_prev, c_prev,
    )?);
    let g = crate::numeric::tanh(&gate_pre(
        &p.w_xc.value, &p.w_hc.value, None, &p.b_c.value, x, h_prev, c_prev,
    )?);
    let c: Vec<f64> = (0..hidden)
        .map(|k| f[k] * c_prev[k] + i[k] * g[k])
        .collect();
    let o = crate::numeric::sigmoid(&gate_pre(
        &p.w_xo.value, &p.w_ho.value, Some(&p.w_co.value), &p.b_o.value, x, h_prev, c_prev,
    )?);
    let tanh_c: Vec<f64> = c.iter().map(|&v| v.tanh()).collect();
    let h: Vec<f64> = (0..hidden).map(|k| o[k] * tanh_c[k]).collect();
    Ok(StepCache {
        i,
        f,
        g,
        o,
        c,
        tanh_c,
        h,
    })
}

/// One LSTM cell update.
pub fn lstm_step(p: &LstmParams, x: &[f64], prev: &LstmState) -> Result<LstmState> {
    let s = step(p, x, &prev.h, &prev.c)?;
    Ok(LstmState { h: s.h, c: s.c })
}

/// Activations recorded by [`lstm_forward`], in processing order.
pub struct LstmCache {
    xs: Matrix,
    steps: Vec<StepCache>,
}

/// Run one direction over the rows of `xs` (in row order) from zero initial
/// state. Returns the hidden vectors as an `n x hidden` matrix plus the
/// cache for [`lstm_backward`].
pub fn lstm_forward(p: &LstmParams, xs: &Matrix) -> Result<(Matrix, LstmCache)> {
    let n = xs.rows();
    if n == 0 {
        return Err(Error::EmptyInput("lstm input sequence"));
    }
    let hidden = p.hidden();
    let zeros = vec![0.0; hidden];
    let mut steps: Vec<StepCache> = Vec::with_capacity(n);
    for t in 0..n {
        let next = match steps.last() {
            Some(prev) => step(p, xs.row(t), &prev.h, &prev.c)?,
            None => step(p, xs.row(t), &zeros, &zeros)?,
        };
        steps.push(next);
    }
    let mut hs = Matrix::zeros(n, hidden);
    for (t, s) in steps.iter().enumerate() {
        hs.row_mut(t).copy_from_slice(&s.h);
    }
    Ok((
        hs,
        LstmCache {
            xs: xs.clone(),
            steps,
        },
    ))
}

/// Backpropagate through one direction. `d_hs` holds the loss gradient with
/// respect to every hidden vector (same shape [`lstm_forward`] returned).
/// Parameter gradients accumulate into `p`; the return value is the gradient
/// with respect to the inputs, row-aligned with the cached `xs`.
pub fn lstm_backward(p: &mut LstmParams, cache: &LstmCache, d_hs: &Matrix) -> Result<Matrix> {
    let n = cache.steps.len();
    let hidden = p.hidden();
    if d_hs.rows() != n || d_hs.cols() != hidden {
        return Err(Error::dimension(
            "lstm_backward",
            format!(
                "upstream gradient is {}x{}, cache covers {n} steps of width {hidden}",
                d_hs.rows(),
                d_hs.cols()
            ),
        ));
    }

    let zeros = vec![0.0; hidden];
    let mut d_xs = Matrix::zeros(n, cache.xs.cols());
    let mut dh_carry = vec![0.0; hidden];
    let mut dc_carry = vec![0.0; hidden];

    for t in (0..n).rev() {
        let s = &cache.steps[t];
        let (h_prev, c_prev) = if t == 0 {
            (&zeros, &zeros)
        } else {
            (&cache.steps[t - 1].h, &cache.steps[t - 1].c)
        };
        let x = cache.xs.row(t);

        let mut dh = dh_carry.clone();
        for (k, d) in dh.iter_mut().enumerate() {
            *d += d_hs.get(t, k);
        }

        let mut dpre_i = vec![0.0; hidden];
        let mut dpre_f = vec![0.0; hidden];
        let mut dpre_g = vec![0.0; hidden];
        let mut dpre_o = vec![0.0; hidden];
        let mut dc_prev = vec![0.0; hidden];
        for k in 0..hidden {
            let do_k = dh[k] * s.tanh_c[k];
            dpre_o[k] = do_k * s.o[k] * (1.0 - s.o[k]);
            let dc_total = dc_carry[k] + dh[k] * s.o[k] * (1.0 - s.tanh_c[k] * s.tanh_c[k]);
            dpre_i[k] = dc_total * s.g[k] * s.i[k] * (1.0 - s.i[k]);
            dpre_f[k] = dc_total * c_prev[k] * s.f[k] * (1.0 - s.f[k]);
            dpre_g[k] = dc_total * s.i[k] * (1.0 - s.g[k] * s.g[k]);
            dc_prev[k] = dc_total * s.f[k]
                + dpre_i[k] * p.w_ci.value.data()[k]
                + dpre_f[k] * p.w_cf.value.data()[k]
                + dpre_o[k] * p.w_co.value.data()[k];
        }

        p.w_xi.grad.add_outer(&dpre_i, x);
        p.w_hi.grad.add_outer(&dpre_i, h_prev);
        p.w_xf.grad.add_outer(&dpre_f, x);
        p.w_hf.grad.add_outer(&dpre_f, h_prev);
        p.w_xc.grad.add_outer(&dpre_g, x);
        p.w_hc.grad.add_outer(&dpre_g, h_prev);
        p.w_xo.grad.add_outer(&dpre_o, x);
        p.w_ho.grad.add_outer(&dpre_o, h_prev);
        for k in 0..hidden {
            p.w_ci.grad.data_mut()[k] += dpre_i[k] * c_prev[k];
            p.w_cf.grad.data_mut()[k] += dpre_f[k] * c_prev[k];
            p.w_co.grad.data_mut()[k] += dpre_o[k] * c_prev[k];
            p.b_i.grad.data_mut()[k] += dpre_i[k];
            p.b_f.grad.data_mut()[k] += dpre_f[k];
            p.b_c.grad.data_mut()[k] += dpre_g[k];
            p.b_o.grad.data_mut()[k] += dpre_o[k];
        }

        let dx_row = d_xs.row_mut(t);
        for (gate_pre_grad, w_x) in [
            (&dpre_i, &p.w_xi.value),
            (&dpre_f, &p.w_xf.value),
            (&dpre_g, &p.w_xc.value),
            (&dpre_o, &p.w_xo.value),
        ] {
            let contrib = w_x.matvec_t(gate_pre_grad)?;
            for (d, v) in dx_row.iter_mut().zip(contrib) {
                *d += v;
            }
        }

        dh_carry = vec![0.0; hidden];
        for (dpre, w_h) in [
            (&dpre_i, &p.w_hi.value),
            (&dpre_f, &p.w_hf.value),
            (&dpre_g, &p.w_hc.value),
            (&dpre_o, &p.w_ho.value),
        ] {
            let contrib = w_h.matvec_t(dpre)?;
            for (d, v) in dh_carry.iter_mut().zip(contrib) {
                *d += v;
            }
        }
        dc_carry = dc_prev;
    }
    Ok(d_xs)
}

/// Caches for both directions of one bidirectional pass.
pub struct BiLstmCache {
    fwd: LstmCache,
    bwd: LstmCache,
}

fn reversed_rows(xs: &Matrix) -> Matrix {
    let n = xs.rows();
    Matrix::from_fn(n, xs.cols(), |r, c| xs.get(n - 1 - r, c))
}

/// Encode a sequence in both directions from zero initial states. Output row
/// `t` is the forward hidden vector at `t` followed by the backward hidden
/// vector at `t` (each of width `hidden`).
pub fn bilstm_encode(
    fwd: &LstmParams,
    bwd: &LstmParams,
    xs: &Matrix,
) -> Result<(Matrix, BiLstmCache)> {
    let (h_fwd, fwd_cache) = lstm_forward(fwd, xs)?;
    let (h_bwd, bwd_cache) = lstm_forward(bwd, &reversed_rows(xs))?;
    let n = xs.rows();
    let hidden = fwd.hidden();
    let out = Matrix::from_fn(n, 2 * hidden, |t, k| {
        if k < hidden {
            h_fwd.get(t, k)
        } else {
            h_bwd.get(n - 1 - t, k - hidden)
        }
    });
    Ok((
        out,
        BiLstmCache {
            fwd: fwd_cache,
            bwd: bwd_cache,
        },
    ))
}

/// Backpropagate through both directions; returns the input gradient in the
/// original row order.
pub fn bilstm_backward(
    fwd: &mut LstmParams,
    bwd: &mut LstmParams,
    cache: &BiLstmCache,
    d_out: &Matrix,
) -> Result<Matrix> {
    let n = cache.fwd.steps.len();
    let hidden = fwd.hidden();
    if d_out.rows() != n || d_out.cols() != 2 * hidden {
        return Err(Error::dimension(
            "bilstm_backward",
            format!(
                "upstream gradient is {}x{}, expected {n}x{}",
                d_out.rows(),
                d_out.cols(),
                2 * hidden
            ),
        ));
    }
    let d_h_fwd = Matrix::from_fn(n, hidden, |t, k| d_out.get(t, k));
    let d_h_bwd = Matrix::from_fn(n, hidden, |t, k| d_out.get(n - 1 - t, hidden + k));
    let d_xs_fwd = lstm_backward(fwd, &cache.fwd, &d_h_fwd)?;
    let d_xs_bwd = lstm_backward(bwd, &cache.bwd, &d_h_bwd)?;
    Ok(Matrix::from_fn(n, d_xs_fwd.cols(), |t, k| {
        d_xs_fwd.get(t, k) + d_xs_bwd.get(n - 1 - t, k)
    }))
}
