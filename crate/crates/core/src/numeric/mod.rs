//! Minimal dense linear-algebra kernel: row-major `f64` matrices, the scalar
//! nonlinearities used by the gate equations, and named parameter tensors with
//! paired gradient buffers.
//!
//! Everything downstream (layers, CRF, training) builds on these primitives;
//! there are no BLAS bindings and no implicit broadcasting.

mod gradcheck;
mod rng;

pub use gradcheck::{finite_diff_grad, GradCheckReport, TensorSet};
pub use rng::SeededRng;

use crate::error::{Error, Result};

/// Dense row-major matrix of 64-bit floats.
#[derive(Clone, Debug, PartialEq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Matrix {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn from_vec(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::dimension(
                "Matrix::from_vec",
                format!("{}x{} needs {} values, got {}", rows, cols, rows * cols, data.len()),
            ));
        }
        Ok(Matrix { rows, cols, data })
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for r in 0..rows {
            for c in 0..cols {
                data.push(f(r, c));
            }
        }
        Matrix { rows, cols, data }
    }

    /// Column vector (n x 1) from a slice.
    pub fn column(values: &[f64]) -> Self {
        Matrix {
            rows: values.len(),
            cols: 1,
            data: values.to_vec(),
        }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    #[inline]
    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.data[r * self.cols + c]
    }

    #[inline]
    pub fn set(&mut self, r: usize, c: usize, v: f64) {
        self.data[r * self.cols + c] = v;
    }

    #[inline]
    pub fn row(&self, r: usize) -> &[f64] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    #[inline]
    pub fn row_mut(&mut self, r: usize) -> &mut [f64] {
        &mut self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn fill(&mut self, v: f64) {
        self.data.fill(v);
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    /// `self * x` for a column vector `x`.
    pub fn matvec(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.cols {
            return Err(Error::dimension(
                "matvec",
                format!("matrix is {}x{}, vector has length {}", self.rows, self.cols, x.len()),
            ));
        }
        Ok((0..self.rows)
            .map(|r| dot(self.row(r), x))
            .collect())
    }

    /// `self^T * y`; the reverse-pass companion of [`Matrix::matvec`].
    pub fn matvec_t(&self, y: &[f64]) -> Result<Vec<f64>> {
        if y.len() != self.rows {
            return Err(Error::dimension(
                "matvec_t",
                format!("matrix is {}x{}, vector has length {}", self.rows, self.cols, y.len()),
            ));
        }
        let mut out = vec![0.0; self.cols];
        for (r, &yr) in y.iter().enumerate() {
            if yr != 0.0 {
                axpy(&mut out, yr, self.row(r));
            }
        }
        Ok(out)
    }

    /// Rank-one update `self += u * v^T`; used to accumulate weight gradients.
    pub fn add_outer(&mut self, u: &[f64], v: &[f64]) {
        debug_assert_eq!(u.len(), self.rows);
        debug_assert_eq!(v.len(), self.cols);
        for (r, &ur) in u.iter().enumerate() {
            if ur != 0.0 {
                axpy(self.row_mut(r), ur, v);
            }
        }
    }
}

/// `W * x + b` with full shape checking.
pub fn affine(w: &Matrix, x: &[f64], b: &[f64]) -> Result<Vec<f64>> {
    if x.len() != w.cols() || b.len() != w.rows() {
        return Err(Error::dimension(
            "affine",
            format!(
                "W is {}x{}, x has length {}, b has length {}",
                w.rows(),
                w.cols(),
                x.len(),
                b.len()
            ),
        ));
    }
    let mut out = w.matvec(x)?;
    for (o, &bi) in out.iter_mut().zip(b) {
        *o += bi;
    }
    Ok(out)
}

#[inline]
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// `y += a * x`.
#[inline]
pub fn axpy(y: &mut [f64], a: f64, x: &[f64]) {
    debug_assert_eq!(y.len(), x.len());
    for (yi, &xi) in y.iter_mut().zip(x) {
        *yi += a * xi;
    }
}

#[inline]
pub fn sigmoid_scalar(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// Element-wise logistic function.
pub fn sigmoid(xs: &[f64]) -> Vec<f64> {
    xs.iter().map(|&x| sigmoid_scalar(x)).collect()
}

/// Element-wise hyperbolic tangent.
pub fn tanh(xs: &[f64]) -> Vec<f64> {
    xs.iter().map(|&x| x.tanh()).collect()
}

/// Element-wise product.
pub fn hadamard(a: &[f64], b: &[f64]) -> Result<Vec<f64>> {
    if a.len() != b.len() {
        return Err(Error::dimension(
            "hadamard",
            format!("lengths {} and {}", a.len(), b.len()),
        ));
    }
    Ok(a.iter().zip(b).map(|(x, y)| x * y).collect())
}

/// `log(sum(exp(x_i)))` via the max-shift identity, so scores of magnitude
/// well beyond 1e3 stay finite.
pub fn log_sum_exp(xs: &[f64]) -> Result<f64> {
    if xs.is_empty() {
        return Err(Error::EmptyInput("log_sum_exp of zero terms"));
    }
    let m = xs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if !m.is_finite() {
        return Ok(m);
    }
    let sum: f64 = xs.iter().map(|&x| (x - m).exp()).sum();
    Ok(m + sum.ln())
}

/// Numerically stable softmax (shift by max).
pub fn softmax(xs: &[f64]) -> Vec<f64> {
    let m = xs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = xs.iter().map(|&x| (x - m).exp()).collect();
    let z: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / z).collect()
}

/// A named parameter matrix paired with a same-shape gradient buffer.
#[derive(Clone, Debug)]
pub struct ParamTensor {
    pub name: String,
    pub value: Matrix,
    pub grad: Matrix,
}

impl ParamTensor {
    pub fn new(name: impl Into<String>, value: Matrix) -> Self {
        let grad = Matrix::zeros(value.rows(), value.cols());
        ParamTensor {
            name: name.into(),
            value,
            grad,
        }
    }

    pub fn zero_grad(&mut self) {
        self.grad.fill(0.0);
    }
}

/// Scaled-uniform initialization on `[-s, s]` with `s = sqrt(6 / (fan_in + fan_out))`.
pub fn init_weight(rows: usize, cols: usize, rng: &mut SeededRng) -> Matrix {
    let s = (6.0 / (rows + cols) as f64).sqrt();
    Matrix::from_fn(rows, cols, |_, _| rng.uniform(-s, s))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    #[test]
    fn affine_identity() {
        let w = Matrix::from_vec(2, 2, vec![1.0, 0.0, 0.0, 1.0]).unwrap();
        let out = affine(&w, &[3.0, 4.0], &[0.0, 0.0]).unwrap();
        assert_eq!(out, vec![3.0, 4.0]);
    }

    #[test]
    fn affine_zero_weights_returns_bias() {
        let w = Matrix::zeros(2, 2);
        let out = affine(&w, &[9.0, -7.0], &[1.0, -1.0]).unwrap();
        assert_eq!(out, vec![1.0, -1.0]);
    }

    #[test]
    fn affine_hand_summed() {
        let w = Matrix::from_vec(2, 2, vec![1.0, 2.0, 3.0, 4.0]).unwrap();
        let out = affine(&w, &[1.0, 1.0], &[0.5, 0.5]).unwrap();
        assert_eq!(out, vec![3.5, 7.5]);
    }

    #[test]
    fn affine_shape_mismatch_names_shapes() {
        let w = Matrix::zeros(2, 3);
        let err = affine(&w, &[1.0, 2.0], &[0.0, 0.0]).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("2x3"), "{msg}");
        assert!(msg.contains("length 2"), "{msg}");
    }

    #[test]
    fn sigmoid_tanh_hadamard_fixed_points() {
        assert_eq!(sigmoid(&[0.0]), vec![0.5]);
        assert_eq!(tanh(&[0.0]), vec![0.0]);
        assert_eq!(hadamard(&[2.0, 3.0], &[4.0, 5.0]).unwrap(), vec![8.0, 15.0]);
        assert!(hadamard(&[1.0], &[1.0, 2.0]).is_err());
    }

    #[test]
    fn log_sum_exp_single_and_pair() {
        assert!(close(log_sum_exp(&[3.25]).unwrap(), 3.25, 1e-15));
        assert!(close(log_sum_exp(&[0.0, 0.0]).unwrap(), 2.0_f64.ln(), 1e-12));
    }

    #[test]
    fn log_sum_exp_large_inputs_stay_finite() {
        let v = log_sum_exp(&[1000.0, 1000.0]).unwrap();
        assert!(v.is_finite());
        assert!(close(v, 1000.0 + 2.0_f64.ln(), 1e-9));
    }

    #[test]
    fn log_sum_exp_empty_is_error() {
        assert!(log_sum_exp(&[]).is_err());
    }

    #[test]
    fn matvec_t_is_transpose() {
        let w = Matrix::from_vec(2, 3, vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0]).unwrap();
        let y = [1.0, 10.0];
        assert_eq!(w.matvec_t(&y).unwrap(), vec![41.0, 52.0, 63.0]);
    }

    #[test]
    fn add_outer_accumulates() {
        let mut m = Matrix::zeros(2, 2);
        m.add_outer(&[1.0, 2.0], &[3.0, 4.0]);
        assert_eq!(m.data(), &[3.0, 4.0, 6.0, 8.0]);
    }
}
