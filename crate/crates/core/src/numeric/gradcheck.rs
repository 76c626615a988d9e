//! Finite-difference gradient checking.
//!
//! Central differences over every scalar in a tensor set give a numeric
//! gradient that is independent of any hand-derived reverse pass; every
//! analytic gradient in this crate is validated against it.

use super::{Matrix, ParamTensor};
use crate::error::{Error, Result};

/// Anything exposing an ordered collection of parameter tensors.
///
/// The order of [`TensorSet::tensors`] and [`TensorSet::tensors_mut`] must
/// agree and stay stable across calls.
pub trait TensorSet {
    fn tensors(&self) -> Vec<&ParamTensor>;
    fn tensors_mut(&mut self) -> Vec<&mut ParamTensor>;

    fn zero_grads(&mut self) {
        for t in self.tensors_mut() {
            t.zero_grad();
        }
    }
}

impl TensorSet for Vec<ParamTensor> {
    fn tensors(&self) -> Vec<&ParamTensor> {
        self.iter().collect()
    }

    fn tensors_mut(&mut self) -> Vec<&mut ParamTensor> {
        self.iter_mut().collect()
    }
}

/// Central-difference gradient `(f(t+e) - f(t-e)) / 2e` for every scalar
/// parameter in `set`. Returns one matrix per tensor, in `tensors()` order.
///
/// `f` must be deterministic given the parameter values (dropout disabled).
pub fn finite_diff_grad<S, F>(set: &mut S, mut f: F, epsilon: f64) -> Result<Vec<Matrix>>
where
    S: TensorSet + ?Sized,
    F: FnMut(&S) -> Result<f64>,
{
    if epsilon <= 0.0 {
        return Err(Error::config(format!("epsilon must be positive, got {epsilon}")));
    }
    let shapes: Vec<(usize, usize)> = set.tensors().iter().map(|t| t.value.shape()).collect();
    let mut grads: Vec<Matrix> = shapes.iter().map(|&(r, c)| Matrix::zeros(r, c)).collect();

    for (ti, &(rows, cols)) in shapes.iter().enumerate() {
        for si in 0..rows * cols {
            let orig = set.tensors()[ti].value.data()[si];

            set.tensors_mut()[ti].value.data_mut()[si] = orig + epsilon;
            let f_plus = f(set)?;
            set.tensors_mut()[ti].value.data_mut()[si] = orig - epsilon;
            let f_minus = f(set)?;
            set.tensors_mut()[ti].value.data_mut()[si] = orig;

            if !f_plus.is_finite() || !f_minus.is_finite() {
                return Err(Error::Numeric {
                    tensor: set.tensors()[ti].name.clone(),
                    message: format!("non-finite loss during finite differences ({f_plus}, {f_minus})"),
                });
            }
            grads[ti].data_mut()[si] = (f_plus - f_minus) / (2.0 * epsilon);
        }
    }
    Ok(grads)
}

/// Worst disagreement between analytic and numeric gradients.
#[derive(Clone, Debug)]
pub struct GradCheckReport {
    pub max_rel_error: f64,
    pub worst_tensor: String,
    pub worst_index: usize,
    pub analytic: f64,
    pub numeric: f64,
}

impl GradCheckReport {
    /// Compares the accumulated `grad` buffers of `set` against `numeric`
    /// (as returned by [`finite_diff_grad`], same tensor order).
    ///
    /// The error at one scalar is `|a - n| / max(|a|, |n|)`, with agreement
    /// below 1e-8 absolute treated as exact so near-zero gradients do not
    /// blow up the ratio.
    pub fn compare<S: TensorSet + ?Sized>(set: &S, numeric: &[Matrix]) -> Self {
        let mut report = GradCheckReport {
            max_rel_error: 0.0,
            worst_tensor: String::new(),
            worst_index: 0,
            analytic: 0.0,
            numeric: 0.0,
        };
        for (t, num) in set.tensors().iter().zip(numeric) {
            for (si, (&a, &n)) in t.grad.data().iter().zip(num.data()).enumerate() {
                let diff = (a - n).abs();
                let rel = if diff <= 1e-8 {
                    0.0
                } else {
                    diff / a.abs().max(n.abs())
                };
                if rel > report.max_rel_error {
                    report.max_rel_error = rel;
                    report.worst_tensor = t.name.clone();
                    report.worst_index = si;
                    report.analytic = a;
                    report.numeric = n;
                }
            }
        }
        report
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quadratic_has_derivative_two_theta() {
        // f(theta) = theta^2 at theta = 3 -> df = 6.
        let mut set = vec![ParamTensor::new("theta", Matrix::from_vec(1, 1, vec![3.0]).unwrap())];
        let grads = finite_diff_grad(&mut set, |s| Ok(s[0].value.get(0, 0).powi(2)), 1e-5).unwrap();
        assert!((grads[0].get(0, 0) - 6.0).abs() < 1e-6);
    }

    #[test]
    fn constant_function_has_zero_gradient() {
        let mut set = vec![ParamTensor::new("w", Matrix::zeros(2, 3))];
        let grads = finite_diff_grad(&mut set, |_| Ok(4.25), 1e-5).unwrap();
        assert!(grads[0].data().iter().all(|&g| g == 0.0));
    }

    #[test]
    fn rejects_non_positive_epsilon() {
        let mut set = vec![ParamTensor::new("w", Matrix::zeros(1, 1))];
        assert!(finite_diff_grad(&mut set, |_| Ok(0.0), 0.0).is_err());
    }

    #[test]
    fn compare_flags_the_worst_entry() {
        let mut set = vec![ParamTensor::new("w", Matrix::zeros(1, 2))];
        set[0].grad.data_mut().copy_from_slice(&[1.0, 2.0]);
        let numeric = vec![Matrix::from_vec(1, 2, vec![1.0, 2.5]).unwrap()];
        let report = GradCheckReport::compare(&set, &numeric);
        assert_eq!(report.worst_index, 1);
        assert!((report.max_rel_error - 0.2).abs() < 1e-12);
    }
}
