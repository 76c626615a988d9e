//! Inverted dropout.
//!
//! In train mode each entry is zeroed with probability `rate` and survivors
//! are scaled by `1/(1-rate)`, so the expected output equals the input and
//! eval mode needs no rescaling: it is the exact identity.

use crate::error::{Error, Result};
use crate::numeric::{Matrix, SeededRng};

/// Apply dropout to `x`. Returns the output and, in train mode, the applied
/// mask (entries 0 or `1/(1-rate)`); backward multiplies by the same mask.
pub fn dropout(
    x: &Matrix,
    rate: f64,
    train: bool,
    rng: &mut SeededRng,
) -> Result<(Matrix, Option<Matrix>)> {
    if !rate.is_finite() || !(0.0..1.0).contains(&rate) {
        return Err(Error::config(format!(
            "dropout rate must be in [0, 1), got {rate}"
        )));
    }
    if !train {
        return Ok((x.clone(), None));
    }
    let keep_scale = 1.0 / (1.0 - rate);
    let mask = Matrix::from_fn(x.rows(), x.cols(), |_, _| {
        if rng.next_f64() < rate {
            0.0
        } else {
            keep_scale
        }
    });
    let out = Matrix::from_fn(x.rows(), x.cols(), |r, c| x.get(r, c) * mask.get(r, c));
    Ok((out, Some(mask)))
}

/// Route upstream gradients through the mask recorded by [`dropout`]
/// (identity when the forward pass ran in eval mode).
pub fn dropout_backward(d_out: &Matrix, mask: Option<&Matrix>) -> Matrix {
    match mask {
        None => d_out.clone(),
        Some(m) => Matrix::from_fn(d_out.rows(), d_out.cols(), |r, c| {
            d_out.get(r, c) * m.get(r, c)
        }),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn eval_mode_is_the_exact_identity() {
        let mut rng = SeededRng::new(1);
        let x = Matrix::from_fn(13, 7, |_, _| rng.uniform(-3.0, 3.0));
        let (out, mask) = dropout(&x, 0.9, false, &mut rng).unwrap();
        assert!(mask.is_none());
        assert_eq!(out.data(), x.data());
    }

    #[test]
    fn rate_zero_is_the_identity_in_train_mode() {
        let mut rng = SeededRng::new(2);
        let x = Matrix::from_fn(5, 5, |_, _| rng.uniform(-3.0, 3.0));
        let (out, mask) = dropout(&x, 0.0, true, &mut rng).unwrap();
        assert_eq!(out.data(), x.data());
        assert!(mask.unwrap().data().iter().all(|&m| m == 1.0));
    }

    #[test]
    fn rate_out_of_range_is_rejected() {
        let mut rng = SeededRng::new(3);
        let x = Matrix::zeros(1, 1);
        assert!(dropout(&x, 1.0, true, &mut rng).is_err());
        assert!(dropout(&x, 1.5, false, &mut rng).is_err());
        assert!(dropout(&x, -0.1, true, &mut rng).is_err());
        assert!(dropout(&x, f64::NAN, true, &mut rng).is_err());
    }

    #[test]
    fn survival_fraction_and_mean_match_expectation() {
        let mut rng = SeededRng::new(4);
        let x = Matrix::from_fn(1000, 100, |_, _| 1.0);
        let (out, _) = dropout(&x, 0.2, true, &mut rng).unwrap();
        let survivors = out.data().iter().filter(|&&v| v != 0.0).count();
        let fraction = survivors as f64 / out.len() as f64;
        assert!((fraction - 0.8).abs() < 0.01, "survival fraction {fraction}");
        let mean = out.data().iter().sum::<f64>() / out.len() as f64;
        assert!((mean - 1.0).abs() < 0.02, "output mean {mean}");
    }

    #[test]
    fn survivors_are_scaled_by_inverse_keep_probability() {
        let mut rng = SeededRng::new(5);
        let x = Matrix::from_fn(20, 20, |_, _| 2.0);
        let (out, _) = dropout(&x, 0.25, true, &mut rng).unwrap();
        for &v in out.data() {
            assert!(v == 0.0 || (v - 2.0 / 0.75).abs() < 1e-12);
        }
    }

    #[test]
    fn backward_applies_the_recorded_mask() {
        let mut rng = SeededRng::new(6);
        let x = Matrix::from_fn(8, 8, |_, _| rng.uniform(-1.0, 1.0));
        let (_, mask) = dropout(&x, 0.5, true, &mut rng).unwrap();
        let mask = mask.unwrap();
        let d_out = Matrix::from_fn(8, 8, |_, _| rng.uniform(-1.0, 1.0));
        let d_in = dropout_backward(&d_out, Some(&mask));
        for i in 0..d_in.len() {
            assert_eq!(d_in.data()[i], d_out.data()[i] * mask.data()[i]);
        }
        let pass_through = dropout_backward(&d_out, None);
        assert_eq!(pass_through.data(), d_out.data());
    }

    #[test]
    fn same_seed_reproduces_the_mask() {
        let x = Matrix::from_fn(10, 10, |r, c| (r * 10 + c) as f64);
        let mut rng_a = SeededRng::new(7);
        let mut rng_b = SeededRng::new(7);
        let (out_a, _) = dropout(&x, 0.3, true, &mut rng_a).unwrap();
        let (out_b, _) = dropout(&x, 0.3, true, &mut rng_b).unwrap();
        assert_eq!(out_a.data(), out_b.data());
    }
}
