//! Linear projection from encoder features to per-tag emission scores.
//!
//! Scores are raw: normalization happens downstream, either inside the CRF
//! or through a per-token softmax in the CRF-less variants.

use crate::error::{Error, Result};
use crate::numeric::{affine, init_weight, Matrix, ParamTensor, SeededRng, TensorSet};

#[derive(Clone, Debug)]
pub struct ProjectionParams {
    pub weight: ParamTensor,
    pub bias: ParamTensor,
}

impl ProjectionParams {
    pub fn new(tag_count: usize, feature_dim: usize, rng: &mut SeededRng) -> Self {
        ProjectionParams {
            weight: ParamTensor::new("proj.weight", init_weight(tag_count, feature_dim, rng)),
            bias: ParamTensor::new("proj.bias", Matrix::zeros(tag_count, 1)),
        }
    }

    pub fn tag_count(&self) -> usize {
        self.weight.value.rows()
    }

    pub fn feature_dim(&self) -> usize {
        self.weight.value.cols()
    }
}

impl TensorSet for ProjectionParams {
    fn tensors(&self) -> Vec<&ParamTensor> {
        vec![&self.weight, &self.bias]
    }

    fn tensors_mut(&mut self) -> Vec<&mut ParamTensor> {
        vec![&mut self.weight, &mut self.bias]
    }
}

/// Emission matrix: row `i` is `W feats_i + b`.
pub fn emission_scores(p: &ProjectionParams, feats: &Matrix) -> Result<Matrix> {
    if feats.cols() != p.feature_dim() {
        return Err(Error::dimension(
            "emission_scores",
            format!(
                "features are {}-wide, projection expects {}",
                feats.cols(),
                p.feature_dim()
            ),
        ));
    }
    let mut out = Matrix::zeros(feats.rows(), p.tag_count());
    for t in 0..feats.rows() {
        out.row_mut(t)
            .copy_from_slice(&affine(&p.weight.value, feats.row(t), p.bias.value.data())?);
    }
    Ok(out)
}

/// Backpropagate through the projection; returns the feature gradient.
pub fn projection_backward(
    p: &mut ProjectionParams,
    feats: &Matrix,
    d_emissions: &Matrix,
) -> Result<Matrix> {
    if d_emissions.rows() != feats.rows() || d_emissions.cols() != p.tag_count() {
        return Err(Error::dimension(
            "projection_backward",
            format!(
                "upstream gradient is {}x{}, expected {}x{}",
                d_emissions.rows(),
                d_emissions.cols(),
                feats.rows(),
                p.tag_count()
            ),
        ));
    }
    let mut d_feats = Matrix::zeros(feats.rows(), feats.cols());
    for t in 0..feats.rows() {
        let d_row = d_emissions.row(t);
        p.weight.grad.add_outer(d_row, feats.row(t));
        for (b, &d) in p.bias.grad.data_mut().iter_mut().zip(d_row) {
            *b += d;
        }
        d_feats
            .row_mut(t)
            .copy_from_slice(&p.weight.value.matvec_t(d_row)?);
    }
    Ok(d_feats)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numeric::{dot, finite_diff_grad, GradCheckReport};

    #[test]
    fn zero_weight_passes_the_bias_through() {
        let mut rng = SeededRng::new(1);
        let mut p = ProjectionParams::new(3, 4, &mut rng);
        p.weight.value.fill(0.0);
        p.bias.value = Matrix::column(&[1.0, 2.0, 3.0]);
        let feats = Matrix::from_fn(5, 4, |_, _| rng.uniform(-1.0, 1.0));
        let out = emission_scores(&p, &feats).unwrap();
        for t in 0..5 {
            assert_eq!(out.row(t), &[1.0, 2.0, 3.0]);
        }
    }

    #[test]
    fn identity_weight_shifts_features_by_bias() {
        let mut rng = SeededRng::new(2);
        let mut p = ProjectionParams::new(3, 3, &mut rng);
        p.weight.value = Matrix::from_fn(3, 3, |r, c| f64::from(r == c));
        p.bias.value = Matrix::column(&[0.5, -0.5, 0.0]);
        let feats = Matrix::from_vec(2, 3, vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0]).unwrap();
        let out = emission_scores(&p, &feats).unwrap();
        assert_eq!(out.row(0), &[1.5, 1.5, 3.0]);
        assert_eq!(out.row(1), &[4.5, 4.5, 6.0]);
    }

    #[test]
    fn matches_direct_affine_oracle() {
        let mut rng = SeededRng::new(3);
        let p = ProjectionParams::new(4, 6, &mut rng);
        let feats = Matrix::from_fn(3, 6, |_, _| rng.uniform(-2.0, 2.0));
        let out = emission_scores(&p, &feats).unwrap();
        for t in 0..3 {
            for tag in 0..4 {
                let expected: f64 = (0..6)
                    .map(|d| p.weight.value.get(tag, d) * feats.get(t, d))
                    .sum::<f64>()
                    + p.bias.value.get(tag, 0);
                assert!((out.get(t, tag) - expected).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn width_mismatch_is_rejected() {
        let mut rng = SeededRng::new(4);
        let p = ProjectionParams::new(3, 4, &mut rng);
        assert!(emission_scores(&p, &Matrix::zeros(2, 5)).is_err());
    }

    #[test]
    fn gradients_match_finite_differences() {
        for trial in 0..20 {
            let mut rng = SeededRng::new(40 + trial);
            let mut p = ProjectionParams::new(3, 4, &mut rng);
            let feats = Matrix::from_fn(2, 4, |_, _| rng.uniform(-1.0, 1.0));
            let weights = Matrix::from_fn(2, 3, |_, _| rng.uniform(-1.0, 1.0));

            let (_out, d_feats) = {
                let out = emission_scores(&p, &feats).unwrap();
                let d = projection_backward(&mut p, &feats, &weights).unwrap();
                (out, d)
            };

            let feats_ref = &feats;
            let weights_ref = &weights;
            let numeric = finite_diff_grad(
                &mut p,
                |pp: &ProjectionParams| {
                    let out = emission_scores(pp, feats_ref)?;
                    Ok((0..2).map(|t| dot(out.row(t), weights_ref.row(t))).sum())
                },
                1e-5,
            )
            .unwrap();
            let report = GradCheckReport::compare(&p, &numeric);
            assert!(
                report.max_rel_error <= 1e-4,
                "trial {trial}: {} at {}",
                report.max_rel_error,
                report.worst_tensor
            );

            // Feature gradient against the same scalar loss.
            let mut feats_set = vec![ParamTensor::new("feats", feats.clone())];
            let p_ref = &p;
            let numeric_feats = finite_diff_grad(
                &mut feats_set,
                |s: &Vec<ParamTensor>| {
                    let out = emission_scores(p_ref, &s[0].value)?;
                    Ok((0..2).map(|t| dot(out.row(t), weights_ref.row(t))).sum())
                },
                1e-5,
            )
            .unwrap();
            feats_set[0].grad = d_feats;
            let report = GradCheckReport::compare(&feats_set, &numeric_feats);
            assert!(report.max_rel_error <= 1e-4, "{}", report.max_rel_error);
        }
    }
}
