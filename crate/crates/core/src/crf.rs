//! Linear-chain CRF output layer.
//!
//! Scores a tag path as the sum of learned tag-to-tag transition scores and
//! the per-token emission scores produced by the encoder. The log-partition
//! over all paths comes from the forward recursion, exact gradients of the
//! negative log-likelihood from forward-backward posterior marginals, and
//! decoding from the Viterbi dynamic program.
//!
//! The transition matrix carries two extra boundary states, START and STOP,
//! so the boundary terms of the path score are ordinary matrix entries.
//! Transitions into START and out of STOP are pinned at [`NEG_INF`] and
//! excluded from learning.

use crate::error::{Error, Result};
use crate::numeric::{log_sum_exp, Matrix};

/// Finite surrogate for minus infinity; keeps all arithmetic finite while
/// making forbidden transitions unreachable in practice.
pub const NEG_INF: f64 = -1e9;

/// Index of the START boundary state for a `tag_count`-tag alphabet.
pub fn start_state(tag_count: usize) -> usize {
    tag_count
}

/// Index of the STOP boundary state for a `tag_count`-tag alphabet.
pub fn stop_state(tag_count: usize) -> usize {
    tag_count + 1
}

/// Fresh `(T+2) x (T+2)` transition matrix: zeros for learnable entries,
/// [`NEG_INF`] for transitions into START and out of STOP.
pub fn new_transitions(tag_count: usize) -> Matrix {
    let size = tag_count + 2;
    let start = start_state(tag_count);
    let stop = stop_state(tag_count);
    Matrix::from_fn(size, size, |r, c| {
        if c == start || r == stop || (r == start && c == stop) {
            NEG_INF
        } else {
            0.0
        }
    })
}

/// Loss and exact gradients of one CRF negative log-likelihood evaluation.
#[derive(Clone, Debug)]
pub struct CrfLoss {
    pub loss: f64,
    /// d loss / d emissions, shape `n x T`.
    pub d_emissions: Matrix,
    /// d loss / d transitions, shape `(T+2) x (T+2)`; zero at pinned entries.
    pub d_transitions: Matrix,
}

fn check_instance(emissions: &Matrix, transitions: &Matrix) -> Result<usize> {
    let t = emissions.cols();
    if emissions.rows() == 0 {
        return Err(Error::EmptyInput("emission matrix has no rows"));
    }
    if transitions.rows() != t + 2 || transitions.cols() != t + 2 {
        return Err(Error::dimension(
            "crf",
            format!(
                "emissions are {}x{} so transitions must be {}x{}, got {}x{}",
                emissions.rows(),
                t,
                t + 2,
                t + 2,
                transitions.rows(),
                transitions.cols()
            ),
        ));
    }
    Ok(t)
}

fn check_path(emissions: &Matrix, tag_count: usize, path: &[usize]) -> Result<()> {
    if path.len() != emissions.rows() {
        return Err(Error::dimension(
            "crf path",
            format!("{} emission rows vs {} tags", emissions.rows(), path.len()),
        ));
    }
    if let Some(&bad) = path.iter().find(|&&y| y >= tag_count) {
        return Err(Error::config(format!(
            "tag id {bad} out of range for {tag_count} tags"
        )));
    }
    Ok(())
}

/// Combined score of one tag path:
/// `A[START][y1] + sum A[y_i][y_{i+1}] + A[y_n][STOP] + sum M[i][y_i]`.
pub fn path_score(emissions: &Matrix, transitions: &Matrix, path: &[usize]) -> Result<f64> {
    let t = check_instance(emissions, transitions)?;
    check_path(emissions, t, path)?;

    let mut score = transitions.get(start_state(t), path[0]);
    for i in 0..path.len() - 1 {
        score += transitions.get(path[i], path[i + 1]);
    }
    score += transitions.get(path[path.len() - 1], stop_state(t));
    for (i, &y) in path.iter().enumerate() {
        score += emissions.get(i, y);
    }
    Ok(score)
}

/// Forward lattice: `alpha[t][j]` is the log-sum of scores of all partial
/// paths ending in tag `j` at position `t` (emission at `t` included).
#[allow(clippy::needless_range_loop)]
fn forward_lattice(emissions: &Matrix, transitions: &Matrix, t: usize) -> Vec<Vec<f64>> {
    let n = emissions.rows();
    let start = start_state(t);
    let mut alpha = vec![vec![0.0; t]; n];
    for j in 0..t {
        alpha[0][j] = emissions.get(0, j) + transitions.get(start, j);
    }
    let mut terms = vec![0.0; t];
    for i in 1..n {
        for j in 0..t {
            for (k, term) in terms.iter_mut().enumerate() {
                *term = alpha[i - 1][k] + transitions.get(k, j);
            }
            alpha[i][j] = emissions.get(i, j) + log_sum_exp(&terms).expect("t >= 1");
        }
    }
    alpha
}

/// Backward lattice: `beta[t][k]` is the log-sum of scores of all path
/// completions from tag `k` at position `t` (emission at `t` excluded).
#[allow(clippy::needless_range_loop)]
fn backward_lattice(emissions: &Matrix, transitions: &Matrix, t: usize) -> Vec<Vec<f64>> {
    let n = emissions.rows();
    let stop = stop_state(t);
    let mut beta = vec![vec![0.0; t]; n];
    for k in 0..t {
        beta[n - 1][k] = transitions.get(k, stop);
    }
    let mut terms = vec![0.0; t];
    for i in (0..n - 1).rev() {
        for k in 0..t {
            for (j, term) in terms.iter_mut().enumerate() {
                *term = transitions.get(k, j) + emissions.get(i + 1, j) + beta[i + 1][j];
            }
            beta[i][k] = log_sum_exp(&terms).expect("t >= 1");
        }
    }
    beta
}

/// Log of the sum of exponentiated scores over all `T^n` tag paths.
pub fn log_partition(emissions: &Matrix, transitions: &Matrix) -> Result<f64> {
    let t = check_instance(emissions, transitions)?;
    let alpha = forward_lattice(emissions, transitions, t);
    let last = alpha.last().expect("n >= 1");
    let stop = stop_state(t);
    let terms: Vec<f64> = (0..t).map(|j| last[j] + transitions.get(j, stop)).collect();
    log_sum_exp(&terms)
}

/// Per-position posterior tag marginals, shape `n x T`; each row sums to 1.
pub fn marginals(emissions: &Matrix, transitions: &Matrix) -> Result<Matrix> {
    let t = check_instance(emissions, transitions)?;
    let log_z = log_partition(emissions, transitions)?;
    let alpha = forward_lattice(emissions, transitions, t);
    let beta = backward_lattice(emissions, transitions, t);
    let n = emissions.rows();
    Ok(Matrix::from_fn(n, t, |i, j| {
        (alpha[i][j] + beta[i][j] - log_z).exp()
    }))
}

/// Negative log-likelihood of `gold` with exact gradients from
/// forward-backward marginals:
/// `dM[i][j] = P(y_i = j) - 1{gold_i = j}` and
/// `dA[k][j] = E[#transitions k -> j] - #observed`, boundaries included.
#[allow(clippy::needless_range_loop)]
pub fn nll_loss(emissions: &Matrix, transitions: &Matrix, gold: &[usize]) -> Result<CrfLoss> {
    let t = check_instance(emissions, transitions)?;
    check_path(emissions, t, gold)?;

    let n = emissions.rows();
    let start = start_state(t);
    let stop = stop_state(t);

    let alpha = forward_lattice(emissions, transitions, t);
    let beta = backward_lattice(emissions, transitions, t);
    let terms: Vec<f64> = (0..t)
        .map(|j| alpha[n - 1][j] + transitions.get(j, stop))
        .collect();
    let log_z = log_sum_exp(&terms)?;
    let loss = log_z - path_score(emissions, transitions, gold)?;

    let mut d_emissions = Matrix::zeros(n, t);
    for i in 0..n {
        for j in 0..t {
            let marginal = (alpha[i][j] + beta[i][j] - log_z).exp();
            let observed = f64::from(gold[i] == j);
            d_emissions.set(i, j, marginal - observed);
        }
    }

    let mut d_transitions = Matrix::zeros(t + 2, t + 2);
    for j in 0..t {
        // START -> first tag.
        let marginal = (alpha[0][j] + beta[0][j] - log_z).exp();
        d_transitions.set(start, j, marginal - f64::from(gold[0] == j));
        // Last tag -> STOP.
        let marginal = (alpha[n - 1][j] + beta[n - 1][j] - log_z).exp();
        d_transitions.set(j, stop, marginal - f64::from(gold[n - 1] == j));
    }
    for i in 0..n - 1 {
        for k in 0..t {
            for j in 0..t {
                let pair = (alpha[i][k]
                    + transitions.get(k, j)
                    + emissions.get(i + 1, j)
                    + beta[i + 1][j]
                    - log_z)
                    .exp();
                let observed = f64::from(gold[i] == k && gold[i + 1] == j);
                let cell = d_transitions.get(k, j) + pair - observed;
                d_transitions.set(k, j, cell);
            }
        }
    }

    Ok(CrfLoss {
        loss,
        d_emissions,
        d_transitions,
    })
}

/// Maximum-score tag path and its score. Ties break toward the lowest tag id
/// at every backpointer decision and at the final argmax; the returned score
/// is `path_score` of the returned path.
#[allow(clippy::needless_range_loop)]
pub fn viterbi(emissions: &Matrix, transitions: &Matrix) -> Result<(Vec<usize>, f64)> {
    let t = check_instance(emissions, transitions)?;
    let n = emissions.rows();
    let start = start_state(t);
    let stop = stop_state(t);

    let mut delta = vec![vec![0.0; t]; n];
    let mut back = vec![vec![0usize; t]; n];
    for j in 0..t {
        delta[0][j] = emissions.get(0, j) + transitions.get(start, j);
    }
    for i in 1..n {
        for j in 0..t {
            let mut best_k = 0;
            let mut best = delta[i - 1][0] + transitions.get(0, j);
            for k in 1..t {
                let cand = delta[i - 1][k] + transitions.get(k, j);
                if cand > best {
                    best = cand;
                    best_k = k;
                }
            }
            delta[i][j] = emissions.get(i, j) + best;
            back[i][j] = best_k;
        }
    }

    let mut best_j = 0;
    let mut best = delta[n - 1][0] + transitions.get(0, stop);
    for j in 1..t {
        let cand = delta[n - 1][j] + transitions.get(j, stop);
        if cand > best {
            best = cand;
            best_j = j;
        }
    }

    let mut path = vec![0usize; n];
    path[n - 1] = best_j;
    for i in (0..n - 1).rev() {
        path[i] = back[i + 1][path[i + 1]];
    }
    let score = path_score(emissions, transitions, &path)?;
    Ok((path, score))
}

/// Per-position argmax decoding for the CRF-less variants. The per-token
/// softmax is monotone, so the argmax of raw scores is the argmax of the
/// per-token posteriors. Equals [`viterbi`] when all transitions are zero.
pub fn argmax_tags(emissions: &Matrix) -> Result<Vec<usize>> {
    if emissions.rows() == 0 || emissions.cols() == 0 {
        return Err(Error::EmptyInput("emission matrix"));
    }
    Ok((0..emissions.rows())
        .map(|i| {
            let row = emissions.row(i);
            let mut best = 0;
            for (j, &v) in row.iter().enumerate().skip(1) {
                if v > row[best] {
                    best = j;
                }
            }
            best
        })
        .collect())
}
