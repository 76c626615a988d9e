//! Self-verification oracles: brute-force CRF equivalence, whole-model
//! finite-difference gradient checks, the BIO round-trip battery, and
//! normalization properties. Shared by the `selfcheck` command and the
//! acceptance tests.

use crate::corpus::{decode_spans, encode_bio, BioTag, LabeledSequence, Span, TokenSequence, Vocab};
use crate::crf;
use crate::error::Result;
use crate::layers::{attention, dropout, AttentionParams};
use crate::numeric::{finite_diff_grad, log_sum_exp, GradCheckReport, Matrix, SeededRng, TensorSet};
use crate::training::{backward, forward, loss_for_variant, ModelConfig, ModelParams, Mode, Variant};

/// Outcome of one named check. `detail` carries the failing instance when
/// `passed` is false, and a short summary otherwise.
#[derive(Clone, Debug)]
pub struct CheckReport {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

impl CheckReport {
    fn pass(name: &'static str, detail: String) -> CheckReport {
        CheckReport {
            name,
            passed: true,
            detail,
        }
    }

    fn fail(name: &'static str, detail: String) -> CheckReport {
        CheckReport {
            name,
            passed: false,
            detail,
        }
    }
}

/// Runs every check with shared seeding. `perturb_gradients` injects a
/// deliberate gradient fault so the gradient check must fail (negative
/// control for the harness itself).
pub fn run_all(trials: usize, seeds_per_variant: usize, seed: u64, perturb_gradients: bool) -> Vec<CheckReport> {
    vec![
        crf_oracle_check(trials, seed),
        gradient_check_variants(seeds_per_variant, seed, perturb_gradients),
        bio_battery(),
        normalization_check(trials, seed),
    ]
}

/// Scores of every tag path of a small instance, in odometer order.
fn all_path_scores(emissions: &Matrix, transitions: &Matrix) -> Result<Vec<f64>> {
    let n = emissions.rows();
    let t = emissions.cols();
    let total = t.pow(n as u32);
    let mut scores = Vec::with_capacity(total);
    let mut path = vec![0usize; n];
    for idx in 0..total {
        let mut rem = idx;
        for slot in path.iter_mut() {
            *slot = rem % t;
            rem /= t;
        }
        scores.push(crf::path_score(emissions, transitions, &path)?);
    }
    Ok(scores)
}

fn random_instance(rng: &mut SeededRng, max_n: usize, max_t: usize) -> (Matrix, Matrix) {
    let n = 1 + rng.below(max_n);
    let t = 1 + rng.below(max_t);
    let emissions = Matrix::from_fn(n, t, |_, _| rng.uniform(-3.0, 3.0));
    let mut transitions = crf::new_transitions(t);
    let start = crf::start_state(t);
    let stop = crf::stop_state(t);
    for j in 0..t {
        transitions.set(start, j, rng.uniform(-2.0, 2.0));
        transitions.set(j, stop, rng.uniform(-2.0, 2.0));
        for k in 0..t {
            transitions.set(k, j, rng.uniform(-2.0, 2.0));
        }
    }
    (emissions, transitions)
}

fn dump_instance(emissions: &Matrix, transitions: &Matrix) -> String {
    format!(
        "emissions {}x{}: {:?}; transitions {}x{}: {:?}",
        emissions.rows(),
        emissions.cols(),
        emissions.data(),
        transitions.rows(),
        transitions.cols(),
        transitions.data()
    )
}

/// Viterbi and log-partition against exhaustive enumeration on seeded
/// random instances with n <= 6 and T <= 5.
pub fn crf_oracle_check(trials: usize, seed: u64) -> CheckReport {
    const NAME: &str = "crf-oracle";
    let mut rng = SeededRng::new(seed).derive(0x0c);
    let mut worst = 0.0f64;
    for trial in 0..trials {
        let (emissions, transitions) = random_instance(&mut rng, 6, 5);
        let outcome = (|| -> Result<f64> {
            let scores = all_path_scores(&emissions, &transitions)?;
            let brute_max = scores.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let brute_lse = log_sum_exp(&scores)?;
            let (_, vit_score) = crf::viterbi(&emissions, &transitions)?;
            let log_z = crf::log_partition(&emissions, &transitions)?;
            Ok((vit_score - brute_max).abs().max((log_z - brute_lse).abs()))
        })();
        match outcome {
            Ok(diff) if diff <= 1e-9 => worst = worst.max(diff),
            Ok(diff) => {
                return CheckReport::fail(
                    NAME,
                    format!(
                        "trial {trial}: disagreement {diff:e} vs brute force; {}",
                        dump_instance(&emissions, &transitions)
                    ),
                )
            }
            Err(e) => {
                return CheckReport::fail(
                    NAME,
                    format!(
                        "trial {trial}: {e}; {}",
                        dump_instance(&emissions, &transitions)
                    ),
                )
            }
        }
    }
    CheckReport::pass(
        NAME,
        format!("{trials} instances, worst disagreement {worst:e}"),
    )
}

fn random_tiny_sequence(rng: &mut SeededRng) -> LabeledSequence {
    const POOL: [&str; 8] = ["alpha", "bravo", "cedar", "delta", "echo", "fig", "gamma", "helix"];
    let tokens: Vec<String> = (0..3).map(|_| POOL[rng.below(POOL.len())].to_owned()).collect();
    let seq = TokenSequence::new(tokens).expect("three tokens");
    let tags: Vec<BioTag> = (0..3)
        .map(|_| BioTag::from_id(rng.below(3)).expect("id in range"))
        .collect();
    LabeledSequence::new(seq, tags).expect("aligned lengths")
}

/// Whole-model analytic gradients vs central finite differences for every
/// variant, on tiny dimensions with dropout off.
pub fn gradient_check_variants(seeds_per_variant: usize, seed: u64, perturb: bool) -> CheckReport {
    const NAME: &str = "gradient-fidelity";
    let root = SeededRng::new(seed);
    let mut worst = 0.0f64;
    for (vi, variant) in Variant::ALL.into_iter().enumerate() {
        let config = ModelConfig {
            word_dim: 8,
            char_dim: 4,
            hidden: 5,
            dropout: 0.0,
            ..ModelConfig::new(variant)
        };
        for trial in 0..seeds_per_variant {
            let mut rng = root.derive((vi * 10_000 + trial) as u64);
            let outcome = (|| -> Result<GradCheckReport> {
                let example = random_tiny_sequence(&mut rng);
                let gold: Vec<usize> = example.tags.iter().map(|t| t.id()).collect();
                let vocab = Vocab::build(std::slice::from_ref(&example), 1, false)?;
                let mut params = ModelParams::new(&config, &vocab, &mut rng)?;

                let (emissions, cache) =
                    forward(&params, &config, &vocab, &example.tokens, Mode::Eval)?;
                let grads = loss_for_variant(
                    variant,
                    &emissions,
                    params.trans.as_ref().map(|t| &t.value),
                    &gold,
                )?;
                backward(&mut params, &cache, &grads.d_emissions)?;
                if let Some(d_a) = &grads.d_transitions {
                    let trans = params.trans.as_mut().expect("CRF variant");
                    for (g, d) in trans.grad.data_mut().iter_mut().zip(d_a.data()) {
                        *g += d;
                    }
                }
                if perturb {
                    params.tensors_mut()[0].grad.data_mut()[0] += 0.01;
                }

                let numeric = finite_diff_grad(
                    &mut params,
                    |p: &ModelParams| {
                        let (em, _) = forward(p, &config, &vocab, &example.tokens, Mode::Eval)?;
                        Ok(loss_for_variant(
                            variant,
                            &em,
                            p.trans.as_ref().map(|t| &t.value),
                            &gold,
                        )?
                        .loss)
                    },
                    1e-5,
                )?;
                Ok(GradCheckReport::compare(&params, &numeric))
            })();
            match outcome {
                Ok(report) if report.max_rel_error <= 1e-4 => {
                    worst = worst.max(report.max_rel_error);
                }
                Ok(report) => {
                    return CheckReport::fail(
                        NAME,
                        format!(
                            "{variant} trial {trial}: rel error {:e} at {}[{}] (analytic {:e}, numeric {:e})",
                            report.max_rel_error,
                            report.worst_tensor,
                            report.worst_index,
                            report.analytic,
                            report.numeric
                        ),
                    )
                }
                Err(e) => {
                    return CheckReport::fail(NAME, format!("{variant} trial {trial}: {e}"))
                }
            }
        }
    }
    CheckReport::pass(
        NAME,
        format!(
            "{} variants x {seeds_per_variant} seeds, worst rel error {worst:e}",
            Variant::ALL.len()
        ),
    )
}

/// Exhaustive encode/decode round trip for every span at every sequence
/// length up to 12, plus fixed tag-to-text decodes.
pub fn bio_battery() -> CheckReport {
    const NAME: &str = "bio-round-trip";
    let outcome = (|| -> Result<std::result::Result<usize, String>> {
        let mut cases = 0usize;
        for len in 1..=12usize {
            let tokens: Vec<String> = (0..len).map(|i| format!("tok{i}")).collect();
            let seq = TokenSequence::new(tokens)?;

            let tags = encode_bio(&seq, None)?;
            if !decode_spans(&seq, &tags)?.is_empty() {
                return Ok(Err(format!("length {len}: empty span decoded non-empty")));
            }
            cases += 1;

            for start in 0..len {
                for end in start + 1..=len {
                    let span = Span::new(start, end, len)?;
                    let tags = encode_bio(&seq, Some(span))?;
                    let decoded = decode_spans(&seq, &tags)?;
                    if decoded.len() != 1 || decoded[0].0 != span {
                        return Ok(Err(format!(
                            "span ({start}, {end}) at length {len} decoded as {:?}",
                            decoded.iter().map(|(s, _)| (s.start, s.end)).collect::<Vec<_>>()
                        )));
                    }
                    cases += 1;
                }
            }
        }

        let worked = TokenSequence::new(
            "The Green Pet Shop Self Cooling Dog Pad"
                .split_whitespace()
                .map(str::to_owned)
                .collect(),
        )?;
        let tags = encode_bio(&worked, Some(Span::new(0, 4, worked.len())?))?;
        use BioTag::{B, I, O};
        if tags != vec![B, I, I, I, O, O, O, O] {
            return Ok(Err(format!("worked example encoded as {tags:?}")));
        }
        cases += 1;

        let fixtures: [(&str, &[BioTag], &str); 3] = [
            ("Woodland Imports Decorative Bottle", &[B, I, O, O], "Woodland Imports"),
            (
                "Home Essentials Glass Canister Set",
                &[B, I, O, O, O],
                "Home Essentials",
            ),
            (
                "Plum Island Silver Sterling Band Ring",
                &[B, I, I, O, O, O],
                "Plum Island Silver",
            ),
        ];
        for (title, tags, expected) in fixtures {
            let seq = TokenSequence::new(title.split_whitespace().map(str::to_owned).collect())?;
            let decoded = decode_spans(&seq, tags)?;
            if decoded.len() != 1 || decoded[0].1 != expected {
                return Ok(Err(format!(
                    "{title:?} decoded as {:?}, expected {expected:?}",
                    decoded.iter().map(|(_, v)| v.as_str()).collect::<Vec<_>>()
                )));
            }
            cases += 1;
        }
        Ok(Ok(cases))
    })();
    match outcome {
        Ok(Ok(cases)) => CheckReport::pass(NAME, format!("{cases} cases, exhaustive to length 12 plus fixtures")),
        Ok(Err(detail)) => CheckReport::fail(NAME, detail),
        Err(e) => CheckReport::fail(NAME, e.to_string()),
    }
}

/// Path probabilities sum to 1, attention rows sum to 1, dropout eval mode
/// is the exact identity.
pub fn normalization_check(trials: usize, seed: u64) -> CheckReport {
    const NAME: &str = "normalization";
    let mut rng = SeededRng::new(seed).derive(0x17);
    let outcome = (|| -> Result<Option<String>> {
        for trial in 0..trials {
            let (emissions, transitions) = random_instance(&mut rng, 4, 3);
            let scores = all_path_scores(&emissions, &transitions)?;
            let log_z = crf::log_partition(&emissions, &transitions)?;
            let total: f64 = scores.iter().map(|s| (s - log_z).exp()).sum();
            if (total - 1.0).abs() > 1e-9 {
                return Ok(Some(format!(
                    "trial {trial}: path probabilities sum to {total}; {}",
                    dump_instance(&emissions, &transitions)
                )));
            }

            let hidden = 1 + rng.below(4);
            let n = 1 + rng.below(5);
            let params = AttentionParams::new(hidden, &mut rng);
            let hs = Matrix::from_fn(n, 2 * hidden, |_, _| rng.uniform(-2.0, 2.0));
            let (_, cache) = attention(&params, &hs)?;
            for i in 0..n {
                let row_sum: f64 = cache.weights.row(i).iter().sum();
                if (row_sum - 1.0).abs() > 1e-9 {
                    return Ok(Some(format!(
                        "trial {trial}: attention row {i} sums to {row_sum}"
                    )));
                }
            }

            let x = Matrix::from_fn(3, 4, |_, _| rng.uniform(-5.0, 5.0));
            let (out, mask) = dropout(&x, 0.5, false, &mut rng)?;
            if mask.is_some() || out.data() != x.data() {
                return Ok(Some(format!("trial {trial}: dropout eval mode is not the identity")));
            }
        }
        Ok(None)
    })();
    match outcome {
        Ok(None) => CheckReport::pass(NAME, format!("{trials} trials")),
        Ok(Some(detail)) => CheckReport::fail(NAME, detail),
        Err(e) => CheckReport::fail(NAME, e.to_string()),
    }
}
