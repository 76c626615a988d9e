//! Span-level precision/recall/F1 and token-level label accuracy.
//!
//! Span scoring is exact-match: a predicted span counts only when an
//! identical (start, end) range exists in the same sequence's gold spans;
//! partial overlap scores nothing. Label accuracy is micro-averaged over all
//! tokens, with a secondary figure that excludes tokens whose gold tag is O
//! (the O class dominates real titles and can mask span mistakes).

use std::collections::HashSet;

use crate::corpus::{BioTag, LabeledSequence, Span};
use crate::error::{Error, Result};

/// Metrics plus the raw counts they were computed from. A zero denominator
/// (no predicted spans, no gold spans, or no scorable tokens) yields metric 0
/// and sets `degenerate` instead of poisoning aggregates with NaN.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct EvalReport {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub label_accuracy: f64,
    /// Accuracy over tokens whose gold tag is not O.
    pub non_o_accuracy: f64,
    pub true_positives: usize,
    pub predicted_total: usize,
    pub gold_total: usize,
    pub tokens_total: usize,
    pub tokens_correct: usize,
    pub non_o_total: usize,
    pub non_o_correct: usize,
    pub degenerate: bool,
}

fn ratio(num: usize, den: usize, degenerate: &mut bool) -> f64 {
    if den == 0 {
        *degenerate = true;
        0.0
    } else {
        num as f64 / den as f64
    }
}

fn harmonic(p: f64, r: f64) -> f64 {
    if p + r > 0.0 {
        2.0 * p * r / (p + r)
    } else {
        0.0
    }
}

/// Exact-span precision, recall, and F1 over an aligned corpus of span sets.
pub fn span_prf(gold: &[Vec<Span>], pred: &[Vec<Span>]) -> Result<(f64, f64, f64)> {
    let (p, r, f1, ..) = span_counts(gold, pred)?;
    Ok((p, r, f1))
}

fn span_counts(
    gold: &[Vec<Span>],
    pred: &[Vec<Span>],
) -> Result<(f64, f64, f64, usize, usize, usize, bool)> {
    if gold.len() != pred.len() {
        return Err(Error::dimension(
            "span_prf",
            format!("{} gold sequences vs {} predicted", gold.len(), pred.len()),
        ));
    }
    let mut tp = 0;
    let mut pred_total = 0;
    let mut gold_total = 0;
    for (g, p) in gold.iter().zip(pred) {
        gold_total += g.len();
        pred_total += p.len();
        let gold_set: HashSet<(usize, usize)> = g.iter().map(|s| (s.start, s.end)).collect();
        tp += p
            .iter()
            .filter(|s| gold_set.contains(&(s.start, s.end)))
            .count();
    }
    let mut degenerate = false;
    let precision = ratio(tp, pred_total, &mut degenerate);
    let recall = ratio(tp, gold_total, &mut degenerate);
    Ok((
        precision,
        recall,
        harmonic(precision, recall),
        tp,
        pred_total,
        gold_total,
        degenerate,
    ))
}

/// Micro-averaged fraction of correctly tagged tokens.
pub fn label_accuracy(gold: &[Vec<BioTag>], pred: &[Vec<BioTag>]) -> Result<f64> {
    let (correct, total, ..) = token_counts(gold, pred)?;
    let mut degenerate = false;
    Ok(ratio(correct, total, &mut degenerate))
}

fn token_counts(
    gold: &[Vec<BioTag>],
    pred: &[Vec<BioTag>],
) -> Result<(usize, usize, usize, usize)> {
    if gold.len() != pred.len() {
        return Err(Error::dimension(
            "label_accuracy",
            format!("{} gold sequences vs {} predicted", gold.len(), pred.len()),
        ));
    }
    let mut correct = 0;
    let mut total = 0;
    let mut non_o_correct = 0;
    let mut non_o_total = 0;
    for (i, (g, p)) in gold.iter().zip(pred).enumerate() {
        if g.len() != p.len() {
            return Err(Error::dimension(
                "label_accuracy",
                format!("sequence {i}: {} gold tags vs {} predicted", g.len(), p.len()),
            ));
        }
        for (&gt, &pt) in g.iter().zip(p) {
            total += 1;
            let hit = gt == pt;
            correct += usize::from(hit);
            if gt != BioTag::O {
                non_o_total += 1;
                non_o_correct += usize::from(hit);
            }
        }
    }
    Ok((correct, total, non_o_correct, non_o_total))
}

/// Full report for predicted tag sequences against their gold sequences.
/// Predicted spans are decoded from the predicted tags with the same rules
/// used for gold spans.
pub fn report_from_tags(gold: &[LabeledSequence], pred: &[Vec<BioTag>]) -> Result<EvalReport> {
    if gold.len() != pred.len() {
        return Err(Error::dimension(
            "report_from_tags",
            format!("{} gold sequences vs {} predicted", gold.len(), pred.len()),
        ));
    }
    let gold_spans: Vec<Vec<Span>> = gold.iter().map(LabeledSequence::gold_spans).collect();
    let mut pred_spans = Vec::with_capacity(pred.len());
    for (seq, tags) in gold.iter().zip(pred) {
        let decoded = crate::corpus::decode_spans(&seq.tokens, tags)?;
        pred_spans.push(decoded.into_iter().map(|(span, _)| span).collect());
    }
    let gold_tags: Vec<Vec<BioTag>> = gold.iter().map(|s| s.tags.clone()).collect();

    let (precision, recall, f1, tp, pred_total, gold_total, mut degenerate) =
        span_counts(&gold_spans, &pred_spans)?;
    let (tokens_correct, tokens_total, non_o_correct, non_o_total) =
        token_counts(&gold_tags, pred)?;
    let label_accuracy = ratio(tokens_correct, tokens_total, &mut degenerate);
    let non_o_accuracy = ratio(non_o_correct, non_o_total, &mut degenerate);

    Ok(EvalReport {
        precision,
        recall,
        f1,
        label_accuracy,
        non_o_accuracy,
        true_positives: tp,
        predicted_total: pred_total,
        gold_total,
        tokens_total,
        tokens_correct,
        non_o_total,
        non_o_correct,
        degenerate,
    })
}

/// Unweighted mean of the fraction metrics; counts are summed so totals can
/// be recomputed either way.
pub fn aggregate(reports: &[EvalReport]) -> Result<EvalReport> {
    if reports.is_empty() {
        return Err(Error::EmptyInput("reports to aggregate"));
    }
    let k = reports.len() as f64;
    let mean = |f: fn(&EvalReport) -> f64| reports.iter().map(f).sum::<f64>() / k;
    Ok(EvalReport {
        precision: mean(|r| r.precision),
        recall: mean(|r| r.recall),
        f1: mean(|r| r.f1),
        label_accuracy: mean(|r| r.label_accuracy),
        non_o_accuracy: mean(|r| r.non_o_accuracy),
        true_positives: reports.iter().map(|r| r.true_positives).sum(),
        predicted_total: reports.iter().map(|r| r.predicted_total).sum(),
        gold_total: reports.iter().map(|r| r.gold_total).sum(),
        tokens_total: reports.iter().map(|r| r.tokens_total).sum(),
        tokens_correct: reports.iter().map(|r| r.tokens_correct).sum(),
        non_o_total: reports.iter().map(|r| r.non_o_total).sum(),
        non_o_correct: reports.iter().map(|r| r.non_o_correct).sum(),
        degenerate: reports.iter().any(|r| r.degenerate),
    })
}

fn pct(x: f64) -> String {
    format!("{:.2}", x * 100.0)
}

fn frac4(x: f64) -> String {
    format!("{x:.4}")
}

/// Multi-line human-readable report. Percentages carry 2 decimals, F1 4.
pub fn format_report(r: &EvalReport) -> String {
    let mut out = String::new();
    out.push_str(&format!("precision        {}\n", pct(r.precision)));
    out.push_str(&format!("recall           {}\n", pct(r.recall)));
    out.push_str(&format!("f1               {}\n", frac4(r.f1)));
    out.push_str(&format!("label accuracy   {}\n", pct(r.label_accuracy)));
    out.push_str(&format!("non-O accuracy   {}\n", pct(r.non_o_accuracy)));
    out.push_str(&format!(
        "spans            {} gold, {} predicted, {} matched\n",
        r.gold_total, r.predicted_total, r.true_positives
    ));
    out.push_str(&format!(
        "tokens           {} of {} correct\n",
        r.tokens_correct, r.tokens_total
    ));
    if r.degenerate {
        out.push_str("note             a metric denominator was zero\n");
    }
    out
}

/// Single TSV line: `variant<TAB>precision<TAB>recall<TAB>f1<TAB>label_accuracy`.
pub fn format_tsv(variant: &str, r: &EvalReport) -> String {
    format!(
        "{variant}\t{}\t{}\t{}\t{}",
        pct(r.precision),
        pct(r.recall),
        frac4(r.f1),
        pct(r.label_accuracy)
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::TokenSequence;

    fn spans(pairs: &[(usize, usize)]) -> Vec<Span> {
        pairs.iter().map(|&(s, e)| Span { start: s, end: e }).collect()
    }

    fn close(a: f64, b: f64) -> bool {
        (a - b).abs() <= 1e-12
    }

    #[test]
    fn identical_span_sets_score_one() {
        let corpus: Vec<Vec<Span>> = (0..5)
            .map(|i| spans(&[(i, i + 1), (i + 2, i + 4)]))
            .collect();
        let (p, r, f1) = span_prf(&corpus, &corpus).unwrap();
        assert_eq!((p, r, f1), (1.0, 1.0, 1.0));
    }

    #[test]
    fn partial_overlap_scores_nothing() {
        let gold = vec![spans(&[(0, 2)])];
        let pred = vec![spans(&[(0, 1)])];
        let (p, r, f1) = span_prf(&gold, &pred).unwrap();
        assert_eq!((p, r, f1), (0.0, 0.0, 0.0));
    }

    #[test]
    fn one_of_two_matches_scores_half() {
        let gold = vec![spans(&[(0, 2), (4, 5)])];
        let pred = vec![spans(&[(0, 2), (3, 5)])];
        let (p, r, f1) = span_prf(&gold, &pred).unwrap();
        assert!(close(p, 0.5) && close(r, 0.5) && close(f1, 0.5));
    }

    #[test]
    fn f1_is_the_harmonic_mean() {
        let gold = vec![spans(&[(0, 1), (2, 3), (4, 5), (6, 7)])];
        let pred = vec![spans(&[(0, 1), (2, 3)])];
        let (p, r, f1) = span_prf(&gold, &pred).unwrap();
        assert!(close(f1, 2.0 * p * r / (p + r)));
    }

    #[test]
    fn corpus_length_mismatch_is_rejected() {
        let gold = vec![spans(&[(0, 1)])];
        assert!(span_prf(&gold, &[]).is_err());
    }

    #[test]
    fn identical_tags_have_full_accuracy() {
        use BioTag::{B, I, O};
        let tags = vec![vec![B, I, O], vec![O, O]];
        assert_eq!(label_accuracy(&tags, &tags).unwrap(), 1.0);
    }

    #[test]
    fn one_wrong_token_of_eight() {
        use BioTag::{B, I, O};
        let gold = vec![vec![B, I, I, I, O, O, O, O]];
        let mut pred = gold.clone();
        pred[0][3] = O;
        assert!(close(label_accuracy(&gold, &pred).unwrap(), 0.875));
    }

    #[test]
    fn all_o_prediction_on_the_worked_example() {
        use BioTag::{B, I, O};
        let gold = vec![vec![B, I, I, I, O, O, O, O]];
        let pred = vec![vec![O; 8]];
        assert!(close(label_accuracy(&gold, &pred).unwrap(), 0.5));
    }

    fn labeled(tokens: &str, tags: &[BioTag]) -> LabeledSequence {
        let toks = TokenSequence::new(tokens.split_whitespace().map(str::to_owned).collect())
            .unwrap();
        LabeledSequence::new(toks, tags.to_vec()).unwrap()
    }

    #[test]
    fn full_report_on_the_worked_example() {
        use BioTag::{B, I, O};
        let gold = vec![labeled(
            "The Green Pet Shop Self Cooling Dog Pad",
            &[B, I, I, I, O, O, O, O],
        )];
        let pred = vec![vec![B, I, I, I, O, O, O, O]];
        let r = report_from_tags(&gold, &pred).unwrap();
        assert_eq!((r.precision, r.recall, r.f1), (1.0, 1.0, 1.0));
        assert_eq!(r.label_accuracy, 1.0);
        assert_eq!(r.non_o_accuracy, 1.0);
        assert_eq!((r.true_positives, r.gold_total, r.predicted_total), (1, 1, 1));
        assert!(!r.degenerate);

        let all_o = vec![vec![O; 8]];
        let r = report_from_tags(&gold, &all_o).unwrap();
        assert!(close(r.label_accuracy, 0.5));
        assert_eq!(r.non_o_accuracy, 0.0);
        assert_eq!(r.f1, 0.0);
        assert!(r.degenerate, "no predicted spans means a zero denominator");
    }

    #[test]
    fn zero_denominators_flag_the_report() {
        use BioTag::O;
        let gold = vec![labeled("plain filler words", &[O, O, O])];
        let pred = vec![vec![O, O, O]];
        let r = report_from_tags(&gold, &pred).unwrap();
        assert!(r.degenerate);
        assert_eq!((r.precision, r.recall, r.f1), (0.0, 0.0, 0.0));
        assert_eq!(r.label_accuracy, 1.0);
    }

    #[test]
    fn aggregate_of_one_is_itself() {
        use BioTag::{B, O};
        let gold = vec![labeled("Acme anvil", &[B, O])];
        let pred = vec![vec![B, O]];
        let r = report_from_tags(&gold, &pred).unwrap();
        let agg = aggregate(std::slice::from_ref(&r)).unwrap();
        assert_eq!(agg, r);
    }

    #[test]
    fn aggregate_means_fractions_and_sums_counts() {
        let a = EvalReport {
            precision: 0.8,
            recall: 0.9,
            f1: 0.9,
            label_accuracy: 0.95,
            true_positives: 8,
            predicted_total: 10,
            gold_total: 9,
            tokens_total: 100,
            tokens_correct: 95,
            ..EvalReport::default()
        };
        let b = EvalReport {
            precision: 1.0,
            recall: 1.0,
            f1: 1.0,
            label_accuracy: 1.0,
            true_positives: 5,
            predicted_total: 5,
            gold_total: 5,
            tokens_total: 50,
            tokens_correct: 50,
            ..EvalReport::default()
        };
        let agg = aggregate(&[a, b]).unwrap();
        assert!(close(agg.precision, 0.9));
        assert!(close(agg.f1, 0.95));
        assert_eq!(agg.true_positives, 13);
        assert_eq!(agg.tokens_total, 150);
    }

    #[test]
    fn aggregate_of_identical_copies_is_idempotent_on_fractions() {
        let r = EvalReport {
            precision: 0.7,
            recall: 0.6,
            f1: 0.646,
            label_accuracy: 0.9,
            ..EvalReport::default()
        };
        let agg = aggregate(&[r.clone(), r.clone(), r.clone()]).unwrap();
        assert!(close(agg.precision, r.precision));
        assert!(close(agg.f1, r.f1));
    }

    #[test]
    fn aggregate_rejects_empty_input() {
        assert!(aggregate(&[]).is_err());
    }

    #[test]
    fn formatting_matches_the_published_style() {
        let r = EvalReport {
            precision: 0.9794,
            recall: 0.9412,
            f1: 0.9599,
            label_accuracy: 0.9944,
            ..EvalReport::default()
        };
        let text = format_report(&r);
        for needle in ["97.94", "94.12", "0.9599", "99.44"] {
            assert!(text.contains(needle), "missing {needle} in:\n{text}");
        }
        let tsv = format_tsv("bilstm-crf", &r);
        assert_eq!(tsv, "bilstm-crf\t97.94\t94.12\t0.9599\t99.44");
        assert_eq!(tsv.split('\t').count(), 5);
    }

    #[test]
    fn zero_report_formats_as_zeros() {
        let text = format_report(&EvalReport::default());
        assert!(text.contains("0.00"));
        assert!(text.contains("0.0000"));
    }

    #[test]
    fn permuting_the_corpus_changes_nothing() {
        use BioTag::{B, I, O};
        let a = labeled("Acme anvil heavy", &[B, O, O]);
        let b = labeled("Plum Island Silver ring", &[B, I, I, O]);
        let pred_a = vec![B, O, O];
        let pred_b = vec![B, I, O, O];
        let fwd = report_from_tags(&[a.clone(), b.clone()], &[pred_a.clone(), pred_b.clone()])
            .unwrap();
        let rev = report_from_tags(&[b, a], &[pred_b, pred_a]).unwrap();
        assert_eq!(fwd, rev);
    }
}
