//! Frame-level evaluation: accuracy, truth-normalized confusion matrix,
//! macro precision/recall, and one-vs-rest ROC-AUC.
//!
//! Undefined per-class values (precision for a class never predicted, AUC
//! for a class with no positives or no negatives) are reported as `None`
//! and left out of the macro means.

use std::fmt::Write as _;

use thiserror::Error;

use crate::data::SeverityScore;
use crate::head::Prediction;
use crate::scalar::Scalar;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum MetricsError {
    #[error("length mismatch: {0} scores vs {1} labels")]
    LengthMismatch(usize, usize),

    #[error("no frames to evaluate")]
    EmptyInput,

    #[error("ROC curve needs at least one positive and one negative")]
    DegenerateClasses,

    #[error("non-finite score at position {0}")]
    NonFiniteScore(usize),
}

/// Rows are ground truth, columns are predictions.
#[derive(Debug, Clone, PartialEq)]
pub struct ConfusionMatrix<T> {
    pub counts: [[u64; 4]; 4],
    /// Each supported row divided by its sum; zero-support rows stay zero.
    pub normalized: [[T; 4]; 4],
    pub supported: [bool; 4],
}

impl<T: Scalar> ConfusionMatrix<T> {
    pub fn from_counts(counts: [[u64; 4]; 4]) -> Self {
        let mut normalized = [[T::zero(); 4]; 4];
        let mut supported = [false; 4];
        for r in 0..4 {
            let total: u64 = counts[r].iter().sum();
            if total > 0 {
                supported[r] = true;
                for c in 0..4 {
                    normalized[r][c] = T::of(counts[r][c] as f64 / total as f64);
                }
            }
        }
        ConfusionMatrix {
            counts,
            normalized,
            supported,
        }
    }

    pub fn from_pairs(truth: &[SeverityScore], predicted: &[SeverityScore]) -> Self {
        let mut counts = [[0u64; 4]; 4];
        for (t, p) in truth.iter().zip(predicted) {
            counts[t.index()][p.index()] += 1;
        }
        Self::from_counts(counts)
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().flatten().sum()
    }

    pub fn trace(&self) -> u64 {
        (0..4).map(|i| self.counts[i][i]).sum()
    }

    /// Element-wise sum of counts.
    pub fn merged(&self, other: &Self) -> Self {
        let mut counts = self.counts;
        for r in 0..4 {
            for c in 0..4 {
                counts[r][c] += other.counts[r][c];
            }
        }
        Self::from_counts(counts)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MetricsSummary<T> {
    pub n_frames: usize,
    pub accuracy: T,
    pub precision: [Option<T>; 4],
    pub recall: [Option<T>; 4],
    pub macro_precision: Option<T>,
    pub macro_recall: Option<T>,
    pub auc_per_class: [Option<T>; 4],
    pub macro_auc: Option<T>,
    pub confusion: ConfusionMatrix<T>,
}

fn mean_defined<T: Scalar>(values: &[Option<T>]) -> Option<T> {
    let defined: Vec<T> = values.iter().flatten().copied().collect();
    if defined.is_empty() {
        None
    } else {
        Some(defined.iter().fold(T::zero(), |a, &b| a + b) / T::of_usize(defined.len()))
    }
}

/// Scores `predictions` against `labels`, aligned by position.
pub fn evaluate<T: Scalar>(
    predictions: &[Prediction<T>],
    labels: &[SeverityScore],
) -> Result<MetricsSummary<T>, MetricsError> {
    if predictions.len() != labels.len() {
        return Err(MetricsError::LengthMismatch(predictions.len(), labels.len()));
    }
    if predictions.is_empty() {
        return Err(MetricsError::EmptyInput);
    }
    let predicted: Vec<SeverityScore> = predictions.iter().map(|p| p.predicted).collect();
    let confusion = ConfusionMatrix::<T>::from_pairs(labels, &predicted);
    let n = labels.len();

    let mut precision = [None; 4];
    let mut recall = [None; 4];
    let mut auc_per_class = [None; 4];
    for c in 0..4 {
        let tp = confusion.counts[c][c];
        let predicted_c: u64 = (0..4).map(|r| confusion.counts[r][c]).sum();
        let actual_c: u64 = confusion.counts[c].iter().sum();
        if predicted_c > 0 {
            precision[c] = Some(T::of(tp as f64 / predicted_c as f64));
        }
        if actual_c > 0 {
            recall[c] = Some(T::of(tp as f64 / actual_c as f64));
        }
        let scores: Vec<T> = predictions.iter().map(|p| p.probs[c]).collect();
        let positives: Vec<bool> = labels.iter().map(|l| l.index() == c).collect();
        auc_per_class[c] = roc_auc_binary(&scores, &positives)?.map(T::of);
    }

    Ok(MetricsSummary {
        n_frames: n,
        accuracy: T::of(confusion.trace() as f64 / n as f64),
        macro_precision: mean_defined(&precision),
        macro_recall: mean_defined(&recall),
        macro_auc: mean_defined(&auc_per_class),
        precision,
        recall,
        auc_per_class,
        confusion,
    })
}

fn check_scores<T: Scalar>(scores: &[T], positives: &[bool]) -> Result<(), MetricsError> {
    if scores.len() != positives.len() {
        return Err(MetricsError::LengthMismatch(scores.len(), positives.len()));
    }
    if let Some(i) = scores.iter().position(|s| !s.is_finite()) {
        return Err(MetricsError::NonFiniteScore(i));
    }
    Ok(())
}

/// Indices sorted by descending score, grouped into runs of equal scores.
fn descending_groups<T: Scalar>(scores: &[T]) -> Vec<Vec<usize>> {
    let mut idx: Vec<usize> = (0..scores.len()).collect();
    idx.sort_by(|&a, &b| scores[b].partial_cmp(&scores[a]).expect("finite scores"));
    let mut groups: Vec<Vec<usize>> = Vec::new();
    for i in idx {
        match groups.last_mut() {
            Some(g) if scores[g[0]] == scores[i] => g.push(i),
            _ => groups.push(vec![i]),
        }
    }
    groups
}

/// Mann–Whitney AUC: `(pairs with pos > neg + ½ tied pairs) / (n_pos · n_neg)`.
/// `None` when either class is empty.
pub fn roc_auc_binary<T: Scalar>(scores: &[T], positives: &[bool]) -> Result<Option<f64>, MetricsError> {
    check_scores(scores, positives)?;
    let n_pos = positives.iter().filter(|&&p| p).count() as u64;
    let n_neg = positives.len() as u64 - n_pos;
    if n_pos == 0 || n_neg == 0 {
        return Ok(None);
    }
    // Walk from the lowest score up, counting negatives strictly below.
    let mut greater = 0u64;
    let mut ties = 0u64;
    let mut neg_below = 0u64;
    for group in descending_groups(scores).iter().rev() {
        let pos = group.iter().filter(|&&i| positives[i]).count() as u64;
        let neg = group.len() as u64 - pos;
        greater += pos * neg_below;
        ties += pos * neg;
        neg_below += neg;
    }
    Ok(Some(
        (greater as f64 + 0.5 * ties as f64) / (n_pos as f64 * n_neg as f64),
    ))
}

/// ROC points `(fpr, tpr)` from `(0, 0)` to `(1, 1)`, one per distinct score
/// threshold, descending.
pub fn roc_curve<T: Scalar>(scores: &[T], positives: &[bool]) -> Result<Vec<(f64, f64)>, MetricsError> {
    check_scores(scores, positives)?;
    let n_pos = positives.iter().filter(|&&p| p).count();
    let n_neg = positives.len() - n_pos;
    if n_pos == 0 || n_neg == 0 {
        return Err(MetricsError::DegenerateClasses);
    }
    let mut points = vec![(0.0, 0.0)];
    let (mut tp, mut fp) = (0usize, 0usize);
    for group in descending_groups(scores) {
        for i in group {
            if positives[i] {
                tp += 1;
            } else {
                fp += 1;
            }
        }
        points.push((fp as f64 / n_neg as f64, tp as f64 / n_pos as f64));
    }
    Ok(points)
}

/// Area under a piecewise-linear curve by the trapezoid rule.
pub fn trapezoid_area(points: &[(f64, f64)]) -> f64 {
    points
        .windows(2)
        .map(|w| (w[1].0 - w[0].0) * (w[0].1 + w[1].1) / 2.0)
        .sum()
}

fn fmt_opt<T: Scalar>(v: Option<T>) -> String {
    v.map(|x| x.to_string()).unwrap_or_else(|| "undefined".into())
}

impl<T: Scalar> MetricsSummary<T> {
    /// `key=value` lines followed by the 4-line normalized confusion block.
    pub fn to_kv(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "n_frames={}", self.n_frames);
        let _ = writeln!(out, "accuracy={}", self.accuracy);
        let _ = writeln!(out, "macro_precision={}", fmt_opt(self.macro_precision));
        let _ = writeln!(out, "macro_recall={}", fmt_opt(self.macro_recall));
        let _ = writeln!(out, "macro_auc={}", fmt_opt(self.macro_auc));
        for c in 0..4 {
            let _ = writeln!(out, "precision_{c}={}", fmt_opt(self.precision[c]));
            let _ = writeln!(out, "recall_{c}={}", fmt_opt(self.recall[c]));
            let _ = writeln!(out, "auc_{c}={}", fmt_opt(self.auc_per_class[c]));
        }
        out.push_str(&confusion_block(&self.confusion));
        out
    }
}

pub fn confusion_block<T: Scalar>(cm: &ConfusionMatrix<T>) -> String {
    let mut out = String::from("# confusion matrix, rows = truth, columns = predicted, normalized by truth\n");
    for row in &cm.normalized {
        let cells: Vec<String> = row.iter().map(|v| v.to_string()).collect();
        out.push_str(&cells.join(","));
        out.push('\n');
    }
    out
}

pub fn confusion_counts_csv<T: Scalar>(cm: &ConfusionMatrix<T>) -> String {
    let mut out = String::from("truth,pred_0,pred_1,pred_2,pred_3\n");
    for (r, row) in cm.counts.iter().enumerate() {
        let _ = writeln!(out, "{r},{},{},{},{}", row[0], row[1], row[2], row[3]);
    }
    out
}

pub fn roc_csv(points: &[(f64, f64)]) -> String {
    let mut out = String::from("fpr,tpr\n");
    for (x, y) in points {
        let _ = writeln!(out, "{x},{y}");
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn s(i: usize) -> SeverityScore {
        SeverityScore::from_index(i)
    }

    fn one_hot(id: usize, class: usize) -> Prediction<f64> {
        let mut probs = [0.0; 4];
        probs[class] = 1.0;
        Prediction::from_probs(format!("f{id}"), probs)
    }

    #[test]
    fn perfect_classifier() {
        let labels: Vec<_> = (0..12).map(|i| s(i % 4)).collect();
        let preds: Vec<_> = (0..12)
            .map(|i| {
                let mut p = [0.02; 4];
                p[i % 4] = 0.94;
                Prediction::from_probs(format!("f{i}"), p)
            })
            .collect();
        let m = evaluate(&preds, &labels).unwrap();
        assert_eq!(m.accuracy, 1.0);
        assert_eq!(m.macro_precision, Some(1.0));
        assert_eq!(m.macro_recall, Some(1.0));
        assert!(m.auc_per_class.iter().all(|a| *a == Some(1.0)));
        for r in 0..4 {
            for c in 0..4 {
                assert_eq!(m.confusion.normalized[r][c], if r == c { 1.0 } else { 0.0 });
            }
        }
    }

    #[test]
    fn hand_computed_macro_values() {
        let labels = [s(0), s(1), s(2), s(3)];
        let preds: Vec<_> = [0, 1, 2, 2].iter().enumerate().map(|(i, &c)| one_hot(i, c)).collect();
        let m = evaluate(&preds, &labels).unwrap();
        assert_eq!(m.accuracy, 0.75);
        assert_eq!(m.recall, [Some(1.0), Some(1.0), Some(1.0), Some(0.0)]);
        assert_eq!(m.macro_recall, Some(0.75));
        assert_eq!(m.precision, [Some(1.0), Some(1.0), Some(0.5), None]);
        assert!((m.macro_precision.unwrap() - 2.5 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn evaluate_errors() {
        assert_eq!(evaluate::<f64>(&[], &[]), Err(MetricsError::EmptyInput));
        assert_eq!(
            evaluate(&[one_hot(0, 0)], &[]),
            Err(MetricsError::LengthMismatch(1, 0))
        );
    }

    #[test]
    fn auc_examples() {
        let t = [true, true, false, false];
        assert_eq!(roc_auc_binary(&[0.9, 0.8, 0.3, 0.1], &t).unwrap(), Some(1.0));
        assert_eq!(roc_auc_binary(&[0.5; 4], &t).unwrap(), Some(0.5));
        let scores = [0.8, 0.4, 0.6, 0.2];
        assert_eq!(roc_auc_binary(&scores, &[true, false, true, false]).unwrap(), Some(1.0));
        assert_eq!(roc_auc_binary(&scores, &[false, true, false, true]).unwrap(), Some(0.0));
        assert_eq!(roc_auc_binary(&[0.1, 0.2], &[true, true]).unwrap(), None);
        assert_eq!(
            roc_auc_binary(&[0.1], &[true, false]),
            Err(MetricsError::LengthMismatch(1, 2))
        );
        assert_eq!(
            roc_auc_binary(&[f64::NAN, 0.1], &[true, false]),
            Err(MetricsError::NonFiniteScore(0))
        );
    }

    #[test]
    fn curve_examples() {
        let pts = roc_curve(&[0.9, 0.1], &[true, false]).unwrap();
        assert_eq!(pts, vec![(0.0, 0.0), (0.0, 1.0), (1.0, 1.0)]);
        let pts = roc_curve(&[0.9, 0.8, 0.3, 0.1], &[true, true, false, false]).unwrap();
        assert!(pts.contains(&(0.0, 1.0)));
        assert_eq!(roc_curve(&[0.1, 0.2], &[false, false]), Err(MetricsError::DegenerateClasses));
    }

    #[test]
    fn merged_confusion() {
        let a = ConfusionMatrix::<f64>::from_pairs(&[s(0), s(1)], &[s(0), s(0)]);
        let b = ConfusionMatrix::<f64>::from_pairs(&[s(1)], &[s(1)]);
        let m = a.merged(&b);
        assert_eq!(m.counts[1], [1, 1, 0, 0]);
        assert_eq!(m.normalized[1], [0.5, 0.5, 0.0, 0.0]);
        assert!(!m.supported[2]);
    }

    #[test]
    fn generic_over_f32_scores() {
        let auc = roc_auc_binary(&[0.9f32, 0.1, 0.5], &[true, false, false]).unwrap();
        assert_eq!(auc, Some(1.0));
    }

    proptest! {
        #[test]
        fn increasing_transform_invariance(
            raw in proptest::collection::vec((0u8..6, any::<bool>()), 2..30)
        ) {
            let scores: Vec<f64> = raw.iter().map(|(v, _)| *v as f64 / 5.0).collect();
            let pos: Vec<bool> = raw.iter().map(|(_, p)| *p).collect();
            let transformed: Vec<f64> = scores.iter().map(|v| (3.0 * v).exp() - 7.0).collect();
            prop_assert_eq!(roc_auc_binary(&scores, &pos).unwrap(), roc_auc_binary(&transformed, &pos).unwrap());
        }

        #[test]
        fn complement_symmetry(
            raw in proptest::collection::vec((0u8..5, any::<bool>()), 2..30)
        ) {
            let scores: Vec<f64> = raw.iter().map(|(v, _)| *v as f64).collect();
            let pos: Vec<bool> = raw.iter().map(|(_, p)| *p).collect();
            let neg: Vec<bool> = pos.iter().map(|p| !p).collect();
            if let (Some(a), Some(b)) = (roc_auc_binary(&scores, &pos).unwrap(), roc_auc_binary(&scores, &neg).unwrap()) {
                prop_assert_eq!(a + b, 1.0);
            }
        }

        #[test]
        fn curve_is_monotone(
            raw in proptest::collection::vec((0u8..8, any::<bool>()), 2..40)
        ) {
            let scores: Vec<f64> = raw.iter().map(|(v, _)| *v as f64).collect();
            let pos: Vec<bool> = raw.iter().map(|(_, p)| *p).collect();
            if let Ok(pts) = roc_curve(&scores, &pos) {
                prop_assert_eq!(pts[0], (0.0, 0.0));
                prop_assert_eq!(*pts.last().unwrap(), (1.0, 1.0));
                for w in pts.windows(2) {
                    prop_assert!(w[1].0 >= w[0].0 && w[1].1 >= w[0].1);
                }
            }
        }

        #[test]
        fn confusion_permutation_invariant(
            pairs in proptest::collection::vec((0usize..4, 0usize..4), 1..40),
            seed in any::<u64>()
        ) {
            let truth: Vec<_> = pairs.iter().map(|p| s(p.0)).collect();
            let pred: Vec<_> = pairs.iter().map(|p| s(p.1)).collect();
            let a = ConfusionMatrix::<f64>::from_pairs(&truth, &pred);
            let mut order: Vec<usize> = (0..pairs.len()).collect();
            crate::rng::SeededRng::new(seed).shuffle(&mut order);
            let t2: Vec<_> = order.iter().map(|&i| truth[i]).collect();
            let p2: Vec<_> = order.iter().map(|&i| pred[i]).collect();
            prop_assert_eq!(a.counts, ConfusionMatrix::<f64>::from_pairs(&t2, &p2).counts);
            prop_assert_eq!(a.total(), pairs.len() as u64);
        }
    }
}
