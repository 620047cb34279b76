//! Evaluation metrics: macro one-vs-rest AUC (Mann-Whitney rank statistic
//! with 0.5 credit per tie), per-class precision/recall, macro recall,
//! accuracy, and the confusion matrix.

use crate::data::{sequential_batches, Dataset};
use crate::error::{Error, Result};
use crate::model::Model;
use crate::tensor::Tensor;

#[derive(Debug, Clone, PartialEq)]
pub struct MetricsReport {
    pub epoch: usize,
    pub accuracy: f64,
    pub macro_recall: f64,
    pub macro_auc: f64,
    pub per_class_precision: Vec<f64>,
    pub per_class_recall: Vec<f64>,
    /// confusion[i][j] counts samples of true class i predicted as class j.
    pub confusion: Vec<Vec<usize>>,
    /// Classes skipped by the AUC (no positives or no negatives present).
    pub auc_excluded_classes: Vec<usize>,
}

impl MetricsReport {
    pub fn render(&self, class_names: &[String]) -> String {
        let mut out = format!(
            "accuracy     {:.4}\nmacro recall {:.4}\nmacro auc    {:.4}\n",
            self.accuracy, self.macro_recall, self.macro_auc
        );
        out.push_str("class                precision  recall\n");
        for (i, name) in class_names.iter().enumerate() {
            out.push_str(&format!(
                "{name:<20} {:>9.4} {:>7.4}\n",
                self.per_class_precision[i], self.per_class_recall[i]
            ));
        }
        out.push_str("confusion (rows = true, cols = predicted):\n");
        for row in &self.confusion {
            let cells: Vec<String> = row.iter().map(|c| format!("{c:>6}")).collect();
            out.push_str(&format!("  {}\n", cells.join(" ")));
        }
        if !self.auc_excluded_classes.is_empty() {
            let names: Vec<&str> = self
                .auc_excluded_classes
                .iter()
                .map(|&i| class_names[i].as_str())
                .collect();
            out.push_str(&format!(
                "auc excluded degenerate classes: {}\n",
                names.join(", ")
            ));
        }
        out
    }
}

fn check_scores(scores: &Tensor, labels: &[usize]) -> Result<(usize, usize)> {
    if scores.rank() != 2 {
        return Err(Error::ShapeMismatch(format!(
            "scores must be 2-D [n, classes], got {:?}",
            scores.shape()
        )));
    }
    let (n, classes) = (scores.dim(0), scores.dim(1));
    if n < 2 {
        return Err(Error::UndefinedMetric(format!(
            "AUC needs at least 2 samples, got {n}"
        )));
    }
    if labels.len() != n {
        return Err(Error::ShapeMismatch(format!(
            "{} labels for {n} score rows",
            labels.len()
        )));
    }
    if let Some(&bad) = labels.iter().find(|&&l| l >= classes) {
        return Err(Error::IndexOutOfRange(format!(
            "label {bad} out of range for {classes} classes"
        )));
    }
    Ok((n, classes))
}

/// Macro one-vs-rest AUC plus the list of classes that were excluded because
/// they had no positives or no negatives.
pub fn auc_macro_with_exclusions(scores: &Tensor, labels: &[usize]) -> Result<(f64, Vec<usize>)> {
    let (n, classes) = check_scores(scores, labels)?;
    let mut total = 0.0;
    let mut included = 0usize;
    let mut excluded = Vec::new();
    for class in 0..classes {
        let n_pos = labels.iter().filter(|&&l| l == class).count();
        let n_neg = n - n_pos;
        if n_pos == 0 || n_neg == 0 {
            excluded.push(class);
            continue;
        }
        // Mann-Whitney U from mid-ranks: ties get the average rank, which is
        // exactly the 0.5-per-tie pairwise credit.
        let mut entries: Vec<(f64, bool)> = (0..n)
            .map(|i| (scores.data()[i * classes + class], labels[i] == class))
            .collect();
        entries.sort_by(|a, b| a.0.total_cmp(&b.0));
        let mut rank_sum_pos = 0.0;
        let mut i = 0;
        while i < n {
            let mut j = i;
            while j + 1 < n && entries[j + 1].0 == entries[i].0 {
                j += 1;
            }
            // 1-based ranks i+1 ..= j+1 share the mid-rank.
            let mid_rank = (i + 1 + j + 1) as f64 / 2.0;
            for entry in &entries[i..=j] {
                if entry.1 {
                    rank_sum_pos += mid_rank;
                }
            }
            i = j + 1;
        }
        let u = rank_sum_pos - (n_pos * (n_pos + 1)) as f64 / 2.0;
        total += u / (n_pos as f64 * n_neg as f64);
        included += 1;
    }
    if included == 0 {
        return Err(Error::UndefinedMetric(
            "every class is degenerate (no positives or no negatives)".into(),
        ));
    }
    Ok((total / included as f64, excluded))
}

/// Macro one-vs-rest AUC over the non-degenerate classes.
pub fn auc_macro(scores: &Tensor, labels: &[usize]) -> Result<f64> {
    auc_macro_with_exclusions(scores, labels).map(|(v, _)| v)
}

/// `confusion[i][j]` counts samples with true class i predicted as class j.
pub fn confusion(predicted: &[usize], truth: &[usize], num_classes: usize) -> Result<Vec<Vec<usize>>> {
    if predicted.len() != truth.len() {
        return Err(Error::ShapeMismatch(format!(
            "{} predictions for {} true labels",
            predicted.len(),
            truth.len()
        )));
    }
    if truth.is_empty() {
        return Err(Error::UndefinedMetric("no samples to evaluate".into()));
    }
    let mut matrix = vec![vec![0usize; num_classes]; num_classes];
    for (&p, &t) in predicted.iter().zip(truth) {
        if p >= num_classes || t >= num_classes {
            return Err(Error::IndexOutOfRange(format!(
                "label ({t} -> {p}) out of range for {num_classes} classes"
            )));
        }
        matrix[t][p] += 1;
    }
    Ok(matrix)
}

/// Unweighted mean of per-class recall over classes with at least one true
/// sample.
pub fn recall_macro(predicted: &[usize], truth: &[usize], num_classes: usize) -> Result<f64> {
    let matrix = confusion(predicted, truth, num_classes)?;
    let recalls = per_class_recall(&matrix);
    let present: Vec<f64> = matrix
        .iter()
        .zip(&recalls)
        .filter(|(row, _)| row.iter().sum::<usize>() > 0)
        .map(|(_, &r)| r)
        .collect();
    Ok(present.iter().sum::<f64>() / present.len() as f64)
}

fn per_class_recall(matrix: &[Vec<usize>]) -> Vec<f64> {
    matrix
        .iter()
        .enumerate()
        .map(|(i, row)| {
            let total: usize = row.iter().sum();
            if total == 0 {
                0.0
            } else {
                row[i] as f64 / total as f64
            }
        })
        .collect()
}

fn per_class_precision(matrix: &[Vec<usize>]) -> Vec<f64> {
    let classes = matrix.len();
    (0..classes)
        .map(|j| {
            let predicted: usize = matrix.iter().map(|row| row[j]).sum();
            if predicted == 0 {
                0.0
            } else {
                matrix[j][j] as f64 / predicted as f64
            }
        })
        .collect()
}

/// Argmax with ties broken to the lowest class index.
pub fn predict_labels(probs: &Tensor) -> Vec<usize> {
    let classes = probs.dim(1);
    probs
        .data()
        .chunks_exact(classes)
        .map(|row| {
            let mut best = 0;
            for (j, &v) in row.iter().enumerate().skip(1) {
                if v > row[best] {
                    best = j;
                }
            }
            best
        })
        .collect()
}

/// Runs the model over the dataset in stored order and assembles the full
/// metrics report (epoch field left at 0 for the caller to fill).
pub fn evaluate(model: &Model, dataset: &Dataset, batch_size: usize) -> Result<MetricsReport> {
    if dataset.num_classes() != model.num_classes() {
        return Err(Error::Config(format!(
            "dataset has {} classes but model expects {}",
            dataset.num_classes(),
            model.num_classes()
        )));
    }
    let classes = model.num_classes();
    let mut scores = Vec::with_capacity(dataset.len() * classes);
    for batch in sequential_batches(dataset, batch_size)? {
        let (probs, _) = model.forward(&batch.images)?;
        scores.extend_from_slice(probs.data());
    }
    let scores = Tensor::from_raw(vec![dataset.len(), classes], scores);
    let truth = dataset.labels();
    let predicted = predict_labels(&scores);
    let matrix = confusion(&predicted, &truth, classes)?;
    let correct: usize = (0..classes).map(|i| matrix[i][i]).sum();
    let (macro_auc, auc_excluded_classes) = auc_macro_with_exclusions(&scores, &truth)?;
    Ok(MetricsReport {
        epoch: 0,
        accuracy: correct as f64 / truth.len() as f64,
        macro_recall: recall_macro(&predicted, &truth, classes)?,
        macro_auc,
        per_class_precision: per_class_precision(&matrix),
        per_class_recall: per_class_recall(&matrix),
        confusion: matrix,
        auc_excluded_classes,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::Rng;

    /// Independent O(n^2) oracle: count concordant pairs, 0.5 per tie.
    fn auc_pairwise_oracle(scores: &Tensor, labels: &[usize], class: usize) -> Option<f64> {
        let classes = scores.dim(1);
        let s: Vec<f64> = (0..labels.len())
            .map(|i| scores.data()[i * classes + class])
            .collect();
        let pos: Vec<f64> = s
            .iter()
            .zip(labels)
            .filter(|(_, &l)| l == class)
            .map(|(&v, _)| v)
            .collect();
        let neg: Vec<f64> = s
            .iter()
            .zip(labels)
            .filter(|(_, &l)| l != class)
            .map(|(&v, _)| v)
            .collect();
        if pos.is_empty() || neg.is_empty() {
            return None;
        }
        let mut credit = 0.0;
        for &p in &pos {
            for &n in &neg {
                if p > n {
                    credit += 1.0;
                } else if p == n {
                    credit += 0.5;
                }
            }
        }
        Some(credit / (pos.len() * neg.len()) as f64)
    }

    fn macro_oracle(scores: &Tensor, labels: &[usize]) -> f64 {
        let classes = scores.dim(1);
        let values: Vec<f64> = (0..classes)
            .filter_map(|c| auc_pairwise_oracle(scores, labels, c))
            .collect();
        values.iter().sum::<f64>() / values.len() as f64
    }

    #[test]
    fn perfectly_separating_scores_give_one() {
        let scores = Tensor::from_vec(
            &[4, 2],
            vec![0.9, 0.1, 0.8, 0.2, 0.1, 0.9, 0.2, 0.8],
        )
        .unwrap();
        let auc = auc_macro(&scores, &[0, 0, 1, 1]).unwrap();
        assert_eq!(auc, 1.0);
    }

    #[test]
    fn identical_scores_give_half() {
        let scores = Tensor::full(&[6, 3], 1.0 / 3.0).unwrap();
        let auc = auc_macro(&scores, &[0, 1, 2, 0, 1, 2]).unwrap();
        assert!((auc - 0.5).abs() < 1e-15);
    }

    #[test]
    fn matches_pairwise_oracle_on_random_cases() {
        let mut rng = Rng::new(60);
        for case in 0..30 {
            let n = 5 + rng.next_below(40);
            let scores = crate::layers::softmax(
                &Tensor::seeded_uniform(&[n, 3], -2.0, 2.0, 600 + case).unwrap(),
            )
            .unwrap();
            let labels: Vec<usize> = (0..n).map(|_| rng.next_below(3)).collect();
            if labels.iter().filter(|&&l| l == 0).count() == 0 {
                continue;
            }
            let got = auc_macro(&scores, &labels);
            if let Ok(got) = got {
                let want = macro_oracle(&scores, &labels);
                assert!((got - want).abs() < 1e-9, "case {case}: {got} vs {want}");
            }
        }
    }

    #[test]
    fn matches_oracle_with_heavy_ties() {
        // Quantized scores force many ties.
        let mut rng = Rng::new(61);
        for case in 0..10 {
            let n = 20;
            let data: Vec<f64> = (0..n * 2).map(|_| rng.next_below(4) as f64 / 4.0).collect();
            let scores = Tensor::from_vec(&[n, 2], data).unwrap();
            let labels: Vec<usize> = (0..n).map(|_| rng.next_below(2)).collect();
            if labels.iter().all(|&l| l == 0) || labels.iter().all(|&l| l == 1) {
                continue;
            }
            let got = auc_macro(&scores, &labels).unwrap();
            let want = macro_oracle(&scores, &labels);
            assert!((got - want).abs() < 1e-9, "case {case}: {got} vs {want}");
        }
    }

    #[test]
    fn degenerate_class_is_excluded_and_flagged() {
        let scores = Tensor::from_vec(&[3, 3], vec![0.5, 0.3, 0.2, 0.2, 0.5, 0.3, 0.1, 0.2, 0.7])
            .unwrap();
        // No class-2 samples present.
        let (auc, excluded) = auc_macro_with_exclusions(&scores, &[0, 1, 0]).unwrap();
        assert_eq!(excluded, vec![2]);
        assert!(auc.is_finite());
    }

    #[test]
    fn all_degenerate_is_undefined() {
        let scores = Tensor::from_vec(&[2, 2], vec![0.6, 0.4, 0.7, 0.3]).unwrap();
        assert!(matches!(
            auc_macro(&scores, &[0, 0]),
            Err(Error::UndefinedMetric(_))
        ));
    }

    #[test]
    fn auc_invariant_under_increasing_transforms() {
        let mut rng = Rng::new(62);
        let n = 30;
        let scores = Tensor::seeded_uniform(&[n, 3], -1.0, 1.0, 63).unwrap();
        let labels: Vec<usize> = (0..n).map(|_| rng.next_below(3)).collect();
        let base = auc_macro(&scores, &labels).unwrap();
        let exp_scores =
            Tensor::from_vec(&[n, 3], scores.data().iter().map(|v| v.exp()).collect()).unwrap();
        let affine = scores.mul_scalar(3.5).unwrap().add_scalar(-2.0).unwrap();
        assert!((auc_macro(&exp_scores, &labels).unwrap() - base).abs() < 1e-12);
        assert!((auc_macro(&affine, &labels).unwrap() - base).abs() < 1e-12);
    }

    #[test]
    fn auc_of_negated_scores_complements() {
        let mut rng = Rng::new(64);
        let n = 25;
        // Continuous uniform scores: ties have probability zero.
        let scores = Tensor::seeded_uniform(&[n, 2], 0.0, 1.0, 65).unwrap();
        let labels: Vec<usize> = (0..n).map(|_| rng.next_below(2)).collect();
        let a = auc_macro(&scores, &labels).unwrap();
        let b = auc_macro(&scores.mul_scalar(-1.0).unwrap(), &labels).unwrap();
        assert!((a + b - 1.0).abs() < 1e-12);
    }

    #[test]
    fn recall_hand_count() {
        // truth [0,0,1,1], pred [0,1,1,1] -> recalls [0.5, 1.0], macro 0.75
        let macro_recall = recall_macro(&[0, 1, 1, 1], &[0, 0, 1, 1], 2).unwrap();
        assert_eq!(macro_recall, 0.75);
    }

    #[test]
    fn perfect_predictions_give_recall_one() {
        let truth = [0, 1, 2, 0, 1, 2];
        assert_eq!(recall_macro(&truth, &truth, 3).unwrap(), 1.0);
    }

    #[test]
    fn confusion_row_sums_are_class_counts() {
        let truth = [0, 0, 1, 2, 2, 2];
        let pred = [0, 1, 1, 0, 2, 2];
        let m = confusion(&pred, &truth, 3).unwrap();
        let row_sums: Vec<usize> = m.iter().map(|r| r.iter().sum()).collect();
        assert_eq!(row_sums, vec![2, 1, 3]);
        let total: usize = row_sums.iter().sum();
        assert_eq!(total, truth.len());
    }

    #[test]
    fn macro_recall_equals_mean_of_diagonal_row_normalized() {
        let truth = [0, 0, 0, 1, 1, 2];
        let pred = [0, 0, 1, 1, 0, 2];
        let m = confusion(&pred, &truth, 3).unwrap();
        let mut mean = 0.0;
        for i in 0..3 {
            let row_sum: usize = m[i].iter().sum();
            mean += m[i][i] as f64 / row_sum as f64;
        }
        mean /= 3.0;
        assert_eq!(recall_macro(&pred, &truth, 3).unwrap(), mean);
    }

    #[test]
    fn empty_truth_is_undefined() {
        assert!(matches!(
            recall_macro(&[], &[], 2),
            Err(Error::UndefinedMetric(_))
        ));
    }

    #[test]
    fn predict_labels_breaks_ties_low() {
        let probs = Tensor::from_vec(&[2, 3], vec![0.4, 0.4, 0.2, 0.2, 0.4, 0.4]).unwrap();
        assert_eq!(predict_labels(&probs), vec![0, 1]);
    }
}
