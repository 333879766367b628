use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::synth::AdhesionLabel;

/// `2·tp / (2·tp + fp + fn)`; 0 when all three counts are zero.
pub fn f_score(tp: usize, fp: usize, fn_: usize) -> f64 {
    let den = 2 * tp + fp + fn_;
    if den == 0 {
        0.0
    } else {
        (2 * tp) as f64 / den as f64
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub accuracy: f64,
    pub macro_precision: f64,
    pub macro_recall: f64,
    pub macro_f1: f64,
    pub per_label_fscore: BTreeMap<AdhesionLabel, f64>,
    /// `confusion[truth][predicted]`.
    pub confusion: [[usize; 3]; 3],
}

impl MetricsReport {
    pub fn from_predictions(truth: &[AdhesionLabel], pred: &[AdhesionLabel]) -> Self {
        assert_eq!(truth.len(), pred.len(), "truth and predictions differ in length");
        let mut confusion = [[0usize; 3]; 3];
        for (t, p) in truth.iter().zip(pred) {
            confusion[t.index()][p.index()] += 1;
        }
        Self::from_confusion(confusion)
    }

    /// One-vs-rest precision, recall and F-score per label; macro scores are
    /// unweighted means over all three labels. Undefined ratios count as 0.
    pub fn from_confusion(confusion: [[usize; 3]; 3]) -> Self {
        let total: usize = confusion.iter().flatten().sum();
        let correct: usize = (0..3).map(|i| confusion[i][i]).sum();
        let ratio = |a: usize, b: usize| if b == 0 { 0.0 } else { a as f64 / b as f64 };
        let mut per_label_fscore = BTreeMap::new();
        let (mut p_sum, mut r_sum, mut f_sum) = (0.0, 0.0, 0.0);
        for label in AdhesionLabel::ALL {
            let i = label.index();
            let tp = confusion[i][i];
            let predicted: usize = (0..3).map(|t| confusion[t][i]).sum();
            let actual: usize = confusion[i].iter().sum();
            let (fp, fn_) = (predicted - tp, actual - tp);
            p_sum += ratio(tp, predicted);
            r_sum += ratio(tp, actual);
            let f = f_score(tp, fp, fn_);
            f_sum += f;
            per_label_fscore.insert(label, f);
        }
        Self {
            accuracy: ratio(correct, total),
            macro_precision: p_sum / 3.0,
            macro_recall: r_sum / 3.0,
            macro_f1: f_sum / 3.0,
            per_label_fscore,
            confusion,
        }
    }

    /// Number of test rows per true label.
    pub fn support(&self) -> [usize; 3] {
        [0, 1, 2].map(|i| self.confusion[i].iter().sum())
    }
}
