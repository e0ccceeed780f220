use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    pub tp: usize,
    pub fp: usize,
    pub tn: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
}

impl ConfusionMatrix {
    pub fn total(&self) -> usize {
        self.tp + self.fp + self.tn + self.fn_
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClassificationScores {
    pub confusion: ConfusionMatrix,
    pub accuracy: f64,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

fn ratio(num: usize, den: usize) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

/// Confusion counts and the usual scores with class 1 as positive.
/// Precision, recall and F1 are 0 when their denominator is 0.
pub fn confusion_and_scores(predictions: &[u8], truths: &[u8]) -> Result<ClassificationScores> {
    if predictions.len() != truths.len() || predictions.is_empty() {
        return Err(Error::Precondition(format!(
            "need equal non-empty lengths, got {} predictions and {} labels",
            predictions.len(),
            truths.len()
        )));
    }
    let mut cm = ConfusionMatrix::default();
    for (&p, &t) in predictions.iter().zip(truths) {
        match (p != 0, t != 0) {
            (true, true) => cm.tp += 1,
            (true, false) => cm.fp += 1,
            (false, false) => cm.tn += 1,
            (false, true) => cm.fn_ += 1,
        }
    }
    let precision = ratio(cm.tp, cm.tp + cm.fp);
    let recall = ratio(cm.tp, cm.tp + cm.fn_);
    let f1 = if precision + recall == 0.0 {
        0.0
    } else {
        2.0 * precision * recall / (precision + recall)
    };
    Ok(ClassificationScores {
        confusion: cm,
        accuracy: ratio(cm.tp + cm.tn, cm.total()),
        precision,
        recall,
        f1,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numcore::RngState;

    #[test]
    fn perfect_predictions() {
        let s = confusion_and_scores(&[0, 1, 1], &[0, 1, 1]).unwrap();
        assert_eq!(
            (s.accuracy, s.precision, s.recall, s.f1),
            (1.0, 1.0, 1.0, 1.0)
        );
    }

    #[test]
    fn zero_denominators() {
        let s = confusion_and_scores(&[0, 0], &[1, 1]).unwrap();
        assert_eq!((s.recall, s.precision, s.f1), (0.0, 0.0, 0.0));
        assert_eq!(s.confusion.fn_, 2);
    }

    #[test]
    fn length_mismatch() {
        assert!(confusion_and_scores(&[0, 1], &[1]).is_err());
        assert!(confusion_and_scores(&[], &[]).is_err());
    }

    #[test]
    fn counting_oracle() {
        let mut rng = RngState::new(50);
        for _ in 0..20 {
            let p: Vec<u8> = (0..50).map(|_| rng.below(2) as u8).collect();
            let t: Vec<u8> = (0..50).map(|_| rng.below(2) as u8).collect();
            let s = confusion_and_scores(&p, &t).unwrap();
            let count = |a: u8, b: u8| {
                p.iter()
                    .zip(&t)
                    .filter(|&(&x, &y)| x == a && y == b)
                    .count() as f64
            };
            let (tp, fp, tn, fnn) = (count(1, 1), count(1, 0), count(0, 0), count(0, 1));
            assert_eq!(s.confusion.total(), 50);
            assert_eq!(s.accuracy, (tp + tn) / 50.0);
            assert_eq!(
                s.precision,
                if tp + fp > 0.0 { tp / (tp + fp) } else { 0.0 }
            );
            assert_eq!(s.recall, if tp + fnn > 0.0 { tp / (tp + fnn) } else { 0.0 });
            let f1 = if tp > 0.0 {
                2.0 * tp / (2.0 * tp + fp + fnn)
            } else {
                0.0
            };
            assert!((s.f1 - f1).abs() < 1e-12);
        }
    }

    #[test]
    fn serializes_fn_field() {
        let json = serde_json::to_string(&ConfusionMatrix {
            tp: 1,
            fp: 2,
            tn: 3,
            fn_: 4,
        })
        .unwrap();
        assert_eq!(json, r#"{"tp":1,"fp":2,"tn":3,"fn":4}"#);
    }
}
