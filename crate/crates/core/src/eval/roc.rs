use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::eval::class_counts;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RocPoint {
    pub fpr: f64,
    pub tpr: f64,
    /// Rows scoring `>= threshold` are called positive. The leading
    /// point carries `+inf`, serialized as the string `"inf"`.
    #[serde(with = "threshold_serde")]
    pub threshold: f64,
}

mod threshold_serde {
    use serde::{de, Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
        if *v == f64::INFINITY {
            s.serialize_str("inf")
        } else {
            s.serialize_f64(*v)
        }
    }

    #[derive(Deserialize)]
    #[serde(untagged)]
    enum Repr {
        Num(f64),
        Text(String),
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        match Repr::deserialize(d)? {
            Repr::Num(v) => Ok(v),
            Repr::Text(t) if t == "inf" => Ok(f64::INFINITY),
            Repr::Text(t) => Err(de::Error::custom(format!("bad threshold '{t}'"))),
        }
    }
}

/// Indices sorted by descending score.
fn descending(scores: &[f64]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]));
    order
}

/// Mann–Whitney AUC from midranks, so tied pairs count one half.
pub fn roc_auc(scores: &[f64], truths: &[u8]) -> Result<f64> {
    let (pos, neg) = class_counts(scores, truths)?;
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]));
    // ranks are doubled so tie midranks stay integral
    let mut pos_rank_sum2: u128 = 0;
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && scores[order[j + 1]] == scores[order[i]] {
            j += 1;
        }
        let midrank2 = (i + 1 + j + 1) as u128;
        for &idx in &order[i..=j] {
            if truths[idx] == 1 {
                pos_rank_sum2 += midrank2;
            }
        }
        i = j + 1;
    }
    let p = pos as u128;
    let u2 = pos_rank_sum2 - p * (p + 1);
    Ok(u2 as f64 / (2.0 * pos as f64 * neg as f64))
}

/// ROC points at every distinct score, descending, after a `(0, 0)` point.
pub fn roc_curve_points(scores: &[f64], truths: &[u8]) -> Result<Vec<RocPoint>> {
    let (pos, neg) = class_counts(scores, truths)?;
    let order = descending(scores);
    let mut points = vec![RocPoint {
        fpr: 0.0,
        tpr: 0.0,
        threshold: f64::INFINITY,
    }];
    let (mut tp, mut fp) = (0usize, 0usize);
    let mut i = 0;
    while i < order.len() {
        let thr = scores[order[i]];
        while i < order.len() && scores[order[i]] == thr {
            if truths[order[i]] == 1 {
                tp += 1;
            } else {
                fp += 1;
            }
            i += 1;
        }
        points.push(RocPoint {
            fpr: fp as f64 / neg as f64,
            tpr: tp as f64 / pos as f64,
            threshold: thr,
        });
    }
    Ok(points)
}

/// Trapezoidal area under a polyline of ROC points.
pub fn trapezoid_area(points: &[RocPoint]) -> f64 {
    points
        .windows(2)
        .map(|w| (w[1].fpr - w[0].fpr) * (w[1].tpr + w[0].tpr) / 2.0)
        .sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::error::Error;
    use crate::numcore::RngState;
    use proptest::prelude::*;

    fn pair_count_auc(scores: &[f64], truths: &[u8]) -> f64 {
        let mut wins = 0.0;
        let mut pairs = 0.0;
        for (i, &si) in scores.iter().enumerate() {
            for (j, &sj) in scores.iter().enumerate() {
                if truths[i] == 1 && truths[j] == 0 {
                    pairs += 1.0;
                    wins += if si > sj {
                        1.0
                    } else if si == sj {
                        0.5
                    } else {
                        0.0
                    };
                }
            }
        }
        wins / pairs
    }

    #[test]
    fn worked_example() {
        let s = [0.1, 0.4, 0.35, 0.8];
        let t = [0, 0, 1, 1];
        assert_eq!(roc_auc(&s, &t).unwrap(), 0.75);
        assert_eq!(pair_count_auc(&s, &t), 0.75);
    }

    #[test]
    fn separating_and_tied() {
        assert_eq!(roc_auc(&[0.1, 0.2, 0.8, 0.9], &[0, 0, 1, 1]).unwrap(), 1.0);
        assert_eq!(roc_auc(&[0.3; 6], &[0, 1, 0, 1, 1, 0]).unwrap(), 0.5);
    }

    #[test]
    fn single_class_undefined() {
        assert!(matches!(
            roc_auc(&[0.1, 0.2], &[1, 1]),
            Err(Error::UndefinedMetric(_))
        ));
        assert!(matches!(
            roc_curve_points(&[0.1, 0.2], &[0, 0]),
            Err(Error::UndefinedMetric(_))
        ));
    }

    #[test]
    fn curve_by_hand() {
        let pts = roc_curve_points(&[0.1, 0.2, 0.8, 0.9], &[0, 0, 1, 1]).unwrap();
        let xy: Vec<(f64, f64)> = pts.iter().map(|p| (p.fpr, p.tpr)).collect();
        assert_eq!(
            xy,
            vec![(0.0, 0.0), (0.0, 0.5), (0.0, 1.0), (0.5, 1.0), (1.0, 1.0)]
        );
        assert_eq!(pts[0].threshold, f64::INFINITY);
        assert_eq!(pts[1].threshold, 0.9);
    }

    #[test]
    fn points_survive_json() {
        let pts = roc_curve_points(&[0.25, 0.5, 0.75], &[0, 1, 1]).unwrap();
        let json = serde_json::to_string(&pts).unwrap();
        assert!(json.contains(r#""threshold":"inf""#));
        let back: Vec<RocPoint> = serde_json::from_str(&json).unwrap();
        assert_eq!(back, pts);
    }

    #[test]
    fn trapezoid_matches_rank_auc() {
        let mut rng = RngState::new(12);
        for _ in 0..100 {
            let n = 2 + rng.below(60);
            let mut t: Vec<u8> = (0..n).map(|_| rng.below(2) as u8).collect();
            t[0] = 0;
            t[1] = 1;
            // coarse scores so ties happen
            let s: Vec<f64> = (0..n)
                .map(|i| (rng.below(8) as f64 + t[i] as f64 * 2.0) / 10.0)
                .collect();
            let pts = roc_curve_points(&s, &t).unwrap();
            assert_eq!(
                (pts.last().unwrap().fpr, pts.last().unwrap().tpr),
                (1.0, 1.0)
            );
            assert!(pts
                .windows(2)
                .all(|w| w[1].fpr >= w[0].fpr && w[1].tpr >= w[0].tpr));
            assert!((trapezoid_area(&pts) - roc_auc(&s, &t).unwrap()).abs() < 1e-12);
        }
    }

    fn instance() -> impl Strategy<Value = (Vec<f64>, Vec<u8>)> {
        (2usize..200).prop_flat_map(|n| {
            (
                proptest::collection::vec(0u8..20, n)
                    .prop_map(|v| v.into_iter().map(|k| k as f64 / 4.0).collect()),
                proptest::collection::vec(0u8..2, n).prop_map(|mut t| {
                    t[0] = 0;
                    t[1] = 1;
                    t
                }),
            )
        })
    }

    proptest! {
        #[test]
        fn rank_auc_equals_pair_count((s, t) in instance()) {
            prop_assert!((roc_auc(&s, &t).unwrap() - pair_count_auc(&s, &t)).abs() < 1e-12);
        }

        #[test]
        fn complement_without_ties(seed in any::<u64>(), n in 2usize..100) {
            let mut rng = RngState::new(seed);
            let s: Vec<f64> = (0..n).map(|_| rng.uniform()).collect();
            let mut t: Vec<u8> = (0..n).map(|_| rng.below(2) as u8).collect();
            t[0] = 0;
            t[1] = 1;
            let neg: Vec<f64> = s.iter().map(|v| -v).collect();
            let a = roc_auc(&s, &t).unwrap();
            prop_assert!((roc_auc(&neg, &t).unwrap() - (1.0 - a)).abs() < 1e-12);
        }
    }
}
