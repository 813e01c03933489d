use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::corpus::{DomainSchema, IobTag, TaggedUtterance};
use crate::error::{Error, Result};
use crate::models::Model;
use crate::text::EmbeddingTable;

/// Token-level scores of one slot. `support` counts gold tokens.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SlotScore {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub support: usize,
    pub predicted: usize,
    pub true_positives: usize,
}

impl SlotScore {
    pub fn from_counts(true_positives: usize, predicted: usize, support: usize) -> Self {
        let ratio = |num: usize, den: usize| if den == 0 { 0.0 } else { num as f64 / den as f64 };
        let precision = ratio(true_positives, predicted);
        let recall = ratio(true_positives, support);
        let f1 = if precision + recall == 0.0 {
            0.0
        } else {
            2.0 * precision * recall / (precision + recall)
        };
        SlotScore {
            precision,
            recall,
            f1,
            support,
            predicted,
            true_positives,
        }
    }
}

/// How per-slot F1 scores are averaged.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Weighting {
    /// By gold-token support.
    #[default]
    Support,
    /// Plain mean over slots with support.
    Uniform,
}

/// Per-slot token precision/recall/F1. A token belongs to slot `s` when its
/// tag is `B-s` or `I-s`; the B/I distinction is not scored. Slots absent
/// from both gold and predictions do not appear.
pub fn token_f1_per_slot(gold: &[Vec<IobTag>], pred: &[Vec<IobTag>]) -> Result<BTreeMap<String, SlotScore>> {
    if gold.len() != pred.len() {
        return Err(Error::Record {
            index: gold.len().min(pred.len()),
            message: format!("{} gold utterances but {} predicted", gold.len(), pred.len()),
        });
    }
    // (tp, predicted, support)
    let mut counts: BTreeMap<&str, (usize, usize, usize)> = BTreeMap::new();
    for (index, (g, p)) in gold.iter().zip(pred).enumerate() {
        if g.len() != p.len() {
            return Err(Error::Record {
                index,
                message: format!("{} gold tags but {} predicted", g.len(), p.len()),
            });
        }
        for (gt, pt) in g.iter().zip(p) {
            if let Some(s) = gt.slot() {
                counts.entry(s).or_default().2 += 1;
            }
            if let Some(s) = pt.slot() {
                let c = counts.entry(s).or_default();
                c.1 += 1;
                if gt.slot() == Some(s) {
                    c.0 += 1;
                }
            }
        }
    }
    Ok(counts
        .into_iter()
        .map(|(s, (tp, predicted, support))| (s.to_string(), SlotScore::from_counts(tp, predicted, support)))
        .collect())
}

/// Average F1 over slots with gold support.
pub fn weighted_f1(scores: &BTreeMap<String, SlotScore>, weighting: Weighting) -> Result<f64> {
    let mut num = 0.0;
    let mut den = 0.0;
    for s in scores.values().filter(|s| s.support > 0) {
        let w = match weighting {
            Weighting::Support => s.support as f64,
            Weighting::Uniform => 1.0,
        };
        num += w * s.f1;
        den += w;
    }
    if den == 0.0 {
        return Err(Error::UndefinedMetric("no slot has gold support".into()));
    }
    Ok(num / den)
}

/// Combines per-domain scores with weights `ln(max(n, 2))`, `n` being the
/// domain's training-set size. Entries are `(score, n)`.
pub fn dev_weighted_score(entries: &[(f64, usize)]) -> Result<f64> {
    if entries.is_empty() {
        return Err(Error::UndefinedMetric("no dev sets to score".into()));
    }
    let mut num = 0.0;
    let mut den = 0.0;
    for &(score, n) in entries {
        let w = (n.max(2) as f64).ln();
        num += w * score;
        den += w;
    }
    Ok(num / den)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub domain: String,
    pub slots: BTreeMap<String, SlotScore>,
    /// `None` when no slot has gold support.
    pub weighted_f1: Option<f64>,
    pub weighting: Weighting,
    pub utterances: usize,
}

impl MetricsReport {
    pub fn from_tags(
        domain: impl Into<String>,
        gold: &[Vec<IobTag>],
        pred: &[Vec<IobTag>],
        weighting: Weighting,
    ) -> Result<Self> {
        let slots = token_f1_per_slot(gold, pred)?;
        let weighted = match weighted_f1(&slots, weighting) {
            Ok(v) => Some(v),
            Err(Error::UndefinedMetric(_)) => None,
            Err(e) => return Err(e),
        };
        Ok(MetricsReport {
            domain: domain.into(),
            slots,
            weighted_f1: weighted,
            weighting,
            utterances: gold.len(),
        })
    }

    pub fn weighted(&self) -> Result<f64> {
        self.weighted_f1
            .ok_or_else(|| Error::UndefinedMetric(format!("no slot of {} has gold support", self.domain)))
    }
}

/// Tags every utterance with `model` and scores it against the gold tags.
pub fn evaluate(
    model: &Model,
    schema: &DomainSchema,
    utterances: &[TaggedUtterance],
    table: &EmbeddingTable,
    weighting: Weighting,
) -> Result<MetricsReport> {
    let gold: Vec<Vec<IobTag>> = utterances.iter().map(|u| u.tags.clone()).collect();
    let pred = utterances
        .iter()
        .map(|u| Ok(model.tag(&u.tokens, schema, table)?.tags))
        .collect::<Result<Vec<_>>>()?;
    MetricsReport::from_tags(schema.domain.clone(), &gold, &pred, weighting)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn tags(s: &str) -> Vec<IobTag> {
        s.split_whitespace().map(|t| t.parse().unwrap()).collect()
    }

    #[test]
    fn partial_recall() {
        let scores = token_f1_per_slot(&[tags("B-x I-x O")], &[tags("B-x O O")]).unwrap();
        let x = scores["x"];
        assert_eq!((x.precision, x.recall), (1.0, 0.5));
        assert!((x.f1 - 2.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn b_i_confusion_is_a_hit() {
        let scores = token_f1_per_slot(&[tags("B-x I-x")], &[tags("I-x B-x")]).unwrap();
        assert_eq!(scores["x"].f1, 1.0);
    }

    #[test]
    fn all_o_prediction() {
        let scores = token_f1_per_slot(&[tags("B-x O B-y")], &[tags("O O O")]).unwrap();
        assert!(scores.values().all(|s| s.recall == 0.0 && s.f1 == 0.0));
    }

    #[test]
    fn length_mismatch() {
        let err = token_f1_per_slot(&[tags("O"), tags("O O")], &[tags("O"), tags("O")]);
        assert!(matches!(err, Err(Error::Record { index: 1, .. })));
        assert!(token_f1_per_slot(&[tags("O")], &[]).is_err());
    }

    #[test]
    fn weighting() {
        let mut m = BTreeMap::new();
        m.insert("a".to_string(), SlotScore { f1: 1.0, support: 1, ..SlotScore::from_counts(0, 0, 0) });
        m.insert("b".to_string(), SlotScore { f1: 0.5, support: 3, ..SlotScore::from_counts(0, 0, 0) });
        assert_eq!(weighted_f1(&m, Weighting::Support).unwrap(), 0.625);
        assert_eq!(weighted_f1(&m, Weighting::Uniform).unwrap(), 0.75);
        m.insert("ghost".to_string(), SlotScore::from_counts(0, 2, 0));
        assert_eq!(weighted_f1(&m, Weighting::Support).unwrap(), 0.625);
        assert!(matches!(weighted_f1(&BTreeMap::new(), Weighting::Support), Err(Error::UndefinedMetric(_))));
    }

    #[test]
    fn dev_score_by_log_size() {
        let v = dev_weighted_score(&[(0.8, 100), (0.4, 10)]).unwrap();
        assert!((v - 2.0 / 3.0).abs() < 1e-12);
        assert_eq!(dev_weighted_score(&[(0.3, 7)]).unwrap(), 0.3);
        assert!((dev_weighted_score(&[(0.2, 1), (0.6, 2)]).unwrap() - 0.4).abs() < 1e-15);
        assert!(matches!(dev_weighted_score(&[]), Err(Error::UndefinedMetric(_))));
    }

    fn arb_tags(len: usize) -> impl Strategy<Value = Vec<IobTag>> {
        proptest::collection::vec(
            prop_oneof![
                Just(IobTag::O),
                (0..3usize).prop_map(|s| IobTag::B(format!("s{s}"))),
                (0..3usize).prop_map(|s| IobTag::I(format!("s{s}"))),
            ],
            len,
        )
    }

    fn arb_pairs() -> impl Strategy<Value = Vec<(Vec<IobTag>, Vec<IobTag>)>> {
        proptest::collection::vec((1..6usize).prop_flat_map(|n| (arb_tags(n), arb_tags(n))), 1..8)
    }

    proptest! {
        #[test]
        fn weighted_is_between_extremes(pairs in arb_pairs()) {
            let (g, p): (Vec<_>, Vec<_>) = pairs.into_iter().unzip();
            let scores = token_f1_per_slot(&g, &p).unwrap();
            if let Ok(w) = weighted_f1(&scores, Weighting::Support) {
                let supported = scores.values().filter(|s| s.support > 0);
                let lo = supported.clone().map(|s| s.f1).fold(f64::INFINITY, f64::min);
                let hi = supported.map(|s| s.f1).fold(f64::NEG_INFINITY, f64::max);
                prop_assert!(w >= lo - 1e-12 && w <= hi + 1e-12);
            }
            for s in scores.values() {
                for v in [s.precision, s.recall, s.f1] {
                    prop_assert!((0.0..=1.0).contains(&v));
                }
            }
        }

        #[test]
        fn perfect_prediction_scores_one(pairs in arb_pairs()) {
            let (g, _): (Vec<_>, Vec<_>) = pairs.into_iter().unzip();
            let scores = token_f1_per_slot(&g, &g).unwrap();
            if let Ok(w) = weighted_f1(&scores, Weighting::Support) {
                prop_assert_eq!(w, 1.0);
            }
        }

        #[test]
        fn utterance_order_is_irrelevant(pairs in arb_pairs()) {
            let (g, p): (Vec<_>, Vec<_>) = pairs.iter().cloned().unzip();
            let (gr, pr): (Vec<_>, Vec<_>) = pairs.into_iter().rev().unzip();
            prop_assert_eq!(token_f1_per_slot(&g, &p).unwrap(), token_f1_per_slot(&gr, &pr).unwrap());
        }
    }
}
