//! Consolidation of per-passage count candidates into one prediction.
//!
//! All four strategies return a value that was actually observed, and every
//! tie is broken deterministically so the result does not depend on the
//! order of the input. Confidence sums are computed exactly (confidences are
//! converted to the dyadic rationals they denote), so the weighted median has
//! no floating-point boundary effects.

use std::cmp::Ordering;
use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use num_rational::BigRational;
use num_traits::Zero;
use serde::{Deserialize, Serialize};

use crate::corpus::SpanRef;
use crate::count::{Confidence, Count};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Strategy {
    MostConfident,
    MostFrequent,
    Median,
    #[default]
    WeightedMedian,
}

impl Strategy {
    pub const ALL: [Strategy; 4] =
        [Strategy::MostConfident, Strategy::MostFrequent, Strategy::Median, Strategy::WeightedMedian];

    pub fn as_str(self) -> &'static str {
        match self {
            Strategy::MostConfident => "most_confident",
            Strategy::MostFrequent => "most_frequent",
            Strategy::Median => "median",
            Strategy::WeightedMedian => "weighted_median",
        }
    }
}

impl fmt::Display for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Strategy {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let norm = s.trim().to_lowercase().replace('-', "_");
        Strategy::ALL
            .into_iter()
            .find(|st| st.as_str() == norm)
            .ok_or_else(|| format!("unknown consolidation strategy {s:?}"))
    }
}

/// A count read from one answer span.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CountCandidate {
    pub value: Count,
    pub confidence: Confidence,
    pub passage_id: String,
    pub passage_rank: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub span: Option<SpanRef>,
}

impl CountCandidate {
    pub fn new(value: Count, confidence: Confidence, passage_id: impl Into<String>, passage_rank: u32) -> Self {
        CountCandidate { value, confidence, passage_id: passage_id.into(), passage_rank, span: None }
    }

    pub fn with_span(mut self, span: SpanRef) -> Self {
        self.span = Some(span);
        self
    }

    /// Total order used to make support lists and last-resort ties stable.
    fn canonical_cmp(&self, other: &Self) -> Ordering {
        self.passage_rank
            .cmp(&other.passage_rank)
            .then_with(|| self.passage_id.cmp(&other.passage_id))
            .then_with(|| self.span.cmp(&other.span))
            .then_with(|| self.value.cmp(&other.value))
            .then_with(|| self.confidence.get().total_cmp(&other.confidence.get()))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Prediction {
    pub value: Count,
    pub strategy: Strategy,
    /// Candidates that determined the value, in canonical order.
    pub support: Vec<CountCandidate>,
}

/// Reduces candidates to one count. `None` for an empty input.
pub fn consolidate(candidates: &[CountCandidate], strategy: Strategy) -> Option<Prediction> {
    if candidates.is_empty() {
        return None;
    }
    let (value, support) = match strategy {
        Strategy::MostConfident => {
            let best = most_confident(candidates);
            (best.value, vec![best.clone()])
        }
        Strategy::MostFrequent => {
            let value = most_frequent(candidates);
            (value, support_for(candidates, value))
        }
        Strategy::Median => {
            let value = lower_median(candidates);
            (value, support_for(candidates, value))
        }
        Strategy::WeightedMedian => {
            let value = weighted_median(candidates);
            (value, support_for(candidates, value))
        }
    };
    Some(Prediction { value, strategy, support })
}

fn support_for(candidates: &[CountCandidate], value: Count) -> Vec<CountCandidate> {
    let mut support: Vec<CountCandidate> = candidates.iter().filter(|c| c.value == value).cloned().collect();
    support.sort_by(CountCandidate::canonical_cmp);
    support
}

/// Highest confidence; ties: lower passage rank, then smaller value.
fn most_confident(candidates: &[CountCandidate]) -> &CountCandidate {
    candidates
        .iter()
        .min_by(|a, b| {
            b.confidence
                .get()
                .total_cmp(&a.confidence.get())
                .then_with(|| a.passage_rank.cmp(&b.passage_rank))
                .then_with(|| a.value.cmp(&b.value))
                .then_with(|| a.canonical_cmp(b))
        })
        .expect("nonempty")
}

/// Value with most candidates; ties: larger summed confidence, then smaller value.
fn most_frequent(candidates: &[CountCandidate]) -> Count {
    let mut groups: BTreeMap<Count, (usize, BigRational)> = BTreeMap::new();
    for c in candidates {
        let entry = groups.entry(c.value).or_insert_with(|| (0, BigRational::zero()));
        entry.0 += 1;
        entry.1 += c.confidence.exact();
    }
    // BTreeMap iterates by ascending value, so on a full tie the first wins
    let mut best: Option<(Count, usize, BigRational)> = None;
    for (value, (n, weight)) in groups {
        let better = match &best {
            None => true,
            Some((_, bn, bw)) => n > *bn || (n == *bn && weight > *bw),
        };
        if better {
            best = Some((value, n, weight));
        }
    }
    best.expect("nonempty").0
}

/// Element at index `(n - 1) / 2` of the ascending values.
fn lower_median(candidates: &[CountCandidate]) -> Count {
    let mut values: Vec<Count> = candidates.iter().map(|c| c.value).collect();
    values.sort_unstable();
    values[(values.len() - 1) / 2]
}

/// Smallest value whose cumulative confidence reaches half the total.
/// Falls back to the lower median when every confidence is zero.
fn weighted_median(candidates: &[CountCandidate]) -> Count {
    let mut weighted: Vec<(Count, BigRational)> =
        candidates.iter().map(|c| (c.value, c.confidence.exact())).collect();
    weighted.sort_by(|a, b| a.0.cmp(&b.0));
    let total: BigRational = weighted.iter().map(|(_, w)| w.clone()).sum();
    if total.is_zero() {
        return lower_median(candidates);
    }
    let two = BigRational::from_integer(2.into());
    let mut cumulative = BigRational::zero();
    for (i, (value, weight)) in weighted.iter().enumerate() {
        cumulative += weight;
        let group_done = weighted.get(i + 1).is_none_or(|(next, _)| next != value);
        if group_done && &cumulative * &two >= total {
            return *value;
        }
    }
    weighted.last().expect("nonempty").0
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cand(value: u64, conf: f64, rank: u32) -> CountCandidate {
        CountCandidate::new(Count::from_integer(value), Confidence::new(conf).unwrap(), format!("p{rank}"), rank)
    }

    fn value(cands: &[CountCandidate], s: Strategy) -> u64 {
        consolidate(cands, s).unwrap().value.to_string().parse().unwrap()
    }

    #[test]
    fn empty_is_absent() {
        for s in Strategy::ALL {
            assert_eq!(consolidate(&[], s), None);
        }
    }

    #[test]
    fn weighted_median_example() {
        let c = [cand(5, 0.2, 1), cand(150, 0.5, 2), cand(180, 0.9, 3)];
        assert_eq!(value(&c, Strategy::WeightedMedian), 180);
    }

    #[test]
    fn singleton_under_every_strategy() {
        let c = [cand(42, 0.3, 1)];
        for s in Strategy::ALL {
            assert_eq!(value(&c, s), 42);
        }
    }

    #[test]
    fn most_frequent_mode() {
        let c = [cand(150, 0.1, 1), cand(180, 0.1, 2), cand(180, 0.1, 3), cand(5, 0.9, 4)];
        assert_eq!(value(&c, Strategy::MostFrequent), 180);
    }

    #[test]
    fn most_frequent_tie_breaks() {
        // equal counts: larger summed confidence wins
        let c = [cand(10, 0.2, 1), cand(20, 0.3, 2)];
        assert_eq!(value(&c, Strategy::MostFrequent), 20);
        // full tie: smaller value
        let c = [cand(20, 0.3, 1), cand(10, 0.3, 2)];
        assert_eq!(value(&c, Strategy::MostFrequent), 10);
    }

    #[test]
    fn median_odd_and_even() {
        let c = [cand(5, 0.1, 1), cand(150, 0.1, 2), cand(180, 0.1, 3)];
        assert_eq!(value(&c, Strategy::Median), 150);
        let c = [cand(5, 0.1, 1), cand(150, 0.1, 2), cand(180, 0.1, 3), cand(200, 0.1, 4)];
        assert_eq!(value(&c, Strategy::Median), 150);
    }

    #[test]
    fn most_confident_tie_breaks() {
        let c = [cand(7, 0.5, 3), cand(9, 0.5, 2), cand(8, 0.4, 1)];
        assert_eq!(value(&c, Strategy::MostConfident), 9);
        let c = [cand(9, 0.5, 2), cand(7, 0.5, 2)];
        assert_eq!(value(&c, Strategy::MostConfident), 7);
    }

    #[test]
    fn zero_confidence_falls_back_to_median() {
        let c = [cand(1, 0.0, 1), cand(2, 0.0, 2), cand(100, 0.0, 3)];
        assert_eq!(value(&c, Strategy::WeightedMedian), 2);
    }

    #[test]
    fn support_lists_matching_candidates() {
        let c = [cand(180, 0.9, 3), cand(180, 0.2, 1), cand(5, 0.1, 2)];
        let p = consolidate(&c, Strategy::MostFrequent).unwrap();
        let ranks: Vec<u32> = p.support.iter().map(|s| s.passage_rank).collect();
        assert_eq!(ranks, vec![1, 3]);
        let p = consolidate(&c, Strategy::MostConfident).unwrap();
        assert_eq!(p.support.len(), 1);
        assert_eq!(p.support[0].passage_rank, 3);
    }

    #[test]
    fn strategy_names() {
        for s in Strategy::ALL {
            assert_eq!(s.as_str().parse::<Strategy>().unwrap(), s);
        }
        assert_eq!("weighted-median".parse::<Strategy>().unwrap(), Strategy::WeightedMedian);
        assert!("mean".parse::<Strategy>().is_err());
    }
}
