//! Count, instance and CNP metrics.
//!
//! Count metrics are computed in exact rationals and only converted to
//! floats for reporting. Instance metrics match by normalized key after
//! deduplication and are macro-averaged over queries with gold instances.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;

use num_traits::{ToPrimitive, Zero};
use serde::{Deserialize, Serialize};

use crate::contextualization::{CnpCategory, ContextualizedAnswer};
use crate::corpus::{CnpLabel, SPAN_TOLERANCE};
use crate::count::{Count, Rational};
use crate::explanation::mention_key;

pub const DEFAULT_KS: [usize; 3] = [1, 5, 10];

fn ratio(num: usize, den: usize) -> Rational {
    Rational::new(num as i128, den as i128)
}

fn to_f64(r: &Rational) -> f64 {
    r.to_f64().unwrap_or(f64::NAN)
}

/// Fraction of answered queries whose prediction is within 10% of the gold,
/// boundary inclusive. `None` when nothing was answered.
///
/// # Panics
/// If the slices differ in length.
pub fn relaxed_precision(preds: &[Option<Count>], golds: &[Count]) -> Option<Rational> {
    assert_eq!(preds.len(), golds.len(), "one prediction slot per gold count");
    let (hits, answered) = hits_and_answered(preds, golds);
    (answered > 0).then(|| ratio(hits, answered))
}

/// Same as [`relaxed_precision`] but over all queries, unanswered ones
/// counting as misses. Zero for an empty input.
pub fn relaxed_precision_all(preds: &[Option<Count>], golds: &[Count]) -> Rational {
    assert_eq!(preds.len(), golds.len(), "one prediction slot per gold count");
    let (hits, _) = hits_and_answered(preds, golds);
    if golds.is_empty() {
        Rational::zero()
    } else {
        ratio(hits, golds.len())
    }
}

fn hits_and_answered(preds: &[Option<Count>], golds: &[Count]) -> (usize, usize) {
    preds.iter().zip(golds).fold((0, 0), |(hits, answered), (p, g)| match p {
        Some(p) => (hits + usize::from(p.within(g, SPAN_TOLERANCE)), answered + 1),
        None => (hits, answered),
    })
}

/// Fraction of queries with a prediction. Zero for an empty input.
pub fn coverage(preds: &[Option<Count>]) -> Rational {
    if preds.is_empty() {
        return Rational::zero();
    }
    ratio(preds.iter().filter(|p| p.is_some()).count(), preds.len())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CountEvalResult {
    /// Over answered queries; absent when nothing was answered.
    pub relaxed_precision: Option<f64>,
    pub relaxed_precision_all: f64,
    pub coverage: f64,
    pub n_queries: usize,
    pub n_answered: usize,
}

pub fn count_metrics(preds: &[Option<Count>], golds: &[Count]) -> CountEvalResult {
    CountEvalResult {
        relaxed_precision: relaxed_precision(preds, golds).map(|r| to_f64(&r)),
        relaxed_precision_all: to_f64(&relaxed_precision_all(preds, golds)),
        coverage: to_f64(&coverage(preds)),
        n_queries: preds.len(),
        n_answered: preds.iter().filter(|p| p.is_some()).count(),
    }
}

/// Scores for one query, keyed by cutoff.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QueryInstanceScores {
    pub precision_at: BTreeMap<usize, f64>,
    pub recall_at: BTreeMap<usize, f64>,
    pub hit_at: BTreeMap<usize, f64>,
    pub reciprocal_rank: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InstanceEvalResult {
    pub precision_at: BTreeMap<usize, f64>,
    pub recall_at: BTreeMap<usize, f64>,
    pub hit_at: BTreeMap<usize, f64>,
    pub mrr: f64,
    /// Queries with at least one gold instance.
    pub n_queries: usize,
}

/// Normalized keys in first-seen order, duplicates and empties dropped.
fn dedup_keys<S: AsRef<str>>(items: &[S]) -> Vec<String> {
    let mut seen = BTreeSet::new();
    items
        .iter()
        .map(|s| mention_key(s.as_ref()))
        .filter(|k| !k.is_empty() && seen.insert(k.clone()))
        .collect()
}

/// Scores one ranking; `None` if the query has no gold instances.
pub fn query_instance_scores<S: AsRef<str>, T: AsRef<str>>(
    ranked: &[S],
    gold: &[T],
    ks: &[usize],
) -> Option<QueryInstanceScores> {
    let gold: BTreeSet<String> = dedup_keys(gold).into_iter().collect();
    if gold.is_empty() {
        return None;
    }
    let ranked = dedup_keys(ranked);
    let hits: Vec<bool> = ranked.iter().map(|k| gold.contains(k)).collect();
    let mut scores = QueryInstanceScores {
        precision_at: BTreeMap::new(),
        recall_at: BTreeMap::new(),
        hit_at: BTreeMap::new(),
        reciprocal_rank: hits.iter().position(|h| *h).map_or(0.0, |i| 1.0 / (i + 1) as f64),
    };
    for &k in ks {
        let top = k.min(ranked.len());
        let found = hits[..top].iter().filter(|h| **h).count();
        let precision = if top == 0 { 0.0 } else { found as f64 / top as f64 };
        scores.precision_at.insert(k, precision);
        scores.recall_at.insert(k, found as f64 / gold.len() as f64);
        scores.hit_at.insert(k, if found > 0 { 1.0 } else { 0.0 });
    }
    Some(scores)
}

/// Macro-averaged P@k, R@k, Hit@k and MRR over `(ranking, gold)` pairs.
/// Queries without gold instances are skipped; with none left every metric
/// is zero.
pub fn instance_metrics<S: AsRef<str>, T: AsRef<str>>(queries: &[(Vec<S>, Vec<T>)], ks: &[usize]) -> InstanceEvalResult {
    let scored: Vec<QueryInstanceScores> =
        queries.iter().filter_map(|(ranked, gold)| query_instance_scores(ranked, gold, ks)).collect();
    let n = scored.len();
    let mean = |f: &dyn Fn(&QueryInstanceScores) -> f64| {
        if n == 0 {
            0.0
        } else {
            scored.iter().map(f).sum::<f64>() / n as f64
        }
    };
    let per_k = |pick: fn(&QueryInstanceScores) -> &BTreeMap<usize, f64>| {
        ks.iter().map(|&k| (k, mean(&|s| pick(s)[&k]))).collect::<BTreeMap<_, _>>()
    };
    InstanceEvalResult {
        precision_at: per_k(|s| &s.precision_at),
        recall_at: per_k(|s| &s.recall_at),
        hit_at: per_k(|s| &s.hit_at),
        mrr: mean(&|s| s.reciprocal_rank),
        n_queries: n,
    }
}

/// Per-category accuracy of predicted categories against human labels,
/// grouped by the label. A missing prediction counts as wrong. Categories
/// with no labels are absent.
pub fn cnp_accuracy(pairs: &[(Option<CnpCategory>, CnpCategory)]) -> BTreeMap<CnpCategory, f64> {
    let mut tally: BTreeMap<CnpCategory, (usize, usize)> = BTreeMap::new();
    for (predicted, label) in pairs {
        let entry = tally.entry(*label).or_default();
        entry.1 += 1;
        if *predicted == Some(*label) {
            entry.0 += 1;
        }
    }
    tally.into_iter().map(|(c, (right, total))| (c, right as f64 / total as f64)).collect()
}

/// Pairs each CNP label with the category the answer assigned to a CNP with
/// the same modifier phrase (case-insensitive) and value. Each CNP answers
/// at most one label, taken in answer order (representative first).
pub fn match_cnp_labels(answer: &ContextualizedAnswer, labels: &[CnpLabel]) -> Vec<(Option<CnpCategory>, CnpCategory)> {
    let all: Vec<_> = answer
        .cnp_rep
        .iter()
        .chain(&answer.synonyms)
        .chain(&answer.subgroups)
        .chain(&answer.incomparables)
        .chain(&answer.uncategorized)
        .collect();
    let mut used = vec![false; all.len()];
    labels
        .iter()
        .map(|label| {
            let found = all.iter().enumerate().position(|(i, c)| {
                !used[i]
                    && c.value() == label.value
                    && c.modifier_phrase.eq_ignore_ascii_case(label.modifier_phrase.trim())
            });
            let predicted = found.and_then(|i| {
                used[i] = true;
                all[i].category
            });
            (predicted, label.category)
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub counts: CountEvalResult,
    pub instances: InstanceEvalResult,
    pub cnp_accuracy: BTreeMap<CnpCategory, f64>,
}

impl MetricsReport {
    /// Two-column plain-text table with aligned values.
    pub fn to_table(&self) -> String {
        let fmt = |v: f64| format!("{v:.4}");
        let mut rows: Vec<(String, String)> = vec![
            ("queries".into(), self.counts.n_queries.to_string()),
            ("answered".into(), self.counts.n_answered.to_string()),
            ("coverage".into(), fmt(self.counts.coverage)),
            ("relaxed_precision".into(), self.counts.relaxed_precision.map_or("-".into(), fmt)),
            ("relaxed_precision_all".into(), fmt(self.counts.relaxed_precision_all)),
            ("instance_queries".into(), self.instances.n_queries.to_string()),
        ];
        for (k, v) in &self.instances.precision_at {
            rows.push((format!("P@{k}"), fmt(*v)));
        }
        for (k, v) in &self.instances.recall_at {
            rows.push((format!("R@{k}"), fmt(*v)));
        }
        for (k, v) in &self.instances.hit_at {
            rows.push((format!("Hit@{k}"), fmt(*v)));
        }
        rows.push(("MRR".into(), fmt(self.instances.mrr)));
        for (c, v) in &self.cnp_accuracy {
            rows.push((format!("cnp_accuracy.{c}"), fmt(*v)));
        }
        let name_width = rows.iter().map(|(n, _)| n.len()).max().unwrap_or(0);
        let value_width = rows.iter().map(|(_, v)| v.len()).max().unwrap_or(0);
        let mut out = String::new();
        for (name, value) in rows {
            let _ = writeln!(out, "{name:<name_width$}  {value:>value_width$}");
        }
        out
    }
}
