use num_rational::Ratio;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{CorpusError, QueryRecord, SpanRef};
use crate::count::{Count, Rational};
use crate::quantity::{QuantityParser, UnitStoplist};
use crate::text;

/// Relative tolerance for positive span labels (and for Relaxed Precision).
pub const SPAN_TOLERANCE: Rational = Ratio::new_raw(1, 10);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Label {
    Positive,
    Negative,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SpanLabel {
    #[serde(flatten)]
    pub span: SpanRef,
    pub text: String,
    pub value: Count,
    pub label: Label,
}

/// Positive iff `|count - gold| <= gold / 10`.
pub fn label_count(count: &Count, gold: &Count) -> Label {
    if count.within(gold, SPAN_TOLERANCE) {
        Label::Positive
    } else {
        Label::Negative
    }
}

/// Labels every count the parser finds in the record's passages against the
/// gold count. Gold modifiers are ignored; only the value is compared.
pub fn label_spans(record: &QueryRecord, parser: &QuantityParser) -> Result<Vec<SpanLabel>, CorpusError> {
    let gold = record.gold_count.as_ref().ok_or_else(|| CorpusError::MissingGold(record.id.clone()))?;
    let mut passages: Vec<_> = record.passages.iter().collect();
    passages.sort_by_key(|p| p.rank);
    let mut labels = Vec::new();
    for passage in passages {
        for m in parser.find_all(&passage.text) {
            labels.push(SpanLabel {
                span: SpanRef {
                    passage_id: passage.id.clone(),
                    char_start: text::byte_to_char(&passage.text, m.start),
                    char_end: text::byte_to_char(&passage.text, m.end),
                },
                text: m.quantity.surface.clone(),
                value: m.quantity.value,
                label: label_count(&m.quantity.value, &gold.value),
            });
        }
    }
    Ok(labels)
}

/// Drops queries asking for a measurement ("how many kilometers ...").
pub fn filter_measurement_queries(records: Vec<QueryRecord>, units: &UnitStoplist) -> Vec<QueryRecord> {
    records.into_iter().filter(|r| !units.mentions_unit(&r.query)).collect()
}

/// Seeded shuffle split into `(train, test)`; `test_fraction` is clamped to
/// `[0, 1]` and rounded down to whole records.
pub fn split_train_test(
    mut records: Vec<QueryRecord>,
    test_fraction: f64,
    seed: u64,
) -> (Vec<QueryRecord>, Vec<QueryRecord>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    records.shuffle(&mut rng);
    let n_test = (records.len() as f64 * test_fraction.clamp(0.0, 1.0)).floor() as usize;
    let train = records.split_off(n_test);
    (train, records)
}
