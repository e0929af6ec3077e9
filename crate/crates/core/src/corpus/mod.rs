//! The `coquad.v1` dataset: line-delimited JSON query records.
//!
//! A file starts with a header line `{"format":"coquad.v1"}` followed by one
//! [`QueryRecord`] per line. Fields this crate does not know about are kept
//! in [`QueryRecord::extra`] and written back unchanged. Records are written
//! with their known fields in declaration order, then unknown fields sorted
//! by name.

mod cache;
mod labeling;

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Deserializer, Serialize};
use serde_json::Value;

use crate::contextualization::CnpCategory;
use crate::count::Count;
use crate::quantity::{parse_quantity, Quantity};

pub use cache::ResponseCache;
pub use labeling::{
    filter_measurement_queries, label_count, label_spans, split_train_test, Label, SpanLabel,
    SPAN_TOLERANCE,
};

pub const FORMAT_VERSION: &str = "coquad.v1";

#[derive(Debug, thiserror::Error)]
pub enum CorpusError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
    #[error("line {line}: malformed record: {source}")]
    Parse {
        line: usize,
        #[source]
        source: serde_json::Error,
    },
    #[error("line {line}: invalid record: {reason}")]
    Invalid { line: usize, reason: String },
    #[error("unsupported dataset format {0:?} (expected {FORMAT_VERSION:?})")]
    UnsupportedFormat(String),
    #[error("record {0:?} has no gold count")]
    MissingGold(String),
}

/// A retrieved passage. `rank` starts at 1.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Passage {
    pub id: String,
    pub rank: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub url: Option<String>,
    pub text: String,
}

/// A character range inside a passage.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct SpanRef {
    pub passage_id: String,
    pub char_start: usize,
    pub char_end: usize,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Provenance {
    Kg,
    FeaturedSnippet,
    Manual,
    #[default]
    Unlabeled,
}

/// Human category label for one CNP of a query.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CnpLabel {
    pub modifier_phrase: String,
    pub value: Count,
    pub category: CnpCategory,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QueryRecord {
    pub id: String,
    pub query: String,
    #[serde(default, skip_serializing_if = "Option::is_none", deserialize_with = "gold_count")]
    pub gold_count: Option<Quantity>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gold_instances: Option<Vec<String>>,
    #[serde(default)]
    pub passages: Vec<Passage>,
    #[serde(default)]
    pub provenance: Provenance,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cnp_labels: Option<Vec<CnpLabel>>,
    #[serde(flatten)]
    pub extra: BTreeMap<String, Value>,
}

/// Gold counts may be written as a bare number, a string such as
/// `"approximately 180"`, or a full quantity object.
fn gold_count<'de, D: Deserializer<'de>>(deserializer: D) -> Result<Option<Quantity>, D::Error> {
    #[derive(Deserialize)]
    #[serde(untagged)]
    enum Gold {
        Full(Quantity),
        Bare(Count),
        Text(String),
    }
    Ok(match Option::<Gold>::deserialize(deserializer)? {
        None => None,
        Some(Gold::Full(q)) => Some(q),
        Some(Gold::Bare(c)) => Some(Quantity::exact(c)),
        Some(Gold::Text(s)) => Some(
            parse_quantity(&s).ok_or_else(|| serde::de::Error::custom(format!("no count in gold {s:?}")))?,
        ),
    })
}

impl QueryRecord {
    pub fn new(id: impl Into<String>, query: impl Into<String>, passages: Vec<Passage>) -> Self {
        QueryRecord {
            id: id.into(),
            query: query.into(),
            gold_count: None,
            gold_instances: None,
            passages,
            provenance: Provenance::Unlabeled,
            cnp_labels: None,
            extra: BTreeMap::new(),
        }
    }

    /// Checks passage ranks (unique, contiguous from 1), passage ids
    /// (unique) and gold instances (nonempty when present).
    pub fn validate(&self) -> Result<(), String> {
        if self.id.is_empty() {
            return Err("empty record id".into());
        }
        validate_passages(&self.passages)?;
        if self.gold_instances.as_ref().is_some_and(Vec::is_empty) {
            return Err("gold_instances present but empty".into());
        }
        Ok(())
    }
}

pub fn validate_passages(passages: &[Passage]) -> Result<(), String> {
    let mut ranks = BTreeSet::new();
    let mut ids = BTreeSet::new();
    for p in passages {
        if !ranks.insert(p.rank) {
            return Err(format!("duplicate passage rank {}", p.rank));
        }
        if !ids.insert(p.id.as_str()) {
            return Err(format!("duplicate passage id {:?}", p.id));
        }
    }
    if let Some((i, r)) = ranks.iter().enumerate().find(|&(i, &r)| r as usize != i + 1) {
        return Err(format!("passage ranks must be contiguous from 1, found {r} at position {}", i + 1));
    }
    Ok(())
}

#[derive(Serialize)]
struct Header<'a> {
    format: &'a str,
}

/// Parses dataset text. An empty input yields no records.
pub fn load_str(contents: &str) -> Result<Vec<QueryRecord>, CorpusError> {
    let mut records = Vec::new();
    let mut seen_first = false;
    for (idx, line) in contents.lines().enumerate() {
        let line_no = idx + 1;
        if line.trim().is_empty() {
            continue;
        }
        let value: Value = serde_json::from_str(line).map_err(|source| CorpusError::Parse { line: line_no, source })?;
        if !seen_first {
            seen_first = true;
            if let Some(format) = header_format(&value) {
                if format != FORMAT_VERSION {
                    return Err(CorpusError::UnsupportedFormat(format.to_string()));
                }
                continue;
            }
        }
        let record: QueryRecord =
            serde_json::from_value(value).map_err(|source| CorpusError::Parse { line: line_no, source })?;
        record.validate().map_err(|reason| CorpusError::Invalid { line: line_no, reason })?;
        records.push(record);
    }
    Ok(records)
}

fn header_format(value: &Value) -> Option<&str> {
    let obj = value.as_object()?;
    if obj.contains_key("query") {
        return None;
    }
    obj.get("format")?.as_str()
}

pub fn load(path: &Path) -> Result<Vec<QueryRecord>, CorpusError> {
    let contents = fs::read_to_string(path).map_err(|source| CorpusError::Io { path: path.to_path_buf(), source })?;
    load_str(&contents)
}

/// Serializes records, header line first, one record per line.
pub fn store_string(records: &[QueryRecord]) -> String {
    let mut out = String::new();
    out.push_str(&serde_json::to_string(&Header { format: FORMAT_VERSION }).expect("header serializes"));
    out.push('\n');
    for record in records {
        out.push_str(&serde_json::to_string(record).expect("records serialize"));
        out.push('\n');
    }
    out
}

pub fn store(records: &[QueryRecord], path: &Path) -> Result<(), CorpusError> {
    fs::write(path, store_string(records)).map_err(|source| CorpusError::Io { path: path.to_path_buf(), source })
}

impl fmt::Display for Provenance {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Provenance::Kg => "kg",
            Provenance::FeaturedSnippet => "featured_snippet",
            Provenance::Manual => "manual",
            Provenance::Unlabeled => "unlabeled",
        };
        f.write_str(s)
    }
}
