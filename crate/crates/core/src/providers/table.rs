use std::collections::HashMap;
use std::path::Path;
use std::sync::Arc;

use serde::Deserialize;

use super::{clamp_signed, ProviderError, SimilarityProvider};
use crate::text;

/// Similarity from a fixed table of phrase pairs, falling back to another
/// provider for pairs not in the table.
///
/// Lookups are symmetric and case/whitespace-insensitive; identical phrases
/// score 1. The file format is
/// `{"pairs": [{"a": "languages", "b": "dialects", "similarity": 0.6}, ...]}`.
pub struct TableSimilarity {
    entries: HashMap<(String, String), f64>,
    fallback: Arc<dyn SimilarityProvider>,
}

#[derive(Deserialize)]
struct TableFile {
    pairs: Vec<TableEntry>,
}

#[derive(Deserialize)]
struct TableEntry {
    a: String,
    b: String,
    similarity: f64,
}

fn key(a: &str, b: &str) -> (String, String) {
    let a = text::collapse_whitespace(&a.to_lowercase());
    let b = text::collapse_whitespace(&b.to_lowercase());
    if a <= b {
        (a, b)
    } else {
        (b, a)
    }
}

impl TableSimilarity {
    pub fn from_pairs<'a>(
        pairs: impl IntoIterator<Item = (&'a str, &'a str, f64)>,
        fallback: Arc<dyn SimilarityProvider>,
    ) -> Self {
        let entries = pairs
            .into_iter()
            .map(|(a, b, s)| (key(a, b), clamp_signed("table similarity", s)))
            .collect();
        TableSimilarity { entries, fallback }
    }

    pub fn load(path: &Path, fallback: Arc<dyn SimilarityProvider>) -> Result<Self, ProviderError> {
        let raw = std::fs::read_to_string(path)
            .map_err(|e| ProviderError::Config(format!("similarity table {}: {e}", path.display())))?;
        let file: TableFile = serde_json::from_str(&raw)
            .map_err(|e| ProviderError::Config(format!("similarity table {}: {e}", path.display())))?;
        Ok(Self::from_pairs(file.pairs.iter().map(|e| (e.a.as_str(), e.b.as_str(), e.similarity)), fallback))
    }

    fn lookup(&self, a: &str, b: &str) -> Option<f64> {
        let k = key(a, b);
        if k.0 == k.1 {
            return Some(1.0);
        }
        self.entries.get(&k).copied()
    }
}

impl SimilarityProvider for TableSimilarity {
    fn similarities(&self, anchor: &str, others: &[&str]) -> Result<Vec<f64>, ProviderError> {
        let mut out: Vec<Option<f64>> = others.iter().map(|o| self.lookup(anchor, o)).collect();
        let missing: Vec<&str> = others.iter().zip(&out).filter(|(_, v)| v.is_none()).map(|(o, _)| *o).collect();
        if !missing.is_empty() {
            let mut filled = self.fallback.similarities(anchor, &missing)?.into_iter();
            for slot in out.iter_mut().filter(|v| v.is_none()) {
                *slot = filled.next();
            }
        }
        Ok(out.into_iter().map(|v| v.unwrap_or(-1.0)).collect())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::providers::OfflineSimilarity;

    #[test]
    fn table_then_fallback() {
        let t = TableSimilarity::from_pairs([("languages", "dialects", 0.6)], Arc::new(OfflineSimilarity));
        let got = t.similarities("Languages", &["dialects", "languages", "xyz"]).unwrap();
        assert_eq!(got[0], 0.6);
        assert_eq!(got[1], 1.0);
        assert_eq!(got[2], OfflineSimilarity.similarity("Languages", "xyz").unwrap());
        assert_eq!(t.similarity("dialects", "languages").unwrap(), 0.6);
    }
}
