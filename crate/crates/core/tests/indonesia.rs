//! The Indonesia walk-through: prediction 700, alpha 0.30, fixture similarity table.

use std::path::PathBuf;
use std::sync::Arc;

use coqex_core::corpus::Passage;
use coqex_core::providers::{OfflineSimilarity, TableSimilarity};
use coqex_core::{Count, Engine, PipelineConfig, Providers};
use serde::Deserialize;

fn fixture(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../fixtures").join(name)
}

#[derive(Deserialize)]
struct PassagesFile {
    query: String,
    passages: Vec<Passage>,
}

fn texts(cnps: &[coqex_core::Cnp]) -> Vec<&str> {
    let mut t: Vec<&str> = cnps.iter().map(|c| c.text.as_str()).collect();
    t.sort_unstable();
    t
}

#[test]
fn reproduces_the_categorization() {
    let file: PassagesFile =
        serde_json::from_str(&std::fs::read_to_string(fixture("indonesia.passages.json")).unwrap()).unwrap();
    let mut providers = Providers::offline();
    providers.similarity =
        Arc::new(TableSimilarity::load(&fixture("indonesia.similarity.json"), Arc::new(OfflineSimilarity)).unwrap());
    let engine = Engine::with_providers(PipelineConfig::default(), providers);
    let package = engine.contextualize(&file.query, &file.passages).unwrap();
    assert_eq!(package.prediction.as_ref().unwrap().value, Count::from_integer(700));
    let answer = package.contextualization.unwrap();
    assert_eq!(answer.alpha, 0.30);
    assert_eq!(answer.cnp_rep.unwrap().text, "estimated 700 languages");
    assert_eq!(texts(&answer.synonyms), ["700 languages", "750 dialects"]);
    assert_eq!(texts(&answer.subgroups), ["27 major regional languages", "5 official languages"]);
    assert_eq!(texts(&answer.incomparables), ["2000 ethnic groups", "85 million native speakers"]);
    assert!(answer.uncategorized.is_empty());
}
