use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;

use coqex_core::corpus::{self, filter_measurement_queries, label_spans};
use coqex_core::error::ErrorKind;
use coqex_core::evalharness::MetricsReport;
use coqex_core::quantity::UnitStoplist;
use coqex_core::{output, AnswerPackage, Engine, Error, Passage, QuantityParser};
use serde::{Deserialize, Serialize};

use crate::cli::{Command, InputArgs, ReportFormat};

#[derive(Debug)]
pub struct CliError {
    pub kind: ErrorKind,
    pub message: String,
}

impl CliError {
    pub fn input(message: impl Into<String>) -> Self {
        CliError { kind: ErrorKind::Input, message: message.into() }
    }

    pub fn exit_code(&self) -> i32 {
        match self.kind {
            ErrorKind::Input => 2,
            ErrorKind::Provider => 3,
            ErrorKind::Internal => 4,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.message)
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        CliError { kind: e.kind(), message: e.to_string() }
    }
}

impl From<corpus::CorpusError> for CliError {
    fn from(e: corpus::CorpusError) -> Self {
        Error::from(e).into()
    }
}

impl From<serde_json::Error> for CliError {
    fn from(e: serde_json::Error) -> Self {
        Error::from(e).into()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stage {
    Answer,
    Contextualize,
    Explain,
    Pipeline,
}

impl Stage {
    pub fn run(self, engine: &Engine, query: &str, passages: &[Passage]) -> Result<AnswerPackage, Error> {
        match self {
            Stage::Answer => engine.answer(query, passages),
            Stage::Contextualize => engine.contextualize(query, passages),
            Stage::Explain => engine.explain(query, passages),
            Stage::Pipeline => engine.pipeline(query, passages),
        }
    }
}

/// A passages file: a bare array, or an object that may also carry the query.
#[derive(Debug, Deserialize)]
#[serde(untagged)]
enum PassagesFile {
    List(Vec<Passage>),
    Wrapped {
        #[serde(default)]
        query: Option<String>,
        passages: Vec<Passage>,
    },
}

pub fn load_passages(path: &Path) -> Result<(Option<String>, Vec<Passage>), CliError> {
    let raw = std::fs::read_to_string(path).map_err(|e| CliError::input(format!("{}: {e}", path.display())))?;
    let parsed: PassagesFile =
        serde_json::from_str(&raw).map_err(|e| CliError::input(format!("{}: {e}", path.display())))?;
    Ok(match parsed {
        PassagesFile::List(passages) => (None, passages),
        PassagesFile::Wrapped { query, passages } => (query, passages),
    })
}

#[derive(Serialize)]
struct RecordOutput<'a> {
    id: &'a str,
    #[serde(flatten)]
    package: &'a AnswerPackage,
}

/// The document printed for a single query. Serve mode returns the same bytes.
pub fn render_package(package: &AnswerPackage) -> Result<String, CliError> {
    Ok(output::to_string_pretty(package)? + "\n")
}

fn run_stage(stage: Stage, engine: &Engine, input: &InputArgs) -> Result<String, CliError> {
    if let Some(dataset) = &input.dataset {
        if input.query.is_some() {
            return Err(CliError::input("--query cannot be combined with --dataset"));
        }
        let records = corpus::load(dataset)?;
        let mut out = String::new();
        for record in &records {
            let package = stage.run(engine, &record.query, &record.passages)?;
            out.push_str(&output::to_string_line(&RecordOutput { id: &record.id, package: &package })?);
            out.push('\n');
        }
        return Ok(out);
    }
    let (file_query, passages) = match &input.passages {
        Some(path) => load_passages(path)?,
        None => return Err(CliError::input("one of --passages or --dataset is required")),
    };
    let query = input
        .query
        .clone()
        .or(file_query)
        .ok_or_else(|| CliError::input("no query: pass --query or include one in the passages file"))?;
    render_package(&stage.run(engine, &query, &passages)?)
}

pub fn render_report(report: &MetricsReport, format: ReportFormat) -> Result<String, CliError> {
    Ok(match format {
        ReportFormat::Json => output::to_string_pretty(report)? + "\n",
        ReportFormat::Table => report.to_table(),
    })
}

/// Runs a non-serve command and returns everything it prints to stdout.
pub fn run(command: &Command, engine: &Engine) -> Result<String, CliError> {
    match command {
        Command::Answer(input) => run_stage(Stage::Answer, engine, input),
        Command::Contextualize(input) => run_stage(Stage::Contextualize, engine, input),
        Command::Explain(input) => run_stage(Stage::Explain, engine, input),
        Command::Pipeline(input) => run_stage(Stage::Pipeline, engine, input),
        Command::Evaluate { dataset, ks, format } => {
            if ks.is_empty() || ks.contains(&0) {
                return Err(CliError::input("--ks needs positive cutoffs"));
            }
            let records = corpus::load(dataset)?;
            render_report(&engine.evaluate(&records, ks)?, *format)
        }
        Command::Label { dataset } => {
            let parser = QuantityParser::default();
            let mut records = corpus::load(dataset)?;
            for record in &mut records {
                if record.gold_count.is_none() {
                    log::warn!("record {} has no gold count, left unlabeled", record.id);
                    continue;
                }
                let labels = label_spans(record, &parser)?;
                record.extra.insert("span_labels".into(), serde_json::to_value(labels)?);
            }
            Ok(corpus::store_string(&records))
        }
        Command::Filter { dataset, units } => {
            let units = match units {
                Some(path) => {
                    UnitStoplist::load(path).map_err(|e| CliError::input(format!("{}: {e}", path.display())))?
                }
                None => UnitStoplist::default(),
            };
            let records = corpus::load(dataset)?;
            let before = records.len();
            let kept = filter_measurement_queries(records, &units);
            log::info!("kept {} of {before} records", kept.len());
            Ok(corpus::store_string(&kept))
        }
        Command::Serve { .. } => Err(CliError { kind: ErrorKind::Internal, message: "serve is not a batch command".into() }),
    }
}

/// Served lookup table from query text to passages.
pub fn dataset_index(path: &Path) -> Result<BTreeMap<String, Vec<Passage>>, CliError> {
    Ok(corpus::load(path)?.into_iter().map(|r| (r.query, r.passages)).collect())
}
