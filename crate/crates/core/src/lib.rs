//! Count question answering over retrieved passages.
//!
//! The engine turns noisy per-passage answer spans into one consolidated
//! count, places that count among the other count-modified noun phrases
//! found in the passages (synonyms, subgroups, incomparables), and grounds it
//! in ranked instance entities.
//!
//! The stages are:
//!
//! - [`quantity`]: numeral parsing and count / noun-phrase splitting
//! - [`inference`]: consolidation of count candidates into one prediction
//! - [`contextualization`]: representative CNP selection and classification
//! - [`explanation`]: instance extraction and ranking
//! - [`providers`]: span prediction, similarity, NER and entailment backends
//! - [`corpus`]: dataset IO, span labeling and the provider response cache
//! - [`evalharness`]: count and instance metrics
//! - [`pipeline`]: the wired engine used by the CLI and the HTTP service

pub mod contextualization;
pub mod corpus;
pub mod count;
pub mod error;
pub mod evalharness;
pub mod explanation;
pub mod inference;
pub mod output;
pub mod pipeline;
pub mod providers;
pub mod quantity;
pub mod text;

pub use contextualization::{Cnp, CnpCategory, ContextConfig, ContextualizedAnswer};
pub use corpus::{Passage, QueryRecord};
pub use count::{Confidence, Count, Rational};
pub use error::Error;
pub use explanation::{InstanceCandidate, RankedInstances, RankingStrategy};
pub use inference::{consolidate, CountCandidate, Prediction, Strategy};
pub use pipeline::{AnswerPackage, Engine, PipelineConfig};
pub use providers::{AnswerSpan, ProviderConfig, ProviderError, Providers};
pub use quantity::{parse_quantity, split_cnp, CountSpan, Modifier, Quantity, QuantityParser};
