//! Event-grounded evaluation of clinical time-series summaries.
//!
//! Patient-days of remote-monitoring data are turned into rule-derived
//! clinical facts ([`facts`]); summaries produced by one of three prompting
//! pipelines ([`stats`], [`plot`], [`client`]) are scanned for claimed events
//! ([`mention`]) and scored against the facts ([`evaluate`]). The
//! [`synthetic`] module generates corpora with known ground truth.

pub mod client;
pub mod evaluate;
pub mod facts;
pub mod ingest;
pub mod lexicon;
pub mod mention;
pub mod model;
pub mod plot;
pub mod stats;
pub mod synthetic;
pub mod templates;
pub mod util;

pub use facts::{build_fact_set, ClinicalFact, FactSet, FactType, Interval};
pub use ingest::{Pipeline, Summary};
pub use model::{Direction, Modality, Observation, PatientDay, ThresholdConfig, Value};
pub use evaluate::{aggregate, evaluate_day, Averaging, CorpusReport, DayEvaluation};
pub use lexicon::Lexicon;
pub use mention::{extract_coverage_statements, extract_mentions, ClaimedMention};
