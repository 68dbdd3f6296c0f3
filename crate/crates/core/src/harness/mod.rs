//! The experiment runner: datasets in, methods dispatched against pluggable
//! backends, records archived resumable-append-only, metrics and plot data
//! out.

mod checker;
mod dataset;
mod emit;
mod runner;

pub use checker::CorrectnessChecker;
pub use dataset::load_dataset;
pub use emit::{emit_outputs, RunManifest};
pub use runner::{run_experiment, ArchiveEntry, CellId, ExperimentOutcome};

use crate::decode::DecodeConfig;
use crate::error::{Error, Result};
use crate::metrics::Method;
use serde::{Deserialize, Serialize};
use std::path::PathBuf;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DatasetKind {
    NeocoderLike,
    Cs4Like,
}

impl DatasetKind {
    pub fn parse(s: &str) -> Result<DatasetKind> {
        match s {
            "neocoder-like" => Ok(DatasetKind::NeocoderLike),
            "cs4-like" => Ok(DatasetKind::Cs4Like),
            other => Err(Error::Config(format!(
                "unknown dataset kind {other:?} (expected neocoder-like or cs4-like)"
            ))),
        }
    }

    /// Default constraint states: 0..=5 for constrained programming, the
    /// five cumulative segment sizes for story revision.
    pub fn default_states(&self) -> Vec<usize> {
        match self {
            DatasetKind::NeocoderLike => vec![0, 1, 2, 3, 4, 5],
            DatasetKind::Cs4Like => vec![7, 15, 23, 31, 39],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum GeneratorSpec {
    /// Order-independent deterministic mock; replies depend only on
    /// (cell seed, prompt).
    Mock,
    /// The toy model with per-method decode strategies.
    Local { weights: PathBuf },
    /// Chat-completions endpoint; the auth token is read from `auth_env`.
    Http {
        url: String,
        model: String,
        auth_env: String,
        #[serde(default = "default_in_flight")]
        max_in_flight: usize,
    },
}

fn default_in_flight() -> usize {
    4
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum JudgeSpec {
    /// Deterministic rule-based judge (lexicon + substring constraint
    /// markers + overlap coherence).
    Rule,
    /// Generator-backed judge using the same backend spec as generation.
    Llm,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentPlan {
    pub dataset_path: PathBuf,
    pub kind: DatasetKind,
    pub methods: Vec<Method>,
    pub states: Vec<usize>,
    pub runs_per_cell: usize,
    pub generator: GeneratorSpec,
    pub judge: JudgeSpec,
    /// Required when methods include creative_dola on a local generator.
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub probe_report: Option<PathBuf>,
    /// Retrieval corpus, required when methods include rag.
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub corpus: Option<PathBuf>,
    pub retrieval_k: usize,
    /// Base decode settings for local generation (strategy and rng_seed are
    /// overridden per cell).
    pub decode: DecodeConfig,
    pub checker: CorrectnessChecker,
    /// Technique lexicon for the rule judge (JSON file); the built-in
    /// lexicon when absent.
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub lexicon: Option<PathBuf>,
    pub outdir: PathBuf,
    pub seed: u64,
    pub workers: usize,
    /// Debugging knob: stop after computing this many new cells (completed
    /// cells are skipped first). Used to exercise kill-and-resume.
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub max_cells: Option<usize>,
}

impl ExperimentPlan {
    pub fn new(dataset_path: PathBuf, kind: DatasetKind, outdir: PathBuf) -> ExperimentPlan {
        ExperimentPlan {
            dataset_path,
            kind,
            methods: vec![Method::Baseline],
            states: kind.default_states(),
            runs_per_cell: 3,
            generator: GeneratorSpec::Mock,
            judge: JudgeSpec::Rule,
            probe_report: None,
            corpus: None,
            retrieval_k: 3,
            decode: DecodeConfig::default(),
            checker: CorrectnessChecker::ExactMatch,
            lexicon: None,
            outdir,
            seed: 0,
            workers: 4,
            max_cells: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.methods.is_empty() {
            return Err(Error::Config("no methods selected".into()));
        }
        if !self.methods.contains(&Method::Baseline) {
            return Err(Error::Config(
                "methods must include baseline (percentage differences need it)".into(),
            ));
        }
        let mut seen = std::collections::BTreeSet::new();
        for m in &self.methods {
            if !seen.insert(m) {
                return Err(Error::Config(format!("duplicate method {}", m.as_str())));
            }
        }
        if self.states.is_empty() {
            return Err(Error::Config("no states selected".into()));
        }
        if self.runs_per_cell == 0 {
            return Err(Error::Config("runs_per_cell must be at least 1".into()));
        }
        if self.methods.contains(&Method::Rag) && self.corpus.is_none() {
            return Err(Error::Config("rag needs a retrieval corpus".into()));
        }
        if self.methods.contains(&Method::CreativeDola)
            && matches!(self.generator, GeneratorSpec::Local { .. })
            && self.probe_report.is_none()
        {
            return Err(Error::Config(
                "creative_dola on a local generator needs a probe report".into(),
            ));
        }
        if self.workers == 0 {
            return Err(Error::Config("workers must be at least 1".into()));
        }
        Ok(())
    }
}
