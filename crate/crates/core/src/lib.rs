//! layerlab: a desk-scale laboratory for studying how layer-contrast
//! decoding interacts with creative generation.
//!
//! The crate has six parts:
//!
//! - [`tinylm`]: a minimal decoder-only transformer with full per-layer
//!   observability (hidden states, early-exit distributions, per-head
//!   activations) plus deterministic training.
//! - [`decode`]: baseline sampling, layer-contrast (DoLa) decoding, and the
//!   probe-guided creative variant, with Jensen-Shannon premature-layer
//!   selection and adaptive plausibility filtering.
//! - [`probes`]: linear probes on attention-head activations that rank
//!   layers by how well they predict divergent outputs.
//! - [`metrics`]: convergent/divergent creativity, constraint satisfaction,
//!   coherence, Dist-n, QUC, and percentage-difference reporting.
//! - [`mitigate`]: chain-of-verification and retrieve-and-append pipelines
//!   plus the pluggable generator and judge backends they run against.
//! - [`harness`]: dataset loading, the resumable experiment runner, and
//!   output emission (CSV, plot data, run manifest).

pub mod decode;
pub mod error;
pub mod harness;
pub mod metrics;
pub mod mitigate;
pub mod probes;
pub mod tinylm;

pub use decode::{DecodeConfig, StepScores, Strategy};
pub use error::{Error, Result};
pub use harness::{CorrectnessChecker, DatasetKind, ExperimentPlan};
pub use metrics::{GenerationRecord, Method, MetricReport, ProblemSpec};
pub use mitigate::{Generator, Judge, RetrievalIndex};
pub use probes::{ProbeDataset, ProbeReport};
pub use tinylm::{ByteTokenizer, LayerTrace, Model, ModelConfig};
