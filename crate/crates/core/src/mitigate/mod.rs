//! Prompt-level hallucination-reduction pipelines (chain-of-verification
//! and retrieve-and-append) plus the generator and judge backends they and
//! the harness run against.

mod cove;
mod generator;
mod judge;
pub mod retrieval;
mod templates;

pub use cove::{cove_run, CoVeTranscript, CoveMode};
pub use generator::{
    DeterministicMock, Generator, HttpChatGenerator, LocalToyGenerator, ScriptedMock,
};
pub use judge::{
    constraint_marker, default_lexicon, load_lexicon, Judge, Lexicon, LlmJudge, RuleBasedJudge,
};
pub use retrieval::{
    load_corpus, rag_generate, rag_retrieve, render_rag_prompt, Document, Hit, Retrieval,
    RetrievalIndex,
};
pub use templates::{CoveTemplates, JudgeTemplates, Template};
