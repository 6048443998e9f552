//! Policy text to intent registry: sentence segmentation, candidate
//! selection, data-verb-purpose decomposition, data grouping, permission
//! alignment, purpose reduction and synonymization, scope inference.

pub mod build;
pub mod candidates;
pub mod decompose;
pub mod document;
pub mod grouping;
pub mod lexicon;
pub mod purpose;
pub mod scope;
pub mod segment;

pub use build::{
    build_registry, complete_derivation, group_records, ingest, process, write_audit, BuildOutput,
    Conflict, ConflictReport, ConflictingBinding, CorpusRecord, DerivationStatus, Derivation,
    DerivedBinding, RecordStatus,
};
pub use candidates::{find_candidates, matched_verbs, CandidateStatement, RequestingVerb, VerbLexicon};
pub use decompose::{decompose_statement, DVPTriple};
pub use document::{load_corpus_dir, PolicyDocument};
pub use grouping::{align_to_permissions, AlignmentTable, ClusterLexicon, DataGroup, UNGROUPED};
pub use lexicon::Lexicons;
pub use purpose::{CanonicalPurpose, ReductionRules, SynonymLexicon};
pub use scope::ScopeRules;
pub use segment::Segmenter;

use thiserror::Error;

use crate::model::RegistryError;

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("lexicon file missing: {path}")]
    LexiconMissing { path: String },
    #[error("invalid lexicon {file}: {message}")]
    LexiconInvalid { file: String, message: String },
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("malformed policy document {source_name}: {message}")]
    MalformedDocument { source_name: String, message: String },
    #[error("no data object could be attached in {sentence:?}")]
    ExtractionFailed { sentence: String },
    #[error("{}", .0.to_text().trim_end())]
    ScopeConflict(Box<ConflictReport>),
    #[error(transparent)]
    Registry(RegistryError),
}

impl PipelineError {
    pub fn code(&self) -> &'static str {
        match self {
            Self::LexiconMissing { .. } => "LEXICON_MISSING",
            Self::LexiconInvalid { .. } => "LEXICON_INVALID",
            Self::Io { .. } => "IO_ERROR",
            Self::MalformedDocument { .. } => "MALFORMED_DOCUMENT",
            Self::ExtractionFailed { .. } => "EXTRACTION_FAILED",
            Self::ScopeConflict(_) => "SCOPE_CONFLICT",
            Self::Registry(e) => e.code(),
        }
    }
}
