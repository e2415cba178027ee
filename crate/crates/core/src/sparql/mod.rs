//! Query model for the supported SPARQL fragment, its text syntax, and the
//! token codec used as the translation target language.

mod ast;
pub mod codec;
pub mod text;

pub use ast::{CompareOp, Filter, OrderBy, PatternTerm, QueryForm, SparqlQuery, TriplePattern};
pub use codec::{decode, encode, TokenSeq};
pub use text::{parse_sparql, to_sparql, with_prologue};

#[derive(Debug, thiserror::Error)]
pub enum CodecError {
    #[error("unsupported query feature: {0}")]
    Unsupported(String),
    #[error("IRI {0} has no prefix in the prefix table")]
    UnprefixableIri(String),
    #[error("decode error at token {position}: expected {expected}")]
    Decode { position: usize, expected: String },
    #[error("SPARQL syntax error at byte {offset}: {message}")]
    Syntax { offset: usize, message: String },
}
