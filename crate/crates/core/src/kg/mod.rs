//! Knowledge-graph access: RDF terms, N-Triples graphs, local query
//! evaluation, the SPARQL protocol client, and ontology metadata.

pub mod endpoint;
mod graph;
mod metadata;
pub mod ntriples;
mod query;
mod results;
mod term;

pub use endpoint::{query_endpoint, SparqlEndpoint};
pub use graph::{load_local_graph, Graph};
pub use metadata::{
    entities_with_property, entity_label, fetch_class_metadata, humanize_local_name, ClassMetadata,
    KnowledgeSource, PropertySpec, RangeKind,
};
pub use query::{compare_values, query_graph};
pub use results::{Binding, ResultSet};
pub use term::{
    infer_datatype, is_date_datatype, is_numeric_datatype, rdf, rdfs, xsd, Iri, Literal, PrefixTable, Term, Triple,
    OWL, RDF, RDFS, XSD,
};

#[derive(Debug, thiserror::Error)]
pub enum KgError {
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("parse error on line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("invalid IRI {0:?}")]
    InvalidIri(String),
    #[error("invalid prefix name {0:?}")]
    InvalidPrefix(String),
    #[error("network error: {0}")]
    Network(String),
    #[error("malformed endpoint response: {0}")]
    Protocol(String),
    #[error("endpoint returned HTTP {status}: {excerpt}")]
    Endpoint { status: u16, excerpt: String },
    #[error("unsupported query: {0}")]
    Unsupported(String),
    #[error("type error: {0}")]
    Type(String),
    #[error("not found: {0}")]
    NotFound(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}
