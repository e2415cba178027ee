//! Neural SPARQL machine pipeline: template generation from ontology
//! metadata, popularity ranking, corpus construction under several split
//! policies, and an attention-based LSTM translator from questions to
//! SPARQL token sequences.

pub mod kg;
pub mod sparql;
pub mod template;
pub mod rank;
pub mod dataset;
pub mod eval;
pub mod seq2seq;
pub mod pipeline;
