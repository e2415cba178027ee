//! Question/query pair corpora: instantiation of templates, deduplication,
//! split policies, vocabularies, and the parallel-corpus file layout.

mod split;
mod vocab;

use std::cell::RefCell;
use std::collections::{BTreeMap, HashSet};

use serde::{Deserialize, Serialize};

use crate::kg::{entity_label, Iri, KgError, KnowledgeSource, PrefixTable, Term};
use crate::sparql::{self, CodecError, TokenSeq};
use crate::template::{instantiations, CompositionKey, Template};

pub use split::{split, split_with_holdout, SplitPolicy, SplitReport, Splits, DEFAULT_MIN_TRAIN_FREQ};
pub use vocab::{build_vocab, Side, Vocabulary, PAD, RESERVED, SOS, EOS, UNK};

#[derive(Debug, thiserror::Error)]
pub enum DatasetError {
    #[error("no template produced an answerable instantiation")]
    EmptyDataset,
    #[error("dataset too small: {0}")]
    TooSmall(String),
    #[error("no depth-2 composition can be held out: {0}")]
    NoHoldoutAvailable(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("invalid split policy {0:?}")]
    InvalidPolicy(String),
    #[error(transparent)]
    Kg(#[from] KgError),
    #[error(transparent)]
    Codec(#[from] CodecError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct QAPair {
    pub nl: Vec<String>,
    pub ql: TokenSeq,
    pub template_id: String,
    pub key: CompositionKey,
    pub entities: Vec<Iri>,
}

impl QAPair {
    pub fn nl_line(&self) -> String {
        self.nl.join(" ")
    }

    pub fn ql_line(&self) -> String {
        self.ql.to_string()
    }

    fn identity(&self) -> (String, String) {
        (self.nl_line(), self.ql_line())
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Dataset {
    pub pairs: Vec<QAPair>,
}

impl Dataset {
    /// Keeps the first occurrence of every (nl, ql) pair.
    pub fn from_pairs(pairs: impl IntoIterator<Item = QAPair>) -> Self {
        let mut seen = HashSet::new();
        Self { pairs: pairs.into_iter().filter(|p| seen.insert(p.identity())).collect() }
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }
}

/// Lowercases, drops punctuation other than `-`, `.` and `_` inside
/// words, and splits on whitespace.
pub fn tokenize_nl(text: &str) -> Vec<String> {
    text.split_whitespace()
        .filter_map(|w| {
            let kept: String = w
                .chars()
                .filter(|c| c.is_alphanumeric() || matches!(c, '-' | '.' | '_'))
                .flat_map(char::to_lowercase)
                .collect();
            let kept = kept.trim_matches('.');
            (!kept.is_empty()).then(|| kept.to_string())
        })
        .collect()
}

/// Surface form of a slot filler: the entity label for IRIs, the lexical
/// form for literals.
pub fn filler_surface(source: &dyn KnowledgeSource, term: &Term) -> Result<String, KgError> {
    match term {
        Term::Iri(i) => entity_label(source, i),
        Term::Literal(l) => Ok(l.lexical.clone()),
    }
}

/// Up to `max_per_template` answerable question/query pairs for one
/// template.
pub fn instantiate(
    t: &Template,
    source: &dyn KnowledgeSource,
    max_per_template: usize,
    labels: &dyn Fn(&Term) -> Result<String, KgError>,
    prefixes: &PrefixTable,
) -> Result<Vec<QAPair>, DatasetError> {
    if max_per_template == 0 {
        return Err(DatasetError::InvalidArgument("max_per_template must be at least 1".into()));
    }
    let mut out = Vec::new();
    for inst in instantiations(t, source, max_per_template)? {
        let mut nl = Vec::new();
        for word in &t.nl_pattern {
            let slot = word.strip_prefix('<').and_then(|w| w.strip_suffix('>'));
            match slot.and_then(|s| inst.fillers.iter().find(|(id, _)| id == s)) {
                Some((_, term)) => nl.extend(tokenize_nl(&labels(term)?)),
                None => nl.extend(tokenize_nl(word)),
            }
        }
        let ql = sparql::encode(&inst.query, prefixes)?;
        let entities = inst.fillers.iter().filter_map(|(_, t)| t.as_iri().cloned()).collect();
        out.push(QAPair { nl, ql, template_id: t.id.clone(), key: t.key.clone(), entities });
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DatasetConfig {
    pub max_per_template: usize,
}

impl Default for DatasetConfig {
    fn default() -> Self {
        Self { max_per_template: 40 }
    }
}

/// Union of all template instantiations, deduplicated, in template order
/// then instantiation order.
pub fn build_dataset(
    templates: &[Template],
    source: &dyn KnowledgeSource,
    cfg: &DatasetConfig,
    prefixes: &PrefixTable,
) -> Result<Dataset, DatasetError> {
    let cache: RefCell<BTreeMap<Term, String>> = RefCell::new(BTreeMap::new());
    let labels = |term: &Term| -> Result<String, KgError> {
        if let Some(s) = cache.borrow().get(term) {
            return Ok(s.clone());
        }
        let s = filler_surface(source, term)?;
        cache.borrow_mut().insert(term.clone(), s.clone());
        Ok(s)
    };
    let mut pairs = Vec::new();
    for t in templates {
        pairs.extend(instantiate(t, source, cfg.max_per_template, &labels, prefixes)?);
    }
    let d = Dataset::from_pairs(pairs);
    if d.is_empty() {
        return Err(DatasetError::EmptyDataset);
    }
    Ok(d)
}

/// Writes `{train,valid,test}.{nl,ql}`, `vocab.{nl,ql}`, `splits.json` and
/// `manifest.json` into `dir`.
pub fn write_split_files(dir: &std::path::Path, splits: &Splits) -> Result<(), DatasetError> {
    std::fs::create_dir_all(dir)?;
    for (name, d) in [("train", &splits.train), ("valid", &splits.valid), ("test", &splits.test)] {
        let nl: String = d.pairs.iter().map(|p| p.nl_line() + "\n").collect();
        let ql: String = d.pairs.iter().map(|p| p.ql_line() + "\n").collect();
        std::fs::write(dir.join(format!("{name}.nl")), nl)?;
        std::fs::write(dir.join(format!("{name}.ql")), ql)?;
    }
    for side in [Side::Nl, Side::Ql] {
        let v = build_vocab(&splits.train, side, 1)?;
        std::fs::write(dir.join(format!("vocab.{}", side.extension())), v.to_file_string())?;
    }
    std::fs::write(dir.join("splits.json"), serde_json::to_string(splits)?)?;
    std::fs::write(dir.join("manifest.json"), serde_json::to_string_pretty(&splits.manifest())?)?;
    Ok(())
}

/// Reads a split written by [`write_split_files`].
pub fn read_splits(dir: &std::path::Path) -> Result<Splits, DatasetError> {
    let text = std::fs::read_to_string(dir.join("splits.json"))?;
    Ok(serde_json::from_str(&text)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn nl_tokenization() {
        assert_eq!(tokenize_nl("What is the birth date of Barack Obama?"), [
            "what", "is", "the", "birth", "date", "of", "barack", "obama"
        ]);
        assert_eq!(tokenize_nl("George W. Bush, 1.85 m."), ["george", "w", "bush", "1.85", "m"]);
        assert_eq!(tokenize_nl("Hope, Arkansas 1961-08-04"), ["hope", "arkansas", "1961-08-04"]);
    }
}
