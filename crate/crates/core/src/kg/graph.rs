use std::collections::{BTreeMap, BTreeSet};
use std::fs::File;
use std::io::BufReader;
use std::path::Path;

use super::ntriples;
use super::term::{Iri, Term, Triple};
use super::KgError;

/// An immutable in-memory triple set with subject and predicate indexes.
///
/// Triples are kept sorted, so every scan is deterministic.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Graph {
    triples: Vec<Triple>,
    by_subject: BTreeMap<Iri, Vec<usize>>,
    by_predicate: BTreeMap<Iri, Vec<usize>>,
}

impl Graph {
    pub fn from_triples(triples: impl IntoIterator<Item = Triple>) -> Self {
        let set: BTreeSet<Triple> = triples.into_iter().collect();
        let triples: Vec<Triple> = set.into_iter().collect();
        let mut by_subject: BTreeMap<Iri, Vec<usize>> = BTreeMap::new();
        let mut by_predicate: BTreeMap<Iri, Vec<usize>> = BTreeMap::new();
        for (i, t) in triples.iter().enumerate() {
            by_subject.entry(t.subject.clone()).or_default().push(i);
            by_predicate.entry(t.predicate.clone()).or_default().push(i);
        }
        Self { triples, by_subject, by_predicate }
    }

    pub fn len(&self) -> usize {
        self.triples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.triples.is_empty()
    }

    pub fn triples(&self) -> &[Triple] {
        &self.triples
    }

    pub fn with_subject<'a>(&'a self, subject: &Iri) -> impl Iterator<Item = &'a Triple> + 'a {
        self.lookup(&self.by_subject, subject)
    }

    pub fn with_predicate<'a>(&'a self, predicate: &Iri) -> impl Iterator<Item = &'a Triple> + 'a {
        self.lookup(&self.by_predicate, predicate)
    }

    fn lookup<'a>(&'a self, index: &'a BTreeMap<Iri, Vec<usize>>, key: &Iri) -> impl Iterator<Item = &'a Triple> + 'a {
        index
            .get(key)
            .map(Vec::as_slice)
            .unwrap_or_default()
            .iter()
            .map(|&i| &self.triples[i])
    }

    pub fn contains(&self, triple: &Triple) -> bool {
        self.triples.binary_search(triple).is_ok()
    }

    /// Objects of `(subject, predicate, ?)`, in sorted order.
    pub fn objects<'a>(&'a self, subject: &Iri, predicate: &'a Iri) -> impl Iterator<Item = &'a Term> + 'a {
        self.with_subject(subject).filter(move |t| &t.predicate == predicate).map(|t| &t.object)
    }
}

/// Reads an N-Triples file into a [`Graph`], collapsing duplicate triples.
pub fn load_local_graph(path: impl AsRef<Path>) -> Result<Graph, KgError> {
    let file = File::open(path.as_ref())?;
    let triples = ntriples::parse(BufReader::new(file))?;
    Ok(Graph::from_triples(triples))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kg::term::Literal;

    fn iri(s: &str) -> Iri {
        Iri::new(format!("http://x/{s}")).unwrap()
    }

    #[test]
    fn duplicates_collapse() {
        let t = Triple { subject: iri("a"), predicate: iri("p"), object: iri("b").into() };
        let g = Graph::from_triples([t.clone(), t.clone()]);
        assert_eq!(g.len(), 1);
        assert!(g.contains(&t));
    }

    #[test]
    fn indexes_return_exact_matches() {
        let g = Graph::from_triples([
            Triple { subject: iri("a"), predicate: iri("p"), object: iri("b").into() },
            Triple { subject: iri("a"), predicate: iri("q"), object: Literal::plain("x").into() },
            Triple { subject: iri("c"), predicate: iri("p"), object: iri("a").into() },
        ]);
        assert_eq!(g.with_subject(&iri("a")).count(), 2);
        assert_eq!(g.with_predicate(&iri("p")).count(), 2);
        assert!(g.with_predicate(&iri("p")).all(|t| t.predicate == iri("p")));
        assert_eq!(g.with_subject(&iri("zzz")).count(), 0);
        assert_eq!(g.objects(&iri("a"), &iri("p")).collect::<Vec<_>>(), vec![&Term::Iri(iri("b"))]);
    }

    #[test]
    fn empty_file_gives_empty_graph() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("empty.nt");
        std::fs::write(&path, "").unwrap();
        assert!(load_local_graph(&path).unwrap().is_empty());
        assert!(matches!(load_local_graph(dir.path().join("missing.nt")), Err(KgError::Io(_))));
    }
}
