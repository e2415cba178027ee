use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use super::endpoint::SparqlEndpoint;
use super::graph::Graph;
use super::query::query_graph;
use super::results::ResultSet;
use super::term::{self, Iri, Term, OWL, RDFS, XSD};
use super::KgError;
use crate::sparql::{PatternTerm, SparqlQuery, TriplePattern};

/// Anything that can answer fragment queries: a local graph or an endpoint.
pub trait KnowledgeSource {
    fn select(&self, q: &SparqlQuery) -> Result<ResultSet, KgError>;
}

impl KnowledgeSource for Graph {
    fn select(&self, q: &SparqlQuery) -> Result<ResultSet, KgError> {
        query_graph(self, q)
    }
}

impl KnowledgeSource for SparqlEndpoint {
    fn select(&self, q: &SparqlQuery) -> Result<ResultSet, KgError> {
        self.query(q)
    }
}

/// What a property's values look like.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum RangeKind {
    Entity(Iri),
    Numeric,
    Date,
    PlainLiteral,
    Boolean,
}

impl RangeKind {
    pub fn from_range_iri(range: &Iri) -> Self {
        if term::is_numeric_datatype(range) {
            RangeKind::Numeric
        } else if term::is_date_datatype(range) {
            RangeKind::Date
        } else if range.as_str() == format!("{XSD}boolean") {
            RangeKind::Boolean
        } else if range.as_str().starts_with(XSD)
            || range.as_str() == format!("{RDFS}Literal")
            || range.as_str().ends_with("#langString")
        {
            RangeKind::PlainLiteral
        } else {
            RangeKind::Entity(range.clone())
        }
    }

    pub fn is_ordered(&self) -> bool {
        matches!(self, RangeKind::Numeric | RangeKind::Date)
    }

    pub fn entity_class(&self) -> Option<&Iri> {
        match self {
            RangeKind::Entity(c) => Some(c),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct PropertySpec {
    pub iri: Iri,
    pub label: String,
    pub domain: Option<Iri>,
    pub range: RangeKind,
    pub comment: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClassMetadata {
    pub class_iri: Iri,
    pub label: String,
    pub properties: Vec<PropertySpec>,
}

fn var(name: &str) -> PatternTerm {
    PatternTerm::var(name)
}

fn iris(rs: &ResultSet, v: &str) -> BTreeSet<Iri> {
    rs.column(v).filter_map(Term::as_iri).cloned().collect()
}

/// Preferred label: English, then untagged, then the first one seen.
fn pick_label(rs: &ResultSet, v: &str) -> Option<String> {
    let lits: Vec<_> = rs
        .column(v)
        .filter_map(|t| match t {
            Term::Literal(l) if !l.lexical.trim().is_empty() => Some(l),
            _ => None,
        })
        .collect();
    lits.iter()
        .find(|l| l.language.as_deref() == Some("en"))
        .or_else(|| lits.iter().find(|l| l.language.is_none()))
        .or_else(|| lits.first())
        .map(|l| l.lexical.clone())
}

/// Splits `birthDate` into `birth date`; underscores become spaces.
pub fn humanize_local_name(local: &str) -> String {
    let mut out = String::new();
    let mut prev_lower = false;
    for c in local.chars() {
        if c == '_' {
            out.push(' ');
            prev_lower = false;
            continue;
        }
        if c.is_uppercase() && prev_lower {
            out.push(' ');
        }
        prev_lower = c.is_lowercase() || c.is_ascii_digit();
        out.extend(c.to_lowercase());
    }
    out
}

/// rdfs:label of `iri`, falling back to its local name with underscores
/// turned into spaces.
pub fn entity_label(source: &dyn KnowledgeSource, iri: &Iri) -> Result<String, KgError> {
    let q = SparqlQuery::select(&["l"], vec![TriplePattern::new(iri.clone(), term::rdfs("label"), var("l"))]);
    let rs = source.select(&q)?;
    Ok(pick_label(&rs, "l").unwrap_or_else(|| iri.local_name().replace('_', " ")))
}

fn single_values(source: &dyn KnowledgeSource, subject: &Iri, predicate: Iri) -> Result<ResultSet, KgError> {
    source.select(&SparqlQuery::select(&["v"], vec![TriplePattern::new(subject.clone(), predicate, var("v"))]))
}

/// Collects label, domain, range and comment for every property of a class.
///
/// Properties come from `rdfs:domain` declarations; when the class has none,
/// properties used by its instances are taken instead.
pub fn fetch_class_metadata(source: &dyn KnowledgeSource, class_iri: &Iri) -> Result<ClassMetadata, KgError> {
    let declared = source.select(
        &SparqlQuery::select(&["p"], vec![TriplePattern::new(var("p"), term::rdfs("domain"), class_iri.clone())])
            .distinct(),
    )?;
    let mut props = iris(&declared, "p");
    let by_declaration = !props.is_empty();
    if !by_declaration {
        let used = source.select(
            &SparqlQuery::select(
                &["p"],
                vec![
                    TriplePattern::new(var("s"), term::rdf("type"), class_iri.clone()),
                    TriplePattern::new(var("s"), var("p"), var("o")),
                ],
            )
            .distinct(),
        )?;
        let skip = [term::rdf("type"), term::rdfs("label"), term::rdfs("comment")];
        props = iris(&used, "p").into_iter().filter(|p| !skip.contains(p)).collect();
    }
    if props.is_empty() {
        return Err(KgError::NotFound(format!("class {class_iri} has no properties")));
    }

    let class_label = pick_label(&single_values(source, class_iri, term::rdfs("label"))?, "v")
        .unwrap_or_else(|| humanize_local_name(class_iri.local_name()));

    let mut properties = Vec::with_capacity(props.len());
    for p in props {
        let label = pick_label(&single_values(source, &p, term::rdfs("label"))?, "v")
            .unwrap_or_else(|| humanize_local_name(p.local_name()));
        let comment = pick_label(&single_values(source, &p, term::rdfs("comment"))?, "v");
        let declared_range = iris(&single_values(source, &p, term::rdfs("range"))?, "v").into_iter().next();
        let range = match declared_range {
            Some(r) => RangeKind::from_range_iri(&r),
            None => observed_range(source, &p)?,
        };
        properties.push(PropertySpec {
            iri: p,
            label: label.to_lowercase(),
            domain: by_declaration.then(|| class_iri.clone()),
            range,
            comment,
        });
    }
    Ok(ClassMetadata { class_iri: class_iri.clone(), label: class_label.to_lowercase(), properties })
}

/// Infers a range from a sample of the property's objects.
fn observed_range(source: &dyn KnowledgeSource, p: &Iri) -> Result<RangeKind, KgError> {
    let sample = source.select(
        &SparqlQuery::select(&["o"], vec![TriplePattern::new(var("s"), p.clone(), var("o"))]).limit(100),
    )?;
    let objects: Vec<&Term> = sample.column("o").collect();
    let kind = if objects.iter().all(|o| matches!(o, Term::Iri(_))) {
        RangeKind::Entity(Iri::new(format!("{OWL}Thing")).expect("valid IRI"))
    } else if objects.iter().all(|o| matches!(o, Term::Literal(l) if l.numeric_value().is_some())) {
        RangeKind::Numeric
    } else if objects.iter().all(|o| matches!(o, Term::Literal(l) if l.is_date())) {
        RangeKind::Date
    } else {
        RangeKind::PlainLiteral
    };
    Ok(kind)
}

/// Distinct subjects having `property`, lexicographic by IRI, at most
/// `limit` of them, each paired with its surface label.
pub fn entities_with_property(
    source: &dyn KnowledgeSource,
    property: &Iri,
    limit: usize,
) -> Result<Vec<(Iri, String)>, KgError> {
    if limit == 0 {
        return Err(KgError::InvalidArgument("limit must be at least 1".into()));
    }
    let mut q = SparqlQuery::select(&["a"], vec![TriplePattern::new(var("a"), property.clone(), var("o"))])
        .distinct()
        .order_by("a", false);
    if limit != usize::MAX {
        q = q.limit(limit as u64);
    }
    let rs = source.select(&q)?;
    let subjects: Vec<Iri> = rs.column("a").filter_map(Term::as_iri).cloned().collect();
    subjects
        .into_iter()
        .map(|s| {
            let label = entity_label(source, &s)?;
            Ok((s, label))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kg::ntriples;

    fn graph(text: &str) -> Graph {
        Graph::from_triples(ntriples::parse_str(text).unwrap())
    }

    #[test]
    fn humanizes_local_names() {
        assert_eq!(humanize_local_name("birthDate"), "birth date");
        assert_eq!(humanize_local_name("Barack_Obama"), "barack obama");
    }

    #[test]
    fn class_without_properties_is_not_found() {
        let g = graph("<http://x/a> <http://x/p> <http://x/b> .");
        let class = Iri::new("http://x/C").unwrap();
        assert!(matches!(fetch_class_metadata(&g, &class), Err(KgError::NotFound(_))));
    }

    #[test]
    fn declared_date_range_forces_kind() {
        let g = graph(
            r#"<http://x/born> <http://www.w3.org/2000/01/rdf-schema#domain> <http://x/C> .
<http://x/born> <http://www.w3.org/2000/01/rdf-schema#range> <http://www.w3.org/2001/XMLSchema#date> .
<http://x/born> <http://www.w3.org/2000/01/rdf-schema#label> "Geburt"@de .
<http://x/born> <http://www.w3.org/2000/01/rdf-schema#label> "Birth Date"@en ."#,
        );
        let meta = fetch_class_metadata(&g, &Iri::new("http://x/C").unwrap()).unwrap();
        assert_eq!(meta.properties.len(), 1);
        assert_eq!(meta.properties[0].range, RangeKind::Date);
        assert_eq!(meta.properties[0].label, "birth date");
        assert_eq!(meta.label, "c");
    }

    #[test]
    fn usage_based_properties_without_declarations() {
        let g = graph(
            r#"<http://x/a> <http://www.w3.org/1999/02/22-rdf-syntax-ns#type> <http://x/C> .
<http://x/a> <http://x/weight> "12"^^<http://www.w3.org/2001/XMLSchema#integer> .
<http://x/a> <http://x/friend> <http://x/b> ."#,
        );
        let meta = fetch_class_metadata(&g, &Iri::new("http://x/C").unwrap()).unwrap();
        let kinds: Vec<_> = meta.properties.iter().map(|p| (p.label.as_str(), p.range.clone())).collect();
        assert_eq!(kinds[1], ("weight", RangeKind::Numeric));
        assert!(matches!(kinds[0].1, RangeKind::Entity(_)));
        assert!(meta.properties.iter().all(|p| p.domain.is_none()));
    }

    #[test]
    fn entity_enumeration_order_and_labels() {
        let g = graph(
            r#"<http://x/c> <http://x/p> "1" .
<http://x/a> <http://x/p> "2" .
<http://x/a> <http://x/p> "3" .
<http://x/b_b> <http://x/p> "4" .
<http://x/a> <http://www.w3.org/2000/01/rdf-schema#label> "Alpha" ."#,
        );
        let p = Iri::new("http://x/p").unwrap();
        let all = entities_with_property(&g, &p, usize::MAX).unwrap();
        let names: Vec<_> = all.iter().map(|(_, l)| l.as_str()).collect();
        assert_eq!(names, ["Alpha", "b b", "c"]);
        let one = entities_with_property(&g, &p, 1).unwrap();
        assert_eq!(one[0].0.as_str(), "http://x/a");
        let absent = Iri::new("http://x/none").unwrap();
        assert!(entities_with_property(&g, &absent, 5).unwrap().is_empty());
        assert!(entities_with_property(&g, &p, 0).is_err());
    }
}
