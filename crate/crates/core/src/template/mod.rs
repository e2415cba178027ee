//! Bottom-up template generation: one plain question per property,
//! ASK/comparative/superlative/count variants, and property-chain
//! compositions up to a maximum depth.

mod instances;

use std::collections::BTreeSet;
use std::fmt;
use std::io::Write;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::kg::{ClassMetadata, Iri, KnowledgeSource, KgError, PrefixTable, PropertySpec, RangeKind, OWL};
use crate::sparql::{self, CodecError, CompareOp, PatternTerm, SparqlQuery, TriplePattern};

pub use instances::{instantiations, Instantiation};

/// Slot filled by the subject entity of a chain.
pub const SUBJECT_SLOT: &str = "A";
/// Slot filled by a value (ASK object, comparison constant).
pub const VALUE_SLOT: &str = "V";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Slot {
    pub id: String,
    pub fills: RangeKind,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum VariantKind {
    Plain,
    Ask,
    Comparative(CompareOp),
    Superlative { descending: bool },
    Count,
}

impl VariantKind {
    /// Variants that attach to a plain template whose answers have kind
    /// `range`. Ordered ranges get comparisons, superlatives and counts;
    /// every range gets ASK.
    pub fn applicable(range: &RangeKind) -> Vec<VariantKind> {
        let mut out = vec![VariantKind::Ask];
        if range.is_ordered() {
            out.extend(CompareOp::ALL.map(VariantKind::Comparative));
            out.push(VariantKind::Superlative { descending: true });
            out.push(VariantKind::Superlative { descending: false });
            out.push(VariantKind::Count);
        }
        out
    }

    pub fn name(self) -> &'static str {
        match self {
            VariantKind::Plain => "plain",
            VariantKind::Ask => "ask",
            VariantKind::Comparative(CompareOp::Lt) => "comparative_lt",
            VariantKind::Comparative(CompareOp::Gt) => "comparative_gt",
            VariantKind::Comparative(CompareOp::Eq) => "comparative_eq",
            VariantKind::Superlative { descending: true } => "superlative_desc",
            VariantKind::Superlative { descending: false } => "superlative_asc",
            VariantKind::Count => "count",
        }
    }
}

impl fmt::Display for VariantKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Structural identity of a template: its property chain (outermost
/// first) and variant.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct CompositionKey {
    pub property_chain: Vec<Iri>,
    pub variant: VariantKind,
}

impl CompositionKey {
    pub fn depth(&self) -> usize {
        self.property_chain.len()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Template {
    pub id: String,
    pub nl_pattern: Vec<String>,
    pub query_pattern: SparqlQuery,
    pub slots: Vec<Slot>,
    pub depth: usize,
    pub key: CompositionKey,
    pub class_iri: Iri,
    /// Kind of the chain's answers (range of the outermost property).
    pub answer: RangeKind,
    /// Lexicalized property phrases, outermost first.
    pub phrases: Vec<String>,
    pub class_phrase: String,
}

#[derive(Debug, thiserror::Error)]
pub enum TemplateError {
    #[error("variants only derive from plain templates, got {0}")]
    Variant(VariantKind),
    #[error("cannot compose: {0}")]
    Compose(String),
    #[error("composition would exceed the maximum depth {0}")]
    DepthExceeded(usize),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error(transparent)]
    Kg(#[from] KgError),
    #[error(transparent)]
    Codec(#[from] CodecError),
}

/// Default lexicalization: the property's label, lowercased.
pub fn label_lexicalizer(p: &PropertySpec) -> String {
    p.label.to_lowercase()
}

fn words(s: &str) -> Vec<String> {
    s.split_whitespace().map(str::to_string).collect()
}

fn template_id(class: &Iri, key: &CompositionKey) -> String {
    let mut h = Sha256::new();
    h.update(class.as_str());
    for p in &key.property_chain {
        h.update(b"\x1f");
        h.update(p.as_str());
    }
    h.update(b"\x1e");
    h.update(key.variant.name());
    hex::encode(&h.finalize()[..6])
}

/// Fresh intermediate variables ?i0, ?i1, ... run from the subject slot
/// towards the answer; the last pattern binds `answer`.
fn chain_patterns(chain: &[Iri], subject: PatternTerm, answer: PatternTerm) -> Vec<TriplePattern> {
    let n = chain.len();
    let mut patterns = Vec::with_capacity(n);
    let mut current = subject;
    for (k, p) in chain.iter().rev().enumerate() {
        let next = if k + 1 == n { answer.clone() } else { PatternTerm::Var(format!("i{k}")) };
        patterns.push(TriplePattern::new(current, p.clone(), next.clone()));
        current = next;
    }
    patterns
}

fn chain_phrase(phrases: &[String]) -> String {
    phrases.join(" of the ")
}

fn build(
    class_iri: &Iri,
    class_phrase: &str,
    chain: Vec<Iri>,
    phrases: Vec<String>,
    answer: RangeKind,
    variant: VariantKind,
) -> Template {
    let depth = chain.len();
    let subject_slot = Slot { id: SUBJECT_SLOT.into(), fills: RangeKind::Entity(class_iri.clone()) };
    let value_slot = Slot { id: VALUE_SLOT.into(), fills: answer.clone() };
    let a = PatternTerm::slot(SUBJECT_SLOT);
    let v = PatternTerm::slot(VALUE_SLOT);
    let phrase = chain_phrase(&phrases);
    let is_date = answer == RangeKind::Date;
    let (nl, query, slots) = match variant {
        VariantKind::Plain => (
            format!("what is the {phrase} of <A>"),
            SparqlQuery::select(&["x"], chain_patterns(&chain, a, PatternTerm::var("x"))),
            vec![subject_slot],
        ),
        VariantKind::Ask => (
            format!("is the {phrase} of <A> <V>"),
            SparqlQuery::ask(chain_patterns(&chain, a, v)),
            vec![subject_slot, value_slot],
        ),
        VariantKind::Comparative(op) => {
            let op_phrase = match (op, is_date) {
                (CompareOp::Lt, false) => "less than",
                (CompareOp::Gt, false) => "greater than",
                (CompareOp::Eq, false) => "equal to",
                (CompareOp::Lt, true) => "before",
                (CompareOp::Gt, true) => "after",
                (CompareOp::Eq, true) => "on",
            };
            (
                format!("which {class_phrase} has {phrase} {op_phrase} <V>"),
                SparqlQuery::select(&["a"], chain_patterns(&chain, PatternTerm::var("a"), PatternTerm::var("v")))
                    .filter("v", op, v),
                vec![value_slot],
            )
        }
        VariantKind::Superlative { descending } => {
            let extreme = match (descending, is_date) {
                (true, false) => "highest",
                (false, false) => "lowest",
                (true, true) => "latest",
                (false, true) => "earliest",
            };
            (
                format!("which {class_phrase} has the {extreme} {phrase}"),
                SparqlQuery::select(&["a"], chain_patterns(&chain, PatternTerm::var("a"), PatternTerm::var("v")))
                    .order_by("v", descending)
                    .limit(1),
                vec![],
            )
        }
        VariantKind::Count => (
            format!(
                "how many {class_phrase}s have {phrase} {} <V>",
                if is_date { "after" } else { "greater than" }
            ),
            SparqlQuery::count("a", chain_patterns(&chain, PatternTerm::var("a"), PatternTerm::var("v")))
                .filter("v", CompareOp::Gt, v),
            vec![value_slot],
        ),
    };
    let key = CompositionKey { property_chain: chain, variant };
    Template {
        id: template_id(class_iri, &key),
        nl_pattern: words(&nl),
        query_pattern: query,
        slots,
        depth,
        key,
        class_iri: class_iri.clone(),
        answer,
        phrases,
        class_phrase: class_phrase.to_string(),
    }
}

/// One depth-1 plain template per property, in metadata order.
pub fn base_templates(meta: &ClassMetadata, lexicalize: &dyn Fn(&PropertySpec) -> String) -> Vec<Template> {
    meta.properties
        .iter()
        .map(|p| {
            build(
                &meta.class_iri,
                &meta.label,
                vec![p.iri.clone()],
                vec![lexicalize(p)],
                p.range.clone(),
                VariantKind::Plain,
            )
        })
        .collect()
}

/// ASK, comparative, superlative and count variants of a plain template,
/// according to [`VariantKind::applicable`].
pub fn variant_templates(t: &Template) -> Result<Vec<Template>, TemplateError> {
    if t.key.variant != VariantKind::Plain {
        return Err(TemplateError::Variant(t.key.variant));
    }
    Ok(VariantKind::applicable(&t.answer)
        .into_iter()
        .map(|v| build(&t.class_iri, &t.class_phrase, t.key.property_chain.clone(), t.phrases.clone(), t.answer.clone(), v))
        .collect())
}

fn domain_compatible(outer: &PropertySpec, answer: &RangeKind) -> bool {
    let RangeKind::Entity(class) = answer else {
        return false;
    };
    match &outer.domain {
        None => true,
        Some(d) => d == class || class.as_str() == format!("{OWL}Thing"),
    }
}

/// Chains `outer` onto the answer of a plain template: the question asks
/// for the outer property of the inner answer.
pub fn compose(
    outer: &PropertySpec,
    inner: &Template,
    lexicalize: &dyn Fn(&PropertySpec) -> String,
    max_depth: usize,
) -> Result<Template, TemplateError> {
    if inner.key.variant != VariantKind::Plain {
        return Err(TemplateError::Compose(format!("inner template is {}", inner.key.variant)));
    }
    if inner.depth + 1 > max_depth {
        return Err(TemplateError::DepthExceeded(max_depth));
    }
    if !domain_compatible(outer, &inner.answer) {
        return Err(TemplateError::Compose(format!(
            "{} does not apply to answers of kind {:?}",
            outer.iri, inner.answer
        )));
    }
    let mut chain = vec![outer.iri.clone()];
    chain.extend(inner.key.property_chain.iter().cloned());
    let mut phrases = vec![lexicalize(outer)];
    phrases.extend(inner.phrases.iter().cloned());
    Ok(build(&inner.class_iri, &inner.class_phrase, chain, phrases, outer.range.clone(), VariantKind::Plain))
}

fn satisfiable(t: &Template, source: &dyn KnowledgeSource) -> Result<bool, TemplateError> {
    Ok(!instantiations(t, source, 1)?.is_empty())
}

/// All satisfiable base templates, their compositions up to `max_depth`,
/// and the variants of each, ordered by (depth, key).
pub fn generate_to_depth(
    meta: &ClassMetadata,
    source: &dyn KnowledgeSource,
    max_depth: usize,
    lexicalize: &dyn Fn(&PropertySpec) -> String,
) -> Result<Vec<Template>, TemplateError> {
    if max_depth == 0 {
        return Err(TemplateError::InvalidArgument("max_depth must be at least 1".into()));
    }
    let mut plain: Vec<Template> = Vec::new();
    let mut frontier: Vec<Template> = Vec::new();
    for t in base_templates(meta, lexicalize) {
        if satisfiable(&t, source)? {
            frontier.push(t);
        }
    }
    for _ in 1..max_depth {
        let mut next = Vec::new();
        for inner in &frontier {
            for outer in &meta.properties {
                if let Ok(t) = compose(outer, inner, lexicalize, max_depth) {
                    if satisfiable(&t, source)? {
                        next.push(t);
                    }
                }
            }
        }
        plain.append(&mut frontier);
        frontier = next;
    }
    plain.append(&mut frontier);

    let mut seen = BTreeSet::new();
    let mut out = Vec::new();
    for t in &plain {
        let mut candidates = vec![t.clone()];
        candidates.extend(variant_templates(t)?);
        for c in candidates {
            if seen.contains(&c.key) || !satisfiable(&c, source)? {
                continue;
            }
            seen.insert(c.key.clone());
            out.push(c);
        }
    }
    out.sort_by(|a, b| (a.depth, &a.key).cmp(&(b.depth, &b.key)));
    Ok(out)
}

/// Writes the annotation TSV: id, depth, variant, property chain,
/// NL pattern, encoded query pattern.
pub fn write_templates_tsv<W: Write>(mut out: W, templates: &[Template], prefixes: &PrefixTable) -> Result<(), TemplateError> {
    let io = |e: std::io::Error| TemplateError::Kg(KgError::Io(e));
    writeln!(out, "id\tdepth\tvariant\tproperty_chain\tnl_pattern\tencoded_query_pattern").map_err(io)?;
    for t in templates {
        let chain: Vec<&str> = t.key.property_chain.iter().map(Iri::as_str).collect();
        let encoded = sparql::encode(&t.query_pattern, prefixes)?;
        writeln!(
            out,
            "{}\t{}\t{}\t{}\t{}\t{}",
            t.id,
            t.depth,
            t.key.variant,
            chain.join(";"),
            t.nl_pattern.join(" "),
            encoded
        )
        .map_err(io)?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kg::{ntriples, Graph, Iri};

    fn dbo(local: &str) -> Iri {
        Iri::new(format!("http://dbpedia.org/ontology/{local}")).unwrap()
    }

    fn prop(local: &str, label: &str, range: RangeKind) -> PropertySpec {
        PropertySpec { iri: dbo(local), label: label.into(), domain: Some(dbo("Person")), range, comment: None }
    }

    fn meta(props: Vec<PropertySpec>) -> ClassMetadata {
        ClassMetadata { class_iri: dbo("Person"), label: "person".into(), properties: props }
    }

    fn person() -> RangeKind {
        RangeKind::Entity(dbo("Person"))
    }

    fn encoded(t: &Template) -> String {
        sparql::encode(&t.query_pattern, &PrefixTable::default()).unwrap().to_string()
    }

    #[test]
    fn base_template_shape() {
        let m = meta(vec![prop("birthDate", "birth date", RangeKind::Date)]);
        let ts = base_templates(&m, &label_lexicalizer);
        assert_eq!(ts.len(), 1);
        assert_eq!(ts[0].nl_pattern.join(" "), "what is the birth date of <A>");
        assert_eq!(
            sparql::to_sparql(&ts[0].query_pattern, Some(&PrefixTable::default())),
            "SELECT ?x WHERE { <A> dbo:birthDate ?x }"
        );
        assert_eq!(ts[0].depth, 1);
        assert!(base_templates(&meta(vec![]), &label_lexicalizer).is_empty());
    }

    #[test]
    fn variant_counts_follow_range() {
        let m = meta(vec![
            prop("spouse", "spouse", person()),
            prop("height", "height", RangeKind::Numeric),
        ]);
        let base = base_templates(&m, &label_lexicalizer);
        let entity_variants = variant_templates(&base[0]).unwrap();
        assert_eq!(entity_variants.len(), 1);
        assert_eq!(entity_variants[0].key.variant, VariantKind::Ask);
        assert_eq!(variant_templates(&base[1]).unwrap().len(), 7);
        assert!(matches!(variant_templates(&entity_variants[0]), Err(TemplateError::Variant(VariantKind::Ask))));
    }

    #[test]
    fn variant_queries() {
        let m = meta(vec![prop("height", "height", RangeKind::Numeric)]);
        let base = base_templates(&m, &label_lexicalizer);
        let vs = variant_templates(&base[0]).unwrap();
        let by = |v: VariantKind| vs.iter().find(|t| t.key.variant == v).unwrap();
        assert_eq!(encoded(by(VariantKind::Ask)), "ask where brack_open <A> dbo_height <V> brack_close");
        assert_eq!(
            encoded(by(VariantKind::Comparative(CompareOp::Lt))),
            "select var_a where brack_open var_a dbo_height var_v sep_dot filter par_open var_v math_lt <V> par_close brack_close"
        );
        assert_eq!(
            encoded(by(VariantKind::Superlative { descending: true })),
            "select var_a where brack_open var_a dbo_height var_v brack_close order by desc par_open var_v par_close limit 1"
        );
        assert_eq!(
            by(VariantKind::Superlative { descending: true }).nl_pattern.join(" "),
            "which person has the highest height"
        );
        assert_eq!(
            encoded(by(VariantKind::Count)),
            "select count par_open var_a par_close where brack_open var_a dbo_height var_v sep_dot filter par_open var_v math_gt <V> par_close brack_close"
        );
    }

    #[test]
    fn composition_chains_through_fresh_variables() {
        let spouse = prop("spouse", "spouse", person());
        let birth = prop("birthDate", "birth date", RangeKind::Date);
        let m = meta(vec![spouse.clone(), birth.clone()]);
        let base = base_templates(&m, &label_lexicalizer);
        let t = compose(&birth, &base[0], &label_lexicalizer, 2).unwrap();
        assert_eq!(
            sparql::to_sparql(&t.query_pattern, Some(&PrefixTable::default())),
            "SELECT ?x WHERE { <A> dbo:spouse ?i0 . ?i0 dbo:birthDate ?x }"
        );
        assert_eq!(t.nl_pattern.join(" "), "what is the birth date of the spouse of <A>");
        assert_eq!(t.key.property_chain, vec![dbo("birthDate"), dbo("spouse")]);
        assert_eq!(t.depth, 2);
        assert!(matches!(compose(&birth, &base[0], &label_lexicalizer, 1), Err(TemplateError::DepthExceeded(1))));
        assert!(matches!(compose(&spouse, &base[1], &label_lexicalizer, 3), Err(TemplateError::Compose(_))));
    }

    #[test]
    fn three_level_chain_decodes_structurally() {
        let p = prop("parent", "parent", person());
        let s = prop("spouse", "spouse", person());
        let h = prop("height", "height", RangeKind::Numeric);
        let m = meta(vec![s.clone()]);
        let base = base_templates(&m, &label_lexicalizer);
        let t2 = compose(&p, &base[0], &label_lexicalizer, 3).unwrap();
        let t3 = compose(&h, &t2, &label_lexicalizer, 3).unwrap();
        assert_eq!(t3.key.property_chain, vec![dbo("height"), dbo("parent"), dbo("spouse")]);
        let toks = sparql::encode(&t3.query_pattern, &PrefixTable::default()).unwrap();
        let decoded = sparql::decode(&toks, &PrefixTable::default()).unwrap();
        assert_eq!(decoded.patterns.len(), 3);
        let preds: Vec<_> = decoded.patterns.iter().map(|p| p.predicate.clone()).collect();
        assert_eq!(preds, vec![dbo("spouse").into(), dbo("parent").into(), dbo("height").into()]);
    }

    #[test]
    fn generation_on_small_graph() {
        let g = Graph::from_triples(
            ntriples::parse_str(
                "<http://dbpedia.org/resource/A> <http://dbpedia.org/ontology/spouse> <http://dbpedia.org/resource/B> .",
            )
            .unwrap(),
        );
        let m = meta(vec![prop("spouse", "spouse", person())]);
        let ts = generate_to_depth(&m, &g, 1, &label_lexicalizer).unwrap();
        assert_eq!(ts.len(), 2);
        assert!(generate_to_depth(&m, &g, 0, &label_lexicalizer).is_err());
        // spouse of spouse is unsatisfiable here: B has no spouse.
        let deeper = generate_to_depth(&m, &g, 2, &label_lexicalizer).unwrap();
        assert_eq!(deeper.len(), 2);
    }

    #[test]
    fn ids_are_stable_and_distinct() {
        let m = meta(vec![
            prop("spouse", "spouse", person()),
            prop("height", "height", RangeKind::Numeric),
        ]);
        let a = base_templates(&m, &label_lexicalizer);
        let b = base_templates(&m, &label_lexicalizer);
        assert_eq!(a, b);
        assert_ne!(a[0].id, a[1].id);
    }
}
