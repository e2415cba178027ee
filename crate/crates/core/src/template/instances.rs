//! Enumeration of answerable slot fillings for a template, shared by the
//! ranker and the dataset builder.

use std::cmp::Ordering;
use std::collections::BTreeSet;

use crate::kg::{compare_values, Binding, Iri, KgError, KnowledgeSource, Term};
use crate::sparql::{PatternTerm, QueryForm, SparqlQuery};

use super::Template;

#[derive(Debug, Clone, PartialEq)]
pub struct Instantiation {
    /// (slot id, filler) in slot order.
    pub fillers: Vec<(String, Term)>,
    /// The template query with every slot filled.
    pub query: SparqlQuery,
    /// Entities along the property chain in the first witness solution:
    /// the chain subject, each intermediate, and the answer when it is an
    /// entity.
    pub route: Vec<Iri>,
}

fn slot_var(slot: &str) -> String {
    format!("slot_{slot}")
}

fn value_order(a: &Term, b: &Term) -> Ordering {
    compare_values(a, b).unwrap_or_else(|| a.cmp(b))
}

fn answerable(q: &SparqlQuery, source: &dyn KnowledgeSource) -> Result<bool, KgError> {
    let rs = source.select(q)?;
    if let Some(b) = rs.boolean {
        return Ok(b);
    }
    if q.count.is_some() {
        let n = rs.rows.first().and_then(|r| r.get("count")).and_then(|t| match t {
            Term::Literal(l) => l.numeric_value(),
            _ => None,
        });
        return Ok(n.is_some_and(|n| n > 0.0));
    }
    Ok(!rs.rows.is_empty())
}

fn resolve(t: &PatternTerm, row: &Binding) -> Option<Term> {
    match t {
        PatternTerm::Iri(i) => Some(Term::Iri(i.clone())),
        PatternTerm::Literal(l) => Some(Term::Literal(l.clone())),
        PatternTerm::Var(v) => row.get(v).cloned(),
        PatternTerm::Slot(_) => None,
    }
}

fn route(q: &SparqlQuery, source: &dyn KnowledgeSource) -> Result<Vec<Iri>, KgError> {
    let mut witness = q.clone();
    witness.form = QueryForm::Select;
    witness.count = None;
    witness.distinct = false;
    witness.projection = q.pattern_vars().into_iter().map(str::to_string).collect();
    if witness.projection.is_empty() {
        // Fully ground chain: every position is a constant.
        witness.order_by = None;
        witness.limit = None;
        witness.offset = None;
    }
    let row = if witness.projection.is_empty() {
        Binding::new()
    } else {
        source.select(&witness)?.rows.into_iter().next().unwrap_or_default()
    };
    let mut positions = Vec::new();
    if let Some(first) = q.patterns.first() {
        positions.push(&first.subject);
    }
    positions.extend(q.patterns.iter().map(|p| &p.object));
    Ok(positions
        .into_iter()
        .filter_map(|t| match resolve(t, &row) {
            Some(Term::Iri(i)) => Some(i),
            _ => None,
        })
        .collect())
}

/// Answerable fillings of `template` over `graph`, at most `limit`.
///
/// Slots occurring in triple patterns take their candidate values from the
/// template's patterns evaluated with slots as variables, in term order.
/// Slots occurring only in filters take the distinct values of the
/// filtered variable, in value order. Candidates are tried in that order
/// and kept when the filled query has an answer.
pub fn instantiations(template: &Template, source: &dyn KnowledgeSource, limit: usize) -> Result<Vec<Instantiation>, KgError> {
    let q = &template.query_pattern;
    let slots: Vec<String> = q.slots().into_iter().map(str::to_string).collect();
    let in_patterns: BTreeSet<&str> =
        q.patterns.iter().flat_map(|p| p.terms()).filter_map(|t| match t {
            PatternTerm::Slot(s) => Some(s.as_str()),
            _ => None,
        }).collect();
    let pattern_slots: Vec<&String> = slots.iter().filter(|s| in_patterns.contains(s.as_str())).collect();
    let filter_slots: Vec<&String> = slots.iter().filter(|s| !in_patterns.contains(s.as_str())).collect();

    let mut relaxed = q.clone();
    for s in &pattern_slots {
        relaxed.fill_slot(s, &PatternTerm::Var(slot_var(s)));
    }
    relaxed.filters.clear();
    relaxed.form = QueryForm::Select;
    relaxed.count = None;
    relaxed.order_by = None;
    relaxed.limit = None;
    relaxed.offset = None;
    relaxed.distinct = true;
    relaxed.projection = relaxed.pattern_vars().into_iter().map(str::to_string).collect();
    let rows = if relaxed.projection.is_empty() {
        vec![Binding::new()]
    } else {
        source.select(&relaxed)?.rows
    };

    let tuples: BTreeSet<Vec<Term>> = rows
        .iter()
        .filter_map(|r| pattern_slots.iter().map(|s| r.get(&slot_var(s)).cloned()).collect::<Option<Vec<_>>>())
        .collect();

    let mut filter_values: Vec<Vec<Term>> = Vec::new();
    for s in &filter_slots {
        let var = q
            .filters
            .iter()
            .find(|f| matches!(&f.value, PatternTerm::Slot(x) if x == *s))
            .map(|f| f.var.clone())
            .expect("filter-only slot occurs in a filter");
        let mut values: Vec<Term> = rows.iter().filter_map(|r| r.get(&var).cloned()).collect::<BTreeSet<_>>().into_iter().collect();
        values.sort_by(value_order);
        values.dedup_by(|a, b| value_order(a, b) == Ordering::Equal);
        filter_values.push(values);
    }

    let mut combos: Vec<Vec<Term>> = vec![Vec::new()];
    for values in &filter_values {
        combos = combos
            .into_iter()
            .flat_map(|prefix| {
                values.iter().map(move |v| {
                    let mut c = prefix.clone();
                    c.push(v.clone());
                    c
                })
            })
            .collect();
    }

    let mut out = Vec::new();
    if limit == 0 {
        return Ok(out);
    }
    for tuple in &tuples {
        for combo in &combos {
            let mut filled = q.clone();
            let mut fillers = Vec::with_capacity(slots.len());
            for (s, term) in pattern_slots.iter().copied().zip(tuple).chain(filter_slots.iter().copied().zip(combo)) {
                filled.fill_slot(s, &PatternTerm::from(term.clone()));
                fillers.push((s.clone(), term.clone()));
            }
            fillers.sort_by_key(|(s, _)| slots.iter().position(|x| x == s));
            if answerable(&filled, source)? {
                let route = route(&filled, source)?;
                out.push(Instantiation { fillers, query: filled, route });
                if out.len() >= limit {
                    return Ok(out);
                }
            }
        }
    }
    Ok(out)
}
