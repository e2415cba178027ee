//! Nested-loop evaluation of the supported query fragment over a [`Graph`].

use std::cmp::Ordering;

use super::graph::Graph;
use super::results::{Binding, ResultSet};
use super::term::{Literal, Term, Triple};
use super::KgError;
use crate::sparql::{CompareOp, PatternTerm, QueryForm, SparqlQuery, TriplePattern};

pub fn query_graph(graph: &Graph, q: &SparqlQuery) -> Result<ResultSet, KgError> {
    if let Some(slot) = q.slots().first() {
        return Err(KgError::Unsupported(format!("unfilled template slot <{slot}>")));
    }
    q.validate().map_err(KgError::Unsupported)?;

    let mut solutions = vec![Binding::new()];
    for pattern in &q.patterns {
        let mut next = Vec::new();
        for binding in &solutions {
            extend(graph, pattern, binding, &mut next);
        }
        solutions = next;
        if solutions.is_empty() {
            break;
        }
    }

    let mut kept = Vec::with_capacity(solutions.len());
    for binding in solutions {
        let mut pass = true;
        for f in &q.filters {
            let Some(constant) = pattern_constant(&f.value) else {
                return Err(KgError::Unsupported("filter value must be constant".into()));
            };
            let value = binding.get(&f.var).expect("validated: filter var occurs in patterns");
            let ord = compare_values(value, &constant)
                .ok_or_else(|| KgError::Type(format!("cannot compare {value} with {constant}")))?;
            let ok = match f.op {
                CompareOp::Lt => ord == Ordering::Less,
                CompareOp::Gt => ord == Ordering::Greater,
                CompareOp::Eq => ord == Ordering::Equal,
            };
            if !ok {
                pass = false;
                break;
            }
        }
        if pass {
            kept.push(binding);
        }
    }

    if q.form == QueryForm::Ask {
        return Ok(ResultSet::boolean(!kept.is_empty()));
    }

    if let Some(var) = &q.count {
        let n = kept.iter().filter(|b| b.contains_key(var)).count();
        let mut row = Binding::new();
        row.insert("count".into(), Term::Literal(Literal::canonical(n.to_string())));
        return Ok(ResultSet { variables: vec!["count".into()], rows: vec![row], boolean: None });
    }

    if let Some(order) = &q.order_by {
        kept.sort_by(|a, b| {
            let ord = match (a.get(&order.var), b.get(&order.var)) {
                (Some(x), Some(y)) => order_terms(x, y),
                (None, Some(_)) => Ordering::Less,
                (Some(_), None) => Ordering::Greater,
                (None, None) => Ordering::Equal,
            };
            if order.descending {
                ord.reverse()
            } else {
                ord
            }
        });
    }

    let mut rows: Vec<Binding> = kept
        .into_iter()
        .map(|b| q.projection.iter().filter_map(|v| b.get(v).map(|t| (v.clone(), t.clone()))).collect())
        .collect();
    if q.distinct {
        let mut seen = std::collections::HashSet::new();
        rows.retain(|r| seen.insert(r.clone()));
    }
    let offset = q.offset.map_or(0, |n| n as usize);
    let rows: Vec<Binding> = rows
        .into_iter()
        .skip(offset)
        .take(q.limit.map_or(usize::MAX, |n| n as usize))
        .collect();
    Ok(ResultSet { variables: q.projection.clone(), rows, boolean: None })
}

fn pattern_constant(t: &PatternTerm) -> Option<Term> {
    match t {
        PatternTerm::Iri(iri) => Some(Term::Iri(iri.clone())),
        PatternTerm::Literal(lit) => Some(Term::Literal(lit.clone())),
        _ => None,
    }
}

fn resolve<'a>(t: &'a PatternTerm, binding: &'a Binding) -> Option<Term> {
    match t {
        PatternTerm::Var(v) => binding.get(v).cloned(),
        other => pattern_constant(other),
    }
}

fn extend(graph: &Graph, pattern: &TriplePattern, binding: &Binding, out: &mut Vec<Binding>) {
    let subject = resolve(&pattern.subject, binding);
    let predicate = resolve(&pattern.predicate, binding);
    let object = resolve(&pattern.object, binding);

    let candidates: Box<dyn Iterator<Item = &Triple>> = match (&subject, &predicate) {
        (Some(Term::Iri(s)), _) => Box::new(graph.with_subject(s)),
        (Some(Term::Literal(_)), _) | (_, Some(Term::Literal(_))) => return,
        (None, Some(Term::Iri(p))) => Box::new(graph.with_predicate(p)),
        (None, None) => Box::new(graph.triples().iter()),
    };
    for t in candidates {
        let mut b = binding.clone();
        let ok = bind(&pattern.subject, &subject, Term::Iri(t.subject.clone()), &mut b)
            && bind(&pattern.predicate, &predicate, Term::Iri(t.predicate.clone()), &mut b)
            && bind(&pattern.object, &object, t.object.clone(), &mut b);
        if ok {
            out.push(b);
        }
    }
}

/// Matches one position. Variables repeated within a pattern must agree,
/// which `b` enforces once the first occurrence is bound.
fn bind(pattern: &PatternTerm, resolved: &Option<Term>, value: Term, b: &mut Binding) -> bool {
    match resolved {
        Some(expected) => expected == &value,
        None => {
            let PatternTerm::Var(v) = pattern else { unreachable!("constants always resolve") };
            match b.get(v) {
                Some(existing) => existing == &value,
                None => {
                    b.insert(v.clone(), value);
                    true
                }
            }
        }
    }
}

/// Comparison used by FILTER. `None` means the values are not comparable.
pub fn compare_values(a: &Term, b: &Term) -> Option<Ordering> {
    match (a, b) {
        (Term::Literal(x), Term::Literal(y)) => {
            if let (Some(u), Some(v)) = (x.numeric_value(), y.numeric_value()) {
                return u.partial_cmp(&v);
            }
            if x.is_date() && y.is_date() {
                return Some(x.lexical.cmp(&y.lexical));
            }
            let plain = |l: &Literal| {
                l.numeric_value().is_none()
                    && !l.is_date()
                    && l.datatype.as_ref().is_none_or(|d| d.as_str().ends_with("#string"))
            };
            (plain(x) && plain(y)).then(|| x.lexical.cmp(&y.lexical))
        }
        (Term::Iri(x), Term::Iri(y)) if x == y => Some(Ordering::Equal),
        _ => None,
    }
}

/// Total order for ORDER BY: comparable values by value, everything else
/// by term order.
fn order_terms(a: &Term, b: &Term) -> Ordering {
    compare_values(a, b).unwrap_or_else(|| a.cmp(b))
}
