use std::collections::BTreeSet;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::kg::{Iri, Literal, Term};

/// A term position inside a triple pattern or filter.
///
/// `Slot` is a template placeholder (`<A>`) that must be replaced by a
/// concrete term before the query can be evaluated.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum PatternTerm {
    Iri(Iri),
    Var(String),
    Literal(Literal),
    Slot(String),
}

impl PatternTerm {
    pub fn var(name: &str) -> Self {
        PatternTerm::Var(name.to_string())
    }

    pub fn slot(name: &str) -> Self {
        PatternTerm::Slot(name.to_string())
    }

    pub fn as_var(&self) -> Option<&str> {
        match self {
            PatternTerm::Var(v) => Some(v),
            _ => None,
        }
    }
}

impl From<Iri> for PatternTerm {
    fn from(iri: Iri) -> Self {
        PatternTerm::Iri(iri)
    }
}

impl From<Term> for PatternTerm {
    fn from(term: Term) -> Self {
        match term {
            Term::Iri(iri) => PatternTerm::Iri(iri),
            Term::Literal(lit) => PatternTerm::Literal(lit),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct TriplePattern {
    pub subject: PatternTerm,
    pub predicate: PatternTerm,
    pub object: PatternTerm,
}

impl TriplePattern {
    pub fn new(subject: impl Into<PatternTerm>, predicate: impl Into<PatternTerm>, object: impl Into<PatternTerm>) -> Self {
        Self { subject: subject.into(), predicate: predicate.into(), object: object.into() }
    }

    pub fn terms(&self) -> [&PatternTerm; 3] {
        [&self.subject, &self.predicate, &self.object]
    }

    pub fn terms_mut(&mut self) -> [&mut PatternTerm; 3] {
        [&mut self.subject, &mut self.predicate, &mut self.object]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum CompareOp {
    Lt,
    Gt,
    Eq,
}

impl CompareOp {
    pub const ALL: [CompareOp; 3] = [CompareOp::Lt, CompareOp::Gt, CompareOp::Eq];

    pub fn symbol(self) -> &'static str {
        match self {
            CompareOp::Lt => "<",
            CompareOp::Gt => ">",
            CompareOp::Eq => "=",
        }
    }
}

/// `FILTER(?var op value)` where value is a literal or a slot.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Filter {
    pub var: String,
    pub op: CompareOp,
    pub value: PatternTerm,
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct OrderBy {
    pub var: String,
    pub descending: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum QueryForm {
    Select,
    Ask,
}

/// A query in the fragment this crate generates, evaluates and encodes:
/// SELECT/ASK over a basic graph pattern with comparison filters,
/// DISTINCT, COUNT, ORDER BY, LIMIT and OFFSET.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct SparqlQuery {
    pub form: QueryForm,
    pub distinct: bool,
    /// `COUNT(?var)`; when set the projection is empty.
    pub count: Option<String>,
    pub projection: Vec<String>,
    pub patterns: Vec<TriplePattern>,
    pub filters: Vec<Filter>,
    pub order_by: Option<OrderBy>,
    pub limit: Option<u64>,
    pub offset: Option<u64>,
}

impl SparqlQuery {
    pub fn select(projection: &[&str], patterns: Vec<TriplePattern>) -> Self {
        Self {
            form: QueryForm::Select,
            distinct: false,
            count: None,
            projection: projection.iter().map(|v| v.to_string()).collect(),
            patterns,
            filters: Vec::new(),
            order_by: None,
            limit: None,
            offset: None,
        }
    }

    pub fn ask(patterns: Vec<TriplePattern>) -> Self {
        Self { form: QueryForm::Ask, ..Self::select(&[], patterns) }
    }

    pub fn count(var: &str, patterns: Vec<TriplePattern>) -> Self {
        Self { count: Some(var.to_string()), ..Self::select(&[], patterns) }
    }

    pub fn distinct(mut self) -> Self {
        self.distinct = true;
        self
    }

    pub fn filter(mut self, var: &str, op: CompareOp, value: impl Into<PatternTerm>) -> Self {
        self.filters.push(Filter { var: var.to_string(), op, value: value.into() });
        self
    }

    pub fn order_by(mut self, var: &str, descending: bool) -> Self {
        self.order_by = Some(OrderBy { var: var.to_string(), descending });
        self
    }

    pub fn limit(mut self, n: u64) -> Self {
        self.limit = Some(n);
        self
    }

    pub fn offset(mut self, n: u64) -> Self {
        self.offset = Some(n);
        self
    }

    /// Variables occurring in the triple patterns, sorted.
    pub fn pattern_vars(&self) -> BTreeSet<&str> {
        self.patterns.iter().flat_map(|p| p.terms()).filter_map(PatternTerm::as_var).collect()
    }

    /// Slot names in the order they first appear (patterns, then filters).
    pub fn slots(&self) -> Vec<&str> {
        let mut out: Vec<&str> = Vec::new();
        let terms = self.patterns.iter().flat_map(|p| p.terms()).chain(self.filters.iter().map(|f| &f.value));
        for t in terms {
            if let PatternTerm::Slot(s) = t {
                if !out.contains(&s.as_str()) {
                    out.push(s);
                }
            }
        }
        out
    }

    /// Replaces every occurrence of slot `name` with `value`.
    pub fn fill_slot(&mut self, name: &str, value: &PatternTerm) {
        let terms = self
            .patterns
            .iter_mut()
            .flat_map(|p| p.terms_mut())
            .chain(self.filters.iter_mut().map(|f| &mut f.value));
        for t in terms {
            if matches!(t, PatternTerm::Slot(s) if s == name) {
                *t = value.clone();
            }
        }
    }

    /// Checks the structural invariants of the fragment. Returns a
    /// description of the first violation.
    pub fn validate(&self) -> Result<(), String> {
        let vars = self.pattern_vars();
        let check = |v: &str, what: &str| {
            if vars.contains(v) {
                Ok(())
            } else {
                Err(format!("{what} variable ?{v} does not occur in the patterns"))
            }
        };
        match self.form {
            QueryForm::Ask => {
                if !self.projection.is_empty() || self.count.is_some() || self.distinct {
                    return Err("ASK has no projection".into());
                }
                if self.order_by.is_some() || self.limit.is_some() || self.offset.is_some() {
                    return Err("ASK has no solution modifiers".into());
                }
            }
            QueryForm::Select => {
                match (&self.count, self.projection.is_empty()) {
                    (Some(_), false) => return Err("COUNT excludes a projection list".into()),
                    (None, true) => return Err("SELECT needs a projection".into()),
                    _ => {}
                }
                if let Some(c) = &self.count {
                    check(c, "counted")?;
                }
                for v in &self.projection {
                    check(v, "projected")?;
                }
                if let Some(o) = &self.order_by {
                    check(&o.var, "ordering")?;
                }
            }
        }
        for f in &self.filters {
            check(&f.var, "filtered")?;
            if matches!(f.value, PatternTerm::Var(_)) {
                return Err("filters compare against a constant".into());
            }
        }
        for p in &self.patterns {
            if matches!(p.subject, PatternTerm::Literal(_)) || matches!(p.predicate, PatternTerm::Literal(_)) {
                return Err("literals only occur in object position".into());
            }
        }
        Ok(())
    }
}

impl fmt::Display for SparqlQuery {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&super::text::to_sparql(self, None))
    }
}
