//! Brute-force enumeration over the raw fixture triples, written without
//! the library's query evaluator.

use std::cmp::Ordering;
use std::collections::{BTreeMap, BTreeSet};

use nspm::kg::{Iri, Term, Triple, OWL, RDFS, XSD};

#[derive(Debug, Clone)]
pub struct Prop {
    pub iri: Iri,
    pub domain: Option<Iri>,
    pub range: Option<Iri>,
}

impl Prop {
    pub fn ordered(&self) -> bool {
        let ordered = ["date", "decimal", "integer", "double", "float", "int", "gYear", "dateTime", "nonNegativeInteger"];
        self.range.as_ref().and_then(|r| r.as_str().strip_prefix(XSD)).is_some_and(|l| ordered.contains(&l))
    }

    pub fn entity_class(&self) -> Option<&Iri> {
        self.range.as_ref().filter(|r| !r.as_str().starts_with(XSD) && r.as_str() != format!("{RDFS}Literal"))
    }
}

/// One oracle template: chain (outermost first), variant name, and the
/// ordered list of its answerable fillings.
#[derive(Debug, Clone)]
pub struct OracleTemplate {
    pub chain: Vec<Iri>,
    pub variant: &'static str,
    pub fillings: Vec<Filling>,
}

/// A filling and the route of its first witness path.
#[derive(Debug, Clone)]
pub struct Filling {
    pub route: Vec<Iri>,
}

pub struct Oracle {
    pub triples: Vec<Triple>,
    pub props: Vec<Prop>,
}

/// Filter comparison on literal values: numbers numerically, dates by
/// their ISO lexical form.
pub fn value_cmp(a: &Term, b: &Term) -> Option<Ordering> {
    let (Term::Literal(x), Term::Literal(y)) = (a, b) else { return None };
    if let (Ok(u), Ok(v)) = (x.lexical.parse::<f64>(), y.lexical.parse::<f64>()) {
        return u.partial_cmp(&v);
    }
    let date = |s: &str| s.len() == 10 && s.as_bytes()[4] == b'-' && s.as_bytes()[7] == b'-';
    (date(&x.lexical) && date(&y.lexical)).then(|| x.lexical.cmp(&y.lexical))
}

fn value_order(a: &Term, b: &Term) -> Ordering {
    value_cmp(a, b).unwrap_or_else(|| a.cmp(b))
}

type Path = Vec<Term>;

impl Oracle {
    pub fn new(triples: Vec<Triple>, class: &Iri) -> Self {
        let rdfs = |l: &str| Iri::new(format!("{RDFS}{l}")).unwrap();
        let (domain, range) = (rdfs("domain"), rdfs("range"));
        let object_of = |s: &Iri, p: &Iri| {
            triples.iter().find(|t| &t.subject == s && &t.predicate == p).and_then(|t| t.object.as_iri().cloned())
        };
        let mut props: Vec<Prop> = triples
            .iter()
            .filter(|t| t.predicate == domain && t.object.as_iri() == Some(class))
            .map(|t| Prop { iri: t.subject.clone(), domain: Some(class.clone()), range: object_of(&t.subject, &range) })
            .collect();
        props.sort_by(|a, b| a.iri.cmp(&b.iri));
        props.dedup_by(|a, b| a.iri == b.iri);
        Self { triples, props }
    }

    fn prop(&self, iri: &Iri) -> &Prop {
        self.props.iter().find(|p| &p.iri == iri).unwrap()
    }

    /// Every path subject, intermediates..., answer along `chain`, sorted.
    pub fn paths(&self, chain: &[Iri]) -> Vec<Path> {
        let mut paths: Vec<Path> = Vec::new();
        let inner = chain.last().unwrap();
        for t in self.triples.iter().filter(|t| &t.predicate == inner) {
            paths.push(vec![Term::Iri(t.subject.clone()), t.object.clone()]);
        }
        for p in chain.iter().rev().skip(1) {
            let mut next = Vec::new();
            for path in &paths {
                let Some(end) = path.last().unwrap().as_iri() else { continue };
                for t in self.triples.iter().filter(|t| &t.subject == end && &t.predicate == p) {
                    let mut longer = path.clone();
                    longer.push(t.object.clone());
                    next.push(longer);
                }
            }
            paths = next;
        }
        paths.sort();
        paths.dedup();
        paths
    }

    /// Satisfiable property chains up to depth 2.
    pub fn chains(&self) -> Vec<Vec<Iri>> {
        let base: Vec<Vec<Iri>> =
            self.props.iter().map(|p| vec![p.iri.clone()]).filter(|c| !self.paths(c).is_empty()).collect();
        let mut out = base.clone();
        for inner in &base {
            let Some(class) = self.prop(&inner[0]).entity_class() else { continue };
            for outer in &self.props {
                let fits = match &outer.domain {
                    None => true,
                    Some(d) => d == class || class.as_str() == format!("{OWL}Thing"),
                };
                let chain = vec![outer.iri.clone(), inner[0].clone()];
                if fits && !self.paths(&chain).is_empty() {
                    out.push(chain);
                }
            }
        }
        out
    }

    fn route(path: &Path) -> Vec<Iri> {
        path.iter().filter_map(|t| t.as_iri().cloned()).collect()
    }

    /// Templates with their fillings in instantiation order, at most
    /// `limit` fillings each.
    pub fn templates(&self, limit: usize) -> Vec<OracleTemplate> {
        let mut out = Vec::new();
        for chain in self.chains() {
            let paths = self.paths(&chain);
            let answer = |p: &Path| p.last().unwrap().clone();
            let mut variants: Vec<(&'static str, Vec<Filling>)> = Vec::new();

            let subjects: BTreeSet<&Term> = paths.iter().map(|p| &p[0]).collect();
            let plain = subjects
                .iter()
                .map(|a| Filling { route: Self::route(paths.iter().find(|p| &&p[0] == a).unwrap()) })
                .collect();
            variants.push(("plain", plain));
            let pairs: BTreeSet<(&Term, Term)> = paths.iter().map(|p| (&p[0], answer(p))).collect();
            let ask = pairs
                .iter()
                .map(|(a, v)| Filling { route: Self::route(paths.iter().find(|p| &&p[0] == a && &answer(p) == v).unwrap()) })
                .collect();
            variants.push(("ask", ask));

            if self.prop(&chain[0]).ordered() {
                let mut values: Vec<Term> = paths.iter().map(answer).collect::<BTreeSet<_>>().into_iter().collect();
                values.sort_by(value_order);
                values.dedup_by(|a, b| value_order(a, b) == Ordering::Equal);
                let compare = |want: Ordering| -> Vec<Filling> {
                    values
                        .iter()
                        .filter_map(|v| paths.iter().find(|p| value_cmp(&answer(p), v) == Some(want)))
                        .map(|p| Filling { route: Self::route(p) })
                        .collect()
                };
                variants.push(("comparative_lt", compare(Ordering::Less)));
                variants.push(("comparative_gt", compare(Ordering::Greater)));
                variants.push(("comparative_eq", compare(Ordering::Equal)));
                for (name, desc) in [("superlative_desc", true), ("superlative_asc", false)] {
                    // Stable sort of the path order by value; the first row wins.
                    let mut sorted = paths.clone();
                    sorted.sort_by(|a, b| {
                        let o = value_order(&answer(a), &answer(b));
                        if desc {
                            o.reverse()
                        } else {
                            o
                        }
                    });
                    variants.push((name, vec![Filling { route: Self::route(&sorted[0]) }]));
                }
                variants.push(("count", compare(Ordering::Greater)));
            }
            for (variant, mut fillings) in variants {
                fillings.truncate(limit);
                if !fillings.is_empty() {
                    out.push(OracleTemplate { chain: chain.clone(), variant, fillings });
                }
            }
        }
        out
    }
}

/// Damped route sum with missing entities scored 0.
pub fn route_sum(route: &[Iri], scores: &BTreeMap<Iri, f64>, damping: f64) -> f64 {
    route.iter().enumerate().map(|(k, e)| damping.powi(k as i32) * scores.get(e).copied().unwrap_or(0.0)).sum()
}

pub fn read_scores(text: &str) -> BTreeMap<Iri, f64> {
    text.lines()
        .filter(|l| !l.trim().is_empty() && !l.starts_with('#'))
        .map(|l| {
            let (iri, score) = l.split_once('\t').unwrap();
            (Iri::new(iri.trim()).unwrap(), score.trim().parse().unwrap())
        })
        .collect()
}
