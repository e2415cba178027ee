#![allow(dead_code)]

pub mod bleu_ref;
pub mod oracle;
pub mod split_checks;

use std::path::PathBuf;

use rand::seq::SliceRandom;
use rand::Rng;

use nspm::kg::{load_local_graph, ntriples, Graph, Iri, Literal, PrefixTable, Term};
use nspm::sparql::{CompareOp, PatternTerm, SparqlQuery, TriplePattern};

pub const CLASS: &str = "http://dbpedia.org/ontology/Eukaryote";
pub const DBO: &str = "http://dbpedia.org/ontology/";
pub const DBR: &str = "http://dbpedia.org/resource/";

pub fn fixture(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("fixtures").join(name)
}

pub fn graph() -> Graph {
    load_local_graph(fixture("eukaryotes_mini.nt")).unwrap()
}

pub fn class() -> Iri {
    Iri::new(CLASS).unwrap()
}

pub fn dbo(local: &str) -> Iri {
    Iri::new(format!("{DBO}{local}")).unwrap()
}

pub fn dbr(local: &str) -> Iri {
    Iri::new(format!("{DBR}{local}")).unwrap()
}

/// Triples of the fixture re-read line by line with the plain parser.
pub fn raw_triples() -> Vec<nspm::kg::Triple> {
    let text = std::fs::read_to_string(fixture("eukaryotes_mini.nt")).unwrap();
    ntriples::parse_str(&text).unwrap()
}

fn local_name<R: Rng>(rng: &mut R) -> String {
    const HEAD: &[u8] = b"ABCDEFGHIJKLMNOPQRSTUVWXYZabcdefghijklmnopqrstuvwxyz";
    const TAIL: &[u8] = b"ABCDEFGHIJKLMNOPQRSTUVWXYZabcdefghijklmnopqrstuvwxyz0123456789_";
    let mut s = String::new();
    s.push(HEAD[rng.gen_range(0..HEAD.len())] as char);
    for _ in 0..rng.gen_range(0..10) {
        s.push(TAIL[rng.gen_range(0..TAIL.len())] as char);
    }
    s
}

fn literal<R: Rng>(rng: &mut R) -> Literal {
    let lexical = match rng.gen_range(0..5) {
        0 => rng.gen_range(-5000i64..5000).to_string(),
        1 => format!("{}.{}", rng.gen_range(0..300), rng.gen_range(0..100)),
        2 => format!("{:04}-{:02}-{:02}", rng.gen_range(1000..2100), rng.gen_range(1..13), rng.gen_range(1..29)),
        3 => (if rng.gen() { "true" } else { "false" }).to_string(),
        _ => {
            let words: Vec<String> = (0..rng.gen_range(1..4)).map(|_| local_name(rng).replace('_', "")).collect();
            words.join(" ")
        }
    };
    Literal::canonical(lexical)
}

/// A random query inside the encodable fragment.
pub fn random_query<R: Rng>(rng: &mut R) -> SparqlQuery {
    let vars = ["x", "a", "v", "i0", "i1"];
    let iri = |rng: &mut R| -> Iri {
        let ns = if rng.gen() { DBO } else { DBR };
        Iri::new(format!("{ns}{}", local_name(rng))).unwrap()
    };
    let n = rng.gen_range(1..4);
    let mut patterns = Vec::with_capacity(n);
    for i in 0..n {
        let subject = if i == 0 || rng.gen_bool(0.6) {
            PatternTerm::var(vars[rng.gen_range(0..vars.len())])
        } else {
            iri(rng).into()
        };
        let predicate: PatternTerm = if rng.gen_bool(0.9) { iri(rng).into() } else { PatternTerm::var("p") };
        let object = match rng.gen_range(0..3) {
            0 => PatternTerm::var(vars[rng.gen_range(0..vars.len())]),
            1 => iri(rng).into(),
            _ => PatternTerm::Literal(literal(rng)),
        };
        patterns.push(TriplePattern { subject, predicate, object });
    }
    let mut q = SparqlQuery::select(&[], patterns);
    let present: Vec<String> = q.pattern_vars().into_iter().map(str::to_string).collect();
    let pick = |rng: &mut R| present.choose(rng).unwrap().clone();
    match rng.gen_range(0..4) {
        0 => q.form = nspm::sparql::QueryForm::Ask,
        1 => q.count = Some(pick(rng)),
        _ => {
            let mut proj: Vec<String> = present.iter().filter(|_| rng.gen()).cloned().collect();
            if proj.is_empty() {
                proj.push(pick(rng));
            }
            q.projection = proj;
        }
    }
    for _ in 0..rng.gen_range(0..3) {
        let op = CompareOp::ALL[rng.gen_range(0..3)];
        q = q.filter(&pick(rng), op, PatternTerm::Literal(literal(rng)));
    }
    if q.form == nspm::sparql::QueryForm::Select {
        q.distinct = rng.gen_bool(0.3);
        if rng.gen_bool(0.4) {
            q = q.order_by(&pick(rng), rng.gen());
        }
        if rng.gen_bool(0.4) {
            q = q.limit(rng.gen_range(0..100));
        }
        if rng.gen_bool(0.3) {
            q = q.offset(rng.gen_range(0..100));
        }
    }
    q
}

pub fn prefixes() -> PrefixTable {
    PrefixTable::default()
}

pub fn iri_term(t: &Term) -> Option<&Iri> {
    t.as_iri()
}
