//! Split invariants, checked from the outside on a finished split.

use std::collections::{BTreeSet, HashMap, HashSet};

use nspm::dataset::{Dataset, Splits};
use nspm::kg::Iri;
use nspm::sparql::codec::is_content_token;

pub type Check = Result<(), String>;

macro_rules! ensure {
    ($cond:expr, $($msg:tt)+) => {
        if !$cond {
            return Err(format!($($msg)+));
        }
    };
}

fn ids(d: &Dataset) -> Vec<(String, String)> {
    d.pairs.iter().map(|p| (p.nl_line(), p.ql_line())).collect()
}

/// Every split pair comes from `all` and sits in one split only; with
/// `exact`, the splits cover `all`.
pub fn partition(all: &Dataset, s: &Splits, exact: bool) -> Check {
    let all: HashSet<(String, String)> = ids(all).into_iter().collect();
    let mut seen = HashSet::new();
    for part in [&s.train, &s.valid, &s.test] {
        for id in ids(part) {
            ensure!(all.contains(&id), "pair not from the dataset: {}", id.0);
            ensure!(seen.insert(id.clone()), "pair in two splits: {}", id.0);
        }
    }
    if exact {
        ensure!(seen.len() == all.len(), "{} of {} pairs placed", seen.len(), all.len());
    }
    Ok(())
}

/// Every valid and test token occurs in train.
pub fn closed(s: &Splits) -> Check {
    let known: HashSet<&str> =
        s.train.pairs.iter().flat_map(|p| p.nl.iter().chain(p.ql.tokens())).map(String::as_str).collect();
    for p in s.valid.pairs.iter().chain(&s.test.pairs) {
        for t in p.nl.iter().chain(p.ql.tokens()) {
            ensure!(known.contains(t.as_str()), "{t} unseen in train");
        }
    }
    Ok(())
}

/// Every test content token occurs at least `min` times in train queries.
pub fn frequency(s: &Splits, min: usize) -> Check {
    let mut counts: HashMap<&str, usize> = HashMap::new();
    for p in &s.train.pairs {
        for t in p.ql.tokens() {
            *counts.entry(t).or_default() += 1;
        }
    }
    for p in &s.test.pairs {
        for t in p.ql.tokens().iter().filter(|t| is_content_token(t)) {
            let n = counts.get(t.as_str()).copied().unwrap_or(0);
            ensure!(n >= min, "{t} seen {n} times, below {min}");
        }
    }
    Ok(())
}

/// Held-out chains are absent from train and valid, and both of their
/// properties appear in train alone and in other compositions.
pub fn holdout(s: &Splits) -> Check {
    let held: BTreeSet<&Vec<Iri>> = s.report.held_out.iter().collect();
    ensure!(!held.is_empty(), "no held-out chains");
    for p in s.train.pairs.iter().chain(&s.valid.pairs) {
        ensure!(!held.contains(&p.key.property_chain), "held-out chain in train or valid: {}", p.nl_line());
    }
    let train_chains: BTreeSet<&Vec<Iri>> = s.train.pairs.iter().map(|p| &p.key.property_chain).collect();
    for h in &held {
        ensure!(h.len() == 2, "held-out chain of length {}", h.len());
        let (p, q) = (&h[0], &h[1]);
        ensure!(train_chains.contains(&vec![p.clone()]), "{p} alone missing from train");
        ensure!(train_chains.contains(&vec![q.clone()]), "{q} alone missing from train");
        ensure!(train_chains.iter().any(|c| c.len() == 2 && &c[0] == p && &c[1] != q), "{p} has no other composition");
        ensure!(train_chains.iter().any(|c| c.len() == 2 && &c[1] == q && &c[0] != p), "{q} has no other composition");
    }
    Ok(())
}
