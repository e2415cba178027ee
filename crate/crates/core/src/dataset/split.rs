use std::collections::{BTreeSet, HashMap, HashSet};
use std::fmt;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{Dataset, DatasetError, QAPair};
use crate::kg::Iri;
use crate::sparql::codec::is_content_token;

/// Combination of the split restrictions. The empty combination is the
/// plain random split; `b` closes the vocabulary, `c` adds a minimum train
/// frequency for test content tokens (and implies `b`), `d` holds out
/// depth-2 property chains.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SplitPolicy {
    pub fractions: (f64, f64, f64),
    pub closed_vocab: bool,
    pub min_train_freq: Option<usize>,
    pub compositional: bool,
    pub holdout_fraction: f64,
}

impl Default for SplitPolicy {
    fn default() -> Self {
        Self { fractions: (0.8, 0.1, 0.1), closed_vocab: false, min_train_freq: None, compositional: false, holdout_fraction: 0.1 }
    }
}

pub const DEFAULT_MIN_TRAIN_FREQ: usize = 3;

impl SplitPolicy {
    pub fn random() -> Self {
        Self::default()
    }

    pub fn validate(&self) -> Result<(), DatasetError> {
        let (a, b, c) = self.fractions;
        if [a, b, c].iter().any(|f| !(0.0..=1.0).contains(f)) || ((a + b + c) - 1.0).abs() > 1e-9 {
            return Err(DatasetError::InvalidPolicy(format!("fractions {:?} must be in [0,1] and sum to 1", self.fractions)));
        }
        if self.min_train_freq == Some(0) {
            return Err(DatasetError::InvalidPolicy("minimum train frequency must be positive".into()));
        }
        if !(self.holdout_fraction > 0.0 && self.holdout_fraction <= 1.0) {
            return Err(DatasetError::InvalidPolicy("holdout fraction must be in (0, 1]".into()));
        }
        Ok(())
    }

    pub fn label(&self) -> String {
        let mut parts = Vec::new();
        if self.closed_vocab && self.min_train_freq.is_none() {
            parts.push("b");
        }
        if self.min_train_freq.is_some() {
            if !parts.contains(&"b") {
                parts.push("b");
            }
            parts.push("c");
        }
        if self.compositional {
            parts.push("d");
        }
        if parts.is_empty() {
            "a".into()
        } else {
            parts.join(",")
        }
    }
}

impl fmt::Display for SplitPolicy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.label())
    }
}

impl FromStr for SplitPolicy {
    type Err = DatasetError;

    /// Accepts `a`, or any comma-separated combination of `b`, `c`, `d`.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let mut p = SplitPolicy::default();
        let s = s.trim();
        if s == "a" || s == "random" {
            return Ok(p);
        }
        for part in s.split(',').map(str::trim) {
            match part {
                "b" => p.closed_vocab = true,
                "c" => {
                    p.closed_vocab = true;
                    p.min_train_freq = Some(DEFAULT_MIN_TRAIN_FREQ);
                }
                "d" => p.compositional = true,
                _ => return Err(DatasetError::InvalidPolicy(s.to_string())),
            }
        }
        Ok(p)
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitReport {
    /// Held-out depth-2 property chains, outermost property first.
    pub held_out: Vec<Vec<Iri>>,
    /// Pairs moved into train to supply composition partners.
    pub moved_for_partners: usize,
    /// Pairs moved into train to close the vocabulary.
    pub moved_for_vocab: usize,
    /// Held-out pairs dropped because they would break vocabulary closure.
    pub dropped_for_vocab: usize,
    /// Test pairs dropped by the frequency rule.
    pub dropped_for_frequency: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Splits {
    pub train: Dataset,
    pub valid: Dataset,
    pub test: Dataset,
    pub policy: SplitPolicy,
    pub seed: u64,
    pub report: SplitReport,
}

#[derive(Serialize)]
struct Manifest<'a> {
    policy: String,
    seed: u64,
    train: usize,
    valid: usize,
    test: usize,
    min_train_freq: Option<usize>,
    held_out: Vec<String>,
    report: &'a SplitReport,
}

impl Splits {
    pub fn manifest(&self) -> serde_json::Value {
        let m = Manifest {
            policy: self.policy.label(),
            seed: self.seed,
            train: self.train.len(),
            valid: self.valid.len(),
            test: self.test.len(),
            min_train_freq: self.policy.min_train_freq,
            held_out: self
                .report
                .held_out
                .iter()
                .map(|c| c.iter().map(Iri::as_str).collect::<Vec<_>>().join(" o "))
                .collect(),
            report: &self.report,
        };
        serde_json::to_value(m).expect("manifest serializes")
    }

    /// True when `pair` belongs to a held-out chain.
    pub fn is_held_out(&self, pair: &QAPair) -> bool {
        self.report.held_out.contains(&pair.key.property_chain)
    }
}

type Chain = Vec<Iri>;

fn has_partners(chain: &[Iri], available2: &BTreeSet<Chain>, available1: &BTreeSet<Chain>) -> bool {
    let (p, q) = (&chain[0], &chain[1]);
    available1.contains(&vec![p.clone()])
        && available1.contains(&vec![q.clone()])
        && available2.iter().any(|c| &c[0] == p && &c[1] != q)
        && available2.iter().any(|c| &c[1] == q && &c[0] != p)
}

fn choose_holdout(d: &Dataset, policy: &SplitPolicy, rng: &mut ChaCha8Rng) -> Result<Vec<Chain>, DatasetError> {
    let chains1: BTreeSet<Chain> = d.pairs.iter().filter(|p| p.key.depth() == 1).map(|p| p.key.property_chain.clone()).collect();
    let chains2: BTreeSet<Chain> = d.pairs.iter().filter(|p| p.key.depth() == 2).map(|p| p.key.property_chain.clone()).collect();
    let mut candidates: Vec<Chain> = chains2.iter().filter(|c| has_partners(c, &chains2, &chains1)).cloned().collect();
    if candidates.is_empty() {
        return Err(DatasetError::NoHoldoutAvailable(format!(
            "{} depth-2 chains, none with partners in both positions",
            chains2.len()
        )));
    }
    candidates.shuffle(rng);
    let target = ((policy.holdout_fraction * chains2.len() as f64).round() as usize).max(1);
    let mut held: Vec<Chain> = Vec::new();
    for c in candidates {
        if held.len() >= target {
            break;
        }
        let mut trial = held.clone();
        trial.push(c.clone());
        let remaining: BTreeSet<Chain> = chains2.iter().filter(|x| !trial.contains(x)).cloned().collect();
        if trial.iter().all(|h| has_partners(h, &remaining, &chains1)) {
            held = trial;
        }
    }
    held.sort();
    Ok(held)
}

/// Partitions `d` under `policy`. Deterministic in `seed`.
pub fn split(d: &Dataset, policy: &SplitPolicy, seed: u64) -> Result<Splits, DatasetError> {
    split_with_holdout(d, policy, seed, None)
}

/// As [`split`], with the held-out chains given explicitly instead of
/// drawn from the seed.
pub fn split_with_holdout(
    d: &Dataset,
    policy: &SplitPolicy,
    seed: u64,
    held_out: Option<Vec<Chain>>,
) -> Result<Splits, DatasetError> {
    policy.validate()?;
    if d.len() < 10 {
        return Err(DatasetError::TooSmall(format!("{} pairs, need at least 10", d.len())));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut report = SplitReport::default();

    let held: Vec<Chain> = match (policy.compositional, held_out) {
        (false, _) => Vec::new(),
        (true, Some(h)) => h,
        (true, None) => choose_holdout(d, policy, &mut rng)?,
    };
    let held_set: HashSet<&Chain> = held.iter().collect();
    let (held_pairs, rest): (Vec<&QAPair>, Vec<&QAPair>) =
        d.pairs.iter().partition(|p| held_set.contains(&p.key.property_chain));

    let mut order: Vec<&QAPair> = rest;
    order.shuffle(&mut rng);
    let n = order.len();
    let n_valid = (policy.fractions.1 * n as f64).floor() as usize;
    let n_test = (policy.fractions.2 * n as f64).floor() as usize;
    let n_train = n - n_valid - n_test;
    let mut train: Vec<&QAPair> = order[..n_train].to_vec();
    let mut valid: Vec<&QAPair> = order[n_train..n_train + n_valid].to_vec();
    let mut test: Vec<&QAPair> = order[n_train + n_valid..].to_vec();

    if policy.compositional {
        // Every held-out chain needs both bases and a partner chain for
        // each of its properties in train.
        for h in &held {
            let (p, q) = (&h[0], &h[1]);
            let needs: [Box<dyn Fn(&Chain) -> bool>; 4] = [
                Box::new(|c: &Chain| c.len() == 1 && &c[0] == p),
                Box::new(|c: &Chain| c.len() == 1 && &c[0] == q),
                Box::new(|c: &Chain| c.len() == 2 && &c[0] == p && &c[1] != q),
                Box::new(|c: &Chain| c.len() == 2 && &c[1] == q && &c[0] != p),
            ];
            for need in needs {
                if train.iter().any(|x| need(&x.key.property_chain)) {
                    continue;
                }
                for pool in [&mut valid, &mut test] {
                    if let Some(i) = pool.iter().position(|x| need(&x.key.property_chain)) {
                        train.push(pool.remove(i));
                        report.moved_for_partners += 1;
                        break;
                    }
                }
            }
        }
    }
    test.extend(held_pairs);

    if policy.closed_vocab || policy.min_train_freq.is_some() {
        let mut known: HashSet<&str> = HashSet::new();
        for p in &train {
            known.extend(p.nl.iter().map(String::as_str));
            known.extend(p.ql.tokens().iter().map(String::as_str));
        }
        for pool in [&mut valid, &mut test] {
            let mut kept = Vec::with_capacity(pool.len());
            for p in pool.drain(..) {
                let closed = p.nl.iter().chain(p.ql.tokens()).all(|t| known.contains(t.as_str()));
                if closed {
                    kept.push(p);
                } else if held_set.contains(&p.key.property_chain) {
                    report.dropped_for_vocab += 1;
                } else {
                    known.extend(p.nl.iter().map(String::as_str));
                    known.extend(p.ql.tokens().iter().map(String::as_str));
                    train.push(p);
                    report.moved_for_vocab += 1;
                }
            }
            *pool = kept;
        }
    }

    if let Some(min) = policy.min_train_freq {
        let mut counts: HashMap<&str, usize> = HashMap::new();
        for p in &train {
            for t in p.ql.tokens() {
                *counts.entry(t).or_default() += 1;
            }
        }
        let before = test.len();
        test.retain(|p| {
            p.ql.tokens().iter().filter(|t| is_content_token(t)).all(|t| counts.get(t.as_str()).copied().unwrap_or(0) >= min)
        });
        report.dropped_for_frequency = before - test.len();
    }

    report.held_out = held;
    let collect = |v: Vec<&QAPair>| Dataset { pairs: v.into_iter().cloned().collect() };
    Ok(Splits { train: collect(train), valid: collect(valid), test: collect(test), policy: policy.clone(), seed, report })
}
