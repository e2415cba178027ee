//! Reference corpus BLEU written from the metric's definition, plus the
//! fixed candidate/reference sets it is compared on.

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn grams(tokens: &[&str], n: usize) -> BTreeMap<Vec<String>, u64> {
    let mut out = BTreeMap::new();
    for start in 0..tokens.len() {
        if start + n > tokens.len() {
            break;
        }
        let g: Vec<String> = tokens[start..start + n].iter().map(|s| s.to_string()).collect();
        *out.entry(g).or_insert(0) += 1;
    }
    out
}

/// Geometric mean of clipped 1..4-gram precisions (orders 2..4 add-one
/// smoothed) times min(1, exp(1 - r/c)).
pub fn reference_bleu(pairs: &[(Vec<&str>, Vec<&str>)]) -> f64 {
    let mut hits = [0u64; 4];
    let mut counts = [0u64; 4];
    let (mut c, mut r) = (0u64, 0u64);
    for (cand, reference) in pairs {
        c += cand.len() as u64;
        r += reference.len() as u64;
        for n in 1..=4 {
            let rg = grams(reference, n);
            for (g, k) in grams(cand, n) {
                hits[n - 1] += k.min(*rg.get(&g).unwrap_or(&0));
                counts[n - 1] += k;
            }
        }
    }
    if c == 0 || hits[0] == 0 {
        return 0.0;
    }
    let mut precisions = vec![hits[0] as f64 / counts[0] as f64];
    for n in 1..4 {
        precisions.push((hits[n] as f64 + 1.0) / (counts[n] as f64 + 1.0));
    }
    let geo = precisions.iter().product::<f64>().powf(0.25);
    let bp = if c > r { 1.0 } else { (1.0 - r as f64 / c as f64).exp() };
    bp * geo
}

const WORDS: [&str; 8] = ["select", "var_x", "where", "brack_open", "dbr_A", "dbo_b", "sep_dot", "brack_close"];

/// Twenty candidate/reference corpora: mutated copies of random
/// references, of mixed lengths.
pub fn fixed_sets() -> Vec<Vec<(Vec<&'static str>, Vec<&'static str>)>> {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    (0..20)
        .map(|_| {
            (0..rng.gen_range(1..6))
                .map(|_| {
                    let reference: Vec<&str> = (0..rng.gen_range(1..12)).map(|_| WORDS[rng.gen_range(0..WORDS.len())]).collect();
                    let mut cand = reference.clone();
                    for _ in 0..rng.gen_range(0..4) {
                        match rng.gen_range(0..3) {
                            0 if !cand.is_empty() => {
                                let i = rng.gen_range(0..cand.len());
                                cand.remove(i);
                            }
                            1 => {
                                let i = rng.gen_range(0..=cand.len());
                                cand.insert(i, WORDS[rng.gen_range(0..WORDS.len())]);
                            }
                            _ if !cand.is_empty() => {
                                let i = rng.gen_range(0..cand.len());
                                cand[i] = WORDS[rng.gen_range(0..WORDS.len())];
                            }
                            _ => {}
                        }
                    }
                    (cand, reference)
                })
                .collect()
        })
        .collect()
}
