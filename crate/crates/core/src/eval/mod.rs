//! Translation metrics, evaluation reports, the experiment grid, and
//! attention heat-map export.

mod grid;
mod heatmap;

use std::collections::{BTreeMap, HashMap};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::dataset::Dataset;
use crate::kg::PrefixTable;
use crate::seq2seq::Model;
use crate::sparql::codec::is_entity_token;
use crate::sparql::{decode, TokenSeq};

pub use grid::{read_results_tsv, run_experiment, run_grid, Experiment, GridCell, GridRow};
pub use heatmap::{export_heatmap, parse_heatmap_tsv, Heatmap};

#[derive(Debug, thiserror::Error)]
pub enum EvalError {
    #[error("{candidates} candidates but {references} references")]
    LengthMismatch { candidates: usize, references: usize },
    #[error("nothing to evaluate")]
    Empty,
    #[error("matrix is {rows}x{cols} but labels are {tgt}x{src}")]
    DimMismatch { rows: usize, cols: usize, tgt: usize, src: usize },
    #[error("malformed heat-map file: {0}")]
    Format(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Model(#[from] crate::seq2seq::Seq2SeqError),
    #[error(transparent)]
    Dataset(#[from] crate::dataset::DatasetError),
}

fn check_lengths(c: usize, r: usize) -> Result<(), EvalError> {
    if c != r {
        return Err(EvalError::LengthMismatch { candidates: c, references: r });
    }
    if c == 0 {
        return Err(EvalError::Empty);
    }
    Ok(())
}

fn ngram_counts(tokens: &[String], n: usize) -> HashMap<&[String], usize> {
    let mut m = HashMap::new();
    if tokens.len() >= n {
        for w in tokens.windows(n) {
            *m.entry(w).or_insert(0) += 1;
        }
    }
    m
}

/// Corpus BLEU over 1- to 4-grams with uniform weights and a brevity
/// penalty. Precisions of order 2 and above are add-one smoothed.
pub fn bleu(candidates: &[TokenSeq], references: &[TokenSeq]) -> Result<f64, EvalError> {
    check_lengths(candidates.len(), references.len())?;
    let mut matched = [0usize; 4];
    let mut total = [0usize; 4];
    let (mut cand_len, mut ref_len) = (0usize, 0usize);
    for (c, r) in candidates.iter().zip(references) {
        let (c, r) = (c.tokens(), r.tokens());
        cand_len += c.len();
        ref_len += r.len();
        for n in 1..=4 {
            let rc = ngram_counts(r, n);
            for (g, k) in ngram_counts(c, n) {
                matched[n - 1] += k.min(rc.get(g).copied().unwrap_or(0));
            }
            total[n - 1] += c.len().saturating_sub(n - 1);
        }
    }
    if cand_len == 0 || matched[0] == 0 {
        return Ok(0.0);
    }
    let mut log_sum = (matched[0] as f64 / total[0] as f64).ln();
    for n in 1..4 {
        log_sum += ((matched[n] + 1) as f64 / (total[n] + 1) as f64).ln();
    }
    let bp = if cand_len > ref_len { 1.0 } else { (1.0 - ref_len as f64 / cand_len as f64).exp() };
    Ok(bp * (log_sum / 4.0).exp())
}

/// Fraction of exact token-for-token matches.
pub fn accuracy(candidates: &[TokenSeq], references: &[TokenSeq]) -> Result<f64, EvalError> {
    check_lengths(candidates.len(), references.len())?;
    let hits = candidates.iter().zip(references).filter(|(c, r)| c == r).count();
    Ok(hits as f64 / candidates.len() as f64)
}

/// Replaces entity and literal tokens by a placeholder.
pub fn mask_entities(seq: &TokenSeq) -> TokenSeq {
    TokenSeq(seq.tokens().iter().map(|t| if is_entity_token(t) { "<ent>".to_string() } else { t.clone() }).collect())
}

/// Exact-match accuracy after masking entities on both sides.
pub fn structure_accuracy(candidates: &[TokenSeq], references: &[TokenSeq]) -> Result<f64, EvalError> {
    check_lengths(candidates.len(), references.len())?;
    let hits = candidates.iter().zip(references).filter(|(c, r)| mask_entities(c) == mask_entities(r)).count();
    Ok(hits as f64 / candidates.len() as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DepthStats {
    pub n: usize,
    pub accuracy: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub bleu: f64,
    pub accuracy: f64,
    pub structure_accuracy: f64,
    pub n: usize,
    pub exact: usize,
    pub decode_failures: usize,
    pub per_depth: BTreeMap<usize, DepthStats>,
}

/// Scores a translation function on `test`.
pub fn evaluate_with(
    translate: &dyn Fn(&[String]) -> TokenSeq,
    test: &Dataset,
    prefixes: &PrefixTable,
) -> Result<EvalReport, EvalError> {
    if test.is_empty() {
        return Err(EvalError::Empty);
    }
    let cands: Vec<TokenSeq> = test.pairs.iter().map(|p| translate(&p.nl)).collect();
    let refs: Vec<TokenSeq> = test.pairs.iter().map(|p| p.ql.clone()).collect();
    let decode_failures = cands.iter().filter(|c| decode(c, prefixes).is_err()).count();
    let mut per_depth: BTreeMap<usize, (usize, usize)> = BTreeMap::new();
    for (p, c) in test.pairs.iter().zip(&cands) {
        let e = per_depth.entry(p.key.depth()).or_default();
        e.0 += 1;
        e.1 += usize::from(*c == p.ql);
    }
    Ok(EvalReport {
        bleu: bleu(&cands, &refs)?,
        accuracy: accuracy(&cands, &refs)?,
        structure_accuracy: structure_accuracy(&cands, &refs)?,
        n: cands.len(),
        exact: cands.iter().zip(&refs).filter(|(c, r)| c == r).count(),
        decode_failures,
        per_depth: per_depth
            .into_iter()
            .map(|(d, (n, hits))| (d, DepthStats { n, accuracy: hits as f64 / n as f64 }))
            .collect(),
    })
}

/// Greedy translation of every test question with `model`.
pub fn evaluate(model: &Model, test: &Dataset, prefixes: &PrefixTable, max_len: usize) -> Result<EvalReport, EvalError> {
    evaluate_with(&|nl: &[String]| model.translate(nl, max_len).0, test, prefixes)
}

/// Git-style content hash: SHA-256 over `blob <len>\0` and the bytes.
pub fn content_hash(bytes: &[u8]) -> String {
    let mut h = Sha256::new();
    h.update(format!("blob {}\0", bytes.len()));
    h.update(bytes);
    hex::encode(h.finalize())
}
