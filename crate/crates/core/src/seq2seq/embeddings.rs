//! Word-vector files and a small skip-gram trainer for producing them
//! from the corpus itself.

use std::collections::{BTreeSet, HashMap};
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{Model, Seq2SeqError};
use crate::dataset::Side;

/// Reads a word2vec-style text file: `token v1 ... vE` per line, with an
/// optional `count dim` header.
pub fn read_word2vec(path: impl AsRef<Path>) -> Result<Vec<(String, Vec<f32>)>, Seq2SeqError> {
    let reader = BufReader::new(std::fs::File::open(path)?);
    let mut out = Vec::new();
    let mut dim: Option<usize> = None;
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        let fields: Vec<&str> = line.split_whitespace().collect();
        if fields.is_empty() {
            continue;
        }
        if i == 0 && fields.len() == 2 && fields.iter().all(|f| f.parse::<usize>().is_ok()) {
            dim = fields[1].parse().ok();
            continue;
        }
        let values: Vec<f32> = fields[1..]
            .iter()
            .map(|v| v.parse::<f32>())
            .collect::<Result<_, _>>()
            .map_err(|e| Seq2SeqError::Format(format!("line {}: {e}", i + 1)))?;
        match dim {
            Some(d) if d != values.len() => {
                return Err(Seq2SeqError::Format(format!("line {}: {} values, expected {d}", i + 1, values.len())))
            }
            _ => dim = Some(values.len()),
        }
        out.push((fields[0].to_string(), values));
    }
    Ok(out)
}

/// Overwrites embedding rows of in-vocabulary tokens. Returns the number
/// of rows overwritten.
pub fn apply_embeddings(model: &mut Model, vectors: &[(String, Vec<f32>)], side: Side) -> Result<usize, Seq2SeqError> {
    let (vocab, table) = match side {
        Side::Nl => (&model.src_vocab, &mut model.weights.src_embed),
        Side::Ql => (&model.tgt_vocab, &mut model.weights.tgt_embed),
    };
    let expected = table.cols;
    if let Some((_, v)) = vectors.iter().find(|(_, v)| v.len() != expected) {
        return Err(Seq2SeqError::DimMismatch { expected, found: v.len() });
    }
    let mut overwritten = BTreeSet::new();
    for (token, v) in vectors {
        if vocab.contains(token) {
            let id = vocab.id(token);
            table.row_mut(id).copy_from_slice(v);
            overwritten.insert(id);
        }
    }
    Ok(overwritten.len())
}

/// [`read_word2vec`] followed by [`apply_embeddings`].
pub fn load_pretrained_embeddings(model: &mut Model, path: impl AsRef<Path>, side: Side) -> Result<usize, Seq2SeqError> {
    let vectors = read_word2vec(path)?;
    apply_embeddings(model, &vectors, side)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SkipGramConfig {
    pub dim: usize,
    pub window: usize,
    pub negative: usize,
    pub epochs: usize,
    pub learning_rate: f32,
    pub seed: u64,
}

impl Default for SkipGramConfig {
    fn default() -> Self {
        Self { dim: 128, window: 3, negative: 5, epochs: 5, learning_rate: 0.025, seed: 1 }
    }
}

/// Skip-gram with negative sampling over tokenized sentences. Returns
/// vectors ordered by descending frequency, ties lexicographic.
pub fn train_skipgram(sentences: &[Vec<String>], cfg: &SkipGramConfig) -> Vec<(String, Vec<f32>)> {
    let mut counts: HashMap<&str, usize> = HashMap::new();
    for s in sentences {
        for t in s {
            *counts.entry(t).or_default() += 1;
        }
    }
    let mut words: Vec<(&str, usize)> = counts.into_iter().collect();
    words.sort_by(|a, b| b.1.cmp(&a.1).then(a.0.cmp(b.0)));
    let index: HashMap<&str, usize> = words.iter().enumerate().map(|(i, (w, _))| (*w, i)).collect();
    let n = words.len();
    let d = cfg.dim;
    if n == 0 || d == 0 {
        return Vec::new();
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut input: Vec<f32> = (0..n * d).map(|_| (rng.gen::<f32>() - 0.5) / d as f32).collect();
    let mut output = vec![0.0f32; n * d];

    // Noise distribution proportional to count^0.75.
    let mut cumulative = Vec::with_capacity(n);
    let mut total = 0.0f64;
    for (_, c) in &words {
        total += (*c as f64).powf(0.75);
        cumulative.push(total);
    }
    let sample = |rng: &mut ChaCha8Rng| {
        let x = rng.gen::<f64>() * total;
        cumulative.partition_point(|&c| c <= x).min(n - 1)
    };

    let ids: Vec<Vec<usize>> = sentences.iter().map(|s| s.iter().map(|t| index[t.as_str()]).collect()).collect();
    let total_steps = (cfg.epochs * ids.len()).max(1);
    let mut step = 0;
    let mut grad = vec![0.0f32; d];
    for _ in 0..cfg.epochs {
        for sent in &ids {
            let lr = cfg.learning_rate * (1.0 - step as f32 / total_steps as f32).max(1e-4);
            step += 1;
            for (i, &center) in sent.iter().enumerate() {
                let lo = i.saturating_sub(cfg.window);
                let hi = (i + cfg.window + 1).min(sent.len());
                for (j, &context) in sent.iter().enumerate().take(hi).skip(lo) {
                    if j == i {
                        continue;
                    }
                    grad.iter_mut().for_each(|g| *g = 0.0);
                    let v = center * d;
                    for k in 0..=cfg.negative {
                        let (target, label) = if k == 0 { (context, 1.0) } else { (sample(&mut rng), 0.0) };
                        if k > 0 && target == context {
                            continue;
                        }
                        let u = target * d;
                        let dot: f32 = (0..d).map(|x| input[v + x] * output[u + x]).sum();
                        let g = (label - 1.0 / (1.0 + (-dot).exp())) * lr;
                        for x in 0..d {
                            grad[x] += g * output[u + x];
                            output[u + x] += g * input[v + x];
                        }
                    }
                    for x in 0..d {
                        input[v + x] += grad[x];
                    }
                }
            }
        }
    }
    words.iter().enumerate().map(|(i, (w, _))| (w.to_string(), input[i * d..(i + 1) * d].to_vec())).collect()
}

pub fn write_word2vec(path: impl AsRef<Path>, vectors: &[(String, Vec<f32>)]) -> Result<(), Seq2SeqError> {
    let dim = vectors.first().map_or(0, |v| v.1.len());
    let mut out = std::io::BufWriter::new(std::fs::File::create(path)?);
    writeln!(out, "{} {}", vectors.len(), dim)?;
    for (w, v) in vectors {
        write!(out, "{w}")?;
        for x in v {
            write!(out, " {x}")?;
        }
        writeln!(out)?;
    }
    out.flush()?;
    Ok(())
}
