use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::network::{greedy, run_batch, Batch, Config};
use super::{Model, Seq2SeqError};
use crate::dataset::Dataset;
use crate::eval::bleu;
use crate::sparql::TokenSeq;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub max_steps: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub clip_norm: f64,
    pub eval_every: usize,
    /// Non-improving evaluations before the learning rate is halved.
    pub patience: usize,
    /// Consecutive non-improving evaluations before training stops.
    pub stop_after: usize,
    pub max_decode_len: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            max_steps: 20_000,
            batch_size: 32,
            learning_rate: 1.0,
            clip_norm: 5.0,
            eval_every: 500,
            patience: 2,
            stop_after: 5,
            max_decode_len: 60,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), Seq2SeqError> {
        let positive = [
            ("max_steps", self.max_steps),
            ("batch_size", self.batch_size),
            ("eval_every", self.eval_every),
            ("patience", self.patience),
            ("stop_after", self.stop_after),
            ("max_decode_len", self.max_decode_len),
        ];
        if let Some((name, _)) = positive.iter().find(|(_, v)| *v == 0) {
            return Err(Seq2SeqError::Config(format!("{name} must be positive")));
        }
        if !(self.learning_rate >= 0.0) || !(self.clip_norm > 0.0) {
            return Err(Seq2SeqError::Config("learning_rate must be >= 0 and clip_norm > 0".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogRow {
    pub step: usize,
    /// Mean training loss since the previous evaluation.
    pub loss: f64,
    pub valid_bleu: f64,
    pub lr: f64,
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    /// Parameters at the best validation BLEU.
    pub model: Model,
    pub history: Vec<LogRow>,
    pub best_step: usize,
    pub best_bleu: f64,
    pub steps_run: usize,
}

impl TrainOutcome {
    pub fn log_tsv(&self) -> String {
        let mut s = String::from("step\tloss\tvalid_bleu\tlr\n");
        for r in &self.history {
            s.push_str(&format!("{}\t{:.6}\t{:.6}\t{}\n", r.step, r.loss, r.valid_bleu, r.lr));
        }
        s
    }
}

fn ids(model: &Model, d: &Dataset) -> Vec<(Vec<usize>, Vec<usize>)> {
    d.pairs
        .iter()
        .map(|p| (model.src_vocab.encode(&p.nl), model.tgt_vocab.encode(p.ql.tokens())))
        .collect()
}

fn valid_bleu(model: &Model, valid: &[(Vec<usize>, Vec<usize>)], refs: &[TokenSeq], max_len: usize) -> f64 {
    let cands: Vec<TokenSeq> = valid
        .iter()
        .map(|(src, _)| {
            let (out, _) = greedy(&model.weights, model.config.attention, src, max_len);
            TokenSeq(out.iter().map(|&i| model.tgt_vocab.token(i).to_string()).collect())
        })
        .collect();
    bleu(&cands, refs).unwrap_or(0.0)
}

/// SGD on the per-sentence cross-entropy with global-norm clipping. Evaluates greedy BLEU on `valid` every
/// `eval_every` steps, halves the learning rate after `patience`
/// non-improving evaluations, stops after `stop_after` of them in a row,
/// and returns the best-BLEU parameters.
pub fn train(model: Model, train: &Dataset, valid: &Dataset, cfg: &TrainConfig) -> Result<TrainOutcome, Seq2SeqError> {
    cfg.validate()?;
    if train.is_empty() || valid.is_empty() {
        return Err(Seq2SeqError::EmptyData("train and valid must be non-empty".into()));
    }
    let train_ids = ids(&model, train);
    let valid_ids = ids(&model, valid);
    let refs: Vec<TokenSeq> = valid.pairs.iter().map(|p| p.ql.clone()).collect();
    let net = Config { attention: model.config.attention, dropout: model.config.dropout };
    let mut shuffle_rng = ChaCha8Rng::seed_from_u64(model.config.seed.wrapping_add(1));
    let mut dropout_rng = ChaCha8Rng::seed_from_u64(model.config.seed.wrapping_add(2));

    let mut current = model;
    let mut best = current.clone();
    let mut best_bleu = f64::NEG_INFINITY;
    let mut best_step = 0;
    let mut lr = cfg.learning_rate;
    let mut history = Vec::new();
    let mut bad = 0;
    let mut order: Vec<usize> = Vec::new();
    let mut cursor = 0;
    let mut grads = current.weights.zeros_like();
    let mut loss_sum = 0.0;
    let mut loss_n = 0usize;
    let mut steps_run = 0;

    for step in 1..=cfg.max_steps {
        let mut picked = Vec::with_capacity(cfg.batch_size);
        while picked.len() < cfg.batch_size.min(train_ids.len()) {
            if cursor == order.len() {
                order = (0..train_ids.len()).collect();
                order.shuffle(&mut shuffle_rng);
                cursor = 0;
            }
            picked.push(order[cursor]);
            cursor += 1;
        }
        let pairs: Vec<(&[usize], &[usize])> =
            picked.iter().map(|&i| (&train_ids[i].0[..], &train_ids[i].1[..])).collect();
        let batch = Batch::new(&pairs);
        grads.blocks_mut().into_iter().for_each(|t| t.fill_zero());
        let r = run_batch(&current.weights, &net, &batch, Some(&mut dropout_rng), Some(&mut grads));
        if !r.loss.is_finite() {
            return Err(Seq2SeqError::Divergence { step });
        }
        loss_sum += r.loss as f64;
        loss_n += 1;

        // The objective is summed over target tokens and averaged over
        // sentences; the network reports the per-token mean.
        let per_sentence = batch.tokens() as f64 / picked.len() as f64;
        let norm: f64 = per_sentence
            * grads
            .named()
            .iter()
            .flat_map(|(_, t)| t.data.iter())
            .map(|&g| (g as f64) * (g as f64))
            .sum::<f64>()
            .sqrt();
        let scale = if norm > cfg.clip_norm { cfg.clip_norm / norm } else { 1.0 };
        let factor = (lr * scale * per_sentence) as f32;
        if factor != 0.0 {
            for (w, g) in current.weights.blocks_mut().into_iter().zip(grads.blocks_mut()) {
                for (x, d) in w.data.iter_mut().zip(&g.data) {
                    *x -= factor * d;
                }
            }
        }
        steps_run = step;

        if step % cfg.eval_every == 0 || step == cfg.max_steps {
            let b = valid_bleu(&current, &valid_ids, &refs, cfg.max_decode_len);
            history.push(LogRow { step, loss: loss_sum / loss_n.max(1) as f64, valid_bleu: b, lr });
            loss_sum = 0.0;
            loss_n = 0;
            if b > best_bleu {
                best_bleu = b;
                best_step = step;
                best = current.clone();
                bad = 0;
            } else {
                bad += 1;
                if bad % cfg.patience == 0 {
                    lr *= 0.5;
                }
                if bad >= cfg.stop_after {
                    break;
                }
            }
        }
    }
    Ok(TrainOutcome { model: best, history, best_step, best_bleu, steps_run })
}
