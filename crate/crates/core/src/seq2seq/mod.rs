//! Encoder-decoder LSTM translator with optional attention, trained with
//! teacher forcing and decoded greedily.

mod checkpoint;
mod embeddings;
mod gradcheck;
mod network;
pub mod params;
pub mod tensor;
mod train;

use std::fmt;
use std::str::FromStr;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::dataset::{build_vocab, Dataset, Side, Vocabulary};
use crate::sparql::TokenSeq;

pub use checkpoint::{load_model, save_model, CHECKPOINT_VERSION};
pub use embeddings::{
    apply_embeddings, load_pretrained_embeddings, read_word2vec, train_skipgram, write_word2vec, SkipGramConfig,
};
pub use gradcheck::{grad_check, grad_check_weights, mean_loss};
pub use params::{Shape, Weights};
pub use train::{train, LogRow, TrainConfig, TrainOutcome};

#[derive(Debug, thiserror::Error)]
pub enum Seq2SeqError {
    #[error("invalid model configuration: {0}")]
    Config(String),
    #[error("token id {id} out of range for vocabulary of size {size}")]
    Index { id: usize, size: usize },
    #[error("embedding dimension mismatch: model has {expected}, file has {found}")]
    DimMismatch { expected: usize, found: usize },
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("bad checkpoint: {0}")]
    Format(String),
    #[error("loss became non-finite at step {step}")]
    Divergence { step: usize },
    #[error("empty data: {0}")]
    EmptyData(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Attention {
    None,
    Luong,
    ScaledLuong,
    Bahdanau,
}

impl Attention {
    pub const ALL: [Attention; 4] = [Attention::None, Attention::Luong, Attention::ScaledLuong, Attention::Bahdanau];

    pub fn name(self) -> &'static str {
        match self {
            Attention::None => "none",
            Attention::Luong => "luong",
            Attention::ScaledLuong => "scaled_luong",
            Attention::Bahdanau => "bahdanau",
        }
    }
}

impl fmt::Display for Attention {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Attention {
    type Err = Seq2SeqError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Attention::ALL
            .into_iter()
            .find(|a| a.name() == s)
            .ok_or_else(|| Seq2SeqError::Config(format!("unknown attention {s:?}")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelConfig {
    pub layers: usize,
    pub units: usize,
    /// Defaults to `units`.
    pub embed_dim: Option<usize>,
    /// Drop probability.
    pub dropout: f64,
    pub attention: Attention,
    pub seed: u64,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self { layers: 2, units: 128, embed_dim: None, dropout: 0.2, attention: Attention::ScaledLuong, seed: 1 }
    }
}

impl ModelConfig {
    pub fn embed(&self) -> usize {
        self.embed_dim.unwrap_or(self.units)
    }

    pub fn validate(&self) -> Result<(), Seq2SeqError> {
        if self.layers == 0 {
            return Err(Seq2SeqError::Config("layers must be at least 1".into()));
        }
        if self.units == 0 || self.embed() == 0 {
            return Err(Seq2SeqError::Config("units and embed_dim must be at least 1".into()));
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return Err(Seq2SeqError::Config(format!("dropout {} not in [0, 1)", self.dropout)));
        }
        Ok(())
    }
}

/// Attention weights of one translation: one row per target token, one
/// column per source position (the source tokens followed by `</s>`).
#[derive(Debug, Clone, PartialEq, Default)]
pub struct AttentionMatrix {
    pub rows: usize,
    pub cols: usize,
    pub weights: Vec<f64>,
}

impl AttentionMatrix {
    pub fn from_rows(rows: Vec<Vec<f64>>) -> Self {
        let cols = rows.first().map_or(0, Vec::len);
        assert!(rows.iter().all(|r| r.len() == cols), "ragged attention rows");
        Self { rows: rows.len(), cols, weights: rows.into_iter().flatten().collect() }
    }

    pub fn row(&self, r: usize) -> &[f64] {
        &self.weights[r * self.cols..(r + 1) * self.cols]
    }

    pub fn is_empty(&self) -> bool {
        self.rows == 0
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Model {
    pub config: ModelConfig,
    pub src_vocab: Vocabulary,
    pub tgt_vocab: Vocabulary,
    pub weights: Weights<f32>,
}

/// Loss and attention of a teacher-forced pass.
#[derive(Debug, Clone, PartialEq)]
pub struct ForwardOutput {
    pub loss: f64,
    pub attention: AttentionMatrix,
}

pub fn init_model(cfg: &ModelConfig, src_vocab: Vocabulary, tgt_vocab: Vocabulary) -> Result<Model, Seq2SeqError> {
    cfg.validate()?;
    if src_vocab.len() <= 4 || tgt_vocab.len() <= 4 {
        return Err(Seq2SeqError::Config("vocabularies must contain tokens beyond the reserved ones".into()));
    }
    let mut weights = Weights::zeros(Model::shape_for(cfg, &src_vocab, &tgt_vocab));
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    weights.init_uniform(&mut rng, 0.1);
    Ok(Model { config: cfg.clone(), src_vocab, tgt_vocab, weights })
}

/// Vocabularies from `train` (every token kept), initial parameters, and,
/// with `pretrained`, both embedding tables seeded by skip-gram vectors
/// trained on the same pairs.
pub fn init_for_corpus(cfg: &ModelConfig, train: &Dataset, pretrained: bool) -> Result<Model, Seq2SeqError> {
    let vocab = |side| build_vocab(train, side, 1).map_err(|e| Seq2SeqError::EmptyData(e.to_string()));
    let mut model = init_model(cfg, vocab(Side::Nl)?, vocab(Side::Ql)?)?;
    if pretrained {
        let sg = SkipGramConfig { dim: cfg.embed(), seed: cfg.seed, ..SkipGramConfig::default() };
        let nl: Vec<Vec<String>> = train.pairs.iter().map(|p| p.nl.clone()).collect();
        let ql: Vec<Vec<String>> = train.pairs.iter().map(|p| p.ql.tokens().to_vec()).collect();
        apply_embeddings(&mut model, &train_skipgram(&nl, &sg), Side::Nl)?;
        apply_embeddings(&mut model, &train_skipgram(&ql, &sg), Side::Ql)?;
    }
    Ok(model)
}

impl Model {
    pub(crate) fn shape_for(cfg: &ModelConfig, src: &Vocabulary, tgt: &Vocabulary) -> Shape {
        Shape {
            src_vocab: src.len(),
            tgt_vocab: tgt.len(),
            embed: cfg.embed(),
            hidden: cfg.units,
            layers: cfg.layers,
            attention: cfg.attention,
        }
    }

    fn check_ids(ids: &[usize], vocab: &Vocabulary) -> Result<(), Seq2SeqError> {
        match ids.iter().find(|&&i| i >= vocab.len()) {
            Some(&id) => Err(Seq2SeqError::Index { id, size: vocab.len() }),
            None => Ok(()),
        }
    }

    /// Teacher-forced loss of one pair of id sequences, dropout off.
    pub fn forward_ids(&self, src: &[usize], tgt: &[usize]) -> Result<ForwardOutput, Seq2SeqError> {
        if src.is_empty() || tgt.is_empty() {
            return Err(Seq2SeqError::EmptyData("source and target must be non-empty".into()));
        }
        Self::check_ids(src, &self.src_vocab)?;
        Self::check_ids(tgt, &self.tgt_vocab)?;
        let batch = network::Batch::new(&[(src, tgt)]);
        let cfg = network::Config { attention: self.config.attention, dropout: 0.0 };
        let r = network::run_batch(&self.weights, &cfg, &batch, None, None);
        let attention = if r.alpha.is_empty() {
            AttentionMatrix::default()
        } else {
            AttentionMatrix {
                rows: batch.tgt_len,
                cols: batch.src_len,
                weights: r.alpha.iter().map(|x| *x as f64).collect(),
            }
        };
        Ok(ForwardOutput { loss: r.loss as f64, attention })
    }

    /// As [`Model::forward_ids`], mapping tokens through the vocabularies.
    pub fn forward<S: AsRef<str>>(&self, src: &[S], tgt: &[S]) -> Result<ForwardOutput, Seq2SeqError> {
        self.forward_ids(&self.src_vocab.encode(src), &self.tgt_vocab.encode(tgt))
    }

    /// Greedy decoding, at most `max_len` tokens.
    pub fn translate<S: AsRef<str>>(&self, nl: &[S], max_len: usize) -> (TokenSeq, AttentionMatrix) {
        let ids = self.src_vocab.encode(nl);
        let (out, rows) = network::greedy(&self.weights, self.config.attention, &ids, max_len);
        let tokens = out.iter().map(|&i| self.tgt_vocab.token(i).to_string()).collect::<Vec<_>>();
        let att = if self.config.attention == Attention::None {
            AttentionMatrix::default()
        } else {
            AttentionMatrix::from_rows(rows.into_iter().map(|r| r.into_iter().map(f64::from).collect()).collect())
        };
        (TokenSeq(tokens), att)
    }
}
