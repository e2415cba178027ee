//! Binary checkpoints: `NSPM`, a u32 format version, a length-prefixed
//! JSON header (configuration and vocabularies), then named parameter
//! blocks with their shapes and little-endian f32 data.

use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::params::Weights;
use super::{Model, ModelConfig, Seq2SeqError};
use crate::dataset::Vocabulary;

const MAGIC: &[u8; 4] = b"NSPM";
pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
struct Header {
    config: ModelConfig,
    src_vocab: Vocabulary,
    tgt_vocab: Vocabulary,
}

fn put_u32(out: &mut Vec<u8>, v: usize) -> Result<(), Seq2SeqError> {
    let v = u32::try_from(v).map_err(|_| Seq2SeqError::Format(format!("{v} does not fit in u32")))?;
    out.extend_from_slice(&v.to_le_bytes());
    Ok(())
}

pub fn save_model(model: &Model, path: impl AsRef<Path>) -> Result<(), Seq2SeqError> {
    let mut out = Vec::new();
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&CHECKPOINT_VERSION.to_le_bytes());
    let header = Header {
        config: model.config.clone(),
        src_vocab: model.src_vocab.clone(),
        tgt_vocab: model.tgt_vocab.clone(),
    };
    let json = serde_json::to_vec(&header).map_err(|e| Seq2SeqError::Format(e.to_string()))?;
    put_u32(&mut out, json.len())?;
    out.extend_from_slice(&json);
    let blocks = model.weights.named();
    put_u32(&mut out, blocks.len())?;
    for (name, t) in blocks {
        put_u32(&mut out, name.len())?;
        out.extend_from_slice(name.as_bytes());
        put_u32(&mut out, 2)?;
        put_u32(&mut out, t.rows)?;
        put_u32(&mut out, t.cols)?;
        for x in &t.data {
            out.extend_from_slice(&x.to_le_bytes());
        }
    }
    let mut f = std::fs::File::create(path)?;
    f.write_all(&out)?;
    Ok(())
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8], Seq2SeqError> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.buf.len());
        let end = end.ok_or_else(|| Seq2SeqError::Format(format!("truncated at byte {}", self.pos)))?;
        let s = &self.buf[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u32(&mut self) -> Result<usize, Seq2SeqError> {
        let b = self.take(4)?;
        Ok(u32::from_le_bytes([b[0], b[1], b[2], b[3]]) as usize)
    }
}

pub fn load_model(path: impl AsRef<Path>) -> Result<Model, Seq2SeqError> {
    let mut buf = Vec::new();
    std::fs::File::open(path)?.read_to_end(&mut buf)?;
    let mut r = Reader { buf: &buf, pos: 0 };
    if r.take(4)? != MAGIC {
        return Err(Seq2SeqError::Format("bad magic".into()));
    }
    let version = r.u32()?;
    if version != CHECKPOINT_VERSION as usize {
        return Err(Seq2SeqError::Format(format!("unsupported version {version}")));
    }
    let len = r.u32()?;
    let header: Header = serde_json::from_slice(r.take(len)?).map_err(|e| Seq2SeqError::Format(e.to_string()))?;
    header.config.validate().map_err(|e| Seq2SeqError::Format(e.to_string()))?;
    let mut weights: Weights<f32> =
        Weights::zeros(Model::shape_for(&header.config, &header.src_vocab, &header.tgt_vocab));
    let expected: Vec<(String, usize, usize)> =
        weights.named().into_iter().map(|(n, t)| (n, t.rows, t.cols)).collect();
    let count = r.u32()?;
    if count != expected.len() {
        return Err(Seq2SeqError::Format(format!("expected {} blocks, found {count}", expected.len())));
    }
    let mut blocks = weights.blocks_mut();
    for (i, (name, rows, cols)) in expected.iter().enumerate() {
        let n = r.u32()?;
        let found = String::from_utf8_lossy(r.take(n)?).into_owned();
        if &found != name {
            return Err(Seq2SeqError::Format(format!("expected block {name}, found {found}")));
        }
        let ndims = r.u32()?;
        let dims: Vec<usize> = (0..ndims).map(|_| r.u32()).collect::<Result<_, _>>()?;
        if dims != [*rows, *cols] {
            return Err(Seq2SeqError::Format(format!("block {name} has shape {dims:?}, expected [{rows}, {cols}]")));
        }
        let raw = r.take(rows * cols * 4)?;
        blocks[i].data = raw.chunks_exact(4).map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]])).collect();
    }
    if r.pos != buf.len() {
        return Err(Seq2SeqError::Format("trailing bytes".into()));
    }
    Ok(Model { config: header.config, src_vocab: header.src_vocab, tgt_vocab: header.tgt_vocab, weights })
}
