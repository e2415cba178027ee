use std::path::Path;

use super::EvalError;
use crate::seq2seq::AttentionMatrix;

/// Writes a TSV (header row of source tokens, first column of target
/// tokens) and a plain PGM where weight 1 is black.
pub fn export_heatmap(
    att: &AttentionMatrix,
    src_tokens: &[String],
    tgt_tokens: &[String],
    tsv_path: impl AsRef<Path>,
    pgm_path: impl AsRef<Path>,
) -> Result<(), EvalError> {
    if att.rows != tgt_tokens.len() || att.cols != src_tokens.len() {
        return Err(EvalError::DimMismatch {
            rows: att.rows,
            cols: att.cols,
            tgt: tgt_tokens.len(),
            src: src_tokens.len(),
        });
    }
    let mut tsv = String::new();
    for s in src_tokens {
        tsv.push('\t');
        tsv.push_str(s);
    }
    tsv.push('\n');
    for (r, t) in tgt_tokens.iter().enumerate() {
        tsv.push_str(t);
        for w in att.row(r) {
            tsv.push_str(&format!("\t{w}"));
        }
        tsv.push('\n');
    }
    std::fs::write(tsv_path, tsv)?;

    let mut pgm = format!("P2\n{} {}\n255\n", att.cols, att.rows);
    for r in 0..att.rows {
        let px: Vec<String> = att.row(r).iter().map(|w| (255.0 * (1.0 - w.clamp(0.0, 1.0))).round().to_string()).collect();
        pgm.push_str(&px.join(" "));
        pgm.push('\n');
    }
    std::fs::write(pgm_path, pgm)?;
    Ok(())
}

#[derive(Debug, Clone, PartialEq)]
pub struct Heatmap {
    pub src_tokens: Vec<String>,
    pub tgt_tokens: Vec<String>,
    pub matrix: AttentionMatrix,
}

pub fn parse_heatmap_tsv(text: &str) -> Result<Heatmap, EvalError> {
    let mut lines = text.lines();
    let header = lines.next().ok_or_else(|| EvalError::Format("empty file".into()))?;
    let src_tokens: Vec<String> = header.split('\t').skip(1).map(str::to_string).collect();
    let mut tgt_tokens = Vec::new();
    let mut rows = Vec::new();
    for (i, line) in lines.enumerate() {
        let mut cells = line.split('\t');
        tgt_tokens.push(cells.next().unwrap_or_default().to_string());
        let row: Vec<f64> = cells
            .map(|c| c.parse::<f64>().map_err(|_| EvalError::Format(format!("row {}: bad weight {c:?}", i + 1))))
            .collect::<Result<_, _>>()?;
        if row.len() != src_tokens.len() {
            return Err(EvalError::Format(format!("row {} has {} cells, header has {}", i + 1, row.len(), src_tokens.len())));
        }
        rows.push(row);
    }
    let cols = src_tokens.len();
    let matrix = AttentionMatrix { rows: rows.len(), cols, weights: rows.into_iter().flatten().collect() };
    Ok(Heatmap { src_tokens, tgt_tokens, matrix })
}
