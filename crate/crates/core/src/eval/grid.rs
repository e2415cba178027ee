use std::collections::HashMap;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::{evaluate, EvalError, EvalReport};
use crate::dataset::{split, Dataset, SplitPolicy, Splits};
use crate::kg::PrefixTable;
use crate::seq2seq::{init_for_corpus, save_model, train, ModelConfig, TrainConfig, TrainOutcome};

/// One trained and evaluated model.
#[derive(Debug, Clone)]
pub struct Experiment {
    pub outcome: TrainOutcome,
    /// Scores on the whole test split.
    pub report: EvalReport,
    /// Scores on the held-out compositions only, when the split has any
    /// in its test side.
    pub held_out: Option<EvalReport>,
}

/// Initializes a model for `splits.train` (see [`init_for_corpus`]),
/// trains it, and evaluates the best checkpoint on the test split.
pub fn run_experiment(
    splits: &Splits,
    model_cfg: &ModelConfig,
    pretrained: bool,
    train_cfg: &TrainConfig,
    prefixes: &PrefixTable,
) -> Result<Experiment, EvalError> {
    let model = init_for_corpus(model_cfg, &splits.train, pretrained)?;
    let outcome = train(model, &splits.train, &splits.valid, train_cfg)?;
    let report = evaluate(&outcome.model, &splits.test, prefixes, train_cfg.max_decode_len)?;
    let held = Dataset { pairs: splits.test.pairs.iter().filter(|p| splits.is_held_out(p)).cloned().collect() };
    let held_out = if held.is_empty() {
        None
    } else {
        Some(evaluate(&outcome.model, &held, prefixes, train_cfg.max_decode_len)?)
    };
    Ok(Experiment { outcome, report, held_out })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridCell {
    pub model: ModelConfig,
    pub policy: SplitPolicy,
    pub pretrained: bool,
}

/// One line of `results.tsv`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridRow {
    pub policy: String,
    pub layers: usize,
    pub units: usize,
    pub dropout: f64,
    pub attention: String,
    pub pretrained: bool,
    pub bleu: Option<f64>,
    pub accuracy: Option<f64>,
    /// `ok`, or the error that stopped the cell.
    pub status: String,
}

const HEADER: &str = "policy\tlayers\tunits\tdropout\tattention\tembeddings\tbleu\taccuracy\tstatus";

impl GridRow {
    fn for_cell(cell: &GridCell) -> Self {
        Self {
            policy: cell.policy.label(),
            layers: cell.model.layers,
            units: cell.model.units,
            dropout: cell.model.dropout,
            attention: cell.model.attention.name().to_string(),
            pretrained: cell.pretrained,
            bleu: None,
            accuracy: None,
            status: String::new(),
        }
    }

    fn to_tsv(&self) -> String {
        let num = |x: Option<f64>| x.map_or_else(|| "-".to_string(), |v| format!("{v:.4}"));
        format!(
            "{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}",
            self.policy,
            self.layers,
            self.units,
            self.dropout,
            self.attention,
            if self.pretrained { "yes" } else { "no" },
            num(self.bleu),
            num(self.accuracy),
            self.status.replace(['\t', '\n'], " ")
        )
    }
}

fn cell_key(cell: &GridCell, seed: u64, train_cfg: &TrainConfig) -> String {
    let json = serde_json::json!({ "cell": cell, "seed": seed, "train": train_cfg });
    hex::encode(&Sha256::digest(json.to_string().as_bytes())[..8])
}

fn run_cell(
    cell: &GridCell,
    splits: &Splits,
    train_cfg: &TrainConfig,
    prefixes: &PrefixTable,
    dir: &Path,
) -> Result<GridRow, EvalError> {
    let exp = run_experiment(splits, &cell.model, cell.pretrained, train_cfg, prefixes)?;
    save_model(&exp.outcome.model, dir.join("model.nspm"))?;
    std::fs::write(dir.join("train_log.tsv"), exp.outcome.log_tsv())?;
    std::fs::write(dir.join("report.json"), serde_json::to_string_pretty(&exp.report)? + "\n")?;
    let mut row = GridRow::for_cell(cell);
    row.bleu = Some(exp.report.bleu);
    row.accuracy = Some(exp.report.accuracy);
    row.status = "ok".into();
    Ok(row)
}

/// Trains and scores every cell. Each cell lives in
/// `out_dir/cells/<key>/`; a cell with a `result.json` from an earlier
/// run is not retrained. A failing cell is recorded and the grid goes on.
/// Writes `out_dir/results.tsv` and returns the rows in cell order.
pub fn run_grid(
    cells: &[GridCell],
    dataset: &Dataset,
    seed: u64,
    train_cfg: &TrainConfig,
    prefixes: &PrefixTable,
    out_dir: &Path,
) -> Result<Vec<GridRow>, EvalError> {
    let mut splits_by_policy: HashMap<String, Result<Splits, String>> = HashMap::new();
    let mut rows = Vec::with_capacity(cells.len());
    for cell in cells {
        let dir = out_dir.join("cells").join(cell_key(cell, seed, train_cfg));
        let result_path = dir.join("result.json");
        if let Ok(text) = std::fs::read_to_string(&result_path) {
            if let Ok(row) = serde_json::from_str::<GridRow>(&text) {
                rows.push(row);
                continue;
            }
        }
        std::fs::create_dir_all(&dir)?;
        std::fs::write(dir.join("cell.json"), serde_json::to_string_pretty(cell)? + "\n")?;
        let splits = splits_by_policy
            .entry(cell.policy.label())
            .or_insert_with(|| split(dataset, &cell.policy, seed).map_err(|e| e.to_string()));
        let row = match splits {
            Ok(s) => run_cell(cell, s, train_cfg, prefixes, &dir).unwrap_or_else(|e| {
                let mut r = GridRow::for_cell(cell);
                r.status = format!("error: {e}");
                r
            }),
            Err(e) => {
                let mut r = GridRow::for_cell(cell);
                r.status = format!("error: {e}");
                r
            }
        };
        std::fs::write(&result_path, serde_json::to_string_pretty(&row)? + "\n")?;
        rows.push(row);
    }
    let mut tsv = String::from(HEADER);
    tsv.push('\n');
    for r in &rows {
        tsv.push_str(&r.to_tsv());
        tsv.push('\n');
    }
    std::fs::write(out_dir.join("results.tsv"), tsv)?;
    Ok(rows)
}

/// Parses a `results.tsv` written by [`run_grid`].
pub fn read_results_tsv(text: &str) -> Result<Vec<GridRow>, EvalError> {
    let mut lines = text.lines();
    if lines.next() != Some(HEADER) {
        return Err(EvalError::Format("missing results header".into()));
    }
    let bad = |i: usize, what: &str| EvalError::Format(format!("results line {}: bad {what}", i + 2));
    let num = |s: &str| if s == "-" { Ok(None) } else { s.parse::<f64>().map(Some) };
    lines
        .enumerate()
        .map(|(i, line)| {
            let f: Vec<&str> = line.split('\t').collect();
            if f.len() != 9 {
                return Err(bad(i, "field count"));
            }
            Ok(GridRow {
                policy: f[0].to_string(),
                layers: f[1].parse().map_err(|_| bad(i, "layers"))?,
                units: f[2].parse().map_err(|_| bad(i, "units"))?,
                dropout: f[3].parse().map_err(|_| bad(i, "dropout"))?,
                attention: f[4].to_string(),
                pretrained: match f[5] {
                    "yes" => true,
                    "no" => false,
                    _ => return Err(bad(i, "embeddings flag")),
                },
                bleu: num(f[6]).map_err(|_| bad(i, "bleu"))?,
                accuracy: num(f[7]).map_err(|_| bad(i, "accuracy"))?,
                status: f[8].to_string(),
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn results_round_trip() {
        let row = GridRow {
            policy: "b,c".into(),
            layers: 2,
            units: 128,
            dropout: 0.2,
            attention: "scaled_luong".into(),
            pretrained: true,
            bleu: Some(0.9312),
            accuracy: None,
            status: "ok".into(),
        };
        let text = format!("{HEADER}\n{}\n", row.to_tsv());
        assert_eq!(read_results_tsv(&text).unwrap(), vec![row]);
        assert!(read_results_tsv("nonsense\n").is_err());
    }
}
