//! Configuration-driven pipeline stages. Every stage reads its
//! predecessor's artifacts from `<out>/<stage>/` and writes its own there,
//! together with a `manifest.json` recording the resolved configuration
//! and content hashes of inputs and outputs.

use std::collections::BTreeMap;
use std::io::{BufRead, Write};
use std::path::{Path, PathBuf};
use std::time::Duration;

use serde::{Deserialize, Serialize};

use crate::dataset::{
    build_dataset, read_splits, split, write_split_files, Dataset, DatasetConfig, DatasetError, Side, SplitPolicy,
    Splits,
};
use crate::eval::{content_hash, evaluate, export_heatmap, run_grid, EvalError, EvalReport, GridCell, GridRow};
use crate::kg::{fetch_class_metadata, load_local_graph, Iri, KgError, KnowledgeSource, PrefixTable, SparqlEndpoint};
use crate::rank::{load_scores, rank_all, write_ranked_tsv, RankError, RankerConfig, ScoreTable};
use crate::seq2seq::{
    init_for_corpus, load_model, load_pretrained_embeddings, save_model, train, Attention, Model, ModelConfig,
    Seq2SeqError, TrainConfig,
};
use crate::sparql::{decode, to_sparql};
use crate::template::{generate_to_depth, label_lexicalizer, write_templates_tsv, Template, TemplateError};

/// Environment variable naming the endpoint response cache directory.
pub const CACHE_DIR_ENV: &str = "NSPM_CACHE_DIR";

/// Printed by `translate` for outputs that do not decode to a query.
pub const DECODE_ERROR: &str = "DECODE_ERROR";

#[derive(Debug, thiserror::Error)]
pub enum PipelineError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("missing {path}: run `{stage}` first")]
    MissingInput { path: PathBuf, stage: &'static str },
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Kg(#[from] KgError),
    #[error(transparent)]
    Template(#[from] TemplateError),
    #[error(transparent)]
    Rank(#[from] RankError),
    #[error(transparent)]
    Dataset(#[from] DatasetError),
    #[error(transparent)]
    Model(#[from] Seq2SeqError),
    #[error(transparent)]
    Eval(#[from] EvalError),
}

impl PipelineError {
    /// Process exit code: 1 for configuration problems, 2 for anything
    /// that fails while running.
    pub fn exit_code(&self) -> u8 {
        match self {
            PipelineError::Config(_) => 1,
            _ => 2,
        }
    }
}

fn config_err(msg: impl Into<String>) -> PipelineError {
    PipelineError::Config(msg.into())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KgConfig {
    /// Local N-Triples file. Exactly one of `nt_path` and `endpoint`.
    pub nt_path: Option<PathBuf>,
    /// SPARQL endpoint URL.
    pub endpoint: Option<String>,
    pub class_iri: String,
    /// Entity score file (`iri<TAB>score`) for ranking.
    pub scores: Option<PathBuf>,
    #[serde(default = "default_timeout")]
    pub timeout_secs: u64,
    #[serde(default)]
    pub politeness_ms: u64,
}

fn default_timeout() -> u64 {
    60
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TemplatesConfig {
    pub max_depth: usize,
}

impl Default for TemplatesConfig {
    fn default() -> Self {
        Self { max_depth: 2 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SplitConfig {
    /// `a`, or a comma-separated combination of `b`, `c`, `d`.
    pub policy: String,
    pub seed: u64,
}

impl Default for SplitConfig {
    fn default() -> Self {
        Self { policy: "a".into(), seed: 1 }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EmbeddingsConfig {
    /// Seed both embedding tables with skip-gram vectors trained on the
    /// train split, unless vector files are given.
    pub pretrained: bool,
    pub nl_path: Option<PathBuf>,
    pub ql_path: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GridConfig {
    pub policies: Vec<String>,
    pub layers: Vec<usize>,
    pub units: Vec<usize>,
    pub dropout: Vec<f64>,
    pub attention: Vec<Attention>,
    pub pretrained: Vec<bool>,
}

impl Default for GridConfig {
    fn default() -> Self {
        Self {
            policies: vec!["a".into()],
            layers: vec![2],
            units: vec![128],
            dropout: vec![0.2],
            attention: vec![Attention::ScaledLuong],
            pretrained: vec![false],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    pub dir: PathBuf,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PipelineConfig {
    pub kg: KgConfig,
    #[serde(default)]
    pub templates: TemplatesConfig,
    #[serde(default)]
    pub ranker: RankerConfig,
    #[serde(default)]
    pub dataset: DatasetConfig,
    #[serde(default)]
    pub split: SplitConfig,
    #[serde(default)]
    pub model: ModelConfig,
    #[serde(default)]
    pub embeddings: EmbeddingsConfig,
    #[serde(default)]
    pub train: TrainConfig,
    #[serde(default)]
    pub grid: GridConfig,
    pub output: OutputConfig,
}

/// Parses the right-hand side of `--set key=value` as a TOML value,
/// falling back to a bare string.
fn override_value(raw: &str) -> toml::Value {
    format!("v = {raw}")
        .parse::<toml::Table>()
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| toml::Value::String(raw.to_string()))
}

fn apply_override(table: &mut toml::Table, assignment: &str) -> Result<(), PipelineError> {
    let (key, raw) = assignment
        .split_once('=')
        .ok_or_else(|| config_err(format!("override {assignment:?} is not of the form section.key=value")))?;
    let path: Vec<&str> = key.trim().split('.').collect();
    if path.iter().any(|p| p.is_empty()) {
        return Err(config_err(format!("bad override key {key:?}")));
    }
    let mut node = table;
    for part in &path[..path.len() - 1] {
        node = node
            .entry(part.to_string())
            .or_insert_with(|| toml::Value::Table(toml::Table::new()))
            .as_table_mut()
            .ok_or_else(|| config_err(format!("override {key:?}: {part} is not a section")))?;
    }
    node.insert(path[path.len() - 1].to_string(), override_value(raw.trim()));
    Ok(())
}

fn resolve(base: &Path, p: &mut Option<PathBuf>) {
    if let Some(path) = p {
        if path.is_relative() {
            *path = base.join(&*path);
        }
    }
}

impl PipelineConfig {
    /// Parses TOML text, applies `section.key=value` overrides, resolves
    /// relative paths against `base`, and validates.
    pub fn from_toml(text: &str, overrides: &[String], base: &Path) -> Result<Self, PipelineError> {
        let mut table: toml::Table = text.parse().map_err(|e: toml::de::Error| config_err(e.message().to_string()))?;
        for o in overrides {
            apply_override(&mut table, o)?;
        }
        let mut cfg: PipelineConfig =
            toml::Value::Table(table).try_into().map_err(|e: toml::de::Error| config_err(e.message().to_string()))?;
        resolve(base, &mut cfg.kg.nt_path);
        resolve(base, &mut cfg.kg.scores);
        resolve(base, &mut cfg.embeddings.nl_path);
        resolve(base, &mut cfg.embeddings.ql_path);
        if cfg.output.dir.is_relative() {
            cfg.output.dir = base.join(&cfg.output.dir);
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path, overrides: &[String]) -> Result<Self, PipelineError> {
        let text = std::fs::read_to_string(path).map_err(|e| config_err(format!("{}: {e}", path.display())))?;
        let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Self::from_toml(&text, overrides, &base)
    }

    pub fn validate(&self) -> Result<(), PipelineError> {
        match (&self.kg.nt_path, &self.kg.endpoint) {
            (Some(_), Some(_)) => return Err(config_err("kg: set only one of nt_path and endpoint")),
            (None, None) => return Err(config_err("kg: one of nt_path or endpoint is required")),
            _ => {}
        }
        Iri::new(self.kg.class_iri.as_str()).map_err(|e| config_err(format!("kg.class_iri: {e}")))?;
        let files = [
            ("kg.nt_path", &self.kg.nt_path),
            ("kg.scores", &self.kg.scores),
            ("embeddings.nl_path", &self.embeddings.nl_path),
            ("embeddings.ql_path", &self.embeddings.ql_path),
        ];
        for (name, path) in files {
            if let Some(p) = path {
                if !p.is_file() {
                    return Err(config_err(format!("{name}: {} does not exist", p.display())));
                }
            }
        }
        if self.templates.max_depth == 0 {
            return Err(config_err("templates.max_depth must be at least 1"));
        }
        if self.dataset.max_per_template == 0 {
            return Err(config_err("dataset.max_per_template must be at least 1"));
        }
        self.ranker.validate().map_err(|e| config_err(format!("ranker: {e}")))?;
        self.policy()?;
        self.model.validate().map_err(|e| config_err(format!("model: {e}")))?;
        self.train.validate().map_err(|e| config_err(format!("train: {e}")))?;
        for p in &self.grid.policies {
            parse_policy(p)?;
        }
        for cell in self.grid_cells()? {
            cell.model.validate().map_err(|e| config_err(format!("grid: {e}")))?;
        }
        Ok(())
    }

    pub fn policy(&self) -> Result<SplitPolicy, PipelineError> {
        parse_policy(&self.split.policy)
    }

    /// Cartesian product of the grid axes, policies outermost.
    pub fn grid_cells(&self) -> Result<Vec<GridCell>, PipelineError> {
        let g = &self.grid;
        let mut cells = Vec::new();
        for p in &g.policies {
            let policy = parse_policy(p)?;
            for &layers in &g.layers {
                for &units in &g.units {
                    for &dropout in &g.dropout {
                        for &attention in &g.attention {
                            for &pretrained in &g.pretrained {
                                let model = ModelConfig { layers, units, dropout, attention, ..self.model.clone() };
                                cells.push(GridCell { model, policy: policy.clone(), pretrained });
                            }
                        }
                    }
                }
            }
        }
        if cells.is_empty() {
            return Err(config_err("grid: every axis needs at least one value"));
        }
        Ok(cells)
    }
}

fn parse_policy(s: &str) -> Result<SplitPolicy, PipelineError> {
    s.parse().map_err(|e: DatasetError| config_err(format!("split policy: {e}")))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageManifest {
    pub stage: String,
    pub config: PipelineConfig,
    /// Content hashes keyed by path relative to the output directory.
    pub inputs: BTreeMap<String, String>,
    pub outputs: BTreeMap<String, String>,
    pub summary: serde_json::Value,
}

/// Runs stages against one configuration.
pub struct Pipeline {
    pub config: PipelineConfig,
    pub prefixes: PrefixTable,
}

impl Pipeline {
    pub fn new(config: PipelineConfig) -> Self {
        Self { config, prefixes: PrefixTable::default() }
    }

    pub fn stage_dir(&self, stage: &str) -> PathBuf {
        self.config.output.dir.join(stage)
    }

    fn input(&self, stage: &'static str, file: &str) -> Result<PathBuf, PipelineError> {
        let path = self.stage_dir(stage).join(file);
        if path.is_file() {
            Ok(path)
        } else {
            // Stage directories are named after their artifacts.
            let stage = match stage {
                "templates" => "generate-templates",
                "dataset" => "build-dataset",
                other => other,
            };
            Err(PipelineError::MissingInput { path, stage })
        }
    }

    fn relative(&self, path: &Path) -> String {
        path.strip_prefix(&self.config.output.dir).unwrap_or(path).to_string_lossy().replace('\\', "/")
    }

    fn hashes(&self, files: &[PathBuf]) -> Result<BTreeMap<String, String>, PipelineError> {
        files.iter().map(|f| Ok((self.relative(f), content_hash(&std::fs::read(f)?)))).collect()
    }

    fn write_manifest(
        &self,
        stage: &str,
        inputs: &[PathBuf],
        outputs: &[PathBuf],
        summary: serde_json::Value,
    ) -> Result<StageManifest, PipelineError> {
        let manifest = StageManifest {
            stage: stage.to_string(),
            config: self.config.clone(),
            inputs: self.hashes(inputs)?,
            outputs: self.hashes(outputs)?,
            summary,
        };
        write_json(&self.stage_dir(stage).join("manifest.json"), &manifest)?;
        Ok(manifest)
    }

    fn source(&self) -> Result<Box<dyn KnowledgeSource>, PipelineError> {
        let kg = &self.config.kg;
        if let Some(path) = &kg.nt_path {
            return Ok(Box::new(load_local_graph(path)?));
        }
        let url = kg.endpoint.as_deref().ok_or_else(|| config_err("kg: no source"))?;
        let cache = std::env::var_os(CACHE_DIR_ENV)
            .map(PathBuf::from)
            .unwrap_or_else(|| self.config.output.dir.join("cache"));
        let ep = SparqlEndpoint::new(url, Duration::from_secs(kg.timeout_secs))?
            .with_cache_dir(cache)
            .with_politeness(Duration::from_millis(kg.politeness_ms));
        Ok(Box::new(ep))
    }

    fn class_iri(&self) -> Result<Iri, PipelineError> {
        Iri::new(self.config.kg.class_iri.as_str()).map_err(|e| config_err(format!("kg.class_iri: {e}")))
    }

    fn create(&self, stage: &str) -> Result<PathBuf, PipelineError> {
        let dir = self.stage_dir(stage);
        std::fs::create_dir_all(&dir)?;
        Ok(dir)
    }

    /// Class metadata and all satisfiable templates up to the configured
    /// depth.
    pub fn generate_templates(&self) -> Result<StageManifest, PipelineError> {
        let source = self.source()?;
        let meta = fetch_class_metadata(source.as_ref(), &self.class_iri()?)?;
        let templates = generate_to_depth(&meta, source.as_ref(), self.config.templates.max_depth, &label_lexicalizer)?;
        let dir = self.create("templates")?;
        let (meta_path, json_path, tsv_path) =
            (dir.join("metadata.json"), dir.join("templates.json"), dir.join("templates.tsv"));
        write_json(&meta_path, &meta)?;
        write_json(&json_path, &templates)?;
        let mut tsv = Vec::new();
        write_templates_tsv(&mut tsv, &templates, &self.prefixes)?;
        std::fs::write(&tsv_path, tsv)?;
        let mut by_depth: BTreeMap<usize, usize> = BTreeMap::new();
        for t in &templates {
            *by_depth.entry(t.depth).or_default() += 1;
        }
        let summary = serde_json::json!({ "templates": templates.len(), "by_depth": by_depth });
        self.write_manifest("templates", &[], &[meta_path, json_path, tsv_path], summary)
    }

    fn templates(&self) -> Result<(PathBuf, Vec<Template>), PipelineError> {
        let path = self.input("templates", "templates.json")?;
        let templates = read_json(&path)?;
        Ok((path, templates))
    }

    /// Popularity ranks and the per-class quantile filter.
    pub fn rank(&self) -> Result<StageManifest, PipelineError> {
        let (templates_path, templates) = self.templates()?;
        let scores = match &self.config.kg.scores {
            Some(p) => load_scores(p)?,
            None => ScoreTable::new(),
        };
        let source = self.source()?;
        let (ranked, kept) = rank_all(&templates, source.as_ref(), &scores, &self.config.ranker)?;
        let dir = self.create("rank")?;
        let (tsv_path, kept_path) = (dir.join("ranked.tsv"), dir.join("kept.json"));
        let mut tsv = Vec::new();
        write_ranked_tsv(&mut tsv, &ranked, &kept)?;
        std::fs::write(&tsv_path, tsv)?;
        write_json(&kept_path, &kept)?;
        let mut inputs = vec![templates_path];
        inputs.extend(self.config.kg.scores.clone());
        let summary = serde_json::json!({ "ranked": ranked.len(), "kept": kept.len() });
        self.write_manifest("rank", &inputs, &[tsv_path, kept_path], summary)
    }

    /// Question/query pairs from the kept templates.
    pub fn build_dataset(&self) -> Result<StageManifest, PipelineError> {
        let (templates_path, templates) = self.templates()?;
        let kept_path = self.input("rank", "kept.json")?;
        let kept: Vec<String> = read_json(&kept_path)?;
        let selected: Vec<Template> = templates.into_iter().filter(|t| kept.contains(&t.id)).collect();
        let source = self.source()?;
        let data = build_dataset(&selected, source.as_ref(), &self.config.dataset, &self.prefixes)?;
        let dir = self.create("dataset")?;
        let (json_path, nl_path, ql_path) = (dir.join("dataset.json"), dir.join("data.nl"), dir.join("data.ql"));
        write_json(&json_path, &data)?;
        std::fs::write(&nl_path, data.pairs.iter().map(|p| p.nl_line() + "\n").collect::<String>())?;
        std::fs::write(&ql_path, data.pairs.iter().map(|p| p.ql_line() + "\n").collect::<String>())?;
        let summary = serde_json::json!({ "templates": selected.len(), "pairs": data.len() });
        self.write_manifest("dataset", &[templates_path, kept_path], &[json_path, nl_path, ql_path], summary)
    }

    fn dataset(&self) -> Result<(PathBuf, Dataset), PipelineError> {
        let path = self.input("dataset", "dataset.json")?;
        let data = read_json(&path)?;
        Ok((path, data))
    }

    /// Train/valid/test partition under the configured policy and seed.
    pub fn split(&self) -> Result<StageManifest, PipelineError> {
        let (data_path, data) = self.dataset()?;
        let splits = split(&data, &self.config.policy()?, self.config.split.seed)?;
        let dir = self.create("split")?;
        write_split_files(&dir, &splits)?;
        let mut outputs: Vec<PathBuf> = ["train", "valid", "test"]
            .iter()
            .flat_map(|n| [dir.join(format!("{n}.nl")), dir.join(format!("{n}.ql"))])
            .collect();
        outputs.extend([dir.join("vocab.nl"), dir.join("vocab.ql"), dir.join("splits.json")]);
        self.write_manifest("split", &[data_path], &outputs, splits.manifest())
    }

    fn splits(&self) -> Result<(PathBuf, Splits), PipelineError> {
        let path = self.input("split", "splits.json")?;
        let dir = path.parent().expect("stage file has a parent");
        Ok((path.clone(), read_splits(dir)?))
    }

    /// Initial model for `splits`, with pretrained vectors as configured.
    fn initial_model(&self, splits: &Splits) -> Result<Model, PipelineError> {
        let emb = &self.config.embeddings;
        let from_files = emb.nl_path.is_some() || emb.ql_path.is_some();
        let mut model = init_for_corpus(&self.config.model, &splits.train, emb.pretrained && !from_files)?;
        if let Some(p) = &emb.nl_path {
            load_pretrained_embeddings(&mut model, p, Side::Nl)?;
        }
        if let Some(p) = &emb.ql_path {
            load_pretrained_embeddings(&mut model, p, Side::Ql)?;
        }
        Ok(model)
    }

    /// Trains on the split and keeps the best-validation checkpoint.
    pub fn train(&self) -> Result<StageManifest, PipelineError> {
        let (splits_path, splits) = self.splits()?;
        let model = self.initial_model(&splits)?;
        let outcome = train(model, &splits.train, &splits.valid, &self.config.train)?;
        let dir = self.create("train")?;
        let (model_path, log_path) = (dir.join("model.nspm"), dir.join("train_log.tsv"));
        save_model(&outcome.model, &model_path)?;
        std::fs::write(&log_path, outcome.log_tsv())?;
        let summary = serde_json::json!({
            "steps_run": outcome.steps_run,
            "best_step": outcome.best_step,
            "best_valid_bleu": outcome.best_bleu,
        });
        self.write_manifest("train", &[splits_path], &[model_path, log_path], summary)
    }

    fn model(&self, path: Option<&Path>) -> Result<(PathBuf, Model), PipelineError> {
        let path = match path {
            Some(p) => p.to_path_buf(),
            None => self.input("train", "model.nspm")?,
        };
        let model = load_model(&path)?;
        Ok((path, model))
    }

    /// Scores the model on the test split, and separately on held-out
    /// compositions when the split has them.
    pub fn evaluate(&self, model_path: Option<&Path>) -> Result<StageManifest, PipelineError> {
        let (splits_path, splits) = self.splits()?;
        let (model_path, model) = self.model(model_path)?;
        let max_len = self.config.train.max_decode_len;
        let report = evaluate(&model, &splits.test, &self.prefixes, max_len)?;
        let held = Dataset { pairs: splits.test.pairs.iter().filter(|p| splits.is_held_out(p)).cloned().collect() };
        let held_out = if held.is_empty() { None } else { Some(evaluate(&model, &held, &self.prefixes, max_len)?) };
        let dir = self.create("evaluate")?;
        let (report_path, pred_path) = (dir.join("report.json"), dir.join("predictions.tsv"));
        write_json(&report_path, &EvaluationFile { test: report.clone(), held_out: held_out.clone() })?;
        let mut tsv = String::from("question\treference\tprediction\texact\n");
        for p in &splits.test.pairs {
            let out = model.translate(&p.nl, max_len).0;
            tsv.push_str(&format!("{}\t{}\t{}\t{}\n", p.nl_line(), p.ql_line(), out, out == p.ql));
        }
        std::fs::write(&pred_path, tsv)?;
        let summary = serde_json::json!({ "test": report, "held_out": held_out });
        self.write_manifest("evaluate", &[splits_path, model_path], &[report_path, pred_path], summary)
    }

    /// Translates one question per input line into SPARQL, or
    /// [`DECODE_ERROR`] when the output does not decode.
    pub fn translate<R: BufRead, W: Write>(&self, model_path: Option<&Path>, input: R, mut output: W) -> Result<usize, PipelineError> {
        let (_, model) = self.model(model_path)?;
        let mut n = 0;
        for line in input.lines() {
            let nl = crate::dataset::tokenize_nl(&line?);
            let seq = model.translate(&nl, self.config.train.max_decode_len).0;
            match decode(&seq, &self.prefixes) {
                Ok(q) => writeln!(output, "{}", to_sparql(&q, Some(&self.prefixes)))?,
                Err(_) => writeln!(output, "{DECODE_ERROR}")?,
            }
            n += 1;
        }
        output.flush()?;
        Ok(n)
    }

    /// Trains and scores every grid cell; resumable.
    pub fn grid(&self) -> Result<Vec<GridRow>, PipelineError> {
        let (data_path, data) = self.dataset()?;
        let cells = self.config.grid_cells()?;
        let dir = self.create("grid")?;
        let rows = run_grid(&cells, &data, self.config.split.seed, &self.config.train, &self.prefixes, &dir)?;
        let failed = rows.iter().filter(|r| r.status != "ok").count();
        let summary = serde_json::json!({ "cells": rows.len(), "failed": failed });
        self.write_manifest("grid", &[data_path], &[dir.join("results.tsv")], summary)?;
        Ok(rows)
    }

    /// Attention heat-maps for `questions`, or for the first `count` test
    /// questions when none are given.
    pub fn heatmap(&self, model_path: Option<&Path>, questions: &[String], count: usize) -> Result<StageManifest, PipelineError> {
        let (model_path, model) = self.model(model_path)?;
        if model.config.attention == Attention::None {
            return Err(config_err("heat-maps need a model with attention"));
        }
        let mut inputs = vec![model_path];
        let sources: Vec<Vec<String>> = if questions.is_empty() {
            let (splits_path, splits) = self.splits()?;
            inputs.push(splits_path);
            splits.test.pairs.iter().take(count).map(|p| p.nl.clone()).collect()
        } else {
            questions.iter().map(|q| crate::dataset::tokenize_nl(q)).collect()
        };
        let dir = self.create("heatmap")?;
        let mut outputs = Vec::new();
        for (i, nl) in sources.iter().enumerate() {
            let (seq, att) = model.translate(nl, self.config.train.max_decode_len);
            let mut src = nl.clone();
            src.push(crate::dataset::EOS.to_string());
            let (tsv, pgm) = (dir.join(format!("{i:03}.tsv")), dir.join(format!("{i:03}.pgm")));
            export_heatmap(&att, &src, seq.tokens(), &tsv, &pgm)?;
            outputs.extend([tsv, pgm]);
        }
        let summary = serde_json::json!({ "maps": sources.len() });
        self.write_manifest("heatmap", &inputs, &outputs, summary)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationFile {
    pub test: EvalReport,
    pub held_out: Option<EvalReport>,
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), PipelineError> {
    std::fs::write(path, serde_json::to_string_pretty(value)? + "\n")?;
    Ok(())
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T, PipelineError> {
    Ok(serde_json::from_str(&std::fs::read_to_string(path)?)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = "[kg]\nnt_path = \"g.nt\"\nclass_iri = \"http://example.org/C\"\n[output]\ndir = \"out\"\n";

    fn base() -> tempfile::TempDir {
        let dir = tempfile::tempdir().unwrap();
        std::fs::write(dir.path().join("g.nt"), "").unwrap();
        dir
    }

    #[test]
    fn minimal_config_and_overrides() {
        let dir = base();
        let over = vec!["model.attention=bahdanau".to_string(), "train.max_steps=7".to_string(), "split.policy=b,c".to_string()];
        let cfg = PipelineConfig::from_toml(MINIMAL, &over, dir.path()).unwrap();
        assert_eq!(cfg.model.attention, Attention::Bahdanau);
        assert_eq!(cfg.train.max_steps, 7);
        assert_eq!(cfg.split.policy, "b,c");
        assert_eq!(cfg.output.dir, dir.path().join("out"));
    }

    #[test]
    fn validation_errors_name_the_field() {
        let dir = base();
        let err = PipelineConfig::from_toml("[kg]\nnt_path = \"g.nt\"\n[output]\ndir = \"o\"\n", &[], dir.path()).unwrap_err();
        assert_eq!(err.exit_code(), 1);
        assert!(err.to_string().contains("class_iri"), "{err}");
        let err = PipelineConfig::from_toml(MINIMAL, &["kg.endpoint=\"http://x\"".into()], dir.path()).unwrap_err();
        assert!(err.to_string().contains("only one"), "{err}");
        let err = PipelineConfig::from_toml(MINIMAL, &["model.widht=3".into()], dir.path()).unwrap_err();
        assert!(err.to_string().contains("widht"), "{err}");
        let err = PipelineConfig::from_toml(MINIMAL, &["kg.nt_path=missing.nt".into()], dir.path()).unwrap_err();
        assert!(err.to_string().contains("kg.nt_path"), "{err}");
    }

    #[test]
    fn grid_cells_are_a_product() {
        let dir = base();
        let over = vec!["grid.attention=[\"none\", \"scaled_luong\"]".to_string(), "grid.policies=[\"a\", \"d\"]".to_string()];
        let cfg = PipelineConfig::from_toml(MINIMAL, &over, dir.path()).unwrap();
        let cells = cfg.grid_cells().unwrap();
        assert_eq!(cells.len(), 4);
        assert_eq!(cells[1].model.attention, Attention::ScaledLuong);
        assert!(cells[3].policy.compositional);
    }
}
