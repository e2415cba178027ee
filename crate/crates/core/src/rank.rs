//! Popularity-based template ranking with depth damping and class-wise
//! quantile thresholds.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::kg::{Iri, KgError, KnowledgeSource};
use crate::template::{instantiations, Template};

#[derive(Debug, thiserror::Error)]
pub enum RankError {
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("score file line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("template {0} has no instantiation")]
    Unsatisfiable(String),
    #[error("invalid ranker configuration: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Kg(#[from] KgError),
}

/// Entity popularity scores. Absent entities are distinct from entities
/// scored zero; lookups fall back to a caller-chosen default.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ScoreTable {
    scores: HashMap<Iri, f64>,
}

impl ScoreTable {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, iri: Iri, score: f64) -> Result<(), RankError> {
        if !score.is_finite() || score < 0.0 {
            return Err(RankError::InvalidConfig(format!("score {score} for {iri} must be finite and non-negative")));
        }
        self.scores.insert(iri, score);
        Ok(())
    }

    pub fn get(&self, iri: &Iri) -> Option<f64> {
        self.scores.get(iri).copied()
    }

    pub fn len(&self) -> usize {
        self.scores.len()
    }

    pub fn is_empty(&self) -> bool {
        self.scores.is_empty()
    }
}

/// Reads `iri<TAB>score` lines; later lines override earlier ones.
pub fn load_scores(path: impl AsRef<Path>) -> Result<ScoreTable, RankError> {
    let file = std::fs::File::open(path)?;
    parse_scores(BufReader::new(file))
}

pub fn parse_scores<R: BufRead>(reader: R) -> Result<ScoreTable, RankError> {
    let mut table = ScoreTable::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        let n = i + 1;
        if line.trim().is_empty() {
            continue;
        }
        let (iri, score) = line
            .split_once('\t')
            .ok_or_else(|| RankError::Parse { line: n, message: "expected iri<TAB>score".into() })?;
        let iri = iri.trim().trim_start_matches('<').trim_end_matches('>');
        let iri = Iri::new(iri).map_err(|e| RankError::Parse { line: n, message: e.to_string() })?;
        let score: f64 = score
            .trim()
            .parse()
            .map_err(|_| RankError::Parse { line: n, message: format!("non-numeric score {:?}", score.trim()) })?;
        table.insert(iri, score).map_err(|e| RankError::Parse { line: n, message: e.to_string() })?;
    }
    Ok(table)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RankerConfig {
    pub damping: f64,
    pub sample_size: usize,
    pub quantile: f64,
    pub missing_score: f64,
}

impl Default for RankerConfig {
    fn default() -> Self {
        Self { damping: 0.85, sample_size: 100, quantile: 0.25, missing_score: 0.0 }
    }
}

impl RankerConfig {
    pub fn validate(&self) -> Result<(), RankError> {
        if !(self.damping > 0.0 && self.damping <= 1.0) {
            return Err(RankError::InvalidConfig(format!("damping {} not in (0, 1]", self.damping)));
        }
        if self.sample_size == 0 {
            return Err(RankError::InvalidConfig("sample_size must be at least 1".into()));
        }
        if !(0.0..1.0).contains(&self.quantile) {
            return Err(RankError::InvalidConfig(format!("quantile {} not in [0, 1)", self.quantile)));
        }
        if !self.missing_score.is_finite() || self.missing_score < 0.0 {
            return Err(RankError::InvalidConfig("missing_score must be finite and non-negative".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankedTemplate {
    pub id: String,
    pub rank: f64,
    pub samples_used: usize,
}

/// Damped sum over a route: the k-th entity contributes `damping^k` times
/// its score.
pub fn route_score(route: &[Iri], scores: &ScoreTable, damping: f64, missing: f64) -> f64 {
    let mut weight = 1.0;
    let mut total = 0.0;
    for e in route {
        total += weight * scores.get(e).unwrap_or(missing);
        weight *= damping;
    }
    total
}

/// Mean route score over the first `sample_size` instantiations.
pub fn rank_template(
    t: &Template,
    source: &dyn KnowledgeSource,
    scores: &ScoreTable,
    cfg: &RankerConfig,
) -> Result<RankedTemplate, RankError> {
    cfg.validate()?;
    let samples = instantiations(t, source, cfg.sample_size)?;
    if samples.is_empty() {
        return Err(RankError::Unsatisfiable(t.id.clone()));
    }
    let sum: f64 = samples.iter().map(|s| route_score(&s.route, scores, cfg.damping, cfg.missing_score)).sum();
    Ok(RankedTemplate { id: t.id.clone(), rank: sum / samples.len() as f64, samples_used: samples.len() })
}

/// Nearest-rank quantile: the value at 1-based position `max(1, ceil(q n))`
/// of the sorted values.
pub fn nearest_rank_quantile(values: &[f64], q: f64) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let pos = ((q * sorted.len() as f64).ceil() as usize).clamp(1, sorted.len());
    Some(sorted[pos - 1])
}

/// Keeps, within each class, the templates ranked at or above the class's
/// nearest-rank `cfg.quantile`. `class_of` maps template id to class; ids
/// without a class form their own group. Output is sorted by id.
pub fn filter_templates(
    ranked: &[RankedTemplate],
    class_of: &BTreeMap<String, Iri>,
    cfg: &RankerConfig,
) -> Vec<String> {
    let mut groups: BTreeMap<Option<&Iri>, Vec<&RankedTemplate>> = BTreeMap::new();
    for r in ranked {
        groups.entry(class_of.get(&r.id)).or_default().push(r);
    }
    let mut kept = BTreeSet::new();
    for members in groups.values() {
        let ranks: Vec<f64> = members.iter().map(|r| r.rank).collect();
        let Some(threshold) = nearest_rank_quantile(&ranks, cfg.quantile) else {
            continue;
        };
        kept.extend(members.iter().filter(|r| r.rank >= threshold).map(|r| r.id.clone()));
    }
    kept.into_iter().collect()
}

/// Ranks every template and applies the class-wise filter.
pub fn rank_all(
    templates: &[Template],
    source: &dyn KnowledgeSource,
    scores: &ScoreTable,
    cfg: &RankerConfig,
) -> Result<(Vec<RankedTemplate>, Vec<String>), RankError> {
    let mut ranked = templates.iter().map(|t| rank_template(t, source, scores, cfg)).collect::<Result<Vec<_>, _>>()?;
    ranked.sort_by(|a, b| a.id.cmp(&b.id));
    let class_of = templates.iter().map(|t| (t.id.clone(), t.class_iri.clone())).collect();
    let kept = filter_templates(&ranked, &class_of, cfg);
    Ok((ranked, kept))
}

/// `id, rank, kept` rows sorted by id.
pub fn write_ranked_tsv<W: Write>(mut out: W, ranked: &[RankedTemplate], kept: &[String]) -> std::io::Result<()> {
    let kept: BTreeSet<&str> = kept.iter().map(String::as_str).collect();
    let mut rows: Vec<&RankedTemplate> = ranked.iter().collect();
    rows.sort_by(|a, b| a.id.cmp(&b.id));
    writeln!(out, "id\trank\tkept")?;
    for r in rows {
        writeln!(out, "{}\t{}\t{}", r.id, r.rank, kept.contains(r.id.as_str()))?;
    }
    Ok(())
}

/// Reads the ids marked kept from a ranked TSV.
pub fn read_kept_ids<R: BufRead>(reader: R) -> Result<BTreeSet<String>, RankError> {
    let mut out = BTreeSet::new();
    for (i, line) in reader.lines().enumerate().skip(1) {
        let line = line?;
        let cols: Vec<&str> = line.split('\t').collect();
        if cols.len() != 3 {
            return Err(RankError::Parse { line: i + 1, message: "expected id, rank, kept".into() });
        }
        if cols[2] == "true" {
            out.insert(cols[0].to_string());
        }
    }
    Ok(out)
}
