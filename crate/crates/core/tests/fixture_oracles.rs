mod common;

use std::collections::{BTreeMap, BTreeSet};

use nspm::dataset::{build_dataset, build_vocab, DatasetConfig, Side, RESERVED};
use nspm::kg::{fetch_class_metadata, Graph};
use nspm::rank::{load_scores, nearest_rank_quantile, rank_all, RankerConfig};
use nspm::template::{generate_to_depth, instantiations, label_lexicalizer, Template};

use common::oracle::{read_scores, route_sum, Oracle};

fn setup() -> (Graph, Vec<Template>, Oracle) {
    let graph = common::graph();
    let meta = fetch_class_metadata(&graph, &common::class()).unwrap();
    let templates = generate_to_depth(&meta, &graph, 2, &label_lexicalizer).unwrap();
    (graph, templates, Oracle::new(common::raw_triples(), &common::class()))
}

fn key(t: &Template) -> (Vec<String>, String) {
    (t.key.property_chain.iter().map(|i| i.as_str().to_string()).collect(), t.key.variant.name().to_string())
}

#[test]
fn template_set_matches_path_enumeration() {
    let (_, templates, oracle) = setup();
    let expected: BTreeSet<(Vec<String>, String)> = oracle
        .templates(usize::MAX)
        .iter()
        .map(|t| (t.chain.iter().map(|i| i.as_str().to_string()).collect(), t.variant.to_string()))
        .collect();
    let got: BTreeSet<_> = templates.iter().map(key).collect();
    assert_eq!(got, expected);
    assert_eq!(templates.len(), 98);
    assert_eq!(templates.iter().filter(|t| t.depth == 1).count(), 34);
    assert_eq!(templates.iter().filter(|t| t.depth == 2).count(), 64);
}

#[test]
fn instantiation_counts_and_routes_match_oracle() {
    let (graph, templates, oracle) = setup();
    let expected: BTreeMap<_, _> = oracle
        .templates(100)
        .into_iter()
        .map(|t| ((t.chain.iter().map(|i| i.as_str().to_string()).collect::<Vec<_>>(), t.variant.to_string()), t))
        .collect();
    for t in &templates {
        let want = &expected[&key(t)];
        let got = instantiations(t, &graph, 100).unwrap();
        assert_eq!(got.len(), want.fillings.len(), "{}", t.id);
        for (g, w) in got.iter().zip(&want.fillings) {
            assert_eq!(g.route, w.route, "{}", t.id);
        }
    }
}

#[test]
fn pair_count_is_sum_of_capped_instantiations() {
    let (graph, templates, oracle) = setup();
    let expected: usize = oracle.templates(40).iter().map(|t| t.fillings.len()).sum();
    let ds = build_dataset(&templates, &graph, &DatasetConfig::default(), &common::prefixes()).unwrap();
    assert_eq!(ds.pairs.len(), expected);
    assert_eq!(expected, 1381);
}

#[test]
fn ranks_match_damped_route_means() {
    let (graph, templates, oracle) = setup();
    let scores_text = std::fs::read_to_string(common::fixture("scores.tsv")).unwrap();
    let scores = read_scores(&scores_text);
    let table = load_scores(common::fixture("scores.tsv")).unwrap();
    let cfg = RankerConfig::default();
    let (ranked, kept) = rank_all(&templates, &graph, &table, &cfg).unwrap();

    let by_key: BTreeMap<_, _> = templates.iter().map(|t| (t.id.clone(), key(t))).collect();
    let oracle_rank: BTreeMap<_, f64> = oracle
        .templates(cfg.sample_size)
        .into_iter()
        .map(|t| {
            let sum: f64 = t.fillings.iter().map(|f| route_sum(&f.route, &scores, cfg.damping)).sum();
            let k = (t.chain.iter().map(|i| i.as_str().to_string()).collect::<Vec<_>>(), t.variant.to_string());
            (k, sum / t.fillings.len() as f64)
        })
        .collect();
    for r in &ranked {
        let want = oracle_rank[&by_key[&r.id]];
        assert!((r.rank - want).abs() < 1e-9, "{}: {} vs {}", r.id, r.rank, want);
    }

    // Nearest-rank threshold computed by hand.
    let mut ranks: Vec<f64> = oracle_rank.values().copied().collect();
    ranks.sort_by(f64::total_cmp);
    let pos = ((cfg.quantile * ranks.len() as f64).ceil() as usize).max(1);
    let threshold = ranks[pos - 1];
    assert_eq!(nearest_rank_quantile(&ranks, cfg.quantile), Some(threshold));
    assert_eq!(kept.len(), ranks.iter().filter(|&&r| r >= threshold).count());
    assert_eq!(kept.len(), 74);
}

#[test]
fn vocabulary_is_reserved_plus_distinct_tokens() {
    let (graph, templates, _) = setup();
    let ds = build_dataset(&templates, &graph, &DatasetConfig::default(), &common::prefixes()).unwrap();
    let nl: BTreeSet<&str> = ds.pairs.iter().flat_map(|p| p.nl.iter().map(String::as_str)).collect();
    let ql: BTreeSet<&str> = ds.pairs.iter().flat_map(|p| p.ql.tokens().iter().map(String::as_str)).collect();
    assert_eq!(build_vocab(&ds, Side::Nl, 1).unwrap().len(), RESERVED.len() + nl.len());
    assert_eq!(build_vocab(&ds, Side::Ql, 1).unwrap().len(), RESERVED.len() + ql.len());
}

#[test]
fn generation_is_deterministic() {
    let (graph, a, _) = setup();
    let (_, b, _) = setup();
    assert_eq!(a, b);
    let ids: BTreeSet<&String> = a.iter().map(|t| &t.id).collect();
    assert_eq!(ids.len(), a.len());
    let _ = graph;
}
