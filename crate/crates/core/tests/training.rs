mod common;

use std::io::Write;
use std::process::{Command, Stdio};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use nspm::dataset::{Dataset, QAPair};
use nspm::kg::PrefixTable;
use nspm::seq2seq::{init_for_corpus, save_model, train, Attention, ModelConfig, TrainConfig};
use nspm::sparql::{decode, to_sparql, TokenSeq};
use nspm::template::{CompositionKey, VariantKind};

const PEOPLE: [&str; 10] = ["ada", "alan", "grace", "edsger", "barbara", "donald", "john", "frances", "ken", "niklaus"];
const PROPS: [&str; 5] = ["spouse", "parent", "genus", "birthPlace", "birthDate"];

/// Fifty `what is the <p> of <e>` pairs.
fn toy_corpus() -> Dataset {
    let mut pairs = Vec::new();
    for person in PEOPLE {
        for prop in PROPS {
            let entity = format!("{}{}", &person[..1].to_uppercase(), &person[1..]);
            pairs.push(QAPair {
                nl: ["what", "is", "the", prop, "of", person].iter().map(|s| s.to_lowercase()).collect(),
                ql: TokenSeq::parse_line(&format!(
                    "select var_x where brack_open dbr_{entity} dbo_{prop} var_x brack_close"
                )),
                template_id: prop.to_string(),
                key: CompositionKey { property_chain: vec![common::dbo(prop)], variant: VariantKind::Plain },
                entities: vec![common::dbr(&entity)],
            });
        }
    }
    Dataset::from_pairs(pairs)
}

fn toy_model_config() -> ModelConfig {
    ModelConfig { layers: 2, units: 128, embed_dim: None, dropout: 0.2, attention: Attention::ScaledLuong, seed: 3 }
}

#[test]
fn toy_corpus_is_memorized_and_survives_a_process_boundary() {
    let data = toy_corpus();
    assert_eq!(data.len(), 50);
    let model = init_for_corpus(&toy_model_config(), &data, false).unwrap();
    let initial: f64 =
        data.pairs.iter().map(|p| model.forward(&p.nl, p.ql.tokens()).unwrap().loss).sum::<f64>() / data.len() as f64;
    let cfg = TrainConfig { max_steps: 2000, eval_every: 500, ..TrainConfig::default() };
    let out = train(model, &data, &data, &cfg).unwrap();
    let trained = &out.model;
    let last = out.history.last().unwrap().loss;
    assert!(last < initial / 4.0, "train loss {last} vs initial {initial}");
    let exact = data.pairs.iter().filter(|p| trained.translate(&p.nl, 60).0 == p.ql).count();
    assert!(exact * 10 >= data.len() * 9, "{exact}/50 memorized");

    // Same translations from a separate process reading the checkpoint.
    let dir = tempfile::tempdir().unwrap();
    let model_path = dir.path().join("toy.nspm");
    save_model(trained, &model_path).unwrap();
    let cfg_path = dir.path().join("nspm.toml");
    std::fs::write(
        &cfg_path,
        format!(
            "[kg]\nnt_path = {:?}\nclass_iri = {:?}\n\n[output]\ndir = {:?}\n",
            common::fixture("eukaryotes_mini.nt"),
            common::CLASS,
            dir.path().join("out")
        ),
    )
    .unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let words: Vec<&str> = PEOPLE.iter().chain(&PROPS).chain(&["what", "is", "the", "of", "who"]).copied().collect();
    let questions: Vec<String> = (0..100)
        .map(|i| {
            if i % 2 == 0 {
                data.pairs[i / 2].nl_line()
            } else {
                (0..6).map(|_| *words.choose(&mut rng).unwrap()).collect::<Vec<_>>().join(" ").to_lowercase()
            }
        })
        .collect();
    let prefixes = PrefixTable::default();
    let expected: Vec<String> = questions
        .iter()
        .map(|q| {
            let nl = nspm::dataset::tokenize_nl(q);
            match decode(&trained.translate(&nl, 60).0, &prefixes) {
                Ok(query) => to_sparql(&query, Some(&prefixes)),
                Err(_) => "DECODE_ERROR".to_string(),
            }
        })
        .collect();
    let mut child = Command::new(env!("CARGO_BIN_EXE_nspm"))
        .args(["translate", "-c", cfg_path.to_str().unwrap(), "--model", model_path.to_str().unwrap()])
        .stdin(Stdio::piped())
        .stdout(Stdio::piped())
        .spawn()
        .unwrap();
    child.stdin.take().unwrap().write_all((questions.join("\n") + "\n").as_bytes()).unwrap();
    let o = child.wait_with_output().unwrap();
    assert!(o.status.success());
    let got: Vec<String> = String::from_utf8(o.stdout).unwrap().lines().map(str::to_string).collect();
    assert_eq!(got, expected);
}

#[test]
fn zero_learning_rate_leaves_weights_unchanged() {
    let data = toy_corpus();
    let cfg = ModelConfig { units: 16, ..toy_model_config() };
    let model = init_for_corpus(&cfg, &data, false).unwrap();
    let tc = TrainConfig { max_steps: 30, eval_every: 10, learning_rate: 0.0, ..TrainConfig::default() };
    let out = train(model.clone(), &data, &data, &tc).unwrap();
    assert_eq!(out.model.weights, model.weights);
    let bleus: Vec<f64> = out.history.iter().map(|r| r.valid_bleu).collect();
    assert!(bleus.windows(2).all(|w| w[0] == w[1]), "{bleus:?}");
}

#[test]
fn training_is_deterministic() {
    let data = toy_corpus();
    let cfg = ModelConfig { units: 16, ..toy_model_config() };
    let tc = TrainConfig { max_steps: 40, eval_every: 20, ..TrainConfig::default() };
    let a = train(init_for_corpus(&cfg, &data, true).unwrap(), &data, &data, &tc).unwrap();
    let b = train(init_for_corpus(&cfg, &data, true).unwrap(), &data, &data, &tc).unwrap();
    assert_eq!(a.model, b.model);
    assert_eq!(a.log_tsv(), b.log_tsv());
}

#[test]
fn dropout_does_not_affect_inference() {
    let data = toy_corpus();
    let heavy = ModelConfig { dropout: 0.7, units: 16, ..toy_model_config() };
    let m = init_for_corpus(&heavy, &data, false).unwrap();
    let mut off = m.clone();
    off.config.dropout = 0.0;
    for p in &data.pairs[..5] {
        assert_eq!(m.translate(&p.nl, 20), off.translate(&p.nl, 20));
        assert_eq!(m.forward(&p.nl, p.ql.tokens()).unwrap(), off.forward(&p.nl, p.ql.tokens()).unwrap());
    }
}
