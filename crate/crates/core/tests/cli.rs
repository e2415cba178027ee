mod common;

use std::collections::BTreeMap;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::{Command, Output, Stdio};

use nspm::eval::content_hash;

const SUBCOMMANDS: [&str; 9] =
    ["generate-templates", "rank", "build-dataset", "split", "train", "translate", "evaluate", "grid", "heatmap"];

fn nspm(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_nspm")).args(args).output().unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

/// Writes a config pointing at the fixtures with output under `dir`.
fn config(dir: &Path, extra: &str) -> PathBuf {
    let fixtures = common::fixture("");
    let text = format!(
        "[kg]\nnt_path = {:?}\nclass_iri = {:?}\nscores = {:?}\n\n[dataset]\nmax_per_template = 5\n\n\
         [model]\nlayers = 1\nunits = 8\ndropout = 0.0\nattention = \"luong\"\n\n\
         [train]\nmax_steps = 20\nbatch_size = 8\neval_every = 10\nmax_decode_len = 30\n\n\
         [output]\ndir = {:?}\n{extra}",
        fixtures.join("eukaryotes_mini.nt"),
        common::CLASS,
        fixtures.join("scores.tsv"),
        dir.join("out"),
    );
    let path = dir.join("nspm.toml");
    std::fs::write(&path, text).unwrap();
    path
}

fn run_stage(cfg: &Path, stage: &str) {
    let o = nspm(&[stage, "-c", cfg.to_str().unwrap()]);
    assert!(o.status.success(), "{stage}: {}", stderr(&o));
}

fn hashes(dir: &Path) -> BTreeMap<String, String> {
    let mut out = BTreeMap::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for e in std::fs::read_dir(&d).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else {
                let rel = p.strip_prefix(dir).unwrap().display().to_string();
                out.insert(rel, content_hash(&std::fs::read(&p).unwrap()));
            }
        }
    }
    out
}

#[test]
fn help_matches_golden_files() {
    let update = std::env::var_os("UPDATE_GOLDEN").is_some();
    let golden = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/golden");
    let mut cases: Vec<(String, Vec<&str>)> = vec![("nspm".into(), vec!["--help"])];
    cases.extend(SUBCOMMANDS.iter().map(|s| (s.to_string(), vec![*s, "--help"])));
    for (name, args) in cases {
        let o = nspm(&args);
        assert!(o.status.success());
        let text = String::from_utf8(o.stdout).unwrap();
        let path = golden.join(format!("{name}.txt"));
        if update {
            std::fs::write(&path, &text).unwrap();
        }
        let want = std::fs::read_to_string(&path).unwrap_or_else(|_| panic!("missing {}", path.display()));
        assert_eq!(text, want, "{name} --help drifted; rerun with UPDATE_GOLDEN=1");
        if name != "nspm" {
            for flag in ["--config", "--set", "--help"] {
                assert!(text.contains(flag), "{name} lacks {flag}");
            }
        }
    }
}

#[test]
fn usage_and_config_errors_exit_1() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(nspm(&[]).status.code(), Some(1));
    assert_eq!(nspm(&["frobnicate"]).status.code(), Some(1));

    let missing = dir.path().join("missing.toml");
    std::fs::write(&missing, "[kg]\nnt_path = \"x.nt\"\n\n[output]\ndir = \"out\"\n").unwrap();
    let o = nspm(&["split", "-c", missing.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("class_iri"), "{}", stderr(&o));

    let cfg = config(dir.path(), "");
    let o = nspm(&["train", "-c", cfg.to_str().unwrap(), "--set", "model.dropout=1.5"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("dropout"), "{}", stderr(&o));
    let o = nspm(&["rank", "-c", cfg.to_str().unwrap(), "--set", "ranker.damping=0"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("damping"));
}

#[test]
fn missing_predecessor_is_a_runtime_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config(dir.path(), "");
    let o = nspm(&["rank", "-c", cfg.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("generate-templates"), "{}", stderr(&o));
}

#[test]
fn stages_rerun_to_identical_files() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config(dir.path(), "");
    for stage in ["generate-templates", "rank", "build-dataset", "split"] {
        run_stage(&cfg, stage);
    }
    let out = dir.path().join("out");
    let first = hashes(&out);
    assert!(first.keys().any(|k| k.ends_with("train.ql")), "{first:?}");
    // Rerunning one stage from its predecessor's artifacts leaves
    // everything unchanged.
    run_stage(&cfg, "split");
    assert_eq!(hashes(&out), first);
    std::fs::remove_dir_all(&out).unwrap();
    for stage in ["generate-templates", "rank", "build-dataset", "split"] {
        run_stage(&cfg, stage);
    }
    assert_eq!(hashes(&out), first);
}

#[test]
fn translate_writes_one_line_per_question() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config(dir.path(), "");
    for stage in ["generate-templates", "rank", "build-dataset", "split", "train"] {
        run_stage(&cfg, stage);
    }
    let mut child = Command::new(env!("CARGO_BIN_EXE_nspm"))
        .args(["translate", "-c", cfg.to_str().unwrap()])
        .stdin(Stdio::piped())
        .stdout(Stdio::piped())
        .spawn()
        .unwrap();
    child
        .stdin
        .take()
        .unwrap()
        .write_all(b"what is the birth date of barack obama\n\nwho is the spouse of michelle obama\n")
        .unwrap();
    let o = child.wait_with_output().unwrap();
    assert!(o.status.success());
    let text = String::from_utf8(o.stdout).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines.len(), 3, "{text}");

    run_stage(&cfg, "evaluate");
    let o = nspm(&["heatmap", "-c", cfg.to_str().unwrap(), "-q", "who is the spouse of barack obama"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let o = nspm(&["translate", "-c", cfg.to_str().unwrap(), "--model", dir.path().join("none.nspm").to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
}
