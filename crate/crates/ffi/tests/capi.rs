use std::ffi::{c_char, CStr, CString};
use std::path::Path;
use std::ptr;

use nspm::dataset::Vocabulary;
use nspm::seq2seq::{init_model, save_model, Attention, ModelConfig};
use nspm_ffi::*;

fn take(s: *mut c_char) -> String {
    assert!(!s.is_null());
    let out = unsafe { CStr::from_ptr(s) }.to_str().unwrap().to_string();
    unsafe { nspm_string_free(s) };
    out
}

fn last_error() -> String {
    unsafe { CStr::from_ptr(nspm_last_error()) }.to_str().unwrap().to_string()
}

#[test]
fn codec_round_trip() {
    let codec = nspm_codec_new();
    let text = CString::new("SELECT ?x WHERE { dbr:Barack_Obama dbo:birthDate ?x }").unwrap();
    let mut out = ptr::null_mut();
    assert_eq!(unsafe { nspm_codec_encode(codec, text.as_ptr(), &mut out) }, NspmStatus::Ok);
    let tokens = take(out);
    assert_eq!(tokens, "select var_x where brack_open dbr_Barack_Obama dbo_birthDate var_x brack_close");

    let tokens_c = CString::new(tokens.clone()).unwrap();
    assert_eq!(unsafe { nspm_codec_decode(codec, tokens_c.as_ptr(), &mut out) }, NspmStatus::Ok);
    let sparql = CString::new(take(out)).unwrap();
    assert_eq!(unsafe { nspm_codec_encode(codec, sparql.as_ptr(), &mut out) }, NspmStatus::Ok);
    assert_eq!(take(out), tokens);
    unsafe { nspm_codec_free(codec) };
}

#[test]
fn errors_set_status_and_message() {
    let codec = nspm_codec_new();
    let mut out = ptr::null_mut();
    assert_eq!(unsafe { nspm_codec_encode(codec, ptr::null(), &mut out) }, NspmStatus::NullPointer);
    assert!(last_error().contains("sparql"));
    let bad = CString::new("select brack_open").unwrap();
    assert_eq!(unsafe { nspm_codec_decode(codec, bad.as_ptr(), &mut out) }, NspmStatus::Decode);
    assert!(!last_error().is_empty());
    assert!(out.is_null());
    let invalid = [0xffu8, 0xfe, 0];
    assert_eq!(unsafe { nspm_codec_decode(codec, invalid.as_ptr().cast(), &mut out) }, NspmStatus::InvalidUtf8);
    assert_eq!(unsafe { nspm_codec_decode(ptr::null(), bad.as_ptr(), &mut out) }, NspmStatus::NullPointer);
    unsafe { nspm_codec_free(codec) };
    unsafe { nspm_codec_free(ptr::null_mut()) };
    unsafe { nspm_string_free(ptr::null_mut()) };

    let mut model = ptr::null_mut();
    let missing = CString::new("/nonexistent/model.nspm").unwrap();
    assert_eq!(unsafe { nspm_model_load(missing.as_ptr(), &mut model) }, NspmStatus::Io);
    assert!(model.is_null());
}

#[test]
fn bleu_matches_library() {
    let c: Vec<CString> = ["a b c d", "e f"].iter().map(|s| CString::new(*s).unwrap()).collect();
    let r: Vec<CString> = ["a b c e", "e f"].iter().map(|s| CString::new(*s).unwrap()).collect();
    let cp: Vec<*const c_char> = c.iter().map(|s| s.as_ptr()).collect();
    let rp: Vec<*const c_char> = r.iter().map(|s| s.as_ptr()).collect();
    let mut score = f64::NAN;
    assert_eq!(unsafe { nspm_bleu(cp.as_ptr(), rp.as_ptr(), 2, &mut score) }, NspmStatus::Ok);
    let seq = |s: &str| nspm::sparql::TokenSeq::parse_line(s);
    let expected = nspm::eval::bleu(&[seq("a b c d"), seq("e f")], &[seq("a b c e"), seq("e f")]).unwrap();
    assert_eq!(score, expected);
    assert_eq!(unsafe { nspm_bleu(cp.as_ptr(), rp.as_ptr(), 0, &mut score) }, NspmStatus::InvalidArgument);
}

#[test]
fn model_handle_translates_like_the_library() {
    let words = |p: &str| Vocabulary::from_tokens((0..6).map(|i| format!("{p}{i}")));
    let cfg = ModelConfig { layers: 1, units: 8, attention: Attention::Luong, ..ModelConfig::default() };
    let model = init_model(&cfg, words("w"), words("t")).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("m.nspm");
    save_model(&model, &path).unwrap();

    let mut handle = ptr::null_mut();
    let path_c = CString::new(path.to_str().unwrap()).unwrap();
    assert_eq!(unsafe { nspm_model_load(path_c.as_ptr(), &mut handle) }, NspmStatus::Ok);
    let question = CString::new("w1 w2 w3").unwrap();
    let mut out = ptr::null_mut();
    assert_eq!(unsafe { nspm_model_translate_tokens(handle, question.as_ptr(), 10, &mut out) }, NspmStatus::Ok);
    let expected = model.translate(&["w1", "w2", "w3"], 10).0.to_string();
    assert_eq!(take(out), expected);
    let status = unsafe { nspm_model_translate_sparql(handle, question.as_ptr(), 10, &mut out) };
    assert!(matches!(status, NspmStatus::Ok | NspmStatus::Decode));
    if status == NspmStatus::Ok {
        take(out);
    }
    unsafe { nspm_model_free(handle) };
}

#[test]
fn version_is_static() {
    let v = unsafe { CStr::from_ptr(nspm_version()) }.to_str().unwrap();
    assert_eq!(v, env!("CARGO_PKG_VERSION"));
}

fn header() -> String {
    std::fs::read_to_string(Path::new(env!("CARGO_MANIFEST_DIR")).join("include/nspm.h")).unwrap()
}

#[test]
fn header_declares_every_export() {
    let h = header();
    let src = std::fs::read_to_string(Path::new(env!("CARGO_MANIFEST_DIR")).join("src/lib.rs")).unwrap();
    let exports: Vec<&str> = src
        .lines()
        .filter_map(|l| l.split("extern \"C\" fn ").nth(1))
        .map(|rest| rest.split('(').next().unwrap())
        .collect();
    assert!(exports.len() >= 12, "{exports:?}");
    for name in exports {
        assert!(h.contains(&format!("{name}(")), "{name} missing from header");
    }
    assert!(h.contains("NSPM_STATUS_DECODE = 5"));
}

#[test]
fn header_compiles_as_c() {
    let dir = tempfile::tempdir().unwrap();
    let src = dir.path().join("check.c");
    std::fs::write(&src, "#include \"nspm.h\"\nint main(void) { return nspm_version() == 0; }\n").unwrap();
    let include = Path::new(env!("CARGO_MANIFEST_DIR")).join("include");
    let status = match std::process::Command::new("cc").arg("-fsyntax-only").arg("-I").arg(&include).arg(&src).status() {
        Ok(s) => s,
        Err(_) => {
            eprintln!("no C compiler; skipping");
            return;
        }
    };
    assert!(status.success());
}
