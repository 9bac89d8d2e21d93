//! The emitted SMT-LIB corpus is deterministic and matches the checked-in
//! golden files. Set `UPDATE_GOLDEN=1` to rewrite them.

use std::path::PathBuf;

use convergent_core::encoder::{encode_ni1, encode_ni2, SmtScript};
use convergent_core::spec::{default_sync_pairs, BUILTIN_NAMES};
use convergent_core::{builtin, Policy};

fn corpus() -> Vec<SmtScript> {
    let mut out = Vec::new();
    for name in BUILTIN_NAMES {
        let spec = builtin(name).unwrap();
        for p in Policy::matrix_columns(default_sync_pairs(name)) {
            out.push(encode_ni1(&spec, &p));
            out.push(encode_ni2(&spec, &p));
        }
    }
    out
}

fn golden_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/golden")
}

#[test]
fn encoding_is_deterministic() {
    let (a, b) = (corpus(), corpus());
    assert_eq!(a.len(), 64);
    for (x, y) in a.iter().zip(&b) {
        assert_eq!(x.text, y.text, "{}", x.file_name());
    }
    let mut names: Vec<String> = a.iter().map(|s| s.file_name()).collect();
    names.sort();
    names.dedup();
    assert_eq!(names.len(), 64);
}

#[test]
fn corpus_matches_golden_files() {
    let dir = golden_dir();
    if std::env::var_os("UPDATE_GOLDEN").is_some() {
        std::fs::create_dir_all(&dir).unwrap();
        for s in corpus() {
            std::fs::write(dir.join(s.file_name()), &s.text).unwrap();
        }
        return;
    }
    let mut stale = Vec::new();
    for s in corpus() {
        let path = dir.join(s.file_name());
        match std::fs::read_to_string(&path) {
            Ok(g) if g == s.text => {}
            _ => stale.push(s.file_name()),
        }
    }
    assert!(stale.is_empty(), "golden files differ (rerun with UPDATE_GOLDEN=1): {stale:?}");
    let on_disk = std::fs::read_dir(&dir).unwrap().count();
    assert_eq!(on_disk, 64, "unexpected files in {}", dir.display());
}

#[test]
fn scripts_stay_in_the_quantified_uf_fragment() {
    for s in corpus() {
        assert!(s.text.contains("(set-logic UF)"), "{}", s.file_name());
        for bad in ["Int", "Real", "(+ ", "(* ", "(- "] {
            assert!(!s.text.contains(bad), "{} mentions {bad}", s.file_name());
        }
        let opens = s.text.matches('(').count();
        let closes = s.text.matches(')').count();
        assert_eq!(opens, closes, "{}", s.file_name());
        assert!(s.text.trim_end().ends_with("(get-model)"));
    }
}
