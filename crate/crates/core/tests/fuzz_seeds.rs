//! The checked-in fuzz corpus seeds must stay valid inputs for their parsers.

use std::path::PathBuf;

use forcegrip_core::formats::*;
use forcegrip_core::policy::Policy;

fn seeds(target: &str) -> Vec<(PathBuf, Vec<u8>)> {
    let dir = PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("../../fuzz/corpus")
        .join(target);
    let mut out: Vec<_> = std::fs::read_dir(&dir)
        .unwrap_or_else(|e| panic!("{}: {e}", dir.display()))
        .map(|e| {
            let p = e.unwrap().path();
            let bytes = std::fs::read(&p).unwrap();
            (p, bytes)
        })
        .collect();
    out.sort();
    assert!(!out.is_empty(), "no seeds for {target}");
    out
}

fn each_text(target: &str, parse: impl Fn(&str) -> bool) {
    for (path, bytes) in seeds(target) {
        let text = String::from_utf8(bytes).unwrap();
        assert!(parse(&text), "{} does not parse", path.display());
    }
}

#[test]
fn text_seeds_parse() {
    each_text("rig", |t| parse_rig(t).is_ok());
    each_text("layout", |t| parse_layout(t).is_ok());
    each_text("task_spec", |t| parse_task_spec(t).is_ok());
    each_text("demo", |t| parse_demo(t).is_ok());
    each_text("hand_track", |t| parse_hand_track(t).is_ok());
    each_text("session", |t| parse_session(t).is_ok());
    each_text("curve", |t| parse_curve(t).is_ok());
}

#[test]
fn model_seeds_load() {
    for (path, bytes) in seeds("model") {
        assert!(Policy::from_bytes(&bytes).is_ok(), "{} does not load", path.display());
    }
}
