use std::path::PathBuf;

use emodrift_core::ingest::{
    hatexplain_from_str, normalize, parse_hatexplain_json, parse_toxic_comment_csv, FilterPolicy,
    IngestStats,
};

fn fixture(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("tests/fixtures")
        .join(name)
}

fn golden(name: &str) -> String {
    std::fs::read_to_string(fixture(name)).unwrap()
}

fn run_toxic(policy: FilterPolicy) -> (String, IngestStats) {
    let mut out = Vec::new();
    let stats = normalize(
        parse_toxic_comment_csv(fixture("toxic_comment.csv")).unwrap(),
        policy,
        &mut out,
    )
    .unwrap();
    (String::from_utf8(out).unwrap(), stats)
}

fn run_hatexplain(policy: FilterPolicy) -> (String, IngestStats) {
    let mut out = Vec::new();
    let stats = normalize(
        parse_hatexplain_json(fixture("hatexplain.json")).unwrap(),
        policy,
        &mut out,
    )
    .unwrap();
    (String::from_utf8(out).unwrap(), stats)
}

#[test]
fn toxic_comment_matches_golden() {
    let (out, stats) = run_toxic(FilterPolicy::None);
    assert_eq!(out, golden("toxic_comment.none.jsonl"));
    assert_eq!((stats.read, stats.kept, stats.errored), (20, 20, 0));

    let (out, stats) = run_toxic(FilterPolicy::Default);
    assert_eq!(out, golden("toxic_comment.default.jsonl"));
    assert_eq!((stats.kept, stats.dropped), (15, 5));
}

#[test]
fn toxic_comment_multiline_field_survives() {
    let (out, _) = run_toxic(FilterPolicy::None);
    let third: serde_json::Value = serde_json::from_str(out.lines().nth(2).unwrap()).unwrap();
    assert_eq!(
        third["text"],
        "I hate this article,\nand I hate \"editors\" like you.\n\nGo away."
    );
}

#[test]
fn hatexplain_matches_golden() {
    let (out, stats) = run_hatexplain(FilterPolicy::None);
    assert_eq!(out, golden("hatexplain.none.jsonl"));
    assert_eq!(stats.read, 10);

    let (out, stats) = run_hatexplain(FilterPolicy::Default);
    assert_eq!(out, golden("hatexplain.default.jsonl"));
    assert_eq!((stats.kept, stats.dropped), (6, 4));
}

#[test]
fn hatexplain_tie_is_undecided() {
    let text = std::fs::read_to_string(fixture("hatexplain.json")).unwrap();
    let rec = hatexplain_from_str(&text)
        .unwrap()
        .into_iter()
        .map(Result::unwrap)
        .find(|r| r.id == "13851720_gab")
        .unwrap();
    assert_eq!(
        rec.harm_labels.into_iter().collect::<Vec<_>>(),
        ["undecided"]
    );
}
