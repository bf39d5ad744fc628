use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

const DESK: &[&str] = &["--hidden", "16,8", "--epochs", "15", "--seed", "5"];

fn ee(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ee"))
        .args(args)
        .env("RUST_LOG", "error")
        .output()
        .expect("spawn ee")
}

fn ok(args: &[&str]) -> Output {
    let o = ee(args);
    assert!(
        o.status.success(),
        "ee {args:?} failed:\n{}",
        String::from_utf8_lossy(&o.stderr)
    );
    o
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn with_desk(mut v: Vec<&str>) -> Vec<&str> {
    v.extend_from_slice(DESK);
    v
}

/// Writes a small synthetic corpus and returns its directory.
fn corpus(root: &Path) -> PathBuf {
    let dir = root.join("corpus");
    let cfg = root.join("synth.json");
    std::fs::write(&cfg, r#"{"synth": {"n_vulns": 600}}"#).unwrap();
    ok(&with_desk(vec!["--config", s(&cfg), "--out", s(&dir), "synth-gen"]));
    dir
}

fn single(dir: &Path, prefix: &str, suffix: &str) -> PathBuf {
    let found: Vec<_> = std::fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| {
            let n = p.file_name().unwrap().to_str().unwrap();
            n.starts_with(prefix) && n.ends_with(suffix) && !n.ends_with(".manifest.json")
        })
        .collect();
    assert_eq!(found.len(), 1, "{prefix}*{suffix} in {}: {found:?}", dir.display());
    found.into_iter().next().unwrap()
}

fn tree(dir: &Path) -> BTreeMap<PathBuf, Vec<u8>> {
    let mut out = BTreeMap::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for e in std::fs::read_dir(&d).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else {
                out.insert(p.strip_prefix(dir).unwrap().to_path_buf(), std::fs::read(&p).unwrap());
            }
        }
    }
    out
}

#[test]
fn synth_ingest_train_evaluate_score_report() {
    let tmp = tempfile::tempdir().unwrap();
    let corpus = corpus(tmp.path());
    for f in ["vulns.jsonl", "artifacts.jsonl", "evidence.jsonl", "trace.json"] {
        assert!(corpus.join(f).is_file(), "{f} missing");
    }
    let out = tmp.path().join("out");
    let base = vec!["--corpus", s(&corpus), "--out", s(&out)];

    ok(&with_desk([base.clone(), vec!["ingest"]].concat()));
    let lifecycle = std::fs::read_to_string(single(&out, "ingest.", ".lifecycle.jsonl")).unwrap();
    assert_eq!(lifecycle.lines().count(), 600);

    ok(&with_desk([base.clone(), vec!["train"]].concat()));
    let train_json = single(&out, "train.", ".json");
    let models = train_json.with_extension("");
    assert!(models.join("index.json").is_file());

    let with_models = [base.clone(), vec!["--models", s(&models)]].concat();
    ok(&with_desk([with_models.clone(), vec!["evaluate"]].concat()));
    let eval_json = single(&out, "evaluate.", ".json");
    let v: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&eval_json).unwrap()).unwrap();
    let auc = v["reports"]["30"]["roc_auc"].as_f64().expect("roc_auc at d+30");
    assert!(auc > 0.5 && auc <= 1.0, "ROC-AUC {auc}");

    // the last vulnerability of the corpus, scored a year after the last split
    let vulns = std::fs::read_to_string(corpus.join("vulns.jsonl")).unwrap();
    let last: serde_json::Value = serde_json::from_str(vulns.lines().last().unwrap()).unwrap();
    let id = last["id"].as_str().unwrap();
    let o = ok(&with_desk(
        [with_models, vec!["score", "--cve", id, "--date", "2020-06-01"]].concat(),
    ));
    let stdout = String::from_utf8(o.stdout).unwrap();
    assert_eq!(stdout.lines().count(), 1, "{stdout}");
    let score: serde_json::Value = serde_json::from_str(stdout.trim()).unwrap();
    assert_eq!(score["vuln_id"], id);
    let value = score["value"].as_f64().unwrap();
    assert!((0.0..=1.0).contains(&value));

    let o = ok(&["--out", s(&out), "report", "--input", s(&eval_json)]);
    assert!(String::from_utf8(o.stdout).unwrap().contains("ROC-AUC"));
    single(&out, "report.", ".tvauc.csv");
    single(&out, "report.", ".prio.csv");
}

#[test]
fn reruns_are_byte_identical() {
    let tmp = tempfile::tempdir().unwrap();
    let corpus = corpus(tmp.path());
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    for out in [&a, &b] {
        ok(&with_desk(vec!["--corpus", s(&corpus), "--out", s(out), "evaluate"]));
        ok(&with_desk(vec!["--corpus", s(&corpus), "--out", s(out), "chi2"]));
    }
    // manifests record absolute input paths, which differ by design
    let strip = |t: BTreeMap<PathBuf, Vec<u8>>| -> BTreeMap<PathBuf, Vec<u8>> {
        t.into_iter()
            .filter(|(p, _)| !p.to_str().unwrap().ends_with("manifest.json"))
            .collect()
    };
    let (ta, tb) = (strip(tree(&a)), strip(tree(&b)));
    assert!(ta.len() >= 10, "{:?}", ta.keys());
    assert_eq!(ta, tb);
}

#[test]
fn config_hash_separates_runs() {
    let tmp = tempfile::tempdir().unwrap();
    let corpus = corpus(tmp.path());
    let out = tmp.path().join("out");
    ok(&["--corpus", s(&corpus), "--out", s(&out), "--seed", "1", "ingest"]);
    ok(&["--corpus", s(&corpus), "--out", s(&out), "--seed", "2", "ingest"]);
    let n = std::fs::read_dir(&out)
        .unwrap()
        .filter(|e| {
            e.as_ref()
                .unwrap()
                .file_name()
                .to_str()
                .unwrap()
                .ends_with(".manifest.json")
        })
        .count();
    assert_eq!(n, 2);
}

#[test]
fn usage_errors_exit_nonzero() {
    let tmp = tempfile::tempdir().unwrap();
    let bad = tmp.path().join("bad.json");
    std::fs::write(&bad, r#"{"no_such_field": 1}"#).unwrap();
    let missing = tmp.path().join("missing");
    let cases: Vec<Vec<&str>> = vec![
        vec!["--no-such-flag", "ingest"],
        vec![],
        vec!["score", "--cve", "X"],
        vec!["--config", s(&bad), "ingest"],
        vec!["--corpus", s(&missing), "--out", s(tmp.path()), "ingest"],
        vec!["--loss", "hinge", "--out", s(tmp.path()), "ingest"],
        vec!["--epochs", "0", "--out", s(tmp.path()), "ingest"],
    ];
    for args in cases {
        let o = ee(&args);
        assert!(!o.status.success(), "ee {args:?} succeeded");
        assert!(!o.stderr.is_empty(), "ee {args:?} printed no error");
    }
}

#[test]
fn score_rejects_unknown_vulnerability() {
    let tmp = tempfile::tempdir().unwrap();
    let corpus = corpus(tmp.path());
    let out = tmp.path().join("out");
    ok(&with_desk(vec!["--corpus", s(&corpus), "--out", s(&out), "train"]));
    let models = PathBuf::from(
        single(&out, "train.", ".json")
            .to_str()
            .unwrap()
            .trim_end_matches(".json"),
    );
    let o = ee(&with_desk(vec![
        "--corpus",
        s(&corpus),
        "--out",
        s(&out),
        "--models",
        s(&models),
        "score",
        "--cve",
        "CVE-0000-0000",
        "--date",
        "2020-01-01",
    ]));
    assert!(!o.status.success());
    assert!(o.stdout.is_empty());
}
