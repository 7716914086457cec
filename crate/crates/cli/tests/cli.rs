use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn ipsift(args: &[&str], dir: &Path) -> Output {
    let out = Command::new(env!("CARGO_BIN_EXE_ipsift"))
        .args(args)
        .current_dir(dir)
        .output()
        .expect("binary runs");
    assert!(
        out.status.success(),
        "ipsift {args:?} failed:\n{}",
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

fn header(path: &Path) -> String {
    fs::read_to_string(path).unwrap().lines().next().unwrap_or_default().to_string()
}

#[test]
fn identify_characterize_report_compare() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    ipsift(&["synth", "--out-dir", ".", "--posts", "300", "--rng-seed", "7"], d);
    for f in ["source.jsonl", "source.ident.csv", "source.char.csv", "target.jsonl"] {
        assert!(d.join(f).exists(), "{f} missing");
    }

    let stats = ipsift(&["ingest", "source.jsonl"], d);
    let stats: serde_json::Value = serde_json::from_slice(&stats.stdout).unwrap();
    assert_eq!(stats["posts"], 300);

    let cands = ipsift(&["extract", "target.jsonl"], d);
    let cands = String::from_utf8(cands.stdout).unwrap();
    assert_eq!(cands.lines().next(), Some("post_id,span_start,span_end,raw"));
    assert_eq!(cands.lines().count(), 301);

    ipsift(&["train-ident", "source.jsonl", "source.ident.csv", "--model", "ident.json"], d);
    ipsift(&["train-char", "source.jsonl", "source.char.csv", "--model", "char.json"], d);
    ipsift(&["identify", "target.jsonl", "--model", "ident.json", "--output", "identified.csv"], d);
    ipsift(
        &["characterize", "target.jsonl", "--identified", "identified.csv", "--model", "char.json", "--output", "mentions.csv"],
        d,
    );
    assert_eq!(header(&d.join("mentions.csv")), "address,post_id,span_start,span_end,p_is_ip,p_malicious");

    ipsift(&["report", "mentions.csv", "--forum", "target.jsonl", "--output", "report.csv"], d);
    let report = fs::read_to_string(d.join("report.csv")).unwrap();
    assert_eq!(report.lines().next(), Some("address,mention_count,verdict,first_seen,last_seen"));
    let malicious = report
        .lines()
        .skip(1)
        .find(|l| l.split(',').nth(2) == Some("malicious"))
        .expect("some address is reported malicious");
    let address = malicious.split(',').next().unwrap();

    fs::write(d.join("bl.txt"), format!("# feed\n{address}\n10.0.0.1\n")).unwrap();
    let overlap = ipsift(&["compare-blacklist", "report.csv", "--blacklist", "bl.txt"], d);
    let overlap: serde_json::Value = serde_json::from_slice(&overlap.stdout).unwrap();
    assert_eq!(overlap["in_both"], serde_json::json!([address]));
    assert!(overlap["only_blacklist"].as_array().unwrap().contains(&"10.0.0.1".into()));
}

#[test]
fn eval_and_cross_seed_write_their_files() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    ipsift(&["synth", "--out-dir", ".", "--posts", "400", "--shift", "0.5", "--rng-seed", "8"], d);

    ipsift(&["eval", "source.jsonl", "source.ident.csv", "--kfold", "5", "--output", "cv.csv"], d);
    let cv = fs::read_to_string(d.join("cv.csv")).unwrap();
    assert_eq!(cv.lines().next(), Some("fold,precision,recall,accuracy"));
    assert_eq!(cv.lines().count(), 7);
    assert!(cv.lines().last().unwrap().starts_with("mean,"));

    ipsift(
        &[
            "cross-seed", "--source", "source.jsonl", "--source-labels", "source.char.csv", "--target", "target.jsonl",
            "--target-labels", "target.char.csv", "--threshold", "0.8", "--out-dir", "cs",
        ],
        d,
    );
    let cs = d.join("cs");
    assert_eq!(header(&cs.join("seed.csv")), "key,pseudo_label,confidence");
    let manifest: serde_json::Value = serde_json::from_str(&fs::read_to_string(cs.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["requested_threshold"], 0.8);
    assert_eq!(manifest["seed_positive"], manifest["seed_negative"]);
    let eval = fs::read_to_string(cs.join("eval.csv")).unwrap();
    assert!(eval.contains("cross-port,") && eval.contains("cross-seed,"));
    assert!(cs.join("model.json").exists());
}

#[test]
fn bad_inputs_are_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    ipsift(&["synth", "--out-dir", ".", "--posts", "100"], d);
    let run = |args: &[&str]| Command::new(env!("CARGO_BIN_EXE_ipsift")).args(args).current_dir(d).output().unwrap();

    let out = run(&["cross-seed", "--source", "source.jsonl", "--source-labels", "source.char.csv", "--target", "target.jsonl", "--threshold", "0.5", "--out-dir", "x"]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("threshold"));

    let out = run(&["train-ident", "source.jsonl", "source.ident.csv", "--word-range", "0", "--model", "m.json"]);
    assert!(!out.status.success());

    let out = run(&["eval", "source.jsonl", "source.ident.csv", "--feature-set", "bogus"]);
    assert!(!out.status.success());

    fs::write(d.join("mixed.jsonl"), concat!(
        r#"{"forum_id":"a","thread_id":"t","post_id":"p1","author_id":"u","timestamp":1,"body":"x"}"#, "\n",
        r#"{"forum_id":"b","thread_id":"t","post_id":"p2","author_id":"u","timestamp":2,"body":"y"}"#, "\n",
    ))
    .unwrap();
    assert!(!run(&["ingest", "mixed.jsonl"]).status.success());
}
