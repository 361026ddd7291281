use std::fs;
use std::path::Path;
use std::process::{Command, Output};

const BIN: &str = env!("CARGO_BIN_EXE_fundmap");

fn fundmap(args: &[&str]) -> Output {
    Command::new(BIN)
        .args(args)
        .env_remove("FUNDMAP_CONFIG")
        .output()
        .expect("spawn fundmap")
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

fn small_corpus(dir: &Path) -> String {
    let cfg = dir.join("small.cfg");
    fs::write(&cfg, "synth_n_pubs = 1500\nsynth_n_countries = 12\n").unwrap();
    let syn = dir.join("syn");
    let out = fundmap(&["synth", "--config", cfg.to_str().unwrap(), "--out-dir", syn.to_str().unwrap()]);
    assert!(out.status.success(), "{}", stderr(&out));
    syn.join("corpus.jsonl").display().to_string()
}

#[test]
fn stage_before_its_dependency_exits_4_and_names_it() {
    let dir = tempfile::tempdir().unwrap();
    let out = fundmap(&["backbone", "--out-dir", dir.path().to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(4));
    let msg = stderr(&out);
    assert!(msg.contains("network.csv") && msg.contains("fundmap network"), "{msg}");

    let out = fundmap(&["resolve", "--out-dir", dir.path().to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(4));
    assert!(stderr(&out).contains("fundmap ingest"));
}

#[test]
fn configuration_problems_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path().to_str().unwrap();
    assert_eq!(fundmap(&["ingest", "--out-dir", d]).status.code(), Some(2));
    assert_eq!(fundmap(&["synth", "--out-dir", d, "--alpha", "1.2"]).status.code(), Some(2));
    assert_eq!(fundmap(&["synth", "--out-dir", d, "--eu-mode", "sideways"]).status.code(), Some(2));

    let cfg = dir.path().join("bad.cfg");
    fs::write(&cfg, "no_such_key = 1\n").unwrap();
    let out = fundmap(&["synth", "--out-dir", d, "--config", cfg.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("no_such_key"));
}

#[test]
fn unreadable_input_exits_3() {
    let dir = tempfile::tempdir().unwrap();
    let missing = dir.path().join("absent.jsonl");
    let out = fundmap(&["ingest", "--input", missing.to_str().unwrap(), "--out-dir", dir.path().to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(3));
}

#[test]
fn reruns_skip_current_stages_and_reproduce_bytes() {
    let dir = tempfile::tempdir().unwrap();
    let input = small_corpus(dir.path());
    let out_dir = dir.path().join("out");
    let args = ["all", "--input", input.as_str(), "--out-dir", out_dir.to_str().unwrap()];

    assert!(fundmap(&args).status.success());
    let manifest = fs::read(out_dir.join("manifest.json")).unwrap();
    let impact = fs::read(out_dir.join("impact.csv")).unwrap();

    let again = fundmap(&args);
    assert!(stderr(&again).contains("counterfactual: up to date"), "{}", stderr(&again));

    let forced = fundmap(&[&args[..], &["--force"]].concat());
    assert!(stderr(&forced).contains("counterfactual: done"));
    assert_eq!(fs::read(out_dir.join("manifest.json")).unwrap(), manifest);
    assert_eq!(fs::read(out_dir.join("impact.csv")).unwrap(), impact);

    // A changed setting invalidates the stages it feeds.
    let changed = fundmap(&[&args[..], &["--alpha", "0.2"]].concat());
    assert!(stderr(&changed).contains("backbone: done"));
}

#[test]
fn rational_mode_keeps_the_same_backbone() {
    let dir = tempfile::tempdir().unwrap();
    let input = small_corpus(dir.path());
    let cfg = dir.path().join("rational.cfg");
    fs::write(&cfg, "numeric = rational\n").unwrap();
    let float_dir = dir.path().join("f64");
    let exact_dir = dir.path().join("exact");
    for (out, extra) in [(&float_dir, vec![]), (&exact_dir, vec!["--config", cfg.to_str().unwrap()])] {
        let mut args = vec!["all", "--input", input.as_str(), "--out-dir", out.to_str().unwrap()];
        args.extend(extra);
        let run = fundmap(&args);
        assert!(run.status.success(), "{}", stderr(&run));
    }
    let keys = |dir: &Path| -> Vec<String> {
        fs::read_to_string(dir.join("backbone.csv"))
            .unwrap()
            .lines()
            .map(|l| l.split(',').take(2).collect::<Vec<_>>().join(","))
            .collect()
    };
    assert_eq!(keys(&float_dir), keys(&exact_dir));
    assert_eq!(
        fs::read(float_dir.join("portfolio.csv")).unwrap(),
        fs::read(exact_dir.join("portfolio.csv")).unwrap()
    );
}

#[test]
fn report_bundles_every_figure_table() {
    let dir = tempfile::tempdir().unwrap();
    let input = small_corpus(dir.path());
    let out_dir = dir.path().join("out");
    assert!(fundmap(&["all", "--input", &input, "--out-dir", out_dir.to_str().unwrap()]).status.success());
    let index: serde_json::Value =
        serde_json::from_slice(&fs::read(out_dir.join("report/index.json")).unwrap()).unwrap();
    let entries = index.as_object().unwrap();
    assert_eq!(entries.len(), 12);
    for name in entries.keys() {
        assert!(out_dir.join("report").join(name).is_file(), "{name}");
    }
}
