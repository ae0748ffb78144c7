//! Acceptance criterion 9: byte-identical synth output across runs and a
//! deterministic full pipeline on 2,000 opinions in under two minutes.

use std::collections::BTreeMap;
use std::path::Path;
use std::process::Command;
use std::time::Instant;

fn oprank(args: &[&str]) -> std::process::Output {
    Command::new(env!("CARGO_BIN_EXE_oprank"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn run_ok(args: &[&str]) {
    let output = oprank(args);
    assert!(
        output.status.success(),
        "oprank {args:?} failed:\n{}",
        String::from_utf8_lossy(&output.stderr)
    );
}

fn dir_bytes(dir: &Path) -> BTreeMap<String, Vec<u8>> {
    let mut files = BTreeMap::new();
    for entry in std::fs::read_dir(dir).unwrap() {
        let entry = entry.unwrap();
        if entry.file_type().unwrap().is_file() {
            files.insert(
                entry.file_name().to_string_lossy().into_owned(),
                std::fs::read(entry.path()).unwrap(),
            );
        }
    }
    files
}

const SYNTH_TOML: &str = "\
seed = 77
n_stocks = 400
n_days = 400
n_opinions = 2000
horizon_days = 60
strength_return_coupling = 0.6
fsd_noise = 0.15
";

fn run_pipeline(data: &Path, out: &Path, config: &Path) {
    let data_s = data.to_str().unwrap();
    let out_s = out.to_str().unwrap();
    let config_s = config.to_str().unwrap();
    let calendar = format!("{data_s}/calendar.txt");
    let opinions = format!("{data_s}/opinions.jsonl");

    run_ok(&["synth", "--config", config_s, "--out", data_s]);
    run_ok(&[
        "score",
        "--calendar",
        &calendar,
        "--opinions",
        &opinions,
        "--strategies",
        "AllSent,AllArg,ClaimOnly,PremiseOnly,KeyPremise,ExpertLike,ExpertLikeFsd",
        "--out",
        out_s,
    ]);
    run_ok(&[
        "backtest",
        "--calendar",
        &calendar,
        "--opinions",
        &opinions,
        "--prices",
        &format!("{data_s}/prices.csv"),
        "--out",
        out_s,
    ]);
    run_ok(&[
        "evaluate",
        "--scores",
        &format!("{out_s}/strategy_scores.csv"),
        "--outcomes",
        &format!("{out_s}/outcomes.csv"),
        "--topk",
        "10,20",
        "--ndcg",
        "--out",
        out_s,
    ]);
    run_ok(&[
        "behavior",
        "--calendar",
        &calendar,
        "--scores",
        &format!("{out_s}/strategy_scores.csv"),
        "--opinions",
        &opinions,
        "--events",
        &format!("{data_s}/analyst_events.csv"),
        "--flows",
        &format!("{data_s}/flows.csv"),
        "--out",
        out_s,
    ]);
}

#[test]
fn criterion_9_determinism_and_full_pipeline() {
    let root = tempfile::tempdir().unwrap();
    let config = root.path().join("synth.toml");
    std::fs::write(&config, SYNTH_TOML).unwrap();

    // synth twice into the same directory: the file set must not change
    let data = root.path().join("data");
    run_ok(&[
        "synth",
        "--config",
        config.to_str().unwrap(),
        "--out",
        data.to_str().unwrap(),
    ]);
    let first = dir_bytes(&data);
    let names: Vec<&str> = first.keys().map(String::as_str).collect();
    assert_eq!(
        names,
        [
            "analyst_events.csv",
            "calendar.txt",
            "flows.csv",
            "opinions.jsonl",
            "prices.csv",
            "synth_manifest.json",
        ]
    );
    run_ok(&[
        "synth",
        "--config",
        config.to_str().unwrap(),
        "--out",
        data.to_str().unwrap(),
    ]);
    let second = dir_bytes(&data);
    assert_eq!(first, second, "synth output changed between identical runs");

    // full pipeline on 2,000 opinions, timed, then repeated for determinism
    let start = Instant::now();
    let out_a = root.path().join("run_a");
    run_pipeline(&data, &out_a, &config);
    let elapsed = start.elapsed();
    assert!(
        elapsed.as_secs_f64() < 120.0,
        "pipeline took {elapsed:?}, budget 2 minutes"
    );

    let out_b = root.path().join("run_b");
    run_pipeline(&data, &out_b, &config);
    let bytes_a = dir_bytes(&out_a);
    let bytes_b = dir_bytes(&out_b);
    let names: Vec<&str> = bytes_a.keys().map(String::as_str).collect();
    assert_eq!(
        names,
        [
            "backtest_manifest.json",
            "backtest_skips.csv",
            "behavior.csv",
            "behavior_manifest.json",
            "evaluate_manifest.json",
            "evaluate_skips.csv",
            "outcomes.csv",
            "report.csv",
            "score_manifest.json",
            "strategy_scores.csv",
        ]
    );
    // manifests record their own out_dir, which differs between run_a and
    // run_b by construction; the determinism claim is about the CSV reports
    for (name, bytes) in &bytes_a {
        if name.ends_with(".csv") {
            assert_eq!(
                Some(bytes),
                bytes_b.get(name),
                "{name} differs between identical pipeline runs"
            );
        }
    }

    println!(
        "criterion 9 PASS: byte-identical synth and pipeline outputs; 2000-opinion pipeline in {elapsed:?}"
    );
}
