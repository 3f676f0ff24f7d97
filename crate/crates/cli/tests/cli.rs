use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn fedspeech(out: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_fedspeech"))
        .env_remove("FEDSPEECH_CONFIG")
        .arg("--out")
        .arg(out)
        .args(args)
        .output()
        .expect("binary runs")
}

fn json(path: &Path) -> Value {
    serde_json::from_slice(&fs::read(path).unwrap()).unwrap()
}

#[test]
fn zero_duration_is_a_validation_error() {
    let dir = tempfile::tempdir().unwrap();
    let out = fedspeech(dir.path(), &["analyze", "--duration", "0"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(!dir.path().join("modules.csv").exists());
}

#[test]
fn unknown_flag_is_a_validation_error() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(fedspeech(dir.path(), &["analyze", "--nope"]).status.code(), Some(2));
}

#[test]
fn analyze_is_byte_identical_across_runs() {
    let dir = tempfile::tempdir().unwrap();
    let names = ["modules.csv", "modules.json", "layers.csv"];
    let mut runs = Vec::new();
    for _ in 0..2 {
        assert!(fedspeech(dir.path(), &["analyze", "--arch", "large"]).status.success());
        runs.push(names.map(|n| fs::read_to_string(dir.path().join(n)).unwrap()));
    }
    assert_eq!(runs[0], runs[1]);
    let csv = &runs[0][0];
    assert!(csv.starts_with("module,params,params_m,fwd_flops,gflops\n"));
    assert_eq!(csv.lines().count(), 5);
}

#[test]
fn report_carries_seed_and_config() {
    let dir = tempfile::tempdir().unwrap();
    assert!(fedspeech(dir.path(), &["--seed", "9", "analyze", "--batch", "2"]).status.success());
    let v = json(&dir.path().join("modules.json"));
    assert_eq!(v["seed"], 9);
    assert_eq!(v["config"]["workload"]["batch"], 2);
    assert_eq!(v["config_fingerprint"].as_str().unwrap().len(), 64);
    assert_eq!(v["command"], "analyze");
}

#[test]
fn fl_plan_ten_a40_clients() {
    let dir = tempfile::tempdir().unwrap();
    let out = fedspeech(dir.path(), &["fl-plan", "--clients", "10", "--device", "a40", "--batch", "4"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let v = json(&dir.path().join("fl_plan.json"));
    let hours = v["result"]["total_hours"].as_f64().unwrap();
    assert!((hours - 55.5).abs() / 55.5 <= 0.02, "{hours} h");
    let clients = fs::read_to_string(dir.path().join("clients.csv")).unwrap();
    assert_eq!(clients.lines().count(), 11);
}

#[test]
fn fl_sim_single_client_reaches_its_optimum() {
    let dir = tempfile::tempdir().unwrap();
    let out = fedspeech(dir.path(), &["fl-sim", "--clients", "1", "--rounds", "60", "--agg", "loss"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let v = json(&dir.path().join("fl_sim.json"));
    assert!(v["result"]["final_distance_to_oracle"].as_f64().unwrap() < 1e-6);
    let csv = fs::read_to_string(dir.path().join("trajectory.csv")).unwrap();
    assert_eq!(csv.lines().count(), 61);
}

#[test]
fn forecast_parity_year() {
    let dir = tempfile::tempdir().unwrap();
    let out = fedspeech(dir.path(), &["forecast", "--device", "nx", "--reference", "a40"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let v = json(&dir.path().join("forecast.json"));
    let year = v["result"]["forecast"]["parity_year"].as_f64().unwrap();
    assert!((2026.0..=2028.0).contains(&year), "{year}");
    assert_eq!(v["result"]["grid"].as_array().unwrap().len(), 4);
}

#[test]
fn oom_exits_four_and_writes_nothing() {
    let dir = tempfile::tempdir().unwrap();
    let out = fedspeech(
        dir.path(),
        &["memory", "--arch", "large", "--duration", "12", "--batch", "8", "--device", "nx", "--fail-on-oom"],
    );
    assert_eq!(out.status.code(), Some(4));
    assert!(!dir.path().join("memory.json").exists());
}

#[test]
fn memory_without_fail_flag_reports_verdict() {
    let dir = tempfile::tempdir().unwrap();
    let out = fedspeech(dir.path(), &["memory", "--device", "a40"]);
    assert!(out.status.success());
    let v = json(&dir.path().join("memory.json"));
    assert_eq!(v["result"]["fit"]["verdict"], "fits");
    assert!(v["result"]["kappa_in_range"].as_bool().unwrap());
}

#[test]
fn unknown_device_is_a_validation_error() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(fedspeech(dir.path(), &["predict-time", "--device", "toaster"]).status.code(), Some(2));
}

#[test]
fn mixed_on_cpu_device_is_infeasible() {
    let dir = tempfile::tempdir().unwrap();
    let out = fedspeech(dir.path(), &["predict-time", "--device", "rpi", "--precision", "mixed"]);
    assert_eq!(out.status.code(), Some(4));
}

#[test]
fn malformed_manifest_is_a_data_error() {
    let dir = tempfile::tempdir().unwrap();
    let manifest = dir.path().join("m.tsv");
    fs::write(&manifest, "utterance_id\tspeaker_id\tduration_s\nu1\ts1\tabc\n").unwrap();
    let out = fedspeech(dir.path(), &["fl-plan", "--clients", "1", "--manifest", manifest.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(3));
}

#[test]
fn config_file_and_unknown_keys() {
    let dir = tempfile::tempdir().unwrap();
    let good = dir.path().join("good.toml");
    fs::write(&good, "seed = 3\n[workload]\nbatch = 8\n").unwrap();
    let out = fedspeech(dir.path(), &["--config", good.to_str().unwrap(), "analyze"]);
    assert!(out.status.success());
    let v = json(&dir.path().join("modules.json"));
    assert_eq!(v["seed"], 3);
    assert_eq!(v["config"]["workload"]["batch"], 8);

    let bad = dir.path().join("bad.toml");
    fs::write(&bad, "[workload]\nbatchsize = 8\n").unwrap();
    let out = fedspeech(dir.path(), &["--config", bad.to_str().unwrap(), "analyze"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("batchsize"));
}

#[test]
fn synth_then_plan_from_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let manifest = dir.path().join("corpus.tsv");
    let m = manifest.to_str().unwrap();
    let out = fedspeech(dir.path(), &["synth", "--utterances", "500", "--speakers", "40", "--output", m]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let out = fedspeech(dir.path(), &["fl-plan", "--clients", "4", "--rounds", "3", "--manifest", m]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let v = json(&dir.path().join("fl_plan.json"));
    assert_eq!(v["result"]["manifest_utterances"], 500);
}

#[test]
fn convert_common_voice_with_clip_durations() {
    let dir = tempfile::tempdir().unwrap();
    let validated = dir.path().join("validated.tsv");
    let clips = dir.path().join("clip_durations.tsv");
    let output = dir.path().join("manifest.tsv");
    fs::write(&validated, "client_id\tpath\tsentence\nabc\ta.mp3\thello\nxyz\tb.mp3\t\"quoted\n").unwrap();
    fs::write(&clips, "clip\tduration[ms]\na.mp3\t5500\nb.mp3\t3000\n").unwrap();
    let out = fedspeech(
        dir.path(),
        &[
            "convert-cv",
            "--validated",
            validated.to_str().unwrap(),
            "--clip-durations",
            clips.to_str().unwrap(),
            "--output",
            output.to_str().unwrap(),
        ],
    );
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = fs::read_to_string(&output).unwrap();
    assert!(text.contains("a.mp3\tabc\t5.500"), "{text}");
    assert!(text.contains("b.mp3\txyz\t3.000"), "{text}");
}
