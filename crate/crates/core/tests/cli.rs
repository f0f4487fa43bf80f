use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use templeak::design::LabeledDataset;
use templeak::experiments::report::Grid;
use templeak::lrtc::read_matrix;

fn templeak(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_templeak"))
        .args(args)
        .env("RUST_LOG", "error")
        .output()
        .expect("spawn templeak")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exit code")
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn write_config(dir: &Path, name: &str, json: &str) -> PathBuf {
    let p = dir.join(name);
    fs::write(&p, json).unwrap();
    p
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

const TINY_AUDIT: &str = r#"{
    "templates": ["kul_like"],
    "tasks": ["dlc", "tlc_df", "tlc_eeg", "tlc_eeg_wodo"],
    "subjects": 1,
    "seeds": [0],
    "source": {"type": "surrogate", "kind": {"type": "white"}, "channels": 2},
    "train": {"max_epochs": 1},
    "cnn": {"conv_filters": 4, "hidden_units": 4},
    "jobs": 1
}"#;

#[test]
fn synth_writes_header_plus_f32_payload_and_seeds_differ() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "c.json",
        r#"{"templates": ["kul_like"], "subjects": 1,
            "source": {"type": "surrogate", "kind": {"type": "white"}, "channels": 3}, "signature_strength": 0.0}"#,
    );
    let out = dir.path().join("out");
    let o = templeak(&["synth", "--config", s(&cfg), "--out", s(&out), "--seed", "1", "--seed", "2"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));

    let mut payloads = Vec::new();
    for seed in [1, 2] {
        let path = out.join(format!("kul_like_sub00_seed{seed}.raw"));
        let bytes = fs::read(&path).unwrap();
        let rec = templeak::signal::load_recording(&path).unwrap();
        assert_eq!(rec.channels(), 3);
        let payload = 4 * rec.channels() * rec.timepoints();
        let header_len = bytes.windows(4).position(|w| w == b"---\n").unwrap() + 4;
        assert_eq!(bytes.len(), header_len + payload);
        payloads.push(bytes[header_len..].to_vec());
    }
    assert_ne!(payloads[0], payloads[1]);
}

#[test]
fn synth_rejects_too_short_layout() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "c.json",
        r#"{"source": {"type": "surrogate", "kind": {"type": "white"}, "channels": 2, "duration_s": 4.0}}"#,
    );
    let o = templeak(&["synth", "--config", s(&cfg), "--out", s(&dir.path().join("o"))]);
    assert_eq!(code(&o), 2, "{}", stderr(&o));
    assert!(stderr(&o).contains("shorter"), "{}", stderr(&o));
}

#[test]
fn synth_rejects_zero_duration() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "c.json",
        r#"{"source": {"type": "surrogate", "kind": {"type": "white"}, "channels": 2, "duration_s": 0.0}}"#,
    );
    let o = templeak(&["synth", "--config", s(&cfg), "--out", s(&dir.path().join("o"))]);
    assert_eq!(code(&o), 2, "{}", stderr(&o));
}

#[test]
fn audit_writes_report_and_first_table() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "c.json", TINY_AUDIT);
    let out = dir.path().join("out");
    let o = templeak(&["audit", "--config", s(&cfg), "--out", s(&out)]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    assert!(out.join("report.json").is_file());
    let g = Grid::read(&out.join("table1.csv")).unwrap();
    let labels: Vec<&str> = g.rows.iter().map(|(l, _)| l.as_str()).collect();
    assert_eq!(
        labels,
        ["DLC", "DLC (chance level)", "TLC-DF", "TLC-EEG", "TLC-EEG-woDO", "TCL (chance level)"]
    );
    assert_eq!(g.columns, ["kul_like"]);

    // Merging a report with itself doubles the units.
    let merged = dir.path().join("merged");
    let o = templeak(&["report", s(&out), s(&out.join("report.json")), "--out", s(&merged)]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let one = templeak::experiments::AuditReport::load(&out.join("report.json")).unwrap();
    let two = templeak::experiments::AuditReport::load(&merged.join("report.json")).unwrap();
    assert_eq!(two.units().count(), 2 * one.units().count());
}

#[test]
fn audit_with_no_tasks_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "c.json", r#"{"tasks": []}"#);
    let o = templeak(&["audit", "--config", s(&cfg), "--out", s(&dir.path().join("o"))]);
    assert_eq!(code(&o), 2, "{}", stderr(&o));
}

#[test]
fn malformed_report_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let bad = write_config(dir.path(), "report.json", "{not json");
    let o = templeak(&["report", s(&bad)]);
    assert_eq!(code(&o), 2, "{}", stderr(&o));
}

#[test]
fn lrtc_writes_requested_grid() {
    let dir = tempfile::tempdir().unwrap();
    let freqs: Vec<String> = (0..10).map(|i| format!("{}", 2.0 + 3.0 * i as f64)).collect();
    let lags: Vec<String> = (1..=20).map(|i| format!("{}", 0.25 * i as f64)).collect();
    let cfg = write_config(
        dir.path(),
        "c.json",
        &format!(
            r#"{{"subjects": 2, "seeds": [0],
                "lrtc": {{"wavelet": {{"freqs": [{}], "n_cycles": 7.0, "lags_s": [{}], "analysis_fs": 100.0}},
                          "n_segments": 2}}}}"#,
            freqs.join(", "),
            lags.join(", ")
        ),
    );
    let out = dir.path().join("out");
    let o = templeak(&["lrtc", "--preset", "lrtc", "--config", s(&cfg), "--out", s(&out)]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let (f, l, m) = read_matrix(&out.join("acf_values.csv")).unwrap();
    assert_eq!((f.len(), l.len()), (10, 20));
    assert_eq!(m.dim(), (10, 20));
    assert!(out.join("acf_pvalues.csv").is_file() && out.join("acf.json").is_file());
}

#[test]
fn missing_input_names_the_path() {
    let dir = tempfile::tempdir().unwrap();
    let missing = dir.path().join("nowhere.raw");
    let o = templeak(&["lrtc", "--preset", "lrtc", "--out", s(&dir.path().join("o")), s(&missing)]);
    assert_eq!(code(&o), 2, "{}", stderr(&o));
    assert!(stderr(&o).contains("nowhere.raw"), "{}", stderr(&o));
}

#[test]
fn reorganized_datasets_load_back() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "c.json",
        r#"{"templates": ["kul_like"], "subjects": 1, "seeds": [3], "bands": ["full", "alpha"],
            "source": {"type": "surrogate", "kind": {"type": "white"}, "channels": 2}}"#,
    );
    let out = dir.path().join("out");
    let o = templeak(&["reorganize", "--config", s(&cfg), "--out", s(&out)]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    for band in ["full", "alpha"] {
        let ds = LabeledDataset::load(out.join(format!("kul_like/seed3/sub00/{band}"))).unwrap();
        assert!(ds.len() > 0);
    }
}
