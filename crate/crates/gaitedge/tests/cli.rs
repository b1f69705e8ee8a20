//! Exit-code contracts and end-to-end behaviors of the binary.

use std::path::Path;
use std::process::{Command, Output};

use gaitedge::datagen::{generate_domain, DomainSpec, NoiseSpec, ViewSpec};

fn bin() -> &'static str {
    env!("CARGO_BIN_EXE_gaitedge")
}

fn run(args: &[&str]) -> Output {
    Command::new(bin()).args(args).output().unwrap()
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("no exit code")
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

fn stdout(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

/// Two subjects, two conditions, two views on a target-sized canvas.
fn tiny_domain(root: &Path, subjects: usize, frames: usize) {
    let spec = DomainSpec {
        name: "tiny".into(),
        seed: 77,
        subjects,
        conditions: vec!["NM#01".into(), "NM#02".into()],
        views: vec![
            ViewSpec {
                label: "000".into(),
                x_scale: 1.0,
                shear: 0.0,
            },
            ViewSpec {
                label: "030".into(),
                x_scale: 1.04,
                shear: 0.08,
            },
        ],
        canvas_height: 64,
        canvas_width: 44,
        body_scale: [0.70, 0.80],
        frames_per_sequence: Some(frames),
        noise: NoiseSpec::default(),
    };
    generate_domain(&spec, root).unwrap();
}

fn eval_config(dir: &Path, domain: &Path) -> std::path::PathBuf {
    let path = dir.join("pipeline.toml");
    std::fs::write(
        &path,
        format!(
            "[data]\ndomain_a = {:?}\n\n[protocol]\ngallery = [\"NM#01\"]\n\n[[protocol.probes]]\nname = \"NM\"\nconditions = [\"NM#02\"]\n",
            domain
        ),
    )
    .unwrap();
    path
}

#[test]
fn gen_reports_totals_and_snapshots_the_resolved_spec() {
    let dir = tempfile::tempdir().unwrap();
    let spec_path = dir.path().join("spec.json");
    std::fs::write(
        &spec_path,
        r#"{
            "name": "demo", "seed": 7, "subjects": 2,
            "conditions": ["NM#01"],
            "views": [{ "label": "000" }],
            "frames_per_sequence": 4
        }"#,
    )
    .unwrap();
    let data = dir.path().join("data");
    let out = run(&[
        "gen",
        "--spec",
        spec_path.to_str().unwrap(),
        "--out",
        data.to_str().unwrap(),
        "--seed",
        "99",
    ]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    assert_eq!(
        stdout(&out),
        format!("generated 2 sequences / 8 frames under {}\n", data.display())
    );
    let snapshot: DomainSpec = serde_json::from_str(
        &std::fs::read_to_string(data.join("domain.json")).unwrap(),
    )
    .unwrap();
    assert_eq!(snapshot.seed, 99, "--seed must override the spec");
    assert_eq!(snapshot.subjects, 2);
    assert!(data.join("s001").join("NM#01").join("000").join("frame_0003.pgm").exists());
}

#[test]
fn gen_with_a_missing_spec_is_a_usage_error_naming_the_path() {
    let out = run(&["gen", "--spec", "/nonexistent/spec.json", "--out", "/tmp/ignored"]);
    assert_eq!(code(&out), 2);
    assert!(stderr(&out).contains("/nonexistent/spec.json"), "{}", stderr(&out));
}

#[test]
fn gen_with_malformed_json_is_a_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let spec = dir.path().join("spec.json");
    std::fs::write(&spec, "{ not json").unwrap();
    let out = run(&["gen", "--spec", spec.to_str().unwrap(), "--out", "/tmp/ignored"]);
    assert_eq!(code(&out), 2);
    assert!(stderr(&out).contains("bad spec"), "{}", stderr(&out));
}

#[test]
fn preprocess_rejects_an_even_element_before_writing_anything() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("data");
    tiny_domain(&data, 1, 4);
    let out_dir = dir.path().join("pre");
    let out = run(&[
        "preprocess",
        "--in",
        data.to_str().unwrap(),
        "--out",
        out_dir.to_str().unwrap(),
        "--se-size",
        "4",
    ]);
    assert_eq!(code(&out), 2);
    assert!(!out_dir.exists(), "usage error must not leave output behind");
}

#[test]
fn preprocess_on_a_missing_dataset_is_a_runtime_error() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(&[
        "preprocess",
        "--in",
        dir.path().join("nothing").to_str().unwrap(),
        "--out",
        dir.path().join("pre").to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 1);
}

#[test]
fn preprocess_refuses_se_size_combined_with_sweep() {
    let out = run(&[
        "preprocess", "--in", "x", "--out", "y", "--se-size", "3", "--sweep", "3,5",
    ]);
    assert_eq!(code(&out), 2);
}

#[test]
fn preprocess_sweep_writes_one_subtree_per_size_with_growing_edges() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("data");
    tiny_domain(&data, 1, 6);
    let pre = dir.path().join("pre");
    let out = run(&[
        "preprocess",
        "--in",
        data.to_str().unwrap(),
        "--out",
        pre.to_str().unwrap(),
        "--sweep",
        "3,5,7,9",
    ]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    for size in [3, 5, 7, 9] {
        let sample = pre
            .join(format!("se-{size}"))
            .join("s001")
            .join("NM#01")
            .join("000")
            .join("frame_0000_edge.pgm");
        assert!(sample.exists(), "missing {}", sample.display());
    }
    let summary: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(pre.join("summary.json")).unwrap()).unwrap();
    let edges: Vec<u64> = summary["edge_pixels"]
        .as_array()
        .unwrap()
        .iter()
        .map(|v| v.as_u64().unwrap())
        .collect();
    assert_eq!(edges.len(), 4);
    assert!(
        edges.windows(2).all(|w| w[0] <= w[1]),
        "edge totals not monotone: {edges:?}"
    );
}

#[test]
fn preprocess_output_can_sit_alongside_the_input_frames() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("data");
    tiny_domain(&data, 1, 4);
    let out = run(&[
        "preprocess",
        "--in",
        data.to_str().unwrap(),
        "--out",
        data.to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    // The scanner still sees only the original frames.
    let again = run(&[
        "preprocess",
        "--in",
        data.to_str().unwrap(),
        "--out",
        dir.path().join("pre").to_str().unwrap(),
    ]);
    assert_eq!(code(&again), 0);
    let a: serde_json::Value = serde_json::from_str(&stdout(&out)).unwrap();
    let b: serde_json::Value = serde_json::from_str(&stdout(&again)).unwrap();
    assert_eq!(a["frames"], b["frames"]);
}

#[test]
fn eval_with_a_missing_config_is_a_usage_error() {
    let out = run(&["eval", "--config", "/nonexistent/p.toml", "--out", "/tmp/ignored"]);
    assert_eq!(code(&out), 2);
}

#[test]
fn eval_without_domain_a_is_a_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("p.toml");
    std::fs::write(&config, "").unwrap();
    let out = run(&[
        "eval",
        "--config",
        config.to_str().unwrap(),
        "--out",
        dir.path().join("r").to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 2);
    assert!(stderr(&out).contains("domain_a"), "{}", stderr(&out));
}

#[test]
fn eval_on_a_missing_dataset_is_a_runtime_error() {
    let dir = tempfile::tempdir().unwrap();
    let config = eval_config(dir.path(), &dir.path().join("no-data"));
    let out = run(&[
        "eval",
        "--config",
        config.to_str().unwrap(),
        "--out",
        dir.path().join("r").to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 1);
}

#[test]
fn eval_rejects_contradictory_alignment_flags() {
    let out = run(&["eval", "--config", "x", "--out", "y", "--align", "--no-align"]);
    assert_eq!(code(&out), 2);
}

#[test]
fn eval_rejects_a_bad_target_size_string() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("data");
    tiny_domain(&data, 2, 4);
    let config = eval_config(dir.path(), &data);
    for bad in ["64", "64x", "x44", "64x44x2", "ax b"] {
        let out = run(&[
            "eval",
            "--config",
            config.to_str().unwrap(),
            "--out",
            dir.path().join("r").to_str().unwrap(),
            "--target-size",
            bad,
        ]);
        assert_eq!(code(&out), 2, "accepted {bad:?}");
    }
}

#[test]
fn eval_writes_reports_and_echoes_the_csv() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("data");
    tiny_domain(&data, 2, 8);
    let config = eval_config(dir.path(), &data);
    let out_dir = dir.path().join("r");
    let out = run(&[
        "eval",
        "--config",
        config.to_str().unwrap(),
        "--out",
        out_dir.to_str().unwrap(),
        "--disturb",
        "--max-offset",
        "6",
        "--seed",
        "1",
    ]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out_dir.join("report.json")).unwrap())
            .unwrap();
    let overall = report["overall"].as_f64().unwrap();
    assert!((0.0..=100.0).contains(&overall), "overall {overall}");
    let csv = std::fs::read_to_string(out_dir.join("report.csv")).unwrap();
    assert_eq!(stdout(&out), csv);
}

#[test]
fn alignment_flags_reach_the_pipeline() {
    // Frames on the wide generator canvas only fit the embedding after
    // alignment, so the flag pair has observably different outcomes.
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("data");
    let mut spec = DomainSpec::clean("wide", 13, 2);
    spec.conditions = vec!["NM#01".into(), "NM#02".into()];
    spec.frames_per_sequence = Some(8);
    generate_domain(&spec, &data).unwrap();
    let config = eval_config(dir.path(), &data);

    let aligned = run(&[
        "eval",
        "--config",
        config.to_str().unwrap(),
        "--out",
        dir.path().join("r-align").to_str().unwrap(),
        "--align",
    ]);
    assert_eq!(code(&aligned), 0, "{}", stderr(&aligned));

    let plain = run(&[
        "eval",
        "--config",
        config.to_str().unwrap(),
        "--out",
        dir.path().join("r-plain").to_str().unwrap(),
        "--no-align",
    ]);
    assert_eq!(code(&plain), 1, "raw 80x60 frames cannot embed unaligned");
}

#[test]
fn eval_cross_needs_domain_b_and_degenerates_cleanly() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("data");
    tiny_domain(&data, 2, 6);
    let config = eval_config(dir.path(), &data);
    let out = run(&[
        "eval",
        "--config",
        config.to_str().unwrap(),
        "--out",
        dir.path().join("r").to_str().unwrap(),
        "--cross",
    ]);
    assert_eq!(code(&out), 2, "--cross without domain_b must be a usage error");

    let config2 = dir.path().join("cross.toml");
    std::fs::write(
        &config2,
        format!(
            "[data]\ndomain_a = {data:?}\ndomain_b = {data:?}\n\n[protocol]\ngallery = [\"NM#01\"]\n\n[[protocol.probes]]\nname = \"NM\"\nconditions = [\"NM#02\"]\n",
        ),
    )
    .unwrap();
    let out_dir = dir.path().join("cross");
    let out = run(&[
        "eval",
        "--config",
        config2.to_str().unwrap(),
        "--out",
        out_dir.to_str().unwrap(),
        "--cross",
    ]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let csv = std::fs::read_to_string(out_dir.join("cross_report.csv")).unwrap();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines.len(), 3, "{csv}");
    // Same root on both sides: the two data rows agree except the train name.
    let tail = |l: &str| l.split_once(',').unwrap().1.to_string();
    assert_eq!(tail(lines[1]), tail(lines[2]));
    assert!(out_dir.join("cross_report.json").exists());
}

#[test]
fn gradcheck_passes_for_every_target_and_rejects_unknown_ones() {
    for target in ["synthesize", "bce", "align"] {
        let out = run(&["gradcheck", target, "--seed", "5"]);
        assert_eq!(code(&out), 0, "{target}: {}", stderr(&out));
        let report: serde_json::Value = serde_json::from_str(&stdout(&out)).unwrap();
        assert_eq!(report["target"], target);
        assert_eq!(report["pass"], true);
        assert!(report["report"]["n_checked"].as_u64().unwrap() > 0);
    }
    let out = run(&["gradcheck", "bogus"]);
    assert_eq!(code(&out), 2);
}

#[test]
fn selftest_passes_and_says_so() {
    let out = run(&["selftest"]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let text = stdout(&out);
    assert!(text.contains("selftest passed"), "{text}");
}
