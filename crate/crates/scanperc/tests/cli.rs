use std::fs;
use std::path::Path;

use scanperc::cli::main_with_args;

fn run(args: &[&str]) -> (i32, String, String) {
    let mut out = Vec::new();
    let mut err = Vec::new();
    let argv = std::iter::once("scanperc").chain(args.iter().copied());
    let code = main_with_args(argv, &mut out, &mut err);
    (
        code,
        String::from_utf8(out).unwrap(),
        String::from_utf8(err).unwrap(),
    )
}

/// 96x96 CSV with background 0.2 and a bright 20x20 block at (40, 30).
fn write_block_csv(path: &Path) {
    let mut text = String::new();
    for r in 0..96 {
        let row: Vec<&str> = (0..96)
            .map(|c| {
                if (40..60).contains(&r) && (30..50).contains(&c) {
                    "0.8"
                } else {
                    "0.2"
                }
            })
            .collect();
        text.push_str(&row.join(","));
        text.push('\n');
    }
    fs::write(path, text).unwrap();
}

const SCENE: &str = r#"{
  "n": 96, "a": 0.3, "b": 0.7, "phi0": 24, "phi1": 8,
  "noise": {"kind": "uniform", "params": {"half_width": 0.1}},
  "noise_square": {"row": 0, "col": 0},
  "shapes": [
    {"kind": "square", "side": 16, "row": 50, "col": 50},
    {"kind": "l_shape", "arm": 24, "thickness": 10, "row": 40, "col": 8}
  ]
}"#;

#[test]
fn help_lists_the_defaults() {
    let (code, out, _) = run(&["detect", "--help"]);
    assert_eq!(code, 0);
    for needle in [
        "--phi0",
        "65",
        "--phi1",
        "9",
        "--min-cluster",
        "30",
        "--downsample",
        "2",
        "--normalize",
        "true",
    ] {
        assert!(out.contains(needle), "help is missing {needle}");
    }
    let (code, out, _) = run(&["--help"]);
    assert_eq!(code, 0);
    for sub in [
        "estimate",
        "detect",
        "synth",
        "mc-consistency",
        "mc-detection",
        "bound",
        "percolation-phase",
    ] {
        assert!(out.contains(sub), "help is missing {sub}");
    }
}

#[test]
fn bound_prints_reference_value() {
    let (code, out, err) = run(&[
        "bound",
        "--s1",
        "100",
        "--excess",
        "100",
        "--contrast",
        "1",
        "--sigma",
        "1",
        "--bound-m",
        "1",
    ]);
    assert_eq!(code, 0, "{err}");
    assert_eq!(out, "bound 7.19413e-9\nclipped 7.19413e-9\n");
}

#[test]
fn bound_rejects_negative_counts() {
    let (code, out, err) = run(&[
        "bound",
        "--s1",
        "-1",
        "--excess",
        "3",
        "--contrast",
        "1",
        "--sigma",
        "1",
        "--bound-m",
        "1",
    ]);
    assert_eq!(code, 1);
    assert!(out.is_empty());
    assert_eq!(err.lines().count(), 1);
}

#[test]
fn usage_errors_exit_one_with_one_line() {
    for args in [
        &["frobnicate"][..],
        &["detect"][..],
        &[
            "bound",
            "--s1",
            "1",
            "--excess",
            "1,2",
            "--contrast",
            "1",
            "--sigma",
            "1",
            "--bound-m",
            "1",
        ][..],
        &["estimate", "--in", "/nonexistent/image.csv"][..],
    ] {
        let (code, _, err) = run(args);
        assert_eq!(code, 1, "{args:?}");
        assert_eq!(err.trim_end().lines().count(), 1, "{args:?}: {err}");
    }
}

#[test]
fn malformed_inputs_exit_one() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.csv");
    fs::write(&bad, "0.1,0.2\n0.3\n").unwrap();
    let (code, _, err) = run(&["estimate", "--in", bad.to_str().unwrap()]);
    assert_eq!(code, 1);
    assert!(err.contains("line 2"), "{err}");

    let pgm = dir.path().join("short.pgm");
    fs::write(&pgm, b"P5\n4 4\n255\n\x00\x01").unwrap();
    let (code, _, err) = run(&["estimate", "--in", pgm.to_str().unwrap()]);
    assert_eq!(code, 1);
    assert!(err.contains("byte"), "{err}");
}

#[test]
fn degenerate_image_exits_two() {
    let dir = tempfile::tempdir().unwrap();
    let flat = dir.path().join("flat.csv");
    let row = vec!["0.25"; 40].join(",");
    fs::write(&flat, format!("{row}\n").repeat(40)).unwrap();
    let args = ["--phi0", "16", "--phi1", "4", "--downsample", "0"];
    let path = flat.to_str().unwrap();
    let (code, out, err) = run(&[&["detect", "--in", path][..], &args[..]].concat());
    assert_eq!(code, 2);
    assert!(out.is_empty());
    assert_eq!(err.lines().count(), 1);
    let (code, _, _) = run(&[&["estimate", "--in", path][..], &args[..]].concat());
    assert_eq!(code, 2);
}

#[test]
fn estimate_and_detect_on_a_block() {
    let dir = tempfile::tempdir().unwrap();
    let img = dir.path().join("block.csv");
    write_block_csv(&img);
    let path = img.to_str().unwrap();
    let raw = [
        "--phi0",
        "24",
        "--phi1",
        "8",
        "--downsample",
        "0",
        "--normalize",
        "false",
    ];

    let (code, out, err) = run(&[&["estimate", "--in", path][..], &raw[..]].concat());
    assert_eq!(code, 0, "{err}");
    assert_eq!(out, "a_hat 0.2\nb_hat 0.8\ntheta 0.5\n");

    let report = dir.path().join("report.json");
    let filtered = dir.path().join("kept.pgm");
    let (code, _, err) = run(&[
        &[
            "detect",
            "--in",
            path,
            "--out",
            report.to_str().unwrap(),
            "--filtered-out",
            filtered.to_str().unwrap(),
        ][..],
        &raw[..],
    ]
    .concat());
    assert_eq!(code, 0, "{err}");
    let json = fs::read_to_string(&report).unwrap();
    let v: serde_json::Value = serde_json::from_str(&json).unwrap();
    assert_eq!(v["decision"], "ParticlesFound");
    assert_eq!(v["clusters"][0]["pixel_count"], 400);
    assert_eq!(
        v["clusters"][0]["bbox"],
        serde_json::json!([40, 30, 59, 49])
    );
    assert_eq!(v["theta"], 0.5);
    let keys: Vec<&str> = v.as_object().unwrap().keys().map(String::as_str).collect();
    let a = json.find("\"a_hat\"").unwrap();
    let b = json.find("\"b_hat\"").unwrap();
    let t = json.find("\"theta\"").unwrap();
    let d = json.find("\"decision\"").unwrap();
    assert!(a < b && b < t && t < d, "key order in {keys:?}");
    let pgm = fs::read(&filtered).unwrap();
    assert!(pgm.starts_with(b"P5\n96 96\n1\n"));
    assert_eq!(
        pgm.iter().rev().take(96 * 96).filter(|&&x| x == 1).count(),
        400
    );

    // default pipeline with downsampling also finds the block
    let (code, out, err) = run(&["detect", "--in", path, "--phi0", "8", "--phi1", "3"]);
    assert_eq!(code, 0, "{err}");
    assert!(out.contains("\"ParticlesFound\""));
}

#[test]
fn reports_are_byte_identical_across_runs() {
    let dir = tempfile::tempdir().unwrap();
    let scene = dir.path().join("scene.json");
    fs::write(&scene, SCENE).unwrap();
    let img = dir.path().join("img.csv");
    let (code, _, err) = run(&[
        "synth",
        "--scene",
        scene.to_str().unwrap(),
        "--seed",
        "7",
        "--out",
        img.to_str().unwrap(),
    ]);
    assert_eq!(code, 0, "{err}");
    let args = [
        "detect",
        "--in",
        img.to_str().unwrap(),
        "--phi0",
        "24",
        "--phi1",
        "8",
        "--downsample",
        "0",
    ];
    let (c1, first, _) = run(&args);
    let (c2, second, _) = run(&args);
    assert_eq!((c1, c2), (0, 0));
    assert_eq!(first, second);
    let v: serde_json::Value = serde_json::from_str(&first).unwrap();
    assert_eq!(v["decision"], "ParticlesFound");
    assert!(v["clusters"].as_array().unwrap().len() >= 2);
}

#[test]
fn synth_writes_pgm_and_truth() {
    let dir = tempfile::tempdir().unwrap();
    let scene = dir.path().join("scene.json");
    fs::write(&scene, SCENE).unwrap();
    let img = dir.path().join("img.pgm");
    let truth = dir.path().join("truth.pgm");
    let (code, _, err) = run(&[
        "synth",
        "--scene",
        scene.to_str().unwrap(),
        "--out",
        img.to_str().unwrap(),
        "--truth-out",
        truth.to_str().unwrap(),
    ]);
    assert_eq!(code, 0, "{err}");
    assert!(fs::read(&img).unwrap().starts_with(b"P5\n96 96\n65535\n"));
    let t = fs::read(&truth).unwrap();
    let ones = t.iter().rev().take(96 * 96).filter(|&&x| x == 1).count();
    // 16x16 square plus an L of arm 24 and thickness 10
    assert_eq!(ones, 256 + 24 * 10 + 14 * 10);

    let bad = dir.path().join("bad.json");
    fs::write(&bad, SCENE.replace("\"row\": 50", "\"row\": 90")).unwrap();
    let (code, _, err) = run(&[
        "synth",
        "--scene",
        bad.to_str().unwrap(),
        "--out",
        img.to_str().unwrap(),
    ]);
    assert_eq!(code, 1);
    assert_eq!(err.lines().count(), 1);
}

#[test]
fn monte_carlo_commands_write_csv() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("phase.csv");
    let (code, _, err) = run(&[
        "percolation-phase",
        "--size",
        "64",
        "--p",
        "0.3,0.7",
        "--trials",
        "10",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(code, 0, "{err}");
    let text = fs::read_to_string(&out).unwrap();
    assert_eq!(text.lines().count(), 3);

    let (code, text, err) = run(&[
        "mc-consistency",
        "--n",
        "128",
        "--phi0-grid",
        "16,32",
        "--phi1",
        "6",
        "--trials",
        "5",
    ]);
    assert_eq!(code, 0, "{err}");
    assert!(text.starts_with("estimator,window,trials,median_abs_err"));
    assert_eq!(text.lines().count(), 5);

    let (code, text, err) = run(&[
        "mc-detection",
        "--trials",
        "5",
        "--n",
        "128",
        "--phi0",
        "16",
        "--phi1",
        "4",
    ]);
    assert_eq!(code, 0, "{err}");
    assert!(text.starts_with("trials,all_detected_rate,exact_rate"));

    let (code, _, _) = run(&["mc-consistency", "--phi0-grid", "", "--trials", "2"]);
    assert_eq!(code, 1);
}
