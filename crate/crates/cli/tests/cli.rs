use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_gazepower"));
    c.env("RUST_LOG", "error");
    c
}

fn bundled(rel: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../bundled").join(rel)
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn ok(args: &[&str]) -> String {
    let o = run(args);
    assert_eq!(o.status.code(), Some(0), "{args:?}: {}", String::from_utf8_lossy(&o.stderr));
    stdout(&o)
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn exit_codes() {
    assert_eq!(run(&["--help"]).status.code(), Some(0));
    assert_eq!(run(&["frobnicate"]).status.code(), Some(1));
    assert_eq!(run(&["colors", "--from", "srgb8", "--to", "idkl", "1,2"]).status.code(), Some(1));
    assert_eq!(run(&["--gaze", "1,2", "--gaze-seed", "3", "colors", "--from", "linear", "--to", "lms", "0,0,0"]).status.code(), Some(1));
    assert_eq!(run(&["predict-power", "/definitely/not/here.png"]).status.code(), Some(2));
    // Representable in i-DKL but outside the sRGB cube.
    assert_eq!(run(&["colors", "--from", "idkl", "--to", "srgb8", "0,0,2"]).status.code(), Some(2));
}

#[test]
fn colors_round_trip() {
    let idkl = ok(&["colors", "--from", "srgb8", "--to", "idkl", "12,200,77"]);
    let back = ok(&["colors", "--from", "idkl", "--to", "srgb8", idkl.trim()]);
    assert_eq!(back.trim(), "12,200,77");
    let lum: f64 = idkl.trim().split(',').nth(2).unwrap().parse().unwrap();
    let white = ok(&["colors", "--from", "srgb", "--to", "idkl", "1,1,1"]);
    assert!((white.trim().split(',').nth(2).unwrap().parse::<f64>().unwrap() - 1.0).abs() < 1e-12);
    assert!(lum > 0.0 && lum < 1.0);
    let gray = ok(&["colors", "--from", "linear", "--to", "contrast", "0.3,0.3,0.3"]);
    for v in gray.trim().split(',') {
        assert!(v.parse::<f64>().unwrap().abs() < 1e-12, "{gray}");
    }
}

#[test]
fn study_to_model_to_query() {
    let dir = tempfile::tempdir().unwrap();
    let raw = dir.path().join("raw.csv");
    let model = dir.path().join("m.json");
    ok(&["--seed", "5", "simulate-study", "-o", s(&raw), "--observers", "3"]);
    let text = std::fs::read_to_string(&raw).unwrap();
    assert!(text.starts_with("participant,direction,ecc_deg,k_lm,k_s,threshold\n"));
    assert_eq!(text.lines().count(), 1 + 3 * 5 * 3 * 4);
    let report = ok(&["--seed", "1", "fit-thresholds", "--raw", s(&raw), "-o", s(&model), "--restarts", "4"]);
    assert!(report.contains("\"r2\""));
    let out = ok(&["eval-threshold", "--k-lm", "0", "--k-s", "0", "--ecc", "25", "--threshold-model", s(&model)]);
    let vals: Vec<f64> = out.lines().nth(1).unwrap().split(',').map(|v| v.parse().unwrap()).collect();
    assert!(vals.iter().all(|v| *v > 0.0));
}

#[test]
fn fit_power_from_trace_and_samples_agree() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (dir.path().join("a.json"), dir.path().join("b.json"));
    ok(&[
        "fit-power",
        "--trace",
        s(&bundled("power_trace.csv")),
        "--segments",
        s(&bundled("power_segments.csv")),
        "-o",
        s(&a),
    ]);
    ok(&["fit-power", "--samples", s(&bundled("power_samples.csv")), "-o", s(&b)]);
    let read = |p: &Path| -> serde_json::Value { serde_json::from_str(&std::fs::read_to_string(p).unwrap()).unwrap() };
    let (ma, mb) = (read(&a), read(&b));
    assert_eq!(ma["format"], "power-model-v1");
    for k in 0..3 {
        let (x, y) = (ma["p_srgb"][k].as_f64().unwrap(), mb["p_srgb"][k].as_f64().unwrap());
        assert!((x - y).abs() < 1e-9);
    }
}

#[test]
fn optimize_is_deterministic_and_foveal_identity() {
    let dir = tempfile::tempdir().unwrap();
    let input = bundled("images/test/skin.png");
    let (o1, o2, fov) = (dir.path().join("1.png"), dir.path().join("2.png"), dir.path().join("f.png"));
    let r1 = ok(&["--gaze-seed", "4", "optimize", s(&input), "-o", s(&o1)]);
    let r2 = ok(&["--threads", "1", "--gaze-seed", "4", "optimize", s(&input), "-o", s(&o2)]);
    assert_eq!(r1, r2);
    assert_eq!(std::fs::read(&o1).unwrap(), std::fs::read(&o2).unwrap());
    assert!(r1.starts_with("file,gaze_x,gaze_y,p_orig_w,p_mod_w,savings,pct_modulated,pct_clamped\nskin.png,"));

    ok(&["--fov-deg", "5", "optimize", s(&input), "-o", s(&fov)]);
    assert_eq!(pixels(&input), pixels(&fov));
}

fn pixels(p: &Path) -> Vec<u8> {
    image::open(p).unwrap().to_rgb8().into_raw()
}

#[test]
fn lum_baseline_modes() {
    let dir = tempfile::tempdir().unwrap();
    let input = bundled("images/test/foliage.png");
    let out = dir.path().join("l.png");
    let same = ok(&["lum-baseline", s(&input), "-o", s(&out), "--scale", "1"]);
    let row: Vec<f64> = same.lines().nth(1).unwrap().split(',').map(|v| v.parse().unwrap()).collect();
    assert_eq!(row[1], row[2]);
    let matched = ok(&["lum-baseline", s(&input), "-o", s(&out), "--match-optimized"]);
    let row: Vec<f64> = matched.lines().nth(1).unwrap().split(',').map(|v| v.parse().unwrap()).collect();
    assert!(row[0] > 0.0 && row[0] < 1.0 && row[2] < row[1]);
    assert_eq!(run(&["lum-baseline", s(&input), "-o", s(&out), "--scale", "1.5"]).status.code(), Some(2));
    assert_eq!(run(&["lum-baseline", s(&input), "-o", s(&out)]).status.code(), Some(1));
    assert_eq!(run(&["lum-baseline", s(&input), "-o", s(&out), "--target-watts", "0.01"]).status.code(), Some(2));
}

#[test]
fn batch_report_is_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (dir.path().join("a.csv"), dir.path().join("b.csv"));
    let images = bundled("images/blue_bright");
    let summary = ok(&["--seed", "9", "batch", s(&images), "--report", s(&a)]);
    ok(&["--seed", "9", "--threads", "1", "batch", s(&images), "--report", s(&b)]);
    assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
    assert!(summary.starts_with("images: 6"));
    let text = std::fs::read_to_string(&a).unwrap();
    assert_eq!(text.lines().count(), 7);

    let empty = tempfile::tempdir().unwrap();
    assert_eq!(run(&["batch", s(empty.path())]).status.code(), Some(2));
}
