use std::path::Path;
use std::process::{Command, Output};

use splatstream::metrics::psnr;
use splatstream::FrameBuffer;

fn splatstream(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_splatstream"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn ok(args: &[&str]) -> String {
    let out = splatstream(args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn synth(dir: &Path, extra: &[&str]) {
    let d = dir.to_str().unwrap();
    let mut args = vec!["synth", "--out", d];
    args.extend_from_slice(extra);
    ok(&args);
}

fn load(path: &Path) -> FrameBuffer {
    let img = image::open(path).unwrap().into_rgb8();
    FrameBuffer::from_rgb8(img.width() as usize, img.height() as usize, img.as_raw()).unwrap()
}

#[test]
fn run_writes_doubled_frames_and_report() {
    let tmp = tempfile::tempdir().unwrap();
    let data = tmp.path().join("fixture");
    let out = tmp.path().join("out");
    synth(&data, &["--frames", "5", "--gaussians", "64", "--no-gt"]);
    let target = data.join("target.pose");
    let stdout = ok(&[
        "run",
        "--input",
        data.to_str().unwrap(),
        "--views",
        "0,1",
        "--target",
        target.to_str().unwrap(),
        "--res",
        "512x384",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert!(stdout.contains("Stream delay") && stdout.contains("5 emitted"), "{stdout}");
    for t in 0..5 {
        let p = out.join(format!("view_0/frame_{t:06}.png"));
        assert_eq!(image::image_dimensions(&p).unwrap(), (1024, 768), "{}", p.display());
    }
    assert!(!out.join("view_0/frame_000005.png").exists());
    assert!(out.join("report.txt").is_file());
    let summary = std::fs::read_to_string(out.join("run.toml")).unwrap();
    assert!(summary.contains("emitted = 5") && summary.contains("spatial_passes = 3"), "{summary}");
}

#[test]
fn thirteen_view_dataset_with_two_selected() {
    let tmp = tempfile::tempdir().unwrap();
    let data = tmp.path().join("rig13");
    synth(&data, &["--views", "13", "--frames", "3", "--gaussians", "16", "--res", "32x24", "--no-gt"]);
    assert!(data.join("view_12/frame_000002.png").is_file());
    let out = tmp.path().join("out");
    let stdout = ok(&[
        "run",
        "-i",
        data.to_str().unwrap(),
        "--views",
        "3,11",
        "--res",
        "16x12",
        "-o",
        out.to_str().unwrap(),
    ]);
    assert!(stdout.contains("3 input frames"), "{stdout}");
    assert_eq!(image::image_dimensions(out.join("view_0/frame_000002.png")).unwrap(), (32, 24));
}

#[test]
fn dataset_errors_name_the_view() {
    let tmp = tempfile::tempdir().unwrap();
    let data = tmp.path().join("broken");
    synth(&data, &["--views", "3", "--frames", "3", "--gaussians", "8", "--res", "16x12", "--no-gt"]);
    std::fs::remove_file(data.join("view_2/frame_000002.png")).unwrap();
    let out = splatstream(&["run", "-i", data.to_str().unwrap(), "-o", tmp.path().join("o").to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("view_2 has 2 frames"), "{err}");

    let out = splatstream(&["run", "-i", data.to_str().unwrap(), "--views", "0,7"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("view_7 does not exist"));
}

#[test]
fn config_errors_exit_2_with_key_and_location() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tmp.path().join("run.toml");
    std::fs::write(&cfg, "[input]\nfps = 30\n\n[stages]\nsr = \"lanczos\"\n").unwrap();
    let out = splatstream(&["--config", cfg.to_str().unwrap(), "run"]);
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("`stages.sr`") && err.contains("run.toml:5:"), "{err}");

    let out = splatstream(&["run", "--set", "input.fps=-3", "--set", "synthetic.frames=3"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("`input.fps`"));

    let out = splatstream(&["run", "--set", "pipeline.trailing=sometimes"]);
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("`pipeline.trailing`") && err.contains("--set pipeline.trailing=sometimes"), "{err}");
}

#[test]
fn metrics_match_the_core_oracle() {
    let tmp = tempfile::tempdir().unwrap();
    let data = tmp.path().join("fx");
    let out = tmp.path().join("out");
    synth(&data, &["--frames", "6", "--gaussians", "48", "--res", "48x36", "--target-azimuth", "20"]);
    ok(&["run", "-i", data.to_str().unwrap(), "--res", "48x36", "-o", out.to_str().unwrap()]);

    let gt = data.join("gt");
    let stdout = ok(&[
        "metrics",
        "--pred",
        out.to_str().unwrap(),
        "--gt",
        gt.to_str().unwrap(),
        "--pred-poses",
        data.join("poses.toml").to_str().unwrap(),
        "--gt-poses",
        data.join("poses.toml").to_str().unwrap(),
    ]);

    // Drop trailing policy: 6 inputs give 5 outputs.
    let mut sum = 0.0;
    for t in 0..5 {
        let name = format!("view_0/frame_{t:06}.png");
        sum += psnr(&load(&out.join(&name)), &load(&gt.join(&name))).unwrap();
    }
    let expected = sum / 5.0;
    let line = stdout.lines().find(|l| l.starts_with("all")).expect("summary row");
    let cols: Vec<&str> = line.split_whitespace().collect();
    assert_eq!(cols[1], "5");
    assert_eq!(cols[2], format!("{expected:.2}"), "{stdout}");
    assert!(cols[3].parse::<f64>().unwrap() > 0.0, "runtime column: {stdout}");
    assert!(expected > 25.0, "{expected}");
    assert!(stdout.contains("RRA@5 100.0") && stdout.contains("RTA@5 100.0"), "{stdout}");

    // Same-directory comparison hits the cap.
    let same = ok(&["metrics", "--pred", gt.to_str().unwrap(), "--gt", gt.to_str().unwrap()]);
    assert!(same.contains("99.00"), "{same}");
}
