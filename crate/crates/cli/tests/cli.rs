//! End-to-end tests of the `semlink` binary: subcommand behavior, output
//! files, determinism, and the exit-code contract (0 ok, 1 runtime, 2 usage).

use semlink_core::embedding_source::{save_embeddings, stub_vectors};
use semlink_core::ppm;
use std::path::Path;
use std::process::{Command, Output};

fn semlink(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_semlink"))
        .args(args)
        .current_dir(dir)
        .env_remove("SEMLINK_SEED")
        .output()
        .expect("binary runs")
}

fn write_emb_fixture(dir: &Path) -> String {
    let path = dir.join("fixtures.semb");
    save_embeddings(&path, &stub_vectors(2, 11)).unwrap();
    path.to_str().unwrap().to_string()
}

fn write_frame(dir: &Path, name: &str, w: u32, h: u32) -> String {
    let mut pixels = Vec::with_capacity(w as usize * h as usize * 3);
    for y in 0..h {
        for x in 0..w {
            pixels.push((x % 256) as u8);
            pixels.push((y % 256) as u8);
            pixels.push(((x * y) % 256) as u8);
        }
    }
    let path = dir.join(name);
    ppm::write_ppm(&path, w, h, &pixels).unwrap();
    path.to_str().unwrap().to_string()
}

#[test]
fn sweep_emits_the_full_grid_and_is_rerun_identical() {
    let dir = tempfile::tempdir().unwrap();
    let emb = write_emb_fixture(dir.path());
    let args = [
        "sweep", "--scheme", "quant8", "--mod", "bpsk", "--snr", "0:22:1", "--trials", "5",
        "--seed", "7", "--emb", &emb, "-o", "out.csv",
    ];
    let first = semlink(&args, dir.path());
    assert!(first.status.success(), "{}", String::from_utf8_lossy(&first.stderr));

    let csv = std::fs::read(dir.path().join("out.csv")).unwrap();
    let text = String::from_utf8(csv.clone()).unwrap();
    let mut lines = text.lines();
    assert_eq!(
        lines.next().unwrap(),
        "scheme,modulation,n_q,snr_db,trials,mean_mse,std_mse,mean_ber,elapsed_seconds"
    );
    assert_eq!(lines.count(), 23);

    assert!(dir.path().join("out.json").is_file());
    let sidecar: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("out.config.json")).unwrap())
            .unwrap();
    assert_eq!(sidecar["master_seed"], 7);
    assert!(sidecar["gray_map"]["i"]["00"].is_number());

    let second = semlink(&args, dir.path());
    assert!(second.status.success());
    let csv_again = std::fs::read(dir.path().join("out.csv")).unwrap();
    assert_eq!(csv, csv_again, "rerun must be byte-identical");
}

#[test]
fn sweep_accepts_text_embeddings() {
    let dir = tempfile::tempdir().unwrap();
    // Two vectors separated by a blank line, one value per line.
    std::fs::write(
        dir.path().join("emb.txt"),
        "1.0\n0.5\n-0.25\n\n0.75\n-1.0\n0.0\n",
    )
    .unwrap();
    let out = semlink(
        &[
            "sweep", "--scheme", "quant16", "--mod", "qam16", "--snr", "10", "--trials", "3",
            "--emb", "emb.txt", "-o", "text.csv",
        ],
        dir.path(),
    );
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = std::fs::read_to_string(dir.path().join("text.csv")).unwrap();
    assert_eq!(text.lines().count(), 2);
    assert!(text.lines().nth(1).unwrap().starts_with("quantized,qam16,16,10,3,"));
}

#[test]
fn sweep_missing_embeddings_file_is_a_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let out = semlink(
        &["sweep", "--emb", "nope.semb", "-o", "out.csv"],
        dir.path(),
    );
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("not found"));
}

#[test]
fn sweep_requires_a_source() {
    let dir = tempfile::tempdir().unwrap();
    let out = semlink(&["sweep", "-o", "out.csv"], dir.path());
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn sweep_reads_the_seed_from_the_environment() {
    let dir = tempfile::tempdir().unwrap();
    let emb = write_emb_fixture(dir.path());
    let out = Command::new(env!("CARGO_BIN_EXE_semlink"))
        .args([
            "sweep", "--scheme", "quant8", "--mod", "bpsk", "--snr", "3", "--trials", "2",
            "--emb", &emb, "-o", "seeded.csv",
        ])
        .current_dir(dir.path())
        .env("SEMLINK_SEED", "12345")
        .output()
        .unwrap();
    assert!(out.status.success());
    let sidecar: serde_json::Value = serde_json::from_str(
        &std::fs::read_to_string(dir.path().join("seeded.config.json")).unwrap(),
    )
    .unwrap();
    assert_eq!(sidecar["master_seed"], 12345);
}

#[test]
fn crop_writes_adjusted_regions() {
    let dir = tempfile::tempdir().unwrap();
    let frame = write_frame(dir.path(), "frame.ppm", 2048, 2048);
    let out = semlink(
        &[
            "crop", "--frame", &frame, "--box", "1000,1000,1100,1100", "--scale", "2.0",
            "--out-dir", "crops",
        ],
        dir.path(),
    );
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(stdout.contains("(950,950)-(1150,1150)"), "stdout: {stdout}");

    let crop = ppm::read_ppm(&dir.path().join("crops/frame_0.ppm")).unwrap();
    assert_eq!(crop.dims().width, 224);
    assert_eq!(crop.dims().height, 224);

    // Scale defaults to 2.5: side 250 centered on (1050, 1050).
    let default_scale = semlink(
        &["crop", "--frame", &frame, "--box", "1000,1000,1100,1100"],
        dir.path(),
    );
    assert!(default_scale.status.success());
    let stdout = String::from_utf8_lossy(&default_scale.stdout);
    assert!(stdout.contains("(925,925)-(1175,1175)"), "stdout: {stdout}");
}

#[test]
fn crop_rejects_oversized_boxes() {
    let dir = tempfile::tempdir().unwrap();
    let frame = write_frame(dir.path(), "small.ppm", 128, 128);
    let out = semlink(
        &["crop", "--frame", &frame, "--box", "0,0,100,100", "--scale", "2.0"],
        dir.path(),
    );
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("box too large"));
}

#[test]
fn report_matches_the_memory_and_latency_models() {
    let dir = tempfile::tempdir().unwrap();
    let out = semlink(&["report", "--vehicles", "1"], dir.path());
    assert!(out.status.success());
    let json: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    let savings = json["memory"]["savings_embedding_pct"].as_f64().unwrap();
    assert!((savings - 99.976).abs() < 1e-3);
    assert!((json["latency"]["total_seconds"].as_f64().unwrap() - 0.183).abs() < 1e-12);

    let zero = semlink(&["report", "--vehicles", "0"], dir.path());
    let json: serde_json::Value = serde_json::from_slice(&zero.stdout).unwrap();
    assert_eq!(json["memory"]["savings_cropped_pct"].as_f64().unwrap(), 100.0);
    assert_eq!(json["latency"]["total_seconds"].as_f64().unwrap(), 0.0);

    let five = semlink(&["report", "--vehicles", "5"], dir.path());
    let json: serde_json::Value = serde_json::from_slice(&five.stdout).unwrap();
    let cropped = json["memory"]["savings_cropped_pct"].as_f64().unwrap();
    assert!((cropped - 94.0).abs() < 0.1);
}

#[test]
fn pipeline_reports_per_vehicle_fidelity() {
    let dir = tempfile::tempdir().unwrap();
    write_frame(dir.path(), "frame0.ppm", 512, 512);
    let detections = dir.path().join("det.jsonl");
    std::fs::write(
        &detections,
        "{\"frame\": \"frame0.ppm\", \"boxes\": [[100,100,160,160], [300,200,380,260]]}\n",
    )
    .unwrap();

    let out = semlink(
        &[
            "pipeline", "--detections", "det.jsonl", "--mode", "embedding", "--snr", "12",
            "--seed", "3",
        ],
        dir.path(),
    );
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let json: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    let frames = json["frames"].as_array().unwrap();
    assert_eq!(frames.len(), 1);
    assert_eq!(frames[0]["per_vehicle"].as_array().unwrap().len(), 2);
    assert_eq!(frames[0]["n_vehicles"], 2);
    assert_eq!(json["config"]["snr_db"], 12.0);

    // Crop-only skips the channel entirely.
    let crop_only = semlink(
        &["pipeline", "--detections", "det.jsonl", "--mode", "crop-only"],
        dir.path(),
    );
    assert!(crop_only.status.success());
    let json: serde_json::Value = serde_json::from_slice(&crop_only.stdout).unwrap();
    let frames = json["frames"].as_array().unwrap();
    assert!(frames[0]["per_vehicle"].as_array().unwrap().is_empty());
    let latency = frames[0]["latency"]["total_seconds"].as_f64().unwrap();
    assert!((latency - 2.0 * 0.023).abs() < 1e-12);
}

#[test]
fn pipeline_rejects_malformed_detections() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("bad.jsonl"), "this is not json\n").unwrap();
    let out = semlink(&["pipeline", "--detections", "bad.jsonl"], dir.path());
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("malformed"));
}
