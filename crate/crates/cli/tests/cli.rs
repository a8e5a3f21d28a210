use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use iecc_cli::error::exit;
use iecc_cli::io::{load_png, save_png, ColorMode};
use iecc_core::codec::{decode, deserialize, encode};
use iecc_core::{Algorithm, ClusterConfig, RasterImage};
use serde_json::Value;
use tempfile::TempDir;

fn iecc(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_iecc")).args(args).output().unwrap()
}

fn json(output: &Output) -> Value {
    assert!(output.status.success(), "{}", String::from_utf8_lossy(&output.stderr));
    serde_json::from_slice(&output.stdout).unwrap()
}

fn code(output: &Output) -> i32 {
    output.status.code().unwrap()
}

fn s(path: &Path) -> &str {
    path.to_str().unwrap()
}

fn write(dir: &TempDir, name: &str, image: &RasterImage) -> PathBuf {
    let path = dir.path().join(name);
    save_png(&path, image).unwrap();
    path
}

fn two_tone() -> RasterImage {
    RasterImage::new(4, 4, 1, (0..16).map(|i| if i % 3 == 0 { 0 } else { 255 }).collect()).unwrap()
}

fn texture(w: usize, h: usize) -> RasterImage {
    let samples = (0..w * h)
        .flat_map(|i| {
            let (r, c) = (i / w, i % w);
            [(r * 7 + c * 3) as u8, (r * c) as u8, (r * 31 ^ c * 17) as u8]
        })
        .collect();
    RasterImage::new(w, h, 3, samples).unwrap()
}

#[test]
fn compress_decompress_matches_library_roundtrip() {
    let dir = TempDir::new().unwrap();
    let image = texture(20, 12);
    let input = write(&dir, "in.png", &image);
    let container = dir.path().join("in.iecc");
    let out_png = dir.path().join("out.png");

    let report = json(&iecc(&["compress", s(&input), "--k", "8", "--seed", "7", "-o", s(&container)]));
    assert_eq!(report["k"], 8);
    assert_eq!(report["seed"], 7);
    assert_eq!(report["algorithm"], "kmeanspp");
    assert_eq!(report["bits_per_index"], 3);
    assert_eq!(report["container_bytes"], fs::metadata(&container).unwrap().len());

    json(&iecc(&["decompress", s(&container), "-o", s(&out_png)]));
    let expected = decode(&encode(&image, &ClusterConfig::<f64>::new(Algorithm::KMeansPlusPlus, 8).with_seed(7)).unwrap()).unwrap();
    assert_eq!(load_png(&out_png, ColorMode::Native).unwrap(), expected);

    let metrics = json(&iecc(&["metrics", s(&input), s(&out_png)]));
    assert!((metrics["mse"].as_f64().unwrap() - report["mse"].as_f64().unwrap()).abs() < 1e-12);
}

#[test]
fn two_tone_is_lossless_and_large_k16_ratio_is_two() {
    let dir = TempDir::new().unwrap();
    let input = write(&dir, "tt.png", &two_tone());
    let report = json(&iecc(&["compress", s(&input), "--k", "2", "-o", s(&dir.path().join("tt.iecc"))]));
    assert_eq!(report["mse"], 0.0);
    assert_eq!(report["psnr_db"], "inf");

    let big = RasterImage::new(512, 512, 1, (0..512 * 512).map(|i| ((i % 512) / 2) as u8).collect()).unwrap();
    let input = write(&dir, "big.png", &big);
    let report = json(&iecc(&["compress", s(&input), "--k", "16", "--dedup-colors", "-o", s(&dir.path().join("big.iecc"))]));
    assert!((report["ratio_eq1"].as_f64().unwrap() - 2.0).abs() < 0.01);
}

#[test]
fn k_above_256_is_a_usage_error() {
    let dir = TempDir::new().unwrap();
    let input = write(&dir, "tt.png", &two_tone());
    assert_eq!(code(&iecc(&["compress", s(&input), "--k", "300"])), exit::USAGE);
}

#[test]
fn degenerate_k_and_missing_input_have_distinct_codes() {
    let dir = TempDir::new().unwrap();
    let input = write(&dir, "tt.png", &two_tone());
    let out = iecc(&["compress", s(&input), "--k", "3", "-o", s(&dir.path().join("x.iecc"))]);
    assert_eq!(code(&out), exit::DATA);
    assert!(String::from_utf8_lossy(&out.stderr).contains("2 distinct"));
    assert_eq!(code(&iecc(&["compress", "/nonexistent.png", "--k", "2"])), exit::INPUT);
}

#[test]
fn malformed_containers_are_rejected() {
    let dir = TempDir::new().unwrap();
    let input = write(&dir, "tt.png", &two_tone());
    let container = dir.path().join("tt.iecc");
    json(&iecc(&["compress", s(&input), "--k", "2", "-o", s(&container)]));
    let bytes = fs::read(&container).unwrap();

    let truncated = dir.path().join("truncated.iecc");
    fs::write(&truncated, &bytes[..bytes.len() - 1]).unwrap();
    let out = iecc(&["decompress", s(&truncated), "-o", s(&dir.path().join("a.png"))]);
    assert_eq!(code(&out), exit::MALFORMED);
    assert!(String::from_utf8_lossy(&out.stderr).contains("malformed container"));

    let mut versioned = bytes.clone();
    versioned[4] = 2;
    let path = dir.path().join("v2.iecc");
    fs::write(&path, versioned).unwrap();
    let out = iecc(&["decompress", s(&path), "-o", s(&dir.path().join("b.png"))]);
    assert_eq!(code(&out), exit::MALFORMED);
    assert!(String::from_utf8_lossy(&out.stderr).contains("unsupported container version"));
}

#[test]
fn metrics_examples() {
    let dir = TempDir::new().unwrap();
    let a = write(&dir, "a.png", &RasterImage::new(2, 1, 1, vec![0, 0]).unwrap());
    let b = write(&dir, "b.png", &RasterImage::new(2, 1, 1, vec![3, 4]).unwrap());
    let c = write(&dir, "c.png", &RasterImage::new(3, 1, 1, vec![0, 0, 0]).unwrap());

    let same = json(&iecc(&["metrics", s(&a), s(&a)]));
    assert_eq!(same["mse"], 0.0);
    assert_eq!(same["ssim"], 1.0);
    assert_eq!(same["psnr_db"], "inf");
    assert_eq!(json(&iecc(&["metrics", s(&a), s(&b)]))["mse"], 12.5);
    assert_eq!(code(&iecc(&["metrics", s(&a), s(&c)])), exit::DATA);

    let csv = iecc(&["metrics", s(&a), s(&a), "--format", "csv"]);
    let text = String::from_utf8(csv.stdout).unwrap();
    assert!(text.starts_with("schema_version,"));
    assert!(text.lines().nth(1).unwrap().contains(",inf,"));
}

fn histogram_rows(text: &str) -> Vec<Vec<u64>> {
    text.lines().skip(1).map(|l| l.split(',').skip(2).map(|v| v.parse().unwrap()).collect()).collect()
}

#[test]
fn histogram_bins() {
    let dir = TempDir::new().unwrap();
    let constant = write(&dir, "k.png", &RasterImage::filled(5, 3, 1, 42).unwrap());
    let rows = histogram_rows(&String::from_utf8(iecc(&["histogram", s(&constant)]).stdout).unwrap());
    assert_eq!(rows.len(), 256);
    assert_eq!(rows.iter().filter(|r| r[0] > 0).count(), 1);
    assert_eq!(rows[42][0], 15);

    let tt = write(&dir, "tt.png", &two_tone());
    let rows = histogram_rows(&String::from_utf8(iecc(&["histogram", s(&tt)]).stdout).unwrap());
    assert_eq!(rows.iter().filter(|r| r[0] > 0).count(), 2);

    let rgb = write(&dir, "rgb.png", &texture(9, 7));
    let out = dir.path().join("h.csv");
    assert!(iecc(&["histogram", s(&rgb), "-o", s(&out)]).status.success());
    let rows = histogram_rows(&fs::read_to_string(&out).unwrap());
    for channel in 0..3 {
        assert_eq!(rows.iter().map(|r| r[channel]).sum::<u64>(), 63);
    }
    let as_json = json(&iecc(&["histogram", s(&rgb), "--format", "json"]));
    assert_eq!(as_json["channels"], serde_json::json!(["r", "g", "b"]));
}

fn frames_dir(dir: &TempDir, frames: &[RasterImage]) -> PathBuf {
    let path = dir.path().join("frames");
    fs::create_dir(&path).unwrap();
    for (i, frame) in frames.iter().enumerate() {
        save_png(&path.join(format!("f{i:02}.png")), frame).unwrap();
    }
    path
}

#[test]
fn iec_sim_identical_frames_send_once() {
    let dir = TempDir::new().unwrap();
    let frame = texture(16, 16);
    let frames = frames_dir(&dir, &vec![frame.clone(); 5]);
    let out = dir.path().join("out");
    let report = json(&iecc(&["iec-sim", s(&frames), "--k", "4", "--threshold", "1.0", "-o", s(&out)]));
    assert_eq!(report["frames_sent"], 1);
    assert_eq!(report["frames_skipped"], 4);
    let container = fs::read(out.join("f00.iecc")).unwrap();
    assert_eq!(report["bytes_sent"], container.len());
    let expected = 1.0 - container.len() as f64 / (5.0 * 16.0 * 16.0 * 3.0);
    assert!((report["savings"].as_f64().unwrap() - expected).abs() < 1e-12);
    assert!(!out.join("f01.iecc").exists());
    assert!(deserialize(&container).is_ok());
    let on_disk: Value = serde_json::from_str(&fs::read_to_string(out.join("iec_report.json")).unwrap()).unwrap();
    assert_eq!(on_disk, report);
}

#[test]
fn iec_sim_black_white_both_sent() {
    let dir = TempDir::new().unwrap();
    let black = RasterImage::new(12, 12, 1, [vec![0; 72], vec![10; 72]].concat()).unwrap();
    let white = RasterImage::new(12, 12, 1, [vec![255; 72], vec![245; 72]].concat()).unwrap();
    let frames = frames_dir(&dir, &[black, white]);
    let report = json(&iecc(&[
        "iec-sim", s(&frames), "--k", "2", "--threshold", "0.9", "-o", s(&dir.path().join("o")),
    ]));
    assert_eq!(report["frames_sent"], 2);
}

#[test]
fn iec_sim_rejects_empty_dir_and_shape_drift() {
    let dir = TempDir::new().unwrap();
    let empty = dir.path().join("empty");
    fs::create_dir(&empty).unwrap();
    let out = s(&dir.path().join("o")).to_string();
    assert_eq!(code(&iecc(&["iec-sim", s(&empty), "-o", &out])), exit::INPUT);
    let frames = frames_dir(&dir, &[texture(8, 8), texture(9, 8)]);
    assert_eq!(code(&iecc(&["iec-sim", s(&frames), "--k", "2", "-o", &out])), exit::DATA);
    assert_eq!(code(&iecc(&["iec-sim", s(&frames), "--threshold", "1.5", "-o", &out])), exit::USAGE);
}

#[test]
fn bench_single_cell_and_determinism() {
    let dir = TempDir::new().unwrap();
    let input = write(&dir, "t.png", &texture(16, 16));
    let run = |name: &str| {
        let out = dir.path().join(name);
        let summary = json(&iecc(&[
            "bench", "--images", s(&input), "--algos", "kmeans", "--ks", "4", "--runs", "1", "--modes", "rgb",
            "-o", s(&out),
        ]));
        assert_eq!(summary["cells"], 1);
        out
    };
    let a = run("a");
    let b = run("b");
    let runs = fs::read_to_string(a.join("runs.csv")).unwrap();
    assert_eq!(runs.lines().count(), 2);
    assert_eq!(runs, fs::read_to_string(b.join("runs.csv")).unwrap());
    assert_eq!(fs::read(a.join("rmse_vs_k.csv")).unwrap(), fs::read(b.join("rmse_vs_k.csv")).unwrap());
    assert!(!a.join("significance.csv").exists());
}

#[test]
fn bench_is_byte_identical_and_records_skips() {
    let dir = TempDir::new().unwrap();
    let images = dir.path().join("imgs");
    fs::create_dir(&images).unwrap();
    save_png(&images.join("a.png"), &texture(12, 10)).unwrap();
    save_png(&images.join("b.png"), &two_tone()).unwrap();
    let run = |name: &str| {
        let out = dir.path().join(name);
        let out_str = s(&out).to_string();
        json(&iecc(&[
            "bench", "--images", s(&images), "--algos", "kmeanspp,kmeans", "--ks", "2,4", "--runs", "6",
            "--modes", "gray", "--seed", "11", "-o", &out_str,
        ]));
        out
    };
    let (a, b) = (run("a"), run("b"));
    for file in ["runs.csv", "rmse_vs_k.csv", "significance.csv", "significance.json", "plan.json"] {
        assert_eq!(fs::read(a.join(file)).unwrap(), fs::read(b.join(file)).unwrap(), "{file}");
    }
    let runs = fs::read_to_string(a.join("runs.csv")).unwrap();
    assert_eq!(runs.lines().count(), 1 + 2 * 2 * 2 * 6);
    // The two-tone image has only two gray levels: K = 4 cells are skipped.
    assert_eq!(runs.lines().filter(|l| l.contains(",skipped,")).count(), 2 * 6);
    assert!(runs.lines().skip(1).all(|l| {
        let seed: u64 = l.split(',').nth(6).unwrap().parse().unwrap();
        let run: u64 = l.split(',').nth(5).unwrap().parse().unwrap();
        seed == 11 + run
    }));
    let plan: Value = serde_json::from_str(&fs::read_to_string(a.join("plan.json")).unwrap()).unwrap();
    assert_eq!(plan["base_seed"], 11);
    assert_eq!(plan["cells_skipped"], 12);
}

#[test]
fn bench_requires_output_and_valid_k() {
    let dir = TempDir::new().unwrap();
    let input = write(&dir, "t.png", &texture(8, 8));
    assert_eq!(code(&iecc(&["bench", "--images", s(&input)])), exit::USAGE);
    assert_eq!(code(&iecc(&["bench", "--images", s(&input), "--ks", "1", "-o", "x"])), exit::USAGE);
}
