//! End-to-end runs of the binary on a small synthetic MNIST in temp dirs.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

const TRAIN: usize = 60;
const TEST: usize = 30;

/// Digit `label` as a vertical bar whose column depends on the label, with
/// a little deterministic texture so the classes are separable but not trivial.
fn synthetic_image(label: u8, k: usize) -> Vec<u8> {
    let mut px = vec![0u8; 28 * 28];
    let col = 3 + 2 * usize::from(label);
    for y in 4..24 {
        for x in col..col + 3 {
            px[y * 28 + x] = 200 + ((y * 7 + x * 3 + k * 11) % 56) as u8;
        }
    }
    px
}

fn write_idx(dir: &Path, prefix: &str, n: usize) {
    let labels: Vec<u8> = (0..n).map(|i| (i % 10) as u8).collect();
    let mut img = Vec::new();
    for v in [0x0803u32, n as u32, 28, 28] {
        img.extend_from_slice(&v.to_be_bytes());
    }
    for (k, &l) in labels.iter().enumerate() {
        img.extend(synthetic_image(l, k));
    }
    let mut lbl = Vec::new();
    for v in [0x0801u32, n as u32] {
        lbl.extend_from_slice(&v.to_be_bytes());
    }
    lbl.extend(&labels);
    std::fs::write(dir.join(format!("{prefix}-images-idx3-ubyte")), img).unwrap();
    std::fs::write(dir.join(format!("{prefix}-labels-idx1-ubyte")), lbl).unwrap();
}

struct Fixture {
    root: tempfile::TempDir,
}

impl Fixture {
    fn new() -> Self {
        let root = tempfile::tempdir().unwrap();
        let data = root.path().join("mnist");
        std::fs::create_dir_all(&data).unwrap();
        write_idx(&data, "train", TRAIN);
        write_idx(&data, "t10k", TEST);
        Self { root }
    }

    fn data(&self) -> PathBuf {
        self.root.path().join("mnist")
    }

    fn out(&self, name: &str) -> PathBuf {
        self.root.path().join(name)
    }

    fn cmd(&self, out: &str) -> Command {
        let mut c = Command::new(env!("CARGO_BIN_EXE_spixel"));
        for (k, _) in std::env::vars() {
            if k.starts_with("SPIXEL_") {
                c.env_remove(k);
            }
        }
        c.arg("--data-dir").arg(self.data()).arg("--output-dir").arg(self.out(out));
        c
    }

    fn run(&self, out: &str, args: &[&str]) -> Output {
        self.cmd(out).args(args).output().unwrap()
    }

    fn ok(&self, out: &str, args: &[&str]) -> String {
        let o = self.run(out, args);
        assert!(
            o.status.success(),
            "{args:?} failed: {}\n{}",
            String::from_utf8_lossy(&o.stdout),
            String::from_utf8_lossy(&o.stderr)
        );
        String::from_utf8(o.stdout).unwrap()
    }
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exited normally")
}

fn manifest(dir: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(dir.join("run.json")).unwrap()).unwrap()
}

fn csv_rows(path: &Path) -> Vec<String> {
    std::fs::read_to_string(path).unwrap().lines().map(str::to_string).collect()
}

#[test]
fn prepare_caches_once_and_recovers_from_corruption() {
    let f = Fixture::new();
    let first = f.ok("prep", &["prepare"]);
    assert!(first.contains("cached 60 images"), "{first}");
    let cache = f.data().join("cache").join("train-pad.spqm");
    assert!(cache.exists());

    let second = f.ok("prep", &["prepare"]);
    assert!(second.contains("nothing to do"), "{second}");

    std::fs::write(&cache, b"SPQMgarbage").unwrap();
    let o = f.run("prep", &["prepare"]);
    assert_eq!(code(&o), 0);
    assert!(String::from_utf8_lossy(&o.stderr).contains("warning"));
    assert!(std::fs::metadata(&cache).unwrap().len() > 100);

    let m = manifest(&f.out("prep"));
    assert_eq!(m["invocation"]["command"], "prepare");
    assert_eq!(m["metrics"]["train_images"], 60.0);
}

#[test]
fn select_mask_sizes_and_rejections() {
    let f = Fixture::new();
    f.ok("m64", &["select-mask"]);
    let rows = csv_rows(&f.out("m64").join("mask.txt"));
    assert_eq!(rows.len(), 65, "header plus 64 coefficients");
    assert!(rows[0].contains("n_total=1024 m=64"));

    f.ok("full", &["select-mask", "--m", "1024"]);
    assert_eq!(csv_rows(&f.out("full").join("mask.txt")).len(), 1025);

    assert_eq!(code(&f.run("zero", &["select-mask", "--m", "0"])), 2);
    assert_eq!(code(&f.run("big", &["select-mask", "--m", "1025"])), 2);
}

#[test]
fn quantum_classifier_train_is_seeded_and_evaluates() {
    let f = Fixture::new();
    let args = ["train", "--model", "quantum-classifier", "--layers", "3", "--epochs", "1"];
    f.ok("a", &args);
    f.ok("b", &args);
    let ck_a = std::fs::read(f.out("a").join("model.ckpt")).unwrap();
    let ck_b = std::fs::read(f.out("b").join("model.ckpt")).unwrap();
    assert_eq!(ck_a, ck_b, "same seed must give identical checkpoints");

    let m = manifest(&f.out("a"));
    assert_eq!(m["metrics"]["parameters"], 250.0);
    assert_eq!(m["resolved"]["subset"], "full");
    assert_eq!(csv_rows(&f.out("a").join("history.csv"))[0], "epoch,train_loss,val_metric");

    f.ok("c", &["--seed", "1", "train", "--model", "quantum-classifier", "--layers", "3", "--epochs", "1"]);
    assert_ne!(ck_a, std::fs::read(f.out("c").join("model.ckpt")).unwrap());

    let ck = f.out("a").join("model.ckpt");
    f.ok("eval", &["evaluate", "--checkpoint", ck.to_str().unwrap()]);
    let rows = csv_rows(&f.out("eval").join("evaluation.csv"));
    assert_eq!(rows[0], "model,split,accuracy,mse,ssim");
    let cells: Vec<&str> = rows[1].split(',').collect();
    assert_eq!(&cells[..2], ["quantum-classifier", "test"]);
    let acc: f64 = cells[2].parse().unwrap();
    assert!((0.0..=1.0).contains(&acc));
    assert_eq!(&cells[3..], ["", ""]);
    assert!(!f.out("eval").join("reconstructions.pgm").exists());
}

#[test]
fn train_rejects_bad_arguments() {
    let f = Fixture::new();
    let o = f.run("x", &["train", "--model", "classical-classifier", "--epochs", "0"]);
    assert_eq!(code(&o), 2, "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(code(&f.run("x", &["train", "--model", "quantum-classifier", "--layers", "0"])), 2);
    assert_eq!(code(&f.run("x", &["train", "--model", "quantum-classifier", "--m", "32"])), 2);
    assert_eq!(code(&f.run("x", &["train", "--model", "nonsense"])), 2);
    assert_eq!(code(&f.run("x", &["train"])), 2);
}

#[test]
fn reconstructor_evaluation_writes_truth_and_prediction_rows() {
    let f = Fixture::new();
    f.ok(
        "qr",
        &["train", "--model", "quantum-reconstructor", "--layers", "2", "--epochs", "1", "--per-class", "6"],
    );
    let m = manifest(&f.out("qr"));
    assert_eq!(m["resolved"]["subset"], "reduced");
    assert_eq!(m["metrics"]["train_rows"], 12.0);
    assert_eq!(m["metrics"]["parameters"], 30.0);

    let ck = f.out("qr").join("model.ckpt");
    f.ok("ev", &["evaluate", "--checkpoint", ck.to_str().unwrap(), "--grid", "4"]);
    let rows = csv_rows(&f.out("ev").join("evaluation.csv"));
    let cells: Vec<&str> = rows[1].split(',').collect();
    assert_eq!(cells[0], "quantum-reconstructor");
    assert_eq!(cells[2], "");
    let mse: f64 = cells[3].parse().unwrap();
    let ssim: f64 = cells[4].parse().unwrap();
    assert!(mse >= 0.0 && ssim.abs() <= 1.0);

    let pgm = std::fs::read(f.out("ev").join("reconstructions.pgm")).unwrap();
    let header = b"P5\n131 65\n255\n";
    assert_eq!(&pgm[..header.len()], header, "4 columns by 2 rows of 32-pixel tiles");
    assert_eq!(pgm.len(), header.len() + 131 * 65);
}

#[test]
fn evaluate_missing_checkpoint_is_a_data_error() {
    let f = Fixture::new();
    let o = f.run("ev", &["evaluate", "--checkpoint", "/nonexistent/model.ckpt"]);
    assert_eq!(code(&o), 3);
    let bad = f.out("garbage.ckpt");
    std::fs::write(&bad, b"not a checkpoint").unwrap();
    assert_eq!(code(&f.run("ev", &["evaluate", "--checkpoint", bad.to_str().unwrap()])), 3);
}

#[test]
fn missing_dataset_is_a_data_error() {
    let f = Fixture::new();
    let o = Command::new(env!("CARGO_BIN_EXE_spixel"))
        .env_remove("SPIXEL_DATA_DIR")
        .arg("--output-dir")
        .arg(f.out("x"))
        .args(["--data-dir", "/nonexistent", "select-mask"])
        .output()
        .unwrap();
    assert_eq!(code(&o), 3, "{}", String::from_utf8_lossy(&o.stderr));
}

#[test]
fn sweep_deduplicates_sizes() {
    let f = Fixture::new();
    f.ok(
        "sw",
        &["sweep", "--sizes", "4,1,4", "--metric", "accuracy", "--classifier-epochs", "1"],
    );
    let rows = csv_rows(&f.out("sw").join("sweep-accuracy.csv"));
    assert_eq!(rows[0], "m,accuracy");
    let ms: Vec<&str> = rows[1..].iter().map(|r| r.split(',').next().unwrap()).collect();
    assert_eq!(ms, ["1", "4"]);
    assert!(!f.out("sw").join("sweep-mse.csv").exists());

    f.ok(
        "one",
        &["sweep", "--sizes", "2", "--metric", "mse", "--reconstructor-epochs", "1", "--per-class", "3"],
    );
    let rows = csv_rows(&f.out("one").join("sweep-mse.csv"));
    assert_eq!(rows.len(), 2);
    assert!(rows[1].starts_with("2,"));

    assert_eq!(code(&f.run("bad", &["sweep", "--sizes", "0"])), 2);
    assert_eq!(code(&f.run("bad", &["sweep", "--sizes", "2048"])), 2);
}

#[test]
fn export_pattern_writes_pgm() {
    let f = Fixture::new();
    f.ok("pat", &["export-pattern", "--indices", "0,1"]);
    let p0 = std::fs::read(f.out("pat").join("pattern-0.pgm")).unwrap();
    let header = b"P5\n32 32\n255\n";
    assert_eq!(&p0[..header.len()], header);
    assert!(p0[header.len()..].iter().all(|&b| b == 255), "row 0 is all ones");
    let p1 = std::fs::read(f.out("pat").join("pattern-1.pgm")).unwrap();
    let body = &p1[header.len()..];
    assert_eq!(body.iter().filter(|&&b| b == 0).count(), 512);

    assert_eq!(code(&f.run("pat", &["export-pattern", "--indices", "1024"])), 2);
    assert_eq!(code(&f.run("pat", &["export-pattern", "--side", "30"])), 2);
}

#[test]
fn qpu_estimate_prints_total() {
    let f = Fixture::new();
    let out = f.ok(
        "q",
        &[
            "estimate-qpu-time", "--t1q", "1e-6", "--t2q", "1e-5", "--overhead", "1e-3", "--shots", "100",
            "--d1q", "10", "--d2q", "5", "--n-params", "2", "--dataset", "3",
        ],
    );
    let line = out.lines().find_map(|l| l.strip_prefix("total_seconds=")).unwrap();
    let total: f64 = line.parse().unwrap();
    let want = ((10.0 * 1e-6 + 5.0 * 1e-5) * 5.0 + 1e-3) * 100.0 * 3.0;
    assert!((total - want).abs() < 1e-12 * want, "{total} vs {want}");

    let out = f.ok("q", &["estimate-qpu-time", "--t1q", "0", "--t2q", "0", "--overhead", "2", "--shots", "3"]);
    assert!(out.contains("total_seconds=360000"), "{out}");

    let o = f.run("q", &["estimate-qpu-time", "--t1q", "1", "--t2q", "1", "--overhead", "1", "--shots", "0"]);
    assert_eq!(code(&o), 2);
    assert_eq!(code(&f.run("q", &["estimate-qpu-time", "--t1q", "1"])), 2);
}

#[test]
fn rerun_reproduces_a_training_run() {
    let f = Fixture::new();
    f.ok("orig", &["--seed", "3", "train", "--model", "quantum-classifier", "--layers", "1", "--epochs", "1"]);
    let manifest_path = f.out("orig").join("run.json");
    let into = f.out("again");
    let o = f
        .cmd("ignored")
        .args(["rerun", manifest_path.to_str().unwrap(), "--into", into.to_str().unwrap()])
        .output()
        .unwrap();
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(
        std::fs::read(f.out("orig").join("model.ckpt")).unwrap(),
        std::fs::read(into.join("model.ckpt")).unwrap()
    );
    let m = manifest(&into);
    assert_eq!(m["global"]["seed"], 3);
    assert_eq!(m["invocation"]["args"]["layers"], 1);

    let junk = f.out("junk.json");
    std::fs::write(&junk, "{}").unwrap();
    assert_eq!(code(&f.run("x", &["rerun", junk.to_str().unwrap()])), 3);
}

#[test]
fn config_file_sits_below_flags_and_environment() {
    let f = Fixture::new();
    let cfg = f.out("run.cfg");
    std::fs::write(&cfg, "# defaults\nm = 16\nseed=5\n").unwrap();
    let cfg_s = cfg.to_str().unwrap();

    f.ok("c1", &["--config", cfg_s, "select-mask"]);
    assert_eq!(manifest(&f.out("c1"))["invocation"]["args"]["m"], 16);
    assert_eq!(manifest(&f.out("c1"))["global"]["seed"], 5);

    f.ok("c2", &["--config", cfg_s, "select-mask", "--m", "8"]);
    assert_eq!(manifest(&f.out("c2"))["invocation"]["args"]["m"], 8);

    let o = f.cmd("c3").args(["--config", cfg_s, "select-mask"]).env("SPIXEL_M", "4").output().unwrap();
    assert!(o.status.success());
    assert_eq!(manifest(&f.out("c3"))["invocation"]["args"]["m"], 4);

    std::fs::write(&cfg, "bogus=1\n").unwrap();
    assert_eq!(code(&f.run("c4", &["--config", cfg_s, "select-mask"])), 2);
    assert_eq!(code(&f.run("c4", &["--config", "/nonexistent.cfg", "select-mask"])), 3);
}

#[test]
fn results_do_not_depend_on_thread_count() {
    let f = Fixture::new();
    let args = ["train", "--model", "quantum-classifier", "--layers", "2", "--epochs", "1", "--batch", "7"];
    let mut one = vec!["--threads", "1"];
    one.extend(args);
    let mut three = vec!["--threads", "3"];
    three.extend(args);
    f.ok("t1", &one);
    f.ok("t3", &three);
    assert_eq!(
        std::fs::read(f.out("t1").join("model.ckpt")).unwrap(),
        std::fs::read(f.out("t3").join("model.ckpt")).unwrap()
    );
}
