use std::path::Path;
use std::process::{Command, Output};

use amem_core::io::read_csv;

fn amem(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_amem"))
        .args(args)
        .env("AMEM_MNIST_DIR", concat!(env!("CARGO_MANIFEST_DIR"), "/../../data/mnist"))
        .output()
        .expect("binary runs")
}

fn ok(args: &[&str]) -> Output {
    let o = amem(args);
    assert!(
        o.status.success(),
        "amem {args:?} exited {:?}\n{}",
        o.status.code(),
        String::from_utf8_lossy(&o.stderr)
    );
    o
}

fn column(path: &Path, name: &str) -> Vec<String> {
    let (header, rows) = read_csv(path).unwrap();
    let c = header.iter().position(|h| h == name).unwrap_or_else(|| panic!("no column {name}"));
    rows.into_iter().map(|r| r[c].clone()).collect()
}

/// The 2D ring setup from the acceptance suite, as a config file.
const RING: &str = "\
# six points on a ring
dataset = ring:6
width = 64
depth = 9
nonlin = sinusoid
init = uniform:0.05
optimizer = adam
lr = 1e-4
loss_threshold = 1e-8
max_epochs = 100000
refine_lr = 1e-3
seed = 34
";

#[test]
fn ring_train_verify_recover() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("ring.cfg");
    std::fs::write(&cfg, RING).unwrap();
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    let (cfg, a, b) = (cfg.to_str().unwrap(), a.to_str().unwrap(), b.to_str().unwrap());

    ok(&["--config", cfg, "--out", a, "train"]);
    let ckpt = format!("{a}/net.amem");
    let v = ok(&["--config", cfg, "--out", a, "verify", "--checkpoint", &ckpt]);
    assert!(String::from_utf8_lossy(&v.stdout).contains("attractors: 6/6"));
    let verdicts = column(&Path::new(a).join("verify.csv"), "verdict");
    assert_eq!(verdicts, vec!["attractor"; 6]);

    ok(&["--config", cfg, "--out", a, "recover", "--checkpoint", &ckpt, "--corruptions", "uniform:0", "--trials", "3"]);
    let rates = column(&Path::new(a).join("recovery.csv"), "rate");
    assert_eq!(rates.len(), 1);
    assert_eq!(rates[0].parse::<f64>().unwrap(), 1.0);

    ok(&["--config", cfg, "--out", a, "basin", "--checkpoint", &ckpt, "--resolution", "12"]);
    let ppm = std::fs::read(Path::new(a).join("basin.ppm")).unwrap();
    assert!(ppm.starts_with(b"P6\n12 12\n255\n"));
    assert_eq!(column(&Path::new(a).join("basin.csv"), "label").len(), 144);

    // Same seed, same bytes.
    ok(&["--config", cfg, "--out", b, "train"]);
    ok(&["--config", cfg, "--out", b, "verify", "--checkpoint", &format!("{b}/net.amem")]);
    for f in ["net.amem", "train.csv", "train_summary.csv", "verify.csv"] {
        let (x, y) = (std::fs::read(format!("{a}/{f}")).unwrap(), std::fs::read(format!("{b}/{f}")).unwrap());
        assert!(x == y, "{f} differs between identical runs");
    }
}

#[test]
fn theory_sigmoid_row() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    ok(&["--nonlin", "sigmoid", "--out", out, "theory", "--k", "2", "--u0", "1", "--v0", "1"]);
    let lam: f64 = column(&dir.path().join("theory.csv"), "lambda_theory")[0].parse().unwrap();
    assert!((lam - 0.263).abs() < 1e-3, "{lam}");

    ok(&["--nonlin", "sigmoid", "--out", out, "--max-epochs", "5000000", "--loss-threshold", "1e-20", "theory", "--k", "2", "--train-check"]);
    let trained: f64 = column(&dir.path().join("theory.csv"), "lambda_trained")[0].parse().unwrap();
    assert!((trained - lam).abs() < 1e-3, "{trained} vs {lam}");
}

#[test]
fn sequence_sweep_writes_one_row_per_cell() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    ok(&[
        "--dataset", "ring:4", "--nonlin", "swish", "--optimizer", "adam", "--lr", "1e-2", "--max-epochs", "200",
        "--out", out, "sweep", "--depths", "1,2", "--widths", "8", "--objectives", "autoencode,sequence",
    ]);
    let path = dir.path().join("sweep.csv");
    assert_eq!(column(&path, "depth"), ["1", "1", "2", "2"]);
    assert_eq!(column(&path, "objective"), ["autoencode", "sequence", "autoencode", "sequence"]);
    let seeds = column(&path, "seed");
    assert!(seeds.iter().collect::<std::collections::HashSet<_>>().len() == 4, "{seeds:?}");
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    let bad_cfg = dir.path().join("bad.cfg");
    std::fs::write(&bad_cfg, "widht = 3\n").unwrap();

    let code = |args: &[&str]| amem(args).status.code();
    assert_eq!(code(&["--config", bad_cfg.to_str().unwrap(), "--out", out, "train"]), Some(2));
    assert_eq!(code(&["--nonlin", "tanhh", "--out", out, "train"]), Some(2));
    assert_eq!(code(&["--out", out, "verify", "--checkpoint", "/nonexistent/net.amem"]), Some(3));
    assert_eq!(code(&["--dataset", "file:/nonexistent.txt", "--out", out, "train"]), Some(3));
    assert_eq!(
        code(&["--dataset", "ring:6", "--width", "4", "--depth", "1", "--max-epochs", "3", "--out", out, "train"]),
        Some(4)
    );
    // A not-converged train still leaves its checkpoint and trace behind.
    assert!(dir.path().join("net.amem").exists() && dir.path().join("train.csv").exists());
}
