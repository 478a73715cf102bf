use std::path::Path;
use std::process::{Command, Output};

use lattice_cli::RunConfig;
use lattice_core::oracle;
use lattice_core::raster::BitImage;
use lattice_pipeline::dataset::Dataset;

fn lattice(out: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_lattice"))
        .arg("--out-dir")
        .arg(out)
        .args(args)
        .env("RUST_LOG", "warn")
        .output()
        .expect("binary runs")
}

fn ok(out: &Path, args: &[&str]) -> String {
    let o = lattice(out, args);
    assert!(
        o.status.success(),
        "{args:?} failed: {}\n{}",
        String::from_utf8_lossy(&o.stdout),
        String::from_utf8_lossy(&o.stderr)
    );
    String::from_utf8(o.stdout).unwrap()
}

fn path_str(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn render_writes_nonblank_pgm() {
    let dir = tempfile::tempdir().unwrap();
    ok(dir.path(), &["keys", "render", "--key", "00231121"]);
    let img = BitImage::from_pgm(&std::fs::read(dir.path().join("00231121.pgm")).unwrap()).unwrap();
    assert!(img.popcount() > 0);
    assert!(dir.path().join("manifest-keys-render.toml").exists());
}

#[test]
fn invalid_key_is_a_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let o = lattice(dir.path(), &["keys", "render", "--key", "99999999"]);
    assert_eq!(o.status.code(), Some(2));
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("digit 1") && err.contains("allowed values"), "{err}");
    assert_eq!(lattice(dir.path(), &["keys", "frobnicate"]).status.code(), Some(2));
}

#[test]
fn enumerate_lists_deduplicated_keys() {
    let dir = tempfile::tempdir().unwrap();
    let o = lattice(dir.path(), &["keys", "enumerate"]);
    assert!(o.status.success());
    let stdout = String::from_utf8(o.stdout).unwrap();
    assert_eq!(stdout.lines().count(), 400);
    assert!(String::from_utf8_lossy(&o.stderr).contains("900 canonical"));
}

#[test]
fn generate_is_deterministic_per_seed() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    for d in [&a, &b] {
        ok(d.path(), &["--seed", "5", "data", "generate", "--n", "10", "--k", "12"]);
    }
    for f in ["sims.bin", "augmented.bin", "sims.csv"] {
        assert_eq!(std::fs::read(a.path().join(f)).unwrap(), std::fs::read(b.path().join(f)).unwrap(), "{f}");
    }
    let aug = oracle::read_batch(&std::fs::read(a.path().join("augmented.bin")).unwrap()[..]).unwrap();
    assert_eq!(aug.len(), 120);
    let c = tempfile::tempdir().unwrap();
    ok(c.path(), &["--seed", "6", "data", "generate", "--n", "10", "--k", "12"]);
    assert_ne!(std::fs::read(a.path().join("sims.bin")).unwrap(), std::fs::read(c.path().join("sims.bin")).unwrap());
}

#[test]
fn config_file_and_flags_resolve_into_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.toml");
    std::fs::write(&cfg, "seed = 3\n[data]\nn = 4\nk = 2\n[material]\nk_b = 0.03\n").unwrap();
    ok(dir.path(), &["--config", path_str(&cfg), "data", "generate", "--k", "3"]);
    let manifest = std::fs::read_to_string(dir.path().join("manifest-data-generate.toml")).unwrap();
    let resolved = RunConfig::from_toml(&manifest).unwrap();
    assert_eq!((resolved.seed, resolved.data.n, resolved.data.k), (3, 4, 3));
    assert_eq!(resolved.material.k_b, 0.03);
    let aug = oracle::read_batch(&std::fs::read(dir.path().join("augmented.bin")).unwrap()[..]).unwrap();
    assert_eq!(aug.len(), 12);

    // Re-running from the manifest alone reproduces the outputs.
    let again = tempfile::tempdir().unwrap();
    let copy = again.path().join("m.toml");
    std::fs::write(&copy, &manifest).unwrap();
    ok(again.path(), &["--config", path_str(&copy), "data", "generate"]);
    assert_eq!(
        std::fs::read(dir.path().join("augmented.bin")).unwrap(),
        std::fs::read(again.path().join("augmented.bin")).unwrap()
    );

    std::fs::write(&cfg, "[gru]\nwidth = 3\n").unwrap();
    assert_eq!(lattice(dir.path(), &["--config", path_str(&cfg), "keys", "enumerate"]).status.code(), Some(2));
    assert_eq!(lattice(dir.path(), &["data", "generate", "--n", "0"]).status.code(), Some(2));
}

#[test]
fn missing_inputs_are_runtime_errors() {
    let dir = tempfile::tempdir().unwrap();
    let o = lattice(dir.path(), &["train", "gru", "--data", "/nonexistent/dataset.bin"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("/nonexistent/dataset.bin"));
}

#[test]
fn small_pipeline_end_to_end() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let p = |f: &str| d.join(f).to_str().unwrap().to_string();
    let seed = ["--seed", "11"];

    let ae_out = ok(d, &[&seed[..], &["train", "ae", "--epochs", "2"]].concat());
    assert!(ae_out.contains("unseen: 60 designs"), "{ae_out}");
    assert_eq!(std::fs::read_to_string(p("heldout.txt")).unwrap().lines().count(), 60);

    let gen = ok(d, &[&seed[..], &["data", "generate", "--n", "30", "--k", "4", "--ae", &p("ae.weights")]].concat());
    assert!(gen.contains("120 training points"), "{gen}");
    assert_eq!(Dataset::load(&d.join("dataset.bin")).unwrap().len(), 120);

    let gru_args = ["train", "gru", "--data", &p("dataset.bin"), "--epochs", "1", "--hidden", "6,5", "--batch-size", "16"];
    ok(d, &[&seed[..], &gru_args[..], &["--heldout", &p("heldout.txt")]].concat());
    let trace = std::fs::read_to_string(p("gru_trace.csv")).unwrap();
    assert_eq!(trace.lines().count(), 2, "{trace}");
    let split = std::fs::read_to_string(p("split.csv")).unwrap();
    assert!(split.contains(",test2"), "seed should put some designs in test2");

    ok(d, &["eval", "--model", &p("gru.weights"), "--data", &p("dataset.bin"), "--split", &p("split.csv"), "--set", "test2"]);
    let summary = std::fs::read_to_string(p("eval_summary.csv")).unwrap();
    let header = summary.lines().next().unwrap();
    for col in ["rf_rmae", "pd_rmae", "dmd_rmae", "else_rmae"] {
        assert!(header.contains(col), "{header}");
    }
    assert!(summary.lines().nth(1).unwrap().starts_with("test2,test2,"));
    assert!(d.join("eval_cases_test2.csv").exists());
    let o = lattice(d, &["eval", "--model", &p("gru.weights"), "--data", &p("dataset.bin"), "--set", "test1"]);
    assert_eq!(o.status.code(), Some(2));

    let fx = d.join("fixtures");
    let fx_s = fx.to_str().unwrap();
    ok(&fx, &[&seed[..], &["data", "generate", "--fixtures", "--n", "6", "--k", "3", "--ae", &p("ae.weights")]].concat());
    let t_out = ok(
        d,
        &[
            &seed[..],
            &["train", "transfer", "--base", &p("gru.weights"), "--data", &p("dataset.bin"), "--split", &p("split.csv")],
            &["--new-data", &format!("{fx_s}/dataset.bin"), "--epochs", "1", "--replay", "20"],
        ]
        .concat(),
    );
    assert!(t_out.contains("relative change on test2"), "{t_out}");
    assert_eq!(std::fs::read_to_string(p("transfer_eval.csv")).unwrap().lines().count(), 5);

    let pred_args = ["predict", "--model", &p("transfer.weights"), "--ae", &p("ae.weights")];
    ok(d, &[&pred_args[..], &["--key", "00231121", "--thickness", "0.5", "--rate", "1000"]].concat());
    let csv = std::fs::read_to_string(p("prediction_00231121.csv")).unwrap();
    assert_eq!(csv.lines().count(), 51);
    let curves = concat!(env!("CARGO_MANIFEST_DIR"), "/../pipeline/fixtures/ring.curves");
    ok(d, &[&pred_args[..], &["--curves", curves, "--thickness", "0.4", "--rate", "300"]].concat());
    assert!(d.join("prediction_ring.csv").exists());
    let o = lattice(d, &[&pred_args[..], &["--key", "00231121", "--thickness", "-1", "--rate", "1000"]].concat());
    assert_eq!(o.status.code(), Some(2));

    let o = lattice(d, &["eval", "--model", &p("ae.weights"), "--data", &p("dataset.bin")]);
    assert_eq!(o.status.code(), Some(1));
}
