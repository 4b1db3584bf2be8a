//! The `decenteq` binary: exit codes, outputs and reproducibility.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use tempfile::TempDir;

const SMALL_MC: &str = r#"
schema_version = 1
name = "small"
mode = "ser_mc"
seed = 5
trials = 60
series = ["lama-pd", "lama-fd", "lmmse-fd", "lama-pd@12x4"]

[system]
antennas = 24
users = 4
clusters = 3

[sweep]
axis = "snr_db"
values = [0.0, 4.0]
"#;

fn decenteq(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_decenteq"))
        .args(args)
        .env_remove("DECENTEQ_THREADS")
        .output()
        .expect("binary runs")
}

fn write(dir: &Path, name: &str, text: &str) -> PathBuf {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p
}

fn figs() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../figs")
}

/// Runs a recipe and returns the written CSV.
fn run_csv(cfg: &Path, out: &Path, extra: &[&str]) -> String {
    let mut args = vec!["run", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()];
    args.extend_from_slice(extra);
    let o = decenteq(&args);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    std::fs::read_to_string(out).unwrap()
}

fn body(csv: &str) -> String {
    csv.lines()
        .filter(|l| !l.starts_with('#'))
        .collect::<Vec<_>>()
        .join("\n")
}

#[test]
fn shipped_recipes_validate() {
    for name in ["fig1.cfg", "fig3a.cfg", "fig3b.cfg", "fig3c.cfg"] {
        let p = figs().join(name);
        let o = decenteq(&["validate", p.to_str().unwrap()]);
        assert!(o.status.success(), "{name}: {}", String::from_utf8_lossy(&o.stderr));
        assert!(String::from_utf8_lossy(&o.stdout).contains("ok"));
    }
}

#[test]
fn results_do_not_depend_on_thread_count() {
    let dir = TempDir::new().unwrap();
    let cfg = write(dir.path(), "small.cfg", SMALL_MC);
    let one = run_csv(&cfg, &dir.path().join("one.csv"), &["--threads", "1"]);
    let three = run_csv(&cfg, &dir.path().join("three.csv"), &["--threads", "3"]);
    assert_eq!(one, three);
    assert!(one.contains("# spec_sha256: ") && one.contains("# seed: 5"));
}

#[test]
fn seed_override_is_reproducible() {
    let dir = TempDir::new().unwrap();
    let cfg = write(dir.path(), "small.cfg", SMALL_MC);
    let a = run_csv(&cfg, &dir.path().join("a.csv"), &["--seed", "7"]);
    let b = run_csv(&cfg, &dir.path().join("b.csv"), &["--seed", "7"]);
    let c = run_csv(&cfg, &dir.path().join("c.csv"), &["--seed", "8"]);
    assert_eq!(a, b);
    assert!(a.contains("# seed: 7"));
    assert_ne!(body(&a), body(&c));
}

#[test]
fn svg_format_writes_a_plot() {
    let dir = TempDir::new().unwrap();
    let cfg = write(dir.path(), "small.cfg", SMALL_MC);
    let out = dir.path().join("plot.csv");
    run_csv(&cfg, &out, &["--format", "svg", "--trials", "10"]);
    let svg = std::fs::read_to_string(dir.path().join("plot.svg")).unwrap();
    assert!(svg.starts_with("<svg"));
}

#[test]
fn rate_recipe_prints_its_table() {
    let dir = TempDir::new().unwrap();
    let out = dir.path().join("fig1.csv");
    let o = decenteq(&["run", figs().join("fig1.cfg").to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert!(o.status.success());
    let stdout = String::from_utf8_lossy(&o.stdout);
    assert!(stdout.starts_with("snr_db,awgn_rate,"));
    assert!(stdout.contains("(16 rows)"));
}

#[test]
fn configuration_errors_exit_with_one() {
    let dir = TempDir::new().unwrap();
    let bad_con = write(
        dir.path(),
        "bad.cfg",
        &SMALL_MC.replace("clusters = 3", "clusters = 3\nconstellation = \"8psk\""),
    );
    let o = decenteq(&["validate", bad_con.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("8psk"));

    let missing = dir.path().join("nope.cfg");
    assert_eq!(decenteq(&["run", missing.to_str().unwrap()]).status.code(), Some(1));

    let cfg = write(dir.path(), "small.cfg", SMALL_MC);
    assert_eq!(
        decenteq(&["run", cfg.to_str().unwrap(), "--trials", "0"]).status.code(),
        Some(1)
    );
    assert_eq!(decenteq(&["frobnicate"]).status.code(), Some(1));
    assert_eq!(decenteq(&["--help"]).status.code(), Some(0));
}

#[test]
fn unwritable_output_exits_with_two() {
    let dir = TempDir::new().unwrap();
    let cfg = write(dir.path(), "small.cfg", SMALL_MC);
    let blocker = write(dir.path(), "file", "");
    let out = blocker.join("x.csv");
    let o = decenteq(&["run", cfg.to_str().unwrap(), "--trials", "2", "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2), "{}", String::from_utf8_lossy(&o.stderr));
}
