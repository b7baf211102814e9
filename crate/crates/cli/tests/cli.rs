use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use tempfile::TempDir;

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_delone"));
    for v in ["DELONE_CONFIG", "DELONE_SEED", "DELONE_TRIALS", "DELONE_OUT", "DELONE_THREADS"] {
        c.env_remove(v);
    }
    c
}

fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("configs").join(name)
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exit code")
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn write_config(dir: &Path, name: &str, text: &str) -> PathBuf {
    let p = dir.join(name);
    fs::write(&p, text).unwrap();
    p
}

fn path(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn good_scale_fixture_runs_and_is_reproducible() {
    let tmp = TempDir::new().unwrap();
    let cfg = fixture("good_scale_1d.toml");
    let a = tmp.path().join("a");
    let b = tmp.path().join("b");
    for out in [&a, &b] {
        let o = run(&["good-scale", "--config", path(&cfg), "--trials", "40", "--out", path(out)]);
        assert_eq!(code(&o), 0, "{}", stderr(&o));
    }
    let csv_a = fs::read(a.join("good-scale.csv")).unwrap();
    assert_eq!(csv_a, fs::read(b.join("good-scale.csv")).unwrap());
    assert_eq!(
        fs::read(a.join("good-scale.json")).unwrap(),
        fs::read(b.join("good-scale.json")).unwrap()
    );
    let text = String::from_utf8(csv_a).unwrap();
    assert!(text.starts_with("L,x,E,m,zeta,pair_budget"));
    assert_eq!(text.lines().count(), 2);
    let report: serde_json::Value = serde_json::from_slice(&fs::read(a.join("good-scale.json")).unwrap()).unwrap();
    assert_eq!(report["kind"], "good-scale");
    assert_eq!(report["n_trials"], 40);
    assert_eq!(report["config_hash"].as_str().unwrap().len(), 64);
}

#[test]
fn thread_count_does_not_change_results() {
    let tmp = TempDir::new().unwrap();
    let cfg = fixture("ilse_1d.toml");
    let mut csv = Vec::new();
    for t in ["1", "4"] {
        let out = tmp.path().join(t);
        let o = run(&["ilse", "--config", path(&cfg), "--threads", t, "--out", path(&out)]);
        assert_eq!(code(&o), 0, "{}", stderr(&o));
        csv.push((fs::read(out.join("ilse.csv")).unwrap(), fs::read(out.join("ilse.json")).unwrap()));
    }
    assert_eq!(csv[0], csv[1]);
}

#[test]
fn seed_override_changes_the_hash() {
    let tmp = TempDir::new().unwrap();
    let cfg = fixture("spectrum_1d.toml");
    let mut hashes = Vec::new();
    for s in ["1", "2"] {
        let out = tmp.path().join(s);
        let o = bin()
            .args(["spectrum", "--out", path(&out)])
            .env("DELONE_CONFIG", &cfg)
            .env("DELONE_SEED", s)
            .output()
            .unwrap();
        assert_eq!(code(&o), 0, "{}", stderr(&o));
        let v: serde_json::Value = serde_json::from_slice(&fs::read(out.join("spectrum.json")).unwrap()).unwrap();
        assert_eq!(v["seed"].as_u64().unwrap().to_string(), s);
        hashes.push(v["config_hash"].as_str().unwrap().to_string());
    }
    assert_ne!(hashes[0], hashes[1]);
}

#[test]
fn invalid_zeta_is_rejected() {
    let tmp = TempDir::new().unwrap();
    let text = fs::read_to_string(fixture("ilse_1d.toml")).unwrap().replace("zeta = 0.5", "zeta = 1.5");
    let cfg = write_config(tmp.path(), "bad.toml", &text);
    let out = tmp.path().join("out");
    let o = run(&["ilse", "--config", path(&cfg), "--out", path(&out)]);
    assert_eq!(code(&o), 1);
    assert!(stderr(&o).contains("zeta"), "{}", stderr(&o));
    assert!(!out.exists());
}

#[test]
fn unknown_fields_are_rejected() {
    let tmp = TempDir::new().unwrap();
    let base = fs::read_to_string(fixture("spectrum_1d.toml")).unwrap();
    for (name, text) in [
        ("top.toml", format!("colour = 3\n{base}")),
        ("params.toml", base.replace("k = 6", "k = 6\nkk = 1")),
        ("model.toml", base.replace("beta = 0.5", "beta = 0.5\nalpha = 1.0")),
    ] {
        let cfg = write_config(tmp.path(), name, &text);
        let o = run(&["spectrum", "--config", path(&cfg), "--out", path(&tmp.path().join("o"))]);
        assert_eq!(code(&o), 1, "{name}: {}", stderr(&o));
    }
}

#[test]
fn kind_mismatch_and_usage_errors_exit_one() {
    let tmp = TempDir::new().unwrap();
    let out = tmp.path().join("o");
    let o = run(&["ilse", "--config", path(&fixture("spectrum_1d.toml")), "--out", path(&out)]);
    assert_eq!(code(&o), 1);
    let o = run(&["spectrum", "--config", path(&tmp.path().join("missing.toml"))]);
    assert_eq!(code(&o), 1);
    let o = run(&["spectrum"]);
    assert_eq!(code(&o), 1);
}

#[test]
fn l_sweep_over_doubling_scales() {
    let tmp = TempDir::new().unwrap();
    let out = tmp.path().join("sweep");
    let o = run(&[
        "sweep",
        "--config",
        path(&fixture("ilse_1d.toml")),
        "--axis",
        "L",
        "--doubling",
        "10,4",
        "--trials",
        "8",
        "--out",
        path(&out),
    ]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let csv = fs::read_to_string(out.join("sweep_L.csv")).unwrap();
    let rows: Vec<&str> = csv.lines().skip(1).collect();
    assert_eq!(rows.len(), 5);
    let ls: Vec<f64> = rows.iter().map(|r| r.split(',').next().unwrap().parse().unwrap()).collect();
    assert_eq!(ls, [10.0, 20.0, 40.0, 80.0, 160.0]);
    for i in 0..5 {
        assert!(out.join("sweep_L").join(format!("{i:03}")).join("ilse.json").exists());
    }
}

#[test]
fn empty_sweep_is_an_error() {
    let tmp = TempDir::new().unwrap();
    let o = run(&[
        "sweep",
        "--config",
        path(&fixture("ilse_1d.toml")),
        "--axis",
        "L",
        "--out",
        path(&tmp.path().join("o")),
    ]);
    assert_eq!(code(&o), 1);
    assert!(stderr(&o).contains("at least one value"), "{}", stderr(&o));
}

#[test]
fn sweep_records_failures_and_continues() {
    let tmp = TempDir::new().unwrap();
    let out = tmp.path().join("o");
    // beta = 1.5 is invalid; the other two run.
    let o = run(&[
        "sweep",
        "--config",
        path(&fixture("ilse_1d.toml")),
        "--axis",
        "beta",
        "--values",
        "0.3,1.5,0.6",
        "--trials",
        "4",
        "--out",
        path(&out),
    ]);
    assert_eq!(code(&o), 1);
    let csv = fs::read_to_string(out.join("sweep_beta.csv")).unwrap();
    let codes: Vec<&str> = csv.lines().skip(1).map(|r| r.split(',').nth(1).unwrap()).collect();
    assert_eq!(codes, ["0", "1", "0"]);
}

#[test]
fn h_sweep_shows_second_order_convergence() {
    let tmp = TempDir::new().unwrap();
    let text = fs::read_to_string(fixture("spectrum_1d.toml"))
        .unwrap()
        .replace(r#"{ type = "perturbed", rho = 0.3 }"#, r#"{ type = "lattice", spacing = 1.0 }"#)
        .replace(r#"couplings = "sample""#, r#"couplings = "background""#)
        .replace("ct_gap = 1.0\n", "");
    let cfg = write_config(tmp.path(), "lattice.toml", &text);
    let out = tmp.path().join("o");
    let o = run(&[
        "sweep",
        "--config",
        path(&cfg),
        "--axis",
        "h",
        "--values",
        "0.025,0.0125,0.00625",
        "--out",
        path(&out),
    ]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let csv = fs::read_to_string(out.join("sweep_h.csv")).unwrap();
    let header: Vec<&str> = csv.lines().next().unwrap().split(',').collect();
    assert_eq!(header.iter().filter(|h| **h == "h").count(), 1);
    let col = header.iter().position(|h| *h == "richardson_ratio").unwrap();
    let last = csv.lines().last().unwrap().split(',').nth(col).unwrap();
    let ratio: f64 = last.parse().unwrap();
    assert!((3.6..=4.4).contains(&ratio), "ratio {ratio}");
}

#[test]
fn explicit_h_is_refused_for_monte_carlo_kinds() {
    let tmp = TempDir::new().unwrap();
    let text = fs::read_to_string(fixture("good_scale_1d.toml")).unwrap().replace("refine = 1", "h = 0.02");
    let cfg = write_config(tmp.path(), "h.toml", &text);
    let o = run(&["good-scale", "--config", path(&cfg), "--out", path(&tmp.path().join("o"))]);
    assert_eq!(code(&o), 1);
}

#[test]
fn shipped_fixtures_run_clean() {
    let tmp = TempDir::new().unwrap();
    for (cmd, file, stem) in [
        ("verify-delone", "verify_delone.toml", "verify-delone"),
        ("ucp1d", "ucp1d.toml", "ucp1d"),
        ("lift", "lift_1d.toml", "lift"),
        ("patterns", "patterns_2d.toml", "patterns"),
    ] {
        let out = tmp.path().join(cmd);
        let o = run(&[cmd, "--config", path(&fixture(file)), "--out", path(&out)]);
        assert_eq!(code(&o), 0, "{cmd}: {}", stderr(&o));
        let v: serde_json::Value = serde_json::from_slice(&fs::read(out.join(format!("{stem}.json"))).unwrap()).unwrap();
        assert!(v["violations"].as_array().unwrap().is_empty());
    }
}

#[test]
fn gen_writes_point_sets() {
    let tmp = TempDir::new().unwrap();
    let out = tmp.path().join("gen");
    let o = run(&["gen", "--config", path(&fixture("verify_delone.toml")), "--out", path(&out)]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    for f in ["base.txt", "extra.txt", "union.txt", "gen.json"] {
        assert!(out.join(f).exists(), "{f}");
    }
    let v: serde_json::Value = serde_json::from_slice(&fs::read(out.join("gen.json")).unwrap()).unwrap();
    assert_eq!(v["base_points"], 199);
}
