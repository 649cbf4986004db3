use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use sparseloc_cli::output::RunManifest;

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_sparseloc"));
    c.env("SPARSELOC_THREADS", "2");
    c
}

fn run(kind: &str, config: &str, dir: &Path, out: &str) -> Output {
    let cfg = dir.join(format!("{out}.json"));
    fs::write(&cfg, config).unwrap();
    bin()
        .args([kind, "--config"])
        .arg(&cfg)
        .arg("--out")
        .arg(dir.join(out))
        .output()
        .unwrap()
}

fn manifest(dir: &Path) -> RunManifest {
    serde_json::from_str(&fs::read_to_string(dir.join("manifest.json")).unwrap()).unwrap()
}

const NORMS: &str = r#"{"kind":"norms","seed":1,"params":{"symbol":{"dim":2},"s":[0.3,0.5,0.9]}}"#;

#[test]
fn norms_csv_matches_closed_form() {
    let tmp = tempfile::tempdir().unwrap();
    let out = run("norms", NORMS, tmp.path(), "n");
    assert_eq!(
        out.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let csv = fs::read_to_string(tmp.path().join("n/norms.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(
        lines.next(),
        Some("s,s_norm,s_norm_pow,closed_form,rel_error")
    );
    let mut n = 0;
    for line in lines {
        let f: Vec<f64> = line.split(',').map(|x| x.parse().unwrap()).collect();
        let exact = 4f64.powf(1.0 / f[0]);
        assert!(((f[1] - exact) / exact).abs() < 1e-12);
        assert!((f[2] - 4.0).abs() < 1e-12);
        n += 1;
    }
    assert_eq!(n, 3);
    let m = manifest(&tmp.path().join("n"));
    assert_eq!(m.verdicts.get("closed_form"), Some(&true));
    assert_eq!(m.files[0].name, "config.json");
}

#[test]
fn rerun_is_byte_identical() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = r#"{"kind":"moments","seed":5,"params":{"symbol":{"dim":1},"half_side":30,
        "support":{"generator":"bernoulli_thinned","alpha":0.5},
        "disorder":{"law":{"name":"uniform","params":[-1,1]},"lambda":10},
        "energy":3,"epsilon":0.01,"s":0.5,"realizations":40}}"#;
    assert_eq!(run("moments", cfg, tmp.path(), "a").status.code(), Some(0));
    let cfg_path = tmp.path().join("a.json");
    let out = bin()
        .args(["moments", "--threads", "1", "--config"])
        .arg(&cfg_path)
        .arg("--out")
        .arg(tmp.path().join("b"))
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0));
    let (a, b) = (
        manifest(&tmp.path().join("a")),
        manifest(&tmp.path().join("b")),
    );
    assert_eq!(a.files, b.files);
    assert_eq!(a.config_hash, b.config_hash);
    assert_eq!((a.threads, b.threads), (2, 1));
    for f in &a.files {
        assert_eq!(
            fs::read(tmp.path().join("a").join(&f.name)).unwrap(),
            fs::read(tmp.path().join("b").join(&f.name)).unwrap()
        );
    }
}

#[test]
fn seed_flag_overrides_config() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tmp.path().join("n.json");
    fs::write(&cfg, NORMS).unwrap();
    let out = bin()
        .args(["norms", "--seed", "77", "--config"])
        .arg(&cfg)
        .arg("--out")
        .arg(tmp.path().join("n"))
        .output()
        .unwrap();
    assert!(out.status.success());
    assert_eq!(manifest(&tmp.path().join("n")).seed, 77);
}

#[test]
fn sparseness_in_three_dimensions_is_refused() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = r#"{"kind":"sparseness","seed":0,"params":{"symbol":{"dim":3},"half_side":40,
        "support":{"generator":"deterministic_powers","alpha":0.1},"t_max":64}}"#;
    let out = run("sparseness", cfg, tmp.path(), "s");
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(
        err.contains("2(1/3 − 1/ν)") && err.contains("empty"),
        "{err}"
    );
    assert!(!tmp.path().join("s").exists());
}

#[test]
fn bad_exponent_and_unknown_keys_are_all_reported() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = r#"{"kind":"moments","seed":1,"colour":"red","params":{"symbol":{"dim":1},"half_side":10,
        "support":{"generator":"all"},"disorder":{"law":{"name":"uniform","params":[-1,1]},"lambda":1},
        "energy":3,"epsilon":0.01,"s":1.2,"realizations":5,"sorce":[0]}}"#;
    let out = run("moments", cfg, tmp.path(), "m");
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(
        err.contains("colour") && err.contains("params.sorce"),
        "{err}"
    );
    let typo_free = cfg
        .replace(r#","colour":"red""#, "")
        .replace(r#","sorce":[0]"#, "");
    let out = run("moments", &typo_free, tmp.path(), "m");
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("s ∈ (0,1) required"));
}

#[test]
fn check_echoes_derived_quantities() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tmp.path().join("m.json");
    fs::write(
        &cfg,
        r#"{"kind":"moments","seed":1,"params":{"symbol":{"dim":1},"half_side":10,
        "support":{"generator":"all"},"disorder":{"law":{"name":"uniform","params":[-1,1]},"lambda":30},
        "energy":5,"epsilon":0.001,"s":0.5,"realizations":5}}"#,
    )
    .unwrap();
    let out = bin()
        .args(["moments", "--check", "--config"])
        .arg(&cfg)
        .output()
        .unwrap();
    assert!(out.status.success());
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert!((v["h0_norm_s"].as_f64().unwrap() - 4.0).abs() < 1e-12);
    let lam = v["lambda_hat_s"].as_f64().unwrap();
    assert!(lam > 5.0 && lam < 20.0, "{lam}");
}

#[test]
fn verdict_failure_exits_one() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = r#"{"kind":"simon_wolff","seed":2,"params":{"symbol":{"dim":1},"half_side":40,
        "support":{"generator":"all"},"disorder":{"law":{"name":"uniform","params":[-1,1]},"lambda":30},
        "energy":5,"realizations":20,"ladder":[0.1,0.01],"expect":"extended"}}"#;
    let out = run("simon_wolff", cfg, tmp.path(), "sw");
    assert_eq!(out.status.code(), Some(1));
    let m = manifest(&tmp.path().join("sw"));
    assert_eq!(m.verdicts.get("extended_trend"), Some(&false));
}

#[test]
fn module_error_keeps_partial_artifacts() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg =
        r#"{"kind":"decay_check","seed":0,"params":{"symbol":{"dim":1},"t":5,"d_lo":1,"d_hi":10}}"#;
    let out = run("decay_check", cfg, tmp.path(), "d");
    assert_eq!(out.status.code(), Some(3));
    assert!(!tmp.path().join("d").exists());
    let failed = tmp.path().join("failed/d");
    let m = manifest(&failed);
    assert_eq!(m.failure_site.as_deref(), Some("offdiagonal"));
    assert!(m.error.unwrap().contains("no distance"));
    assert!(failed.join("config.json").exists());
}

#[test]
fn kind_mismatch_is_a_config_error() {
    let tmp = tempfile::tempdir().unwrap();
    let out = run("moments", NORMS, tmp.path(), "x");
    assert_eq!(out.status.code(), Some(2));
}
