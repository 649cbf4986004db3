//! First-run baselines for Monte Carlo and quadrature outputs with pinned seeds.

use sparseloc_cli::output::Artifacts;
use sparseloc_cli::run::{derived_quantities, execute};
use sparseloc_cli::{validate_config, verify, ExperimentConfig};

const REL: f64 = 1e-9;

fn exec(cfg: &ExperimentConfig) -> Artifacts {
    let mut art = Artifacts::new();
    execute(cfg, &mut art)
        .map_err(|f| format!("{}: {}", f.site, f.error))
        .unwrap();
    art
}

fn derived(art: &Artifacts, key: &str) -> f64 {
    art.derived[key].as_f64().unwrap()
}

fn pinned(name: &str, got: f64, want: f64) {
    println!("{name} = {got:.16e}");
    assert!(
        ((got - want) / want).abs() < REL,
        "{name}: got {got:.16e}, baseline {want:.16e}"
    );
}

const MOMENTS: &str = r#"{"kind":"moments","seed":3,"params":{"symbol":{"dim":1},"half_side":60,
    "support":{"generator":"bernoulli_thinned","alpha":0.5},
    "disorder":{"law":{"name":"uniform","params":[-1,1]},"lambda":30},
    "energy":5,"epsilon":0.001,"s":0.5,"realizations":100,"check_am_bound":true}}"#;

#[test]
fn moments_desk_preset() {
    let cfg = validate_config(MOMENTS, None, None).unwrap();
    let art = exec(&cfg);
    assert!(art.all_pass());
    pinned(
        "row_sum_mean",
        derived(&art, "row_sum_mean"),
        9.6965546315972850e-1,
    );
    pinned(
        "row_sum_stderr",
        derived(&art, "row_sum_stderr"),
        8.6575523557225670e-2,
    );
    pinned(
        "am_worst_excess",
        derived(&art, "am_worst_excess"),
        -3.1713127538193581e-1,
    );
}

#[test]
fn localization_threshold_uniform_half() {
    let cfg = verify::moments_config(5.0);
    let d = derived_quantities(&cfg).unwrap();
    pinned(
        "kappa_hat",
        d["kappa_hat"].as_f64().unwrap(),
        6.1051999469828633e-1,
    );
    pinned(
        "lambda_hat_s",
        d["lambda_hat_s"].as_f64().unwrap(),
        1.0731494511038784e1,
    );
}

#[test]
fn decay_fit_rate() {
    let art = exec(&verify::decay_fit_config());
    pinned("rate", derived(&art, "rate"), -1.0498813175902399e0);
}

#[test]
fn sparseness_window_ratios() {
    let art = exec(&verify::sparseness_config(0, None));
    let summary: serde_json::Value =
        serde_json::from_slice(art.file("summary.json").unwrap()).unwrap();
    let ratios: Vec<f64> = summary["ratios"]
        .as_array()
        .unwrap()
        .iter()
        .map(|v| v.as_f64().unwrap())
        .collect();
    let want = [0.5629079053221645, 0.567468851055371];
    assert_eq!(ratios.len(), want.len());
    for (i, (&g, &w)) in ratios.iter().zip(&want).enumerate() {
        pinned(&format!("ratio[{i}]"), g, w);
    }
}

#[test]
fn edge_contrast() {
    let art = exec(&verify::edge_scan_config());
    pinned(
        "contrast_ratio",
        derived(&art, "contrast_ratio"),
        3.2620072258195769e1,
    );
}
