//! One pipeline per experiment kind, writing into an [`Artifacts`] set.

use std::path::{Path, PathBuf};
use std::time::Instant;

use num_complex::Complex64;
use serde_json::json;

use sparseloc::disorder::{DisorderModel, Law};
use sparseloc::dynamics::{
    bessel_kernel, cook_integrand, delta, log_spaced, sparseness_integral,
    verify_offdiagonal_decay, verify_time_decay, CookOptions, DecayProbe, Propagator, Verdict,
};
use sparseloc::lattice::{Cube, Site, SiteSet};
use sparseloc::operators::{
    fourier_coefficients, kernel_decay_check, kernel_from_symbol, GeneralSymbol, KernelOperator,
    SymbolSpec,
};
use sparseloc::resolvent::{
    am_uniform_bound, decay_rate_fit_rows, estimate_decoupling, fractional_moment_estimate,
    simon_wolff_proxy, theorem2_cube_with, DecouplingEstimate, DecouplingSearch, DistanceRow,
    GreenQuery, SiteProfile,
};
use sparseloc::spectra::{mobility_edge_scan, ScanOptions};
use sparseloc::Error;

use crate::config::*;
use crate::output::{
    failed_dir, num, opt_num, sha256_hex, Artifacts, RunManifest, Status, Table, ARTIFACT_VERSION,
};
use crate::CliError;

/// A module error together with the pipeline step that raised it.
#[derive(Clone, Debug, PartialEq)]
pub struct Failure {
    pub site: &'static str,
    pub error: Error,
}

pub type Step<T> = std::result::Result<T, Failure>;

fn at<T>(site: &'static str, r: sparseloc::Result<T>) -> Step<T> {
    r.map_err(|error| Failure { site, error })
}

pub const UNITARITY_TOL: f64 = 1e-8;
pub const BESSEL_TOL: f64 = 1e-8;
pub const NORM_TOL: f64 = 1e-12;
pub const FOURIER_TOL: f64 = 1e-10;

fn flag(b: bool) -> String {
    if b { "true" } else { "false" }.into()
}

fn coords(site: &Site) -> Vec<String> {
    site.coords().iter().map(|x| x.to_string()).collect()
}

fn axis_header(prefix: &str, dim: usize) -> Vec<String> {
    (1..=dim).map(|i| format!("{prefix}{i}")).collect()
}

fn offsets_box(dim: usize, r: u64) -> Vec<Site> {
    match Cube::centered(dim, r as u32) {
        Ok(c) => c.sites().collect(),
        Err(_) => Vec::new(),
    }
}

fn site_or_origin(v: &Option<Vec<i64>>, dim: usize) -> Site {
    v.as_ref()
        .map(|c| Site::new(c.iter().copied()))
        .unwrap_or_else(|| Site::origin(dim))
}

fn state(phi: &Option<Vec<StateEntry>>, dim: usize) -> Vec<(Site, Complex64)> {
    match phi {
        Some(entries) => entries
            .iter()
            .map(|e| {
                (
                    Site::new(e.site.iter().copied()),
                    Complex64::new(e.re, e.im),
                )
            })
            .collect(),
        None => delta(Site::origin(dim)),
    }
}

/// `κ̂` for `law` at `s`, or the override.
pub fn decoupling(
    law: &Law,
    s: f64,
    kappa_hat: Option<f64>,
) -> sparseloc::Result<DecouplingEstimate> {
    match kappa_hat {
        Some(k) => DecouplingEstimate::from_user_d(s, k / (1.0 - s).powf(s)),
        None => estimate_decoupling(law, s, &DecouplingSearch::for_law(law)),
    }
}

fn profile(sup: &SupportConfig) -> SiteProfile {
    match sup.generator {
        SupportKind::All => SiteProfile::ON_ONLY,
        SupportKind::Empty => SiteProfile::OFF_ONLY,
        _ => SiteProfile::MIXED,
    }
}

fn distance_table(
    head: &[&str],
    e: f64,
    eps: f64,
    s: f64,
    lambda: f64,
    rows: &[DistanceRow],
) -> Table {
    let mut t = Table::new(head.iter().copied());
    for r in rows {
        t.push(vec![
            num(e),
            num(eps),
            num(s),
            num(lambda),
            r.distance.to_string(),
            num(r.mean),
            num(r.stderr),
            r.samples.to_string(),
        ]);
    }
    t
}

const MOMENT_HEADER: [&str; 8] = [
    "E",
    "epsilon",
    "s",
    "lambda",
    "distance",
    "mean_absG_s",
    "stderr",
    "n_samples",
];

/// Quantities derived from a valid config before any heavy compute
/// (`‖H₀‖_s`, `λ̂_s`, ...), echoed by validation.
pub fn derived_quantities(
    cfg: &ExperimentConfig,
) -> sparseloc::Result<serde_json::Map<String, serde_json::Value>> {
    let mut out = serde_json::Map::new();
    let (symbol, s, law): (&SymbolConfig, Option<f64>, Option<&LawConfig>) = match &cfg.params {
        Params::Moments(p) => (&p.symbol, Some(p.s), Some(&p.disorder.law)),
        Params::DecayFit(p) => (&p.symbol, Some(p.s), Some(&p.disorder.law)),
        Params::EdgeScan(p) => (&p.symbol, Some(p.s), Some(&p.disorder.law)),
        Params::Theorem2Cube(p) => (&p.symbol, Some(p.s), Some(&p.law)),
        Params::Norms(p) => (&p.symbol, None, None),
        Params::Kernel(p) => (&p.symbol, None, None),
        Params::Propagator(p) => (&p.symbol, None, None),
        Params::DecayCheck(p) => (&p.symbol, None, None),
        Params::Sparseness(p) => (&p.symbol, None, None),
        Params::Cook(p) => (&p.symbol, None, Some(&p.disorder.law)),
        Params::SimonWolff(p) => (&p.symbol, None, Some(&p.disorder.law)),
        Params::Thresholds(p) => (&p.symbol, None, Some(&p.law)),
    };
    let kernel = kernel_from_symbol(&symbol.spec()?)?;
    out.insert("h0_norm_1".into(), kernel.s_norm(1.0)?.into());
    if let Some(s) = s {
        out.insert("h0_norm_s".into(), kernel.s_norm(s)?.into());
        if let Some(law) = law {
            let kappa = match &cfg.params {
                Params::Theorem2Cube(p) => p.kappa_hat,
                _ => None,
            };
            let dec = decoupling(&law.law()?, s, kappa)?;
            out.insert("kappa_hat".into(), dec.kappa_hat.into());
            out.insert(
                "lambda_hat_s".into(),
                dec.lambda_threshold(&kernel, s)?.into(),
            );
        }
    }
    Ok(out)
}

/// Run the pipeline of `cfg`, filling `art`. On failure `art` keeps what was
/// produced before the failing step.
pub fn execute(cfg: &ExperimentConfig, art: &mut Artifacts) -> Step<()> {
    art.text("config.json", cfg.canonical_json() + "\n");
    match &cfg.params {
        Params::Norms(p) => norms(p, art),
        Params::Kernel(p) => kernel(p, art),
        Params::Propagator(p) => propagator(p, art),
        Params::DecayCheck(p) => decay_check(p, art),
        Params::Sparseness(p) => sparseness(p, cfg.seed, art),
        Params::Cook(p) => cook(p, cfg.seed, art),
        Params::Moments(p) => moments(p, cfg.seed, art),
        Params::DecayFit(p) => decay_fit(p, cfg.seed, art),
        Params::SimonWolff(p) => simon_wolff(p, cfg.seed, art),
        Params::Thresholds(p) => thresholds(p, art),
        Params::EdgeScan(p) => edge_scan(p, cfg.seed, art),
        Params::Theorem2Cube(p) => theorem2(p, cfg.seed, art),
    }
}

fn symbol_kernel(sym: &SymbolConfig) -> Step<(SymbolSpec<f64>, KernelOperator<f64>)> {
    let spec = at("symbol", sym.spec())?;
    let kernel = at("symbol", kernel_from_symbol(&spec))?;
    Ok((spec, kernel))
}

fn norms(p: &NormsParams, art: &mut Artifacts) -> Step<()> {
    let (_, kernel) = symbol_kernel(&p.symbol)?;
    let mut t = Table::new(["s", "s_norm", "s_norm_pow", "closed_form", "rel_error"]);
    let mut worst: Option<f64> = None;
    for &s in &p.s {
        let v = at("s_norm", kernel.s_norm(s))?;
        let vp = at("s_norm", kernel.s_norm_pow(s))?;
        let closed = p.symbol.closed_form_norm(s);
        let rel = closed.map(|c| ((v - c) / c).abs());
        if let Some(r) = rel {
            worst = Some(worst.map_or(r, |w: f64| w.max(r)));
        }
        t.push(vec![num(s), num(v), num(vp), opt_num(closed), opt_num(rel)]);
    }
    art.csv("norms.csv", &t);
    if let Some(w) = worst {
        art.derive("max_rel_error", w);
        art.verdict("closed_form", w < NORM_TOL);
    }
    Ok(())
}

fn kernel(p: &KernelParams, art: &mut Artifacts) -> Step<()> {
    let (spec, kernel) = symbol_kernel(&p.symbol)?;
    let dim = spec.dim();
    let symbol = GeneralSymbol::new(dim, |th: &[f64]| spec.value(th));
    let grid = at("fourier", fourier_coefficients(&symbol, 1e-12))?;
    let offsets = offsets_box(dim, p.max_offset);
    let rows = at(
        "decay_envelope",
        kernel_decay_check(&symbol, &offsets, None),
    )?;
    let mut head = axis_header("d", dim);
    head.extend(["exact", "fourier", "abs_error", "decay_bound", "decay_pass"].map(String::from));
    let mut t = Table::new(head);
    let mut worst = 0.0f64;
    for (d, row) in offsets.iter().zip(&rows) {
        let exact = kernel.amplitude(d);
        let approx = grid.get(d);
        let err = (exact - approx).abs();
        worst = worst.max(err);
        let mut r = coords(d);
        r.extend([
            num(exact),
            num(approx),
            num(err),
            num(row.bound),
            flag(row.pass),
        ]);
        t.push(r);
    }
    art.csv("kernel.csv", &t);
    art.derive("max_abs_error", worst);
    art.verdict("fourier_match", worst <= FOURIER_TOL);
    art.verdict("decay_envelope", rows.iter().all(|r| r.pass));
    Ok(())
}

fn single_term(spec: &SymbolSpec<f64>) -> bool {
    spec.axes().iter().all(|a| a.len() <= 1)
}

fn propagator(p: &PropagatorParams, art: &mut Artifacts) -> Step<()> {
    let (spec, _) = symbol_kernel(&p.symbol)?;
    let dim = spec.dim();
    let offsets = offsets_box(dim, p.max_offset);
    let mut head = vec!["t".to_string()];
    head.extend(axis_header("d", dim));
    head.extend(["re", "im", "abs"].map(String::from));
    let mut kt = Table::new(head);
    let mut ut = Table::new(["t", "sum_sq", "deviation"]);
    let mut bt = Table::new(["t", "max_abs_error"]);
    let (mut worst_u, mut worst_b) = (0.0f64, 0.0f64);
    let bessel = single_term(&spec);
    for &t in &p.t {
        let prop = at("propagator", Propagator::new(&spec, t, p.max_offset))?;
        let mut berr = 0.0f64;
        for d in &offsets {
            let k = prop.kernel(d.coords());
            let mut r = vec![num(t)];
            r.extend(coords(d));
            r.extend([num(k.re), num(k.im), num(k.norm())]);
            kt.push(r);
            if bessel {
                let b = at("bessel", bessel_kernel(&spec, t, d))?;
                berr = berr.max((k - b).norm());
            }
        }
        let sum_sq: f64 = (0..dim)
            .map(|i| {
                let a = prop.axis(i);
                (-a.reach()..=a.reach())
                    .map(|d| a.get(d).norm_sqr())
                    .sum::<f64>()
            })
            .product();
        worst_u = worst_u.max((sum_sq - 1.0).abs());
        ut.push(vec![num(t), num(sum_sq), num(sum_sq - 1.0)]);
        if bessel {
            worst_b = worst_b.max(berr);
            bt.push(vec![num(t), num(berr)]);
        }
    }
    art.csv("kernel.csv", &kt);
    art.csv("unitarity.csv", &ut);
    art.verdict("unitarity", worst_u <= UNITARITY_TOL);
    art.derive("max_unitarity_deviation", worst_u);
    if bessel {
        art.csv("bessel.csv", &bt);
        art.verdict("bessel_match", worst_b < BESSEL_TOL);
        art.derive("max_bessel_error", worst_b);
    }
    Ok(())
}

fn decay_check(p: &DecayCheckParams, art: &mut Artifacts) -> Step<()> {
    let (spec, _) = symbol_kernel(&p.symbol)?;
    let rep = at(
        "offdiagonal",
        verify_offdiagonal_decay(&spec, p.t, p.d_lo, p.d_hi),
    )?;
    let mut t = Table::new(["distance", "amplitude", "bound", "pass"]);
    for r in &rep.rows {
        t.push(vec![
            r.distance.to_string(),
            num(r.amplitude),
            num(r.bound),
            flag(r.pass),
        ]);
    }
    art.csv("offdiagonal.csv", &t);
    art.derive("first_admitted", rep.first_admitted);
    art.derive("c", rep.c);
    art.derive("h_prime_sup", rep.h_prime_sup);
    art.verdict("offdiagonal", rep.pass);
    if let Some(tc) = &p.time {
        let grid = log_spaced(tc.t_lo, tc.t_hi, tc.points);
        let max = at(
            "time_decay",
            verify_time_decay(&spec, &grid, DecayProbe::MaxOverOffsets),
        )?;
        let fixed = at(
            "time_decay",
            verify_time_decay(&spec, &grid, DecayProbe::Offset(tc.offset)),
        )?;
        let mut tt = Table::new(["t", "axis", "max_over_offsets", "offset_envelope"]);
        for i in 0..spec.dim() {
            for (j, &time) in grid.iter().enumerate() {
                tt.push(vec![
                    num(time),
                    i.to_string(),
                    num(max.values[i][j]),
                    num(fixed.values[i][j]),
                ]);
            }
        }
        art.csv("time_decay.csv", &tt);
        art.json(
            "time_fit.json",
            &json!({
                "max_over_offsets": {
                    "axis_slopes": max.axis_slopes,
                    "axis_targets": max.axis_targets,
                    "total_slope": max.total_slope,
                    "total_target": max.total_target,
                },
                "offset": tc.offset,
                "offset_envelope": {
                    "axis_slopes": fixed.axis_slopes,
                    "axis_targets": fixed.axis_targets,
                    "total_slope": fixed.total_slope,
                    "total_target": fixed.total_target,
                },
            }),
        );
        art.verdict("time_decay_max", max.pass);
        art.verdict("time_decay_offset", fixed.pass);
    }
    Ok(())
}

fn sparseness(p: &SparsenessParams, seed: u64, art: &mut Artifacts) -> Step<()> {
    let (spec, _) = symbol_kernel(&p.symbol)?;
    let cube = at("cube", Cube::centered(spec.dim(), p.half_side))?;
    let set = at("support", p.support.sparse(&cube, seed))?;
    art.text("support.txt", set.to_text());
    let violations = set.centered_violations();
    art.verdict("support_cap", violations.is_empty());
    let phi = state(&p.phi, spec.dim());
    let res = at(
        "sparseness_integral",
        sparseness_integral(&spec, &set, &phi, p.t_max, p.gamma),
    )?;
    let mut st = Table::new(["t", "c_t"]);
    for (t, c) in &res.samples {
        st.push(vec![num(*t), num(*c)]);
    }
    art.csv("samples.csv", &st);
    let mut wt = Table::new(["lo", "hi", "integral", "error", "partial"]);
    for w in &res.windows {
        wt.push(vec![
            num(w.lo),
            num(w.hi),
            num(w.integral),
            num(w.error),
            flag(w.partial),
        ]);
    }
    art.csv("windows.csv", &wt);
    art.json(
        "summary.json",
        &json!({
            "support_size": set.len(),
            "centered_violations": violations,
            "ratios": res.ratios,
            "head_bound": res.head_bound,
            "tail_bound": res.tail_bound,
            "step": res.step,
            "total": res.total(),
            "verdict": res.verdict.name(),
        }),
    );
    art.text(
        "plot.gp",
        "set datafile separator ','\nset logscale xy\nset xlabel 't'\nset ylabel 'c(t)'\nplot 'samples.csv' every ::1 using 1:2 with lines title 'c(t)'\n".into(),
    );
    art.derive("support_size", set.len());
    art.verdict("converging", res.verdict == Verdict::Converging);
    Ok(())
}

fn cook(p: &CookParams, seed: u64, art: &mut Artifacts) -> Step<()> {
    let (spec, _) = symbol_kernel(&p.symbol)?;
    let cube = at("cube", Cube::centered(spec.dim(), p.half_side))?;
    let set = at("support", p.support.sparse(&cube, seed))?;
    let model = at("disorder", p.disorder.model(seed))?;
    let phi = state(&p.phi, spec.dim());
    let rows = at(
        "cook_integrand",
        cook_integrand(
            &spec,
            &set,
            &model,
            &phi,
            &p.t,
            CookOptions { samples: p.samples },
        ),
    )?;
    let mut t = Table::new([
        "t",
        "bound",
        "q10",
        "median",
        "q90",
        "mean_sq",
        "mean_sq_stderr",
        "expected_sq",
        "median_ok",
        "identity_ok",
    ]);
    for r in &rows {
        t.push(vec![
            num(r.t),
            num(r.bound),
            num(r.q10),
            num(r.median),
            num(r.q90),
            num(r.mean_sq),
            num(r.mean_sq_stderr),
            num(r.expected_sq),
            flag(r.median_ok),
            flag(r.identity_ok),
        ]);
    }
    art.csv("cook.csv", &t);
    art.verdict("median_below_bound", rows.iter().all(|r| r.median_ok));
    art.verdict("second_moment_identity", rows.iter().all(|r| r.identity_ok));
    Ok(())
}

struct Volume {
    kernel: KernelOperator<f64>,
    cube: Cube,
    support: SiteSet,
    model: DisorderModel,
    source: Site,
}

fn volume(
    symbol: &SymbolConfig,
    half_side: u32,
    sup: &SupportConfig,
    disorder: &DisorderConfig,
    source: &Option<Vec<i64>>,
    seed: u64,
) -> Step<Volume> {
    let (spec, kernel) = symbol_kernel(symbol)?;
    let cube = at("cube", Cube::centered(spec.dim(), half_side))?;
    let support = at("support", sup.sites(&cube, seed))?;
    let model = at("disorder", disorder.model(seed))?;
    Ok(Volume {
        kernel,
        source: site_or_origin(source, spec.dim()),
        cube,
        support,
        model,
    })
}

fn moments(p: &MomentsParams, seed: u64, art: &mut Artifacts) -> Step<()> {
    let v = volume(
        &p.symbol,
        p.half_side,
        &p.support,
        &p.disorder,
        &p.source,
        seed,
    )?;
    let law = at("disorder", p.disorder.law.law())?;
    let dec = at("decoupling", decoupling(&law, p.s, None))?;
    art.derive("h0_norm_s", at("s_norm", v.kernel.s_norm(p.s))?);
    art.derive("kappa_hat", dec.kappa_hat);
    art.derive(
        "lambda_hat_s",
        at("decoupling", dec.lambda_threshold(&v.kernel, p.s))?,
    );
    let q = GreenQuery {
        energy: p.energy,
        epsilon: p.epsilon,
        s: p.s,
        source: v.source.clone(),
        volume: v.cube.clone(),
        realizations: p.realizations,
    };
    let est = at(
        "fractional_moments",
        fractional_moment_estimate(&q, &v.kernel, &v.support, &v.model),
    )?;
    let lambda = est.lambda;
    art.csv(
        "moments.csv",
        &distance_table(
            &MOMENT_HEADER,
            p.energy,
            p.epsilon,
            p.s,
            lambda,
            &est.distance_rows(),
        ),
    );
    art.csv(
        "interior.csv",
        &distance_table(
            &MOMENT_HEADER,
            p.energy,
            p.epsilon,
            p.s,
            lambda,
            &est.interior_rows(),
        ),
    );
    let dim = v.cube.dim();
    let mut head = axis_header("m", dim);
    head.extend(["mean_absG_s", "stderr", "on_support"].map(String::from));
    let mut st = Table::new(head);
    let am = if p.check_am_bound {
        Some(at("am_bound", am_uniform_bound(lambda, p.s))?)
    } else {
        None
    };
    let mut worst_excess = f64::NEG_INFINITY;
    let source_on = v.support.contains(&v.source);
    for (m, stats) in v.cube.sites().zip(est.per_site()) {
        let on = v.support.contains(&m);
        if let (Some(b), true, true) = (am, on, source_on) {
            worst_excess = worst_excess.max(stats.mean() - b - 2.0 * stats.stderr());
        }
        let mut r = coords(&m);
        r.extend([num(stats.mean()), num(stats.stderr()), flag(on)]);
        st.push(r);
    }
    art.csv("sites.csv", &st);
    art.derive("row_sum_mean", est.row_sum().mean());
    art.derive("row_sum_stderr", est.row_sum().stderr());
    art.derive("max_residual", est.max_residual());
    art.text(
        "plot.gp",
        "set datafile separator ','\nset logscale y\nset xlabel 'distance'\nset ylabel 'E|G|^s'\nplot 'interior.csv' every ::1 using 5:6 with linespoints title 'interior'\n".into(),
    );
    if let Some(b) = am {
        art.derive("am_bound", b);
        art.derive("am_worst_excess", worst_excess);
        art.verdict("am_uniform_bound", source_on && worst_excess <= 0.0);
    }
    Ok(())
}

fn decay_fit(p: &DecayFitParams, seed: u64, art: &mut Artifacts) -> Step<()> {
    let v = volume(
        &p.symbol,
        p.half_side,
        &p.support,
        &p.disorder,
        &p.source,
        seed,
    )?;
    let k_s = match p.k_s {
        Some(k) => k,
        None => {
            let law = at("disorder", p.disorder.law.law())?;
            let dec = at("decoupling", decoupling(&law, p.s, None))?;
            art.derive("kappa_hat", dec.kappa_hat);
            art.derive(
                "lambda_hat_s",
                at("decoupling", dec.lambda_threshold(&v.kernel, p.s))?,
            );
            at(
                "k_s",
                dec.k_s_factor(
                    &v.kernel,
                    p.energy,
                    v.model.lambda,
                    p.s,
                    profile(&p.support),
                ),
            )?
        }
    };
    art.derive("k_s", k_s);
    art.derive("log_k_s", k_s.ln());
    let q = GreenQuery {
        energy: p.energy,
        epsilon: p.epsilon,
        s: p.s,
        source: v.source.clone(),
        volume: v.cube.clone(),
        realizations: p.realizations,
    };
    let est = at(
        "fractional_moments",
        fractional_moment_estimate(&q, &v.kernel, &v.support, &v.model),
    )?;
    let rows = est.interior_rows();
    let mut t = Table::new(["distance", "mean", "stderr", "n_samples", "used"]);
    for r in &rows {
        let used = r.mean > 0.0 && r.mean.is_finite() && r.mean > 10.0 * r.stderr;
        t.push(vec![
            r.distance.to_string(),
            num(r.mean),
            num(r.stderr),
            r.samples.to_string(),
            flag(used),
        ]);
    }
    art.csv("decay.csv", &t);
    let fit = at("decay_fit", decay_rate_fit_rows(&rows, k_s))?;
    art.json(
        "fit.json",
        &json!({
            "rate": fit.rate,
            "intercept": fit.intercept,
            "bins_used": fit.bins_used,
            "k_s": k_s,
            "log_k_s": k_s.ln(),
            "pass": fit.pass,
        }),
    );
    art.derive("rate", fit.rate);
    art.verdict("decay_rate", fit.pass);
    Ok(())
}

fn simon_wolff(p: &SimonWolffParams, seed: u64, art: &mut Artifacts) -> Step<()> {
    let v = volume(
        &p.symbol,
        p.half_side,
        &p.support,
        &p.disorder,
        &p.source,
        seed,
    )?;
    let q = GreenQuery {
        energy: p.energy,
        epsilon: p.ladder[0],
        s: 0.5,
        source: v.source.clone(),
        volume: v.cube.clone(),
        realizations: p.realizations,
    };
    let rows = at(
        "simon_wolff",
        simon_wolff_proxy(&q, &v.kernel, &v.support, &v.model, &p.ladder),
    )?;
    let mut t = Table::new(["E", "epsilon", "mean_sum_G2", "stderr", "trend_ratio"]);
    for r in &rows {
        t.push(vec![
            num(p.energy),
            num(r.epsilon),
            num(r.mean_sum_g2),
            num(r.stderr),
            num(r.trend_ratio),
        ]);
    }
    art.csv("simon_wolff.csv", &t);
    let pass = match p.expect {
        Regime::Extended => rows.iter().all(|r| r.trend_ratio >= 2.0),
        Regime::Localized => rows.iter().all(|r| r.trend_ratio <= 1.2),
    };
    art.verdict(
        match p.expect {
            Regime::Extended => "extended_trend",
            Regime::Localized => "localized_trend",
        },
        pass,
    );
    Ok(())
}

fn thresholds(p: &ThresholdsParams, art: &mut Artifacts) -> Step<()> {
    let (_, kernel) = symbol_kernel(&p.symbol)?;
    let law = at("law", p.law.law())?;
    let mut t = Table::new([
        "s",
        "kappa_hat",
        "d_statement",
        "d_proof",
        "h0_norm_s",
        "lambda_threshold",
        "am_bound",
        "k_s",
    ]);
    for &s in &p.s {
        let dec = at("decoupling", decoupling(&law, s, p.kappa_hat))?;
        let norm = at("s_norm", kernel.s_norm(s))?;
        let lam = at("decoupling", dec.lambda_threshold(&kernel, s))?;
        let am = match p.lambda {
            Some(l) => Some(at("am_bound", am_uniform_bound(l, s))?),
            None => None,
        };
        let k_s = match (p.energy, p.lambda) {
            (Some(e), Some(l)) => Some(at(
                "k_s",
                dec.k_s_factor(&kernel, e, l, s, SiteProfile::MIXED),
            )?),
            _ => None,
        };
        t.push(vec![
            num(s),
            num(dec.kappa_hat),
            num(dec.d_statement),
            num(dec.d_proof),
            num(norm),
            num(lam),
            opt_num(am),
            opt_num(k_s),
        ]);
    }
    art.csv("thresholds.csv", &t);
    Ok(())
}

fn edge_scan(p: &EdgeScanParams, seed: u64, art: &mut Artifacts) -> Step<()> {
    let v = volume(&p.symbol, p.half_side, &p.support, &p.disorder, &None, seed)?;
    let options = ScanOptions {
        bin_width: p.bin_width,
        ..ScanOptions::default()
    };
    let scan = at(
        "edge_scan",
        mobility_edge_scan(
            &v.kernel,
            &v.support,
            &v.model,
            &v.cube,
            p.realizations,
            p.s,
            options,
        ),
    )?;
    let mut t = Table::new(["bin_lo", "bin_hi", "count", "median_ipr", "r_stat"]);
    for b in &scan.bins {
        t.push(vec![
            num(b.lo),
            num(b.hi),
            b.count.to_string(),
            opt_num(b.median_ipr),
            opt_num(b.r_stat),
        ]);
    }
    art.csv("bins.csv", &t);
    art.json(
        "markers.json",
        &json!({ "h0_norm_1": scan.h0_norm_1, "h0_norm_s": scan.h0_norm_s, "s": scan.s }),
    );
    art.derive("support_size", v.support.len());
    art.derive("total_count", scan.total_count());
    if let Some(c) = &p.contrast {
        let threshold = scan.h0_norm_1 + c.offset;
        match scan.contrast(threshold) {
            Some(ct) => {
                art.json(
                    "contrast.json",
                    &json!({
                        "threshold": ct.threshold,
                        "center_median": ct.center_median,
                        "outer_min_median": ct.outer_min_median,
                        "outer_bins": ct.outer_bins,
                        "ratio": ct.ratio,
                        "min_ratio": c.min_ratio,
                    }),
                );
                art.derive("contrast_ratio", ct.ratio);
                art.verdict("ipr_contrast", ct.ratio >= c.min_ratio);
            }
            None => art.verdict("ipr_contrast", false),
        }
    }
    Ok(())
}

fn theorem2(p: &Theorem2Params, seed: u64, art: &mut Artifacts) -> Step<()> {
    let (spec, kernel) = symbol_kernel(&p.symbol)?;
    let cube = at("cube", Cube::centered(spec.dim(), p.half_side))?;
    let support = at("support", p.support.sites(&cube, seed))?;
    let law = at("law", p.law.law())?;
    let dec = at("decoupling", decoupling(&law, p.s, p.kappa_hat))?;
    let norm_pow = at("s_norm", kernel.s_norm_pow(p.s))?;
    let center = site_or_origin(&p.center, spec.dim());
    let res = at(
        "theorem2_cube",
        theorem2_cube_with(&center, p.s, p.gamma, norm_pow, dec.kappa_hat, &support),
    )?;
    let mut head = axis_header("m", spec.dim());
    head.extend(["distance", "ratio", "dominates"].map(String::from));
    let mut t = Table::new(head);
    for m in &support {
        let ratio = (1.0 + m.max_norm() as f64).powf(p.gamma * p.s) * dec.kappa_hat / norm_pow;
        let mut r = coords(m);
        r.extend([
            center.distance(m).to_string(),
            num(ratio),
            flag(ratio > 1.0),
        ]);
        t.push(r);
    }
    art.csv("sites.csv", &t);
    art.json(
        "summary.json",
        &json!({
            "radius": res.radius,
            "b": if res.b_infinite { None } else { Some(res.b) },
            "b_infinite": res.b_infinite,
            "bad_sites": res.bad_sites,
            "kappa_hat": dec.kappa_hat,
            "norm_pow": norm_pow,
        }),
    );
    art.derive("radius", res.radius);
    Ok(())
}

/// What a finished run left on disk.
#[derive(Clone, Debug)]
pub struct RunReport {
    pub dir: PathBuf,
    pub manifest: RunManifest,
    pub artifacts: Artifacts,
}

/// Execute on a pool of `threads` workers.
pub fn execute_with_threads(
    cfg: &ExperimentConfig,
    threads: usize,
) -> Result<(Artifacts, Step<()>), CliError> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| CliError::Io(std::io::Error::other(e)))?;
    Ok(pool.install(|| {
        let mut art = Artifacts::new();
        let r = execute(cfg, &mut art);
        (art, r)
    }))
}

/// Run `cfg`, write artifacts and manifest atomically under `out` (or under
/// `failed/` next to it on a module error).
pub fn run_experiment(
    cfg: &ExperimentConfig,
    out: &Path,
    threads: usize,
) -> Result<RunReport, CliError> {
    crate::config::check_config(cfg).map_err(CliError::Config)?;
    let start = Instant::now();
    let (artifacts, result) = execute_with_threads(cfg, threads)?;
    let wall = start.elapsed().as_secs_f64();
    let mut manifest = RunManifest {
        artifact_version: ARTIFACT_VERSION.into(),
        kind: cfg.kind().name().into(),
        config_hash: sha256_hex(cfg.canonical_json().as_bytes()),
        seed: cfg.seed,
        threads,
        wall_time_s: wall,
        files: RunManifest::file_entries(&artifacts),
        verdicts: artifacts.verdicts.clone(),
        derived: artifacts.derived.clone(),
        status: if artifacts.all_pass() {
            Status::Pass
        } else {
            Status::VerdictFailure
        },
        error: None,
        failure_site: None,
    };
    match result {
        Ok(()) => {
            crate::output::write_atomic(out, &artifacts, &manifest)?;
            Ok(RunReport {
                dir: out.to_path_buf(),
                manifest,
                artifacts,
            })
        }
        Err(f) => {
            manifest.status = Status::Failed;
            manifest.error = Some(f.error.to_string());
            manifest.failure_site = Some(f.site.into());
            let dir = failed_dir(out);
            crate::output::write_atomic(&dir, &artifacts, &manifest)?;
            Err(CliError::Numerical {
                site: f.site,
                error: f.error,
                dir,
            })
        }
    }
}
