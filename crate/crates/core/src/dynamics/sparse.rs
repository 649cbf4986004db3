//! Sparseness integrals `∫ ‖A P_S e^{-itH₀} φ‖ dt`, the Cook integrand
//! `‖V_S^ω e^{-itH₀} φ‖`, and weighted tail norms of `e^{-itH₀} φ`.
//!
//! Every truncation to a finite box is certified through the kernel
//! envelope: with `(1+|m|) ≤ (1+|n|)(1+|m-n|)` and Cauchy–Schwarz,
//! `Σ_{m ∉ box} (1+|m|)^p |ψ_t(m)|² ≤ ‖φ‖₁ Σ_n |φ(n)| (1+|n|)^p · T_p(D)`
//! where `T_p(D)` bounds the weighted kernel mass beyond distance `D`.

use rayon::prelude::*;

use super::{envelope_sum, Propagator, State};
use crate::disorder::{weight_value, DisorderModel};
use crate::error::{Error, Result};
use crate::lattice::{Cube, Site, SiteSet, SparseSet};
use crate::operators::SymbolSpec;
use crate::stats::RunningStats;

/// Truncation error allowed for any certified lattice sum.
pub const TAIL_TOL: f64 = 1e-12;

/// Bound on `Σ_{|d|_∞ > D} (1+|d|_∞)^p |K_t(d)|²`, valid for every time
/// in `[-|t|, |t|]`.
pub fn kernel_weighted_tail_bound(spec: &SymbolSpec<f64>, t: f64, d: u64, p: f64) -> f64 {
    let dim = spec.dim();
    let tails: Vec<f64> = (0..dim)
        .map(|i| 2.0 * envelope_sum(spec.axis(i), t, d + 1, p, 2.0))
        .collect();
    let wholes: Vec<f64> = (0..dim)
        .map(|i| 1.0 + 2.0 * envelope_sum(spec.axis(i), t, 1, p, 2.0))
        .collect();
    (0..dim)
        .map(|i| tails[i] * (0..dim).filter(|&j| j != i).map(|j| wholes[j]).product::<f64>())
        .sum()
}

fn check_state(phi: &State, dim: usize) -> Result<()> {
    if let Some((n, _)) = phi.iter().find(|(n, _)| n.dim() != dim) {
        return Err(Error::invalid(format!("initial state site {n:?} has the wrong dimension")));
    }
    if phi.iter().any(|(_, a)| !a.is_finite()) {
        return Err(Error::invalid("initial state has non-finite amplitudes"));
    }
    Ok(())
}

/// `‖φ‖₁ Σ_n |φ(n)| (1+|n - origin|)^p`
fn state_factor(phi: &State, origin: &Site, p: f64) -> f64 {
    let l1: f64 = phi.iter().map(|(_, a)| a.norm()).sum();
    let weighted: f64 = phi
        .iter()
        .map(|(n, a)| a.norm() * (1.0 + n.distance(origin) as f64).powf(p))
        .sum();
    l1 * weighted
}

/// Refuse cap violations; certify that sites beyond the cube carry less
/// than [`TAIL_TOL`] of the weighted mass for `|t| ≤ t_max`. Returns the
/// certified bound.
fn certify_domain(spec: &SymbolSpec<f64>, set: &SparseSet, phi: &State, t_max: f64, gamma: f64) -> Result<f64> {
    let bad = set.centered_violations();
    if !bad.is_empty() {
        return Err(Error::Precondition(format!(
            "support violates |S ∩ Λ| ≤ ⌈|Λ|^{}⌉ on centred cubes of half-side {:?}",
            set.alpha(),
            bad
        )));
    }
    let cube = set.cube();
    let reach = phi.iter().map(|(n, _)| n.distance(cube.center())).max().unwrap_or(0);
    let l = cube.half_side() as u64;
    if reach >= l {
        return Err(Error::EnlargeDomain(format!(
            "initial state reaches distance {reach} from the centre of a cube of half-side {l}"
        )));
    }
    let p = 2.0 * gamma;
    let bound = state_factor(phi, &Site::origin(spec.dim()), p)
        * (1.0 + cube.center().max_norm() as f64).powf(p).max(1.0)
        * kernel_weighted_tail_bound(spec, t_max, l - reach, p);
    if bound > TAIL_TOL {
        return Err(Error::EnlargeDomain(format!(
            "mass beyond half-side {l} may reach {bound:e} for |t| ≤ {t_max}; enlarge the cube"
        )));
    }
    Ok(bound)
}

fn max_offset(set: &SiteSet, phi: &State) -> u64 {
    set.iter()
        .flat_map(|m| phi.iter().map(move |(n, _)| m.distance(n)))
        .max()
        .unwrap_or(0)
}

/// `Σ_{m∈S} w(m)² |ψ_t(m)|²` for each `w` in `weights` (aligned with `S`).
fn weighted_mass(spec: &SymbolSpec<f64>, set: &SiteSet, weights: &[f64], phi: &State, t: f64, dmax: u64) -> Result<f64> {
    if set.is_empty() {
        return Ok(0.0);
    }
    let prop = Propagator::new(spec, t, dmax)?;
    Ok(set
        .iter()
        .zip(weights)
        .map(|(m, w)| w * w * prop.evolve_at(phi, m).norm_sqr())
        .sum())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Verdict {
    Converging,
    NotConverging,
}

impl Verdict {
    pub fn name(self) -> &'static str {
        match self {
            Verdict::Converging => "converging",
            Verdict::NotConverging => "not_converging",
        }
    }
}

/// `∫_{lo}^{hi} c(t) dt` by composite Simpson on the emitted nodes.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Window {
    pub lo: f64,
    pub hi: f64,
    pub integral: f64,
    /// `|S_h - S_{2h}| / 15`
    pub error: f64,
    /// Shorter than a full dyadic window; excluded from the verdict.
    pub partial: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SparsenessResult {
    /// `(t, c(t))` on every quadrature node in `[1, t_max]`.
    pub samples: Vec<(f64, f64)>,
    pub windows: Vec<Window>,
    /// Successive ratios of the last three full windows.
    pub ratios: Vec<f64>,
    /// `∫_0^1 c ≤ max_{m∈S} w(m) ‖φ‖₂`
    pub head_bound: f64,
    /// Certified mass of sites beyond the cube.
    pub tail_bound: f64,
    pub step: f64,
    pub verdict: Verdict,
}

impl SparsenessResult {
    /// Head bound plus all window integrals.
    pub fn total(&self) -> f64 {
        self.head_bound + self.windows.iter().map(|w| w.integral).sum::<f64>()
    }
}

fn windows_for(t_max: f64) -> Vec<(f64, f64, bool)> {
    let mut out = Vec::new();
    let mut lo = 1.0;
    while 2.0 * lo <= t_max {
        out.push((lo, 2.0 * lo, false));
        lo *= 2.0;
    }
    if t_max > lo {
        out.push((lo, t_max, true));
    }
    out
}

fn simpson(values: &[f64], h: f64) -> f64 {
    let n = values.len() - 1;
    let mut s = values[0] + values[n];
    for (i, v) in values.iter().enumerate().take(n).skip(1) {
        s += if i % 2 == 1 { 4.0 } else { 2.0 } * v;
    }
    s * h / 3.0
}

const REL_TOL: f64 = 1e-6;
const ABS_TOL: f64 = 1e-12;
const MIN_STEP: f64 = 1.0 / 1024.0;

/// `c(t) = (Σ_{m∈S} w(m)² |ψ_t(m)|²)^{1/2}` with `w = 1` or `(1+|m|)^γ`,
/// integrated over dyadic windows of `[1, t_max]`. The step is halved until
/// every window meets `max(1e-12, 1e-6·|I|)`.
pub fn sparseness_integral(
    spec: &SymbolSpec<f64>,
    set: &SparseSet,
    phi: &State,
    t_max: f64,
    gamma: Option<f64>,
) -> Result<SparsenessResult> {
    let dim = spec.dim();
    if set.cube().dim() != dim {
        return Err(Error::invalid("support and symbol dimensions differ"));
    }
    check_state(phi, dim)?;
    if !(t_max >= 8.0 && t_max.is_finite()) {
        return Err(Error::invalid("t_max must be at least 8 (three dyadic windows)"));
    }
    let g = gamma.unwrap_or(0.0);
    if !(g >= 0.0 && g.is_finite()) {
        return Err(Error::invalid("weight exponent must be nonnegative"));
    }
    let tail_bound = certify_domain(spec, set, phi, t_max, g)?;
    let sites = set.sites();
    let weights: Vec<f64> = sites.iter().map(|m| weight_value(g, m)).collect();
    let dmax = max_offset(sites, phi);
    let phi_norm = phi.iter().map(|(_, a)| a.norm_sqr()).sum::<f64>().sqrt();
    let head_bound = weights.iter().fold(0.0f64, |m, w| m.max(*w)) * phi_norm;
    let plan = windows_for(t_max);

    let mut h = 1.0 / 16.0;
    loop {
        let mut samples: Vec<(f64, f64)> = Vec::new();
        let mut windows = Vec::new();
        let mut ok = true;
        for &(lo, hi, partial) in &plan {
            let n = 2 * (((hi - lo) / (2.0 * h)).ceil() as usize).max(1);
            let step = (hi - lo) / n as f64;
            let ts: Vec<f64> = (0..=n).map(|k| if k == n { hi } else { lo + k as f64 * step }).collect();
            let cs: Vec<f64> = ts
                .par_iter()
                .map(|&t| Ok(weighted_mass(spec, sites, &weights, phi, t, dmax)?.sqrt()))
                .collect::<Result<_>>()?;
            let fine = simpson(&cs, step);
            let coarse_vals: Vec<f64> = cs.iter().step_by(2).copied().collect();
            let error = if n % 4 == 0 {
                (fine - simpson(&coarse_vals, 2.0 * step)).abs() / 15.0
            } else {
                // coarse rule needs an even count; fall back to trapezoid halving
                let trap = |v: &[f64], s: f64| s * (v.iter().sum::<f64>() - 0.5 * (v[0] + v[v.len() - 1]));
                (trap(&cs, step) - trap(&coarse_vals, 2.0 * step)).abs() / 3.0
            };
            if error > ABS_TOL.max(REL_TOL * fine.abs()) {
                ok = false;
            }
            let skip = usize::from(!samples.is_empty());
            samples.extend(ts.iter().copied().zip(cs.iter().copied()).skip(skip));
            windows.push(Window {
                lo,
                hi,
                integral: fine,
                error,
                partial,
            });
        }
        if ok || h <= MIN_STEP {
            if !ok {
                let worst = windows.iter().map(|w| w.error).fold(0.0, f64::max);
                return Err(Error::Numerical {
                    what: "sparseness integral quadrature".into(),
                    achieved: worst,
                    requested: REL_TOL,
                });
            }
            let (ratios, verdict) = window_verdict(&windows);
            return Ok(SparsenessResult {
                samples,
                windows,
                ratios,
                head_bound,
                tail_bound,
                step: h,
                verdict,
            });
        }
        h *= 0.5;
    }
}

/// Ratios of the last three full windows; converging iff both are below
/// 0.9 (all-zero windows count as converging).
pub fn window_verdict(windows: &[Window]) -> (Vec<f64>, Verdict) {
    let full: Vec<f64> = windows.iter().filter(|w| !w.partial).map(|w| w.integral).collect();
    if full.len() < 3 {
        return (Vec::new(), Verdict::NotConverging);
    }
    let last = &full[full.len() - 3..];
    let ratio = |a: f64, b: f64| if b == 0.0 { if a == 0.0 { 0.0 } else { f64::INFINITY } } else { a / b };
    let ratios = vec![ratio(last[1], last[0]), ratio(last[2], last[1])];
    let verdict = if ratios.iter().all(|r| *r < 0.9) {
        Verdict::Converging
    } else {
        Verdict::NotConverging
    };
    (ratios, verdict)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CookOptions {
    pub samples: usize,
}

impl Default for CookOptions {
    fn default() -> Self {
        CookOptions { samples: 64 }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CookRow {
    pub t: f64,
    /// `σ (Σ_{m∈S} a_m² |ψ_t(m)|²)^{1/2}`, `a_m = λ` or the weight.
    pub bound: f64,
    pub q10: f64,
    pub median: f64,
    pub q90: f64,
    /// Sample mean and standard error of `‖V ψ_t‖²`.
    pub mean_sq: f64,
    pub mean_sq_stderr: f64,
    /// `σ² Σ_{m∈S} a_m² |ψ_t(m)|²`
    pub expected_sq: f64,
    pub median_ok: bool,
    pub identity_ok: bool,
}

fn quantile(sorted: &[f64], q: f64) -> f64 {
    let x = q * (sorted.len() - 1) as f64;
    let (i, f) = (x.floor() as usize, x.fract());
    if i + 1 < sorted.len() {
        sorted[i] * (1.0 - f) + sorted[i + 1] * f
    } else {
        sorted[i]
    }
}

/// Deterministic bound `σ‖a P_S ψ_t‖` against Monte-Carlo samples of
/// `‖V_S^ω ψ_t‖` at each time in `t_grid`.
pub fn cook_integrand(
    spec: &SymbolSpec<f64>,
    set: &SparseSet,
    model: &DisorderModel,
    phi: &State,
    t_grid: &[f64],
    options: CookOptions,
) -> Result<Vec<CookRow>> {
    let dim = spec.dim();
    if set.cube().dim() != dim {
        return Err(Error::invalid("support and symbol dimensions differ"));
    }
    check_state(phi, dim)?;
    model.validate()?;
    if options.samples < 30 {
        return Err(Error::invalid("the Cook integrand needs at least 30 disorder samples"));
    }
    if t_grid.iter().any(|t| !t.is_finite()) || t_grid.is_empty() {
        return Err(Error::invalid("time grid must be nonempty and finite"));
    }
    let t_max = t_grid.iter().fold(0.0f64, |m, t| m.max(t.abs()));
    let gamma = model.weight.map(|w| w.gamma).unwrap_or(0.0);
    certify_domain(spec, set, phi, t_max, gamma)?;
    let sites = set.sites();
    let coupling: Vec<f64> = sites.iter().map(|m| model.coupling_at(m)).collect();
    let sigma = model.law.second_moment().sqrt();
    let draws: Vec<Vec<f64>> = (0..options.samples as u64)
        .map(|r| {
            sites
                .iter()
                .zip(&coupling)
                .map(|(m, a)| if *a == 0.0 { 0.0 } else { a * model.raw_draw(r, m) })
                .collect()
        })
        .collect();
    let dmax = max_offset(sites, phi);
    t_grid
        .par_iter()
        .map(|&t| {
            let prop = Propagator::new(spec, t, dmax)?;
            let psi2: Vec<f64> = sites.iter().map(|m| prop.evolve_at(phi, m).norm_sqr()).collect();
            let mass: f64 = psi2.iter().zip(&coupling).map(|(p, a)| a * a * p).sum();
            let mut sq = RunningStats::new();
            let mut norms: Vec<f64> = draws
                .iter()
                .map(|v| {
                    let s: f64 = v.iter().zip(&psi2).map(|(x, p)| x * x * p).sum();
                    sq.push(s);
                    s.sqrt()
                })
                .collect();
            norms.sort_by(f64::total_cmp);
            let bound = sigma * mass.sqrt();
            let expected_sq = sigma * sigma * mass;
            let median = quantile(&norms, 0.5);
            Ok(CookRow {
                t,
                bound,
                q10: quantile(&norms, 0.1),
                median,
                q90: quantile(&norms, 0.9),
                mean_sq: sq.mean(),
                mean_sq_stderr: sq.stderr(),
                expected_sq,
                median_ok: median <= bound * (1.0 + 1e-12),
                identity_ok: (sq.mean() - expected_sq).abs() <= 3.0 * sq.stderr() + 1e-12 * expected_sq,
            })
        })
        .collect()
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct WeightedTail {
    pub value: f64,
    /// Sites with `|m|_∞ ≤ truncation` were summed.
    pub truncation: u64,
    /// Certified bound on everything left out.
    pub tail_bound: f64,
}

/// `Σ_{m∈S} (1+|m|)^{2β} |ψ_t(m)|²` for `β > ν`, truncated to the smallest
/// origin-centred box whose complement is certified below 1e-12. `S` is
/// known inside `domain`, which must contain that box.
pub fn weighted_tail_norm(
    spec: &SymbolSpec<f64>,
    phi: &State,
    t: f64,
    beta: f64,
    support: &SiteSet,
    domain: &Cube,
) -> Result<WeightedTail> {
    let dim = spec.dim();
    check_state(phi, dim)?;
    if !(beta > dim as f64 && beta.is_finite()) {
        return Err(Error::invalid(format!("beta must exceed the dimension {dim}")));
    }
    if domain.dim() != dim {
        return Err(Error::invalid("domain and symbol dimensions differ"));
    }
    let p = 2.0 * beta;
    let origin = Site::origin(dim);
    let factor = state_factor(phi, &origin, p);
    let reach = phi.iter().map(|(n, _)| n.max_norm()).max().unwrap_or(0);
    let limit = (domain.half_side() as u64).saturating_sub(domain.center().max_norm());
    let mut d = reach;
    let tail = loop {
        let b = factor * kernel_weighted_tail_bound(spec, t, d - reach, p);
        if b <= TAIL_TOL {
            break b;
        }
        d += 1;
        if d > limit {
            return Err(Error::EnlargeDomain(format!(
                "weighted tail not certified below {TAIL_TOL:e} inside the domain (bound {b:e})"
            )));
        }
    };
    let inside: Vec<&Site> = support.iter().filter(|m| m.max_norm() <= d).collect();
    let dmax = inside
        .iter()
        .flat_map(|m| phi.iter().map(move |(n, _)| m.distance(n)))
        .max()
        .unwrap_or(0);
    let prop = Propagator::new(spec, t, dmax)?;
    let value = inside
        .iter()
        .map(|m| (1.0 + m.max_norm() as f64).powf(p) * prop.evolve_at(phi, m).norm_sqr())
        .sum();
    Ok(WeightedTail {
        value,
        truncation: d,
        tail_bound: tail,
    })
}

#[cfg(test)]
mod tests {
    use super::super::delta;
    use super::*;
    use crate::disorder::Law;
    use crate::lattice::{generate_sparse_set, Generator};

    fn lap(dim: usize) -> SymbolSpec<f64> {
        SymbolSpec::laplacian(dim)
    }

    #[test]
    fn empty_support_integrates_to_zero() {
        let cube = Cube::centered(1, 200).unwrap();
        let set = SparseSet::from_sites(0.5, cube, []).unwrap();
        let r = sparseness_integral(&lap(1), &set, &delta(Site::origin(1)), 16.0, None).unwrap();
        assert!(r.windows.iter().all(|w| w.integral == 0.0));
        assert_eq!(r.verdict, Verdict::Converging);
        assert_eq!(r.head_bound, 0.0);
    }

    #[test]
    fn unit_mass_at_time_zero() {
        let s = SiteSet::new([Site::origin(2), Site::from([3, 0])]);
        let w = [1.0, 2.0];
        assert!((weighted_mass(&lap(2), &s, &w, &delta(Site::origin(2)), 0.0, 3).unwrap() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn single_site_matches_bessel_integrand() {
        // S = {0}, φ = δ₀, ν = 1: c(t) = |J₀(2t)|
        let cube = Cube::centered(1, 300).unwrap();
        let set = SparseSet::from_sites(0.5, cube, [Site::origin(1)]).unwrap();
        let r = sparseness_integral(&lap(1), &set, &delta(Site::origin(1)), 8.0, None).unwrap();
        for &(t, c) in r.samples.iter().step_by(7) {
            assert!((c - crate::bessel::bessel_j(0, 2.0 * t).abs()).abs() < 1e-12, "t={t}");
        }
        let direct = crate::quadrature::integrate(|t| crate::bessel::bessel_j(0, 2.0 * t).abs(), 1.0, 2.0, 1e-10, 0.0).unwrap();
        assert!((r.windows[0].integral - direct.value).abs() < 1e-5);
    }

    #[test]
    fn cap_violation_refused_and_small_cube_rejected() {
        let cube = Cube::centered(1, 5).unwrap();
        let dense = SparseSet::from_sites(0.2, cube.clone(), cube.sites()).unwrap();
        assert!(matches!(
            sparseness_integral(&lap(1), &dense, &delta(Site::origin(1)), 8.0, None),
            Err(Error::Precondition(_))
        ));
        let tiny = SparseSet::from_sites(0.5, cube, [Site::origin(1)]).unwrap();
        assert!(matches!(
            sparseness_integral(&lap(1), &tiny, &delta(Site::origin(1)), 8.0, None),
            Err(Error::EnlargeDomain(_))
        ));
    }

    #[test]
    fn cook_identity_and_zero_coupling() {
        let cube = Cube::centered(1, 120).unwrap();
        let set = generate_sparse_set(0.5, &cube, Generator::DeterministicPowers, 0).unwrap();
        let law = Law::Uniform { lo: -1.0, hi: 1.0 };
        let model = DisorderModel::new(law, 1.0, 17).unwrap();
        let phi = delta(Site::origin(1));
        let rows = cook_integrand(&lap(1), &set, &model, &phi, &[0.5, 2.0, 8.0, 20.0], CookOptions { samples: 400 }).unwrap();
        for r in &rows {
            assert!(r.identity_ok, "{r:?}");
            assert!(r.median_ok, "{r:?}");
        }
        let off = DisorderModel::new(law, 0.0, 17).unwrap();
        let rows = cook_integrand(&lap(1), &set, &off, &phi, &[3.0], CookOptions::default()).unwrap();
        assert_eq!(rows[0].median, 0.0);
        assert_eq!(rows[0].bound, 0.0);
        assert!(cook_integrand(&lap(1), &set, &off, &phi, &[3.0], CookOptions { samples: 10 }).is_err());
    }

    #[test]
    fn weighted_tail_cases() {
        let domain = Cube::centered(1, 200).unwrap();
        let phi = delta(Site::origin(1));
        let with0 = SiteSet::new([Site::origin(1)]);
        let without0 = SiteSet::new([Site::from([4])]);
        assert!((weighted_tail_norm(&lap(1), &phi, 0.0, 1.5, &with0, &domain).unwrap().value - 1.0).abs() < 1e-15);
        assert_eq!(weighted_tail_norm(&lap(1), &phi, 0.0, 1.5, &without0, &domain).unwrap().value, 0.0);
        assert!(weighted_tail_norm(&lap(1), &phi, 1.0, 1.0, &with0, &domain).is_err());
        // Bessel-tail oracle: the certified value agrees with the doubled box
        let full = SiteSet::full(&domain);
        let r = weighted_tail_norm(&lap(1), &phi, 2.0, 1.5, &full, &domain).unwrap();
        let doubled: f64 = (-2 * r.truncation as i64..=2 * r.truncation as i64)
            .map(|m| (1.0 + m.unsigned_abs() as f64).powf(3.0) * crate::bessel::bessel_j(m, 4.0).powi(2))
            .sum();
        assert!((r.value - doubled).abs() < 1e-10, "{} vs {doubled}", r.value);
        let small = Cube::centered(1, 5).unwrap();
        assert!(matches!(
            weighted_tail_norm(&lap(1), &phi, 2.0, 1.5, &SiteSet::full(&small), &small),
            Err(Error::EnlargeDomain(_))
        ));
    }
}
