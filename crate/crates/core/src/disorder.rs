//! Single-site laws, coupling/weight scaling and the regularity condition
//! `μ(a-δ, a+δ) ≤ C δ μ(a-b, a+b)`.

use statrs::distribution::{ContinuousCDF, Normal};

use crate::error::{Error, Result};
use crate::lattice::{Site, SiteSet};
use crate::operators::Potential;
use crate::rng::{keyed_rng, open_uniform, site_hash};
use crate::scalar::Real;

/// Absolutely continuous single-site law with finite second moment.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Law {
    Uniform { lo: f64, hi: f64 },
    Gaussian { mean: f64, sd: f64 },
    /// Cauchy density of the given scale, conditioned on `|x| ≤ cut`.
    TruncatedCauchy { scale: f64, cut: f64 },
}

impl Law {
    pub fn from_name(name: &str, params: &[f64]) -> Result<Law> {
        let law = match (name, params) {
            ("uniform", [lo, hi]) => Law::Uniform { lo: *lo, hi: *hi },
            ("gaussian", [mean, sd]) => Law::Gaussian { mean: *mean, sd: *sd },
            ("truncated_cauchy", [scale, cut]) => Law::TruncatedCauchy { scale: *scale, cut: *cut },
            ("uniform" | "gaussian" | "truncated_cauchy", _) => {
                return Err(Error::invalid(format!("law '{name}' takes exactly two parameters")))
            }
            _ => return Err(Error::invalid(format!("unknown law '{name}'"))),
        };
        law.validate()?;
        Ok(law)
    }

    pub fn name(&self) -> &'static str {
        match self {
            Law::Uniform { .. } => "uniform",
            Law::Gaussian { .. } => "gaussian",
            Law::TruncatedCauchy { .. } => "truncated_cauchy",
        }
    }

    pub fn validate(&self) -> Result<()> {
        let ok = match *self {
            Law::Uniform { lo, hi } => lo.is_finite() && hi.is_finite() && lo < hi,
            Law::Gaussian { mean, sd } => mean.is_finite() && sd.is_finite() && sd > 0.0,
            Law::TruncatedCauchy { scale, cut } => {
                scale.is_finite() && cut.is_finite() && scale > 0.0 && cut > 0.0
            }
        };
        if ok {
            Ok(())
        } else {
            Err(Error::invalid(format!("invalid parameters for {self:?}")))
        }
    }

    /// Natural length scale (used to size search domains).
    pub fn scale(&self) -> f64 {
        match *self {
            Law::Uniform { lo, hi } => (hi - lo) / 2.0,
            Law::Gaussian { sd, .. } => sd,
            Law::TruncatedCauchy { scale, .. } => scale,
        }
    }

    fn cauchy_norm(scale: f64, cut: f64) -> f64 {
        2.0 * (cut / scale).atan()
    }

    pub fn density(&self, x: f64) -> f64 {
        match *self {
            Law::Uniform { lo, hi } => {
                if (lo..=hi).contains(&x) {
                    1.0 / (hi - lo)
                } else {
                    0.0
                }
            }
            Law::Gaussian { mean, sd } => {
                let u = (x - mean) / sd;
                (-0.5 * u * u).exp() / (sd * (2.0 * std::f64::consts::PI).sqrt())
            }
            Law::TruncatedCauchy { scale, cut } => {
                if x.abs() > cut {
                    0.0
                } else {
                    1.0 / (scale * (1.0 + (x / scale).powi(2)) * Self::cauchy_norm(scale, cut))
                }
            }
        }
    }

    pub fn cdf(&self, x: f64) -> f64 {
        match *self {
            Law::Uniform { lo, hi } => ((x - lo) / (hi - lo)).clamp(0.0, 1.0),
            Law::Gaussian { mean, sd } => Normal::new(mean, sd).unwrap().cdf(x),
            Law::TruncatedCauchy { scale, cut } => {
                let y = x.clamp(-cut, cut);
                ((y / scale).atan() + (cut / scale).atan()) / Self::cauchy_norm(scale, cut)
            }
        }
    }

    pub fn quantile(&self, p: f64) -> f64 {
        match *self {
            Law::Uniform { lo, hi } => lo + p * (hi - lo),
            Law::Gaussian { mean, sd } => Normal::new(mean, sd).unwrap().inverse_cdf(p),
            Law::TruncatedCauchy { scale, cut } => {
                let w = (cut / scale).atan();
                scale * (p * 2.0 * w - w).tan()
            }
        }
    }

    /// `μ((lo, hi))` in closed form.
    pub fn interval_measure(&self, lo: f64, hi: f64) -> f64 {
        (self.cdf(hi) - self.cdf(lo)).max(0.0)
    }

    pub fn mean(&self) -> f64 {
        match *self {
            Law::Uniform { lo, hi } => 0.5 * (lo + hi),
            Law::Gaussian { mean, .. } => mean,
            Law::TruncatedCauchy { .. } => 0.0,
        }
    }

    /// `σ² = ∫ x² dμ`
    pub fn second_moment(&self) -> f64 {
        match *self {
            Law::Uniform { lo, hi } => (hi.powi(3) - lo.powi(3)) / (3.0 * (hi - lo)),
            Law::Gaussian { mean, sd } => mean * mean + sd * sd,
            Law::TruncatedCauchy { scale, cut } => {
                let z = scale * Self::cauchy_norm(scale, cut);
                scale * scale * (2.0 * cut - 2.0 * scale * (cut / scale).atan()) / z
            }
        }
    }

    pub fn variance(&self) -> f64 {
        self.second_moment() - self.mean().powi(2)
    }

    /// Interval carrying all but a negligible part of the mass, for
    /// quadrature.
    pub fn support(&self) -> (f64, f64) {
        match *self {
            Law::Uniform { lo, hi } => (lo, hi),
            Law::Gaussian { mean, sd } => (mean - 12.0 * sd, mean + 12.0 * sd),
            Law::TruncatedCauchy { cut, .. } => (-cut, cut),
        }
    }

    /// One draw by inversion from a uniform variate in (0,1).
    pub fn from_uniform(&self, u: f64) -> f64 {
        self.quantile(u)
    }
}

/// Weight profile `a_n = (1 + |n|_∞)^γ`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Weight {
    pub gamma: f64,
}

/// `(1 + |n|_∞)^γ`
pub fn weight_value<T: Real>(gamma: T, n: &Site) -> T {
    (T::one() + T::from_u64(n.max_norm()).unwrap()).powf(gamma)
}

#[derive(Clone, Debug, PartialEq)]
pub struct DisorderModel {
    pub law: Law,
    /// Coupling λ; ignored when a weight profile is present.
    pub lambda: f64,
    pub weight: Option<Weight>,
    pub seed: u64,
}

impl DisorderModel {
    pub fn new(law: Law, lambda: f64, seed: u64) -> Result<Self> {
        let m = DisorderModel {
            law,
            lambda,
            weight: None,
            seed,
        };
        m.validate()?;
        Ok(m)
    }

    pub fn weighted(law: Law, gamma: f64, seed: u64) -> Result<Self> {
        let m = DisorderModel {
            law,
            lambda: 1.0,
            weight: Some(Weight { gamma }),
            seed,
        };
        m.validate()?;
        Ok(m)
    }

    pub fn validate(&self) -> Result<()> {
        self.law.validate()?;
        if !(self.lambda.is_finite() && self.lambda >= 0.0) {
            return Err(Error::invalid("coupling lambda must be finite and nonnegative"));
        }
        if let Some(w) = self.weight {
            if !(w.gamma.is_finite() && w.gamma > 0.0) {
                return Err(Error::invalid("weight exponent gamma must be positive"));
            }
        }
        Ok(())
    }

    /// Amplitude multiplying the raw draw at `n`: λ, or `a_n` when weighted.
    pub fn coupling_at(&self, n: &Site) -> f64 {
        match self.weight {
            Some(w) => weight_value(w.gamma, n),
            None => self.lambda,
        }
    }

    /// True when every realization is the zero potential.
    pub fn is_deterministic(&self) -> bool {
        self.weight.is_none() && self.lambda == 0.0
    }

    /// Raw (unscaled) draw from μ at `n` in the given realization.
    pub fn raw_draw(&self, realization: u64, n: &Site) -> f64 {
        let mut rng = keyed_rng(self.seed, realization, site_hash(n));
        self.law.from_uniform(open_uniform(&mut rng))
    }
}

/// Independent draws on `S`, scaled by λ or `a_n`; sites off `S` are absent
/// (potential zero there).
pub fn sample_potential(model: &DisorderModel, support: &SiteSet, realization: u64) -> Potential {
    support
        .iter()
        .map(|n| {
            let c = model.coupling_at(n);
            let v = if c == 0.0 { 0.0 } else { c * model.raw_draw(realization, n) };
            (n.clone(), v)
        })
        .collect()
}

/// Sampling grid for [`check_regularity`].
#[derive(Clone, Debug, PartialEq)]
pub struct RegularityGrid {
    /// Centres `a` at evenly spaced quantiles in `[q_lo, q_hi]`.
    pub q_lo: f64,
    pub q_hi: f64,
    pub centres: usize,
    /// Half-widths `δ` log-spaced in `[delta_min, delta_max]`.
    pub delta_min: f64,
    pub delta_max: f64,
    pub deltas: usize,
}

impl Default for RegularityGrid {
    fn default() -> Self {
        RegularityGrid {
            q_lo: 0.001,
            q_hi: 0.999,
            centres: 81,
            delta_min: 0.01,
            delta_max: 0.99,
            deltas: 25,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct RegularityReport {
    pub b: f64,
    /// Max of `μ(a-δ,a+δ) / (δ μ(a-b,a+b))` over the grid.
    pub c_estimate: f64,
    /// Same maximum with `δ` extended ten times further towards zero.
    pub c_refined: f64,
    pub grid: RegularityGrid,
    /// Finite on the grid and stable under the `δ → 0` extension.
    pub pass: bool,
}

fn regularity_max(law: &Law, b: f64, grid: &RegularityGrid, delta_min: f64) -> f64 {
    let mut worst: f64 = 0.0;
    for i in 0..grid.centres {
        let q = if grid.centres == 1 {
            0.5 * (grid.q_lo + grid.q_hi)
        } else {
            grid.q_lo + (grid.q_hi - grid.q_lo) * i as f64 / (grid.centres - 1) as f64
        };
        let a = law.quantile(q);
        let denom_mass = law.interval_measure(a - b, a + b);
        for j in 0..grid.deltas {
            let t = if grid.deltas == 1 { 0.0 } else { j as f64 / (grid.deltas - 1) as f64 };
            let delta = delta_min * (grid.delta_max / delta_min).powf(t);
            let lhs = law.interval_measure(a - delta, a + delta);
            let ratio = if lhs == 0.0 { 0.0 } else { lhs / (delta * denom_mass) };
            worst = worst.max(ratio);
        }
    }
    worst
}

/// Estimate the regularity constant `C` for `μ(a-δ,a+δ) ≤ C δ μ(a-b,a+b)`.
pub fn check_regularity(model: &DisorderModel, b: f64, grid: &RegularityGrid) -> Result<RegularityReport> {
    if !(b >= 1.0) {
        return Err(Error::invalid(format!("b must be at least 1, got {b}")));
    }
    if !(grid.delta_min > 0.0 && grid.delta_min < grid.delta_max && grid.delta_max < 1.0) {
        return Err(Error::invalid("delta range must lie inside (0,1)"));
    }
    if grid.centres == 0 || grid.deltas == 0 || !(0.0 < grid.q_lo && grid.q_lo <= grid.q_hi && grid.q_hi < 1.0) {
        return Err(Error::invalid("empty or malformed regularity grid"));
    }
    model.law.validate()?;
    let c = regularity_max(&model.law, b, grid, grid.delta_min);
    let refined = regularity_max(&model.law, b, grid, grid.delta_min / 10.0);
    Ok(RegularityReport {
        b,
        c_estimate: c,
        c_refined: refined,
        grid: grid.clone(),
        pass: c.is_finite() && refined.is_finite() && refined <= 2.0 * c,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn uniform() -> Law {
        Law::Uniform { lo: -1.0, hi: 1.0 }
    }

    #[test]
    fn empty_support_gives_empty_map() {
        let m = DisorderModel::new(uniform(), 3.0, 1).unwrap();
        assert!(sample_potential(&m, &SiteSet::empty(), 0).is_empty());
    }

    #[test]
    fn zero_coupling_gives_zeros() {
        let m = DisorderModel::new(uniform(), 0.0, 1).unwrap();
        let s = SiteSet::new((0..5).map(|i| Site::from([i])));
        let v = sample_potential(&m, &s, 3);
        assert_eq!(v.len(), 5);
        assert!(v.iter().all(|(_, &x)| x == 0.0));
        assert!(m.is_deterministic());
    }

    #[test]
    fn replay_and_range() {
        let m = DisorderModel::new(uniform(), 10.0, 99).unwrap();
        let s = SiteSet::new((0..4).map(|i| Site::from([i, -i])));
        let a = sample_potential(&m, &s, 5);
        let b = sample_potential(&m, &s, 5);
        assert_eq!(a, b);
        assert!(a.iter().all(|(_, &x)| x.abs() <= 10.0));
        assert_ne!(a, sample_potential(&m, &s, 6));
    }

    #[test]
    fn weights() {
        assert_eq!(weight_value(2.7f64, &Site::from([0, 0])), 1.0);
        assert_eq!(weight_value(2.0f64, &Site::from([3, -1])), 16.0);
        assert!((weight_value(0.5f64, &Site::from([-99])) - 10.0).abs() < 1e-14);
        assert!((weight_value(0.5f32, &Site::from([-99])) - 10.0).abs() < 1e-5);
    }

    #[test]
    fn weighted_model_scales_by_weight() {
        let m = DisorderModel::weighted(uniform(), 1.0, 4).unwrap();
        let n = Site::from([7]);
        assert!((m.coupling_at(&n) - 8.0).abs() < 1e-14);
        let v = sample_potential(&m, &SiteSet::new(vec![n.clone()]), 0);
        assert!((v.get(&n) - 8.0 * m.raw_draw(0, &n)).abs() < 1e-14);
    }

    #[test]
    fn second_moments() {
        assert!((uniform().second_moment() - 1.0 / 3.0).abs() < 1e-15);
        assert_eq!(Law::Gaussian { mean: 0.0, sd: 2.0 }.second_moment(), 4.0);
        let tc = Law::TruncatedCauchy { scale: 1.0, cut: 5.0 };
        let direct = crate::quadrature::integrate(|x| x * x * tc.density(x), -5.0, 5.0, 1e-13, 0.0).unwrap();
        assert!((tc.second_moment() - direct.value).abs() < 1e-11);
        let mass = crate::quadrature::integrate(|x| tc.density(x), -5.0, 5.0, 1e-13, 0.0).unwrap();
        assert!((mass.value - 1.0).abs() < 1e-12);
    }

    #[test]
    fn bad_parameters() {
        assert!(Law::from_name("uniform", &[1.0, -1.0]).is_err());
        assert!(Law::from_name("gaussian", &[0.0, 0.0]).is_err());
        assert!(Law::from_name("cauchy", &[1.0, 1.0]).is_err());
        assert!(Law::from_name("uniform", &[1.0]).is_err());
        assert!(DisorderModel::new(uniform(), -1.0, 0).is_err());
        assert!(DisorderModel::weighted(uniform(), 0.0, 0).is_err());
    }

    #[test]
    fn uniform_regularity_point() {
        // a=0, δ=0.5: μ(-0.5,0.5) = 0.5 and μ(-1,1) = 1, so C ≥ 1
        let law = uniform();
        let ratio = law.interval_measure(-0.5, 0.5) / (0.5 * law.interval_measure(-1.0, 1.0));
        assert_eq!(law.interval_measure(-0.5, 0.5), 0.5);
        assert_eq!(ratio, 1.0);
        let m = DisorderModel::new(law, 1.0, 0).unwrap();
        let r = check_regularity(&m, 1.0, &RegularityGrid::default()).unwrap();
        assert!(r.pass);
        assert!(r.c_estimate >= 1.0 && r.c_estimate <= 2.0, "{}", r.c_estimate);
    }

    #[test]
    fn gaussian_regularity_is_finite() {
        let m = DisorderModel::new(Law::Gaussian { mean: 0.0, sd: 1.0 }, 1.0, 0).unwrap();
        let grid = RegularityGrid {
            q_lo: Law::Gaussian { mean: 0.0, sd: 1.0 }.cdf(-5.0),
            q_hi: Law::Gaussian { mean: 0.0, sd: 1.0 }.cdf(5.0),
            centres: 101,
            ..RegularityGrid::default()
        };
        let r = check_regularity(&m, 1.0, &grid).unwrap();
        assert!(r.pass);
        // μ(a-δ,a+δ) ≤ 2δ φ(|a|-1) and μ(a-1,a+1) ≥ 2φ(|a|+1) for |a| ≥ 1, so
        // C ≤ e^{2|a|}; near the centre the density ratio is O(1)
        assert!(r.c_estimate <= (2.0f64 * 5.0).exp());
        assert!(r.c_estimate < 2.0);
    }

    #[test]
    fn near_point_mass_fails() {
        let m = DisorderModel::new(Law::Gaussian { mean: 0.0, sd: 1e-6 }, 1.0, 0).unwrap();
        let r = check_regularity(&m, 1.0, &RegularityGrid::default()).unwrap();
        assert!(!r.pass);
        assert!(r.c_refined > 5.0 * r.c_estimate);
    }

    #[test]
    fn regularity_rejects_small_b() {
        let m = DisorderModel::new(uniform(), 1.0, 0).unwrap();
        assert!(check_regularity(&m, 0.5, &RegularityGrid::default()).is_err());
    }
}
