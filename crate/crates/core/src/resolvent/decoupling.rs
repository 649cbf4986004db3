//! Estimation of the decoupling constant
//! `κ = inf_{η,β ∈ ℂ} ∫|x-η|^s |x-β|^s dμ / ∫|x-β|^s dμ`.
//!
//! The infimum is taken over a bounded grid in `ℂ²` and then refined by
//! compass search. Since only a subset of `ℂ²` is explored, the returned
//! value is an upper bound on the true constant. Both integrands depend on
//! `η, β` only through `|x-η|`, `|x-β|` with `x` real, so `Im ≥ 0` loses
//! nothing.

use num_complex::Complex64;
use rayon::prelude::*;

use crate::disorder::Law;
use crate::error::{Error, Result};
use crate::operators::KernelOperator;
use crate::quadrature::integrate_with_breaks;

const REL_TOL: f64 = 1e-10;
const ABS_TOL: f64 = 1e-14;

/// Search domain `{|Re| ≤ R, 0 ≤ Im ≤ im_max}` for both `η` and `β`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DecouplingSearch {
    pub radius: f64,
    pub re_points: usize,
    pub im_points: usize,
    pub im_max: f64,
}

impl DecouplingSearch {
    /// `R = |mean| + 10 ×` the law scale, 21 real by 4 imaginary nodes.
    pub fn for_law(law: &Law) -> Self {
        let r = law.mean().abs() + 10.0 * law.scale();
        DecouplingSearch {
            radius: r,
            re_points: 21,
            im_points: 4,
            im_max: r,
        }
    }

    /// Twice as many intervals in every direction.
    pub fn refined(&self) -> Self {
        DecouplingSearch {
            re_points: 2 * self.re_points - 1,
            im_points: 2 * self.im_points - 1,
            ..*self
        }
    }

    fn validate(&self) -> Result<()> {
        if !(self.radius.is_finite() && self.radius > 0.0 && self.im_max.is_finite() && self.im_max >= 0.0) {
            return Err(Error::invalid("decoupling search needs a positive finite radius"));
        }
        if self.re_points < 3 || self.re_points % 2 == 0 || self.im_points < 1 {
            return Err(Error::invalid("decoupling grid needs an odd number ≥ 3 of real nodes"));
        }
        Ok(())
    }

    fn re_nodes(&self) -> Vec<f64> {
        let n = self.re_points;
        (0..n)
            .map(|i| -self.radius + 2.0 * self.radius * i as f64 / (n - 1) as f64)
            .collect()
    }

    fn im_nodes(&self) -> Vec<f64> {
        let n = self.im_points;
        if n == 1 {
            return vec![0.0];
        }
        (0..n).map(|i| self.im_max * i as f64 / (n - 1) as f64).collect()
    }

    pub fn describe(&self) -> String {
        format!(
            "Re in [-{r}, {r}] ({} nodes), Im in [0, {}] ({} nodes), for eta and beta; compass refinement",
            self.re_points,
            self.im_max,
            self.im_points,
            r = self.radius
        )
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct DecouplingEstimate {
    pub s: f64,
    pub kappa_hat: f64,
    /// `D` with `C(λ,s) = |λ|^s (1-s)^s D`.
    pub d_statement: f64,
    /// `D` with `C(λ,s) = |λ|^s k^s`, `k = (1-s)/D^s`.
    pub d_proof: f64,
    pub eta: Complex64,
    pub beta: Complex64,
    pub minimizer_on_boundary: bool,
    pub search: Option<DecouplingSearch>,
    pub ratio_evaluations: usize,
}

fn d_conventions(s: f64, kappa: f64) -> (f64, f64) {
    let d_statement = kappa / (1.0 - s).powf(s);
    let d_proof = ((1.0 - s) / kappa.powf(1.0 / s)).powf(1.0 / s);
    (d_statement, d_proof)
}

impl DecouplingEstimate {
    /// Pessimistic fallback from a user-supplied `D` in the
    /// `|λ|^s (1-s)^s D` convention.
    pub fn from_user_d(s: f64, d: f64) -> Result<Self> {
        check_s(s)?;
        if !(d.is_finite() && d > 0.0) {
            return Err(Error::invalid("user-supplied D must be positive"));
        }
        let kappa_hat = (1.0 - s).powf(s) * d;
        let (d_statement, d_proof) = d_conventions(s, kappa_hat);
        Ok(DecouplingEstimate {
            s,
            kappa_hat,
            d_statement,
            d_proof,
            eta: Complex64::new(f64::NAN, f64::NAN),
            beta: Complex64::new(f64::NAN, f64::NAN),
            minimizer_on_boundary: false,
            search: None,
            ratio_evaluations: 0,
        })
    }

    fn same_s(&self, s: f64) -> Result<()> {
        if (s - self.s).abs() <= 1e-12 {
            Ok(())
        } else {
            Err(Error::invalid(format!(
                "decoupling constant computed at s = {} but used at s = {s}",
                self.s
            )))
        }
    }

    /// [`super::coupling_constant`] with this estimate's `κ`.
    pub fn coupling_constant(&self, energy: f64, coupling: f64, s: f64, on_support: bool) -> Result<f64> {
        self.same_s(s)?;
        Ok(super::coupling_constant(energy, coupling, s, on_support, self.kappa_hat))
    }

    /// [`super::k_s_factor`] with this estimate's `κ`.
    pub fn k_s_factor(
        &self,
        kernel: &KernelOperator<f64>,
        energy: f64,
        coupling: f64,
        s: f64,
        profile: super::SiteProfile,
    ) -> Result<f64> {
        self.same_s(s)?;
        super::k_s_factor(kernel, energy, coupling, s, profile, self.kappa_hat)
    }

    /// [`super::lambda_threshold`] with this estimate's `κ`.
    pub fn lambda_threshold(&self, kernel: &KernelOperator<f64>, s: f64) -> Result<f64> {
        self.same_s(s)?;
        super::lambda_threshold(kernel, s, self.kappa_hat)
    }
}

fn check_s(s: f64) -> Result<()> {
    if s > 0.0 && s < 1.0 {
        Ok(())
    } else {
        Err(Error::invalid(format!("s must lie in (0,1), got {s}")))
    }
}

fn breaks(law: &Law, extra: &[f64]) -> Vec<f64> {
    let (lo, hi) = law.support();
    let mut pts = vec![lo, hi];
    pts.extend(extra.iter().copied().filter(|x| *x > lo && *x < hi));
    if let Law::TruncatedCauchy { scale, .. } | Law::Gaussian { sd: scale, .. } = *law {
        let c = law.mean();
        pts.extend([c - scale, c + scale].into_iter().filter(|x| *x > lo && *x < hi));
    }
    pts.sort_by(f64::total_cmp);
    pts.dedup();
    pts
}

fn moment(law: &Law, s: f64, beta: Complex64) -> Result<f64> {
    let mut f = |x: f64| (Complex64::new(x, 0.0) - beta).norm().powf(s) * law.density(x);
    Ok(integrate_with_breaks(&mut f, &breaks(law, &[beta.re]), ABS_TOL, REL_TOL)?.value)
}

fn joint_moment(law: &Law, s: f64, eta: Complex64, beta: Complex64) -> Result<f64> {
    let mut f = |x: f64| {
        let z = Complex64::new(x, 0.0);
        ((z - eta).norm() * (z - beta).norm()).powf(s) * law.density(x)
    };
    Ok(integrate_with_breaks(&mut f, &breaks(law, &[eta.re, beta.re]), ABS_TOL, REL_TOL)?.value)
}

/// `∫|x-η|^s |x-β|^s dμ / ∫|x-β|^s dμ` by adaptive quadrature with break
/// points at the real parts.
pub fn decoupling_ratio(law: &Law, s: f64, eta: Complex64, beta: Complex64) -> Result<f64> {
    check_s(s)?;
    law.validate()?;
    let den = moment(law, s, beta)?;
    if !(den > 0.0) {
        return Err(Error::Numerical {
            what: "decoupling denominator".into(),
            achieved: den,
            requested: 0.0,
        });
    }
    Ok(joint_moment(law, s, eta, beta)? / den)
}

/// Grid minimum of [`decoupling_ratio`] followed by compass refinement.
pub fn estimate_decoupling(law: &Law, s: f64, search: &DecouplingSearch) -> Result<DecouplingEstimate> {
    check_s(s)?;
    law.validate()?;
    search.validate()?;
    let re = search.re_nodes();
    let im = search.im_nodes();
    let points: Vec<Complex64> = re
        .iter()
        .flat_map(|&x| im.iter().map(move |&y| Complex64::new(x, y)))
        .collect();
    let denominators: Vec<f64> = points
        .par_iter()
        .map(|&b| moment(law, s, b))
        .collect::<Result<_>>()?;
    // rows indexed by β, each a scan over η; reduction is sequential
    let rows: Vec<(f64, usize)> = points
        .par_iter()
        .enumerate()
        .map(|(j, &b)| {
            let mut best = (f64::INFINITY, 0);
            for (i, &e) in points.iter().enumerate() {
                let r = joint_moment(law, s, e, b)? / denominators[j];
                if r < best.0 {
                    best = (r, i);
                }
            }
            Ok(best)
        })
        .collect::<Result<_>>()?;
    let mut evaluations = points.len() * points.len();
    let (mut best, mut eta, mut beta) = (f64::INFINITY, points[0], points[0]);
    for (j, &(r, i)) in rows.iter().enumerate() {
        if r < best {
            best = r;
            eta = points[i];
            beta = points[j];
        }
    }
    if !best.is_finite() {
        return Err(Error::Numerical {
            what: "decoupling grid search".into(),
            achieved: best,
            requested: 0.0,
        });
    }

    // compass search on (Re η, Im η, Re β, Im β)
    let clamp = |v: [f64; 4]| {
        [
            v[0].clamp(-search.radius, search.radius),
            v[1].clamp(0.0, search.im_max),
            v[2].clamp(-search.radius, search.radius),
            v[3].clamp(0.0, search.im_max),
        ]
    };
    let mut x = [eta.re, eta.im, beta.re, beta.im];
    let mut step = 2.0 * search.radius / (search.re_points - 1) as f64;
    let min_step = 1e-6 * search.radius;
    while step >= min_step {
        let mut improved = false;
        for axis in 0..4 {
            for dir in [-1.0, 1.0] {
                let mut y = x;
                y[axis] += dir * step;
                let y = clamp(y);
                if y == x {
                    continue;
                }
                let r = decoupling_ratio(law, s, Complex64::new(y[0], y[1]), Complex64::new(y[2], y[3]))?;
                evaluations += 1;
                if r < best {
                    best = r;
                    x = y;
                    improved = true;
                }
            }
        }
        if !improved {
            step *= 0.5;
        }
    }
    let eta = Complex64::new(x[0], x[1]);
    let beta = Complex64::new(x[2], x[3]);
    let edge = |v: f64, lim: f64| (v.abs() - lim).abs() <= 1e-9 * search.radius;
    let on_boundary = edge(x[0], search.radius)
        || edge(x[2], search.radius)
        || (search.im_max > 0.0 && (edge(x[1], search.im_max) || edge(x[3], search.im_max)));
    let (d_statement, d_proof) = d_conventions(s, best);
    Ok(DecouplingEstimate {
        s,
        kappa_hat: best,
        d_statement,
        d_proof,
        eta,
        beta,
        minimizer_on_boundary: on_boundary,
        search: Some(*search),
        ratio_evaluations: evaluations,
    })
}
