//! Free evolution `⟨δ_n, e^{-itH₀} δ_m⟩` for separable cosine symbols.
//!
//! The kernel factorizes over axes,
//! `K_t(d) = Π_i (1/2π) ∫ e^{-i t h_i(θ) + i d_i θ} dθ`,
//! and each axis factor comes from one FFT of the samples of
//! `e^{-i t h_i}` (the periodic trapezoid rule). The integrand is entire, so
//! shifting `θ → θ ± iy` gives the envelope
//! `|a(d)| ≤ exp(-|d| y + |t| Σ_k 2|c_k| sinh(k y))` for every `y > 0`.
//! The envelope bounds the aliasing error of the trapezoid rule and
//! certifies every truncated lattice sum in this module.

mod decay;
mod sparse;

use num_complex::Complex64;

use crate::bessel::bessel_j;
use crate::error::{Error, Result};
use crate::fourier::{coefficients_1d, slot};
use crate::lattice::Site;
use crate::operators::{CosineTerm, SymbolSpec};

pub use decay::{
    log_spaced, power_law_slope, verify_offdiagonal_decay, verify_time_decay, DecayProbe, OffDiagonalReport,
    OffDiagonalRow, TimeDecayFit,
};
pub use sparse::{
    cook_integrand, kernel_weighted_tail_bound, sparseness_integral, weighted_tail_norm, CookOptions, CookRow,
    SparsenessResult, Verdict, Window,
};

/// Requested bound on the aliasing error of every axis factor.
pub const ALIAS_TOL: f64 = 1e-13;
const MAX_NODES: usize = 1 << 26;

/// A finitely supported initial state `φ`.
pub type State = [(Site, Complex64)];

/// `δ_n` as a one-entry state.
pub fn delta(n: Site) -> Vec<(Site, Complex64)> {
    vec![(n, Complex64::new(1.0, 0.0))]
}

/// `Σ_k 2k|c_k|`, an upper bound for `sup|h'|` and the speed of the light
/// cone.
pub fn axis_speed(terms: &[CosineTerm<f64>]) -> f64 {
    terms.iter().map(|t| 2.0 * t.k as f64 * t.c.abs()).sum()
}

fn sinh_sum(terms: &[CosineTerm<f64>], y: f64) -> f64 {
    terms.iter().map(|t| 2.0 * t.c.abs() * (t.k as f64 * y).sinh()).sum()
}

fn cosh_slope(terms: &[CosineTerm<f64>], y: f64) -> f64 {
    terms.iter().map(|t| 2.0 * t.c.abs() * t.k as f64 * (t.k as f64 * y).cosh()).sum()
}

/// Minimizer `y > 0` of `-d y + |t| S(y)`, or `None` when `d ≤ |t| S'(0)`.
fn optimal_shift(terms: &[CosineTerm<f64>], t: f64, d: f64) -> Option<f64> {
    let t = t.abs();
    if t * cosh_slope(terms, 0.0) >= d {
        return None;
    }
    if t == 0.0 || axis_speed(terms) == 0.0 {
        return Some(f64::INFINITY);
    }
    let g = |y: f64| t * cosh_slope(terms, y) - d;
    let mut hi = 1.0;
    while g(hi) < 0.0 {
        hi *= 2.0;
        if hi > 1e3 {
            break;
        }
    }
    let mut lo = 0.0;
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if g(mid) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Some(0.5 * (lo + hi))
}

fn log_envelope_at(terms: &[CosineTerm<f64>], t: f64, d: f64, y: f64) -> f64 {
    if y.is_infinite() {
        return if d > 0.0 { f64::NEG_INFINITY } else { 0.0 };
    }
    -d * y + t.abs() * sinh_sum(terms, y)
}

/// `min(1, inf_y exp(-|d| y + |t| S(y)))`, a bound on `|a_t(d)|`.
pub fn axis_envelope(terms: &[CosineTerm<f64>], t: f64, d: i64) -> f64 {
    let d = d.unsigned_abs() as f64;
    match optimal_shift(terms, t, d) {
        None => 1.0,
        Some(y) => log_envelope_at(terms, t, d, y).exp().min(1.0),
    }
}

/// Bound on `Σ_{j ≥ j0} (1+j)^p |a_t(j)|^q` for `q ∈ {1, 2}` and `p ≥ 0`,
/// summing envelope terms and closing with a geometric majorant.
pub(crate) fn envelope_sum(terms: &[CosineTerm<f64>], t: f64, j0: u64, p: f64, q: f64) -> f64 {
    let cone = t.abs() * axis_speed(terms);
    let mut sum = 0.0;
    let mut j = j0;
    loop {
        let jf = j as f64;
        let term = (1.0 + jf).powf(p) * axis_envelope(terms, t, j as i64).powf(q);
        sum += term;
        if jf > cone {
            if let Some(y) = optimal_shift(terms, t, jf + 1.0) {
                if y.is_infinite() {
                    return sum;
                }
                // fixed-y majorant for i > j: (1+i)^p exp(q(-i y + |t| S(y)))
                let ratio = ((jf + 3.0) / (jf + 2.0)).powf(p) * (-q * y).exp();
                if ratio < 0.5 {
                    let next = (2.0 + jf).powf(p) * (q * log_envelope_at(terms, t, jf + 1.0, y)).exp();
                    return sum + next / (1.0 - ratio);
                }
            }
        }
        j += 1;
        if j - j0 > 10_000_000 {
            return f64::INFINITY;
        }
    }
}

/// One axis factor `a_t(d)` for all `d` resolved by the grid.
#[derive(Clone, Debug)]
pub struct AxisPropagator {
    t: f64,
    n: usize,
    coeffs: Vec<Complex64>,
    error_bound: f64,
}

impl AxisPropagator {
    /// Trapezoid rule with enough nodes that the aliasing error at every
    /// `|d| ≤ dmax` is at most [`ALIAS_TOL`].
    pub fn new(terms: &[CosineTerm<f64>], t: f64, dmax: u64) -> Result<Self> {
        if !t.is_finite() {
            return Err(Error::invalid("time must be finite"));
        }
        let cone = t.abs() * axis_speed(terms);
        let mut n = ((2.0 * (dmax as f64 + cone) + 64.0) as usize).next_power_of_two();
        loop {
            // alias of d sits at distance ≥ n - dmax; both directions
            let alias = 2.0 * envelope_sum(terms, t, n as u64 - dmax, 0.0, 1.0);
            if alias <= ALIAS_TOL {
                let step = std::f64::consts::TAU / n as f64;
                let samples: Vec<Complex64> = (0..n)
                    .map(|j| {
                        let theta = j as f64 * step;
                        let h: f64 = terms
                            .iter()
                            .map(|c| 2.0 * c.c * (c.k as f64 * theta).cos())
                            .sum();
                        Complex64::from_polar(1.0, -t * h)
                    })
                    .collect();
                return Ok(AxisPropagator {
                    t,
                    n,
                    coeffs: coefficients_1d(&samples),
                    error_bound: alias + 1e-15 * (n as f64).log2(),
                });
            }
            if n >= MAX_NODES {
                return Err(Error::Numerical {
                    what: "propagator quadrature".into(),
                    achieved: alias,
                    requested: ALIAS_TOL,
                });
            }
            n *= 2;
        }
    }

    pub fn t(&self) -> f64 {
        self.t
    }

    /// `a_t(d)`; offsets beyond the grid are below the envelope and
    /// returned as zero.
    pub fn get(&self, d: i64) -> Complex64 {
        if d.unsigned_abs() as usize >= self.n / 2 {
            return Complex64::new(0.0, 0.0);
        }
        self.coeffs[slot(d, self.n)]
    }

    /// Largest `|d|` with a stored value.
    pub fn reach(&self) -> i64 {
        (self.n / 2) as i64 - 1
    }

    pub fn error_bound(&self) -> f64 {
        self.error_bound
    }

    /// `max_d |a_t(d)|`
    pub fn max_abs(&self) -> f64 {
        self.coeffs.iter().fold(0.0, |m, c| m.max(c.norm()))
    }
}

/// Axis factors of a separable symbol at one time, shared between
/// identical axes.
#[derive(Clone, Debug)]
pub struct Propagator {
    t: f64,
    axis_slot: Vec<usize>,
    factors: Vec<AxisPropagator>,
}

impl Propagator {
    pub fn new(spec: &SymbolSpec<f64>, t: f64, dmax: u64) -> Result<Self> {
        let mut distinct: Vec<&[CosineTerm<f64>]> = Vec::new();
        let mut axis_slot = Vec::with_capacity(spec.dim());
        for axis in spec.axes() {
            match distinct.iter().position(|a| *a == axis.as_slice()) {
                Some(i) => axis_slot.push(i),
                None => {
                    axis_slot.push(distinct.len());
                    distinct.push(axis);
                }
            }
        }
        let factors = distinct
            .iter()
            .map(|terms| AxisPropagator::new(terms, t, dmax))
            .collect::<Result<_>>()?;
        Ok(Propagator { t, axis_slot, factors })
    }

    pub fn t(&self) -> f64 {
        self.t
    }

    pub fn dim(&self) -> usize {
        self.axis_slot.len()
    }

    pub fn axis(&self, i: usize) -> &AxisPropagator {
        &self.factors[self.axis_slot[i]]
    }

    /// `K_t(d) = Π_i a_{t,i}(d_i)`
    pub fn kernel(&self, d: &[i64]) -> Complex64 {
        d.iter()
            .enumerate()
            .fold(Complex64::new(1.0, 0.0), |acc, (i, &di)| acc * self.axis(i).get(di))
    }

    /// Worst-case error of [`Self::kernel`] (each factor has modulus ≤ 1).
    pub fn error_bound(&self) -> f64 {
        (0..self.dim()).map(|i| self.axis(i).error_bound()).sum()
    }

    /// `ψ_t(m) = Σ_n φ(n) K_t(m - n)`
    pub fn evolve_at(&self, phi: &State, m: &Site) -> Complex64 {
        phi.iter()
            .map(|(n, a)| {
                let d: Vec<i64> = m.coords().iter().zip(n.coords()).map(|(x, y)| x - y).collect();
                a * self.kernel(&d)
            })
            .sum()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct PropagatorQuery {
    pub spec: SymbolSpec<f64>,
    pub t: f64,
    pub offsets: Vec<Site>,
}

/// `K_t(d)` at each requested offset, in order.
pub fn evolution_kernel(q: &PropagatorQuery) -> Result<Vec<Complex64>> {
    if let Some(d) = q.offsets.iter().find(|d| d.dim() != q.spec.dim()) {
        return Err(Error::invalid(format!("offset {d:?} has the wrong dimension")));
    }
    let dmax = q.offsets.iter().map(|d| d.max_norm()).max().unwrap_or(0);
    let prop = Propagator::new(&q.spec, q.t, dmax)?;
    Ok(q.offsets.iter().map(|d| prop.kernel(d.coords())).collect())
}

/// `(-i)^{d/k} J_{d/k}(2ct)` for the single-term axis `2c cos(kθ)`, zero
/// unless `k | d`.
pub fn bessel_axis_factor(term: CosineTerm<f64>, t: f64, d: i64) -> Complex64 {
    let k = term.k as i64;
    if d % k != 0 {
        return Complex64::new(0.0, 0.0);
    }
    let m = d / k;
    let phase = Complex64::new(0.0, -1.0).powi(m.rem_euclid(4) as i32);
    phase * bessel_j(m, 2.0 * term.c * t)
}

/// Bessel-product kernel; every axis must be a single cosine term.
pub fn bessel_kernel(spec: &SymbolSpec<f64>, t: f64, d: &Site) -> Result<Complex64> {
    if d.dim() != spec.dim() {
        return Err(Error::invalid("offset has the wrong dimension"));
    }
    let mut acc = Complex64::new(1.0, 0.0);
    for (i, &di) in d.coords().iter().enumerate() {
        match spec.axis(i) {
            [] => {
                if di != 0 {
                    return Ok(Complex64::new(0.0, 0.0));
                }
            }
            [term] => acc *= bessel_axis_factor(*term, t, di),
            _ => return Err(Error::Unsupported("Bessel path needs one cosine term per axis".into())),
        }
    }
    Ok(acc)
}

/// `sup_θ |h_i'(θ)|` on a 2^16-point grid.
pub fn axis_derivative_sup(spec: &SymbolSpec<f64>, i: usize) -> f64 {
    let n = 1usize << 16;
    let step = std::f64::consts::TAU / n as f64;
    (0..n).fold(0.0, |m, j| m.max(spec.axis_derivative(i, 1, j as f64 * step).abs()))
}

/// `max_i sup |h_i'|`
pub fn derivative_sup(spec: &SymbolSpec<f64>) -> f64 {
    (0..spec.dim()).fold(0.0, |m, i| m.max(axis_derivative_sup(spec, i)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quadrature::integrate;

    fn lap(dim: usize) -> SymbolSpec<f64> {
        SymbolSpec::laplacian(dim)
    }

    #[test]
    fn identity_at_time_zero() {
        let p = Propagator::new(&lap(2), 0.0, 5).unwrap();
        assert!((p.kernel(&[0, 0]) - 1.0).norm() < 1e-15);
        assert!(p.kernel(&[1, 0]).norm() < 1e-15);
        assert!(p.kernel(&[3, -2]).norm() < 1e-15);
    }

    #[test]
    fn j0_of_two() {
        let a = AxisPropagator::new(lap(1).axis(0), 1.0, 0).unwrap();
        let tp = std::f64::consts::TAU;
        let re = integrate(|x| (2.0 * x.cos()).cos() / tp, 0.0, tp, 1e-14, 0.0).unwrap().value;
        let im = integrate(|x| -(2.0 * x.cos()).sin() / tp, 0.0, tp, 1e-14, 0.0).unwrap().value;
        assert!((a.get(0) - Complex64::new(re, im)).norm() < 1e-12);
        assert!((a.get(0).re - 0.223_890_779_141_235_7).abs() < 1e-12);
        assert!((a.get(0) - bessel_axis_factor(CosineTerm { k: 1, c: 1.0 }, 1.0, 0)).norm() < 1e-12);
    }

    #[test]
    fn matches_bessel_and_is_unitary() {
        for t in [0.5, 5.0, 37.0] {
            let p = Propagator::new(&lap(1), t, 200).unwrap();
            for d in -200..=200 {
                let want = bessel_kernel(&lap(1), t, &Site::from([d])).unwrap();
                assert!((p.kernel(&[d]) - want).norm() < 1e-10, "t={t} d={d}");
            }
            let total: f64 = (-p.axis(0).reach()..=p.axis(0).reach()).map(|d| p.kernel(&[d]).norm_sqr()).sum();
            assert!((total - 1.0).abs() < 1e-10);
        }
    }

    #[test]
    fn higher_harmonic_skips_offsets() {
        let spec = SymbolSpec::new(vec![vec![CosineTerm { k: 2, c: 0.5 }]]).unwrap();
        let p = Propagator::new(&spec, 3.0, 20).unwrap();
        for d in -20..=20i64 {
            let want = bessel_kernel(&spec, 3.0, &Site::from([d])).unwrap();
            assert!((p.kernel(&[d]) - want).norm() < 1e-12);
            if d % 2 != 0 {
                assert!(p.kernel(&[d]).norm() < 1e-13);
            }
        }
    }

    #[test]
    fn conjugation_and_group_law() {
        let spec = SymbolSpec::new(vec![vec![CosineTerm { k: 1, c: 1.0 }, CosineTerm { k: 3, c: -0.4 }]]).unwrap();
        let (t1, t2) = (1.3, 2.1);
        let a = Propagator::new(&spec, t1, 200).unwrap();
        let b = Propagator::new(&spec, t2, 200).unwrap();
        let ab = Propagator::new(&spec, t1 + t2, 40).unwrap();
        let back = Propagator::new(&spec, -(t1 + t2), 40).unwrap();
        for d in -40..=40i64 {
            let conv: Complex64 = (-150..=150).map(|e| a.kernel(&[e]) * b.kernel(&[d - e])).sum();
            assert!((conv - ab.kernel(&[d])).norm() < 1e-10, "d={d}");
            assert!((back.kernel(&[d]) - ab.kernel(&[d]).conj()).norm() < 1e-13);
        }
    }

    #[test]
    fn product_structure() {
        let spec = SymbolSpec::new(vec![
            vec![CosineTerm { k: 1, c: 1.0 }],
            vec![CosineTerm { k: 1, c: 0.5 }, CosineTerm { k: 2, c: 0.25 }],
        ])
        .unwrap();
        let q = PropagatorQuery {
            spec: spec.clone(),
            t: 2.5,
            offsets: vec![Site::from([3, -1]), Site::from([0, 4])],
        };
        let k = evolution_kernel(&q).unwrap();
        let p = Propagator::new(&spec, 2.5, 4).unwrap();
        assert_eq!(k[0], p.axis(0).get(3) * p.axis(1).get(-1));
        assert_eq!(k[1], p.axis(0).get(0) * p.axis(1).get(4));
    }

    #[test]
    fn envelope_dominates() {
        let terms = lap(1).axis(0).to_vec();
        for t in [0.7, 4.0, 25.0] {
            let p = AxisPropagator::new(&terms, t, 300).unwrap();
            for d in 0..300 {
                assert!(p.get(d).norm() <= axis_envelope(&terms, t, d) * (1.0 + 1e-12) + 1e-14, "t={t} d={d}");
            }
            // tail sum bound against the explicit sum
            let from = (3.0 * t) as u64 + 5;
            let explicit: f64 = (from as i64..=p.reach()).map(|d| p.get(d).norm_sqr()).sum();
            assert!(explicit <= envelope_sum(&terms, t, from, 0.0, 2.0) + 1e-28);
        }
    }

    #[test]
    fn derivative_sup_of_laplacian() {
        assert_eq!(derivative_sup(&lap(3)), 2.0);
    }
}
