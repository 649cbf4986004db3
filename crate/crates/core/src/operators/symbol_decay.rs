//! Fourier coefficients of general smooth symbols and the crude
//! `C_h ν^{2ν+1} / |d|^{2ν+1}` off-diagonal envelope.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::fourier::{coefficients_nd, signed_frequency, slot, synthesize_nd};
use crate::lattice::Site;

/// A smooth 2π-periodic real symbol on the ν-torus.
pub struct GeneralSymbol<'a> {
    pub dim: usize,
    pub eval: Box<dyn Fn(&[f64]) -> f64 + Send + Sync + 'a>,
}

impl<'a> GeneralSymbol<'a> {
    pub fn new(dim: usize, eval: impl Fn(&[f64]) -> f64 + Send + Sync + 'a) -> Self {
        GeneralSymbol {
            dim,
            eval: Box::new(eval),
        }
    }
}

/// Trapezoid-rule Fourier coefficients on an `n^ν` grid.
#[derive(Clone, Debug)]
pub struct CoefficientGrid {
    pub n: usize,
    pub dim: usize,
    pub coeffs: Vec<Complex64>,
    /// Largest change of any coefficient under the last grid doubling.
    pub achieved_tol: f64,
}

impl CoefficientGrid {
    fn index(&self, d: &[i64]) -> usize {
        d.iter().fold(0, |acc, &x| acc * self.n + slot(x, self.n))
    }

    /// `c(d) = (2π)^{-ν} ∫ h(θ) e^{i d·θ} dθ`; zero beyond the resolved band.
    pub fn get(&self, d: &Site) -> f64 {
        let half = (self.n / 2) as i64;
        if d.coords().iter().any(|x| x.abs() >= half) {
            return 0.0;
        }
        self.coeffs[self.index(d.coords())].re
    }
}

fn sample_grid(symbol: &GeneralSymbol<'_>, n: usize) -> Vec<Complex64> {
    let dim = symbol.dim;
    let total = n.pow(dim as u32);
    let step = 2.0 * std::f64::consts::PI / n as f64;
    let mut theta = vec![0.0; dim];
    (0..total)
        .map(|mut k| {
            for axis in (0..dim).rev() {
                theta[axis] = (k % n) as f64 * step;
                k /= n;
            }
            Complex64::new((symbol.eval)(&theta), 0.0)
        })
        .collect()
}

fn max_points(dim: usize) -> usize {
    match dim {
        1 => 1 << 16,
        2 => 1 << 10,
        3 => 1 << 7,
        _ => 1 << 5,
    }
}

/// Fourier coefficients by grid doubling until every resolved coefficient
/// is stable to `tol`.
pub fn fourier_coefficients(symbol: &GeneralSymbol<'_>, tol: f64) -> Result<CoefficientGrid> {
    if symbol.dim == 0 {
        return Err(Error::invalid("symbol dimension must be at least 1"));
    }
    let dim = symbol.dim;
    let limit = max_points(dim);
    let mut n = 16usize;
    let mut prev = coefficients_nd(&sample_grid(symbol, n), n, dim);
    loop {
        let m = 2 * n;
        let next = coefficients_nd(&sample_grid(symbol, m), m, dim);
        let mut diff = 0.0f64;
        let total = n.pow(dim as u32);
        for k in 0..total {
            let mut rem = k;
            let mut d = vec![0i64; dim];
            for axis in (0..dim).rev() {
                d[axis] = signed_frequency(rem % n, n);
                rem /= n;
            }
            let j = d.iter().fold(0, |acc, &x| acc * m + slot(x, m));
            diff = diff.max((prev[k] - next[j]).norm());
        }
        if diff <= tol {
            return Ok(CoefficientGrid {
                n: m,
                dim,
                coeffs: next,
                achieved_tol: diff,
            });
        }
        if m >= limit {
            return Err(Error::Numerical {
                what: "symbol Fourier coefficients".into(),
                achieved: diff,
                requested: tol,
            });
        }
        prev = next;
        n = m;
    }
}

fn multi_indices(dim: usize, order: u32) -> Vec<Vec<u32>> {
    if dim == 1 {
        return vec![vec![order]];
    }
    let mut out = Vec::new();
    for first in 0..=order {
        for mut rest in multi_indices(dim - 1, order - first) {
            rest.insert(0, first);
            out.push(rest);
        }
    }
    out
}

/// `C_h = max_{|α| = 2ν+2} sup_θ |∂^α h(θ)|`, with derivatives taken
/// spectrally from the coefficient grid and evaluated on its nodes.
pub fn estimate_symbol_bound(grid: &CoefficientGrid) -> f64 {
    let (n, dim) = (grid.n, grid.dim);
    let order = 2 * dim as u32 + 2;
    let freqs: Vec<Vec<i64>> = (0..grid.coeffs.len())
        .map(|mut k| {
            let mut d = vec![0i64; dim];
            for axis in (0..dim).rev() {
                d[axis] = signed_frequency(k % n, n);
                k /= n;
            }
            d
        })
        .collect();
    let mut best = 0.0f64;
    for alpha in multi_indices(dim, order) {
        // ∂^α of Σ c(d) e^{-i d·θ} multiplies c(d) by Π (-i d_j)^{α_j}
        let weighted: Vec<Complex64> = grid
            .coeffs
            .iter()
            .zip(&freqs)
            .map(|(c, d)| {
                let mut f = Complex64::new(1.0, 0.0);
                for (&dj, &aj) in d.iter().zip(&alpha) {
                    f *= Complex64::new(0.0, -(dj as f64)).powu(aj);
                }
                c * f
            })
            .collect();
        let values = synthesize_nd(&weighted, n, dim);
        best = values.iter().fold(best, |m, v| m.max(v.norm()));
    }
    best
}

#[derive(Clone, Debug, PartialEq)]
pub struct DecayRow {
    pub offset: Site,
    pub distance: u64,
    pub amplitude: f64,
    pub bound: f64,
    pub pass: bool,
}

/// Compare `|c(d)|` with `C_h ν^{2ν+1} / |d|^{2ν+1}` at each offset. `c_h`
/// defaults to [`estimate_symbol_bound`].
pub fn kernel_decay_check(symbol: &GeneralSymbol<'_>, offsets: &[Site], c_h: Option<f64>) -> Result<Vec<DecayRow>> {
    let grid = fourier_coefficients(symbol, 1e-10)?;
    let c_h = c_h.unwrap_or_else(|| estimate_symbol_bound(&grid));
    let nu = symbol.dim as f64;
    let p = 2.0 * nu + 1.0;
    offsets
        .iter()
        .map(|d| {
            if d.dim() != symbol.dim {
                return Err(Error::invalid(format!("offset {d:?} has wrong dimension")));
            }
            let dist = d.max_norm();
            let amplitude = grid.get(d).abs();
            let bound = if dist == 0 {
                f64::INFINITY
            } else {
                c_h * nu.powf(p) / (dist as f64).powf(p)
            };
            Ok(DecayRow {
                offset: d.clone(),
                distance: dist,
                amplitude,
                bound,
                pass: dist == 0 || amplitude <= bound,
            })
        })
        .collect()
}
