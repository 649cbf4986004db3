//! Periodic trapezoidal quadrature via FFT.
//!
//! For a smooth 2π-periodic `f`, the N-point trapezoid rule computes
//! `(2π)^{-ν} ∫ f(θ) e^{i d·θ} dθ` for all `|d_i| < N/2` at once; the error is
//! the aliased mass at `d + N·k`, which decays with `f`'s smoothness.

use num_complex::Complex64;
use rustfft::FftPlanner;

/// `(1/N) Σ_j f(θ_j) e^{+i d θ_j}` for every `d`, stored FFT-style
/// (index `d mod N`).
pub fn coefficients_1d(samples: &[Complex64]) -> Vec<Complex64> {
    let n = samples.len();
    let mut buf = samples.to_vec();
    let mut planner = FftPlanner::new();
    planner.plan_fft_inverse(n).process(&mut buf);
    let scale = 1.0 / n as f64;
    buf.iter_mut().for_each(|c| *c *= scale);
    buf
}

/// ν-dimensional analogue of [`coefficients_1d`] on an `n^ν` grid stored
/// row-major (first axis slowest).
pub fn coefficients_nd(samples: &[Complex64], n: usize, dim: usize) -> Vec<Complex64> {
    assert_eq!(samples.len(), n.pow(dim as u32));
    let mut buf = samples.to_vec();
    let mut planner = FftPlanner::new();
    let fft = planner.plan_fft_inverse(n);
    let mut line = vec![Complex64::new(0.0, 0.0); n];
    for axis in 0..dim {
        let stride = n.pow((dim - 1 - axis) as u32);
        let outer = n.pow(axis as u32);
        for o in 0..outer {
            for inner in 0..stride {
                let base = o * stride * n + inner;
                for k in 0..n {
                    line[k] = buf[base + k * stride];
                }
                fft.process(&mut line);
                for k in 0..n {
                    buf[base + k * stride] = line[k];
                }
            }
        }
    }
    let scale = 1.0 / buf.len() as f64;
    buf.iter_mut().for_each(|c| *c *= scale);
    buf
}

/// Inverse of [`coefficients_nd`]: evaluate `Σ_d c(d) e^{-i d·θ}` on the grid.
pub fn synthesize_nd(coeffs: &[Complex64], n: usize, dim: usize) -> Vec<Complex64> {
    let mut buf = coeffs.to_vec();
    let mut planner = FftPlanner::new();
    let fft = planner.plan_fft_forward(n);
    let mut line = vec![Complex64::new(0.0, 0.0); n];
    for axis in 0..dim {
        let stride = n.pow((dim - 1 - axis) as u32);
        let outer = n.pow(axis as u32);
        for o in 0..outer {
            for inner in 0..stride {
                let base = o * stride * n + inner;
                for k in 0..n {
                    line[k] = buf[base + k * stride];
                }
                fft.process(&mut line);
                for k in 0..n {
                    buf[base + k * stride] = line[k];
                }
            }
        }
    }
    buf
}

/// Signed frequency of FFT slot `k` on an `n`-point grid.
#[inline]
pub fn signed_frequency(k: usize, n: usize) -> i64 {
    if k < n.div_ceil(2) {
        k as i64
    } else {
        k as i64 - n as i64
    }
}

/// FFT slot holding frequency `d`.
#[inline]
pub fn slot(d: i64, n: usize) -> usize {
    d.rem_euclid(n as i64) as usize
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn cosine_coefficients() {
        let n = 16;
        let samples: Vec<Complex64> = (0..n)
            .map(|j| Complex64::new(2.0 * (2.0 * PI * j as f64 / n as f64).cos(), 0.0))
            .collect();
        let c = coefficients_1d(&samples);
        assert!((c[slot(1, n)].re - 1.0).abs() < 1e-14);
        assert!((c[slot(-1, n)].re - 1.0).abs() < 1e-14);
        assert!(c[0].norm() < 1e-14);
    }

    #[test]
    fn nd_round_trip() {
        let n = 8;
        let samples: Vec<Complex64> = (0..n * n)
            .map(|j| Complex64::new((j as f64).sin(), (j as f64 * 0.3).cos()))
            .collect();
        let c = coefficients_nd(&samples, n, 2);
        let back = synthesize_nd(&c, n, 2);
        for (a, b) in samples.iter().zip(&back) {
            assert!((a - b).norm() < 1e-12);
        }
    }
}
