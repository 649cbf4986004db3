//! The two dispersive regimes of the free kernel: fast off-diagonal decay
//! outside the light cone, and `t^{-1/3}` (caustic) or `t^{-1/2}`
//! (nondegenerate) decay in time.

use super::{axis_speed, derivative_sup, Propagator};
use crate::error::{Error, Result};
use crate::operators::SymbolSpec;
use crate::stats::fit_line;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct OffDiagonalRow {
    pub distance: u64,
    /// `max_{|d|_∞ = distance} |K_t(d)|`
    pub amplitude: f64,
    /// `C / distance^{2ν+1}`
    pub bound: f64,
    pub pass: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub struct OffDiagonalReport {
    pub h_prime_sup: f64,
    pub first_admitted: u64,
    pub c: f64,
    pub rows: Vec<OffDiagonalRow>,
    pub pass: bool,
}

/// Check `|K_t(d)| ≤ C/|d|^{2ν+1}` over admitted distances
/// (`ν|t|‖h'‖/|d| ≤ 1/2`) in `d_lo..=d_hi`, with `C` calibrated at the
/// smallest admitted distance.
pub fn verify_offdiagonal_decay(spec: &SymbolSpec<f64>, t: f64, d_lo: u64, d_hi: u64) -> Result<OffDiagonalReport> {
    let nu = spec.dim() as f64;
    let hp = derivative_sup(spec);
    let admitted: Vec<u64> = (d_lo.max(1)..=d_hi)
        .filter(|&d| nu * t.abs() * hp / d as f64 <= 0.5)
        .collect();
    let Some(&first) = admitted.first() else {
        return Err(Error::invalid(format!(
            "no distance in [{d_lo}, {d_hi}] satisfies nu*|t|*|h'|/|d| <= 1/2"
        )));
    };
    let prop = Propagator::new(spec, t, d_hi)?;
    let slack = prop.error_bound();
    let p = 2.0 * nu + 1.0;
    let shell_max = |r: u64| -> f64 {
        let r = r as i64;
        let dim = spec.dim();
        let edge: Vec<f64> = (0..dim)
            .map(|i| prop.axis(i).get(r).norm().max(prop.axis(i).get(-r).norm()))
            .collect();
        let inner: Vec<f64> = (0..dim)
            .map(|i| (-r..=r).fold(0.0f64, |m, d| m.max(prop.axis(i).get(d).norm())))
            .collect();
        (0..dim)
            .map(|i| edge[i] * (0..dim).filter(|&j| j != i).map(|j| inner[j]).product::<f64>())
            .fold(0.0, f64::max)
    };
    let c = shell_max(first) * (first as f64).powf(p);
    let rows: Vec<OffDiagonalRow> = admitted
        .iter()
        .map(|&r| {
            let amplitude = shell_max(r);
            let bound = c / (r as f64).powf(p);
            OffDiagonalRow {
                distance: r,
                amplitude,
                bound,
                pass: amplitude <= bound * (1.0 + 1e-12) + slack,
            }
        })
        .collect();
    let pass = rows.iter().all(|r| r.pass);
    Ok(OffDiagonalReport {
        h_prime_sup: hp,
        first_admitted: first,
        c,
        rows,
        pass,
    })
}

/// `n` points log-spaced on `[a, b]`.
pub fn log_spaced(a: f64, b: f64, n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![a];
    }
    let (la, lb) = (a.ln(), b.ln());
    (0..n)
        .map(|i| match i {
            0 => a,
            i if i == n - 1 => b,
            i => (la + (lb - la) * i as f64 / (n - 1) as f64).exp(),
        })
        .collect()
}

/// Least-squares slope of `log v` against `log t`.
pub fn power_law_slope(ts: &[f64], values: &[f64]) -> Result<f64> {
    if ts.len() != values.len() {
        return Err(Error::invalid("time and value lists differ in length"));
    }
    let pts: Vec<(f64, f64)> = ts
        .iter()
        .zip(values)
        .filter(|(t, v)| **t > 0.0 && **v > 0.0)
        .map(|(t, v)| (t.ln(), v.ln()))
        .collect();
    if pts.len() < 3 {
        return Err(Error::Numerical {
            what: "power-law fit (fewer than three positive samples)".into(),
            achieved: pts.len() as f64,
            requested: 3.0,
        });
    }
    fit_line(&pts).map(|l| l.slope).ok_or_else(|| Error::Numerical {
        what: "power-law fit (all times equal)".into(),
        achieved: 0.0,
        requested: 1.0,
    })
}

/// What is tracked in time.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum DecayProbe {
    /// `M(t) = max_d |a_t(d)|`.
    MaxOverOffsets,
    /// `|a_t(d)|` at one offset, through its upper envelope over one beat
    /// period `2π/(max h - min h)`.
    Offset(i64),
}

#[derive(Clone, Debug, PartialEq)]
pub struct TimeDecayFit {
    pub probe: DecayProbe,
    pub times: Vec<f64>,
    /// `values[i][j]`: tracked amplitude of axis `i` at `times[j]`.
    pub values: Vec<Vec<f64>>,
    pub axis_slopes: Vec<f64>,
    /// `None` when the relevant critical points are degenerate.
    pub axis_targets: Vec<Option<f64>>,
    pub total_slope: f64,
    pub total_target: Option<f64>,
    pub pass: bool,
}

pub const SLOPE_TOL: f64 = 0.05;
const GRID: usize = 1 << 14;

fn axis_grid(spec: &SymbolSpec<f64>, i: usize, order: u32) -> Vec<f64> {
    let step = std::f64::consts::TAU / GRID as f64;
    (0..GRID).map(|j| spec.axis_derivative(i, order, j as f64 * step)).collect()
}

/// True when every sign change of `f` on the grid has `|g|` bounded away
/// from zero there (a simple zero of `f` with `g = f'`).
fn zeros_are_simple(f: &[f64], g: &[f64], scale: f64) -> Option<bool> {
    let n = f.len();
    let mut any = false;
    for j in 0..n {
        let (a, b) = (f[j], f[(j + 1) % n]);
        if a == 0.0 || a * b < 0.0 {
            any = true;
            let gv = g[j].abs().max(g[(j + 1) % n].abs());
            if gv <= 1e-6 * scale {
                return Some(false);
            }
        }
    }
    any.then_some(true)
}

fn axis_target(spec: &SymbolSpec<f64>, i: usize, probe: DecayProbe) -> Option<f64> {
    let scale = axis_speed(spec.axis(i)).max(f64::MIN_POSITIVE);
    match probe {
        // inflection points of h with nonzero third derivative
        DecayProbe::MaxOverOffsets => {
            let h2 = axis_grid(spec, i, 2);
            let h3 = axis_grid(spec, i, 3);
            zeros_are_simple(&h2, &h3, scale).filter(|&ok| ok).map(|_| -1.0 / 3.0)
        }
        // stationary points of h with nonzero curvature
        DecayProbe::Offset(_) => {
            let h1 = axis_grid(spec, i, 1);
            let h2 = axis_grid(spec, i, 2);
            zeros_are_simple(&h1, &h2, scale).filter(|&ok| ok).map(|_| -0.5)
        }
    }
}

fn beat_period(spec: &SymbolSpec<f64>, i: usize) -> Option<f64> {
    let h = axis_grid(spec, i, 0);
    let (lo, hi) = h.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| (a.min(v), b.max(v)));
    (hi > lo).then(|| std::f64::consts::TAU / (hi - lo))
}

const ENVELOPE_SAMPLES: usize = 32;

/// Fit the decay exponent of each axis over `t_grid ⊆ [50, 1000]`.
pub fn verify_time_decay(spec: &SymbolSpec<f64>, t_grid: &[f64], probe: DecayProbe) -> Result<TimeDecayFit> {
    if t_grid.len() < 3 {
        return Err(Error::invalid("time grid needs at least three points"));
    }
    if t_grid.iter().any(|t| !(50.0..=1000.0).contains(t)) {
        return Err(Error::invalid("time grid must lie in [50, 1000]"));
    }
    let dim = spec.dim();
    let mut values = Vec::with_capacity(dim);
    let mut slopes = Vec::with_capacity(dim);
    let mut targets = Vec::with_capacity(dim);
    for i in 0..dim {
        let axis_spec = SymbolSpec::new(vec![spec.axis(i).to_vec()])?;
        let vals: Vec<f64> = match probe {
            DecayProbe::MaxOverOffsets => t_grid
                .iter()
                .map(|&t| {
                    let reach = (t * axis_speed(spec.axis(i))).ceil() as u64 + 64;
                    Ok(Propagator::new(&axis_spec, t, reach)?.axis(0).max_abs())
                })
                .collect::<Result<_>>()?,
            DecayProbe::Offset(d) => {
                let period = beat_period(spec, i).ok_or_else(|| Error::Numerical {
                    what: "time-decay fit (constant axis symbol)".into(),
                    achieved: 0.0,
                    requested: 1.0,
                })?;
                t_grid
                    .iter()
                    .map(|&t| {
                        let mut m = 0.0f64;
                        for k in 0..ENVELOPE_SAMPLES {
                            let tau = t + period * k as f64 / ENVELOPE_SAMPLES as f64;
                            let p = Propagator::new(&axis_spec, tau, d.unsigned_abs())?;
                            m = m.max(p.axis(0).get(d).norm());
                        }
                        Ok(m)
                    })
                    .collect::<Result<_>>()?
            }
        };
        slopes.push(power_law_slope(t_grid, &vals)?);
        targets.push(axis_target(spec, i, probe));
        values.push(vals);
    }
    let total_slope = slopes.iter().sum();
    let total_target = targets.iter().copied().sum::<Option<f64>>();
    let pass = slopes
        .iter()
        .zip(&targets)
        .all(|(s, t)| t.is_some_and(|t| (s - t).abs() <= SLOPE_TOL));
    Ok(TimeDecayFit {
        probe,
        times: t_grid.to_vec(),
        values,
        axis_slopes: slopes,
        axis_targets: targets,
        total_slope,
        total_target,
        pass,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bessel::bessel_j;

    #[test]
    fn exact_power_law() {
        let ts = log_spaced(50.0, 1000.0, 9);
        assert_eq!((ts[0], ts[8]), (50.0, 1000.0));
        let vs: Vec<f64> = ts.iter().map(|t| 3.0 * t.powf(-1.0 / 3.0)).collect();
        assert!((power_law_slope(&ts, &vs).unwrap() + 1.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn offdiagonal_laplacian_t5() {
        let spec = SymbolSpec::laplacian(1);
        let rep = verify_offdiagonal_decay(&spec, 5.0, 1, 80).unwrap();
        assert_eq!(rep.first_admitted, 20);
        assert!(rep.pass);
        // oracle: the amplitude at 20 is |J_20(10)|
        assert!((rep.rows[0].amplitude - bessel_j(20, 10.0).abs()).abs() < 1e-12);
    }

    #[test]
    fn boundary_distance_admitted_and_empty_range_rejected() {
        let spec = SymbolSpec::laplacian(1);
        let rep = verify_offdiagonal_decay(&spec, 5.0, 20, 20).unwrap();
        assert_eq!(rep.rows.len(), 1);
        assert!(verify_offdiagonal_decay(&spec, 5.0, 1, 19).is_err());
        let zero = verify_offdiagonal_decay(&spec, 0.0, 0, 10).unwrap();
        assert!(zero.pass && zero.c == 0.0);
    }

    #[test]
    fn targets_for_cosine() {
        let spec = SymbolSpec::laplacian(1);
        assert_eq!(axis_target(&spec, 0, DecayProbe::MaxOverOffsets), Some(-1.0 / 3.0));
        assert_eq!(axis_target(&spec, 0, DecayProbe::Offset(0)), Some(-0.5));
        assert!(verify_time_decay(&spec, &[10.0, 60.0, 70.0], DecayProbe::MaxOverOffsets).is_err());
    }
}
