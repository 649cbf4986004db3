//! Monte-Carlo fractional moments `𝔼|G(E+iε; n, m)|^s` and the
//! `𝔼 Σ_m |G|²` trend proxy.
//!
//! Realizations are computed in parallel in fixed-size chunks and merged
//! sequentially in realization order, so results do not depend on the
//! thread count.

use num_complex::Complex64;
use rayon::prelude::*;

use super::fit::DistanceRow;
use super::green_row;
use crate::disorder::{sample_potential, DisorderModel};
use crate::error::{Error, Result};
use crate::lattice::{Cube, Site, SiteSet};
use crate::operators::{assemble_finite_volume, KernelOperator};
use crate::stats::RunningStats;

const CHUNK: usize = 32;

#[derive(Clone, Debug, PartialEq)]
pub struct GreenQuery {
    pub energy: f64,
    pub epsilon: f64,
    pub s: f64,
    pub source: Site,
    pub volume: Cube,
    pub realizations: usize,
}

impl GreenQuery {
    pub fn z(&self) -> Complex64 {
        Complex64::new(self.energy, self.epsilon)
    }

    fn validate(&self) -> Result<()> {
        if !(self.epsilon > 0.0 && self.epsilon.is_finite()) {
            return Err(Error::invalid("epsilon must be positive"));
        }
        if !(self.s > 0.0 && self.s < 1.0) {
            return Err(Error::invalid(format!("s must lie in (0,1), got {}", self.s)));
        }
        if !self.energy.is_finite() {
            return Err(Error::invalid("energy must be finite"));
        }
        if self.realizations < 2 {
            return Err(Error::invalid("at least two realizations are required"));
        }
        if !self.volume.contains(&self.source) {
            return Err(Error::invalid("source lies outside the volume"));
        }
        Ok(())
    }
}

/// Per-site and per-distance statistics of `|G(E+iε; n, m)|^s`.
#[derive(Clone, Debug)]
pub struct MomentEstimate {
    pub query: GreenQuery,
    pub lambda: f64,
    /// Interior sites are at least this far from the volume boundary.
    pub margin: u64,
    per_site: Vec<RunningStats<f64>>,
    by_distance: Vec<RunningStats<f64>>,
    interior_by_distance: Vec<RunningStats<f64>>,
    row_sum: RunningStats<f64>,
    max_residual: f64,
}

impl MomentEstimate {
    pub fn site(&self, m: &Site) -> Option<&RunningStats<f64>> {
        self.query.volume.index_of(m).map(|i| &self.per_site[i])
    }

    /// Per-site statistics in canonical site order.
    pub fn per_site(&self) -> &[RunningStats<f64>] {
        &self.per_site
    }

    fn rows(stats: &[RunningStats<f64>]) -> Vec<DistanceRow> {
        stats
            .iter()
            .enumerate()
            .filter(|(_, st)| st.count() > 0)
            .map(|(d, st)| DistanceRow {
                distance: d as u64,
                mean: st.mean(),
                stderr: st.stderr(),
                samples: st.count(),
            })
            .collect()
    }

    /// Realization-level averages over all sites at each max-norm distance
    /// from the source.
    pub fn distance_rows(&self) -> Vec<DistanceRow> {
        Self::rows(&self.by_distance)
    }

    /// As [`Self::distance_rows`], restricted to sites at depth `> margin`.
    pub fn interior_rows(&self) -> Vec<DistanceRow> {
        Self::rows(&self.interior_by_distance)
    }

    /// Statistics of `Σ_m |G(n,m)|^s` over the volume.
    pub fn row_sum(&self) -> &RunningStats<f64> {
        &self.row_sum
    }

    pub fn max_residual(&self) -> f64 {
        self.max_residual
    }
}

struct Accumulator {
    per_site: Vec<RunningStats<f64>>,
    by_distance: Vec<RunningStats<f64>>,
    interior: Vec<RunningStats<f64>>,
    row_sum: RunningStats<f64>,
    max_residual: f64,
}

struct Layout {
    distance: Vec<usize>,
    interior: Vec<bool>,
    counts: Vec<usize>,
    interior_counts: Vec<usize>,
}

impl Layout {
    fn new(volume: &Cube, source: &Site, margin: u64) -> Self {
        let mut distance = Vec::with_capacity(volume.volume() as usize);
        let mut interior = Vec::with_capacity(volume.volume() as usize);
        let max_d = 2 * volume.half_side() as usize + 1;
        let mut counts = vec![0; max_d];
        let mut interior_counts = vec![0; max_d];
        for m in volume.sites() {
            let d = source.distance(&m) as usize;
            let inside = volume.depth(&m) > margin;
            counts[d] += 1;
            if inside {
                interior_counts[d] += 1;
            }
            distance.push(d);
            interior.push(inside);
        }
        Layout {
            distance,
            interior,
            counts,
            interior_counts,
        }
    }
}

impl Accumulator {
    fn new(size: usize, bins: usize) -> Self {
        Accumulator {
            per_site: vec![RunningStats::new(); size],
            by_distance: vec![RunningStats::new(); bins],
            interior: vec![RunningStats::new(); bins],
            row_sum: RunningStats::new(),
            max_residual: 0.0,
        }
    }

    fn push(&mut self, layout: &Layout, values: &[f64], residual: f64) {
        let bins = layout.counts.len();
        let mut sums = vec![0.0; bins];
        let mut isums = vec![0.0; bins];
        for (i, &v) in values.iter().enumerate() {
            self.per_site[i].push(v);
            sums[layout.distance[i]] += v;
            if layout.interior[i] {
                isums[layout.distance[i]] += v;
            }
        }
        for d in 0..bins {
            if layout.counts[d] > 0 {
                self.by_distance[d].push(sums[d] / layout.counts[d] as f64);
            }
            if layout.interior_counts[d] > 0 {
                self.interior[d].push(isums[d] / layout.interior_counts[d] as f64);
            }
        }
        self.row_sum.push(values.iter().sum());
        self.max_residual = self.max_residual.max(residual);
    }

    fn repeat(&mut self, layout: &Layout, values: &[f64], residual: f64, count: u64) {
        self.push(layout, values, residual);
        let freeze = |v: &mut Vec<RunningStats<f64>>| {
            for st in v.iter_mut() {
                if st.count() > 0 {
                    *st = RunningStats::constant(st.mean(), count);
                }
            }
        };
        freeze(&mut self.per_site);
        freeze(&mut self.by_distance);
        freeze(&mut self.interior);
        self.row_sum = RunningStats::constant(self.row_sum.mean(), count);
    }
}

fn restrict(support: &SiteSet, volume: &Cube) -> SiteSet {
    SiteSet::new(support.iter().filter(|n| volume.contains(n)).cloned())
}

fn solve_realization(
    kernel: &KernelOperator<f64>,
    support: &SiteSet,
    model: &DisorderModel,
    volume: &Cube,
    source: &Site,
    z: Complex64,
    realization: u64,
) -> Result<super::GreenRow> {
    let v = sample_potential(model, support, realization);
    let a = assemble_finite_volume(kernel, &v, volume)?;
    green_row(&a, z, source).map_err(|e| e.with_realization(realization))
}

/// Fractional moments from `q.realizations` independent solves (one solve
/// when the potential is identically zero).
pub fn fractional_moment_estimate(
    q: &GreenQuery,
    kernel: &KernelOperator<f64>,
    support: &SiteSet,
    model: &DisorderModel,
) -> Result<MomentEstimate> {
    q.validate()?;
    model.validate()?;
    if kernel.dim() != q.volume.dim() {
        return Err(Error::invalid("kernel and volume dimensions differ"));
    }
    let support = restrict(support, &q.volume);
    let margin = 2 * kernel.range();
    let layout = Layout::new(&q.volume, &q.source, margin);
    let mut acc = Accumulator::new(q.volume.volume() as usize, layout.counts.len());
    let z = q.z();
    let s = q.s;
    let powered = |row: &super::GreenRow| row.values().iter().map(|g| g.norm().powf(s)).collect::<Vec<f64>>();

    if model.is_deterministic() || support.is_empty() {
        let row = solve_realization(kernel, &support, model, &q.volume, &q.source, z, 0)?;
        acc.repeat(&layout, &powered(&row), row.residual(), q.realizations as u64);
    } else {
        let total = q.realizations as u64;
        let mut start = 0u64;
        while start < total {
            let end = (start + CHUNK as u64).min(total);
            let batch: Vec<(Vec<f64>, f64)> = (start..end)
                .into_par_iter()
                .map(|r| {
                    let row = solve_realization(kernel, &support, model, &q.volume, &q.source, z, r)?;
                    Ok((powered(&row), row.residual()))
                })
                .collect::<Result<_>>()?;
            for (values, res) in &batch {
                acc.push(&layout, values, *res);
            }
            start = end;
        }
    }
    Ok(MomentEstimate {
        query: q.clone(),
        lambda: model.lambda,
        margin,
        per_site: acc.per_site,
        by_distance: acc.by_distance,
        interior_by_distance: acc.interior,
        row_sum: acc.row_sum,
        max_residual: acc.max_residual,
    })
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SimonWolffRow {
    pub epsilon: f64,
    /// Mean of `Σ_m |G(E+iε; n, m)|²`.
    pub mean_sum_g2: f64,
    pub stderr: f64,
    /// Mean at `ε/2` over mean at `ε`, on common realizations.
    pub trend_ratio: f64,
}

/// `𝔼 Σ_m |G(E+iε; n, m)|²` along a decreasing `ε` ladder. `q.epsilon` is
/// ignored.
pub fn simon_wolff_proxy(
    q: &GreenQuery,
    kernel: &KernelOperator<f64>,
    support: &SiteSet,
    model: &DisorderModel,
    eps_ladder: &[f64],
) -> Result<Vec<SimonWolffRow>> {
    if eps_ladder.is_empty() {
        return Err(Error::invalid("epsilon ladder is empty"));
    }
    if eps_ladder.iter().any(|e| !(*e > 0.0 && e.is_finite())) {
        return Err(Error::invalid("epsilon ladder entries must be positive"));
    }
    if eps_ladder.windows(2).any(|w| w[1] >= w[0]) {
        return Err(Error::invalid("epsilon ladder must be strictly decreasing"));
    }
    let probe = GreenQuery {
        epsilon: eps_ladder[0],
        ..q.clone()
    };
    probe.validate()?;
    model.validate()?;
    let support = restrict(support, &q.volume);
    let deterministic = model.is_deterministic() || support.is_empty();
    let count = if deterministic { 1 } else { q.realizations as u64 };
    let sum_at = |eps: f64, r: u64| -> Result<f64> {
        let z = Complex64::new(q.energy, eps);
        Ok(solve_realization(kernel, &support, model, &q.volume, &q.source, z, r)?.sum_sq())
    };
    let mut rows = Vec::with_capacity(eps_ladder.len());
    for &eps in eps_ladder {
        let mut here = RunningStats::new();
        let mut half = RunningStats::new();
        let mut start = 0u64;
        while start < count {
            let end = (start + CHUNK as u64).min(count);
            let batch: Vec<(f64, f64)> = (start..end)
                .into_par_iter()
                .map(|r| Ok((sum_at(eps, r)?, sum_at(0.5 * eps, r)?)))
                .collect::<Result<_>>()?;
            for (a, b) in batch {
                here.push(a);
                half.push(b);
            }
            start = end;
        }
        if deterministic {
            here = RunningStats::constant(here.mean(), q.realizations as u64);
            half = RunningStats::constant(half.mean(), q.realizations as u64);
        }
        rows.push(SimonWolffRow {
            epsilon: eps,
            mean_sum_g2: here.mean(),
            stderr: here.stderr(),
            trend_ratio: half.mean() / here.mean(),
        });
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::disorder::Law;
    use crate::operators::{kernel_from_symbol, Potential, SymbolSpec};
    use crate::resolvent::green_row;

    fn lap1() -> KernelOperator<f64> {
        kernel_from_symbol(&SymbolSpec::laplacian(1)).unwrap()
    }

    fn query(l: u32, realizations: usize) -> GreenQuery {
        GreenQuery {
            energy: 5.0,
            epsilon: 1e-3,
            s: 0.5,
            source: Site::origin(1),
            volume: Cube::centered(1, l).unwrap(),
            realizations,
        }
    }

    #[test]
    fn deterministic_case_is_exact() {
        let k = lap1();
        let q = query(30, 7);
        let cube = q.volume.clone();
        let model = DisorderModel::new(Law::Uniform { lo: -1.0, hi: 1.0 }, 0.0, 3).unwrap();
        let est = fractional_moment_estimate(&q, &k, &SiteSet::full(&cube), &model).unwrap();
        let a = assemble_finite_volume(&k, &Potential::new(), &cube).unwrap();
        let g = green_row(&a, q.z(), &q.source).unwrap();
        for (m, v) in g.iter() {
            let st = est.site(&m).unwrap();
            assert_eq!(st.mean(), v.norm().powf(0.5));
            assert_eq!(st.stderr(), 0.0);
            assert_eq!(st.count(), 7);
        }
        // empty support behaves the same at any λ
        let noisy = DisorderModel::new(Law::Uniform { lo: -1.0, hi: 1.0 }, 30.0, 3).unwrap();
        let est2 = fractional_moment_estimate(&q, &k, &SiteSet::empty(), &noisy).unwrap();
        assert_eq!(est.distance_rows(), est2.distance_rows());
    }

    #[test]
    fn random_case_matches_manual_loop() {
        let k = lap1();
        let q = query(12, 5);
        let cube = q.volume.clone();
        let s = SiteSet::full(&cube);
        let model = DisorderModel::new(Law::Uniform { lo: -1.0, hi: 1.0 }, 4.0, 11).unwrap();
        let est = fractional_moment_estimate(&q, &k, &s, &model).unwrap();
        let m = Site::from([3]);
        let mut manual = RunningStats::new();
        for r in 0..5 {
            let a = assemble_finite_volume(&k, &sample_potential(&model, &s, r), &cube).unwrap();
            manual.push(green_row(&a, q.z(), &q.source).unwrap().get(&m).unwrap().norm().sqrt());
        }
        let got = est.site(&m).unwrap();
        assert!((got.mean() - manual.mean()).abs() < 1e-14);
        assert!((got.stderr() - manual.stderr()).abs() < 1e-14);
        assert!(est.max_residual() <= 1e-10);
        // distance 0 bin is the single source site
        let d0 = est.distance_rows()[0];
        assert!((d0.mean - est.site(&q.source).unwrap().mean()).abs() < 1e-14);
    }

    #[test]
    fn interior_rows_skip_boundary() {
        let k = lap1();
        let q = query(10, 2);
        let model = DisorderModel::new(Law::Uniform { lo: -1.0, hi: 1.0 }, 0.0, 0).unwrap();
        let est = fractional_moment_estimate(&q, &k, &SiteSet::empty(), &model).unwrap();
        // range 1, margin 2: depth > 2 means |m| ≤ 7
        assert_eq!(est.interior_rows().last().unwrap().distance, 7);
        assert_eq!(est.distance_rows().last().unwrap().distance, 10);
    }

    #[test]
    fn zero_operator_sum_is_inverse_square() {
        let k = kernel_from_symbol(&SymbolSpec::<f64>::new(vec![vec![]]).unwrap()).unwrap();
        let mut q = query(3, 2);
        q.energy = 2.0;
        let model = DisorderModel::new(Law::Uniform { lo: -1.0, hi: 1.0 }, 0.0, 0).unwrap();
        let rows = simon_wolff_proxy(&q, &k, &SiteSet::empty(), &model, &[1e-2, 1e-3, 1e-4]).unwrap();
        for r in rows {
            let exact = 1.0 / (4.0 + r.epsilon * r.epsilon);
            assert!((r.mean_sum_g2 - exact).abs() < 1e-14);
            let half = 1.0 / (4.0 + 0.25 * r.epsilon * r.epsilon);
            assert!((r.trend_ratio - half / exact).abs() < 1e-14);
        }
    }

    #[test]
    fn ladder_must_decrease() {
        let k = lap1();
        let model = DisorderModel::new(Law::Uniform { lo: -1.0, hi: 1.0 }, 0.0, 0).unwrap();
        assert!(simon_wolff_proxy(&query(3, 2), &k, &SiteSet::empty(), &model, &[1e-3, 1e-2]).is_err());
        let mut q = query(3, 1);
        assert!(fractional_moment_estimate(&q, &k, &SiteSet::empty(), &model).is_err());
        q.realizations = 2;
        q.epsilon = 0.0;
        assert!(fractional_moment_estimate(&q, &k, &SiteSet::empty(), &model).is_err());
    }
}
