//! Dense eigen-diagnostics on finite cubes: inverse participation ratios,
//! spacing-ratio statistics and energy-binned scans against the edges
//! `±‖H₀‖₁` and `±‖H₀‖_s`.

use nalgebra::SymmetricEigen;
use rayon::prelude::*;

use crate::disorder::{sample_potential, DisorderModel};
use crate::error::{Error, Result};
use crate::lattice::{Cube, SiteSet};
use crate::operators::{assemble_finite_volume, AssembledOperator, KernelOperator};

pub const DEFAULT_DENSE_CAP: usize = 4096;
pub const RESIDUAL_TOL: f64 = 1e-8;
/// `2 ln 2 - 1`, the spacing-ratio mean of uncorrelated levels.
pub const POISSON_RATIO: f64 = 0.386_294_361_119_890_6;

#[derive(Clone, Debug, PartialEq)]
pub struct EigenReport {
    /// Ascending.
    pub eigenvalues: Vec<f64>,
    /// IPR of the normalized eigenvector paired with each eigenvalue.
    pub ipr: Vec<f64>,
    pub side: u64,
    pub realization: Option<u64>,
    pub max_residual: f64,
    /// `|Σ E - tr A|`
    pub trace_error: f64,
}

/// `Σ |ψ(n)|⁴`; `ψ` must have unit norm within 1e-10.
pub fn ipr(psi: &[f64]) -> Result<f64> {
    let norm2: f64 = psi.iter().map(|x| x * x).sum();
    if (norm2.sqrt() - 1.0).abs() > 1e-10 {
        return Err(Error::invalid(format!("state is not normalized (norm {})", norm2.sqrt())));
    }
    Ok(psi.iter().map(|x| x.powi(4)).sum())
}

/// Full symmetric eigendecomposition, refused above `cap` sites.
pub fn eigensystem(a: &AssembledOperator, cap: usize) -> Result<EigenReport> {
    let n = a.size();
    if n > cap {
        return Err(Error::Precondition(format!(
            "volume of {n} sites exceeds the dense diagonalization cap {cap}; reduce the cube"
        )));
    }
    if !a.is_symmetric() {
        return Err(Error::invalid("operator is not symmetric"));
    }
    let eig = SymmetricEigen::new(a.to_dense());
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[i].total_cmp(&eig.eigenvalues[j]));
    let mut eigenvalues = Vec::with_capacity(n);
    let mut iprs = Vec::with_capacity(n);
    let mut max_residual = 0.0f64;
    for &k in &order {
        let e = eig.eigenvalues[k];
        let v = eig.eigenvectors.column(k);
        let norm = v.norm();
        let psi: Vec<f64> = v.iter().map(|x| x / norm).collect();
        let mut r2 = 0.0;
        for (i, p) in psi.iter().enumerate() {
            let av: f64 = a.row(i).map(|(j, x)| x * psi[j]).sum();
            r2 += (av - e * p).powi(2);
        }
        max_residual = max_residual.max(r2.sqrt());
        eigenvalues.push(e);
        iprs.push(ipr(&psi)?);
    }
    if max_residual > RESIDUAL_TOL {
        return Err(Error::Numerical {
            what: "dense eigendecomposition residual".into(),
            achieved: max_residual,
            requested: RESIDUAL_TOL,
        });
    }
    let trace_error = (eigenvalues.iter().sum::<f64>() - a.trace()).abs();
    Ok(EigenReport {
        eigenvalues,
        ipr: iprs,
        side: a.cube().side(),
        realization: None,
        max_residual,
        trace_error,
    })
}

/// `min(δᵢ,δᵢ₊₁)/max(δᵢ,δᵢ₊₁)` over consecutive spacings of sorted levels;
/// pairs of zero spacings are skipped.
pub fn spacing_ratios(levels: &[f64]) -> Vec<f64> {
    let gaps: Vec<f64> = levels.windows(2).map(|w| w[1] - w[0]).collect();
    gaps.windows(2)
        .filter(|g| g[0].max(g[1]) > 0.0)
        .map(|g| g[0].min(g[1]) / g[0].max(g[1]))
        .collect()
}

fn median(v: &mut [f64]) -> Option<f64> {
    if v.is_empty() {
        return None;
    }
    v.sort_by(f64::total_cmp);
    let n = v.len();
    Some(if n % 2 == 1 { v[n / 2] } else { 0.5 * (v[n / 2 - 1] + v[n / 2]) })
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EdgeBin {
    pub lo: f64,
    pub hi: f64,
    pub count: u64,
    /// `None` for empty bins.
    pub median_ipr: Option<f64>,
    /// Mean spacing ratio of levels in the bin, taken within each
    /// realization; `None` without any consecutive spacing pair.
    pub r_stat: Option<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct EdgeScan {
    pub bins: Vec<EdgeBin>,
    pub h0_norm_1: f64,
    pub h0_norm_s: f64,
    pub s: f64,
    pub realizations: u64,
    pub volume: u64,
    pub bin_width: f64,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ScanOptions {
    pub bin_width: f64,
    pub cap: usize,
}

impl Default for ScanOptions {
    fn default() -> Self {
        ScanOptions {
            bin_width: 0.1,
            cap: DEFAULT_DENSE_CAP,
        }
    }
}

/// IPR contrast between the states beyond `threshold` and the band centre.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EdgeContrast {
    pub threshold: f64,
    /// Median IPR of the bin containing `E = 0`.
    pub center_median: f64,
    /// Smallest per-bin median among nonempty bins with `min |E| > threshold`.
    pub outer_min_median: f64,
    pub outer_bins: usize,
    /// `outer_min_median / center_median`
    pub ratio: f64,
}

impl EdgeScan {
    pub fn total_count(&self) -> u64 {
        self.bins.iter().map(|b| b.count).sum()
    }

    /// `None` when the centre bin or every outer bin is empty.
    pub fn contrast(&self, threshold: f64) -> Option<EdgeContrast> {
        let center = self.bins.iter().find(|b| b.lo <= 0.0 && 0.0 < b.hi)?.median_ipr?;
        let outer: Vec<f64> = self
            .bins
            .iter()
            .filter(|b| b.lo.abs().min(b.hi.abs()) > threshold && b.lo * b.hi >= 0.0)
            .filter_map(|b| b.median_ipr)
            .collect();
        let outer_min = outer.iter().copied().reduce(f64::min)?;
        Some(EdgeContrast {
            threshold,
            center_median: center,
            outer_min_median: outer_min,
            outer_bins: outer.len(),
            ratio: outer_min / center,
        })
    }
}

/// Bin pooled eigen-reports of `realizations` draws of `H₀ + V_S^ω` on
/// `cube`.
pub fn mobility_edge_scan(
    kernel: &KernelOperator<f64>,
    support: &SiteSet,
    model: &DisorderModel,
    cube: &Cube,
    realizations: u64,
    s: f64,
    options: ScanOptions,
) -> Result<EdgeScan> {
    if realizations < 20 {
        return Err(Error::invalid("the edge scan needs at least 20 realizations"));
    }
    if !(options.bin_width > 0.0 && options.bin_width.is_finite()) {
        return Err(Error::invalid("bin width must be positive"));
    }
    if !(s > 0.0 && s < 1.0) {
        return Err(Error::invalid(format!("s must lie in (0,1), got {s}")));
    }
    model.validate()?;
    if cube.volume() > options.cap as u64 {
        return Err(Error::Precondition(format!(
            "volume of {} sites exceeds the dense diagonalization cap {}; reduce the cube",
            cube.volume(),
            options.cap
        )));
    }
    let h0_norm_1 = kernel.s_norm(1.0)?;
    let h0_norm_s = kernel.s_norm(s)?;
    let reports: Vec<EigenReport> = (0..realizations)
        .into_par_iter()
        .map(|r| {
            let v = sample_potential(model, support, r);
            let a = assemble_finite_volume(kernel, &v, cube)?;
            let mut rep = eigensystem(&a, options.cap)?;
            rep.realization = Some(r);
            Ok(rep)
        })
        .collect::<Result<_>>()?;

    let w = options.bin_width;
    let (emin, emax) = reports
        .iter()
        .flat_map(|r| r.eigenvalues.iter())
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &e| (a.min(e), b.max(e)));
    let k0 = (emin / w).floor() as i64;
    let nbins = (((emax / w).floor() as i64 - k0) + 1).max(1) as usize;
    let bin_of = |e: f64| (((e / w).floor() as i64 - k0).max(0) as usize).min(nbins - 1);

    let mut iprs: Vec<Vec<f64>> = vec![Vec::new(); nbins];
    let mut ratio_sum = vec![0.0f64; nbins];
    let mut ratio_n = vec![0u64; nbins];
    for rep in &reports {
        let mut levels: Vec<Vec<f64>> = vec![Vec::new(); nbins];
        for (e, p) in rep.eigenvalues.iter().zip(&rep.ipr) {
            let b = bin_of(*e);
            iprs[b].push(*p);
            levels[b].push(*e);
        }
        for (b, lv) in levels.iter().enumerate() {
            for r in spacing_ratios(lv) {
                ratio_sum[b] += r;
                ratio_n[b] += 1;
            }
        }
    }
    // divide by 1/w when it is an integer so decimal widths give clean edges
    let inv = 1.0 / w;
    let edge = |k: i64| if (inv - inv.round()).abs() < 1e-9 { k as f64 / inv.round() } else { k as f64 * w };
    let bins = (0..nbins)
        .map(|b| {
            EdgeBin {
                lo: edge(k0 + b as i64),
                hi: edge(k0 + b as i64 + 1),
                count: iprs[b].len() as u64,
                median_ipr: median(&mut iprs[b]),
                r_stat: (ratio_n[b] > 0).then(|| ratio_sum[b] / ratio_n[b] as f64),
            }
        })
        .collect();
    Ok(EdgeScan {
        bins,
        h0_norm_1,
        h0_norm_s,
        s,
        realizations,
        volume: cube.volume(),
        bin_width: w,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::disorder::Law;
    use crate::lattice::Site;
    use crate::operators::{kernel_from_symbol, Potential, SymbolSpec};
    use rand::{Rng, SeedableRng};

    fn lap1() -> KernelOperator<f64> {
        kernel_from_symbol(&SymbolSpec::laplacian(1)).unwrap()
    }

    #[test]
    fn ipr_simple_states() {
        assert_eq!(ipr(&[0.0, 1.0, 0.0]).unwrap(), 1.0);
        let n = 16;
        let u = vec![1.0 / (n as f64).sqrt(); n];
        assert!((ipr(&u).unwrap() - 1.0 / n as f64).abs() < 1e-15);
        let mut h = vec![0.0; n];
        h[..n / 2].fill(1.0 / ((n / 2) as f64).sqrt());
        assert!((ipr(&h).unwrap() - 2.0 / n as f64).abs() < 1e-15);
        assert!(ipr(&[1.0, 1.0]).is_err());
    }

    #[test]
    fn dirichlet_spectrum() {
        let cube = Cube::centered(1, 15).unwrap();
        let a = assemble_finite_volume(&lap1(), &Potential::new(), &cube).unwrap();
        let rep = eigensystem(&a, DEFAULT_DENSE_CAP).unwrap();
        let n = cube.side() as usize;
        let mut expect: Vec<f64> = (1..=n)
            .map(|j| 2.0 * (std::f64::consts::PI * j as f64 / (n + 1) as f64).cos())
            .collect();
        expect.sort_by(f64::total_cmp);
        for (e, x) in rep.eigenvalues.iter().zip(&expect) {
            assert!((e - x).abs() < 1e-12);
        }
        assert!(rep.trace_error < 1e-8);
        for p in &rep.ipr {
            assert!(*p >= 1.0 / n as f64 - 1e-12 && *p <= 1.0 + 1e-12);
        }
    }

    #[test]
    fn zero_operator_and_cap() {
        let k = kernel_from_symbol(&SymbolSpec::<f64>::new(vec![vec![]]).unwrap()).unwrap();
        let cube = Cube::centered(1, 4).unwrap();
        let a = assemble_finite_volume(&k, &Potential::new(), &cube).unwrap();
        let rep = eigensystem(&a, 9).unwrap();
        assert!(rep.eigenvalues.iter().all(|e| *e == 0.0));
        assert!(rep.ipr.iter().all(|p| *p >= 1.0 / 9.0 - 1e-12));
        assert!(matches!(eigensystem(&a, 8), Err(Error::Precondition(_))));
    }

    #[test]
    fn rank_one_site_dominates() {
        // first-order oracle: E ≈ V + 2/V, IPR ≈ 1 - 4/V²
        let cube = Cube::centered(1, 5).unwrap();
        let v: Potential = [(Site::origin(1), 10.0)].into_iter().collect();
        let rep = eigensystem(&assemble_finite_volume(&lap1(), &v, &cube).unwrap(), 64).unwrap();
        let top = *rep.eigenvalues.last().unwrap();
        assert!((top - 10.2).abs() < 0.01, "{top}");
        assert!((rep.ipr.last().unwrap() - 0.96).abs() < 0.01);
    }

    #[test]
    fn poisson_levels() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        let mut levels: Vec<f64> = (0..200_000).map(|_| rng.random::<f64>()).collect();
        levels.sort_by(f64::total_cmp);
        let r = spacing_ratios(&levels);
        let mean = r.iter().sum::<f64>() / r.len() as f64;
        assert!((mean - POISSON_RATIO).abs() < 0.01, "{mean}");
        assert!((2.0 * 2f64.ln() - 1.0 - POISSON_RATIO).abs() < 1e-15);
    }

    #[test]
    fn scan_conserves_counts_and_ignores_disorder_off_support() {
        let cube = Cube::centered(1, 20).unwrap();
        let law = Law::Uniform { lo: -1.0, hi: 1.0 };
        let free = DisorderModel::new(law, 0.0, 5).unwrap();
        let strong = DisorderModel::new(law, 7.0, 5).unwrap();
        let empty = SiteSet::empty();
        let a = mobility_edge_scan(&lap1(), &empty, &free, &cube, 20, 0.5, ScanOptions::default()).unwrap();
        let b = mobility_edge_scan(&lap1(), &empty, &strong, &cube, 20, 0.5, ScanOptions::default()).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.total_count(), 41 * 20);
        assert!((a.h0_norm_1 - 2.0).abs() < 1e-15 && (a.h0_norm_s - 4.0).abs() < 1e-12);
        assert!(a.bins.first().unwrap().lo >= -2.1 && a.bins.last().unwrap().hi <= 2.1);
        let full = SiteSet::full(&cube);
        let c = mobility_edge_scan(&lap1(), &full, &strong, &cube, 20, 0.5, ScanOptions::default()).unwrap();
        assert_eq!(c.total_count(), 41 * 20);
        assert!(c.bins.iter().any(|b| b.count == 0 && b.median_ipr.is_none()));
        assert!(mobility_edge_scan(&lap1(), &full, &strong, &cube, 19, 0.5, ScanOptions::default()).is_err());
    }
}
