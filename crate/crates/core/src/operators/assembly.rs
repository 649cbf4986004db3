use std::collections::BTreeMap;
use std::fmt::Write as _;

use nalgebra::DMatrix;
use num_complex::Complex64;

use super::KernelOperator;
use crate::error::{Error, Result};
use crate::lattice::{Cube, Site, SiteSet};
use crate::scalar::Real;

/// Real on-site potential; absent sites carry zero.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Potential(BTreeMap<Site, f64>);

impl Potential {
    pub fn new() -> Self {
        Potential(BTreeMap::new())
    }

    pub fn insert(&mut self, n: Site, v: f64) {
        self.0.insert(n, v);
    }

    pub fn get(&self, n: &Site) -> f64 {
        self.0.get(n).copied().unwrap_or(0.0)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&Site, &f64)> {
        self.0.iter()
    }
}

impl FromIterator<(Site, f64)> for Potential {
    fn from_iter<I: IntoIterator<Item = (Site, f64)>>(iter: I) -> Self {
        Potential(iter.into_iter().collect())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Boundary {
    /// Hops leaving the cube are dropped.
    Dirichlet,
}

/// Finite-volume matrix in CSR form, rows and columns indexed by the cube's
/// canonical site order.
#[derive(Clone, Debug)]
pub struct AssembledOperator {
    cube: Cube,
    boundary: Boundary,
    row_ptr: Vec<usize>,
    cols: Vec<usize>,
    vals: Vec<f64>,
}

impl AssembledOperator {
    pub fn cube(&self) -> &Cube {
        &self.cube
    }

    pub fn boundary(&self) -> Boundary {
        self.boundary
    }

    pub fn size(&self) -> usize {
        self.row_ptr.len() - 1
    }

    pub fn nnz(&self) -> usize {
        self.vals.len()
    }

    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let (a, b) = (self.row_ptr[i], self.row_ptr[i + 1]);
        self.cols[a..b].iter().copied().zip(self.vals[a..b].iter().copied())
    }

    pub fn entry(&self, i: usize, j: usize) -> f64 {
        self.row(i).find(|&(c, _)| c == j).map(|(_, v)| v).unwrap_or(0.0)
    }

    pub fn diagonal(&self, i: usize) -> f64 {
        self.entry(i, i)
    }

    pub fn trace(&self) -> f64 {
        (0..self.size()).map(|i| self.diagonal(i)).sum()
    }

    /// Largest `|i - j|` over stored entries.
    pub fn bandwidth(&self) -> usize {
        (0..self.size())
            .flat_map(|i| self.row(i).map(move |(j, _)| i.abs_diff(j)))
            .max()
            .unwrap_or(0)
    }

    /// `y = (A - z) x`
    pub fn apply_shifted(&self, z: Complex64, x: &[Complex64], y: &mut [Complex64]) {
        for i in 0..self.size() {
            let mut acc = -z * x[i];
            for (j, v) in self.row(i) {
                acc += x[j] * v;
            }
            y[i] = acc;
        }
    }

    pub fn is_symmetric(&self) -> bool {
        (0..self.size()).all(|i| self.row(i).all(|(j, v)| self.entry(j, i) == v))
    }

    /// `(Σ_j |A_{ij}|^s)^{1/s}` for one row, diagonal excluded.
    pub fn row_s_norm(&self, i: usize, s: f64) -> f64 {
        self.row(i)
            .filter(|&(j, _)| j != i)
            .map(|(_, v)| v.abs().powf(s))
            .sum::<f64>()
            .powf(1.0 / s)
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let n = self.size();
        let mut m = DMatrix::zeros(n, n);
        for i in 0..n {
            for (j, v) in self.row(i) {
                m[(i, j)] = v;
            }
        }
        m
    }

    /// Coordinate list, one `row col value` line per stored entry.
    pub fn to_coo_text(&self) -> String {
        let mut out = String::new();
        for i in 0..self.size() {
            for (j, v) in self.row(i) {
                writeln!(out, "{i} {j} {v:.17e}").unwrap();
            }
        }
        out
    }
}

fn assemble<T: Real>(
    kernel: &KernelOperator<T>,
    potential: impl Fn(&Site) -> f64,
    cube: &Cube,
    keep: impl Fn(&Site) -> bool,
) -> Result<AssembledOperator> {
    if kernel.dim() != cube.dim() {
        return Err(Error::invalid(format!(
            "kernel dimension {} does not match cube dimension {}",
            kernel.dim(),
            cube.dim()
        )));
    }
    let hops: Vec<(Vec<i64>, f64)> = kernel
        .hopping()
        .map(|(d, c)| (d.coords().to_vec(), c.as_f64()))
        .collect();
    let n = cube.volume() as usize;
    let mut row_ptr = Vec::with_capacity(n + 1);
    let mut cols = Vec::new();
    let mut vals = Vec::new();
    row_ptr.push(0);
    let mut row: Vec<(usize, f64)> = Vec::new();
    for i in 0..n {
        let site = cube.site_at(i);
        row.clear();
        if keep(&site) {
            let v = potential(&site);
            if v != 0.0 {
                row.push((i, v));
            }
            for (d, c) in &hops {
                let m = site.offset(d);
                if let Some(j) = cube.index_of(&m) {
                    if keep(&m) {
                        row.push((j, *c));
                    }
                }
            }
        }
        row.sort_by_key(|&(j, _)| j);
        for &(j, v) in &row {
            cols.push(j);
            vals.push(v);
        }
        row_ptr.push(cols.len());
    }
    Ok(AssembledOperator {
        cube: cube.clone(),
        boundary: Boundary::Dirichlet,
        row_ptr,
        cols,
        vals,
    })
}

/// `(Au)(n) = Σ_d c(d) u(n+d) [n+d ∈ Λ] + V(n) u(n)` on the cube `Λ`.
pub fn assemble_finite_volume<T: Real>(
    kernel: &KernelOperator<T>,
    potential: &Potential,
    cube: &Cube,
) -> Result<AssembledOperator> {
    if let Some((n, _)) = potential.iter().find(|(n, _)| !cube.contains(n)) {
        return Err(Error::invalid(format!("potential site {n:?} lies outside the cube")));
    }
    assemble(kernel, |n| potential.get(n), cube, |_| true)
}

/// `P_{S^c} H₀ P_{S^c}` on the cube: the free assembly with every row and
/// column indexed by `S` removed.
pub fn restrict_complement<T: Real>(
    kernel: &KernelOperator<T>,
    support: &SiteSet,
    cube: &Cube,
) -> Result<AssembledOperator> {
    if let Some(n) = support.iter().find(|n| !cube.contains(n)) {
        return Err(Error::invalid(format!("support site {n:?} lies outside the cube")));
    }
    assemble(kernel, |_| 0.0, cube, |n| !support.contains(n))
}
