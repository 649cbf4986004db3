//! Finite-volume Green functions and the fractional-moment machinery built
//! on them.
//!
//! One shifted solve with right-hand side `δ_n` gives the whole row
//! `m ↦ G(z; n, m)` (the assembly is symmetric, so rows and columns agree).
//! Monte-Carlo estimates run one such solve per realization.

mod bounds;
mod decoupling;
mod fit;
mod moments;
mod theorem2;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::lattice::{Cube, Site};
use crate::linalg::{solve_shifted, SolverChoice};
use crate::operators::AssembledOperator;

pub use bounds::{
    am_uniform_bound, coupling_constant, k_s_factor, lambda_threshold, LocalizationCertificate, SiteProfile,
};
pub use decoupling::{decoupling_ratio, estimate_decoupling, DecouplingEstimate, DecouplingSearch};
pub use fit::{decay_rate_fit, decay_rate_fit_rows, DecayFit, DistanceRow};
pub use moments::{
    fractional_moment_estimate, simon_wolff_proxy, GreenQuery, MomentEstimate, SimonWolffRow,
};
pub use theorem2::{theorem2_cube, theorem2_cube_with, Theorem2Cube};

/// `m ↦ G(z; n, m)` over the assembly's cube.
#[derive(Clone, Debug)]
pub struct GreenRow {
    cube: Cube,
    source: Site,
    values: Vec<Complex64>,
    residual: f64,
}

impl GreenRow {
    pub fn source(&self) -> &Site {
        &self.source
    }

    pub fn cube(&self) -> &Cube {
        &self.cube
    }

    pub fn get(&self, m: &Site) -> Option<Complex64> {
        self.cube.index_of(m).map(|i| self.values[i])
    }

    /// Values in canonical site order.
    pub fn values(&self) -> &[Complex64] {
        &self.values
    }

    pub fn residual(&self) -> f64 {
        self.residual
    }

    pub fn iter(&self) -> impl Iterator<Item = (Site, Complex64)> + '_ {
        self.values.iter().enumerate().map(|(i, v)| (self.cube.site_at(i), *v))
    }

    /// `Σ_m |G(z; n, m)|²`
    pub fn sum_sq(&self) -> f64 {
        self.values.iter().map(|v| v.norm_sqr()).sum()
    }
}

/// Solve `(A - z) x = δ_n`.
pub fn green_row(a: &AssembledOperator, z: Complex64, n: &Site) -> Result<GreenRow> {
    green_row_with(a, z, n, SolverChoice::Auto)
}

pub fn green_row_with(a: &AssembledOperator, z: Complex64, n: &Site, choice: SolverChoice) -> Result<GreenRow> {
    if z.im == 0.0 {
        return Err(Error::invalid("Green function needs Im z ≠ 0"));
    }
    let idx = a
        .cube()
        .index_of(n)
        .ok_or_else(|| Error::invalid(format!("source {n:?} lies outside the volume")))?;
    let mut rhs = vec![Complex64::new(0.0, 0.0); a.size()];
    rhs[idx] = Complex64::new(1.0, 0.0);
    let sol = solve_shifted(a, z, &rhs, choice)?;
    Ok(GreenRow {
        cube: a.cube().clone(),
        source: n.clone(),
        values: sol.x,
        residual: sol.residual,
    })
}
