//! The smallest cube `Λ_s(n)` outside of which every weighted site beats the
//! hopping: `(1+|m|)^{γs} κ > ‖H₀‖_s^s`.

use super::decoupling::DecouplingEstimate;
use crate::error::{Error, Result};
use crate::lattice::{Site, SiteSet};
use crate::operators::KernelOperator;
use crate::scalar::Real;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Theorem2Cube<T> {
    /// Half-side of the cube centred at `n`.
    pub radius: u64,
    /// `inf (1+|m|)^{γs} κ / ‖H₀‖_s^s` over support sites outside the cube;
    /// `+∞` when there are none.
    pub b: T,
    pub b_infinite: bool,
    /// Support sites failing the inequality.
    pub bad_sites: usize,
}

/// As [`theorem2_cube`] with `‖H₀‖_s^s` and `κ` given directly.
pub fn theorem2_cube_with<T: Real>(
    n: &Site,
    s: T,
    gamma: T,
    norm_pow: T,
    kappa: T,
    support: &SiteSet,
) -> Result<Theorem2Cube<T>> {
    if !(s > T::zero() && s < T::one()) {
        return Err(Error::invalid(format!("s must lie in (0,1), got {s}")));
    }
    if !(gamma > T::zero()) || !(kappa > T::zero()) || !(norm_pow >= T::zero()) {
        return Err(Error::invalid("gamma and kappa must be positive, the norm nonnegative"));
    }
    if let Some(m) = support.iter().find(|m| m.dim() != n.dim()) {
        return Err(Error::invalid(format!("support site {m:?} has the wrong dimension")));
    }
    let ratio = |m: &Site| {
        let a = (T::one() + T::from_u64(m.max_norm()).unwrap()).powf(gamma * s);
        a * kappa / norm_pow
    };
    let mut radius = 0u64;
    let mut bad = 0usize;
    for m in support {
        if !(ratio(m) > T::one()) {
            bad += 1;
            radius = radius.max(n.distance(m));
        }
    }
    let b = support
        .iter()
        .filter(|m| n.distance(m) > radius)
        .map(ratio)
        .fold(T::infinity(), |acc, r| acc.min(r));
    Ok(Theorem2Cube {
        radius,
        b,
        b_infinite: b.is_infinite(),
        bad_sites: bad,
    })
}

/// `Λ_s(n)` for the weighted model `a_m = (1+|m|)^γ`.
pub fn theorem2_cube(
    n: &Site,
    s: f64,
    gamma: f64,
    kernel: &KernelOperator<f64>,
    dec: &DecouplingEstimate,
    support: &SiteSet,
) -> Result<Theorem2Cube<f64>> {
    if (dec.s - s).abs() > 1e-12 {
        return Err(Error::invalid("decoupling constant computed at a different s"));
    }
    theorem2_cube_with(n, s, gamma, kernel.s_norm_pow(s)?, dec.kappa_hat, support)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::Cube;

    #[test]
    fn algebraic_radius_three() {
        let cube = Cube::centered(1, 20).unwrap();
        let s = SiteSet::full(&cube);
        let r = theorem2_cube_with(&Site::origin(1), 0.5, 1.0, 2.0, 1.0, &s).unwrap();
        assert_eq!(r.radius, 3);
        assert!((r.b - 5f64.sqrt() / 2.0).abs() < 1e-15);
        assert!(!r.b_infinite);
        assert_eq!(r.bad_sites, 7);
    }

    #[test]
    fn large_gamma_shrinks_to_first_shell() {
        let s = SiteSet::new([Site::from([5, 0]), Site::from([-9, 2]), Site::from([0, 12])]);
        let r = theorem2_cube_with(&Site::origin(2), 0.5, 50.0, 2.0, 1.0, &s).unwrap();
        assert_eq!(r.radius, 0);
        assert!(r.b > 1.0);
    }

    #[test]
    fn everything_inside_gives_infinite_b() {
        let s = SiteSet::new([Site::from([1]), Site::from([2])]);
        let r = theorem2_cube_with(&Site::origin(1), 0.5, 1.0, 100.0, 1.0, &s).unwrap();
        assert_eq!(r.radius, 2);
        assert!(r.b_infinite);
    }

    #[test]
    fn off_origin_centre() {
        let cube = Cube::centered(1, 20).unwrap();
        let s = SiteSet::full(&cube);
        let r = theorem2_cube_with(&Site::from([10]), 0.5, 1.0, 2.0, 1.0, &s).unwrap();
        // bad sites are |m| ≤ 3, farthest from 10 is -3
        assert_eq!(r.radius, 13);
        let r32 = theorem2_cube_with(&Site::from([10]), 0.5f32, 1.0, 2.0, 1.0, &s).unwrap();
        assert_eq!(r32.radius, 13);
    }
}
