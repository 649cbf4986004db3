//! Closed-form constants of the fractional-moment iteration.

use crate::error::{Error, Result};
use crate::operators::KernelOperator;
use crate::scalar::Real;

fn check_s<T: Real>(s: T) -> Result<()> {
    if s > T::zero() && s < T::one() {
        Ok(())
    } else {
        Err(Error::invalid(format!("s must lie in (0,1), got {s}")))
    }
}

/// Lower bound `C(E, λ, s)` for the diagonal factor at a site:
/// `|E|^s` off the support, `|λ|^s κ` on it, where `κ` is the decoupling
/// constant (`C(λ,s) = |λ|^s κ`).
pub fn coupling_constant<T: Real>(energy: T, coupling: T, s: T, on_support: bool, kappa: T) -> T {
    if on_support {
        coupling.abs().powf(s) * kappa
    } else {
        energy.abs().powf(s)
    }
}

/// Which kinds of sites enter the iteration.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct SiteProfile {
    pub off_support: bool,
    pub on_support: bool,
}

impl SiteProfile {
    pub const OFF_ONLY: SiteProfile = SiteProfile {
        off_support: true,
        on_support: false,
    };
    pub const ON_ONLY: SiteProfile = SiteProfile {
        off_support: false,
        on_support: true,
    };
    pub const MIXED: SiteProfile = SiteProfile {
        off_support: true,
        on_support: true,
    };
}

/// `k_s = ‖H₀‖_s^s / min C(E, λ, s)` over the site kinds present. Returns
/// `+∞` when some relevant `C` vanishes.
pub fn k_s_factor<T: Real>(
    kernel: &KernelOperator<T>,
    energy: T,
    coupling: T,
    s: T,
    profile: SiteProfile,
    kappa: T,
) -> Result<T> {
    check_s(s)?;
    if !profile.off_support && !profile.on_support {
        return Err(Error::invalid("site profile selects no sites"));
    }
    let mut c_min = T::infinity();
    if profile.off_support {
        c_min = c_min.min(coupling_constant(energy, coupling, s, false, kappa));
    }
    if profile.on_support {
        c_min = c_min.min(coupling_constant(energy, coupling, s, true, kappa));
    }
    let num = kernel.s_norm_pow(s)?;
    if c_min <= T::zero() {
        return Ok(T::infinity());
    }
    Ok(num / c_min)
}

/// `λ_s = (‖H₀‖_s^s / κ)^{1/s}`: above it every on-support site has
/// `C(λ,s) > ‖H₀‖_s^s`.
pub fn lambda_threshold<T: Real>(kernel: &KernelOperator<T>, s: T, kappa: T) -> Result<T> {
    check_s(s)?;
    if !(kappa > T::zero()) {
        return Err(Error::invalid(format!("decoupling constant must be positive, got {kappa}")));
    }
    Ok((kernel.s_norm_pow(s)? / kappa).powf(T::one() / s))
}

/// `(2√2)^s / (λ^s (1-s))`, the uniform bound on `𝔼|G(E+iε; n, m)|^s` for
/// `n, m ∈ S`.
pub fn am_uniform_bound<T: Real>(lambda: T, s: T) -> Result<T> {
    check_s(s)?;
    if !(lambda > T::zero()) {
        return Err(Error::invalid("lambda must be positive"));
    }
    let two_root_two = T::lit(2.0) * T::SQRT_2();
    Ok(two_root_two.powf(s) / (lambda.powf(s) * (T::one() - s)))
}

/// Issued only when `k_s < 1`, i.e. when the geometric series `Σ_j k_s^j`
/// converges.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LocalizationCertificate<T> {
    k_s: T,
}

impl<T: Real> LocalizationCertificate<T> {
    pub fn new(k_s: T) -> Result<Self> {
        if k_s >= T::zero() && k_s < T::one() {
            Ok(LocalizationCertificate { k_s })
        } else {
            Err(Error::Precondition(format!(
                "k_s = {k_s} is not below 1; no localization certificate"
            )))
        }
    }

    pub fn k_s(&self) -> T {
        self.k_s
    }

    /// `Σ_{j≥0} k_s^j = 1/(1 - k_s)`
    pub fn geometric_sum(&self) -> T {
        T::one() / (T::one() - self.k_s)
    }

    /// Per-step decay exponent `log k_s` of the iterated bound.
    pub fn log_rate(&self) -> T {
        self.k_s.ln()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::operators::{kernel_from_symbol, SymbolSpec};
    use approx::assert_relative_eq;

    fn lap1() -> KernelOperator<f64> {
        kernel_from_symbol(&SymbolSpec::laplacian(1)).unwrap()
    }

    #[test]
    fn coupling_constant_cases() {
        assert_eq!(coupling_constant(9.0, 30.0, 0.5, false, 0.7), 3.0);
        assert_eq!(coupling_constant(9.0, 0.0, 0.5, true, 0.7), 0.0);
        assert_relative_eq!(coupling_constant(9.0, 30.0, 0.5, true, 0.7), 30f64.sqrt() * 0.7);
    }

    #[test]
    fn k_s_values() {
        let k = lap1();
        assert_relative_eq!(k_s_factor(&k, 9.0, 0.0, 0.5, SiteProfile::OFF_ONLY, 1.0).unwrap(), 2.0 / 3.0, max_relative = 1e-14);
        let edge = k.s_norm(0.5).unwrap();
        assert_relative_eq!(k_s_factor(&k, edge, 0.0, 0.5, SiteProfile::OFF_ONLY, 1.0).unwrap(), 1.0, max_relative = 1e-14);
        // mixed profile takes the smaller C, i.e. the larger k_s
        let off = k_s_factor(&k, 9.0, 16.0, 0.5, SiteProfile::OFF_ONLY, 0.5).unwrap();
        let on = k_s_factor(&k, 9.0, 16.0, 0.5, SiteProfile::ON_ONLY, 0.5).unwrap();
        let mixed = k_s_factor(&k, 9.0, 16.0, 0.5, SiteProfile::MIXED, 0.5).unwrap();
        assert_eq!(mixed, off.max(on));
        assert!(k_s_factor(&k, 9.0, 0.0, 0.5, SiteProfile::ON_ONLY, 0.5).unwrap().is_infinite());
    }

    #[test]
    fn threshold_values() {
        let k = lap1();
        assert_relative_eq!(lambda_threshold(&k, 0.5, 1.0).unwrap(), 4.0, max_relative = 1e-14);
        assert_relative_eq!(lambda_threshold(&k, 0.5, 0.5).unwrap(), 16.0, max_relative = 1e-14);
        assert!(lambda_threshold(&k, 0.5, 0.0).is_err());
    }

    #[test]
    fn am_bound_values() {
        let v: f64 = am_uniform_bound(10.0, 0.5).unwrap();
        assert_relative_eq!(v, (2.0 * 2f64.sqrt()).sqrt() / (10f64.sqrt() * 0.5), max_relative = 1e-15);
        assert!((v - 1.0637).abs() < 1e-4);
        assert!(am_uniform_bound(10.0, 0.999999).unwrap() > 1e5);
        assert!(am_uniform_bound(10.0f32, 0.5).is_ok());
    }

    #[test]
    fn certificate_only_below_one() {
        assert!(LocalizationCertificate::new(1.0).is_err());
        assert!(LocalizationCertificate::new(1.3).is_err());
        let c = LocalizationCertificate::new(0.75).unwrap();
        assert_relative_eq!(c.geometric_sum(), 4.0);
    }
}
