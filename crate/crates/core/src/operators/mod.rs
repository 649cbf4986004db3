//! Translation-invariant free operators and their fractional norms.
//!
//! A [`KernelOperator`] is the hopping kernel `c(d) = ⟨δ_n, H₀ δ_{n+d}⟩` of a
//! self-adjoint convolution operator on ℓ²(ℤ^ν). Kernels are usually built
//! from separable cosine symbols `h(θ) = Σ_i Σ_k 2 c_{i,k} cos(k θ_i)`, for
//! which `c(±k e_i) = c_{i,k}` exactly.

mod assembly;
mod symbol_decay;

use std::collections::BTreeMap;
use std::sync::Mutex;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lattice::Site;
use crate::scalar::Real;

pub use assembly::{assemble_finite_volume, restrict_complement, AssembledOperator, Boundary, Potential};
pub use symbol_decay::{estimate_symbol_bound, fourier_coefficients, kernel_decay_check, DecayRow, GeneralSymbol};

/// One cosine term `2 c cos(k θ)` of an axis symbol.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CosineTerm<T> {
    pub k: u32,
    pub c: T,
}

/// Separable symbol `h(θ) = Σ_i h_i(θ_i)` with each `h_i` a finite cosine
/// series.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SymbolSpec<T> {
    axes: Vec<Vec<CosineTerm<T>>>,
}

impl<T: Real> SymbolSpec<T> {
    pub fn new(axes: Vec<Vec<CosineTerm<T>>>) -> Result<Self> {
        if axes.is_empty() {
            return Err(Error::invalid("symbol needs at least one axis"));
        }
        for (i, axis) in axes.iter().enumerate() {
            for term in axis {
                if term.k == 0 {
                    return Err(Error::invalid(format!(
                        "axis {i}: cosine order k must be positive"
                    )));
                }
                if !term.c.is_finite() {
                    return Err(Error::invalid(format!("axis {i}: non-finite coefficient")));
                }
            }
        }
        Ok(SymbolSpec { axes })
    }

    /// `Σ_{i=1}^{ν} 2 cos θ_i`, the symbol of the lattice Laplacian Δ.
    pub fn laplacian(dim: usize) -> Self {
        Self::uniform_cosine(dim, 1, T::one())
    }

    /// `Σ_i 2 c cos(k θ_i)` on every axis.
    pub fn uniform_cosine(dim: usize, k: u32, c: T) -> Self {
        SymbolSpec {
            axes: vec![vec![CosineTerm { k, c }]; dim],
        }
    }

    pub fn dim(&self) -> usize {
        self.axes.len()
    }

    pub fn axes(&self) -> &[Vec<CosineTerm<T>>] {
        &self.axes
    }

    pub fn axis(&self, i: usize) -> &[CosineTerm<T>] {
        &self.axes[i]
    }

    /// `h_i(θ)`
    pub fn axis_value(&self, i: usize, theta: T) -> T {
        self.axes[i].iter().fold(T::zero(), |acc, t| {
            acc + T::lit(2.0) * t.c * (T::from_u32(t.k).unwrap() * theta).cos()
        })
    }

    /// `h_i^{(order)}(θ)`
    pub fn axis_derivative(&self, i: usize, order: u32, theta: T) -> T {
        self.axes[i].iter().fold(T::zero(), |acc, term| {
            let k = T::from_u32(term.k).unwrap();
            let phase = k * theta + T::FRAC_PI_2() * T::from_u32(order).unwrap();
            acc + T::lit(2.0) * term.c * k.powi(order as i32) * phase.cos()
        })
    }

    pub fn value(&self, theta: &[T]) -> T {
        theta
            .iter()
            .enumerate()
            .fold(T::zero(), |acc, (i, &th)| acc + self.axis_value(i, th))
    }
}

/// Translation-invariant hopping kernel with finite support.
#[derive(Debug)]
pub struct KernelOperator<T> {
    dim: usize,
    hopping: BTreeMap<Site, T>,
    s0: T,
    s_norm_cache: Mutex<BTreeMap<u64, T>>,
}

impl<T: Real> Clone for KernelOperator<T> {
    fn clone(&self) -> Self {
        KernelOperator {
            dim: self.dim,
            hopping: self.hopping.clone(),
            s0: self.s0,
            s_norm_cache: Mutex::new(self.s_norm_cache.lock().unwrap().clone()),
        }
    }
}

impl<T: Real> KernelOperator<T> {
    /// Build from explicit `(offset, amplitude)` pairs; both `c(d)` and
    /// `c(-d)` must be given and agree.
    pub fn from_hopping(dim: usize, entries: impl IntoIterator<Item = (Site, T)>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::invalid("kernel dimension must be at least 1"));
        }
        let mut hopping = BTreeMap::new();
        for (d, c) in entries {
            if d.dim() != dim {
                return Err(Error::invalid(format!("offset {d:?} has wrong dimension")));
            }
            if !c.is_finite() {
                return Err(Error::invalid(format!("non-finite amplitude at {d:?}")));
            }
            if c != T::zero() {
                *hopping.entry(d).or_insert(T::zero()) = c;
            }
        }
        for (d, c) in &hopping {
            let neg = Site::new(d.coords().iter().map(|x| -x));
            match hopping.get(&neg) {
                Some(cn) if cn == c => {}
                _ => {
                    return Err(Error::invalid(format!(
                        "kernel is not symmetric at offset {d:?}"
                    )))
                }
            }
        }
        Ok(KernelOperator {
            dim,
            hopping,
            s0: T::zero(),
            s_norm_cache: Mutex::new(BTreeMap::new()),
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Exponent below which the s-norm is not claimed finite; zero for
    /// finitely supported kernels.
    pub fn s0(&self) -> T {
        self.s0
    }

    pub fn with_s0(mut self, s0: T) -> Self {
        self.s0 = s0;
        self
    }

    /// `c(d)`, zero off the support.
    pub fn amplitude(&self, d: &Site) -> T {
        self.hopping.get(d).copied().unwrap_or_else(T::zero)
    }

    pub fn hopping(&self) -> impl Iterator<Item = (&Site, &T)> {
        self.hopping.iter()
    }

    pub fn is_zero(&self) -> bool {
        self.hopping.is_empty()
    }

    /// Largest `|d|_∞` in the support.
    pub fn range(&self) -> u64 {
        self.hopping.keys().map(Site::max_norm).max().unwrap_or(0)
    }

    /// `‖H₀‖_s = (Σ_d |c(d)|^s)^{1/s}`; for a translation-invariant kernel the
    /// supremum over columns is attained by every column.
    pub fn s_norm(&self, s: T) -> Result<T> {
        s_norm(self, s)
    }

    /// `‖H₀‖_s^s = Σ_d |c(d)|^s`
    pub fn s_norm_pow(&self, s: T) -> Result<T> {
        Ok(self.s_norm(s)?.powf(s))
    }
}

/// Kernel of the operator with symbol `spec`.
pub fn kernel_from_symbol<T: Real>(spec: &SymbolSpec<T>) -> Result<KernelOperator<T>> {
    if spec.dim() == 0 {
        return Err(Error::invalid("symbol needs at least one axis"));
    }
    let dim = spec.dim();
    let mut acc: BTreeMap<Site, T> = BTreeMap::new();
    for (i, axis) in spec.axes().iter().enumerate() {
        for term in axis {
            for sign in [-1i64, 1] {
                let mut d = vec![0i64; dim];
                d[i] = sign * term.k as i64;
                let slot = acc.entry(Site::from(d)).or_insert(T::zero());
                *slot = *slot + term.c;
            }
        }
    }
    KernelOperator::from_hopping(dim, acc)
}

/// `(Σ_d |c(d)|^s)^{1/s}`, cached per `s`.
pub fn s_norm<T: Real>(kernel: &KernelOperator<T>, s: T) -> Result<T> {
    if !(s > T::zero() && s <= T::one()) {
        return Err(Error::invalid(format!("s must lie in (0,1], got {s}")));
    }
    let key = s.as_f64().to_bits();
    if let Some(v) = kernel.s_norm_cache.lock().unwrap().get(&key) {
        return Ok(*v);
    }
    let mut sum = T::zero();
    for (n, c) in kernel.hopping.values().enumerate() {
        sum = sum + c.abs().powf(s);
        if !sum.is_finite() {
            return Err(Error::Diverged {
                partial: sum.as_f64(),
                terms: n + 1,
            });
        }
    }
    let norm = sum.powf(T::one() / s);
    kernel.s_norm_cache.lock().unwrap().insert(key, norm);
    Ok(norm)
}

/// s-norm of an infinitely supported kernel given shell by shell:
/// `shell(r)` returns `Σ_{|d|_∞ = r} |c(d)|^s`. Summation stops once a shell
/// contributes less than `tol` relative to the running sum; failing that
/// within `max_radius` shells is reported as divergence.
pub fn s_norm_from_shells<T: Real>(
    s: T,
    mut shell: impl FnMut(u64) -> T,
    tol: T,
    max_radius: u64,
) -> Result<T> {
    if !(s > T::zero() && s <= T::one()) {
        return Err(Error::invalid(format!("s must lie in (0,1], got {s}")));
    }
    let mut sum = T::zero();
    let mut quiet = 0;
    for r in 0..=max_radius {
        let term = shell(r);
        sum = sum + term;
        if !sum.is_finite() {
            return Err(Error::Diverged {
                partial: sum.as_f64(),
                terms: r as usize + 1,
            });
        }
        if r > 0 && term <= tol * sum {
            quiet += 1;
            if quiet >= 3 {
                return Ok(sum.powf(T::one() / s));
            }
        } else {
            quiet = 0;
        }
    }
    Err(Error::Diverged {
        partial: sum.as_f64(),
        terms: max_radius as usize + 1,
    })
}

/// Geometric (Neumann-series) bound on `Σ_m |(H₀ - z)^{-1}(n,m)|^s` for
/// `Re z = E`:
/// `|E|^{-s} Σ_k (‖H₀‖_s^s / |E|^s)^k = |E|^{-s} / (1 - ‖H₀‖_s^s / |E|^s)`.
/// The prefactor is `|1/z|^s`; a bare `1/|E|` is not a bound for `s < 1`.
pub fn neumann_fractional_bound<T: Real>(kernel: &KernelOperator<T>, energy: T, s: T) -> Result<T> {
    let norm = s_norm(kernel, s)?;
    let e = energy.abs();
    if e <= norm {
        return Err(Error::Precondition(format!(
            "|E| = {e} must exceed ‖H₀‖_s = {norm}; the Neumann series diverges"
        )));
    }
    let ratio = norm.powf(s) / e.powf(s);
    Ok(e.powf(-s) / (T::one() - ratio))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn d1(x: i64) -> Site {
        Site::from([x])
    }

    #[test]
    fn laplacian_kernel_1d() {
        let k = kernel_from_symbol(&SymbolSpec::<f64>::laplacian(1)).unwrap();
        assert_eq!(k.amplitude(&d1(1)), 1.0);
        assert_eq!(k.amplitude(&d1(-1)), 1.0);
        assert_eq!(k.amplitude(&d1(0)), 0.0);
        assert_eq!(k.amplitude(&d1(2)), 0.0);
        assert_eq!(k.hopping().count(), 2);
    }

    #[test]
    fn third_order_cosine_kernel_2d() {
        let k = kernel_from_symbol(&SymbolSpec::<f64>::uniform_cosine(2, 3, 1.0)).unwrap();
        for d in [[3, 0], [-3, 0], [0, 3], [0, -3]] {
            assert_eq!(k.amplitude(&Site::from(d)), 1.0);
        }
        assert_eq!(k.hopping().count(), 4);
        assert_eq!(k.amplitude(&Site::from([1, 0])), 0.0);
    }

    #[test]
    fn zero_symbol_is_zero_operator() {
        let spec = SymbolSpec::<f64>::new(vec![vec![]]).unwrap();
        let k = kernel_from_symbol(&spec).unwrap();
        assert!(k.is_zero());
    }

    #[test]
    fn empty_symbol_rejected() {
        assert!(SymbolSpec::<f64>::new(vec![]).is_err());
    }

    #[test]
    fn repeated_terms_accumulate() {
        let spec = SymbolSpec::new(vec![vec![CosineTerm { k: 1, c: 0.5 }, CosineTerm { k: 1, c: 0.25 }]]).unwrap();
        let k = kernel_from_symbol(&spec).unwrap();
        assert_eq!(k.amplitude(&d1(1)), 0.75);
    }

    #[test]
    fn laplacian_s_norms() {
        let k2 = kernel_from_symbol(&SymbolSpec::<f64>::laplacian(2)).unwrap();
        assert_eq!(k2.s_norm(0.5).unwrap(), 16.0);
        let k1 = kernel_from_symbol(&SymbolSpec::<f64>::laplacian(1)).unwrap();
        assert_eq!(k1.s_norm(1.0).unwrap(), 2.0);
    }

    #[test]
    fn two_range_s_norm() {
        let spec = SymbolSpec::new(vec![vec![CosineTerm { k: 1, c: 1.0 }, CosineTerm { k: 2, c: 0.5 }]]).unwrap();
        let k = kernel_from_symbol(&spec).unwrap();
        // direct summation
        let direct: f64 = [1.0f64, 1.0, 0.5, 0.5].iter().map(|c| c.sqrt()).sum::<f64>().powi(2);
        assert_relative_eq!(k.s_norm(0.5).unwrap(), direct, max_relative = 1e-14);
        assert_relative_eq!(direct, 11.656854249492381, max_relative = 1e-14);
    }

    #[test]
    fn single_precision_kernel() {
        let k = kernel_from_symbol(&SymbolSpec::<f32>::laplacian(3)).unwrap();
        assert_relative_eq!(k.s_norm(0.5f32).unwrap(), 36.0f32, max_relative = 1e-5);
    }

    #[test]
    fn s_norm_domain() {
        let k = kernel_from_symbol(&SymbolSpec::<f64>::laplacian(1)).unwrap();
        assert!(k.s_norm(0.0).is_err());
        assert!(k.s_norm(1.2).is_err());
    }

    #[test]
    fn asymmetric_kernel_rejected() {
        let r = KernelOperator::from_hopping(1, vec![(d1(1), 1.0f64)]);
        assert!(r.is_err());
    }

    #[test]
    fn shell_summation_converges_and_diverges() {
        // c(d) = 2^{-|d|}: Σ_r 2·2^{-r s} over r ≥ 1
        let s = 0.5f64;
        let v = s_norm_from_shells(s, |r| if r == 0 { 0.0 } else { 2.0 * 2f64.powf(-(r as f64) * s) }, 1e-16, 500).unwrap();
        let exact_pow = 2.0 * 2f64.powf(-s) / (1.0 - 2f64.powf(-s));
        assert_relative_eq!(v, exact_pow.powf(1.0 / s), max_relative = 1e-12);
        // c(d) = 1/|d|: |c|^s = r^{-s}, not summable for s ≤ 1
        let err = s_norm_from_shells(s, |r| if r == 0 { 0.0 } else { 2.0 * (r as f64).powf(-s) }, 1e-12, 200).unwrap_err();
        assert!(matches!(err, Error::Diverged { .. }));
    }

    #[test]
    fn neumann_bound_values() {
        let k = kernel_from_symbol(&SymbolSpec::<f64>::laplacian(1)).unwrap();
        let b = neumann_fractional_bound(&k, 3.0, 0.9).unwrap();
        let closed = 3f64.powf(-0.9) / (1.0 - 2.0 / 3f64.powf(0.9));
        assert_relative_eq!(b, closed, max_relative = 1e-14);
        assert!((b - 1.4535).abs() < 1e-3);
        assert!(neumann_fractional_bound(&k, 1e8, 0.9).unwrap() < 1e-7);
        let edge = k.s_norm(0.9).unwrap();
        assert!(matches!(
            neumann_fractional_bound(&k, edge, 0.9),
            Err(Error::Precondition(_))
        ));
    }

    #[test]
    fn neumann_bound_dominates_free_green_function() {
        // 1-D free resolvent outside the band: |G(0,m)| = e^{-κ|m|} / (2 sinh κ), 2 cosh κ = E
        let k = kernel_from_symbol(&SymbolSpec::<f64>::laplacian(1)).unwrap();
        for s in [0.5, 0.9] {
            for e in [2.5f64, 3.0, 4.0, 6.0, 20.0] {
                if e <= k.s_norm(s).unwrap() {
                    continue;
                }
                let kappa = (e / 2.0).acosh();
                let g0 = 1.0 / (2.0 * kappa.sinh());
                let q = (-kappa * s).exp();
                let exact = g0.powf(s) * (1.0 + 2.0 * q / (1.0 - q));
                let b = neumann_fractional_bound(&k, e, s).unwrap();
                assert!(exact <= b, "E={e} s={s}: {exact} > {b}");
            }
        }
    }
}
