//! End-to-end checks across lattice, assembly, resolvent, dynamics and spectra.

use nalgebra::DMatrix;
use num_complex::Complex64;
use sparseloc::disorder::{sample_potential, DisorderModel, Law};
use sparseloc::dynamics::{bessel_kernel, Propagator};
use sparseloc::lattice::{generate_sparse_set, sparseness_cap};
use sparseloc::operators::{assemble_finite_volume, kernel_from_symbol, Potential, SymbolSpec};
use sparseloc::resolvent::green_row;
use sparseloc::spectra::eigensystem;
use sparseloc::{Cube, Generator, Site};

fn laplacian(dim: usize) -> sparseloc::Kernel {
    kernel_from_symbol(&SymbolSpec::laplacian(dim)).unwrap()
}

#[test]
fn free_green_function_matches_closed_form() {
    // outside the band, 2 cosh κ = E and |G(0,m)| = e^{-κ|m|} / (2 sinh κ)
    let cube = Cube::centered(1, 200).unwrap();
    let a = assemble_finite_volume(&laplacian(1), &Potential::new(), &cube).unwrap();
    let e = 3.0;
    let row = green_row(&a, Complex64::new(e, 1e-12), &Site::origin(1)).unwrap();
    let kappa = (e / 2.0f64).acosh();
    for m in -20i64..=20 {
        let exact = (-kappa * m.abs() as f64).exp() / (2.0 * kappa.sinh());
        let got = row.get(&Site::new([m])).unwrap();
        assert!((got.norm() - exact).abs() < 1e-10, "m={m}: {got} vs {exact}");
        assert!(got.re < 0.0);
    }
}

#[test]
fn green_row_equals_dense_inverse_with_disorder() {
    let cube = Cube::centered(2, 4).unwrap();
    let law = Law::from_name("uniform", &[-1.0, 1.0]).unwrap();
    let model = DisorderModel::new(law, 3.0, 17).unwrap();
    let set = generate_sparse_set(0.5, &cube, Generator::BernoulliThinned, 4).unwrap();
    let v = sample_potential(&model, set.sites(), 0);
    let a = assemble_finite_volume(&laplacian(2), &v, &cube).unwrap();
    let z = Complex64::new(0.7, 0.05);
    let n = a.size();
    let dense = a.to_dense().map(|x| Complex64::new(x, 0.0)) - DMatrix::<Complex64>::identity(n, n) * z;
    let inv = dense.try_inverse().unwrap();
    let source = Site::new([1, -2]);
    let row = green_row(&a, z, &source).unwrap();
    let j = cube.index_of(&source).unwrap();
    for (i, m) in cube.sites().enumerate() {
        let got = row.get(&m).unwrap();
        assert!((got - inv[(i, j)]).norm() < 1e-10, "{m:?}");
    }
}

#[test]
fn potential_lives_on_the_support_only() {
    let cube = Cube::centered(2, 15).unwrap();
    let set = generate_sparse_set(0.4, &cube, Generator::DeterministicPowers, 0).unwrap();
    let law = Law::from_name("uniform", &[-1.0, 1.0]).unwrap();
    let model = DisorderModel::new(law, 2.5, 1).unwrap();
    let v = sample_potential(&model, set.sites(), 3);
    assert_eq!(v.len(), set.len());
    for (n, x) in v.iter() {
        assert!(set.sites().contains(n));
        assert!(x.abs() <= 2.5);
    }
    let a = assemble_finite_volume(&laplacian(2), &v, &cube).unwrap();
    for (i, m) in cube.sites().enumerate() {
        assert_eq!(a.diagonal(i), v.get(&m));
    }
}

#[test]
fn generated_sets_respect_the_cap_in_every_centred_cube() {
    for (dim, half, alpha) in [(1, 200, 0.5), (2, 20, 0.3), (3, 7, 0.25)] {
        let cube = Cube::centered(dim, half).unwrap();
        for generator in [Generator::DeterministicPowers, Generator::BernoulliThinned] {
            for seed in 0..5 {
                let set = generate_sparse_set(alpha, &cube, generator, seed).unwrap();
                assert!(set.centered_violations().is_empty());
                for l in 0..=half {
                    let sub = cube.sub_cube(l);
                    let count = set.sites().iter().filter(|n| n.max_norm() <= l as u64).count() as u64;
                    assert!(count <= sparseness_cap(sub.volume(), alpha), "{dim} {l} {count}");
                }
            }
        }
    }
}

#[test]
fn propagator_agrees_with_bessel_product() {
    let spec = SymbolSpec::laplacian(2);
    let t = 7.5;
    let prop = Propagator::new(&spec, t, 30).unwrap();
    for d in [[0, 0], [3, -4], [10, 1], [-25, 30]] {
        let exact = bessel_kernel(&spec, t, &Site::new(d)).unwrap();
        assert!((prop.kernel(&d) - exact).norm() < 1e-12, "{d:?}");
    }
}

#[test]
fn eigenvalues_reproduce_the_trace() {
    let cube = Cube::centered(1, 40).unwrap();
    let law = Law::from_name("gaussian", &[0.0, 1.0]).unwrap();
    let model = DisorderModel::new(law, 2.0, 9).unwrap();
    let v = sample_potential(&model, &sparseloc::SiteSet::full(&cube), 0);
    let a = assemble_finite_volume(&laplacian(1), &v, &cube).unwrap();
    let rep = eigensystem(&a, 4096).unwrap();
    let trace: f64 = cube.sites().map(|m| v.get(&m)).sum();
    let sum: f64 = rep.eigenvalues.iter().sum();
    assert!((sum - trace).abs() < 1e-9);
    assert!(rep.eigenvalues.windows(2).all(|w| w[0] <= w[1]));
    let n = cube.volume() as f64;
    assert!(rep.ipr.iter().all(|&p| p >= 1.0 / n - 1e-12 && p <= 1.0 + 1e-12));
}
