//! Integer-order Bessel functions `J_n(x)` by Miller's backward recurrence.
//!
//! Used as the independent check of the quadrature propagator: for the axis
//! symbol `2c cos(kθ)` the free kernel is `(-i)^{d/k} J_{d/k}(2ct)`.

/// `J_0(x), …, J_{n_max}(x)`.
pub fn bessel_j_table(n_max: usize, x: f64) -> Vec<f64> {
    let mut out = vec![0.0; n_max + 1];
    if x == 0.0 {
        out[0] = 1.0;
        return out;
    }
    let ax = x.abs();
    let base = (n_max as f64).max(ax);
    let start = 2 * (((base + (160.0 * base).sqrt() + 30.0) as usize) / 2 + 1);
    let two_over_x = 2.0 / ax;
    let (mut jp1, mut j) = (0.0f64, 1e-30f64);
    let mut norm = 0.0;
    for k in (1..=start).rev() {
        let jm1 = k as f64 * two_over_x * j - jp1;
        jp1 = j;
        j = jm1;
        // j now holds the unnormalised J_{k-1}
        if k - 1 <= n_max {
            out[k - 1] = j;
        }
        if (k - 1) % 2 == 0 && k - 1 > 0 {
            norm += 2.0 * j;
        }
        if j.abs() > 1e250 {
            j *= 1e-250;
            jp1 *= 1e-250;
            norm *= 1e-250;
            out.iter_mut().for_each(|v| *v *= 1e-250);
        }
    }
    norm += j;
    out.iter_mut().for_each(|v| *v /= norm);
    if x < 0.0 {
        for (n, v) in out.iter_mut().enumerate() {
            if n % 2 == 1 {
                *v = -*v;
            }
        }
    }
    out
}

/// `J_n(x)` for any integer `n`.
pub fn bessel_j(n: i64, x: f64) -> f64 {
    let m = n.unsigned_abs() as usize;
    let v = bessel_j_table(m, x)[m];
    if n < 0 && m % 2 == 1 {
        -v
    } else {
        v
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn series(n: u32, x: f64) -> f64 {
        // Σ_k (-1)^k (x/2)^{2k+n} / (k! (k+n)!)
        let mut term = (x / 2.0).powi(n as i32) / (1..=n).map(|i| i as f64).product::<f64>();
        let mut sum = term;
        for k in 1..80 {
            term *= -(x * x / 4.0) / (k as f64 * (k + n) as f64);
            sum += term;
        }
        sum
    }

    #[test]
    fn matches_power_series() {
        for &x in &[0.1, 0.7, 2.0, 5.0, 9.5] {
            let table = bessel_j_table(20, x);
            for n in 0..=20u32 {
                let s = series(n, x);
                // the alternating series itself cancels ~e^{x/2}-sized terms
                let tol = 1e-15 * (x / 2.0).exp().max(10.0);
                assert!((table[n as usize] - s).abs() < tol, "n={n} x={x}: {} vs {s}", table[n as usize]);
            }
        }
    }

    #[test]
    fn reference_values() {
        assert!((bessel_j(0, 2.0) - 0.22389077914123567).abs() < 1e-15);
        assert!((bessel_j(1, 2.0) - 0.5767248077568734).abs() < 1e-15);
        assert!((bessel_j(10, 10.0) - 0.20748610663335885).abs() < 1e-14);
        assert!((bessel_j(0, 100.0) - 0.019985850304223122).abs() < 1e-14);
        assert!((bessel_j(-3, 2.0) + bessel_j(3, 2.0)).abs() < 1e-16);
    }

    #[test]
    fn addition_identity() {
        // Σ_n J_n(x)^2 = 1 (over all integers n)
        for &x in &[1.0, 30.0, 200.0] {
            let t = bessel_j_table(400, x);
            let s: f64 = t[0] * t[0] + 2.0 * t[1..].iter().map(|v| v * v).sum::<f64>();
            assert!((s - 1.0).abs() < 1e-13, "x={x}: {s}");
        }
    }
}
