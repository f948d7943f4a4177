//! Exponential integral of complex argument and the oscillatory power tails
//! built on it.

use num_complex::Complex64;

const EULER_GAMMA: f64 = 0.577_215_664_901_532_9;

/// E1(z) = ∫_z^∞ e^{-w}/w dw for Re z ≥ 0, z ≠ 0.
pub fn exp_integral_e1(z: Complex64) -> Complex64 {
    let one = Complex64::new(1.0, 0.0);
    if z.norm() < 2.0 {
        // Power series: -γ - ln z - Σ (-z)^n / (n n!)
        let mut sum = Complex64::new(0.0, 0.0);
        let mut term = one;
        for n in 1..200 {
            term *= -z / n as f64;
            let add = term / n as f64;
            sum += add;
            if add.norm() < 1e-17 * sum.norm().max(1e-300) {
                break;
            }
        }
        -EULER_GAMMA - z.ln() - sum
    } else {
        // Modified Lentz evaluation of the continued fraction
        // E1(z) = e^{-z} / (z + 1 - 1²/(z + 3 - 2²/(z + 5 - ...)))
        let tiny = 1e-300;
        let mut b = z + 1.0;
        let mut c = Complex64::new(1.0 / tiny, 0.0);
        let mut d = one / b;
        let mut h = d;
        for i in 1..10_000 {
            let an = -((i * i) as f64);
            b += 2.0;
            d = one / (an * d + b);
            c = b + an / c;
            let del = c * d;
            h *= del;
            if (del - one).norm() < 1e-16 {
                break;
            }
        }
        h * (-z).exp()
    }
}

/// J_n(s; K) = ∫_K^∞ e^{-iks} k^{-n} dk for integer n ≥ 1 (n ≥ 2 when s = 0).
pub fn oscillatory_tail(n: u32, s: f64, k0: f64) -> Complex64 {
    assert!(n >= 1 && k0 > 0.0);
    if s == 0.0 {
        assert!(n >= 2, "J_1 diverges at s = 0");
        return Complex64::new(1.0 / ((n - 1) as f64 * k0.powi(n as i32 - 1)), 0.0);
    }
    let e1 = exp_integral_e1(Complex64::new(0.0, k0 * s.abs()));
    let mut j = if s > 0.0 { e1 } else { e1.conj() };
    let phase = Complex64::new(0.0, -k0 * s).exp();
    for m in 2..=n {
        let mf = (m - 1) as f64;
        j = phase / (mf * k0.powi(m as i32 - 1)) - Complex64::new(0.0, s / mf) * j;
    }
    j
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quad::{composite_nodes, GaussLegendre};

    #[test]
    fn e1_real_argument_reference_values() {
        // E1(1) and E1(3) from standard tables.
        let e = exp_integral_e1(Complex64::new(1.0, 0.0));
        assert!((e.re - 0.219_383_934_395_520_3).abs() < 1e-14 && e.im.abs() < 1e-15);
        let e = exp_integral_e1(Complex64::new(3.0, 0.0));
        assert!((e.re - 0.013_048_381_094_197_04).abs() < 1e-15);
    }

    #[test]
    fn e1_imaginary_matches_sine_cosine_integrals() {
        // E1(iy) = -Ci(y) + i(Si(y) - π/2); Si(1), Ci(1) and Si(5), Ci(5) from tables.
        let e = exp_integral_e1(Complex64::new(0.0, 1.0));
        assert!((e.re + 0.337_403_922_900_968_1).abs() < 1e-13);
        assert!((e.im - (0.946_083_070_367_183_0 - std::f64::consts::FRAC_PI_2)).abs() < 1e-13);
        let e = exp_integral_e1(Complex64::new(0.0, 5.0));
        assert!((e.re + (-0.190_029_749_656_643_9)).abs() < 1e-13);
        assert!((e.im - (1.549_931_244_944_674_1 - std::f64::consts::FRAC_PI_2)).abs() < 1e-13);
    }

    #[test]
    fn oscillatory_tail_matches_brute_force() {
        let rule = GaussLegendre::new(16);
        for &(n, s, k0) in &[(4u32, 1.3, 2.0), (4, -0.7, 3.0), (4, 5.0, 1.0), (4, 0.0, 1.5)] {
            // Truncate at K + L; the neglected remainder is below L^{1-n}/(n-1).
            let len = 3000.0;
            let nodes = composite_nodes(&rule, k0, k0 + len, 30_000);
            let mut acc = Complex64::new(0.0, 0.0);
            for (k, w) in nodes {
                acc += w * Complex64::new(0.0, -k * s).exp() / k.powi(n as i32);
            }
            let j = oscillatory_tail(n, s, k0);
            assert!((j - acc).norm() < 1e-9, "n={n} s={s}: {j} vs {acc}");
        }
    }

    #[test]
    fn oscillatory_tail_derivative_in_lower_limit() {
        // d/dK J_n(s; K) = -e^{-iKs} K^{-n}
        for &(n, s, k0) in &[(1u32, 0.8, 2.0), (2, -1.7, 3.0), (2, 4.0, 0.5)] {
            let eps = 1e-5;
            let d = (oscillatory_tail(n, s, k0 + eps) - oscillatory_tail(n, s, k0 - eps)) / (2.0 * eps);
            let expect = -Complex64::new(0.0, -k0 * s).exp() / k0.powi(n as i32);
            assert!((d - expect).norm() < 1e-8, "n={n}: {d} vs {expect}");
        }
    }
}
