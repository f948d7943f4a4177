use nalgebra::DMatrix;
use num_complex::Complex64 as C;
use proptest::prelude::*;
use rand::rngs::StdRng as Rng64;
use rand::{Rng, SeedableRng};

use stepscat::jost::{bracket, solve_jost, JostOptions, Side};
use stepscat::marchenko::{composition_defect, kernel_inverse_pair, omega, recover_q, KernelGrid, KernelRole};
use stepscat::potentials::{Deviation, Potential};
use stepscat::spectral::{connection_matrices, matrix_structure, scattering_from_connection, unitary_mix, CMat};

/// Unitary Q from the QR factorization of a Gaussian complex matrix, with the
/// phases of R's diagonal folded back in.
fn random_unitary(k: usize, rng: &mut Rng64) -> CMat {
    let mut normal = || {
        let (u1, u2): (f64, f64) = (rng.gen::<f64>().max(1e-300), rng.gen());
        (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
    };
    let z = CMat::from_fn(k, k, |_, _| C::new(normal(), normal()));
    let qr = z.qr();
    let (q, r) = (qr.q(), qr.r());
    let phases = CMat::from_diagonal(&nalgebra::DVector::from_fn(k, |i, _| {
        let d = r[(i, i)];
        if d.norm() > 0.0 { d / d.norm() } else { C::new(1.0, 0.0) }
    }));
    q * phases
}

fn cmax(m: &CMat) -> f64 {
    m.iter().map(|z| z.norm()).fold(0.0, f64::max)
}

fn well(a_plus: f64, depth: f64, width: f64) -> Potential {
    Potential::step(0.0, a_plus).with_deviation(Deviation::Square { x0: 0.0, width, height: -depth })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn unitary_mixes_leave_s_invariant(
        seed in any::<u64>(),
        a_plus in 0.5f64..4.0,
        depth in 0.0f64..8.0,
        width in 0.2f64..2.0,
        offset in 0.1f64..30.0,
    ) {
        let p = well(a_plus, depth, width);
        let c = connection_matrices(&p, a_plus + offset).unwrap();
        let s0 = scattering_from_connection(&c, p.a_plus);
        let mut rng = Rng64::seed_from_u64(seed);
        let u = random_unitary(c.k(), &mut rng);
        let s1 = scattering_from_connection(&unitary_mix(&c, &u).unwrap(), p.a_plus);
        prop_assert!(cmax(&(&s0 - &s1)) <= 1e-10 * cmax(&s0).max(1.0));
    }

    #[test]
    fn s_is_hermitian_psd_with_bounded_rank(
        a_minus in -2.0f64..2.0,
        a_plus in -2.0f64..2.0,
        depth in -3.0f64..8.0,
        frac in 0.05f64..0.95,
        above in 0.05f64..40.0,
    ) {
        prop_assume!((a_minus - a_plus).abs() > 0.1);
        let p = Potential::step(a_minus, a_plus)
            .with_deviation(Deviation::Gaussian { amplitude: -depth, center: 0.3, width: 0.7 });
        let (m1, m2) = (a_minus.min(a_plus), a_minus.max(a_plus));
        for (mu, k) in [(m1 + frac * (m2 - m1), 1), (m2 + above, 2)] {
            let c = connection_matrices(&p, mu).unwrap();
            let s = scattering_from_connection(&c, p.a_plus);
            let (herm, min, rank) = matrix_structure(&s);
            prop_assert!(herm <= 1e-12 * cmax(&s).max(1.0));
            prop_assert!(min >= -1e-12 * cmax(&s).max(1.0));
            prop_assert!(rank <= k);
            if mu > a_plus {
                prop_assert!((2.0 * (mu - a_plus).sqrt() * s[(0, 0)].re - 1.0).abs() <= 1e-6);
            }
        }
    }

    #[test]
    fn jost_brackets_match_channel_momenta(
        a_plus in -1.0f64..2.0,
        amp in -4.0f64..4.0,
        above in 0.2f64..20.0,
    ) {
        let p = Potential::step(0.0, a_plus)
            .with_deviation(Deviation::Gaussian { amplitude: amp, center: 0.0, width: 0.8 });
        let mu = a_plus.max(0.0) + above;
        let lam = (mu - a_plus).sqrt();
        let xs = [-1.5, -0.2, 0.4, 2.0];
        let opts = JostOptions::default();
        let y1 = solve_jost(&p, mu, Side::Plus, 1, &xs, &opts).unwrap();
        let y2 = solve_jost(&p, mu, Side::Plus, 2, &xs, &opts).unwrap();
        for i in 0..xs.len() {
            let b11 = bracket(y1.y[i], y1.y_prime[i], y1.y[i], y1.y_prime[i]);
            let b22 = bracket(y2.y[i], y2.y_prime[i], y2.y[i], y2.y_prime[i]);
            let b12 = bracket(y1.y[i], y1.y_prime[i], y2.y[i], y2.y_prime[i]);
            // λ₁⁺ = λ and λ₂⁺ = −λ on the upper band.
            prop_assert!((b11 - C::new(2.0 * lam, 0.0)).norm() <= 1e-6 * lam.max(1.0));
            prop_assert!((b22 - C::new(-2.0 * lam, 0.0)).norm() <= 1e-6 * lam.max(1.0));
            prop_assert!(b12.norm() <= 1e-6 * lam.max(1.0));
        }
    }

    #[test]
    fn omega_is_symmetric_and_nonnegative(x in -10.0f64..10.0, t in -10.0f64..10.0) {
        prop_assert_eq!(omega(x, t), omega(t, x));
        prop_assert!(omega(x, t) >= 0.0);
        prop_assert!(omega(x, t) <= x.abs().min(t.abs()));
    }

    #[test]
    fn recover_q_is_exact_on_linear_diagonals(
        a_plus in -5.0f64..5.0,
        slope in -3.0f64..3.0,
        icpt in -1.0f64..1.0,
        n in 3usize..40,
        h in 0.01f64..0.5,
    ) {
        let kd: Vec<f64> = (0..n).map(|i| icpt + slope * h * i as f64).collect();
        for q in recover_q(&kd, h, a_plus) {
            prop_assert!((q - (a_plus - 2.0 * slope)).abs() <= 1e-9 * (1.0 + slope.abs() / h));
        }
    }

    #[test]
    fn volterra_pair_inverts_and_composes(seed in any::<u64>(), n in 2usize..30, scale in 0.01f64..3.0) {
        let mut rng = Rng64::seed_from_u64(seed);
        let g: Vec<f64> = (0..n).map(|i| -1.0 + 0.1 * i as f64).collect();
        let values = DMatrix::from_fn(n, n, |i, j| if j >= i { scale * (rng.gen::<f64>() - 0.5) } else { 0.0 });
        let k = KernelGrid::new(KernelRole::K, g.clone(), g, values).unwrap();
        let h = kernel_inverse_pair(&k).unwrap();
        prop_assert_eq!(h.role, KernelRole::H);
        let probe: Vec<f64> = (0..n).map(|_| rng.gen::<f64>() - 0.5).collect();
        prop_assert!(composition_defect(&k, &h, &probe).unwrap() <= 1e-10);
        let back = kernel_inverse_pair(&h).unwrap();
        prop_assert!((&back.values - &k.values).amax() <= 1e-10 * (1.0 + k.values.amax()));
    }
}
