use proptest::prelude::*;
use rand::SeedableRng;
use rmtlab_core::ensemble::{assemble, make_taus, rank_one_resolvent_check};
use rmtlab_core::mp::{residual, solve_f};
use rmtlab_core::rng::replicate_rng;
use rmtlab_core::variance::cov_kernel;
use rmtlab_core::vectors::BaseLaw;
use rmtlab_core::{Complex64, SigmaMeasure, TestFunction, VectorLaw};

fn sigma_strategy() -> impl Strategy<Value = SigmaMeasure> {
    (0.05f64..4.0, 0.05f64..4.0, 0.05f64..0.95, 0.1f64..3.0)
        .prop_map(|(t1, t2, w, c)| SigmaMeasure::new(vec![(t1, w), (t2, 1.0 - w)], c).unwrap())
}

fn z_strategy() -> impl Strategy<Value = Complex64> {
    (-2.0f64..8.0, 0.1f64..4.0, any::<bool>())
        .prop_map(|(re, im, up)| Complex64::new(re, if up { im } else { -im }))
}

fn law_strategy() -> impl Strategy<Value = VectorLaw> {
    prop_oneof![
        Just(VectorLaw::IidScaled(BaseLaw::Gaussian)),
        Just(VectorLaw::IidScaled(BaseLaw::Rademacher)),
        Just(VectorLaw::IidScaled(BaseLaw::Uniform)),
        Just(VectorLaw::Sphere),
        (0.5f64..8.0).prop_map(VectorLaw::LpBall),
    ]
}

proptest! {
    #[test]
    fn solution_is_herglotz_and_bounded(sigma in sigma_strategy(), z in z_strategy()) {
        let sol = solve_f(z, &sigma).unwrap();
        prop_assert!(sol.f.im * z.im > 0.0);
        prop_assert!(sol.f.norm() <= (1.0 + 1e-9) / z.im.abs());
        prop_assert!(residual(z, sol.f, &sigma) <= 1e-12);
    }

    #[test]
    fn solution_commutes_with_conjugation(sigma in sigma_strategy(), z in z_strategy()) {
        let a = solve_f(z, &sigma).unwrap().f;
        let b = solve_f(z.conj(), &sigma).unwrap().f;
        prop_assert_eq!(a.conj(), b);
    }

    #[test]
    fn law_strings_round_trip(law in law_strategy()) {
        let back: VectorLaw = law.to_string().parse().unwrap();
        prop_assert_eq!(back, law);
    }

    #[test]
    fn sigma_strings_round_trip(sigma in sigma_strategy()) {
        let back = SigmaMeasure::parse(&sigma.spec_string(), sigma.c()).unwrap();
        prop_assert_eq!(back, sigma);
    }

    #[test]
    fn taus_follow_weights(sigma in sigma_strategy(), m in 1usize..400) {
        let taus = make_taus(&sigma, m).unwrap();
        prop_assert_eq!(taus.len(), m);
        prop_assert!(taus.windows(2).all(|w| w[0] <= w[1]));
        for &(t, w) in sigma.atoms() {
            let count = taus.iter().filter(|&&x| x == t).count() as f64;
            prop_assert!((count - w * m as f64).abs() <= 1.0 + 1e-9);
        }
    }

    #[test]
    fn test_function_strings_round_trip(center in -3.0f64..3.0, width in 0.1f64..2.0, t in 0.1f64..3.0) {
        for phi in [TestFunction::bump(center, width).unwrap(), TestFunction::exp(t).unwrap()] {
            let back: TestFunction = phi.label().parse().unwrap();
            prop_assert_eq!(back.label(), phi.label());
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn kernel_is_symmetric_and_real(sigma in sigma_strategy(), z1 in z_strategy(), z2 in z_strategy(),
                                    a in -3.0f64..1.0, b in -2.0f64..3.0) {
        let c12 = cov_kernel(z1, z2, &sigma, a, b).unwrap();
        let c21 = cov_kernel(z2, z1, &sigma, a, b).unwrap();
        let scale = c12.norm().max(1e-3);
        prop_assert!((c12 - c21).norm() <= 1e-9 * scale);
        let conj = cov_kernel(z1.conj(), z2.conj(), &sigma, a, b).unwrap();
        prop_assert!((conj - c12.conj()).norm() <= 1e-9 * scale);
    }

    #[test]
    fn rank_one_removal_matches_formula(seed in any::<u64>(), law in law_strategy(),
                                        n in 4usize..24, m in 1usize..40, z in z_strategy()) {
        let mut rng = replicate_rng(seed, 0);
        let vectors: Vec<Vec<f64>> = (0..m).map(|_| law.sample(n, &mut rng).unwrap()).collect();
        let taus: Vec<f64> = (0..m).map(|k| 0.25 + (k % 4) as f64 * 0.5).collect();
        let matrix = assemble(&taus, &vectors).unwrap();
        let r = rank_one_resolvent_check(&matrix, taus[m - 1], &vectors[m - 1], z).unwrap();
        prop_assert!(r.discrepancy() <= 1e-9, "{}", r.discrepancy());
        prop_assert!(r.bound_holds);
    }
}

#[test]
fn independent_streams_differ() {
    let mut a = replicate_rng(1, 0);
    let mut b = replicate_rng(1, 1);
    let mut c = rand_chacha::ChaCha8Rng::seed_from_u64(1);
    let x: u64 = rand::Rng::random(&mut a);
    let y: u64 = rand::Rng::random(&mut b);
    let w: u64 = rand::Rng::random(&mut c);
    assert_ne!(x, y);
    assert_ne!(x, w);
}
