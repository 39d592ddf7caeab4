mod common;

use common::*;
use num_complex::Complex64;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use regime_merton::laplace::TwoStateClosedForm;
use regime_merton::oracles::matexp_g;
use regime_merton::portfolio::merton_factor;
use regime_merton::{solve_g, GeneratorMatrix, MarketModel, ValueSolution};

fn model_from(seed: u64, m: usize) -> MarketModel {
    random_model(&mut ChaCha8Rng::seed_from_u64(seed), m)
}

fn expanded_poles(model: &MarketModel) -> Vec<Complex64> {
    let sol = solve_g(model).unwrap();
    sol.diagnostics.poles[0].iter().flat_map(|t| std::iter::repeat_n(t.pole, t.multiplicity)).collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn transforms_share_a_monic_denominator(seed in any::<u64>(), m in 1usize..=5) {
        let sol = solve_g(&model_from(seed, m)).unwrap();
        let den = &sol.diagnostics.transforms[0].den;
        prop_assert_eq!(den.degree(), Some(m));
        prop_assert_eq!(den.leading(), 1.0);
        for rf in &sol.diagnostics.transforms {
            prop_assert!(rf.is_strictly_proper());
            prop_assert_eq!(&rf.den, den);
            prop_assert_eq!(rf.num.degree(), Some(m - 1));
        }
        for r in &sol.diagnostics.reconstruction_residuals {
            prop_assert!(*r <= 1e-9);
        }
    }

    #[test]
    fn poles_are_eigenvalues(seed in any::<u64>(), m in 1usize..=5) {
        let model = model_from(seed, m);
        let d = match_sets(&expanded_poles(&model), &eigenvalues(&model));
        prop_assert!(d <= 1e-8, "gap {d:e}");
    }

    #[test]
    fn unit_initial_value_and_positivity(seed in any::<u64>(), m in 1usize..=5) {
        let sol = solve_g(&model_from(seed, m)).unwrap();
        for i in 0..m {
            prop_assert!((sol.eval(i, 0.0) - 1.0).abs() <= 1e-10);
            prop_assert!(sol.g[i].eval_complex(0.7).im.abs() <= 1e-12 * sol.eval(i, 0.7).abs());
            for k in 0..100 {
                prop_assert!(sol.eval(i, k as f64 * 0.02) > 0.0);
            }
        }
    }

    #[test]
    fn renewal_equation_holds(seed in any::<u64>(), m in 1usize..=4, tau in 0.05..0.6f64) {
        let model = model_from(seed, m);
        let sol = solve_g(&model).unwrap();
        let g = |j: usize, s: f64| sol.eval(j, s);
        for i in 0..m {
            let rhs = renewal_rhs(&model, &g, i, tau);
            prop_assert!((rhs - g(i, tau)).abs() <= 1e-7 * g(i, tau));
        }
    }

    #[test]
    fn two_state_discriminant_and_fast_path(seed in any::<u64>(), tau in 0.0..2.0f64) {
        let model = model_from(seed, 2);
        let c = TwoStateClosedForm::new(&model).unwrap();
        // (d1 + q1 - d2 - q2)^2 + 4 q1 q2 written out independently
        let (q1, q2) = (model.generator.exit_rate(0), model.generator.exit_rate(1));
        let spread = model.delta(0) + q1 - model.delta(1) - q2;
        let disc = spread * spread + 4.0 * q1 * q2;
        prop_assert!(c.discriminant > 0.0);
        prop_assert!((c.discriminant - disc).abs() <= 1e-9 * disc);
        let sol = solve_g(&model).unwrap();
        for i in 0..2 {
            let (fast, general) = (c.g(i, tau), sol.eval(i, tau));
            prop_assert!((fast - general).abs() <= 1e-10 * general.abs());
        }
    }

    #[test]
    fn single_regime_is_merton(mu in 0.0..1.0f64, sigma in 0.05..1.0f64, r in 0.0..0.1f64,
                               gamma in -3.0..0.95f64, tau in 0.0..3.0f64) {
        prop_assume!(gamma.abs() > 1e-3);
        let model = MarketModel::new(GeneratorMatrix::single(), vec![r], vec![mu], vec![sigma], gamma).unwrap();
        let g = solve_g(&model).unwrap().eval(0, tau);
        let want = merton_factor(mu, sigma, r, gamma, tau);
        prop_assert!((g - want).abs() <= 1e-12 * want, "{g} vs {want}");
    }

    #[test]
    fn value_is_homogeneous_in_wealth(seed in any::<u64>(), m in 1usize..=3,
                                      x in 0.1..10.0f64, lambda in 0.1..10.0f64, t in 0.0..1.0f64) {
        let model = model_from(seed, m);
        let gamma = model.gamma;
        let sol = ValueSolution::new(model, 1.0).unwrap();
        for i in 0..m {
            let lhs = sol.value(lambda * x, t, i).unwrap();
            let rhs = lambda.powf(gamma) * sol.value(x, t, i).unwrap();
            prop_assert!((lhs - rhs).abs() <= 1e-12 * rhs.abs());
        }
    }
}

#[test]
fn three_state_denominator_is_characteristic_polynomial() {
    for gamma in [0.1, 0.3, 0.5, 0.9, -1.0] {
        let model = three_state(gamma);
        let sol = solve_g(&model).unwrap();
        let den = sol.diagnostics.transforms[0].den.coeffs().to_vec();
        let chi = poly_from_roots(&eigenvalues(&model));
        assert_eq!(den.len(), 4);
        for (a, b) in den.iter().zip(&chi) {
            assert!(b.im.abs() <= 1e-9 * b.norm().max(1.0));
            assert!((a - b.re).abs() <= 1e-9 * b.re.abs().max(1.0), "{den:?} vs {chi:?}");
        }
    }
}

#[test]
fn cyclic_chain_has_complex_poles() {
    // one-way rotation 1 -> 2 -> 3 -> 1 gives a complex-conjugate pair
    let q = GeneratorMatrix::from_rows(&[
        vec![-10.0, 10.0, 0.0],
        vec![0.0, -10.0, 10.0],
        vec![10.0, 0.0, -10.0],
    ])
    .unwrap();
    let model = MarketModel::new(q, vec![0.05; 3], vec![0.5, 0.1, 0.3], vec![0.3, 0.5, 0.7], 0.5).unwrap();
    let poles = expanded_poles(&model);
    assert!(poles.iter().any(|p| p.im.abs() > 1.0), "{poles:?}");
    assert!(match_sets(&poles, &eigenvalues(&model)) <= 1e-8);
    let sol = solve_g(&model).unwrap();
    for tau in [0.1, 0.5, 1.0, 3.0] {
        let mat = matexp_g(&model, tau);
        for i in 0..3 {
            assert!(sol.g[i].eval_complex(tau).im.abs() <= 1e-12 * mat[i]);
            assert!((sol.eval(i, tau) - mat[i]).abs() <= 1e-10 * mat[i]);
        }
    }
}

#[test]
fn repeated_pole_from_identical_regimes() {
    // identical regimes decouple from the chain: a double pole at -delta
    let q = GeneratorMatrix::from_rows(&[vec![-5.0, 5.0, 0.0], vec![0.0, -5.0, 5.0], vec![0.0, 0.0, 0.0]]).unwrap();
    let model = MarketModel::new(q, vec![0.05; 3], vec![0.5; 3], vec![0.3; 3], 0.5).unwrap();
    let sol = solve_g(&model).unwrap();
    for tau in [0.0, 0.2, 1.0] {
        let want = (-model.delta(0) * tau).exp();
        for i in 0..3 {
            assert!((sol.eval(i, tau) - want).abs() <= 1e-10 * want);
        }
    }
}

#[test]
fn defective_double_pole() {
    // regimes 1 and 2 share delta and exit rate, giving a 2x2 Jordan block
    let q = GeneratorMatrix::from_rows(&[vec![-4.0, 4.0, 0.0], vec![0.0, -4.0, 4.0], vec![0.0, 0.0, 0.0]]).unwrap();
    let model = MarketModel::new(q, vec![0.05; 3], vec![0.5, 0.5, 0.2], vec![0.3, 0.3, 0.4], 0.3).unwrap();
    let sol = solve_g(&model).unwrap();
    for tau in [0.1, 0.5, 1.0, 2.0] {
        let mat = matexp_g(&model, tau);
        for i in 0..3 {
            assert!((sol.eval(i, tau) - mat[i]).abs() <= 1e-9 * mat[i], "{} vs {}", sol.eval(i, tau), mat[i]);
        }
    }
}

#[test]
fn tables_agree_with_each_other() {
    let a = solve_g(&two_state(0.1)).unwrap();
    let b = solve_g(&two_state_q1(20.0, 0.1)).unwrap();
    assert_eq!(a.eval_all(TABLE_TAU), b.eval_all(TABLE_TAU));
}
