//! Fixtures and independent reference computations shared by the
//! integration tests.
#![allow(dead_code)]

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use regime_merton::{GeneratorMatrix, MarketModel};

pub const TABLE_TAU: f64 = 0.5;

pub fn two_state(gamma: f64) -> MarketModel {
    two_state_q1(20.0, gamma)
}

pub fn two_state_q1(q1: f64, gamma: f64) -> MarketModel {
    MarketModel::new(
        GeneratorMatrix::two_state(q1, 30.0),
        vec![0.05, 0.05],
        vec![0.5, 0.1],
        vec![0.3, 0.5],
        gamma,
    )
    .unwrap()
}

pub fn three_state(gamma: f64) -> MarketModel {
    let q = GeneratorMatrix::from_rows(&[
        vec![-20.0, 1.0, 19.0],
        vec![25.0, -30.0, 5.0],
        vec![2.0, 8.0, -10.0],
    ])
    .unwrap();
    MarketModel::new(q, vec![0.05; 3], vec![0.5, 0.1, 0.3], vec![0.3, 0.5, 0.7], gamma).unwrap()
}

pub fn single(gamma: f64) -> MarketModel {
    MarketModel::new(GeneratorMatrix::single(), vec![0.05], vec![0.5], vec![0.3], gamma).unwrap()
}

fn log_uniform(rng: &mut impl Rng, lo: f64, hi: f64) -> f64 {
    (rng.random_range(lo.ln()..hi.ln())).exp()
}

/// Random valid model with `m` regimes; off-diagonal rates log-uniform in
/// [0.01, 50].
pub fn random_model(rng: &mut impl Rng, m: usize) -> MarketModel {
    let mut q = vec![0.0; m * m];
    for i in 0..m {
        let mut exit = 0.0;
        for j in 0..m {
            if i != j {
                q[i * m + j] = log_uniform(rng, 0.01, 50.0);
                exit += q[i * m + j];
            }
        }
        q[i * m + i] = -exit;
    }
    let r = (0..m).map(|_| rng.random_range(0.01..0.1)).collect();
    let mu = (0..m).map(|_| rng.random_range(0.01..0.6)).collect();
    let sigma = (0..m).map(|_| rng.random_range(0.1..0.8)).collect();
    let gamma = loop {
        let g: f64 = rng.random_range(-2.0..0.5);
        if g.abs() > 1e-3 {
            break g;
        }
    };
    MarketModel::new(GeneratorMatrix::from_row_major(m, q).unwrap(), r, mu, sigma, gamma).unwrap()
}

/// 100 random models with m cycling through 1..=5.
pub fn random_models(seed: u64, count: usize) -> Vec<MarketModel> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count).map(|k| random_model(&mut rng, 1 + k % 5)).collect()
}

/// Eigenvalues of `Q - diag(delta)` from nalgebra's Schur decomposition.
pub fn eigenvalues(model: &MarketModel) -> Vec<Complex64> {
    let m = model.m();
    let a = DMatrix::from_row_slice(m, m, &model.discounted_generator());
    a.complex_eigenvalues().iter().copied().collect()
}

/// Coefficients of `prod (u - lambda_k)`, ascending.
pub fn poly_from_roots(roots: &[Complex64]) -> Vec<Complex64> {
    let mut c = vec![Complex64::new(1.0, 0.0)];
    for &r in roots {
        let mut next = vec![Complex64::new(0.0, 0.0); c.len() + 1];
        for (k, &a) in c.iter().enumerate() {
            next[k + 1] += a;
            next[k] -= r * a;
        }
        c = next;
    }
    c
}

/// Greedy matching of two multisets of complex numbers; returns the largest
/// relative distance `|a - b| / max(1, |b|)`.
pub fn match_sets(a: &[Complex64], b: &[Complex64]) -> f64 {
    assert_eq!(a.len(), b.len());
    let mut used = vec![false; b.len()];
    let mut worst: f64 = 0.0;
    for x in a {
        let (j, d) = b
            .iter()
            .enumerate()
            .filter(|(j, _)| !used[*j])
            .map(|(j, y)| (j, (x - y).norm() / y.norm().max(1.0)))
            .min_by(|p, q| p.1.total_cmp(&q.1))
            .unwrap();
        used[j] = true;
        worst = worst.max(d);
    }
    worst
}

/// Adaptive Simpson quadrature to absolute tolerance `tol`.
pub fn integrate(f: &dyn Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> f64 {
    fn simpson(fa: f64, fm: f64, fb: f64, a: f64, b: f64) -> f64 {
        (b - a) / 6.0 * (fa + 4.0 * fm + fb)
    }
    #[allow(clippy::too_many_arguments)]
    fn recurse(f: &dyn Fn(f64) -> f64, a: f64, b: f64, fa: f64, fm: f64, fb: f64, whole: f64, tol: f64, depth: u32) -> f64 {
        let m = 0.5 * (a + b);
        let (lm, rm) = (0.5 * (a + m), 0.5 * (m + b));
        let (flm, frm) = (f(lm), f(rm));
        let left = simpson(fa, flm, fm, a, m);
        let right = simpson(fm, frm, fb, m, b);
        let delta = left + right - whole;
        if depth == 0 || delta.abs() <= 15.0 * tol {
            left + right + delta / 15.0
        } else {
            recurse(f, a, m, fa, flm, fm, left, tol / 2.0, depth - 1)
                + recurse(f, m, b, fm, frm, fb, right, tol / 2.0, depth - 1)
        }
    }
    if a == b {
        return 0.0;
    }
    let (fa, fb, fm) = (f(a), f(b), f(0.5 * (a + b)));
    recurse(f, a, b, fa, fm, fb, simpson(fa, fm, fb, a, b), tol, 40)
}

/// Right-hand side of the first-jump renewal equation for regime `i`:
/// `e^{-(d_i+q_i) tau} + sum_j q_ij int_0^tau e^{-(d_i+q_i) s} g_j(tau - s) ds`.
pub fn renewal_rhs(model: &MarketModel, g: &dyn Fn(usize, f64) -> f64, i: usize, tau: f64) -> f64 {
    let k = model.delta(i) + model.generator.exit_rate(i);
    let mut total = (-k * tau).exp();
    for j in 0..model.m() {
        let q = model.generator.rate(i, j);
        if j == i || q == 0.0 {
            continue;
        }
        let f = |s: f64| (-k * s).exp() * g(j, tau - s);
        total += q * integrate(&f, 0.0, tau, 1e-13);
    }
    total
}

/// Whether `value` rounds to `printed` at the printed number of decimals.
pub fn matches_printed(value: f64, printed: &str) -> bool {
    let decimals = printed.split('.').nth(1).map_or(0, str::len);
    format!("{value:.decimals$}") == printed
}
