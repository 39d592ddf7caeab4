//! Independent routes to `g(., tau)`: fixed-step RK4 on the linear system
//! `g' = (Q - diag delta) g`, the matrix exponential of the same system,
//! and Monte Carlo over exactly simulated regime paths.

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp};
use rayon::prelude::*;

use crate::model::MarketModel;
pub use crate::stats::PathEstimate;

/// Default RK4 step count for horizons up to one time unit.
pub const DEFAULT_ODE_STEPS: usize = 20_000;

fn mat_vec(a: &[f64], x: &[f64], out: &mut [f64]) {
    let m = x.len();
    for i in 0..m {
        out[i] = a[i * m..(i + 1) * m].iter().zip(x).map(|(a, x)| a * x).sum();
    }
}

/// Classical fourth-order Runge–Kutta for `g' = (Q - diag delta) g`,
/// `g(0) = 1`, with `steps` equal steps up to `tau`.
pub fn ode_g(model: &MarketModel, tau: f64, steps: usize) -> Vec<f64> {
    assert!(tau >= 0.0 && steps >= 1);
    let m = model.m();
    let a = model.discounted_generator();
    let h = tau / steps as f64;
    let mut g = vec![1.0; m];
    let (mut k1, mut k2, mut k3, mut k4) = (vec![0.0; m], vec![0.0; m], vec![0.0; m], vec![0.0; m]);
    let mut tmp = vec![0.0; m];
    for _ in 0..steps {
        mat_vec(&a, &g, &mut k1);
        for i in 0..m {
            tmp[i] = g[i] + 0.5 * h * k1[i];
        }
        mat_vec(&a, &tmp, &mut k2);
        for i in 0..m {
            tmp[i] = g[i] + 0.5 * h * k2[i];
        }
        mat_vec(&a, &tmp, &mut k3);
        for i in 0..m {
            tmp[i] = g[i] + h * k3[i];
        }
        mat_vec(&a, &tmp, &mut k4);
        for i in 0..m {
            g[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
        }
    }
    g
}

fn mat_mul(a: &[f64], b: &[f64], m: usize) -> Vec<f64> {
    let mut c = vec![0.0; m * m];
    for i in 0..m {
        for k in 0..m {
            let aik = a[i * m + k];
            for j in 0..m {
                c[i * m + j] += aik * b[k * m + j];
            }
        }
    }
    c
}

/// Matrix exponential of a row-major `m x m` matrix by scaling and squaring
/// with a Taylor kernel.
pub fn expm(a: &[f64], m: usize) -> Vec<f64> {
    assert_eq!(a.len(), m * m);
    let norm = (0..m).map(|j| (0..m).map(|i| a[i * m + j].abs()).sum::<f64>()).fold(0.0, f64::max);
    // scale until the 1-norm is at most 1/2
    let squarings = if norm > 0.5 { (norm / 0.5).log2().ceil() as u32 } else { 0 };
    let s = 0.5f64.powi(squarings as i32);
    let scaled: Vec<f64> = a.iter().map(|x| x * s).collect();

    let mut result = vec![0.0; m * m];
    let mut term = vec![0.0; m * m];
    for i in 0..m {
        result[i * m + i] = 1.0;
        term[i * m + i] = 1.0;
    }
    // 0.5^k / k! < 1e-17 by k = 16
    for k in 1..=20 {
        term = mat_mul(&term, &scaled, m);
        term.iter_mut().for_each(|t| *t /= k as f64);
        let mut small = true;
        for (r, t) in result.iter_mut().zip(&term) {
            *r += t;
            small &= t.abs() <= f64::EPSILON * r.abs();
        }
        if small {
            break;
        }
    }
    for _ in 0..squarings {
        result = mat_mul(&result, &result, m);
    }
    result
}

/// `exp(tau (Q - diag delta)) 1`.
pub fn matexp_g(model: &MarketModel, tau: f64) -> Vec<f64> {
    assert!(tau >= 0.0);
    let m = model.m();
    let a: Vec<f64> = model.discounted_generator().iter().map(|x| x * tau).collect();
    let e = expm(&a, m);
    (0..m).map(|i| e[i * m..(i + 1) * m].iter().sum()).collect()
}

/// Random stream of path `index` under `seed`; paths are independent of
/// each other and of the worker that runs them.
pub fn path_rng(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

/// One trajectory of the regime chain on `[0, horizon]`.
#[derive(Debug, Clone, PartialEq)]
pub struct ChainPath {
    pub jump_times: Vec<f64>,
    /// Visited regimes; one longer than `jump_times`.
    pub states: Vec<usize>,
    pub horizon: f64,
}

impl ChainPath {
    /// `(state, start, end)` of every holding interval, the last one cut at
    /// the horizon.
    pub fn segments(&self) -> impl Iterator<Item = (usize, f64, f64)> + '_ {
        self.states.iter().enumerate().map(move |(k, &s)| {
            let start = if k == 0 { 0.0 } else { self.jump_times[k - 1] };
            let end = self.jump_times.get(k).copied().unwrap_or(self.horizon);
            (s, start, end)
        })
    }

    /// `int_0^horizon f(Y_u) du` for a per-regime function `f`.
    pub fn integrate(&self, f: &[f64]) -> f64 {
        self.segments().map(|(s, a, b)| f[s] * (b - a)).sum()
    }

    pub fn jumps(&self) -> usize {
        self.jump_times.len()
    }
}

/// Event-driven simulation: hold an `Exp(q_i)` time, then move to `j` with
/// probability `q_ij / q_i`. States with `q_i = 0` are absorbing.
pub fn simulate_chain<R: Rng + ?Sized>(model: &MarketModel, start: usize, horizon: f64, rng: &mut R) -> ChainPath {
    assert!(start < model.m() && horizon >= 0.0);
    let q = &model.generator;
    let mut path = ChainPath { jump_times: Vec::new(), states: vec![start], horizon };
    let mut t = 0.0;
    let mut state = start;
    loop {
        let exit = q.exit_rate(state);
        if exit <= 0.0 {
            break;
        }
        t += Exp::new(exit).unwrap().sample(rng);
        if t >= horizon {
            break;
        }
        let target = rng.random::<f64>() * exit;
        let mut acc = 0.0;
        let mut next = state;
        for (j, &rate) in q.row(state).iter().enumerate() {
            if j == state || rate <= 0.0 {
                continue;
            }
            acc += rate;
            next = j;
            if target < acc {
                break;
            }
        }
        state = next;
        path.jump_times.push(t);
        path.states.push(state);
    }
    path
}

/// Monte Carlo estimate of `E[exp(-int_0^tau delta(Y_u) du) | Y_0 = start]`.
/// The integral is exact along each path.
pub fn mc_g(model: &MarketModel, start: usize, tau: f64, n_paths: usize, seed: u64) -> PathEstimate {
    assert!(n_paths >= 1);
    let delta = model.scalars().delta;
    let samples: Vec<f64> = (0..n_paths as u64)
        .into_par_iter()
        .map(|k| {
            let mut rng = path_rng(seed, k);
            let path = simulate_chain(model, start, tau, &mut rng);
            (-path.integrate(&delta)).exp()
        })
        .collect();
    PathEstimate::from_samples(&samples, seed)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::GeneratorMatrix;

    fn single(gamma: f64) -> MarketModel {
        MarketModel::new(GeneratorMatrix::single(), vec![0.05], vec![0.5], vec![0.3], gamma).unwrap()
    }

    fn two_state() -> MarketModel {
        MarketModel::new(
            GeneratorMatrix::two_state(20.0, 30.0),
            vec![0.05, 0.05],
            vec![0.5, 0.1],
            vec![0.3, 0.5],
            0.1,
        )
        .unwrap()
    }

    #[test]
    fn zero_horizon_gives_ones() {
        let m = two_state();
        assert_eq!(ode_g(&m, 0.0, 10), vec![1.0, 1.0]);
        assert_eq!(matexp_g(&m, 0.0), vec![1.0, 1.0]);
        let e = mc_g(&m, 0, 0.0, 100, 1);
        assert_eq!((e.mean, e.std_error), (1.0, 0.0));
    }

    #[test]
    fn scalar_ode_is_exponential() {
        let m = single(0.1);
        assert!((m.delta(0) + 0.13).abs() < 1e-15);
        let want = (0.065f64).exp();
        assert!((ode_g(&m, 0.5, 20_000)[0] - want).abs() < 1e-14);
        assert!((matexp_g(&m, 0.5)[0] - want).abs() < 1e-14);
    }

    #[test]
    fn decoupled_regimes() {
        let q = GeneratorMatrix::from_rows(&[vec![0.0, 0.0], vec![0.0, 0.0]]).unwrap();
        let m = MarketModel::new(q, vec![0.05; 2], vec![0.5, 0.1], vec![0.3, 0.5], 0.5).unwrap();
        let g = matexp_g(&m, 0.8);
        for i in 0..2 {
            assert!((g[i] - (-m.delta(i) * 0.8).exp()).abs() < 1e-14 * g[i]);
        }
    }

    #[test]
    fn expm_of_rotation_generator() {
        // exp([[0, -t], [t, 0]]) is a rotation by t
        let t = 7.3f64;
        let e = expm(&[0.0, -t, t, 0.0], 2);
        let want = [t.cos(), -t.sin(), t.sin(), t.cos()];
        for (a, b) in e.iter().zip(want) {
            assert!((a - b).abs() < 1e-13, "{e:?}");
        }
    }

    #[test]
    fn absorbing_state_never_jumps() {
        let m = single(0.1);
        let mut rng = path_rng(3, 0);
        let p = simulate_chain(&m, 0, 5.0, &mut rng);
        assert!(p.jump_times.is_empty());
        assert_eq!(p.states, vec![0]);
    }

    #[test]
    fn paths_alternate_in_two_state_chain() {
        let m = two_state();
        let mut rng = path_rng(11, 4);
        let p = simulate_chain(&m, 0, 2.0, &mut rng);
        assert_eq!(p.states.len(), p.jump_times.len() + 1);
        for (k, s) in p.states.iter().enumerate() {
            assert_eq!(*s, k % 2);
        }
        assert!(p.jump_times.windows(2).all(|w| w[0] < w[1]));
        assert!(p.jump_times.iter().all(|&t| t < 2.0));
        let total: f64 = p.segments().map(|(_, a, b)| b - a).sum();
        assert!((total - 2.0).abs() < 1e-12);
    }

    #[test]
    fn single_regime_mc_is_deterministic_functional() {
        let m = single(0.1);
        let e = mc_g(&m, 0, 0.5, 1000, 9);
        assert_eq!(e.std_error, 0.0);
        assert!((e.mean - (0.065f64).exp()).abs() < 1e-15);
    }

    #[test]
    fn mc_is_reproducible() {
        let m = two_state();
        assert_eq!(mc_g(&m, 1, 0.5, 5000, 42), mc_g(&m, 1, 0.5, 5000, 42));
        assert_ne!(mc_g(&m, 1, 0.5, 5000, 42).mean, mc_g(&m, 1, 0.5, 5000, 43).mean);
    }
}
