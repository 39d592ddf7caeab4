//! Value function, optimal strategy and optimal wealth simulation.

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;

use crate::expsum::ExponentialSum;
use crate::laplace::{self, LaplaceError, LaplaceSolution};
use crate::model::MarketModel;
use crate::oracles::{path_rng, simulate_chain, ChainPath};
use crate::stats::PathEstimate;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum PortfolioError {
    #[error("U(0) is -infinity for gamma = {gamma} < 0")]
    ZeroWealthNegativeGamma { gamma: f64 },
    #[error("{what} = {value} is outside [{lo}, {hi}]")]
    Domain { what: &'static str, value: f64, lo: f64, hi: f64 },
}

/// Power utility `x^gamma / gamma`.
pub fn utility(gamma: f64, x: f64) -> f64 {
    x.powf(gamma) / gamma
}

/// `V(x, t, i) = U(x) g(i, T - t)` on a fixed horizon.
#[derive(Debug, Clone, PartialEq)]
pub struct ValueSolution {
    pub model: MarketModel,
    pub horizon: f64,
    pub laplace: LaplaceSolution,
}

impl ValueSolution {
    pub fn new(model: MarketModel, horizon: f64) -> Result<Self, LaplaceError> {
        let laplace = laplace::solve_g(&model)?;
        Ok(Self { model, horizon, laplace })
    }

    pub fn g(&self, regime: usize, tau: f64) -> f64 {
        self.laplace.eval(regime, tau)
    }

    pub fn g_sum(&self, regime: usize) -> &ExponentialSum {
        &self.laplace.g[regime]
    }

    pub fn value(&self, x: f64, t: f64, regime: usize) -> Result<f64, PortfolioError> {
        if !(0.0..=self.horizon).contains(&t) {
            return Err(PortfolioError::Domain { what: "t", value: t, lo: 0.0, hi: self.horizon });
        }
        if !(x >= 0.0) {
            return Err(PortfolioError::Domain { what: "x", value: x, lo: 0.0, hi: f64::INFINITY });
        }
        let gamma = self.model.gamma;
        if x == 0.0 && gamma < 0.0 {
            return Err(PortfolioError::ZeroWealthNegativeGamma { gamma });
        }
        Ok(utility(gamma, x) * self.g(regime, self.horizon - t))
    }

    /// Copy with `g(regime, .)` multiplied by `factor`; used as a broken
    /// solution in residual checks.
    pub fn with_scaled_regime(&self, regime: usize, factor: f64) -> Self {
        let mut out = self.clone();
        out.laplace.g[regime] = self.laplace.g[regime].scaled(factor);
        out
    }
}

/// Optimal fraction of wealth held in the stock in regime `i`:
/// `(mu - r) / ((1 - gamma) sigma^2)`, the same at every wealth and time.
pub fn optimal_fraction(model: &MarketModel, i: usize) -> f64 {
    (model.mu[i] - model.r[i]) / (model.risk_aversion() * model.sigma[i] * model.sigma[i])
}

/// Exponential factor of the constant-coefficient value function,
/// `exp([gamma/(1-gamma) (mu-r)^2/(2 sigma^2) + gamma r] tau)`.
pub fn merton_factor(mu: f64, sigma: f64, r: f64, gamma: f64, tau: f64) -> f64 {
    let excess = (mu - r) / sigma;
    ((gamma / (1.0 - gamma) * excess * excess / 2.0 + gamma * r) * tau).exp()
}

/// A simulated optimal wealth trajectory.
#[derive(Debug, Clone, PartialEq)]
pub struct WealthPath {
    pub times: Vec<f64>,
    pub wealth: Vec<f64>,
    /// Regime in force on `[times[k], times[k + 1])`.
    pub regimes: Vec<usize>,
    pub terminal_utility: f64,
    pub chain: ChainPath,
}

/// Drift and volatility of the optimally controlled wealth in each regime:
/// `Phi^2 / (1 - gamma) + r` and `Phi / (1 - gamma)`.
fn wealth_coefficients(model: &MarketModel) -> (Vec<f64>, Vec<f64>) {
    let a = model.risk_aversion();
    let s = model.scalars();
    let drift = s.sharpe.iter().zip(&model.r).map(|(phi, r)| phi * phi / a + r).collect();
    let vol = s.sharpe.iter().map(|phi| phi / a).collect();
    (drift, vol)
}

/// Optimal wealth from `x0` in regime `start` over `[0, horizon]`.
///
/// The chain is drawn first; wealth is then advanced with exact log-normal
/// increments on the union of a uniform grid of `n_steps` intervals and the
/// chain's jump times.
pub fn simulate_optimal_wealth<R: Rng + ?Sized>(
    model: &MarketModel,
    x0: f64,
    start: usize,
    horizon: f64,
    n_steps: usize,
    rng: &mut R,
) -> WealthPath {
    assert!(x0 >= 0.0 && n_steps >= 1);
    let chain = simulate_chain(model, start, horizon, rng);
    let (drift, vol) = wealth_coefficients(model);
    let mut times = Vec::with_capacity(n_steps + chain.jumps() + 1);
    let mut regimes = Vec::with_capacity(n_steps + chain.jumps());
    times.push(0.0);
    for (state, a, b) in chain.segments() {
        let first = (a / horizon * n_steps as f64).floor() as usize + 1;
        for k in first..n_steps {
            let t = horizon * k as f64 / n_steps as f64;
            if t >= b {
                break;
            }
            if t > a {
                times.push(t);
                regimes.push(state);
            }
        }
        times.push(b);
        regimes.push(state);
    }
    let mut wealth = Vec::with_capacity(times.len());
    let mut log_x = x0.ln();
    wealth.push(x0);
    for (k, &state) in regimes.iter().enumerate() {
        let dt = times[k + 1] - times[k];
        let z: f64 = StandardNormal.sample(rng);
        let v = vol[state];
        log_x += (drift[state] - 0.5 * v * v) * dt + v * dt.sqrt() * z;
        wealth.push(if x0 == 0.0 { 0.0 } else { log_x.exp() });
    }
    let terminal_utility = utility(model.gamma, *wealth.last().unwrap());
    WealthPath { times, wealth, regimes, terminal_utility, chain }
}

/// Monte Carlo estimate of `E[U(X*_T)]` under the optimal strategy.
pub fn expected_utility_mc(
    model: &MarketModel,
    x0: f64,
    start: usize,
    horizon: f64,
    n_paths: usize,
    seed: u64,
) -> PathEstimate {
    assert!(x0 > 0.0 && n_paths >= 1);
    let samples: Vec<f64> = (0..n_paths as u64)
        .into_par_iter()
        .map(|k| simulate_optimal_wealth(model, x0, start, horizon, 1, &mut path_rng(seed, k)).terminal_utility)
        .collect();
    PathEstimate::from_samples(&samples, seed)
}

/// Expected utility and the discount functional estimated on the same
/// chain paths.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClosureEstimate {
    pub utility: PathEstimate,
    /// `U(x0) exp(-int delta(Y_u) du)` along the same paths.
    pub feynman_kac: PathEstimate,
    /// Per-path difference of the two.
    pub difference: PathEstimate,
}

pub fn closure_estimate(
    model: &MarketModel,
    x0: f64,
    start: usize,
    horizon: f64,
    n_paths: usize,
    seed: u64,
) -> ClosureEstimate {
    assert!(x0 > 0.0 && n_paths >= 1);
    let delta = model.scalars().delta;
    let u0 = utility(model.gamma, x0);
    let pairs: Vec<(f64, f64)> = (0..n_paths as u64)
        .into_par_iter()
        .map(|k| {
            let w = simulate_optimal_wealth(model, x0, start, horizon, 1, &mut path_rng(seed, k));
            (w.terminal_utility, u0 * (-w.chain.integrate(&delta)).exp())
        })
        .collect();
    let (u, fk): (Vec<f64>, Vec<f64>) = pairs.into_iter().unzip();
    let diff: Vec<f64> = u.iter().zip(&fk).map(|(a, b)| a - b).collect();
    ClosureEstimate {
        utility: PathEstimate::from_samples(&u, seed),
        feynman_kac: PathEstimate::from_samples(&fk, seed),
        difference: PathEstimate::from_samples(&diff, seed),
    }
}

/// Monte Carlo estimate of `E[int_0^T theta*_s^2 ds]` with a left-point
/// sum on the simulation grid.
pub fn strategy_second_moment(
    model: &MarketModel,
    x0: f64,
    start: usize,
    horizon: f64,
    n_steps: usize,
    n_paths: usize,
    seed: u64,
) -> PathEstimate {
    let fractions: Vec<f64> = (0..model.m()).map(|i| optimal_fraction(model, i)).collect();
    let samples: Vec<f64> = (0..n_paths as u64)
        .into_par_iter()
        .map(|k| {
            let w = simulate_optimal_wealth(model, x0, start, horizon, n_steps, &mut path_rng(seed, k));
            w.regimes
                .iter()
                .enumerate()
                .map(|(j, &s)| {
                    let theta = fractions[s] * w.wealth[j];
                    theta * theta * (w.times[j + 1] - w.times[j])
                })
                .sum()
        })
        .collect();
    PathEstimate::from_samples(&samples, seed)
}

/// Upper bound `x0^2 max(pi_i)^2 (e^(rho T) - 1) / rho` on
/// `E[int_0^T theta*^2 ds]`, where `pi_i` is the optimal fraction and
/// `rho = max_i (2 r_i + Phi_i^2 (2 / a + 1 / a^2))` bounds the growth rate
/// of `E[X*^2]`. Equality holds for a single regime.
pub fn strategy_second_moment_bound(model: &MarketModel, x0: f64, horizon: f64) -> f64 {
    let a = model.risk_aversion();
    let pi_max = (0..model.m()).map(|i| optimal_fraction(model, i).abs()).fold(0.0, f64::max);
    let rho = (0..model.m())
        .map(|i| {
            let phi = model.sharpe(i);
            2.0 * model.r[i] + phi * phi * (2.0 / a + 1.0 / (a * a))
        })
        .fold(f64::NEG_INFINITY, f64::max);
    let growth = if rho.abs() < 1e-12 { horizon } else { (rho * horizon).exp_m1() / rho };
    x0 * x0 * pi_max * pi_max * growth
}

/// Interior evaluation points for the HJB residual.
#[derive(Debug, Clone, PartialEq)]
pub struct HjbGrid {
    pub x: Vec<f64>,
    pub t: Vec<f64>,
}

impl HjbGrid {
    /// `nx x nt` uniform grid on `[x_lo, x_hi] x [t_lo, t_hi]`.
    pub fn uniform(x_lo: f64, x_hi: f64, nx: usize, t_lo: f64, t_hi: f64, nt: usize) -> Self {
        let lin = |lo: f64, hi: f64, n: usize| {
            (0..n).map(|k| if n == 1 { lo } else { lo + (hi - lo) * k as f64 / (n - 1) as f64 }).collect()
        };
        Self { x: lin(x_lo, x_hi, nx), t: lin(t_lo, t_hi, nt) }
    }
}

struct Derivatives {
    v: f64,
    v_t: f64,
    v_x: f64,
    v_xx: f64,
}

fn hjb_operator(sol: &ValueSolution, x: f64, i: usize, d: &Derivatives, v_other: &dyn Fn(usize) -> f64) -> f64 {
    let m = &sol.model;
    let coupling: f64 = (0..m.m()).filter(|&j| j != i).map(|j| m.generator.rate(i, j) * (v_other(j) - d.v)).sum();
    let excess = m.mu[i] - m.r[i];
    let sig2 = m.sigma[i] * m.sigma[i];
    d.v_t + m.r[i] * x * d.v_x + coupling - excess * excess * d.v_x * d.v_x / (2.0 * sig2 * d.v_xx)
}

/// Largest HJB residual over the grid and all regimes, relative to `|V|`,
/// with exact derivatives of the exponential sums.
pub fn hjb_residual(sol: &ValueSolution, grid: &HjbGrid) -> f64 {
    let gamma = sol.model.gamma;
    let dg: Vec<ExponentialSum> = sol.laplace.g.iter().map(|g| g.derivative()).collect();
    let mut worst: f64 = 0.0;
    for &t in &grid.t {
        let tau = sol.horizon - t;
        let g: Vec<f64> = (0..sol.model.m()).map(|i| sol.g(i, tau)).collect();
        for &x in &grid.x {
            let u = utility(gamma, x);
            for i in 0..sol.model.m() {
                let d = Derivatives {
                    v: u * g[i],
                    v_t: -u * dg[i].eval(tau),
                    v_x: x.powf(gamma - 1.0) * g[i],
                    v_xx: (gamma - 1.0) * x.powf(gamma - 2.0) * g[i],
                };
                let res = hjb_operator(sol, x, i, &d, &|j| u * g[j]);
                worst = worst.max(res.abs() / d.v.abs());
            }
        }
    }
    worst
}

/// Same residual with central finite differences of `V` in `x` and `t`.
pub fn hjb_residual_fd(sol: &ValueSolution, grid: &HjbGrid, step: f64) -> f64 {
    let v = |x: f64, t: f64, i: usize| utility(sol.model.gamma, x) * sol.g(i, sol.horizon - t);
    let mut worst: f64 = 0.0;
    for &t in &grid.t {
        for &x in &grid.x {
            for i in 0..sol.model.m() {
                let hx = step * x;
                let d = Derivatives {
                    v: v(x, t, i),
                    v_t: (v(x, t + step, i) - v(x, t - step, i)) / (2.0 * step),
                    v_x: (v(x + hx, t, i) - v(x - hx, t, i)) / (2.0 * hx),
                    v_xx: (v(x + hx, t, i) - 2.0 * v(x, t, i) + v(x - hx, t, i)) / (hx * hx),
                };
                let res = hjb_operator(sol, x, i, &d, &|j| v(x, t, j));
                worst = worst.max(res.abs() / d.v.abs());
            }
        }
    }
    worst
}
