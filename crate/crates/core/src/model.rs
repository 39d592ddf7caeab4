//! Problem instance: a Markov-modulated bond/stock market and a CRRA investor.
//!
//! Regimes are indexed from 0 internally. The command line and configuration
//! files use 1-based labels.

use std::fmt;

use thiserror::Error;

/// Absolute tolerance on generator row sums.
pub const ROW_SUM_TOLERANCE: f64 = 1e-12;

/// One violated standing assumption of the market model.
#[derive(Debug, Clone, PartialEq)]
pub enum Violation {
    /// Row `row` of the generator sums to `sum` instead of zero.
    NonConservativeGenerator { row: usize, sum: f64 },
    /// A rate that must be non-negative (off-diagonal generator entry) or
    /// strictly positive (r, mu, sigma) is not.
    NegativeRate { name: String, value: f64 },
    /// Risk aversion outside `gamma < 1, gamma != 0`.
    InvalidGamma(f64),
    /// Vector or matrix lengths disagree with the regime count.
    DimensionMismatch { name: String, expected: usize, found: usize },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::NonConservativeGenerator { row, sum } => {
                write!(f, "generator row {} sums to {sum:e}, expected 0", row + 1)
            }
            Violation::NegativeRate { name, value } => write!(f, "{name} = {value} is out of range"),
            Violation::InvalidGamma(g) => write!(f, "gamma = {g} must satisfy gamma < 1 and gamma != 0"),
            Violation::DimensionMismatch { name, expected, found } => {
                write!(f, "{name} has length {found}, expected {expected}")
            }
        }
    }
}

/// Every violated invariant found while validating a model.
#[derive(Debug, Clone, PartialEq, Error)]
pub struct ModelError {
    pub violations: Vec<Violation>,
}

impl fmt::Display for ModelError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "invalid model:")?;
        for v in &self.violations {
            write!(f, "\n  - {v}")?;
        }
        Ok(())
    }
}

impl ModelError {
    pub fn contains(&self, pred: impl Fn(&Violation) -> bool) -> bool {
        self.violations.iter().any(pred)
    }
}

/// Transition-rate matrix of the regime chain, stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct GeneratorMatrix {
    m: usize,
    q: Vec<f64>,
}

impl GeneratorMatrix {
    /// Builds a generator from row-major entries. Only the shape is checked
    /// here; the rate constraints are checked by [`MarketModel::validate`].
    pub fn from_row_major(m: usize, q: Vec<f64>) -> Result<Self, ModelError> {
        if m == 0 || q.len() != m * m {
            return Err(ModelError {
                violations: vec![Violation::DimensionMismatch {
                    name: "generator".into(),
                    expected: m.max(1) * m.max(1),
                    found: q.len(),
                }],
            });
        }
        Ok(Self { m, q })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self, ModelError> {
        let m = rows.len();
        let mut q = Vec::with_capacity(m * m);
        for row in rows {
            if row.len() != m {
                return Err(ModelError {
                    violations: vec![Violation::DimensionMismatch {
                        name: "generator row".into(),
                        expected: m,
                        found: row.len(),
                    }],
                });
            }
            q.extend_from_slice(row);
        }
        Self::from_row_major(m, q)
    }

    /// Two-state generator with exit rates `q1` and `q2`.
    pub fn two_state(q1: f64, q2: f64) -> Self {
        Self { m: 2, q: vec![-q1, q1, q2, -q2] }
    }

    /// The 1x1 zero generator of a market without switching.
    pub fn single() -> Self {
        Self { m: 1, q: vec![0.0] }
    }

    #[inline]
    pub fn m(&self) -> usize {
        self.m
    }

    #[inline]
    pub fn rate(&self, i: usize, j: usize) -> f64 {
        self.q[i * self.m + j]
    }

    /// Total exit rate `q_i = -q_ii`.
    #[inline]
    pub fn exit_rate(&self, i: usize) -> f64 {
        -self.rate(i, i)
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.q[i * self.m..(i + 1) * self.m]
    }

    pub fn as_row_major(&self) -> &[f64] {
        &self.q
    }

    fn violations(&self, out: &mut Vec<Violation>) {
        for i in 0..self.m {
            let row = self.row(i);
            for (j, &v) in row.iter().enumerate() {
                if !v.is_finite() || (i != j && v < 0.0) {
                    out.push(Violation::NegativeRate { name: format!("q[{}][{}]", i + 1, j + 1), value: v });
                }
            }
            let sum: f64 = row.iter().sum();
            if !(sum.abs() <= ROW_SUM_TOLERANCE) {
                out.push(Violation::NonConservativeGenerator { row: i, sum });
            }
        }
    }
}

/// Per-regime market coefficients, generator and risk aversion.
#[derive(Debug, Clone, PartialEq)]
pub struct MarketModel {
    pub generator: GeneratorMatrix,
    pub r: Vec<f64>,
    pub mu: Vec<f64>,
    pub sigma: Vec<f64>,
    pub gamma: f64,
}

impl MarketModel {
    /// Builds and validates a model.
    pub fn new(
        generator: GeneratorMatrix,
        r: Vec<f64>,
        mu: Vec<f64>,
        sigma: Vec<f64>,
        gamma: f64,
    ) -> Result<Self, ModelError> {
        Self { generator, r, mu, sigma, gamma }.validate()
    }

    /// Returns the model unchanged if every standing assumption holds,
    /// otherwise an error listing all violations.
    pub fn validate(self) -> Result<Self, ModelError> {
        let violations = self.violations();
        if violations.is_empty() {
            Ok(self)
        } else {
            Err(ModelError { violations })
        }
    }

    pub fn violations(&self) -> Vec<Violation> {
        let mut out = Vec::new();
        let m = self.generator.m();
        for (name, v) in [("r", &self.r), ("mu", &self.mu), ("sigma", &self.sigma)] {
            if v.len() != m {
                out.push(Violation::DimensionMismatch { name: name.into(), expected: m, found: v.len() });
                continue;
            }
            for (i, &x) in v.iter().enumerate() {
                if !(x > 0.0) || !x.is_finite() {
                    out.push(Violation::NegativeRate { name: format!("{name}[{}]", i + 1), value: x });
                }
            }
        }
        self.generator.violations(&mut out);
        if !(self.gamma < 1.0) || self.gamma == 0.0 || !self.gamma.is_finite() {
            out.push(Violation::InvalidGamma(self.gamma));
        }
        out
    }

    #[inline]
    pub fn m(&self) -> usize {
        self.generator.m()
    }

    /// Same market with a different risk aversion.
    pub fn with_gamma(&self, gamma: f64) -> Result<Self, ModelError> {
        Self { gamma, ..self.clone() }.validate()
    }

    /// Relative risk aversion `1 - gamma`.
    #[inline]
    pub fn risk_aversion(&self) -> f64 {
        1.0 - self.gamma
    }

    pub fn sharpe(&self, i: usize) -> f64 {
        (self.mu[i] - self.r[i]) / self.sigma[i]
    }

    pub fn delta(&self, i: usize) -> f64 {
        let phi = self.sharpe(i);
        -self.gamma * (phi * phi / (2.0 * self.risk_aversion()) + self.r[i])
    }

    pub fn scalars(&self) -> RegimeScalars {
        RegimeScalars {
            delta: (0..self.m()).map(|i| self.delta(i)).collect(),
            sharpe: (0..self.m()).map(|i| self.sharpe(i)).collect(),
        }
    }

    /// Dense row-major `Q - diag(delta)`, the generator of the discounted
    /// regime semigroup: `g(., tau) = exp(tau (Q - diag delta)) 1`.
    pub fn discounted_generator(&self) -> Vec<f64> {
        let m = self.m();
        let mut a = self.generator.as_row_major().to_vec();
        for i in 0..m {
            a[i * m + i] -= self.delta(i);
        }
        a
    }
}

/// Derived per-regime quantities.
#[derive(Debug, Clone, PartialEq)]
pub struct RegimeScalars {
    /// Exponential discount coefficient of each regime.
    pub delta: Vec<f64>,
    /// Sharpe ratio `(mu - r) / sigma` of each regime.
    pub sharpe: Vec<f64>,
}

pub fn regime_scalars(model: &MarketModel) -> RegimeScalars {
    model.scalars()
}
