//! Closed-form functions of the form `sum_k c_k tau^(n_k) exp(u_k tau)`.

use num_complex::Complex64;

/// One mode `coefficient * tau^power * exp(rate * tau)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExpTerm {
    pub coefficient: Complex64,
    pub power: u32,
    pub rate: Complex64,
}

/// A real-valued exponential sum. Complex modes are stored together with
/// their conjugate partners, so the imaginary parts cancel.
#[derive(Debug, Clone, PartialEq)]
pub struct ExponentialSum {
    pub regime: usize,
    pub terms: Vec<ExpTerm>,
}

impl ExponentialSum {
    pub fn new(regime: usize, terms: Vec<ExpTerm>) -> Self {
        Self { regime, terms }
    }

    pub fn eval_complex(&self, tau: f64) -> Complex64 {
        self.terms
            .iter()
            .map(|t| {
                let poly = if t.power == 0 { 1.0 } else { tau.powi(t.power as i32) };
                t.coefficient * poly * (t.rate * tau).exp()
            })
            .sum()
    }

    /// Real part of the sum at `tau`.
    pub fn eval(&self, tau: f64) -> f64 {
        self.eval_complex(tau).re
    }

    /// Term-by-term derivative in `tau`.
    pub fn derivative(&self) -> Self {
        let mut terms = Vec::with_capacity(2 * self.terms.len());
        for t in &self.terms {
            terms.push(ExpTerm { coefficient: t.coefficient * t.rate, ..*t });
            if t.power > 0 {
                terms.push(ExpTerm { coefficient: t.coefficient * t.power as f64, power: t.power - 1, rate: t.rate });
            }
        }
        Self { regime: self.regime, terms }
    }

    pub fn scaled(&self, factor: f64) -> Self {
        Self {
            regime: self.regime,
            terms: self.terms.iter().map(|t| ExpTerm { coefficient: t.coefficient * factor, ..*t }).collect(),
        }
    }
}
