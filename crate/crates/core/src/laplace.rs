//! Exact computation of `g(i, tau)` through the Laplace transform.
//!
//! Conditioning on the first jump of the regime chain gives a renewal
//! equation for each `g(i, .)`. Its transform is a linear system whose
//! matrix has `u + delta(i) + q_i` on the diagonal and `-q_ij` elsewhere.
//! Cramer's rule yields strictly proper rational transforms with a shared
//! denominator; partial fractions and the pair
//! `L{t^n e^(-bt)} = n! / (u + b)^(n+1)` invert them to exponential sums.

use num_complex::Complex64;

use crate::expsum::{ExpTerm, ExponentialSum};
use crate::model::{MarketModel, RegimeScalars};
use crate::poly::{Polynomial, RationalFunction};
use crate::roots::{self, RootError};

/// Largest system solved by fraction-free elimination; larger systems use
/// evaluation and interpolation of the determinants.
pub const BAREISS_MAX_DIM: usize = 6;
/// Relative tolerance of the partial-fraction reconstruction check.
pub const RECONSTRUCTION_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum LaplaceError {
    #[error("the transform system has a zero determinant")]
    DegenerateSystem,
    #[error(transparent)]
    RootFindingFailure(#[from] RootError),
    #[error("pole multiplicities sum to {found}, denominator degree is {expected}")]
    InconsistentPoles { expected: usize, found: usize },
    #[error("partial fractions reproduce the transform only to {residual:e} relative")]
    ReconstructionMismatch { residual: f64 },
}

/// The transformed renewal system `A(u) L(u) = 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct TransformSystem {
    m: usize,
    /// Row-major entries of `A(u)`, each of degree at most one.
    entries: Vec<Polynomial>,
}

impl TransformSystem {
    pub fn dim(&self) -> usize {
        self.m
    }

    pub fn entry(&self, i: usize, j: usize) -> &Polynomial {
        &self.entries[i * self.m + j]
    }

    /// Right-hand side, all ones.
    pub fn rhs(&self) -> Vec<f64> {
        vec![1.0; self.m]
    }

    /// `A` with column `col` replaced by the right-hand side.
    fn with_rhs_column(&self, col: usize) -> Vec<Polynomial> {
        let mut e = self.entries.clone();
        for i in 0..self.m {
            e[i * self.m + col] = Polynomial::constant(1.0);
        }
        e
    }
}

pub fn build_system(model: &MarketModel, scalars: &RegimeScalars) -> TransformSystem {
    let m = model.m();
    let q = &model.generator;
    let mut entries = Vec::with_capacity(m * m);
    for i in 0..m {
        for j in 0..m {
            entries.push(if i == j {
                Polynomial::linear(scalars.delta[i] + q.exit_rate(i), 1.0)
            } else {
                Polynomial::constant(-q.rate(i, j))
            });
        }
    }
    TransformSystem { m, entries }
}

/// Determinant of an `m x m` polynomial matrix by Bareiss elimination.
///
/// `bounds` holds an upper bound on the degree of each entry; intermediate
/// minors are truncated to their bound so that cancellation noise in the
/// leading coefficients cannot inflate degrees.
fn bareiss_det(mut a: Vec<Polynomial>, mut bounds: Vec<usize>, m: usize) -> Polynomial {
    let mut sign = 1.0;
    let mut prev = Polynomial::constant(1.0);
    let mut prev_deg = 0usize;
    for k in 0..m - 1 {
        // pivot: highest degree, then largest leading coefficient
        let pivot = (k..m)
            .filter(|&r| !a[r * m + k].is_zero())
            .max_by(|&x, &y| {
                let (px, py) = (&a[x * m + k], &a[y * m + k]);
                px.degree().cmp(&py.degree()).then(px.leading().abs().total_cmp(&py.leading().abs()))
            });
        let Some(p) = pivot else {
            return Polynomial::zero();
        };
        if p != k {
            for j in 0..m {
                a.swap(k * m + j, p * m + j);
                bounds.swap(k * m + j, p * m + j);
            }
            sign = -sign;
        }
        for i in k + 1..m {
            for j in k + 1..m {
                let cross = &(&a[k * m + k] * &a[i * m + j]) - &(&a[i * m + k] * &a[k * m + j]);
                let bound = (bounds[k * m + k] + bounds[i * m + j])
                    .max(bounds[i * m + k] + bounds[k * m + j])
                    .saturating_sub(prev_deg);
                let (quot, _) = cross.div_rem(&prev);
                a[i * m + j] = quot.truncate(bound);
                bounds[i * m + j] = bound;
            }
        }
        prev_deg = a[k * m + k].degree().unwrap_or(0);
        prev = a[k * m + k].clone();
    }
    a[m * m - 1].scale(sign)
}

/// Determinant of a polynomial matrix of known degree by evaluation at
/// `degree + 1` points on a circle and discrete Fourier interpolation.
fn interpolated_det(a: &[Polynomial], m: usize, degree: usize, radius: f64) -> Polynomial {
    let n = degree + 1;
    let values: Vec<Complex64> = (0..n)
        .map(|k| {
            let z = Complex64::from_polar(radius, 2.0 * std::f64::consts::PI * k as f64 / n as f64);
            let mat: Vec<Complex64> = a.iter().map(|p| p.eval_complex(z)).collect();
            complex_det(mat, m)
        })
        .collect();
    let coeffs = (0..n)
        .map(|j| {
            let s: Complex64 = values
                .iter()
                .enumerate()
                .map(|(k, v)| v * Complex64::from_polar(1.0, -2.0 * std::f64::consts::PI * (j * k) as f64 / n as f64))
                .sum();
            s.re / (n as f64 * radius.powi(j as i32))
        })
        .collect();
    Polynomial::new(coeffs)
}

fn complex_det(mut a: Vec<Complex64>, m: usize) -> Complex64 {
    let mut det = Complex64::new(1.0, 0.0);
    for k in 0..m {
        let p = (k..m).max_by(|&x, &y| a[x * m + k].norm().total_cmp(&a[y * m + k].norm())).unwrap();
        if a[p * m + k].norm() == 0.0 {
            return Complex64::new(0.0, 0.0);
        }
        if p != k {
            for j in 0..m {
                a.swap(k * m + j, p * m + j);
            }
            det = -det;
        }
        let pivot = a[k * m + k];
        det *= pivot;
        for i in k + 1..m {
            let f = a[i * m + k] / pivot;
            for j in k + 1..m {
                let sub = f * a[k * m + j];
                a[i * m + j] -= sub;
            }
        }
    }
    det
}

fn determinant(entries: Vec<Polynomial>, m: usize, degree: usize) -> Polynomial {
    if m <= BAREISS_MAX_DIM {
        let bounds = entries.iter().map(|p| p.degree().unwrap_or(0)).collect();
        bareiss_det(entries, bounds, m).truncate(degree)
    } else {
        // centre the sample circle on the typical diagonal magnitude
        let radius = entries
            .iter()
            .step_by(m + 1)
            .map(|p| p.coeffs().first().copied().unwrap_or(0.0).abs())
            .fold(1.0, f64::max);
        interpolated_det(&entries, m, degree, radius)
    }
}

/// Cramer's rule over polynomials: `L_i = det(A_i) / det(A)`, normalized
/// so that the shared denominator is monic.
pub fn solve_transform(system: &TransformSystem) -> Result<Vec<RationalFunction>, LaplaceError> {
    let m = system.dim();
    let den = determinant(system.entries.clone(), m, m);
    if den.degree() != Some(m) {
        return Err(LaplaceError::DegenerateSystem);
    }
    let lead = den.leading();
    let den = den.scale(1.0 / lead);
    Ok((0..m)
        .map(|i| {
            let num = determinant(system.with_rhs_column(i), m, m - 1).scale(1.0 / lead);
            RationalFunction::new(num, den.clone())
        })
        .collect())
}

/// A pole of the transforms and the partial-fraction coefficients of
/// `(u - pole)^-1, ..., (u - pole)^-multiplicity`.
#[derive(Debug, Clone, PartialEq)]
pub struct PoleTerm {
    pub pole: Complex64,
    pub multiplicity: usize,
    pub residues: Vec<Complex64>,
}

/// Poles of a denominator, with empty residue lists.
pub fn find_poles(den: &Polynomial) -> Result<Vec<PoleTerm>, LaplaceError> {
    let report = roots::find_roots(den)?;
    Ok(report
        .roots
        .into_iter()
        .map(|r| PoleTerm { pole: r.value, multiplicity: r.multiplicity, residues: Vec::new() })
        .collect())
}

fn pole_residues(rf: &RationalFunction, pole: Complex64, n: usize) -> Vec<Complex64> {
    let m = rf.den.degree().unwrap_or(0);
    let dt = rf.den.taylor_at(pole);
    let mut nt = rf.num.taylor_at(pole);
    nt.resize(m.max(n), Complex64::new(0.0, 0.0));
    // den = (u - pole)^n h(u); h's Taylor coefficients are dt[n..]
    let h = &dt[n..];
    let mut f: Vec<Complex64> = Vec::with_capacity(n);
    for j in 0..n {
        let mut acc = nt[j];
        for l in 1..=j.min(h.len() - 1) {
            acc -= h[l] * f[j - l];
        }
        f.push(acc / h[0]);
    }
    // f_j multiplies (u - pole)^(j - n)
    (1..=n).map(|k| f[n - k]).collect()
}

/// Evaluates the partial-fraction expansion at `z`.
pub fn eval_partial_fractions(terms: &[PoleTerm], z: Complex64) -> Complex64 {
    terms
        .iter()
        .map(|t| {
            let w = (z - t.pole).inv();
            let mut pw = w;
            let mut s = Complex64::new(0.0, 0.0);
            for r in &t.residues {
                s += r * pw;
                pw *= w;
            }
            s
        })
        .sum()
}

/// Largest relative mismatch between `rf` and its expansion at five points
/// on a circle enclosing all poles.
pub fn reconstruction_residual(rf: &RationalFunction, terms: &[PoleTerm]) -> f64 {
    let reach = terms.iter().map(|t| t.pole.norm()).fold(0.0, f64::max);
    let radius = 2.0 * (1.0 + reach);
    (0..5)
        .map(|s| {
            let z = Complex64::from_polar(radius, 0.3 + 2.0 * std::f64::consts::PI * s as f64 / 5.0);
            let want = rf.eval_complex(z);
            (eval_partial_fractions(terms, z) - want).norm() / want.norm().max(f64::MIN_POSITIVE)
        })
        .fold(0.0, f64::max)
}

/// Partial-fraction decomposition of a strictly proper transform over the
/// given poles. Conjugate poles receive exactly conjugate residues and real
/// poles real residues.
pub fn partial_fractions(rf: &RationalFunction, poles: &[PoleTerm]) -> Result<Vec<PoleTerm>, LaplaceError> {
    let expected = rf.den.degree().unwrap_or(0);
    let found: usize = poles.iter().map(|p| p.multiplicity).sum();
    if found != expected {
        return Err(LaplaceError::InconsistentPoles { expected, found });
    }
    let rf = rf.normalized();
    let mut out: Vec<PoleTerm> = Vec::with_capacity(poles.len());
    for p in poles {
        let residues = if p.pole.im < 0.0 {
            // partner with positive imaginary part
            match out.iter().find(|o| o.pole == p.pole.conj() && o.multiplicity == p.multiplicity) {
                Some(o) => o.residues.iter().map(|r| r.conj()).collect(),
                None => pole_residues(&rf, p.pole, p.multiplicity),
            }
        } else if p.pole.im == 0.0 {
            pole_residues(&rf, p.pole, p.multiplicity).into_iter().map(|r| Complex64::new(r.re, 0.0)).collect()
        } else {
            pole_residues(&rf, p.pole, p.multiplicity)
        };
        out.push(PoleTerm { residues, ..p.clone() });
    }
    let residual = reconstruction_residual(&rf, &out);
    if !(residual <= RECONSTRUCTION_TOLERANCE) {
        return Err(LaplaceError::ReconstructionMismatch { residual });
    }
    Ok(out)
}

/// Inverts a partial-fraction expansion term by term: the coefficient `c` of
/// `(u - p)^-(n+1)` becomes `c tau^n e^(p tau) / n!`.
pub fn invert_transform(regime: usize, terms: &[PoleTerm]) -> ExponentialSum {
    let mut out = Vec::new();
    for t in terms {
        let mut factorial = 1.0;
        for (n, c) in t.residues.iter().enumerate() {
            if n > 0 {
                factorial *= n as f64;
            }
            if *c != Complex64::new(0.0, 0.0) {
                out.push(ExpTerm { coefficient: c / factorial, power: n as u32, rate: t.pole });
            }
        }
    }
    ExponentialSum::new(regime, out)
}

/// Explicit two-regime solution: `L_i = (u + alpha_i) / (u^2 + beta_1 u + beta_0)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TwoStateClosedForm {
    pub alpha: [f64; 2],
    pub beta0: f64,
    pub beta1: f64,
    pub discriminant: f64,
    /// `u_1 > u_2`, the roots of the denominator.
    pub roots: [f64; 2],
}

impl TwoStateClosedForm {
    /// `None` unless the model has exactly two regimes.
    pub fn new(model: &MarketModel) -> Option<Self> {
        if model.m() != 2 {
            return None;
        }
        let (d1, d2) = (model.delta(0), model.delta(1));
        let (q1, q2) = (model.generator.exit_rate(0), model.generator.exit_rate(1));
        let alpha = [d2 + q1 + q2, d1 + q1 + q2];
        let beta0 = d1 * d2 + d1 * q2 + d2 * q1;
        let beta1 = d1 + d2 + q1 + q2;
        let discriminant = beta1 * beta1 - 4.0 * beta0;
        let sq = discriminant.max(0.0).sqrt();
        // stable quadratic roots
        let big = -0.5 * (beta1 + beta1.signum() * sq);
        let (a, b) = if big != 0.0 { (big, beta0 / big) } else { (0.0, 0.0) };
        let roots = if a >= b { [a, b] } else { [b, a] };
        Some(Self { alpha, beta0, beta1, discriminant, roots })
    }

    /// `g(i, tau) = [(u1 + a_i) e^(u1 tau) - (u2 + a_i) e^(u2 tau)] / (u1 - u2)`.
    pub fn g(&self, regime: usize, tau: f64) -> f64 {
        let [u1, u2] = self.roots;
        let a = self.alpha[regime];
        ((u1 + a) * (u1 * tau).exp() - (u2 + a) * (u2 * tau).exp()) / (u1 - u2)
    }
}

/// Intermediate results of the transform pipeline.
#[derive(Debug, Clone, PartialEq)]
pub struct Diagnostics {
    pub transforms: Vec<RationalFunction>,
    /// Partial-fraction terms of each regime's transform.
    pub poles: Vec<Vec<PoleTerm>>,
    pub reconstruction_residuals: Vec<f64>,
    /// `beta_1^2 - 4 beta_0` for two-regime models.
    pub discriminant: Option<f64>,
}

/// `g(i, .)` for every regime together with the pipeline diagnostics.
#[derive(Debug, Clone, PartialEq)]
pub struct LaplaceSolution {
    pub g: Vec<ExponentialSum>,
    pub diagnostics: Diagnostics,
}

impl LaplaceSolution {
    pub fn eval(&self, regime: usize, tau: f64) -> f64 {
        self.g[regime].eval(tau)
    }

    pub fn eval_all(&self, tau: f64) -> Vec<f64> {
        self.g.iter().map(|g| g.eval(tau)).collect()
    }

    /// Distinct poles shared by all transforms.
    pub fn poles(&self) -> Vec<Complex64> {
        self.diagnostics.poles[0].iter().map(|p| p.pole).collect()
    }
}

pub fn solve_g(model: &MarketModel) -> Result<LaplaceSolution, LaplaceError> {
    let scalars = model.scalars();
    let system = build_system(model, &scalars);
    let transforms = solve_transform(&system)?;
    let skeleton = find_poles(&transforms[0].den)?;
    let mut g = Vec::with_capacity(model.m());
    let mut poles = Vec::with_capacity(model.m());
    let mut reconstruction_residuals = Vec::with_capacity(model.m());
    for (i, rf) in transforms.iter().enumerate() {
        let terms = partial_fractions(rf, &skeleton)?;
        reconstruction_residuals.push(reconstruction_residual(rf, &terms));
        g.push(invert_transform(i, &terms));
        poles.push(terms);
    }
    let discriminant = TwoStateClosedForm::new(model).map(|c| c.discriminant);
    Ok(LaplaceSolution { g, diagnostics: Diagnostics { transforms, poles, reconstruction_residuals, discriminant } })
}
