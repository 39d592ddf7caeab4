//! Simultaneous polynomial root finding (Aberth–Ehrlich) with clustering of
//! repeated roots and conjugate-pair symmetrization.

use std::f64::consts::PI;

use num_complex::Complex64;

use crate::poly::Polynomial;

/// Iteration budget of the Aberth sweep.
pub const MAX_ITERATIONS: usize = 200;
/// Convergence threshold on `|p(z)| / sum |a_k| |z|^k`.
pub const RESIDUAL_TOLERANCE: f64 = 1e-12;
/// Roots closer than this (relative to `max(1, |z|)`) are merged.
pub const CLUSTER_TOLERANCE: f64 = 1e-8;
/// Reported roots must satisfy `|p(z)| <= ACCEPT_TOLERANCE * scale`.
pub const ACCEPT_TOLERANCE: f64 = 1e-9;

// Wider radius inside which a cluster is merged only if the centroid is
// confirmed as a multiple root through the Taylor coefficients. An n-fold
// root is only resolved to about eps^(1/n) by any simultaneous iteration.
const MULTIPLE_ROOT_RADIUS: f64 = 1e-4;
const MULTIPLE_ROOT_SLACK: f64 = 100.0 * f64::EPSILON;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum RootError {
    #[error("root finding did not converge within {iterations} iterations (worst residual {residual:e})")]
    NoConvergence { iterations: usize, residual: f64 },
    #[error("polynomial of degree < 1 has no roots")]
    Constant,
}

/// A distinct root and its multiplicity.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Root {
    pub value: Complex64,
    pub multiplicity: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RootReport {
    pub roots: Vec<Root>,
    pub iterations: usize,
}

fn relative_residual(p: &Polynomial, z: Complex64) -> f64 {
    let scale = p.magnitude_at(z);
    if scale == 0.0 {
        0.0
    } else {
        p.eval_complex(z).norm() / scale
    }
}

fn initial_guesses(p: &Polynomial) -> Vec<Complex64> {
    let n = p.degree().unwrap();
    let a = p.coeffs();
    let lead = p.leading();
    // Fujiwara bound on root moduli
    let mut bound: f64 = 0.0;
    for k in 0..n {
        let mut c = (a[k] / lead).abs();
        if k == 0 {
            c /= 2.0;
        }
        bound = bound.max(c.powf(1.0 / (n - k) as f64));
    }
    let radius = (2.0 * bound).max(f64::MIN_POSITIVE.sqrt());
    let center = -a[n - 1] / (lead * n as f64);
    (0..n)
        .map(|k| {
            let theta = 2.0 * PI * k as f64 / n as f64 + 0.4;
            Complex64::new(center, 0.0) + Complex64::from_polar(0.5 * radius, theta)
        })
        .collect()
}

/// Runs Aberth–Ehrlich sweeps until every approximation has a relative
/// residual below [`RESIDUAL_TOLERANCE`], then a few extra polishing sweeps.
fn aberth(p: &Polynomial) -> Result<(Vec<Complex64>, usize), RootError> {
    let dp = p.derivative();
    let mut z = initial_guesses(p);
    let n = z.len();
    let mut polish = 3;
    for iter in 1..=MAX_ITERATIONS {
        for k in 0..n {
            let pz = p.eval_complex(z[k]);
            if pz.norm() == 0.0 {
                continue;
            }
            let ratio = pz / dp.eval_complex(z[k]);
            let repulsion: Complex64 = (0..n)
                .filter(|&j| j != k)
                .map(|j| {
                    let d = z[k] - z[j];
                    if d.norm() == 0.0 {
                        Complex64::new(0.0, 0.0)
                    } else {
                        d.inv()
                    }
                })
                .sum();
            let step = ratio / (Complex64::new(1.0, 0.0) - ratio * repulsion);
            if step.is_finite() {
                z[k] -= step;
            }
        }
        let worst = z.iter().map(|&zk| relative_residual(p, zk)).fold(0.0, f64::max);
        if worst <= RESIDUAL_TOLERANCE {
            polish -= 1;
            if polish == 0 {
                return Ok((z, iter));
            }
        }
    }
    let worst = z.iter().map(|&zk| relative_residual(p, zk)).fold(0.0, f64::max);
    Err(RootError::NoConvergence { iterations: MAX_ITERATIONS, residual: worst })
}

fn cluster_radius(z: Complex64) -> f64 {
    z.norm().max(1.0)
}

/// Single-linkage groups of `z` under relative distance `tol`.
fn link(z: &[Complex64], tol: f64) -> Vec<Vec<usize>> {
    let n = z.len();
    let mut parent: Vec<usize> = (0..n).collect();
    fn find(parent: &mut [usize], i: usize) -> usize {
        let mut r = i;
        while parent[r] != r {
            r = parent[r];
        }
        parent[i] = r;
        r
    }
    for i in 0..n {
        for j in i + 1..n {
            let scale = cluster_radius(z[i]).max(cluster_radius(z[j]));
            if (z[i] - z[j]).norm() <= tol * scale {
                let (a, b) = (find(&mut parent, i), find(&mut parent, j));
                parent[a] = b;
            }
        }
    }
    let mut groups: Vec<Vec<usize>> = Vec::new();
    let mut label = vec![usize::MAX; n];
    for i in 0..n {
        let r = find(&mut parent, i);
        if label[r] == usize::MAX {
            label[r] = groups.len();
            groups.push(Vec::new());
        }
        groups[label[r]].push(i);
    }
    groups
}

fn centroid(z: &[Complex64], idx: &[usize]) -> Complex64 {
    idx.iter().map(|&i| z[i]).sum::<Complex64>() / idx.len() as f64
}

/// Tries to confirm that `p` has a root of multiplicity `k` near `guess`.
fn confirm_multiple_root(p: &Polynomial, guess: Complex64, k: usize) -> Option<Complex64> {
    // The (k-1)-th derivative has a simple root at a k-fold root of p.
    let mut d = p.clone();
    for _ in 1..k {
        d = d.derivative();
    }
    let dd = d.derivative();
    let mut c = guess;
    for _ in 0..20 {
        let step = d.eval_complex(c) / dd.eval_complex(c);
        if !step.is_finite() {
            break;
        }
        c -= step;
        if step.norm() <= 4.0 * f64::EPSILON * cluster_radius(c) {
            break;
        }
    }
    if (c - guess).norm() > MULTIPLE_ROOT_RADIUS * cluster_radius(guess) {
        return None;
    }
    let taylor = p.taylor_at(c);
    let bounds = p.taylor_magnitudes_at(c);
    let n = p.degree().unwrap() as f64;
    let vanishes = (0..k).all(|j| taylor[j].norm() <= MULTIPLE_ROOT_SLACK * n * bounds[j]);
    vanishes.then_some(c)
}

fn merge(p: &Polynomial, z: &[Complex64]) -> Vec<Root> {
    let mut roots = Vec::new();
    for group in link(z, MULTIPLE_ROOT_RADIUS) {
        if group.len() > 1 {
            let c = centroid(z, &group);
            if let Some(root) = confirm_multiple_root(p, c, group.len()) {
                roots.push(Root { value: root, multiplicity: group.len() });
                continue;
            }
        }
        let members: Vec<Complex64> = group.iter().map(|&i| z[i]).collect();
        for tight in link(&members, CLUSTER_TOLERANCE) {
            roots.push(Root { value: centroid(&members, &tight), multiplicity: tight.len() });
        }
    }
    roots
}

/// Snaps nearly real roots onto the real axis and makes complex roots come
/// in exact conjugate pairs (upper member first).
fn symmetrize(mut roots: Vec<Root>) -> Vec<Root> {
    let mut out = Vec::with_capacity(roots.len());
    let is_real = |r: &Root| r.value.im.abs() <= CLUSTER_TOLERANCE * cluster_radius(r.value);
    let (real, mut complex): (Vec<Root>, Vec<Root>) = roots.drain(..).partition(is_real);
    for r in real {
        out.push(Root { value: Complex64::new(r.value.re, 0.0), ..r });
    }
    complex.sort_by(|a, b| b.value.im.total_cmp(&a.value.im));
    let mut used = vec![false; complex.len()];
    for i in 0..complex.len() {
        if used[i] || complex[i].value.im < 0.0 {
            continue;
        }
        used[i] = true;
        let target = complex[i].value.conj();
        let partner = (0..complex.len())
            .filter(|&j| !used[j] && complex[j].value.im < 0.0 && complex[j].multiplicity == complex[i].multiplicity)
            .min_by(|&a, &b| (complex[a].value - target).norm().total_cmp(&(complex[b].value - target).norm()));
        match partner {
            Some(j) => {
                used[j] = true;
                let v = (complex[i].value + complex[j].value.conj()) / 2.0;
                out.push(Root { value: v, multiplicity: complex[i].multiplicity });
                out.push(Root { value: v.conj(), multiplicity: complex[i].multiplicity });
            }
            None => out.push(Root { value: Complex64::new(complex[i].value.re, 0.0), ..complex[i] }),
        }
    }
    for (j, r) in complex.iter().enumerate() {
        if !used[j] {
            out.push(Root { value: Complex64::new(r.value.re, 0.0), ..*r });
        }
    }
    out
}

/// All roots of `p` with multiplicities summing to its degree.
///
/// Real roots come first in ascending order, then conjugate pairs.
pub fn find_roots(p: &Polynomial) -> Result<RootReport, RootError> {
    let n = p.degree().ok_or(RootError::Constant)?;
    if n == 0 {
        return Err(RootError::Constant);
    }
    let p = p.monic();
    let (z, iterations) = if n == 1 {
        (vec![Complex64::new(-p.coeffs()[0], 0.0)], 0)
    } else {
        aberth(&p)?
    };
    let mut roots = symmetrize(merge(&p, &z));
    roots.sort_by(|a, b| {
        let ka = (a.value.im != 0.0, a.value.re, -a.value.im);
        let kb = (b.value.im != 0.0, b.value.re, -b.value.im);
        ka.partial_cmp(&kb).unwrap()
    });
    // merged roots are accepted with their Taylor-confirmed residual
    let worst = roots
        .iter()
        .filter(|r| r.multiplicity == 1)
        .map(|r| relative_residual(&p, r.value))
        .fold(0.0, f64::max);
    if worst > ACCEPT_TOLERANCE {
        return Err(RootError::NoConvergence { iterations, residual: worst });
    }
    Ok(RootReport { roots, iterations })
}
