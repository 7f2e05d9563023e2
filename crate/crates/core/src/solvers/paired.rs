//! Paired group lasso over all genes jointly.
//!
//! Column `j` of Θ holds the regression of gene `j` on the others. The entries
//! `(Θ_ij, Θ_ji)` form a group, so an edge is kept or dropped in both
//! directions at once. Objective:
//! `(1/(2n)) Σ_j ‖x_j − X Θ_{·j}‖² + λ Σ_{i<j} ‖(Θ_ij, Θ_ji)‖₂`.

use std::collections::BTreeMap;

use nalgebra::DMatrix;

use super::{SolverOptions, check_lambda};
use crate::data::ExpressionMatrix;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct PairedFit {
    /// `p × p`, zero diagonal; entry `(i, j)` is the coefficient of gene `i`
    /// in the regression of gene `j`.
    pub matrix: DMatrix<f64>,
    pub pair_norms: BTreeMap<(usize, usize), f64>,
    pub objective_value: f64,
    pub iterations: usize,
    pub converged: bool,
}

/// Smallest λ giving the all-zero matrix: `max_{i<j} ‖(x_iᵀx_j, x_jᵀx_i)‖/n`.
pub fn paired_lambda_max(m: &ExpressionMatrix) -> f64 {
    let x = m.values();
    let n = m.n_samples() as f64;
    let gram = x.transpose() * x / n;
    let p = m.n_genes();
    let mut best: f64 = 0.0;
    for i in 0..p {
        for j in i + 1..p {
            best = best.max(gram[(i, j)].hypot(gram[(j, i)]));
        }
    }
    best
}

pub fn solve_paired_group(m: &ExpressionMatrix, lambda: f64, opts: &SolverOptions) -> Result<PairedFit> {
    check_lambda(lambda)?;
    solve_paired_values(m.values(), lambda, opts)
}

pub(crate) fn solve_paired_values(x: &DMatrix<f64>, lambda: f64, opts: &SolverOptions) -> Result<PairedFit> {
    let (n, p) = x.shape();
    if p < 2 {
        return Err(Error::invalid("paired group lasso needs at least 2 genes"));
    }
    let nf = n as f64;
    let col_sq: Vec<f64> = x.column_iter().map(|c| c.norm_squared() / nf).collect();
    let mut theta: DMatrix<f64> = DMatrix::zeros(p, p);
    // Residual of each gene's regression.
    let mut resid = x.clone();

    let mut iterations = 0;
    let mut converged = false;
    while iterations < opts.max_iterations {
        iterations += 1;
        let mut max_change: f64 = 0.0;
        for i in 0..p {
            for j in i + 1..p {
                let (a_old, b_old): (f64, f64) = (theta[(i, j)], theta[(j, i)]);
                // a = Θ_ij enters gene j's regression through x_i; b = Θ_ji
                // enters gene i's regression through x_j.
                let ga = x.column(i).dot(&resid.column(j)) / nf + col_sq[i] * a_old;
                let gb = x.column(j).dot(&resid.column(i)) / nf + col_sq[j] * b_old;
                let (a, b) = pair_prox(ga, gb, col_sq[i], col_sq[j], lambda);
                let (da, db) = (a - a_old, b - b_old);
                if da != 0.0 {
                    let xi = x.column(i).into_owned();
                    resid.column_mut(j).axpy(-da, &xi, 1.0);
                    theta[(i, j)] = a;
                }
                if db != 0.0 {
                    let xj = x.column(j).into_owned();
                    resid.column_mut(i).axpy(-db, &xj, 1.0);
                    theta[(j, i)] = b;
                }
                max_change = max_change.max(da.abs()).max(db.abs());
            }
        }
        if max_change < opts.tolerance {
            converged = true;
            break;
        }
    }

    let mut pair_norms = BTreeMap::new();
    let mut penalty = 0.0;
    for i in 0..p {
        for j in i + 1..p {
            let norm = theta[(i, j)].hypot(theta[(j, i)]);
            penalty += norm;
            pair_norms.insert((i, j), norm);
        }
    }
    let objective_value = resid.norm_squared() / (2.0 * nf) + lambda * penalty;
    Ok(PairedFit {
        matrix: theta,
        pair_norms,
        objective_value,
        iterations,
        converged,
    })
}

/// Minimizes `½c_a a² − g_a a + ½c_b b² − g_b b + λ‖(a, b)‖₂`.
fn pair_prox(ga: f64, gb: f64, ca: f64, cb: f64, lambda: f64) -> (f64, f64) {
    // A zero-variance column carries no signal; its coefficient stays 0.
    let ga = if ca > 0.0 { ga } else { 0.0 };
    let gb = if cb > 0.0 { gb } else { 0.0 };
    let gnorm = ga.hypot(gb);
    if gnorm <= lambda {
        return (0.0, 0.0);
    }
    if ca == cb {
        let s = (1.0 - lambda / gnorm) / ca;
        return (ga * s, gb * s);
    }
    // With t = ‖(a, b)‖: a = g_a t/(c_a t + λ), b likewise, and t solves
    // (g_a/(c_a t + λ))² + (g_b/(c_b t + λ))² = 1, decreasing in t.
    let phi = |t: f64| {
        let u = if ga == 0.0 { 0.0 } else { ga / (ca * t + lambda) };
        let v = if gb == 0.0 { 0.0 } else { gb / (cb * t + lambda) };
        u * u + v * v - 1.0
    };
    let cmin = [(ca, ga), (cb, gb)]
        .iter()
        .filter(|(_, g)| *g != 0.0)
        .map(|(c, _)| *c)
        .fold(f64::INFINITY, f64::min);
    let (mut lo, mut hi) = (0.0, gnorm / cmin);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if phi(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= f64::EPSILON * hi {
            break;
        }
    }
    let t = 0.5 * (lo + hi);
    (ga * t / (ca * t + lambda), gb * t / (cb * t + lambda))
}
