//! Group and sparse group lasso by block coordinate descent.
//!
//! Each block takes proximal-gradient steps with step size `1/L_l`, where
//! `L_l` is the largest eigenvalue of `X_lᵀX_l/n`. For a singleton block this
//! is the exact coordinate minimizer, so singleton groups reproduce the lasso.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use super::{FitResult, SolverOptions, check_lambda, soft_threshold};
use crate::data::ResponseView;
use crate::error::{Error, Result};
use crate::grouping::GroupAssignment;

const INNER_STEPS: usize = 50;

/// `P(θ) = λ Σ_l √n_l ‖θ_l‖₂`.
pub fn solve_group(
    view: &ResponseView,
    lambda: f64,
    groups: &GroupAssignment,
    opts: &SolverOptions,
) -> Result<FitResult> {
    solve_group_from(view, lambda, 0.0, groups, opts, None)
}

/// `P(θ) = λ₁ Σ_l √n_l ‖θ_l‖₂ + λ₂‖θ‖₁`.
pub fn solve_sparse_group(
    view: &ResponseView,
    lambda1: f64,
    lambda2: f64,
    groups: &GroupAssignment,
    opts: &SolverOptions,
) -> Result<FitResult> {
    solve_group_from(view, lambda1, lambda2, groups, opts, None)
}

/// Smallest group penalty giving an all-zero group-lasso solution.
pub fn group_lambda_max(view: &ResponseView, groups: &GroupAssignment) -> f64 {
    let g = view.x.transpose() * &view.y / view.n_samples() as f64;
    groups
        .members()
        .iter()
        .map(|idx| idx.iter().map(|&j| g[j] * g[j]).sum::<f64>().sqrt() / (idx.len() as f64).sqrt())
        .fold(0.0, f64::max)
}

struct Block {
    idx: Vec<usize>,
    x: DMatrix<f64>,
    weight: f64,
    lipschitz: f64,
}

pub(crate) fn solve_group_from(
    view: &ResponseView,
    l1: f64,
    l2: f64,
    groups: &GroupAssignment,
    opts: &SolverOptions,
    init: Option<&DVector<f64>>,
) -> Result<FitResult> {
    check_lambda(l1)?;
    check_lambda(l2)?;
    let (n, m) = view.x.shape();
    if groups.len() != m {
        return Err(Error::invalid(format!(
            "groups cover {} predictors, expected {m}",
            groups.len()
        )));
    }
    let nf = n as f64;
    let blocks: Vec<Block> = groups
        .members()
        .into_iter()
        .map(|idx| {
            let x = view.x.select_columns(idx.iter());
            let gram = x.transpose() * &x / nf;
            let lipschitz = if idx.len() == 1 {
                gram[(0, 0)]
            } else {
                SymmetricEigen::new(gram).eigenvalues.max()
            };
            Block {
                weight: (idx.len() as f64).sqrt(),
                idx,
                x,
                lipschitz,
            }
        })
        .collect();

    let mut theta = match init {
        Some(t) if t.len() == m => t.clone(),
        _ => DVector::zeros(m),
    };
    let mut resid = &view.y - &view.x * &theta;

    let mut iterations = 0;
    let mut converged = false;
    let mut kkt = f64::INFINITY;
    while iterations < opts.max_iterations {
        iterations += 1;
        let mut sweep_change: f64 = 0.0;
        for b in &blocks {
            if b.lipschitz <= 0.0 {
                continue;
            }
            for step in 0..INNER_STEPS {
                let change = block_step(b, &mut theta, &mut resid, l1, l2, nf);
                if step == 0 {
                    sweep_change = sweep_change.max(change);
                }
                if change < opts.tolerance {
                    break;
                }
            }
        }
        if sweep_change < opts.tolerance {
            kkt = kkt_violation(&blocks, &theta, &resid, l1, l2, nf);
            if kkt < opts.kkt_tolerance {
                converged = true;
                break;
            }
        }
    }
    if !converged {
        kkt = kkt_violation(&blocks, &theta, &resid, l1, l2, nf);
    }

    let group_norms: f64 = blocks
        .iter()
        .map(|b| b.weight * b.idx.iter().map(|&j| theta[j] * theta[j]).sum::<f64>().sqrt())
        .sum();
    let objective_value = resid.norm_squared() / (2.0 * nf) + l1 * group_norms + l2 * theta.lp_norm(1);
    Ok(FitResult {
        coefficients: theta,
        objective_value,
        iterations,
        converged,
        max_kkt_violation: kkt,
        possibly_nonunique: n < m,
    })
}

/// One proximal-gradient step on a block; returns the largest change.
fn block_step(b: &Block, theta: &mut DVector<f64>, resid: &mut DVector<f64>, l1: f64, l2: f64, nf: f64) -> f64 {
    let grad = b.x.transpose() * &*resid / nf;
    let lip = b.lipschitz;
    let mut v: Vec<f64> = b
        .idx
        .iter()
        .zip(grad.iter())
        .map(|(&j, &g)| soft_threshold(lip * theta[j] + g, l2) / lip)
        .collect();
    let norm = v.iter().map(|a| a * a).sum::<f64>().sqrt();
    let cut = l1 * b.weight / lip;
    if norm <= cut {
        v.iter_mut().for_each(|a| *a = 0.0);
    } else if cut > 0.0 {
        let scale = 1.0 - cut / norm;
        v.iter_mut().for_each(|a| *a *= scale);
    }

    let mut change: f64 = 0.0;
    let mut delta = DVector::zeros(b.idx.len());
    for (k, (&j, &new)) in b.idx.iter().zip(v.iter()).enumerate() {
        delta[k] = new - theta[j];
        change = change.max(delta[k].abs());
        theta[j] = new;
    }
    if change > 0.0 {
        resid.gemv(-1.0, &b.x, &delta, 1.0);
    }
    change
}

fn kkt_violation(blocks: &[Block], theta: &DVector<f64>, resid: &DVector<f64>, l1: f64, l2: f64, nf: f64) -> f64 {
    let mut worst: f64 = 0.0;
    for b in blocks {
        let grad = b.x.transpose() * resid / nf;
        let coef: Vec<f64> = b.idx.iter().map(|&j| theta[j]).collect();
        let norm = coef.iter().map(|a| a * a).sum::<f64>().sqrt();
        if norm == 0.0 {
            let shrunk = grad.iter().map(|&g| soft_threshold(g, l2).powi(2)).sum::<f64>().sqrt();
            worst = worst.max(shrunk - l1 * b.weight);
        } else {
            for (g, &t) in grad.iter().zip(&coef) {
                let h = g - l1 * b.weight * t / norm;
                let v = if t == 0.0 {
                    (h.abs() - l2).max(0.0)
                } else {
                    (h - l2 * t.signum()).abs()
                };
                worst = worst.max(v);
            }
        }
    }
    worst
}
