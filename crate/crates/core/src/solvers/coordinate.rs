//! Cyclic coordinate descent for the separable penalties
//! `λ₁‖θ‖₁ + (λ₂/2)‖θ‖²` (lasso, ridge and elastic net).

use nalgebra::{Cholesky, DVector};

use super::{FitResult, SolverOptions, check_lambda, soft_threshold};
use crate::data::ResponseView;
use crate::error::{Error, Result};

/// Lasso: `P(θ) = λ‖θ‖₁`.
pub fn solve_lasso(view: &ResponseView, lambda: f64, opts: &SolverOptions) -> Result<FitResult> {
    check_lambda(lambda)?;
    Ok(descend(view, lambda, 0.0, opts, None))
}

/// Ridge: `P(θ) = (λ/2)‖θ‖²`. Equivalent to [`ridge_closed_form`] with
/// `lambda_cf = n·λ`.
pub fn solve_ridge(view: &ResponseView, lambda: f64, opts: &SolverOptions) -> Result<FitResult> {
    check_lambda(lambda)?;
    Ok(descend(view, 0.0, lambda, opts, None))
}

/// Elastic net: `P(θ) = λ₁‖θ‖₁ + (λ₂/2)‖θ‖²`.
pub fn solve_elastic_net(view: &ResponseView, lambda1: f64, lambda2: f64, opts: &SolverOptions) -> Result<FitResult> {
    check_lambda(lambda1)?;
    check_lambda(lambda2)?;
    Ok(descend(view, lambda1, lambda2, opts, None))
}

/// `(XᵀX + λ_cf I)⁻¹ Xᵀy` by Cholesky factorization.
pub fn ridge_closed_form(view: &ResponseView, lambda_cf: f64) -> Result<DVector<f64>> {
    check_lambda(lambda_cf)?;
    let x = &view.x;
    let mut gram = x.transpose() * x;
    for i in 0..gram.nrows() {
        gram[(i, i)] += lambda_cf;
    }
    let rhs = x.transpose() * &view.y;
    let chol = Cholesky::new(gram).ok_or(Error::Singular)?;
    let beta = chol.solve(&rhs);
    if beta.iter().all(|v| v.is_finite()) {
        Ok(beta)
    } else {
        Err(Error::Singular)
    }
}

pub(crate) fn descend(
    view: &ResponseView,
    l1: f64,
    l2: f64,
    opts: &SolverOptions,
    init: Option<&DVector<f64>>,
) -> FitResult {
    let x = &view.x;
    let (n, m) = x.shape();
    let nf = n as f64;
    let col_sq: Vec<f64> = x.column_iter().map(|c| c.norm_squared() / nf).collect();

    let mut theta = match init {
        Some(t) if t.len() == m => t.clone(),
        _ => DVector::zeros(m),
    };
    let mut resid = &view.y - x * &theta;

    let mut iterations = 0;
    let mut converged = false;
    let mut kkt = f64::INFINITY;
    while iterations < opts.max_iterations {
        iterations += 1;
        let mut max_change: f64 = 0.0;
        for j in 0..m {
            let old = theta[j];
            let new = if col_sq[j] == 0.0 {
                0.0
            } else {
                let rho = x.column(j).dot(&resid) / nf + col_sq[j] * old;
                soft_threshold(rho, l1) / (col_sq[j] + l2)
            };
            let delta = new - old;
            if delta != 0.0 {
                resid.axpy(-delta, &x.column(j), 1.0);
                theta[j] = new;
                max_change = max_change.max(delta.abs());
            }
        }
        if max_change < opts.tolerance {
            kkt = kkt_violation(view, &theta, &resid, l1, l2);
            if kkt < opts.kkt_tolerance {
                converged = true;
                break;
            }
        }
    }
    if !converged {
        kkt = kkt_violation(view, &theta, &resid, l1, l2);
    }

    let objective_value = resid.norm_squared() / (2.0 * nf)
        + l1 * theta.iter().map(|t| t.abs()).sum::<f64>()
        + 0.5 * l2 * theta.norm_squared();
    FitResult {
        coefficients: theta,
        objective_value,
        iterations,
        converged,
        max_kkt_violation: kkt,
        possibly_nonunique: n < m,
    }
}

/// Distance of each partial gradient from the penalty subdifferential.
fn kkt_violation(view: &ResponseView, theta: &DVector<f64>, resid: &DVector<f64>, l1: f64, l2: f64) -> f64 {
    let nf = view.n_samples() as f64;
    view.x
        .column_iter()
        .zip(theta.iter())
        .map(|(col, &t)| {
            let g = col.dot(resid) / nf - l2 * t;
            if t == 0.0 {
                (g.abs() - l1).max(0.0)
            } else {
                (g - l1 * t.signum()).abs()
            }
        })
        .fold(0.0, f64::max)
}
