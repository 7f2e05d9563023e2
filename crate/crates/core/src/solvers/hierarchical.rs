//! Lasso with pairwise interactions under a strong hierarchy constraint.
//!
//! Minimizes
//!
//! ```text
//! (1/(2n)) Σ_i (y_i − x_iᵀβ − ½ x_iᵀΘx_i)² + λ₁ Σ_j (β⁺_j + β⁻_j) + (λ/2)‖Θ‖₁
//! s.t. β = β⁺ − β⁻,  β± ≥ 0,  ‖Θ_j‖₁ ≤ β⁺_j + β⁻_j,  Θ = Θᵀ,  diag Θ = 0
//! ```
//!
//! by ADMM. The smooth block carries a symmetric Θ (one variable per pair)
//! and is solved exactly through a Woodbury-reduced `n × n` system whose
//! eigendecomposition is computed once, so ρ can adapt between iterations.
//! The nonsmooth block carries an unsymmetric copy whose rows separate, and
//! each row's proximal map (penalties plus the hierarchy constraint) is found
//! through a one-dimensional search on the constraint multiplier.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use super::{FitResult, SolverOptions, check_lambda, soft_threshold};
use crate::data::{ExpressionMatrix, ResponseView};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct InteractionFit {
    pub beta_plus: DVector<f64>,
    pub beta_minus: DVector<f64>,
    /// `β⁺ − β⁻`.
    pub main_effects: DVector<f64>,
    /// Symmetric, zero diagonal, indexed by predictor column.
    pub interactions: DMatrix<f64>,
    /// `β⁺_j + β⁻_j − ‖Θ_j‖₁`; nonnegative when the hierarchy holds.
    pub hierarchy_slack: DVector<f64>,
    pub objective_value: f64,
    pub iterations: usize,
    pub converged: bool,
    pub max_residual: f64,
    pub possibly_nonunique: bool,
}

impl InteractionFit {
    pub fn into_fit_result(self) -> FitResult {
        FitResult {
            coefficients: self.main_effects,
            objective_value: self.objective_value,
            iterations: self.iterations,
            converged: self.converged,
            max_kkt_violation: self.max_residual,
            possibly_nonunique: self.possibly_nonunique,
        }
    }
}

/// Fits gene `response_index` against all others with their pairwise
/// interactions.
pub fn solve_hierarchical(
    m: &ExpressionMatrix,
    response_index: usize,
    lambda: f64,
    opts: &SolverOptions,
) -> Result<InteractionFit> {
    let view = m.response_view(response_index)?;
    solve_hierarchical_view(&view, lambda, opts)
}

/// Top of the λ grid: the larger of the lasso λ_max and the interaction
/// analogue `max |z_jkᵀy| / (3n)` (an interaction must also buy main-effect
/// budget on both of its endpoints).
pub fn hierarchical_lambda_max(view: &ResponseView) -> f64 {
    let n = view.n_samples() as f64;
    let x = &view.x;
    let m = x.ncols();
    let mut best = super::lambda_max(view);
    for j in 0..m {
        for k in j + 1..m {
            let s: f64 = (0..x.nrows()).map(|i| x[(i, j)] * x[(i, k)] * view.y[i]).sum();
            best = best.max(s.abs() / (3.0 * n));
        }
    }
    best
}

pub fn solve_hierarchical_view(view: &ResponseView, lambda: f64, opts: &SolverOptions) -> Result<InteractionFit> {
    let mut fits = hierarchical_path(view, &[lambda], opts)?;
    Ok(fits.pop().expect("one fit per λ"))
}

/// Fits along `lambdas` in the given order, reusing the factorization and
/// warm-starting every fit from the previous ADMM state.
pub fn hierarchical_path(view: &ResponseView, lambdas: &[f64], opts: &SolverOptions) -> Result<Vec<InteractionFit>> {
    for &l in lambdas {
        check_lambda(l)?;
    }
    if let Some(l) = opts.hierarchical_main_lambda {
        check_lambda(l)?;
    }
    let rho = opts.admm_rho;
    if !(rho.is_finite() && rho > 0.0) {
        return Err(Error::invalid("ADMM penalty must be positive"));
    }
    let problem = Problem::new(view, opts)?;
    let mut state = State::new(problem.m, rho);
    Ok(lambdas
        .iter()
        .map(|&lambda| {
            problem.solve(
                lambda,
                opts.hierarchical_main_lambda.unwrap_or(lambda),
                &mut state,
                opts,
            )
        })
        .collect())
}

/// Data shared by every fit on one design.
struct Problem<'a> {
    view: &'a ResponseView,
    m: usize,
    pairs: Vec<(usize, usize)>,
    z: DMatrix<f64>,
    /// `UᵀX` and `UᵀZ` for the eigenvectors `U` of `G = 2XXᵀ + ½ZZᵀ`, so
    /// `K(ρ) = nI + G/ρ` inverts for any ρ without refactoring.
    ux: DMatrix<f64>,
    uz: DMatrix<f64>,
    spectrum: DVector<f64>,
    xty: DVector<f64>,
    zty: DVector<f64>,
}

/// ADMM iterates carried between fits: nonsmooth copies, scaled duals, ρ.
struct State {
    cp: DVector<f64>,
    cm: DVector<f64>,
    psi: DMatrix<f64>,
    up: DVector<f64>,
    um: DVector<f64>,
    upsi: DMatrix<f64>,
    rho: f64,
}

impl State {
    fn new(m: usize, rho: f64) -> Self {
        Self {
            cp: DVector::zeros(m),
            cm: DVector::zeros(m),
            psi: DMatrix::zeros(m, m),
            up: DVector::zeros(m),
            um: DVector::zeros(m),
            upsi: DMatrix::zeros(m, m),
            rho,
        }
    }

    fn rescale_duals(&mut self, factor: f64) {
        self.up *= factor;
        self.um *= factor;
        self.upsi *= factor;
    }
}

const RHO_UPDATE_EVERY: usize = 10;
const RHO_BALANCE: f64 = 3.0;

impl<'a> Problem<'a> {
    fn new(view: &'a ResponseView, opts: &SolverOptions) -> Result<Self> {
        let x = &view.x;
        let (n, m) = x.shape();
        let q = m * m.saturating_sub(1) / 2;
        if q > opts.interaction_budget {
            return Err(Error::BudgetExceeded {
                features: q,
                budget: opts.interaction_budget,
            });
        }
        let nf = n as f64;
        let pairs: Vec<(usize, usize)> = (0..m).flat_map(|j| (j + 1..m).map(move |k| (j, k))).collect();
        let z = DMatrix::from_fn(n, q, |i, p| {
            let (j, k) = pairs[p];
            x[(i, j)] * x[(i, k)]
        });
        let g = (x * x.transpose()) * 2.0 + (&z * z.transpose()) * 0.5;
        let eig = SymmetricEigen::new(g);
        let ux = eig.eigenvectors.tr_mul(x);
        let uz = eig.eigenvectors.tr_mul(&z);
        let xty = x.transpose() * &view.y / nf;
        let zty = z.transpose() * &view.y / nf;
        Ok(Self {
            view,
            m,
            pairs,
            z,
            ux,
            uz,
            spectrum: eig.eigenvalues.map(|v| v.max(0.0)),
            xty,
            zty,
        })
    }

    fn solve(&self, lambda: f64, main_lambda: f64, s: &mut State, opts: &SolverOptions) -> InteractionFit {
        let x = &self.view.x;
        let (n, m) = x.shape();
        let q = self.pairs.len();
        let nf = n as f64;

        let mut row = vec![0.0; m.saturating_sub(1)];
        let mut iterations = 0;
        let mut converged = false;
        let mut residual = f64::INFINITY;
        while iterations < opts.max_iterations {
            iterations += 1;
            let rho = s.rho;

            // Smooth step: (DᵀD/n + ρM) w = Dᵀy/n + ρMᵀ(z − u) with
            // D = [X, −X, Z], M = diag(1, 1, 2), via Woodbury on
            // K = nI + D(ρM)⁻¹Dᵀ.
            let sp = &self.xty / rho + &s.cp - &s.up;
            let sm = -&self.xty / rho + &s.cm - &s.um;
            let st = DVector::from_fn(q, |p, _| {
                let (j, k) = self.pairs[p];
                let back = s.psi[(j, k)] - s.upsi[(j, k)] + s.psi[(k, j)] - s.upsi[(k, j)];
                (self.zty[p] + rho * back) / (2.0 * rho)
            });
            let mut coords = &self.ux * (&sp - &sm);
            coords.gemv(1.0, &self.uz, &st, 1.0);
            for (c, &ev) in coords.iter_mut().zip(self.spectrum.iter()) {
                *c /= nf + ev / rho;
            }
            let xk = self.ux.tr_mul(&coords);
            let bp = &sp - &xk / rho;
            let bm = &sm + &xk / rho;
            let t = &st - self.uz.tr_mul(&coords) / (2.0 * rho);

            // Nonsmooth step, row by row.
            let tau_main = main_lambda / rho;
            let tau_inter = lambda / (2.0 * rho);
            let mut dual: f64 = 0.0;
            let mut primal: f64 = 0.0;
            for j in 0..m {
                let mut c = 0;
                for k in 0..m {
                    if k != j {
                        row[c] = pair_value(&t, j, k, m) + s.upsi[(j, k)];
                        c += 1;
                    }
                }
                let (new_p, new_m) = hierarchy_prox(bp[j] + s.up[j], bm[j] + s.um[j], &mut row, tau_main, tau_inter);
                dual = dual.max((new_p - s.cp[j]).abs()).max((new_m - s.cm[j]).abs());
                s.up[j] += bp[j] - new_p;
                s.um[j] += bm[j] - new_m;
                primal = primal.max((bp[j] - new_p).abs()).max((bm[j] - new_m).abs());
                s.cp[j] = new_p;
                s.cm[j] = new_m;
                let mut c = 0;
                for k in 0..m {
                    if k != j {
                        let tv = pair_value(&t, j, k, m);
                        dual = dual.max((row[c] - s.psi[(j, k)]).abs());
                        s.upsi[(j, k)] += tv - row[c];
                        primal = primal.max((tv - row[c]).abs());
                        s.psi[(j, k)] = row[c];
                        c += 1;
                    }
                }
            }
            let dual = rho * dual;
            residual = primal.max(dual);
            if residual < opts.tolerance {
                converged = true;
                break;
            }
            // Residual balancing keeps both residuals falling together.
            if iterations % RHO_UPDATE_EVERY == 0 {
                if primal > RHO_BALANCE * dual {
                    s.rho *= 2.0;
                    s.rescale_duals(0.5);
                } else if dual > RHO_BALANCE * primal {
                    s.rho *= 0.5;
                    s.rescale_duals(2.0);
                }
            }
        }
        self.finish(lambda, main_lambda, s, iterations, converged, residual)
    }

    fn finish(
        &self,
        lambda: f64,
        main_lambda: f64,
        s: &State,
        iterations: usize,
        converged: bool,
        residual: f64,
    ) -> InteractionFit {
        let x = &self.view.x;
        let (n, m) = x.shape();
        // Symmetrize the feasible copy toward zero so the hierarchy still holds.
        let mut theta = DMatrix::zeros(m, m);
        for &(j, k) in &self.pairs {
            let (a, b) = (s.psi[(j, k)], s.psi[(k, j)]);
            let v = if a.signum() == b.signum() {
                a.signum() * a.abs().min(b.abs())
            } else {
                0.0
            };
            theta[(j, k)] = v;
            theta[(k, j)] = v;
        }
        let beta = &s.cp - &s.cm;
        let slack = DVector::from_fn(m, |j, _| {
            s.cp[j] + s.cm[j] - theta.row(j).iter().map(|v| v.abs()).sum::<f64>()
        });

        let mut fitted = x * &beta;
        for (p, &(j, k)) in self.pairs.iter().enumerate() {
            let v = theta[(j, k)];
            if v != 0.0 {
                fitted.axpy(v, &self.z.column(p), 1.0);
            }
        }
        let pair_l1: f64 = self.pairs.iter().map(|&(j, k)| theta[(j, k)].abs()).sum();
        let objective_value = (&self.view.y - fitted).norm_squared() / (2.0 * n as f64)
            + main_lambda * (s.cp.sum() + s.cm.sum())
            + lambda * pair_l1;

        InteractionFit {
            beta_plus: s.cp.clone(),
            beta_minus: s.cm.clone(),
            main_effects: beta,
            interactions: theta,
            hierarchy_slack: slack,
            objective_value,
            iterations,
            converged,
            max_residual: residual,
            possibly_nonunique: n < m + self.pairs.len(),
        }
    }
}

fn pair_value(t: &DVector<f64>, j: usize, k: usize, m: usize) -> f64 {
    let (a, b) = if j < k { (j, k) } else { (k, j) };
    // Index of (a, b) in row-major upper-triangular order.
    t[a * m - a * (a + 1) / 2 + (b - a - 1)]
}

/// Proximal map of `τ₁(c⁺ + c⁻) + τ‖φ‖₁` restricted to
/// `c± ≥ 0, ‖φ‖₁ ≤ c⁺ + c⁻`, evaluated at `(a, b, v)`. `v` is overwritten
/// with `φ`. The constraint multiplier α solves the monotone equation
/// `Σ max(|v_i| − τ − α, 0) = max(a − τ₁ + α, 0) + max(b − τ₁ + α, 0)`.
fn hierarchy_prox(a: f64, b: f64, v: &mut [f64], tau_main: f64, tau: f64) -> (f64, f64) {
    let gap = |alpha: f64| {
        let inter: f64 = v.iter().map(|x| (x.abs() - tau - alpha).max(0.0)).sum();
        inter - (a - tau_main + alpha).max(0.0) - (b - tau_main + alpha).max(0.0)
    };
    // gap is piecewise linear and decreasing; walk its breakpoints and
    // interpolate inside the bracketing segment.
    let alpha = if gap(0.0) <= 0.0 {
        0.0
    } else {
        let mut knots: Vec<f64> = v
            .iter()
            .map(|x| x.abs() - tau)
            .chain([tau_main - a, tau_main - b])
            .filter(|&k| k > 0.0)
            .collect();
        knots.sort_by(|x, y| x.total_cmp(y));
        let (mut lo, mut g_lo) = (0.0, gap(0.0));
        let mut root = None;
        for &k in &knots {
            let g = gap(k);
            if g <= 0.0 {
                root = Some(if g_lo == g {
                    k
                } else {
                    lo + g_lo * (k - lo) / (g_lo - g)
                });
                break;
            }
            lo = k;
            g_lo = g;
        }
        // Past the last knot every interaction is zero, so gap ≤ 0 there.
        root.unwrap_or(lo)
    };
    let cp = (a - tau_main + alpha).max(0.0);
    let cm = (b - tau_main + alpha).max(0.0);
    for x in v.iter_mut() {
        *x = soft_threshold(*x, tau + alpha);
    }
    // Guard against rounding in the sum pushing the row past its budget.
    let used: f64 = v.iter().map(|x| x.abs()).sum();
    if used > cp + cm && used > 0.0 {
        let s = (cp + cm) / used;
        v.iter_mut().for_each(|x| *x *= s);
    }
    (cp, cm)
}
