//! Penalized least-squares solvers.
//!
//! Every solver minimizes `(1/(2n))‖y − Xθ‖² + P(θ)` over a [`ResponseView`].
//! Relative to the unscaled `(1/n)` loss often written in the literature the
//! penalty parameter maps as `λ_literature = 2·λ`.

mod coordinate;
mod fused;
mod group;
mod hierarchical;
mod paired;
pub mod tv;

use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};

use crate::data::ResponseView;
use crate::error::{Error, Result};
use crate::grouping::GroupAssignment;

pub use coordinate::{ridge_closed_form, solve_elastic_net, solve_lasso, solve_ridge};
pub use fused::solve_fused;
pub use group::{group_lambda_max, solve_group, solve_sparse_group};
pub use hierarchical::{
    InteractionFit, hierarchical_lambda_max, hierarchical_path, solve_hierarchical, solve_hierarchical_view,
};
pub use paired::{PairedFit, paired_lambda_max, solve_paired_group};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Family {
    Lasso,
    Ridge,
    ElasticNet,
    Fused,
    Group,
    SparseGroup,
    PairedGroup,
    Hierarchical,
}

impl Family {
    pub const ALL: [Family; 8] = [
        Family::Lasso,
        Family::Ridge,
        Family::ElasticNet,
        Family::Fused,
        Family::Group,
        Family::SparseGroup,
        Family::PairedGroup,
        Family::Hierarchical,
    ];

    /// Families with a second penalty parameter.
    pub fn has_lambda2(self) -> bool {
        matches!(self, Family::ElasticNet | Family::Fused | Family::SparseGroup)
    }

    pub fn needs_groups(self) -> bool {
        matches!(self, Family::Group | Family::SparseGroup)
    }

    pub fn name(self) -> &'static str {
        match self {
            Family::Lasso => "lasso",
            Family::Ridge => "ridge",
            Family::ElasticNet => "enet",
            Family::Fused => "fused",
            Family::Group => "group",
            Family::SparseGroup => "sgroup",
            Family::PairedGroup => "paired",
            Family::Hierarchical => "hier",
        }
    }
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Family {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Family::ALL
            .into_iter()
            .find(|f| f.name() == s)
            .ok_or_else(|| Error::invalid(format!("unknown penalty `{s}`")))
    }
}

/// A penalty family together with its hyperparameters.
///
/// `lambda` is the primary parameter (the L1 weight for lasso and elastic
/// net, the group weight for group penalties). `lambda2` is the ridge weight
/// for elastic net, the fusion weight for fused lasso and the L1 weight for
/// sparse group lasso.
#[derive(Debug, Clone, PartialEq)]
pub struct PenaltySpec {
    pub family: Family,
    pub lambda: f64,
    pub lambda2: Option<f64>,
    pub groups: Option<GroupAssignment>,
    /// Chain order for fused lasso; identity when absent.
    pub order: Option<Vec<usize>>,
}

impl PenaltySpec {
    pub fn new(family: Family, lambda: f64) -> Self {
        Self {
            family,
            lambda,
            lambda2: None,
            groups: None,
            order: None,
        }
    }

    pub fn with_lambda2(mut self, lambda2: f64) -> Self {
        self.lambda2 = Some(lambda2);
        self
    }

    pub fn with_groups(mut self, groups: GroupAssignment) -> Self {
        self.groups = Some(groups);
        self
    }

    pub fn with_order(mut self, order: Vec<usize>) -> Self {
        self.order = Some(order);
        self
    }

    pub fn validate(&self, n_predictors: usize) -> Result<()> {
        check_lambda(self.lambda)?;
        match (self.family.has_lambda2(), self.lambda2) {
            (true, None) => {
                return Err(Error::invalid(format!("{} needs lambda2", self.family)));
            }
            (false, Some(_)) => {
                return Err(Error::invalid(format!("{} takes no lambda2", self.family)));
            }
            (_, Some(l2)) => check_lambda(l2)?,
            _ => {}
        }
        match (self.family.needs_groups(), &self.groups) {
            (true, None) => return Err(Error::invalid(format!("{} needs groups", self.family))),
            (false, Some(_)) => {
                return Err(Error::invalid(format!("{} takes no groups", self.family)));
            }
            (true, Some(g)) if g.len() != n_predictors => {
                return Err(Error::invalid(format!(
                    "groups cover {} predictors, expected {n_predictors}",
                    g.len()
                )));
            }
            _ => {}
        }
        if let Some(order) = &self.order {
            check_permutation(order, n_predictors)?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolverOptions {
    /// Stop when the largest coefficient change over a sweep (or the ADMM
    /// residuals) falls below this.
    pub tolerance: f64,
    pub max_iterations: usize,
    pub kkt_tolerance: f64,
    /// Augmented-Lagrangian penalty for the ADMM solvers.
    pub admm_rho: f64,
    /// Main-effect penalty for the hierarchical solver; `lambda` when absent.
    pub hierarchical_main_lambda: Option<f64>,
    /// Maximum number of interaction features the hierarchical solver accepts.
    pub interaction_budget: usize,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            tolerance: 1e-6,
            max_iterations: 100_000,
            kkt_tolerance: 1e-4,
            admm_rho: 1.0,
            hierarchical_main_lambda: None,
            interaction_budget: 200_000,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FitResult {
    /// One coefficient per predictor column, on the standardized scale.
    pub coefficients: DVector<f64>,
    pub objective_value: f64,
    pub iterations: usize,
    pub converged: bool,
    /// Largest optimality-condition violation (coordinate-descent solvers) or
    /// largest primal/dual residual (ADMM solvers) at termination.
    pub max_kkt_violation: f64,
    /// Set when there are more predictors than samples, where the minimizer
    /// need not be unique.
    pub possibly_nonunique: bool,
}

/// Fits any single-response family on a view. Paired group lasso is joint
/// over all genes and is not available here.
pub fn fit(view: &ResponseView, spec: &PenaltySpec, opts: &SolverOptions) -> Result<FitResult> {
    fit_warm(view, spec, opts, None)
}

/// Like [`fit`], starting from `init` where the solver supports it.
pub fn fit_warm(
    view: &ResponseView,
    spec: &PenaltySpec,
    opts: &SolverOptions,
    init: Option<&DVector<f64>>,
) -> Result<FitResult> {
    let m = view.n_predictors();
    spec.validate(m)?;
    let l2 = spec.lambda2.unwrap_or(0.0);
    match spec.family {
        Family::Lasso => Ok(coordinate::descend(view, spec.lambda, 0.0, opts, init)),
        Family::Ridge => Ok(coordinate::descend(view, 0.0, spec.lambda, opts, init)),
        Family::ElasticNet => Ok(coordinate::descend(view, spec.lambda, l2, opts, init)),
        Family::Fused => {
            let identity: Vec<usize>;
            let order = match &spec.order {
                Some(o) => o.as_slice(),
                None => {
                    identity = (0..m).collect();
                    &identity
                }
            };
            fused::solve_fused_from(view, spec.lambda, l2, order, opts, init)
        }
        Family::Group => group::solve_group_from(view, spec.lambda, 0.0, spec.groups.as_ref().unwrap(), opts, init),
        Family::SparseGroup => {
            group::solve_group_from(view, spec.lambda, l2, spec.groups.as_ref().unwrap(), opts, init)
        }
        Family::Hierarchical => solve_hierarchical_view(view, spec.lambda, opts).map(|fit| fit.into_fit_result()),
        Family::PairedGroup => Err(Error::invalid(
            "paired group lasso is fit jointly over all genes; use solve_paired_group",
        )),
    }
}

/// Smallest λ at which the lasso solution is identically zero:
/// `max_j |x_jᵀy| / n`.
pub fn lambda_max(view: &ResponseView) -> f64 {
    let n = view.n_samples() as f64;
    view.x
        .column_iter()
        .map(|c| c.dot(&view.y).abs() / n)
        .fold(0.0, f64::max)
}

/// Number of unordered predictor pairs, `p(p−1)/2`.
pub fn count_pairwise_interactions(p: u64) -> u64 {
    if p < 2 { 0 } else { p * (p - 1) / 2 }
}

pub fn soft_threshold(z: f64, t: f64) -> f64 {
    if z > t {
        z - t
    } else if z < -t {
        z + t
    } else {
        0.0
    }
}

fn check_lambda(l: f64) -> Result<()> {
    if l.is_finite() && l >= 0.0 {
        Ok(())
    } else {
        Err(Error::invalid(format!("penalty {l} must be finite and nonnegative")))
    }
}

pub(crate) fn check_permutation(order: &[usize], m: usize) -> Result<()> {
    if order.len() != m {
        return Err(Error::invalid(format!(
            "order has {} entries, expected {m}",
            order.len()
        )));
    }
    let mut seen = vec![false; m];
    for &i in order {
        if i >= m || std::mem::replace(&mut seen[i], true) {
            return Err(Error::invalid("order is not a permutation"));
        }
    }
    Ok(())
}

/// `‖y − Xθ‖² / (2n)`.
pub(crate) fn half_mse(x: &DMatrix<f64>, y: &DVector<f64>, theta: &DVector<f64>) -> f64 {
    (y - x * theta).norm_squared() / (2.0 * y.len() as f64)
}
