//! k-fold cross-validation over geometric λ grids.

use nalgebra::DVector;
use rand::SeedableRng;
use rand::seq::SliceRandom;
use rand_chacha::ChaCha8Rng;

use crate::data::ResponseView;
use crate::error::{Error, Result};
use crate::solvers::{self, Family, FitResult, PenaltySpec, SolverOptions};

#[derive(Debug, Clone, PartialEq)]
pub struct CvConfig {
    pub folds: usize,
    pub grid_size: usize,
    pub grid_min_ratio: f64,
    /// Size of the second grid for two-parameter families.
    pub secondary_grid_size: usize,
    pub seed: u64,
}

impl Default for CvConfig {
    fn default() -> Self {
        Self {
            folds: 10,
            grid_size: 50,
            grid_min_ratio: 1e-3,
            secondary_grid_size: 5,
            seed: 0,
        }
    }
}

impl CvConfig {
    fn validate(&self, n: usize) -> Result<()> {
        if self.folds < 2 {
            return Err(Error::invalid("need at least 2 folds"));
        }
        if self.grid_size == 0 || self.secondary_grid_size == 0 {
            return Err(Error::invalid("grid size must be positive"));
        }
        if !(self.grid_min_ratio > 0.0 && self.grid_min_ratio < 1.0) {
            return Err(Error::invalid("grid_min_ratio must lie in (0, 1)"));
        }
        if n / self.folds < 2 {
            return Err(Error::invalid(format!(
                "{n} samples in {} folds leaves a fold with fewer than 2 samples",
                self.folds
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CvPoint {
    pub lambda: f64,
    pub lambda2: Option<f64>,
    pub mean_mse: f64,
    pub sd_mse: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CvResult {
    pub best_lambda: f64,
    pub best_lambda2: Option<f64>,
    pub cv_curve: Vec<CvPoint>,
}

/// Geometric sequence from `top` down to `ratio · top`, strictly decreasing
/// when `top > 0`.
pub fn geometric_grid(top: f64, size: usize, ratio: f64) -> Vec<f64> {
    match size {
        0 => Vec::new(),
        1 => vec![top],
        _ => (0..size)
            .map(|i| top * ratio.powf(i as f64 / (size - 1) as f64))
            .collect(),
    }
}

/// λ grid for the lasso: `λ_max` down to `grid_min_ratio · λ_max`.
pub fn make_lambda_grid(view: &ResponseView, cfg: &CvConfig) -> Vec<f64> {
    geometric_grid(solvers::lambda_max(view), cfg.grid_size, cfg.grid_min_ratio)
}

/// Top of the primary λ grid for a penalty family.
pub fn primary_lambda_top(view: &ResponseView, spec: &PenaltySpec) -> f64 {
    match (spec.family, &spec.groups) {
        (Family::Group | Family::SparseGroup, Some(g)) => solvers::group_lambda_max(view, g),
        (Family::Hierarchical, _) => solvers::hierarchical_lambda_max(view),
        _ => solvers::lambda_max(view),
    }
}

/// Splits `0..n` into `folds` contiguous blocks of a seeded permutation.
pub fn fold_assignment(n: usize, folds: usize, seed: u64) -> Vec<Vec<usize>> {
    let mut perm: Vec<usize> = (0..n).collect();
    perm.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    (0..folds)
        .map(|f| perm[f * n / folds..(f + 1) * n / folds].to_vec())
        .collect()
}

/// Selects λ (and λ₂ for two-parameter families) by minimum mean held-out
/// MSE. `template` fixes the family and any group or order structure; its
/// λ values are ignored. Ties go to the larger λ, then the larger λ₂.
pub fn cross_validate(
    view: &ResponseView,
    template: &PenaltySpec,
    cfg: &CvConfig,
    opts: &SolverOptions,
) -> Result<CvResult> {
    let n = view.n_samples();
    cfg.validate(n)?;
    if template.family == Family::PairedGroup {
        return Err(Error::invalid("paired group lasso is selected jointly"));
    }
    let primary = geometric_grid(primary_lambda_top(view, template), cfg.grid_size, cfg.grid_min_ratio);
    let secondary: Vec<Option<f64>> = if template.family.has_lambda2() {
        geometric_grid(solvers::lambda_max(view), cfg.secondary_grid_size, cfg.grid_min_ratio)
            .into_iter()
            .map(Some)
            .collect()
    } else {
        vec![None]
    };

    let folds = fold_assignment(n, cfg.folds, cfg.seed);
    // mse[s][l][f]
    let mut mse = vec![vec![vec![0.0; folds.len()]; primary.len()]; secondary.len()];
    for (f, test) in folds.iter().enumerate() {
        let mut in_test = vec![false; n];
        test.iter().for_each(|&i| in_test[i] = true);
        let train: Vec<usize> = (0..n).filter(|&i| !in_test[i]).collect();
        let train_view = view.select_samples(&train);
        let test_view = view.select_samples(test);
        if template.family == Family::Hierarchical {
            let path = solvers::hierarchical_path(&train_view, &primary, opts)?;
            for (l, fit) in path.into_iter().enumerate() {
                mse[0][l][f] = held_out_mse(&test_view, &fit.into_fit_result());
            }
            continue;
        }
        for (s, &l2) in secondary.iter().enumerate() {
            let mut warm: Option<DVector<f64>> = None;
            for (l, &lam) in primary.iter().enumerate() {
                let spec = PenaltySpec {
                    lambda: lam,
                    lambda2: l2,
                    ..template.clone()
                };
                let fit = solvers::fit_warm(&train_view, &spec, opts, warm.as_ref())?;
                mse[s][l][f] = held_out_mse(&test_view, &fit);
                warm = Some(fit.coefficients);
            }
        }
    }

    let mut cv_curve = Vec::with_capacity(primary.len() * secondary.len());
    let mut best: Option<(f64, f64, Option<f64>)> = None;
    // Larger λ₂ first, then larger λ, so strict improvement keeps ties sparse.
    for (s, &l2) in secondary.iter().enumerate() {
        for (l, &lam) in primary.iter().enumerate() {
            let values = &mse[s][l];
            let k = values.len() as f64;
            let mean = values.iter().sum::<f64>() / k;
            let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (k - 1.0);
            cv_curve.push(CvPoint {
                lambda: lam,
                lambda2: l2,
                mean_mse: mean,
                sd_mse: var.sqrt(),
            });
            let better = match best {
                None => true,
                Some((m, bl, _)) => mean < m || (mean == m && lam > bl),
            };
            if better {
                best = Some((mean, lam, l2));
            }
        }
    }
    let (_, best_lambda, best_lambda2) = best.expect("non-empty grid");
    Ok(CvResult {
        best_lambda,
        best_lambda2,
        cv_curve,
    })
}

fn held_out_mse(test: &ResponseView, fit: &FitResult) -> f64 {
    (&test.y - &test.x * &fit.coefficients).norm_squared() / test.n_samples() as f64
}
