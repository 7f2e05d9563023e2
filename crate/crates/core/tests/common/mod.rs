//! Independent reference objectives and a derivative-free minimizer.
#![allow(dead_code)]

use grnlasso::ResponseView;
use grnlasso::nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

/// Gaussian design with `y = Xβ + ε`, `β_j ~ U[-1, 1]`, `ε ~ N(0, 0.25)`.
pub fn random_view(seed: u64, n: usize, m: usize) -> ResponseView {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let x = DMatrix::from_fn(n, m, |_, _| StandardNormal.sample(&mut rng));
    let beta = DVector::from_fn(m, |_, _| rng.random_range(-1.0..1.0));
    let noise = DVector::from_fn(n, |_, _| {
        0.5 * <StandardNormal as Distribution<f64>>::sample(&StandardNormal, &mut rng)
    });
    let y = &x * beta + noise;
    ResponseView::from_parts(x, y).unwrap()
}

pub fn half_mse(view: &ResponseView, theta: &[f64]) -> f64 {
    let n = view.y.len();
    let mut total = 0.0;
    for i in 0..n {
        let mut r = view.y[i];
        for (j, t) in theta.iter().enumerate() {
            r -= view.x[(i, j)] * t;
        }
        total += r * r;
    }
    total / (2.0 * n as f64)
}

pub fn l1(theta: &[f64]) -> f64 {
    theta.iter().map(|t| t.abs()).sum()
}

pub fn sq(theta: &[f64]) -> f64 {
    theta.iter().map(|t| t * t).sum()
}

pub fn lasso(view: &ResponseView, lambda: f64, t: &[f64]) -> f64 {
    half_mse(view, t) + lambda * l1(t)
}

pub fn ridge(view: &ResponseView, lambda: f64, t: &[f64]) -> f64 {
    half_mse(view, t) + 0.5 * lambda * sq(t)
}

pub fn elastic_net(view: &ResponseView, l1w: f64, l2w: f64, t: &[f64]) -> f64 {
    half_mse(view, t) + l1w * l1(t) + 0.5 * l2w * sq(t)
}

pub fn fused(view: &ResponseView, l1w: f64, l2w: f64, order: &[usize], t: &[f64]) -> f64 {
    let tv: f64 = order.windows(2).map(|w| (t[w[1]] - t[w[0]]).abs()).sum();
    half_mse(view, t) + l1w * l1(t) + l2w * tv
}

pub fn group_penalty(labels: &[usize], t: &[f64]) -> f64 {
    let k = labels.iter().max().map_or(0, |m| m + 1);
    (0..k)
        .map(|g| {
            let members: Vec<f64> = labels
                .iter()
                .zip(t)
                .filter(|(l, _)| **l == g)
                .map(|(_, v)| *v)
                .collect();
            (members.len() as f64).sqrt() * sq(&members).sqrt()
        })
        .sum()
}

pub fn sparse_group(view: &ResponseView, l1w: f64, l2w: f64, labels: &[usize], t: &[f64]) -> f64 {
    half_mse(view, t) + l1w * group_penalty(labels, t) + l2w * l1(t)
}

/// Paired objective on `p = 2` genes; `t = [Θ_12, Θ_21]`.
pub fn paired_two(x: &DMatrix<f64>, lambda: f64, t: &[f64]) -> f64 {
    let n = x.nrows();
    let mut loss = 0.0;
    for i in 0..n {
        let r2 = x[(i, 1)] - t[0] * x[(i, 0)];
        let r1 = x[(i, 0)] - t[1] * x[(i, 1)];
        loss += r1 * r1 + r2 * r2;
    }
    loss / (2.0 * n as f64) + lambda * t[0].hypot(t[1])
}

/// Hierarchical objective on two predictors in reduced form:
/// `t = [β_1, β_2, θ_12]`, main penalty `λ₁ Σ max(|β_j|, ‖Θ_j‖₁)`.
pub fn hierarchical_two(view: &ResponseView, main: f64, lambda: f64, t: &[f64]) -> f64 {
    let n = view.y.len();
    let mut loss = 0.0;
    for i in 0..n {
        let (a, b) = (view.x[(i, 0)], view.x[(i, 1)]);
        let r = view.y[i] - t[0] * a - t[1] * b - t[2] * a * b;
        loss += r * r;
    }
    loss / (2.0 * n as f64) + main * (t[0].abs().max(t[2].abs()) + t[1].abs().max(t[2].abs())) + lambda * t[2].abs()
}

fn directions(d: usize) -> Vec<Vec<f64>> {
    let mut out = Vec::new();
    for code in 0..3usize.pow(d as u32) {
        let mut c = code;
        let v: Vec<f64> = (0..d)
            .map(|_| {
                let digit = c % 3;
                c /= 3;
                digit as f64 - 1.0
            })
            .collect();
        if v.iter().any(|&x| x != 0.0) {
            out.push(v);
        }
    }
    out
}

fn pattern_search(f: &dyn Fn(&[f64]) -> f64, start: Vec<f64>, dirs: &[Vec<f64>]) -> (Vec<f64>, f64) {
    let mut x = start;
    let mut fx = f(&x);
    let mut step = 0.5;
    let mut trial = x.clone();
    while step > 1e-11 {
        let mut improved = false;
        for d in dirs {
            for (k, v) in trial.iter_mut().enumerate() {
                *v = x[k] + step * d[k];
            }
            let ft = f(&trial);
            if ft < fx {
                x.copy_from_slice(&trial);
                fx = ft;
                improved = true;
            }
        }
        if !improved {
            step *= 0.5;
        }
    }
    (x, fx)
}

/// Global minimum of a convex function of `d ≤ 4` scalars on
/// `[-radius, radius]^d`: grid scan, then pattern search over all `3^d − 1`
/// compass and diagonal directions from the best grid points.
pub fn minimize(f: &dyn Fn(&[f64]) -> f64, d: usize, radius: f64) -> (Vec<f64>, f64) {
    let per_axis = 13usize;
    let coord = |i: usize| -radius + 2.0 * radius * i as f64 / (per_axis - 1) as f64;
    let mut scored: Vec<(f64, Vec<f64>)> = Vec::new();
    for code in 0..per_axis.pow(d as u32) {
        let mut c = code;
        let p: Vec<f64> = (0..d)
            .map(|_| {
                let i = c % per_axis;
                c /= per_axis;
                coord(i)
            })
            .collect();
        scored.push((f(&p), p));
    }
    scored.sort_by(|a, b| a.0.total_cmp(&b.0));
    let dirs = directions(d);
    let mut starts: Vec<Vec<f64>> = scored.into_iter().take(4).map(|(_, p)| p).collect();
    starts.push(vec![0.0; d]);
    starts
        .into_iter()
        .map(|s| pattern_search(f, s, &dirs))
        .min_by(|a, b| a.1.total_cmp(&b.1))
        .unwrap()
}

pub fn tight() -> grnlasso::SolverOptions {
    grnlasso::SolverOptions {
        tolerance: 1e-11,
        max_iterations: 1_000_000,
        ..Default::default()
    }
}

/// One seeded small problem of the given family solved both ways.
#[derive(Debug)]
pub struct OracleCheck {
    pub family: grnlasso::Family,
    pub seed: u64,
    /// Independent objective at the solver's coefficients.
    pub solver: f64,
    /// The solver's own reported objective.
    pub reported: f64,
    pub oracle: f64,
    pub converged: bool,
    pub kkt: f64,
}

impl OracleCheck {
    pub fn gap(&self) -> f64 {
        (self.solver - self.oracle)
            .abs()
            .max((self.reported - self.solver).abs())
    }
}

fn random_order(rng: &mut ChaCha8Rng, m: usize) -> Vec<usize> {
    use rand::seq::SliceRandom;
    let mut order: Vec<usize> = (0..m).collect();
    order.shuffle(rng);
    order
}

type Objective = Box<dyn Fn(&[f64]) -> f64>;

pub fn oracle_check(family: grnlasso::Family, seed: u64) -> OracleCheck {
    use grnlasso::Family;
    use grnlasso::grouping::GroupAssignment;
    use grnlasso::solvers;

    let opts = tight();
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x05ee_d0f0_ac1e);
    let frac = rng.random_range(0.05..0.8);
    let second = rng.random_range(0.05..0.8);
    let m = match family {
        Family::Hierarchical | Family::PairedGroup => 2,
        Family::Group | Family::SparseGroup => 4,
        _ => rng.random_range(2..=4),
    };
    let view = random_view(seed, 20, m);
    let top = solvers::lambda_max(&view);
    let labels = vec![0, 0, 1, 1];

    let (theta, reported, converged, kkt, f): (Vec<f64>, f64, bool, f64, Objective) = match family {
        Family::Lasso => {
            let l = frac * top;
            let fit = solvers::solve_lasso(&view, l, &opts).unwrap();
            let v = view.clone();
            (
                fit.coefficients.as_slice().to_vec(),
                fit.objective_value,
                fit.converged,
                fit.max_kkt_violation,
                Box::new(move |t| lasso(&v, l, t)),
            )
        }
        Family::Ridge => {
            let l = frac * top;
            let fit = solvers::solve_ridge(&view, l, &opts).unwrap();
            let v = view.clone();
            (
                fit.coefficients.as_slice().to_vec(),
                fit.objective_value,
                fit.converged,
                fit.max_kkt_violation,
                Box::new(move |t| ridge(&v, l, t)),
            )
        }
        Family::ElasticNet => {
            let (a, b) = (frac * top, second);
            let fit = solvers::solve_elastic_net(&view, a, b, &opts).unwrap();
            let v = view.clone();
            (
                fit.coefficients.as_slice().to_vec(),
                fit.objective_value,
                fit.converged,
                fit.max_kkt_violation,
                Box::new(move |t| elastic_net(&v, a, b, t)),
            )
        }
        Family::Fused => {
            let (a, b) = (frac * top, second * top);
            let order = random_order(&mut rng, m);
            let fit = solvers::solve_fused(&view, a, b, &order, &opts).unwrap();
            let v = view.clone();
            (
                fit.coefficients.as_slice().to_vec(),
                fit.objective_value,
                fit.converged,
                fit.max_kkt_violation,
                Box::new(move |t| fused(&v, a, b, &order, t)),
            )
        }
        Family::Group => {
            let g = GroupAssignment::new(labels.clone()).unwrap();
            let l = frac * solvers::group_lambda_max(&view, &g);
            let fit = solvers::solve_group(&view, l, &g, &opts).unwrap();
            let v = view.clone();
            (
                fit.coefficients.as_slice().to_vec(),
                fit.objective_value,
                fit.converged,
                fit.max_kkt_violation,
                Box::new(move |t| sparse_group(&v, l, 0.0, &labels, t)),
            )
        }
        Family::SparseGroup => {
            let g = GroupAssignment::new(labels.clone()).unwrap();
            let (a, b) = (frac * solvers::group_lambda_max(&view, &g), second * top);
            let fit = solvers::solve_sparse_group(&view, a, b, &g, &opts).unwrap();
            let v = view.clone();
            (
                fit.coefficients.as_slice().to_vec(),
                fit.objective_value,
                fit.converged,
                fit.max_kkt_violation,
                Box::new(move |t| sparse_group(&v, a, b, &labels, t)),
            )
        }
        Family::PairedGroup => {
            let mut x = view.x.clone();
            let mixed = x.column(0) * 0.6 + x.column(1) * 0.8;
            x.set_column(1, &mixed);
            let data = grnlasso::ExpressionMatrix::from_values(x.clone()).unwrap();
            let l = frac * solvers::paired_lambda_max(&data);
            let fit = solvers::solve_paired_group(&data, l, &opts).unwrap();
            let t = vec![fit.matrix[(0, 1)], fit.matrix[(1, 0)]];
            (
                t,
                fit.objective_value,
                fit.converged,
                0.0,
                Box::new(move |t| paired_two(&x, l, t)),
            )
        }
        Family::Hierarchical => {
            let l = frac * solvers::hierarchical_lambda_max(&view);
            let fit = solvers::solve_hierarchical_view(&view, l, &opts).unwrap();
            let t = vec![fit.main_effects[0], fit.main_effects[1], fit.interactions[(0, 1)]];
            let v = view.clone();
            (
                t,
                fit.objective_value,
                fit.converged,
                fit.max_residual,
                Box::new(move |t| hierarchical_two(&v, l, l, t)),
            )
        }
    };
    let (_, oracle) = minimize(&*f, theta.len(), 5.0);
    OracleCheck {
        family,
        seed,
        solver: f(&theta),
        reported,
        oracle,
        converged,
        kkt,
    }
}

/// Published benchmark rows: label, `[TP, FP, TN, FN]` and the printed
/// `[MCC, TPR, FPR, ACC]` strings (`None` where not checked).
pub type PublishedRow = (&'static str, [u64; 4], [Option<&'static str>; 4]);

pub const PUBLISHED_ROWS: &[PublishedRow] = &[
    (
        "hier@15",
        [3, 21, 191, 10],
        [Some("0.099"), Some("0.23"), Some("0.09"), Some("0.86")],
    ),
    (
        "labnet@15",
        [4, 20, 192, 9],
        [Some("0.16"), Some("0.31"), Some("0.09"), Some("0.87")],
    ),
    (
        "enetperm@15",
        [2, 22, 190, 11],
        [Some("0.037"), Some("0.15"), Some("0.10"), Some("0.85")],
    ),
    ("ridgeperm@15", [0, 0, 212, 13], [Some("NA"), None, None, Some("0.94")]),
    (
        "hier@50",
        [21, 203, 2249, 27],
        [Some("0.170"), Some("0.4375"), None, Some("0.908")],
    ),
];

/// Whether `value` agrees with `printed` to within one unit in its last
/// printed decimal place.
pub fn agrees_with_printed(value: Option<f64>, printed: &str) -> bool {
    match (value, printed) {
        (None, "NA") => true,
        (None, _) | (Some(_), "NA") => false,
        (Some(v), text) => {
            let decimals = text.split('.').nth(1).map_or(0, str::len);
            let target: f64 = text.parse().unwrap();
            (v - target).abs() < 10f64.powi(-(decimals as i32))
        }
    }
}

/// Checks one published row; returns the mismatching column names.
pub fn published_row_mismatches(counts: [u64; 4], printed: [Option<&str>; 4]) -> Vec<&'static str> {
    use grnlasso::evaluation::{ConfusionCounts, compute_metrics};
    let [tp, fp, tn, fn_] = counts;
    let r = compute_metrics(ConfusionCounts { tp, fp, tn, fn_ }, 0.0);
    let values = [r.mcc, Some(r.tpr), Some(r.fpr), Some(r.acc)];
    ["MCC", "TPR", "FPR", "ACC"]
        .into_iter()
        .zip(values.into_iter().zip(printed))
        .filter_map(|(name, (v, p))| match p {
            Some(p) if !agrees_with_printed(v, p) => Some(name),
            _ => None,
        })
        .collect()
}
