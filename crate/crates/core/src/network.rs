//! Node-wise network inference, edge filtering and permutation stability.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::path::Path;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand::seq::SliceRandom;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::data::{ExpressionMatrix, ResponseView};
use crate::error::{Error, Result};
use crate::grouping::{self, GroupAssignment, Linkage};
use crate::model_selection::{self, CvConfig};
use crate::solvers::{self, Family, FitResult, PenaltySpec, SolverOptions};

/// Dense square boolean adjacency, row = source, column = target.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Adjacency {
    p: usize,
    cells: Vec<bool>,
}

impl Adjacency {
    pub fn empty(p: usize) -> Self {
        Self {
            p,
            cells: vec![false; p * p],
        }
    }

    pub fn size(&self) -> usize {
        self.p
    }

    pub fn get(&self, i: usize, j: usize) -> bool {
        self.cells[i * self.p + j]
    }

    pub fn set(&mut self, i: usize, j: usize, value: bool) {
        self.cells[i * self.p + j] = value;
    }

    pub fn count(&self) -> usize {
        self.cells.iter().filter(|&&c| c).count()
    }

    pub fn edges(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        (0..self.p).flat_map(move |i| (0..self.p).filter(move |&j| self.get(i, j)).map(move |j| (i, j)))
    }

    pub fn is_symmetric(&self) -> bool {
        self.edges().all(|(i, j)| self.get(j, i))
    }
}

/// Entry `(i, j)` is the coefficient of gene `i` in the regression of gene
/// `j`. The diagonal is zero.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightedNetwork {
    pub weights: DMatrix<f64>,
    pub gene_names: Vec<String>,
}

impl WeightedNetwork {
    pub fn n_genes(&self) -> usize {
        self.gene_names.len()
    }

    pub fn support(&self) -> Adjacency {
        let p = self.n_genes();
        let mut adj = Adjacency::empty(p);
        for i in 0..p {
            for j in 0..p {
                if i != j && self.weights[(i, j)] != 0.0 {
                    adj.set(i, j, true);
                }
            }
        }
        adj
    }

    /// Edge list of nonzero weights, preceded by a `#genes` line.
    pub fn to_tsv(&self) -> String {
        let mut out = genes_line(&self.gene_names);
        let p = self.n_genes();
        for i in 0..p {
            for j in 0..p {
                let w = self.weights[(i, j)];
                if i != j && w != 0.0 {
                    writeln!(out, "{}\t{}\t{w:.16e}", self.gene_names[i], self.gene_names[j]).unwrap();
                }
            }
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BinaryNetwork {
    pub edges: Adjacency,
    pub directed: bool,
    pub gene_names: Vec<String>,
}

impl BinaryNetwork {
    pub fn n_genes(&self) -> usize {
        self.gene_names.len()
    }

    pub fn n_edges(&self) -> usize {
        self.edges.count()
    }

    /// Edge list without weights; undirected networks list each edge once.
    pub fn to_tsv(&self) -> String {
        let mut out = genes_line(&self.gene_names);
        for (i, j) in self.edges.edges() {
            if self.directed || i < j {
                writeln!(out, "{}\t{}", self.gene_names[i], self.gene_names[j]).unwrap();
            }
        }
        out
    }

    /// Reads an edge list with two or three columns; a nonzero third column
    /// (or its absence) marks an edge. The gene set comes from a `#genes`
    /// line when present, otherwise from the edge endpoints in order of
    /// appearance.
    pub fn parse_tsv(text: &str) -> Result<BinaryNetwork> {
        let mut names: Vec<String> = Vec::new();
        let mut index: HashMap<String, usize> = HashMap::new();
        let mut declared = false;
        let mut pairs = Vec::new();
        for (ln, line) in text.lines().enumerate() {
            let line = line.trim_end_matches('\r');
            if line.trim().is_empty() {
                continue;
            }
            if let Some(rest) = line.strip_prefix("#genes") {
                declared = true;
                for name in rest.split('\t').map(str::trim).filter(|s| !s.is_empty()) {
                    if index.insert(name.to_string(), names.len()).is_some() {
                        return Err(Error::DuplicateGene(name.to_string()));
                    }
                    names.push(name.to_string());
                }
                continue;
            }
            if line.starts_with('#') {
                continue;
            }
            let cells: Vec<&str> = line.split('\t').map(str::trim).collect();
            if !(2..=3).contains(&cells.len()) {
                return Err(Error::Parse {
                    line: ln + 1,
                    column: 1,
                    message: format!("expected 2 or 3 columns, found {}", cells.len()),
                });
            }
            let present = match cells.get(2) {
                None => true,
                Some(w) => {
                    w.parse::<f64>().map_err(|_| Error::Parse {
                        line: ln + 1,
                        column: 3,
                        message: format!("`{w}` is not a number"),
                    })? != 0.0
                }
            };
            for name in &cells[..2] {
                if !index.contains_key(*name) {
                    if declared {
                        return Err(Error::GeneMismatch(name.to_string()));
                    }
                    index.insert(name.to_string(), names.len());
                    names.push(name.to_string());
                }
            }
            if present {
                pairs.push((index[cells[0]], index[cells[1]], ln + 1));
            }
        }
        let mut edges = Adjacency::empty(names.len());
        for (i, j, ln) in pairs {
            if i == j {
                return Err(Error::Parse {
                    line: ln,
                    column: 1,
                    message: "self-edge".into(),
                });
            }
            edges.set(i, j, true);
        }
        Ok(BinaryNetwork {
            directed: !edges.is_symmetric() || edges.count() == 0,
            edges,
            gene_names: names,
        })
    }

    pub fn load(path: impl AsRef<Path>) -> Result<BinaryNetwork> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse_tsv(&text)
    }
}

fn genes_line(names: &[String]) -> String {
    let mut out = String::from("#genes");
    for n in names {
        out.push('\t');
        out.push_str(n);
    }
    out.push('\n');
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Symmetrize {
    And,
    Or,
    #[default]
    None,
}

impl FromStr for Symmetrize {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "and" => Ok(Symmetrize::And),
            "or" => Ok(Symmetrize::Or),
            "none" => Ok(Symmetrize::None),
            other => Err(Error::invalid(format!("unknown symmetrization rule `{other}`"))),
        }
    }
}

/// Everything needed to run node-wise inference for one penalty family.
#[derive(Debug, Clone, PartialEq)]
pub struct InferenceConfig {
    pub family: Family,
    pub cv: CvConfig,
    pub solver: SolverOptions,
    /// Cluster count for group and sparse group lasso.
    pub group_k: usize,
    /// Cluster count for the fused-lasso ordering.
    pub fused_k: usize,
    pub linkage: Linkage,
    /// Cluster all genes once instead of the predictors of each response.
    pub global_clustering: bool,
    /// Skip cross-validation and use these penalties.
    pub fixed_lambda: Option<(f64, Option<f64>)>,
}

impl InferenceConfig {
    pub fn new(family: Family) -> Self {
        Self {
            family,
            cv: CvConfig::default(),
            solver: SolverOptions::default(),
            group_k: 3,
            fused_k: 10,
            linkage: Linkage::Average,
            global_clustering: false,
            fixed_lambda: None,
        }
    }
}

/// Per-response diagnostics.
#[derive(Debug, Clone, PartialEq)]
pub struct GeneFit {
    pub lambda: f64,
    pub lambda2: Option<f64>,
    pub converged: bool,
    pub iterations: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Inference {
    pub network: WeightedNetwork,
    pub genes: Vec<GeneFit>,
}

/// Regresses every gene on all others and collects the coefficients.
pub fn infer_network(m: &ExpressionMatrix, cfg: &InferenceConfig) -> Result<Inference> {
    if cfg.family == Family::PairedGroup {
        return Err(Error::invalid("use infer_paired for paired group lasso"));
    }
    let m = m.standardize();
    let global = global_groups(&m, cfg)?;
    let fits: Vec<(ResponseView, FitResult, GeneFit)> = (0..m.n_genes())
        .into_par_iter()
        .map(|a| fit_gene(&m, a, cfg, global.as_ref()))
        .collect::<Result<_>>()?;
    let (network, genes) = assemble(&m, fits.iter().map(|(v, f, g)| (v, &f.coefficients, g.clone())));
    Ok(Inference { network, genes })
}

fn assemble<'a>(
    m: &ExpressionMatrix,
    columns: impl Iterator<Item = (&'a ResponseView, &'a DVector<f64>, GeneFit)>,
) -> (WeightedNetwork, Vec<GeneFit>) {
    let p = m.n_genes();
    let mut weights = DMatrix::zeros(p, p);
    let mut genes = Vec::with_capacity(p);
    for (view, coef, diag) in columns {
        for (k, &gene) in view.predictors.iter().enumerate() {
            weights[(gene, view.response_index)] = coef[k];
        }
        genes.push(diag);
    }
    (
        WeightedNetwork {
            weights,
            gene_names: m.gene_names().to_vec(),
        },
        genes,
    )
}

fn global_groups(m: &ExpressionMatrix, cfg: &InferenceConfig) -> Result<Option<GroupAssignment>> {
    let k = match cfg.family {
        Family::Group | Family::SparseGroup => cfg.group_k,
        Family::Fused => cfg.fused_k,
        _ => return Ok(None),
    };
    if !cfg.global_clustering {
        return Ok(None);
    }
    let c = grouping::correlation_matrix(m.values());
    grouping::cluster_predictors(&c, k.clamp(1, m.n_genes()), cfg.linkage).map(Some)
}

/// Family template for one response: groups or chain order where needed.
fn structure_for(view: &ResponseView, cfg: &InferenceConfig, global: Option<&GroupAssignment>) -> Result<PenaltySpec> {
    let mut spec = PenaltySpec::new(cfg.family, 0.0);
    if cfg.family.has_lambda2() {
        spec.lambda2 = Some(0.0);
    }
    let k = match cfg.family {
        Family::Group | Family::SparseGroup => cfg.group_k,
        Family::Fused => cfg.fused_k,
        _ => return Ok(spec),
    };
    let groups = match global {
        Some(g) => {
            // Restrict the global labels to this response's predictors and
            // renumber by first appearance.
            let mut relabel = HashMap::new();
            let labels = view
                .predictors
                .iter()
                .map(|&gene| {
                    let next = relabel.len();
                    *relabel.entry(g.labels()[gene]).or_insert(next)
                })
                .collect();
            GroupAssignment::new(labels)?
        }
        None => {
            let c = grouping::correlation_matrix(&view.x);
            grouping::cluster_predictors(&c, k.clamp(1, view.n_predictors()), cfg.linkage)?
        }
    };
    if cfg.family == Family::Fused {
        spec.order = Some(grouping::order_predictors(&groups));
    } else {
        spec.groups = Some(groups);
    }
    Ok(spec)
}

fn choose_penalty(view: &ResponseView, template: &PenaltySpec, cfg: &InferenceConfig) -> Result<PenaltySpec> {
    let (lambda, lambda2) = match cfg.fixed_lambda {
        Some((l, l2)) => (
            l,
            if cfg.family.has_lambda2() {
                Some(l2.unwrap_or(0.0))
            } else {
                None
            },
        ),
        None => {
            let cv = model_selection::cross_validate(view, template, &cfg.cv, &cfg.solver)?;
            (cv.best_lambda, cv.best_lambda2)
        }
    };
    Ok(PenaltySpec {
        lambda,
        lambda2,
        ..template.clone()
    })
}

fn fit_gene(
    m: &ExpressionMatrix,
    a: usize,
    cfg: &InferenceConfig,
    global: Option<&GroupAssignment>,
) -> Result<(ResponseView, FitResult, GeneFit)> {
    let view = m.response_view(a)?;
    let template = structure_for(&view, cfg, global)?;
    let spec = choose_penalty(&view, &template, cfg)?;
    let fit = solvers::fit(&view, &spec, &cfg.solver)?;
    let diag = GeneFit {
        lambda: spec.lambda,
        lambda2: spec.lambda2,
        converged: fit.converged,
        iterations: fit.iterations,
    };
    Ok((view, fit, diag))
}

/// Paired group lasso over all genes. Without `lambda`, λ is chosen by
/// k-fold cross-validation of the summed held-out error over all genes.
pub fn infer_paired(
    m: &ExpressionMatrix,
    lambda: Option<f64>,
    cv: &CvConfig,
    opts: &SolverOptions,
) -> Result<Inference> {
    let m = m.standardize();
    let lambda = match lambda {
        Some(l) => l,
        None => cross_validate_paired(&m, cv, opts)?,
    };
    let fit = solvers::solve_paired_group(&m, lambda, opts)?;
    let genes = (0..m.n_genes())
        .map(|_| GeneFit {
            lambda,
            lambda2: None,
            converged: fit.converged,
            iterations: fit.iterations,
        })
        .collect();
    Ok(Inference {
        network: WeightedNetwork {
            weights: fit.matrix,
            gene_names: m.gene_names().to_vec(),
        },
        genes,
    })
}

fn cross_validate_paired(m: &ExpressionMatrix, cfg: &CvConfig, opts: &SolverOptions) -> Result<f64> {
    let n = m.n_samples();
    if cfg.folds < 2 || n / cfg.folds < 2 {
        return Err(Error::invalid("too few samples for the requested folds"));
    }
    let grid = model_selection::geometric_grid(solvers::paired_lambda_max(m), cfg.grid_size, cfg.grid_min_ratio);
    let folds = model_selection::fold_assignment(n, cfg.folds, cfg.seed);
    let mut totals = vec![0.0; grid.len()];
    for test in &folds {
        let mut in_test = vec![false; n];
        test.iter().for_each(|&i| in_test[i] = true);
        let train: Vec<usize> = (0..n).filter(|&i| !in_test[i]).collect();
        let train_m = m.select_samples(&train)?;
        let test_x = m.values().select_rows(test.iter());
        for (l, &lam) in grid.iter().enumerate() {
            let fit = solvers::solve_paired_group(&train_m, lam, opts)?;
            let err = (&test_x - &test_x * &fit.matrix).norm_squared() / test.len() as f64;
            totals[l] += err;
        }
    }
    let mut best = 0;
    for l in 1..grid.len() {
        if totals[l] < totals[best] {
            best = l;
        }
    }
    Ok(grid[best])
}

/// Linear-interpolation quantile of `values` (sorted in place).
pub fn quantile(values: &mut [f64], q: f64) -> f64 {
    assert!(!values.is_empty(), "quantile of an empty set");
    values.sort_by(|a, b| a.total_cmp(b));
    let h = q.clamp(0.0, 1.0) * (values.len() - 1) as f64;
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(values.len() - 1);
    values[lo] + (h - lo as f64) * (values[hi] - values[lo])
}

/// Keeps edge `(i, j)` iff `|w_ij|` strictly exceeds the `q`-quantile of the
/// off-diagonal absolute weights.
pub fn quantile_filter(w: &WeightedNetwork, q: f64) -> Result<BinaryNetwork> {
    if !(0.0..1.0).contains(&q) {
        return Err(Error::invalid(format!("quantile {q} outside [0, 1)")));
    }
    let p = w.n_genes();
    let mut abs: Vec<f64> = (0..p)
        .flat_map(|i| (0..p).filter(move |&j| j != i).map(move |j| (i, j)))
        .map(|(i, j)| w.weights[(i, j)].abs())
        .collect();
    let mut edges = Adjacency::empty(p);
    if !abs.is_empty() {
        let cut = quantile(&mut abs, q);
        for i in 0..p {
            for j in 0..p {
                if i != j && w.weights[(i, j)].abs() > cut {
                    edges.set(i, j, true);
                }
            }
        }
    }
    Ok(BinaryNetwork {
        edges,
        directed: true,
        gene_names: w.gene_names.clone(),
    })
}

pub fn symmetrize(b: &BinaryNetwork, rule: Symmetrize) -> BinaryNetwork {
    let p = b.n_genes();
    let mut edges = Adjacency::empty(p);
    for i in 0..p {
        for j in 0..p {
            let keep = match rule {
                Symmetrize::And => b.edges.get(i, j) && b.edges.get(j, i),
                Symmetrize::Or => b.edges.get(i, j) || b.edges.get(j, i),
                Symmetrize::None => b.edges.get(i, j),
            };
            edges.set(i, j, keep);
        }
    }
    BinaryNetwork {
        edges,
        directed: rule == Symmetrize::None && b.directed,
        gene_names: b.gene_names.clone(),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PermutationConfig {
    pub num_permutations: usize,
    pub alpha: f64,
    pub seed: u64,
}

impl Default for PermutationConfig {
    fn default() -> Self {
        Self {
            num_permutations: 100,
            alpha: 0.05,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StabilityResult {
    /// Fit on the unpermuted data.
    pub original: Inference,
    /// `original` with coefficients that do not beat the permutation null
    /// set to zero.
    pub stable: WeightedNetwork,
}

/// Random stream for one permutation of one response gene.
pub fn permutation_rng(seed: u64, gene: usize, permutation: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(((gene as u64) << 32) | permutation as u64);
    rng
}

/// For each response, refits on `A` permutations of the response with the λ
/// chosen on the original data, pools the absolute coefficients into a null
/// distribution, and keeps an original coefficient only if it exceeds the
/// `(1 − alpha)`-quantile of that null.
pub fn permutation_stability(
    m: &ExpressionMatrix,
    cfg: &InferenceConfig,
    pcfg: &PermutationConfig,
) -> Result<StabilityResult> {
    if pcfg.num_permutations == 0 {
        return Err(Error::invalid("need at least one permutation"));
    }
    if !(pcfg.alpha > 0.0 && pcfg.alpha <= 1.0) {
        return Err(Error::invalid("alpha must lie in (0, 1]"));
    }
    if cfg.family == Family::PairedGroup {
        return Err(Error::invalid("permutation stability is node-wise"));
    }
    let m = m.standardize();
    let global = global_groups(&m, cfg)?;
    let per_gene: Vec<(ResponseView, FitResult, GeneFit, DVector<f64>)> = (0..m.n_genes())
        .into_par_iter()
        .map(|a| {
            let view = m.response_view(a)?;
            let template = structure_for(&view, cfg, global.as_ref())?;
            let spec = choose_penalty(&view, &template, cfg)?;
            let fit = solvers::fit(&view, &spec, &cfg.solver)?;
            let mut null = Vec::with_capacity(pcfg.num_permutations * view.n_predictors());
            for b in 0..pcfg.num_permutations {
                let mut rng = permutation_rng(pcfg.seed, a, b);
                let mut y: Vec<f64> = view.y.iter().copied().collect();
                y.shuffle(&mut rng);
                let permuted = view.with_response(DVector::from_vec(y));
                let null_fit = solvers::fit_warm(&permuted, &spec, &cfg.solver, Some(&fit.coefficients))?;
                null.extend(null_fit.coefficients.iter().map(|c| c.abs()));
            }
            let cut = quantile(&mut null, 1.0 - pcfg.alpha);
            let stable = fit.coefficients.map(|c| if c.abs() > cut { c } else { 0.0 });
            let diag = GeneFit {
                lambda: spec.lambda,
                lambda2: spec.lambda2,
                converged: fit.converged,
                iterations: fit.iterations,
            };
            Ok((view, fit, diag, stable))
        })
        .collect::<Result<_>>()?;

    let (network, genes) = assemble(&m, per_gene.iter().map(|(v, f, g, _)| (v, &f.coefficients, g.clone())));
    let (stable, _) = assemble(&m, per_gene.iter().map(|(v, _, g, s)| (v, s, g.clone())));
    Ok(StabilityResult {
        original: Inference { network, genes },
        stable,
    })
}
