//! Confusion counts, MCC and the benchmark harness.

use std::fmt;
use std::str::FromStr;
use std::time::Instant;

use crate::data::ExpressionMatrix;
use crate::error::{Error, Result};
use crate::grouping::Linkage;
use crate::model_selection::CvConfig;
use crate::network::{self, BinaryNetwork, InferenceConfig, PermutationConfig, WeightedNetwork};
use crate::solvers::{Family, SolverOptions};
use crate::synthetic::{self, GoldStandard, SimulationConfig};

/// Counts over all `p²` ordered cells, diagonal included.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct ConfusionCounts {
    pub tp: u64,
    pub fp: u64,
    pub tn: u64,
    pub fn_: u64,
}

impl ConfusionCounts {
    pub fn total(&self) -> u64 {
        self.tp + self.fp + self.tn + self.fn_
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MetricsReport {
    pub true_edges: u64,
    pub pred_edges: u64,
    pub counts: ConfusionCounts,
    /// `None` when a marginal sum is zero.
    pub mcc: Option<f64>,
    pub tpr: f64,
    pub fpr: f64,
    pub acc: f64,
    pub seconds: f64,
}

/// Classifies every cell of `pred` against `gold`, matching genes by name.
pub fn confusion(pred: &BinaryNetwork, gold: &GoldStandard) -> Result<ConfusionCounts> {
    let p = gold.n_genes();
    let position: std::collections::HashMap<&str, usize> = pred
        .gene_names
        .iter()
        .enumerate()
        .map(|(i, n)| (n.as_str(), i))
        .collect();
    if let Some(missing) = gold.gene_names.iter().find(|n| !position.contains_key(n.as_str())) {
        return Err(Error::GeneMismatch(missing.clone()));
    }
    if let Some(extra) = pred.gene_names.iter().find(|n| !gold.gene_names.contains(n)) {
        return Err(Error::GeneMismatch(extra.clone()));
    }
    let map: Vec<usize> = gold.gene_names.iter().map(|n| position[n.as_str()]).collect();
    let mut c = ConfusionCounts::default();
    for i in 0..p {
        for j in 0..p {
            let predicted = i != j && pred.edges.get(map[i], map[j]);
            match (predicted, gold.edges.get(i, j)) {
                (true, true) => c.tp += 1,
                (true, false) => c.fp += 1,
                (false, true) => c.fn_ += 1,
                (false, false) => c.tn += 1,
            }
        }
    }
    Ok(c)
}

pub fn compute_metrics(c: ConfusionCounts, seconds: f64) -> MetricsReport {
    let (tp, fp, tn, fn_) = (c.tp as f64, c.fp as f64, c.tn as f64, c.fn_ as f64);
    let marginals = [tp + fp, tp + fn_, tn + fp, tn + fn_];
    let mcc = if marginals.contains(&0.0) {
        None
    } else {
        let denom = marginals.iter().product::<f64>().sqrt();
        Some((tp * tn - fp * fn_) / denom)
    };
    let ratio = |a: f64, b: f64| if b > 0.0 { a / b } else { 0.0 };
    MetricsReport {
        true_edges: c.tp + c.fn_,
        pred_edges: c.tp + c.fp,
        counts: c,
        mcc,
        tpr: ratio(tp, tp + fn_),
        fpr: ratio(fp, fp + tn),
        acc: ratio(tp + tn, c.total() as f64),
        seconds,
    }
}

/// One benchmark configuration: a penalty family, optionally wrapped in the
/// permutation stability filter.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Method {
    pub family: Family,
    pub permutation: bool,
}

impl Method {
    /// The nine configurations compared in the benchmark tables.
    pub const STANDARD: [&'static str; 9] = [
        "lasso",
        "ridge",
        "enet",
        "fused",
        "group",
        "hier",
        "labnet",
        "ridgeperm",
        "enetperm",
    ];

    pub fn name(&self) -> String {
        match (self.family, self.permutation) {
            (Family::Lasso, true) => "labnet".into(),
            (Family::Ridge, true) => "ridgeperm".into(),
            (Family::ElasticNet, true) => "enetperm".into(),
            (f, true) => format!("{}perm", f.name()),
            (f, false) => f.name().into(),
        }
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let (family, permutation) = match s {
            "labnet" => (Family::Lasso, true),
            "ridgeperm" => (Family::Ridge, true),
            "enetperm" => (Family::ElasticNet, true),
            other => match other.strip_suffix("perm") {
                Some(base) => (base.parse()?, true),
                None => (other.parse()?, false),
            },
        };
        if permutation && family == Family::PairedGroup {
            return Err(Error::invalid(
                "paired group lasso has no node-wise permutation wrapper",
            ));
        }
        Ok(Method { family, permutation })
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.name())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchConfig {
    pub sizes: Vec<usize>,
    pub methods: Vec<Method>,
    pub seed: u64,
    pub simulation: SimulationConfig,
    pub cv: CvConfig,
    pub solver: SolverOptions,
    pub permutation: PermutationConfig,
    /// Fixed edge quantile; `None` targets twice the true edge count.
    pub edge_quantile: Option<f64>,
    pub group_k: usize,
    pub fused_k: usize,
    pub linkage: Linkage,
    /// Template sampled for each size; `None` uses the bundled 15-gene
    /// template for size 15 and a generated 1500-gene template otherwise.
    pub template: Option<GoldStandard>,
}

impl Default for BenchConfig {
    fn default() -> Self {
        Self {
            sizes: vec![15],
            methods: Method::STANDARD.iter().map(|m| m.parse().unwrap()).collect(),
            seed: 0,
            simulation: SimulationConfig::default(),
            cv: CvConfig::default(),
            solver: SolverOptions::default(),
            permutation: PermutationConfig::default(),
            edge_quantile: None,
            group_k: 3,
            fused_k: 10,
            linkage: Linkage::Average,
            template: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchRow {
    pub method: String,
    pub size: usize,
    pub outcome: std::result::Result<MetricsReport, String>,
}

impl BenchRow {
    pub fn label(&self) -> String {
        format!("{}@{}", self.method, self.size)
    }
}

pub const BENCH_HEADER: &str = "method\tTrue\tPred\tTP\tFP\tTN\tFN\tMCC\tTPR\tFPR\tACC\tTime[sec]";

/// Size of the generated template used for benchmark sizes above 15.
pub const LARGE_TEMPLATE_SIZE: usize = 1500;

/// Gold standard for one benchmark size.
pub fn benchmark_gold(cfg: &BenchConfig, size: usize) -> Result<GoldStandard> {
    match &cfg.template {
        Some(t) => synthetic::sample_subnetwork(t, size, cfg.seed),
        None if size <= 15 => synthetic::sample_subnetwork(&GoldStandard::bundled_template(), size, cfg.seed),
        None => {
            let t = synthetic::scale_free_template(LARGE_TEMPLATE_SIZE, 0);
            synthetic::sample_subnetwork(&t, size, cfg.seed)
        }
    }
}

/// Benchmark data for one size: the gold standard and a matching dataset.
pub fn benchmark_dataset(cfg: &BenchConfig, size: usize) -> Result<(GoldStandard, ExpressionMatrix)> {
    let gold = benchmark_gold(cfg, size)?;
    let sim = SimulationConfig {
        seed: cfg.seed.wrapping_add(size as u64),
        ..cfg.simulation.clone()
    };
    let data = synthetic::simulate_expression(&gold, &sim)?;
    Ok((gold, data))
}

/// Quantile keeping about twice the true edge count among `p(p − 1)` cells.
pub fn default_edge_quantile(true_edges: usize, p: usize) -> f64 {
    let cells = (p * (p - 1)) as f64;
    (1.0 - 2.0 * true_edges as f64 / cells).clamp(0.0, 1.0 - 1.0 / cells)
}

/// Runs every method on every size; failures become rows without metrics.
pub fn run_benchmark(cfg: &BenchConfig) -> Result<Vec<BenchRow>> {
    let mut rows = Vec::new();
    for &size in &cfg.sizes {
        let (gold, data) = benchmark_dataset(cfg, size)?;
        let q = cfg
            .edge_quantile
            .unwrap_or_else(|| default_edge_quantile(gold.n_edges(), gold.n_genes()));
        for method in &cfg.methods {
            let start = Instant::now();
            let outcome = predict(&data, *method, cfg, q).and_then(|pred| {
                let counts = confusion(&pred, &gold)?;
                Ok(compute_metrics(counts, start.elapsed().as_secs_f64()))
            });
            rows.push(BenchRow {
                method: method.name(),
                size,
                outcome: outcome.map_err(|e| e.to_string()),
            });
        }
    }
    Ok(rows)
}

fn inference_config(method: Method, cfg: &BenchConfig) -> InferenceConfig {
    InferenceConfig {
        cv: cfg.cv.clone(),
        solver: cfg.solver.clone(),
        group_k: cfg.group_k,
        fused_k: cfg.fused_k,
        linkage: cfg.linkage,
        ..InferenceConfig::new(method.family)
    }
}

/// Inference, quantile filter and, for wrapped methods, intersection with
/// the permutation-stable support.
pub fn predict(data: &ExpressionMatrix, method: Method, cfg: &BenchConfig, q: f64) -> Result<BinaryNetwork> {
    if method.family == Family::PairedGroup {
        let inference = network::infer_paired(data, None, &cfg.cv, &cfg.solver)?;
        return network::quantile_filter(&inference.network, q);
    }
    let icfg = inference_config(method, cfg);
    if !method.permutation {
        let inference = network::infer_network(data, &icfg)?;
        return network::quantile_filter(&inference.network, q);
    }
    let result = network::permutation_stability(data, &icfg, &cfg.permutation)?;
    let mut pred = network::quantile_filter(&result.original.network, q)?;
    intersect_support(&mut pred, &result.stable);
    Ok(pred)
}

fn intersect_support(pred: &mut BinaryNetwork, stable: &WeightedNetwork) {
    let support = stable.support();
    let p = pred.n_genes();
    for i in 0..p {
        for j in 0..p {
            if !support.get(i, j) {
                pred.edges.set(i, j, false);
            }
        }
    }
}

/// One table line for `report`; `mask_time` replaces the timing column
/// with `-`.
pub fn format_report(label: &str, r: &MetricsReport, mask_time: bool) -> String {
    let mcc = r.mcc.map_or("NA".to_string(), |m| format!("{m:.4}"));
    let time = if mask_time {
        "-".to_string()
    } else {
        format!("{:.3}", r.seconds)
    };
    format!(
        "{label}\t{}\t{}\t{}\t{}\t{}\t{}\t{mcc}\t{:.4}\t{:.4}\t{:.4}\t{time}",
        r.true_edges, r.pred_edges, r.counts.tp, r.counts.fp, r.counts.tn, r.counts.fn_, r.tpr, r.fpr, r.acc,
    )
}

/// Header plus one line per row; failed rows print `NA` in every column.
pub fn format_rows(rows: &[BenchRow], mask_time: bool) -> String {
    let mut out = String::from(BENCH_HEADER);
    out.push('\n');
    for row in rows {
        match &row.outcome {
            Ok(r) => out.push_str(&format_report(&row.label(), r, mask_time)),
            Err(_) => out.push_str(&format!("{}{}", row.label(), "\tNA".repeat(11))),
        }
        out.push('\n');
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::network::Adjacency;

    #[test]
    fn mcc_definition() {
        let r = compute_metrics(
            ConfusionCounts {
                tp: 5,
                fp: 0,
                tn: 5,
                fn_: 0,
            },
            0.0,
        );
        assert_eq!(r.mcc, Some(1.0));
        let r = compute_metrics(
            ConfusionCounts {
                tp: 0,
                fp: 0,
                tn: 212,
                fn_: 13,
            },
            0.0,
        );
        assert_eq!(r.mcc, None);
        assert_eq!(r.tpr, 0.0);
        assert_eq!(r.fpr, 0.0);
    }

    #[test]
    fn empty_prediction_is_all_negative() {
        let names: Vec<String> = (0..15).map(|i| format!("g{i}")).collect();
        let pred = BinaryNetwork {
            edges: Adjacency::empty(15),
            directed: true,
            gene_names: names.clone(),
        };
        let gold = GoldStandard::new(Adjacency::empty(15), names).unwrap();
        let c = confusion(&pred, &gold).unwrap();
        assert_eq!(
            c,
            ConfusionCounts {
                tp: 0,
                fp: 0,
                tn: 225,
                fn_: 0
            }
        );
    }

    #[test]
    fn gene_mismatch_names_the_gene() {
        let pred = BinaryNetwork {
            edges: Adjacency::empty(2),
            directed: true,
            gene_names: vec!["a".into(), "b".into()],
        };
        let gold = GoldStandard::new(Adjacency::empty(2), vec!["a".into(), "c".into()]).unwrap();
        match confusion(&pred, &gold) {
            Err(Error::GeneMismatch(gene)) => assert_eq!(gene, "c"),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn method_names_round_trip() {
        for name in Method::STANDARD.iter().chain(["sgroup", "paired", "fusedperm"].iter()) {
            let m: Method = name.parse().unwrap();
            assert_eq!(m.name(), *name);
        }
        assert!("pairedperm".parse::<Method>().is_err());
        assert!("bogus".parse::<Method>().is_err());
    }

    #[test]
    fn default_quantile_targets_twice_the_truth() {
        let q = default_edge_quantile(13, 15);
        assert!(((1.0 - q) * 210.0 - 26.0).abs() < 1e-9);
    }
}
