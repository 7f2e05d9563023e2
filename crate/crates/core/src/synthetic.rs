//! Gold-standard networks, subnetwork sampling and linear SEM simulation.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::path::Path;

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::data::ExpressionMatrix;
use crate::error::{Error, Result};
use crate::network::Adjacency;

const TEMPLATE_15: &str = include_str!("../data/template15.tsv");
const MAX_RESTARTS: usize = 10_000;
const SPECTRAL_CAP: f64 = 0.9;

/// Known directed network; edge `(i, j)` means gene `i` regulates gene `j`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GoldStandard {
    pub edges: Adjacency,
    pub gene_names: Vec<String>,
}

impl GoldStandard {
    pub fn new(edges: Adjacency, gene_names: Vec<String>) -> Result<Self> {
        if edges.size() != gene_names.len() {
            return Err(Error::invalid("edge matrix and gene list differ in size"));
        }
        if let Some(i) = (0..edges.size()).find(|&i| edges.get(i, i)) {
            return Err(Error::invalid(format!("self-edge on {}", gene_names[i])));
        }
        Ok(Self { edges, gene_names })
    }

    /// The 15-gene, 13-edge template shipped with the crate.
    pub fn bundled_template() -> GoldStandard {
        Self::parse_tsv(TEMPLATE_15).expect("bundled template parses")
    }

    pub fn n_genes(&self) -> usize {
        self.gene_names.len()
    }

    pub fn n_edges(&self) -> usize {
        self.edges.count()
    }

    /// Parses `source<TAB>target<TAB>{0|1}` lines. Genes are numbered in
    /// order of first appearance, so pairs flagged 0 still declare genes.
    pub fn parse_tsv(text: &str) -> Result<GoldStandard> {
        let mut names: Vec<String> = Vec::new();
        let mut index: HashMap<String, usize> = HashMap::new();
        let mut flags: HashMap<(usize, usize), bool> = HashMap::new();
        for (ln, raw) in text.lines().enumerate() {
            let line = raw.trim_end_matches('\r');
            if line.trim().is_empty() || line.starts_with('#') {
                continue;
            }
            let parse_err = |column: usize, message: String| Error::Parse {
                line: ln + 1,
                column,
                message,
            };
            let cells: Vec<&str> = line.split('\t').map(str::trim).collect();
            if cells.len() != 3 {
                return Err(parse_err(1, format!("expected 3 columns, found {}", cells.len())));
            }
            if cells[0].is_empty() || cells[1].is_empty() {
                return Err(parse_err(1, "empty gene name".into()));
            }
            let flag = match cells[2] {
                "1" => true,
                "0" => false,
                other => return Err(parse_err(3, format!("flag must be 0 or 1, found `{other}`"))),
            };
            if cells[0] == cells[1] {
                return Err(parse_err(1, format!("self-edge on {}", cells[0])));
            }
            let mut id = |name: &str| {
                *index.entry(name.to_string()).or_insert_with(|| {
                    names.push(name.to_string());
                    names.len() - 1
                })
            };
            let key = (id(cells[0]), id(cells[1]));
            if let Some(&prev) = flags.get(&key) {
                if prev != flag {
                    return Err(parse_err(
                        3,
                        format!("contradicts an earlier line for {} -> {}", cells[0], cells[1]),
                    ));
                }
            }
            flags.insert(key, flag);
        }
        let mut edges = Adjacency::empty(names.len());
        for ((i, j), flag) in flags {
            if flag {
                edges.set(i, j, true);
            }
        }
        Ok(GoldStandard {
            edges,
            gene_names: names,
        })
    }

    pub fn load(path: impl AsRef<Path>) -> Result<GoldStandard> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse_tsv(&text)
    }

    /// Every ordered off-diagonal pair with its flag, edges first, so the
    /// gene order and isolated genes survive a round trip.
    pub fn to_tsv(&self) -> String {
        let p = self.n_genes();
        let mut out = String::new();
        for (i, j) in self.edges.edges() {
            writeln!(out, "{}\t{}\t1", self.gene_names[i], self.gene_names[j]).unwrap();
        }
        let mut out_absent = String::new();
        for i in 0..p {
            for j in 0..p {
                if i != j && !self.edges.get(i, j) {
                    writeln!(out_absent, "{}\t{}\t0", self.gene_names[i], self.gene_names[j]).unwrap();
                }
            }
        }
        if self.is_first_appearance_order() {
            out.push_str(&out_absent);
            out
        } else {
            // Gene order would change on reload; list the full matrix row-major.
            let mut full = String::new();
            for i in 0..p {
                for j in 0..p {
                    if i != j {
                        let flag = u8::from(self.edges.get(i, j));
                        writeln!(full, "{}\t{}\t{flag}", self.gene_names[i], self.gene_names[j]).unwrap();
                    }
                }
            }
            full
        }
    }

    fn is_first_appearance_order(&self) -> bool {
        let mut order = Vec::new();
        let mut seen = vec![false; self.n_genes()];
        let mut visit = |g: usize, order: &mut Vec<usize>| {
            if !seen[g] {
                seen[g] = true;
                order.push(g);
            }
        };
        for (i, j) in self.edges.edges() {
            visit(i, &mut order);
            visit(j, &mut order);
        }
        for i in 0..self.n_genes() {
            visit(i, &mut order);
        }
        order.iter().enumerate().all(|(k, &g)| k == g)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_tsv()).map_err(|e| Error::io(path, e))
    }

    /// Subgraph induced by `vertices` (kept in the given order).
    pub fn induced(&self, vertices: &[usize]) -> GoldStandard {
        let mut edges = Adjacency::empty(vertices.len());
        for (a, &i) in vertices.iter().enumerate() {
            for (b, &j) in vertices.iter().enumerate() {
                if self.edges.get(i, j) {
                    edges.set(a, b, true);
                }
            }
        }
        GoldStandard {
            edges,
            gene_names: vertices.iter().map(|&i| self.gene_names[i].clone()).collect(),
        }
    }
}

/// Random-walk vertex sampling on the undirected skeleton. The walk jumps to
/// a uniformly chosen vertex on dead ends and when it stops finding new
/// vertices. Returns the induced subgraph with vertices in template order.
pub fn sample_subnetwork(template: &GoldStandard, size: usize, seed: u64) -> Result<GoldStandard> {
    let p = template.n_genes();
    if size < 2 || size > p {
        return Err(Error::invalid(format!("subnetwork size {size} outside [2, {p}]")));
    }
    if size == p {
        return Ok(template.clone());
    }
    let neighbours: Vec<Vec<usize>> = (0..p)
        .map(|i| {
            (0..p)
                .filter(|&j| j != i && (template.edges.get(i, j) || template.edges.get(j, i)))
                .collect()
        })
        .collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut chosen = vec![false; p];
    let mut count = 0;
    let mut restarts = 0;
    let stall_limit = 10 * size;
    let mut current = rng.random_range(0..p);
    let mut stalled = 0;
    loop {
        if !chosen[current] {
            chosen[current] = true;
            count += 1;
            stalled = 0;
            if count == size {
                break;
            }
        } else {
            stalled += 1;
        }
        let nb = &neighbours[current];
        if nb.is_empty() || stalled >= stall_limit {
            restarts += 1;
            if restarts > MAX_RESTARTS {
                return Err(Error::invalid(format!(
                    "collected {count} of {size} vertices after {MAX_RESTARTS} restarts"
                )));
            }
            current = rng.random_range(0..p);
            stalled = 0;
        } else {
            current = nb[rng.random_range(0..nb.len())];
        }
    }
    let vertices: Vec<usize> = (0..p).filter(|&i| chosen[i]).collect();
    Ok(template.induced(&vertices))
}

/// Deterministic sparse directed template with hub-dominated out-degree,
/// for benchmark sizes beyond the bundled template. Each new gene attaches
/// to one or two earlier regulators chosen by preferential attachment.
pub fn scale_free_template(p: usize, seed: u64) -> GoldStandard {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut edges = Adjacency::empty(p);
    let mut out_degree = vec![0usize; p];
    for j in 1..p {
        let parents = if j > 1 && rng.random_bool(0.25) { 2 } else { 1 };
        for _ in 0..parents {
            let total: usize = out_degree[..j].iter().map(|d| d + 1).sum();
            let mut ticket = rng.random_range(0..total);
            let mut i = 0;
            while ticket > out_degree[i] {
                ticket -= out_degree[i] + 1;
                i += 1;
            }
            if !edges.get(i, j) {
                edges.set(i, j, true);
                out_degree[i] += 1;
            }
        }
    }
    GoldStandard {
        edges,
        gene_names: (1..=p).map(|i| format!("G{i}")).collect(),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimulationConfig {
    pub n_samples: usize,
    pub noise_sd: f64,
    pub weight_range: (f64, f64),
    pub seed: u64,
}

impl Default for SimulationConfig {
    fn default() -> Self {
        Self {
            n_samples: 100,
            noise_sd: 1.0,
            weight_range: (0.3, 0.9),
            seed: 0,
        }
    }
}

impl SimulationConfig {
    fn validate(&self) -> Result<()> {
        let (lo, hi) = self.weight_range;
        if self.n_samples < 2 {
            return Err(Error::invalid("need at least 2 samples"));
        }
        if !(self.noise_sd > 0.0 && self.noise_sd.is_finite()) {
            return Err(Error::invalid("noise_sd must be positive"));
        }
        if !(lo > 0.0 && lo <= hi && hi.is_finite()) {
            return Err(Error::invalid("weight range must satisfy 0 < lo <= hi"));
        }
        Ok(())
    }
}

/// Samples `x = (I − Wᵀ)⁻¹ε` row by row.
pub fn simulate_expression(g: &GoldStandard, cfg: &SimulationConfig) -> Result<ExpressionMatrix> {
    simulate_with_weights(g, cfg).map(|(m, _)| m)
}

/// As [`simulate_expression`], also returning the weight matrix used.
pub fn simulate_with_weights(g: &GoldStandard, cfg: &SimulationConfig) -> Result<(ExpressionMatrix, DMatrix<f64>)> {
    cfg.validate()?;
    let p = g.n_genes();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let (lo, hi) = cfg.weight_range;
    let mut w = DMatrix::zeros(p, p);
    for (i, j) in g.edges.edges() {
        let magnitude = if lo == hi { lo } else { rng.random_range(lo..=hi) };
        let sign = if rng.random_bool(0.5) { 1.0 } else { -1.0 };
        w[(i, j)] = sign * magnitude;
    }
    let radius = spectral_radius(&w);
    if radius > SPECTRAL_CAP {
        w *= SPECTRAL_CAP / radius;
    }
    let system = DMatrix::identity(p, p) - &w;
    let inverse = system
        .try_inverse()
        .ok_or_else(|| Error::invalid("I − W is singular"))?;
    let normal = Normal::new(0.0, cfg.noise_sd).map_err(|e| Error::invalid(e.to_string()))?;
    let eps = DMatrix::from_fn(cfg.n_samples, p, |_, _| normal.sample(&mut rng));
    let x = eps * inverse;
    let m = ExpressionMatrix::new(x, g.gene_names.clone())?;
    Ok((m, w))
}

fn spectral_radius(w: &DMatrix<f64>) -> f64 {
    if w.iter().all(|&v| v == 0.0) {
        return 0.0;
    }
    w.complex_eigenvalues().iter().map(|z| z.norm()).fold(0.0, f64::max)
}

/// Pearson correlation of two columns.
pub fn column_correlation(x: &DMatrix<f64>, a: usize, b: usize) -> f64 {
    let n = x.nrows() as f64;
    let ca = x.column(a);
    let cb = x.column(b);
    let (ma, mb) = (ca.sum() / n, cb.sum() / n);
    let da = ca.add_scalar(-ma);
    let db = cb.add_scalar(-mb);
    da.dot(&db) / (da.norm() * db.norm())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_edge_parses() {
        let g = GoldStandard::parse_tsv("G1\tG2\t1\n").unwrap();
        assert_eq!(g.n_genes(), 2);
        assert!(g.edges.get(0, 1) && !g.edges.get(1, 0));
    }

    #[test]
    fn bad_lines_are_rejected() {
        assert!(GoldStandard::parse_tsv("G1\tG1\t1\n").is_err());
        assert!(GoldStandard::parse_tsv("G1\tG2\n").is_err());
        assert!(GoldStandard::parse_tsv("G1\tG2\t2\n").is_err());
        assert!(GoldStandard::parse_tsv("G1\tG2\t1\nG1\tG2\t0\n").is_err());
        assert!(GoldStandard::parse_tsv("G1\tG2\t1\nG1\tG2\t1\n").is_ok());
    }

    #[test]
    fn bundled_template_shape() {
        let g = GoldStandard::bundled_template();
        assert_eq!(g.n_genes(), 15);
        assert_eq!(g.n_edges(), 13);
    }

    #[test]
    fn round_trip_keeps_order_and_isolated_genes() {
        let g = GoldStandard::bundled_template();
        assert_eq!(GoldStandard::parse_tsv(&g.to_tsv()).unwrap(), g);
        let sub = g.induced(&[14, 3, 6, 0]);
        assert_eq!(GoldStandard::parse_tsv(&sub.to_tsv()).unwrap(), sub);
    }

    #[test]
    fn full_size_sample_is_template() {
        let g = GoldStandard::bundled_template();
        assert_eq!(sample_subnetwork(&g, 15, 3).unwrap(), g);
        assert!(sample_subnetwork(&g, 16, 3).is_err());
        assert!(sample_subnetwork(&g, 1, 3).is_err());
    }

    #[test]
    fn sampled_subnetwork_is_induced() {
        let t = scale_free_template(200, 1);
        for seed in 0..10 {
            let s = sample_subnetwork(&t, 30, seed).unwrap();
            assert_eq!(s.n_genes(), 30);
            let idx: Vec<usize> = s
                .gene_names
                .iter()
                .map(|n| t.gene_names.iter().position(|m| m == n).unwrap())
                .collect();
            for a in 0..30 {
                for b in 0..30 {
                    assert_eq!(s.edges.get(a, b), t.edges.get(idx[a], idx[b]));
                }
            }
        }
    }

    #[test]
    fn simulation_is_deterministic_and_finite() {
        let g = GoldStandard::bundled_template();
        let cfg = SimulationConfig {
            seed: 5,
            ..Default::default()
        };
        let a = simulate_expression(&g, &cfg).unwrap();
        let b = simulate_expression(&g, &cfg).unwrap();
        assert_eq!(a.values(), b.values());
        assert!(a.values().iter().all(|v| v.is_finite()));
    }

    #[test]
    fn feedback_loops_are_damped() {
        let mut edges = Adjacency::empty(3);
        edges.set(0, 1, true);
        edges.set(1, 2, true);
        edges.set(2, 0, true);
        let g = GoldStandard::new(edges, vec!["a".into(), "b".into(), "c".into()]).unwrap();
        let cfg = SimulationConfig {
            weight_range: (2.0, 2.0),
            ..Default::default()
        };
        let (_, w) = simulate_with_weights(&g, &cfg).unwrap();
        assert!(spectral_radius(&w) <= SPECTRAL_CAP + 1e-9);
    }
}
