use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, CommandFactory, FromArgMatches, Parser, Subcommand};

use grnlasso::evaluation::{self, BenchConfig, Method};
use grnlasso::grouping::Linkage;
use grnlasso::model_selection::CvConfig;
use grnlasso::network::{self, BinaryNetwork, InferenceConfig, PermutationConfig, Symmetrize};
use grnlasso::synthetic::{self, GoldStandard, SimulationConfig};
use grnlasso::{ExpressionMatrix, Family, SolverOptions};

const SUBCOMMANDS: [&str; 4] = ["simulate", "infer", "eval", "bench"];

/// Gene regulatory network inference by penalized regression.
#[derive(Parser, Debug)]
#[command(name = "grnlasso", version)]
struct Cli {
    /// Worker threads (defaults to all cores)
    #[arg(long, global = true)]
    threads: Option<usize>,

    /// Flat key=value file of flag defaults; command-line flags win
    #[arg(long, global = true, value_name = "FILE")]
    config: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Simulate expression data from a gold-standard network
    Simulate(SimulateArgs),
    /// Infer a network from expression data
    Infer(InferArgs),
    /// Score a predicted network against a gold standard
    Eval(EvalArgs),
    /// Run methods on simulated benchmarks and write a metrics table
    Bench(BenchArgs),
}

#[derive(Args, Debug)]
struct SimulateArgs {
    /// Gold-standard TSV (source, target, 0|1); the bundled 15-gene template when omitted
    #[arg(long)]
    gold: Option<PathBuf>,
    /// Sample a subnetwork of this many genes first
    #[arg(long)]
    size: Option<usize>,
    /// Number of samples
    #[arg(long, default_value_t = 100)]
    n: usize,
    #[arg(long, default_value_t = 1.0)]
    noise_sd: f64,
    #[arg(long, default_value_t = 0.3)]
    weight_lo: f64,
    #[arg(long, default_value_t = 0.9)]
    weight_hi: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Expression matrix output (samples × genes)
    #[arg(long)]
    out: PathBuf,
    /// Also write the gold standard that generated the data
    #[arg(long)]
    gold_out: Option<PathBuf>,
}

#[derive(Args, Debug, Clone)]
struct CvArgs {
    #[arg(long, default_value_t = 10)]
    folds: usize,
    #[arg(long, default_value_t = 50)]
    grid_size: usize,
    #[arg(long, default_value_t = 1e-3)]
    grid_min_ratio: f64,
    /// Grid size for the second penalty of two-parameter families
    #[arg(long, default_value_t = 5)]
    secondary_grid_size: usize,
    #[arg(long, visible_alias = "tol", default_value_t = 1e-6)]
    tolerance: f64,
    #[arg(long, visible_alias = "max-iter", default_value_t = 100_000)]
    max_iterations: usize,
    /// Number of response permutations for permutation-wrapped methods
    #[arg(long, default_value_t = 100)]
    permutations: usize,
    /// Null quantile level for permutation-wrapped methods
    #[arg(long, default_value_t = 0.05)]
    alpha: f64,
    /// Cluster count for group and sparse group lasso
    #[arg(long, default_value_t = 3)]
    group_k: usize,
    /// Cluster count for the fused-lasso ordering
    #[arg(long, default_value_t = 10)]
    fused_k: usize,
    #[arg(long, default_value = "average")]
    linkage: Linkage,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

impl CvArgs {
    fn cv(&self) -> CvConfig {
        CvConfig {
            folds: self.folds,
            grid_size: self.grid_size,
            grid_min_ratio: self.grid_min_ratio,
            secondary_grid_size: self.secondary_grid_size,
            seed: self.seed,
        }
    }

    fn solver(&self) -> SolverOptions {
        SolverOptions {
            tolerance: self.tolerance,
            max_iterations: self.max_iterations,
            ..SolverOptions::default()
        }
    }

    fn permutation(&self) -> PermutationConfig {
        PermutationConfig {
            num_permutations: self.permutations,
            alpha: self.alpha,
            seed: self.seed,
        }
    }
}

#[derive(Args, Debug)]
struct InferArgs {
    /// Expression TSV, samples in rows and genes in columns
    #[arg(long)]
    input: PathBuf,
    /// Input has genes in rows
    #[arg(long)]
    transpose: bool,
    /// lasso, ridge, enet, fused, group, sgroup, paired, hier, labnet, ridgeperm, enetperm
    #[arg(long, visible_alias = "penalty", default_value = "lasso")]
    method: Method,
    /// Fixed primary penalty; cross-validated when omitted
    #[arg(long)]
    lambda: Option<f64>,
    /// Fixed second penalty for enet, fused and sgroup
    #[arg(long)]
    lambda2: Option<f64>,
    /// Binarize with this edge quantile; the weighted network is written when omitted
    #[arg(long)]
    edge_quantile: Option<f64>,
    /// and, or, none (binary output only)
    #[arg(long, default_value = "none")]
    symmetrize: Symmetrize,
    /// Cluster all genes once instead of each response's predictors
    #[arg(long)]
    global_clustering: bool,
    #[command(flatten)]
    tuning: CvArgs,
    /// Network edge list output
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Debug)]
struct EvalArgs {
    /// Predicted network edge list
    #[arg(long)]
    pred: PathBuf,
    /// Gold-standard TSV (source, target, 0|1)
    #[arg(long)]
    gold: PathBuf,
    /// Write the metrics table here instead of standard output
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct BenchArgs {
    /// Comma-separated network sizes
    #[arg(long, value_delimiter = ',', default_value = "15")]
    sizes: Vec<usize>,
    /// Comma-separated methods
    #[arg(
        long,
        value_delimiter = ',',
        default_value = "lasso,ridge,enet,fused,group,hier,labnet,ridgeperm,enetperm"
    )]
    methods: Vec<Method>,
    /// Template to sample subnetworks from; built-in templates when omitted
    #[arg(long)]
    gold: Option<PathBuf>,
    /// Samples per simulated dataset
    #[arg(long, default_value_t = 100)]
    n: usize,
    /// Fixed edge quantile; targets twice the true edge count when omitted
    #[arg(long)]
    edge_quantile: Option<f64>,
    /// Print `-` in the timing column
    #[arg(long)]
    mask_time: bool,
    #[command(flatten)]
    tuning: CvArgs,
    /// Metrics table output
    #[arg(long)]
    out: PathBuf,
}

struct Failure(String);

impl From<grnlasso::Error> for Failure {
    fn from(e: grnlasso::Error) -> Self {
        Failure(e.to_string())
    }
}

fn main() -> ExitCode {
    let argv: Vec<String> = std::env::args().collect();
    let argv = match inject_config(argv) {
        Ok(a) => a,
        Err(msg) => {
            eprintln!("error: {msg}");
            return ExitCode::from(1);
        }
    };
    let command = Cli::command().mut_subcommands(|s| s.args_override_self(true));
    let cli = match command
        .try_get_matches_from(argv)
        .and_then(|m| Cli::from_arg_matches(&m))
    {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    if let Some(n) = cli.threads {
        if n == 0 {
            eprintln!("error: --threads must be at least 1");
            return ExitCode::from(1);
        }
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("error: {e}");
            return ExitCode::from(1);
        }
    }
    let result = match cli.command {
        Command::Simulate(a) => simulate(a),
        Command::Infer(a) => infer(a),
        Command::Eval(a) => eval(a),
        Command::Bench(a) => bench(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
    }
}

/// Inserts `--key value` pairs from the `--config` file right after the
/// subcommand, so later command-line flags override them.
fn inject_config(argv: Vec<String>) -> Result<Vec<String>, String> {
    let mut path = None;
    for (i, arg) in argv.iter().enumerate() {
        if arg == "--config" {
            path = argv.get(i + 1).cloned();
        } else if let Some(p) = arg.strip_prefix("--config=") {
            path = Some(p.to_string());
        }
    }
    let Some(path) = path else { return Ok(argv) };
    let Some(pos) = argv.iter().position(|a| SUBCOMMANDS.contains(&a.as_str())) else {
        return Ok(argv);
    };
    let text = std::fs::read_to_string(&path).map_err(|e| format!("{path}: {e}"))?;
    let mut injected = Vec::new();
    for (ln, line) in text.lines().enumerate() {
        let line = line.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| format!("{path}:{}: expected key=value", ln + 1))?;
        let (key, value) = (key.trim().replace('_', "-"), value.trim());
        match value {
            "true" => injected.push(format!("--{key}")),
            "false" => {}
            _ => {
                injected.push(format!("--{key}"));
                injected.push(value.to_string());
            }
        }
    }
    let mut out = argv[..=pos].to_vec();
    out.extend(injected);
    out.extend_from_slice(&argv[pos + 1..]);
    Ok(out)
}

fn write(path: &Path, text: &str) -> Result<(), Failure> {
    std::fs::write(path, text).map_err(|e| Failure(format!("{}: {e}", path.display())))
}

fn simulate(a: SimulateArgs) -> Result<(), Failure> {
    let template = match &a.gold {
        Some(p) => GoldStandard::load(p)?,
        None => GoldStandard::bundled_template(),
    };
    let gold = match a.size {
        Some(size) => synthetic::sample_subnetwork(&template, size, a.seed)?,
        None => template,
    };
    let cfg = SimulationConfig {
        n_samples: a.n,
        noise_sd: a.noise_sd,
        weight_range: (a.weight_lo, a.weight_hi),
        seed: a.seed,
    };
    let data = synthetic::simulate_expression(&gold, &cfg)?;
    data.save(&a.out)?;
    if let Some(p) = &a.gold_out {
        gold.save(p)?;
    }
    Ok(())
}

fn infer(a: InferArgs) -> Result<(), Failure> {
    let data = ExpressionMatrix::load(&a.input, a.transpose)?;
    let t = &a.tuning;
    let icfg = InferenceConfig {
        cv: t.cv(),
        solver: t.solver(),
        group_k: t.group_k,
        fused_k: t.fused_k,
        linkage: t.linkage,
        global_clustering: a.global_clustering,
        fixed_lambda: a.lambda.map(|l| (l, a.lambda2)),
        ..InferenceConfig::new(a.method.family)
    };
    let (weights, stable) = if a.method.family == Family::PairedGroup {
        let inf = network::infer_paired(&data, a.lambda, &icfg.cv, &icfg.solver)?;
        (inf, None)
    } else if a.method.permutation {
        let r = network::permutation_stability(&data, &icfg, &t.permutation())?;
        (r.original, Some(r.stable))
    } else {
        (network::infer_network(&data, &icfg)?, None)
    };
    let unconverged: Vec<&str> = weights
        .genes
        .iter()
        .zip(&weights.network.gene_names)
        .filter(|(g, _)| !g.converged)
        .map(|(_, n)| n.as_str())
        .collect();
    if !unconverged.is_empty() {
        eprintln!("warning: solver did not converge for {}", unconverged.join(", "));
    }
    let text = match a.edge_quantile {
        Some(q) => {
            let mut pred = network::quantile_filter(&weights.network, q)?;
            if let Some(stable) = &stable {
                let support = stable.support();
                for (i, j) in pred.edges.clone().edges() {
                    if !support.get(i, j) {
                        pred.edges.set(i, j, false);
                    }
                }
            }
            network::symmetrize(&pred, a.symmetrize).to_tsv()
        }
        None => stable.unwrap_or(weights.network).to_tsv(),
    };
    write(&a.out, &text)
}

fn eval(a: EvalArgs) -> Result<(), Failure> {
    let pred = BinaryNetwork::load(&a.pred)?;
    let gold = GoldStandard::load(&a.gold)?;
    let counts = evaluation::confusion(&pred, &gold)?;
    let report = evaluation::compute_metrics(counts, 0.0);
    let label = a
        .pred
        .file_stem()
        .map_or("pred".into(), |s| s.to_string_lossy().into_owned());
    let text = format!(
        "{}\n{}\n",
        evaluation::BENCH_HEADER,
        evaluation::format_report(&label, &report, false)
    );
    match &a.out {
        Some(p) => write(p, &text),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn bench(a: BenchArgs) -> Result<(), Failure> {
    let t = &a.tuning;
    let template = a.gold.as_ref().map(GoldStandard::load).transpose()?;
    let cfg = BenchConfig {
        sizes: a.sizes.clone(),
        methods: a.methods.clone(),
        seed: t.seed,
        simulation: SimulationConfig {
            n_samples: a.n,
            ..SimulationConfig::default()
        },
        cv: t.cv(),
        solver: t.solver(),
        permutation: t.permutation(),
        edge_quantile: a.edge_quantile,
        group_k: t.group_k,
        fused_k: t.fused_k,
        linkage: t.linkage,
        template,
    };
    let rows = evaluation::run_benchmark(&cfg)?;
    for row in &rows {
        if let Err(msg) = &row.outcome {
            eprintln!("warning: {} failed: {msg}", row.label());
        }
    }
    write(&a.out, &evaluation::format_rows(&rows, a.mask_time))
}
