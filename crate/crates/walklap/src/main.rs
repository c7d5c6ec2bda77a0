//! Command-line front end for the walk-based Laplacian toolkit.

use clap::{Args, Parser, Subcommand, ValueEnum};
use std::io::Write;
use std::path::{Path, PathBuf};
use walklap::diffusion::{diffuse, exploration_history, MarkovChain, Normalization};
use walklap::graph::{generate, load_graph, Graph};
use walklap::operators::{CoefficientFunction, LaplacianOperator, OperatorKind};
use walklap::returnprob::{
    exact_return_probability, hutchinson_exp, xnystrace_exp, XNysTraceConfig,
};
use walklap::spectral::{spectral_radius_adjacency, spectral_radius_z};
use walklap::{Error, Result};

/// Environment variable naming a directory searched for graph files given
/// by bare name.
const DATA_DIR_ENV: &str = "WALKLAP_DATA_DIR";

#[derive(Parser)]
#[command(name = "walklap", version, about = "Walk-based graph Laplacians and diffusion")]
struct Cli {
    /// Cap the number of worker threads
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Emit JSON instead of CSV
    #[arg(long, global = true)]
    json: bool,
    /// Write output to a file instead of stdout
    #[arg(long, global = true)]
    output: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct GraphArgs {
    /// Graph file (.mtx Matrix Market or edge list); bare names are also
    /// resolved against $WALKLAP_DATA_DIR
    #[arg(long, conflicts_with = "gen")]
    graph: Option<String>,
    /// Built-in generator spec, e.g. grid:30x30, trap:5x8, tree:100:7,
    /// random:50:20:1, path:10, cycle:8, complete:6, star:9
    #[arg(long)]
    gen: Option<String>,
    /// Restrict to the largest connected component after loading
    #[arg(long)]
    largest_component: bool,
}

#[derive(Args, Clone)]
struct OperatorArgs {
    /// Operator family
    #[arg(long, value_enum, default_value_t = Family::Standard)]
    family: Family,
    /// Backtracking penalty in [0, 1]; 0 counts all walks, 1 removes
    /// backtracking entirely
    #[arg(long, default_value_t = 0.0)]
    mu: f64,
    /// Walk/path length for the kwalk and kpath families
    #[arg(long, default_value_t = 1)]
    k: usize,
    /// Coefficient family for the transformed operators
    #[arg(long, value_enum, default_value_t = Coeff::Exponential)]
    coeff: Coeff,
    /// Resolvent parameter; defaults to 1 / (2 rho(Z))
    #[arg(long)]
    alpha: Option<f64>,
    /// Exponential parameter
    #[arg(long, default_value_t = 1.0)]
    beta: f64,
    /// Comma-separated coefficients c_0,c_1,... for the series family
    #[arg(long)]
    coeffs: Option<String>,
    /// Length cap for the kpath-transformed family
    #[arg(long, default_value_t = 10)]
    kmax: usize,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Family {
    Standard,
    Kwalk,
    Transformed,
    Kpath,
    KpathTransformed,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Coeff {
    Resolvent,
    Exponential,
    Series,
    Monomial,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum NormArg {
    Diag,
    Communicability,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Method {
    Exact,
    Xnystrace,
    Hutchinson,
}

#[derive(Subcommand)]
enum Command {
    /// Basic graph statistics
    Info {
        #[command(flatten)]
        graph: GraphArgs,
    },
    /// Spectral radii of the adjacency matrix and the companion operator
    Spectral {
        #[command(flatten)]
        graph: GraphArgs,
        #[arg(long, default_value_t = 1.0)]
        mu: f64,
    },
    /// Row sums of the length-k walk count matrix q_k
    Walks {
        #[command(flatten)]
        graph: GraphArgs,
        #[arg(long, default_value_t = 0.0)]
        mu: f64,
        #[arg(long, default_value_t = 3)]
        k: usize,
    },
    /// Apply the operator to a point mass or the all-ones vector
    Apply {
        #[command(flatten)]
        graph: GraphArgs,
        #[command(flatten)]
        op: OperatorArgs,
        /// Apply to the indicator of this node instead of the ones vector
        #[arg(long)]
        node: Option<usize>,
    },
    /// Continuous diffusion exp(-t L) from a point mass
    Diffuse {
        #[command(flatten)]
        graph: GraphArgs,
        #[command(flatten)]
        op: OperatorArgs,
        #[arg(long, default_value_t = 1.0)]
        t: f64,
        #[arg(long, default_value_t = 0)]
        start: usize,
    },
    /// Stationary distribution of the induced Markov chain
    Stationary {
        #[command(flatten)]
        graph: GraphArgs,
        #[command(flatten)]
        op: OperatorArgs,
        #[arg(long, value_enum, default_value_t = NormArg::Diag)]
        normalization: NormArg,
    },
    /// Run the chain from a point mass, reporting support growth
    Explore {
        #[command(flatten)]
        graph: GraphArgs,
        #[command(flatten)]
        op: OperatorArgs,
        #[arg(long, value_enum, default_value_t = NormArg::Diag)]
        normalization: NormArg,
        #[arg(long, default_value_t = 0)]
        start: usize,
        #[arg(long, default_value_t = 80)]
        steps: usize,
        #[arg(long, default_value_t = 1e-3)]
        support_tol: f64,
        /// Steps at which to snapshot the distribution
        #[arg(long, default_value = "20,40,80")]
        checkpoints: String,
    },
    /// Spectral gap of the induced chain
    Gap {
        #[command(flatten)]
        graph: GraphArgs,
        #[command(flatten)]
        op: OperatorArgs,
        #[arg(long, value_enum, default_value_t = NormArg::Diag)]
        normalization: NormArg,
    },
    /// Average return probability tr(exp(-t L)) / n
    ReturnProb {
        #[command(flatten)]
        graph: GraphArgs,
        #[command(flatten)]
        op: OperatorArgs,
        /// Times as start:end:count (inclusive linspace) or a comma list
        #[arg(long, default_value = "0:10:30")]
        times: String,
        #[arg(long, value_enum, default_value_t = Method::Xnystrace)]
        method: Method,
        #[arg(long, default_value_t = 4)]
        probes: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Exact and randomized return probability side by side
    Compare {
        #[command(flatten)]
        graph: GraphArgs,
        #[command(flatten)]
        op: OperatorArgs,
        #[arg(long, default_value = "0:10:30")]
        times: String,
        #[arg(long, default_value_t = 4)]
        probes: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Stationary distributions on the 13-node trap graph across the
    /// operator family panels
    Reproduce {
        /// Experiment name; `trap` is the only one
        #[arg(default_value = "trap")]
        experiment: String,
    },
}

fn resolve_graph(args: &GraphArgs) -> Result<Graph> {
    let g = match (&args.graph, &args.gen) {
        (Some(path), None) => {
            let p = Path::new(path);
            if p.exists() {
                load_graph(p)?
            } else if let Ok(dir) = std::env::var(DATA_DIR_ENV) {
                let candidate = Path::new(&dir).join(path);
                if candidate.exists() {
                    load_graph(&candidate)?
                } else {
                    return Err(Error::UnknownGraph(path.clone()));
                }
            } else {
                return Err(Error::UnknownGraph(path.clone()));
            }
        }
        (None, Some(spec)) => generate(spec)?,
        _ => {
            return Err(Error::InvalidParameter(
                "exactly one of --graph or --gen is required".into(),
            ))
        }
    };
    Ok(if args.largest_component {
        g.largest_component().0
    } else {
        g
    })
}

fn build_coeff(args: &OperatorArgs, graph: &Graph) -> Result<CoefficientFunction> {
    Ok(match args.coeff {
        Coeff::Resolvent => {
            let alpha = match args.alpha {
                Some(a) => a,
                None => {
                    let rho = spectral_radius_z(graph, args.mu, 1e-10, 100_000)?;
                    1.0 / (2.0 * rho)
                }
            };
            CoefficientFunction::Resolvent { alpha }
        }
        Coeff::Exponential => CoefficientFunction::Exponential { beta: args.beta },
        Coeff::Series => {
            let raw = args.coeffs.as_deref().ok_or_else(|| {
                Error::InvalidParameter("--coeffs is required for the series family".into())
            })?;
            let coeffs: Result<Vec<f64>> = raw
                .split(',')
                .map(|s| {
                    s.trim()
                        .parse::<f64>()
                        .map_err(|e| Error::Parse(format!("bad coefficient {s:?}: {e}")))
                })
                .collect();
            CoefficientFunction::TruncatedSeries { coeffs: coeffs? }
        }
        Coeff::Monomial => CoefficientFunction::Monomial { k: args.k },
    })
}

fn build_operator<'g>(args: &OperatorArgs, graph: &'g Graph) -> Result<LaplacianOperator<'g>> {
    let kind = match args.family {
        Family::Standard => OperatorKind::Standard,
        Family::Kwalk => OperatorKind::KWalk { k: args.k },
        Family::Transformed => OperatorKind::Transformed { f: build_coeff(args, graph)? },
        Family::Kpath => OperatorKind::KPath { k: args.k },
        Family::KpathTransformed => OperatorKind::KPathTransformed {
            f: build_coeff(args, graph)?,
            kmax: args.kmax,
        },
    };
    LaplacianOperator::new(graph, kind, args.mu)
}

fn parse_times(spec: &str) -> Result<Vec<f64>> {
    if spec.contains(':') {
        let parts: Vec<&str> = spec.split(':').collect();
        if parts.len() != 3 {
            return Err(Error::Parse(format!("expected start:end:count, got {spec:?}")));
        }
        let start: f64 = parts[0]
            .parse()
            .map_err(|e| Error::Parse(format!("bad start: {e}")))?;
        let end: f64 = parts[1]
            .parse()
            .map_err(|e| Error::Parse(format!("bad end: {e}")))?;
        let count: usize = parts[2]
            .parse()
            .map_err(|e| Error::Parse(format!("bad count: {e}")))?;
        if count < 2 {
            return Ok(vec![start]);
        }
        Ok((0..count)
            .map(|i| start + (end - start) * i as f64 / (count - 1) as f64)
            .collect())
    } else {
        spec.split(',')
            .map(|s| {
                s.trim()
                    .parse::<f64>()
                    .map_err(|e| Error::Parse(format!("bad time {s:?}: {e}")))
            })
            .collect()
    }
}

/// Tabular output: a comment header plus named columns, rendered as CSV or
/// JSON.
struct Table {
    header: String,
    columns: Vec<String>,
    rows: Vec<Vec<String>>,
}

impl Table {
    fn new(columns: &[&str]) -> Table {
        let args: Vec<String> = std::env::args().skip(1).collect();
        Table {
            header: format!("walklap {} | {}", env!("CARGO_PKG_VERSION"), args.join(" ")),
            columns: columns.iter().map(|s| s.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    fn row(&mut self, cells: Vec<String>) {
        debug_assert_eq!(cells.len(), self.columns.len());
        self.rows.push(cells);
    }

    fn write_csv(&self, w: &mut dyn Write) -> std::io::Result<()> {
        writeln!(w, "# {}", self.header)?;
        writeln!(w, "{}", self.columns.join(","))?;
        for r in &self.rows {
            writeln!(w, "{}", r.join(","))?;
        }
        Ok(())
    }

    fn write_json(&self, w: &mut dyn Write) -> std::io::Result<()> {
        let rows: Vec<serde_json::Value> = self
            .rows
            .iter()
            .map(|r| {
                let obj: serde_json::Map<String, serde_json::Value> = self
                    .columns
                    .iter()
                    .zip(r)
                    .map(|(c, v)| {
                        let val = v
                            .parse::<f64>()
                            .map(|f| serde_json::json!(f))
                            .unwrap_or_else(|_| serde_json::json!(v));
                        (c.clone(), val)
                    })
                    .collect();
                serde_json::Value::Object(obj)
            })
            .collect();
        let doc = serde_json::json!({ "meta": self.header, "rows": rows });
        writeln!(w, "{}", serde_json::to_string_pretty(&doc)?)
    }
}

fn fmt(v: f64) -> String {
    format!("{v:.12e}")
}

fn vector_table(label: &str, v: &[f64]) -> Table {
    let mut t = Table::new(&["node", label]);
    for (i, x) in v.iter().enumerate() {
        t.row(vec![i.to_string(), fmt(*x)]);
    }
    t
}

fn run(cli: &Cli) -> Result<Table> {
    match &cli.command {
        Command::Info { graph } => {
            let g = resolve_graph(graph)?;
            let degs = g.degrees();
            let mut t = Table::new(&["key", "value"]);
            t.row(vec!["nodes".into(), g.num_nodes().to_string()]);
            t.row(vec!["edges".into(), g.num_edges().to_string()]);
            t.row(vec![
                "min_degree".into(),
                degs.iter().cloned().fold(f64::INFINITY, f64::min).to_string(),
            ]);
            t.row(vec!["max_degree".into(), g.max_degree().to_string()]);
            t.row(vec!["connected".into(), g.is_connected().to_string()]);
            Ok(t)
        }
        Command::Spectral { graph, mu } => {
            let g = resolve_graph(graph)?;
            let ra = spectral_radius_adjacency(&g, 1e-10, 100_000)?;
            let rz = spectral_radius_z(&g, *mu, 1e-10, 100_000)?;
            let mut t = Table::new(&["quantity", "value"]);
            t.row(vec!["rho_adjacency".into(), fmt(ra)]);
            t.row(vec![format!("rho_z_mu_{mu}"), fmt(rz)]);
            Ok(t)
        }
        Command::Walks { graph, mu, k } => {
            let g = resolve_graph(graph)?;
            let op = LaplacianOperator::new(&g, OperatorKind::KWalk { k: *k }, *mu)?;
            Ok(vector_table("walk_count_row_sum", op.shift_diagonal()))
        }
        Command::Apply { graph, op, node } => {
            let g = resolve_graph(graph)?;
            let lap = build_operator(op, &g)?;
            let n = g.num_nodes();
            let x = match node {
                Some(i) => {
                    if *i >= n {
                        return Err(Error::IndexOutOfBounds { index: *i, size: n });
                    }
                    let mut e = vec![0.0; n];
                    e[*i] = 1.0;
                    e
                }
                None => vec![1.0; n],
            };
            use walklap::krylov::LinOp;
            Ok(vector_table("laplacian_apply", &lap.apply(&x)))
        }
        Command::Diffuse { graph, op, t, start } => {
            let g = resolve_graph(graph)?;
            let lap = build_operator(op, &g)?;
            let n = g.num_nodes();
            if *start >= n {
                return Err(Error::IndexOutOfBounds { index: *start, size: n });
            }
            let mut x0 = vec![0.0; n];
            x0[*start] = 1.0;
            let y = diffuse(&lap, &x0, *t, 1e-10, 400)?;
            Ok(vector_table("mass", &y))
        }
        Command::Stationary { graph, op, normalization } => {
            let g = resolve_graph(graph)?;
            let lap = build_operator(op, &g)?;
            let chain = MarkovChain::new(&lap, to_norm(*normalization))?;
            Ok(vector_table("stationary", &chain.stationary()))
        }
        Command::Explore { graph, op, normalization, start, steps, support_tol, checkpoints } => {
            let g = resolve_graph(graph)?;
            let lap = build_operator(op, &g)?;
            let chain = MarkovChain::new(&lap, to_norm(*normalization))?;
            let cps: Result<Vec<usize>> = checkpoints
                .split(',')
                .map(|s| {
                    s.trim()
                        .parse::<usize>()
                        .map_err(|e| Error::Parse(format!("bad checkpoint {s:?}: {e}")))
                })
                .collect();
            let h = exploration_history(&chain, *start, *steps, *support_tol, &cps?)?;
            let mut t = Table::new(&["step", "support_size"]);
            for (s, sz) in h.support_sizes.iter().enumerate() {
                t.row(vec![s.to_string(), sz.to_string()]);
            }
            Ok(t)
        }
        Command::Gap { graph, op, normalization } => {
            let g = resolve_graph(graph)?;
            let lap = build_operator(op, &g)?;
            let chain = MarkovChain::new(&lap, to_norm(*normalization))?;
            let mut t = Table::new(&["quantity", "value"]);
            t.row(vec!["spectral_gap".into(), fmt(chain.spectral_gap()?)]);
            Ok(t)
        }
        Command::ReturnProb { graph, op, times, method, probes, seed } => {
            let g = resolve_graph(graph)?;
            let lap = build_operator(op, &g)?;
            let ts = parse_times(times)?;
            let mut t = Table::new(&["t", "return_probability", "std_error"]);
            match method {
                Method::Exact => {
                    for (tv, p) in ts.iter().zip(exact_return_probability(&lap, &ts)?) {
                        t.row(vec![fmt(*tv), fmt(p), fmt(0.0)]);
                    }
                }
                Method::Xnystrace => {
                    let cfg = XNysTraceConfig {
                        num_probes: *probes,
                        seed: *seed,
                        ..Default::default()
                    };
                    for (tv, e) in ts.iter().zip(xnystrace_exp(&lap, &ts, &cfg)?) {
                        t.row(vec![fmt(*tv), fmt(e.estimate), fmt(e.std_error)]);
                    }
                }
                Method::Hutchinson => {
                    for (tv, e) in
                        ts.iter().zip(hutchinson_exp(&lap, &ts, (*probes).max(2), 60, *seed)?)
                    {
                        t.row(vec![fmt(*tv), fmt(e.estimate), fmt(e.std_error)]);
                    }
                }
            }
            Ok(t)
        }
        Command::Compare { graph, op, times, probes, seed } => {
            let g = resolve_graph(graph)?;
            let lap = build_operator(op, &g)?;
            let ts = parse_times(times)?;
            let exact = exact_return_probability(&lap, &ts)?;
            let cfg =
                XNysTraceConfig { num_probes: *probes, seed: *seed, ..Default::default() };
            let est = xnystrace_exp(&lap, &ts, &cfg)?;
            let mut t = Table::new(&["t", "exact", "estimate", "std_error", "abs_error"]);
            for ((tv, x), e) in ts.iter().zip(&exact).zip(&est) {
                t.row(vec![
                    fmt(*tv),
                    fmt(*x),
                    fmt(e.estimate),
                    fmt(e.std_error),
                    fmt((e.estimate - x).abs()),
                ]);
            }
            Ok(t)
        }
        Command::Reproduce { experiment } => {
            if experiment != "trap" {
                return Err(Error::InvalidParameter(format!(
                    "unknown experiment {experiment:?} (available: trap)"
                )));
            }
            reproduce_trap()
        }
    }
}

/// Stationary distributions on the trap graph (a 5-node path with 8 leaves
/// on the middle node) for the standard Laplacian and several transformed
/// operators, the small worked example where hub trapping shows up.
fn reproduce_trap() -> Result<Table> {
    let g = generate("trap:5x8")?;
    let n = g.num_nodes();
    let mut t = Table::new(&["panel", "node", "stationary"]);
    let emit = |panel: &str, pi: &[f64], t: &mut Table| {
        for (i, p) in pi.iter().enumerate() {
            t.row(vec![panel.to_string(), i.to_string(), fmt(*p)]);
        }
    };
    // standard Laplacian: degree-proportional
    {
        let op = LaplacianOperator::new(&g, OperatorKind::Standard, 0.0)?;
        let chain = MarkovChain::new(&op, Normalization::DiagOperator)?;
        emit("standard", &chain.stationary(), &mut t);
    }
    // resolvent-transformed at alpha = 1 / (2 rho(A)), walk counting (mu=0)
    {
        let rho = spectral_radius_adjacency(&g, 1e-12, 100_000)?;
        let f = CoefficientFunction::Resolvent { alpha: 1.0 / (2.0 * rho) };
        let op = LaplacianOperator::new(&g, OperatorKind::Transformed { f }, 0.0)?;
        let chain = MarkovChain::new(&op, Normalization::TotalCommunicability)?;
        emit("resolvent", &chain.stationary(), &mut t);
    }
    // exponential-transformed, walk counting and nonbacktracking
    for (label, mu) in [("exp", 0.0), ("exp_nbt", 1.0)] {
        let f = CoefficientFunction::Exponential { beta: 1.0 };
        let op = LaplacianOperator::new(&g, OperatorKind::Transformed { f }, mu)?;
        let chain = MarkovChain::new(&op, Normalization::TotalCommunicability)?;
        emit(label, &chain.stationary(), &mut t);
    }
    // k-path transformed with geometrically decaying path weights
    {
        let coeffs: Vec<f64> = (0..=n).map(|k| (-(k as f64)).exp()).collect();
        let f = CoefficientFunction::TruncatedSeries { coeffs };
        let op =
            LaplacianOperator::new(&g, OperatorKind::KPathTransformed { f, kmax: n }, 0.0)?;
        let chain = MarkovChain::new(&op, Normalization::DiagOperator)?;
        emit("kpath_exp", &chain.stationary(), &mut t);
    }
    Ok(t)
}

fn to_norm(n: NormArg) -> Normalization {
    match n {
        NormArg::Diag => Normalization::DiagOperator,
        NormArg::Communicability => Normalization::TotalCommunicability,
    }
}

fn main() {
    env_logger::init();
    let cli = Cli::parse();
    if let Some(threads) = cli.threads {
        // ignore failure: the pool may already be initialized in tests
        let _ = rayon::ThreadPoolBuilder::new().num_threads(threads).build_global();
    }
    let table = match run(&cli) {
        Ok(t) => t,
        Err(e) => {
            eprintln!("error: {e}");
            std::process::exit(1);
        }
    };
    let result = match &cli.output {
        Some(path) => {
            let write = || -> std::io::Result<()> {
                let mut f = std::fs::File::create(path)?;
                if cli.json {
                    table.write_json(&mut f)
                } else {
                    table.write_csv(&mut f)
                }
            };
            let r = write();
            if r.is_err() {
                // don't leave a truncated file behind
                let _ = std::fs::remove_file(path);
            }
            r
        }
        None => {
            let stdout = std::io::stdout();
            let mut lock = stdout.lock();
            if cli.json {
                table.write_json(&mut lock)
            } else {
                table.write_csv(&mut lock)
            }
        }
    };
    if let Err(e) = result {
        eprintln!("error: {e}");
        std::process::exit(1);
    }
}
