//! `mtm`: dataset generation, replicate experiments, trial-count tuning, and
//! exact spectral diagnostics from the command line.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use mtm_core::experiment::{
    render_report, run_experiment, tune_first_replicate, write_report, ExperimentConfig,
    ModelConfig, ReportFormat,
};
use mtm_core::spectral::{analyze_sampler, EnumeratedSpace};
use mtm_core::tuner::{select_num_trials, RatioScan, TunerEstimates};
use mtm_core::{Balancing, SamplerSpec, WeightSpec};

#[derive(Parser)]
#[command(name = "mtm", version, about = "Multiple-try Metropolis experiment driver")]
struct Cli {
    /// Worker threads for replicate runs. Defaults to the rayon environment
    /// (RAYON_NUM_THREADS or one per core). Never changes sampled values.
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write a synthetic dataset (design/response CSV or graph edge list).
    Datagen(DatagenArgs),
    /// Run a replicate experiment from a config file.
    Run(RunArgs),
    /// Select the number of trials from a one-shot neighborhood scan.
    TuneN(TuneArgs),
    /// Exact transition-matrix diagnostics on a toy target.
    Spectral(SpectralArgs),
}

#[derive(Args)]
struct DatagenArgs {
    /// JSON file holding a model family and its generator parameters.
    #[arg(long)]
    config: PathBuf,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Dataset path; the generating truth lands next to it in
    /// `<out>.truth.json`.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct RunArgs {
    /// JSON experiment configuration.
    #[arg(long)]
    config: PathBuf,
    /// Master-seed override.
    #[arg(long)]
    seed: Option<u64>,
    /// Report path; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    format: Format,
}

#[derive(Args)]
struct TuneArgs {
    /// Scan replicate 0 of this experiment configuration.
    #[arg(long, conflicts_with = "synthetic")]
    config: Option<PathBuf>,
    /// Use the built-in synthetic scan (p = 100, 95 neighbors at ratio
    /// p^-1 and 5 at p^3) instead of a dataset.
    #[arg(long)]
    synthetic: bool,
    #[arg(long, default_value_t = 0.9)]
    psi: f64,
}

#[derive(Args)]
struct SpectralArgs {
    /// Toy target: `hypercube<m>` (m <= 16) or `cycle<n>` (n >= 3).
    #[arg(long)]
    toy: String,
    #[arg(long, value_enum, default_value_t = SamplerKind::Mh)]
    sampler: SamplerKind,
    /// Trial count for `--sampler mtm`.
    #[arg(long, default_value_t = 2)]
    trials: usize,
    #[arg(long, value_enum, default_value_t = WeightArg::Sqrt)]
    weight: WeightArg,
    /// Total-variation threshold for the mixing time.
    #[arg(long, default_value_t = 0.25)]
    eps: f64,
    /// Report path; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Csv,
    Json,
}

impl From<Format> for ReportFormat {
    fn from(f: Format) -> Self {
        match f {
            Format::Csv => ReportFormat::Csv,
            Format::Json => ReportFormat::Json,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum SamplerKind {
    Mh,
    Mtm,
    Lbmh,
}

#[derive(Clone, Copy, ValueEnum)]
enum WeightArg {
    Ord,
    Sqrt,
    Min,
    Max,
}

impl WeightArg {
    fn weight_spec(self) -> WeightSpec {
        match self {
            WeightArg::Ord => WeightSpec::Ordinary,
            WeightArg::Sqrt => WeightSpec::Balanced { balancing: Balancing::Sqrt },
            WeightArg::Min => WeightSpec::Balanced { balancing: Balancing::Min1 },
            WeightArg::Max => WeightSpec::Balanced { balancing: Balancing::Max1 },
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(k) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(k).build_global() {
            eprintln!("error: {e}");
            return ExitCode::FAILURE;
        }
    }
    let result = match cli.command {
        Command::Datagen(args) => datagen(args),
        Command::Run(args) => run(args),
        Command::TuneN(args) => tune_n(args),
        Command::Spectral(args) => spectral(args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}

type CmdResult = Result<(), Box<dyn std::error::Error>>;

fn load_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T, Box<dyn std::error::Error>> {
    let f = std::fs::File::open(path)
        .map_err(|e| format!("cannot open {}: {e}", path.display()))?;
    Ok(serde_json::from_reader(std::io::BufReader::new(f))
        .map_err(|e| format!("{}: {e}", path.display()))?)
}

fn write_truth<T: Serialize>(out: &Path, truth: &T) -> CmdResult {
    let mut path = out.as_os_str().to_owned();
    path.push(".truth.json");
    let f = std::io::BufWriter::new(std::fs::File::create(PathBuf::from(path))?);
    serde_json::to_writer_pretty(f, truth)?;
    Ok(())
}

fn datagen(args: DatagenArgs) -> CmdResult {
    let model: ModelConfig = load_json(&args.config)?;
    let mut rng = ChaCha8Rng::seed_from_u64(args.seed);
    match model {
        ModelConfig::Bvs { gen, .. } => {
            let (data, support, beta) = mtm_core::bvs::generate_dataset(&gen, &mut rng)?;
            mtm_core::bvs::write_csv(&data, &args.out)?;
            write_truth(&args.out, &serde_json::json!({ "support": support, "beta": beta }))?;
            eprintln!("wrote {} ({} x {})", args.out.display(), data.n(), data.p());
        }
        ModelConfig::Sbm { p, k, a, b } => {
            let (graph, labels) = mtm_core::sbm::generate_graph(p, k, a, b, &mut rng)?;
            mtm_core::sbm::write_edge_csv(&graph, &args.out)?;
            write_truth(&args.out, &serde_json::json!({ "labels": labels }))?;
            eprintln!(
                "wrote {} ({} nodes, {} edges)",
                args.out.display(),
                p,
                graph.num_edges()
            );
        }
        ModelConfig::Toy { .. } => {
            return Err("the toy target is analytic; nothing to generate".into())
        }
    }
    Ok(())
}

fn run(args: RunArgs) -> CmdResult {
    let mut config: ExperimentConfig = load_json(&args.config)?;
    if let Some(seed) = args.seed {
        config.seed = seed;
    }
    let report = run_experiment(&config)?;
    let s = &report.summary;
    eprintln!(
        "{} replicates, {} hit; median H {}, median T_H {}",
        s.replicates,
        s.hits,
        s.median_h.map_or("Fail".into(), |h| format!("{h}")),
        s.median_t_h_seconds
            .map_or("Fail".into(), |t| format!("{t:.3e}s")),
    );
    match &args.out {
        Some(path) => write_report(&report, path, args.format.into())?,
        None => render_report(&report, &mut std::io::stdout().lock(), args.format.into())?,
    }
    Ok(())
}

fn print_estimates(est: &TunerEstimates) {
    println!("t1_hat = {}", est.t1_hat);
    println!("t2_hat = {}", est.t2_hat);
    println!("s0_hat = {}", est.s0_hat);
    println!("psi = {}", est.psi);
    println!("degenerate = {}", est.degenerate);
    println!("N = {}", est.n_selected);
}

fn tune_n(args: TuneArgs) -> CmdResult {
    let est = if args.synthetic {
        let mut ratios = vec![-1.0; 95];
        ratios.extend([3.0; 5]);
        let scan = RatioScan { ratios, t3: 1.0, t4: 1.0, p: 100 };
        select_num_trials(&scan, args.psi)?
    } else {
        let path = args
            .config
            .as_deref()
            .ok_or("pass --config <file> or --synthetic")?;
        let config: ExperimentConfig = load_json(path)?;
        tune_first_replicate(&config, args.psi)?
    };
    print_estimates(&est);
    Ok(())
}

fn toy_space(name: &str) -> Result<EnumeratedSpace, Box<dyn std::error::Error>> {
    if let Some(m) = name.strip_prefix("hypercube") {
        let m: usize = m.parse().map_err(|_| format!("bad toy name {name}"))?;
        return Ok(EnumeratedSpace::hypercube(m, (1u64 << m) - 1)?);
    }
    if let Some(n) = name.strip_prefix("cycle") {
        let n: usize = n.parse().map_err(|_| format!("bad toy name {name}"))?;
        // Unimodal ring: pi falls off exponentially with ring distance from 0.
        let weights: Vec<f64> = (0..n)
            .map(|i| (-(i.min(n - i) as f64)).exp())
            .collect();
        return Ok(EnumeratedSpace::cycle(&weights)?);
    }
    Err(format!("unknown toy target {name}; use hypercube<m> or cycle<n>").into())
}

fn spectral(args: SpectralArgs) -> CmdResult {
    let space = toy_space(&args.toy)?;
    let spec = match args.sampler {
        SamplerKind::Mh => SamplerSpec::Mh,
        SamplerKind::Mtm => SamplerSpec::Mtm {
            num_trials: args.trials,
            weight: args.weight.weight_spec(),
        },
        SamplerKind::Lbmh => match args.weight.weight_spec() {
            WeightSpec::Balanced { balancing } => SamplerSpec::Lbmh { balancing },
            WeightSpec::Ordinary => {
                return Err("the exhaustive sampler needs a balanced weight".into())
            }
        },
    };
    let report = analyze_sampler(&space, &args.toy, &spec, args.eps)?;
    match &args.out {
        Some(path) => {
            let f = std::io::BufWriter::new(std::fs::File::create(path)?);
            serde_json::to_writer_pretty(f, &report)?;
        }
        None => {
            serde_json::to_writer_pretty(std::io::stdout().lock(), &report)?;
            println!();
        }
    }
    Ok(())
}
