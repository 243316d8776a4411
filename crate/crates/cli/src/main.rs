use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use hwnas_core::analysis::{ecdf, ecdf_to_csv, fit_power_law, rfe_rank, Stratum};
use hwnas_core::bench::{
    dataset_columns, evaluate_bundle, fit_bundle, parse_stratum, record_column, space_for,
    BenchConfig, BenchContext, Dataset, FitPlan, Predictor, SurrogateBundle,
};
use hwnas_core::metrics::{correlation_matrix, median, CorrelationMethod, MetricColumn};
use hwnas_core::moo::RunResult;
use hwnas_core::oracle::HwMetric;
use hwnas_core::pareto::{eaf_surfaces, surfaces_to_csv};
use hwnas_core::rng::stream;
use hwnas_core::space::{cardinality, sample_uniform};
use hwnas_core::surrogate::{encode_rows, Persist, ScalarTarget, SurrogateEvaluation};

#[derive(Parser)]
#[command(name = "hwnas", version, about = "Hardware-aware multi-objective architecture search benchmark")]
struct Cli {
    /// Search space preset (gpt-s, gpt-m, gpt-l, *-wide, toy).
    #[arg(long, global = true)]
    space: Option<String>,
    /// Master seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output file or directory; stdout when omitted for file outputs.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// TOML configuration file; flags override its values.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Search space utilities.
    #[command(subcommand)]
    Space(SpaceCmd),
    /// Dataset generation.
    #[command(subcommand)]
    Dataset(DatasetCmd),
    /// Surrogate fitting and evaluation.
    #[command(subcommand)]
    Surrogate(SurrogateCmd),
    /// Run a search baseline over several seeds.
    Run(RunArgs),
    /// Attainment surfaces of saved runs.
    Eaf(EafArgs),
    /// Statistical analyses of a dataset.
    #[command(subcommand)]
    Analyze(AnalyzeCmd),
}

#[derive(Subcommand)]
enum SpaceCmd {
    /// Print the exact number of architectures.
    Count,
    /// Print uniformly sampled architectures as JSON lines.
    Sample {
        #[arg(long, default_value_t = 10)]
        n: usize,
        #[arg(long)]
        unique: bool,
    },
}

#[derive(Subcommand)]
enum DatasetCmd {
    Generate {
        #[arg(long)]
        n: Option<usize>,
        #[arg(long)]
        k_lat: Option<usize>,
        #[arg(long)]
        k_energy: Option<usize>,
        /// Comma-separated device names; default every device.
        #[arg(long, value_delimiter = ',')]
        devices: Vec<String>,
    },
}

#[derive(Subcommand)]
enum SurrogateCmd {
    /// Fit surrogates on the training split of a dataset.
    Fit {
        #[arg(long)]
        data: PathBuf,
        /// Scalar targets (perplexity, params, flops, mem_bytes).
        #[arg(long, value_delimiter = ',', default_value = "perplexity")]
        targets: Vec<String>,
        /// Hardware metrics (latency, energy).
        #[arg(long, value_delimiter = ',', default_value = "latency,energy")]
        metrics: Vec<String>,
        #[arg(long, value_delimiter = ',')]
        devices: Vec<String>,
        #[arg(long)]
        epochs: Option<usize>,
        #[arg(long)]
        trees: Option<usize>,
    },
    /// Evaluate a fitted bundle on its held-out split.
    Eval {
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        model: PathBuf,
    },
}

#[derive(Args)]
struct RunArgs {
    #[arg(long)]
    method: String,
    /// Comma-separated objectives such as `perplexity,latency/rtx2080:median`.
    #[arg(long, value_delimiter = ',')]
    objectives: Vec<String>,
    #[arg(long)]
    budget: Option<usize>,
    #[arg(long, value_delimiter = ',')]
    seeds: Vec<u64>,
    /// oracle or surrogate.
    #[arg(long, default_value = "oracle")]
    predictor: String,
    /// Surrogate bundle, required with `--predictor surrogate`.
    #[arg(long)]
    model: Option<PathBuf>,
}

#[derive(Args)]
struct EafArgs {
    /// Run JSON files.
    #[arg(required = true)]
    runs: Vec<PathBuf>,
    #[arg(long, value_delimiter = ',')]
    levels: Vec<f64>,
}

#[derive(Subcommand)]
enum AnalyzeCmd {
    /// Fit the perplexity power law by OLS in log space.
    Powerlaw {
        #[arg(long)]
        data: PathBuf,
    },
    /// Recursive feature elimination over the architecture encoding.
    Rfe {
        #[arg(long)]
        data: PathBuf,
        #[arg(long, default_value = "perplexity")]
        target: String,
    },
    /// Correlation matrix of every dataset metric.
    Corr {
        #[arg(long)]
        data: PathBuf,
        #[arg(long, default_value = "kendall")]
        method: String,
    },
    /// Empirical CDFs of a metric, optionally per stratum.
    Ecdf {
        #[arg(long)]
        data: PathBuf,
        #[arg(long, default_value = "perplexity")]
        metric: String,
        /// Strata such as `layers=max&embed=max`; repeatable.
        #[arg(long)]
        stratum: Vec<String>,
    },
}

fn load_config(cli: &Cli) -> Result<BenchConfig> {
    let mut cfg = match &cli.config {
        Some(p) => BenchConfig::load(p).with_context(|| format!("reading {}", p.display()))?,
        None => BenchConfig::default(),
    };
    if let Some(s) = &cli.space {
        cfg.space = s.clone();
    }
    if let Some(s) = cli.seed {
        cfg.seed = s;
    }
    Ok(cfg)
}

fn emit(out: Option<&Path>, text: &str) -> Result<()> {
    match out {
        Some(p) => std::fs::write(p, text).with_context(|| format!("writing {}", p.display())),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn read_dataset(path: &Path) -> Result<Dataset> {
    Dataset::read(path).with_context(|| format!("reading dataset {}", path.display()))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

fn dispatch(cli: &Cli) -> Result<()> {
    let mut cfg = load_config(cli)?;
    let out = cli.out.as_deref();
    match &cli.command {
        Command::Space(SpaceCmd::Count) => {
            emit(out, &format!("{}\n", cardinality(&space_for(&cfg.space)?)))
        }
        Command::Space(SpaceCmd::Sample { n, unique }) => {
            let spec = space_for(&cfg.space)?;
            let archs = sample_uniform(&spec, *n, *unique, &mut stream(cfg.seed, 0))?;
            let mut text = String::new();
            for a in archs {
                text.push_str(&serde_json::to_string(&a)?);
                text.push('\n');
            }
            emit(out, &text)
        }
        Command::Dataset(DatasetCmd::Generate {
            n,
            k_lat,
            k_energy,
            devices,
        }) => {
            cfg.n = n.unwrap_or(cfg.n);
            cfg.k_lat = k_lat.unwrap_or(cfg.k_lat);
            cfg.k_energy = k_energy.unwrap_or(cfg.k_energy);
            if !devices.is_empty() {
                cfg.devices = devices.clone();
            }
            let ctx = BenchContext::from_config(&cfg)?;
            let d = ctx.generate_dataset(cfg.n, cfg.k_lat, cfg.k_energy, &cfg.devices, cfg.seed)?;
            emit(out, &d.to_jsonl()?)
        }
        Command::Surrogate(SurrogateCmd::Fit {
            data,
            targets,
            metrics,
            devices,
            epochs,
            trees,
        }) => {
            cfg.mlp_epochs = epochs.unwrap_or(cfg.mlp_epochs);
            cfg.forest_trees = trees.unwrap_or(cfg.forest_trees);
            let d = read_dataset(data)?;
            let plan = FitPlan {
                targets: targets.iter().map(|t| ScalarTarget::parse(t)).collect::<Result<_, _>>()?,
                hw_metrics: metrics.iter().map(|m| HwMetric::parse(m)).collect::<Result<_, _>>()?,
                devices: devices.clone(),
            };
            let bundle = fit_bundle(&d, &cfg, &plan)?;
            emit(out, &bundle.to_json()?)
        }
        Command::Surrogate(SurrogateCmd::Eval { data, model }) => {
            let d = read_dataset(data)?;
            let bundle = SurrogateBundle::from_json(&std::fs::read_to_string(model)?)?;
            let rows = evaluate_bundle(&bundle, &d, cfg.quantiles)?;
            let mut text = format!("{}\n", SurrogateEvaluation::table_header());
            for r in &rows {
                text.push_str(&r.table_row());
                text.push('\n');
            }
            emit(out, &text)
        }
        Command::Run(args) => run(&cfg, args, out),
        Command::Eaf(args) => {
            let runs = args
                .runs
                .iter()
                .map(|p| {
                    let text = std::fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
                    Ok(RunResult::from_json(&text)?)
                })
                .collect::<Result<Vec<_>>>()?;
            let fronts: Vec<_> = runs.iter().map(RunResult::front).collect();
            let levels = if args.levels.is_empty() { &cfg.eaf_levels } else { &args.levels };
            emit(out, &surfaces_to_csv(&eaf_surfaces(&fronts, levels)?))
        }
        Command::Analyze(cmd) => analyze(&cfg, cmd, out),
    }
}

fn run(cfg: &BenchConfig, args: &RunArgs, out: Option<&Path>) -> Result<()> {
    let mut ctx = BenchContext::from_config(cfg)?;
    let predictor = Predictor::parse(&args.predictor)?;
    if predictor == Predictor::Surrogate {
        let Some(model) = &args.model else {
            bail!("--predictor surrogate needs --model");
        };
        ctx.surrogates = SurrogateBundle::from_json(&std::fs::read_to_string(model)?)?;
        if ctx.surrogates.space != ctx.space().name {
            bail!("bundle was fitted on `{}`, not `{}`", ctx.surrogates.space, ctx.space().name);
        }
    }
    let objectives = if args.objectives.is_empty() { cfg.objectives.clone() } else { args.objectives.clone() };
    let seeds = if args.seeds.is_empty() { cfg.seeds.clone() } else { args.seeds.clone() };
    let budget = args.budget.unwrap_or(cfg.budget);
    let report = ctx.run_baseline(&args.method, &objectives, budget, &seeds, predictor)?;
    let dir = out.map_or_else(|| PathBuf::from("runs"), Path::to_path_buf);
    report.export(&dir)?;
    for r in &report.results {
        println!("{} seed {}: final HV {}", report.method, r.seed, r.final_hv().unwrap_or(f64::NAN));
    }
    let hvs: Vec<f64> = report.results.iter().filter_map(RunResult::final_hv).collect();
    println!("median final HV {}", median(&hvs));
    println!("wrote {}", dir.display());
    Ok(())
}

fn analyze(cfg: &BenchConfig, cmd: &AnalyzeCmd, out: Option<&Path>) -> Result<()> {
    match cmd {
        AnalyzeCmd::Powerlaw { data } => {
            let d = read_dataset(data)?;
            let fit = fit_power_law(&d.records)?;
            println!("{}", fit.report.to_table(&format!("log perplexity, {}", d.header.space)));
            let m = &fit.model;
            println!(
                "C = {} alpha = {} beta = {} gamma = {} delta = {} sigma = {}",
                m.c, m.alpha, m.beta, m.gamma, m.delta, m.sigma_b
            );
            if let Some(p) = out {
                emit(Some(p), &serde_json::to_string_pretty(&fit)?)?;
            }
            Ok(())
        }
        AnalyzeCmd::Rfe { data, target } => {
            let d = read_dataset(data)?;
            let spec = &d.header.space_spec;
            let y = match record_column(&d.records, target)? {
                MetricColumn::Scalar(v) => v,
                MetricColumn::Multi(rows) => rows.iter().map(|r| hwnas_core::metrics::mean(r)).collect(),
            };
            let rows = encode_rows(spec, &d.records.iter().map(|r| &r.arch).collect::<Vec<_>>())?;
            let mut forest = cfg.surrogate_config().forest;
            forest.n_trees = cfg.rfe_trees;
            let ranking = rfe_rank(&rows, &y, &spec.feature_names(), &forest, cfg.rfe_drop_per_round)?;
            emit(out, &ranking.to_csv())
        }
        AnalyzeCmd::Corr { data, method } => {
            let d = read_dataset(data)?;
            let m = correlation_matrix(&dataset_columns(&d)?, CorrelationMethod::parse(method)?)?;
            emit(out, &m.to_csv())
        }
        AnalyzeCmd::Ecdf { data, metric, stratum } => {
            let d = read_dataset(data)?;
            let values = match record_column(&d.records, metric)? {
                MetricColumn::Scalar(v) => v,
                MetricColumn::Multi(rows) => rows.iter().map(|r| hwnas_core::metrics::mean(r)).collect(),
            };
            let strata = stratum
                .iter()
                .map(|s| parse_stratum(&d.header.space_spec, s))
                .collect::<Result<Vec<Stratum<'static>>, _>>()?;
            let archs: Vec<_> = d.records.iter().map(|r| r.arch.clone()).collect();
            emit(out, &ecdf_to_csv(&ecdf(&values, &archs, &strata)?))
        }
    }
}
