use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use lsgt::data::{load_collection, save_collection, CollectionFormat, TimeSeries};
use lsgt::dist::{hash_str, stream_key, RngStream};
use lsgt::harness::{emit_report, fit_and_forecast, load_input, parse_quantiles, run_benchmark, ConfigOverrides, ReportFormat, RunConfig};
use lsgt::model::{ModelKind, PriorConfig, SeasonalPrior, VarianceMode};
use lsgt::sampler::Grids;
use lsgt::simulate::{sample_prior_predictive, ParameterOverrides, SimulationConfig};
use serde_json::json;

#[derive(Parser)]
#[command(name = "lsgt", version, about = "Bayesian exponential smoothing with global trend, fitted by Gibbs sampling")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Fit one series and forecast past its end.
    Fit(FitArgs),
    /// Hold out each series' horizon, fit, forecast and score.
    Benchmark(BenchmarkArgs),
    /// Generate synthetic series from the prior or from fixed parameters.
    Simulate(SimulateArgs),
}

#[derive(Args, Default)]
struct RunFlags {
    /// TOML file with run settings; flags override it.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Collection of series (.csv or .json).
    #[arg(long)]
    input: Option<PathBuf>,
    /// lgt, sgt or auto.
    #[arg(long)]
    model: Option<String>,
    /// homo or hetero.
    #[arg(long)]
    variance: Option<String>,
    /// horseshoe or cauchy:<scale>.
    #[arg(long)]
    seasonal_prior: Option<String>,
    #[arg(long)]
    iters: Option<usize>,
    #[arg(long)]
    burnin: Option<usize>,
    #[arg(long)]
    thinning: Option<usize>,
    #[arg(long)]
    chains: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    workers: Option<usize>,
    /// Comma-separated quantile levels, e.g. 0.05,0.5,0.95.
    #[arg(long)]
    quantiles: Option<String>,
    #[arg(long)]
    paths_per_draw: Option<usize>,
}

impl RunFlags {
    fn overrides(&self) -> lsgt::Result<ConfigOverrides> {
        Ok(ConfigOverrides {
            input: self.input.clone(),
            model: self.model.clone(),
            variance: self.variance.clone(),
            seasonal_prior: self.seasonal_prior.clone(),
            iters: self.iters,
            burnin: self.burnin,
            thinning: self.thinning,
            chains: self.chains,
            seed: self.seed,
            workers: self.workers,
            quantiles: self.quantiles.as_deref().map(parse_quantiles).transpose()?,
            paths_per_draw: self.paths_per_draw,
            ..Default::default()
        })
    }

    fn run_config(&self, extra: ConfigOverrides) -> lsgt::Result<RunConfig> {
        let mut cfg = RunConfig::default();
        if let Some(path) = &self.config {
            cfg.merge(&ConfigOverrides::load(path)?)?;
        }
        cfg.merge(&self.overrides()?)?;
        cfg.merge(&extra)?;
        if cfg.input.as_os_str().is_empty() {
            return Err(lsgt::Error::Config("--input is required (or set input in the config file)".into()));
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(Args)]
struct FitArgs {
    #[command(flatten)]
    run: RunFlags,
    /// Series to fit; defaults to the first one in the input.
    #[arg(long)]
    id: Option<String>,
    /// Write the JSON report here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct BenchmarkArgs {
    #[command(flatten)]
    run: RunFlags,
    /// Output directory for records and reports.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Only run the first N series.
    #[arg(long)]
    first_n: Option<usize>,
    /// Comma-separated report formats: json, csv, markdown.
    #[arg(long, default_value = "json,csv,markdown")]
    report: String,
}

#[derive(Args)]
struct SimulateArgs {
    /// Output collection (.csv or .json).
    #[arg(long)]
    out: PathBuf,
    /// Also write the generating parameters as JSON here.
    #[arg(long)]
    params_out: Option<PathBuf>,
    /// TOML file fixing some parameters; the rest come from the prior.
    #[arg(long)]
    params: Option<PathBuf>,
    #[arg(long, default_value_t = 10)]
    n_series: usize,
    #[arg(long, default_value_t = 40)]
    length: usize,
    #[arg(long, default_value_t = 1)]
    period: usize,
    #[arg(long, default_value_t = 6)]
    horizon: usize,
    #[arg(long, default_value = "lgt")]
    model: String,
    #[arg(long, default_value = "hetero")]
    variance: String,
    #[arg(long, default_value = "horseshoe")]
    seasonal_prior: String,
    /// Shape and scale of the inverse-gamma prior on chi2.
    #[arg(long, default_value = "3,2")]
    chi2_prior: String,
    /// First observation of every series.
    #[arg(long, default_value_t = 100.0)]
    initial: f64,
    #[arg(long)]
    category: Option<String>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

fn collection_format(path: &Path) -> lsgt::Result<CollectionFormat> {
    CollectionFormat::from_path(path)
        .ok_or_else(|| lsgt::Error::Config(format!("cannot tell the format of '{}' (expected .csv or .json)", path.display())))
}

fn write_json(path: Option<&Path>, value: &impl serde::Serialize) -> lsgt::Result<()> {
    let text = serde_json::to_string_pretty(value)? + "\n";
    match path {
        Some(p) => std::fs::write(p, text).map_err(|e| lsgt::Error::Config(format!("cannot write {}: {e}", p.display()))),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn cmd_fit(args: &FitArgs) -> lsgt::Result<()> {
    let cfg = args.run.run_config(ConfigOverrides::default())?;
    let all = load_collection(&cfg.input, collection_format(&cfg.input)?)?;
    let series: &TimeSeries = match &args.id {
        Some(id) => all
            .iter()
            .find(|s| &s.id == id)
            .ok_or_else(|| lsgt::Error::Config(format!("series '{id}' not found")))?,
        None => all.first().ok_or_else(|| lsgt::Error::Config("input has no series".into()))?,
    };
    let report = fit_and_forecast(series, &cfg)?;
    write_json(args.out.as_deref(), &report)
}

fn cmd_benchmark(args: &BenchmarkArgs) -> lsgt::Result<()> {
    let extra = ConfigOverrides {
        out: args.out.clone(),
        first_n: args.first_n,
        ..Default::default()
    };
    let formats = args
        .report
        .split(',')
        .map(|s| s.trim().parse::<ReportFormat>())
        .collect::<lsgt::Result<Vec<_>>>()?;
    let cfg = args.run.run_config(extra)?;
    log::info!("{} series selected", load_input(&cfg)?.len());
    let summary = run_benchmark(&cfg)?;
    if let Some(dir) = &cfg.output {
        for format in formats {
            let path = emit_report(&summary, format, dir)?;
            log::info!("wrote {}", path.display());
        }
    }
    print!("{}", lsgt::harness::markdown_table(&summary));
    if !summary.errors.is_empty() {
        eprintln!("{} series failed; see the errors section of summary.json", summary.errors.len());
    }
    Ok(())
}

fn cmd_simulate(args: &SimulateArgs) -> lsgt::Result<()> {
    let (a0, b0) = args
        .chi2_prior
        .split_once(',')
        .and_then(|(a, b)| Some((a.trim().parse::<f64>().ok()?, b.trim().parse::<f64>().ok()?)))
        .ok_or_else(|| lsgt::Error::Config(format!("--chi2-prior must be 'shape,scale', got '{}'", args.chi2_prior)))?;
    let kind: ModelKind = args.model.parse()?;
    let mut prior = PriorConfig {
        model_kind: kind,
        variance_mode: args.variance.parse::<VarianceMode>()?,
        seasonal_prior: args.seasonal_prior.parse::<SeasonalPrior>()?,
        chi2_prior: Some((a0, b0)),
        ..Default::default()
    };
    prior.s_gamma = args.initial / 100.0;
    prior.s_b1 = args.initial / 100.0;
    let overrides = match &args.params {
        Some(path) => ParameterOverrides::from_toml(
            &std::fs::read_to_string(path).map_err(|e| lsgt::Error::Config(format!("cannot read {}: {e}", path.display())))?,
        )?,
        None => ParameterOverrides::default(),
    };
    let grids = Grids::for_prior(&prior)?;
    let sim = SimulationConfig {
        initial_value: args.initial,
        ..SimulationConfig::new(args.length, args.period)
    };
    let mut series = Vec::with_capacity(args.n_series);
    let mut params = Vec::with_capacity(args.n_series);
    for i in 0..args.n_series {
        let mut rng = RngStream::new(args.seed, stream_key(&[hash_str("simulate"), i as u64]));
        let (theta, values) = sample_prior_predictive(&prior, &grids, &overrides, &sim, &mut rng)?;
        let id = format!("sim{:04}", i + 1);
        params.push(json!({ "id": id, "parameters": theta }));
        series.push(TimeSeries::new(id, values, args.period, args.horizon, args.category.clone())?);
    }
    save_collection(&args.out, &series, collection_format(&args.out)?)?;
    if let Some(path) = &args.params_out {
        write_json(Some(path), &params)?;
    }
    log::info!("wrote {} series to {}", series.len(), args.out.display());
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("LSGT_LOG", "info")).init();
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Fit(a) => cmd_fit(a),
        Command::Benchmark(a) => cmd_benchmark(a),
        Command::Simulate(a) => cmd_simulate(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
