//! Benchmark driver: configuration, per-series fit/forecast/evaluate, and
//! report emission.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::{load_collection, split, CollectionFormat, TimeSeries};
use crate::error::{Error, Result};
use crate::forecast::{forecast_stream, simulate_paths, validate_quantile_levels, ForecastConfig, ForecastResult, DEFAULT_QUANTILES};
use crate::metrics::{evaluate, EvalRecord, IntervalScore};
use crate::model::{ModelKind, ParameterDraw, PriorConfig, SeasonalPrior, VarianceMode};
use crate::sampler::{fit, Diagnostics, Grids, PosteriorSamples, SamplerConfig};

impl FromStr for ModelKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "lgt" | "non_seasonal" => Ok(ModelKind::NonSeasonal),
            "sgt" | "seasonal" => Ok(ModelKind::Seasonal),
            other => Err(Error::Config(format!("unknown model '{other}' (expected lgt or sgt)"))),
        }
    }
}

impl FromStr for VarianceMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "homo" | "homoscedastic" => Ok(VarianceMode::Homoscedastic),
            "hetero" | "heteroscedastic" => Ok(VarianceMode::Heteroscedastic),
            other => Err(Error::Config(format!("unknown variance mode '{other}' (expected homo or hetero)"))),
        }
    }
}

impl FromStr for SeasonalPrior {
    type Err = Error;

    /// `horseshoe` or `cauchy:<scale>`.
    fn from_str(s: &str) -> Result<Self> {
        let lower = s.to_ascii_lowercase();
        if lower == "horseshoe" {
            return Ok(SeasonalPrior::Horseshoe);
        }
        if let Some(rest) = lower.strip_prefix("cauchy:") {
            let scale: f64 = rest
                .trim()
                .parse()
                .map_err(|_| Error::Config(format!("bad Cauchy scale '{rest}'")))?;
            if !(scale > 0.0 && scale.is_finite()) {
                return Err(Error::Config(format!("Cauchy scale must be positive, got {scale}")));
            }
            return Ok(SeasonalPrior::Cauchy { scale });
        }
        Err(Error::Config(format!("unknown seasonal prior '{s}' (expected horseshoe or cauchy:<scale>)")))
    }
}

/// Which series of a collection to run.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SeriesFilter {
    #[default]
    All,
    FirstN(usize),
    Ids(Vec<String>),
}

impl SeriesFilter {
    pub fn apply(&self, series: Vec<TimeSeries>) -> Result<Vec<TimeSeries>> {
        match self {
            SeriesFilter::All => Ok(series),
            SeriesFilter::FirstN(n) => Ok(series.into_iter().take(*n).collect()),
            SeriesFilter::Ids(ids) => {
                let selected: Vec<TimeSeries> = series.into_iter().filter(|s| ids.contains(&s.id)).collect();
                if let Some(missing) = ids.iter().find(|id| !selected.iter().any(|s| &s.id == *id)) {
                    return Err(Error::Config(format!("series '{missing}' not found in the input")));
                }
                Ok(selected)
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub input: PathBuf,
    pub output: Option<PathBuf>,
    /// `None` picks the seasonal model for series that can support it.
    pub model_kind: Option<ModelKind>,
    pub variance_mode: VarianceMode,
    pub seasonal_prior: SeasonalPrior,
    pub sampler: SamplerConfig,
    pub quantiles: Vec<f64>,
    pub paths_per_draw: usize,
    pub workers: usize,
    pub filter: SeriesFilter,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            input: PathBuf::new(),
            output: None,
            model_kind: None,
            variance_mode: VarianceMode::Heteroscedastic,
            seasonal_prior: SeasonalPrior::Horseshoe,
            sampler: SamplerConfig::default(),
            quantiles: DEFAULT_QUANTILES.to_vec(),
            paths_per_draw: 2,
            workers: 1,
            filter: SeriesFilter::All,
        }
    }
}

impl RunConfig {
    pub fn validate(&self) -> Result<()> {
        if self.workers == 0 {
            return Err(Error::Config("worker count must be at least 1".into()));
        }
        if self.paths_per_draw == 0 {
            return Err(Error::Config("paths_per_draw must be at least 1".into()));
        }
        validate_quantile_levels(&self.quantiles)?;
        self.sampler.validate()
    }

    /// Layers `overrides` on top of this config; set fields win.
    pub fn merge(&mut self, o: &ConfigOverrides) -> Result<()> {
        if let Some(v) = &o.input {
            self.input = v.clone();
        }
        if let Some(v) = &o.out {
            self.output = Some(v.clone());
        }
        if let Some(v) = &o.model {
            self.model_kind = if v.eq_ignore_ascii_case("auto") { None } else { Some(v.parse()?) };
        }
        if let Some(v) = &o.variance {
            self.variance_mode = v.parse()?;
        }
        if let Some(v) = &o.seasonal_prior {
            self.seasonal_prior = v.parse()?;
        }
        let s = &mut self.sampler;
        if let Some(v) = o.iters {
            s.iterations = v;
        }
        if let Some(v) = o.burnin {
            s.burn_in = v;
        }
        if let Some(v) = o.thinning {
            s.thinning = v;
        }
        if let Some(v) = o.chains {
            s.chains = v;
        }
        if let Some(v) = o.seed {
            s.seed = v;
        }
        if let Some(v) = o.workers {
            self.workers = v;
        }
        if let Some(v) = &o.quantiles {
            self.quantiles = v.clone();
        }
        if let Some(v) = o.paths_per_draw {
            self.paths_per_draw = v;
        }
        match (o.first_n, &o.ids) {
            (Some(_), Some(_)) => return Err(Error::Config("first_n and ids are mutually exclusive".into())),
            (Some(n), None) => self.filter = SeriesFilter::FirstN(n),
            (None, Some(ids)) => self.filter = SeriesFilter::Ids(ids.clone()),
            (None, None) => {}
        }
        Ok(())
    }

    /// Prior for a training series; the data set the gamma and b1 scales.
    pub fn prior_for(&self, train: &TimeSeries) -> PriorConfig {
        let kind = match self.model_kind {
            Some(kind) => kind,
            None if train.supports_seasonal_fit() => ModelKind::Seasonal,
            None => {
                if train.period > 1 {
                    log::warn!(
                        "series {}: {} observations is under two periods, fitting non-seasonally",
                        train.id,
                        train.len()
                    );
                }
                ModelKind::NonSeasonal
            }
        };
        let mut prior = PriorConfig::for_values(&train.values, kind, self.variance_mode);
        prior.seasonal_prior = self.seasonal_prior;
        prior
    }

    pub fn forecast_config(&self, horizon: usize) -> ForecastConfig {
        ForecastConfig {
            quantiles: self.quantiles.clone(),
            paths_per_draw: self.paths_per_draw,
            ..ForecastConfig::new(horizon)
        }
    }
}

/// Optional settings from a TOML file or the command line. Key names match
/// the CLI flags with dashes replaced by underscores.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ConfigOverrides {
    pub input: Option<PathBuf>,
    pub out: Option<PathBuf>,
    pub model: Option<String>,
    pub variance: Option<String>,
    pub seasonal_prior: Option<String>,
    pub iters: Option<usize>,
    pub burnin: Option<usize>,
    pub thinning: Option<usize>,
    pub chains: Option<usize>,
    pub seed: Option<u64>,
    pub workers: Option<usize>,
    pub first_n: Option<usize>,
    pub ids: Option<Vec<String>>,
    pub quantiles: Option<Vec<f64>>,
    pub paths_per_draw: Option<usize>,
}

impl ConfigOverrides {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(format!("invalid config file: {e}")))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml(&text)
    }
}

/// Parses a comma-separated list of quantile levels.
pub fn parse_quantiles(text: &str) -> Result<Vec<f64>> {
    let levels = text
        .split(',')
        .map(|s| {
            s.trim()
                .parse::<f64>()
                .map_err(|_| Error::Config(format!("bad quantile level '{s}'")))
        })
        .collect::<Result<Vec<_>>>()?;
    validate_quantile_levels(&levels)?;
    Ok(levels)
}

/// Posterior summary of one scalar parameter.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParameterSummary {
    pub name: String,
    pub mean: f64,
    pub sd: f64,
    pub q05: f64,
    pub median: f64,
    pub q95: f64,
}

impl ParameterSummary {
    pub fn from_values(name: &str, values: &[f64]) -> Self {
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0).max(1.0);
        let mut sorted = values.to_vec();
        sorted.sort_by(f64::total_cmp);
        let q = |p| crate::forecast::quantile_sorted(&sorted, p);
        ParameterSummary {
            name: name.to_string(),
            mean,
            sd: var.sqrt(),
            q05: q(0.05),
            median: q(0.5),
            q95: q(0.95),
        }
    }
}

pub fn posterior_summary(samples: &PosteriorSamples) -> Vec<ParameterSummary> {
    let mut fields: Vec<(String, Box<dyn Fn(&ParameterDraw) -> f64>)> = vec![
        ("nu".into(), Box::new(|d| d.nu)),
        ("gamma".into(), Box::new(|d| d.gamma)),
        ("rho".into(), Box::new(|d| d.rho)),
        ("alpha".into(), Box::new(|d| d.alpha)),
        ("beta".into(), Box::new(|d| d.beta)),
        ("chi2".into(), Box::new(|d| d.chi2)),
    ];
    if samples.prior.is_heteroscedastic() {
        fields.push(("phi".into(), Box::new(|d| d.phi)));
        fields.push(("tau".into(), Box::new(|d| d.tau)));
    }
    if samples.period > 1 {
        fields.push(("zeta".into(), Box::new(|d| d.zeta)));
        for i in 0..samples.period {
            fields.push((format!("log_s_init[{i}]"), Box::new(move |d| d.log_s_init[i])));
        }
    } else {
        fields.push(("lambda".into(), Box::new(|d| d.lambda)));
        fields.push(("b1".into(), Box::new(|d| d.b1)));
    }
    fields
        .iter()
        .map(|(name, f)| ParameterSummary::from_values(name, &samples.column(f)))
        .collect()
}

/// Result of fitting one full series and forecasting past its end.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitReport {
    pub series_id: String,
    pub model: ModelKind,
    pub draws: usize,
    pub posterior: Vec<ParameterSummary>,
    pub forecast: ForecastResult,
    pub diagnostics: Diagnostics,
}

pub fn fit_and_forecast(series: &TimeSeries, cfg: &RunConfig) -> Result<FitReport> {
    cfg.validate()?;
    let prior = cfg.prior_for(series);
    let samples = fit(series, &prior, &cfg.sampler)?;
    let forecast = simulate_paths(
        &samples,
        &series.values,
        &cfg.forecast_config(series.horizon),
        &forecast_stream(cfg.sampler.seed, &series.id),
    )?;
    Ok(FitReport {
        series_id: series.id.clone(),
        model: prior.model_kind,
        draws: samples.len(),
        posterior: posterior_summary(&samples),
        forecast,
        diagnostics: samples.diagnostics,
    })
}

/// Timing and sampler health for one series. Kept apart from
/// [`EvalRecord`] so the records stay reproducible across runs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeriesRun {
    pub id: String,
    pub model: ModelKind,
    pub runtime_seconds: f64,
    pub smoothing_acceptance: Option<f64>,
    pub clamp_events: u64,
    pub forecast_retries: u64,
    pub forecast_floor_events: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeriesError {
    pub id: String,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoverageSummary {
    pub level: f64,
    /// Mean percentage of held-out points below the forecast quantile.
    pub percent_below: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CategorySummary {
    pub category: String,
    pub n_series: usize,
    pub smape: f64,
    pub mase: f64,
    pub msis: Vec<IntervalScore>,
    pub coverage: Vec<CoverageSummary>,
    pub mean_runtime_seconds: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub config: RunConfig,
    pub overall: CategorySummary,
    pub categories: Vec<CategorySummary>,
    pub records: Vec<EvalRecord>,
    pub runs: Vec<SeriesRun>,
    pub errors: Vec<SeriesError>,
}

impl RunSummary {
    /// Rebuilds the aggregates from the per-series records.
    pub fn from_parts(config: RunConfig, records: Vec<EvalRecord>, runs: Vec<SeriesRun>, errors: Vec<SeriesError>) -> Result<Self> {
        if records.is_empty() {
            return Err(Error::Metric("no series produced a record".into()));
        }
        let runtime: BTreeMap<&str, f64> = runs.iter().map(|r| (r.id.as_str(), r.runtime_seconds)).collect();
        let overall = aggregate("all", &records.iter().collect::<Vec<_>>(), &runtime)?;
        let mut groups: BTreeMap<&str, Vec<&EvalRecord>> = BTreeMap::new();
        for r in &records {
            if let Some(c) = &r.category {
                groups.entry(c.as_str()).or_default().push(r);
            }
        }
        let categories = groups
            .into_iter()
            .map(|(name, group)| aggregate(name, &group, &runtime))
            .collect::<Result<Vec<_>>>()?;
        Ok(RunSummary {
            config,
            overall,
            categories,
            records,
            runs,
            errors,
        })
    }
}

fn mean(values: impl Iterator<Item = f64>) -> f64 {
    let (sum, n) = values.fold((0.0, 0usize), |(s, n), v| (s + v, n + 1));
    sum / n as f64
}

fn aggregate(name: &str, records: &[&EvalRecord], runtime: &BTreeMap<&str, f64>) -> Result<CategorySummary> {
    let first = records[0];
    let same_levels = records.iter().all(|r| {
        r.msis.len() == first.msis.len()
            && r.coverage.len() == first.coverage.len()
            && r.msis.iter().zip(&first.msis).all(|(a, b)| a.nominal == b.nominal)
            && r.coverage.iter().zip(&first.coverage).all(|(a, b)| a.level == b.level)
    });
    if !same_levels {
        return Err(Error::Metric(format!("records in '{name}' use different quantile levels")));
    }
    let msis = (0..first.msis.len())
        .map(|k| IntervalScore {
            nominal: first.msis[k].nominal,
            msis: mean(records.iter().map(|r| r.msis[k].msis)),
        })
        .collect();
    let coverage = (0..first.coverage.len())
        .map(|k| CoverageSummary {
            level: first.coverage[k].level,
            percent_below: 100.0 * mean(records.iter().map(|r| r.coverage[k].fraction())),
        })
        .collect();
    Ok(CategorySummary {
        category: name.to_string(),
        n_series: records.len(),
        smape: mean(records.iter().map(|r| r.smape)),
        mase: mean(records.iter().map(|r| r.mase)),
        msis,
        coverage,
        mean_runtime_seconds: mean(records.iter().map(|r| runtime.get(r.id.as_str()).copied().unwrap_or(f64::NAN))),
    })
}

fn run_series(series: &TimeSeries, cfg: &RunConfig) -> Result<(EvalRecord, SeriesRun)> {
    let parts = split(series)?;
    let prior = cfg.prior_for(&parts.train);
    let start = Instant::now();
    let samples = fit(&parts.train, &prior, &cfg.sampler)?;
    let forecast = simulate_paths(
        &samples,
        &parts.train.values,
        &cfg.forecast_config(series.horizon),
        &forecast_stream(cfg.sampler.seed, &series.id),
    )?;
    let runtime_seconds = start.elapsed().as_secs_f64();
    let record = evaluate(
        &series.id,
        series.category.clone(),
        &parts.train.values,
        series.period,
        &parts.test,
        &forecast,
    )?;
    let run = SeriesRun {
        id: series.id.clone(),
        model: prior.model_kind,
        runtime_seconds,
        smoothing_acceptance: samples.diagnostics.smoothing_acceptance(),
        clamp_events: samples.diagnostics.clamp_events(),
        forecast_retries: forecast.retries,
        forecast_floor_events: forecast.floor_events,
    };
    Ok((record, run))
}

/// Splits, fits, forecasts and scores every series in `series`.
pub fn run_series_collection(series: &[TimeSeries], cfg: &RunConfig) -> Result<RunSummary> {
    cfg.validate()?;
    if series.is_empty() {
        return Err(Error::Config("no series selected".into()));
    }
    // build the shared nu grid up front so it is not billed to the first series
    Grids::for_prior(&PriorConfig::default())?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.workers)
        .build()
        .map_err(|e| Error::Config(format!("cannot start {} workers: {e}", cfg.workers)))?;
    let outcomes: Vec<Result<(EvalRecord, SeriesRun)>> = pool.install(|| series.par_iter().map(|s| run_series(s, cfg)).collect());

    let mut records = Vec::new();
    let mut runs = Vec::new();
    let mut errors = Vec::new();
    for (s, outcome) in series.iter().zip(outcomes) {
        match outcome {
            Ok((record, run)) => {
                records.push(record);
                runs.push(run);
            }
            Err(e) => {
                log::warn!("series {} excluded: {e}", s.id);
                errors.push(SeriesError {
                    id: s.id.clone(),
                    message: e.to_string(),
                });
            }
        }
    }
    if !errors.is_empty() {
        log::info!("{} of {} series excluded from aggregates", errors.len(), series.len());
    }
    if records.is_empty() {
        return Err(Error::Metric(format!(
            "all {} series failed; first error: {}",
            errors.len(),
            errors[0].message
        )));
    }
    RunSummary::from_parts(cfg.clone(), records, runs, errors)
}

pub fn load_input(cfg: &RunConfig) -> Result<Vec<TimeSeries>> {
    let format = CollectionFormat::from_path(&cfg.input).ok_or_else(|| {
        Error::Config(format!(
            "cannot tell the format of '{}' (expected .csv or .json)",
            cfg.input.display()
        ))
    })?;
    cfg.filter.apply(load_collection(&cfg.input, format)?)
}

/// Loads the input, runs every selected series and, when an output
/// directory is set, writes `records.json` and `summary.json` there.
pub fn run_benchmark(cfg: &RunConfig) -> Result<RunSummary> {
    let series = load_input(cfg)?;
    log::info!("running {} series with {} workers", series.len(), cfg.workers);
    let summary = run_series_collection(&series, cfg)?;
    if let Some(dir) = &cfg.output {
        write_records(&summary, dir)?;
        emit_report(&summary, ReportFormat::Json, dir)?;
    }
    Ok(summary)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReportFormat {
    Json,
    Csv,
    Markdown,
}

impl FromStr for ReportFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "json" => Ok(ReportFormat::Json),
            "csv" => Ok(ReportFormat::Csv),
            "markdown" | "md" => Ok(ReportFormat::Markdown),
            other => Err(Error::Config(format!("unknown report format '{other}'"))),
        }
    }
}

fn write_file(dir: &Path, name: &str, text: &str) -> Result<PathBuf> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let path = dir.join(name);
    std::fs::write(&path, text).map_err(|e| Error::io(&path, e))?;
    Ok(path)
}

/// Per-series records only; identical for identical seeds and configs.
pub fn records_json(summary: &RunSummary) -> Result<String> {
    Ok(serde_json::to_string_pretty(&summary.records)? + "\n")
}

pub fn write_records(summary: &RunSummary, dir: &Path) -> Result<PathBuf> {
    write_file(dir, "records.json", &records_json(summary)?)
}

fn percent_label(level: f64) -> String {
    format!("{}", (level * 1000.0).round() / 10.0)
}

fn coverage_columns(summary: &RunSummary) -> Vec<f64> {
    let mut levels: Vec<f64> = summary
        .overall
        .coverage
        .iter()
        .map(|c| c.level)
        .filter(|l| *l != 0.5)
        .collect();
    levels.reverse();
    levels
}

/// Column names of the markdown table.
pub fn markdown_columns(summary: &RunSummary) -> Vec<String> {
    let mut cols: Vec<String> = ["Category", "Series", "sMAPE", "MASE", "Runtime (s)"].iter().map(|s| s.to_string()).collect();
    for level in coverage_columns(summary) {
        cols.push(format!("Below {}p", percent_label(level)));
    }
    for score in &summary.overall.msis {
        cols.push(format!("MSIS {}p", percent_label(score.nominal)));
    }
    cols
}

pub fn markdown_table(summary: &RunSummary) -> String {
    let cols = markdown_columns(summary);
    let levels = coverage_columns(summary);
    let mut out = String::new();
    let _ = writeln!(out, "| {} |", cols.join(" | "));
    let _ = writeln!(out, "|{}", "---|".repeat(cols.len()));
    for c in summary.categories.iter().chain(std::iter::once(&summary.overall)) {
        let mut cells = vec![
            c.category.clone(),
            c.n_series.to_string(),
            format!("{:.2}", c.smape),
            format!("{:.2}", c.mase),
            format!("{:.2}", c.mean_runtime_seconds),
        ];
        for level in &levels {
            let pct = c.coverage.iter().find(|v| v.level == *level).map_or(f64::NAN, |v| v.percent_below);
            cells.push(format!("{pct:.2}"));
        }
        for score in &c.msis {
            cells.push(format!("{:.2}", score.msis));
        }
        let _ = writeln!(out, "| {} |", cells.join(" | "));
    }
    out
}

/// One row per series, with the coverage columns holding the fraction of
/// held-out points below each quantile.
pub fn series_csv(summary: &RunSummary) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let first = &summary.records[0];
    let mut header = vec!["id".to_string(), "category".into(), "smape".into(), "mase".into()];
    header.extend(first.msis.iter().map(|s| format!("msis_{}", percent_label(s.nominal))));
    header.extend(first.coverage.iter().map(|c| format!("below_{}", percent_label(c.level))));
    header.push("runtime_seconds".into());
    w.write_record(&header).map_err(csv_error)?;
    for r in &summary.records {
        let runtime = summary.runs.iter().find(|x| x.id == r.id).map_or(f64::NAN, |x| x.runtime_seconds);
        let mut row = vec![r.id.clone(), r.category.clone().unwrap_or_default(), r.smape.to_string(), r.mase.to_string()];
        row.extend(r.msis.iter().map(|s| s.msis.to_string()));
        row.extend(r.coverage.iter().map(|c| c.fraction().to_string()));
        row.push(runtime.to_string());
        w.write_record(&row).map_err(csv_error)?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Serde(format!("csv writer: {e}")))?;
    String::from_utf8(bytes).map_err(|e| Error::Serde(e.to_string()))
}

fn csv_error(e: csv::Error) -> Error {
    Error::Serde(format!("csv: {e}"))
}

/// Writes `summary.json`, `series.csv` or `summary.md` into `dir`.
pub fn emit_report(summary: &RunSummary, format: ReportFormat, dir: &Path) -> Result<PathBuf> {
    match format {
        ReportFormat::Json => write_file(dir, "summary.json", &(serde_json::to_string_pretty(summary)? + "\n")),
        ReportFormat::Csv => write_file(dir, "series.csv", &series_csv(summary)?),
        ReportFormat::Markdown => write_file(dir, "summary.md", &markdown_table(summary)),
    }
}
