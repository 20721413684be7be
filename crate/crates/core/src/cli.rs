//! Command-line front end: dataset loading, run configuration and report
//! files.

use clap::{ArgAction, Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};
use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};

use crate::assess::{criteria_from, mape, quantile_residuals_at_mean, quantile_residuals_averaged, CriteriaReport, ResidualReport};
use crate::error::{Result, TgarmaError};
use crate::forecast::{forecast, rolling_one_step, ForecastOptions, ForecastResult, PointMethod};
use crate::inference::{fit, summarize, Chain, ChainMeta, FitResult, FitSummary, McmcConfig, ModelOptions, PriorSpec, TgarmaPosterior};
use crate::model::{Family, ModelOrder, ParamVector};
use crate::simlab::{run_replication_study, run_selection_study, SelectionReport, SimConfig, SimReport};
use crate::transform::{Series, DEFAULT_FLOOR_C};

/// Reads a positive series from a CSV file with a header row.
///
/// A single column is taken as the values; with two or more columns the
/// second one is used (the first being time).
pub fn load_series(path: &Path) -> Result<Series> {
    let file = fs::File::open(path)
        .map_err(|e| TgarmaError::Io(std::io::Error::new(e.kind(), format!("{}: {e}", path.display()))))?;
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(file);
    let data_err = |line: u64, message: String| TgarmaError::Data { line: line as usize, message };
    let headers = rdr.headers().map_err(|e| data_err(1, e.to_string()))?.clone();
    if headers.is_empty() {
        return Err(data_err(1, "empty file".into()));
    }
    let col = if headers.len() == 1 { 0 } else { 1 };
    let mut values = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| {
            let line = e.position().map_or(0, |p| p.line());
            data_err(line, e.to_string())
        })?;
        let line = rec.position().map_or(0, |p| p.line());
        let field = rec.get(col).ok_or_else(|| data_err(line, format!("missing column {}", col + 1)))?;
        let v: f64 = field
            .trim()
            .parse()
            .map_err(|_| data_err(line, format!("value '{field}' is not a number")))?;
        if !(v > 0.0 && v.is_finite()) {
            return Err(data_err(line, format!("value {v} must be positive and finite")));
        }
        values.push(v);
    }
    if values.is_empty() {
        return Err(data_err(1, "file has no observations".into()));
    }
    Series::new(values)
}

#[derive(Debug, Parser)]
#[command(name = "tgarma", version, about = "Bayesian Box-Cox transformed GARMA models")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Fit one model and write the chain and its summary.
    Fit(FitArgs),
    /// Fit several orders and families and compare DIC, EBIC and CPO.
    Select(SelectArgs),
    /// Fit on the leading data and forecast, with MAPE over a holdout.
    Forecast(ForecastArgs),
    /// Fit and write quantile residuals with their ACF and PACF.
    Residuals(ResidualArgs),
    /// Run a parameter-recovery replication study.
    Simulate(StudyArgs),
    /// Run a model-selection replication study.
    SelectStudy(StudyArgs),
}

#[derive(Debug, Clone, Args)]
pub struct ModelArgs {
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long, default_value = "gamma")]
    pub family: Family,
    #[arg(long, default_value_t = 1)]
    pub p: usize,
    #[arg(long, default_value_t = 0)]
    pub q: usize,
    #[arg(long)]
    pub lambda_fixed: Option<f64>,
    #[arg(long, default_value_t = DEFAULT_FLOOR_C)]
    pub floor_c: f64,
    #[arg(long, default_value_t = true, action = ArgAction::Set)]
    pub include_jacobian: bool,
    /// Common prior variance for all coefficients and log u.
    #[arg(long)]
    pub prior_var: Option<f64>,
    #[arg(long, default_value_t = 5000)]
    pub draws: usize,
    #[arg(long, default_value_t = 1000)]
    pub burn_in: usize,
    #[arg(long, default_value_t = 3)]
    pub thin: usize,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    #[arg(long, default_value_t = 0.3)]
    pub accept_lo: f64,
    #[arg(long, default_value_t = 0.6)]
    pub accept_hi: f64,
    #[arg(long, default_value = "out")]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Args)]
pub struct FitArgs {
    #[command(flatten)]
    pub model: ModelArgs,
}

#[derive(Debug, Clone, Args)]
pub struct SelectArgs {
    #[command(flatten)]
    pub model: ModelArgs,
    /// Semicolon-separated `p,q` pairs.
    #[arg(long, default_value = "1,0;1,1;1,2;2,1;2,2")]
    pub candidates: String,
    #[arg(long, default_value = "gamma,invgauss")]
    pub families: String,
    #[arg(long, default_value_t = true, action = ArgAction::Set)]
    pub common_start: bool,
}

#[derive(Debug, Clone, Args)]
pub struct ForecastArgs {
    #[command(flatten)]
    pub model: ModelArgs,
    #[arg(long, default_value_t = 0)]
    pub holdout: usize,
    #[arg(long, default_value_t = 1)]
    pub horizon: usize,
    #[arg(long, default_value_t = 0.95)]
    pub level: f64,
    #[arg(long, default_value = "mean")]
    pub point: PointMethod,
    /// Sample observation noise for full predictive intervals.
    #[arg(long)]
    pub predictive: bool,
}

#[derive(Debug, Clone, Args)]
pub struct ResidualArgs {
    #[command(flatten)]
    pub model: ModelArgs,
    #[arg(long, default_value_t = 20)]
    pub maxlag: usize,
    /// Average the conditional CDF over draws instead of plugging in the mean.
    #[arg(long)]
    pub averaged: bool,
}

#[derive(Debug, Clone, Args)]
pub struct StudyArgs {
    /// JSON or TOML study configuration; defaults apply when omitted.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub m: Option<usize>,
    #[arg(long)]
    pub n: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub draws: Option<usize>,
    #[arg(long)]
    pub burn_in: Option<usize>,
    #[arg(long)]
    pub thin: Option<usize>,
    #[arg(long)]
    pub workers: Option<usize>,
    /// Write the first simulated series instead of running the study.
    #[arg(long)]
    pub emit_series: bool,
    #[arg(long, default_value = "out")]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CommandKind {
    Fit,
    Select,
    Forecast,
    Residuals,
    Simulate,
    SelectStudy,
}

/// Fully resolved settings of one run; embedded in every JSON artifact.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub command: CommandKind,
    pub data_path: Option<PathBuf>,
    pub family: Family,
    pub order: ModelOrder,
    pub candidates: Vec<ModelOrder>,
    pub families: Vec<Family>,
    pub common_start: bool,
    pub prior_var: Option<f64>,
    pub mcmc: McmcConfig,
    pub model: ModelOptions,
    pub holdout: usize,
    pub horizon: usize,
    pub level: f64,
    pub point: PointMethod,
    pub predictive: bool,
    pub maxlag: usize,
    pub averaged: bool,
    pub study: Option<SimConfig>,
    pub emit_series: bool,
    #[serde(skip_serializing, default)]
    pub output_dir: PathBuf,
}

impl RunConfig {
    fn base(command: CommandKind, output_dir: PathBuf) -> Self {
        Self {
            command,
            data_path: None,
            family: Family::Gamma,
            order: ModelOrder::new(1, 0),
            candidates: vec![],
            families: vec![],
            common_start: true,
            prior_var: None,
            mcmc: McmcConfig::default(),
            model: ModelOptions::default(),
            holdout: 0,
            horizon: 1,
            level: 0.95,
            point: PointMethod::Mean,
            predictive: false,
            maxlag: 20,
            averaged: false,
            study: None,
            emit_series: false,
            output_dir,
        }
    }

    fn with_model(command: CommandKind, m: &ModelArgs) -> Self {
        Self {
            data_path: Some(m.data.clone()),
            family: m.family,
            order: ModelOrder::new(m.p, m.q),
            prior_var: m.prior_var,
            mcmc: McmcConfig {
                draws: m.draws,
                burn_in: m.burn_in,
                thin: m.thin,
                target_accept: (m.accept_lo, m.accept_hi),
                seed: m.seed,
            },
            model: ModelOptions { floor_c: m.floor_c, include_jacobian: m.include_jacobian, lambda_fixed: m.lambda_fixed },
            ..Self::base(command, m.out.clone())
        }
    }

    fn study(command: CommandKind, s: &StudyArgs) -> Result<Self> {
        let mut cfg = match &s.config {
            Some(p) => SimConfig::from_path(p)?,
            None => SimConfig::default(),
        };
        if let Some(m) = s.m {
            cfg.m = m;
        }
        if let Some(n) = s.n {
            cfg.n = n;
        }
        if let Some(seed) = s.seed {
            cfg.seed = seed;
        }
        if let Some(d) = s.draws {
            cfg.mcmc.draws = d;
        }
        if let Some(b) = s.burn_in {
            cfg.mcmc.burn_in = b;
        }
        if let Some(t) = s.thin {
            cfg.mcmc.thin = t;
        }
        if s.workers.is_some() {
            cfg.workers = s.workers;
        }
        Ok(Self { study: Some(cfg), emit_series: s.emit_series, ..Self::base(command, s.out.clone()) })
    }

    /// Resolves parsed arguments into a validated configuration.
    pub fn from_cli(cli: &Cli) -> Result<Self> {
        let cfg = match &cli.command {
            Command::Fit(a) => Self::with_model(CommandKind::Fit, &a.model),
            Command::Select(a) => Self {
                candidates: parse_orders(&a.candidates)?,
                families: parse_families(&a.families)?,
                common_start: a.common_start,
                ..Self::with_model(CommandKind::Select, &a.model)
            },
            Command::Forecast(a) => Self {
                holdout: a.holdout,
                horizon: a.horizon,
                level: a.level,
                point: a.point,
                predictive: a.predictive,
                ..Self::with_model(CommandKind::Forecast, &a.model)
            },
            Command::Residuals(a) => {
                Self { maxlag: a.maxlag, averaged: a.averaged, ..Self::with_model(CommandKind::Residuals, &a.model) }
            }
            Command::Simulate(a) => Self::study(CommandKind::Simulate, a)?,
            Command::SelectStudy(a) => Self::study(CommandKind::SelectStudy, a)?,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        let cfg_err = |e: TgarmaError| match e {
            TgarmaError::Config(_) => e,
            other => TgarmaError::Config(other.to_string()),
        };
        if let Some(study) = &self.study {
            return study.validate();
        }
        self.mcmc.validate().map_err(cfg_err)?;
        if !(self.model.floor_c > 0.0) {
            return Err(TgarmaError::Config(format!("floor-c must be positive, got {}", self.model.floor_c)));
        }
        if let Some(l) = self.model.lambda_fixed {
            if !(-1.0..=1.0).contains(&l) {
                return Err(TgarmaError::Config(format!("lambda-fixed must lie in [-1, 1], got {l}")));
            }
        }
        if let Some(v) = self.prior_var {
            if !(v > 0.0 && v.is_finite()) {
                return Err(TgarmaError::Config(format!("prior-var must be positive, got {v}")));
            }
        }
        ForecastOptions { horizon: self.horizon, level: self.level, ..Default::default() }.validate()?;
        if self.command == CommandKind::Select && (self.candidates.is_empty() || self.families.is_empty()) {
            return Err(TgarmaError::Config("select needs at least one candidate and one family".into()));
        }
        Ok(())
    }

    fn priors(&self, order: ModelOrder) -> PriorSpec {
        match self.prior_var {
            Some(v) => PriorSpec::flat(order, v),
            None => PriorSpec::default_for(order),
        }
    }

    fn posterior(&self, series: Series, order: ModelOrder, family: Family) -> Result<TgarmaPosterior> {
        TgarmaPosterior::new(series, order, family, self.priors(order), self.model.clone())
    }

    fn load(&self) -> Result<Series> {
        let path = self.data_path.as_ref().ok_or_else(|| TgarmaError::Config("--data is required".into()))?;
        load_series(path)
    }
}

fn parse_orders(s: &str) -> Result<Vec<ModelOrder>> {
    s.split(';')
        .filter(|t| !t.trim().is_empty())
        .map(|t| {
            let parts: Vec<&str> = t.split(',').map(str::trim).collect();
            match parts.as_slice() {
                [p, q] => match (p.parse(), q.parse()) {
                    (Ok(p), Ok(q)) => Ok(ModelOrder::new(p, q)),
                    _ => Err(TgarmaError::Config(format!("bad candidate order '{t}'"))),
                },
                _ => Err(TgarmaError::Config(format!("candidate '{t}' must look like p,q"))),
            }
        })
        .collect()
}

fn parse_families(s: &str) -> Result<Vec<Family>> {
    s.split(',')
        .filter(|t| !t.trim().is_empty())
        .map(|t| t.trim().parse().map_err(|_| TgarmaError::Config(format!("unknown family '{t}'"))))
        .collect()
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ModeReport {
    pub params: ParamVector,
    pub log_density: f64,
    pub regularized: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FitReport {
    pub config: RunConfig,
    pub chain: ChainMeta,
    pub mode: ModeReport,
    pub summary: FitSummary,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CriteriaRow {
    pub model: String,
    pub family: Family,
    pub order: ModelOrder,
    pub criteria: CriteriaReport,
    pub acceptance_rate: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SelectReport {
    pub config: RunConfig,
    pub rows: Vec<CriteriaRow>,
}

#[derive(Debug, Clone, Serialize)]
pub struct ForecastReport {
    pub config: RunConfig,
    pub train_len: usize,
    pub forecast: ForecastResult,
    pub holdout: Option<HoldoutReport>,
}

#[derive(Debug, Clone, Serialize)]
pub struct HoldoutReport {
    pub actual: Vec<f64>,
    pub one_step: ForecastResult,
    pub mape: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct ResidualsFile {
    pub config: RunConfig,
    pub report: ResidualReport,
}

#[derive(Debug, Clone, Serialize)]
pub struct StudyFile<T> {
    pub config: RunConfig,
    pub report: T,
}

/// Everything a run produced, for printing or inspection.
#[derive(Debug, Clone)]
pub enum RunOutput {
    Fit(Box<FitReport>),
    Select(SelectReport),
    Forecast(Box<ForecastReport>),
    Residuals(Box<ResidualsFile>),
    Series(Series),
    Simulate(Box<SimReport>),
    SelectStudy(Box<SelectionReport>),
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut s = serde_json::to_string_pretty(value).map_err(|e| TgarmaError::Numeric(format!("cannot serialize report: {e}")))?;
    s.push('\n');
    fs::write(path, s)?;
    Ok(())
}

fn create(path: &Path) -> Result<fs::File> {
    Ok(fs::File::create(path)?)
}

fn fit_model(cfg: &RunConfig, series: Series, order: ModelOrder, family: Family) -> Result<(TgarmaPosterior, FitResult)> {
    let post = cfg.posterior(series, order, family)?;
    let fitted = fit(&post, None, &cfg.mcmc)?;
    Ok((post, fitted))
}

fn fit_report(cfg: &RunConfig, fitted: &FitResult) -> FitReport {
    FitReport {
        config: cfg.clone(),
        chain: fitted.chain.meta(),
        mode: ModeReport {
            params: fitted.mode.params.clone(),
            log_density: fitted.mode.value,
            regularized: fitted.mode.regularized,
        },
        summary: summarize(&fitted.chain),
    }
}

/// Executes a run and writes its artifacts under `cfg.output_dir`.
pub fn run(cfg: &RunConfig) -> Result<RunOutput> {
    cfg.validate()?;
    let out = &cfg.output_dir;
    fs::create_dir_all(out)?;
    match cfg.command {
        CommandKind::Fit => {
            let (_, fitted) = fit_model(cfg, cfg.load()?, cfg.order, cfg.family)?;
            fitted.chain.write_csv(create(&out.join("chain.csv"))?)?;
            let report = fit_report(cfg, &fitted);
            write_json(&out.join("summary.json"), &report)?;
            Ok(RunOutput::Fit(Box::new(report)))
        }
        CommandKind::Select => {
            let series = cfg.load()?;
            let start = if cfg.common_start { cfg.candidates.iter().map(|c| c.r()).max().unwrap_or(0) } else { 0 };
            let mut rows = Vec::new();
            for &family in &cfg.families {
                for &order in &cfg.candidates {
                    let (post, fitted) = fit_model(cfg, series.clone(), order, family)?;
                    let criteria = criteria_from(&fitted.chain, &post, start.max(order.r()))?;
                    rows.push(CriteriaRow {
                        model: order.to_string(),
                        family,
                        order,
                        criteria,
                        acceptance_rate: fitted.chain.acceptance_rate(),
                    });
                }
            }
            let mut wtr = csv::Writer::from_writer(create(&out.join("criteria.csv"))?);
            wtr.write_record(["Model", "Family", "DIC", "EBIC", "CPO"]).map_err(crate::inference::chain::csv_err)?;
            for r in &rows {
                wtr.write_record([
                    r.model.clone(),
                    r.family.to_string(),
                    r.criteria.dic.to_string(),
                    r.criteria.ebic.to_string(),
                    r.criteria.cpo.to_string(),
                ])
                .map_err(crate::inference::chain::csv_err)?;
            }
            wtr.flush()?;
            let report = SelectReport { config: cfg.clone(), rows };
            write_json(&out.join("criteria.json"), &report)?;
            Ok(RunOutput::Select(report))
        }
        CommandKind::Forecast => {
            let full = cfg.load()?;
            if cfg.holdout >= full.len() {
                return Err(TgarmaError::Config(format!(
                    "holdout {} must be smaller than the series length {}",
                    cfg.holdout,
                    full.len()
                )));
            }
            let train_len = full.len() - cfg.holdout;
            let train = full.head(train_len)?;
            let (_, fitted) = fit_model(cfg, train.clone(), cfg.order, cfg.family)?;
            let opts = ForecastOptions {
                horizon: cfg.horizon,
                level: cfg.level,
                point: cfg.point,
                predictive: cfg.predictive,
                seed: cfg.mcmc.seed,
                keep_draws: false,
            };
            let fc = forecast(&fitted.chain, &train, cfg.model.floor_c, &opts)?;
            fc.write_csv(create(&out.join("forecast.csv"))?)?;
            let holdout = if cfg.holdout > 0 {
                let one = rolling_one_step(&fitted.chain, &full, cfg.holdout, cfg.model.floor_c, &opts)?;
                let actual = full.values()[train_len..].to_vec();
                let m = mape(&actual, &one.point)?;
                one.write_csv(create(&out.join("holdout.csv"))?)?;
                Some(HoldoutReport { actual, one_step: one, mape: m })
            } else {
                None
            };
            let report = ForecastReport { config: cfg.clone(), train_len, forecast: fc, holdout };
            write_json(&out.join("forecast.json"), &report)?;
            Ok(RunOutput::Forecast(Box::new(report)))
        }
        CommandKind::Residuals => {
            let (post, fitted) = fit_model(cfg, cfg.load()?, cfg.order, cfg.family)?;
            let report = if cfg.averaged {
                quantile_residuals_averaged(&fitted.chain, &post, cfg.maxlag)?
            } else {
                quantile_residuals_at_mean(&fitted.chain, &post, cfg.maxlag)?
            };
            report.write_acf_csv(create(&out.join("acf.csv"))?)?;
            let file = ResidualsFile { config: cfg.clone(), report };
            write_json(&out.join("residuals.json"), &file)?;
            Ok(RunOutput::Residuals(Box::new(file)))
        }
        CommandKind::Simulate | CommandKind::SelectStudy => {
            let study = cfg.study.as_ref().ok_or_else(|| TgarmaError::Config("missing study configuration".into()))?;
            if cfg.emit_series {
                let s = study.simulate(0)?;
                write_series(&out.join("series.csv"), &s)?;
                write_json(&out.join("series.json"), &StudyFile { config: cfg.clone(), report: s.values() })?;
                return Ok(RunOutput::Series(s));
            }
            if cfg.command == CommandKind::Simulate {
                let report = run_replication_study(study)?;
                report.write_csv(create(&out.join("sim_table.csv"))?)?;
                write_json(&out.join("sim_report.json"), &StudyFile { config: cfg.clone(), report: &report })?;
                Ok(RunOutput::Simulate(Box::new(report)))
            } else {
                let report = run_selection_study(study)?;
                report.write_csv(create(&out.join("selection.csv"))?)?;
                write_json(&out.join("selection.json"), &StudyFile { config: cfg.clone(), report: &report })?;
                Ok(RunOutput::SelectStudy(Box::new(report)))
            }
        }
    }
}

/// Writes a `(time, value)` CSV with times `1..=n`.
pub fn write_series(path: &Path, s: &Series) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(create(path)?);
    wtr.write_record(["time", "value"]).map_err(crate::inference::chain::csv_err)?;
    for (i, v) in s.values().iter().enumerate() {
        wtr.write_record([(i + 1).to_string(), v.to_string()]).map_err(crate::inference::chain::csv_err)?;
    }
    wtr.flush()?;
    Ok(())
}

/// Reloads `chain.csv` next to a fit's `summary.json`.
pub fn reload_chain(dir: &Path) -> Result<(FitReport, Chain)> {
    let text = fs::read_to_string(dir.join("summary.json"))?;
    let report: FitReport =
        serde_json::from_str(&text).map_err(|e| TgarmaError::Data { line: e.line(), message: e.to_string() })?;
    let chain = Chain::read_csv(fs::File::open(dir.join("chain.csv"))?, &report.chain)?;
    Ok((report, chain))
}

fn opt4(v: Option<f64>) -> String {
    v.map_or("NA".into(), |x| format!("{x:.4}"))
}

/// Human-readable table with four decimals.
pub fn render(output: &RunOutput) -> String {
    let mut s = String::new();
    match output {
        RunOutput::Fit(r) => {
            s += &format!("{:<10} {:>10} {:>10} {:>10} {:>10} {:>8}\n", "Parameter", "Mean", "SD", "HPD low", "HPD high", "Geweke");
            for p in &r.summary.parameters {
                s += &format!(
                    "{:<10} {:>10.4} {:>10.4} {:>10.4} {:>10.4} {:>8}\n",
                    p.parameter,
                    p.mean,
                    p.sd,
                    p.hpd_lower,
                    p.hpd_upper,
                    opt4(p.geweke_z)
                );
            }
            s += &format!("acceptance rate {:.4}\n", r.summary.acceptance_rate);
        }
        RunOutput::Select(r) => {
            s += &format!("{:<14} {:<9} {:>12} {:>12} {:>12}\n", "Model", "Family", "DIC", "EBIC", "CPO");
            for row in &r.rows {
                s += &format!(
                    "{:<14} {:<9} {:>12.4} {:>12.4} {:>12.4}\n",
                    row.model, row.family, row.criteria.dic, row.criteria.ebic, row.criteria.cpo
                );
            }
        }
        RunOutput::Forecast(r) => {
            s += &format!("{:<6} {:>12} {:>12} {:>12}\n", "Step", "Point", "Lower", "Upper");
            for k in 0..r.forecast.horizon {
                s += &format!("{:<6} {:>12.4} {:>12.4} {:>12.4}\n", k + 1, r.forecast.point[k], r.forecast.lower[k], r.forecast.upper[k]);
            }
            if let Some(h) = &r.holdout {
                s += &format!("one-step MAPE over {} holdout points: {:.4}%\n", h.actual.len(), h.mape);
            }
        }
        RunOutput::Residuals(r) => {
            s += &format!("{:<5} {:>8} {:>8}\n", "Lag", "ACF", "PACF");
            for k in 1..=r.report.maxlag {
                s += &format!("{:<5} {:>8.4} {:>8.4}\n", k, r.report.acf[k], r.report.pacf[k]);
            }
        }
        RunOutput::Series(ser) => s += &format!("simulated series of length {}\n", ser.len()),
        RunOutput::Simulate(r) => {
            s += &format!("{:<10} {:>8} {:>10} {:>10} {:>8} {:>8} {:>8}\n", "Parameter", "True", "Mean", "Variance", "CB", "CE", "AP");
            for row in &r.rows {
                s += &format!(
                    "{:<10} {:>8.4} {:>10.4} {:>10} {:>8} {:>8} {:>8.4}\n",
                    row.parameter,
                    row.true_value,
                    row.mean,
                    opt4(row.variance),
                    opt4(row.cb),
                    opt4(row.ce),
                    row.ap
                );
            }
            s += &format!("failed replications: {}\n", r.failures);
        }
        RunOutput::SelectStudy(r) => {
            for (c, name) in crate::simlab::CRITERIA.iter().enumerate() {
                s += &format!("{name:<5} correct {:.4}\n", r.correct[c]);
            }
            s += &format!("failed replications: {}\n", r.failures);
        }
    }
    s
}

#[derive(Serialize)]
struct ErrorBody<'a> {
    kind: &'a str,
    message: String,
    exit_code: i32,
}

/// Machine-readable error line for stderr.
pub fn error_json(e: &TgarmaError) -> String {
    let body = ErrorBody { kind: e.kind(), message: e.to_string(), exit_code: e.exit_code() };
    serde_json::json!({ "error": body }).to_string()
}

/// Parses arguments, runs, prints, and returns the process exit code.
pub fn main_with<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = e.exit_code();
            let _ = e.print();
            return code;
        }
    };
    match RunConfig::from_cli(&cli).and_then(|cfg| run(&cfg)) {
        Ok(out) => {
            print!("{}", render(&out));
            0
        }
        Err(e) => {
            eprintln!("{}", error_json(&e));
            e.exit_code()
        }
    }
}
