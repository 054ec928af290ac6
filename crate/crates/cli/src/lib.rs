//! Command implementations behind the `rankboot` binary.
//!
//! Options can come from a JSON config file (`--config`) and from flags;
//! flags win. Every command resolves them into an [`Effective`] config,
//! writes it to `effective_config.json` in the output directory, and stamps
//! each output file with the tool version, seed and a SHA-256 hash of that
//! config. Thread count and output directory are not part of the hashed
//! config: they never change results.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use rankboot::engine::{ConditionalLoops, SYNCHRONOUS_CONDITIONAL};
use rankboot::mselect::{self, MSelection};
use rankboot::oracle::{self, GroupClassification, LimitSpec};
use rankboot::sim::{self, ScenarioResult, ScenarioSpec};
use rankboot::{
    bootstrap_rank_distribution, conditional_rank_distribution, estimate_all,
    interval_width_summary, load_long_csv, load_matrix_csv, prediction_intervals, rank_estimates,
    EstimatorKind, EstimatorSpec, PopulationData, ResamplePlan, Rounding, Scheme, SizeRule,
};
use serde::{Deserialize, Serialize};
use serde_json::json;
use sha2::{Digest, Sha256};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error(transparent)]
    Core(#[from] rankboot::Error),
    #[error("{0}")]
    Usage(String),
    #[error("{path}: {source}")]
    Write {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl CliError {
    /// 2 for usage and input problems, 3 for numerical failures.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Core(e) if !e.is_input_error() => 3,
            _ => 2,
        }
    }
}

fn usage(msg: impl Into<String>) -> CliError {
    CliError::Usage(msg.into())
}

pub type CliResult<T> = std::result::Result<T, CliError>;

#[derive(Debug, Parser)]
#[command(
    name = "rankboot",
    version,
    about = "Bootstrap prediction intervals for ranks"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Bootstrap rank distribution and prediction intervals for every item.
    Analyze(CommonArgs),
    /// Choose the resample size m by minimising the tuning objective.
    SelectM(CommonArgs),
    /// Conditional rank intervals for the top-ranked items.
    Conditional(CommonArgs),
    /// Run a built-in scenario family or scenarios from a JSON file.
    Simulate(SimulateArgs),
    /// Evaluate limiting rank distributions and closed forms.
    Oracle(OracleArgs),
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    /// Input CSV.
    #[arg(long)]
    pub input: Option<PathBuf>,
    /// `long` (item,value rows) or `matrix` (one column per item).
    #[arg(long)]
    pub layout: Option<String>,
    /// Matrix column holding the response.
    #[arg(long)]
    pub response: Option<String>,
    /// mean, proportion, quantile:q or correlation.
    #[arg(long)]
    pub estimator: Option<String>,
    /// independent-populations, synchronous or independent-component.
    #[arg(long)]
    pub scheme: Option<String>,
    /// Resample m_j = round(fraction * n_j).
    #[arg(long, conflicts_with_all = ["full", "auto_m"])]
    pub fraction: Option<f64>,
    /// Resample at full size (the default).
    #[arg(long, conflicts_with = "auto_m", num_args = 0..=1, require_equals = true, default_missing_value = "true")]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub full: Option<bool>,
    /// Choose the fraction with the tuning objective.
    #[arg(long, num_args = 0..=1, require_equals = true, default_missing_value = "true")]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub auto_m: Option<bool>,
    /// `half-up` (default) or `floor` for fractional resample sizes.
    #[arg(long)]
    pub rounding: Option<String>,
    #[arg(long)]
    pub replicates: Option<usize>,
    #[arg(long)]
    pub level: Option<f64>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub threads: Option<usize>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Number of top-ranked items for `conditional`.
    #[arg(long)]
    pub top: Option<usize>,
    #[arg(long)]
    pub outer: Option<usize>,
    #[arg(long)]
    pub inner: Option<usize>,
    /// Scale inside the logarithm of the tuning objective.
    #[arg(long)]
    pub log_scale: Option<f64>,
}

#[derive(Debug, Clone, Args)]
pub struct CommonArgs {
    /// JSON file with any of the options below; flags take precedence.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[command(flatten)]
    pub run: RunConfig,
}

#[derive(Debug, Clone, Args)]
pub struct SimulateArgs {
    /// Built-in scenario family.
    pub name: Option<String>,
    /// JSON file holding a list of scenario specs.
    #[arg(long, conflicts_with = "name")]
    pub scenarios: Option<PathBuf>,
    /// Keep only scenarios with this noise correlation.
    #[arg(long)]
    pub rho: Option<f64>,
    /// Override the number of datasets per scenario.
    #[arg(long)]
    pub reps: Option<usize>,
    #[arg(long)]
    pub replicates: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub threads: Option<usize>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct OracleArgs {
    /// constant-c, tied-shift, expected-rank, limit-rank or r-limit.
    pub name: String,
    /// First-level normal of the focal item (tied-shift).
    #[arg(long, default_value_t = 1.0)]
    pub z1: f64,
    /// Number of items.
    #[arg(long, default_value_t = 5)]
    pub p: usize,
    #[arg(long, default_value_t = 1_000_000)]
    pub draws: usize,
    /// Comma-separated scales (limit-rank, r-limit).
    #[arg(long, value_delimiter = ',')]
    pub sigmas: Vec<f64>,
    /// Comma-separated offsets (limit-rank).
    #[arg(long, value_delimiter = ',')]
    pub offsets: Vec<f64>,
    /// 1-based focal item, or rank position for expected-rank.
    #[arg(long, default_value_t = 1)]
    pub item: usize,
    /// Difficulty scale (expected-rank).
    #[arg(long)]
    pub delta: Option<f64>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub threads: Option<usize>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

impl RunConfig {
    /// Values from `self` override those in `base`.
    pub fn over(self, base: RunConfig) -> RunConfig {
        RunConfig {
            input: self.input.or(base.input),
            layout: self.layout.or(base.layout),
            response: self.response.or(base.response),
            estimator: self.estimator.or(base.estimator),
            scheme: self.scheme.or(base.scheme),
            fraction: self.fraction.or(base.fraction),
            full: self.full.or(base.full),
            auto_m: self.auto_m.or(base.auto_m),
            rounding: self.rounding.or(base.rounding),
            replicates: self.replicates.or(base.replicates),
            level: self.level.or(base.level),
            seed: self.seed.or(base.seed),
            threads: self.threads.or(base.threads),
            out: self.out.or(base.out),
            top: self.top.or(base.top),
            outer: self.outer.or(base.outer),
            inner: self.inner.or(base.inner),
            log_scale: self.log_scale.or(base.log_scale),
        }
    }

    pub fn from_file(path: &Path) -> CliResult<RunConfig> {
        let text = fs::read_to_string(path).map_err(|source| rankboot::Error::Io {
            path: path.to_path_buf(),
            source,
        })?;
        serde_json::from_str(&text).map_err(|e| usage(format!("{}: {e}", path.display())))
    }
}

/// Size rule as chosen on the command line.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum SizeChoice {
    Full,
    Fraction(f64),
    Auto,
}

/// Fully resolved options; this is what gets echoed and hashed.
#[derive(Debug, Clone, Serialize)]
pub struct Effective {
    pub command: String,
    pub input: Option<PathBuf>,
    pub layout: String,
    pub response: Option<String>,
    pub estimator: EstimatorKind,
    pub scheme: Scheme,
    pub size: SizeChoice,
    pub rounding: Rounding,
    pub replicates: usize,
    pub level: f64,
    pub seed: u64,
    pub top: usize,
    pub loops: ConditionalLoops,
    pub log_scale: f64,
    #[serde(skip)]
    pub threads: Option<usize>,
    #[serde(skip)]
    pub out: PathBuf,
}

pub fn parse_estimator(s: &str) -> CliResult<EstimatorKind> {
    let s = s.trim();
    Ok(match s {
        "mean" => EstimatorKind::Mean,
        "proportion" => EstimatorKind::Proportion,
        "correlation" => EstimatorKind::CorrelationWithResponse,
        _ => match s.strip_prefix("quantile:") {
            Some(q) => {
                let q: f64 = q
                    .parse()
                    .map_err(|_| usage(format!("bad quantile level in '{s}'")))?;
                EstimatorKind::Quantile { q }
            }
            None => return Err(usage(format!("unknown estimator '{s}'"))),
        },
    })
}

pub fn parse_scheme(s: &str) -> CliResult<Scheme> {
    match s.trim() {
        "independent-populations" => Ok(Scheme::IndependentPopulations),
        "synchronous" => Ok(Scheme::Synchronous),
        "independent-component" => Ok(Scheme::IndependentComponent),
        other => Err(usage(format!("unknown scheme '{other}'"))),
    }
}

impl Effective {
    pub fn resolve(command: &str, args: &CommonArgs) -> CliResult<Effective> {
        let cfg = match &args.config {
            Some(path) => args.run.clone().over(RunConfig::from_file(path)?),
            None => args.run.clone(),
        };
        let layout = cfg.layout.clone().unwrap_or_else(|| "long".into());
        if layout != "long" && layout != "matrix" {
            return Err(usage(format!("unknown layout '{layout}'")));
        }
        if cfg.response.is_some() && layout != "matrix" {
            return Err(usage("--response needs --layout matrix"));
        }
        let estimator = parse_estimator(cfg.estimator.as_deref().unwrap_or("mean"))?;
        let scheme = match cfg.scheme.as_deref() {
            Some(s) => parse_scheme(s)?,
            None if layout == "matrix" => Scheme::IndependentComponent,
            None => Scheme::IndependentPopulations,
        };
        let size = match (
            cfg.fraction,
            cfg.full.unwrap_or(false),
            cfg.auto_m.unwrap_or(false),
        ) {
            (Some(_), true, _) | (Some(_), _, true) | (None, true, true) => {
                return Err(usage("choose one of --fraction, --full and --auto-m"))
            }
            (Some(f), _, _) => {
                if !(f > 0.0 && f <= 1.0) {
                    return Err(usage(format!("--fraction must lie in (0, 1], got {f}")));
                }
                SizeChoice::Fraction(f)
            }
            (None, _, true) => SizeChoice::Auto,
            (None, _, false) => SizeChoice::Full,
        };
        let rounding = match cfg.rounding.as_deref() {
            None | Some("half-up") => Rounding::HalfUp,
            Some("floor") => Rounding::Floor,
            Some(other) => return Err(usage(format!("unknown rounding '{other}'"))),
        };
        let level = cfg.level.unwrap_or(0.9);
        if !(level > 0.0 && level < 1.0) {
            return Err(usage(format!("--level must lie in (0, 1), got {level}")));
        }
        let replicates = cfg.replicates.unwrap_or(1000);
        if replicates == 0 {
            return Err(usage("--replicates must be positive"));
        }
        let defaults = ConditionalLoops::default();
        let log_scale = cfg.log_scale.unwrap_or(1.0);
        if !(log_scale > 0.0) {
            return Err(usage("--log-scale must be positive"));
        }
        Ok(Effective {
            command: command.into(),
            input: cfg.input,
            layout,
            response: cfg.response,
            estimator,
            scheme,
            size,
            rounding,
            replicates,
            level,
            seed: cfg.seed.unwrap_or(0),
            top: cfg.top.unwrap_or(5),
            loops: ConditionalLoops {
                outer: cfg.outer.unwrap_or(defaults.outer),
                inner: cfg.inner.unwrap_or(defaults.inner),
            },
            log_scale,
            threads: cfg.threads,
            out: cfg.out.unwrap_or_else(|| PathBuf::from(".")),
        })
    }

    pub fn estimator_spec(&self) -> EstimatorSpec {
        EstimatorSpec::new(self.estimator)
    }

    fn load(&self) -> CliResult<PopulationData> {
        let input = self
            .input
            .as_ref()
            .ok_or_else(|| usage("--input is required"))?;
        Ok(match self.layout.as_str() {
            "matrix" => load_matrix_csv(input, self.response.as_deref())?,
            _ => load_long_csv(input)?,
        })
    }
}

/// Output stamping shared by every command.
pub struct Stamp {
    pub seed: u64,
    pub hash: String,
    pub config_json: String,
}

impl Stamp {
    pub fn new<T: Serialize>(seed: u64, config: &T) -> Stamp {
        let config_json = serde_json::to_string_pretty(config).expect("config serialises");
        let hash = Sha256::digest(config_json.as_bytes())
            .iter()
            .fold(String::new(), |mut s, b| {
                let _ = write!(s, "{b:02x}");
                s
            });
        Stamp {
            seed,
            hash,
            config_json,
        }
    }

    pub fn comment(&self) -> String {
        format!(
            "# rankboot {VERSION} seed={} config_sha256={}\n",
            self.seed, self.hash
        )
    }

    pub fn json_header(&self) -> serde_json::Value {
        json!({"tool": "rankboot", "version": VERSION, "seed": self.seed, "config_sha256": self.hash})
    }

    fn write_csv(&self, dir: &Path, name: &str, body: &str) -> CliResult<PathBuf> {
        write_file(dir, name, &format!("{}{body}", self.comment()))
    }

    fn write_json(
        &self,
        dir: &Path,
        name: &str,
        mut value: serde_json::Value,
    ) -> CliResult<PathBuf> {
        if let Some(obj) = value.as_object_mut() {
            obj.insert("header".into(), self.json_header());
        }
        let text = serde_json::to_string_pretty(&value).expect("json serialises");
        write_file(dir, name, &(text + "\n"))
    }

    fn write_echo(&self, dir: &Path) -> CliResult<PathBuf> {
        write_file(
            dir,
            "effective_config.json",
            &(self.config_json.clone() + "\n"),
        )
    }
}

fn write_file(dir: &Path, name: &str, contents: &str) -> CliResult<PathBuf> {
    fs::create_dir_all(dir).map_err(|source| CliError::Write {
        path: dir.to_path_buf(),
        source,
    })?;
    let path = dir.join(name);
    fs::write(&path, contents).map_err(|source| CliError::Write {
        path: path.clone(),
        source,
    })?;
    Ok(path)
}

fn in_pool<R: Send>(threads: Option<usize>, f: impl FnOnce() -> R + Send) -> R {
    match threads {
        Some(t) => rankboot::par::with_threads(t, f),
        None => f(),
    }
}

fn labels(data: &PopulationData) -> Vec<String> {
    (0..data.p()).map(|j| data.label(j)).collect()
}

/// Resample plan for the effective config; `--auto-m` runs the selector
/// first and returns its result alongside.
pub fn build_plan(
    eff: &Effective,
    data: &PopulationData,
) -> CliResult<(ResamplePlan, Option<MSelection>)> {
    let (rule, selection) = match eff.size {
        SizeChoice::Full => (SizeRule::Full, None),
        SizeChoice::Fraction(f) => (SizeRule::Fraction(f), None),
        SizeChoice::Auto => {
            let est = eff.estimator_spec();
            let sel = mselect::minimize(&mselect::tuning_inputs(data, &est, None, eff.log_scale)?)?;
            (SizeRule::Fraction(sel.rho_star), Some(sel))
        }
    };
    let plan =
        ResamplePlan::new(eff.scheme, rule, eff.replicates, eff.seed).with_rounding(eff.rounding);
    plan.validate(data)?;
    Ok((plan, selection))
}

#[derive(Debug, Clone, Serialize)]
pub struct AnalyzeItem {
    pub item: String,
    pub estimate: f64,
    pub rank: usize,
    pub lo: usize,
    pub hi: usize,
    pub width: usize,
    pub m: usize,
}

pub fn cmd_analyze(eff: &Effective) -> CliResult<Vec<PathBuf>> {
    let data = eff.load()?;
    let est = eff.estimator_spec();
    est.validate(&data)?;
    let (plan, selection) = build_plan(eff, &data)?;
    let estimates = estimate_all(&data, &est)?;
    let ranks = rank_estimates(&estimates)?.into_inner();
    let dist = bootstrap_rank_distribution(&data, &est, &plan)?;
    let intervals = prediction_intervals(&dist, eff.level)?;
    let labels = labels(&data);

    let stamp = Stamp::new(eff.seed, eff);
    let dir = &eff.out;
    let items: Vec<AnalyzeItem> = (0..data.p())
        .map(|j| AnalyzeItem {
            item: labels[j].clone(),
            estimate: estimates[j],
            rank: ranks[j],
            lo: intervals.intervals[j].lo,
            hi: intervals.intervals[j].hi,
            width: intervals.intervals[j].width(),
            m: dist.m_used()[j],
        })
        .collect();
    let summary = json!({
        "level": eff.level,
        "replicates": eff.replicates,
        "scheme": eff.scheme,
        "mean_width": interval_width_summary(&intervals),
        "m_used": dist.m_used(),
        "selected_fraction": selection.as_ref().map(|s| s.rho_star),
        "items": items,
    });
    Ok(vec![
        stamp.write_csv(dir, "rank_distribution.csv", &dist.to_csv(&labels))?,
        stamp.write_csv(
            dir,
            "intervals.csv",
            &intervals.to_csv(&labels, &estimates, &ranks),
        )?,
        stamp.write_json(dir, "summary.json", summary)?,
        stamp.write_echo(dir)?,
    ])
}

pub fn cmd_select_m(eff: &Effective) -> CliResult<(MSelection, Vec<PathBuf>)> {
    let data = eff.load()?;
    let est = eff.estimator_spec();
    est.validate(&data)?;
    let sel = mselect::minimize(&mselect::tuning_inputs(&data, &est, None, eff.log_scale)?)?;
    let stamp = Stamp::new(eff.seed, eff);
    let files = vec![
        stamp.write_csv(&eff.out, "m_selection.csv", &sel.to_csv())?,
        stamp.write_echo(&eff.out)?,
    ];
    Ok((sel, files))
}

#[derive(Debug, Clone, Serialize)]
pub struct ConditionalRow {
    pub item: String,
    pub rank: usize,
    pub estimate: f64,
    pub lo: usize,
    pub hi: usize,
    pub width: usize,
    pub unconditional_lo: usize,
    pub unconditional_hi: usize,
    pub unconditional_width: usize,
    pub mean_rank: f64,
    pub rank_variance: f64,
}

pub fn cmd_conditional(eff: &Effective) -> CliResult<(Vec<ConditionalRow>, Vec<PathBuf>)> {
    if eff.scheme == Scheme::Synchronous {
        return Err(rankboot::Error::Validation(SYNCHRONOUS_CONDITIONAL.into()).into());
    }
    let data = eff.load()?;
    if data.layout() != rankboot::Layout::Matrix {
        return Err(usage("conditional analysis needs --layout matrix"));
    }
    if eff.scheme != Scheme::IndependentComponent {
        return Err(usage(
            "conditional analysis needs --scheme independent-component",
        ));
    }
    let est = eff.estimator_spec();
    est.validate(&data)?;
    let (plan, _) = build_plan(eff, &data)?;
    let estimates = estimate_all(&data, &est)?;
    let ranks = rank_estimates(&estimates)?.into_inner();
    let uncond =
        prediction_intervals(&bootstrap_rank_distribution(&data, &est, &plan)?, eff.level)?;
    let labels = labels(&data);
    let top = eff.top.min(data.p());
    let mut order: Vec<usize> = (0..data.p()).collect();
    order.sort_by_key(|&j| ranks[j]);

    let mut rows = Vec::new();
    for &j in &order[..top] {
        let c = conditional_rank_distribution(&data, &est, &plan, eff.loops, j)?;
        let iv = c.observed_interval(eff.level)?;
        let u = uncond.intervals[j];
        rows.push(ConditionalRow {
            item: labels[j].clone(),
            rank: ranks[j],
            estimate: estimates[j],
            lo: iv.lo,
            hi: iv.hi,
            width: iv.width(),
            unconditional_lo: u.lo,
            unconditional_hi: u.hi,
            unconditional_width: u.width(),
            mean_rank: c.total_mean,
            rank_variance: c.total_variance,
        });
    }
    let mut body = String::from(
        "item,rank,estimate,lo,hi,width,unconditional_lo,unconditional_hi,unconditional_width,mean_rank,rank_variance,level\n",
    );
    for r in &rows {
        let _ = writeln!(
            body,
            "{},{},{},{},{},{},{},{},{},{},{},{}",
            r.item,
            r.rank,
            r.estimate,
            r.lo,
            r.hi,
            r.width,
            r.unconditional_lo,
            r.unconditional_hi,
            r.unconditional_width,
            r.mean_rank,
            r.rank_variance,
            eff.level
        );
    }
    let stamp = Stamp::new(eff.seed, eff);
    let files = vec![
        stamp.write_csv(&eff.out, "conditional_intervals.csv", &body)?,
        stamp.write_echo(&eff.out)?,
    ];
    Ok((rows, files))
}

/// Scenario list for `simulate` after overrides and the `--rho` filter.
pub fn simulate_specs(args: &SimulateArgs) -> CliResult<Vec<ScenarioSpec>> {
    let seed = args.seed.unwrap_or(0);
    let mut specs = match (&args.name, &args.scenarios) {
        (Some(name), None) => sim::builtin(name, seed)?,
        (None, Some(path)) => {
            let text = fs::read_to_string(path).map_err(|source| rankboot::Error::Io {
                path: path.clone(),
                source,
            })?;
            let mut v: Vec<ScenarioSpec> = serde_json::from_str(&text)
                .map_err(|e| usage(format!("{}: {e}", path.display())))?;
            if let Some(s) = args.seed {
                v.iter_mut().for_each(|spec| spec.seed = s);
            }
            v
        }
        _ => return Err(usage("give a scenario name or --scenarios <file>")),
    };
    if let Some(rho) = args.rho {
        specs.retain(|s| s.noise.rho == rho);
        if specs.is_empty() {
            return Err(usage(format!("no scenario has rho = {rho}")));
        }
    }
    for s in &mut specs {
        if let Some(r) = args.reps {
            s.dataset_reps = r;
        }
        if let Some(b) = args.replicates {
            s.plan.replicates = b;
        }
        s.validate()?;
    }
    Ok(specs)
}

pub fn cmd_simulate(args: &SimulateArgs) -> CliResult<(Vec<ScenarioResult>, Vec<PathBuf>)> {
    let specs = simulate_specs(args)?;
    let results = specs
        .iter()
        .map(sim::run_scenario)
        .collect::<Result<Vec<_>, _>>()?;
    let stamp = Stamp::new(args.seed.unwrap_or(0), &specs);
    let dir = args.out.clone().unwrap_or_else(|| PathBuf::from("."));
    let files = vec![
        stamp.write_csv(&dir, "metrics.csv", &sim::rows_csv(&results))?,
        stamp.write_csv(&dir, "metrics_summary.csv", &sim::summary_csv(&results))?,
        stamp.write_echo(&dir)?,
    ];
    Ok((results, files))
}

fn moments_json(pmf: &[f64]) -> serde_json::Value {
    let (mean, variance) = oracle::pmf_moments(pmf);
    json!({"pmf": pmf, "mean": mean, "variance": variance})
}

pub fn cmd_oracle(args: &OracleArgs) -> CliResult<serde_json::Value> {
    let value = match args.name.as_str() {
        "constant-c" => json!({
            "quadrature": oracle::tail_integral_quadrature(0.0),
            "closed_form": oracle::constant_c(),
        }),
        "tied-shift" => {
            if args.p < 2 {
                return Err(usage("--p must be at least 2"));
            }
            let cls = GroupClassification::block(0, args.p - 1, 0);
            let mut z = vec![0.0; args.p];
            z[0] = args.z1;
            let pmf = oracle::bootstrap_limit_pmf(&cls, &vec![1.0; args.p], &z, args.draws, args.seed)?;
            moments_json(&pmf)
        }
        "expected-rank" => {
            let delta = args.delta.ok_or_else(|| usage("--delta is required"))?;
            json!({
                "asymptotic": oracle::expected_rank_asymptotic(args.item, delta)?,
                "finite_p": oracle::expected_rank_linear_exact(args.item, delta, args.p),
            })
        }
        "limit-rank" => {
            let offsets = if args.offsets.is_empty() {
                vec![0.0; args.sigmas.len()]
            } else {
                args.offsets.clone()
            };
            let spec = LimitSpec::new(args.sigmas.clone(), offsets, args.item.wrapping_sub(1))?;
            moments_json(&oracle::limit_rank_pmf(&spec, args.draws, args.seed)?)
        }
        "r-limit" => {
            if args.item == 0 || args.item > args.sigmas.len() {
                return Err(usage("--item must index into --sigmas"));
            }
            moments_json(&oracle::r_limit_pmf(&args.sigmas, args.item - 1, args.draws, args.seed)?)
        }
        other => {
            return Err(usage(format!(
                "unknown oracle '{other}'; known: constant-c, tied-shift, expected-rank, limit-rank, r-limit"
            )))
        }
    };
    if let Some(dir) = &args.out {
        let stamp = Stamp::new(args.seed, &json!({"oracle": args.name, "result": &value}));
        stamp.write_json(
            dir,
            "oracle.json",
            json!({"oracle": args.name, "result": &value}),
        )?;
    }
    Ok(value)
}

/// Runs a parsed command line and returns what should go to stdout.
pub fn run(cli: Cli) -> CliResult<String> {
    match cli.command {
        Command::Analyze(a) => {
            let eff = Effective::resolve("analyze", &a)?;
            let files = in_pool(eff.threads, || cmd_analyze(&eff))?;
            Ok(list_files(&files))
        }
        Command::SelectM(a) => {
            let eff = Effective::resolve("select-m", &a)?;
            let (sel, files) = in_pool(eff.threads, || cmd_select_m(&eff))?;
            Ok(format!(
                "m* = {} (fraction {:.4} of n = {})\n{}",
                sel.m_star,
                sel.rho_star,
                sel.n_bar,
                list_files(&files)
            ))
        }
        Command::Conditional(a) => {
            let eff = Effective::resolve("conditional", &a)?;
            let (_, files) = in_pool(eff.threads, || cmd_conditional(&eff))?;
            Ok(list_files(&files))
        }
        Command::Simulate(a) => {
            let (results, files) = in_pool(a.threads, || cmd_simulate(&a))?;
            let mut out = String::from("scenario,metric,mean,ci90_lo,ci90_hi\n");
            for s in results.iter().flat_map(|r| &r.summaries) {
                let _ = writeln!(
                    out,
                    "{},{},{},{},{}",
                    s.scenario, s.metric, s.mean, s.ci_lo, s.ci_hi
                );
            }
            Ok(out + &list_files(&files))
        }
        Command::Oracle(a) => {
            let v = in_pool(a.threads, || cmd_oracle(&a))?;
            Ok(serde_json::to_string_pretty(&v).expect("json serialises") + "\n")
        }
    }
}

fn list_files(files: &[PathBuf]) -> String {
    files
        .iter()
        .map(|f| format!("wrote {}\n", f.display()))
        .collect()
}
