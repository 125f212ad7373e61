//! The `airrel` command line.
//!
//! Every subcommand writes its results and a `manifest.json` into one
//! output directory (`--out`, default `./air-out/<timestamp>`). Exit codes:
//! 0 on success, 2 when validation finds violations (the report is still
//! written), 1 on any other error.

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::path::{Path, PathBuf};

use airrel_core::design::{acceleration_factor, search_mmlhd, AltSpec, PhiConfig};
use airrel_core::propagation::{
    evaluate_mae, fit_ep, fit_hpp_modules, fit_nhpp_modules, EpFit, EpFitOptions, HppPredictor, ModuleEventLog, NhppPredictor,
};
use airrel_core::recurrent::{fit_manufacturer_level, fit_mle, rank_by_aic, BaselineIntensityModel, Family, FitOptions, RecurrentFit};
use airrel_core::regression::{
    fit_mixture, fit_mixture_pooled, predict_simplex_grid, MixtureFit, MixtureObservation, MixtureResponse, SCENARIO_NAMES,
};
use airrel_core::srgm::{fit_resilience, fit_srgm, forward_stepwise, HazardFamily, ResilienceFit, ResilienceForm, SRGMFit, SrgmOptions};
use airrel_core::Seed;
use anyhow::{anyhow, bail, Context};
use chrono::NaiveDate;
use clap::{Args, Parser, Subcommand, ValueEnum};
use rayon::prelude::*;
use serde::Serialize;

use crate::datasets::{
    self, declared_options, detect_schema, manufacturer_events, module_logs, parse_csv, read_text, scan_dir, srgm_series, summarize,
    vehicle_series, AccuracyScale, DataRoot, Dataset, Schema, ValidateOptions,
};
use crate::generate;
use crate::output::{fmt_num, RunOutput};

/// Covariates offered to the SRGM by default. `pgd_pct` is left out since
/// it equals `100 − fgsm_pct`.
pub const SRGM_COVARIATES: [&str; 10] =
    ["alpha", "f1", "epsilon", "fgsm_pct", "train_acc", "train_loss", "val_acc", "val_loss", "test_loss", "memory"];

/// Resilience candidates exclude the response and its transforms.
pub const RESILIENCE_COVARIATES: [&str; 7] = ["epsilon", "fgsm_pct", "train_acc", "train_loss", "val_acc", "val_loss", "memory"];

#[derive(Debug, Parser)]
#[command(name = "airrel", version, about = "Reliability analysis for AI systems")]
struct Cli {
    /// Output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Dataset repository root (falls back to AIRREL_DATA_ROOT).
    #[arg(long, global = true)]
    data_root: Option<PathBuf>,
    /// Worker threads for independent fits.
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Check a CSV file against a schema.
    Validate {
        file: PathBuf,
        #[arg(long)]
        schema: String,
        #[arg(long)]
        accuracy_scale: Option<String>,
    },
    /// Tallies for every CSV in a dataset.
    Summarize { dataset: String },
    /// Recurrent-event NHPP fits on disengagement or collision data.
    FitRecurrent(FitRecurrentArgs),
    /// Error-propagation fit on module-error logs.
    FitEp(FitEpArgs),
    /// Covariate SRGM fits on adversarial failure counts.
    FitSrgm(FitSrgmArgs),
    /// Stepwise resilience regression on test accuracy.
    FitResilience(FitResilienceArgs),
    /// Mixture-experiment regression.
    FitMixture(FitMixtureArgs),
    /// Maximin Latin hypercube by simulated annealing.
    DesignLhd(DesignLhdArgs),
    /// Acceleration factor from lifetimes or the Arrhenius relation.
    AltAf(AltAfArgs),
    /// Write a synthetic dataset.
    Simulate(SimulateArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Level {
    Vehicle,
    Manufacturer,
}

#[derive(Debug, Args)]
struct FitRecurrentArgs {
    dataset: String,
    /// Family name or `all`.
    #[arg(long, default_value = "all")]
    family: String,
    /// Defaults to `vehicle` for disengagement and `manufacturer` for collision data.
    #[arg(long, value_enum)]
    level: Option<Level>,
}

#[derive(Debug, Args)]
struct FitEpArgs {
    dataset: String,
    /// Number of trailing scenarios held out for the MAE comparison;
    /// 0 evaluates on the fitting logs.
    #[arg(long, default_value_t = 0)]
    holdout: usize,
    #[arg(long, default_value_t = 0.5)]
    grid_step: f64,
}

#[derive(Debug, Args)]
struct FitSrgmArgs {
    dataset: String,
    /// Hazard family or `all`.
    #[arg(long, default_value = "all")]
    hazard: String,
    #[arg(long)]
    stepwise: bool,
    /// Comma-separated covariate columns.
    #[arg(long, value_delimiter = ',')]
    covariates: Option<Vec<String>>,
    #[arg(long)]
    scenario: Option<i64>,
    #[arg(long, default_value_t = 0.9)]
    train_fraction: f64,
}

#[derive(Debug, Args)]
struct FitResilienceArgs {
    dataset: String,
    /// `linear`, `interactions` or `poly:<d>`.
    #[arg(long, default_value = "linear")]
    form: String,
    #[arg(long, value_delimiter = ',')]
    covariates: Option<Vec<String>>,
    #[arg(long)]
    scenario: Option<i64>,
    #[arg(long, default_value_t = 0.9)]
    train_fraction: f64,
}

#[derive(Debug, Args)]
struct FitMixtureArgs {
    dataset: String,
    #[arg(long, default_value = "y1")]
    response: String,
    /// `c1`, `c2`, `c3`, `all` (separate fits) or `pooled`.
    #[arg(long, default_value = "all")]
    scenario: String,
    #[arg(long, default_value_t = 10)]
    grid: usize,
    #[arg(long, default_value_t = 0.95)]
    level: f64,
}

#[derive(Debug, Args)]
struct DesignLhdArgs {
    #[arg(long)]
    n: usize,
    #[arg(long)]
    p: usize,
    #[arg(long, default_value_t = 15)]
    k: u32,
    #[arg(long, default_value_t = 2.0)]
    m: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 20_000)]
    budget: usize,
}

#[derive(Debug, Args)]
struct AltAfArgs {
    /// Nominal lifetime.
    #[arg(long, requires = "la", conflicts_with_all = ["ea", "tuse", "tstress"])]
    ln: Option<f64>,
    /// Accelerated lifetime.
    #[arg(long, requires = "ln")]
    la: Option<f64>,
    /// Activation energy in eV.
    #[arg(long, requires_all = ["tuse", "tstress"])]
    ea: Option<f64>,
    /// Use temperature in kelvin.
    #[arg(long, requires = "ea")]
    tuse: Option<f64>,
    /// Stress temperature in kelvin.
    #[arg(long, requires = "ea")]
    tstress: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Generator {
    Disengagement,
    Collision,
    #[value(alias = "ep-cascade")]
    ModuleErrors,
    #[value(alias = "srgm")]
    Adversarial,
    Mixture,
}

#[derive(Debug, Args)]
struct SimulateArgs {
    #[arg(value_enum)]
    generator: Generator,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Vehicles per manufacturer.
    #[arg(long, default_value_t = 10)]
    vehicles: usize,
    #[arg(long, default_value_t = 7)]
    scenarios: usize,
    /// Error-injection probability.
    #[arg(long, default_value_t = 0.7)]
    prob: f64,
    /// Intervals per adversarial scenario.
    #[arg(long, default_value_t = 30)]
    steps: usize,
    /// Response noise SD for the mixture generator.
    #[arg(long, default_value_t = 0.01)]
    noise: f64,
}

/// Parses `args` (program name first), runs, and returns the exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let args: Vec<OsString> = args.into_iter().map(Into::into).collect();
    let cli = match Cli::try_parse_from(&args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 1 } else { 0 };
        }
    };
    let flags = args.iter().skip(1).map(|a| a.to_string_lossy().into_owned()).collect();
    match run(cli, flags) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            1
        }
    }
}

fn run(cli: Cli, flags: Vec<String>) -> anyhow::Result<i32> {
    if let Some(n) = cli.threads {
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global().context("configuring the thread pool")?;
    }
    let name = command_name(&cli.command);
    let mut out = RunOutput::create(cli.out.clone(), name, flags).context("creating the output directory")?;
    let root = cli.data_root.as_deref();
    let code = match cli.command {
        Command::Validate { file, schema, accuracy_scale } => validate(&mut out, &file, &schema, accuracy_scale.as_deref())?,
        Command::Summarize { dataset } => summarize_cmd(&mut out, &dataset, root)?,
        Command::FitRecurrent(a) => fit_recurrent_cmd(&mut out, &a, root)?,
        Command::FitEp(a) => fit_ep_cmd(&mut out, &a, root)?,
        Command::FitSrgm(a) => fit_srgm_cmd(&mut out, &a, root)?,
        Command::FitResilience(a) => fit_resilience_cmd(&mut out, &a, root)?,
        Command::FitMixture(a) => fit_mixture_cmd(&mut out, &a, root)?,
        Command::DesignLhd(a) => design_lhd_cmd(&mut out, &a)?,
        Command::AltAf(a) => alt_af_cmd(&mut out, &a)?,
        Command::Simulate(a) => simulate_cmd(&mut out, &a)?,
    };
    let dir = out.finish().context("writing the manifest")?;
    eprintln!("results in {}", dir.display());
    Ok(code)
}

fn command_name(c: &Command) -> &'static str {
    match c {
        Command::Validate { .. } => "validate",
        Command::Summarize { .. } => "summarize",
        Command::FitRecurrent(_) => "fit-recurrent",
        Command::FitEp(_) => "fit-ep",
        Command::FitSrgm(_) => "fit-srgm",
        Command::FitResilience(_) => "fit-resilience",
        Command::FitMixture(_) => "fit-mixture",
        Command::DesignLhd(_) => "design-lhd",
        Command::AltAf(_) => "alt-af",
        Command::Simulate(_) => "simulate",
    }
}

/// A dataset argument is a file, a directory, or a name in the data root.
fn locate(arg: &str, data_root: Option<&Path>) -> anyhow::Result<PathBuf> {
    let p = PathBuf::from(arg);
    if p.exists() {
        return Ok(p);
    }
    let root = DataRoot::locate(data_root)
        .ok_or_else(|| anyhow!("{arg:?} is not a path and no data root is set (use --data-root or {})", datasets::DATA_ROOT_ENV))?;
    Ok(DataRoot::open(root)?.dataset_dir(arg)?)
}

struct Inputs {
    files: Vec<(PathBuf, Schema)>,
    options: ValidateOptions,
}

impl Inputs {
    fn open(arg: &str, data_root: Option<&Path>) -> anyhow::Result<Self> {
        let path = locate(arg, data_root)?;
        if path.is_dir() {
            return Ok(Self { files: scan_dir(&path)?, options: declared_options(&path) });
        }
        let table = parse_csv(&read_text(&path)?)?;
        let schema = detect_schema(&table.headers).ok_or_else(|| anyhow!("{}: columns match no known schema", path.display()))?;
        let options = path.parent().map(declared_options).unwrap_or_default();
        Ok(Self { files: vec![(path, schema)], options })
    }

    fn has(&self, schema: Schema) -> bool {
        self.files.iter().any(|(_, s)| *s == schema)
    }

    fn load(&self, schema: Schema, out: &mut RunOutput) -> anyhow::Result<Dataset> {
        let (path, _) = self.files.iter().find(|(_, s)| *s == schema).ok_or_else(|| anyhow!("no {schema} file among the inputs"))?;
        out.add_input(path)?;
        datasets::load(path, schema, &self.options).with_context(|| format!("loading {}", path.display()))
    }
}

fn validate(out: &mut RunOutput, file: &Path, schema: &str, scale: Option<&str>) -> anyhow::Result<i32> {
    let schema: Schema = schema.parse()?;
    let mut options = file.parent().map(declared_options).unwrap_or_default();
    if let Some(s) = scale {
        options.accuracy_scale = Some(s.parse::<AccuracyScale>()?);
    }
    out.add_input(file)?;
    let report = datasets::validate(file, schema, &options)?;
    out.write_json("report.json", &report)?;
    for v in &report.violations {
        println!("row {} column {}: {}", v.row, v.column, v.rule);
    }
    println!("{}: {} rows, {} violation(s)", file.display(), report.rows, report.violations.len());
    Ok(if report.is_clean() { 0 } else { 2 })
}

fn summarize_cmd(out: &mut RunOutput, dataset: &str, root: Option<&Path>) -> anyhow::Result<i32> {
    let inputs = Inputs::open(dataset, root)?;
    let mut all = BTreeMap::new();
    for (path, schema) in &inputs.files {
        out.add_input(path)?;
        let ds = datasets::load(path, *schema, &inputs.options).with_context(|| format!("loading {}", path.display()))?;
        let s = summarize(&ds);
        println!("{}: {} ({} rows)", path.display(), s.schema, s.rows);
        for (k, v) in &s.totals {
            println!("  {k}: {}", fmt_num(*v));
        }
        let name = path.file_name().map_or_else(|| path.display().to_string(), |n| n.to_string_lossy().into_owned());
        all.insert(name, s);
    }
    out.write_json("summary.json", &all)?;
    Ok(0)
}

type EventTuple = (String, Option<String>, NaiveDate);

#[derive(Serialize)]
struct FitEntry<F> {
    group: String,
    model: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    fit: Option<F>,
    #[serde(skip_serializing_if = "Option::is_none")]
    error: Option<String>,
}

impl<F> FitEntry<F> {
    fn new(group: String, model: String, r: airrel_core::Result<F>) -> Self {
        match r {
            Ok(f) => Self { group, model, fit: Some(f), error: None },
            Err(e) => Self { group, model, fit: None, error: Some(e.to_string()) },
        }
    }
}

fn slug(s: &str) -> String {
    s.chars().map(|c| if c.is_ascii_alphanumeric() { c.to_ascii_lowercase() } else { '-' }).collect()
}

fn fit_recurrent_cmd(out: &mut RunOutput, a: &FitRecurrentArgs, root: Option<&Path>) -> anyhow::Result<i32> {
    let inputs = Inputs::open(&a.dataset, root)?;
    let (events, default_level): (Vec<EventTuple>, Level) = if inputs.has(Schema::Disengagement) {
        let Dataset::Disengagement(v) = inputs.load(Schema::Disengagement, out)? else { unreachable!() };
        (v.into_iter().map(|r| (r.manufacture, Some(r.vin), r.date)).collect(), Level::Vehicle)
    } else if inputs.has(Schema::Collision) {
        let Dataset::Collision(v) = inputs.load(Schema::Collision, out)? else { unreachable!() };
        (v.into_iter().map(|r| (r.manufacture, r.vin, r.date)).collect(), Level::Manufacturer)
    } else {
        bail!("fit-recurrent needs a disengagement or collision file");
    };
    let Dataset::Mileage(mileage) = inputs.load(Schema::Mileage, out)? else { unreachable!() };
    let Dataset::Months(months) = inputs.load(Schema::Months, out)? else { unreachable!() };
    let families: Vec<Family> = if a.family.eq_ignore_ascii_case("all") { Family::ALL.to_vec() } else { vec![a.family.parse()?] };
    let level = a.level.unwrap_or(default_level);
    let opts = FitOptions::default();

    let (entries, tau): (Vec<FitEntry<RecurrentFit>>, f64) = match level {
        Level::Vehicle => {
            let groups = vehicle_series(&events, &mileage, &months)?;
            let tau = groups.values().flatten().map(|u| u.tau).fold(0.0, f64::max);
            let jobs: Vec<_> = groups.iter().flat_map(|(m, u)| families.iter().map(move |f| (m, u, *f))).collect();
            let e = jobs.into_par_iter().map(|(m, units, f)| FitEntry::new(m.clone(), f.to_string(), fit_mle(units, f, opts))).collect();
            (e, tau)
        }
        Level::Manufacturer => {
            let groups = manufacturer_events(&events, &mileage, &months)?;
            let tau = groups.values().map(|g| g.tau).fold(0.0, f64::max);
            let jobs: Vec<_> = groups.iter().flat_map(|(m, g)| families.iter().map(move |f| (m, g, *f))).collect();
            let e = jobs
                .into_par_iter()
                .map(|(m, g, f)| FitEntry::new(m.clone(), f.to_string(), fit_manufacturer_level(&g.event_times, &g.exposures, f, opts)))
                .collect();
            (e, tau)
        }
    };

    let grid: Vec<f64> = (1..=tau as usize).map(|d| d as f64).collect();
    let mut ranking = BTreeMap::new();
    let mut by_group: BTreeMap<&str, Vec<&FitEntry<RecurrentFit>>> = BTreeMap::new();
    for e in &entries {
        by_group.entry(e.group.as_str()).or_default().push(e);
    }
    for (group, es) in &by_group {
        let fits: Vec<RecurrentFit> = es.iter().filter_map(|e| e.fit.clone()).collect();
        ranking.insert(group.to_string(), rank_by_aic(&fits));
        let ok: Vec<&&FitEntry<RecurrentFit>> = es.iter().filter(|e| e.fit.is_some()).collect();
        let mut headers = vec!["t".to_string()];
        for e in &ok {
            headers.push(format!("{}_bif", e.model));
            headers.push(format!("{}_cbif", e.model));
        }
        let rows: Vec<Vec<f64>> = grid
            .iter()
            .map(|&t| {
                let mut r = vec![t];
                for e in &ok {
                    let m = &e.fit.as_ref().expect("filtered").model;
                    r.push(m.intensity_unchecked(t));
                    r.push(m.cumulative_unchecked(t));
                }
                r
            })
            .collect();
        let h: Vec<&str> = headers.iter().map(String::as_str).collect();
        out.write_numeric_csv(&format!("curves-{}.csv", slug(group)), &h, &rows)?;
        for e in es {
            match (&e.fit, &e.error) {
                (Some(f), _) => println!("{group}\t{}\tlog-lik {}\tAIC {}", e.model, fmt_num(f.log_lik), fmt_num(f.aic)),
                (None, Some(err)) => println!("{group}\t{}\tfailed: {err}", e.model),
                _ => {}
            }
        }
    }
    out.write_json("fits.json", &entries)?;
    out.write_json("ranking.json", &ranking)?;
    Ok(0)
}

#[derive(Serialize)]
struct EpReport {
    ep: EpFit,
    nhpp: Vec<BaselineIntensityModel>,
    hpp: Vec<f64>,
    holdout: usize,
    mae: BTreeMap<&'static str, f64>,
}

fn fit_ep_cmd(out: &mut RunOutput, a: &FitEpArgs, root: Option<&Path>) -> anyhow::Result<i32> {
    let inputs = Inputs::open(&a.dataset, root)?;
    let Dataset::ModuleErrors(records) = inputs.load(Schema::ModuleErrors, out)? else { unreachable!() };
    let logs = module_logs(&records)?;
    if a.holdout >= logs.len() {
        bail!("holdout of {} leaves no fitting logs out of {}", a.holdout, logs.len());
    }
    if !(a.grid_step > 0.0) {
        bail!("grid step must be positive");
    }
    let (train, test): (&[ModuleEventLog], &[ModuleEventLog]) =
        if a.holdout == 0 { (&logs, &logs) } else { logs.split_at(logs.len() - a.holdout) };
    let ep = fit_ep(train, EpFitOptions::default())?;
    let nhpp = fit_nhpp_modules(train)?;
    let hpp = fit_hpp_modules(train)?;
    let window = test.iter().map(|l| l.window).fold(f64::INFINITY, f64::min);
    let grid: Vec<f64> = (1..).map(|k| k as f64 * a.grid_step).take_while(|&t| t <= window + 1e-12).collect();
    let m_ep = evaluate_mae(&ep.model, test, &grid)?;
    let m_nhpp = evaluate_mae(&NhppPredictor(nhpp.clone()), test, &grid)?;
    let m_hpp = evaluate_mae(&HppPredictor(hpp.clone()), test, &grid)?;
    let rows: Vec<Vec<f64>> =
        grid.iter().enumerate().map(|(i, &t)| vec![t, m_ep.per_point[i], m_nhpp.per_point[i], m_hpp.per_point[i]]).collect();
    out.write_numeric_csv("mae_curve.csv", &["t", "ep", "nhpp", "hpp"], &rows)?;
    for e in &ep.model.edges {
        let t = &ep.model.topology.modules;
        println!("edge {} -> {}: alpha {} gamma {}", t[e.source], t[e.target], fmt_num(e.alpha), fmt_num(e.gamma));
    }
    println!("MAE ep {} nhpp {} hpp {}", fmt_num(m_ep.mae), fmt_num(m_nhpp.mae), fmt_num(m_hpp.mae));
    let mae = BTreeMap::from([("ep", m_ep.mae), ("nhpp", m_nhpp.mae), ("hpp", m_hpp.mae)]);
    out.write_json("ep_fit.json", &EpReport { ep, nhpp, hpp, holdout: a.holdout, mae })?;
    Ok(0)
}

fn adversarial_records(inputs: &Inputs, out: &mut RunOutput) -> anyhow::Result<Vec<datasets::AdversarialCountRecord>> {
    let Dataset::Adversarial(t) = inputs.load(Schema::Adversarial, out)? else { unreachable!() };
    Ok(t.records)
}

fn scenario_ids(records: &[datasets::AdversarialCountRecord], only: Option<i64>) -> anyhow::Result<Vec<i64>> {
    let mut ids: Vec<i64> = records.iter().map(|r| r.scenario).collect();
    ids.sort_unstable();
    ids.dedup();
    match only {
        Some(s) if ids.contains(&s) => Ok(vec![s]),
        Some(s) => bail!("no rows for scenario {s}"),
        None => Ok(ids),
    }
}

fn names_or(given: &Option<Vec<String>>, default: &[&str]) -> Vec<String> {
    given.clone().unwrap_or_else(|| default.iter().map(|s| s.to_string()).collect())
}

fn fit_srgm_cmd(out: &mut RunOutput, a: &FitSrgmArgs, root: Option<&Path>) -> anyhow::Result<i32> {
    let inputs = Inputs::open(&a.dataset, root)?;
    let records = adversarial_records(&inputs, out)?;
    let covs = names_or(&a.covariates, &SRGM_COVARIATES);
    let hazards: Vec<HazardFamily> =
        if a.hazard.eq_ignore_ascii_case("all") { HazardFamily::ALL.to_vec() } else { vec![a.hazard.parse()?] };
    let opts = SrgmOptions { train_fraction: a.train_fraction, ..SrgmOptions::default() };
    let mut series = BTreeMap::new();
    for s in scenario_ids(&records, a.scenario)? {
        series.insert(s, srgm_series(&records, s, &covs, None)?);
    }
    let jobs: Vec<_> = series.iter().flat_map(|(s, x)| hazards.iter().map(move |h| (*s, x, *h))).collect();
    let entries: Vec<FitEntry<SRGMFit>> = jobs
        .into_par_iter()
        .map(|(s, x, h)| {
            let r = if a.stepwise { forward_stepwise(x, h, &covs, opts) } else { fit_srgm(x, h, &covs, opts) };
            FitEntry::new(s.to_string(), h.to_string(), r)
        })
        .collect();
    for (s, x) in &series {
        let key = s.to_string();
        let ok: Vec<&FitEntry<SRGMFit>> = entries.iter().filter(|e| e.group == key && e.fit.is_some()).collect();
        let observed = x.cumulative();
        let preds: Vec<Vec<f64>> = ok.iter().map(|e| e.fit.as_ref().expect("filtered").predicted_cumulative(x)).collect::<Result<_, _>>()?;
        let mut headers = vec!["t".to_string(), "observed".to_string()];
        headers.extend(ok.iter().map(|e| e.model.clone()));
        let rows: Vec<Vec<f64>> = (0..x.len())
            .map(|i| {
                let mut r = vec![(i + 1) as f64, observed[i]];
                r.extend(preds.iter().map(|p| p[i]));
                r
            })
            .collect();
        let h: Vec<&str> = headers.iter().map(String::as_str).collect();
        out.write_numeric_csv(&format!("cumulative-scenario-{s}.csv"), &h, &rows)?;
        let mut ranked: Vec<&&FitEntry<SRGMFit>> = ok.iter().collect();
        ranked.sort_by(|p, q| p.fit.as_ref().map(|f| f.aic).unwrap_or(f64::INFINITY).total_cmp(&q.fit.as_ref().map(|f| f.aic).unwrap_or(f64::INFINITY)));
        for e in ranked {
            let f = e.fit.as_ref().expect("filtered");
            let sel: Vec<&str> = f.beta.iter().map(|(n, _)| n.as_str()).collect();
            let mae = f.holdout_mae.map_or_else(|| "-".into(), fmt_num);
            println!("scenario {s}\t{}\tAIC {}\tholdout MAE {mae}\t[{}]", e.model, fmt_num(f.aic), sel.join(","));
        }
        for e in entries.iter().filter(|e| e.group == key) {
            if let Some(err) = &e.error {
                println!("scenario {s}\t{}\tfailed: {err}", e.model);
            }
        }
    }
    out.write_json("srgm_fits.json", &entries)?;
    Ok(0)
}

fn fit_resilience_cmd(out: &mut RunOutput, a: &FitResilienceArgs, root: Option<&Path>) -> anyhow::Result<i32> {
    let inputs = Inputs::open(&a.dataset, root)?;
    let records = adversarial_records(&inputs, out)?;
    let form: ResilienceForm = a.form.parse()?;
    let covs = names_or(&a.covariates, &RESILIENCE_COVARIATES);
    let ids = scenario_ids(&records, a.scenario)?;
    let series = ids.iter().map(|&s| Ok((s, srgm_series(&records, s, &covs, Some("test_acc"))?))).collect::<anyhow::Result<Vec<_>>>()?;
    let entries: Vec<FitEntry<ResilienceFit>> = series
        .par_iter()
        .map(|(s, x)| FitEntry::new(s.to_string(), form_name(form), fit_resilience(x, form, &covs, a.train_fraction)))
        .collect();
    for ((s, x), e) in series.iter().zip(&entries) {
        match (&e.fit, &e.error) {
            (Some(f), _) => {
                let r = x.performance.as_deref().unwrap_or_default();
                let rows: Vec<Vec<f64>> = r.iter().zip(&f.fitted).enumerate().map(|(i, (o, p))| vec![(i + 1) as f64, *o, *p]).collect();
                out.write_numeric_csv(&format!("fitted-scenario-{s}.csv"), &["t", "observed", "fitted"], &rows)?;
                let terms: Vec<&str> = f.coef.iter().map(|(n, _)| n.as_str()).collect();
                let show = |v: Option<f64>| v.map_or_else(|| "-".into(), fmt_num);
                println!("scenario {s}\tholdout MAE {}\tmean-only MAE {}\t[{}]", show(f.holdout_mae), show(f.mean_only_mae), terms.join(","));
            }
            (None, Some(err)) => println!("scenario {s}\tfailed: {err}"),
            _ => {}
        }
    }
    out.write_json("resilience_fits.json", &entries)?;
    Ok(0)
}

fn form_name(f: ResilienceForm) -> String {
    match f {
        ResilienceForm::Linear => "linear".into(),
        ResilienceForm::Interactions => "interactions".into(),
        ResilienceForm::Polynomial(d) => format!("poly:{d}"),
    }
}

#[derive(Serialize)]
struct CoefficientRow {
    term: String,
    estimate: f64,
    stderr: f64,
    lower: f64,
    upper: f64,
}

#[derive(Serialize)]
struct MixtureReport {
    scenario: String,
    response: MixtureResponse,
    sigma: f64,
    df: usize,
    level: f64,
    coefficients: Vec<CoefficientRow>,
}

fn fit_mixture_cmd(out: &mut RunOutput, a: &FitMixtureArgs, root: Option<&Path>) -> anyhow::Result<i32> {
    let inputs = Inputs::open(&a.dataset, root)?;
    let Dataset::Mixture(records) = inputs.load(Schema::Mixture, out)? else { unreachable!() };
    let response: MixtureResponse = a.response.parse()?;
    let obs = records
        .iter()
        .map(|r| {
            let c = r.c.map(|b| f64::from(u8::from(b)));
            Ok(MixtureObservation {
                x: r.x,
                z: r.z.map(|b| f64::from(u8::from(b))),
                scenario: MixtureObservation::scenario_from_flags(c)?,
                y1: r.y1,
                y2: r.y2,
            })
        })
        .collect::<airrel_core::Result<Vec<_>>>()?;
    let key = a.scenario.to_ascii_lowercase();
    let fits: Vec<MixtureFit> = match key.as_str() {
        "pooled" => vec![fit_mixture_pooled(&obs, response)?],
        "all" => fit_mixture(&obs, response)?,
        _ => {
            let idx = ["c1", "c2", "c3"]
                .iter()
                .position(|c| *c == key)
                .or_else(|| SCENARIO_NAMES.iter().position(|c| *c == key))
                .ok_or_else(|| anyhow!("unknown scenario {:?}; expected c1, c2, c3, all or pooled", a.scenario))?;
            let sub: Vec<MixtureObservation> = obs.iter().copied().filter(|o| o.scenario == idx).collect();
            fit_mixture(&sub, response)?
        }
    };
    let mut reports = Vec::new();
    for f in &fits {
        let label = f.scenario.map_or_else(|| "pooled".to_string(), |s| format!("c{}", s + 1));
        let ci = f.fit.confidence_intervals(a.level);
        let coefficients = f
            .fit
            .names
            .iter()
            .zip(&f.fit.coef)
            .zip(&f.fit.stderr)
            .zip(ci)
            .map(|(((n, b), s), (lo, hi))| CoefficientRow { term: n.clone(), estimate: *b, stderr: *s, lower: lo, upper: hi })
            .collect();
        reports.push(MixtureReport { scenario: label.clone(), response, sigma: f.fit.sigma, df: f.fit.df, level: a.level, coefficients });

        let settings: Vec<Vec<f64>> = if f.scenario.is_some() {
            vec![vec![0.0, 0.0], vec![0.0, 1.0], vec![1.0, 0.0], vec![1.0, 1.0]]
        } else {
            let mut v = Vec::new();
            for (c2, c3) in [(0.0, 0.0), (1.0, 0.0), (0.0, 1.0)] {
                for (z1, z2) in [(0.0, 0.0), (0.0, 1.0), (1.0, 0.0), (1.0, 1.0)] {
                    v.push(vec![z1, z2, c2, c3]);
                }
            }
            v
        };
        let mut rows = Vec::new();
        for z in &settings {
            for g in predict_simplex_grid(f, z, a.grid)? {
                let mut r = z.clone();
                r.extend([g.x1, g.x2, g.x3, g.yhat]);
                rows.push(r);
            }
        }
        let mut headers: Vec<&str> = f.z_names.iter().map(String::as_str).collect();
        headers.extend(["x1", "x2", "x3", "yhat"]);
        out.write_numeric_csv(&format!("grid-{label}.csv"), &headers, &rows)?;
        println!("{label}: sigma {} on {} df", fmt_num(f.fit.sigma), f.fit.df);
    }
    out.write_json("mixture_fits.json", &reports)?;
    Ok(0)
}

fn design_lhd_cmd(out: &mut RunOutput, a: &DesignLhdArgs) -> anyhow::Result<i32> {
    let config = PhiConfig { k: a.k, m: a.m };
    out.set_seed(a.seed);
    let r = search_mmlhd(a.n, a.p, config, Seed(a.seed), a.budget)?;
    let headers: Vec<String> = (1..=a.p).map(|j| format!("x{j}")).collect();
    let h: Vec<&str> = headers.iter().map(String::as_str).collect();
    out.write_numeric_csv("design.csv", &h, &r.design.points())?;
    let trace: Vec<Vec<f64>> = r.trace.iter().enumerate().map(|(i, v)| vec![i as f64, *v]).collect();
    out.write_numeric_csv("trace.csv", &["proposal", "phi"], &trace)?;
    out.write_json("design.json", &r)?;
    println!("phi_{} = {}", a.k, fmt_num(r.criterion));
    Ok(0)
}

fn alt_af_cmd(out: &mut RunOutput, a: &AltAfArgs) -> anyhow::Result<i32> {
    let spec = match (a.ln, a.la, a.ea, a.tuse, a.tstress) {
        (Some(l_nominal), Some(l_accelerated), None, None, None) => AltSpec::Lifetimes { l_nominal, l_accelerated },
        (None, None, Some(ea), Some(t_use), Some(t_stress)) => AltSpec::Arrhenius { ea, t_use, t_stress },
        _ => bail!("give either --ln and --la, or --ea, --tuse and --tstress"),
    };
    let af = acceleration_factor(spec)?;
    #[derive(Serialize)]
    struct Report {
        spec: AltSpec,
        acceleration_factor: f64,
    }
    out.write_json("af.json", &Report { spec, acceleration_factor: af })?;
    println!("{}", fmt_num(af));
    Ok(0)
}

fn simulate_cmd(out: &mut RunOutput, a: &SimulateArgs) -> anyhow::Result<i32> {
    out.set_seed(a.seed);
    let seed = Seed(a.seed);
    let describe = |what: &str| format!("Synthetic {what} generated by `airrel simulate` with seed {}.\n", a.seed);
    match a.generator {
        Generator::Disengagement => {
            let d = generate::disengagement(a.vehicles, seed)?;
            out.write_text("disengagement.csv", &Dataset::Disengagement(d.events).to_csv())?;
            out.write_text("mileage.csv", &Dataset::Mileage(d.mileage).to_csv())?;
            out.write_text("months.csv", &Dataset::Months(d.months).to_csv())?;
            out.write_text("DataDescription.txt", &describe("disengagement events with monthly mileage"))?;
        }
        Generator::Collision => {
            let d = generate::collision(a.vehicles, seed)?;
            out.write_text("collision.csv", &Dataset::Collision(d.events).to_csv())?;
            out.write_text("mileage.csv", &Dataset::Mileage(d.mileage).to_csv())?;
            out.write_text("months.csv", &Dataset::Months(d.months).to_csv())?;
            out.write_text("DataDescription.txt", &describe("collision events with monthly mileage"))?;
        }
        Generator::ModuleErrors => {
            let v = generate::module_errors(&generate::perception_world(), a.scenarios, a.prob, seed)?;
            out.write_text("module_errors.csv", &Dataset::ModuleErrors(v).to_csv())?;
            out.write_text("DataDescription.txt", &describe("perception module error logs"))?;
        }
        Generator::Adversarial => {
            let t = generate::adversarial(a.scenarios, a.steps, seed)?;
            out.write_text("adversarial.csv", &Dataset::Adversarial(t).to_csv())?;
            out.write_text("DataDescription.txt", &(describe("adversarial failure counts") + "accuracy-scale: proportion\n"))?;
        }
        Generator::Mixture => {
            let v = generate::mixture(a.noise, seed)?;
            out.write_text("mixture.csv", &Dataset::Mixture(v).to_csv())?;
            out.write_text("DataDescription.txt", &describe("mixture experiment responses"))?;
        }
    }
    println!("{}", out.dir.display());
    Ok(0)
}
