//! Command-line front end.

use std::ffi::OsString;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use log::{info, warn};
use serde::{Deserialize, Serialize};
use trustdyn_core::clustering::{cluster_typology, compute_features, label_purity, FeatureVector, KChoice};
use trustdyn_core::datagen::{
    default_generating_prior, generate_population, Archetype, DisbelieverSpec, OscillatorSpec, PopulationSpec,
    ThetaSource,
};
use trustdyn_core::evaluation::{
    build_schedule, compare_models, leave_one_out, predict_proposed, sweep, EvalConfig, ModelTag, RmseReport,
    SweepParam, SweepRow, TrustPredictor,
};
use trustdyn_core::inference::learn_prior;
use trustdyn_core::optimize::SearchConfig;
use trustdyn_core::{AgentRecord, PriorModel};

use crate::io;

/// Invalid flags or inputs; exits with status 2.
#[derive(Debug, thiserror::Error)]
#[error("{0}")]
pub struct UsageError(pub String);

fn usage(msg: impl Into<String>) -> anyhow::Error {
    UsageError(msg.into()).into()
}

#[derive(Debug, Parser)]
#[command(name = "trustdyn", version, about = "Beta trust-dynamics models: simulate, fit, evaluate, cluster")]
pub struct Cli {
    /// TOML file of flag values (keys are flag names); command-line flags win.
    #[arg(long, global = true, value_name = "FILE")]
    pub config: Option<PathBuf>,

    /// More log output on stderr (repeat for more).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    pub verbose: u8,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a synthetic population.
    Simulate(SimulateArgs),
    /// Learn the population prior from a dataset.
    FitPrior(FitPriorArgs),
    /// Leave-one-out comparison of trust models.
    Evaluate(EvaluateArgs),
    /// Leave-one-out RMSE across report gaps or training lengths.
    Sweep(SweepArgs),
    /// Cluster agents by RMSE and average log trust.
    Cluster(ClusterArgs),
    /// Predicted trust trajectory for one agent.
    Predict(PredictArgs),
}

impl Command {
    pub const NAMES: [&'static str; 6] = ["simulate", "fit-prior", "evaluate", "sweep", "cluster", "predict"];
}

fn unit_interval(s: &str) -> std::result::Result<f64, String> {
    let v: f64 = s.parse().map_err(|e| format!("{e}"))?;
    if (0.0..=1.0).contains(&v) {
        Ok(v)
    } else {
        Err(format!("{v} is not in [0, 1]"))
    }
}

fn positive(s: &str) -> std::result::Result<usize, String> {
    match s.parse::<usize>() {
        Ok(0) => Err("must be at least 1".into()),
        Ok(v) => Ok(v),
        Err(e) => Err(format!("{e}")),
    }
}

fn model_tag(s: &str) -> std::result::Result<ModelTag, String> {
    s.parse().map_err(|e| format!("{e}"))
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct SearchArgs {
    /// Seed for all randomized steps.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Optimizer starts per fit.
    #[arg(long, default_value_t = 16, value_parser = positive)]
    pub restarts: usize,
    /// Function evaluations per optimizer start.
    #[arg(long, default_value_t = 2000, value_parser = positive)]
    pub max_evals: usize,
}

impl SearchArgs {
    fn config(&self) -> SearchConfig {
        SearchConfig {
            restarts: self.restarts,
            max_evals: self.max_evals,
            seed: self.seed,
            ..SearchConfig::default()
        }
    }
}

#[derive(Debug, Clone, Args, Serialize)]
#[command(args_override_self = true)]
pub struct SimulateArgs {
    #[arg(long, default_value_t = 39, value_parser = positive)]
    pub agents: usize,
    #[arg(long, default_value_t = 100, value_parser = positive)]
    pub trials: usize,
    /// Robot success probability.
    #[arg(long, default_value_t = 0.8, value_parser = unit_interval)]
    pub reliability: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Proportions of bayesian, oscillator and disbeliever agents.
    #[arg(long, value_delimiter = ',', num_args = 1.., default_values_t = [1.0, 0.0, 0.0])]
    pub mix: Vec<f64>,
    /// Prior JSON to draw agent parameters from (default: built-in prior).
    #[arg(long, value_name = "FILE")]
    pub prior: Option<PathBuf>,
    #[arg(long, default_value_t = OscillatorSpec::default().amplitude)]
    pub oscillator_amplitude: f64,
    #[arg(long, default_value_t = OscillatorSpec::default().period)]
    pub oscillator_period: f64,
    #[arg(long, default_value_t = DisbelieverSpec::default().level_min)]
    pub disbeliever_min: f64,
    #[arg(long, default_value_t = DisbelieverSpec::default().level_max)]
    pub disbeliever_max: f64,
    #[arg(long, default_value_t = DisbelieverSpec::default().jitter)]
    pub disbeliever_jitter: f64,
    /// Output directory.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Args, Serialize)]
#[command(args_override_self = true)]
pub struct FitPriorArgs {
    /// Dataset CSV.
    #[arg(long)]
    pub data: PathBuf,
    #[command(flatten)]
    #[serde(flatten)]
    pub search: SearchArgs,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Args, Serialize)]
#[command(args_override_self = true)]
pub struct EvaluateArgs {
    #[arg(long)]
    pub data: PathBuf,
    /// Training session length.
    #[arg(long, default_value_t = 10, value_parser = positive)]
    pub l: usize,
    /// Report gap after training.
    #[arg(long, default_value_t = 10, value_parser = positive)]
    pub q: usize,
    #[arg(long, value_delimiter = ',', num_args = 1.., value_parser = model_tag,
          default_values_t = ModelTag::ALL)]
    pub models: Vec<ModelTag>,
    #[command(flatten)]
    #[serde(flatten)]
    pub search: SearchArgs,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Args, Serialize)]
#[command(args_override_self = true)]
#[command(group = clap::ArgGroup::new("sweep").required(true).multiple(false).args(["gaps", "durations"]))]
pub struct SweepArgs {
    #[arg(long)]
    pub data: PathBuf,
    /// Training length held fixed while sweeping gaps.
    #[arg(long, default_value_t = 10, value_parser = positive)]
    pub l: usize,
    /// Report gap held fixed while sweeping training lengths.
    #[arg(long, default_value_t = 10, value_parser = positive)]
    pub q: usize,
    #[arg(long, value_delimiter = ',', num_args = 1.., value_parser = positive)]
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub gaps: Vec<usize>,
    #[arg(long, value_delimiter = ',', num_args = 1.., value_parser = positive)]
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub durations: Vec<usize>,
    #[arg(long, default_value_t = ModelTag::Proposed, value_parser = model_tag)]
    pub model: ModelTag,
    #[command(flatten)]
    #[serde(flatten)]
    pub search: SearchArgs,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Args, Serialize)]
#[command(args_override_self = true)]
pub struct ClusterArgs {
    #[arg(long)]
    pub data: PathBuf,
    /// Per-agent RMSE CSV written by `evaluate`.
    #[arg(long)]
    pub rmse: PathBuf,
    /// Which model's RMSE to use.
    #[arg(long, default_value_t = ModelTag::Proposed, value_parser = model_tag)]
    pub model: ModelTag,
    /// Fixed number of clusters; skips the elbow choice.
    #[arg(long, value_parser = positive)]
    pub k: Option<usize>,
    #[arg(long, default_value_t = 1, value_parser = positive)]
    pub k_min: usize,
    #[arg(long, default_value_t = 6, value_parser = positive)]
    pub k_max: usize,
    /// Ground-truth labels CSV, for purity.
    #[arg(long)]
    pub labels: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Args, Serialize)]
#[command(args_override_self = true)]
pub struct PredictArgs {
    #[arg(long)]
    pub data: PathBuf,
    /// Agent to predict (default: first in the dataset).
    #[arg(long)]
    pub agent: Option<String>,
    /// Prior JSON (default: learned from the dataset's other agents).
    #[arg(long)]
    pub prior: Option<PathBuf>,
    #[arg(long, default_value_t = 10, value_parser = positive)]
    pub l: usize,
    #[arg(long, default_value_t = 10, value_parser = positive)]
    pub q: usize,
    #[command(flatten)]
    #[serde(flatten)]
    pub search: SearchArgs,
    #[arg(long)]
    pub out: PathBuf,
}

/// Position of the subcommand in `args`, skipping the value of `--config`.
fn subcommand_index(args: &[OsString]) -> Option<usize> {
    let mut i = 1;
    while i < args.len() {
        let a = args[i].to_string_lossy();
        if a == "--config" {
            i += 2;
            continue;
        }
        if Command::NAMES.contains(&a.as_ref()) {
            return Some(i);
        }
        i += 1;
    }
    None
}

fn config_path(args: &[OsString]) -> Option<PathBuf> {
    let mut found = None;
    for (i, a) in args.iter().enumerate() {
        let s = a.to_string_lossy();
        if s == "--config" {
            found = args.get(i + 1).map(PathBuf::from);
        } else if let Some(p) = s.strip_prefix("--config=") {
            found = Some(PathBuf::from(p));
        }
    }
    found
}

/// Flags equivalent to a TOML table of flag values.
pub fn config_flags(table: &toml::Table) -> Result<Vec<OsString>> {
    let mut out = Vec::new();
    for (key, value) in table {
        if key == "command" {
            continue;
        }
        let flag = format!("--{}", key.replace('_', "-"));
        let text = match value {
            toml::Value::Boolean(true) => {
                out.push(flag.into());
                continue;
            }
            toml::Value::Boolean(false) => continue,
            toml::Value::String(s) => s.clone(),
            toml::Value::Integer(i) => i.to_string(),
            toml::Value::Float(f) => f.to_string(),
            toml::Value::Array(items) => items
                .iter()
                .map(|v| match v {
                    toml::Value::String(s) => Ok(s.clone()),
                    toml::Value::Integer(i) => Ok(i.to_string()),
                    toml::Value::Float(f) => Ok(f.to_string()),
                    other => Err(usage(format!("unsupported list item for `{key}`: {other}"))),
                })
                .collect::<Result<Vec<_>>>()?
                .join(","),
            other => return Err(usage(format!("unsupported value for `{key}`: {other}"))),
        };
        out.push(flag.into());
        out.push(text.into());
    }
    Ok(out)
}

/// Parse `args`, splicing in values from `--config` ahead of the
/// command-line flags so that the latter override them.
pub fn parse_args(args: Vec<OsString>) -> Result<Cli> {
    let args = match (config_path(&args), subcommand_index(&args)) {
        (Some(path), Some(idx)) => {
            let text = std::fs::read_to_string(&path)
                .map_err(|e| usage(format!("reading config {}: {e}", path.display())))?;
            let table: toml::Table =
                toml::from_str(&text).map_err(|e| usage(format!("parsing config {}: {e}", path.display())))?;
            if let Some(cmd) = table.get("command").and_then(|v| v.as_str()) {
                if cmd != args[idx].to_string_lossy() {
                    return Err(usage(format!(
                        "config {} is for `{cmd}`, not `{}`",
                        path.display(),
                        args[idx].to_string_lossy()
                    )));
                }
            }
            let mut spliced: Vec<OsString> = args[..=idx].to_vec();
            spliced.extend(config_flags(&table)?);
            spliced.extend_from_slice(&args[idx + 1..]);
            spliced
        }
        _ => args,
    };
    Ok(Cli::try_parse_from(args)?)
}

/// Record the resolved flags next to a command's outputs.
fn write_resolved<T: Serialize>(out: &Path, command: &str, args: &T) -> Result<()> {
    let mut table = toml::Table::new();
    table.insert("command".into(), toml::Value::String(command.into()));
    let resolved: toml::Table = toml::Table::try_from(args)?;
    table.extend(resolved);
    io::write_text(&out.join("config.toml"), &toml::to_string(&table)?)
}

pub fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Simulate(a) => simulate(&a),
        Command::FitPrior(a) => fit_prior(&a),
        Command::Evaluate(a) => evaluate(&a),
        Command::Sweep(a) => run_sweep(&a),
        Command::Cluster(a) => cluster(&a),
        Command::Predict(a) => predict(&a),
    }
}

fn simulate(a: &SimulateArgs) -> Result<()> {
    let mix: [f64; 3] = a
        .mix
        .as_slice()
        .try_into()
        .map_err(|_| usage("--mix needs three proportions"))?;
    let prior = match &a.prior {
        Some(p) => io::read_prior(p)?,
        None => default_generating_prior(),
    };
    let spec = PopulationSpec {
        n_agents: a.agents,
        n_trials: a.trials,
        reliability: a.reliability,
        theta_source: ThetaSource::Prior(prior),
        mix,
        oscillator: OscillatorSpec {
            amplitude: a.oscillator_amplitude,
            period: a.oscillator_period,
        },
        disbeliever: DisbelieverSpec {
            level_min: a.disbeliever_min,
            level_max: a.disbeliever_max,
            jitter: a.disbeliever_jitter,
        },
        seed: a.seed,
    };
    spec.validate().map_err(|e| usage(e.to_string()))?;
    let pop = generate_population(&spec)?;
    io::write_dataset(&a.out.join("dataset.csv"), &pop.records)?;
    io::write_labels(&a.out.join("labels.csv"), &pop.labels)?;
    write_resolved(&a.out, "simulate", a)?;
    info!("wrote {} agents x {} trials to {}", a.agents, a.trials, a.out.display());
    Ok(())
}

#[derive(Serialize)]
struct FitRow {
    agent_id: String,
    status: String,
    alpha0: Option<f64>,
    beta0: Option<f64>,
    ws: Option<f64>,
    wf: Option<f64>,
    objective: Option<f64>,
}

fn fit_prior(a: &FitPriorArgs) -> Result<()> {
    let records = io::read_dataset(&a.data)?;
    let (prior, fits) = learn_prior(&records, &a.search.config()).context("learning the prior")?;
    let rows = fits.fits.iter().map(|(id, f)| match f {
        Ok(f) => {
            info!("{id}: log-likelihood {:.6}", f.objective);
            let t = f.theta.to_array();
            FitRow {
                agent_id: id.0.clone(),
                status: "ok".into(),
                alpha0: Some(t[0]),
                beta0: Some(t[1]),
                ws: Some(t[2]),
                wf: Some(t[3]),
                objective: Some(f.objective),
            }
        }
        Err(e) => {
            warn!("{id}: fit failed: {e}");
            FitRow {
                agent_id: id.0.clone(),
                status: e.to_string(),
                alpha0: None,
                beta0: None,
                ws: None,
                wf: None,
                objective: None,
            }
        }
    });
    io::write_rows(&a.out.join("fits.csv"), &["agent_id", "status", "alpha0", "beta0", "ws", "wf", "objective"], rows)?;
    io::write_prior(&a.out.join("prior.json"), &prior)?;
    write_resolved(&a.out, "fit-prior", a)?;
    Ok(())
}

fn dataset_config(records: &[AgentRecord], l: usize, q: usize) -> Result<EvalConfig> {
    let n = records.first().map(AgentRecord::n_trials).unwrap_or(0);
    EvalConfig::new(l, q, n).map_err(|e| usage(e.to_string()))
}

#[derive(Serialize, Deserialize)]
pub struct AgentRmseRow {
    pub model: String,
    pub agent_id: String,
    pub rmse: f64,
}

#[derive(Serialize, Deserialize)]
pub struct SummaryRow {
    pub model: String,
    pub mean: f64,
    pub sd: f64,
    pub se: f64,
}

#[derive(Serialize)]
struct PairedRow<'a> {
    reference: &'a str,
    model: &'a str,
    mean: f64,
    sd: f64,
    se: f64,
}

#[derive(Serialize)]
struct MissingRow<'a> {
    model: &'a str,
    agent_id: &'a str,
    reason: &'a str,
}

fn summary_table(reports: &[RmseReport]) -> String {
    let mut s = format!("{:<10} {:>8} {:>8} {:>8} {:>7} {:>8}\n", "model", "mean", "sd", "se", "agents", "missing");
    for r in reports {
        let _ = writeln!(
            s,
            "{:<10} {:>8.4} {:>8.4} {:>8.4} {:>7} {:>8}",
            r.model_tag,
            r.mean,
            r.sd,
            r.se,
            r.per_agent.len(),
            r.missing.len()
        );
    }
    s
}

fn evaluate(a: &EvaluateArgs) -> Result<()> {
    let records = io::read_dataset(&a.data)?;
    let config = dataset_config(&records, a.l, a.q)?;
    let search = a.search.config();
    let predictors: Vec<Box<dyn TrustPredictor>> = a.models.iter().map(|m| m.predictor(search)).collect();
    let refs: Vec<&dyn TrustPredictor> = predictors.iter().map(|p| p.as_ref()).collect();

    let (reports, paired) = if refs.len() == 1 {
        (vec![leave_one_out(&records, &config, refs[0], &search)?], None)
    } else {
        let c = compare_models(&records, &config, &refs, &search)?;
        (c.reports, Some(c.paired))
    };

    io::write_rows(
        &a.out.join("rmse_per_agent.csv"),
        &["model", "agent_id", "rmse"],
        reports.iter().flat_map(|r| {
            r.per_agent.iter().map(|(id, v)| AgentRmseRow {
                model: r.model_tag.clone(),
                agent_id: id.0.clone(),
                rmse: *v,
            })
        }),
    )?;
    io::write_rows(
        &a.out.join("rmse_summary.csv"),
        &["model", "mean", "sd", "se"],
        reports.iter().map(|r| SummaryRow {
            model: r.model_tag.clone(),
            mean: r.mean,
            sd: r.sd,
            se: r.se,
        }),
    )?;
    io::write_rows(
        &a.out.join("missing.csv"),
        &["model", "agent_id", "reason"],
        reports.iter().flat_map(|r| {
            r.missing.iter().map(|(id, why)| MissingRow {
                model: &r.model_tag,
                agent_id: &id.0,
                reason: why,
            })
        }),
    )?;
    if let Some(paired) = &paired {
        io::write_rows(
            &a.out.join("paired_differences.csv"),
        &["reference", "model", "mean", "sd", "se"],
            paired.iter().map(|p| PairedRow {
                reference: &p.reference,
                model: &p.model,
                mean: p.summary.mean,
                sd: p.summary.sd,
                se: p.summary.se,
            }),
        )?;
    }
    write_resolved(&a.out, "evaluate", a)?;

    print!("{}", summary_table(&reports));
    if let Some(paired) = paired {
        for p in paired {
            println!(
                "{} - {}: mean {:.4} sd {:.4} se {:.4}",
                p.model, p.reference, p.summary.mean, p.summary.sd, p.summary.se
            );
        }
    }
    Ok(())
}

#[derive(Serialize)]
struct SweepCsvRow {
    param_name: &'static str,
    param_value: usize,
    mean: f64,
    sd: f64,
    se: f64,
}

fn run_sweep(a: &SweepArgs) -> Result<()> {
    let records = io::read_dataset(&a.data)?;
    let (param, fixed, values) = if a.gaps.is_empty() {
        (SweepParam::TrainingLen, a.q, &a.durations)
    } else {
        (SweepParam::ReportGap, a.l, &a.gaps)
    };
    // validate every configuration before spending time on fits
    for &v in values {
        match param {
            SweepParam::ReportGap => dataset_config(&records, fixed, v)?,
            SweepParam::TrainingLen => dataset_config(&records, v, fixed)?,
        };
    }
    let search = a.search.config();
    let predictor = a.model.predictor(search);
    let rows: Vec<SweepRow> = sweep(&records, param, fixed, values, predictor.as_ref(), &search)?;
    io::write_rows(
        &a.out.join("sweep.csv"),
        &["param_name", "param_value", "mean", "sd", "se"],
        rows.iter().map(|r| SweepCsvRow {
            param_name: r.param.as_str(),
            param_value: r.value,
            mean: r.report.mean,
            sd: r.report.sd,
            se: r.report.se,
        }),
    )?;
    write_resolved(&a.out, "sweep", a)?;
    println!("{:<4} {:>6} {:>8} {:>8} {:>8}", "", "value", "mean", "sd", "se");
    for r in &rows {
        println!(
            "{:<4} {:>6} {:>8.4} {:>8.4} {:>8.4}",
            r.param.as_str(),
            r.value,
            r.report.mean,
            r.report.sd,
            r.report.se
        );
    }
    Ok(())
}

#[derive(Serialize)]
struct ClusterRow<'a> {
    agent_id: &'a str,
    rmse: f64,
    avg_log_trust: f64,
    cluster: usize,
    archetype: Option<Archetype>,
}

#[derive(Serialize)]
struct ElbowRow {
    k: usize,
    variance: f64,
}

fn cluster(a: &ClusterArgs) -> Result<()> {
    if a.k.is_none() && a.k_min > a.k_max {
        return Err(usage("--k-min exceeds --k-max"));
    }
    let records = io::read_dataset(&a.data)?;
    let rmse: Vec<AgentRmseRow> = io::read_rows(&a.rmse)?;
    let tag = a.model.as_str();
    let mut ids = Vec::new();
    let mut features: Vec<FeatureVector> = Vec::new();
    for r in &records {
        match rmse.iter().find(|row| row.model == tag && row.agent_id == r.id.0) {
            Some(row) => {
                features.push(compute_features(r, row.rmse).with_context(|| format!("agent {}", r.id))?);
                ids.push(r.id.clone());
            }
            None => warn!("{}: no {tag} RMSE, skipped", r.id),
        }
    }
    let choice = match a.k {
        Some(k) => KChoice::Fixed(k),
        None => KChoice::Elbow((a.k_min..=a.k_max.min(features.len())).collect()),
    };
    let typ = cluster_typology(&features, &choice, a.seed).context("clustering")?;
    let archetypes = typ.agent_archetypes();

    io::write_rows(
        &a.out.join("clusters.csv"),
        &["agent_id", "rmse", "avg_log_trust", "cluster", "archetype"],
        ids.iter().enumerate().map(|(i, id)| ClusterRow {
            agent_id: &id.0,
            rmse: features[i].rmse,
            avg_log_trust: features[i].avg_log_trust,
            cluster: typ.result.assignments[i],
            archetype: archetypes.as_ref().map(|v| v[i]),
        }),
    )?;
    if !typ.curve.is_empty() {
        io::write_rows(
            &a.out.join("elbow.csv"),
        &["k", "variance"],
            typ.curve.iter().map(|&(k, variance)| ElbowRow { k, variance }),
        )?;
    }
    write_resolved(&a.out, "cluster", a)?;

    print!("k = {}", typ.k);
    if let Some(flag) = typ.flag {
        print!(" ({})", serde_json::to_value(flag)?.as_str().unwrap_or_default());
    }
    println!();
    if let (Some(path), Some(assigned)) = (&a.labels, &archetypes) {
        let truth = io::read_labels(path)?;
        let truth: Vec<Archetype> = ids
            .iter()
            .map(|id| {
                truth
                    .iter()
                    .find(|t| &t.id == id)
                    .map(|t| t.archetype)
                    .with_context(|| format!("{id} missing from {}", path.display()))
            })
            .collect::<Result<_>>()?;
        println!("purity = {:.4}", label_purity(assigned, &truth)?);
    }
    Ok(())
}

#[derive(Serialize)]
struct PredictionRow {
    trial: usize,
    outcome: u8,
    scheduled_report: Option<f64>,
    predicted_trust: f64,
    alpha: f64,
    beta: f64,
}

fn predict(a: &PredictArgs) -> Result<()> {
    let records = io::read_dataset(&a.data)?;
    let record = match &a.agent {
        Some(id) => records
            .iter()
            .find(|r| &r.id.0 == id)
            .ok_or_else(|| usage(format!("agent `{id}` not in {}", a.data.display())))?,
        None => &records[0],
    };
    let config = EvalConfig::new(a.l, a.q, record.n_trials()).map_err(|e| usage(e.to_string()))?;
    let search = a.search.config();
    let prior: PriorModel = match &a.prior {
        Some(p) => io::read_prior(p)?,
        None => {
            let others: Vec<AgentRecord> = records.iter().filter(|r| r.id != record.id).cloned().collect();
            if others.is_empty() {
                bail!("no other agents to learn a prior from; pass --prior");
            }
            learn_prior(&others, &search).context("learning the prior")?.0
        }
    };
    let trace = predict_proposed(record, &prior, &config, &search)?;
    let schedule = build_schedule(&config);
    io::write_rows(
        &a.out.join("prediction.csv"),
        &["trial", "outcome", "scheduled_report", "predicted_trust", "alpha", "beta"],
        (1..=record.n_trials()).map(|m| PredictionRow {
            trial: m,
            outcome: record.outcomes()[m - 1].as_u8(),
            scheduled_report: if schedule.contains(m) { record.report(m) } else { None },
            predicted_trust: trace.predictions[m - 1],
            alpha: trace.states[m - 1].alpha,
            beta: trace.states[m - 1].beta,
        }),
    )?;
    write_resolved(&a.out, "predict", a)?;
    Ok(())
}
