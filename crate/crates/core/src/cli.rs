//! Batch driver: JSON experiment configs, `--set` overrides and one
//! subcommand per pipeline stage.
//!
//! Exit status is 0 on success, 1 for configuration errors (unreadable file,
//! unknown or invalid key) and 2 when the model itself is outside the regime
//! the method covers (relevant flow, diverging couplings, ε ≥ 1).

use std::collections::BTreeMap;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::bath::{Channel, NoiseModel};
use crate::coulombgas::{self, GasEstimate, LatticeSpec, RunOptions};
use crate::hypercube::{self, ErrorRates, GridCorrelator, HypercubeError, PulseSequence};
use crate::output::{self, Format};
use crate::probability::{self, ExcessAnalysis, ProbabilityError, ScanRow};
use crate::rg::{self, Classification, PulseRequirement, RgError, Verdict, MARGINAL_TOL};
use crate::seed;
use crate::stabilizer::{self, Estimator, ThresholdVerdict};

/// Every key accepted in a config file.
pub const CONFIG_KEYS: &str = "\
Config keys (JSON file via --config; any key can be overridden with --set key=value):
  noise.z  noise.v  noise.cutoff  noise.delta.{x,y,z}  noise.lambda.{x,y,z}
  noise.beta_g  noise.beta_h
  grid.delta_t  grid.n_cycles  grid.n_qubits  grid.comp_dim
  pulses.n  pulses.schedule
  rg.ell_max  rg.step
  scan.sizes  scan.channel
  mc.samples  mc.sweeps  mc.seed  mc.probabilities  mc.estimator  mc.levels
  coulomb.side  coulomb.coupling  coulomb.fugacity  coulomb.max_pairs
  coulomb.chains  coulomb.burn_in  coulomb.batches
  output.path  output.format";

#[derive(Debug, Parser)]
#[command(name = "resilience-rg", version, about = "Dimensional-criterion QEC threshold toolkit", after_help = CONFIG_KEYS)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Args)]
pub struct Common {
    /// JSON experiment config
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Root seed (falls back to RESILIENCE_RG_SEED, then mc.seed)
    #[arg(long)]
    pub seed: Option<u64>,
    /// Output file (stdout if absent)
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub format: Option<Format>,
    /// Override a config value, e.g. --set noise.delta.z=1.5 (repeatable)
    #[arg(long = "set", value_name = "KEY=VALUE")]
    pub overrides: Vec<String>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Classify every channel as relevant, marginal or irrelevant
    #[command(after_help = CONFIG_KEYS)]
    Classify(Common),
    /// Integrate the coupling β-function and emit the trajectory
    #[command(after_help = CONFIG_KEYS)]
    Flow(Common),
    /// Renormalized couplings and intra-hypercube error rates
    #[command(after_help = CONFIG_KEYS)]
    Epsilon(Common),
    /// Lattice pair sums over dyadic grids and their scaling fit
    #[command(name = "scaling-scan", after_help = CONFIG_KEYS)]
    ScalingScan(Common),
    /// Metropolis sampling of the Coulomb gas
    #[command(after_help = CONFIG_KEYS)]
    Coulomb(Common),
    /// Stabilizer logical-rate sweep and pseudo-threshold
    #[command(after_help = CONFIG_KEYS)]
    Threshold(Common),
    /// classify → λ* → ε → threshold, with the phase verdict
    #[command(after_help = CONFIG_KEYS)]
    Pipeline(Common),
}

impl Command {
    fn common(&self) -> &Common {
        match self {
            Command::Classify(c)
            | Command::Flow(c)
            | Command::Epsilon(c)
            | Command::ScalingScan(c)
            | Command::Coulomb(c)
            | Command::Threshold(c)
            | Command::Pipeline(c) => c,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GridSection {
    pub delta_t: Option<f64>,
    pub n_cycles: Option<u64>,
    pub n_qubits: Option<u64>,
    pub comp_dim: Option<u32>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PulsesSection {
    /// Equally spaced flips per cycle.
    pub n: Option<u32>,
    /// Explicit flip times in `(0, Δ)`; takes precedence over `n`.
    pub schedule: Option<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RgSection {
    pub ell_max: f64,
    pub step: f64,
}

impl Default for RgSection {
    fn default() -> Self {
        RgSection { ell_max: 10.0, step: 1e-2 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScanSection {
    pub sizes: Vec<u64>,
    /// Channel whose dimension is scanned; first configured channel if absent.
    pub channel: Option<Channel>,
}

impl Default for ScanSection {
    fn default() -> Self {
        ScanSection { sizes: vec![16, 32, 64, 128, 256], channel: None }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct McSection {
    pub samples: u64,
    pub sweeps: u64,
    pub seed: Option<u64>,
    pub probabilities: Vec<f64>,
    pub estimator: Estimator,
    /// Concatenation levels reported by the pipeline.
    pub levels: usize,
}

impl Default for McSection {
    fn default() -> Self {
        McSection {
            samples: 1_000_000,
            sweeps: 20_000,
            seed: None,
            probabilities: vec![1e-3, 3e-3, 1e-2],
            estimator: Estimator::default(),
            levels: 5,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CoulombSection {
    pub side: usize,
    pub coupling: f64,
    pub fugacity: f64,
    pub max_pairs: Option<usize>,
    pub chains: usize,
    pub burn_in: f64,
    pub batches: usize,
}

impl Default for CoulombSection {
    fn default() -> Self {
        CoulombSection { side: 8, coupling: 4.0, fugacity: 0.03, max_pairs: None, chains: 1, burn_in: 0.1, batches: 20 }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputSection {
    pub path: Option<PathBuf>,
    pub format: Format,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub noise: Option<NoiseModel>,
    pub grid: GridSection,
    pub pulses: PulsesSection,
    pub rg: RgSection,
    pub scan: ScanSection,
    pub mc: McSection,
    pub coulomb: CoulombSection,
    pub output: OutputSection,
}

#[derive(Debug, Clone, PartialEq)]
pub enum CliError {
    Config(String),
    Model(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 1,
            CliError::Model(_) => 2,
        }
    }

    pub fn message(&self) -> &str {
        match self {
            CliError::Config(m) | CliError::Model(m) => m,
        }
    }
}

fn config_err(m: impl Into<String>) -> CliError {
    CliError::Config(m.into())
}

fn parse_value(raw: &str) -> Value {
    serde_json::from_str(raw).unwrap_or_else(|_| Value::String(raw.to_string()))
}

/// Applies `key.path=value` to a JSON tree, creating objects on the way.
/// Values are parsed as JSON when possible, else taken as strings.
pub fn apply_override(root: &mut Value, spec: &str) -> Result<(), CliError> {
    let (key, raw) = spec.split_once('=').ok_or_else(|| config_err(format!("--set {spec}: expected KEY=VALUE")))?;
    if key.is_empty() || key.split('.').any(str::is_empty) {
        return Err(config_err(format!("--set {spec}: malformed key `{key}`")));
    }
    let mut node = root;
    for part in key.split('.') {
        if !node.is_object() {
            if node.is_null() {
                *node = Value::Object(Default::default());
            } else {
                return Err(config_err(format!("--set {spec}: `{part}` is inside a non-object value")));
            }
        }
        node = node.as_object_mut().expect("object").entry(part).or_insert(Value::Null);
    }
    *node = parse_value(raw);
    Ok(())
}

/// Reads, overrides and validates a config. Errors name the offending key.
pub fn load_config(path: Option<&Path>, overrides: &[String]) -> Result<ExperimentConfig, CliError> {
    let mut value = match path {
        Some(p) => {
            let text = std::fs::read_to_string(p).map_err(|e| config_err(format!("cannot read config {}: {e}", p.display())))?;
            serde_json::from_str(&text).map_err(|e| config_err(format!("config {} is not valid JSON: {e}", p.display())))?
        }
        None => Value::Object(Default::default()),
    };
    for o in overrides {
        apply_override(&mut value, o)?;
    }
    let cfg: ExperimentConfig = serde_path_to_error::deserialize(value).map_err(|e| {
        let path = e.path().to_string();
        config_err(format!("config key `{path}`: {}", e.inner()))
    })?;
    Ok(cfg)
}

impl ExperimentConfig {
    fn noise(&self) -> Result<&NoiseModel, CliError> {
        self.noise.as_ref().ok_or_else(|| config_err("missing config section `noise`"))
    }

    fn comp_dim(&self) -> Result<u32, CliError> {
        match self.grid.comp_dim {
            Some(0) => Err(config_err("config key `grid.comp_dim`: must be positive")),
            Some(d) => Ok(d),
            None => Err(config_err("missing config key `grid.comp_dim`")),
        }
    }

    fn delta_t(&self) -> Result<f64, CliError> {
        match self.grid.delta_t {
            Some(d) if d.is_finite() && d > 0.0 => Ok(d),
            Some(d) => Err(config_err(format!("config key `grid.delta_t`: must be > 0, got {d}"))),
            None => Err(config_err("missing config key `grid.delta_t`")),
        }
    }

    fn pulse_sequence(&self, delta_t: f64) -> Result<PulseSequence, CliError> {
        match (&self.pulses.schedule, self.pulses.n) {
            (Some(s), _) => PulseSequence::new(s.clone(), delta_t).map_err(|e| config_err(format!("config key `pulses.schedule`: {e}"))),
            (None, Some(n)) => Ok(PulseSequence::equally_spaced(n, delta_t)),
            (None, None) => Ok(PulseSequence::none()),
        }
    }

    fn n_pulses(&self) -> u32 {
        match (&self.pulses.schedule, self.pulses.n) {
            (Some(s), _) => s.len() as u32,
            (None, n) => n.unwrap_or(0),
        }
    }

    fn rg_step(&self) -> Result<f64, CliError> {
        let s = self.rg.step;
        if s.is_finite() && s > 0.0 {
            Ok(s)
        } else {
            Err(config_err(format!("config key `rg.step`: must be > 0, got {s}")))
        }
    }
}

/// Resolved destination and format.
struct Sink {
    path: Option<PathBuf>,
    format: Format,
}

impl Sink {
    fn new(common: &Common, cfg: &ExperimentConfig) -> Self {
        Sink { path: common.out.clone().or_else(|| cfg.output.path.clone()), format: common.format.unwrap_or(cfg.output.format) }
    }

    fn write(&self, stdout: &mut dyn Write, text: &str) -> Result<(), CliError> {
        match &self.path {
            Some(p) => std::fs::write(p, text).map_err(|e| config_err(format!("cannot write {}: {e}", p.display()))),
            None => stdout.write_all(text.as_bytes()).map_err(|e| config_err(format!("cannot write stdout: {e}"))),
        }
    }

    /// Main table plus JSON summary. In CSV mode the summary goes to a
    /// sibling `.json` file (or stderr when writing to stdout).
    fn write_pair<T: Serialize>(&self, stdout: &mut dyn Write, stderr: &mut dyn Write, csv: &str, summary: &T, combined: &Value) -> Result<(), CliError> {
        match self.format {
            Format::Json => self.write(stdout, &output::json(combined)),
            Format::Csv => {
                self.write(stdout, csv)?;
                let text = output::json(summary);
                match &self.path {
                    Some(p) => {
                        let sib = p.with_extension("json");
                        std::fs::write(&sib, text).map_err(|e| config_err(format!("cannot write {}: {e}", sib.display())))
                    }
                    None => stderr.write_all(text.as_bytes()).map_err(|e| config_err(format!("cannot write stderr: {e}"))),
                }
            }
        }
    }
}

fn hyper_err(e: HypercubeError) -> CliError {
    match e {
        HypercubeError::NotPerturbative { total } => {
            CliError::Model(format!("error rates sum to {total} >= 1: the hypercube expansion does not apply"))
        }
        other => config_err(other.to_string()),
    }
}

fn rg_err(e: RgError) -> CliError {
    match e {
        RgError::Diverged { ell, target } => {
            CliError::Model(format!("coupling flow diverged at ell = {ell} before the grid scale ell* = {target}"))
        }
        RgError::NonFinite(ell) => CliError::Model(format!("coupling flow became non-finite at ell = {ell}")),
        other => config_err(other.to_string()),
    }
}

fn seed_for(common: &Common, cfg: &ExperimentConfig) -> Result<u64, CliError> {
    match common.seed.or(cfg.mc.seed) {
        Some(s) => Ok(s),
        None => seed::resolve(None).map_err(config_err),
    }
}

#[derive(Debug, Clone, Serialize)]
struct ClassifyRow {
    #[serde(flatten)]
    classification: Classification,
    pulses_needed: PulseRequirement,
}

fn classify_rows(cfg: &ExperimentConfig) -> Result<Vec<ClassifyRow>, CliError> {
    let noise = cfg.noise()?;
    let d = cfg.comp_dim()?;
    if noise.bath.delta.is_empty() {
        return Err(config_err("config key `noise.delta`: at least one channel is required"));
    }
    Ok(rg::classify(noise, d, cfg.n_pulses(), MARGINAL_TOL)
        .into_iter()
        .map(|c| {
            let pulses_needed = rg::pulses_needed(d, noise.bath.z, noise.bath.delta[&c.channel]);
            ClassifyRow { classification: c, pulses_needed }
        })
        .collect())
}

fn cmd_classify(cfg: &ExperimentConfig, sink: &Sink, out: &mut dyn Write) -> Result<(), CliError> {
    let rows = classify_rows(cfg)?;
    let text = match sink.format {
        Format::Json => output::json(&rows),
        Format::Csv => rows
            .iter()
            .map(|r| {
                format!(
                    "{}: {}, exponent = {}, pulses_needed = {}\n",
                    r.classification.channel, r.classification.verdict, r.classification.exponent, r.pulses_needed
                )
            })
            .collect(),
    };
    sink.write(out, &text)
}

fn cmd_flow(cfg: &ExperimentConfig, sink: &Sink, out: &mut dyn Write) -> Result<(), CliError> {
    let noise = cfg.noise()?;
    let step = cfg.rg_step()?;
    let ell_max = cfg.rg.ell_max;
    if !(ell_max.is_finite() && ell_max > 0.0) {
        return Err(config_err(format!("config key `rg.ell_max`: must be > 0, got {ell_max}")));
    }
    let traj = rg::integrate_beta(&noise.coupling_vector(), &noise.beta_g, &noise.beta_h, ell_max, step).map_err(rg_err)?;
    let text = match sink.format {
        Format::Json => output::json(&traj),
        Format::Csv => output::flow_csv(&traj),
    };
    sink.write(out, &text)?;
    if traj.diverged {
        return Err(CliError::Model(format!("coupling flow diverged at ell = {}", traj.final_ell())));
    }
    Ok(())
}

fn error_rates(cfg: &ExperimentConfig) -> Result<ErrorRates, CliError> {
    let noise = cfg.noise()?;
    let dt_phys = cfg.delta_t()?;
    let seq = cfg.pulse_sequence(dt_phys)?;
    let lstar = rg::lambda_star(noise, dt_phys, cfg.rg_step()?).map_err(rg_err)?;
    let (_, dt) = noise.bath.to_cutoff_units(&[], dt_phys);
    let scale = dt / dt_phys;
    let seq = PulseSequence { schedule: seq.schedule.iter().map(|t| t * scale).collect() };
    let mut eps = BTreeMap::new();
    for (&ch, &l) in &lstar {
        let c = noise.bath.correlator(ch).ok_or_else(|| config_err(format!("config key `noise.delta.{ch}`: missing for a coupled channel")))?;
        let e = hypercube::epsilon_with_pulses(&c, l, dt, &seq, 1e-10).map_err(hyper_err)?;
        eps.insert(ch, e);
    }
    ErrorRates::new(eps, lstar).map_err(hyper_err)
}

fn cmd_epsilon(cfg: &ExperimentConfig, sink: &Sink, out: &mut dyn Write) -> Result<(), CliError> {
    let rates = error_rates(cfg)?;
    let text = match sink.format {
        Format::Json => output::json(&rates),
        Format::Csv => {
            let mut csv = output::Csv::new(&["channel", "lambda_star", "eps"]);
            for (ch, e) in &rates.eps {
                csv.row([ch.to_string(), rates.lambda_star[ch].to_string(), e.to_string()]);
            }
            csv.into_string()
        }
    };
    sink.write(out, &text)
}

#[derive(Debug, Clone, Serialize)]
struct ScanSummary {
    channel: Channel,
    delta: f64,
    comp_dim: u32,
    z: f64,
    /// `2(D + z − 2δ)`.
    predicted_exponent: f64,
    analysis: ExcessAnalysis,
}

fn cmd_scan(cfg: &ExperimentConfig, sink: &Sink, out: &mut dyn Write, err: &mut dyn Write) -> Result<(), CliError> {
    let noise = cfg.noise()?;
    let d = cfg.comp_dim()?;
    let channel = match cfg.scan.channel {
        Some(c) => c,
        None => *noise.bath.delta.keys().next().ok_or_else(|| config_err("config key `noise.delta`: at least one channel is required"))?,
    };
    let corr = noise.bath.correlator(channel).ok_or_else(|| config_err(format!("config key `scan.channel`: no dimension for channel {channel}")))?;
    let delta = noise.bath.delta[&channel];
    let g = GridCorrelator::unit(corr);
    let rows: Vec<ScanRow> = probability::scaling_scan(&cfg.scan.sizes, d, noise.bath.z, |dx, dt| g.at_cells(dx, dt)).map_err(|e| match e {
        ProbabilityError::CellBudget { .. } => config_err(format!("config key `scan.sizes`: {e}")),
        other => config_err(other.to_string()),
    })?;
    let analysis = probability::analyze_excess(&rows).map_err(|e| config_err(format!("config key `scan.sizes`: {e}")))?;
    let summary = ScanSummary {
        channel,
        delta,
        comp_dim: d,
        z: noise.bath.z,
        predicted_exponent: 2.0 * (d as f64 + noise.bath.z - 2.0 * delta),
        analysis,
    };
    let combined = serde_json::json!({ "rows": rows, "fit": summary });
    sink.write_pair(out, err, &output::scan_csv(&rows), &summary, &combined)
}

#[derive(Debug, Clone, Serialize)]
struct CoulombSummary {
    #[serde(flatten)]
    estimate: GasEstimate,
    chains: usize,
    kt_x: f64,
    kt_y: f64,
    kt_phase: rg::KtPhase,
}

fn cmd_coulomb(common: &Common, cfg: &ExperimentConfig, sink: &Sink, out: &mut dyn Write, err: &mut dyn Write) -> Result<(), CliError> {
    let c = &cfg.coulomb;
    let spec = LatticeSpec::new(c.side, c.coupling, c.fugacity).map_err(|e| config_err(format!("config section `coulomb`: {e}")))?;
    if cfg.mc.sweeps == 0 {
        return Err(config_err("config key `mc.sweeps`: must be >= 1"));
    }
    if c.chains == 0 {
        return Err(config_err("config key `coulomb.chains`: must be >= 1"));
    }
    if !(0.0..1.0).contains(&c.burn_in) {
        return Err(config_err(format!("config key `coulomb.burn_in`: must lie in [0, 1), got {}", c.burn_in)));
    }
    let root = seed_for(common, cfg)?;
    let runs: Vec<GasEstimate> = (0..c.chains)
        .into_par_iter()
        .map(|i| {
            let opts = RunOptions { max_pairs: c.max_pairs, burn_in: c.burn_in, n_batches: c.batches, keep_trace: i == 0, ..Default::default() };
            coulombgas::metropolis_run(&spec, cfg.mc.sweeps, seed::derive(root, i as u64), &opts)
        })
        .collect::<Result<_, _>>()
        .map_err(|e| config_err(e.to_string()))?;
    let trace = runs[0].trace.clone();
    let mut estimate = if runs.len() == 1 { runs[0].clone() } else { coulombgas::pool(&runs).expect("non-empty") };
    estimate.trace.clear();
    estimate.seed = root;
    let (kt_x, kt_y) = spec.kt_coordinates();
    let summary = CoulombSummary { estimate, chains: c.chains, kt_x, kt_y, kt_phase: spec.kt_phase(cfg.rg.ell_max.max(1.0)) };
    let combined = serde_json::json!({ "trace": trace, "summary": summary });
    sink.write_pair(out, err, &output::coulomb_csv(&trace), &summary, &combined)
}

fn check_mc(cfg: &ExperimentConfig) -> Result<(), CliError> {
    if cfg.mc.samples < stabilizer::MIN_SAMPLES {
        return Err(config_err(format!("config key `mc.samples`: must be >= {}, got {}", stabilizer::MIN_SAMPLES, cfg.mc.samples)));
    }
    if cfg.mc.probabilities.len() < 2 || cfg.mc.probabilities.iter().any(|p| !(*p > 0.0 && *p < 1.0)) {
        return Err(config_err("config key `mc.probabilities`: need at least two rates in (0, 1)"));
    }
    Ok(())
}

fn cmd_threshold(common: &Common, cfg: &ExperimentConfig, sink: &Sink, out: &mut dyn Write, err: &mut dyn Write) -> Result<(), CliError> {
    check_mc(cfg)?;
    let code = stabilizer::steane_code();
    let sweep = stabilizer::threshold_sweep(&code, &cfg.mc.probabilities, stabilizer::DEPOLARIZING, cfg.mc.samples, seed_for(common, cfg)?, cfg.mc.estimator)
        .map_err(|e| config_err(e.to_string()))?;
    let summary = serde_json::json!({
        "fit": sweep.fit,
        "pseudo_threshold": sweep.fit.pseudo_threshold,
        "oracle_coefficient": sweep.oracle_coefficient,
        "oracle_pseudo_threshold": sweep.oracle_pseudo_threshold,
        "seed": sweep.seed,
    });
    let combined = serde_json::json!({ "points": sweep.points, "summary": summary });
    sink.write_pair(out, err, &output::threshold_csv(&sweep.points), &summary, &combined)
}

/// Outcome of the full pipeline for a model that passes classification.
#[derive(Debug, Clone, Serialize)]
pub struct PipelineReport {
    pub classification: Vec<Classification>,
    pub rates: ErrorRates,
    pub total_rate: f64,
    pub pseudo_threshold: f64,
    pub oracle_pseudo_threshold: f64,
    pub concatenation: stabilizer::Concatenation,
    pub verdict: ThresholdVerdict,
}

impl PipelineReport {
    pub fn phase_line(&self) -> String {
        match self.verdict {
            ThresholdVerdict::BelowThreshold => format!(
                "phase (i): below threshold (eps_total = {:.6e} < pseudo_threshold = {:.6e}); noise reduces to a stochastic model and concatenated QEC suppresses it",
                self.total_rate, self.pseudo_threshold
            ),
            other => format!(
                "irrelevant flow but {other} (eps_total = {:.6e}, pseudo_threshold = {:.6e}); resilience not established at this strength",
                self.total_rate, self.pseudo_threshold
            ),
        }
    }
}

/// classify → λ* → ε → threshold sweep → concatenation verdict.
pub fn pipeline(cfg: &ExperimentConfig, seed: u64) -> Result<PipelineReport, CliError> {
    let rows = classify_rows(cfg)?;
    for r in &rows {
        let c = &r.classification;
        match c.verdict {
            Verdict::Irrelevant => {}
            Verdict::Relevant => {
                return Err(CliError::Model(format!(
                    "channel {}: flow is relevant (exponent = {}, pulses_needed = {}); resilience is not provable by this method",
                    c.channel, c.exponent, r.pulses_needed
                )))
            }
            Verdict::Marginal => {
                return Err(CliError::Model(format!(
                    "channel {}: flow is marginal (exponent = {}); resilience is not provable by this method",
                    c.channel, c.exponent
                )))
            }
        }
    }
    check_mc(cfg)?;
    let rates = error_rates(cfg)?;
    let total = rates.total();
    let code = stabilizer::steane_code();
    let mix = if total > 0.0 { stabilizer::channel_mix(&rates).map_err(|e| config_err(e.to_string()))? } else { stabilizer::DEPOLARIZING };
    let sweep = stabilizer::threshold_sweep(&code, &cfg.mc.probabilities, mix, cfg.mc.samples, seed, cfg.mc.estimator)
        .map_err(|e| config_err(e.to_string()))?;
    let c = sweep.fit.coefficient;
    let concatenation = stabilizer::concatenation_map(total, c, cfg.mc.levels).map_err(|e| config_err(e.to_string()))?;
    Ok(PipelineReport {
        classification: rows.into_iter().map(|r| r.classification).collect(),
        rates,
        total_rate: total,
        pseudo_threshold: sweep.fit.pseudo_threshold,
        oracle_pseudo_threshold: sweep.oracle_pseudo_threshold,
        verdict: concatenation.verdict,
        concatenation,
    })
}

fn cmd_pipeline(common: &Common, cfg: &ExperimentConfig, sink: &Sink, out: &mut dyn Write) -> Result<(), CliError> {
    let report = pipeline(cfg, seed_for(common, cfg)?)?;
    let text = match sink.format {
        Format::Json => output::json(&report),
        Format::Csv => {
            let mut s = String::new();
            for c in &report.classification {
                s.push_str(&format!("{}: {}, exponent = {}\n", c.channel, c.verdict, c.exponent));
            }
            for (ch, e) in &report.rates.eps {
                s.push_str(&format!("eps_{ch} = {e:.6e} (lambda_star = {})\n", report.rates.lambda_star[ch]));
            }
            s.push_str(&report.phase_line());
            s.push('\n');
            s
        }
    };
    sink.write(out, &text)
}

/// Runs one parsed invocation.
pub fn execute(cli: &Cli, out: &mut dyn Write, err: &mut dyn Write) -> Result<(), CliError> {
    let common = cli.command.common();
    let cfg = load_config(common.config.as_deref(), &common.overrides)?;
    let sink = Sink::new(common, &cfg);
    match &cli.command {
        Command::Classify(_) => cmd_classify(&cfg, &sink, out),
        Command::Flow(_) => cmd_flow(&cfg, &sink, out),
        Command::Epsilon(_) => cmd_epsilon(&cfg, &sink, out),
        Command::ScalingScan(_) => cmd_scan(&cfg, &sink, out, err),
        Command::Coulomb(c) => cmd_coulomb(c, &cfg, &sink, out, err),
        Command::Threshold(c) => cmd_threshold(c, &cfg, &sink, out, err),
        Command::Pipeline(c) => cmd_pipeline(c, &cfg, &sink, out),
    }
}

/// Parses `args` and runs, returning the process exit status.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            use clap::error::ErrorKind;
            let text = e.render().to_string();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion | ErrorKind::DisplayHelpOnMissingArgumentOrSubcommand => {
                    let _ = out.write_all(text.as_bytes());
                    0
                }
                _ => {
                    let _ = err.write_all(text.as_bytes());
                    1
                }
            };
        }
    };
    match execute(&cli, out, err) {
        Ok(()) => 0,
        Err(e) => {
            let _ = writeln!(err, "error: {}", e.message());
            e.exit_code()
        }
    }
}
