//! The `seroclass` command line.
//!
//! Every command resolves its configuration (flags over `--config` file over
//! defaults), writes its outputs and a `manifest.json` into `--out-dir`, and
//! can be rerun from that manifest with `replay`.
//!
//! Exit codes: 0 success, 2 usage or configuration error, 3 data or
//! precondition error, 4 numerical failure.

pub mod commands;
pub mod config;
pub mod manifest;

use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use crate::classifier::{PrevalenceInterval, RuleKind};
use crate::error::{Error, ErrorClass, Result};
use crate::geometry::DomainSpec;
use crate::harness::MixtureDraw;
use crate::ingest::SampleLabel;
use crate::quadrature::QuadratureSpec;
use commands::Run;
use config::{
    absolute, read_config, ClassifyConfig, ContourConfig, EmitConfig, EstimateConfig, FitConfig, InputConfig,
    ModelPaths, SimulateConfig, SweepConfig,
};
use manifest::{output_mismatches, read_manifest, verify_inputs, write_run, RunManifest};

#[derive(Debug, Parser)]
#[command(name = "seroclass", version, about = "Prevalence-aware classification of two-channel assay data")]
pub struct Cli {
    /// Cap on worker threads.
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Fit a parametric density to labeled samples.
    Fit(FitArgs),
    /// Label samples with a binary or ternary rule.
    Classify(ClassifyArgs),
    /// Estimate prevalence with the adaptive classify/estimate loop.
    Estimate(EstimateArgs),
    /// Monte Carlo error statistics, or synthetic samples with --emit-csv.
    Simulate(SimulateArgs),
    /// Binary loss as a function of the assumed prevalence.
    Sweep(SweepArgs),
    /// Decision boundaries as polylines.
    Contour(ContourArgs),
    /// Rerun a command from its manifest and compare outputs.
    Replay(ReplayArgs),
}

#[derive(Debug, Args)]
pub struct OutputArgs {
    /// JSON file with (part of) the command's configuration.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub out_dir: PathBuf,
}

#[derive(Debug, Args)]
pub struct InputArgs {
    #[arg(long)]
    pub input: Option<PathBuf>,
    #[arg(long)]
    pub id_col: Option<String>,
    /// First channel column.
    #[arg(long)]
    pub a_col: Option<String>,
    /// Second channel column.
    #[arg(long)]
    pub b_col: Option<String>,
    #[arg(long)]
    pub ref_col: Option<String>,
    /// Treat every reference signal as 1.
    #[arg(long)]
    pub no_ref_col: bool,
    #[arg(long)]
    pub label_col: Option<String>,
    #[arg(long)]
    pub onset_col: Option<String>,
    #[arg(long, allow_hyphen_values = true)]
    pub offset: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    pub floor: Option<f64>,
    #[arg(long)]
    pub min_onset_days: Option<u32>,
    #[arg(long)]
    pub no_onset_filter: bool,
    #[arg(long)]
    pub no_log_transform: bool,
    /// Channel columns already hold log-space coordinates.
    #[arg(long)]
    pub log_space: bool,
}

impl InputArgs {
    fn apply(&self, cfg: &mut InputConfig) -> Result<()> {
        if let Some(v) = &self.input {
            cfg.input = v.clone();
        }
        if !cfg.input.as_os_str().is_empty() {
            cfg.input = absolute(&cfg.input)?;
        }
        let c = &mut cfg.columns;
        set(&mut c.id, self.id_col.clone());
        set(&mut c.mfi_a, self.a_col.clone());
        set(&mut c.mfi_b, self.b_col.clone());
        if self.ref_col.is_some() {
            c.reference = self.ref_col.clone();
        }
        if self.no_ref_col {
            c.reference = None;
        }
        if self.label_col.is_some() {
            c.label = self.label_col.clone();
        }
        if self.onset_col.is_some() {
            c.days_since_onset = self.onset_col.clone();
        }
        let p = &mut cfg.preprocess;
        set(&mut p.offset, self.offset);
        set(&mut p.rejection_floor, self.floor);
        if self.min_onset_days.is_some() {
            p.min_onset_days = self.min_onset_days;
        }
        if self.no_onset_filter {
            p.min_onset_days = None;
        }
        if self.no_log_transform {
            p.log_transform = false;
        }
        if self.log_space {
            cfg.log_space = true;
        }
        Ok(())
    }
}

#[derive(Debug, Args)]
pub struct ModelArgs {
    #[arg(long)]
    pub pos_model: Option<PathBuf>,
    #[arg(long)]
    pub neg_model: Option<PathBuf>,
}

impl ModelArgs {
    fn apply(&self, cfg: &mut ModelPaths) -> Result<()> {
        if self.pos_model.is_some() {
            cfg.pos_model = self.pos_model.clone();
        }
        if self.neg_model.is_some() {
            cfg.neg_model = self.neg_model.clone();
        }
        for p in [&mut cfg.pos_model, &mut cfg.neg_model].into_iter().flatten() {
            *p = absolute(p)?;
        }
        Ok(())
    }
}

#[derive(Debug, Args)]
pub struct FitArgs {
    #[command(flatten)]
    pub out: OutputArgs,
    #[command(flatten)]
    pub data: InputArgs,
    /// `negative` or `positive`.
    #[arg(long)]
    pub family: Option<String>,
    /// Which labeled records to fit; defaults to the family's own label.
    #[arg(long)]
    pub label: Option<String>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub restarts: Option<usize>,
    #[arg(long)]
    pub max_iter: Option<usize>,
    #[arg(long, allow_hyphen_values = true)]
    pub domain_lo: Option<f64>,
    #[arg(long)]
    pub domain_hi: Option<f64>,
    /// Quadrature nodes per axis for the normalization.
    #[arg(long)]
    pub nodes: Option<usize>,
}

#[derive(Debug, Args)]
pub struct RuleArgs {
    /// `binary` or `ternary`.
    #[arg(long)]
    pub mode: Option<String>,
    #[arg(long)]
    pub prevalence: Option<f64>,
    #[arg(long)]
    pub p_lo: Option<f64>,
    #[arg(long)]
    pub p_hi: Option<f64>,
    #[arg(long)]
    pub w_fp: Option<f64>,
    #[arg(long)]
    pub w_fn: Option<f64>,
}

#[derive(Debug, Args)]
pub struct ClassifyArgs {
    #[command(flatten)]
    pub out: OutputArgs,
    #[command(flatten)]
    pub data: InputArgs,
    #[command(flatten)]
    pub models: ModelArgs,
    #[command(flatten)]
    pub rule: RuleArgs,
}

#[derive(Debug, Args)]
pub struct EstimateArgs {
    #[command(flatten)]
    pub out: OutputArgs,
    #[command(flatten)]
    pub data: InputArgs,
    #[command(flatten)]
    pub models: ModelArgs,
    #[arg(long)]
    pub p_init: Option<f64>,
    #[arg(long)]
    pub tol: Option<f64>,
    #[arg(long)]
    pub max_iter: Option<usize>,
    #[arg(long)]
    pub nodes: Option<usize>,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[command(flatten)]
    pub out: OutputArgs,
    #[command(flatten)]
    pub models: ModelArgs,
    #[arg(long, value_delimiter = ',')]
    pub prevalences: Option<Vec<f64>>,
    #[arg(long, value_delimiter = ',')]
    pub sizes: Option<Vec<usize>>,
    #[arg(long)]
    pub trials: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Label with the rule at the true prevalence instead of adaptively.
    #[arg(long)]
    pub known_prevalence: bool,
    /// `fixed` (round(pS) positives) or `bernoulli`.
    #[arg(long)]
    pub draw: Option<String>,
    #[arg(long)]
    pub nodes: Option<usize>,
    /// Write this many synthetic log-space samples instead of running the
    /// Monte Carlo grid.
    #[arg(long)]
    pub emit_csv: Option<usize>,
    /// Prevalence of the emitted samples.
    #[arg(long)]
    pub prevalence: Option<f64>,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    #[command(flatten)]
    pub out: OutputArgs,
    #[command(flatten)]
    pub models: ModelArgs,
    #[arg(long)]
    pub true_p: Option<f64>,
    #[arg(long, value_delimiter = ',')]
    pub q_grid: Option<Vec<f64>>,
    #[arg(long)]
    pub nodes: Option<usize>,
}

#[derive(Debug, Args)]
pub struct ContourArgs {
    #[command(flatten)]
    pub out: OutputArgs,
    #[command(flatten)]
    pub models: ModelArgs,
    #[arg(long, value_delimiter = ',')]
    pub prevalences: Option<Vec<f64>>,
    /// Also trace the ternary rule over `[p_lo, p_hi]`.
    #[arg(long)]
    pub p_lo: Option<f64>,
    #[arg(long)]
    pub p_hi: Option<f64>,
    #[arg(long)]
    pub resolution: Option<usize>,
}

#[derive(Debug, Args)]
pub struct ReplayArgs {
    #[arg(long)]
    pub manifest: PathBuf,
    #[arg(long)]
    pub out_dir: PathBuf,
}

fn set<T>(slot: &mut T, value: Option<T>) {
    if let Some(v) = value {
        *slot = v;
    }
}

fn set_nodes(quad: &mut QuadratureSpec, nodes: Option<usize>) {
    if let Some(n) = nodes {
        quad.nodes_per_axis = n;
    }
}

pub fn resolve_fit(a: &FitArgs) -> Result<FitConfig> {
    let mut cfg: FitConfig = read_config(a.out.config.as_deref())?;
    a.data.apply(&mut cfg.data)?;
    if let Some(f) = &a.family {
        cfg.family = f.parse()?;
    }
    if let Some(l) = &a.label {
        cfg.label = Some(SampleLabel::parse(l).ok_or_else(|| Error::Config(format!("unknown label `{l}`")))?);
    }
    set(&mut cfg.fit.seed, a.seed);
    set(&mut cfg.fit.restarts, a.restarts);
    set(&mut cfg.fit.max_iter, a.max_iter);
    if a.domain_lo.is_some() || a.domain_hi.is_some() {
        cfg.domain = DomainSpec::new(a.domain_lo.unwrap_or(cfg.domain.lo), a.domain_hi.unwrap_or(cfg.domain.hi))?;
    }
    set_nodes(&mut cfg.quad, a.nodes);
    Ok(cfg)
}

fn resolve_rule(a: &RuleArgs, current: RuleKind) -> Result<RuleKind> {
    let mode = match a.mode.as_deref().map(str::to_ascii_lowercase).as_deref() {
        None if a.p_lo.is_some() || a.p_hi.is_some() => "ternary",
        None if a.prevalence.is_some() => "binary",
        None => match current {
            RuleKind::Binary { .. } => "binary",
            RuleKind::Ternary(_) => "ternary",
        },
        Some("binary") => "binary",
        Some("ternary") => "ternary",
        Some(other) => return Err(Error::Config(format!("unknown mode `{other}`; use binary or ternary"))),
    };
    let kind = match (mode, current) {
        ("binary", RuleKind::Binary { p }) => RuleKind::Binary { p: a.prevalence.unwrap_or(p) },
        ("binary", _) => {
            RuleKind::Binary { p: a.prevalence.ok_or_else(|| Error::Config("binary mode needs --prevalence".into()))? }
        }
        (_, RuleKind::Ternary(i)) => {
            RuleKind::Ternary(PrevalenceInterval { p_lo: a.p_lo.unwrap_or(i.p_lo), p_hi: a.p_hi.unwrap_or(i.p_hi) })
        }
        _ => match (a.p_lo, a.p_hi) {
            (Some(p_lo), Some(p_hi)) => RuleKind::Ternary(PrevalenceInterval { p_lo, p_hi }),
            _ => return Err(Error::Config("ternary mode needs --p-lo and --p-hi".into())),
        },
    };
    kind.validate().map_err(|e| Error::Config(e.to_string()))?;
    Ok(kind)
}

pub fn resolve_classify(a: &ClassifyArgs) -> Result<ClassifyConfig> {
    let mut cfg: ClassifyConfig = read_config(a.out.config.as_deref())?;
    a.data.apply(&mut cfg.data)?;
    a.models.apply(&mut cfg.models)?;
    cfg.rule = resolve_rule(&a.rule, cfg.rule)?;
    set(&mut cfg.weights.w_fp, a.rule.w_fp);
    set(&mut cfg.weights.w_fn, a.rule.w_fn);
    Ok(cfg)
}

pub fn resolve_estimate(a: &EstimateArgs) -> Result<EstimateConfig> {
    let mut cfg: EstimateConfig = read_config(a.out.config.as_deref())?;
    a.data.apply(&mut cfg.data)?;
    a.models.apply(&mut cfg.models)?;
    set(&mut cfg.adaptive.p_init, a.p_init);
    set(&mut cfg.adaptive.tol, a.tol);
    set(&mut cfg.adaptive.max_iter, a.max_iter);
    set_nodes(&mut cfg.adaptive.quad, a.nodes);
    Ok(cfg)
}

pub fn resolve_simulate(a: &SimulateArgs) -> Result<SimulateConfig> {
    let mut cfg: SimulateConfig = read_config(a.out.config.as_deref())?;
    a.models.apply(&mut cfg.models)?;
    let e = &mut cfg.experiment;
    set(&mut e.prevalence_grid, a.prevalences.clone());
    set(&mut e.sample_sizes, a.sizes.clone());
    set(&mut e.trials, a.trials);
    set(&mut e.base_seed, a.seed);
    set_nodes(&mut e.quad, a.nodes);
    if let Some(d) = &a.draw {
        e.draw = match d.to_ascii_lowercase().as_str() {
            "fixed" | "fixed_counts" => MixtureDraw::FixedCounts,
            "bernoulli" => MixtureDraw::Bernoulli,
            other => return Err(Error::Config(format!("unknown draw `{other}`; use fixed or bernoulli"))),
        };
    }
    if a.known_prevalence {
        cfg.known_prevalence = true;
    }
    if let Some(count) = a.emit_csv {
        let prevalence = a.prevalence.or(cfg.emit.map(|e| e.prevalence)).unwrap_or(0.5);
        cfg.emit = Some(EmitConfig { count, prevalence });
    } else if let (Some(p), Some(emit)) = (a.prevalence, cfg.emit.as_mut()) {
        emit.prevalence = p;
    }
    Ok(cfg)
}

pub fn resolve_sweep(a: &SweepArgs) -> Result<SweepConfig> {
    let mut cfg: SweepConfig = read_config(a.out.config.as_deref())?;
    a.models.apply(&mut cfg.models)?;
    set(&mut cfg.true_p, a.true_p);
    set(&mut cfg.q_grid, a.q_grid.clone());
    set_nodes(&mut cfg.quad, a.nodes);
    Ok(cfg)
}

pub fn resolve_contour(a: &ContourArgs) -> Result<ContourConfig> {
    let mut cfg: ContourConfig = read_config(a.out.config.as_deref())?;
    a.models.apply(&mut cfg.models)?;
    set(&mut cfg.prevalences, a.prevalences.clone());
    set(&mut cfg.resolution, a.resolution);
    match (a.p_lo, a.p_hi) {
        (Some(p_lo), Some(p_hi)) => cfg.interval = Some(PrevalenceInterval { p_lo, p_hi }),
        (None, None) => {}
        _ => return Err(Error::Config("give both --p-lo and --p-hi".into())),
    }
    Ok(cfg)
}

/// Writes a finished run and reports its summary; partial runs are written
/// before their error is returned.
fn finish<C: serde::Serialize>(out_dir: &Path, command: &str, cfg: &C, run: Run) -> Result<RunManifest> {
    let manifest = write_run(out_dir, command, cfg, run.seeds, &run.inputs, &run.outputs)?;
    println!("{}", run.summary);
    match run.failure {
        Some(e) => Err(e),
        None => Ok(manifest),
    }
}

/// Runs `command` from a resolved configuration value.
fn execute(command: &str, config: serde_json::Value, out_dir: &Path) -> Result<RunManifest> {
    fn parse<T: serde::de::DeserializeOwned>(v: serde_json::Value) -> Result<T> {
        serde_json::from_value(v).map_err(|e| Error::Config(format!("manifest config: {e}")))
    }
    match command {
        "fit" => {
            let cfg: FitConfig = parse(config)?;
            finish(out_dir, command, &cfg, commands::fit(&cfg)?)
        }
        "classify" => {
            let cfg: ClassifyConfig = parse(config)?;
            finish(out_dir, command, &cfg, commands::classify(&cfg)?)
        }
        "estimate" => {
            let cfg: EstimateConfig = parse(config)?;
            finish(out_dir, command, &cfg, commands::estimate(&cfg)?)
        }
        "simulate" => {
            let cfg: SimulateConfig = parse(config)?;
            finish(out_dir, command, &cfg, commands::simulate(&cfg)?)
        }
        "sweep" => {
            let cfg: SweepConfig = parse(config)?;
            finish(out_dir, command, &cfg, commands::sweep(&cfg)?)
        }
        "contour" => {
            let cfg: ContourConfig = parse(config)?;
            finish(out_dir, command, &cfg, commands::contour(&cfg)?)
        }
        other => Err(Error::Config(format!("manifest names unknown command `{other}`"))),
    }
}

fn replay(a: &ReplayArgs) -> Result<()> {
    let original = read_manifest(&a.manifest)?;
    verify_inputs(&original)?;
    let replayed = execute(&original.command, original.config.clone(), &a.out_dir)?;
    let bad = output_mismatches(&original, &replayed);
    if bad.is_empty() {
        println!("replay of `{}` reproduced {} output file(s)", original.command, original.outputs.len());
        Ok(())
    } else {
        let names: Vec<String> = bad.iter().map(|p| p.display().to_string()).collect();
        Err(Error::Precondition(format!("replayed outputs differ: {}", names.join(", "))))
    }
}

pub fn run(cli: &Cli) -> Result<()> {
    fn go<C: serde::Serialize>(name: &str, out: &OutputArgs, cfg: Result<C>) -> Result<()> {
        let cfg = cfg?;
        let value = serde_json::to_value(&cfg)?;
        execute(name, value, &out.out_dir).map(|_| ())
    }
    match &cli.command {
        Command::Fit(a) => go("fit", &a.out, resolve_fit(a)),
        Command::Classify(a) => go("classify", &a.out, resolve_classify(a)),
        Command::Estimate(a) => go("estimate", &a.out, resolve_estimate(a)),
        Command::Simulate(a) => go("simulate", &a.out, resolve_simulate(a)),
        Command::Sweep(a) => go("sweep", &a.out, resolve_sweep(a)),
        Command::Contour(a) => go("contour", &a.out, resolve_contour(a)),
        Command::Replay(a) => replay(a),
    }
}

pub fn exit_code(e: &Error) -> i32 {
    match e.class() {
        ErrorClass::Config => 2,
        ErrorClass::Data => 3,
        ErrorClass::Numerical => 4,
    }
}

/// Parses `args`, runs the command and returns the process exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    if let Some(n) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("error: could not size the thread pool: {e}");
            return 2;
        }
    }
    match run(&cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}
