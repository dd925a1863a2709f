//! Command-line surface: fit, validate, simulate, predict,
//! export-causality, export-exogenous, inspect.
//!
//! Exit codes: 0 success; 2 usage errors (including an unknown preset);
//! 3 model/data incompatibilities (type-count mismatch, prediction horizon
//! inside the observation window); 1 anything else. Errors print one
//! machine-parseable line to stderr: `error: <message>`.
//!
//! Configuration precedence for `fit` hyperparameters: explicit flags, then
//! a `--config` JSON file, then built-in defaults. The environment variable
//! `TPP_OUTPUT_DIR` redirects relative output paths.

use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use clap::{Args, Parser, Subcommand};
use serde::Deserialize;

use crate::data::Database;
use crate::error::{Error, Result};
use crate::export;
use crate::ingest::{
    load_event_features_csv, load_seq_features_csv, load_sequences_csv, ColumnMapping,
    FeatureDomainSpec, FeatureKind, Normalize,
};
use crate::learning::{fit, validation, FitConfig, LossKind, OptimizerKind, RegScope};
use crate::manifest::{model_load, model_save, ModelManifest, Provenance};
use crate::model::{
    Activation, DataDims, ExoKind, ExoSpec, ImpactKind, ImpactSpec, KernelSpec,
    ModelConfig,
};
use crate::presets::{build_preset, gap_percentile, PresetName, PresetOptions};
use crate::simulate::{predict, simulate, SimConfig};

pub const OUTPUT_DIR_ENV: &str = "TPP_OUTPUT_DIR";

#[derive(Parser, Debug)]
#[command(
    name = "tpp",
    version,
    about = "Multivariate temporal point process toolkit: compose, fit, simulate, predict, export"
)]
pub struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Load a CSV corpus, fit a model, write a manifest and a report.
    Fit(Box<FitArgs>),
    /// Average loss of a saved model on a corpus, no updates.
    Validate(ValidateArgs),
    /// Simulate sequences from a saved model by thinning.
    Simulate(SimulateArgs),
    /// Monte-Carlo expected event counts over a future horizon.
    Predict(PredictArgs),
    /// Export the Granger-causality (infectivity) matrix as CSV + SVG.
    ExportCausality(ExportArgs),
    /// Export the exogenous intensity per type as CSV + SVG.
    ExportExogenous(ExportArgs),
    /// Print a summary of a saved model manifest.
    Inspect(InspectArgs),
}

#[derive(Args, Debug, Clone)]
struct DataArgs {
    /// Event-sequence CSV file.
    #[arg(long)]
    data: PathBuf,
    /// Column holding sequence names.
    #[arg(long, default_value = "id")]
    seq_col: String,
    /// Column holding event timestamps.
    #[arg(long, default_value = "time")]
    time_col: String,
    /// Column holding event type names.
    #[arg(long, default_value = "event")]
    event_col: String,
    /// Optional column overriding each sequence's window start.
    #[arg(long)]
    t_start_col: Option<String>,
    /// Optional column overriding each sequence's window end.
    #[arg(long)]
    t_stop_col: Option<String>,
    /// Sequence feature columns, as `name:categorical` or `name:numerical`,
    /// comma separated.
    #[arg(long)]
    seq_features: Option<String>,
    /// Event-type feature columns, same syntax as --seq-features.
    #[arg(long)]
    event_features: Option<String>,
    /// Normalization for encoded features: none, minmax, or zscore.
    #[arg(long, default_value = "none")]
    normalize: String,
}

impl DataArgs {
    fn load(&self) -> Result<Database> {
        let mut mapping = ColumnMapping::new(&self.seq_col, &self.time_col, &self.event_col);
        mapping.t_start = self.t_start_col.clone();
        mapping.t_stop = self.t_stop_col.clone();
        let mut db = load_sequences_csv(&self.data, &mapping)?;
        let normalize = parse_normalize(&self.normalize)?;
        if let Some(spec) = &self.seq_features {
            let spec = parse_feature_spec(spec, normalize)?;
            db = load_seq_features_csv(&self.data, &self.seq_col, &spec, &db)?;
        }
        if let Some(spec) = &self.event_features {
            let spec = parse_feature_spec(spec, normalize)?;
            db = load_event_features_csv(&self.data, &self.event_col, &spec, &db)?;
        }
        Ok(db)
    }
}

#[derive(Args, Debug)]
struct FitArgs {
    #[command(flatten)]
    data: DataArgs,

    /// Named model recipe; overrides the composition flags below.
    #[arg(long)]
    preset: Option<String>,

    /// Exogenous family: constant, naive, linear, neural.
    #[arg(long, default_value = "naive")]
    exogenous: String,
    /// Impact family: basic, naive, factorized, linear, bilinear.
    #[arg(long, default_value = "naive")]
    impact: String,
    /// Latent dimension of the factorized impact model.
    #[arg(long, default_value_t = 8)]
    factor_dim: usize,
    /// Kernel family: exponential, rayleigh, gaussian, powerlaw, gate,
    /// multigauss.
    #[arg(long, default_value = "exponential")]
    kernel: String,
    /// Kernel ω (exponential, rayleigh, powerlaw, gate).
    #[arg(long)]
    kernel_omega: Option<f64>,
    /// Kernel δ (exponential, powerlaw, gate).
    #[arg(long)]
    kernel_delta: Option<f64>,
    /// Kernel σ (gaussian).
    #[arg(long)]
    kernel_sigma: Option<f64>,
    /// Basis count for the multigauss kernel grid.
    #[arg(long, default_value_t = 3)]
    basis: usize,
    /// Learn the kernel parameters too.
    #[arg(long)]
    kernel_trainable: bool,
    /// Activation for the composition: identity, relu, softplus.
    #[arg(long, default_value = "identity")]
    activation: String,
    /// β of the softplus activation.
    #[arg(long, default_value_t = 1.0)]
    softplus_beta: f64,
    /// Reproduce the sign-flipped softplus variant for auditing.
    #[arg(long)]
    paper_softplus: bool,
    /// Width of embedding fallbacks for feature-hungry components.
    #[arg(long, default_value_t = 8)]
    embed_dim: usize,
    /// Hidden width of the neural exogenous model.
    #[arg(long, default_value_t = 16)]
    hidden_dim: usize,
    /// Gauss–Legendre nodes for nonlinear compensators.
    #[arg(long, default_value_t = 16)]
    quadrature: usize,

    /// Loss: mle, lse, crossentropy. Presets pin their own default.
    #[arg(long)]
    loss: Option<String>,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    batch_size: Option<usize>,
    #[arg(long)]
    lr: Option<f64>,
    /// Per-epoch learning-rate decay factor.
    #[arg(long)]
    lr_decay: Option<f64>,
    /// Optimizer: adam or sgd.
    #[arg(long)]
    optimizer: Option<String>,
    #[arg(long)]
    l1: Option<f64>,
    /// L1 scope: impact or all.
    #[arg(long)]
    l1_scope: Option<String>,
    #[arg(long)]
    l2: Option<f64>,
    /// Comma-separated group names to clip at zero after each step,
    /// or "all", or "none".
    #[arg(long)]
    nonnegative: Option<String>,
    /// History window length attached to each training sample.
    #[arg(long)]
    memory: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// Fraction of sequences held out for validation.
    #[arg(long)]
    val_fraction: Option<f64>,
    /// Disable per-epoch shuffling.
    #[arg(long)]
    no_shuffle: bool,

    /// JSON file with fit hyperparameters (flags take precedence).
    #[arg(long)]
    config: Option<PathBuf>,

    /// Output manifest path.
    #[arg(long, default_value = "model.json")]
    out_model: PathBuf,
    /// Output line-JSON report path.
    #[arg(long, default_value = "report.jsonl")]
    out_report: PathBuf,
}

#[derive(Args, Debug)]
struct ValidateArgs {
    /// Saved model manifest.
    #[arg(long)]
    model: PathBuf,
    #[command(flatten)]
    data: DataArgs,
    /// Loss to evaluate (defaults to the loss the model was trained with).
    #[arg(long)]
    loss: Option<String>,
    /// History window length (defaults to the model's).
    #[arg(long)]
    memory: Option<usize>,
}

#[derive(Args, Debug)]
struct SimulateArgs {
    /// Saved model manifest.
    #[arg(long)]
    model: PathBuf,
    #[arg(long, default_value_t = 0.0)]
    t_begin: f64,
    #[arg(long)]
    t_end: f64,
    #[arg(long, default_value_t = 10_000)]
    max_events: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Number of independent sequences to generate.
    #[arg(long, default_value_t = 1)]
    runs: usize,
    /// Envelope refresh window width.
    #[arg(long, default_value_t = 1.0)]
    refresh_width: f64,
    /// Observed corpus to continue from (with --continue-seq).
    #[arg(long)]
    data: Option<PathBuf>,
    /// Name of the sequence in --data to continue.
    #[arg(long)]
    continue_seq: Option<String>,
    /// Column names when --data is given.
    #[arg(long, default_value = "id")]
    seq_col: String,
    #[arg(long, default_value = "time")]
    time_col: String,
    #[arg(long, default_value = "event")]
    event_col: String,
    /// Output CSV path.
    #[arg(long, default_value = "simulated.csv")]
    out: PathBuf,
}

#[derive(Args, Debug)]
struct PredictArgs {
    /// Saved model manifest.
    #[arg(long)]
    model: PathBuf,
    #[command(flatten)]
    data: DataArgs,
    /// Forecast interval start; must be at or after every sequence's window
    /// end.
    #[arg(long)]
    t0: f64,
    /// Forecast interval end.
    #[arg(long)]
    t1: f64,
    #[arg(long, default_value_t = 100)]
    replicates: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output CSV path.
    #[arg(long, default_value = "predicted.csv")]
    out: PathBuf,
}

#[derive(Args, Debug)]
struct ExportArgs {
    /// Saved model manifest.
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    out_csv: PathBuf,
    #[arg(long)]
    out_svg: PathBuf,
}

#[derive(Args, Debug)]
struct InspectArgs {
    /// Saved model manifest.
    #[arg(long)]
    model: PathBuf,
}

/// Optional hyperparameters loadable from `--config`.
#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct FileConfig {
    epochs: Option<usize>,
    batch_size: Option<usize>,
    learning_rate: Option<f64>,
    lr_decay_gamma: Option<f64>,
    optimizer: Option<String>,
    l1_weight: Option<f64>,
    l1_scope: Option<String>,
    l2_weight: Option<f64>,
    nonnegative: Option<serde_json::Value>,
    memory_size: Option<usize>,
    rng_seed: Option<u64>,
    validation_fraction: Option<f64>,
    loss: Option<String>,
}

pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            // clap prints help/version to stdout with code 0, usage errors
            // to stderr with code 2
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    match dispatch(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            match e {
                Error::IncompatibleTypes { .. } | Error::PredictHorizon { .. } => 3,
                Error::InvalidConfig(_) => 2,
                _ => 1,
            }
        }
    }
}

fn dispatch(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Fit(args) => cmd_fit(*args),
        Command::Validate(args) => cmd_validate(args),
        Command::Simulate(args) => cmd_simulate(args),
        Command::Predict(args) => cmd_predict(args),
        Command::ExportCausality(args) => cmd_export_causality(args),
        Command::ExportExogenous(args) => cmd_export_exogenous(args),
        Command::Inspect(args) => cmd_inspect(args),
    }
}

/// Relative output paths land in `TPP_OUTPUT_DIR` when it is set.
fn out_path(p: &Path) -> PathBuf {
    if p.is_relative() {
        if let Ok(dir) = std::env::var(OUTPUT_DIR_ENV) {
            if !dir.is_empty() {
                return PathBuf::from(dir).join(p);
            }
        }
    }
    p.to_path_buf()
}

fn parse_normalize(s: &str) -> Result<Normalize> {
    match s.to_ascii_lowercase().as_str() {
        "none" => Ok(Normalize::None),
        "minmax" => Ok(Normalize::MinMax),
        "zscore" => Ok(Normalize::ZScore),
        other => Err(Error::InvalidConfig(format!(
            "unknown normalization '{other}' (expected none, minmax, zscore)"
        ))),
    }
}

fn parse_feature_spec(s: &str, normalize: Normalize) -> Result<FeatureDomainSpec> {
    let mut columns = Vec::new();
    for part in s.split(',') {
        let (name, kind) = part.split_once(':').ok_or_else(|| {
            Error::InvalidConfig(format!(
                "feature column '{part}' must be name:categorical or name:numerical"
            ))
        })?;
        let kind = match kind.to_ascii_lowercase().as_str() {
            "categorical" => FeatureKind::Categorical,
            "numerical" => FeatureKind::Numerical,
            other => {
                return Err(Error::InvalidConfig(format!(
                    "unknown feature kind '{other}'"
                )))
            }
        };
        columns.push((name.to_string(), kind));
    }
    FeatureDomainSpec::new(columns, normalize)
}

fn parse_activation(name: &str, beta: f64, paper: bool) -> Result<Activation> {
    let act = match name.to_ascii_lowercase().as_str() {
        "identity" => Activation::Identity,
        "relu" => Activation::Relu,
        "softplus" => {
            if paper {
                Activation::SoftplusPaper { beta }
            } else {
                Activation::Softplus { beta }
            }
        }
        other => {
            return Err(Error::InvalidConfig(format!(
                "unknown activation '{other}' (expected identity, relu, softplus)"
            )))
        }
    };
    act.validate()?;
    Ok(act)
}

fn parse_optimizer(s: &str) -> Result<OptimizerKind> {
    match s.to_ascii_lowercase().as_str() {
        "adam" => Ok(OptimizerKind::default()),
        "sgd" => Ok(OptimizerKind::Sgd),
        other => Err(Error::InvalidConfig(format!(
            "unknown optimizer '{other}' (expected adam or sgd)"
        ))),
    }
}

fn parse_l1_scope(s: &str) -> Result<RegScope> {
    match s.to_ascii_lowercase().as_str() {
        "impact" => Ok(RegScope::ImpactCoefficients),
        "all" => Ok(RegScope::AllTrainable),
        other => Err(Error::InvalidConfig(format!(
            "unknown l1 scope '{other}' (expected impact or all)"
        ))),
    }
}

fn parse_nonnegative(s: &str) -> Option<Vec<String>> {
    if s.eq_ignore_ascii_case("none") {
        None
    } else {
        Some(s.split(',').map(|p| p.trim().to_string()).collect())
    }
}

fn explicit_kernel_spec(args: &FitArgs, db: &Database) -> Result<KernelSpec> {
    let omega = args.kernel_omega;
    let delta = args.kernel_delta;
    let sigma = args.kernel_sigma;
    Ok(match args.kernel.to_ascii_lowercase().as_str() {
        "exponential" => KernelSpec::Exponential {
            omega: omega.unwrap_or(1.0),
            delta: delta.unwrap_or(0.0),
        },
        "rayleigh" => KernelSpec::Rayleigh {
            omega: omega.unwrap_or(1.0),
        },
        "gaussian" => KernelSpec::Gaussian {
            sigma: sigma.unwrap_or(1.0),
        },
        "powerlaw" => KernelSpec::Powerlaw {
            omega: omega.unwrap_or(2.0),
            delta: delta.unwrap_or(1.0),
        },
        "gate" => KernelSpec::Gate {
            omega: omega.unwrap_or(0.0),
            delta: delta.unwrap_or(1.0),
        },
        "multigauss" => KernelSpec::multi_gauss_grid(args.basis, gap_percentile(db, 0.95)),
        other => {
            return Err(Error::InvalidConfig(format!(
                "unknown kernel '{other}' (expected exponential, rayleigh, gaussian, powerlaw, gate, multigauss)"
            )))
        }
    })
}

fn parse_exo_kind(s: &str) -> Result<ExoKind> {
    match s.to_ascii_lowercase().as_str() {
        "constant" => Ok(ExoKind::Constant),
        "naive" => Ok(ExoKind::Naive),
        "linear" => Ok(ExoKind::Linear),
        "neural" => Ok(ExoKind::Neural),
        other => Err(Error::InvalidConfig(format!(
            "unknown exogenous family '{other}'"
        ))),
    }
}

fn parse_impact_kind(s: &str, factor_dim: usize) -> Result<ImpactKind> {
    match s.to_ascii_lowercase().as_str() {
        "basic" => Ok(ImpactKind::Basic),
        "naive" => Ok(ImpactKind::Naive),
        "factorized" => Ok(ImpactKind::Factorized { dim: factor_dim }),
        "linear" => Ok(ImpactKind::Linear),
        "bilinear" => Ok(ImpactKind::Bilinear),
        other => Err(Error::InvalidConfig(format!(
            "unknown impact family '{other}'"
        ))),
    }
}

fn cmd_fit(args: FitArgs) -> Result<()> {
    let db = args.data.load()?;

    let file_cfg: FileConfig = match &args.config {
        Some(path) => serde_json::from_str(&std::fs::read_to_string(path)?)?,
        None => FileConfig::default(),
    };

    let seed = args.seed.or(file_cfg.rng_seed).unwrap_or(0);
    let memory = args.memory.or(file_cfg.memory_size).unwrap_or(64);

    let (mut model_cfg, preset_loss) = match &args.preset {
        Some(name) => {
            let preset = PresetName::from_str(name)?;
            let opts = PresetOptions {
                memory_size: memory,
                basis: args.basis,
                embed_dim: args.embed_dim,
                hidden_dim: args.hidden_dim,
                quadrature: args.quadrature,
                init_seed: seed,
                paper_softplus: args.paper_softplus,
            };
            let (cfg, loss) = build_preset(preset, &db, &opts);
            (cfg, Some(loss))
        }
        None => {
            let act = parse_activation(&args.activation, args.softplus_beta, args.paper_softplus)?;
            let cfg = ModelConfig {
                memory_size: memory,
                exogenous: ExoSpec {
                    kind: parse_exo_kind(&args.exogenous)?,
                    activation: act,
                },
                impact: ImpactSpec {
                    kind: parse_impact_kind(&args.impact, args.factor_dim)?,
                    activation: act,
                },
                kernel: explicit_kernel_spec(&args, &db)?,
                kernel_trainable: (args.kernel_trainable, args.kernel_trainable),
                outer: act,
                embed_dim: args.embed_dim,
                hidden_dim: args.hidden_dim,
                quadrature: args.quadrature,
                init_seed: seed,
            };
            (cfg, None)
        }
    };
    model_cfg.memory_size = memory;
    model_cfg.init_seed = seed;

    let loss: LossKind = match args.loss.as_deref().or(file_cfg.loss.as_deref()) {
        Some(s) => s.parse()?,
        None => preset_loss.unwrap_or(LossKind::MaxLogLike),
    };

    // softplus impact activations interact badly with the projection; turn
    // it off unless the user explicitly asked for it
    let default_nonneg = if matches!(
        model_cfg.impact.activation,
        Activation::Softplus { .. } | Activation::SoftplusPaper { .. }
    ) {
        None
    } else {
        Some(vec!["all".to_string()])
    };
    let nonnegative = match args.nonnegative.as_deref() {
        Some(s) => parse_nonnegative(s),
        None => match &file_cfg.nonnegative {
            Some(serde_json::Value::String(s)) if s == "none" => None,
            Some(serde_json::Value::Array(items)) => Some(
                items
                    .iter()
                    .filter_map(|v| v.as_str().map(String::from))
                    .collect(),
            ),
            Some(other) => {
                return Err(Error::InvalidConfig(format!(
                    "config nonnegative must be \"none\" or an array of names, got {other}"
                )))
            }
            None => default_nonneg,
        },
    };

    let fit_cfg = FitConfig {
        epochs: args.epochs.or(file_cfg.epochs).unwrap_or(10),
        batch_size: args.batch_size.or(file_cfg.batch_size).unwrap_or(128),
        learning_rate: args.lr.or(file_cfg.learning_rate).unwrap_or(0.01),
        lr_decay_gamma: args.lr_decay.or(file_cfg.lr_decay_gamma).unwrap_or(0.95),
        optimizer: match args.optimizer.as_deref().or(file_cfg.optimizer.as_deref()) {
            Some(s) => parse_optimizer(s)?,
            None => OptimizerKind::default(),
        },
        l1_weight: args.l1.or(file_cfg.l1_weight).unwrap_or(0.0),
        l2_weight: args.l2.or(file_cfg.l2_weight).unwrap_or(0.0),
        l1_scope: match args.l1_scope.as_deref().or(file_cfg.l1_scope.as_deref()) {
            Some(s) => parse_l1_scope(s)?,
            None => RegScope::ImpactCoefficients,
        },
        nonnegative,
        memory_size: memory,
        rng_seed: seed,
        validation_fraction: args
            .val_fraction
            .or(file_cfg.validation_fraction)
            .unwrap_or(0.0),
        shuffle: !args.no_shuffle,
    };

    let dims = DataDims::from_database(&db);
    let mut model = model_cfg.build(&dims)?;
    let report = fit(&mut model, &db, &fit_cfg, loss)?;

    let model_path = out_path(&args.out_model);
    let report_path = out_path(&args.out_report);
    let provenance = Provenance {
        seed,
        config_hash: String::new(),
        loss: Some(loss.name().to_string()),
    };
    model_save(&model, &db.idx2type, provenance, &model_path)?;
    let mut report_file = std::fs::File::create(&report_path)?;
    report.write_jsonl(&mut report_file)?;
    report_file.flush()?;

    let last = report.epochs.last();
    println!(
        "fit {} epochs on {} sequences / {} events; final train loss {}",
        report.epochs.len(),
        db.sequences.len(),
        db.total_events(),
        last.map(|e| e.train_loss.to_string()).unwrap_or_default()
    );
    println!("model: {}", model_path.display());
    println!("report: {}", report_path.display());
    Ok(())
}

fn check_type_compat(manifest: &ModelManifest, db: &Database) -> Result<()> {
    if manifest.num_types != db.num_types {
        return Err(Error::IncompatibleTypes {
            manifest: manifest.num_types,
            data: db.num_types,
        });
    }
    if manifest.type_names != db.idx2type {
        return Err(Error::InvalidConfig(
            "manifest and data disagree on event type names/order".into(),
        ));
    }
    Ok(())
}

fn cmd_validate(args: ValidateArgs) -> Result<()> {
    let (model, manifest) = model_load(&args.model)?;
    let db = args.data.load()?;
    check_type_compat(&manifest, &db)?;
    let loss: LossKind = match &args.loss {
        Some(s) => s.parse()?,
        None => manifest
            .provenance
            .loss
            .as_deref()
            .unwrap_or("mle")
            .parse()?,
    };
    let cfg = FitConfig {
        memory_size: args.memory.unwrap_or(model.memory_size()),
        ..FitConfig::default()
    };
    let value = validation(&model, &db, &cfg, loss)?;
    println!("{} {}", loss.name(), value);
    Ok(())
}

fn cmd_simulate(args: SimulateArgs) -> Result<()> {
    let (model, manifest) = model_load(&args.model)?;
    let (seed_sequence, seq_index) = match (&args.data, &args.continue_seq) {
        (Some(path), Some(name)) => {
            let mapping = ColumnMapping::new(&args.seq_col, &args.time_col, &args.event_col);
            let db = load_sequences_csv(path, &mapping)?;
            check_type_compat(&manifest, &db)?;
            let &idx = db.seq2idx.get(name).ok_or_else(|| Error::UnknownSequence {
                row: 0,
                name: name.clone(),
            })?;
            (Some(db.sequences[idx].clone()), idx)
        }
        (None, Some(_)) => {
            return Err(Error::InvalidConfig(
                "--continue-seq needs --data".into(),
            ))
        }
        _ => (None, 0),
    };

    let out = out_path(&args.out);
    let mut w = csv::Writer::from_path(&out)?;
    w.write_record(["seq_id", "time", "event"])?;
    let mut total = 0usize;
    for run in 0..args.runs.max(1) {
        let cfg = SimConfig {
            t_begin: args.t_begin,
            t_end: args.t_end,
            seed_sequence: seed_sequence.clone(),
            max_events: args.max_events,
            rng_seed: args.seed.wrapping_add(run as u64),
            bound_refresh_width: args.refresh_width,
            seq_index,
        };
        let seq = simulate(&model, &cfg)?;
        total += seq.len();
        for (&t, &c) in seq.times.iter().zip(&seq.events) {
            w.write_record([
                format!("sim_{run}"),
                t.to_string(),
                manifest.type_names[c].clone(),
            ])?;
        }
    }
    w.flush()?;
    println!("simulated {} events over {} runs: {}", total, args.runs, out.display());
    Ok(())
}

fn cmd_predict(args: PredictArgs) -> Result<()> {
    let (model, manifest) = model_load(&args.model)?;
    let db = args.data.load()?;
    check_type_compat(&manifest, &db)?;
    let counts = predict(&model, &db, args.t0, args.t1, args.replicates, args.seed)?;

    let out = out_path(&args.out);
    let mut w = csv::Writer::from_path(&out)?;
    let mut header = vec!["seq_id".to_string()];
    header.extend(manifest.type_names.iter().cloned());
    w.write_record(&header)?;
    for (s, row) in counts.iter().enumerate() {
        let mut record = vec![db.idx2seq[s].clone()];
        record.extend(row.iter().map(|v| v.to_string()));
        w.write_record(&record)?;
    }
    w.flush()?;
    println!(
        "predicted expected counts over [{}, {}] for {} sequences: {}",
        args.t0,
        args.t1,
        counts.len(),
        out.display()
    );
    Ok(())
}

fn cmd_export_causality(args: ExportArgs) -> Result<()> {
    let (model, manifest) = model_load(&args.model)?;
    let csv_path = out_path(&args.out_csv);
    let svg_path = out_path(&args.out_svg);
    export::export_causality(&model, &manifest.type_names, &csv_path, &svg_path)?;
    println!("causality matrix: {} / {}", csv_path.display(), svg_path.display());
    Ok(())
}

fn cmd_export_exogenous(args: ExportArgs) -> Result<()> {
    let (model, manifest) = model_load(&args.model)?;
    let csv_path = out_path(&args.out_csv);
    let svg_path = out_path(&args.out_svg);
    export::export_exogenous(&model, &manifest.type_names, &csv_path, &svg_path)?;
    println!("exogenous intensity: {} / {}", csv_path.display(), svg_path.display());
    Ok(())
}

fn cmd_inspect(args: InspectArgs) -> Result<()> {
    let (model, manifest) = model_load(&args.model)?;
    println!("format version: {}", manifest.format_version);
    println!(
        "composition: exogenous {:?} / impact {:?} / kernel {} (M = {}) / outer {:?}",
        manifest.config.exogenous.kind,
        manifest.config.impact.kind,
        model.kernels().kind().name(),
        model.kernels().basis(),
        manifest.config.outer,
    );
    println!(
        "types: {} ({})",
        manifest.num_types,
        manifest.type_names.join(", ")
    );
    println!("memory size: {}", model.memory_size());
    println!("quadrature nodes: {}", model.quadrature());
    println!("parameters ({} total):", model.num_params());
    for array in &manifest.params {
        println!(
            "  {} shape {:?}{}",
            array.name,
            array.shape,
            if array.trainable { "" } else { " (frozen)" }
        );
    }
    println!(
        "provenance: seed {}, config hash {}, loss {}",
        manifest.provenance.seed,
        manifest.provenance.config_hash,
        manifest.provenance.loss.as_deref().unwrap_or("-")
    );
    Ok(())
}
