mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use nqs_core::experiments::{AnsatzFamily, Model};
use serde_json::{json, Map, Value};

use crate::config::{resolve, UsageError};

/// Exact diagonalization and neural-quantum-state learnability runs on the
/// QSK spin glass and the disordered-fermion (DF) model.
#[derive(Parser, Debug)]
#[command(name = "nqs", version, about)]
struct Cli {
    /// JSON config file with top-level keys and optional per-command sections.
    /// A manifest written by a previous run is accepted as well.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads for realization-level parallelism.
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Ground state by exact diagonalization, with its Rényi-2 entropy.
    Ed {
        #[command(flatten)]
        model: ModelFlags,
    },
    /// Fidelity training of one ansatz on one instance.
    Learn {
        #[command(flatten)]
        model: ModelFlags,
        #[command(flatten)]
        ansatz: AnsatzFlags,
        #[command(flatten)]
        train: TrainFlags,
    },
    /// Ensemble-mean entanglement entropy across a size grid (fig_d.csv).
    Entropy {
        #[command(flatten)]
        model: ModelFlags,
        #[command(flatten)]
        ensemble: EnsembleFlags,
    },
    /// Parameters needed for a target energy error across sizes (fig_c.csv).
    Scaling {
        #[command(flatten)]
        model: ModelFlags,
        #[command(flatten)]
        ansatz: AnsatzFlags,
        #[command(flatten)]
        train: TrainFlags,
        #[command(flatten)]
        ensemble: EnsembleFlags,
        #[command(flatten)]
        scaling: ScalingFlags,
    },
    /// Ensemble infidelity and energy error across sizes (fig_a.csv, fig_b.csv).
    Report {
        #[command(flatten)]
        model: ModelFlags,
        #[command(flatten)]
        ansatz: AnsatzFlags,
        #[command(flatten)]
        train: TrainFlags,
        #[command(flatten)]
        ensemble: EnsembleFlags,
    },
}

#[derive(Args, Debug)]
struct ModelFlags {
    #[arg(long, value_enum)]
    model: Option<ModelArg>,
    /// Number of sites.
    #[arg(long = "L")]
    sites: Option<usize>,
    /// Particle number for DF (default: half filling).
    #[arg(long = "N")]
    particles: Option<usize>,
    /// Transverse field for QSK.
    #[arg(long = "h")]
    field: Option<f64>,
    /// Disorder standard deviation (default 1/sqrt(L)).
    #[arg(long)]
    sigma: Option<f64>,
    /// Set V = 0.
    #[arg(long)]
    interactions_off: bool,
    /// Set J = 0.
    #[arg(long)]
    couplings_off: bool,
    /// Disorder record (JSON with L, j_upper and optionally v_upper) used
    /// instead of sampling.
    #[arg(long)]
    disorder: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct AnsatzFlags {
    #[arg(long, value_enum)]
    ansatz: Option<AnsatzArg>,
    /// Hidden-unit density; hidden width is round(alpha L).
    #[arg(long)]
    alpha: Option<f64>,
    /// Hidden width, instead of a density.
    #[arg(long)]
    width: Option<usize>,
}

#[derive(Args, Debug)]
struct TrainFlags {
    #[arg(long)]
    max_steps: Option<usize>,
    #[arg(long)]
    learning_rate: Option<f64>,
    #[arg(long)]
    target_infidelity: Option<f64>,
    #[arg(long)]
    patience: Option<usize>,
    #[arg(long)]
    restarts: Option<usize>,
    #[arg(long)]
    init_scale: Option<f64>,
    #[arg(long)]
    trace_stride: Option<usize>,
}

#[derive(Args, Debug)]
struct EnsembleFlags {
    #[arg(long)]
    realizations: Option<usize>,
    /// Comma-separated site counts.
    #[arg(long, value_delimiter = ',')]
    sizes: Option<Vec<usize>>,
}

#[derive(Args, Debug)]
struct ScalingFlags {
    /// Target ensemble-mean relative energy error.
    #[arg(long)]
    target_error: Option<f64>,
    #[arg(long)]
    min_width: Option<usize>,
    #[arg(long)]
    max_width: Option<usize>,
    /// Comma-separated sizes to extrapolate the preferred fit to.
    #[arg(long, value_delimiter = ',')]
    extrapolate: Option<Vec<usize>>,
}

#[derive(clap::ValueEnum, Clone, Copy, Debug)]
enum ModelArg {
    Qsk,
    Df,
}

#[derive(clap::ValueEnum, Clone, Copy, Debug)]
enum AnsatzArg {
    Mlp,
    Backflow,
}

fn put<T: serde::Serialize>(map: &mut Map<String, Value>, key: &str, value: Option<T>) {
    if let Some(v) = value {
        map.insert(key.to_owned(), json!(v));
    }
}

fn set_flag(map: &mut Map<String, Value>, key: &str, on: bool) {
    if on {
        map.insert(key.to_owned(), Value::Bool(true));
    }
}

impl ModelFlags {
    fn collect(&self, map: &mut Map<String, Value>) {
        put(map, "model", self.model.map(|m| match m {
            ModelArg::Qsk => Model::Qsk,
            ModelArg::Df => Model::Df,
        }));
        put(map, "L", self.sites);
        put(map, "N", self.particles);
        put(map, "h", self.field);
        put(map, "sigma", self.sigma);
        set_flag(map, "interactions_off", self.interactions_off);
        set_flag(map, "couplings_off", self.couplings_off);
        put(map, "disorder", self.disorder.as_ref());
    }
}

impl AnsatzFlags {
    fn collect(&self, map: &mut Map<String, Value>) {
        put(map, "ansatz", self.ansatz.map(|a| match a {
            AnsatzArg::Mlp => AnsatzFamily::Mlp,
            AnsatzArg::Backflow => AnsatzFamily::Backflow,
        }));
        put(map, "alpha", self.alpha);
        put(map, "width", self.width);
    }
}

impl TrainFlags {
    fn collect(&self, map: &mut Map<String, Value>) {
        let mut train = Map::new();
        put(&mut train, "max_steps", self.max_steps);
        put(&mut train, "learning_rate", self.learning_rate);
        put(&mut train, "target_infidelity", self.target_infidelity);
        put(&mut train, "patience", self.patience);
        put(&mut train, "restarts", self.restarts);
        put(&mut train, "init_scale", self.init_scale);
        put(&mut train, "trace_stride", self.trace_stride);
        if !train.is_empty() {
            map.insert("train".into(), Value::Object(train));
        }
    }
}

impl EnsembleFlags {
    fn collect(&self, map: &mut Map<String, Value>) {
        put(map, "realizations", self.realizations);
        put(map, "sizes", self.sizes.as_ref());
    }
}

impl ScalingFlags {
    fn collect(&self, map: &mut Map<String, Value>) {
        put(map, "target_error", self.target_error);
        put(map, "min_width", self.min_width);
        put(map, "max_width", self.max_width);
        put(map, "extrapolate", self.extrapolate.as_ref());
    }
}

fn run(cli: Cli) -> anyhow::Result<()> {
    let mut flags = Map::new();
    put(&mut flags, "out", cli.out.as_ref());
    put(&mut flags, "seed", cli.seed);
    put(&mut flags, "threads", cli.threads);
    let name = match &cli.command {
        Command::Ed { model } => {
            model.collect(&mut flags);
            "ed"
        }
        Command::Learn { model, ansatz, train } => {
            model.collect(&mut flags);
            ansatz.collect(&mut flags);
            train.collect(&mut flags);
            "learn"
        }
        Command::Entropy { model, ensemble } => {
            model.collect(&mut flags);
            ensemble.collect(&mut flags);
            "entropy"
        }
        Command::Scaling { model, ansatz, train, ensemble, scaling } => {
            model.collect(&mut flags);
            ansatz.collect(&mut flags);
            train.collect(&mut flags);
            ensemble.collect(&mut flags);
            scaling.collect(&mut flags);
            "scaling"
        }
        Command::Report { model, ansatz, train, ensemble } => {
            model.collect(&mut flags);
            ansatz.collect(&mut flags);
            train.collect(&mut flags);
            ensemble.collect(&mut flags);
            "report"
        }
    };
    let config = resolve(name, cli.config.as_deref(), flags)?;
    if let Some(n) = config.threads {
        if n == 0 {
            return config::usage("--threads must be at least 1");
        }
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global()?;
    }
    commands::execute(name, &config)
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) if err.downcast_ref::<UsageError>().is_some() => {
            eprintln!("error: {err}");
            ExitCode::from(2)
        }
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::FAILURE
        }
    }
}
