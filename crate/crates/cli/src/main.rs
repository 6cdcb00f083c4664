use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use ainv_cli::commands::{self, AdaptSource, DataKind};
use ainv_cli::{load_config, CliError, Result};

#[derive(Parser, Debug)]
#[command(name = "ainv", version, about = "Adaptive sampling for learned inverse scattering")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug, Clone)]
struct Common {
    /// JSON run configuration; defaults are used for missing keys.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Overrides the configured master seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long)]
    out: PathBuf,
    /// Worker threads (1 gives bit-reproducible runs).
    #[arg(long)]
    threads: Option<usize>,
}

#[derive(ValueEnum, Debug, Clone, Copy)]
enum Kind {
    Base,
    Test,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Sample the prior and forward-solve a dataset.
    GenData {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_enum, default_value = "base")]
        kind: Kind,
        /// Number of samples (default from the config).
        #[arg(long)]
        count: Option<usize>,
    },
    /// Train the base model on a `gen-data --kind base` directory.
    TrainBase {
        #[command(flatten)]
        common: Common,
        dataset: PathBuf,
    },
    /// Adapt a trained model to one observed measurement.
    Adapt {
        #[command(flatten)]
        common: Common,
        model: PathBuf,
        base_dataset: PathBuf,
        #[arg(long, group = "source")]
        measurement: Option<PathBuf>,
        #[arg(long, group = "source")]
        truth_field: Option<PathBuf>,
        /// Test dataset directory; use with --instance.
        #[arg(long, group = "source")]
        test: Option<PathBuf>,
        #[arg(long, default_value_t = 0)]
        instance: usize,
    },
    /// Non-adaptive data-scaling sweep.
    Baseline {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_delimiter = ',', default_value = "100,400,1600")]
        sizes: Vec<usize>,
    },
    /// Scaling fit, efficiency factors and plots from run directories.
    Analyze {
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        threads: Option<usize>,
        #[arg(required = true)]
        run_dirs: Vec<PathBuf>,
    },
    /// Single forward solve of a stored field.
    Forward {
        #[command(flatten)]
        common: Common,
        field: PathBuf,
    },
}

fn init_threads(n: Option<usize>) -> Result<()> {
    if let Some(n) = n {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::Usage(format!("cannot configure {n} threads: {e}")))?;
    }
    Ok(())
}

fn run(cli: Cli, args: Vec<String>) -> Result<()> {
    let setup = |c: &Common| -> Result<_> {
        init_threads(c.threads)?;
        load_config(c.config.as_deref(), c.seed)
    };
    let manifest = match cli.command {
        Command::GenData { common, kind, count } => {
            let cfg = setup(&common)?;
            let kind = match kind {
                Kind::Base => DataKind::Base,
                Kind::Test => DataKind::Test,
            };
            commands::gen_data(&cfg, kind, count, &common.out, args)?
        }
        Command::TrainBase { common, dataset } => commands::train_base(&setup(&common)?, &dataset, &common.out, args)?,
        Command::Adapt { common, model, base_dataset, measurement, truth_field, test, instance } => {
            let cfg = setup(&common)?;
            let source = match (measurement, truth_field, test) {
                (Some(m), None, None) => AdaptSource::Measurement(m),
                (None, Some(f), None) => AdaptSource::TruthField(f),
                (None, None, Some(dir)) => AdaptSource::Test { dir, index: instance },
                _ => return Err(CliError::Usage("give one of --measurement, --truth-field or --test".into())),
            };
            commands::adapt(&cfg, &model, &base_dataset, source, &common.out, args)?
        }
        Command::Baseline { common, sizes } => commands::baseline(&setup(&common)?, &sizes, &common.out, args)?,
        Command::Analyze { out, threads, run_dirs } => {
            init_threads(threads)?;
            commands::analyze(&run_dirs, &out, args)?
        }
        Command::Forward { common, field } => commands::forward(&setup(&common)?, &field, &common.out, args)?,
    };
    log::info!("wrote {} files", manifest.files.len() + 1);
    Ok(())
}

/// Arguments recorded in the manifest: everything except the output path.
fn recorded_args() -> Vec<String> {
    let mut out = Vec::new();
    let mut it = std::env::args().skip(1);
    while let Some(a) = it.next() {
        if a == "--out" {
            it.next();
        } else if !a.starts_with("--out=") {
            out.push(a);
        }
    }
    out
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("AINV_LOG", "warn")).init();
    let cli = Cli::parse();
    match run(cli, recorded_args()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{}", e.to_line());
            ExitCode::FAILURE
        }
    }
}
