use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use lais_cli::aggregate::{aggregate, PRef};
use lais_cli::config::{resolve_output, ExperimentConfig, Overrides};
use lais_cli::error::{CliResult, EXIT_CONFIG};
use lais_cli::records::{read_estimate_rows_from_path, write_rows, write_rows_to_path};
use lais_cli::runner::{cmd_cache_kl, cmd_estimate, cmd_ldt_solve};

#[derive(Parser)]
#[command(
    name = "lais",
    version,
    about = "Rare-event estimation with LDT-informed adaptive importance sampling"
)]
struct Cli {
    /// Worker threads; defaults to the number of cores.
    #[arg(long, global = true, env = "LAIS_THREADS")]
    threads: Option<usize>,

    /// Log progress to stderr (-v info, -vv debug).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve the rate-function minimization, build the subspace and write
    /// the artifact.
    LdtSolve {
        #[arg(long)]
        config: PathBuf,
        #[command(flatten)]
        overrides: Overrides,
    },
    /// Run an estimator ensemble and write one CSV row per run and level.
    Estimate {
        #[arg(long)]
        config: PathBuf,
        #[command(flatten)]
        overrides: Overrides,
    },
    /// Summarize estimate CSVs: CV, RRMSE and bias z-score per group.
    Aggregate {
        #[arg(required = true)]
        inputs: Vec<PathBuf>,
        /// `oracle`, `lsis-reference` or a number.
        #[arg(long)]
        p_ref: String,
        /// Summary CSV; standard output when omitted.
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Precompute the KL field of a diffusion config.
    CacheKl {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        output: Option<PathBuf>,
    },
}

fn load(path: &Path, overrides: &Overrides) -> CliResult<ExperimentConfig> {
    let mut cfg = ExperimentConfig::load(path)?;
    cfg.apply(overrides)?;
    Ok(cfg)
}

fn run(cli: Cli) -> CliResult<()> {
    match cli.command {
        Command::LdtSolve { config, overrides } => {
            let cfg = load(&config, &overrides)?;
            print!("{}", cmd_ldt_solve(&cfg)?);
        }
        Command::Estimate { config, overrides } => {
            let cfg = load(&config, &overrides)?;
            let rows = cmd_estimate(&cfg)?;
            let path = cfg.csv_path();
            write_rows_to_path(&path, &rows)?;
            log::info!("{} rows written to {}", rows.len(), path.display());
        }
        Command::Aggregate {
            inputs,
            p_ref,
            output,
        } => {
            let p_ref: PRef = p_ref.parse()?;
            let mut rows = Vec::new();
            for p in &inputs {
                rows.extend(read_estimate_rows_from_path(p)?);
            }
            let summary = aggregate(&rows, p_ref)?;
            match output {
                Some(p) => write_rows_to_path(&resolve_output(&p), &summary)?,
                None => write_rows(std::io::stdout().lock(), &summary)?,
            }
        }
        Command::CacheKl { config, output } => {
            let cfg = load(&config, &Overrides::default())?;
            let path = cmd_cache_kl(&cfg, output.as_deref())?;
            println!("KL field written to {}", path.display());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    if let Some(t) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new()
            .num_threads(t)
            .build_global()
        {
            eprintln!("error: thread pool: {e}");
            return ExitCode::from(EXIT_CONFIG as u8);
        }
    }
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
