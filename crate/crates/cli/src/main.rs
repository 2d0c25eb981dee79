use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use gpdr::experiment::{
    export_expressions, run_experiment_with, summarize, validate_data, Criterion, ExperimentConfig, Method, ResultStore,
};

#[derive(Parser)]
#[command(name = "gpdr", version, about = "Interpretable dimensionality reduction with multi-tree genetic programming")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run (or resume) a method × k × run sweep.
    Run(RunArgs),
    /// Print mean ± std tables with significance markers.
    Summarize {
        /// Sweep output directory.
        #[arg(long, short)]
        output: PathBuf,
        /// Emit the summary as JSON instead of Markdown.
        #[arg(long)]
        json: bool,
    },
    /// Print the expressions of the best run of one method and k.
    ExportExpr {
        #[arg(long, short)]
        output: PathBuf,
        #[arg(long)]
        method: Method,
        #[arg(long)]
        k: usize,
        /// `best_reconstruction` or `best_accuracy`.
        #[arg(long, default_value = "best_reconstruction")]
        criterion: Criterion,
    },
    /// Load a dataset and report its shape and classes without running anything.
    ValidateData(DataArgs),
}

#[derive(Args)]
struct DataArgs {
    /// TOML experiment configuration.
    #[arg(long, short)]
    config: Option<PathBuf>,
    /// CSV file with a header row.
    #[arg(long)]
    dataset: Option<PathBuf>,
    /// Label column name or index; empty for none.
    #[arg(long)]
    label: Option<String>,
}

#[derive(Args)]
struct RunArgs {
    #[command(flatten)]
    data: DataArgs,
    /// Comma-separated methods, e.g. `pca,mt_rank_geodesic`.
    #[arg(long, value_delimiter = ',')]
    methods: Option<Vec<Method>>,
    /// Comma-separated latent sizes.
    #[arg(long, value_delimiter = ',')]
    k: Option<Vec<usize>>,
    #[arg(long)]
    runs: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, short)]
    output: Option<PathBuf>,
    /// Population 200, 30 generations, batches of 100, 10 runs.
    #[arg(long)]
    desk_scale: bool,
    #[arg(long)]
    population: Option<usize>,
    #[arg(long)]
    generations: Option<usize>,
    #[arg(long)]
    batch_size: Option<usize>,
    /// Suppress per-run progress lines.
    #[arg(long, short)]
    quiet: bool,
}

fn base_config(args: &DataArgs) -> gpdr::Result<ExperimentConfig> {
    let mut cfg = match &args.config {
        Some(path) => ExperimentConfig::load(path)?,
        None => ExperimentConfig::default(),
    };
    if let Some(d) = &args.dataset {
        cfg.dataset = d.clone();
    }
    if let Some(l) = &args.label {
        cfg.label_column = l.clone();
    }
    if cfg.dataset.as_os_str().is_empty() {
        return Err(gpdr::Error::Config("no dataset given (use --dataset or a config file)".into()));
    }
    Ok(cfg)
}

fn run_config(args: &RunArgs) -> gpdr::Result<ExperimentConfig> {
    let mut cfg = base_config(&args.data)?;
    if args.desk_scale {
        cfg = cfg.desk_scale();
    }
    if let Some(m) = &args.methods {
        cfg.methods = m.clone();
    }
    if let Some(k) = &args.k {
        cfg.k = k.clone();
    }
    if let Some(v) = args.runs {
        cfg.runs = v;
    }
    if let Some(v) = args.seed {
        cfg.seed = v;
    }
    if let Some(v) = &args.output {
        cfg.output = v.clone();
    }
    if let Some(v) = args.population {
        cfg.gp.population = v;
    }
    if let Some(v) = args.generations {
        cfg.gp.generations = v;
    }
    if let Some(v) = args.batch_size {
        cfg.gp.batch_size = v;
    }
    Ok(cfg)
}

fn execute(cli: Cli) -> gpdr::Result<()> {
    match cli.command {
        Command::Run(args) => {
            let cfg = run_config(&args)?;
            cfg.validate()?;
            std::fs::create_dir_all(&cfg.output)?;
            std::fs::write(cfg.output.join("config.toml"), cfg.to_toml())?;
            let quiet = args.quiet;
            let store = run_experiment_with(&cfg, |r| {
                if quiet {
                    return;
                }
                match &r.error {
                    None => eprintln!(
                        "{} k={} run={}: accuracy {:.3}, reconstruction {:.3} ({:.1}s)",
                        r.method,
                        r.k,
                        r.run,
                        r.balanced_accuracy.unwrap_or(f64::NAN),
                        r.reconstruction_error.unwrap_or(f64::NAN),
                        r.timing.total_secs
                    ),
                    Some(e) => eprintln!("{} k={} run={}: failed: {e}", r.method, r.k, r.run),
                }
            })?;
            let failed = store.failures().count();
            if failed > 0 {
                eprintln!("{failed} of {} runs failed; they are left out of the summary", store.records.len());
            }
            print!("{}", summarize(&store)?.to_markdown());
        }
        Command::Summarize { output, json } => {
            let summary = summarize(&ResultStore::load(&output)?)?;
            if json {
                println!("{}", serde_json::to_string_pretty(&summary)?);
            } else {
                print!("{}", summary.to_markdown());
            }
        }
        Command::ExportExpr {
            output,
            method,
            k,
            criterion,
        } => {
            print!("{}", export_expressions(&ResultStore::load(&output)?, method, k, criterion)?);
        }
        Command::ValidateData(args) => {
            print!("{}", validate_data(&base_config(&args)?)?);
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match execute(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
