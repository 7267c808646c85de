use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use otoc_cli::{clean_cache, default_cache_dir, execute_plan, load_plan, load_report, report, CliError, RunOptions};

#[derive(Parser)]
#[command(name = "otoc", version, about = "Run OTOC scaling experiments from plan files")]
struct Cli {
    /// Spectral cache directory.
    #[arg(long, global = true, env = "OTOC_CACHE_DIR")]
    cache_dir: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Execute a plan and write its artifacts.
    Run {
        plan: PathBuf,
        /// Worker threads (default: all cores).
        #[arg(long, env = "OTOC_THREADS")]
        threads: Option<usize>,
        /// Write artifacts here instead of the plan's output_dir.
        #[arg(long)]
        output_dir: Option<PathBuf>,
        /// Neither read nor write the on-disk cache.
        #[arg(long)]
        no_cache: bool,
    },
    /// Parse and check a plan without running it.
    Validate { plan: PathBuf },
    /// Print the fit results recorded by a manifest.
    Report { manifest: PathBuf },
    /// Delete all cached decompositions.
    CleanCache,
}

fn run(cli: Cli) -> Result<i32, CliError> {
    let cache_dir = cli.cache_dir.unwrap_or_else(default_cache_dir);
    match cli.command {
        Command::Run {
            plan,
            threads,
            output_dir,
            no_cache,
        } => {
            let opts = RunOptions {
                cache_dir: (!no_cache).then_some(cache_dir),
                threads,
                output_dir,
            };
            let outcome = execute_plan(&plan, &opts)?;
            print!("{}", report::render(&outcome.manifest, &outcome.report));
            println!("manifest: {}", outcome.manifest_path.display());
            Ok(outcome.manifest.exit_code)
        }
        Command::Validate { plan } => {
            let loaded = load_plan(&plan)?;
            let p = &loaded.plan;
            let tasks = p.sizes().len() * p.temperatures().len() * p.lambdas().len() * p.separations().len();
            println!("{}: valid {:?} plan, {} series tasks", plan.display(), p.kind, tasks);
            let budget = p.budgets.dense();
            for l in p.sizes() {
                if let Err(e) = budget.check(&p.model.instantiate(l, 0.0).basis()) {
                    println!("  L = {l} will be skipped: {e}");
                }
            }
            Ok(0)
        }
        Command::Report { manifest } => {
            let (m, r) = load_report(&manifest)?;
            print!("{}", report::render(&m, &r));
            Ok(0)
        }
        Command::CleanCache => {
            let n = clean_cache(&cache_dir).map_err(|e| CliError::io(&cache_dir, e))?;
            println!("removed {n} files from {}", cache_dir.display());
            Ok(0)
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(Cli::parse()) {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
