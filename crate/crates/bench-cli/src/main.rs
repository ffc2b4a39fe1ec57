use clap::{Parser, Subcommand};
use isir_bench::commands::{cmd_adaptive, cmd_discrete, cmd_grid, cmd_ingest_wdbc, cmd_pilot};
use isir_bench::config::Options;

#[derive(Parser)]
#[command(
    name = "isir-bench",
    version,
    about = "i-SIR experiments from the command line"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Exact or Monte Carlo analysis of a finite model
    Discrete(Options),
    /// Time fixed-N runs and fit c(λ) = a + bλ
    Pilot(Options),
    /// Run the adaptive sampler
    Adaptive(Options),
    /// Fixed-N runs with IACT and IRE per N
    Grid(Options),
    /// Validate the WDBC file and fit the Laplace approximation
    IngestWdbc(Options),
}

fn main() {
    let cli = Cli::parse();
    let (opts, run): (&Options, fn(&Options) -> anyhow::Result<Vec<String>>) = match &cli.command {
        Command::Discrete(o) => (o, cmd_discrete),
        Command::Pilot(o) => (o, cmd_pilot),
        Command::Adaptive(o) => (o, cmd_adaptive),
        Command::Grid(o) => (o, cmd_grid),
        Command::IngestWdbc(o) => (o, cmd_ingest_wdbc),
    };
    let workers = opts.workers.or_else(|| {
        opts.config
            .as_ref()
            .and_then(|p| Options::load(p).ok()?.workers)
    });
    if let Some(n) = workers {
        if let Err(e) = rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
        {
            eprintln!("error: could not start {n} workers: {e}");
            std::process::exit(2);
        }
    }
    match run(opts) {
        Ok(lines) => lines.iter().for_each(|l| println!("{l}")),
        Err(e) => {
            eprintln!("error: {e:#}");
            std::process::exit(1);
        }
    }
}
