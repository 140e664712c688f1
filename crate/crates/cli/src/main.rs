use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use coordinet_cli::{execute, parse_config, Overrides};

/// Run a coordinet experiment described by a configuration file.
#[derive(Parser, Debug)]
#[command(name = "coordinet", version)]
struct Args {
    /// TOML configuration file.
    config: PathBuf,
    /// Output directory (overrides `out_dir`).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker threads, 0 for one per core (overrides `threads`).
    #[arg(long)]
    threads: Option<usize>,
    /// Master seed (overrides `master_seed`).
    #[arg(long)]
    seed: Option<u64>,
}

fn main() -> ExitCode {
    let args = Args::parse();
    let overrides = Overrides {
        out_dir: args.out,
        threads: args.threads,
        master_seed: args.seed,
    };
    let cfg = match parse_config(&args.config, &overrides) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(1);
        }
    };
    if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(cfg.threads).build_global() {
        eprintln!("error: cannot start thread pool: {e}");
        return ExitCode::from(1);
    }
    match execute(&cfg) {
        Ok(out) if out.partial => {
            eprintln!("some cells failed; see {}", cfg.out_dir.join("summary.json").display());
            ExitCode::from(2)
        }
        Ok(_) => {
            println!("{}", cfg.out_dir.display());
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}
