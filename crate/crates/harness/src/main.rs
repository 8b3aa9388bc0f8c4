use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use tangent_align_harness::config::{read_config, ParsedConfig};
use tangent_align_harness::run_replicas;

#[derive(Parser)]
#[command(name = "tangent-align", version, about = "Run tangent kernel alignment experiments")]
struct Cli {
    /// Override the config seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Override the output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Worker threads for seed replicas.
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the experiment described by a config file.
    Run { config: PathBuf },
    /// Check a config file without running it.
    Validate { config: PathBuf },
}

fn load(cli: &Cli, path: &Path) -> Result<ParsedConfig, ExitCode> {
    let mut parsed = read_config(path).map_err(|e| {
        eprintln!("cannot read {}: {e}", path.display());
        ExitCode::from(1)
    })?;
    if let Some(seed) = cli.seed {
        parsed.config.seed = seed;
    }
    if let Some(out) = &cli.out {
        parsed.config.out_dir = out.clone();
    }
    if let Some(threads) = cli.threads {
        parsed.config.threads = threads;
    }
    if parsed.issues.is_empty() {
        parsed.issues = parsed.config.check();
    }
    Ok(parsed)
}

fn report_issues(parsed: &ParsedConfig) {
    for issue in &parsed.issues {
        eprintln!("{issue}");
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match &cli.command {
        Command::Validate { config } => {
            let parsed = match load(&cli, config) {
                Ok(p) => p,
                Err(code) => return code,
            };
            if parsed.is_valid() {
                println!("{}: valid ({})", config.display(), parsed.config.kind.name());
                ExitCode::SUCCESS
            } else {
                report_issues(&parsed);
                ExitCode::from(1)
            }
        }
        Command::Run { config } => {
            let parsed = match load(&cli, config) {
                Ok(p) => p,
                Err(code) => return code,
            };
            if !parsed.is_valid() {
                report_issues(&parsed);
                return ExitCode::from(1);
            }
            let mut worst = 0;
            for (dir, result) in run_replicas(&parsed.config) {
                match result {
                    Ok(_) => println!("{}: done", dir.display()),
                    Err(e) => {
                        eprintln!("{}: {e}", dir.display());
                        worst = worst.max(e.exit_code());
                    }
                }
            }
            ExitCode::from(worst as u8)
        }
    }
}
