use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use fraccalderon::config::{ExperimentConfig, Pipeline};
use fraccalderon::{pipeline, Error};

/// Fractional Calderon lab: run a configured experiment pipeline.
#[derive(Parser)]
#[command(name = "fraccalderon", version)]
struct Cli {
    pipeline: Pipeline,
    #[arg(long)]
    config: PathBuf,
    /// override a config field, `dotted.key=json-value`
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(n) = std::env::var("FRACCALDERON_THREADS").ok().and_then(|v| v.parse::<usize>().ok()) {
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n.max(1)).build_global();
    }
    let cfg = match ExperimentConfig::load(&cli.config, &cli.set) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("CONFIG_INVALID: {e}");
            return ExitCode::from(2);
        }
    };
    match pipeline::run(cli.pipeline, &cfg) {
        Ok(m) => {
            for w in &m.warnings {
                eprintln!("warning: {w}");
            }
            for g in &m.gates {
                println!(
                    "{} {}: {:.3e} (threshold {:.3e})",
                    if g.pass { "PASS" } else { "FAIL" },
                    g.name,
                    g.value,
                    g.threshold
                );
            }
            if m.passed() {
                ExitCode::SUCCESS
            } else {
                eprintln!("GATE_FAIL");
                ExitCode::from(1)
            }
        }
        Err(Error::ConfigInvalid(e)) => {
            eprintln!("CONFIG_INVALID: {e}");
            ExitCode::from(2)
        }
        Err(e) => {
            eprintln!("GATE_FAIL: {e}");
            ExitCode::from(1)
        }
    }
}
