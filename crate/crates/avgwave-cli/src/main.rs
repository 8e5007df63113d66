//! Command-line front end: reads a key=value config, runs one canned
//! experiment, and writes `results.csv` plus `summary.json` to the output
//! directory. Exit codes: 0 success, 2 configuration error, 3 numerical
//! warning in strict mode, 4 I/O error.

mod config;
mod experiments;

use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use avgwave::report::{to_csv, RunSummary};
use clap::Parser;

use config::RunConfig;

#[derive(Parser, Debug)]
#[command(name = "avgwave", about = "Numerical experiments for the averaged wave function")]
struct Cli {
    /// Path to the key=value experiment configuration.
    #[arg(long)]
    config: PathBuf,

    /// Override the master seed from the config.
    #[arg(long)]
    seed: Option<u64>,

    /// Worker threads for path and field ensembles (default: all cores).
    #[arg(long)]
    workers: Option<usize>,

    /// Output directory for results.csv and summary.json.
    #[arg(long, default_value = ".")]
    out: PathBuf,
}

fn write_outputs(out_dir: &PathBuf, summary: &RunSummary) -> std::io::Result<()> {
    fs::create_dir_all(out_dir)?;
    fs::write(out_dir.join("results.csv"), to_csv(&summary.rows))?;
    let json = serde_json::to_string_pretty(summary).map_err(std::io::Error::other)?;
    fs::write(out_dir.join("summary.json"), json)?;
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();

    if let Some(workers) = cli.workers {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(workers).build_global() {
            eprintln!("error: failed to configure {workers} workers: {e}");
            return ExitCode::from(2);
        }
    }

    let text = match fs::read_to_string(&cli.config) {
        Ok(t) => t,
        Err(e) => {
            eprintln!("error: cannot read {}: {e}", cli.config.display());
            return ExitCode::from(4);
        }
    };

    let mut cfg = match RunConfig::parse(&text) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("config error: {e}");
            return ExitCode::from(2);
        }
    };
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    let violations = cfg.validate();
    if !violations.is_empty() {
        for v in &violations {
            eprintln!("config error: {v}");
        }
        return ExitCode::from(2);
    }
    if cfg.t > 0.5 {
        eprintln!(
            "advisory: t = {} is outside the small-time regime; limit-route \
             comparisons may need larger ensembles",
            cfg.t
        );
    }

    let start = Instant::now();
    let outcome = match experiments::run(&cfg) {
        Ok(o) => o,
        Err(e) => {
            eprintln!("config error: {e}");
            return ExitCode::from(2);
        }
    };
    let summary = experiments::summarize(&cfg, outcome, start.elapsed().as_secs_f64());

    for v in &summary.verdicts {
        let status = if v.pass { "pass" } else { "FAIL" };
        println!("{status}  {}  {}", v.name, v.detail);
    }
    if summary.variance_flagged {
        eprintln!("warning: an ensemble tripped the sample-spread check; estimates may be unreliable");
    }

    if let Err(e) = write_outputs(&cli.out, &summary) {
        eprintln!("error: cannot write outputs to {}: {e}", cli.out.display());
        return ExitCode::from(4);
    }
    println!(
        "{}: {} rows, {} verdicts, {:.2}s -> {}",
        cfg.experiment.tag(),
        summary.rows.len(),
        summary.verdicts.len(),
        summary.wall_seconds,
        cli.out.display()
    );

    if summary.variance_flagged && cfg.strict {
        return ExitCode::from(3);
    }
    ExitCode::SUCCESS
}
