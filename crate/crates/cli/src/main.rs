use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use ri_core::harness::{exit_code, init_threads, run, ExperimentConfig, Outcome, EXIT_CONFIG, SUBCOMMANDS};
use ri_core::Error;

/// Random interlacement laboratory.
#[derive(Parser, Debug)]
#[command(name = "ri", version, about)]
struct Cli {
    /// One of: green, capacity, sample-soup, connectivity, dimension,
    /// generations, poisson-checks, density.
    #[arg(value_parser = clap::builder::PossibleValuesParser::new(SUBCOMMANDS))]
    subcommand: String,
    /// Flat `key = value` configuration file.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Master seed (overrides the file).
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory for report.json, CSV tables, SVG plots and soups.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Further `key=value` overrides.
    overrides: Vec<String>,
}

fn parse_overrides(cli: &Cli) -> Result<Vec<(String, String)>, Error> {
    let mut out = Vec::new();
    for kv in &cli.overrides {
        let (k, v) = kv
            .split_once('=')
            .ok_or_else(|| Error::Config { field: kv.clone(), reason: "expected key=value".into() })?;
        out.push((k.trim().to_string(), v.trim().to_string()));
    }
    if let Some(s) = cli.seed {
        out.push(("seed".into(), s.to_string()));
    }
    Ok(out)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let cfg = parse_overrides(&cli).and_then(|o| match &cli.config {
        Some(path) => ExperimentConfig::load(path, &o),
        None => ExperimentConfig::parse("", &o),
    });
    let cfg = match cfg {
        Ok(c) => c,
        Err(e) => {
            eprintln!("ri: {e}");
            return ExitCode::from(EXIT_CONFIG as u8);
        }
    };
    init_threads(&cfg);
    let result = run(&cli.subcommand, &cfg, cli.out.as_deref());
    match &result {
        Ok(rep) => {
            for v in &rep.verdicts {
                let tag = match v.outcome {
                    Outcome::Pass => "pass",
                    Outcome::Fail => "FAIL",
                    Outcome::Inconclusive => "inconclusive",
                };
                println!("{tag:>12}  {}: {}", v.check, v.detail);
            }
            for n in &rep.notes {
                println!("        note  {n}");
            }
            if !rep.complete {
                println!("  incomplete  a resource cap cut the run short");
            }
            if cli.out.is_none() {
                println!("(no --out given; nothing written)");
            }
        }
        Err(e) => eprintln!("ri: {e}"),
    }
    ExitCode::from(exit_code(&result) as u8)
}
