//! The user surface: configuration, the subcommands behind `ri`, and report,
//! CSV, SVG and soup output.

mod config;
mod experiments;
mod report;
mod svg;

use std::path::Path;
use std::time::Instant;

pub use crate::stream::derive_stream;
pub use config::{ExperimentConfig, Relation};
pub use report::{ExperimentReport, Outcome, Table, TruncationEntry, Verdict};
pub use svg::{Plot, Series};

use crate::error::{Error, Result};

pub const SUBCOMMANDS: [&str; 8] =
    ["green", "capacity", "sample-soup", "connectivity", "dimension", "generations", "poisson-checks", "density"];

pub const EXIT_OK: i32 = 0;
pub const EXIT_FAILURE: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_RESOURCE: i32 = 3;
pub const EXIT_CHECK_FAILED: i32 = 4;

/// Runs one subcommand. With `out`, soups are persisted there while the run
/// proceeds and the report, tables and plots are written at the end.
pub fn run(subcommand: &str, cfg: &ExperimentConfig, out: Option<&Path>) -> Result<ExperimentReport> {
    cfg.validate()?;
    let start = Instant::now();
    if let Some(dir) = out {
        std::fs::create_dir_all(dir)?;
    }
    let mut rep = ExperimentReport::new(subcommand, cfg.echo(), cfg.replicas);
    match subcommand {
        "green" => experiments::green(cfg, &mut rep)?,
        "capacity" => experiments::capacity(cfg, &mut rep)?,
        "sample-soup" => experiments::sample_soup(cfg, &mut rep, out)?,
        "connectivity" => experiments::connectivity(cfg, &mut rep)?,
        "dimension" => experiments::dimension(cfg, &mut rep)?,
        "generations" => experiments::generations(cfg, &mut rep, out)?,
        "poisson-checks" => experiments::poisson_checks(cfg, &mut rep)?,
        "density" => experiments::density(cfg, &mut rep)?,
        other => {
            return Err(Error::Config {
                field: "subcommand".into(),
                reason: format!("unknown subcommand `{other}` (one of {})", SUBCOMMANDS.join(", ")),
            })
        }
    }
    rep.wall_clock_seconds = start.elapsed().as_secs_f64();
    if let Some(dir) = out {
        rep.write(dir)?;
    }
    Ok(rep)
}

/// Process exit code for a run: 0 success, 2 configuration error, 3 resource
/// cap (including incomplete reports), 4 failed check, 1 anything else.
pub fn exit_code(result: &Result<ExperimentReport>) -> i32 {
    match result {
        Ok(r) if !r.complete => EXIT_RESOURCE,
        Ok(r) if r.failed() => EXIT_CHECK_FAILED,
        Ok(_) => EXIT_OK,
        Err(
            Error::Config { .. }
            | Error::InvalidParameter { .. }
            | Error::InvalidInterval { .. }
            | Error::UnsupportedDimension(_)
            | Error::UnknownTag(_),
        ) => EXIT_CONFIG,
        Err(Error::ResourceCap(_) | Error::UnsupportedSize { .. } | Error::Runaway { .. }) => EXIT_RESOURCE,
        Err(_) => EXIT_FAILURE,
    }
}

/// Sizes the global worker pool from `threads` and `RI_THREADS` (the smaller
/// nonzero value wins). Later calls have no effect.
pub fn init_threads(cfg: &ExperimentConfig) {
    let env = std::env::var("RI_THREADS").ok().and_then(|v| v.parse::<usize>().ok()).filter(|&n| n > 0);
    let n = match (cfg.threads, env) {
        (0, e) => e,
        (t, Some(e)) => Some(t.min(e)),
        (t, None) => Some(t),
    };
    if let Some(n) = n {
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
}
