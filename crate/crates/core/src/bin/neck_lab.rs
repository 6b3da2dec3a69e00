use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use necklab::cli::{run, write_outputs, Overrides, Report, Suite, SuiteConfig, OUT_ENV};
use necklab::LabError;

const EXIT_FAIL: u8 = 1;
const EXIT_USAGE: u8 = 2;
const EXIT_IO: u8 = 3;

/// Runs a verification suite and writes report.json plus CSV plot data.
#[derive(Debug, Parser)]
#[command(name = "neck-lab", version)]
struct Args {
    /// curvature, cones4d, warped, bryant, heat, lichnerowicz, cmc, symmetry or all
    suite: Option<String>,
    /// dimension (4 to 7)
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// largest window of the L ladder
    #[arg(long = "L", value_name = "L")]
    l: Option<f64>,
    /// output directory (NECK_LAB_OUT takes precedence)
    #[arg(long)]
    out: Option<PathBuf>,
    /// worker threads, 0 for all cores
    #[arg(long)]
    jobs: Option<usize>,
    /// multiplies every tolerance
    #[arg(long)]
    tol_scale: Option<f64>,
    /// JSON config; flags override its values
    #[arg(long)]
    config: Option<PathBuf>,
}

fn print_table(report: &Report) -> std::io::Result<()> {
    let mut out = std::io::stdout().lock();
    writeln!(out, "{:<4} {:<40} {:<5} {:>13} {:>13} {:>10}", "crit", "case", "", "measured", "expected", "tol")?;
    for c in &report.cases {
        let status = if c.passed() { "ok" } else { "FAIL" };
        writeln!(
            out,
            "{:<4} {:<40} {:<5} {:>13.6e} {:>13.6e} {:>10.2e}",
            c.criterion, c.name, status, c.measured, c.expected, c.tolerance
        )?;
        if let Some(e) = &c.error {
            writeln!(out, "     error: {e}")?;
        }
    }
    writeln!(out, "{}: {} passed, {} failed", report.suite, report.passed, report.failed)
}

fn main() -> ExitCode {
    let args = match Args::try_parse() {
        Ok(a) => a,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let config_json = match &args.config {
        Some(path) => match std::fs::read_to_string(path) {
            Ok(s) => Some(s),
            Err(e) => {
                eprintln!("neck-lab: cannot read config {}: {e}", path.display());
                return ExitCode::from(EXIT_USAGE);
            }
        },
        None => None,
    };
    let suite = match args.suite.as_deref().map(str::parse::<Suite>).transpose() {
        Ok(s) => s,
        Err(e) => {
            eprintln!("neck-lab: {e}");
            return ExitCode::from(EXIT_USAGE);
        }
    };
    if suite.is_none() && config_json.is_none() {
        eprintln!("neck-lab: name a suite or pass --config");
        return ExitCode::from(EXIT_USAGE);
    }
    let flags = Overrides {
        suite,
        n: args.n,
        seed: args.seed,
        l: args.l,
        out: args.out,
        jobs: args.jobs,
        tol_scale: args.tol_scale,
    };
    let env_out = std::env::var(OUT_ENV).ok();
    let cfg = match SuiteConfig::resolve(config_json.as_deref(), &flags, env_out.as_deref()) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("neck-lab: {e}");
            return ExitCode::from(EXIT_USAGE);
        }
    };
    let outcome = match run(&cfg) {
        Ok(o) => o,
        Err(e) => {
            eprintln!("neck-lab: {e}");
            return ExitCode::from(EXIT_USAGE);
        }
    };
    // a closed stdout (e.g. a pipe into head) must not stop the outputs being written
    let _ = print_table(&outcome.report);
    match write_outputs(&outcome, &cfg.out) {
        Ok(paths) => {
            let _ = writeln!(std::io::stdout(), "wrote {} files to {}", paths.len(), cfg.out.display());
        }
        Err(LabError::Io(e)) => {
            eprintln!("neck-lab: writing {}: {e}", cfg.out.display());
            return ExitCode::from(EXIT_IO);
        }
        Err(e) => {
            eprintln!("neck-lab: {e}");
            return ExitCode::from(EXIT_IO);
        }
    }
    if outcome.report.ok() {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(EXIT_FAIL)
    }
}
