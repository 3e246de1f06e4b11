use std::collections::BTreeSet;
use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Duration;

use anyhow::{Context, Result};
use castlint_core::detect::BugKind;
use castlint_core::scan::{load_check_overlay, load_trait_overlay, Dumps};
use castlint_core::{render_report, run_scan, ArchWidth, Format, ScanConfig};
use clap::{Parser, ValueEnum};

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Arch {
    #[value(name = "32")]
    Bits32,
    #[value(name = "64")]
    Bits64,
    Both,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum OutputFormat {
    Text,
    Json,
}

/// Detects misalignment, inconsistent-layout and mismatched-scope bugs in
/// pointer conversions of JSON-encoded packages.
#[derive(Debug, Parser)]
#[command(name = "castlint", version)]
struct Args {
    /// IR document or directory of `*.json` documents (repeatable)
    #[arg(long = "input", value_name = "PATH", required = true)]
    inputs: Vec<PathBuf>,

    /// Comma-separated detectors to run
    #[arg(long, value_delimiter = ',', default_value = "I,II,III")]
    detectors: Vec<BugKind>,

    #[arg(long, value_enum, default_value = "both")]
    arch: Arch,

    /// Disable caller, callee and constructor analysis
    #[arg(long)]
    no_interprocedural: bool,

    #[arg(long, default_value_t = 1, value_parser = clap::value_parser!(u32).range(1..))]
    jobs: u32,

    /// Per-package time limit in seconds
    #[arg(long, default_value_t = 120.0)]
    timeout: f64,

    #[arg(long, value_enum, default_value = "text")]
    format: OutputFormat,

    /// Write each function's alias graph in DOT form to stderr
    #[arg(long)]
    dump_alias_dot: bool,

    /// Write each package's property graph as JSON to stderr
    #[arg(long)]
    dump_property_graph: bool,

    /// JSON array of extra trait definitions
    #[arg(long, value_name = "PATH")]
    trait_overlay: Option<PathBuf>,

    /// JSON map of extra developer-check patterns
    #[arg(long, value_name = "PATH")]
    suppression_overlay: Option<PathBuf>,
}

fn config(args: &Args) -> Result<ScanConfig> {
    anyhow::ensure!(args.timeout.is_finite() && args.timeout > 0.0, "--timeout must be positive");
    let arches = match args.arch {
        Arch::Bits32 => vec![ArchWidth::Bits32],
        Arch::Bits64 => vec![ArchWidth::Bits64],
        Arch::Both => ArchWidth::ALL.to_vec(),
    };
    let trait_overlay = match &args.trait_overlay {
        Some(p) => load_trait_overlay(p)?,
        None => Vec::new(),
    };
    let check_overlay = args.suppression_overlay.as_deref().map(load_check_overlay).transpose()?;
    Ok(ScanConfig {
        inputs: args.inputs.clone(),
        detectors: args.detectors.iter().copied().collect::<BTreeSet<_>>(),
        arches,
        interprocedural: !args.no_interprocedural,
        jobs: args.jobs as usize,
        timeout: Duration::from_secs_f64(args.timeout),
        dumps: Dumps { alias_dot: args.dump_alias_dot, property_graph: args.dump_property_graph },
        trait_overlay,
        check_overlay,
    })
}

fn run(args: Args) -> Result<i32> {
    let cfg = config(&args)?;
    let summary = run_scan(&cfg).context("scan failed")?;
    let mut stderr = std::io::stderr().lock();
    for p in &summary.packages {
        if let Some(dot) = &p.alias_dot {
            stderr.write_all(dot.as_bytes())?;
        }
        if let Some(pg) = &p.property_graph {
            writeln!(stderr, "{pg}")?;
        }
    }
    let format = match args.format {
        OutputFormat::Text => Format::Text,
        OutputFormat::Json => Format::Json,
    };
    let mut stdout = std::io::stdout().lock();
    stdout.write_all(render_report(&summary, format).as_bytes())?;
    stdout.flush()?;
    Ok(summary.exit_code())
}

fn main() -> ExitCode {
    let args = Args::parse();
    match run(args) {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("castlint: {e:#}");
            ExitCode::from(2)
        }
    }
}
