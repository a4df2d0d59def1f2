use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use qrn_cli::app;
use qrn_cli::config::{template, Kind};
use qrn_cli::exit;

#[derive(Parser)]
#[command(name = "qrn", version, about = "Run quantum real number experiments and emit check reports")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Collimation through a slit: spread, width-product, persistence and projection bounds.
    Slit(ExperimentArgs),
    /// Relative frequencies of a dichotomic experiment and the average-operator spectrum.
    Born(ExperimentArgs),
    /// Lüders updates: persistence and commuting sequential measurements.
    Luders(ExperimentArgs),
    /// Pointer registration for single-slit and two-slit particle regions.
    Pointer(ExperimentArgs),
    /// Ehrenfest windows and their coverage for a force law.
    Ehrenfest(ExperimentArgs),
    /// Quantum expectation trajectories against Newtonian ones.
    Evolve(ExperimentArgs),
    /// The scalar sharpening equation against its closed form.
    Collapse(ExperimentArgs),
    /// Runs the full acceptance suite twice and checks the bodies agree.
    Selftest(SelftestArgs),
    /// Prints a commented config file with every key of one experiment.
    Template { kind: Kind },
}

#[derive(Args)]
struct ExperimentArgs {
    /// Flat `key = value` config file.
    #[arg(short, long)]
    config: Option<PathBuf>,
    /// Overrides one config key; repeatable.
    #[arg(short = 's', long = "set", value_name = "KEY=VALUE", value_parser = parse_assignment)]
    set: Vec<(String, String)>,
    #[arg(long)]
    seed: Option<u64>,
    /// Report path; stdout when absent.
    #[arg(short, long)]
    out: Option<PathBuf>,
    #[arg(short, long, value_parser = ["csv", "json"])]
    format: Option<String>,
}

#[derive(Args)]
struct SelftestArgs {
    #[arg(long, default_value_t = qrn_core::suite::DEFAULT_SEED)]
    seed: u64,
    /// Subset of criteria, e.g. `1,3,6-8`.
    #[arg(long)]
    only: Option<String>,
    #[arg(short, long)]
    out: Option<PathBuf>,
    #[arg(short, long, value_parser = ["csv", "json"], default_value = "csv")]
    format: String,
}

fn parse_assignment(s: &str) -> Result<(String, String), String> {
    let (k, v) = s.split_once('=').ok_or_else(|| format!("expected KEY=VALUE, got {s:?}"))?;
    Ok((k.trim().to_string(), v.trim().to_string()))
}

fn config_error(e: impl std::fmt::Display) -> ExitCode {
    eprintln!("qrn: config error: {e}");
    ExitCode::from(exit::CONFIG_ERROR)
}

fn write_output(path: Option<&str>, text: &str) -> Result<(), String> {
    match path {
        Some(p) => std::fs::write(p, text).map_err(|e| format!("cannot write {p}: {e}")),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn status(passed: bool) -> ExitCode {
    ExitCode::from(if passed { exit::PASS } else { exit::CHECK_FAILED })
}

fn run_kind(kind: Kind, args: ExperimentArgs) -> ExitCode {
    let start = Instant::now();
    let text = match &args.config {
        Some(path) => match std::fs::read_to_string(path) {
            Ok(t) => Some(t),
            Err(e) => return config_error(format!("cannot read {}: {e}", path.display())),
        },
        None => None,
    };
    let mut overrides = args.set;
    if let Some(seed) = args.seed {
        overrides.push(("seed".into(), seed.to_string()));
    }
    if let Some(out) = args.out {
        overrides.push(("output".into(), out.display().to_string()));
    }
    if let Some(format) = args.format {
        overrides.push(("format".into(), format));
    }
    let done = match app::run_experiment(kind, text.as_deref(), &overrides) {
        Ok(d) => d,
        Err(e) => return config_error(e),
    };
    for row in done.report.failures() {
        eprintln!("qrn: FAIL {} margin {} {}", row.id, qrn_cli::report::format_margin(row.margin), row.detail);
    }
    let mut writes = vec![(done.output.clone(), done.report.emit(&done.format))];
    writes.extend(done.artifacts.iter().map(|(p, t)| (Some(p.clone()), t.clone())));
    for (path, text) in &writes {
        if let Err(e) = write_output(path.as_deref(), text) {
            eprintln!("qrn: {e}");
            return ExitCode::from(exit::CHECK_FAILED);
        }
    }
    eprintln!(
        "qrn: {kind} finished: {} checks, {} failed, {:.3}s",
        done.report.records.len(),
        done.report.failures().count(),
        start.elapsed().as_secs_f64()
    );
    status(done.report.passed())
}

fn run_selftest(args: SelftestArgs) -> ExitCode {
    let only = match args.only.as_deref().map(app::parse_criteria).transpose() {
        Ok(o) => o,
        Err(e) => return config_error(e),
    };
    let run = app::selftest(args.seed, only.as_deref());
    for o in &run.outcomes {
        eprintln!(
            "{} criterion {:2} {:<36} {:8.3}s / {:>3}s",
            if o.passed() { "PASS" } else { "FAIL" },
            o.id,
            o.name,
            o.elapsed.as_secs_f64(),
            o.budget.as_secs()
        );
    }
    if let Some(det) = run.report.records.last() {
        eprintln!("{} determinism {}", if det.passed { "PASS" } else { "FAIL" }, det.detail);
    }
    if let Err(e) = write_output(args.out.as_ref().and_then(|p| p.to_str()), &run.report.emit(&args.format)) {
        eprintln!("qrn: {e}");
        return ExitCode::from(exit::CHECK_FAILED);
    }
    eprintln!("qrn: selftest finished in {:.3}s", run.report.wall_time_s);
    status(run.passed())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Err(e) = app::configure_threads(std::env::var("QRN_THREADS").ok().as_deref()) {
        return config_error(e);
    }
    match cli.command {
        Command::Slit(a) => run_kind(Kind::Slit, a),
        Command::Born(a) => run_kind(Kind::Born, a),
        Command::Luders(a) => run_kind(Kind::Luders, a),
        Command::Pointer(a) => run_kind(Kind::Pointer, a),
        Command::Ehrenfest(a) => run_kind(Kind::Ehrenfest, a),
        Command::Evolve(a) => run_kind(Kind::Evolve, a),
        Command::Collapse(a) => run_kind(Kind::Collapse, a),
        Command::Selftest(a) => run_selftest(a),
        Command::Template { kind } => {
            print!("{}", template(kind));
            ExitCode::from(exit::PASS)
        }
    }
}
