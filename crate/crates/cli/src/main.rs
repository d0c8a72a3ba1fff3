//! `rlplift`: ground, lift, solve and export relational linear programs.

use std::fs;
use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use rlplift::lp::export::ExportFormat;
use rlplift::lp::external::{SOLVER_ENV, solver_from_env};
use rlplift::lp::Pricing;
use rlplift::pipeline::{self, Mode, RunOptions, SolverChoice, Stats};

#[derive(Parser)]
#[command(name = "rlplift", version, about = "Relational linear programs with lifted solving")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Ground, optionally lift, solve and report.
    Run(RunArgs),
    /// Print ground and lifted LP sizes without solving.
    Stats(StatsArgs),
    /// Write the ground (or lifted) LP as an LP or MPS file.
    Export(ExportArgs),
}

#[derive(Args)]
struct Inputs {
    /// Model file (.rlp).
    #[arg(long)]
    rlp: PathBuf,
    /// Knowledge base (.lkb).
    #[arg(long)]
    lkb: PathBuf,
}

#[derive(Args)]
struct LiftFlags {
    /// Keep every projected row, including duplicates within a row class.
    #[arg(long)]
    no_row_dedup: bool,
    /// Round coefficients to this many decimals before coloring.
    #[arg(long, value_name = "DIGITS")]
    color_eps: Option<u32>,
}

#[derive(Args)]
struct RunArgs {
    #[command(flatten)]
    inputs: Inputs,
    /// Solve the lifted LP (default).
    #[arg(long, overrides_with = "no_lift")]
    lift: bool,
    /// Solve the ground LP directly.
    #[arg(long)]
    no_lift: bool,
    /// auto, rational, float, minilp, external[:CMD] or external-lp[:CMD].
    #[arg(long, default_value = "auto")]
    solver: String,
    /// Pricing rule of the internal simplex: bland or dantzig.
    #[arg(long, default_value = "bland")]
    pricing: String,
    #[arg(long, default_value_t = 1_000_000)]
    max_pivots: usize,
    #[command(flatten)]
    lift_flags: LiftFlags,
    /// Write the JSON result here (`-` for stdout).
    #[arg(long, value_name = "OUT")]
    json: Option<PathBuf>,
    /// Include stage timings in the JSON result.
    #[arg(long)]
    timings: bool,
}

#[derive(Args)]
struct StatsArgs {
    #[command(flatten)]
    inputs: Inputs,
    #[command(flatten)]
    lift_flags: LiftFlags,
    /// Print a CSV header and row instead of text.
    #[arg(long)]
    csv: bool,
    /// Write the sizes as JSON here (`-` for stdout).
    #[arg(long, value_name = "OUT")]
    json: Option<PathBuf>,
}

#[derive(Args)]
struct ExportArgs {
    #[command(flatten)]
    inputs: Inputs,
    /// lp or mps.
    #[arg(long, default_value = "lp")]
    format: String,
    /// Export the lifted LP (dual form) instead of the ground LP.
    #[arg(long)]
    lift: bool,
    #[command(flatten)]
    lift_flags: LiftFlags,
    /// Output file; stdout if omitted.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Write the column name mapping (`file-name original-name` per line).
    #[arg(long, value_name = "FILE")]
    names: Option<PathBuf>,
}

fn solver_choice(text: &str) -> Result<SolverChoice> {
    let from_env = |format| -> Result<SolverChoice> {
        let cmd = solver_from_env().with_context(|| format!("--solver {text} needs {SOLVER_ENV} to be set"))?;
        Ok(SolverChoice::External { cmd, format })
    };
    match text {
        "external" => from_env(ExportFormat::Mps),
        "external-lp" => from_env(ExportFormat::Lp),
        _ => text.parse().map_err(anyhow::Error::msg),
    }
}

fn options(flags: &LiftFlags) -> RunOptions {
    RunOptions {
        row_dedup: !flags.no_row_dedup,
        color_digits: flags.color_eps,
        ..RunOptions::default()
    }
}

/// Writes to stdout; a reader that closed the pipe early is not an error.
fn emit(text: &str) -> Result<()> {
    let mut out = std::io::stdout().lock();
    match out.write_all(text.as_bytes()).and_then(|()| out.flush()) {
        Err(e) if e.kind() != std::io::ErrorKind::BrokenPipe => Err(e.into()),
        _ => Ok(()),
    }
}

fn write_out(path: &PathBuf, text: &str) -> Result<()> {
    if path.as_os_str() == "-" {
        return emit(text);
    }
    fs::write(path, text).map_err(|e| anyhow::anyhow!("writing {}: {e}", path.display()))
}

fn run(args: &RunArgs) -> Result<i32> {
    let pricing = match args.pricing.as_str() {
        "bland" => Pricing::Bland,
        "dantzig" => Pricing::Dantzig,
        other => bail!("unknown pricing rule `{other}` (expected bland or dantzig)"),
    };
    let opts = RunOptions {
        mode: if args.no_lift { Mode::Ground } else { Mode::Lift },
        solver: solver_choice(&args.solver)?,
        pricing,
        max_pivots: args.max_pivots,
        ..options(&args.lift_flags)
    };
    let compiled = pipeline::compile_files(&args.inputs.rlp, &args.inputs.lkb)?;
    for w in &compiled.ground.warnings {
        eprintln!("warning: {w}");
    }
    let result = pipeline::solve_compiled(&compiled, &opts)?;
    let to_stdout = args.json.as_ref().is_some_and(|p| p.as_os_str() == "-");
    if let Some(path) = &args.json {
        let mut text = serde_json::to_string_pretty(&result.to_json(args.timings))?;
        text.push('\n');
        write_out(path, &text)?;
    }
    if !to_stdout {
        let mut text = format!("status: {}\n", result.status);
        if let Some(obj) = &result.objective {
            text += &format!("objective: {obj}\n");
        }
        text += &format!("ground: {}\n", result.ground);
        if let Some(report) = &result.lift {
            text += &format!(
                "lifted: {} ({} color-passing rounds, verified: {})\n",
                report.lifted, report.rounds, report.verified
            );
        }
        text += &format!("solver: {}\n", result.solver);
        emit(&text)?;
    }
    Ok(result.exit_code())
}

fn stats(args: &StatsArgs) -> Result<i32> {
    let compiled = pipeline::compile_files(&args.inputs.rlp, &args.inputs.lkb)?;
    let s = pipeline::stats(&compiled, &options(&args.lift_flags))?;
    if let Some(path) = &args.json {
        let mut text = serde_json::to_string_pretty(&s)?;
        text.push('\n');
        write_out(path, &text)?;
    }
    if args.csv {
        let label = args.inputs.rlp.file_stem().map_or_else(String::new, |s| s.to_string_lossy().into_owned());
        let kb = args.inputs.lkb.file_stem().map_or_else(String::new, |s| s.to_string_lossy().into_owned());
        emit(&format!("{}\n{}\n", Stats::CSV_HEADER, s.csv_row(&format!("{label}+{kb}"))))?;
    } else if args.json.as_ref().is_none_or(|p| p.as_os_str() != "-") {
        emit(&format!(
            "ground: {}\ndual form: {}\nlifted: {}\nvariable ratio: {:.4}\ncolor-passing rounds: {}\n",
            s.ground,
            s.dual,
            s.lifted,
            s.var_ratio(),
            s.rounds
        ))?;
    }
    Ok(0)
}

fn export(args: &ExportArgs) -> Result<i32> {
    let format: ExportFormat = args.format.parse().map_err(anyhow::Error::msg)?;
    let compiled = pipeline::compile_files(&args.inputs.rlp, &args.inputs.lkb)?;
    let e = pipeline::export(&compiled, format, args.lift, &options(&args.lift_flags))?;
    match &args.out {
        Some(path) => write_out(path, &e.text)?,
        None => emit(&e.text)?,
    }
    if let Some(path) = &args.names {
        let text: String = e.names.iter().map(|(m, o)| format!("{m} {o}\n")).collect();
        write_out(path, &text)?;
    }
    Ok(0)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match &cli.command {
        Command::Run(a) => run(a),
        Command::Stats(a) => stats(a),
        Command::Export(a) => export(a),
    };
    match outcome {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}
