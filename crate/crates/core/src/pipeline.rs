//! End-to-end driver: parse, validate, ground, optionally lift, solve and
//! report.

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::Instant;

use serde_json::{json, Value as Json};
use thiserror::Error;

use crate::ground::{ground, GroundError, GroundLp, SizeReport};
use crate::lifting::{lifted_solve_with, prepare, LiftError, LiftOptions, LiftReport};
use crate::lp::export::{export_dual, export_ground, ExportFormat, Exported};
use crate::lp::external::solve_external;
use crate::lp::{solve, to_dual_form, Backend, DualFormLp, Pricing, SolveError, Solution, SolverOptions, Status};
use crate::logkb::{evaluate, parse_logkb, LogicProgram, LogkbError, MaterializedKb};
use crate::rlp::{parse_rlp, to_prenex, validate, RlpError, RlpModel, ValidationReport};
use crate::scalar::{format_f64, format_rational, Rational, Scalar, ScalarKey};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum Mode {
    Ground,
    #[default]
    Lift,
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub enum SolverChoice {
    /// Exact simplex on small LPs, minilp otherwise.
    #[default]
    Auto,
    /// Internal simplex on rationals.
    Rational,
    /// Internal simplex on `f64`.
    Float,
    Minilp,
    /// External executable fed an exported file.
    External { cmd: PathBuf, format: ExportFormat },
}

impl FromStr for SolverChoice {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let external = |rest: &str, format| SolverChoice::External {
            cmd: PathBuf::from(rest),
            format,
        };
        match s {
            "auto" => Ok(SolverChoice::Auto),
            "rational" | "internal-rational" | "exact" => Ok(SolverChoice::Rational),
            "float" | "internal-float" => Ok(SolverChoice::Float),
            "minilp" => Ok(SolverChoice::Minilp),
            _ => {
                if let Some(rest) = s.strip_prefix("external-lp:") {
                    Ok(external(rest, ExportFormat::Lp))
                } else if let Some(rest) = s.strip_prefix("external:") {
                    Ok(external(rest, ExportFormat::Mps))
                } else {
                    Err(format!(
                        "unknown solver `{s}` (expected auto, rational, float, minilp, external:CMD or external-lp:CMD)"
                    ))
                }
            }
        }
    }
}

impl fmt::Display for SolverChoice {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SolverChoice::Auto => f.write_str("auto"),
            SolverChoice::Rational => f.write_str("rational"),
            SolverChoice::Float => f.write_str("float"),
            SolverChoice::Minilp => f.write_str("minilp"),
            SolverChoice::External { cmd, format } => {
                let prefix = if *format == ExportFormat::Lp { "external-lp" } else { "external" };
                write!(f, "{prefix}:{}", cmd.display())
            }
        }
    }
}

/// Largest dual-form LP (rows × columns) that `auto` solves exactly.
pub const AUTO_EXACT_LIMIT: usize = 10_000;

#[derive(Clone, Debug, PartialEq)]
pub struct RunOptions {
    pub mode: Mode,
    pub solver: SolverChoice,
    pub pricing: Pricing,
    pub max_pivots: usize,
    pub row_dedup: bool,
    pub color_digits: Option<u32>,
    /// Tolerance for verifying float solutions.
    pub verify_tol: f64,
}

impl Default for RunOptions {
    fn default() -> Self {
        RunOptions {
            mode: Mode::Lift,
            solver: SolverChoice::Auto,
            pricing: Pricing::Bland,
            max_pivots: SolverOptions::default().max_pivots,
            row_dedup: true,
            color_digits: None,
            verify_tol: 1e-6,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    pub rlp_path: PathBuf,
    pub lkb_path: PathBuf,
    pub options: RunOptions,
}

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("{path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("{file}: {source}")]
    Rlp { file: String, source: RlpError },
    #[error("{file}: {source}")]
    Logkb { file: String, source: LogkbError },
    #[error("{file}: model does not validate against {kb}:\n{report}")]
    Invalid {
        file: String,
        kb: String,
        report: ValidationReport,
    },
    #[error("{file}: {source}")]
    Ground { file: String, source: GroundError },
    #[error(transparent)]
    Lift(#[from] LiftError),
    #[error(transparent)]
    Solve(#[from] SolveError),
}

/// Parsed, validated and grounded model.
#[derive(Clone, Debug)]
pub struct Compiled {
    pub model: RlpModel,
    pub program: LogicProgram,
    pub kb: MaterializedKb,
    pub validation: ValidationReport,
    pub ground: GroundLp,
    pub times_ms: BTreeMap<&'static str, f64>,
}

fn millis(t: Instant) -> f64 {
    t.elapsed().as_secs_f64() * 1e3
}

/// Parses and grounds model and knowledge-base text; the names are used
/// in error messages.
pub fn compile(rlp: &str, rlp_name: &str, lkb: &str, lkb_name: &str) -> Result<Compiled, PipelineError> {
    let mut times = BTreeMap::new();
    let t = Instant::now();
    let model = parse_rlp(rlp).map_err(|source| PipelineError::Rlp {
        file: rlp_name.to_string(),
        source,
    })?;
    let logkb_err = |source| PipelineError::Logkb {
        file: lkb_name.to_string(),
        source,
    };
    let program = parse_logkb(lkb).map_err(logkb_err)?;
    times.insert("parse", millis(t));
    let t = Instant::now();
    let kb = evaluate(&program).map_err(logkb_err)?;
    times.insert("evaluate", millis(t));
    let validation = validate(&model, &program);
    if !validation.is_ok() {
        return Err(PipelineError::Invalid {
            file: rlp_name.to_string(),
            kb: lkb_name.to_string(),
            report: validation,
        });
    }
    let t = Instant::now();
    let ground_err = |source| PipelineError::Ground {
        file: rlp_name.to_string(),
        source,
    };
    let prenex = to_prenex(&model).map_err(|e| ground_err(GroundError::Model(e)))?;
    let lp = ground(&prenex, &kb).map_err(ground_err)?;
    times.insert("ground", millis(t));
    Ok(Compiled {
        model,
        program,
        kb,
        validation,
        ground: lp,
        times_ms: times,
    })
}

fn read(path: &Path) -> Result<String, PipelineError> {
    std::fs::read_to_string(path).map_err(|source| PipelineError::Io {
        path: path.display().to_string(),
        source,
    })
}

pub fn compile_files(rlp: &Path, lkb: &Path) -> Result<Compiled, PipelineError> {
    compile(
        &read(rlp)?,
        &rlp.display().to_string(),
        &read(lkb)?,
        &lkb.display().to_string(),
    )
}

/// Outcome of a run, with values in the model's own objective sense.
#[derive(Clone, Debug, PartialEq)]
pub struct RunResult {
    pub status: Status,
    /// Objective in the model's sense, including constant terms.
    pub objective: Option<String>,
    pub objective_f64: Option<f64>,
    /// Ground variable names in column order.
    pub names: Vec<String>,
    /// Values as exact decimal/rational text or shortest float text.
    pub values: Vec<String>,
    pub values_f64: Vec<f64>,
    pub ground: SizeReport,
    pub dual: SizeReport,
    pub lift: Option<LiftReport>,
    /// Solver actually used.
    pub solver: String,
    pub warnings: Vec<String>,
    pub times_ms: BTreeMap<&'static str, f64>,
}

impl RunResult {
    pub fn value(&self, name: &str) -> Option<f64> {
        self.names.iter().position(|n| n == name).map(|j| self.values_f64[j])
    }

    pub fn solution(&self) -> BTreeMap<&str, &str> {
        self.names
            .iter()
            .map(String::as_str)
            .zip(self.values.iter().map(String::as_str))
            .collect()
    }

    pub fn exit_code(&self) -> i32 {
        match self.status {
            Status::Optimal => 0,
            Status::Infeasible => 3,
            Status::Unbounded => 4,
        }
    }

    /// JSON document; timings are included only on request so that repeated
    /// runs give identical output.
    pub fn to_json(&self, with_times: bool) -> Json {
        let mut doc = json!({
            "status": self.status,
            "objective": self.objective,
            "solution": self.solution(),
            "ground": self.ground,
            "dual": self.dual,
            "solver": self.solver,
            "warnings": self.warnings,
        });
        let map = doc.as_object_mut().expect("object");
        if let Some(report) = &self.lift {
            map.insert("lift".into(), report.to_json(with_times));
        }
        if with_times {
            map.insert("times_ms".into(), json!(self.times_ms));
        }
        doc
    }
}

/// `(ground, dual form, lifted)` sizes without solving.
#[derive(Clone, Debug, PartialEq, serde::Serialize)]
pub struct Stats {
    pub ground: SizeReport,
    pub dual: SizeReport,
    pub lifted: SizeReport,
    pub rounds: usize,
    pub row_classes: usize,
    pub col_classes: usize,
}

impl Stats {
    pub fn var_ratio(&self) -> f64 {
        if self.dual.vars == 0 {
            1.0
        } else {
            self.lifted.vars as f64 / self.dual.vars as f64
        }
    }

    pub const CSV_HEADER: &'static str =
        "model,ground_vars,ground_rows,ground_nnz,dual_rows,dual_nnz,lifted_vars,lifted_rows,lifted_nnz,var_ratio,rounds";

    pub fn csv_row(&self, label: &str) -> String {
        format!(
            "{label},{},{},{},{},{},{},{},{},{:.4},{}",
            self.ground.vars,
            self.ground.rows,
            self.ground.nnz,
            self.dual.rows,
            self.dual.nnz,
            self.lifted.vars,
            self.lifted.rows,
            self.lifted.nnz,
            self.var_ratio(),
            self.rounds
        )
    }
}

fn lift_options(opts: &RunOptions, backend: Backend) -> LiftOptions {
    LiftOptions {
        row_dedup: opts.row_dedup,
        color_digits: opts.color_digits,
        solver: SolverOptions {
            backend,
            pricing: opts.pricing,
            max_pivots: opts.max_pivots,
        },
        verify_tol: opts.verify_tol,
        ..LiftOptions::default()
    }
}

/// Sizes of the ground, dual-form and lifted LPs (exact colors).
pub fn stats(compiled: &Compiled, opts: &RunOptions) -> Result<Stats, PipelineError> {
    let lp: DualFormLp<Rational> = to_dual_form(&compiled.ground);
    let l = prepare(&lp, &lift_options(opts, Backend::Simplex))?;
    Ok(Stats {
        ground: compiled.ground.stats(),
        dual: lp.stats(),
        lifted: l.lifted.lp.stats(),
        rounds: l.partition.rounds,
        row_classes: l.partition.num_row_classes(),
        col_classes: l.partition.num_col_classes(),
    })
}

/// Exports the ground LP, or the lifted LP in dual form when `lifted`.
pub fn export(compiled: &Compiled, format: ExportFormat, lifted: bool, opts: &RunOptions) -> Result<Exported, PipelineError> {
    if !lifted {
        return Ok(export_ground(&compiled.ground, format));
    }
    let lp: DualFormLp<Rational> = to_dual_form(&compiled.ground);
    let l = prepare(&lp, &lift_options(opts, Backend::Simplex))?;
    Ok(export_dual(&l.lifted.lp, format))
}

fn resolve_auto(lp: &GroundLp) -> SolverChoice {
    let dual = to_dual_form::<Rational>(lp).stats();
    if dual.rows.max(1) * dual.vars.max(1) <= AUTO_EXACT_LIMIT {
        SolverChoice::Rational
    } else {
        SolverChoice::Minilp
    }
}

fn solve_as<T: Scalar>(compiled: &Compiled, opts: &RunOptions, choice: &SolverChoice) -> Result<RunResult, PipelineError> {
    let t = Instant::now();
    let lp: DualFormLp<T> = to_dual_form(&compiled.ground);
    let mut times = compiled.times_ms.clone();
    times.insert("dual_form", millis(t));
    let backend = if *choice == SolverChoice::Minilp { Backend::Minilp } else { Backend::Simplex };
    let lopts = lift_options(opts, backend);
    let solver = |reduced: &DualFormLp<T>| -> Result<Solution<T>, SolveError> {
        match choice {
            SolverChoice::External { cmd, format } => solve_external(reduced, cmd, *format),
            _ => solve(reduced, &lopts.solver),
        }
    };
    let t = Instant::now();
    let (solution, lift) = match opts.mode {
        Mode::Ground => (solver(&lp)?, None),
        Mode::Lift => {
            let (s, r) = lifted_solve_with(&lp, &lopts, solver)?;
            (s, Some(r))
        }
    };
    times.insert("solve", millis(t));
    let optimal = solution.is_optimal();
    let objective = optimal.then(|| lp.sense_map.report(&solution.objective));
    Ok(RunResult {
        status: solution.status,
        objective_f64: objective.as_ref().map(Scalar::to_f64),
        objective: objective.as_ref().map(text),
        names: compiled.ground.var_names.iter().map(|a| a.to_string()).collect(),
        values: solution.x.iter().map(text).collect(),
        values_f64: solution.x.iter().map(Scalar::to_f64).collect(),
        ground: compiled.ground.stats(),
        dual: lp.stats(),
        lift,
        solver: choice.to_string(),
        warnings: compiled.ground.warnings.clone(),
        times_ms: times,
    })
}

fn text<T: Scalar>(v: &T) -> String {
    match v.key() {
        ScalarKey::Exact(r) => format_rational(&r),
        _ => format_f64(v.to_f64()),
    }
}

/// Solves a compiled model.
pub fn solve_compiled(compiled: &Compiled, opts: &RunOptions) -> Result<RunResult, PipelineError> {
    let choice = match &opts.solver {
        SolverChoice::Auto => resolve_auto(&compiled.ground),
        other => other.clone(),
    };
    match choice {
        SolverChoice::Rational => solve_as::<Rational>(compiled, opts, &choice),
        _ => solve_as::<f64>(compiled, opts, &choice),
    }
}

pub fn run(config: &RunConfig) -> Result<RunResult, PipelineError> {
    let compiled = compile_files(&config.rlp_path, &config.lkb_path)?;
    solve_compiled(&compiled, &config.options)
}

/// Parses, grounds and solves model text in one call.
pub fn run_source(rlp: &str, lkb: &str, opts: &RunOptions) -> Result<RunResult, PipelineError> {
    solve_compiled(&compile(rlp, "<model>", lkb, "<kb>")?, opts)
}

/// Ground values of a result keyed by atom text, as `f64`.
pub fn value_map(result: &RunResult) -> BTreeMap<String, f64> {
    result.names.iter().cloned().zip(result.values_f64.iter().copied()).collect()
}
