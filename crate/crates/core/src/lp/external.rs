//! Hook for solving with an external executable.
//!
//! The executable is called as `CMD MODEL SOLUTION`, where `MODEL` is an
//! exported file (`.mps` or `.lp`) and `SOLUTION` is a path it must write.
//! The solution file holds one `name value` pair per line, using the names
//! of the exported file. A line consisting of `infeasible` or `unbounded`
//! reports that status instead.

use std::collections::HashMap;
use std::path::{Path, PathBuf};
use std::process::Command;
use std::sync::atomic::{AtomicUsize, Ordering};

use crate::scalar::Scalar;

use super::export::{export_dual, ExportFormat};
use super::{DualFormLp, SolveError, Solution, Status};

/// Environment variable naming the external solver executable.
pub const SOLVER_ENV: &str = "RLPLIFT_EXTERNAL_SOLVER";

pub fn solver_from_env() -> Option<PathBuf> {
    std::env::var_os(SOLVER_ENV)
        .filter(|v| !v.is_empty())
        .map(PathBuf::from)
}

fn scratch_dir() -> std::io::Result<PathBuf> {
    static COUNTER: AtomicUsize = AtomicUsize::new(0);
    let dir = std::env::temp_dir().join(format!(
        "rlplift-{}-{}",
        std::process::id(),
        COUNTER.fetch_add(1, Ordering::Relaxed)
    ));
    std::fs::create_dir_all(&dir)?;
    Ok(dir)
}

/// Parses a solution file against the exported column names.
pub fn parse_solution(text: &str, names: &[(String, String)]) -> Result<(Status, Vec<f64>), SolveError> {
    let index: HashMap<&str, usize> = names.iter().enumerate().map(|(j, (n, _))| (n.as_str(), j)).collect();
    let mut x = vec![None; names.len()];
    for (lineno, line) in text.lines().enumerate() {
        let fields: Vec<&str> = line.split_whitespace().collect();
        match fields.as_slice() {
            [] => {}
            [word] if word.eq_ignore_ascii_case("infeasible") => return Ok((Status::Infeasible, Vec::new())),
            [word] if word.eq_ignore_ascii_case("unbounded") => return Ok((Status::Unbounded, Vec::new())),
            [name, value] => {
                let j = *index
                    .get(name)
                    .ok_or_else(|| SolveError::Backend(format!("solution line {}: unknown column {name}", lineno + 1)))?;
                let v: f64 = value
                    .parse()
                    .map_err(|_| SolveError::Backend(format!("solution line {}: bad value {value}", lineno + 1)))?;
                x[j] = Some(v);
            }
            _ => {
                return Err(SolveError::Backend(format!(
                    "solution line {}: expected `name value`",
                    lineno + 1
                )))
            }
        }
    }
    let x = x
        .into_iter()
        .enumerate()
        .map(|(j, v)| v.ok_or_else(|| SolveError::Backend(format!("solution has no value for {}", names[j].0))))
        .collect::<Result<Vec<f64>, _>>()?;
    Ok((Status::Optimal, x))
}

/// Exports `lp`, runs `cmd` on it and reads back the solution.
pub fn solve_external<T: Scalar>(
    lp: &DualFormLp<T>,
    cmd: &Path,
    format: ExportFormat,
) -> Result<Solution<T>, SolveError> {
    let io = |e: std::io::Error| SolveError::Backend(format!("external solver: {e}"));
    let exported = export_dual(lp, format);
    let dir = scratch_dir().map_err(io)?;
    let model = dir.join(match format {
        ExportFormat::Lp => "model.lp",
        ExportFormat::Mps => "model.mps",
    });
    let sol = dir.join("solution.txt");
    std::fs::write(&model, &exported.text).map_err(io)?;
    let out = Command::new(cmd).arg(&model).arg(&sol).output().map_err(io)?;
    if !out.status.success() {
        let _ = std::fs::remove_dir_all(&dir);
        return Err(SolveError::Backend(format!(
            "external solver exited with {}: {}",
            out.status,
            String::from_utf8_lossy(&out.stderr).trim()
        )));
    }
    let text = std::fs::read_to_string(&sol).map_err(io);
    let _ = std::fs::remove_dir_all(&dir);
    let (status, xf) = parse_solution(&text?, &exported.names)?;
    if status != Status::Optimal {
        return Ok(Solution::status_only(status, 0));
    }
    let x: Vec<T> = xf
        .iter()
        .map(|v| T::from_f64(*v).ok_or_else(|| SolveError::Backend(format!("non-finite value {v}"))))
        .collect::<Result<_, _>>()?;
    Ok(Solution {
        status,
        objective: lp.objective(&x),
        x,
        pivots: 0,
    })
}
