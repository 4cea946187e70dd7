//! Solver backends: HiGHS in process, or any MPS-reading solver as a child process.

use std::collections::HashMap;
use std::path::{Path, PathBuf};
use std::process::Command;
use std::time::Instant;

use highs::{HighsModelStatus, RowProblem, Sense};
use serde::{Deserialize, Serialize};

use crate::error::SolveError;
use crate::milp::model::{MilpModel, ObjSense, RowSense, VarKind};
use crate::milp::mps;

/// Termination state of a solve.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SolveStatus {
    /// Proven optimal within the solver's default tolerance.
    Optimal,
    /// Stopped once the requested relative gap was reached.
    GapLimit,
    /// Stopped at the time limit with a feasible solution.
    TimeLimit,
    Infeasible,
}

impl std::fmt::Display for SolveStatus {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            SolveStatus::Optimal => "optimal",
            SolveStatus::GapLimit => "gap-limit",
            SolveStatus::TimeLimit => "time-limit",
            SolveStatus::Infeasible => "infeasible",
        })
    }
}

impl std::str::FromStr for SolveStatus {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "optimal" => Ok(SolveStatus::Optimal),
            "gap-limit" => Ok(SolveStatus::GapLimit),
            "time-limit" => Ok(SolveStatus::TimeLimit),
            "infeasible" => Ok(SolveStatus::Infeasible),
            other => Err(format!("unknown status {other}")),
        }
    }
}

/// Options passed to a backend.
#[derive(Debug, Clone, PartialEq)]
pub struct SolveOptions {
    /// Relative optimality gap at which to stop.
    pub gap: f64,
    /// Wall-clock limit (s).
    pub time_limit_s: f64,
    /// Complete feasible point to start from, if any.
    pub initial: Option<Vec<f64>>,
    /// Print solver progress.
    pub verbose: bool,
}

impl Default for SolveOptions {
    fn default() -> Self {
        SolveOptions {
            gap: 1e-4,
            time_limit_s: 60.0,
            initial: None,
            verbose: false,
        }
    }
}

/// Raw result of a backend.
#[derive(Debug, Clone, PartialEq)]
pub struct Solution {
    pub status: SolveStatus,
    /// Objective at `values`, in the model's own sense.
    pub objective: f64,
    /// Value of every variable; empty when infeasible.
    pub values: Vec<f64>,
    /// Relative gap reported by the solver, when known.
    pub gap: Option<f64>,
    /// Best proven bound on the objective, when known.
    pub bound: Option<f64>,
    pub time_s: f64,
}

/// A MILP solver.
pub trait SolverBackend: Send + Sync {
    fn name(&self) -> String;
    fn solve(&self, model: &MilpModel, options: &SolveOptions) -> Result<Solution, SolveError>;
}

/// HiGHS linked into the process.
#[derive(Debug, Clone, Default)]
pub struct HighsBackend {
    /// Extra HiGHS options as `(name, value)` pairs.
    pub options: Vec<(String, String)>,
}

impl SolverBackend for HighsBackend {
    fn name(&self) -> String {
        "highs".into()
    }

    fn solve(&self, model: &MilpModel, options: &SolveOptions) -> Result<Solution, SolveError> {
        let start = Instant::now();
        let mut problem = RowProblem::default();
        let mut cols = Vec::with_capacity(model.variables.len());
        for (v, &cost) in model.variables.iter().zip(&model.objective) {
            let col = match v.kind {
                VarKind::Continuous => problem.add_column(cost, v.lower..=v.upper),
                VarKind::Binary => problem.add_integer_column(cost, v.lower..=v.upper),
            };
            cols.push(col);
        }
        for c in &model.constraints {
            let row: Vec<_> = c.terms.iter().map(|(v, a)| (cols[v.0], *a)).collect();
            match c.sense {
                RowSense::Le => problem.add_row(..=c.rhs, row),
                RowSense::Ge => problem.add_row(c.rhs.., row),
                RowSense::Eq => problem.add_row(c.rhs..=c.rhs, row),
            }
        }
        let sense = match model.sense {
            ObjSense::Maximize => Sense::Maximise,
            ObjSense::Minimize => Sense::Minimise,
        };
        let mut highs = problem
            .try_optimise(sense)
            .map_err(|s| SolveError::Backend(format!("cannot load model: {s:?}")))?;
        if !options.verbose {
            highs.make_quiet();
        }
        let set = |h: &mut highs::Model, k: &str, v: f64| {
            h.try_set_option(k, v)
                .map_err(|s| SolveError::Backend(format!("option {k}: {s:?}")))
        };
        set(&mut highs, "mip_rel_gap", options.gap)?;
        set(&mut highs, "time_limit", options.time_limit_s.max(0.0))?;
        highs
            .try_set_option("random_seed", 0)
            .map_err(|s| SolveError::Backend(format!("option random_seed: {s:?}")))?;
        for (k, v) in &self.options {
            let applied = match v.parse::<i32>() {
                Ok(i) => highs.try_set_option(k.as_str(), i),
                Err(_) => match v.parse::<f64>() {
                    Ok(x) => highs.try_set_option(k.as_str(), x),
                    Err(_) => match v.as_str() {
                        "true" => highs.try_set_option(k.as_str(), true),
                        "false" => highs.try_set_option(k.as_str(), false),
                        s => highs.try_set_option(k.as_str(), s),
                    },
                },
            };
            applied.map_err(|s| SolveError::Backend(format!("option {k}: {s:?}")))?;
        }
        if let Some(init) = &options.initial {
            highs
                .try_set_solution(Some(init), None, None, None)
                .map_err(|s| SolveError::Backend(format!("initial solution rejected: {s:?}")))?;
        }
        let solved = highs
            .try_solve()
            .map_err(|s| SolveError::Backend(format!("solve failed: {s:?}")))?;
        let time_s = start.elapsed().as_secs_f64();
        let status = solved.status();
        let has_mip = model.variables.iter().any(|v| v.kind == VarKind::Binary);
        let gap = has_mip.then(|| solved.mip_gap()).filter(|g| g.is_finite());
        let bound = if has_mip {
            solved.double_info_value(c"mip_dual_bound").ok().filter(|b| b.is_finite())
        } else {
            None
        };
        let feasible = || {
            solved
                .int_info_value(c"primal_solution_status")
                .map(|s| s == 2)
                .unwrap_or(false)
        };
        let status = match status {
            HighsModelStatus::Optimal => {
                if gap.is_some_and(|g| g > 1e-6) {
                    SolveStatus::GapLimit
                } else {
                    SolveStatus::Optimal
                }
            }
            HighsModelStatus::Infeasible => SolveStatus::Infeasible,
            HighsModelStatus::ReachedTimeLimit if feasible() => SolveStatus::TimeLimit,
            other => return Err(SolveError::NoSolution(format!("{other:?}"))),
        };
        if status == SolveStatus::Infeasible {
            return Ok(Solution {
                status,
                objective: f64::NAN,
                values: Vec::new(),
                gap: None,
                bound: None,
                time_s,
            });
        }
        let values = solved.get_solution().columns().to_vec();
        Ok(Solution {
            status,
            objective: model.objective_value(&values),
            values,
            gap,
            bound,
            time_s,
        })
    }
}

/// Layout of the solution file a child process writes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolutionFormat {
    /// One `name value` pair per line. Lines starting with `#` are comments,
    /// except `# status <status>`, which reports the termination state.
    NameValue,
    /// CBC's `-solution` output: a status line, then
    /// `index name value reduced-cost` rows listing nonzero columns.
    Cbc,
}

/// Solver run as a child process on an MPS file.
///
/// Arguments may contain the placeholders `{mps}`, `{solution}`, `{gap}` and
/// `{time_limit}`.
#[derive(Debug, Clone)]
pub struct SubprocessBackend {
    pub program: PathBuf,
    pub args: Vec<String>,
    pub format: SolutionFormat,
}

impl SubprocessBackend {
    /// CBC reading the MPS file and writing its solution file.
    pub fn cbc(program: impl Into<PathBuf>) -> Self {
        SubprocessBackend {
            program: program.into(),
            args: ["{mps}", "-ratioGap", "{gap}", "-sec", "{time_limit}", "-solve", "-solution", "{solution}"]
                .map(String::from)
                .to_vec(),
            format: SolutionFormat::Cbc,
        }
    }

    /// Any program that accepts the given arguments and writes the
    /// `name value` format.
    pub fn name_value(program: impl Into<PathBuf>, args: &[&str]) -> Self {
        SubprocessBackend {
            program: program.into(),
            args: args.iter().map(|s| s.to_string()).collect(),
            format: SolutionFormat::NameValue,
        }
    }
}

/// Parses a `name value` solution, returning the status line if present.
pub fn parse_name_value(
    text: &str,
    index: &HashMap<&str, usize>,
    values: &mut [f64],
) -> Result<Option<SolveStatus>, SolveError> {
    let mut status = None;
    for (k, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        if let Some(rest) = line.strip_prefix('#') {
            let mut it = rest.split_whitespace();
            if it.next() == Some("status") {
                let s = it.next().unwrap_or("");
                status = Some(s.parse().map_err(|reason| SolveError::SolutionParse { line: k + 1, reason })?);
            }
            continue;
        }
        let mut it = line.split_whitespace();
        let (Some(name), Some(value), None) = (it.next(), it.next(), it.next()) else {
            return Err(SolveError::SolutionParse {
                line: k + 1,
                reason: "expected `name value`".into(),
            });
        };
        let &col = index.get(name).ok_or_else(|| SolveError::UnknownName(name.to_string()))?;
        values[col] = value.parse().map_err(|_| SolveError::SolutionParse {
            line: k + 1,
            reason: format!("bad number {value}"),
        })?;
    }
    Ok(status)
}

fn parse_cbc(
    text: &str,
    index: &HashMap<&str, usize>,
    values: &mut [f64],
) -> Result<SolveStatus, SolveError> {
    let mut lines = text.lines();
    let head = lines.next().unwrap_or("").trim().to_ascii_lowercase();
    let status = if head.starts_with("optimal") {
        SolveStatus::Optimal
    } else if head.contains("infeasible") {
        return Ok(SolveStatus::Infeasible);
    } else if head.starts_with("stopped on time") {
        SolveStatus::TimeLimit
    } else if head.starts_with("stopped on ratio") || head.starts_with("stopped on gap") {
        SolveStatus::GapLimit
    } else {
        return Err(SolveError::NoSolution(head));
    };
    for (k, line) in lines.enumerate() {
        let tokens: Vec<&str> = line.split_whitespace().collect();
        if tokens.is_empty() {
            continue;
        }
        // Rows flagged as infeasible carry a leading `**`.
        let tokens = if tokens[0] == "**" { &tokens[1..] } else { &tokens[..] };
        if tokens.len() < 3 {
            return Err(SolveError::SolutionParse {
                line: k + 2,
                reason: "expected `index name value`".into(),
            });
        }
        let &col = index
            .get(tokens[1])
            .ok_or_else(|| SolveError::UnknownName(tokens[1].to_string()))?;
        values[col] = tokens[2].parse().map_err(|_| SolveError::SolutionParse {
            line: k + 2,
            reason: format!("bad number {}", tokens[2]),
        })?;
    }
    Ok(status)
}

fn fill(arg: &str, mps: &Path, solution: &Path, options: &SolveOptions) -> String {
    arg.replace("{mps}", &mps.to_string_lossy())
        .replace("{solution}", &solution.to_string_lossy())
        .replace("{gap}", &options.gap.to_string())
        .replace("{time_limit}", &options.time_limit_s.to_string())
}

impl SolverBackend for SubprocessBackend {
    fn name(&self) -> String {
        format!("subprocess:{}", self.program.display())
    }

    fn solve(&self, model: &MilpModel, options: &SolveOptions) -> Result<Solution, SolveError> {
        let start = Instant::now();
        let dir = tempfile::tempdir()?;
        let mps_path = dir.path().join("model.mps");
        let sol_path = dir.path().join("model.sol");
        let names = mps::write_mps(model, &mps_path)?;
        let args: Vec<String> = self.args.iter().map(|a| fill(a, &mps_path, &sol_path, options)).collect();
        let output = Command::new(&self.program)
            .args(&args)
            .output()
            .map_err(|source| SolveError::Launch {
                program: self.program.display().to_string(),
                source,
            })?;
        if !output.status.success() {
            return Err(SolveError::Exit {
                status: output.status.to_string(),
                stderr: String::from_utf8_lossy(&output.stderr).trim().to_string(),
            });
        }
        let text = std::fs::read_to_string(&sol_path)?;
        let index: HashMap<&str, usize> =
            names.columns.iter().enumerate().map(|(k, n)| (n.as_str(), k)).collect();
        let mut values = vec![0.0; model.variables.len()];
        let status = match self.format {
            SolutionFormat::NameValue => {
                parse_name_value(&text, &index, &mut values)?.unwrap_or(SolveStatus::Optimal)
            }
            SolutionFormat::Cbc => parse_cbc(&text, &index, &mut values)?,
        };
        let time_s = start.elapsed().as_secs_f64();
        if status == SolveStatus::Infeasible {
            return Ok(Solution {
                status,
                objective: f64::NAN,
                values: Vec::new(),
                gap: None,
                bound: None,
                time_s,
            });
        }
        Ok(Solution {
            status,
            objective: model.objective_value(&values),
            values,
            gap: None,
            bound: None,
            time_s,
        })
    }
}

/// Writes a solution in the `name value` format using the given names.
pub fn write_name_value(
    out: &mut impl std::io::Write,
    status: SolveStatus,
    names: &[String],
    values: &[f64],
) -> std::io::Result<()> {
    writeln!(out, "# status {status}")?;
    for (n, v) in names.iter().zip(values) {
        writeln!(out, "{n} {}", mps::format_number(*v))?;
    }
    Ok(())
}
