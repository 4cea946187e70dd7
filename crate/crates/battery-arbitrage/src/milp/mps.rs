//! MPS interchange.
//!
//! The writer produces the fixed-format section layout (NAME, OBJSENSE, ROWS,
//! COLUMNS with integer markers, RHS, BOUNDS, ENDATA) with names of at most
//! eight characters. Names that are too long, contain blanks or collide are
//! replaced by generated ones and the mapping is written next to the file.
//! Numbers are printed in their shortest exact decimal form so that a reader
//! recovers every coefficient and bound bit for bit; a number longer than the
//! twelve-character field simply widens its line, which whitespace-separated
//! readers accept.
//!
//! Embedded piecewise-linear functions are recorded as comment lines.

use std::collections::{HashMap, HashSet};
use std::fmt::Write as _;
use std::io::Write;
use std::path::{Path, PathBuf};

use crate::error::MpsError;
use crate::milp::model::{MilpModel, ObjSense, RowSense, VarId, VarKind};

const OBJECTIVE_ROW: &str = "OBJ";

/// Names used in the MPS file, by column and row index.
#[derive(Debug, Clone, PartialEq)]
pub struct MpsNames {
    pub columns: Vec<String>,
    pub rows: Vec<String>,
    /// Whether any name differs from the model's own.
    pub renamed: bool,
}

impl MpsNames {
    /// Picks a valid, unique MPS name for every column and row.
    pub fn for_model(model: &MilpModel) -> Self {
        let mut renamed = false;
        let columns = assign(model.variables.iter().map(|v| v.name.as_str()), 'C', &mut renamed, &[]);
        let rows = assign(
            model.constraints.iter().map(|c| c.name.as_str()),
            'R',
            &mut renamed,
            &[OBJECTIVE_ROW],
        );
        MpsNames {
            columns,
            rows,
            renamed,
        }
    }

    /// Column lookup by MPS name.
    pub fn column_index(&self) -> HashMap<&str, VarId> {
        self.columns.iter().enumerate().map(|(k, n)| (n.as_str(), VarId(k))).collect()
    }
}

fn valid_name(name: &str) -> bool {
    !name.is_empty()
        && name.len() <= 8
        && name.chars().all(|c| c.is_ascii_graphic())
        && !name.starts_with(['*', '$'])
}

fn assign<'a>(
    names: impl Iterator<Item = &'a str>,
    prefix: char,
    renamed: &mut bool,
    reserved: &[&str],
) -> Vec<String> {
    let names: Vec<&str> = names.collect();
    let mut seen: HashSet<String> = reserved.iter().map(|s| s.to_string()).collect();
    let mut keep = vec![false; names.len()];
    for (k, n) in names.iter().enumerate() {
        if valid_name(n) && seen.insert(n.to_string()) {
            keep[k] = true;
        }
    }
    let mut counter = 0usize;
    names
        .iter()
        .enumerate()
        .map(|(k, n)| {
            if keep[k] {
                return n.to_string();
            }
            *renamed = true;
            loop {
                counter += 1;
                let candidate = format!("{prefix}{counter:07}");
                if seen.insert(candidate.clone()) {
                    return candidate;
                }
            }
        })
        .collect()
}

/// Shortest decimal string that parses back to exactly `x`.
pub fn format_number(x: f64) -> String {
    if x == 0.0 {
        return "0".into();
    }
    let s = format!("{x:?}");
    s.strip_suffix(".0").map(str::to_string).unwrap_or(s)
}

fn entry(field1: &str, name: &str, row: &str, value: f64) -> String {
    format!(" {field1:<2} {name:<8}  {row:<8}  {:>12}\n", format_number(value))
}

/// Renders the model as MPS text together with the names used.
pub fn to_mps_string(model: &MilpModel) -> (String, MpsNames) {
    let names = MpsNames::for_model(model);
    let mut out = String::new();
    let _ = writeln!(out, "NAME          {}", model.name.split_whitespace().next().unwrap_or("MODEL"));
    for f in &model.pwl {
        let _ = writeln!(out, "* PWL {}", f.name);
        let _ = writeln!(
            out,
            "*   breakpoints {}",
            f.function.breakpoints().iter().map(|x| format_number(*x)).collect::<Vec<_>>().join(" ")
        );
        let _ = writeln!(
            out,
            "*   values {}",
            f.function.values().iter().map(|x| format_number(*x)).collect::<Vec<_>>().join(" ")
        );
    }
    out.push_str("OBJSENSE\n");
    out.push_str(match model.sense {
        ObjSense::Maximize => "    MAX\n",
        ObjSense::Minimize => "    MIN\n",
    });
    out.push_str("ROWS\n");
    let _ = writeln!(out, " N  {OBJECTIVE_ROW}");
    for (c, n) in model.constraints.iter().zip(&names.rows) {
        let tag = match c.sense {
            RowSense::Le => "L",
            RowSense::Ge => "G",
            RowSense::Eq => "E",
        };
        let _ = writeln!(out, " {tag}  {n}");
    }

    // Column-wise view of the matrix.
    let mut by_col: Vec<Vec<(usize, f64)>> = vec![Vec::new(); model.variables.len()];
    for (r, c) in model.constraints.iter().enumerate() {
        for &(v, a) in &c.terms {
            by_col[v.0].push((r, a));
        }
    }
    out.push_str("COLUMNS\n");
    let mut in_integer_block = false;
    let mut marker = 0;
    for (k, v) in model.variables.iter().enumerate() {
        let is_int = v.kind == VarKind::Binary;
        if is_int != in_integer_block {
            let kind = if is_int { "'INTORG'" } else { "'INTEND'" };
            let _ = writeln!(out, "    MARKER{marker:<4}  'MARKER'                 {kind}");
            marker += 1;
            in_integer_block = is_int;
        }
        let col = &names.columns[k];
        let obj = model.objective[k];
        if obj != 0.0 || by_col[k].is_empty() {
            out.push_str(&entry("", col, OBJECTIVE_ROW, obj));
        }
        for &(r, a) in &by_col[k] {
            out.push_str(&entry("", col, &names.rows[r], a));
        }
    }
    if in_integer_block {
        let _ = writeln!(out, "    MARKER{marker:<4}  'MARKER'                 'INTEND'");
    }
    out.push_str("RHS\n");
    for (c, n) in model.constraints.iter().zip(&names.rows) {
        if c.rhs != 0.0 {
            out.push_str(&entry("", "RHS", n, c.rhs));
        }
    }
    out.push_str("BOUNDS\n");
    for (v, n) in model.variables.iter().zip(&names.columns) {
        if v.lower == v.upper {
            out.push_str(&entry("FX", "BND", n, v.lower));
            continue;
        }
        if v.lower == f64::NEG_INFINITY {
            let _ = writeln!(out, " MI BND       {n}");
        } else {
            out.push_str(&entry("LO", "BND", n, v.lower));
        }
        if v.upper == f64::INFINITY {
            let _ = writeln!(out, " PL BND       {n}");
        } else {
            out.push_str(&entry("UP", "BND", n, v.upper));
        }
    }
    out.push_str("ENDATA\n");
    (out, names)
}

/// Path of the name map written next to an MPS file.
pub fn names_path(path: &Path) -> PathBuf {
    let mut p = path.as_os_str().to_owned();
    p.push(".names");
    PathBuf::from(p)
}

/// Writes the model as MPS. When names had to be replaced, a map with lines
/// `column|row <mps name> <model name>` is written to [`names_path`].
pub fn write_mps(model: &MilpModel, path: &Path) -> std::io::Result<MpsNames> {
    let (text, names) = to_mps_string(model);
    std::fs::write(path, text)?;
    if names.renamed {
        let mut f = std::io::BufWriter::new(std::fs::File::create(names_path(path))?);
        for (v, n) in model.variables.iter().zip(&names.columns) {
            writeln!(f, "column {n} {}", v.name)?;
        }
        for (c, n) in model.constraints.iter().zip(&names.rows) {
            writeln!(f, "row {n} {}", c.name)?;
        }
        f.flush()?;
    }
    Ok(names)
}

#[derive(Clone, Copy, PartialEq)]
enum Section {
    None,
    Name,
    ObjSense,
    Rows,
    Columns,
    Rhs,
    Ranges,
    Bounds,
    End,
}

/// Parses MPS text (fixed or free layout) into a model. Rows other than the
/// first objective row keep their names; the objective constant, if any, is
/// dropped.
pub fn parse_mps(text: &str) -> Result<MilpModel, MpsError> {
    let mut model = MilpModel::new("");
    let mut section = Section::None;
    let mut objective_row: Option<String> = None;
    let mut row_index: HashMap<String, usize> = HashMap::new();
    let mut col_index: HashMap<String, usize> = HashMap::new();
    let mut integer = false;
    let mut bounded: HashSet<usize> = HashSet::new();
    let syntax = |line: usize, reason: &str| MpsError::Syntax {
        line,
        reason: reason.to_string(),
    };

    for (ln, raw) in text.lines().enumerate() {
        let line_no = ln + 1;
        if raw.starts_with('*') || raw.trim().is_empty() {
            continue;
        }
        let tokens: Vec<&str> = raw.split_whitespace().collect();
        if !raw.starts_with([' ', '\t']) {
            section = match tokens[0] {
                "NAME" => {
                    model.name = tokens.get(1).unwrap_or(&"").to_string();
                    Section::Name
                }
                "OBJSENSE" => {
                    if let Some(s) = tokens.get(1) {
                        model.sense = parse_sense(s).ok_or_else(|| syntax(line_no, "bad OBJSENSE"))?;
                    }
                    Section::ObjSense
                }
                "ROWS" => Section::Rows,
                "COLUMNS" => Section::Columns,
                "RHS" => Section::Rhs,
                "RANGES" => Section::Ranges,
                "BOUNDS" => Section::Bounds,
                "ENDATA" => Section::End,
                other => return Err(syntax(line_no, &format!("unknown section {other}"))),
            };
            continue;
        }
        match section {
            Section::ObjSense => {
                model.sense = parse_sense(tokens[0]).ok_or_else(|| syntax(line_no, "bad OBJSENSE"))?;
            }
            Section::Rows => {
                if tokens.len() != 2 {
                    return Err(syntax(line_no, "ROWS entry needs a type and a name"));
                }
                let sense = match tokens[0] {
                    "N" => {
                        if objective_row.is_none() {
                            objective_row = Some(tokens[1].to_string());
                        }
                        continue;
                    }
                    "L" => RowSense::Le,
                    "G" => RowSense::Ge,
                    "E" => RowSense::Eq,
                    _ => return Err(syntax(line_no, "unknown row type")),
                };
                row_index.insert(tokens[1].to_string(), model.constraints.len());
                model
                    .add_constraint(tokens[1], &[], sense, 0.0)
                    .map_err(|e| syntax(line_no, &e.to_string()))?;
            }
            Section::Columns => {
                if tokens.len() >= 3 && tokens[1] == "'MARKER'" {
                    integer = match tokens[2] {
                        "'INTORG'" => true,
                        "'INTEND'" => false,
                        _ => return Err(syntax(line_no, "unknown marker")),
                    };
                    continue;
                }
                if tokens.len() != 3 && tokens.len() != 5 {
                    return Err(syntax(line_no, "COLUMNS entry needs one or two row/value pairs"));
                }
                let col = match col_index.get(tokens[0]) {
                    Some(&k) => k,
                    None => {
                        let (kind, upper) = if integer {
                            (VarKind::Binary, 1.0)
                        } else {
                            (VarKind::Continuous, f64::INFINITY)
                        };
                        let id = model
                            .add_var(tokens[0], kind, 0.0, upper)
                            .map_err(|e| syntax(line_no, &e.to_string()))?;
                        col_index.insert(tokens[0].to_string(), id.0);
                        id.0
                    }
                };
                for pair in tokens[1..].chunks(2) {
                    let value = parse_num(pair[1]).ok_or_else(|| syntax(line_no, "bad number"))?;
                    if Some(pair[0]) == objective_row.as_deref() {
                        model.objective[col] += value;
                    } else {
                        let &r = row_index
                            .get(pair[0])
                            .ok_or_else(|| syntax(line_no, &format!("unknown row {}", pair[0])))?;
                        model.constraints[r].terms.push((VarId(col), value));
                    }
                }
            }
            Section::Rhs => {
                let pairs = if tokens.len() % 2 == 1 { &tokens[1..] } else { &tokens[..] };
                for pair in pairs.chunks(2) {
                    if pair.len() != 2 {
                        return Err(syntax(line_no, "RHS entry needs row/value pairs"));
                    }
                    let value = parse_num(pair[1]).ok_or_else(|| syntax(line_no, "bad number"))?;
                    if Some(pair[0]) == objective_row.as_deref() {
                        continue;
                    }
                    let &r = row_index
                        .get(pair[0])
                        .ok_or_else(|| syntax(line_no, &format!("unknown row {}", pair[0])))?;
                    model.constraints[r].rhs = value;
                }
            }
            Section::Ranges => return Err(syntax(line_no, "RANGES are not supported")),
            Section::Bounds => {
                if tokens.len() < 3 {
                    return Err(syntax(line_no, "BOUNDS entry too short"));
                }
                let kind = tokens[0];
                let (col_name, value) = match kind {
                    "FR" | "MI" | "PL" | "BV" if tokens.len() == 3 => (tokens[2], None),
                    "FR" | "MI" | "PL" | "BV" if tokens.len() == 2 => (tokens[1], None),
                    _ if tokens.len() == 4 => (tokens[2], Some(tokens[3])),
                    _ => return Err(syntax(line_no, "malformed BOUNDS entry")),
                };
                let &col = col_index
                    .get(col_name)
                    .ok_or_else(|| syntax(line_no, &format!("unknown column {col_name}")))?;
                let value = match value {
                    Some(s) => Some(parse_num(s).ok_or_else(|| syntax(line_no, "bad number"))?),
                    None => None,
                };
                let v = &mut model.variables[col];
                if bounded.insert(col) && v.kind == VarKind::Binary {
                    // Integer columns default to [0, 1] only until bounds are given.
                    v.upper = f64::INFINITY;
                }
                match (kind, value) {
                    ("UP", Some(x)) => v.upper = x,
                    ("LO", Some(x)) => v.lower = x,
                    ("FX", Some(x)) => {
                        v.lower = x;
                        v.upper = x;
                    }
                    ("MI", None) => v.lower = f64::NEG_INFINITY,
                    ("PL", None) => v.upper = f64::INFINITY,
                    ("FR", None) => {
                        v.lower = f64::NEG_INFINITY;
                        v.upper = f64::INFINITY;
                    }
                    ("BV", None) => {
                        v.kind = VarKind::Binary;
                        v.lower = 0.0;
                        v.upper = 1.0;
                    }
                    _ => return Err(syntax(line_no, &format!("unsupported bound type {kind}"))),
                }
            }
            Section::Name | Section::None | Section::End => {
                return Err(syntax(line_no, "data outside a section"));
            }
        }
    }
    if section != Section::End {
        return Err(syntax(text.lines().count(), "missing ENDATA"));
    }
    for v in &mut model.variables {
        if v.kind == VarKind::Binary && !(v.lower >= 0.0 && v.upper <= 1.0) {
            return Err(MpsError::Syntax {
                line: 0,
                reason: format!("integer column {} is not binary", v.name),
            });
        }
    }
    Ok(model)
}

/// Reads an MPS file.
pub fn read_mps(path: &Path) -> Result<MilpModel, MpsError> {
    parse_mps(&std::fs::read_to_string(path)?)
}

fn parse_sense(token: &str) -> Option<ObjSense> {
    match token.to_ascii_uppercase().as_str() {
        "MAX" | "MAXIMIZE" => Some(ObjSense::Maximize),
        "MIN" | "MINIMIZE" => Some(ObjSense::Minimize),
        _ => None,
    }
}

fn parse_num(s: &str) -> Option<f64> {
    s.parse::<f64>().ok().filter(|x| !x.is_nan())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> MilpModel {
        let mut m = MilpModel::new("sample");
        let x = m.continuous("x", -1.5, 0.1).unwrap();
        let b = m.binary("b").unwrap();
        let y = m.continuous("a_very_long_name", 0.0, 3.0).unwrap();
        m.set_objective(x, 1.0 / 3.0);
        m.set_objective(b, -2.0);
        m.add_constraint("c1", &[(x, 1e-7), (b, 12345.678901234567)], RowSense::Le, 4.0).unwrap();
        m.add_constraint("c1", &[(y, 1.0), (x, -1.0)], RowSense::Eq, -0.2).unwrap();
        m
    }

    #[test]
    fn numbers_round_trip_exactly() {
        for x in [1.0 / 3.0, -1e-300, 6.02214076e23, 0.1, 12345.678901234567, -0.0] {
            let back: f64 = format_number(x).parse().unwrap();
            assert_eq!(back, x);
        }
        assert_eq!(format_number(4.0), "4");
    }

    #[test]
    fn invalid_and_colliding_names_are_replaced() {
        let m = sample();
        let names = MpsNames::for_model(&m);
        assert!(names.renamed);
        assert_eq!(names.columns[0], "x");
        assert_ne!(names.columns[2], "a_very_long_name");
        assert_eq!(names.rows[0], "c1");
        assert_ne!(names.rows[1], "c1");
    }

    #[test]
    fn single_bounded_variable_without_rows() {
        let mut m = MilpModel::new("one");
        m.continuous("x", 0.0, 2.0).unwrap();
        let (text, _) = to_mps_string(&m);
        for section in ["NAME", "ROWS", "COLUMNS", "RHS", "BOUNDS", "ENDATA"] {
            assert!(text.lines().any(|l| l.starts_with(section)), "{section}");
        }
        let back = parse_mps(&text).unwrap();
        assert_eq!(back.variables[0].upper, 2.0);
    }

    #[test]
    fn binaries_sit_between_integer_markers() {
        let (text, _) = to_mps_string(&sample());
        let lines: Vec<&str> = text.lines().collect();
        let start = lines.iter().position(|l| l.contains("'INTORG'")).unwrap();
        let end = lines.iter().position(|l| l.contains("'INTEND'")).unwrap();
        assert!(lines[start + 1..end].iter().all(|l| l.split_whitespace().next() == Some("b")));
        assert!(text.contains(" UP BND       b"));
        assert!(text.contains(" LO BND       b"));
    }

    #[test]
    fn own_reader_recovers_the_model() {
        let m = sample();
        let (text, names) = to_mps_string(&m);
        let back = parse_mps(&text).unwrap();
        assert_eq!(back.sense, ObjSense::Maximize);
        assert_eq!(back.variables.len(), m.variables.len());
        for (k, v) in m.variables.iter().enumerate() {
            let w = &back.variables[k];
            assert_eq!(w.name, names.columns[k]);
            assert_eq!((w.kind, w.lower, w.upper), (v.kind, v.lower, v.upper));
            assert_eq!(back.objective[k], m.objective[k]);
        }
        for (c, d) in m.constraints.iter().zip(&back.constraints) {
            assert_eq!((c.sense, c.rhs), (d.sense, d.rhs));
            let mut a = c.terms.clone();
            let mut b = d.terms.clone();
            a.sort_by_key(|t| t.0);
            b.sort_by_key(|t| t.0);
            assert_eq!(a, b);
        }
    }

    #[test]
    fn name_map_is_written_when_needed() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.mps");
        write_mps(&sample(), &path).unwrap();
        let map = std::fs::read_to_string(names_path(&path)).unwrap();
        assert!(map.lines().any(|l| l.ends_with(" a_very_long_name")));
    }
}
