//! Fixed-format MPS writer and reader.
//!
//! Names are padded to the standard columns. Values are written in shortest
//! round-trip form and may run past their field, so the reader splits on
//! whitespace rather than on column positions.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use super::model::{MilpModel, Row, RowSense, VarKind};
use super::MilpError;

const OBJ_ROW: &str = "OBJ";
const RHS_SET: &str = "RHS";
const BOUND_SET: &str = "BND";

fn record(out: &mut String, kind: &str, fields: &[&str]) {
    // Columns 2-3, 5-12, 15-22, 25-36, 40-47, 50-61.
    let mut line = format!(" {kind:<2} ");
    let widths = [10usize, 10, 15, 10];
    for (k, f) in fields.iter().enumerate() {
        if k + 1 < fields.len() {
            let _ = write!(line, "{f:<w$}", w = widths[k]);
            if f.len() >= widths[k] {
                line.push(' ');
            }
        } else {
            line.push_str(f);
        }
    }
    out.push_str(line.trim_end());
    out.push('\n');
}

fn num(v: f64) -> String {
    format!("{v:?}")
}

/// Renders `model` as fixed-format MPS text.
pub fn to_mps_string(model: &MilpModel) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "NAME          {}", model.name);
    out.push_str("OBJSENSE\n");
    out.push_str(if model.maximize { "    MAX\n" } else { "    MIN\n" });
    out.push_str("ROWS\n");
    record(&mut out, "N", &[OBJ_ROW]);
    for r in &model.rows {
        let kind = match r.sense {
            RowSense::Le => "L",
            RowSense::Ge => "G",
            RowSense::Eq => "E",
        };
        record(&mut out, kind, &[&r.name]);
    }

    let mut by_col: Vec<Vec<(usize, f64)>> = vec![Vec::new(); model.n_vars()];
    for (i, r) in model.rows.iter().enumerate() {
        for &(j, c) in &r.coefs {
            by_col[j].push((i, c));
        }
    }
    out.push_str("COLUMNS\n");
    for (j, v) in model.vars.iter().enumerate() {
        let mut wrote = false;
        if v.objective != 0.0 {
            record(&mut out, "", &[&v.name, OBJ_ROW, &num(v.objective)]);
            wrote = true;
        }
        for &(i, c) in &by_col[j] {
            record(&mut out, "", &[&v.name, &model.rows[i].name, &num(c)]);
            wrote = true;
        }
        if !wrote {
            // Keep the column declared even without coefficients.
            record(&mut out, "", &[&v.name, OBJ_ROW, "0"]);
        }
    }

    out.push_str("RHS\n");
    for r in model.rows.iter().filter(|r| r.rhs != 0.0) {
        record(&mut out, "", &[RHS_SET, &r.name, &num(r.rhs)]);
    }

    out.push_str("BOUNDS\n");
    for v in &model.vars {
        match v.kind {
            VarKind::Binary if v.lower == 0.0 && v.upper == 1.0 => {
                record(&mut out, "BV", &[BOUND_SET, &v.name]);
            }
            _ if v.lower == v.upper => {
                record(&mut out, "FX", &[BOUND_SET, &v.name, &num(v.lower)]);
            }
            _ => {
                record(&mut out, "LO", &[BOUND_SET, &v.name, &num(v.lower)]);
                record(&mut out, "UP", &[BOUND_SET, &v.name, &num(v.upper)]);
            }
        }
    }
    out.push_str("ENDATA\n");
    out
}

pub fn write_mps(model: &MilpModel, path: impl AsRef<Path>) -> Result<(), MilpError> {
    let path = path.as_ref();
    fs::write(path, to_mps_string(model)).map_err(|source| MilpError::Io {
        path: path.to_path_buf(),
        source,
    })
}

pub fn read_mps(path: impl AsRef<Path>) -> Result<MilpModel, MilpError> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|source| MilpError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    parse_mps(&text)
}

#[derive(Clone, Copy, PartialEq)]
enum Section {
    None,
    ObjSense,
    Rows,
    Columns,
    Rhs,
    Bounds,
}

/// Parses MPS text. Columns without bounds get `[0, +inf)`; integer markers
/// and `BV` bounds both mark binaries.
pub fn parse_mps(text: &str) -> Result<MilpModel, MilpError> {
    let mut model = MilpModel::new("", false);
    let mut section = Section::None;
    let mut objective_row: Option<String> = None;
    let mut row_index: HashMap<String, usize> = HashMap::new();
    let mut col_index: HashMap<String, usize> = HashMap::new();
    let mut row_coefs: Vec<Vec<(usize, f64)>> = Vec::new();
    let mut in_integer_block = false;
    let mut ended = false;

    let err = |line: usize, msg: String| MilpError::Parse { line, message: msg };
    let value = |line: usize, s: &str| -> Result<f64, MilpError> {
        s.parse::<f64>()
            .map_err(|_| err(line, format!("invalid number `{s}`")))
    };

    for (k, raw) in text.lines().enumerate() {
        let line_no = k + 1;
        if raw.trim().is_empty() || raw.starts_with('*') {
            continue;
        }
        let tokens: Vec<&str> = raw.split_whitespace().collect();
        if !raw.starts_with(' ') {
            section = match tokens[0] {
                "NAME" => {
                    model.name = tokens.get(1).copied().unwrap_or("").to_string();
                    Section::None
                }
                "OBJSENSE" => {
                    if let Some(s) = tokens.get(1) {
                        model.maximize = *s == "MAX" || *s == "MAXIMIZE";
                        Section::None
                    } else {
                        Section::ObjSense
                    }
                }
                "ROWS" => Section::Rows,
                "COLUMNS" => Section::Columns,
                "RHS" => Section::Rhs,
                "BOUNDS" => Section::Bounds,
                "ENDATA" => {
                    ended = true;
                    break;
                }
                other => return Err(err(line_no, format!("unsupported section `{other}`"))),
            };
            continue;
        }
        match section {
            Section::ObjSense => {
                model.maximize = tokens[0] == "MAX" || tokens[0] == "MAXIMIZE";
            }
            Section::Rows => {
                if tokens.len() != 2 {
                    return Err(err(line_no, "row record needs a type and a name".into()));
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
                    t => return Err(err(line_no, format!("unknown row type `{t}`"))),
                };
                row_index.insert(tokens[1].to_string(), model.rows.len());
                model.rows.push(Row::new(tokens[1], sense, 0.0, Vec::new()));
                row_coefs.push(Vec::new());
            }
            Section::Columns => {
                if tokens.len() >= 3 && tokens[1] == "'MARKER'" {
                    in_integer_block = tokens[2] == "'INTORG'";
                    continue;
                }
                if tokens.len() != 3 && tokens.len() != 5 {
                    return Err(err(line_no, "column record needs 3 or 5 fields".into()));
                }
                let j = match col_index.get(tokens[0]) {
                    Some(&j) => j,
                    None => {
                        let kind = if in_integer_block { VarKind::Binary } else { VarKind::Continuous };
                        let upper = if in_integer_block { 1.0 } else { f64::INFINITY };
                        let j = model.add_var(tokens[0], 0.0, upper, kind, 0.0);
                        col_index.insert(tokens[0].to_string(), j);
                        j
                    }
                };
                for pair in tokens[1..].chunks(2) {
                    let v = value(line_no, pair[1])?;
                    if Some(pair[0]) == objective_row.as_deref() {
                        model.vars[j].objective = v;
                    } else {
                        let &i = row_index
                            .get(pair[0])
                            .ok_or_else(|| err(line_no, format!("unknown row `{}`", pair[0])))?;
                        if v != 0.0 {
                            row_coefs[i].push((j, v));
                        }
                    }
                }
            }
            Section::Rhs => {
                let fields = if tokens.len() % 2 == 1 { &tokens[1..] } else { &tokens[..] };
                for pair in fields.chunks(2) {
                    if pair.len() != 2 {
                        return Err(err(line_no, "rhs record needs name/value pairs".into()));
                    }
                    let v = value(line_no, pair[1])?;
                    if Some(pair[0]) == objective_row.as_deref() {
                        continue;
                    }
                    let &i = row_index
                        .get(pair[0])
                        .ok_or_else(|| err(line_no, format!("unknown row `{}`", pair[0])))?;
                    model.rows[i].rhs = v;
                }
            }
            Section::Bounds => {
                if tokens.len() < 3 {
                    return Err(err(line_no, "bound record too short".into()));
                }
                let &j = col_index
                    .get(tokens[2])
                    .ok_or_else(|| err(line_no, format!("unknown column `{}`", tokens[2])))?;
                let v = tokens.get(3).map(|s| value(line_no, s)).transpose()?;
                let need = |v: Option<f64>| v.ok_or_else(|| err(line_no, "bound value missing".into()));
                let var = &mut model.vars[j];
                match tokens[0] {
                    "LO" => var.lower = need(v)?,
                    "UP" => var.upper = need(v)?,
                    "FX" => {
                        var.lower = need(v)?;
                        var.upper = var.lower;
                    }
                    "MI" => var.lower = f64::NEG_INFINITY,
                    "PL" => var.upper = f64::INFINITY,
                    "FR" => {
                        var.lower = f64::NEG_INFINITY;
                        var.upper = f64::INFINITY;
                    }
                    "BV" => {
                        var.kind = VarKind::Binary;
                        var.lower = 0.0;
                        var.upper = 1.0;
                    }
                    t => return Err(err(line_no, format!("unsupported bound type `{t}`"))),
                }
            }
            Section::None => return Err(err(line_no, "data outside a section".into())),
        }
    }
    if !ended {
        return Err(err(text.lines().count(), "missing ENDATA".into()));
    }
    for (row, coefs) in model.rows.iter_mut().zip(row_coefs) {
        *row = Row::new(std::mem::take(&mut row.name), row.sense, row.rhs, coefs);
    }
    Ok(model)
}
