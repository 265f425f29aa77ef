//! Fixed-format MPS output and a whitespace-separated reader.

use std::collections::HashMap;

use num_bigint::BigInt;
use thiserror::Error;

use super::{MipConstraint, MipModel, MipVariable, VarKind};
use crate::linalg::{Rational, Sense};

const OBJ_ROW: &str = "OBJ";
const BOUND_SET: &str = "BND";
const RHS_SET: &str = "RHS";
const VALUE_WIDTH: usize = 12;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum MpsError {
    #[error("name `{0}` is longer than 8 characters")]
    NameTooLong(String),
    #[error("value {0} has no exact decimal form within 12 characters")]
    ValueTooWide(Rational),
    #[error("line {line}: {msg}")]
    Syntax { line: usize, msg: String },
    #[error("integer column `{0}` is not binary")]
    NonBinaryInteger(String),
}

fn syntax(line: usize, msg: impl Into<String>) -> MpsError {
    MpsError::Syntax {
        line,
        msg: msg.into(),
    }
}

fn check_name(name: &str) -> Result<&str, MpsError> {
    if name.len() > 8 || name.is_empty() || name.contains(char::is_whitespace) {
        return Err(MpsError::NameTooLong(name.to_string()));
    }
    Ok(name)
}

fn format_value(v: &Rational) -> Result<String, MpsError> {
    let text = if v.is_integer() {
        v.to_string()
    } else {
        v.to_decimal_string()
            .ok_or_else(|| MpsError::ValueTooWide(v.clone()))?
    };
    if text.len() > VALUE_WIDTH {
        return Err(MpsError::ValueTooWide(v.clone()));
    }
    Ok(text)
}

fn field_line(code: &str, a: &str, b: &str, value: &str) -> String {
    format!(" {code:<2} {a:<8}  {b:<8}  {value}")
        .trim_end()
        .to_string()
}

/// Renders the model in fixed-format MPS with an `OBJSENSE MAX` section.
pub fn emit_mps(model: &MipModel) -> Result<String, MpsError> {
    let mut out = String::new();
    out.push_str(&format!("NAME          {}\n", model.name));
    out.push_str("OBJSENSE\n    MAX\n");
    out.push_str("ROWS\n");
    out.push_str(&field_line("N", OBJ_ROW, "", ""));
    out.push('\n');
    for c in &model.constraints {
        let code = match c.sense {
            Sense::Le => "L",
            Sense::Ge => "G",
            Sense::Eq => "E",
        };
        out.push_str(&field_line(code, check_name(&c.name)?, "", ""));
        out.push('\n');
    }

    let n = model.num_vars();
    let mut entries: Vec<Vec<(&str, &Rational)>> = vec![Vec::new(); n];
    for (j, c) in &model.objective {
        if !c.is_zero() {
            entries[*j].push((OBJ_ROW, c));
        }
    }
    for c in &model.constraints {
        for (j, a) in &c.coefs {
            if !a.is_zero() {
                entries[*j].push((&c.name, a));
            }
        }
    }
    let zero = Rational::zero();
    out.push_str("COLUMNS\n");
    let mut in_marker = false;
    for (j, var) in model.variables.iter().enumerate() {
        let binary = var.kind == VarKind::Binary;
        if binary != in_marker {
            let tag = if binary { "'INTORG'" } else { "'INTEND'" };
            out.push_str(&field_line("", "MARKER", "'MARKER'", tag));
            out.push('\n');
            in_marker = binary;
        }
        let name = check_name(&var.name)?;
        if entries[j].is_empty() {
            entries[j].push((OBJ_ROW, &zero));
        }
        for (row, a) in &entries[j] {
            out.push_str(&field_line("", name, row, &format_value(a)?));
            out.push('\n');
        }
    }
    if in_marker {
        out.push_str(&field_line("", "MARKER", "'MARKER'", "'INTEND'"));
        out.push('\n');
    }

    out.push_str("RHS\n");
    for c in &model.constraints {
        if !c.rhs.is_zero() {
            out.push_str(&field_line("", RHS_SET, &c.name, &format_value(&c.rhs)?));
            out.push('\n');
        }
    }

    out.push_str("BOUNDS\n");
    for var in &model.variables {
        let name = &var.name;
        let mut bound = |code: &str, v: Option<&Rational>| -> Result<(), MpsError> {
            let value = v.map(format_value).transpose()?.unwrap_or_default();
            out.push_str(&field_line(code, BOUND_SET, name, &value));
            out.push('\n');
            Ok(())
        };
        match (&var.lower, &var.upper) {
            (None, None) => bound("FR", None)?,
            (Some(l), Some(u)) if l == u => bound("FX", Some(l))?,
            (lower, upper) => {
                match lower {
                    None => bound("MI", None)?,
                    Some(l) if !l.is_zero() => bound("LO", Some(l))?,
                    Some(_) => {}
                }
                if let Some(u) = upper {
                    bound("UP", Some(u))?;
                }
            }
        }
    }
    out.push_str("ENDATA\n");
    Ok(out)
}

/// Exact value of a decimal literal such as `-15`, `0.25` or `1.5e-3`.
fn parse_decimal(s: &str) -> Option<Rational> {
    let (mantissa, exp) = match s.find(['e', 'E']) {
        Some(i) => (&s[..i], s[i + 1..].parse::<i32>().ok()?),
        None => (s, 0),
    };
    let (neg, digits) = match mantissa.strip_prefix('-') {
        Some(rest) => (true, rest),
        None => (false, mantissa.strip_prefix('+').unwrap_or(mantissa)),
    };
    let (int_part, frac_part) = digits.split_once('.').unwrap_or((digits, ""));
    if int_part.is_empty() && frac_part.is_empty() {
        return None;
    }
    if !int_part
        .chars()
        .chain(frac_part.chars())
        .all(|c| c.is_ascii_digit())
    {
        return None;
    }
    let all: String = format!("{int_part}{frac_part}");
    let mut num: BigInt = all.parse().ok()?;
    if neg {
        num = -num;
    }
    let shift = exp - frac_part.len() as i32;
    let ten = BigInt::from(10);
    let scale = num_traits::pow(ten, shift.unsigned_abs() as usize);
    Some(if shift >= 0 {
        Rational::from_bigints(num * scale, BigInt::from(1))
    } else {
        Rational::from_bigints(num, scale)
    })
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

/// Reads MPS written by [`emit_mps`] or any free-format MPS using the
/// sections NAME, OBJSENSE, ROWS, COLUMNS, RHS, BOUNDS, ENDATA. A minimizing
/// objective is negated so the returned model maximizes.
pub fn parse_mps(text: &str) -> Result<MipModel, MpsError> {
    let mut model = MipModel::default();
    let mut section = Section::None;
    let mut maximize = false;
    let mut objective_row: Option<String> = None;
    let mut row_index: HashMap<String, usize> = HashMap::new();
    let mut col_index: HashMap<String, usize> = HashMap::new();
    let mut integer = false;
    let mut ended = false;

    for (lineno, raw) in text.lines().enumerate() {
        let line = lineno + 1;
        if raw.trim().is_empty() || raw.starts_with('*') {
            continue;
        }
        let tokens: Vec<&str> = raw.split_whitespace().collect();
        if !raw.starts_with([' ', '\t']) {
            section = match tokens[0] {
                "NAME" => {
                    model.name = tokens.get(1).unwrap_or(&"").to_string();
                    Section::None
                }
                "OBJSENSE" => match tokens.get(1) {
                    Some(s) => {
                        maximize =
                            parse_sense(s).ok_or_else(|| syntax(line, "unknown OBJSENSE"))?;
                        Section::None
                    }
                    None => Section::ObjSense,
                },
                "ROWS" => Section::Rows,
                "COLUMNS" => Section::Columns,
                "RHS" => Section::Rhs,
                "BOUNDS" => Section::Bounds,
                "ENDATA" => {
                    ended = true;
                    break;
                }
                other => return Err(syntax(line, format!("unsupported section {other}"))),
            };
            continue;
        }
        match section {
            Section::None => return Err(syntax(line, "data outside a section")),
            Section::ObjSense => {
                maximize =
                    parse_sense(tokens[0]).ok_or_else(|| syntax(line, "unknown OBJSENSE"))?;
            }
            Section::Rows => {
                let [code, name] = tokens[..] else {
                    return Err(syntax(line, "expected row type and name"));
                };
                let sense = match code {
                    "N" => {
                        if objective_row.is_none() {
                            objective_row = Some(name.to_string());
                        }
                        continue;
                    }
                    "L" => Sense::Le,
                    "G" => Sense::Ge,
                    "E" => Sense::Eq,
                    _ => return Err(syntax(line, format!("unknown row type {code}"))),
                };
                row_index.insert(name.to_string(), model.constraints.len());
                model.constraints.push(MipConstraint {
                    name: name.to_string(),
                    coefs: Vec::new(),
                    sense,
                    rhs: Rational::zero(),
                });
            }
            Section::Columns => {
                if tokens.get(1) == Some(&"'MARKER'") {
                    match tokens.get(2) {
                        Some(&"'INTORG'") => integer = true,
                        Some(&"'INTEND'") => integer = false,
                        _ => return Err(syntax(line, "unknown marker")),
                    }
                    continue;
                }
                if tokens.len() != 3 && tokens.len() != 5 {
                    return Err(syntax(line, "expected column, row, value"));
                }
                let col = tokens[0];
                let j = match col_index.get(col) {
                    Some(&j) => j,
                    None => {
                        let j = model.variables.len();
                        col_index.insert(col.to_string(), j);
                        model.variables.push(MipVariable {
                            name: col.to_string(),
                            kind: if integer {
                                VarKind::Binary
                            } else {
                                VarKind::Continuous
                            },
                            lower: Some(Rational::zero()),
                            upper: None,
                        });
                        j
                    }
                };
                for pair in tokens[1..].chunks(2) {
                    let value = parse_decimal(pair[1])
                        .ok_or_else(|| syntax(line, format!("bad number {}", pair[1])))?;
                    if objective_row.as_deref() == Some(pair[0]) {
                        if !value.is_zero() {
                            model.objective.push((j, value));
                        }
                    } else {
                        let &i = row_index
                            .get(pair[0])
                            .ok_or_else(|| syntax(line, format!("unknown row {}", pair[0])))?;
                        if !value.is_zero() {
                            model.constraints[i].coefs.push((j, value));
                        }
                    }
                }
            }
            Section::Rhs => {
                let pairs = match tokens.len() {
                    2 | 4 => &tokens[..],
                    3 | 5 => &tokens[1..],
                    _ => return Err(syntax(line, "expected rhs entries")),
                };
                for pair in pairs.chunks(2) {
                    let value = parse_decimal(pair[1])
                        .ok_or_else(|| syntax(line, format!("bad number {}", pair[1])))?;
                    if objective_row.as_deref() == Some(pair[0]) {
                        return Err(syntax(line, "objective constants are not supported"));
                    }
                    let &i = row_index
                        .get(pair[0])
                        .ok_or_else(|| syntax(line, format!("unknown row {}", pair[0])))?;
                    model.constraints[i].rhs = value;
                }
            }
            Section::Bounds => {
                let code = tokens[0];
                let needs_value = !matches!(code, "FR" | "MI" | "PL" | "BV");
                let (col, value) = match (tokens.len(), needs_value) {
                    (3, false) | (2, false) => (tokens[tokens.len() - 1], None),
                    (4, true) => (tokens[2], Some(tokens[3])),
                    (3, true) => (tokens[1], Some(tokens[2])),
                    _ => return Err(syntax(line, "malformed bound")),
                };
                let &j = col_index
                    .get(col)
                    .ok_or_else(|| syntax(line, format!("unknown column {col}")))?;
                let value = value
                    .map(|v| {
                        parse_decimal(v).ok_or_else(|| syntax(line, format!("bad number {v}")))
                    })
                    .transpose()?;
                let var = &mut model.variables[j];
                match code {
                    "UP" => var.upper = value,
                    "LO" => var.lower = value,
                    "FX" => {
                        var.lower = value.clone();
                        var.upper = value;
                    }
                    "FR" => {
                        var.lower = None;
                        var.upper = None;
                    }
                    "MI" => var.lower = None,
                    "PL" => var.upper = None,
                    "BV" => {
                        var.kind = VarKind::Binary;
                        var.lower = Some(Rational::zero());
                        var.upper = Some(Rational::one());
                    }
                    _ => return Err(syntax(line, format!("unknown bound type {code}"))),
                }
            }
        }
    }
    if !ended {
        return Err(syntax(text.lines().count(), "missing ENDATA"));
    }
    for var in &model.variables {
        if var.kind == VarKind::Binary {
            let lo_ok = var.lower.as_ref().is_some_and(|l| !l.is_negative());
            let hi_ok = var.upper.as_ref().is_some_and(|u| *u <= Rational::one());
            if !lo_ok || !hi_ok {
                return Err(MpsError::NonBinaryInteger(var.name.clone()));
            }
        }
    }
    if !maximize {
        for (_, c) in model.objective.iter_mut() {
            *c = -&*c;
        }
    }
    Ok(model)
}

fn parse_sense(s: &str) -> Option<bool> {
    match s {
        "MAX" | "MAXIMIZE" => Some(true),
        "MIN" | "MINIMIZE" => Some(false),
        _ => None,
    }
}
