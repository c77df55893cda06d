//! CSV and JSON writers. Floats in CSV use 17 significant digits; JSON
//! floats are printed in shortest round-trip form.

use std::fmt::Write as _;
use std::io::Write;
use std::path::Path;

use serde_json::{json, Value};

use crate::config::{Command, Format, ParamSet};
use crate::CliError;

pub const SCHEMA_VERSION: &str = "1";

#[derive(Debug, Clone, PartialEq)]
pub enum Cell {
    Float(f64),
    Int(usize),
    Text(String),
    Bool(bool),
    Empty,
}

impl From<f64> for Cell {
    fn from(v: f64) -> Self {
        Cell::Float(v)
    }
}
impl From<usize> for Cell {
    fn from(v: usize) -> Self {
        Cell::Int(v)
    }
}
impl From<bool> for Cell {
    fn from(v: bool) -> Self {
        Cell::Bool(v)
    }
}
impl From<&str> for Cell {
    fn from(v: &str) -> Self {
        Cell::Text(v.to_string())
    }
}
impl<T: Into<Cell>> From<Option<T>> for Cell {
    fn from(v: Option<T>) -> Self {
        v.map_or(Cell::Empty, Into::into)
    }
}

impl Cell {
    fn render(&self, out: &mut String) {
        match self {
            Cell::Float(v) if v.is_finite() => write!(out, "{v:.16e}").unwrap(),
            Cell::Float(v) if v.is_nan() => out.push_str("nan"),
            Cell::Float(v) => out.push_str(if *v > 0.0 { "inf" } else { "-inf" }),
            Cell::Int(v) => write!(out, "{v}").unwrap(),
            Cell::Text(s) => out.push_str(s),
            Cell::Bool(b) => out.push_str(if *b { "true" } else { "false" }),
            Cell::Empty => {}
        }
    }
}

/// A command result in both shapes.
#[derive(Debug, Clone)]
pub struct Output {
    pub json: Value,
    pub header: &'static [&'static str],
    pub rows: Vec<Vec<Cell>>,
}

pub fn to_csv(out: &Output) -> String {
    let mut s = out.header.join(",");
    s.push('\n');
    for row in &out.rows {
        debug_assert_eq!(row.len(), out.header.len());
        for (i, cell) in row.iter().enumerate() {
            if i > 0 {
                s.push(',');
            }
            cell.render(&mut s);
        }
        s.push('\n');
    }
    s
}

pub fn to_json(command: Command, params: &ParamSet, out: &Output) -> String {
    let doc = json!({
        "schema_version": SCHEMA_VERSION,
        "command": command.name(),
        "params": {
            "r": params.r,
            "b0": params.b0,
            "gamma": params.gamma,
            "c": params.c,
            "s": params.s,
        },
        "result": out.json,
    });
    let mut s = serde_json::to_string_pretty(&doc).expect("json values always serialize");
    s.push('\n');
    s
}

pub fn render(command: Command, params: &ParamSet, format: Format, out: &Output) -> String {
    match format {
        Format::Csv => to_csv(out),
        Format::Json => to_json(command, params, out),
    }
}

pub fn write_sink(text: &str, path: Option<&Path>) -> Result<(), CliError> {
    let res = match path {
        Some(p) => std::fs::write(p, text).map_err(|e| format!("cannot write {}: {e}", p.display())),
        None => {
            let mut stdout = std::io::stdout().lock();
            stdout
                .write_all(text.as_bytes())
                .and_then(|_| stdout.flush())
                .map_err(|e| format!("cannot write to stdout: {e}"))
        }
    };
    res.map_err(CliError::io)
}
