//! Tabular output in three renderings. JSON lines carry full precision and
//! parse back into the same tables.

use serde_json::{Map, Number, Value};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq)]
pub enum Cell {
    Int(i64),
    Float(f64),
    Text(String),
}

impl From<usize> for Cell {
    fn from(v: usize) -> Self {
        Cell::Int(v as i64)
    }
}

impl From<f64> for Cell {
    fn from(v: f64) -> Self {
        Cell::Float(v)
    }
}

impl From<&str> for Cell {
    fn from(v: &str) -> Self {
        Cell::Text(v.to_string())
    }
}

impl From<String> for Cell {
    fn from(v: String) -> Self {
        Cell::Text(v)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub name: String,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<Cell>>,
}

impl Table {
    pub fn new(name: &str, columns: &[&str]) -> Self {
        Self {
            name: name.to_string(),
            columns: columns.iter().map(|c| c.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<Cell>) {
        assert_eq!(row.len(), self.columns.len(), "row width");
        self.rows.push(row);
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Format {
    Table,
    Csv,
    JsonLines,
}

#[derive(Debug, Error)]
pub enum ReportError {
    #[error("json line {line}: {msg}")]
    Json { line: usize, msg: String },
}

fn human(column: &str, cell: &Cell) -> String {
    match cell {
        Cell::Int(v) => v.to_string(),
        Cell::Text(s) => s.clone(),
        Cell::Float(v) if v.is_nan() => "nan".into(),
        Cell::Float(v) => match column {
            "nnz_ratio" => format!("{:.1}%", v * 100.0),
            "time_s" => format!("{v:.4}"),
            "objective" => format!("{v:.9e}"),
            "tau" | "delta" if *v == 0.0 => "0".into(),
            "tau" | "delta" => format!("{v:.1e}"),
            _ => format!("{v:.3e}"),
        },
    }
}

fn raw(cell: &Cell) -> String {
    match cell {
        Cell::Int(v) => v.to_string(),
        Cell::Float(v) => format!("{v:?}"),
        Cell::Text(s) => s.clone(),
    }
}

fn render_table(t: &Table, out: &mut String) {
    let cells: Vec<Vec<String>> = t
        .rows
        .iter()
        .map(|r| r.iter().zip(&t.columns).map(|(c, col)| human(col, c)).collect())
        .collect();
    let widths: Vec<usize> = t
        .columns
        .iter()
        .enumerate()
        .map(|(k, h)| cells.iter().map(|r| r[k].len()).chain([h.len()]).max().unwrap_or(0))
        .collect();
    let line = |vals: &[String]| -> String {
        let parts: Vec<String> = vals.iter().zip(&widths).map(|(v, &w)| format!("{v:>w$}")).collect();
        parts.join("  ") + "\n"
    };
    out.push_str(&line(&t.columns));
    for r in &cells {
        out.push_str(&line(r));
    }
}

/// Empty tables are skipped in every format.
pub fn render(tables: &[Table], format: Format) -> String {
    let mut out = String::new();
    let nonempty = tables.iter().filter(|t| !t.rows.is_empty());
    for (k, t) in nonempty.enumerate() {
        match format {
            Format::Table => {
                if k > 0 {
                    out.push('\n');
                }
                render_table(t, &mut out);
            }
            Format::Csv => {
                if k > 0 {
                    out.push('\n');
                }
                out.push_str(&t.columns.join(","));
                out.push('\n');
                for r in &t.rows {
                    let vals: Vec<String> = r.iter().map(raw).collect();
                    out.push_str(&vals.join(","));
                    out.push('\n');
                }
            }
            Format::JsonLines => {
                for r in &t.rows {
                    let mut obj = Map::new();
                    obj.insert("table".into(), Value::String(t.name.clone()));
                    for (col, c) in t.columns.iter().zip(r) {
                        let v = match c {
                            Cell::Int(v) => Value::Number((*v).into()),
                            Cell::Float(v) => Number::from_f64(*v).map_or(Value::Null, Value::Number),
                            Cell::Text(s) => Value::String(s.clone()),
                        };
                        obj.insert(col.clone(), v);
                    }
                    out.push_str(&Value::Object(obj).to_string());
                    out.push('\n');
                }
            }
        }
    }
    out
}

/// Inverse of the JSON-lines rendering: consecutive lines with the same
/// `table` field form one table.
pub fn parse_json_lines(text: &str) -> Result<Vec<Table>, ReportError> {
    let mut tables: Vec<Table> = Vec::new();
    for (k, line) in text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty()) {
        let err = |msg: String| ReportError::Json { line: k + 1, msg };
        let v: Value = serde_json::from_str(line).map_err(|e| err(e.to_string()))?;
        let Value::Object(obj) = v else {
            return Err(err("not an object".into()));
        };
        let name = match obj.get("table") {
            Some(Value::String(s)) => s.clone(),
            _ => return Err(err("missing `table` field".into())),
        };
        let columns: Vec<String> = obj.keys().filter(|c| *c != "table").cloned().collect();
        let row = obj
            .iter()
            .filter(|(c, _)| *c != "table")
            .map(|(c, v)| match v {
                Value::Number(n) => Ok(match n.as_i64() {
                    Some(i) if !n.is_f64() => Cell::Int(i),
                    _ => Cell::Float(n.as_f64().unwrap_or(f64::NAN)),
                }),
                Value::String(s) => Ok(Cell::Text(s.clone())),
                Value::Null => Ok(Cell::Float(f64::NAN)),
                _ => Err(err(format!("unsupported value in column `{c}`"))),
            })
            .collect::<Result<Vec<_>, _>>()?;
        match tables.last_mut() {
            Some(t) if t.name == name && t.columns == columns => t.rows.push(row),
            _ => tables.push(Table {
                name,
                columns,
                rows: vec![row],
            }),
        }
    }
    Ok(tables)
}
