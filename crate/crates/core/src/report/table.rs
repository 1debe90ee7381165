use std::fmt;

use serde::Serialize;
use serde_json::{Map, Value};

/// How a column is rendered. CSV and JSON always carry full precision; the
/// kind only matters for Markdown.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Kind {
    Text,
    Integer,
    /// A fraction shown as a percentage with one decimal.
    Percent,
    /// Two decimals, as for GDS and ratios.
    Decimal2,
    /// Three decimals, as for slopes.
    Decimal3,
    Flag,
    List,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Column {
    pub name: &'static str,
    pub kind: Kind,
}

pub const fn col(name: &'static str, kind: Kind) -> Column {
    Column { name, kind }
}

/// One table cell. `Missing` covers suppressed and undefined values.
#[derive(Debug, Clone, PartialEq)]
pub enum Datum {
    Text(String),
    Int(i64),
    Num(f64),
    Flag(bool),
    List(Vec<String>),
    Missing,
}

impl Datum {
    pub fn num(x: Option<f64>) -> Datum {
        x.map_or(Datum::Missing, Datum::Num)
    }

    pub fn text(s: impl ToString) -> Datum {
        Datum::Text(s.to_string())
    }

    pub fn int(n: usize) -> Datum {
        Datum::Int(n as i64)
    }

    fn json(&self) -> Value {
        match self {
            Datum::Text(s) => Value::String(s.clone()),
            Datum::Int(n) => Value::from(*n),
            Datum::Num(x) if x.is_finite() => Value::from(*x),
            Datum::Num(x) => Value::String(float_word(*x).into()),
            Datum::Flag(b) => Value::Bool(*b),
            Datum::List(items) => items.iter().cloned().map(Value::String).collect(),
            Datum::Missing => Value::Null,
        }
    }

    fn csv(&self) -> String {
        match self {
            Datum::Text(s) => csv_escape(s),
            Datum::Int(n) => n.to_string(),
            Datum::Num(x) if x.is_finite() => x.to_string(),
            Datum::Num(x) => float_word(*x).into(),
            Datum::Flag(b) => b.to_string(),
            Datum::List(items) => csv_escape(&items.join(";")),
            Datum::Missing => String::new(),
        }
    }

    fn markdown(&self, kind: Kind) -> String {
        match (self, kind) {
            (Datum::Missing, _) => "---".into(),
            (Datum::Num(x), _) if !x.is_finite() => float_word(*x).into(),
            (Datum::Num(x), Kind::Percent) => fixed(100.0 * x, 1),
            (Datum::Num(x), Kind::Decimal2) => fixed(*x, 2),
            (Datum::Num(x), Kind::Decimal3) => fixed(*x, 3),
            (Datum::Num(x), Kind::Integer) => fixed(*x, 0),
            (Datum::Num(x), _) => x.to_string(),
            (Datum::Int(n), _) => n.to_string(),
            (Datum::Flag(b), _) => if *b { "yes" } else { "" }.into(),
            (Datum::List(items), _) => items.join("+"),
            (Datum::Text(s), _) => s.replace('|', "\\|"),
        }
    }
}

impl fmt::Display for Datum {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Datum::Text(s) => f.write_str(s),
            Datum::Int(n) => write!(f, "{n}"),
            Datum::Num(x) => write!(f, "{x}"),
            Datum::Flag(b) => write!(f, "{b}"),
            Datum::List(items) => f.write_str(&items.join(";")),
            Datum::Missing => f.write_str("-"),
        }
    }
}

/// Fixed-point rendering without a sign on values that round to zero.
fn fixed(x: f64, digits: usize) -> String {
    let s = format!("{x:.digits$}");
    match s.strip_prefix('-') {
        Some(rest) if rest.bytes().all(|b| b == b'0' || b == b'.') => rest.to_string(),
        _ => s,
    }
}

fn float_word(x: f64) -> &'static str {
    if x.is_nan() {
        "nan"
    } else if x > 0.0 {
        "inf"
    } else {
        "-inf"
    }
}

fn csv_escape(s: &str) -> String {
    if s.contains([',', '"', '\n', '\r']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

/// A named rectangular result.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub name: &'static str,
    pub title: String,
    pub columns: Vec<Column>,
    pub rows: Vec<Vec<Datum>>,
    pub notes: Vec<String>,
}

impl Table {
    pub fn new(name: &'static str, title: impl Into<String>, columns: Vec<Column>) -> Table {
        Table {
            name,
            title: title.into(),
            columns,
            rows: Vec::new(),
            notes: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<Datum>) {
        assert_eq!(row.len(), self.columns.len(), "row width for table {}", self.name);
        self.rows.push(row);
    }

    pub fn column_index(&self, name: &str) -> Option<usize> {
        self.columns.iter().position(|c| c.name == name)
    }

    /// The cell in `column` of the first row whose leading cells equal `key`.
    pub fn lookup(&self, key: &[&str], column: &str) -> Option<&Datum> {
        let c = self.column_index(column)?;
        self.rows
            .iter()
            .find(|row| {
                key.iter()
                    .zip(row.iter())
                    .all(|(k, d)| matches!(d, Datum::Text(s) if s == k))
            })
            .map(|row| &row[c])
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        let header: Vec<&str> = self.columns.iter().map(|c| c.name).collect();
        out.push_str(&header.join(","));
        out.push('\n');
        for row in &self.rows {
            let cells: Vec<String> = row.iter().map(Datum::csv).collect();
            out.push_str(&cells.join(","));
            out.push('\n');
        }
        out
    }

    pub fn to_json(&self) -> String {
        let rows: Vec<Value> = self
            .rows
            .iter()
            .map(|row| {
                let mut obj = Map::new();
                for (c, d) in self.columns.iter().zip(row) {
                    obj.insert(c.name.to_string(), d.json());
                }
                Value::Object(obj)
            })
            .collect();
        let mut doc = Map::new();
        doc.insert("table".into(), self.name.into());
        doc.insert("title".into(), self.title.clone().into());
        doc.insert(
            "columns".into(),
            serde_json::to_value(&self.columns).expect("columns serialize"),
        );
        doc.insert("rows".into(), Value::Array(rows));
        doc.insert("notes".into(), self.notes.clone().into());
        let mut s = serde_json::to_string_pretty(&Value::Object(doc)).expect("table serializes");
        s.push('\n');
        s
    }

    pub fn to_markdown(&self) -> String {
        let mut out = format!("## {}\n\n", self.title);
        let header: Vec<String> = self
            .columns
            .iter()
            .map(|c| match c.kind {
                Kind::Percent => format!("{} (%)", c.name),
                _ => c.name.to_string(),
            })
            .collect();
        out.push_str(&format!("| {} |\n", header.join(" | ")));
        let rule: Vec<&str> = self
            .columns
            .iter()
            .map(|c| match c.kind {
                Kind::Text | Kind::List | Kind::Flag => "---",
                _ => "---:",
            })
            .collect();
        out.push_str(&format!("|{}|\n", rule.join("|")));
        for row in &self.rows {
            let cells: Vec<String> = row
                .iter()
                .zip(&self.columns)
                .map(|(d, c)| d.markdown(c.kind))
                .collect();
            out.push_str(&format!("| {} |\n", cells.join(" | ")));
        }
        if !self.notes.is_empty() {
            out.push('\n');
            for n in &self.notes {
                out.push_str(&format!("- {n}\n"));
            }
        }
        out
    }
}
