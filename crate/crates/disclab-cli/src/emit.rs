//! Output formatting: line-delimited JSON and CSV, every float written with
//! 17 significant digits so values round-trip exactly.

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::Path;

use serde::Serialize;
use serde_json::Value;

use crate::error::CliError;

/// `x` with 17 significant digits; non-finite values become strings.
pub fn fmt_f64(x: f64) -> String {
    if x.is_finite() {
        format!("{x:.16e}")
    } else if x.is_nan() {
        "\"nan\"".into()
    } else if x > 0.0 {
        "\"inf\"".into()
    } else {
        "\"-inf\"".into()
    }
}

/// CSV cell for a float: same digits, bare `inf`/`nan`.
pub fn csv_f64(x: f64) -> String {
    fmt_f64(x).trim_matches('"').to_string()
}

fn write_value(v: &Value, out: &mut String) {
    match v {
        Value::Null => out.push_str("null"),
        Value::Bool(b) => out.push_str(if *b { "true" } else { "false" }),
        Value::Number(n) => match (n.as_u64(), n.as_i64()) {
            (Some(u), _) => out.push_str(&u.to_string()),
            (_, Some(i)) => out.push_str(&i.to_string()),
            _ => out.push_str(&fmt_f64(n.as_f64().unwrap_or(f64::NAN))),
        },
        Value::String(s) => out.push_str(&Value::String(s.clone()).to_string()),
        Value::Array(a) => {
            out.push('[');
            for (i, x) in a.iter().enumerate() {
                if i > 0 {
                    out.push(',');
                }
                write_value(x, out);
            }
            out.push(']');
        }
        Value::Object(m) => {
            out.push('{');
            for (i, (k, x)) in m.iter().enumerate() {
                if i > 0 {
                    out.push(',');
                }
                out.push_str(&Value::String(k.clone()).to_string());
                out.push(':');
                write_value(x, out);
            }
            out.push('}');
        }
    }
}

/// One JSON line for `record` tagged with `kind`.
pub fn json_line<T: Serialize>(kind: &str, record: &T) -> Result<String, CliError> {
    let mut v = serde_json::to_value(record).map_err(|e| CliError::Io(e.to_string()))?;
    match &mut v {
        Value::Object(m) => {
            m.insert("kind".into(), Value::String(kind.into()));
        }
        other => {
            let inner = std::mem::take(other);
            let mut m = serde_json::Map::new();
            m.insert("kind".into(), Value::String(kind.into()));
            m.insert("value".into(), inner);
            *other = Value::Object(m);
        }
    }
    let mut s = String::new();
    write_value(&v, &mut s);
    Ok(s)
}

/// Destination for JSON lines: a file, or stdout when no path is given.
pub struct Sink {
    w: Box<dyn Write>,
}

impl Sink {
    pub fn open(path: Option<&Path>) -> Result<Self, CliError> {
        let w: Box<dyn Write> = match path {
            Some(p) => Box::new(BufWriter::new(File::create(p).map_err(|e| io_err(p, e))?)),
            None => Box::new(BufWriter::new(io::stdout())),
        };
        Ok(Sink { w })
    }

    pub fn record<T: Serialize>(&mut self, kind: &str, record: &T) -> Result<(), CliError> {
        let line = json_line(kind, record)?;
        writeln!(self.w, "{line}").map_err(|e| CliError::Io(e.to_string()))
    }

    pub fn finish(mut self) -> Result<(), CliError> {
        self.w.flush().map_err(|e| CliError::Io(e.to_string()))
    }
}

pub fn io_err(p: &Path, e: io::Error) -> CliError {
    CliError::Io(format!("{}: {e}", p.display()))
}

/// Write a CSV file with a header row.
pub fn write_csv(path: &Path, header: &[&str], rows: &[Vec<String>]) -> Result<(), CliError> {
    let mut s = header.join(",");
    s.push('\n');
    for r in rows {
        s.push_str(&r.join(","));
        s.push('\n');
    }
    std::fs::write(path, s).map_err(|e| io_err(path, e))
}
