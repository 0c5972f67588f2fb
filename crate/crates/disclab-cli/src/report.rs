//! Collate JSON-lines outputs of the other subcommands into a pass/fail
//! table (markdown, optional CSV).

use std::path::Path;

use serde_json::Value;

use crate::args::ReportArgs;
use crate::emit::{csv_f64, io_err, write_csv};
use crate::error::{validation, CliError};

#[derive(Debug, Clone, PartialEq)]
pub struct Row {
    pub source: String,
    pub check: String,
    pub value: f64,
    /// Distance to the threshold, positive when passing; NaN if the row is
    /// informational.
    pub margin: f64,
    pub pass: Option<bool>,
}

fn num(v: &Value, key: &str) -> Option<f64> {
    match &v[key] {
        Value::Number(n) => n.as_f64(),
        Value::String(s) => s.parse().ok(),
        _ => None,
    }
}

struct Rows<'a> {
    source: &'a str,
    out: Vec<Row>,
}

impl Rows<'_> {
    fn at_most(&mut self, check: &str, value: Option<f64>, limit: f64) {
        if let Some(value) = value {
            self.push(check, value, limit - value);
        }
    }

    fn push(&mut self, check: &str, value: f64, margin: f64) {
        self.out.push(Row {
            source: self.source.to_string(),
            check: check.to_string(),
            value,
            margin,
            pass: Some(margin >= 0.0),
        });
    }

    fn flag(&mut self, check: &str, ok: bool) {
        self.out.push(Row {
            source: self.source.to_string(),
            check: check.to_string(),
            value: if ok { 1.0 } else { 0.0 },
            margin: f64::NAN,
            pass: Some(ok),
        });
    }

    fn info(&mut self, check: &str, value: Option<f64>) {
        if let Some(value) = value {
            self.out.push(Row {
                source: self.source.to_string(),
                check: check.to_string(),
                value,
                margin: f64::NAN,
                pass: None,
            });
        }
    }
}

fn check(v: &Value, kind: &str, rows: &mut Rows) {
    match kind {
        "scaffold.summary" => {
            rows.at_most("closure cross-residual", num(v, "max_residual"), 1e-9);
            if let Some(e) = num(v, "max_abs_eps") {
                rows.push("epsilon magnitude", e, 0.5 - e);
            }
            if let Some(b) = v["ordered"].as_bool() {
                rows.flag("radius ordering", b);
            }
        }
        "profile.junctions" => {
            let jump = num(v, "max_phi_jump").unwrap_or(0.0).max(num(v, "max_phi_prime_jump").unwrap_or(0.0));
            rows.at_most("profile junction jump", Some(jump), 1e-9);
            let (p1, p2) = (num(v, "p1"), num(v, "p2"));
            if let (Some(p1), Some(p2), Some(rs)) = (p1, p2, v["ratios"].as_array()) {
                let late = rs.iter().filter(|r| r["n"].as_u64().is_some_and(|n| n >= 3));
                let (mut a, mut b) = (f64::NAN, f64::NAN);
                for r in late {
                    let da = (num(r, "at_rn").unwrap_or(f64::NAN) - p2).abs() / p2;
                    let db = (num(r, "at_rprime").unwrap_or(f64::NAN) - p1).abs() / p1;
                    a = if a.is_nan() { da } else { a.max(da) };
                    b = if b.is_nan() { db } else { b.max(db) };
                }
                if !a.is_nan() {
                    rows.push("ratio at outer radius vs p2", a, 0.1 - a);
                    rows.push("ratio at lower radius vs p1", b, 0.1 - b);
                }
            }
        }
        "riesz.masses" => rows.at_most("cell quadrature mass", num(v, "max_abs_error"), 1e-6),
        "riesz.arcs" => {
            rows.at_most("excluded arc bound", num(v, "max_ratio"), 1.05);
            rows.info("fitted arc constant", num(v, "c4"));
        }
        "series.summary" => {
            if let Some(m) = num(v, "exactness_mismatches") {
                rows.push("central index exactness", m, 0.0 - m);
            }
            rows.at_most("two-star residual", num(v, "twostars_max"), 1e-10);
            if let Some(ks) = v["k_at_ties"].as_array() {
                let mid = ks.iter().filter(|r| r["k"].as_u64().is_some_and(|k| (8..=14).contains(&k)));
                let worst = mid
                    .map(|r| num(r, "log_k_over_g").unwrap_or(f64::NAN))
                    .map(|x| (x, (x - 1.35).min(1.65 - x)))
                    .min_by(|a, b| a.1.total_cmp(&b.1));
                if let Some((x, m)) = worst {
                    rows.push("K growth at shifted ties", x, m);
                }
                let late: Vec<_> = ks.iter().filter(|r| r["k"].as_u64().is_some_and(|k| k >= 5)).collect();
                if !late.is_empty() {
                    rows.flag("K below next exponent", late.iter().all(|r| r["below_next_n"] == true));
                }
            }
        }
        "logderiv.density" => rows.info("upper density", num(&v["report"], "density")),
        "logderiv.certificate" => {
            if let (Some(c), Some(p)) = (num(&v["report"], "fitted_c"), num(v, "p")) {
                rows.push("zero-free certificate constant", c, p - c);
            }
        }
        "ode.predict" => {
            rows.info("predicted order", num(v, "sigma"));
            rows.info("predicted lower order", num(v, "lambda"));
        }
        "ode.xi" => {
            let r = &v["result"];
            rows.at_most("beta identity residual", num(r, "identity_residual").map(f64::abs), 1e-12);
            if let (Some(xi), Some(p1), Some(p2)) = (num(r, "xi"), num(v, "p1"), num(v, "p2")) {
                let ok = if p1 == p2 { xi == p2 } else { xi > p1 && xi < p2 };
                rows.flag("root between degrees", ok);
            }
        }
        "ode.pmppvk" => rows.info("pmppvk deviation", num(v, "max_deviation")),
        "ode.instance" => {
            let ineq = &v["inequalities"];
            if let Some(m) = num(&ineq["thm13a"], "margin") {
                rows.push("lower-order inequality", m, m);
            }
            if let Some(m) = num(&ineq["cor14"], "margin") {
                rows.push("lower-order band", m, m + 0.15);
            }
            // the solution can sit on the majorant, so allow rounding of the
            // long recursion
            rows.at_most("HKR majorant excess", num(v, "hkr_max_excess"), 1e-6);
        }
        _ => {}
    }
}

/// Rows for every recognised record in the given JSON-lines text.
pub fn rows_for(source: &str, text: &str) -> Result<Vec<Row>, CliError> {
    let mut rows = Rows {
        source,
        out: Vec::new(),
    };
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let v: Value = serde_json::from_str(line)
            .map_err(|e| validation(format!("{source}:{}: {e}", i + 1)))?;
        if let Some(kind) = v["kind"].as_str() {
            check(&v, kind, &mut rows);
        }
    }
    Ok(rows.out)
}

fn cell(x: f64) -> String {
    if x.is_nan() {
        String::new()
    } else {
        format!("{x:.6e}")
    }
}

fn verdict(p: Option<bool>) -> &'static str {
    match p {
        Some(true) => "pass",
        Some(false) => "FAIL",
        None => "info",
    }
}

pub fn markdown(rows: &[Row]) -> String {
    let mut s = String::from("| source | check | value | margin | result |\n|---|---|---|---|---|\n");
    for r in rows {
        s.push_str(&format!(
            "| {} | {} | {} | {} | {} |\n",
            r.source,
            r.check,
            cell(r.value),
            cell(r.margin),
            verdict(r.pass)
        ));
    }
    s
}

pub fn report(a: &ReportArgs) -> Result<(), CliError> {
    let mut rows = Vec::new();
    for path in &a.inputs {
        if !path.exists() {
            return Err(validation(format!("missing input {}", path.display())));
        }
        let text = std::fs::read_to_string(path).map_err(|e| io_err(path, e))?;
        let name = path.file_name().map_or_else(
            || path.display().to_string(),
            |n| n.to_string_lossy().into_owned(),
        );
        rows.extend(rows_for(&name, &text)?);
    }
    let md = markdown(&rows);
    match &a.out {
        Some(p) => std::fs::write(p, &md).map_err(|e| io_err(p, e))?,
        None => print!("{md}"),
    }
    if let Some(p) = &a.csv {
        write_csv(
            Path::new(p),
            &["source", "check", "value", "margin", "result"],
            &rows
                .iter()
                .map(|r| {
                    vec![
                        r.source.clone(),
                        r.check.clone(),
                        csv_f64(r.value),
                        csv_f64(r.margin),
                        verdict(r.pass).to_string(),
                    ]
                })
                .collect::<Vec<_>>(),
        )?;
    }
    Ok(())
}
