//! CSV rows and the console table.

use std::io::{self, Write};

use dualprox::{SolveReport64, StopReason};

/// What the first column holds.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum KeyKind {
    H,
    Alpha,
}

impl KeyKind {
    pub fn name(self) -> &'static str {
        match self {
            KeyKind::H => "h",
            KeyKind::Alpha => "alpha",
        }
    }
}

/// One solve, as it appears in the tables.
#[derive(Debug, Clone, PartialEq)]
pub struct Row {
    pub key: f64,
    pub it: usize,
    pub cg: usize,
    pub inactive_l1: f64,
    pub phi: f64,
    pub gap: f64,
    pub residual: f64,
    pub stop_reason: StopReason,
}

impl Row {
    pub fn from_report(key: f64, rep: &SolveReport64) -> Self {
        Self {
            key,
            it: rep.iterations,
            cg: rep.cg_total,
            inactive_l1: rep.inactive_l1,
            phi: rep.phi_final,
            gap: rep.gap_final,
            residual: rep.residual_final,
            stop_reason: rep.stop_reason,
        }
    }
}

/// `printf("%.6e")`: six digits after the point and an exponent with a sign
/// and at least two digits.
pub fn sci(x: f64) -> String {
    sci_digits(x, 6)
}

pub fn sci_digits(x: f64, digits: usize) -> String {
    if !x.is_finite() {
        return if x.is_nan() { "nan".into() } else if x > 0.0 { "inf".into() } else { "-inf".into() };
    }
    let s = format!("{x:.digits$e}");
    let (mant, exp) = s.split_once('e').expect("exponent form");
    let exp: i32 = exp.parse().expect("integer exponent");
    let sign = if exp < 0 { '-' } else { '+' };
    format!("{mant}e{sign}{:02}", exp.abs())
}

pub fn csv_header(kind: KeyKind) -> String {
    format!("{},it,cg,inactive_l1,phi,gap,residual,stop_reason", kind.name())
}

pub fn csv_line(r: &Row) -> String {
    format!(
        "{},{},{},{},{},{},{},{}",
        sci(r.key),
        r.it,
        r.cg,
        sci(r.inactive_l1),
        sci(r.phi),
        sci(r.gap),
        sci(r.residual),
        r.stop_reason.as_str()
    )
}

pub fn write_csv<W: Write>(mut w: W, kind: KeyKind, rows: &[Row]) -> io::Result<()> {
    writeln!(w, "{}", csv_header(kind))?;
    for r in rows {
        writeln!(w, "{}", csv_line(r))?;
    }
    Ok(())
}

/// Fixed-width table in the layout of the result tables.
pub fn write_table<W: Write>(mut w: W, kind: KeyKind, rows: &[Row]) -> io::Result<()> {
    writeln!(
        w,
        "{:>10} {:>4} {:>6} {:>10} {:>11} {:>10} {:>10}  stop",
        kind.name(),
        "it",
        "cg",
        "inactive",
        "phi",
        "gap",
        "residual"
    )?;
    for r in rows {
        writeln!(
            w,
            "{:>10} {:>4} {:>6} {:>10} {:>11} {:>10} {:>10}  {}",
            sci_digits(r.key, 2),
            r.it,
            r.cg,
            sci_digits(r.inactive_l1, 2),
            sci_digits(r.phi, 2),
            sci_digits(r.gap, 2),
            sci_digits(r.residual, 2),
            r.stop_reason
        )?;
    }
    Ok(())
}
