//! CSV tables. Floats are written with 12 significant digits.

use std::fs;
use std::path::Path;

use crate::error::Result;
use crate::sim::{SimReport, Trace};

/// Formats `x` with 12 significant digits, fixed-point for moderate
/// exponents and scientific otherwise; trailing zeros are dropped.
pub fn fmt_sig12(x: f64) -> String {
    if x == 0.0 {
        return "0".to_string();
    }
    if x.is_nan() {
        return "nan".to_string();
    }
    if x.is_infinite() {
        return if x > 0.0 { "inf" } else { "-inf" }.to_string();
    }
    let sci = format!("{x:.11e}");
    let (mantissa, exp) = sci.split_once('e').expect("exponent present");
    let exp: i32 = exp.parse().expect("integer exponent");
    if (-5..12).contains(&exp) {
        let decimals = (11 - exp).max(0) as usize;
        trim_zeros(format!("{x:.decimals$}"))
    } else {
        format!("{}e{exp}", trim_zeros(mantissa.to_string()))
    }
}

fn trim_zeros(s: String) -> String {
    if !s.contains('.') {
        return s;
    }
    let t = s.trim_end_matches('0').trim_end_matches('.');
    if t == "-0" {
        "0".to_string()
    } else {
        t.to_string()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Cell {
    Float(f64),
    Int(i64),
    Text(String),
    Empty,
}

impl From<f64> for Cell {
    fn from(v: f64) -> Self {
        Cell::Float(v)
    }
}

impl From<usize> for Cell {
    fn from(v: usize) -> Self {
        Cell::Int(v as i64)
    }
}

impl From<u64> for Cell {
    fn from(v: u64) -> Self {
        Cell::Int(v as i64)
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

impl<T: Into<Cell>> From<Option<T>> for Cell {
    fn from(v: Option<T>) -> Self {
        v.map_or(Cell::Empty, Into::into)
    }
}

impl Cell {
    fn render(&self) -> String {
        match self {
            Cell::Float(v) => fmt_sig12(*v),
            Cell::Int(v) => v.to_string(),
            Cell::Text(s) => s.clone(),
            Cell::Empty => String::new(),
        }
    }
}

/// A header plus rows, rendered as CSV.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub header: Vec<String>,
    pub rows: Vec<Vec<Cell>>,
}

impl Table {
    pub fn new(header: &[&str]) -> Self {
        Self {
            header: header.iter().map(|s| s.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<Cell>) {
        assert_eq!(row.len(), self.header.len(), "row width differs from header");
        self.rows.push(row);
    }

    pub fn to_csv(&self) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(&self.header).expect("in-memory write");
        for row in &self.rows {
            w.write_record(row.iter().map(Cell::render)).expect("in-memory write");
        }
        String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf-8 csv")
    }

    pub fn write(&self, path: impl AsRef<Path>) -> Result<()> {
        if let Some(dir) = path.as_ref().parent() {
            if !dir.as_os_str().is_empty() {
                fs::create_dir_all(dir)?;
            }
        }
        fs::write(path, self.to_csv())?;
        Ok(())
    }

    /// Column by header name.
    pub fn column(&self, name: &str) -> Option<Vec<&Cell>> {
        let k = self.header.iter().position(|h| h == name)?;
        Some(self.rows.iter().map(|r| &r[k]).collect())
    }
}

/// Parsed CSV: header and raw string rows.
#[derive(Debug, Clone, PartialEq)]
pub struct ParsedCsv {
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl ParsedCsv {
    pub fn column(&self, name: &str) -> Option<Vec<&str>> {
        let k = self.header.iter().position(|h| h == name)?;
        Some(self.rows.iter().map(|r| r[k].as_str()).collect())
    }

    /// Column parsed as floats; empty cells become NaN.
    pub fn float_column(&self, name: &str) -> Option<Vec<f64>> {
        let col = self.column(name)?;
        col.iter()
            .map(|s| if s.is_empty() { Some(f64::NAN) } else { s.parse().ok() })
            .collect()
    }
}

pub fn parse_csv(text: &str) -> Result<ParsedCsv> {
    let mut r = csv::Reader::from_reader(text.as_bytes());
    let header = r.headers()?.iter().map(str::to_string).collect();
    let mut rows = Vec::new();
    for rec in r.records() {
        rows.push(rec?.iter().map(str::to_string).collect());
    }
    Ok(ParsedCsv { header, rows })
}

pub const SUMMARY_HEADER: &[&str] = &[
    "replication",
    "seed",
    "config_digest",
    "controller",
    "horizon_slots",
    "n_mgs",
    "total_cost",
    "time_average_cost",
    "normalized_cost",
    "steady_state_cost",
    "standard_error",
    "macro_energy_mwh",
    "exchanged_energy_mwh",
    "stored_energy_mwh",
    "discharged_energy_mwh",
    "battery_min_mwh",
    "battery_max_mwh",
    "battery_mean_mwh",
    "violations",
];

/// One row per replication; per-MG quantities are summed (energies) or
/// reduced to min/max/mean (battery levels).
pub fn summary_table(reports: &[SimReport]) -> Table {
    let mut t = Table::new(SUMMARY_HEADER);
    for r in reports {
        let sum = |v: &[f64]| v.iter().sum::<f64>();
        t.push(vec![
            r.replication.into(),
            r.seed.into(),
            r.config_digest.clone().into(),
            r.controller.clone().into(),
            r.horizon.into(),
            r.n_mgs.into(),
            r.total_cost.into(),
            r.time_average_cost.into(),
            r.normalized_cost.into(),
            r.steady_state_cost.into(),
            r.standard_error.into(),
            sum(&r.macro_energy_mwh).into(),
            sum(&r.exported_energy_mwh).into(),
            sum(&r.stored_energy_mwh).into(),
            sum(&r.discharged_energy_mwh).into(),
            r.battery_min_mwh.iter().copied().fold(f64::INFINITY, f64::min).into(),
            r.battery_max_mwh.iter().copied().fold(f64::NEG_INFINITY, f64::max).into(),
            (sum(&r.battery_mean_mwh) / r.n_mgs as f64).into(),
            r.violations.into(),
        ]);
    }
    t
}

pub const TRACE_HEADER: &[&str] = &[
    "slot",
    "mg",
    "energy_mwh",
    "excess_mwh",
    "deficit_mwh",
    "charge_mwh",
    "self_discharge_mwh",
    "imported_mwh",
    "exported_mwh",
    "macro_draw_mwh",
    "cost",
];

/// One row per slot per MG.
pub fn trace_table(trace: &Trace) -> Table {
    let mut t = Table::new(TRACE_HEADER);
    for rec in &trace.records {
        for i in 0..rec.energy.len() {
            t.push(vec![
                rec.slot.into(),
                i.into(),
                rec.energy[i].into(),
                rec.excess[i].into(),
                rec.deficit[i].into(),
                rec.charge[i].into(),
                rec.self_discharge[i].into(),
                rec.imported[i].into(),
                rec.exported[i].into(),
                rec.macro_draw[i].into(),
                rec.cost[i].into(),
            ]);
        }
    }
    t
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sig12_formatting() {
        assert_eq!(fmt_sig12(0.0), "0");
        assert_eq!(fmt_sig12(-0.0), "0");
        assert_eq!(fmt_sig12(0.5), "0.5");
        assert_eq!(fmt_sig12(1.0), "1");
        assert_eq!(fmt_sig12(100.0), "100");
        assert_eq!(fmt_sig12(1.0 / 3.0), "0.333333333333");
        assert_eq!(fmt_sig12(2.0 / 3.0 * 1e4), "6666.66666667");
        assert_eq!(fmt_sig12(1.5e-7), "1.5e-7");
        assert_eq!(fmt_sig12(-2.5e15), "-2.5e15");
        assert_eq!(fmt_sig12(123456789012.0), "123456789012");
        assert_eq!(fmt_sig12(f64::NAN), "nan");
    }

    #[test]
    fn twelve_digits_round_trip() {
        for &x in &[std::f64::consts::PI, 1e-300, 6.02214076e23, -0.000123456789012345, 0.641025641025641] {
            let back: f64 = fmt_sig12(x).parse().unwrap();
            assert!(((back - x) / x).abs() < 5e-12, "{x} -> {back}");
        }
    }

    #[test]
    fn table_round_trips() {
        let mut t = Table::new(&["a", "b", "c"]);
        t.push(vec![1.25.into(), 3usize.into(), "x,y".into()]);
        t.push(vec![Cell::Empty, 0usize.into(), "z".into()]);
        let parsed = parse_csv(&t.to_csv()).unwrap();
        assert_eq!(parsed.header, vec!["a", "b", "c"]);
        assert_eq!(parsed.rows[0], vec!["1.25", "3", "x,y"]);
        let a = parsed.float_column("a").unwrap();
        assert_eq!(a[0], 1.25);
        assert!(a[1].is_nan());
    }
}
