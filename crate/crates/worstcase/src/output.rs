//! CSV writers. Floats carry 12 significant digits; headers are fixed.

use std::fmt::Write as _;

use worstcase_core::pde::{BoundaryCurves, ValueSurface};
use worstcase_core::RateMatrix;

/// `x` with 12 significant digits: positional notation for moderate
/// magnitudes, scientific otherwise. `NaN` is written as `nan`.
pub fn fmt_float(x: f64) -> String {
    if x.is_nan() {
        return "nan".into();
    }
    if x.is_infinite() {
        return if x > 0.0 { "inf".into() } else { "-inf".into() };
    }
    if x == 0.0 {
        return "0".into();
    }
    let sci = format!("{x:.11e}");
    let (mantissa, exp) = sci.split_once('e').expect("scientific format");
    let exp: i32 = exp.parse().expect("integer exponent");
    if (-5..12).contains(&exp) {
        let decimals = (11 - exp).max(0) as usize;
        trim_zeros(format!("{x:.decimals$}"))
    } else {
        format!("{}e{exp}", trim_zeros(mantissa.to_string()))
    }
}

fn trim_zeros(s: String) -> String {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    } else {
        s
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    header: Vec<&'static str>,
    rows: Vec<Vec<String>>,
}

/// One CSV cell.
pub enum Cell {
    F(f64),
    I(usize),
    B(bool),
    S(String),
}

impl Cell {
    fn render(&self) -> String {
        match self {
            Cell::F(v) => fmt_float(*v),
            Cell::I(v) => v.to_string(),
            Cell::B(v) => v.to_string(),
            Cell::S(s) => quote(s),
        }
    }
}

fn quote(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

impl Table {
    pub fn new(header: &[&'static str]) -> Self {
        Self { header: header.to_vec(), rows: Vec::new() }
    }

    pub fn push(&mut self, row: Vec<Cell>) {
        assert_eq!(row.len(), self.header.len(), "row width must match the header");
        self.rows.push(row.iter().map(Cell::render).collect());
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn to_csv(&self) -> String {
        let mut out = self.header.join(",");
        out.push('\n');
        for r in &self.rows {
            out.push_str(&r.join(","));
            out.push('\n');
        }
        out
    }
}

/// Columns `x, regime, t, v, exercised`; regimes 1-based, `t` is
/// time-to-maturity.
pub fn surface_csv(s: &ValueSurface) -> String {
    let g = s.grid();
    let mut out = String::from("x,regime,t,v,exercised\n");
    for n in 0..g.nt() {
        for y in 0..s.m() {
            for i in 0..g.nx() {
                let _ = writeln!(
                    out,
                    "{},{},{},{},{}",
                    fmt_float(g.x()[i]),
                    y + 1,
                    fmt_float(g.t()[n]),
                    fmt_float(s.value(i, y, n)),
                    s.exercised(i, y, n) as u8
                );
            }
        }
    }
    out
}

/// Columns `t, regime, s_star`.
pub fn boundary_csv(b: &BoundaryCurves) -> String {
    let mut t = Table::new(&["t", "regime", "s_star"]);
    for y in 0..b.m() {
        for (n, &time) in b.times().iter().enumerate() {
            t.push(vec![Cell::F(time), Cell::I(y + 1), Cell::F(b.at(y, n))]);
        }
    }
    t.to_csv()
}

/// Rows joined by `;`, entries by spaces.
pub fn matrix_cell(q: &RateMatrix) -> String {
    q.rows()
        .iter()
        .map(|r| r.iter().map(|&v| fmt_float(v)).collect::<Vec<_>>().join(" "))
        .collect::<Vec<_>>()
        .join(";")
}

/// Columns `row, col, rate` with 1-based indices.
pub fn matrix_csv(q: &RateMatrix) -> String {
    let mut t = Table::new(&["row", "col", "rate"]);
    for i in 0..q.m() {
        for j in 0..q.m() {
            t.push(vec![Cell::I(i + 1), Cell::I(j + 1), Cell::F(q.get(i, j))]);
        }
    }
    t.to_csv()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn twelve_significant_digits() {
        assert_eq!(fmt_float(6.089434763511), "6.08943476351");
        assert_eq!(fmt_float(100.0), "100");
        assert_eq!(fmt_float(-0.25), "-0.25");
        assert_eq!(fmt_float(1.0 / 3.0), "0.333333333333");
        assert_eq!(fmt_float(5.0 * 40f64.exp()), "1.17692633419e18");
        assert_eq!(fmt_float(1.5e-9), "1.5e-9");
        assert_eq!(fmt_float(f64::NAN), "nan");
        assert_eq!(fmt_float(0.0), "0");
    }

    #[test]
    fn formatted_values_parse_back_to_twelve_digits() {
        for &x in &[std::f64::consts::PI, 1234567.891011121, 2.5e-7, 7.385035689259232] {
            let y: f64 = fmt_float(x).parse().unwrap();
            assert!(((x - y) / x).abs() < 1e-11);
        }
    }

    #[test]
    fn csv_quotes_commas() {
        let mut t = Table::new(&["a", "b"]);
        t.push(vec![Cell::S("x,y".into()), Cell::I(3)]);
        assert_eq!(t.to_csv(), "a,b\n\"x,y\",3\n");
    }

    #[test]
    fn matrix_tables() {
        let q = RateMatrix::tridiagonal(&[0.5], &[1.0]).unwrap();
        assert_eq!(matrix_cell(&q), "-0.5 0.5;1 -1");
        assert!(matrix_csv(&q).starts_with("row,col,rate\n1,1,-0.5\n1,2,0.5\n"));
    }
}
