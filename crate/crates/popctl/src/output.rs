//! CSV and matrix emission.
//!
//! Numbers are written with 17 significant digits, which round-trips every
//! `f64`. Nothing time- or host-dependent is written, so identical inputs
//! give identical bytes.

use std::fmt::Write as _;
use std::io::Write;
use std::path::Path;

use serde::Serialize;

use popctl_core::FeasibilityGrid;

use crate::config::{horizon_text, RunConfig};

/// `{:.16e}`, with `nan`/`inf` spelled the way most CSV readers expect.
pub fn num(x: f64) -> String {
    if x.is_nan() {
        "nan".to_string()
    } else if x.is_infinite() {
        if x > 0.0 { "inf" } else { "-inf" }.to_string()
    } else {
        format!("{x:.16e}")
    }
}

pub fn opt_num(x: Option<f64>) -> String {
    x.map_or_else(|| "nan".to_string(), num)
}

pub fn flag(b: bool) -> &'static str {
    if b {
        "1"
    } else {
        "0"
    }
}

/// A CSV document assembled in memory: config header, column line, rows and
/// trailing `#` lines.
#[derive(Debug, Default)]
pub struct Csv {
    text: String,
}

impl Csv {
    pub fn new(config: &RunConfig, columns: &[&str]) -> Self {
        let mut text = config.header();
        text.push_str(&columns.join(","));
        text.push('\n');
        Csv { text }
    }

    pub fn row<I, S>(&mut self, cells: I)
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        let mut first = true;
        for c in cells {
            if !first {
                self.text.push(',');
            }
            self.text.push_str(c.as_ref());
            first = false;
        }
        self.text.push('\n');
    }

    pub fn comment(&mut self, key: &str, value: impl AsRef<str>) {
        let _ = writeln!(self.text, "# {key}={}", value.as_ref());
    }

    pub fn text(&self) -> &str {
        &self.text
    }

    /// Writes to `path`, or to stdout when `None`.
    pub fn emit(&self, path: Option<&Path>) -> std::io::Result<()> {
        write_text(path, &self.text)
    }
}

pub fn write_text(path: Option<&Path>, text: &str) -> std::io::Result<()> {
    match path {
        Some(p) => std::fs::write(p, text),
        None => {
            let mut out = std::io::stdout().lock();
            out.write_all(text.as_bytes())?;
            out.flush()
        }
    }
}

/// Long-form map: one row per (axis value, time).
pub fn map_csv(config: &RunConfig, grid: &FeasibilityGrid) -> Csv {
    let name = grid.axis().param.name();
    let mut csv = Csv::new(config, &[name, "t", "u", "accessible"]);
    for c in grid.columns() {
        let v = num(c.value);
        let acc = flag(c.accessible);
        for (k, u) in c.u.iter().enumerate() {
            csv.row([v.as_str(), &num(grid.time().time(k)), &num(*u), acc]);
        }
    }
    csv
}

#[derive(Debug, Serialize)]
struct MatrixHeader<'a> {
    axis: &'a str,
    min: f64,
    max: f64,
    steps: usize,
    t_start: f64,
    t_step: f64,
    t_len: usize,
    horizon: String,
    omega: f64,
    mu: f64,
    gamma: f64,
    big_gamma: f64,
    nbar: f64,
    ai: f64,
    af: f64,
    alpha: f64,
    phi0: f64,
    u_seed: f64,
    accessible: Vec<bool>,
}

/// Compact matrix: a one-line JSON header of fixed parameters, then one line
/// per axis value holding that value followed by `u` over time.
pub fn map_matrix(config: &RunConfig, grid: &FeasibilityGrid) -> String {
    let setup = grid.setup();
    let header = MatrixHeader {
        axis: grid.axis().param.name(),
        min: grid.axis().min,
        max: grid.axis().max,
        steps: grid.axis().steps,
        t_start: grid.time().start(),
        t_step: grid.time().step(),
        t_len: grid.time().len(),
        horizon: horizon_text(grid.horizon()),
        omega: config.sys.omega(),
        mu: config.sys.mu(),
        gamma: setup.noise.dephasing(),
        big_gamma: setup.noise.relaxation(),
        nbar: setup.noise.nbar(),
        ai: setup.target.a_i(),
        af: setup.target.a_f(),
        alpha: setup.target.alpha(),
        phi0: setup.target.phi0(),
        u_seed: setup.u_seed,
        accessible: grid.accessible().collect(),
    };
    let mut s = serde_json::to_string(&header).expect("header serializes");
    s.push('\n');
    for c in grid.columns() {
        s.push_str(&num(c.value));
        for u in &c.u {
            s.push(',');
            s.push_str(&num(*u));
        }
        s.push('\n');
    }
    s
}

/// Column names, data rows and trailing `key=value` comments.
pub type ParsedCsv = (Vec<String>, Vec<Vec<String>>, Vec<(String, String)>);

/// Data rows of a CSV produced by this tool: `#` lines and the column line
/// are skipped; trailing `# key=value` comments are returned separately.
pub fn read_csv(text: &str) -> ParsedCsv {
    let mut columns = Vec::new();
    let mut rows = Vec::new();
    let mut comments = Vec::new();
    for line in text.lines() {
        if let Some(c) = line.strip_prefix('#') {
            if let Some((k, v)) = c.trim().split_once('=') {
                comments.push((k.to_string(), v.to_string()));
            }
            continue;
        }
        if line.trim().is_empty() {
            continue;
        }
        let cells: Vec<String> = line.split(',').map(str::to_string).collect();
        if columns.is_empty() {
            columns = cells;
        } else {
            rows.push(cells);
        }
    }
    (columns, rows, comments)
}
