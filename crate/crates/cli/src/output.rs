//! CSV emission: `#` metadata block, one header line, then rows.

use std::fmt::Write as _;
use std::io::Write;
use std::path::Path;

/// Float with 17 significant digits, enough to round-trip an `f64`.
pub fn num(x: f64) -> String {
    if x.is_finite() {
        format!("{x:.16e}")
    } else {
        x.to_string()
    }
}

pub struct Csv {
    text: String,
    columns: usize,
}

impl Csv {
    pub fn new(command: &str) -> Self {
        let mut text = String::new();
        writeln!(text, "# qmeasure {}", env!("CARGO_PKG_VERSION")).unwrap();
        writeln!(text, "# command={command}").unwrap();
        Self { text, columns: 0 }
    }

    pub fn meta(&mut self, key: &str, value: impl std::fmt::Display) -> &mut Self {
        writeln!(self.text, "# {key}={value}").unwrap();
        self
    }

    pub fn header(&mut self, columns: &[&str]) -> &mut Self {
        self.columns = columns.len();
        writeln!(self.text, "{}", columns.join(",")).unwrap();
        self
    }

    pub fn row(&mut self, cells: &[String]) -> &mut Self {
        debug_assert_eq!(cells.len(), self.columns, "row width");
        writeln!(self.text, "{}", cells.join(",")).unwrap();
        self
    }

    /// Writes to `path`, or to stdout when `path` is `None`.
    pub fn emit(&self, path: Option<&Path>) -> std::io::Result<()> {
        match path {
            Some(p) => std::fs::write(p, &self.text),
            None => std::io::stdout().lock().write_all(self.text.as_bytes()),
        }
    }
}
