//! CSV output with `#` header comments carrying the tool version, the seed
//! and the full configuration.

use std::path::Path;

use serde::Serialize;

use crate::error::{Error, Result};

/// Shortest round-trip form; empty for missing values.
pub fn fmt_f64(v: f64) -> String {
    if v.is_nan() {
        String::new()
    } else {
        format!("{v}")
    }
}

pub fn fmt_opt(v: Option<f64>) -> String {
    v.map(fmt_f64).unwrap_or_default()
}

pub fn fmt_vec(v: &[f64]) -> String {
    v.iter().map(|x| fmt_f64(*x)).collect::<Vec<_>>().join(";")
}

#[derive(Debug, Clone, Default)]
pub struct CsvReport {
    comments: Vec<String>,
    header: Vec<String>,
    rows: Vec<Vec<String>>,
}

impl CsvReport {
    pub fn new(command: &str, columns: &[&str]) -> Self {
        Self {
            comments: vec![format!("iirl {} {}", crate::VERSION, command)],
            header: columns.iter().map(|c| c.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn comment(&mut self, line: impl Into<String>) -> &mut Self {
        let line: String = line.into();
        self.comments.extend(line.lines().map(String::from));
        self
    }

    pub fn seed(&mut self, seed: Option<u64>) -> &mut Self {
        let s = seed.map(|s| s.to_string()).unwrap_or_else(|| "none".into());
        self.comment(format!("seed: {s}"))
    }

    pub fn config<T: Serialize>(&mut self, config: &T) -> Result<&mut Self> {
        let json = serde_json::to_string(config).map_err(|e| Error::InvalidInput(e.to_string()))?;
        Ok(self.comment(format!("config: {json}")))
    }

    pub fn row(&mut self, cells: Vec<String>) -> &mut Self {
        debug_assert_eq!(cells.len(), self.header.len());
        self.rows.push(cells);
        self
    }

    pub fn rows(&self) -> &[Vec<String>] {
        &self.rows
    }

    /// Header row and data rows only.
    pub fn body(&self) -> Result<String> {
        let mut w = csv::WriterBuilder::new().from_writer(Vec::new());
        let io = |e: csv::Error| Error::InvalidInput(e.to_string());
        w.write_record(&self.header).map_err(io)?;
        for r in &self.rows {
            w.write_record(r).map_err(io)?;
        }
        let bytes = w.into_inner().map_err(|e| Error::InvalidInput(e.to_string()))?;
        String::from_utf8(bytes).map_err(|e| Error::InvalidInput(e.to_string()))
    }

    pub fn render(&self) -> Result<String> {
        let mut out = String::new();
        for c in &self.comments {
            out.push_str("# ");
            out.push_str(c);
            out.push('\n');
        }
        out.push_str(&self.body()?);
        Ok(out)
    }

    pub fn write(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.render()?)?;
        Ok(())
    }
}

/// Drops `#` lines, leaving the part that must be reproducible.
pub fn strip_comments(text: &str) -> String {
    text.lines()
        .filter(|l| !l.starts_with('#'))
        .map(|l| format!("{l}\n"))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn header_and_body() {
        let mut r = CsvReport::new("mask", &["eta", "violation"]);
        r.seed(Some(7));
        r.config(&serde_json::json!({"eta": 0.5})).unwrap();
        r.row(vec![fmt_f64(0.5), fmt_f64(0.1)]);
        let text = r.render().unwrap();
        assert!(text.starts_with("# iirl "));
        assert!(text.contains("# seed: 7\n"));
        assert!(text.contains("# config: {\"eta\":0.5}\n"));
        assert_eq!(strip_comments(&text), "eta,violation\n0.5,0.1\n");
    }

    #[test]
    fn missing_values_are_empty() {
        assert_eq!(fmt_f64(f64::NAN), "");
        assert_eq!(fmt_opt(None), "");
        assert_eq!(fmt_vec(&[1.0, 0.25]), "1;0.25");
    }
}
