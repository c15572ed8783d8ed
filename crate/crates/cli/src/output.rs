use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::config::{Config, Formats};
use crate::error::CliError;

/// 17 significant digits, enough to round-trip any `f64`.
pub fn num(v: f64) -> String {
    if v.is_finite() {
        format!("{v:.16e}")
    } else {
        format!("{v}")
    }
}

pub fn opt_num(v: Option<f64>) -> String {
    v.map(num).unwrap_or_default()
}

/// In-memory CSV table.
#[derive(Debug, Clone)]
pub struct Csv {
    text: String,
    columns: usize,
}

impl Csv {
    pub fn new(header: &[&str]) -> Self {
        Self {
            text: format!("{}\n", header.join(",")),
            columns: header.len(),
        }
    }

    pub fn row(&mut self, cells: &[String]) {
        debug_assert_eq!(cells.len(), self.columns);
        let _ = writeln!(self.text, "{}", cells.join(","));
    }

    pub fn as_str(&self) -> &str {
        &self.text
    }
}

/// Where a command writes, and which formats it may emit.
#[derive(Debug, Clone)]
pub struct Sink {
    pub dir: PathBuf,
    pub formats: Formats,
    written: Vec<PathBuf>,
}

impl Sink {
    /// Creates the directory and writes `<stem>.resolved.conf` into it.
    pub fn open(config: &Config, stem: &str) -> Result<Self, CliError> {
        let dir = PathBuf::from(config.raw("out_dir"));
        fs::create_dir_all(&dir).map_err(|e| CliError::io(&dir, e))?;
        let mut sink = Self {
            dir,
            formats: config.formats()?,
            written: Vec::new(),
        };
        sink.write(&format!("{stem}.resolved.conf"), &config.to_text())?;
        Ok(sink)
    }

    pub fn write(&mut self, name: &str, contents: &str) -> Result<PathBuf, CliError> {
        let path = self.dir.join(name);
        fs::write(&path, contents).map_err(|e| CliError::io(&path, e))?;
        self.written.push(path.clone());
        Ok(path)
    }

    pub fn csv(&mut self, name: &str, csv: &Csv) -> Result<(), CliError> {
        if self.formats.csv {
            self.write(name, csv.as_str())?;
        }
        Ok(())
    }

    /// `render` runs only when SVG output is enabled.
    pub fn svg(&mut self, name: &str, render: impl FnOnce() -> String) -> Result<(), CliError> {
        if self.formats.svg {
            self.write(name, &render())?;
        }
        Ok(())
    }

    pub fn json<T: Serialize>(
        &mut self,
        name: &str,
        config: &Config,
        report: &T,
    ) -> Result<(), CliError> {
        if self.formats.json {
            let body = serde_json::json!({
                "config": config.to_json(),
                "report": report,
            });
            let text = serde_json::to_string_pretty(&body).expect("report serializes");
            self.write(name, &(text + "\n"))?;
        }
        Ok(())
    }

    pub fn written(&self) -> &[PathBuf] {
        &self.written
    }
}

/// Left-aligned text table.
pub fn table(header: &[&str], rows: &[Vec<String>]) -> String {
    let mut widths: Vec<usize> = header.iter().map(|h| h.len()).collect();
    for row in rows {
        for (w, c) in widths.iter_mut().zip(row) {
            *w = (*w).max(c.len());
        }
    }
    let line = |cells: Vec<&str>| {
        let mut s = String::new();
        for (i, (c, w)) in cells.iter().zip(&widths).enumerate() {
            if i > 0 {
                s.push_str("  ");
            }
            let _ = write!(s, "{c:<w$}");
        }
        s.trim_end().to_string() + "\n"
    };
    let mut out = line(header.to_vec());
    let sep: Vec<String> = widths.iter().map(|w| "-".repeat(*w)).collect();
    out += &line(sep.iter().map(String::as_str).collect());
    for row in rows {
        out += &line(row.iter().map(String::as_str).collect());
    }
    out
}

/// Short human-readable number.
pub fn short(v: f64) -> String {
    if v == 0.0 || (1e-3..1e5).contains(&v.abs()) {
        format!("{v:.6}")
    } else {
        format!("{v:.4e}")
    }
}

pub fn short_opt(v: Option<f64>) -> String {
    v.map(short).unwrap_or_else(|| "-".into())
}

pub fn display_path(p: &Path) -> String {
    p.display().to_string()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn numbers_round_trip() {
        for v in [0.1, 1.0 / 3.0, 1e-300, -2.5e17, std::f64::consts::PI] {
            let s = num(v);
            assert_eq!(s.parse::<f64>().unwrap().to_bits(), v.to_bits());
            let digits = s.split('e').next().unwrap().chars().filter(char::is_ascii_digit).count();
            assert_eq!(digits, 17);
        }
        assert_eq!(opt_num(None), "");
    }

    #[test]
    fn table_aligns() {
        let t = table(&["a", "long"], &[vec!["xyz".into(), "1".into()]]);
        let lines: Vec<_> = t.lines().collect();
        assert_eq!(lines[0], "a    long");
        assert_eq!(lines[2], "xyz  1");
    }
}
