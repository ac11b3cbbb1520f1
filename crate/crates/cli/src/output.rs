//! Run directories: config echo, CSV tables, JSON summaries and SVG plots.

use crate::config::RunConfig;
use crate::error::{CliError, CliResult};
use serde::Serialize;
use std::fs;
use std::path::{Path, PathBuf};

/// A value in a CSV cell. Floats are written with 17 significant digits.
#[derive(Debug, Clone)]
pub enum Cell {
    F(f64),
    I(usize),
    B(bool),
    S(String),
}

impl From<f64> for Cell {
    fn from(v: f64) -> Self {
        Cell::F(v)
    }
}

impl From<usize> for Cell {
    fn from(v: usize) -> Self {
        Cell::I(v)
    }
}

impl From<bool> for Cell {
    fn from(v: bool) -> Self {
        Cell::B(v)
    }
}

impl From<&str> for Cell {
    fn from(v: &str) -> Self {
        Cell::S(v.to_string())
    }
}

pub fn format_float(v: f64) -> String {
    if v.is_nan() {
        "NaN".into()
    } else if v.is_infinite() {
        if v > 0.0 { "inf" } else { "-inf" }.into()
    } else {
        format!("{v:.16e}")
    }
}

impl Cell {
    fn render(&self) -> String {
        match self {
            Cell::F(v) => format_float(*v),
            Cell::I(v) => v.to_string(),
            Cell::B(v) => v.to_string(),
            Cell::S(s) => s.clone(),
        }
    }
}

#[derive(Debug)]
pub struct RunDir {
    pub path: PathBuf,
}

impl RunDir {
    /// Creates `<out>/<name>`, replacing files of an earlier run with the same name.
    pub fn create(out: &Path, name: &str, cfg: &RunConfig) -> CliResult<Self> {
        let path = out.join(name);
        fs::create_dir_all(&path).map_err(|source| CliError::Output {
            file: path.clone(),
            source,
        })?;
        let dir = RunDir { path };
        dir.write_text("config.json", &cfg.canonical_json())?;
        Ok(dir)
    }

    pub fn file(&self, name: &str) -> PathBuf {
        self.path.join(name)
    }

    pub fn write_text(&self, name: &str, text: &str) -> CliResult<()> {
        let file = self.file(name);
        fs::write(&file, text).map_err(|source| CliError::Output { file, source })
    }

    pub fn write_json<T: Serialize>(&self, name: &str, value: &T) -> CliResult<()> {
        // Through `Value` so that keys come out sorted.
        let v = serde_json::to_value(value).expect("summary serializes");
        let mut text = serde_json::to_string_pretty(&v).expect("value serializes");
        text.push('\n');
        self.write_text(name, &text)
    }

    pub fn write_csv(&self, name: &str, header: &[&str], rows: &[Vec<Cell>]) -> CliResult<()> {
        let file = self.file(name);
        let csv_err = |source| CliError::Csv {
            file: file.clone(),
            source,
        };
        let mut w = csv::WriterBuilder::new()
            .terminator(csv::Terminator::CRLF)
            .from_path(&file)
            .map_err(csv_err)?;
        w.write_record(header).map_err(csv_err)?;
        for row in rows {
            debug_assert_eq!(row.len(), header.len());
            w.write_record(row.iter().map(Cell::render)).map_err(csv_err)?;
        }
        w.flush().map_err(|source| CliError::Output {
            file: file.clone(),
            source,
        })
    }
}

/// Writes `index, values[index]` for each named column of equal length.
pub fn column_rows(columns: &[&[f64]]) -> Vec<Vec<Cell>> {
    let n = columns.iter().map(|c| c.len()).max().unwrap_or(0);
    (0..n)
        .map(|k| {
            std::iter::once(Cell::I(k))
                .chain(columns.iter().map(|c| Cell::F(c.get(k).copied().unwrap_or(0.0))))
                .collect()
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn floats_keep_seventeen_significant_digits() {
        let s = format_float(0.1);
        assert_eq!(s, "1.0000000000000001e-1");
        assert_eq!(s.parse::<f64>().unwrap(), 0.1);
        assert_eq!(format_float(f64::INFINITY), "inf");
    }

    #[test]
    fn csv_is_rfc4180() {
        let tmp = tempfile::tempdir().unwrap();
        let dir = RunDir::create(tmp.path(), "r", &RunConfig::default()).unwrap();
        dir.write_csv("t.csv", &["k", "x", "note"], &[vec![1usize.into(), 2.5.into(), "a,b".into()]])
            .unwrap();
        let text = fs::read_to_string(dir.file("t.csv")).unwrap();
        assert_eq!(text, "k,x,note\r\n1,2.5000000000000000e0,\"a,b\"\r\n");
        assert!(dir.file("config.json").is_file());
    }
}
