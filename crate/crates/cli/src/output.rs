use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::CliError;

/// Round-trip exact float text.
pub fn num(x: f64) -> String {
    // no "-0" cells
    let x = if x == 0.0 { 0.0 } else { x };
    format!("{x:.16e}")
}

/// CSV table with a fixed header; quoting follows RFC 4180.
pub struct Table {
    path: PathBuf,
    writer: csv::Writer<std::fs::File>,
    width: usize,
}

impl Table {
    pub fn create(dir: &Path, name: &str, header: &[&str]) -> Result<Self, CliError> {
        let path = dir.join(name);
        let mut writer = csv::WriterBuilder::new()
            .terminator(csv::Terminator::CRLF)
            .from_path(&path)
            .map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
        writer
            .write_record(header)
            .map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
        Ok(Self {
            path,
            writer,
            width: header.len(),
        })
    }

    pub fn row(&mut self, fields: &[String]) -> Result<(), CliError> {
        debug_assert_eq!(fields.len(), self.width);
        self.writer
            .write_record(fields)
            .map_err(|e| CliError::Io(format!("{}: {e}", self.path.display())))
    }

    pub fn finish(mut self) -> Result<PathBuf, CliError> {
        self.writer
            .flush()
            .map_err(|e| CliError::Io(format!("{}: {e}", self.path.display())))?;
        Ok(self.path)
    }
}

#[derive(Debug, Serialize)]
pub struct Summary<'a, R: Serialize> {
    pub scenario: &'a str,
    pub version: &'a str,
    pub config_sha256: String,
    pub wall_time_s: f64,
    pub threads: usize,
    pub seed: Option<u64>,
    pub status: &'a str,
    pub error: Option<String>,
    pub files: Vec<String>,
    pub results: R,
}

pub fn write_json<T: Serialize>(dir: &Path, name: &str, value: &T) -> Result<(), CliError> {
    let path = dir.join(name);
    let text = serde_json::to_string_pretty(value).map_err(|e| CliError::Io(e.to_string()))?;
    std::fs::write(&path, text + "\n").map_err(|e| CliError::Io(format!("{}: {e}", path.display())))
}
