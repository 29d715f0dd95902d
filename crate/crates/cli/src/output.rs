use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use serde::Serialize;

/// Comma-separated file with a fixed header.
pub struct Csv {
    w: BufWriter<File>,
    columns: usize,
}

impl Csv {
    pub fn create(path: &Path, header: &[&str]) -> std::io::Result<Self> {
        let mut w = BufWriter::new(File::create(path)?);
        writeln!(w, "{}", header.join(","))?;
        Ok(Csv { w, columns: header.len() })
    }

    pub fn row(&mut self, fields: &[String]) -> std::io::Result<()> {
        debug_assert_eq!(fields.len(), self.columns);
        writeln!(self.w, "{}", fields.join(","))
    }

    pub fn finish(mut self) -> std::io::Result<()> {
        self.w.flush()
    }
}

/// Everything needed to reproduce a run.
#[derive(Debug, Serialize)]
pub struct RunManifest {
    pub subcommand: String,
    pub config: String,
    pub out: String,
    pub seed: u64,
    pub backup: String,
    pub harvest_probs: Vec<f64>,
    pub sync_probs: Vec<f64>,
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> std::io::Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    serde_json::to_writer_pretty(&mut w, value)?;
    writeln!(w)?;
    w.flush()
}

/// `3-8` for battery levels `[3, 8]`.
pub fn state_label(levels: &[usize]) -> String {
    levels.iter().map(|l| l.to_string()).collect::<Vec<_>>().join("-")
}
