//! Report plumbing shared by the commands.

use std::fs::File;
use std::io::Write;
use std::path::Path;

use anyhow::Context;
use serde_json::Value;

/// What a command produced: text for people, JSON for machines.
#[derive(Debug, Default)]
pub struct Outcome {
    pub human: String,
    pub document: Value,
    pub warnings: Vec<String>,
    /// A warning stems from a refused single-ticking guarantee.
    pub guarantee_warning: bool,
    /// The command ran but its subject failed (e.g. an invalid model).
    pub failed: bool,
}

impl Outcome {
    pub fn new(human: String, document: Value) -> Self {
        Outcome {
            human,
            document,
            ..Outcome::default()
        }
    }
}

pub fn write_json(path: &Path, doc: &Value) -> anyhow::Result<()> {
    let mut text = serde_json::to_string_pretty(doc)?;
    text.push('\n');
    std::fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

/// Writes rows of stringified cells under a header.
pub fn write_csv(path: &Path, header: &[String], rows: &[Vec<String>]) -> anyhow::Result<()> {
    let file = File::create(path).with_context(|| format!("creating {}", path.display()))?;
    let mut w = csv::Writer::from_writer(file);
    w.write_record(header)?;
    for row in rows {
        w.write_record(row)?;
    }
    w.flush()?;
    Ok(())
}

pub fn create(path: &Path) -> anyhow::Result<impl Write> {
    let file = File::create(path).with_context(|| format!("creating {}", path.display()))?;
    Ok(std::io::BufWriter::new(file))
}
