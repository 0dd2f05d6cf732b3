//! Run artifacts. Every file carries the tool version, the seed and the
//! resolved parameters so it can be traced back to the run that made it.

use std::fs;
use std::path::Path;

use anyhow::{Context, Result};
use nat_core::natloop::ArchiveEntry;
use serde::{Deserialize, Serialize};
use serde_json::Value;

pub const VERSION: &str = env!("NAT_VERSION");

#[derive(Clone, Debug, Serialize)]
pub struct Provenance<'a> {
    pub version: &'static str,
    pub seed: u64,
    pub config: &'a Value,
}

impl<'a> Provenance<'a> {
    pub fn new(seed: u64, config: &'a Value) -> Self {
        Self {
            version: VERSION,
            seed,
            config,
        }
    }

    /// Comment line placed at the top of CSV outputs.
    pub fn csv_header(&self) -> String {
        format!("# nat {} seed={} config={}\n", self.version, self.seed, self.config)
    }
}

/// A JSON artifact: provenance fields followed by the payload's fields.
#[derive(Serialize)]
pub struct Document<'a, T: Serialize> {
    #[serde(flatten)]
    pub provenance: &'a Provenance<'a>,
    #[serde(flatten)]
    pub body: T,
}

pub fn write_json<T: Serialize>(dir: &Path, name: &str, provenance: &Provenance, body: T) -> Result<()> {
    let doc = Document { provenance, body };
    let mut text = serde_json::to_string_pretty(&doc)?;
    text.push('\n');
    let path = dir.join(name);
    fs::write(&path, text).with_context(|| format!("writing {}", path.display()))
}

/// Writes `body` (CSV produced by `fill`) below the provenance comment.
pub fn write_csv<F>(dir: &Path, name: &str, provenance: &Provenance, fill: F) -> Result<()>
where
    F: FnOnce(&mut Vec<u8>) -> std::io::Result<()>,
{
    let mut buf = provenance.csv_header().into_bytes();
    fill(&mut buf)?;
    let path = dir.join(name);
    fs::write(&path, buf).with_context(|| format!("writing {}", path.display()))
}

#[derive(Serialize)]
pub struct ArchiveBody<'a> {
    pub objective_names: &'a [String],
    pub capacity: usize,
    pub entries: &'a [ArchiveEntry],
}

/// `archive.json` as written by `search`, or a bare array of entries.
#[derive(Deserialize)]
#[serde(untagged)]
pub enum ArchiveFile {
    Wrapped {
        #[serde(default)]
        objective_names: Option<Vec<String>>,
        entries: Vec<ArchiveEntry>,
    },
    Bare(Vec<ArchiveEntry>),
}

impl ArchiveFile {
    pub fn into_parts(self) -> (Option<Vec<String>>, Vec<ArchiveEntry>) {
        match self {
            ArchiveFile::Wrapped {
                objective_names,
                entries,
            } => (objective_names, entries),
            ArchiveFile::Bare(entries) => (None, entries),
        }
    }
}
