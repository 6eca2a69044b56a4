//! Report document: header (schema version, config echo), body, footer.

use std::collections::BTreeMap;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::CliError;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub schema_version: u32,
    pub tool: String,
    pub tool_version: String,
    pub command: String,
    /// Full resolved configuration; replaying it reproduces this document.
    pub config: BTreeMap<String, String>,
    pub body: serde_json::Value,
    pub footer: Footer,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Footer {
    pub pass: bool,
    pub exit_code: i32,
    pub summary: String,
    /// Wall-clock seconds; present only when timing was requested, since it
    /// breaks bitwise reproducibility.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub timing: Option<BTreeMap<String, f64>>,
}

impl Report {
    pub fn to_text(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }

    pub fn from_text(text: &str) -> Result<Self, CliError> {
        let r: Report =
            serde_json::from_str(text).map_err(|e| CliError::Config(format!("cannot parse report: {e}")))?;
        if r.schema_version != SCHEMA_VERSION {
            return Err(CliError::Config(format!(
                "report schema version {} is not supported (expected {SCHEMA_VERSION})",
                r.schema_version
            )));
        }
        Ok(r)
    }

    pub fn read(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read report {}: {e}", path.display())))?;
        Report::from_text(&text)
    }
}

/// Writes `contents` to `path` through a temporary file in the same
/// directory, renamed into place once complete.
pub fn write_atomic(path: &Path, contents: &[u8]) -> Result<(), CliError> {
    let io = |e: std::io::Error| CliError::Io(format!("{}: {e}", path.display()));
    let dir = match path.parent() {
        Some(d) if !d.as_os_str().is_empty() => d,
        _ => Path::new("."),
    };
    std::fs::create_dir_all(dir).map_err(io)?;
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(io)?;
    tmp.write_all(contents).map_err(io)?;
    tmp.as_file().sync_all().map_err(io)?;
    tmp.persist(path).map_err(|e| io(e.error))?;
    Ok(())
}
