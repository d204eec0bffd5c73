use std::io::Write;
use std::path::{Path, PathBuf};

use clap::ValueEnum;
use kramers_core::Error;

use crate::config::ResolvedConfig;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Csv,
    Json,
}

impl Format {
    pub fn extension(self) -> &'static str {
        match self {
            Self::Csv => "csv",
            Self::Json => "json",
        }
    }
}

/// Writes `contents` to `path` via a temporary file in the same directory and a rename,
/// so readers never observe a partial file.
pub fn write_atomic(path: &Path, contents: &[u8]) -> Result<(), Error> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p.to_path_buf(),
        _ => PathBuf::from("."),
    };
    let io = |e: std::io::Error| Error::Config(format!("cannot write {}: {e}", path.display()));
    let mut tmp = tempfile::NamedTempFile::new_in(&dir).map_err(io)?;
    tmp.write_all(contents).map_err(io)?;
    tmp.flush().map_err(io)?;
    tmp.persist(path).map_err(|e| io(e.error))?;
    Ok(())
}

/// CSV preceded by `#` comment lines holding the resolved config.
pub fn csv_with_header(config: &ResolvedConfig, body: &str) -> String {
    format!(
        "# kramers {}\n# config: {}\n# master_seed: {}\n{body}",
        config.version,
        config.to_json(),
        config.master_seed
    )
}

/// `{"config": ..., "result": ...}`.
pub fn json_with_config(config: &ResolvedConfig, result: serde_json::Value) -> String {
    let doc = serde_json::json!({
        "config": serde_json::to_value(config).expect("config serializes"),
        "result": result,
    });
    let mut s = serde_json::to_string_pretty(&doc).expect("document serializes");
    s.push('\n');
    s
}

/// Output path: `--out` if given, else `kramers-<command>.<ext>` in the working directory.
pub fn resolve_out(out: Option<&Path>, command: &str, format: Format) -> PathBuf {
    out.map(Path::to_path_buf)
        .unwrap_or_else(|| PathBuf::from(format!("kramers-{command}.{}", format.extension())))
}
