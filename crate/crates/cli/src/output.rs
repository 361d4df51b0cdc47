use std::path::Path;

use serde::Serialize;

use crate::{CliError, Format};

pub fn format_for(path: &Path, explicit: Option<Format>) -> Format {
    explicit.unwrap_or_else(|| match path.extension().and_then(|e| e.to_str()) {
        Some("csv") => Format::Csv,
        _ => Format::Jsonl,
    })
}

pub fn render<T: Serialize>(records: &[T], format: Format) -> Result<String, CliError> {
    match format {
        Format::Jsonl => {
            let mut s = String::new();
            for r in records {
                s.push_str(&serde_json::to_string(r)?);
                s.push('\n');
            }
            Ok(s)
        }
        Format::Csv => {
            let mut w = csv::Writer::from_writer(Vec::new());
            for r in records {
                w.serialize(r).map_err(|e| CliError::Run(format!("csv: {e}")))?;
            }
            let bytes = w.into_inner().map_err(|e| CliError::Run(format!("csv: {e}")))?;
            String::from_utf8(bytes).map_err(|e| CliError::Run(e.to_string()))
        }
    }
}

/// Writes `records` to `path` if one was given.
pub fn write<T: Serialize>(path: Option<&Path>, format: Option<Format>, records: &[T]) -> Result<(), CliError> {
    let Some(path) = path else { return Ok(()) };
    let text = render(records, format_for(path, format))?;
    std::fs::write(path, text).map_err(|e| CliError::Run(format!("cannot write {}: {e}", path.display())))
}

pub fn write_text(path: &Path, text: &str) -> Result<(), CliError> {
    std::fs::write(path, text).map_err(|e| CliError::Run(format!("cannot write {}: {e}", path.display())))
}
