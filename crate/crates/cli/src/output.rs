use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::Path;

use serde::Serialize;

use crate::error::{CliError, CliResult};

/// Opens `path` for writing, or stdout when `None`.
pub fn sink(path: Option<&Path>) -> CliResult<Box<dyn Write>> {
    match path {
        Some(p) => {
            let f = File::create(p).map_err(|e| CliError::io(p, e))?;
            Ok(Box::new(BufWriter::new(f)))
        }
        None => Ok(Box::new(BufWriter::new(io::stdout().lock()))),
    }
}

fn label(path: Option<&Path>) -> String {
    path.map_or_else(|| "<stdout>".to_string(), |p| p.display().to_string())
}

pub fn write_all(path: Option<&Path>, bytes: &[u8]) -> CliResult<()> {
    let mut w = sink(path)?;
    w.write_all(bytes)
        .and_then(|_| w.flush())
        .map_err(|e| CliError::io(label(path), e))
}

/// Pretty JSON with a trailing newline. Field order follows the struct.
pub fn json<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("report types serialize");
    s.push('\n');
    s
}
