//! JSONL stage artifacts. The first line of every file is
//! `{"header":{"config_hash":…,"seed":…,"stage":…}}`; each further line is
//! one record.

use std::fs;
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ArtifactHeader {
    pub config_hash: String,
    pub seed: u64,
    pub stage: String,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct HeaderLine {
    header: ArtifactHeader,
}

pub fn write_records<T: Serialize>(path: impl AsRef<Path>, header: &ArtifactHeader, records: &[T]) -> Result<()> {
    let path = path.as_ref();
    let mut out = serde_json::to_string(&HeaderLine { header: header.clone() })?;
    out.push('\n');
    for r in records {
        out.push_str(&serde_json::to_string(r)?);
        out.push('\n');
    }
    fs::write(path, out).map_err(|e| Error::io(path, e))
}

/// The header and the raw record lines.
pub fn read_lines(path: impl AsRef<Path>) -> Result<(ArtifactHeader, Vec<String>)> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut lines = text.lines();
    let first = lines.next().ok_or_else(|| Error::Parse {
        path: path.to_path_buf(),
        line: 1,
        message: "missing header line".into(),
    })?;
    let header: HeaderLine = serde_json::from_str(first).map_err(|e| Error::Parse {
        path: path.to_path_buf(),
        line: 1,
        message: format!("bad header: {e}"),
    })?;
    Ok((header.header, lines.map(str::to_string).collect()))
}

pub fn read_records<T: DeserializeOwned>(path: impl AsRef<Path>) -> Result<(ArtifactHeader, Vec<T>)> {
    let path = path.as_ref();
    let (header, lines) = read_lines(path)?;
    let records = lines
        .iter()
        .enumerate()
        .map(|(i, l)| {
            serde_json::from_str(l).map_err(|e| Error::Parse {
                path: path.to_path_buf(),
                line: i + 2,
                message: e.to_string(),
            })
        })
        .collect::<Result<Vec<T>>>()?;
    Ok((header, records))
}
