//! Line-delimited JSON reading and writing shared by every file format in the crate.
//!
//! Files written by the pipeline may start with a provenance header line of
//! the form `{"_header": {...}}`. Readers skip it transparently and expose it
//! through [`read_with_header`].

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const HEADER_KEY: &str = "_header";

/// Provenance stamp carried by pipeline outputs.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Header {
    pub kind: String,
    pub config_hash: String,
}

#[derive(Serialize, Deserialize)]
struct HeaderLine {
    #[serde(rename = "_header")]
    header: Header,
}

/// Parses records from a reader, returning the optional header and the records.
pub fn parse_lines<T: DeserializeOwned>(reader: impl BufRead) -> Result<(Option<Header>, Vec<T>)> {
    let (header, numbered) = parse_numbered(reader)?;
    Ok((header, numbered.into_iter().map(|(_, r)| r).collect()))
}

/// Records paired with their 1-based source line.
pub type Numbered<T> = Vec<(usize, T)>;

/// Like [`parse_lines`], keeping the source line of every record.
pub fn parse_numbered<T: DeserializeOwned>(reader: impl BufRead) -> Result<(Option<Header>, Numbered<T>)> {
    let mut header = None;
    let mut records = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line_no = i + 1;
        let line = line.map_err(|e| Error::MalformedLine { line: line_no, message: e.to_string() })?;
        let trimmed = line.trim();
        if trimmed.is_empty() {
            continue;
        }
        if line_no == 1 && trimmed.contains(HEADER_KEY) {
            if let Ok(h) = serde_json::from_str::<HeaderLine>(trimmed) {
                header = Some(h.header);
                continue;
            }
        }
        let record = serde_json::from_str(trimmed)
            .map_err(|e| Error::MalformedLine { line: line_no, message: e.to_string() })?;
        records.push((line_no, record));
    }
    Ok((header, records))
}

pub fn read_with_header<T: DeserializeOwned>(path: &Path) -> Result<(Option<Header>, Vec<T>)> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    parse_lines(BufReader::new(file))
}

pub fn read<T: DeserializeOwned>(path: &Path) -> Result<Vec<T>> {
    read_with_header(path).map(|(_, records)| records)
}

/// Serializes records (and an optional header line) into a string.
pub fn to_string<T: Serialize>(header: Option<&Header>, records: &[T]) -> Result<String> {
    let mut out = String::new();
    if let Some(header) = header {
        out.push_str(&serde_json::to_string(&HeaderLine { header: header.clone() })?);
        out.push('\n');
    }
    for record in records {
        out.push_str(&serde_json::to_string(record)?);
        out.push('\n');
    }
    Ok(out)
}

pub fn write<T: Serialize>(path: &Path, header: Option<&Header>, records: &[T]) -> Result<()> {
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            std::fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
        }
    }
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    w.write_all(to_string(header, records)?.as_bytes()).and_then(|_| w.flush()).map_err(|e| Error::io(path, e))
}
