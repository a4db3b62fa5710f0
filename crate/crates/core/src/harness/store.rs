//! JSON-lines response files.
//!
//! The first line is a header `{"schema_version":1,"kind":"frame-eval-responses"}`; every
//! following non-empty line is one [`ResponseRecord`].

use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{HarnessError, ResponseRecord};

pub const RESPONSES_SCHEMA_VERSION: u32 = 1;
const KIND: &str = "frame-eval-responses";

#[derive(Debug, Serialize, Deserialize)]
struct Header {
    schema_version: u32,
    kind: String,
}

/// Append-only writer; flushes after every record so an interrupted run can resume.
pub struct ResponseWriter {
    out: BufWriter<File>,
}

impl ResponseWriter {
    /// Truncates `path` and writes a fresh header.
    pub fn create(path: &Path) -> Result<Self, HarnessError> {
        let mut out = BufWriter::new(File::create(path)?);
        let header = Header {
            schema_version: RESPONSES_SCHEMA_VERSION,
            kind: KIND.to_string(),
        };
        serde_json::to_writer(&mut out, &header)?;
        out.write_all(b"\n")?;
        out.flush()?;
        Ok(Self { out })
    }

    /// Opens an existing response file for appending, after validating its header.
    /// Creates the file when it does not exist.
    pub fn append(path: &Path) -> Result<Self, HarnessError> {
        if !path.exists() || std::fs::metadata(path)?.len() == 0 {
            return Self::create(path);
        }
        read_responses(path)?;
        // a previous run may have died mid-line; drop the partial record
        let text = std::fs::read(path)?;
        if text.last() != Some(&b'\n') {
            let keep = text.iter().rposition(|&b| b == b'\n').map_or(0, |i| i + 1);
            OpenOptions::new()
                .write(true)
                .open(path)?
                .set_len(keep as u64)?;
        }
        let file = OpenOptions::new().append(true).open(path)?;
        Ok(Self {
            out: BufWriter::new(file),
        })
    }

    pub fn write(&mut self, record: &ResponseRecord) -> Result<(), HarnessError> {
        if !record.is_valid() {
            return Err(HarnessError::ResponseFile(format!(
                "refusing to persist record {} without positive answer mass",
                record.case_id
            )));
        }
        serde_json::to_writer(&mut self.out, record)?;
        self.out.write_all(b"\n")?;
        self.out.flush()?;
        Ok(())
    }
}

/// Reads every record. A truncated final line, as left by an interrupted run, is ignored.
pub fn read_responses(path: &Path) -> Result<Vec<ResponseRecord>, HarnessError> {
    let reader = BufReader::new(File::open(path)?);
    let mut lines = reader.lines();
    let header_line = lines
        .next()
        .ok_or_else(|| HarnessError::ResponseFile(format!("{} is empty", path.display())))??;
    let header: Header = serde_json::from_str(&header_line)
        .map_err(|e| HarnessError::ResponseFile(format!("{}: bad header: {e}", path.display())))?;
    if header.kind != KIND {
        return Err(HarnessError::ResponseFile(format!(
            "{}: unexpected file kind `{}`",
            path.display(),
            header.kind
        )));
    }
    if header.schema_version != RESPONSES_SCHEMA_VERSION {
        return Err(HarnessError::ResponseFile(format!(
            "{}: unsupported schema version {}",
            path.display(),
            header.schema_version
        )));
    }
    let lines: Vec<String> = lines.collect::<Result<_, _>>()?;
    let last = lines.iter().rposition(|l| !l.trim().is_empty());
    let mut records = Vec::with_capacity(lines.len());
    for (i, line) in lines.iter().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        match serde_json::from_str::<ResponseRecord>(line) {
            Ok(r) if r.is_valid() => records.push(r),
            Ok(r) => {
                return Err(HarnessError::ResponseFile(format!(
                    "{}:{}: record {} has no positive answer mass",
                    path.display(),
                    i + 2,
                    r.case_id
                )))
            }
            Err(_) if Some(i) == last => break,
            Err(e) => {
                return Err(HarnessError::ResponseFile(format!(
                    "{}:{}: {e}",
                    path.display(),
                    i + 2
                )))
            }
        }
    }
    Ok(records)
}
