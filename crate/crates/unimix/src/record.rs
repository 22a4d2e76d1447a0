//! Newline-delimited document records and shard I/O.
//!
//! A shard is a file of one JSON object per line with fields
//! `{text, lang, confidence, source_id}`. Files ending in `.gz` are
//! gzip-compressed.

use std::fs::File;
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};

use flate2::read::MultiGzDecoder;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One document with its language label and language-ID confidence.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DocumentRecord {
    pub text: String,
    /// BCP-47-style tag; script variants such as "ru-Latn" are allowed.
    pub lang: String,
    #[serde(rename = "confidence")]
    pub langid_confidence: f64,
    pub source_id: String,
}

impl DocumentRecord {
    /// Character count of a record: the number of Unicode scalar values in
    /// `text`. This counting rule is fixed for the whole pipeline.
    pub fn char_count(&self) -> u64 {
        self.text.chars().count() as u64
    }

    pub fn validate(&self) -> Result<()> {
        if self.lang.is_empty() {
            return Err(Error::Config("record has an empty language tag".into()));
        }
        if !(0.0..=1.0).contains(&self.langid_confidence) {
            return Err(Error::Config(format!(
                "language-ID confidence {} outside [0, 1]",
                self.langid_confidence
            )));
        }
        Ok(())
    }
}

fn open_reader(path: &Path) -> Result<Box<dyn BufRead + Send>> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    if path.extension().is_some_and(|e| e == "gz") {
        Ok(Box::new(BufReader::new(MultiGzDecoder::new(file))))
    } else {
        Ok(Box::new(BufReader::new(file)))
    }
}

/// Streaming reader over one shard file. Yields records in file order,
/// surfacing parse and UTF-8 failures with the shard path and line number.
pub struct ShardReader {
    path: PathBuf,
    reader: Box<dyn BufRead + Send>,
    line: u64,
}

impl ShardReader {
    pub fn open(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref().to_path_buf();
        let reader = open_reader(&path)?;
        Ok(ShardReader {
            path,
            reader,
            line: 0,
        })
    }

    pub fn path(&self) -> &Path {
        &self.path
    }
}

impl Iterator for ShardReader {
    type Item = Result<DocumentRecord>;

    fn next(&mut self) -> Option<Self::Item> {
        let mut buf = Vec::new();
        loop {
            buf.clear();
            match self.reader.read_until(b'\n', &mut buf) {
                Ok(0) => return None,
                Ok(_) => {}
                Err(e) => return Some(Err(Error::io(&self.path, e))),
            }
            self.line += 1;
            if buf.ends_with(b"\n") {
                buf.pop();
            }
            if buf.is_empty() {
                continue;
            }
            let text = match std::str::from_utf8(&buf) {
                Ok(t) => t,
                Err(_) => {
                    return Some(Err(Error::InvalidUtf8 {
                        path: self.path.clone(),
                        line: self.line,
                    }))
                }
            };
            let record: DocumentRecord = match serde_json::from_str(text) {
                Ok(r) => r,
                Err(e) => {
                    return Some(Err(Error::Parse {
                        path: self.path.clone(),
                        line: self.line,
                        msg: e.to_string(),
                    }))
                }
            };
            if let Err(e) = record.validate() {
                return Some(Err(Error::Parse {
                    path: self.path.clone(),
                    line: self.line,
                    msg: e.to_string(),
                }));
            }
            return Some(Ok(record));
        }
    }
}

/// Read a whole shard into memory.
pub fn read_shard(path: impl AsRef<Path>) -> Result<Vec<DocumentRecord>> {
    ShardReader::open(path)?.collect()
}

/// Serialize one record as a single JSON line. The field order is fixed by
/// the struct definition, so the encoding is byte-stable.
pub fn write_record(w: &mut impl Write, record: &DocumentRecord) -> std::io::Result<usize> {
    let line = serde_json::to_string(record).expect("record serialization cannot fail");
    w.write_all(line.as_bytes())?;
    w.write_all(b"\n")?;
    Ok(line.len() + 1)
}

/// Collect shard files under `inputs`: files are taken as-is, directories are
/// walked one level for `*.jsonl` / `*.jsonl.gz` entries. The result is
/// path-sorted so downstream processing is order-independent.
pub fn collect_shard_paths(inputs: &[PathBuf]) -> Result<Vec<PathBuf>> {
    let mut shards = Vec::new();
    for input in inputs {
        if input.is_dir() {
            let entries = std::fs::read_dir(input).map_err(|e| Error::io(input, e))?;
            for entry in entries {
                let entry = entry.map_err(|e| Error::io(input, e))?;
                let path = entry.path();
                let name = path.file_name().and_then(|n| n.to_str()).unwrap_or("");
                if path.is_file() && (name.ends_with(".jsonl") || name.ends_with(".jsonl.gz")) {
                    shards.push(path);
                }
            }
        } else if input.is_file() {
            shards.push(input.clone());
        } else {
            return Err(Error::Config(format!(
                "input {} does not exist",
                input.display()
            )));
        }
    }
    shards.sort();
    shards.dedup();
    Ok(shards)
}
