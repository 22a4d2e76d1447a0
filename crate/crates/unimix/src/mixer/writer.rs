//! Rolling, checksummed output shard writer with truncate-and-replay resume.

use std::fs::{File, OpenOptions};
use std::io::{BufWriter, Read, Seek, SeekFrom, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::record::DocumentRecord;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct OutputShard {
    pub file_name: String,
    pub sha256: String,
    pub bytes: u64,
    pub chars: u64,
    pub docs: u64,
}

/// Snapshot of writer progress. `current_bytes` is the length of the
/// in-progress shard at snapshot time; on resume the file is truncated back
/// to that length, so bytes written after the snapshot are replayed.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct WriterSnapshot {
    pub completed: Vec<OutputShard>,
    pub shard_index: u64,
    pub current_bytes: u64,
    pub current_chars: u64,
    pub current_docs: u64,
}

pub struct ShardWriter {
    out_dir: PathBuf,
    prefix: String,
    /// A shard rolls over once it holds at least this many characters.
    shard_chars: u64,
    file: Option<BufWriter<File>>,
    hasher: Sha256,
    shard_index: u64,
    current_bytes: u64,
    current_chars: u64,
    current_docs: u64,
    completed: Vec<OutputShard>,
}

impl ShardWriter {
    pub fn create(out_dir: impl Into<PathBuf>, prefix: impl Into<String>, shard_chars: u64) -> Result<Self> {
        let out_dir = out_dir.into();
        std::fs::create_dir_all(&out_dir).map_err(|e| Error::io(&out_dir, e))?;
        Ok(ShardWriter {
            out_dir,
            prefix: prefix.into(),
            shard_chars: shard_chars.max(1),
            file: None,
            hasher: Sha256::new(),
            shard_index: 0,
            current_bytes: 0,
            current_chars: 0,
            current_docs: 0,
            completed: Vec::new(),
        })
    }

    /// Reopen an interrupted run. The in-progress shard is truncated to the
    /// snapshot length and re-hashed, so continued writing produces exactly
    /// the bytes an uninterrupted run would have.
    pub fn resume(
        out_dir: impl Into<PathBuf>,
        prefix: impl Into<String>,
        shard_chars: u64,
        snapshot: &WriterSnapshot,
    ) -> Result<Self> {
        let out_dir: PathBuf = out_dir.into();
        let prefix: String = prefix.into();
        let mut writer = ShardWriter {
            out_dir: out_dir.clone(),
            prefix: prefix.clone(),
            shard_chars: shard_chars.max(1),
            file: None,
            hasher: Sha256::new(),
            shard_index: snapshot.shard_index,
            current_bytes: snapshot.current_bytes,
            current_chars: snapshot.current_chars,
            current_docs: snapshot.current_docs,
            completed: snapshot.completed.clone(),
        };
        for shard in &writer.completed {
            let path = out_dir.join(&shard.file_name);
            if !path.is_file() {
                return Err(Error::ResumeMismatch(format!(
                    "completed shard {} is missing",
                    path.display()
                )));
            }
        }
        if snapshot.current_bytes > 0 || snapshot.current_docs > 0 {
            let path = writer.current_path();
            let mut file = OpenOptions::new()
                .read(true)
                .write(true)
                .open(&path)
                .map_err(|e| Error::io(&path, e))?;
            let len = file.metadata().map_err(|e| Error::io(&path, e))?.len();
            if len < snapshot.current_bytes {
                return Err(Error::ResumeMismatch(format!(
                    "shard {} is shorter ({len} bytes) than the snapshot ({})",
                    path.display(),
                    snapshot.current_bytes
                )));
            }
            file.set_len(snapshot.current_bytes)
                .map_err(|e| Error::io(&path, e))?;
            file.seek(SeekFrom::Start(0)).map_err(|e| Error::io(&path, e))?;
            let mut buf = [0u8; 64 * 1024];
            let mut remaining = snapshot.current_bytes;
            while remaining > 0 {
                let take = buf.len().min(remaining as usize);
                let n = file
                    .read(&mut buf[..take])
                    .map_err(|e| Error::io(&path, e))?;
                if n == 0 {
                    break;
                }
                writer.hasher.update(&buf[..n]);
                remaining -= n as u64;
            }
            file.seek(SeekFrom::End(0)).map_err(|e| Error::io(&path, e))?;
            writer.file = Some(BufWriter::new(file));
        }
        Ok(writer)
    }

    fn current_path(&self) -> PathBuf {
        self.out_dir
            .join(format!("{}-{:05}.jsonl", self.prefix, self.shard_index))
    }

    pub fn write_doc(&mut self, record: &DocumentRecord) -> Result<()> {
        if self.file.is_none() {
            let path = self.current_path();
            // Overwrites any stale bytes left behind by a run that died
            // after the last snapshot.
            let file = File::create(&path).map_err(|e| Error::io(&path, e))?;
            self.file = Some(BufWriter::new(file));
            self.hasher = Sha256::new();
        }
        let mut line = serde_json::to_string(record).expect("record serialization");
        line.push('\n');
        let path = self.current_path();
        self.file
            .as_mut()
            .unwrap()
            .write_all(line.as_bytes())
            .map_err(|e| Error::io(&path, e))?;
        self.hasher.update(line.as_bytes());
        self.current_bytes += line.len() as u64;
        self.current_chars += record.char_count();
        self.current_docs += 1;
        if self.current_chars >= self.shard_chars {
            self.finish_current()?;
        }
        Ok(())
    }

    fn finish_current(&mut self) -> Result<()> {
        let path = self.current_path();
        if let Some(mut file) = self.file.take() {
            file.flush().map_err(|e| Error::io(&path, e))?;
        }
        let digest = std::mem::take(&mut self.hasher).finalize();
        self.completed.push(OutputShard {
            file_name: path.file_name().unwrap().to_string_lossy().into_owned(),
            sha256: hex_encode(&digest),
            bytes: self.current_bytes,
            chars: self.current_chars,
            docs: self.current_docs,
        });
        self.shard_index += 1;
        self.current_bytes = 0;
        self.current_chars = 0;
        self.current_docs = 0;
        Ok(())
    }

    /// Flush pending bytes and capture a snapshot for a resume point.
    pub fn snapshot(&mut self) -> Result<WriterSnapshot> {
        let path = self.current_path();
        if let Some(file) = self.file.as_mut() {
            file.flush().map_err(|e| Error::io(&path, e))?;
        }
        Ok(WriterSnapshot {
            completed: self.completed.clone(),
            shard_index: self.shard_index,
            current_bytes: self.current_bytes,
            current_chars: self.current_chars,
            current_docs: self.current_docs,
        })
    }

    pub fn finish(mut self) -> Result<Vec<OutputShard>> {
        if self.current_docs > 0 {
            self.finish_current()?;
        }
        Ok(self.completed)
    }
}

pub fn hex_encode(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

/// SHA-256 of a file on disk, for manifest verification.
pub fn sha256_file(path: &Path) -> Result<String> {
    let mut file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut hasher = Sha256::new();
    std::io::copy(&mut file, &mut hasher).map_err(|e| Error::io(path, e))?;
    Ok(hex_encode(&hasher.finalize()))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn doc(text: &str) -> DocumentRecord {
        DocumentRecord {
            text: text.into(),
            lang: "en".into(),
            langid_confidence: 1.0,
            source_id: "s".into(),
        }
    }

    #[test]
    fn rolls_shards_and_hashes_match_disk() {
        let dir = tempfile::tempdir().unwrap();
        let mut w = ShardWriter::create(dir.path(), "mix", 8).unwrap();
        for i in 0..6 {
            w.write_doc(&doc(&format!("docnum{i}"))).unwrap();
        }
        let shards = w.finish().unwrap();
        assert!(shards.len() > 1);
        for shard in &shards {
            let on_disk = sha256_file(&dir.path().join(&shard.file_name)).unwrap();
            assert_eq!(on_disk, shard.sha256);
        }
        let total_docs: u64 = shards.iter().map(|s| s.docs).sum();
        assert_eq!(total_docs, 6);
    }

    #[test]
    fn resume_after_truncation_is_byte_identical() {
        let dir_a = tempfile::tempdir().unwrap();
        let dir_b = tempfile::tempdir().unwrap();
        let docs: Vec<_> = (0..20).map(|i| doc(&format!("text {i}"))).collect();

        let mut straight = ShardWriter::create(dir_a.path(), "mix", 50).unwrap();
        for d in &docs {
            straight.write_doc(d).unwrap();
        }
        let expected = straight.finish().unwrap();

        let mut first = ShardWriter::create(dir_b.path(), "mix", 50).unwrap();
        for d in &docs[..9] {
            first.write_doc(d).unwrap();
        }
        let snap = first.snapshot().unwrap();
        // Simulate a crash: extra writes after the snapshot get discarded.
        for d in &docs[9..12] {
            first.write_doc(d).unwrap();
        }
        drop(first);

        let mut resumed = ShardWriter::resume(dir_b.path(), "mix", 50, &snap).unwrap();
        for d in &docs[9..] {
            resumed.write_doc(d).unwrap();
        }
        let actual = resumed.finish().unwrap();
        assert_eq!(actual, expected);
        for shard in &actual {
            assert_eq!(
                sha256_file(&dir_b.path().join(&shard.file_name)).unwrap(),
                shard.sha256
            );
        }
    }
}
