//! Per-language document sources: cyclic readers over canonical shard order,
//! with optional seeded per-epoch shuffling, plus the shard-set manifest.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::record::{DocumentRecord, ShardReader};
use crate::stats::CorpusStats;

/// Position of the next document to read from a language's cyclic stream.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SourceCursor {
    pub shard_idx: usize,
    pub doc_idx: u64,
    /// Completed full passes over the language.
    pub epoch: u64,
}

pub struct SourcedDoc {
    pub record: DocumentRecord,
    /// True when this document starts a repeat pass over the language.
    pub wrapped: bool,
}

/// A cyclic, seekable stream of one language's documents. The emission order
/// is a pure function of the cursor, which makes mixing resumable.
pub trait DocSource {
    fn lang(&self) -> &str;
    fn next_doc(&mut self) -> Result<SourcedDoc>;
    fn cursor(&self) -> SourceCursor;
    fn seek(&mut self, cursor: &SourceCursor) -> Result<()>;
}

/// Streams documents from a language's shard files in canonical (path-sorted)
/// order, wrapping to the first shard after a full pass.
pub struct ShardDocSource {
    lang: String,
    shards: Vec<PathBuf>,
    cursor: SourceCursor,
    reader: Option<ShardReader>,
    docs_this_pass: u64,
    pending_wrap: bool,
}

impl ShardDocSource {
    pub fn new(lang: impl Into<String>, shards: Vec<PathBuf>) -> Result<Self> {
        let lang = lang.into();
        if shards.is_empty() {
            return Err(Error::Config(format!(
                "language '{lang}' has no shards but a positive allocation"
            )));
        }
        Ok(ShardDocSource {
            lang,
            shards,
            cursor: SourceCursor::default(),
            reader: None,
            docs_this_pass: 0,
            pending_wrap: false,
        })
    }

    fn open_current(&mut self, skip: u64) -> Result<()> {
        let mut reader = ShardReader::open(&self.shards[self.cursor.shard_idx])?;
        for _ in 0..skip {
            match reader.next() {
                Some(Ok(_)) => {}
                Some(Err(e)) => return Err(e),
                None => {
                    return Err(Error::Mismatch(format!(
                        "cursor beyond end of shard {} for language '{}'",
                        reader.path().display(),
                        self.lang
                    )))
                }
            }
        }
        self.reader = Some(reader);
        Ok(())
    }
}

impl DocSource for ShardDocSource {
    fn lang(&self) -> &str {
        &self.lang
    }

    fn next_doc(&mut self) -> Result<SourcedDoc> {
        loop {
            if self.reader.is_none() {
                let skip = self.cursor.doc_idx;
                self.open_current(skip)?;
            }
            match self.reader.as_mut().unwrap().next() {
                Some(Ok(record)) => {
                    self.cursor.doc_idx += 1;
                    self.docs_this_pass += 1;
                    let wrapped = std::mem::take(&mut self.pending_wrap);
                    return Ok(SourcedDoc { record, wrapped });
                }
                Some(Err(e)) => return Err(e),
                None => {
                    self.reader = None;
                    self.cursor.doc_idx = 0;
                    self.cursor.shard_idx += 1;
                    if self.cursor.shard_idx == self.shards.len() {
                        if self.docs_this_pass == 0 {
                            return Err(Error::Config(format!(
                                "language '{}' has shards but no documents",
                                self.lang
                            )));
                        }
                        self.cursor.shard_idx = 0;
                        self.cursor.epoch += 1;
                        self.docs_this_pass = 0;
                        self.pending_wrap = true;
                    }
                }
            }
        }
    }

    fn cursor(&self) -> SourceCursor {
        self.cursor.clone()
    }

    fn seek(&mut self, cursor: &SourceCursor) -> Result<()> {
        if cursor.shard_idx >= self.shards.len() {
            return Err(Error::Mismatch(format!(
                "cursor shard index {} out of range for language '{}'",
                cursor.shard_idx, self.lang
            )));
        }
        self.cursor = cursor.clone();
        self.reader = None;
        // Reading resumes mid-pass; the pass-local doc counter only guards
        // against empty languages, which a successful seek rules out.
        self.docs_this_pass = cursor.doc_idx + cursor.shard_idx as u64;
        self.pending_wrap = false;
        self.open_current(cursor.doc_idx)
    }
}

/// In-memory cyclic source, used by analyses and small corpora.
pub struct MemoryDocSource {
    lang: String,
    docs: Vec<DocumentRecord>,
    cursor: SourceCursor,
}

impl MemoryDocSource {
    pub fn new(lang: impl Into<String>, docs: Vec<DocumentRecord>) -> Result<Self> {
        let lang = lang.into();
        if docs.is_empty() {
            return Err(Error::Config(format!(
                "language '{lang}' has no documents but a positive allocation"
            )));
        }
        Ok(MemoryDocSource {
            lang,
            docs,
            cursor: SourceCursor::default(),
        })
    }
}

impl DocSource for MemoryDocSource {
    fn lang(&self) -> &str {
        &self.lang
    }

    fn next_doc(&mut self) -> Result<SourcedDoc> {
        let wrapped = self.cursor.doc_idx == 0 && self.cursor.epoch > 0;
        let record = self.docs[self.cursor.doc_idx as usize].clone();
        self.cursor.doc_idx += 1;
        if self.cursor.doc_idx as usize == self.docs.len() {
            self.cursor.doc_idx = 0;
            self.cursor.epoch += 1;
        }
        Ok(SourcedDoc { record, wrapped })
    }

    fn cursor(&self) -> SourceCursor {
        self.cursor.clone()
    }

    fn seek(&mut self, cursor: &SourceCursor) -> Result<()> {
        if cursor.shard_idx != 0 || cursor.doc_idx as usize >= self.docs.len() {
            return Err(Error::Mismatch(format!(
                "cursor out of range for in-memory language '{}'",
                self.lang
            )));
        }
        self.cursor = cursor.clone();
        Ok(())
    }
}

fn epoch_shuffle_seed(seed: u64, lang: &str, epoch: u64) -> u64 {
    let mut hasher = Sha256::new();
    hasher.update(seed.to_le_bytes());
    hasher.update(lang.as_bytes());
    hasher.update(epoch.to_le_bytes());
    u64::from_le_bytes(hasher.finalize()[..8].try_into().unwrap())
}

/// In-memory source with a seeded permutation regenerated each epoch.
/// Holds the whole language in memory; intended for the optional
/// within-language shuffle, which is off by default.
pub struct ShuffledDocSource {
    lang: String,
    docs: Vec<DocumentRecord>,
    order: Vec<u32>,
    seed: u64,
    cursor: SourceCursor,
}

impl ShuffledDocSource {
    pub fn new(lang: impl Into<String>, docs: Vec<DocumentRecord>, seed: u64) -> Result<Self> {
        let lang = lang.into();
        if docs.is_empty() {
            return Err(Error::Config(format!(
                "language '{lang}' has no documents but a positive allocation"
            )));
        }
        let mut source = ShuffledDocSource {
            lang,
            docs,
            order: Vec::new(),
            seed,
            cursor: SourceCursor::default(),
        };
        source.reshuffle();
        Ok(source)
    }

    pub fn from_shards(lang: impl Into<String>, shards: &[PathBuf], seed: u64) -> Result<Self> {
        let mut docs = Vec::new();
        for shard in shards {
            for doc in ShardReader::open(shard)? {
                docs.push(doc?);
            }
        }
        Self::new(lang, docs, seed)
    }

    fn reshuffle(&mut self) {
        let mut rng = ChaCha8Rng::seed_from_u64(epoch_shuffle_seed(
            self.seed,
            &self.lang,
            self.cursor.epoch,
        ));
        self.order = (0..self.docs.len() as u32).collect();
        self.order.shuffle(&mut rng);
    }
}

impl DocSource for ShuffledDocSource {
    fn lang(&self) -> &str {
        &self.lang
    }

    fn next_doc(&mut self) -> Result<SourcedDoc> {
        let wrapped = self.cursor.doc_idx == 0 && self.cursor.epoch > 0;
        let record = self.docs[self.order[self.cursor.doc_idx as usize] as usize].clone();
        self.cursor.doc_idx += 1;
        if self.cursor.doc_idx as usize == self.docs.len() {
            self.cursor.doc_idx = 0;
            self.cursor.epoch += 1;
            self.reshuffle();
        }
        Ok(SourcedDoc { record, wrapped })
    }

    fn cursor(&self) -> SourceCursor {
        self.cursor.clone()
    }

    fn seek(&mut self, cursor: &SourceCursor) -> Result<()> {
        if cursor.shard_idx != 0 || cursor.doc_idx as usize >= self.docs.len() {
            return Err(Error::Mismatch(format!(
                "cursor out of range for shuffled language '{}'",
                self.lang
            )));
        }
        self.cursor = cursor.clone();
        self.reshuffle();
        Ok(())
    }
}

const SHARD_SET_SCHEMA: u32 = 1;

#[derive(Debug, Serialize, Deserialize)]
struct ShardSetFile {
    schema_version: u32,
    languages: BTreeMap<String, Vec<PathBuf>>,
}

/// Per-language shard locations in canonical (path-sorted) order.
#[derive(Debug, Clone, Default)]
pub struct ShardSet {
    languages: BTreeMap<String, Vec<PathBuf>>,
}

impl ShardSet {
    pub fn new(languages: BTreeMap<String, Vec<PathBuf>>) -> Self {
        let mut languages = languages;
        for shards in languages.values_mut() {
            shards.sort();
        }
        ShardSet { languages }
    }

    /// Load a manifest file: JSON with a `languages` map from language code
    /// to shard paths. Relative paths are resolved against the manifest's
    /// directory.
    pub fn from_manifest_file(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let data = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let file: ShardSetFile = serde_json::from_str(&data).map_err(|e| Error::Parse {
            path: path.to_path_buf(),
            line: e.line() as u64,
            msg: e.to_string(),
        })?;
        if file.schema_version != SHARD_SET_SCHEMA {
            return Err(Error::Config(format!(
                "unsupported shard manifest schema version {}",
                file.schema_version
            )));
        }
        let base = path.parent().unwrap_or_else(|| Path::new("."));
        let languages = file
            .languages
            .into_iter()
            .map(|(lang, shards)| {
                let resolved = shards
                    .into_iter()
                    .map(|s| if s.is_absolute() { s } else { base.join(s) })
                    .collect();
                (lang, resolved)
            })
            .collect();
        Ok(Self::new(languages))
    }

    pub fn write_manifest_file(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let file = ShardSetFile {
            schema_version: SHARD_SET_SCHEMA,
            languages: self.languages.clone(),
        };
        let body = serde_json::to_string_pretty(&file).expect("manifest serialization");
        std::fs::write(path, body).map_err(|e| Error::io(path, e))
    }

    pub fn languages(&self) -> impl Iterator<Item = &str> {
        self.languages.keys().map(|s| s.as_str())
    }

    pub fn shards(&self, lang: &str) -> Option<&[PathBuf]> {
        self.languages.get(lang).map(|v| v.as_slice())
    }

    /// Read every shard once and count characters and documents per
    /// language, keyed by the document's own language label.
    pub fn scan_stats(&self) -> Result<CorpusStats> {
        use rayon::prelude::*;
        let partials: Vec<Result<CorpusStats>> = self
            .languages
            .par_iter()
            .map(|(lang, shards)| {
                let mut stats = CorpusStats::new();
                for shard in shards {
                    for doc in ShardReader::open(shard)? {
                        stats.add_document(lang, doc?.char_count());
                    }
                }
                Ok(stats)
            })
            .collect();
        let mut stats = CorpusStats::new();
        for partial in partials {
            stats.merge(&partial?);
        }
        Ok(stats)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::fs::File;

    fn doc(text: &str, id: &str) -> DocumentRecord {
        DocumentRecord {
            text: text.into(),
            lang: "en".into(),
            langid_confidence: 0.99,
            source_id: id.into(),
        }
    }

    fn write_shard(path: &Path, texts: &[&str]) {
        let mut f = File::create(path).unwrap();
        for (i, t) in texts.iter().enumerate() {
            crate::record::write_record(&mut f, &doc(t, &format!("{i}"))).unwrap();
        }
    }

    #[test]
    fn shard_source_wraps_in_canonical_order() {
        let dir = tempfile::tempdir().unwrap();
        let a = dir.path().join("a.jsonl");
        let b = dir.path().join("b.jsonl");
        write_shard(&a, &["1", "2"]);
        write_shard(&b, &["3"]);
        // Path order regardless of construction order.
        let mut src = ShardDocSource::new("en", vec![b.clone(), a.clone()]).unwrap();
        // Canonical order is the caller's: the mixer passes sorted paths.
        let mut src_sorted = ShardDocSource::new("en", vec![a, b]).unwrap();
        let texts: Vec<_> = (0..7)
            .map(|_| src_sorted.next_doc().unwrap())
            .map(|d| d.record.text)
            .collect();
        assert_eq!(texts, vec!["1", "2", "3", "1", "2", "3", "1"]);
        let wraps: Vec<_> = (0..4)
            .map(|_| src.next_doc().unwrap().wrapped)
            .collect();
        assert_eq!(wraps, vec![false, false, false, true]);
    }

    #[test]
    fn shard_source_seek_resumes_identically() {
        let dir = tempfile::tempdir().unwrap();
        let a = dir.path().join("a.jsonl");
        write_shard(&a, &["x", "y", "z"]);
        let mut src = ShardDocSource::new("en", vec![a.clone()]).unwrap();
        for _ in 0..4 {
            src.next_doc().unwrap();
        }
        let cursor = src.cursor();
        let expected: Vec<_> = (0..5)
            .map(|_| src.next_doc().unwrap().record.text)
            .collect();
        let mut resumed = ShardDocSource::new("en", vec![a]).unwrap();
        resumed.seek(&cursor).unwrap();
        let actual: Vec<_> = (0..5)
            .map(|_| resumed.next_doc().unwrap().record.text)
            .collect();
        assert_eq!(actual, expected);
    }

    #[test]
    fn empty_shard_language_is_a_config_error() {
        let dir = tempfile::tempdir().unwrap();
        let empty = dir.path().join("empty.jsonl");
        File::create(&empty).unwrap();
        let mut src = ShardDocSource::new("en", vec![empty]).unwrap();
        assert!(matches!(src.next_doc(), Err(Error::Config(_))));
    }

    #[test]
    fn shuffled_source_is_seed_deterministic_and_covers_each_pass() {
        let docs: Vec<_> = (0..10).map(|i| doc(&i.to_string(), &i.to_string())).collect();
        let mut a = ShuffledDocSource::new("en", docs.clone(), 7).unwrap();
        let mut b = ShuffledDocSource::new("en", docs.clone(), 7).unwrap();
        let run_a: Vec<_> = (0..20).map(|_| a.next_doc().unwrap().record.text).collect();
        let run_b: Vec<_> = (0..20).map(|_| b.next_doc().unwrap().record.text).collect();
        assert_eq!(run_a, run_b);
        // Each pass covers every document exactly once.
        let mut first_pass: Vec<_> = run_a[..10].to_vec();
        first_pass.sort();
        let mut all: Vec<_> = (0..10).map(|i| i.to_string()).collect();
        all.sort();
        assert_eq!(first_pass, all);
        // Different epochs use different permutations (overwhelmingly likely).
        assert_ne!(run_a[..10], run_a[10..]);
        let mut c = ShuffledDocSource::new("en", docs, 8).unwrap();
        let run_c: Vec<_> = (0..20).map(|_| c.next_doc().unwrap().record.text).collect();
        assert_ne!(run_a, run_c);
    }

    #[test]
    fn manifest_round_trip_resolves_relative_paths() {
        let dir = tempfile::tempdir().unwrap();
        let shard = dir.path().join("en-0.jsonl");
        write_shard(&shard, &["hello"]);
        let manifest = dir.path().join("manifest.json");
        std::fs::write(
            &manifest,
            r#"{"schema_version":1,"languages":{"en":["en-0.jsonl"]}}"#,
        )
        .unwrap();
        let set = ShardSet::from_manifest_file(&manifest).unwrap();
        assert_eq!(set.shards("en").unwrap(), &[shard]);
        let stats = set.scan_stats().unwrap();
        assert_eq!(stats.char_count("en"), 5);
    }
}
