//! Per-language corpus statistics and their commutative merge.

use std::collections::BTreeMap;
use std::io::{BufRead, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const STATS_SCHEMA: &str = "#unimix-stats v1";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LanguageStats {
    pub lang: String,
    pub char_count: u64,
    pub doc_count: u64,
}

/// Character and document counts per language. Merging is a commutative
/// monoid, so sharded ingestion can aggregate in any order.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CorpusStats {
    entries: BTreeMap<String, LanguageStats>,
}

impl CorpusStats {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn from_counts<I, S>(counts: I) -> Self
    where
        I: IntoIterator<Item = (S, u64)>,
        S: Into<String>,
    {
        let mut stats = Self::new();
        for (lang, chars) in counts {
            let lang = lang.into();
            stats.add(&lang, chars, 1);
        }
        stats
    }

    pub fn add(&mut self, lang: &str, chars: u64, docs: u64) {
        let entry = self
            .entries
            .entry(lang.to_string())
            .or_insert_with(|| LanguageStats {
                lang: lang.to_string(),
                char_count: 0,
                doc_count: 0,
            });
        entry.char_count += chars;
        entry.doc_count += docs;
    }

    pub fn add_document(&mut self, lang: &str, chars: u64) {
        self.add(lang, chars, 1);
    }

    pub fn merge(&mut self, other: &CorpusStats) {
        for stats in other.entries.values() {
            self.add(&stats.lang, stats.char_count, stats.doc_count);
        }
    }

    pub fn merged(mut self, other: &CorpusStats) -> CorpusStats {
        self.merge(other);
        self
    }

    pub fn get(&self, lang: &str) -> Option<&LanguageStats> {
        self.entries.get(lang)
    }

    pub fn char_count(&self, lang: &str) -> u64 {
        self.entries.get(lang).map_or(0, |s| s.char_count)
    }

    pub fn total_chars(&self) -> u64 {
        self.entries.values().map(|s| s.char_count).sum()
    }

    pub fn total_docs(&self) -> u64 {
        self.entries.values().map(|s| s.doc_count).sum()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn languages(&self) -> impl Iterator<Item = &str> {
        self.entries.keys().map(|s| s.as_str())
    }

    pub fn iter(&self) -> impl Iterator<Item = &LanguageStats> {
        self.entries.values()
    }

    /// Canonical ordering: descending character count, ties broken by
    /// language code ascending.
    pub fn canonical(&self) -> Vec<&LanguageStats> {
        let mut entries: Vec<_> = self.entries.values().collect();
        entries.sort_by(|a, b| {
            b.char_count
                .cmp(&a.char_count)
                .then_with(|| a.lang.cmp(&b.lang))
        });
        entries
    }

    /// Ascending by character count, ties by language code ascending.
    pub fn ascending(&self) -> Vec<&LanguageStats> {
        let mut entries: Vec<_> = self.entries.values().collect();
        entries.sort_by(|a, b| {
            a.char_count
                .cmp(&b.char_count)
                .then_with(|| a.lang.cmp(&b.lang))
        });
        entries
    }

    /// Write the tab-separated stats file. `provenance` lines are echoed as
    /// `#`-prefixed header lines after the schema version.
    pub fn write_tsv(&self, w: &mut impl Write, provenance: &[String]) -> std::io::Result<()> {
        writeln!(w, "{STATS_SCHEMA}")?;
        for line in provenance {
            writeln!(w, "#{line}")?;
        }
        for stats in self.canonical() {
            writeln!(w, "{}\t{}\t{}", stats.lang, stats.char_count, stats.doc_count)?;
        }
        Ok(())
    }

    pub fn read_tsv(r: impl BufRead, path: &Path) -> Result<Self> {
        let mut stats = Self::new();
        let mut lines = r.lines().enumerate();
        let (_, first) = lines.next().ok_or_else(|| Error::Parse {
            path: path.to_path_buf(),
            line: 1,
            msg: "empty stats file".into(),
        })?;
        let first = first.map_err(|e| Error::io(path, e))?;
        if first.trim() != STATS_SCHEMA {
            return Err(Error::Parse {
                path: path.to_path_buf(),
                line: 1,
                msg: format!("expected schema header '{STATS_SCHEMA}', found '{first}'"),
            });
        }
        for (idx, line) in lines {
            let line = line.map_err(|e| Error::io(path, e))?;
            let lineno = idx as u64 + 1;
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let mut fields = line.split('\t');
            let parse_err = |msg: &str| Error::Parse {
                path: path.to_path_buf(),
                line: lineno,
                msg: msg.into(),
            };
            let lang = fields
                .next()
                .filter(|l| !l.is_empty())
                .ok_or_else(|| parse_err("missing language code"))?;
            let chars: u64 = fields
                .next()
                .and_then(|f| f.parse().ok())
                .ok_or_else(|| parse_err("bad char_count"))?;
            let docs: u64 = fields
                .next()
                .and_then(|f| f.parse().ok())
                .ok_or_else(|| parse_err("bad doc_count"))?;
            if stats.entries.contains_key(lang) {
                return Err(parse_err(&format!("duplicate language '{lang}'")));
            }
            stats.add(lang, chars, docs);
        }
        Ok(stats)
    }

    pub fn read_tsv_file(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
        Self::read_tsv(std::io::BufReader::new(file), path)
    }
}
