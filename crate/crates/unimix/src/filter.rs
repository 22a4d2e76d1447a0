//! Document quality filtering: language-ID confidence threshold, per-language
//! blocklists with a soft pass-through rate, and blocklist term pruning.

use std::collections::BTreeMap;
use std::path::PathBuf;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::record::{DocumentRecord, ShardReader};
use crate::stats::CorpusStats;

pub const DEFAULT_CONFIDENCE_THRESHOLD: f64 = 0.95;
pub const DEFAULT_SOFT_PASS_RATE: f64 = 0.001;
pub const DEFAULT_PRUNE_THRESHOLD: f64 = 0.10;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FilterConfig {
    /// Documents with language-ID confidence strictly below this are dropped.
    pub confidence_threshold: f64,
    /// Per-language blocklist terms, matched case-folded as substrings.
    pub blocklists: BTreeMap<String, Vec<String>>,
    /// Fraction of blocklisted documents allowed through anyway.
    pub soft_pass_rate: f64,
    /// A term matching more than this fraction of a language's documents is
    /// removed from that language's blocklist.
    pub prune_threshold: f64,
    /// Seed for the per-document soft-pass decision stream.
    pub seed: u64,
}

impl Default for FilterConfig {
    fn default() -> Self {
        FilterConfig {
            confidence_threshold: DEFAULT_CONFIDENCE_THRESHOLD,
            blocklists: BTreeMap::new(),
            soft_pass_rate: DEFAULT_SOFT_PASS_RATE,
            prune_threshold: DEFAULT_PRUNE_THRESHOLD,
            seed: 0,
        }
    }
}

impl FilterConfig {
    pub fn validate(&self) -> Result<()> {
        for (name, value) in [
            ("confidence_threshold", self.confidence_threshold),
            ("soft_pass_rate", self.soft_pass_rate),
        ] {
            if !(0.0..=1.0).contains(&value) {
                return Err(Error::Config(format!("{name} {value} outside [0, 1]")));
            }
        }
        if !(self.prune_threshold > 0.0 && self.prune_threshold <= 1.0) {
            return Err(Error::Config(format!(
                "prune_threshold {} outside (0, 1]",
                self.prune_threshold
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum FilterDecision {
    Keep,
    DropLangId,
    DropBlocklist,
    KeepSoftPass,
}

impl FilterDecision {
    pub fn keeps(self) -> bool {
        matches!(self, FilterDecision::Keep | FilterDecision::KeepSoftPass)
    }
}

/// Deterministic per-document draw in [0, 1), keyed by (seed, source_id).
/// Keying by the document identity rather than stream position makes every
/// decision independent of shard boundaries and processing order.
pub fn soft_pass_draw(seed: u64, source_id: &str) -> f64 {
    let mut hasher = Sha256::new();
    hasher.update(seed.to_le_bytes());
    hasher.update(source_id.as_bytes());
    let digest = hasher.finalize();
    let x = u64::from_le_bytes(digest[..8].try_into().unwrap());
    (x >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}

/// A filter with case-folded blocklist terms prepared once. `decide` is a
/// pure function of the document and the configuration.
#[derive(Debug, Clone)]
pub struct DocumentFilter {
    config: FilterConfig,
    folded_terms: BTreeMap<String, Vec<String>>,
}

impl DocumentFilter {
    pub fn new(config: FilterConfig) -> Result<Self> {
        config.validate()?;
        let folded_terms = config
            .blocklists
            .iter()
            .map(|(lang, terms)| {
                (
                    lang.clone(),
                    terms.iter().map(|t| t.to_lowercase()).collect(),
                )
            })
            .collect();
        Ok(DocumentFilter {
            config,
            folded_terms,
        })
    }

    pub fn config(&self) -> &FilterConfig {
        &self.config
    }

    pub fn decide(&self, doc: &DocumentRecord) -> FilterDecision {
        // "below the threshold" is strict: equality keeps.
        if doc.langid_confidence < self.config.confidence_threshold {
            return FilterDecision::DropLangId;
        }
        if let Some(terms) = self.folded_terms.get(&doc.lang) {
            let folded = doc.text.to_lowercase();
            if terms.iter().any(|t| folded.contains(t.as_str())) {
                return if soft_pass_draw(self.config.seed, &doc.source_id)
                    < self.config.soft_pass_rate
                {
                    FilterDecision::KeepSoftPass
                } else {
                    FilterDecision::DropBlocklist
                };
            }
        }
        FilterDecision::Keep
    }
}

/// Spec-level entry point; prefer [`DocumentFilter`] when filtering streams.
pub fn filter_document(doc: &DocumentRecord, cfg: &FilterConfig) -> Result<FilterDecision> {
    Ok(DocumentFilter::new(cfg.clone())?.decide(doc))
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct LangFilterCounts {
    pub docs_seen: u64,
    pub docs_kept: u64,
    pub docs_dropped_langid: u64,
    pub docs_dropped_blocklist: u64,
    pub docs_soft_passed: u64,
    pub chars_seen: u64,
    pub chars_kept: u64,
    pub chars_dropped: u64,
}

impl LangFilterCounts {
    fn record(&mut self, decision: FilterDecision, chars: u64) {
        self.docs_seen += 1;
        self.chars_seen += chars;
        match decision {
            FilterDecision::Keep => {
                self.docs_kept += 1;
                self.chars_kept += chars;
            }
            FilterDecision::KeepSoftPass => {
                self.docs_kept += 1;
                self.docs_soft_passed += 1;
                self.chars_kept += chars;
            }
            FilterDecision::DropLangId => {
                self.docs_dropped_langid += 1;
                self.chars_dropped += chars;
            }
            FilterDecision::DropBlocklist => {
                self.docs_dropped_blocklist += 1;
                self.chars_dropped += chars;
            }
        }
    }

    fn merge(&mut self, other: &LangFilterCounts) {
        self.docs_seen += other.docs_seen;
        self.docs_kept += other.docs_kept;
        self.docs_dropped_langid += other.docs_dropped_langid;
        self.docs_dropped_blocklist += other.docs_dropped_blocklist;
        self.docs_soft_passed += other.docs_soft_passed;
        self.chars_seen += other.chars_seen;
        self.chars_kept += other.chars_kept;
        self.chars_dropped += other.chars_dropped;
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct FilterReport {
    pub schema_version: u32,
    pub per_language: BTreeMap<String, LangFilterCounts>,
    /// Terms removed from blocklists before filtering, per language.
    pub pruned_terms: BTreeMap<String, Vec<String>>,
    /// Languages whose pruning was skipped because they had no documents.
    pub prune_skipped: Vec<String>,
}

impl FilterReport {
    pub fn new() -> Self {
        FilterReport {
            schema_version: 1,
            ..Default::default()
        }
    }

    pub fn record(&mut self, lang: &str, decision: FilterDecision, chars: u64) {
        self.per_language
            .entry(lang.to_string())
            .or_default()
            .record(decision, chars);
    }

    pub fn merge(&mut self, other: &FilterReport) {
        for (lang, counts) in &other.per_language {
            self.per_language
                .entry(lang.clone())
                .or_default()
                .merge(counts);
        }
        for (lang, terms) in &other.pruned_terms {
            let entry = self.pruned_terms.entry(lang.clone()).or_default();
            for term in terms {
                if !entry.contains(term) {
                    entry.push(term.clone());
                }
            }
        }
        for lang in &other.prune_skipped {
            if !self.prune_skipped.contains(lang) {
                self.prune_skipped.push(lang.clone());
            }
        }
    }

    pub fn total_docs_seen(&self) -> u64 {
        self.per_language.values().map(|c| c.docs_seen).sum()
    }

    pub fn total_docs_dropped(&self) -> u64 {
        self.per_language
            .values()
            .map(|c| c.docs_dropped_langid + c.docs_dropped_blocklist)
            .sum()
    }

    pub fn total_chars_dropped(&self) -> u64 {
        self.per_language.values().map(|c| c.chars_dropped).sum()
    }

    /// Fraction of documents dropped by any filter.
    pub fn doc_drop_fraction(&self) -> f64 {
        let seen = self.total_docs_seen();
        if seen == 0 {
            0.0
        } else {
            self.total_docs_dropped() as f64 / seen as f64
        }
    }

    /// Fraction of characters dropped by any filter.
    pub fn char_drop_fraction(&self) -> f64 {
        let seen: u64 = self.per_language.values().map(|c| c.chars_seen).sum();
        if seen == 0 {
            0.0
        } else {
            self.total_chars_dropped() as f64 / seen as f64
        }
    }
}

/// Result of measuring blocklist terms against the unfiltered document set.
#[derive(Debug, Clone, Default)]
pub struct PruneOutcome {
    /// Blocklists with over-matching terms removed.
    pub blocklists: BTreeMap<String, Vec<String>>,
    pub pruned_terms: BTreeMap<String, Vec<String>>,
    /// Languages with no documents: their rate is undefined, nothing pruned.
    pub skipped: Vec<String>,
}

/// Remove from each language's blocklist any term whose substring-match rate
/// over that language's documents exceeds `cfg.prune_threshold`. Rates are
/// measured per term independently against the pre-filter document set.
pub fn prune_blocklists<'a, I>(docs: I, cfg: &FilterConfig) -> Result<PruneOutcome>
where
    I: IntoIterator<Item = &'a DocumentRecord>,
{
    cfg.validate()?;
    let folded: BTreeMap<&str, Vec<String>> = cfg
        .blocklists
        .iter()
        .map(|(lang, terms)| {
            (
                lang.as_str(),
                terms.iter().map(|t| t.to_lowercase()).collect(),
            )
        })
        .collect();
    let mut doc_totals: BTreeMap<&str, u64> = BTreeMap::new();
    let mut match_counts: BTreeMap<(&str, usize), u64> = BTreeMap::new();
    for doc in docs {
        let Some((lang, terms)) = folded.get_key_value(doc.lang.as_str()) else {
            continue;
        };
        *doc_totals.entry(lang).or_default() += 1;
        let text = doc.text.to_lowercase();
        for (idx, term) in terms.iter().enumerate() {
            if text.contains(term.as_str()) {
                *match_counts.entry((lang, idx)).or_default() += 1;
            }
        }
    }

    let mut outcome = PruneOutcome::default();
    for (lang, terms) in &cfg.blocklists {
        let total = doc_totals.get(lang.as_str()).copied().unwrap_or(0);
        if total == 0 {
            outcome.skipped.push(lang.clone());
            outcome.blocklists.insert(lang.clone(), terms.clone());
            continue;
        }
        let mut kept = Vec::new();
        for (idx, term) in terms.iter().enumerate() {
            let matches = match_counts
                .get(&(lang.as_str(), idx))
                .copied()
                .unwrap_or(0);
            if matches as f64 / total as f64 > cfg.prune_threshold {
                outcome
                    .pruned_terms
                    .entry(lang.clone())
                    .or_default()
                    .push(term.clone());
            } else {
                kept.push(term.clone());
            }
        }
        outcome.blocklists.insert(lang.clone(), kept);
    }
    Ok(outcome)
}

/// Filter a stream of documents and aggregate statistics over the retained
/// records. Counting is a commutative merge, so the result is independent of
/// shard boundaries and processing order.
pub fn ingest_stats<'a, I>(docs: I, filter: &DocumentFilter) -> (CorpusStats, FilterReport)
where
    I: IntoIterator<Item = &'a DocumentRecord>,
{
    let mut stats = CorpusStats::new();
    let mut report = FilterReport::new();
    for doc in docs {
        let decision = filter.decide(doc);
        let chars = doc.char_count();
        report.record(&doc.lang, decision, chars);
        if decision.keeps() {
            stats.add_document(&doc.lang, chars);
        }
    }
    (stats, report)
}

/// Shard-parallel ingestion. Each shard is filtered independently and the
/// per-shard accumulators are merged; the merge is commutative, so the
/// parallelism degree never changes the result.
pub fn ingest_shard_files(
    shards: &[PathBuf],
    filter: &DocumentFilter,
) -> Result<(CorpusStats, FilterReport)> {
    let partials: Vec<Result<(CorpusStats, FilterReport)>> = shards
        .par_iter()
        .map(|path| {
            let mut stats = CorpusStats::new();
            let mut report = FilterReport::new();
            for doc in ShardReader::open(path)? {
                let doc = doc?;
                let decision = filter.decide(&doc);
                let chars = doc.char_count();
                report.record(&doc.lang, decision, chars);
                if decision.keeps() {
                    stats.add_document(&doc.lang, chars);
                }
            }
            Ok((stats, report))
        })
        .collect();

    let mut stats = CorpusStats::new();
    let mut report = FilterReport::new();
    for partial in partials {
        let (s, r) = partial?;
        stats.merge(&s);
        report.merge(&r);
    }
    Ok((stats, report))
}
