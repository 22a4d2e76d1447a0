//! Deterministic interleaving of per-language document shards according to
//! an allocation plan.
//!
//! The emission order is a pure function of (shard set in canonical order,
//! mixer configuration): a deficit scheduler picks the next language, a
//! cyclic reader supplies the next document, and a rolling writer records
//! checksums. State snapshots make interrupted runs resumable with
//! byte-identical output.

pub mod manifest;
pub mod scheduler;
pub mod source;
pub mod writer;

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::plan::AllocationPlan;
use crate::policy::Distribution;
use crate::record::DocumentRecord;
use crate::stats::CorpusStats;

pub use manifest::{LangMixSummary, MixManifest};
pub use scheduler::{LangProgress, MixerState};
pub use source::{DocSource, MemoryDocSource, ShardDocSource, ShardSet, ShuffledDocSource};
pub use writer::{OutputShard, WriterSnapshot};

pub const DEFAULT_OUTPUT_SHARD_CHARS: u64 = 100_000_000;
pub const DEFAULT_SNAPSHOT_EVERY_DOCS: u64 = 10_000;
const SNAPSHOT_SCHEMA: u32 = 1;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MixerConfig {
    pub plan: AllocationPlan,
    pub seed: u64,
    /// Optional truncation length for emitted documents, in characters.
    pub max_output_doc_chars: Option<u64>,
    /// Roll to a new output shard once it holds this many characters.
    pub output_shard_chars: u64,
    /// Seeded per-epoch within-language shuffle (loads each language into
    /// memory); canonical shard order when off.
    pub shuffle: bool,
    /// Write a resume snapshot every this many documents.
    pub snapshot_every_docs: u64,
    pub output_prefix: String,
}

impl MixerConfig {
    pub fn new(plan: AllocationPlan, seed: u64) -> Self {
        MixerConfig {
            plan,
            seed,
            max_output_doc_chars: None,
            output_shard_chars: DEFAULT_OUTPUT_SHARD_CHARS,
            shuffle: false,
            snapshot_every_docs: DEFAULT_SNAPSHOT_EVERY_DOCS,
            output_prefix: "mix".to_string(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.max_output_doc_chars == Some(0) {
            return Err(Error::Config("max_output_doc_chars must be > 0".into()));
        }
        if self.output_shard_chars == 0 {
            return Err(Error::Config("output_shard_chars must be > 0".into()));
        }
        Ok(())
    }

    /// Stable digest of the configuration; a resume snapshot is only valid
    /// against the exact configuration that produced it.
    pub fn fingerprint(&self) -> String {
        let body = serde_json::to_string(self).expect("config serialization");
        let digest = Sha256::digest(body.as_bytes());
        writer::hex_encode(&digest)
    }

    pub fn state_file_name(&self) -> String {
        format!("{}-state.json", self.output_prefix)
    }
}

#[derive(Debug, Serialize, Deserialize)]
struct MixSnapshot {
    schema_version: u32,
    config_fingerprint: String,
    state: MixerState,
    writer: WriterSnapshot,
}

/// Result of a mixing run. `completed` is false when the run stopped at a
/// document limit with a snapshot written for later resumption.
#[derive(Debug)]
pub struct MixOutcome {
    pub manifest: MixManifest,
    pub completed: bool,
    pub state_file: PathBuf,
}

fn write_snapshot_atomic(path: &Path, snapshot: &MixSnapshot) -> Result<()> {
    let body = serde_json::to_string(snapshot).expect("snapshot serialization");
    let tmp = path.with_extension("json.tmp");
    std::fs::write(&tmp, body).map_err(|e| Error::io(&tmp, e))?;
    std::fs::rename(&tmp, path).map_err(|e| Error::io(path, e))
}

fn truncate_record(record: &mut DocumentRecord, limit: Option<u64>) {
    if let Some(limit) = limit {
        if record.char_count() > limit {
            record.text = record.text.chars().take(limit as usize).collect();
        }
    }
}

/// Compare plan character counts against the characters actually present in
/// the shards; mismatches above 1% per language are reported as warnings.
pub fn reconcile_warnings(plan: &AllocationPlan, scanned: &CorpusStats) -> Vec<String> {
    let mut warnings = Vec::new();
    for entry in &plan.entries {
        if entry.allocated_chars <= 0.0 {
            continue;
        }
        let actual = scanned.char_count(&entry.lang);
        if entry.char_count == 0 {
            continue;
        }
        let rel = (actual as f64 - entry.char_count as f64).abs() / entry.char_count as f64;
        if rel > 0.01 {
            warnings.push(format!(
                "language '{}': plan expects {} chars but shards hold {} ({:.1}% off)",
                entry.lang,
                entry.char_count,
                actual,
                rel * 100.0
            ));
        }
    }
    warnings
}

/// Mix shards according to `cfg.plan` into `out_dir`.
///
/// `resume_from` continues an interrupted run from its snapshot file;
/// `stop_after_docs` stops once the total emitted document count reaches the
/// limit, writing a snapshot instead of finishing.
pub fn run_mix(
    shards: &ShardSet,
    cfg: &MixerConfig,
    out_dir: &Path,
    resume_from: Option<&Path>,
    stop_after_docs: Option<u64>,
) -> Result<MixOutcome> {
    cfg.validate()?;
    let scanned = shards.scan_stats()?;
    let warnings = reconcile_warnings(&cfg.plan, &scanned);

    // Per-language sources for every language the plan will draw from.
    let mut state = MixerState::from_plan(&cfg.plan, |lang| scanned.char_count(lang));
    let mut sources: Vec<Option<Box<dyn DocSource>>> = Vec::with_capacity(state.langs.len());
    for lang in &state.langs {
        if lang.budget_chars <= 0.0 {
            sources.push(None);
            continue;
        }
        let shard_paths = shards.shards(&lang.lang).ok_or_else(|| {
            Error::Mismatch(format!(
                "plan language '{}' is missing from the shard manifest",
                lang.lang
            ))
        })?;
        if scanned.char_count(&lang.lang) == 0 {
            return Err(Error::Config(format!(
                "language '{}' has a positive allocation but empty shards",
                lang.lang
            )));
        }
        let source: Box<dyn DocSource> = if cfg.shuffle {
            Box::new(ShuffledDocSource::from_shards(
                lang.lang.clone(),
                shard_paths,
                cfg.seed,
            )?)
        } else {
            Box::new(ShardDocSource::new(lang.lang.clone(), shard_paths.to_vec())?)
        };
        sources.push(Some(source));
    }

    std::fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
    let state_file = out_dir.join(cfg.state_file_name());
    let fingerprint = cfg.fingerprint();

    let mut shard_writer = if let Some(snapshot_path) = resume_from {
        let data =
            std::fs::read_to_string(snapshot_path).map_err(|e| Error::io(snapshot_path, e))?;
        let snapshot: MixSnapshot = serde_json::from_str(&data).map_err(|e| Error::Parse {
            path: snapshot_path.to_path_buf(),
            line: e.line() as u64,
            msg: e.to_string(),
        })?;
        if snapshot.schema_version != SNAPSHOT_SCHEMA {
            return Err(Error::ResumeMismatch(format!(
                "unsupported snapshot schema version {}",
                snapshot.schema_version
            )));
        }
        if snapshot.config_fingerprint != fingerprint {
            return Err(Error::ResumeMismatch(
                "snapshot was produced by a different plan/configuration".into(),
            ));
        }
        if snapshot.state.langs.len() != state.langs.len() {
            return Err(Error::ResumeMismatch("snapshot language set differs".into()));
        }
        state = snapshot.state;
        for (lang, source) in state.langs.iter().zip(sources.iter_mut()) {
            if let Some(source) = source {
                source.seek(&lang.cursor)?;
            }
        }
        writer::ShardWriter::resume(out_dir, &cfg.output_prefix, cfg.output_shard_chars, &snapshot.writer)?
    } else {
        writer::ShardWriter::create(out_dir, &cfg.output_prefix, cfg.output_shard_chars)?
    };

    let mut docs_since_snapshot = 0u64;
    let completed = loop {
        if stop_after_docs.is_some_and(|limit| state.total_emitted_docs >= limit) {
            let snapshot = MixSnapshot {
                schema_version: SNAPSHOT_SCHEMA,
                config_fingerprint: fingerprint.clone(),
                state: state.clone(),
                writer: shard_writer.snapshot()?,
            };
            write_snapshot_atomic(&state_file, &snapshot)?;
            break false;
        }
        let Some(idx) = state.next_language() else {
            break true;
        };
        let source = sources[idx]
            .as_mut()
            .expect("selected language always has a source");
        let mut sourced = source.next_doc()?;
        truncate_record(&mut sourced.record, cfg.max_output_doc_chars);
        shard_writer.write_doc(&sourced.record)?;
        let cursor = source.cursor();
        state.record_emission(idx, sourced.record.char_count(), sourced.wrapped, cursor);

        docs_since_snapshot += 1;
        if docs_since_snapshot >= cfg.snapshot_every_docs {
            docs_since_snapshot = 0;
            let snapshot = MixSnapshot {
                schema_version: SNAPSHOT_SCHEMA,
                config_fingerprint: fingerprint.clone(),
                state: state.clone(),
                writer: shard_writer.snapshot()?,
            };
            write_snapshot_atomic(&state_file, &snapshot)?;
        }
    };

    let output_shards = if completed {
        let shards = shard_writer.finish()?;
        // The run is done; the resume point is no longer meaningful.
        let _ = std::fs::remove_file(&state_file);
        shards
    } else {
        shard_writer.snapshot()?.completed
    };

    let manifest = MixManifest::from_state(
        &cfg.plan.policy,
        cfg.seed,
        cfg.plan.budget_chars,
        &state,
        output_shards,
        warnings,
    );
    Ok(MixOutcome {
        manifest,
        completed,
        state_file,
    })
}

/// Emit a corpus of about `target_chars` characters whose per-language
/// shares match `dist`, using the same deterministic scheduler as
/// [`run_mix`]. Languages whose share exceeds their available characters
/// wrap into repeat passes and are flagged in the manifest.
pub fn sample_vocab_corpus(
    shards: &ShardSet,
    dist: &Distribution,
    target_chars: u64,
    seed: u64,
    out_dir: &Path,
    output_shard_chars: u64,
) -> Result<MixOutcome> {
    if target_chars == 0 {
        return Err(Error::Config("target_chars must be > 0".into()));
    }
    dist.check_normalized()?;
    let scanned = shards.scan_stats()?;
    let entries = dist
        .iter()
        .map(|(lang, p)| crate::plan::PlanEntry {
            lang: lang.to_string(),
            char_count: scanned.char_count(lang),
            allocated_chars: p * target_chars as f64,
            rate: p,
            epochs: if scanned.char_count(lang) == 0 {
                0.0
            } else {
                p * target_chars as f64 / scanned.char_count(lang) as f64
            },
            capped: false,
        })
        .collect();
    let plan = AllocationPlan {
        policy: "vocab-corpus".to_string(),
        budget_chars: target_chars,
        max_epochs: None,
        entries,
        unspent_chars: 0.0,
        warning: None,
    };
    let mut cfg = MixerConfig::new(plan, seed);
    cfg.output_shard_chars = output_shard_chars;
    cfg.output_prefix = "vocab".to_string();
    run_mix(shards, &cfg, out_dir, None, None)
}

/// In-memory mix over documents grouped by language; returns the emitted
/// stream. Used by analyses and for small corpora.
pub fn mix_in_memory(
    docs_by_lang: &BTreeMap<String, Vec<DocumentRecord>>,
    dist: &Distribution,
    target_chars: u64,
) -> Result<Vec<DocumentRecord>> {
    dist.check_normalized()?;
    let mut langs: Vec<LangProgress> = Vec::new();
    let mut sources: Vec<Option<MemoryDocSource>> = Vec::new();
    for (lang, p) in dist.iter() {
        let docs = docs_by_lang.get(lang).cloned().unwrap_or_default();
        let budget = p * target_chars as f64;
        if budget > 0.0 && docs.is_empty() {
            return Err(Error::Config(format!(
                "language '{lang}' has a positive share but no documents"
            )));
        }
        let corpus_chars: u64 = docs.iter().map(|d| d.char_count()).sum();
        langs.push(LangProgress {
            lang: lang.to_string(),
            target_rate: p,
            budget_chars: budget,
            corpus_chars,
            emitted_chars: 0,
            emitted_docs: 0,
            wrapped: false,
            exhausted: budget <= 0.0,
            cursor: Default::default(),
        });
        sources.push(if docs.is_empty() {
            None
        } else {
            Some(MemoryDocSource::new(lang, docs)?)
        });
    }
    let mut state = MixerState {
        langs,
        total_emitted_chars: 0,
        total_emitted_docs: 0,
    };
    let mut emitted = Vec::new();
    while let Some(idx) = state.next_language() {
        let source = sources[idx].as_mut().expect("budgeted language has docs");
        let sourced = source.next_doc()?;
        let chars = sourced.record.char_count();
        emitted.push(sourced.record);
        state.record_emission(idx, chars, sourced.wrapped, source.cursor());
    }
    Ok(emitted)
}
