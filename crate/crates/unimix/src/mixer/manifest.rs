//! Reproducibility record of a mixing run.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mixer::scheduler::MixerState;
use crate::mixer::writer::OutputShard;
use crate::TOOL_VERSION;

pub const MANIFEST_SCHEMA: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LangMixSummary {
    pub target_rate: f64,
    pub budget_chars: f64,
    pub corpus_chars: u64,
    pub emitted_chars: u64,
    pub emitted_docs: u64,
    pub epochs: f64,
    /// Whether the language stream wrapped into repeat passes.
    pub wrapped: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MixManifest {
    pub schema_version: u32,
    pub tool_version: String,
    pub policy: String,
    pub seed: u64,
    pub budget_chars: u64,
    pub total_emitted_chars: u64,
    pub total_emitted_docs: u64,
    pub languages: BTreeMap<String, LangMixSummary>,
    pub output_shards: Vec<OutputShard>,
    pub warnings: Vec<String>,
}

impl MixManifest {
    pub fn from_state(
        policy: &str,
        seed: u64,
        budget_chars: u64,
        state: &MixerState,
        output_shards: Vec<OutputShard>,
        warnings: Vec<String>,
    ) -> Self {
        let languages = state
            .langs
            .iter()
            .map(|l| {
                (
                    l.lang.clone(),
                    LangMixSummary {
                        target_rate: l.target_rate,
                        budget_chars: l.budget_chars,
                        corpus_chars: l.corpus_chars,
                        emitted_chars: l.emitted_chars,
                        emitted_docs: l.emitted_docs,
                        epochs: l.epochs(),
                        wrapped: l.wrapped,
                    },
                )
            })
            .collect();
        MixManifest {
            schema_version: MANIFEST_SCHEMA,
            tool_version: TOOL_VERSION.to_string(),
            policy: policy.to_string(),
            seed,
            budget_chars,
            total_emitted_chars: state.total_emitted_chars,
            total_emitted_docs: state.total_emitted_docs,
            languages,
            output_shards,
            warnings,
        }
    }

    pub fn max_epochs(&self) -> f64 {
        self.languages.values().map(|l| l.epochs).fold(0.0, f64::max)
    }

    pub fn write_file(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let body = serde_json::to_string_pretty(self).expect("manifest serialization");
        std::fs::write(path, body).map_err(|e| Error::io(path, e))
    }

    pub fn read_file(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let data = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        serde_json::from_str(&data).map_err(|e| Error::Parse {
            path: path.to_path_buf(),
            line: e.line() as u64,
            msg: e.to_string(),
        })
    }
}
