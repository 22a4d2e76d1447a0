//! Analytical artifacts over plans and corpora: representation ratios
//! against native-speaker populations, rank-ordered rate and epoch curves,
//! a character-script composition proxy, and side-by-side policy
//! comparisons. All outputs are data files (TSV/CSV); rendering is left to
//! external tooling.

use std::collections::BTreeMap;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use unicode_script::{Script, UnicodeScript};

use crate::error::{Error, Result};
use crate::mixer::mix_in_memory;
use crate::plan::{plan_from_policy, AllocationPlan};
use crate::policy::{Distribution, SamplingPolicy};
use crate::record::DocumentRecord;
use crate::stats::CorpusStats;

pub const SPEAKERS_SCHEMA: &str = "#unimix-speakers v1";
pub const CURVES_SCHEMA: &str = "#unimix-curves v1";
pub const COMPARISON_SCHEMA: &str = "#unimix-comparison v1";
/// Default ratio assigned to languages with no recorded native speakers.
pub const DEFAULT_RATIO_CLIP: f64 = 1000.0;

/// Native-speaker populations per language plus the world population.
/// Shipped as a user-editable snapshot; counts drift over time.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SpeakerTable {
    pub world_population: u64,
    pub speakers: BTreeMap<String, u64>,
    pub source: Option<String>,
}

impl SpeakerTable {
    pub fn new(world_population: u64, speakers: BTreeMap<String, u64>) -> Result<Self> {
        let table = SpeakerTable {
            world_population,
            speakers,
            source: None,
        };
        table.validate()?;
        Ok(table)
    }

    pub fn validate(&self) -> Result<()> {
        if self.speakers.is_empty() {
            return Err(Error::Config("speaker table is empty".into()));
        }
        if self.world_population == 0 {
            return Err(Error::Config("world population must be > 0".into()));
        }
        if let Some((lang, &s)) = self
            .speakers
            .iter()
            .find(|(_, &s)| s > self.world_population)
        {
            return Err(Error::Config(format!(
                "language '{lang}' has {s} speakers, more than the world population"
            )));
        }
        Ok(())
    }

    pub fn get(&self, lang: &str) -> Option<u64> {
        self.speakers.get(lang).copied()
    }

    pub fn write(&self, mut w: impl Write) -> Result<()> {
        let fail = |e| Error::Config(format!("speaker table write failed: {e}"));
        writeln!(w, "{SPEAKERS_SCHEMA}").map_err(fail)?;
        writeln!(w, "#world_population\t{}", self.world_population).map_err(fail)?;
        if let Some(source) = &self.source {
            writeln!(w, "#source\t{source}").map_err(fail)?;
        }
        for (lang, s) in &self.speakers {
            writeln!(w, "{lang}\t{s}").map_err(fail)?;
        }
        Ok(())
    }

    pub fn write_file(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        self.write(std::io::BufWriter::new(file))
    }

    pub fn read(r: impl std::io::Read, path: &Path) -> Result<Self> {
        let reader = BufReader::new(r);
        let mut world_population: Option<u64> = None;
        let mut source = None;
        let mut speakers = BTreeMap::new();
        let mut saw_schema = false;
        for (i, line) in reader.lines().enumerate() {
            let line_no = i as u64 + 1;
            let parse_err = |msg: String| Error::Parse {
                path: path.to_path_buf(),
                line: line_no,
                msg,
            };
            let line = line.map_err(|e| Error::io(path, e))?;
            if line_no == 1 {
                if line.trim() != SPEAKERS_SCHEMA {
                    return Err(parse_err(format!("expected schema line '{SPEAKERS_SCHEMA}'")));
                }
                saw_schema = true;
                continue;
            }
            if let Some(rest) = line.strip_prefix("#world_population\t") {
                world_population = Some(
                    rest.trim()
                        .parse()
                        .map_err(|e| parse_err(format!("bad world population: {e}")))?,
                );
                continue;
            }
            if let Some(rest) = line.strip_prefix("#source\t") {
                source = Some(rest.trim().to_string());
                continue;
            }
            if line.starts_with('#') || line.trim().is_empty() {
                continue;
            }
            let (lang, count) = line
                .split_once('\t')
                .ok_or_else(|| parse_err("expected 'lang<TAB>native_speakers'".into()))?;
            let count: u64 = count
                .trim()
                .parse()
                .map_err(|e| parse_err(format!("bad speaker count: {e}")))?;
            if speakers.insert(lang.to_string(), count).is_some() {
                return Err(parse_err(format!("duplicate language '{lang}'")));
            }
        }
        if !saw_schema {
            return Err(Error::Parse {
                path: path.to_path_buf(),
                line: 1,
                msg: format!("expected schema line '{SPEAKERS_SCHEMA}'"),
            });
        }
        let world_population = world_population.ok_or_else(|| Error::Parse {
            path: path.to_path_buf(),
            line: 1,
            msg: "missing '#world_population' header".into(),
        })?;
        let mut table = SpeakerTable {
            world_population,
            speakers,
            source,
        };
        table.validate()?;
        // validate() checked everything; keep the parsed source annotation.
        table.source = table.source.take();
        Ok(table)
    }

    pub fn read_file(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
        Self::read(file, path)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RatioClass {
    Overrepresented,
    Underrepresented,
    Unit,
}

impl RatioClass {
    fn of(ratio: f64) -> Self {
        if ratio > 1.0 {
            RatioClass::Overrepresented
        } else if ratio < 1.0 {
            RatioClass::Underrepresented
        } else {
            RatioClass::Unit
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            RatioClass::Overrepresented => "overrepresented",
            RatioClass::Underrepresented => "underrepresented",
            RatioClass::Unit => "unit",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RepresentationEntry {
    pub lang: String,
    pub ratio: f64,
    pub class: RatioClass,
    /// True when the language has no recorded native speakers and the ratio
    /// was clipped rather than computed.
    pub clipped: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RepresentationReport {
    pub world_population: u64,
    pub clip: f64,
    pub entries: Vec<RepresentationEntry>,
}

/// Ratio between a language's share of the sampling distribution and its
/// share of native speakers: R = (w * t_l) / (s_l * sum t). Zero-speaker
/// languages get the clip value.
pub fn representation_ratio(
    dist: &Distribution,
    speakers: &SpeakerTable,
    lang: &str,
    clip: f64,
) -> Result<(f64, bool)> {
    if !dist.contains(lang) {
        return Err(Error::Mismatch(format!(
            "language '{lang}' missing from distribution"
        )));
    }
    let t = dist.get(lang);
    let s = speakers
        .get(lang)
        .ok_or_else(|| Error::Mismatch(format!("language '{lang}' missing from speaker table")))?;
    if s == 0 {
        return Ok((clip, true));
    }
    Ok((speakers.world_population as f64 * t / s as f64, false))
}

/// Per-language representation ratios over every language in the speaker
/// table. Languages absent from the distribution get R = 0.
pub fn representation_report(
    dist: &Distribution,
    speakers: &SpeakerTable,
    clip: f64,
) -> Result<RepresentationReport> {
    speakers.validate()?;
    let mut entries = Vec::with_capacity(speakers.speakers.len());
    for lang in speakers.speakers.keys() {
        let (ratio, clipped) = if dist.contains(lang) {
            representation_ratio(dist, speakers, lang, clip)?
        } else {
            (0.0, false)
        };
        entries.push(RepresentationEntry {
            lang: lang.clone(),
            ratio,
            class: RatioClass::of(ratio),
            clipped,
        });
    }
    for (lang, p) in dist.iter() {
        if p > 0.0 && speakers.get(lang).is_none() {
            return Err(Error::Mismatch(format!(
                "language '{lang}' is sampled but missing from the speaker table"
            )));
        }
    }
    Ok(RepresentationReport {
        world_population: speakers.world_population,
        clip,
        entries,
    })
}

pub fn write_representation_csv(
    report: &RepresentationReport,
    mut w: impl Write,
    provenance: &[String],
) -> Result<()> {
    let fail = |e| Error::Config(format!("report write failed: {e}"));
    writeln!(w, "#unimix-representation v1").map_err(fail)?;
    for line in provenance {
        writeln!(w, "#{line}").map_err(fail)?;
    }
    writeln!(w, "#world_population\t{}", report.world_population).map_err(fail)?;
    writeln!(w, "lang,ratio,class,clipped").map_err(fail)?;
    for entry in &report.entries {
        writeln!(
            w,
            "{},{},{},{}",
            entry.lang,
            entry.ratio,
            entry.class.label(),
            entry.clipped as u8
        )
        .map_err(fail)?;
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CurveAxis {
    Epochs,
    Rate,
}

impl CurveAxis {
    pub fn label(self) -> &'static str {
        match self {
            CurveAxis::Epochs => "epochs",
            CurveAxis::Rate => "rate",
        }
    }
}

/// One policy's values by language rank (1-based, descending char count,
/// ties by language code). Both axes are intended for log-scale plotting.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateCurve {
    pub policy: String,
    pub axis: CurveAxis,
    /// (rank, lang, value) in rank order.
    pub points: Vec<(u32, String, f64)>,
}

/// Rank-ordered epoch and rate curves for each plan. All plans must cover
/// the same corpus.
pub fn rate_epoch_curves(plans: &[AllocationPlan]) -> Result<Vec<RateCurve>> {
    if plans.is_empty() {
        return Err(Error::Config("no plans given".into()));
    }
    let fingerprint = plans[0].corpus_fingerprint();
    for plan in &plans[1..] {
        if plan.corpus_fingerprint() != fingerprint {
            return Err(Error::Mismatch(
                "plans cover different corpora; curves are not comparable".into(),
            ));
        }
    }
    let mut curves = Vec::with_capacity(plans.len() * 2);
    for plan in plans {
        // Plan entries are already in canonical rank order.
        let epochs = plan
            .entries
            .iter()
            .enumerate()
            .map(|(i, e)| (i as u32 + 1, e.lang.clone(), e.epochs))
            .collect();
        let rates = plan
            .entries
            .iter()
            .enumerate()
            .map(|(i, e)| (i as u32 + 1, e.lang.clone(), e.rate))
            .collect();
        curves.push(RateCurve {
            policy: plan.policy.clone(),
            axis: CurveAxis::Epochs,
            points: epochs,
        });
        curves.push(RateCurve {
            policy: plan.policy.clone(),
            axis: CurveAxis::Rate,
            points: rates,
        });
    }
    Ok(curves)
}

pub fn write_curves_csv(
    curves: &[RateCurve],
    mut w: impl Write,
    provenance: &[String],
) -> Result<()> {
    let fail = |e| Error::Config(format!("curve write failed: {e}"));
    writeln!(w, "{CURVES_SCHEMA}").map_err(fail)?;
    for line in provenance {
        writeln!(w, "#{line}").map_err(fail)?;
    }
    writeln!(w, "policy,axis,rank,lang,value").map_err(fail)?;
    for curve in curves {
        for (rank, lang, value) in &curve.points {
            writeln!(
                w,
                "{},{},{rank},{lang},{value}",
                curve.policy,
                curve.axis.label()
            )
            .map_err(fail)?;
        }
    }
    Ok(())
}

/// Character-script composition of a sampled sub-corpus. This is a
/// character-level proxy for token-script analyses: no vocabulary is
/// trained, characters are classified directly by Unicode script.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScriptComposition {
    pub sampled_chars: u64,
    /// Fractions by script name; Common, Inherited, and Unknown collapse
    /// into "Other". Sums to 1.
    pub fractions: BTreeMap<String, f64>,
}

fn script_bucket(c: char) -> &'static str {
    match c.script() {
        Script::Common | Script::Inherited | Script::Unknown => "Other",
        s => s.full_name(),
    }
}

fn lang_shuffle_seed(seed: u64, lang: &str) -> u64 {
    let mut hasher = Sha256::new();
    hasher.update(seed.to_le_bytes());
    hasher.update(lang.as_bytes());
    u64::from_le_bytes(hasher.finalize()[..8].try_into().unwrap())
}

/// Sample about `sample_chars` characters with the deterministic mixer
/// (documents shuffled per language under `seed`) and report per-script
/// character fractions.
pub fn script_composition(
    docs_by_lang: &BTreeMap<String, Vec<DocumentRecord>>,
    dist: &Distribution,
    sample_chars: u64,
    seed: u64,
) -> Result<ScriptComposition> {
    if sample_chars == 0 {
        return Err(Error::Config("sample_chars must be > 0".into()));
    }
    let shuffled: BTreeMap<String, Vec<DocumentRecord>> = docs_by_lang
        .iter()
        .map(|(lang, docs)| {
            let mut docs = docs.clone();
            let mut rng = ChaCha8Rng::seed_from_u64(lang_shuffle_seed(seed, lang));
            docs.shuffle(&mut rng);
            (lang.clone(), docs)
        })
        .collect();
    let sample = mix_in_memory(&shuffled, dist, sample_chars)?;
    let mut counts: BTreeMap<&'static str, u64> = BTreeMap::new();
    let mut total = 0u64;
    for doc in &sample {
        for c in doc.text.chars() {
            *counts.entry(script_bucket(c)).or_insert(0) += 1;
            total += 1;
        }
    }
    if total == 0 {
        return Err(Error::Config("sampled zero characters".into()));
    }
    let fractions = counts
        .into_iter()
        .map(|(script, n)| (script.to_string(), n as f64 / total as f64))
        .collect();
    Ok(ScriptComposition {
        sampled_chars: total,
        fractions,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonRow {
    pub policy: String,
    pub lang: String,
    pub rate: f64,
    pub epochs: f64,
    pub capped: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolicySummary {
    pub policy: String,
    pub entropy: f64,
    pub max_epochs: f64,
    /// Number of languages sharing the maximum sampling rate (within
    /// relative tolerance), i.e. the size of the uniform head.
    pub head_uniform_count: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolicyComparison {
    pub budget_chars: u64,
    pub rows: Vec<ComparisonRow>,
    pub summaries: Vec<PolicySummary>,
}

/// One row per language and policy plus per-policy summary statistics,
/// over the same corpus and budget.
pub fn compare_policies(
    stats: &CorpusStats,
    policies: &[SamplingPolicy],
    budget_chars: u64,
) -> Result<PolicyComparison> {
    if policies.is_empty() {
        return Err(Error::Config("no policies given".into()));
    }
    let mut rows = Vec::new();
    let mut summaries = Vec::new();
    for policy in policies {
        let plan = plan_from_policy(stats, policy, budget_chars)?;
        let max_rate = plan.entries.iter().map(|e| e.rate).fold(0.0, f64::max);
        let head_uniform_count = plan
            .entries
            .iter()
            .filter(|e| max_rate > 0.0 && (max_rate - e.rate) / max_rate <= 1e-6)
            .count();
        for entry in &plan.entries {
            rows.push(ComparisonRow {
                policy: plan.policy.clone(),
                lang: entry.lang.clone(),
                rate: entry.rate,
                epochs: entry.epochs,
                capped: entry.capped,
            });
        }
        summaries.push(PolicySummary {
            policy: plan.policy.clone(),
            entropy: plan.distribution().entropy(),
            max_epochs: plan.max_epochs_observed(),
            head_uniform_count,
        });
    }
    Ok(PolicyComparison {
        budget_chars,
        rows,
        summaries,
    })
}

pub fn write_comparison_csv(
    cmp: &PolicyComparison,
    mut w: impl Write,
    provenance: &[String],
) -> Result<()> {
    let fail = |e| Error::Config(format!("comparison write failed: {e}"));
    writeln!(w, "{COMPARISON_SCHEMA}").map_err(fail)?;
    for line in provenance {
        writeln!(w, "#{line}").map_err(fail)?;
    }
    writeln!(w, "#budget_chars\t{}", cmp.budget_chars).map_err(fail)?;
    for s in &cmp.summaries {
        writeln!(
            w,
            "#summary\t{}\tentropy={}\tmax_epochs={}\thead_uniform_count={}",
            s.policy, s.entropy, s.max_epochs, s.head_uniform_count
        )
        .map_err(fail)?;
    }
    writeln!(w, "policy,lang,rate,epochs,capped").map_err(fail)?;
    for row in &cmp.rows {
        writeln!(
            w,
            "{},{},{},{},{}",
            row.policy, row.lang, row.rate, row.epochs, row.capped as u8
        )
        .map_err(fail)?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::plan::unimax_allocate;

    fn speakers(w: u64, entries: &[(&str, u64)]) -> SpeakerTable {
        SpeakerTable::new(
            w,
            entries.iter().map(|&(l, s)| (l.to_string(), s)).collect(),
        )
        .unwrap()
    }

    #[test]
    fn proportional_representation_is_unit() {
        // Two languages, equal speakers covering the world, uniform sampling.
        let table = speakers(100, &[("aa", 50), ("bb", 50)]);
        let dist = Distribution::from_weights([("aa", 1.0), ("bb", 1.0)]).unwrap();
        let report = representation_report(&dist, &table, DEFAULT_RATIO_CLIP).unwrap();
        for entry in &report.entries {
            assert!((entry.ratio - 1.0).abs() < 1e-12);
            assert_eq!(entry.class, RatioClass::Unit);
        }
    }

    #[test]
    fn five_percent_usage_one_percent_speakers_is_five() {
        let table = speakers(8_000_000_000, &[("aa", 80_000_000), ("bb", 7_920_000_000)]);
        let dist = Distribution::from_weights([("aa", 0.05), ("bb", 0.95)]).unwrap();
        let (r, clipped) = representation_ratio(&dist, &table, "aa", DEFAULT_RATIO_CLIP).unwrap();
        assert!((r - 5.0).abs() < 1e-9);
        assert!(!clipped);
    }

    #[test]
    fn zero_speaker_language_is_clipped() {
        let table = speakers(100, &[("aa", 100), ("eo", 0)]);
        let dist = Distribution::from_weights([("aa", 0.9), ("eo", 0.1)]).unwrap();
        let (r, clipped) = representation_ratio(&dist, &table, "eo", DEFAULT_RATIO_CLIP).unwrap();
        assert_eq!(r, 1000.0);
        assert!(clipped);
    }

    #[test]
    fn unsampled_language_gets_zero_ratio() {
        let table = speakers(100, &[("aa", 60), ("bb", 40)]);
        let dist = Distribution::from_weights([("aa", 1.0)]).unwrap();
        let report = representation_report(&dist, &table, DEFAULT_RATIO_CLIP).unwrap();
        let bb = report.entries.iter().find(|e| e.lang == "bb").unwrap();
        assert_eq!(bb.ratio, 0.0);
        assert_eq!(bb.class, RatioClass::Underrepresented);
    }

    #[test]
    fn doubling_world_population_doubles_ratios() {
        let dist = Distribution::from_weights([("aa", 0.7), ("bb", 0.3)]).unwrap();
        let small = speakers(1000, &[("aa", 200), ("bb", 800)]);
        let large = speakers(2000, &[("aa", 200), ("bb", 800)]);
        for lang in ["aa", "bb"] {
            let (r1, _) = representation_ratio(&dist, &small, lang, 1000.0).unwrap();
            let (r2, _) = representation_ratio(&dist, &large, lang, 1000.0).unwrap();
            assert!((r2 - 2.0 * r1).abs() < 1e-12);
        }
    }

    #[test]
    fn sampled_language_missing_from_table_is_an_error() {
        let table = speakers(100, &[("aa", 100)]);
        let dist = Distribution::from_weights([("aa", 0.5), ("zz", 0.5)]).unwrap();
        assert!(matches!(
            representation_report(&dist, &table, 1000.0),
            Err(Error::Mismatch(_))
        ));
    }

    #[test]
    fn speaker_table_round_trip() {
        let mut table = speakers(8_000_000_000, &[("en", 380_000_000), ("hi", 345_000_000)]);
        table.source = Some("snapshot 2024".into());
        let mut buf = Vec::new();
        table.write(&mut buf).unwrap();
        let parsed = SpeakerTable::read(buf.as_slice(), Path::new("mem")).unwrap();
        assert_eq!(parsed, table);
    }

    #[test]
    fn speaker_table_rejects_speakers_above_world() {
        let err = SpeakerTable::new(10, [("aa".to_string(), 11)].into_iter().collect());
        assert!(matches!(err, Err(Error::Config(_))));
    }

    #[test]
    fn curves_are_consistent_with_rates() {
        let stats = CorpusStats::from_counts([("aa", 1000u64), ("bb", 100u64), ("cc", 10u64)]);
        let budget = 2000u64;
        let plans = vec![
            unimax_allocate(&stats, budget, 2.0).unwrap(),
            plan_from_policy(&stats, &SamplingPolicy::Temperature { tau: 3.33 }, budget).unwrap(),
        ];
        let curves = rate_epoch_curves(&plans).unwrap();
        assert_eq!(curves.len(), 4);
        for pair in curves.chunks(2) {
            let (epochs, rates) = (&pair[0], &pair[1]);
            for ((_, lang, e), (_, _, r)) in epochs.points.iter().zip(&rates.points) {
                let c = stats.char_count(lang) as f64;
                assert!((e * c / budget as f64 - r).abs() < 1e-12);
            }
        }
        // Ranks descend by char count: aa first.
        assert_eq!(curves[0].points[0].1, "aa");
    }

    #[test]
    fn unimax_one_epoch_curve_never_exceeds_one() {
        let stats = CorpusStats::from_counts([("aa", 500u64), ("bb", 50u64), ("cc", 5u64)]);
        let plan = unimax_allocate(&stats, 400, 1.0).unwrap();
        let curves = rate_epoch_curves(std::slice::from_ref(&plan)).unwrap();
        assert!(curves[0].points.iter().all(|(_, _, e)| *e <= 1.0 + 1e-12));
    }

    #[test]
    fn curves_over_different_corpora_rejected() {
        let a = unimax_allocate(&CorpusStats::from_counts([("aa", 100u64)]), 50, 1.0).unwrap();
        let b = unimax_allocate(&CorpusStats::from_counts([("bb", 100u64)]), 50, 1.0).unwrap();
        assert!(matches!(
            rate_epoch_curves(&[a, b]),
            Err(Error::Mismatch(_))
        ));
    }

    fn docs(lang: &str, text: &str, n: usize) -> Vec<DocumentRecord> {
        (0..n)
            .map(|i| DocumentRecord {
                text: text.into(),
                lang: lang.into(),
                langid_confidence: 0.99,
                source_id: format!("{lang}-{i}"),
            })
            .collect()
    }

    #[test]
    fn pure_latin_corpus_is_all_latin() {
        let mut corpus = BTreeMap::new();
        corpus.insert("en".to_string(), docs("en", "hello", 10));
        let dist = Distribution::from_weights([("en", 1.0)]).unwrap();
        let comp = script_composition(&corpus, &dist, 30, 0).unwrap();
        assert_eq!(comp.fractions.len(), 1);
        assert!((comp.fractions["Latin"] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn even_split_latin_cyrillic() {
        let mut corpus = BTreeMap::new();
        corpus.insert("en".to_string(), docs("en", "abcd", 100));
        corpus.insert("ru".to_string(), docs("ru", "жзик", 100));
        let dist = Distribution::from_weights([("en", 0.5), ("ru", 0.5)]).unwrap();
        let comp = script_composition(&corpus, &dist, 200, 1).unwrap();
        let sum: f64 = comp.fractions.values().sum();
        assert!((sum - 1.0).abs() < 1e-12);
        // Within one document (4 chars of 200) of the 50/50 target.
        assert!((comp.fractions["Latin"] - 0.5).abs() <= 4.0 / 200.0 + 1e-12);
        assert!((comp.fractions["Cyrillic"] - 0.5).abs() <= 4.0 / 200.0 + 1e-12);
    }

    #[test]
    fn higher_temperature_reduces_latin_share_on_head_heavy_corpus() {
        // Latin-script head language dwarfs a Devanagari tail language.
        let mut corpus = BTreeMap::new();
        corpus.insert("en".to_string(), docs("en", "abcd", 900));
        corpus.insert("hi".to_string(), docs("hi", "कखगघ", 30));
        let stats = CorpusStats::from_counts([("en", 3600u64), ("hi", 120u64)]);
        let latin_at = |tau: f64| {
            let dist = crate::policy::temperature_distribution(&stats, tau).unwrap();
            script_composition(&corpus, &dist, 1000, 0).unwrap().fractions["Latin"]
        };
        assert!(latin_at(3.33) < latin_at(1.0));
    }

    #[test]
    fn comparison_matches_plans_and_entropy_ordering() {
        let stats = CorpusStats::from_counts([("aa", 10_000u64), ("bb", 1_000u64), ("cc", 10u64)]);
        let policies = vec![
            SamplingPolicy::Temperature { tau: 1.0 },
            SamplingPolicy::Temperature { tau: 3.33 },
            SamplingPolicy::Uniform,
        ];
        let cmp = compare_policies(&stats, &policies, 20_000).unwrap();
        assert_eq!(cmp.rows.len(), 9);
        let e: Vec<f64> = cmp.summaries.iter().map(|s| s.entropy).collect();
        assert!(e[0] <= e[1] + 1e-12 && e[1] <= e[2] + 1e-12);
        // Uniform head spans every language under the uniform policy.
        assert_eq!(cmp.summaries[2].head_uniform_count, 3);
    }

    #[test]
    fn identical_policies_give_identical_rows() {
        let stats = CorpusStats::from_counts([("aa", 100u64), ("bb", 10u64)]);
        let policies = vec![
            SamplingPolicy::UniMax { max_epochs: 1.0 },
            SamplingPolicy::UniMax { max_epochs: 1.0 },
        ];
        let cmp = compare_policies(&stats, &policies, 100).unwrap();
        let (a, b) = cmp.rows.split_at(2);
        assert_eq!(a, b);
    }
}
