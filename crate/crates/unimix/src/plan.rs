//! Budgeted allocation plans: capped water-filling allocation, proportional
//! temperature plans, epoch reports, and the plan file format.

use std::io::{BufRead, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::policy::{self, Distribution, SamplingPolicy};
use crate::stats::CorpusStats;
use crate::TOOL_VERSION;

pub const PLAN_SCHEMA: &str = "#unimix-plan v1";

/// Relative tolerance for the equal-share invariant among uncapped languages.
pub const SHARE_TOLERANCE: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlanEntry {
    pub lang: String,
    pub char_count: u64,
    pub allocated_chars: f64,
    pub rate: f64,
    pub epochs: f64,
    pub capped: bool,
}

/// Per-language character budgets for a concrete total budget, with cap
/// flags and epoch counts. Entries are in canonical order (descending
/// character count, ties by language code).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AllocationPlan {
    pub policy: String,
    pub budget_chars: u64,
    pub max_epochs: Option<f64>,
    pub entries: Vec<PlanEntry>,
    pub unspent_chars: f64,
    pub warning: Option<String>,
}

impl AllocationPlan {
    pub fn entry(&self, lang: &str) -> Option<&PlanEntry> {
        self.entries.iter().find(|e| e.lang == lang)
    }

    pub fn distribution(&self) -> Distribution {
        Distribution::from_weights(
            self.entries
                .iter()
                .map(|e| (e.lang.clone(), e.allocated_chars)),
        )
        .expect("plan allocations always normalize")
    }

    pub fn allocated_total(&self) -> f64 {
        self.entries.iter().map(|e| e.allocated_chars).sum()
    }

    pub fn max_epochs_observed(&self) -> f64 {
        self.entries.iter().map(|e| e.epochs).fold(0.0, f64::max)
    }

    /// Language -> corpus character count map, used to check that plans being
    /// compared come from the same corpus.
    pub fn corpus_fingerprint(&self) -> Vec<(String, u64)> {
        let mut langs: Vec<_> = self
            .entries
            .iter()
            .map(|e| (e.lang.clone(), e.char_count))
            .collect();
        langs.sort();
        langs
    }

    pub fn write_tsv(&self, w: &mut impl Write, provenance: &[String]) -> std::io::Result<()> {
        writeln!(w, "{PLAN_SCHEMA}")?;
        writeln!(w, "#policy {}", self.policy)?;
        writeln!(w, "#budget_chars {}", self.budget_chars)?;
        if let Some(n) = self.max_epochs {
            writeln!(w, "#max_epochs {n}")?;
        }
        writeln!(w, "#unspent_chars {}", self.unspent_chars)?;
        if let Some(warning) = &self.warning {
            writeln!(w, "#warning {warning}")?;
        }
        writeln!(w, "#tool unimix {TOOL_VERSION}")?;
        for line in provenance {
            writeln!(w, "#{line}")?;
        }
        writeln!(w, "#columns lang\tchar_count\tallocated_chars\trate\tepochs\tcapped")?;
        for e in &self.entries {
            writeln!(
                w,
                "{}\t{}\t{}\t{}\t{}\t{}",
                e.lang,
                e.char_count,
                e.allocated_chars,
                e.rate,
                e.epochs,
                u8::from(e.capped)
            )?;
        }
        Ok(())
    }

    pub fn read_tsv(r: impl BufRead, path: &Path) -> Result<Self> {
        let parse_err = |line: u64, msg: String| Error::Parse {
            path: path.to_path_buf(),
            line,
            msg,
        };
        let mut lines = r.lines().enumerate();
        let first = match lines.next() {
            Some((_, line)) => line.map_err(|e| Error::io(path, e))?,
            None => return Err(parse_err(1, "empty plan file".into())),
        };
        if first.trim() != PLAN_SCHEMA {
            return Err(parse_err(
                1,
                format!("expected schema header '{PLAN_SCHEMA}', found '{first}'"),
            ));
        }
        let mut policy = None;
        let mut budget_chars = None;
        let mut max_epochs = None;
        let mut unspent_chars = 0.0;
        let mut warning = None;
        let mut entries = Vec::new();
        for (idx, line) in lines {
            let line = line.map_err(|e| Error::io(path, e))?;
            let lineno = idx as u64 + 1;
            if line.is_empty() {
                continue;
            }
            if let Some(header) = line.strip_prefix('#') {
                let (key, value) = header.split_once(' ').unwrap_or((header, ""));
                match key {
                    "policy" => policy = Some(value.to_string()),
                    "budget_chars" => {
                        budget_chars = Some(value.parse::<u64>().map_err(|e| {
                            parse_err(lineno, format!("bad budget_chars: {e}"))
                        })?)
                    }
                    "max_epochs" => {
                        max_epochs = Some(value.parse::<f64>().map_err(|e| {
                            parse_err(lineno, format!("bad max_epochs: {e}"))
                        })?)
                    }
                    "unspent_chars" => {
                        unspent_chars = value.parse::<f64>().map_err(|e| {
                            parse_err(lineno, format!("bad unspent_chars: {e}"))
                        })?
                    }
                    "warning" => warning = Some(value.to_string()),
                    _ => {}
                }
                continue;
            }
            let fields: Vec<&str> = line.split('\t').collect();
            if fields.len() != 6 {
                return Err(parse_err(lineno, format!("expected 6 columns, found {}", fields.len())));
            }
            let num = |s: &str| -> Result<f64> {
                s.parse::<f64>()
                    .map_err(|e| parse_err(lineno, format!("bad number '{s}': {e}")))
            };
            entries.push(PlanEntry {
                lang: fields[0].to_string(),
                char_count: fields[1]
                    .parse()
                    .map_err(|e| parse_err(lineno, format!("bad char_count: {e}")))?,
                allocated_chars: num(fields[2])?,
                rate: num(fields[3])?,
                epochs: num(fields[4])?,
                capped: fields[5] == "1",
            });
        }
        let plan = AllocationPlan {
            policy: policy.ok_or_else(|| parse_err(0, "missing #policy header".into()))?,
            budget_chars: budget_chars
                .ok_or_else(|| parse_err(0, "missing #budget_chars header".into()))?,
            max_epochs,
            entries,
            unspent_chars,
            warning,
        };
        if plan.entries.is_empty() {
            return Err(parse_err(0, "plan has no languages".into()));
        }
        Ok(plan)
    }

    pub fn read_tsv_file(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
        Self::read_tsv(std::io::BufReader::new(file), path)
    }
}

fn canonical_entries(mut entries: Vec<PlanEntry>) -> Vec<PlanEntry> {
    entries.sort_by(|a, b| {
        b.char_count
            .cmp(&a.char_count)
            .then_with(|| a.lang.cmp(&b.lang))
    });
    entries
}

/// Water-filling allocation of a character budget with a per-language cap of
/// `max_epochs` passes.
///
/// Languages are visited in ascending character count (ties by language
/// code). At each step the remaining budget is split evenly over the
/// remaining languages; a language whose even share would exceed
/// `max_epochs` of its corpus is capped at that many epochs instead, and the
/// saved budget is redistributed over the rest. All uncapped languages end
/// up with one common allocation.
///
/// If the budget exceeds `max_epochs` passes over the whole corpus, every
/// language is capped, the surplus is reported as `unspent_chars`, and a
/// warning is attached.
pub fn unimax_allocate(stats: &CorpusStats, budget: u64, max_epochs: f64) -> Result<AllocationPlan> {
    if budget == 0 {
        return Err(Error::Config("character budget must be > 0".into()));
    }
    if !(max_epochs.is_finite() && max_epochs > 0.0) {
        return Err(Error::Config(format!(
            "max epochs {max_epochs} must be a positive finite number"
        )));
    }
    if stats.is_empty() || stats.total_chars() == 0 {
        return Err(Error::EmptyCorpus);
    }

    let ascending = stats.ascending();
    let count = ascending.len();
    let mut remaining = budget as f64;
    let mut entries = Vec::with_capacity(count);
    for (i, lang_stats) in ascending.iter().enumerate() {
        let share = remaining / (count - i) as f64;
        let cap = lang_stats.char_count as f64 * max_epochs;
        let (allocated, capped) = if share > cap {
            (cap, true)
        } else {
            (share, false)
        };
        remaining -= allocated;
        let epochs = if lang_stats.char_count == 0 {
            0.0
        } else {
            allocated / lang_stats.char_count as f64
        };
        entries.push(PlanEntry {
            lang: lang_stats.lang.clone(),
            char_count: lang_stats.char_count,
            allocated_chars: allocated,
            rate: 0.0,
            epochs,
            capped,
        });
    }
    let unspent = remaining.max(0.0);
    let allocated_total: f64 = entries.iter().map(|e| e.allocated_chars).sum();
    for e in &mut entries {
        e.rate = e.allocated_chars / allocated_total;
    }
    let warning = if unspent > SHARE_TOLERANCE * budget as f64 {
        Some(format!(
            "budget {budget} exceeds {max_epochs} epochs of the whole corpus; \
             {unspent} characters left unspent and the distribution falls back to proportions"
        ))
    } else {
        None
    };
    Ok(AllocationPlan {
        policy: SamplingPolicy::UniMax { max_epochs }.label(),
        budget_chars: budget,
        max_epochs: Some(max_epochs),
        entries: canonical_entries(entries),
        unspent_chars: unspent,
        warning,
    })
}

/// Build a plan for any policy. Temperature policies allocate `q_l * C`
/// without cap flags; the capped policy delegates to [`unimax_allocate`].
pub fn plan_from_policy(
    stats: &CorpusStats,
    policy: &SamplingPolicy,
    budget: u64,
) -> Result<AllocationPlan> {
    policy.validate()?;
    let tau = match *policy {
        SamplingPolicy::UniMax { max_epochs } => {
            return unimax_allocate(stats, budget, max_epochs)
        }
        SamplingPolicy::Temperature { tau } => tau,
        SamplingPolicy::Proportional => 1.0,
        SamplingPolicy::Uniform => f64::INFINITY,
    };
    if budget == 0 {
        return Err(Error::Config("character budget must be > 0".into()));
    }
    let dist = policy::temperature_distribution(stats, tau)?;
    let entries = stats
        .iter()
        .map(|s| {
            let rate = dist.get(&s.lang);
            let allocated = rate * budget as f64;
            let epochs = if s.char_count == 0 {
                0.0
            } else {
                allocated / s.char_count as f64
            };
            PlanEntry {
                lang: s.lang.clone(),
                char_count: s.char_count,
                allocated_chars: allocated,
                rate,
                epochs,
                capped: false,
            }
        })
        .collect();
    Ok(AllocationPlan {
        policy: policy.label(),
        budget_chars: budget,
        max_epochs: None,
        entries: canonical_entries(entries),
        unspent_chars: 0.0,
        warning: None,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochEntry {
    /// 1-based rank by descending corpus character count.
    pub rank: u32,
    pub lang: String,
    pub char_count: u64,
    pub sampling_rate: f64,
    pub epochs: f64,
}

/// Per-language epoch counts a distribution implies at a given budget.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochReport {
    pub budget_chars: u64,
    pub entries: Vec<EpochEntry>,
}

impl EpochReport {
    pub fn entry(&self, lang: &str) -> Option<&EpochEntry> {
        self.entries.iter().find(|e| e.lang == lang)
    }

    pub fn max_epochs(&self) -> f64 {
        self.entries.iter().map(|e| e.epochs).fold(0.0, f64::max)
    }
}

/// Epochs implied by a distribution at budget `C`: epochs_l = q_l * C / c_l.
pub fn epochs_for(stats: &CorpusStats, dist: &Distribution, budget: u64) -> Result<EpochReport> {
    if budget == 0 {
        return Err(Error::Config("character budget must be > 0".into()));
    }
    for (lang, p) in dist.iter() {
        if stats.get(lang).is_none() {
            return Err(Error::Mismatch(format!(
                "distribution language '{lang}' is not in the corpus"
            )));
        }
        if p > 0.0 && stats.char_count(lang) == 0 {
            return Err(Error::EmptyLanguage(lang.to_string()));
        }
    }
    let entries = stats
        .canonical()
        .iter()
        .enumerate()
        .map(|(i, s)| {
            let rate = dist.get(&s.lang);
            let epochs = if s.char_count == 0 {
                0.0
            } else {
                rate * budget as f64 / s.char_count as f64
            };
            EpochEntry {
                rank: i as u32 + 1,
                lang: s.lang.clone(),
                char_count: s.char_count,
                sampling_rate: rate,
                epochs,
            }
        })
        .collect();
    Ok(EpochReport {
        budget_chars: budget,
        entries,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn stats(counts: &[(&str, u64)]) -> CorpusStats {
        CorpusStats::from_counts(counts.iter().map(|&(l, c)| (l, c)))
    }

    const B: u64 = 1_000_000_000;

    #[test]
    fn water_filling_hand_trace() {
        let s = stats(&[("a", B), ("b", 10 * B), ("c", 100 * B)]);
        let plan = unimax_allocate(&s, 60 * B, 2.0).unwrap();
        let get = |l: &str| plan.entry(l).unwrap();
        assert_eq!(get("a").allocated_chars, 2.0 * B as f64);
        assert!(get("a").capped);
        assert_eq!(get("b").allocated_chars, 20.0 * B as f64);
        assert!(get("b").capped);
        assert_eq!(get("c").allocated_chars, 38.0 * B as f64);
        assert!(!get("c").capped);
        assert!((get("a").rate - 1.0 / 30.0).abs() < 1e-12);
        assert!((get("b").rate - 1.0 / 3.0).abs() < 1e-12);
        assert!((get("c").rate - 19.0 / 30.0).abs() < 1e-12);
        assert_eq!(plan.unspent_chars, 0.0);
        assert!(plan.warning.is_none());
    }

    #[test]
    fn symmetric_corpus_is_uniform() {
        let plan = unimax_allocate(&stats(&[("a", 10 * B), ("b", 10 * B)]), 10 * B, 1.0).unwrap();
        assert_eq!(plan.entry("a").unwrap().rate, 0.5);
        assert_eq!(plan.entry("b").unwrap().rate, 0.5);
    }

    #[test]
    fn oversized_budget_caps_everything_with_warning() {
        let plan = unimax_allocate(&stats(&[("a", 1), ("b", 2)]), 10, 2.0).unwrap();
        assert_eq!(plan.entry("a").unwrap().allocated_chars, 2.0);
        assert_eq!(plan.entry("b").unwrap().allocated_chars, 4.0);
        assert_eq!(plan.unspent_chars, 4.0);
        assert!(plan.warning.is_some());
        assert!((plan.entry("a").unwrap().rate - 1.0 / 3.0).abs() < 1e-12);
        assert!((plan.entry("b").unwrap().rate - 2.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn caps_respected_and_shares_equal() {
        let s = stats(&[("a", 3), ("b", 50), ("c", 60), ("d", 700)]);
        let plan = unimax_allocate(&s, 500, 5.0).unwrap();
        let n = 5.0;
        for e in &plan.entries {
            assert!(e.allocated_chars <= e.char_count as f64 * n * (1.0 + 1e-9));
            assert!(e.epochs <= n + 1e-9);
        }
        let uncapped: Vec<_> = plan.entries.iter().filter(|e| !e.capped).collect();
        for pair in uncapped.windows(2) {
            let rel = (pair[0].allocated_chars - pair[1].allocated_chars).abs()
                / pair[0].allocated_chars;
            assert!(rel < SHARE_TOLERANCE);
        }
        let total: f64 = plan.allocated_total() + plan.unspent_chars;
        assert!((total - 500.0).abs() < 1e-6);
    }

    #[test]
    fn entry_order_is_canonical_regardless_of_input_order() {
        let a = unimax_allocate(&stats(&[("b", 5), ("a", 9), ("c", 5)]), 12, 1.0).unwrap();
        let b = unimax_allocate(&stats(&[("c", 5), ("b", 5), ("a", 9)]), 12, 1.0).unwrap();
        assert_eq!(a, b);
        let order: Vec<_> = a.entries.iter().map(|e| e.lang.as_str()).collect();
        assert_eq!(order, vec!["a", "b", "c"]);
    }

    #[test]
    fn invalid_inputs_rejected() {
        let s = stats(&[("a", 1)]);
        assert!(unimax_allocate(&s, 0, 1.0).is_err());
        assert!(unimax_allocate(&s, 10, 0.0).is_err());
        assert!(unimax_allocate(&CorpusStats::new(), 10, 1.0).is_err());
    }

    #[test]
    fn proportional_plan_splits_by_counts() {
        let plan =
            plan_from_policy(&stats(&[("a", 3), ("b", 1)]), &SamplingPolicy::Proportional, 100)
                .unwrap();
        assert_eq!(plan.entry("a").unwrap().allocated_chars, 75.0);
        assert_eq!(plan.entry("b").unwrap().allocated_chars, 25.0);
        assert!(!plan.entry("a").unwrap().capped);
    }

    #[test]
    fn uniform_plan_splits_evenly() {
        let s = stats(&[("a", 9), ("b", 5), ("c", 5), ("d", 1)]);
        let plan = plan_from_policy(&s, &SamplingPolicy::Uniform, 100).unwrap();
        for e in &plan.entries {
            assert_eq!(e.allocated_chars, 25.0);
        }
    }

    #[test]
    fn epochs_one_full_pass() {
        let s = stats(&[("a", 60), ("b", 40)]);
        let dist = policy::proportions(&s).unwrap();
        let report = epochs_for(&s, &dist, 100).unwrap();
        assert!((report.entry("a").unwrap().epochs - 1.0).abs() < 1e-12);
        assert!((report.entry("b").unwrap().epochs - 1.0).abs() < 1e-12);
        assert_eq!(report.entry("a").unwrap().rank, 1);
    }

    #[test]
    fn epochs_reject_sampling_empty_language() {
        let s = stats(&[("a", 10), ("b", 0)]);
        let dist = Distribution::from_weights([("a", 0.5), ("b", 0.5)]).unwrap();
        assert!(matches!(
            epochs_for(&s, &dist, 100),
            Err(Error::EmptyLanguage(_))
        ));
    }

    #[test]
    fn unimax_plan_epochs_never_exceed_cap() {
        let s = stats(&[("a", 5), ("b", 100), ("c", 2000)]);
        let plan = unimax_allocate(&s, 900, 3.0).unwrap();
        let report = epochs_for(&s, &plan.distribution(), 900).unwrap();
        assert!(report.max_epochs() <= 3.0 + 1e-9);
    }

    #[test]
    fn plan_tsv_round_trip() {
        let s = stats(&[("a", B), ("b", 10 * B), ("c", 100 * B)]);
        let plan = unimax_allocate(&s, 60 * B, 2.0).unwrap();
        let mut buf = Vec::new();
        plan.write_tsv(&mut buf, &["args test".into()]).unwrap();
        let parsed =
            AllocationPlan::read_tsv(std::io::Cursor::new(&buf), Path::new("mem.tsv")).unwrap();
        assert_eq!(parsed, plan);
    }
}
