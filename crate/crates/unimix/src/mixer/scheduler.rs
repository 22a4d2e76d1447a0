//! Deterministic deficit scheduler over per-language character budgets.
//!
//! At every step the scheduler emits from the non-exhausted language with
//! the largest character deficit `d_l = p_l * total_emitted - emitted_l`
//! (ties broken by language code ascending). This keeps every output prefix
//! within one document length of the target proportions and needs no
//! randomness, so runs are exactly reproducible and resumable.

use serde::{Deserialize, Serialize};

use crate::mixer::source::SourceCursor;
use crate::plan::AllocationPlan;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LangProgress {
    pub lang: String,
    /// Target share of emitted characters.
    pub target_rate: f64,
    /// Character budget for this language (the plan's allocation).
    pub budget_chars: f64,
    /// Characters available in the language's shards, used as the epoch
    /// denominator.
    pub corpus_chars: u64,
    pub emitted_chars: u64,
    pub emitted_docs: u64,
    /// True once the stream wrapped into a repeat pass.
    pub wrapped: bool,
    pub exhausted: bool,
    pub cursor: SourceCursor,
}

impl LangProgress {
    pub fn epochs(&self) -> f64 {
        if self.corpus_chars == 0 {
            0.0
        } else {
            self.emitted_chars as f64 / self.corpus_chars as f64
        }
    }

    fn deficit(&self, total_emitted: u64) -> f64 {
        self.target_rate * total_emitted as f64 - self.emitted_chars as f64
    }
}

/// Scheduler state: per-language progress (kept in language-code order) and
/// global emission counters. Serializable for resume snapshots.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MixerState {
    pub langs: Vec<LangProgress>,
    pub total_emitted_chars: u64,
    pub total_emitted_docs: u64,
}

impl MixerState {
    /// Build initial state from a plan and the per-language corpus sizes
    /// observed in the shards. Languages with no allocation start exhausted.
    pub fn from_plan(plan: &AllocationPlan, corpus_chars: impl Fn(&str) -> u64) -> Self {
        let mut langs: Vec<LangProgress> = plan
            .entries
            .iter()
            .map(|e| LangProgress {
                lang: e.lang.clone(),
                target_rate: e.rate,
                budget_chars: e.allocated_chars,
                corpus_chars: corpus_chars(&e.lang),
                emitted_chars: 0,
                emitted_docs: 0,
                wrapped: false,
                exhausted: e.allocated_chars <= 0.0,
                cursor: SourceCursor::default(),
            })
            .collect();
        langs.sort_by(|a, b| a.lang.cmp(&b.lang));
        MixerState {
            langs,
            total_emitted_chars: 0,
            total_emitted_docs: 0,
        }
    }

    pub fn lang_index(&self, lang: &str) -> Option<usize> {
        self.langs
            .binary_search_by(|l| l.lang.as_str().cmp(lang))
            .ok()
    }

    /// Index of the language to emit from next, or `None` at end of mix.
    /// Pure function of the state: argmax of the deficit over non-exhausted
    /// languages, ties resolved by language code ascending.
    pub fn next_language(&self) -> Option<usize> {
        let mut best: Option<(usize, f64)> = None;
        for (i, lang) in self.langs.iter().enumerate() {
            if lang.exhausted {
                continue;
            }
            let deficit = lang.deficit(self.total_emitted_chars);
            match best {
                Some((_, best_deficit)) if deficit <= best_deficit => {}
                _ => best = Some((i, deficit)),
            }
        }
        best.map(|(i, _)| i)
    }

    /// Account for one emitted document of `chars` characters.
    pub fn record_emission(&mut self, idx: usize, chars: u64, wrapped: bool, cursor: SourceCursor) {
        let lang = &mut self.langs[idx];
        lang.emitted_chars += chars;
        lang.emitted_docs += 1;
        lang.wrapped |= wrapped;
        lang.cursor = cursor;
        if lang.emitted_chars as f64 >= lang.budget_chars {
            lang.exhausted = true;
        }
        self.total_emitted_chars += chars;
        self.total_emitted_docs += 1;
    }

    pub fn all_exhausted(&self) -> bool {
        self.langs.iter().all(|l| l.exhausted)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn state(targets: &[(&str, f64, f64)]) -> MixerState {
        let mut langs: Vec<LangProgress> = targets
            .iter()
            .map(|&(lang, rate, budget)| LangProgress {
                lang: lang.into(),
                target_rate: rate,
                budget_chars: budget,
                corpus_chars: 1000,
                emitted_chars: 0,
                emitted_docs: 0,
                wrapped: false,
                exhausted: budget <= 0.0,
                cursor: SourceCursor::default(),
            })
            .collect();
        langs.sort_by(|a, b| a.lang.cmp(&b.lang));
        MixerState {
            langs,
            total_emitted_chars: 0,
            total_emitted_docs: 0,
        }
    }

    fn run_unit_docs(state: &mut MixerState, picks: usize) -> Vec<String> {
        (0..picks)
            .map(|_| {
                let i = state.next_language().expect("not exhausted");
                let lang = state.langs[i].lang.clone();
                state.record_emission(i, 1, false, SourceCursor::default());
                lang
            })
            .collect()
    }

    #[test]
    fn three_to_one_split_over_eight_picks() {
        let mut s = state(&[("A", 0.75, 1e9), ("B", 0.25, 1e9)]);
        let picks = run_unit_docs(&mut s, 8);
        let a = picks.iter().filter(|l| *l == "A").count();
        assert_eq!((a, 8 - a), (6, 2));
        // First pick is the lexicographically smaller code on the tie.
        assert_eq!(picks[0], "A");
    }

    #[test]
    fn equal_weights_alternate_strictly_after_first_pick() {
        let mut s = state(&[("A", 0.5, 1e9), ("B", 0.5, 1e9)]);
        let picks = run_unit_docs(&mut s, 6);
        assert_eq!(picks, vec!["A", "B", "A", "B", "A", "B"]);
    }

    #[test]
    fn single_language_until_exhausted() {
        let mut s = state(&[("A", 1.0, 3.0)]);
        let picks = run_unit_docs(&mut s, 3);
        assert_eq!(picks, vec!["A", "A", "A"]);
        assert!(s.next_language().is_none());
        assert!(s.all_exhausted());
    }

    #[test]
    fn exhausted_language_never_selected_again() {
        let mut s = state(&[("A", 0.5, 2.0), ("B", 0.5, 1e9)]);
        let picks = run_unit_docs(&mut s, 10);
        assert_eq!(picks.iter().filter(|l| *l == "A").count(), 2);
        assert!(picks[4..].iter().all(|l| l == "B"));
    }

    #[test]
    fn prefix_frequency_stays_within_one_doc() {
        let mut s = state(&[("A", 0.5, 1e9), ("B", 0.3, 1e9), ("C", 0.2, 1e9)]);
        let mut counts = [0u64; 3];
        for t in 1..=10_000u64 {
            let i = s.next_language().unwrap();
            counts[i] += 1;
            s.record_emission(i, 1, false, SourceCursor::default());
            for (j, &rate) in [0.5, 0.3, 0.2].iter().enumerate() {
                assert!(
                    (counts[j] as f64 - rate * t as f64).abs() <= 1.0 + 1e-9,
                    "prefix {t}: lang {j} off target"
                );
            }
        }
        assert_eq!(counts, [5000, 3000, 2000]);
    }

    #[test]
    fn conservation_of_emitted_chars() {
        let mut s = state(&[("A", 0.6, 1e9), ("B", 0.4, 1e9)]);
        for step in 0..500u64 {
            let i = s.next_language().unwrap();
            s.record_emission(i, step % 7 + 1, false, SourceCursor::default());
        }
        let sum: u64 = s.langs.iter().map(|l| l.emitted_chars).sum();
        assert_eq!(sum, s.total_emitted_chars);
    }

    #[test]
    fn zero_budget_language_starts_exhausted() {
        let s = state(&[("A", 0.0, 0.0), ("B", 1.0, 10.0)]);
        assert_eq!(s.next_language(), Some(s.lang_index("B").unwrap()));
    }
}
