//! Sampling distributions over languages: proportional, temperature-based,
//! and uniform, plus the policy and budget descriptions shared by planning.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::stats::CorpusStats;

/// Tolerance on the probability sum of a [`Distribution`].
pub const SUM_TOLERANCE: f64 = 1e-9;

/// Default characters-per-token rate used to convert token budgets.
pub const DEFAULT_CHARS_PER_TOKEN: u64 = 4;

/// A normalized per-language sampling distribution.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Distribution {
    probs: BTreeMap<String, f64>,
}

impl Distribution {
    /// Normalize non-negative weights into a distribution. Zero weights are
    /// retained with probability 0 so the support stays within the corpus
    /// languages.
    pub fn from_weights<I, S>(weights: I) -> Result<Self>
    where
        I: IntoIterator<Item = (S, f64)>,
        S: Into<String>,
    {
        let mut probs = BTreeMap::new();
        let mut total = 0.0;
        for (lang, w) in weights {
            let lang = lang.into();
            if !w.is_finite() || w < 0.0 {
                return Err(Error::Config(format!("weight for '{lang}' is {w}")));
            }
            if probs.insert(lang.clone(), w).is_some() {
                return Err(Error::Config(format!("duplicate language '{lang}'")));
            }
            total += w;
        }
        if probs.is_empty() || total <= 0.0 {
            return Err(Error::EmptyCorpus);
        }
        for p in probs.values_mut() {
            *p /= total;
        }
        Ok(Distribution { probs })
    }

    pub fn get(&self, lang: &str) -> f64 {
        self.probs.get(lang).copied().unwrap_or(0.0)
    }

    pub fn contains(&self, lang: &str) -> bool {
        self.probs.contains_key(lang)
    }

    pub fn len(&self) -> usize {
        self.probs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probs.is_empty()
    }

    /// Iterate (lang, probability) in language-code order.
    pub fn iter(&self) -> impl Iterator<Item = (&str, f64)> {
        self.probs.iter().map(|(l, &p)| (l.as_str(), p))
    }

    /// Shannon entropy in nats. Zero-probability languages contribute 0.
    pub fn entropy(&self) -> f64 {
        -self
            .probs
            .values()
            .filter(|&&p| p > 0.0)
            .map(|&p| p * p.ln())
            .sum::<f64>()
    }

    /// Check non-negativity and that the sum is 1 within [`SUM_TOLERANCE`].
    pub fn check_normalized(&self) -> Result<()> {
        if self.probs.values().any(|&p| p < 0.0 || !p.is_finite()) {
            return Err(Error::Config("distribution has a negative weight".into()));
        }
        let sum: f64 = self.probs.values().sum();
        if (sum - 1.0).abs() > SUM_TOLERANCE {
            return Err(Error::Config(format!("distribution sums to {sum}")));
        }
        Ok(())
    }
}

/// Empirical proportions: p_l = c_l / sum(c). Languages with zero count get
/// probability 0.
pub fn proportions(stats: &CorpusStats) -> Result<Distribution> {
    Distribution::from_weights(stats.iter().map(|s| (s.lang.clone(), s.char_count as f64)))
}

/// Temperature distribution: q_l proportional to c_l^(1/tau), computed in
/// log space. `tau = 1` reproduces [`proportions`] exactly and
/// `tau = infinity` is uniform over the languages with data.
pub fn temperature_distribution(stats: &CorpusStats, tau: f64) -> Result<Distribution> {
    if stats.is_empty() {
        return Err(Error::EmptyCorpus);
    }
    if tau == 1.0 {
        return proportions(stats);
    }
    if tau.is_infinite() && tau > 0.0 {
        return Distribution::from_weights(
            stats
                .iter()
                .map(|s| (s.lang.clone(), if s.char_count > 0 { 1.0 } else { 0.0 })),
        );
    }
    if !(tau.is_finite() && tau > 0.0) {
        return Err(Error::Config(format!(
            "temperature must be positive or infinite, got {tau}"
        )));
    }
    let max_log = stats
        .iter()
        .filter(|s| s.char_count > 0)
        .map(|s| (s.char_count as f64).ln() / tau)
        .fold(f64::NEG_INFINITY, f64::max);
    if max_log == f64::NEG_INFINITY {
        return Err(Error::EmptyCorpus);
    }
    Distribution::from_weights(stats.iter().map(|s| {
        let w = if s.char_count == 0 {
            0.0
        } else {
            ((s.char_count as f64).ln() / tau - max_log).exp()
        };
        (s.lang.clone(), w)
    }))
}

/// A training budget, either directly in characters or as a training
/// schedule converted at a characters-per-token rate.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum BudgetSpec {
    Chars(u64),
    Schedule {
        steps: u64,
        batch_sequences: u64,
        tokens_per_sequence: u64,
        chars_per_token: u64,
    },
}

impl BudgetSpec {
    pub fn schedule(steps: u64, batch_sequences: u64, tokens_per_sequence: u64) -> Self {
        BudgetSpec::Schedule {
            steps,
            batch_sequences,
            tokens_per_sequence,
            chars_per_token: DEFAULT_CHARS_PER_TOKEN,
        }
    }
}

/// Total character budget of a [`BudgetSpec`].
pub fn budget_chars(spec: &BudgetSpec) -> Result<u64> {
    match *spec {
        BudgetSpec::Chars(c) if c > 0 => Ok(c),
        BudgetSpec::Chars(c) => Err(Error::Config(format!("character budget {c} must be > 0"))),
        BudgetSpec::Schedule {
            steps,
            batch_sequences,
            tokens_per_sequence,
            chars_per_token,
        } => {
            if steps == 0 || batch_sequences == 0 || tokens_per_sequence == 0 || chars_per_token == 0
            {
                return Err(Error::Config(
                    "all budget schedule components must be > 0".into(),
                ));
            }
            steps
                .checked_mul(batch_sequences)
                .and_then(|x| x.checked_mul(tokens_per_sequence))
                .and_then(|x| x.checked_mul(chars_per_token))
                .ok_or_else(|| Error::Config("budget schedule overflows u64 characters".into()))
        }
    }
}

/// A declarative sampling policy.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum SamplingPolicy {
    /// Temperature sampling; `tau` may be `f64::INFINITY` for uniform.
    Temperature { tau: f64 },
    /// Budget-capped water-filling allocation with at most `max_epochs`
    /// passes over any language.
    UniMax { max_epochs: f64 },
    /// Alias for `Temperature { tau: 1.0 }`.
    Proportional,
    /// Alias for `Temperature { tau: infinity }`.
    Uniform,
}

impl SamplingPolicy {
    pub fn validate(&self) -> Result<()> {
        match *self {
            SamplingPolicy::Temperature { tau } => {
                if tau.is_nan() || tau <= 0.0 {
                    return Err(Error::Config(format!("temperature {tau} must be > 0")));
                }
            }
            SamplingPolicy::UniMax { max_epochs } => {
                if !(max_epochs.is_finite() && max_epochs > 0.0) {
                    return Err(Error::Config(format!(
                        "max epochs {max_epochs} must be a positive finite number"
                    )));
                }
            }
            SamplingPolicy::Proportional | SamplingPolicy::Uniform => {}
        }
        Ok(())
    }

    pub fn label(&self) -> String {
        match *self {
            SamplingPolicy::Temperature { tau } if tau.is_infinite() => "uniform".to_string(),
            SamplingPolicy::Temperature { tau } => format!("temperature(tau={tau})"),
            SamplingPolicy::UniMax { max_epochs } => format!("unimax(N={max_epochs})"),
            SamplingPolicy::Proportional => "temperature(tau=1)".to_string(),
            SamplingPolicy::Uniform => "uniform".to_string(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn stats(counts: &[(&str, u64)]) -> CorpusStats {
        CorpusStats::from_counts(counts.iter().map(|&(l, c)| (l, c)))
    }

    #[test]
    fn proportions_symmetric_and_ratio() {
        let d = proportions(&stats(&[("a", 10), ("b", 10)])).unwrap();
        assert_eq!(d.get("a"), 0.5);
        let d = proportions(&stats(&[("a", 8), ("b", 1)])).unwrap();
        assert!((d.get("a") - 8.0 / 9.0).abs() < 1e-15);
        assert!((d.get("b") - 1.0 / 9.0).abs() < 1e-15);
    }

    #[test]
    fn proportions_rejects_empty_corpus() {
        assert!(matches!(
            proportions(&CorpusStats::new()),
            Err(Error::EmptyCorpus)
        ));
        assert!(matches!(
            proportions(&stats(&[("a", 0)])),
            Err(Error::EmptyCorpus)
        ));
    }

    #[test]
    fn cube_root_temperature_by_hand() {
        // 8^(1/3) = 2, 1^(1/3) = 1.
        let d = temperature_distribution(&stats(&[("a", 8), ("b", 1)]), 3.0).unwrap();
        assert!((d.get("a") - 2.0 / 3.0).abs() < 1e-12);
        assert!((d.get("b") - 1.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn tau_one_is_exactly_proportions() {
        let s = stats(&[("a", 123), ("b", 45678), ("c", 9)]);
        assert_eq!(
            temperature_distribution(&s, 1.0).unwrap(),
            proportions(&s).unwrap()
        );
    }

    #[test]
    fn infinite_tau_is_uniform_over_support() {
        let s = stats(&[("a", 1000), ("b", 1), ("c", 0)]);
        let d = temperature_distribution(&s, f64::INFINITY).unwrap();
        assert_eq!(d.get("a"), 0.5);
        assert_eq!(d.get("b"), 0.5);
        assert_eq!(d.get("c"), 0.0);
    }

    #[test]
    fn non_positive_tau_rejected() {
        let s = stats(&[("a", 1)]);
        assert!(temperature_distribution(&s, 0.0).is_err());
        assert!(temperature_distribution(&s, -2.0).is_err());
    }

    #[test]
    fn extreme_counts_survive_log_space() {
        // Plain powers would overflow f64 at tau below 1.
        let s = stats(&[("a", u64::MAX), ("b", 1)]);
        let d = temperature_distribution(&s, 0.1).unwrap();
        d.check_normalized().unwrap();
        assert!(d.get("a") > 0.999);
    }

    #[test]
    fn schedule_budget_arithmetic() {
        let spec = BudgetSpec::schedule(250_000, 1024, 568);
        assert_eq!(budget_chars(&spec).unwrap(), 581_632_000_000);
        assert_eq!(budget_chars(&BudgetSpec::Chars(100)).unwrap(), 100);
        assert!(budget_chars(&BudgetSpec::Chars(0)).is_err());
        assert!(budget_chars(&BudgetSpec::schedule(0, 1, 1)).is_err());
    }

    #[test]
    fn entropy_of_uniform() {
        let d = Distribution::from_weights([("a", 1.0), ("b", 1.0)]).unwrap();
        assert!((d.entropy() - std::f64::consts::LN_2).abs() < 1e-12);
    }
}
