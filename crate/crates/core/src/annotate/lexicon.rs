use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use super::StanceLabel;

/// Lowercased word tokens. Hashtag marks are dropped, inner apostrophes kept.
pub fn tokenize(text: &str) -> Vec<String> {
    text.split(|c: char| !(c.is_alphanumeric() || c == '\'' || c == '’'))
        .map(|t| t.trim_matches(|c| c == '\'' || c == '’').to_lowercase().replace('’', "'"))
        .filter(|t| !t.is_empty())
        .collect()
}

const NEGATORS: &[&str] = &[
    "not", "no", "never", "nor", "none", "nobody", "nothing", "neither", "without", "cannot",
    "can't", "don't", "doesn't", "didn't", "isn't", "aren't", "wasn't", "weren't", "won't",
    "wouldn't", "shouldn't", "couldn't", "hardly", "ain't",
];

const NEGATION_WINDOW: usize = 3;

fn negated(tokens: &[String], at: usize) -> bool {
    let start = at.saturating_sub(NEGATION_WINDOW);
    tokens[start..at].iter().any(|t| NEGATORS.contains(&t.as_str()))
}

/// Word valences in [-1, 1].
const VALENCE: &[(&str, f64)] = &[
    ("good", 0.6), ("great", 0.8), ("excellent", 0.9), ("amazing", 0.8), ("awesome", 0.8),
    ("wonderful", 0.8), ("love", 0.8), ("loved", 0.8), ("like", 0.4), ("happy", 0.7),
    ("glad", 0.6), ("proud", 0.7), ("inspiring", 0.7), ("inspired", 0.6), ("hope", 0.5),
    ("hopeful", 0.6), ("brave", 0.6), ("courage", 0.6), ("courageous", 0.7), ("strong", 0.4),
    ("strength", 0.5), ("support", 0.4), ("supporting", 0.4), ("solidarity", 0.5),
    ("applaud", 0.6), ("thank", 0.5), ("thanks", 0.5), ("grateful", 0.7), ("important", 0.3),
    ("justice", 0.4), ("fair", 0.4), ("equal", 0.3), ("safe", 0.4), ("safer", 0.4),
    ("win", 0.6), ("victory", 0.7), ("progress", 0.5), ("celebrate", 0.7), ("beautiful", 0.7),
    ("best", 0.8), ("better", 0.4), ("free", 0.4), ("freedom", 0.5), ("peace", 0.5),
    ("peaceful", 0.5), ("respect", 0.5), ("agree", 0.4), ("right", 0.2), ("positive", 0.5),
    ("powerful", 0.5), ("empower", 0.6), ("empowering", 0.6), ("heal", 0.4), ("healing", 0.4),
    ("bad", -0.6), ("terrible", -0.8), ("awful", -0.8), ("horrible", -0.8), ("hate", -0.8),
    ("hated", -0.8), ("angry", -0.7), ("anger", -0.6), ("sad", -0.6), ("disgusting", -0.9),
    ("disgusted", -0.8), ("disappointing", -0.6), ("disappointed", -0.6), ("troubling", -0.6),
    ("concerning", -0.5), ("worried", -0.5), ("fear", -0.6), ("afraid", -0.6), ("shame", -0.7),
    ("shameful", -0.8), ("outrage", -0.8), ("outrageous", -0.8), ("wrong", -0.5),
    ("unacceptable", -0.7), ("abuse", -0.7), ("abused", -0.7), ("assault", -0.8),
    ("harassment", -0.7), ("violence", -0.7), ("violent", -0.7), ("victim", -0.4),
    ("victims", -0.4), ("misconduct", -0.6), ("injustice", -0.7), ("unfair", -0.6),
    ("corrupt", -0.7), ("lie", -0.6), ("lies", -0.6), ("liar", -0.7), ("fake", -0.5),
    ("hoax", -0.6), ("nonsense", -0.5), ("ridiculous", -0.6), ("stupid", -0.7), ("evil", -0.9),
    ("worst", -0.9), ("worse", -0.5), ("fail", -0.5), ("failed", -0.5), ("failure", -0.6),
    ("attack", -0.6), ("kill", -0.8), ("killed", -0.8), ("death", -0.6), ("tragic", -0.7),
    ("tragedy", -0.7), ("pain", -0.6), ("hurt", -0.6), ("danger", -0.6), ("dangerous", -0.6),
    ("threat", -0.6), ("oppose", -0.3), ("against", -0.2), ("reject", -0.4), ("ban", -0.4),
    ("overblown", -0.4), ("disgrace", -0.8), ("sick", -0.5), ("toxic", -0.7),
];

/// Valence lexicon scored as the mean of negation-adjusted hits.
#[derive(Clone, Debug)]
pub struct SentimentLexicon {
    valence: HashMap<String, f64>,
}

impl Default for SentimentLexicon {
    fn default() -> Self {
        SentimentLexicon {
            valence: VALENCE.iter().map(|&(w, v)| (w.to_string(), v)).collect(),
        }
    }
}

impl SentimentLexicon {
    pub fn from_pairs(pairs: impl IntoIterator<Item = (String, f64)>) -> Self {
        SentimentLexicon {
            valence: pairs.into_iter().collect(),
        }
    }

    /// Signed polarity in [-1, 1]; zero when no lexicon word occurs.
    pub fn polarity(&self, text: &str) -> f64 {
        let tokens = tokenize(text);
        let mut sum = 0.0;
        let mut hits = 0usize;
        for (i, t) in tokens.iter().enumerate() {
            if let Some(&v) = self.valence.get(t) {
                hits += 1;
                sum += if negated(&tokens, i) { -v } else { v };
            }
        }
        if hits == 0 {
            0.0
        } else {
            (sum / hits as f64).clamp(-1.0, 1.0)
        }
    }

    /// Attitude intensity: absolute polarity.
    pub fn intensity(&self, text: &str) -> f64 {
        self.polarity(text).abs()
    }
}

/// Keyword lists signalling support for or opposition to the topic.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TopicLexicon {
    pub support: Vec<String>,
    pub oppose: Vec<String>,
    pub neutral_threshold: f64,
}

impl Default for TopicLexicon {
    fn default() -> Self {
        let s = |xs: &[&str]| xs.iter().map(|x| x.to_string()).collect();
        TopicLexicon {
            support: s(&[
                "support", "supporting", "stand with", "solidarity", "proud", "applaud",
                "inspiring", "believe survivors", "together", "agree", "justice for",
                "keep going", "time's up",
            ]),
            oppose: s(&[
                "oppose", "against", "reject", "disagree", "hoax", "overblown", "witch hunt",
                "nonsense", "went too far", "fake",
            ]),
            neutral_threshold: 0.05,
        }
    }
}

impl TopicLexicon {
    pub fn empty() -> Self {
        TopicLexicon {
            support: Vec::new(),
            oppose: Vec::new(),
            neutral_threshold: 0.05,
        }
    }

    fn count(tokens: &[String], phrases: &[String]) -> f64 {
        let mut total = 0.0;
        for phrase in phrases {
            let p = tokenize(phrase);
            if p.is_empty() || p.len() > tokens.len() {
                continue;
            }
            for start in 0..=tokens.len() - p.len() {
                if tokens[start..start + p.len()] == p[..] {
                    total += if negated(tokens, start) { -1.0 } else { 1.0 };
                }
            }
        }
        total
    }

    /// `(support - oppose) / (|support| + |oppose|)`, zero without hits.
    /// Negated hits count towards the other side.
    pub fn polarity(&self, text: &str) -> f64 {
        let tokens = tokenize(text);
        let s = Self::count(&tokens, &self.support);
        let o = Self::count(&tokens, &self.oppose);
        let denom = s.abs() + o.abs();
        if denom == 0.0 {
            0.0
        } else {
            (s - o) / denom
        }
    }

    pub fn stance(&self, text: &str) -> StanceLabel {
        let p = self.polarity(text);
        if p > self.neutral_threshold {
            StanceLabel::Support
        } else if p < -self.neutral_threshold {
            StanceLabel::Oppose
        } else {
            StanceLabel::Neutral
        }
    }
}
