use serde::{Deserialize, Serialize};

use crate::annotate::{cosine, Embedder, SparseVector};
use crate::types::AgentId;

use super::driver::{Driver, GenerationRequest, Purpose};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MemoryKind {
    PersonalExperience,
    Event,
    Reflection,
}

#[derive(Clone, Debug, PartialEq)]
pub struct MemoryRecord {
    pub text: String,
    pub vector: SparseVector,
    pub created_round: u32,
    pub importance: f64,
    pub immediacy: f64,
    pub kind: MemoryKind,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RetrievalWeights {
    pub recency: f64,
    pub relevance: f64,
    pub importance: f64,
    pub immediacy: f64,
    /// Per-round recency decay.
    pub decay: f64,
}

impl Default for RetrievalWeights {
    fn default() -> Self {
        RetrievalWeights {
            recency: 0.25,
            relevance: 0.25,
            importance: 0.25,
            immediacy: 0.25,
            decay: 0.9,
        }
    }
}

pub fn retrieval_score(record: &MemoryRecord, query: &SparseVector, current_round: u32, w: &RetrievalWeights) -> f64 {
    let age = current_round.saturating_sub(record.created_round);
    w.recency * w.decay.powi(age as i32)
        + w.relevance * cosine(query, &record.vector)
        + w.importance * record.importance
        + w.immediacy * record.immediacy
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ReflectionConfig {
    pub period: u32,
    pub max_questions: usize,
    pub importance: f64,
    /// Records shown when asking for questions.
    pub recent_window: usize,
    /// Records retrieved per question.
    pub evidence: usize,
}

impl Default for ReflectionConfig {
    fn default() -> Self {
        ReflectionConfig {
            period: 5,
            max_questions: 3,
            importance: 0.8,
            recent_window: 15,
            evidence: 5,
        }
    }
}

/// Append-only per-agent memory stream.
#[derive(Clone, Debug, Default)]
pub struct Memory {
    records: Vec<MemoryRecord>,
}

impl Memory {
    pub fn new() -> Self {
        Memory::default()
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn records(&self) -> &[MemoryRecord] {
        &self.records
    }

    /// Appends a record. Blank text is ignored and reported as `false`.
    pub fn write_observation(
        &mut self,
        embedder: &dyn Embedder,
        text: &str,
        round: u32,
        kind: MemoryKind,
        importance: f64,
        immediacy: f64,
    ) -> bool {
        if text.trim().is_empty() {
            return false;
        }
        self.records.push(MemoryRecord {
            text: text.to_string(),
            vector: embedder.embed(text),
            created_round: round,
            importance: importance.clamp(0.0, 1.0),
            immediacy: immediacy.clamp(0.0, 1.0),
            kind,
        });
        true
    }

    /// Top `k` records by retrieval score; ties go to the newer record, then
    /// to the earlier insertion.
    pub fn retrieve(
        &self,
        embedder: &dyn Embedder,
        query: &str,
        k: usize,
        current_round: u32,
        weights: &RetrievalWeights,
    ) -> Vec<&MemoryRecord> {
        let q = embedder.embed(query);
        self.top_k(|_| true, &q, k, current_round, weights)
    }

    fn top_k(
        &self,
        keep: impl Fn(&MemoryRecord) -> bool,
        query: &SparseVector,
        k: usize,
        current_round: u32,
        weights: &RetrievalWeights,
    ) -> Vec<&MemoryRecord> {
        let mut scored: Vec<(f64, usize)> = self
            .records
            .iter()
            .enumerate()
            .filter(|(_, r)| keep(r))
            .map(|(i, r)| (retrieval_score(r, query, current_round, weights), i))
            .collect();
        scored.sort_by(|a, b| {
            b.0.total_cmp(&a.0)
                .then(self.records[b.1].created_round.cmp(&self.records[a.1].created_round))
                .then(a.1.cmp(&b.1))
        });
        scored.into_iter().take(k).map(|(_, i)| &self.records[i]).collect()
    }

    pub fn retrieve_kind(
        &self,
        embedder: &dyn Embedder,
        kind: MemoryKind,
        query: &str,
        k: usize,
        current_round: u32,
        weights: &RetrievalWeights,
    ) -> Vec<&MemoryRecord> {
        let q = embedder.embed(query);
        self.top_k(|r| r.kind == kind, &q, k, current_round, weights)
    }

    /// Inputs for a reflection without touching the memory: the questions
    /// prompt over recent records.
    fn questions_prompt(&self, cfg: &ReflectionConfig) -> String {
        let start = self.records.len().saturating_sub(cfg.recent_window);
        let mut p = String::new();
        for r in &self.records[start..] {
            p.push_str(&r.text);
            p.push('\n');
        }
        p.push_str(&format!(
            "\nGiven only the information above, what are the {} most salient high-level questions we can answer about the subjects in the statements? Write one question per line.",
            cfg.max_questions
        ));
        p
    }

    fn insight_prompt(question: &str, evidence: &[&MemoryRecord]) -> String {
        let mut p = String::from("Statements:\n");
        for (i, r) in evidence.iter().enumerate() {
            p.push_str(&format!("{}. {}\n", i + 1, r.text));
        }
        p.push_str(&format!(
            "\nWhat single high-level insight can you infer from the statements above that answers: {question}\nInsight:"
        ));
        p
    }

    /// Periodic reflection. Returns the appended insights; empty when off
    /// cycle, when the driver cannot reflect, or when it fails.
    #[allow(clippy::too_many_arguments)]
    pub fn reflect(
        &mut self,
        agent: AgentId,
        driver: &dyn Driver,
        embedder: &dyn Embedder,
        current_round: u32,
        cfg: &ReflectionConfig,
        weights: &RetrievalWeights,
    ) -> Vec<String> {
        if cfg.period == 0 || current_round == 0 || !current_round.is_multiple_of(cfg.period) || self.records.is_empty() {
            return Vec::new();
        }
        if !driver.can_reflect(agent, current_round) {
            return Vec::new();
        }
        let asked = driver.generate(&GenerationRequest::new(
            agent,
            current_round,
            Purpose::ReflectionQuestions,
            &self.questions_prompt(cfg),
        ));
        let questions: Vec<String> = match asked {
            Ok(text) => text
                .lines()
                .map(|l| l.trim().trim_start_matches(|c: char| c.is_ascii_digit() || c == '.' || c == ')' || c == '-').trim())
                .filter(|l| !l.is_empty())
                .take(cfg.max_questions)
                .map(str::to_string)
                .collect(),
            Err(e) => {
                log::warn!("reflection questions for {agent} in round {current_round} failed: {e}");
                return Vec::new();
            }
        };
        let mut insights = Vec::new();
        for q in &questions {
            let prompt = {
                let evidence = self.retrieve(embedder, q, cfg.evidence, current_round, weights);
                Self::insight_prompt(q, &evidence)
            };
            match driver.generate(&GenerationRequest::new(agent, current_round, Purpose::Insight, &prompt)) {
                Ok(text) if !text.trim().is_empty() => insights.push(text.trim().to_string()),
                Ok(_) => {}
                Err(e) => {
                    log::warn!("reflection insight for {agent} in round {current_round} failed: {e}");
                    break;
                }
            }
        }
        for text in &insights {
            self.write_observation(embedder, text, current_round, MemoryKind::Reflection, cfg.importance, 1.0);
        }
        insights
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::agent::driver::{HeuristicDriver, ReplayDriver, ReplayRecord};
    use crate::annotate::HashedTfIdf;
    use proptest::prelude::*;

    fn mem_with(texts: &[(&str, u32)]) -> (Memory, HashedTfIdf) {
        let e = HashedTfIdf::default();
        let mut m = Memory::new();
        for (t, r) in texts {
            m.write_observation(&e, t, *r, MemoryKind::Event, 0.5, 0.5);
        }
        (m, e)
    }

    #[test]
    fn write_is_append_only() {
        let (mut m, e) = mem_with(&[]);
        assert!(m.write_observation(&e, "same", 1, MemoryKind::PersonalExperience, 0.5, 0.5));
        assert_eq!(m.len(), 1);
        m.write_observation(&e, "same", 1, MemoryKind::PersonalExperience, 0.5, 0.5);
        assert_eq!(m.len(), 2);
        assert_eq!(m.records()[0].kind, MemoryKind::PersonalExperience);
        assert!(!m.write_observation(&e, "  ", 1, MemoryKind::Event, 0.5, 0.5));
    }

    #[test]
    fn newer_ranks_first_and_k_caps() {
        let (m, e) = mem_with(&[("rally downtown", 1), ("rally downtown", 3)]);
        let w = RetrievalWeights::default();
        let got = m.retrieve(&e, "unrelated words", 5, 4, &w);
        assert_eq!(got.len(), 2);
        assert_eq!(got[0].created_round, 3);
        assert!(m.retrieve(&e, "x", 1, 4, &w).len() == 1);
        assert!(Memory::new().retrieve(&e, "x", 3, 1, &w).is_empty());
    }

    #[test]
    fn exact_query_is_most_relevant() {
        let (m, e) = mem_with(&[("golden globes dressed in black", 2), ("weather report sunny", 2)]);
        let q = e.embed("golden globes dressed in black");
        assert!((cosine(&q, &m.records()[0].vector) - 1.0).abs() < 1e-6);
        let got = m.retrieve(&e, "golden globes dressed in black", 1, 2, &RetrievalWeights::default());
        assert_eq!(got[0].text, "golden globes dressed in black");
    }

    proptest! {
        #[test]
        fn score_is_monotone(imp in 0.0..1.0f64, imm in 0.0..1.0f64, bump in 0.0..0.5f64, age in 0u32..20) {
            let e = HashedTfIdf::default();
            let w = RetrievalWeights::default();
            let q = e.embed("q");
            let base = MemoryRecord { text: "t".into(), vector: e.embed("t"), created_round: 0, importance: imp, immediacy: imm, kind: MemoryKind::Event };
            let s = retrieval_score(&base, &q, age, &w);
            let mut more = base.clone();
            more.importance = (imp + bump).min(1.0);
            prop_assert!(retrieval_score(&more, &q, age, &w) >= s);
            let mut more = base.clone();
            more.immediacy = (imm + bump).min(1.0);
            prop_assert!(retrieval_score(&more, &q, age, &w) >= s);
            prop_assert!(retrieval_score(&base, &q, age + 1, &w) <= s);
        }
    }

    #[test]
    fn reflection_gates() {
        let (mut m, e) = mem_with(&[("a", 1)]);
        let cfg = ReflectionConfig::default();
        let w = RetrievalWeights::default();
        let h = HeuristicDriver::default();
        assert!(m.reflect(AgentId(1), &h, &e, 3, &cfg, &w).is_empty());
        assert!(m.reflect(AgentId(1), &h, &e, 5, &cfg, &w).is_empty());
        assert_eq!(m.len(), 1);
    }

    #[test]
    fn replayed_insight_is_appended_verbatim() {
        let (mut m, e) = mem_with(&[("people rallied for survivors", 4)]);
        let replay = ReplayDriver::from_records(vec![
            ReplayRecord::new(AgentId(1), 5, Purpose::ReflectionQuestions, "1. What do people care about?"),
            ReplayRecord::new(AgentId(1), 5, Purpose::Insight, "People care about survivors."),
        ]);
        let got = m.reflect(AgentId(1), &replay, &e, 5, &ReflectionConfig::default(), &RetrievalWeights::default());
        assert_eq!(got, ["People care about survivors."]);
        let last = m.records().last().unwrap();
        assert_eq!((last.kind, last.text.as_str(), last.importance), (MemoryKind::Reflection, "People care about survivors.", 0.8));
    }
}
