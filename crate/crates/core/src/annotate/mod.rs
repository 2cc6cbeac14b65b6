//! Text analysis services: stance, sentiment intensity, content type,
//! embeddings and an optional toxicity client.

mod embed;
mod lexicon;

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;
use std::time::Duration;

use regex::Regex;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::bridge::content_to_attitude;
use crate::chat::{ChatClient, ChatConfig, ChatError};
use crate::types::AttitudeScore;

pub use embed::{cosine, Embedder, HashedTfIdf, SparseVector};
pub use lexicon::{tokenize, SentimentLexicon, TopicLexicon};

#[derive(Debug, Error)]
pub enum AnnotError {
    #[error("unknown label `{0}`")]
    UnknownLabel(String),
    #[error("empty text")]
    EmptyText,
    #[error("score {0} outside [0, 1]")]
    OutOfRange(f64),
    #[error("remote annotator: {0}")]
    Remote(#[from] ChatError),
    #[error("{0}")]
    Other(String),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum StanceLabel {
    Support,
    Neutral,
    Oppose,
}

impl StanceLabel {
    pub const ALL: [StanceLabel; 3] = [StanceLabel::Support, StanceLabel::Neutral, StanceLabel::Oppose];

    /// Finds the label mentioned first in a free-form answer.
    pub fn from_answer(answer: &str) -> Option<StanceLabel> {
        let lower = answer.to_lowercase();
        Self::ALL
            .iter()
            .filter_map(|l| lower.find(&l.to_string().to_lowercase()).map(|pos| (pos, *l)))
            .min_by_key(|(pos, _)| *pos)
            .map(|(_, l)| l)
    }
}

impl fmt::Display for StanceLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            StanceLabel::Support => "Support",
            StanceLabel::Neutral => "Neutral",
            StanceLabel::Oppose => "Oppose",
        })
    }
}

impl FromStr for StanceLabel {
    type Err = AnnotError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_lowercase().as_str() {
            "support" => Ok(StanceLabel::Support),
            "neutral" => Ok(StanceLabel::Neutral),
            "oppose" => Ok(StanceLabel::Oppose),
            _ => Err(AnnotError::UnknownLabel(s.to_string())),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ContentType {
    CallForAction,
    Testimony,
    SharingOfOpinion,
    ReferenceToThirdParty,
    Other,
}

impl ContentType {
    pub const ALL: [ContentType; 5] = [
        ContentType::CallForAction,
        ContentType::Testimony,
        ContentType::SharingOfOpinion,
        ContentType::ReferenceToThirdParty,
        ContentType::Other,
    ];

    fn from_index(i: u32) -> Option<ContentType> {
        Self::ALL.get(i.checked_sub(1)? as usize).copied()
    }

    /// Maps a free-form answer: the earliest category phrase wins, then a
    /// bare leading option number.
    pub fn from_answer(answer: &str) -> Option<ContentType> {
        static PATTERNS: std::sync::OnceLock<Vec<(Regex, ContentType)>> = std::sync::OnceLock::new();
        let patterns = PATTERNS.get_or_init(|| {
            [
                (r"call[\s_-]+for[\s_-]+action", ContentType::CallForAction),
                (r"testimony", ContentType::Testimony),
                (r"sharing[\s_-]+of[\s_-]+opinion", ContentType::SharingOfOpinion),
                (r"(reference[\s_-]+to[\s_-]+a[\s_-]+)?third[\s_-]+party", ContentType::ReferenceToThirdParty),
                (r"\bother\b", ContentType::Other),
            ]
            .into_iter()
            .map(|(p, c)| (Regex::new(&format!("(?i){p}")).unwrap(), c))
            .collect()
        });
        let found = patterns
            .iter()
            .filter_map(|(re, c)| re.find(answer).map(|m| (m.start(), *c)))
            .min_by_key(|(pos, _)| *pos)
            .map(|(_, c)| c);
        found.or_else(|| {
            let digit = answer.trim_start().chars().next()?.to_digit(10)?;
            Self::from_index(digit)
        })
    }
}

impl fmt::Display for ContentType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ContentType::CallForAction => "call_for_action",
            ContentType::Testimony => "testimony",
            ContentType::SharingOfOpinion => "sharing_of_opinion",
            ContentType::ReferenceToThirdParty => "reference_to_third_party",
            ContentType::Other => "other",
        })
    }
}

impl FromStr for ContentType {
    type Err = AnnotError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let norm = s.trim().to_lowercase().replace([' ', '-'], "_");
        ContentType::ALL
            .into_iter()
            .find(|c| c.to_string() == norm)
            .ok_or_else(|| AnnotError::UnknownLabel(s.to_string()))
    }
}

pub fn stance_prompt(target: &str, text: &str) -> String {
    format!(
        "What's the author's stance on {target}? Please choose from Support, Neutral, and Oppose. Only output your choice.\n\nText: {text} \nStance: "
    )
}

pub fn content_prompt(text: &str) -> String {
    format!(
        "Please classify the text into one of the following categories based on its content. Only output your choice.\n\n\
1. call for action: tweet contained a call for action (e.g. requesting, challenging, promoting, inviting, summoning someone to do something).\n\
2. testimony: tweet contained a testimony of the victim (e.g. report, declaration, first-person experience).\n\
3. sharing of opinion: e.g. evaluation, appreciation, addition, analysis of opinions.\n\
4. reference to a third party: reporting on something/-one, direct and indirect quotes.\n\
5. other: other content that does not fall into the above categories.\n\n\
Text: {text} \nAnswer: "
    )
}

/// Where stance labels come from.
#[derive(Clone, Debug)]
pub enum StanceBackend {
    Lexicon(TopicLexicon),
    /// Remote LLM; failures fall back to the lexicon.
    Remote { client: ChatClient, fallback: TopicLexicon },
}

pub fn annotate_stance(text: &str, target: &str, backend: &StanceBackend) -> StanceLabel {
    match backend {
        StanceBackend::Lexicon(lex) => lex.stance(text),
        StanceBackend::Remote { client, fallback } => {
            match client.complete(None, &stance_prompt(target, text)) {
                Ok(answer) => StanceLabel::from_answer(&answer).unwrap_or_else(|| {
                    log::warn!("unmappable stance answer {answer:?}; using Neutral");
                    StanceLabel::Neutral
                }),
                Err(e) => {
                    log::warn!("remote stance annotation failed ({e}); using lexicon");
                    fallback.stance(text)
                }
            }
        }
    }
}

/// Content type via the remote classifier. Without one, every text is
/// `Other`.
pub fn classify_content_type(text: &str, backend: Option<&ChatClient>) -> ContentType {
    let Some(client) = backend else {
        log::debug!("no content classifier configured; labelling as other");
        return ContentType::Other;
    };
    match client.complete(None, &content_prompt(text)) {
        Ok(answer) => ContentType::from_answer(&answer).unwrap_or_else(|| {
            log::warn!("unmappable content answer {answer:?}; using other");
            ContentType::Other
        }),
        Err(e) => {
            log::warn!("content classification failed: {e}");
            ContentType::Other
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ToxicityConfig {
    pub endpoint: String,
    /// JSON pointer to the summary score in the response body.
    pub score_pointer: String,
    pub timeout_secs: u64,
    pub api_key_env: Option<String>,
}

impl Default for ToxicityConfig {
    fn default() -> Self {
        ToxicityConfig {
            endpoint: String::new(),
            score_pointer: "/summary_score".into(),
            timeout_secs: 30,
            api_key_env: None,
        }
    }
}

/// Posts `{"text": ...}` and reads a summary score in [0, 1].
#[derive(Clone, Debug)]
pub struct ToxicityClient {
    config: ToxicityConfig,
    agent: ureq::Agent,
}

impl ToxicityClient {
    pub fn new(config: ToxicityConfig) -> Self {
        let cfg = ureq::Agent::config_builder()
            .timeout_global(Some(Duration::from_secs(config.timeout_secs.max(1))))
            .http_status_as_error(false)
            .build();
        ToxicityClient {
            config,
            agent: ureq::Agent::new_with_config(cfg),
        }
    }

    /// `Ok(None)` when the service is unreachable or answers with an error
    /// status; `Err` when it answers with an unusable score.
    pub fn score(&self, text: &str) -> Result<Option<f64>, AnnotError> {
        let mut req = self.agent.post(&self.config.endpoint);
        if let Some(var) = &self.config.api_key_env {
            if let Ok(token) = std::env::var(var) {
                req = req.header("Authorization", format!("Bearer {token}"));
            }
        }
        let mut resp = match req.send_json(serde_json::json!({ "text": text })) {
            Ok(r) => r,
            Err(e) => {
                log::warn!("toxicity service unavailable: {e}");
                return Ok(None);
            }
        };
        if !resp.status().is_success() {
            log::warn!("toxicity service returned {}", resp.status());
            return Ok(None);
        }
        let body: serde_json::Value = match resp.body_mut().read_json() {
            Ok(v) => v,
            Err(e) => return Err(AnnotError::Other(format!("toxicity body: {e}"))),
        };
        let v = body
            .pointer(&self.config.score_pointer)
            .and_then(serde_json::Value::as_f64)
            .ok_or_else(|| AnnotError::Other(format!("missing {}", self.config.score_pointer)))?;
        if !(0.0..=1.0).contains(&v) {
            return Err(AnnotError::OutOfRange(v));
        }
        Ok(Some(v))
    }
}

pub fn toxicity_score(text: &str, client: Option<&ToxicityClient>) -> Result<Option<f64>, AnnotError> {
    match client {
        Some(c) => c.score(text),
        None => Ok(None),
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Annotation {
    pub stance: StanceLabel,
    pub intensity: f64,
    pub attitude: AttitudeScore,
}

/// Turns text into an attitude score.
pub trait AttitudeAnnotator: Send + Sync {
    fn annotate(&self, text: &str) -> Result<Annotation, AnnotError>;
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StanceSource {
    #[default]
    Lexicon,
    Remote,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AnnotatorConfig {
    pub stance: StanceSource,
    /// Topic named in the stance prompt.
    pub target: String,
    pub lexicon: TopicLexicon,
    pub embedding_dim: usize,
    /// Remote endpoint for stance (when `stance = "remote"`) and content type.
    pub remote: Option<ChatConfig>,
    pub toxicity: Option<ToxicityConfig>,
}

impl Default for AnnotatorConfig {
    fn default() -> Self {
        AnnotatorConfig {
            stance: StanceSource::Lexicon,
            target: "the movement".into(),
            lexicon: TopicLexicon::default(),
            embedding_dim: HashedTfIdf::DEFAULT_DIM,
            remote: None,
            toxicity: None,
        }
    }
}

/// The full annotation stack used by the runner.
pub struct Annotators {
    pub target: String,
    pub stance: StanceBackend,
    pub sentiment: SentimentLexicon,
    pub content: Option<ChatClient>,
    pub embedder: Arc<HashedTfIdf>,
    pub toxicity: Option<ToxicityClient>,
}

impl Annotators {
    pub fn from_config(cfg: &AnnotatorConfig) -> Self {
        let remote = cfg.remote.clone().map(ChatClient::new);
        let stance = match (cfg.stance, &remote) {
            (StanceSource::Remote, Some(client)) => StanceBackend::Remote {
                client: client.clone(),
                fallback: cfg.lexicon.clone(),
            },
            (StanceSource::Remote, None) => {
                log::warn!("remote stance requested without an endpoint; using lexicon");
                StanceBackend::Lexicon(cfg.lexicon.clone())
            }
            (StanceSource::Lexicon, _) => StanceBackend::Lexicon(cfg.lexicon.clone()),
        };
        Annotators {
            target: cfg.target.clone(),
            stance,
            sentiment: SentimentLexicon::default(),
            content: remote,
            embedder: Arc::new(HashedTfIdf::new(cfg.embedding_dim)),
            toxicity: cfg.toxicity.clone().map(ToxicityClient::new),
        }
    }

    pub fn offline() -> Self {
        Annotators::from_config(&AnnotatorConfig::default())
    }

    pub fn content_type(&self, text: &str) -> ContentType {
        classify_content_type(text, self.content.as_ref())
    }

    pub fn toxicity(&self, text: &str) -> Result<Option<f64>, AnnotError> {
        toxicity_score(text, self.toxicity.as_ref())
    }
}

impl AttitudeAnnotator for Annotators {
    fn annotate(&self, text: &str) -> Result<Annotation, AnnotError> {
        if text.trim().is_empty() {
            return Err(AnnotError::EmptyText);
        }
        let stance = annotate_stance(text, &self.target, &self.stance);
        let intensity = self.sentiment.intensity(text);
        let attitude = content_to_attitude(stance, intensity)
            .map_err(|e| AnnotError::Other(e.to_string()))?;
        Ok(Annotation {
            stance,
            intensity,
            attitude,
        })
    }
}
