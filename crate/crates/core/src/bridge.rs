//! Core-to-ordinary coupling: core-user content becomes attitude scores, and
//! those scores become ABM messages.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::abm::Message;
use crate::annotate::{AttitudeAnnotator, StanceLabel};
use crate::types::{AgentId, AttitudeScore};

#[derive(Debug, Error, PartialEq)]
pub enum BridgeError {
    #[error("intensity {0} outside [0, 1]")]
    Intensity(f64),
}

/// Sign from the stance, magnitude from the sentiment intensity.
pub fn content_to_attitude(stance: StanceLabel, intensity: f64) -> Result<AttitudeScore, BridgeError> {
    if !(0.0..=1.0).contains(&intensity) {
        return Err(BridgeError::Intensity(intensity));
    }
    let v = match stance {
        StanceLabel::Support => intensity,
        StanceLabel::Oppose => -intensity,
        StanceLabel::Neutral => 0.0,
    };
    Ok(AttitudeScore::clamped(v))
}

/// Parses the label then composes; unknown labels are rejected.
pub fn label_to_attitude(label: &str, intensity: f64) -> Result<AttitudeScore, String> {
    let stance: StanceLabel = label.parse().map_err(|e: crate::annotate::AnnotError| e.to_string())?;
    content_to_attitude(stance, intensity).map_err(|e| e.to_string())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AttitudeSource {
    GeneratedContent,
    CarriedOver,
    RetweetTarget,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CoreAttitudeRecord {
    pub agent: AgentId,
    pub round: u32,
    pub attitude: AttitudeScore,
    pub source: AttitudeSource,
}

/// What a core agent's action contributes to the attitude update.
#[derive(Clone, Debug, PartialEq)]
pub enum RoundContent {
    /// Text the agent wrote (post, reply, quoted retweet).
    Generated(String),
    /// Bare retweet; carries the retweeted tweet's text.
    RetweetOf(String),
    /// Like, do-nothing, rejected or failed action.
    Nothing,
}

/// Seeds round-0 records from initial attitudes.
pub fn initial_records(initial: impl IntoIterator<Item = (AgentId, AttitudeScore)>) -> BTreeMap<AgentId, CoreAttitudeRecord> {
    initial
        .into_iter()
        .map(|(agent, attitude)| {
            (
                agent,
                CoreAttitudeRecord {
                    agent,
                    round: 0,
                    attitude,
                    source: AttitudeSource::CarriedOver,
                },
            )
        })
        .collect()
}

/// Updates every core agent's attitude for `round` and emits one message per
/// core agent for the ordinary pool. Agents without an entry in `contents`
/// carry over; agents without a previous record and without content start
/// neutral.
pub fn sync_core_into_pool(
    round: u32,
    contents: &BTreeMap<AgentId, RoundContent>,
    annotator: &dyn AttitudeAnnotator,
    previous: &BTreeMap<AgentId, CoreAttitudeRecord>,
) -> (BTreeMap<AgentId, CoreAttitudeRecord>, Vec<Message>) {
    let mut agents: Vec<AgentId> = previous.keys().chain(contents.keys()).copied().collect();
    agents.sort_unstable();
    agents.dedup();

    let mut records = BTreeMap::new();
    for agent in agents {
        let carried = previous.get(&agent).map_or(AttitudeScore::NEUTRAL, |r| r.attitude);
        let (text, source) = match contents.get(&agent) {
            Some(RoundContent::Generated(t)) => (Some(t.as_str()), AttitudeSource::GeneratedContent),
            Some(RoundContent::RetweetOf(t)) => (Some(t.as_str()), AttitudeSource::RetweetTarget),
            Some(RoundContent::Nothing) | None => (None, AttitudeSource::CarriedOver),
        };
        let (attitude, source) = match text {
            None => (carried, AttitudeSource::CarriedOver),
            Some(t) => match annotator.annotate(t) {
                Ok(a) => (a.attitude, source),
                Err(e) => {
                    log::warn!("annotating core agent {agent} in round {round} failed: {e}; carrying over");
                    (carried, AttitudeSource::CarriedOver)
                }
            },
        };
        records.insert(
            agent,
            CoreAttitudeRecord {
                agent,
                round,
                attitude,
                source,
            },
        );
    }
    let messages = records
        .values()
        .map(|r| Message::new(r.agent, r.attitude))
        .collect();
    (records, messages)
}
