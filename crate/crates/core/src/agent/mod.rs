//! LLM-driven core users: profile, memory, prompt assembly, response parsing
//! and generation drivers.

mod action;
pub mod driver;
mod memory;
mod prompt;

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::types::AgentId;

pub use action::{format_action, format_response, parse_response, AgentAction, ParsedResponse};
pub use driver::{
    ActionContext, Driver, DriverConfig, DriverError, DriverKind, GenerationRequest, HeuristicDriver, Purpose,
    RemoteDriver, ReplayDriver, ReplayRecord, VisibleTweet,
};
pub use memory::{retrieval_score, Memory, MemoryKind, MemoryRecord, ReflectionConfig, RetrievalWeights};
pub use prompt::{assemble_prompt, PromptContext, PublicSpace, TimelineEntry};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum AccountType {
    Journalist,
    #[serde(rename = "Private Person")]
    PrivatePerson,
    Celebrity,
    #[serde(rename = "Media Organization")]
    MediaOrganization,
    Activist,
    Politician,
    #[serde(rename = "Social Bot")]
    SocialBot,
    #[serde(rename = "NGO")]
    Ngo,
    #[serde(rename = "International Organization")]
    InternationalOrganization,
    Company,
    #[serde(rename = "Governmental Organization")]
    GovernmentalOrganization,
    #[serde(rename = "Suspended Accounts")]
    SuspendedAccounts,
}

impl fmt::Display for AccountType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let v = serde_json::to_value(self).unwrap();
        f.write_str(v.as_str().unwrap())
    }
}

/// Ordered social-trait tier.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Tier {
    Low,
    Medium,
    High,
}

impl Tier {
    pub fn activity_label(self) -> &'static str {
        match self {
            Tier::Low => "not active",
            Tier::Medium => "moderately active",
            Tier::High => "highly active",
        }
    }

    pub fn influence_label(self) -> &'static str {
        match self {
            Tier::Low => "not influential",
            Tier::Medium => "moderately influential",
            Tier::High => "highly influential",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum CommunicationRole {
    #[serde(rename = "Idea Starter")]
    IdeaStarter,
    Amplifier,
    Curator,
    Commentator,
    Viewer,
}

impl CommunicationRole {
    pub const ALL: [CommunicationRole; 5] = [
        CommunicationRole::IdeaStarter,
        CommunicationRole::Amplifier,
        CommunicationRole::Curator,
        CommunicationRole::Commentator,
        CommunicationRole::Viewer,
    ];

    /// Short description used when generating profile summaries.
    pub fn description(self) -> &'static str {
        match self {
            CommunicationRole::IdeaStarter => "starts new threads and mostly writes original posts",
            CommunicationRole::Amplifier => "spreads other people's ideas, quick to retweet",
            CommunicationRole::Curator => "weighs in on others' ideas and connects discussions",
            CommunicationRole::Commentator => "adds detail to topics they care strongly about",
            CommunicationRole::Viewer => "mostly reads and rarely contributes",
        }
    }
}

impl fmt::Display for CommunicationRole {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let v = serde_json::to_value(self).unwrap();
        f.write_str(v.as_str().unwrap())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CoreProfile {
    /// Pseudonymized handle shown in prompts.
    pub name: String,
    #[serde(default)]
    pub gender: String,
    #[serde(default)]
    pub political_leaning: String,
    pub account_type: AccountType,
    pub activity_tier: Tier,
    pub influence_tier: Tier,
    pub communication_role: CommunicationRole,
    #[serde(default)]
    pub summary: String,
    #[serde(default)]
    pub personal_experience: String,
}

/// Masks a handle to first char + `***` + last char.
pub fn pseudonymize(handle: &str) -> String {
    let chars: Vec<char> = handle.chars().collect();
    match chars.len() {
        0 => "***".into(),
        1 => format!("{}***", chars[0]),
        n => format!("{}***{}", chars[0], chars[n - 1]),
    }
}

/// 6:3:1 split after a stable ascending sort of `measures`. Boundaries are
/// the floors of 60% and 90% of the count.
pub fn assign_social_tiers(measures: &[f64]) -> Vec<Tier> {
    let n = measures.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| measures[a].total_cmp(&measures[b]));
    let low = n * 6 / 10;
    let mid = n * 9 / 10;
    let mut tiers = vec![Tier::High; n];
    for (rank, &i) in order.iter().enumerate() {
        tiers[i] = if rank < low {
            Tier::Low
        } else if rank < mid {
            Tier::Medium
        } else {
            Tier::High
        };
    }
    tiers
}

/// Prompt for an LLM-written profile summary.
pub fn profile_summary_prompt(profile: &CoreProfile, bio: &str, tweets: &[String]) -> String {
    format!(
        "Given the following observation about an individual {name}, please summarize the relevant details from the profile. His or her profile information is as follows:\n\nName: {name}\nGender: {gender}\nPolitical Leaning: {ideo}\nActivity Level: {activity}\nInfluence Level: {influence}\nFeature: {role}\nAccount Type: {account}\nShort Bio: {bio}\nA selection of posted tweets: {tweets}\nYou can deduce the preferences and personality from the bio and tweets, but please avoid repeating the observation in the summary.\nSummary:",
        name = profile.name,
        gender = profile.gender,
        ideo = profile.political_leaning,
        activity = profile.activity_tier.activity_label(),
        influence = profile.influence_tier.influence_label(),
        role = format_args!("{}: {}", profile.communication_role, profile.communication_role.description()),
        account = profile.account_type,
        tweets = tweets.join(" | "),
    )
}

/// Fills `profile.summary` through the driver; keeps the old summary on failure.
pub fn summarize_profile(
    agent: AgentId,
    profile: &mut CoreProfile,
    bio: &str,
    tweets: &[String],
    driver: &dyn Driver,
) -> Result<(), DriverError> {
    let prompt = profile_summary_prompt(profile, bio, tweets);
    let text = driver.generate(&GenerationRequest::new(agent, 0, Purpose::Summary, &prompt))?;
    profile.summary = text.trim().to_string();
    Ok(())
}
