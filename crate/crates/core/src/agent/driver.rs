//! Text-generation back ends for core agents.

use std::collections::{HashMap, VecDeque};
use std::fmt;
use std::io::BufRead;
use std::path::{Path, PathBuf};
use std::sync::{Condvar, Mutex};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::chat::{ChatClient, ChatConfig, ChatError};
use crate::rng::unit_hash;
use crate::types::AgentId;

use super::action::{format_response, AgentAction};
use super::{CommunicationRole, Tier};

#[derive(Debug, Error)]
pub enum DriverError {
    #[error("driver unavailable: {0}")]
    Unavailable(String),
    #[error("no recorded {purpose} response left for agent {agent} in round {round}")]
    Exhausted { agent: AgentId, round: u32, purpose: Purpose },
    #[error("{0} is not supported by this driver")]
    Unsupported(Purpose),
    #[error("replay line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("invalid driver config: {0}")]
    Config(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl From<ChatError> for DriverError {
    fn from(e: ChatError) -> Self {
        DriverError::Unavailable(e.to_string())
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Purpose {
    #[default]
    Action,
    ReflectionQuestions,
    Insight,
    Summary,
}

impl fmt::Display for Purpose {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Purpose::Action => "action",
            Purpose::ReflectionQuestions => "reflection_questions",
            Purpose::Insight => "insight",
            Purpose::Summary => "summary",
        })
    }
}

/// A tweet as the deciding agent sees it.
#[derive(Clone, Debug, PartialEq)]
pub struct VisibleTweet {
    pub id: u64,
    pub author: String,
    pub content: String,
    pub own: bool,
    /// Annotated attitude of the tweet, when known.
    pub score: Option<f64>,
}

/// Structured decision situation, used by drivers that do not read prompts.
#[derive(Clone, Debug, PartialEq)]
pub struct ActionContext {
    pub role: CommunicationRole,
    pub activity: Tier,
    pub attitude: f64,
    pub visible: Vec<VisibleTweet>,
}

#[derive(Clone, Copy, Debug)]
pub struct GenerationRequest<'a> {
    pub agent: AgentId,
    pub round: u32,
    pub purpose: Purpose,
    pub system: Option<&'a str>,
    pub prompt: &'a str,
    pub context: Option<&'a ActionContext>,
}

impl<'a> GenerationRequest<'a> {
    pub fn new(agent: AgentId, round: u32, purpose: Purpose, prompt: &'a str) -> Self {
        GenerationRequest {
            agent,
            round,
            purpose,
            system: None,
            prompt,
            context: None,
        }
    }

    pub fn with_context(mut self, ctx: &'a ActionContext) -> Self {
        self.context = Some(ctx);
        self
    }
}

pub trait Driver: Send + Sync {
    fn generate(&self, req: &GenerationRequest<'_>) -> Result<String, DriverError>;

    /// Whether reflection can run for this agent and round.
    fn can_reflect(&self, _agent: AgentId, _round: u32) -> bool {
        false
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DriverKind {
    RemoteChat,
    Replay,
    #[default]
    Heuristic,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DriverConfig {
    pub kind: DriverKind,
    pub chat: ChatConfig,
    pub system_prompt: Option<String>,
    pub max_in_flight: usize,
    pub replay_path: Option<PathBuf>,
    /// Hashtag appended by heuristic posts.
    pub hashtag: String,
}

impl Default for DriverConfig {
    fn default() -> Self {
        DriverConfig {
            kind: DriverKind::Heuristic,
            chat: ChatConfig::default(),
            system_prompt: None,
            max_in_flight: 8,
            replay_path: None,
            hashtag: "#MeToo".into(),
        }
    }
}

impl DriverConfig {
    pub fn validate(&self) -> Result<(), DriverError> {
        if self.chat.max_tokens == 0 {
            return Err(DriverError::Config("max_tokens must be positive".into()));
        }
        if !(self.chat.temperature >= 0.0) {
            return Err(DriverError::Config("temperature must be non-negative".into()));
        }
        if self.kind == DriverKind::Replay && self.replay_path.is_none() {
            return Err(DriverError::Config("replay driver needs replay_path".into()));
        }
        Ok(())
    }

    /// Builds the driver. `seed` feeds the heuristic driver.
    pub fn build(&self, seed: u64) -> Result<Box<dyn Driver>, DriverError> {
        self.validate()?;
        Ok(match self.kind {
            DriverKind::RemoteChat => Box::new(RemoteDriver::new(
                self.chat.clone(),
                self.system_prompt.clone(),
                self.max_in_flight,
            )),
            DriverKind::Replay => Box::new(ReplayDriver::load(self.replay_path.as_ref().unwrap())?),
            DriverKind::Heuristic => Box::new(HeuristicDriver::new(seed, &self.hashtag)),
        })
    }
}

struct Gate {
    free: Mutex<usize>,
    cv: Condvar,
}

impl Gate {
    fn new(n: usize) -> Self {
        Gate {
            free: Mutex::new(n.max(1)),
            cv: Condvar::new(),
        }
    }

    fn run<T>(&self, f: impl FnOnce() -> T) -> T {
        {
            let mut free = self.free.lock().unwrap();
            while *free == 0 {
                free = self.cv.wait(free).unwrap();
            }
            *free -= 1;
        }
        let out = f();
        *self.free.lock().unwrap() += 1;
        self.cv.notify_one();
        out
    }
}

/// Chat-completions driver with a cap on concurrent requests.
pub struct RemoteDriver {
    client: ChatClient,
    system: Option<String>,
    gate: Gate,
}

impl RemoteDriver {
    pub fn new(config: ChatConfig, system: Option<String>, max_in_flight: usize) -> Self {
        RemoteDriver {
            client: ChatClient::new(config),
            system,
            gate: Gate::new(max_in_flight),
        }
    }
}

impl Driver for RemoteDriver {
    fn generate(&self, req: &GenerationRequest<'_>) -> Result<String, DriverError> {
        let system = req.system.or(self.system.as_deref());
        Ok(self.gate.run(|| self.client.complete(system, req.prompt))?)
    }

    fn can_reflect(&self, _agent: AgentId, _round: u32) -> bool {
        true
    }
}

/// One recorded response, also the line format of replay fixtures.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReplayRecord {
    pub agent_id: AgentId,
    pub round: u32,
    #[serde(default)]
    pub purpose: Purpose,
    pub response: String,
}

impl ReplayRecord {
    pub fn new(agent: AgentId, round: u32, purpose: Purpose, response: &str) -> Self {
        ReplayRecord {
            agent_id: agent,
            round,
            purpose,
            response: response.to_string(),
        }
    }
}

type ReplayKey = (AgentId, u32, Purpose);

/// Serves recorded responses in order per (agent, round, purpose).
#[derive(Debug, Default)]
pub struct ReplayDriver {
    queues: Mutex<HashMap<ReplayKey, VecDeque<String>>>,
}

impl ReplayDriver {
    pub fn from_records(records: impl IntoIterator<Item = ReplayRecord>) -> Self {
        let mut queues: HashMap<ReplayKey, VecDeque<String>> = HashMap::new();
        for r in records {
            queues.entry((r.agent_id, r.round, r.purpose)).or_default().push_back(r.response);
        }
        ReplayDriver {
            queues: Mutex::new(queues),
        }
    }

    pub fn read_records<R: BufRead>(reader: R) -> Result<Vec<ReplayRecord>, DriverError> {
        let mut out = Vec::new();
        for (i, line) in reader.lines().enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            out.push(serde_json::from_str(&line).map_err(|e| DriverError::Parse {
                line: i + 1,
                message: e.to_string(),
            })?);
        }
        Ok(out)
    }

    pub fn load(path: &Path) -> Result<Self, DriverError> {
        let f = std::fs::File::open(path)?;
        Ok(Self::from_records(Self::read_records(std::io::BufReader::new(f))?))
    }
}

impl Driver for ReplayDriver {
    fn generate(&self, req: &GenerationRequest<'_>) -> Result<String, DriverError> {
        self.queues
            .lock()
            .unwrap()
            .get_mut(&(req.agent, req.round, req.purpose))
            .and_then(VecDeque::pop_front)
            .ok_or(DriverError::Exhausted {
                agent: req.agent,
                round: req.round,
                purpose: req.purpose,
            })
    }

    fn can_reflect(&self, agent: AgentId, round: u32) -> bool {
        self.queues
            .lock()
            .unwrap()
            .get(&(agent, round, Purpose::ReflectionQuestions))
            .is_some_and(|q| !q.is_empty())
    }
}

const SUPPORT_POSTS: &[&str] = &[
    "So proud of every survivor who speaks up. We stand with you.",
    "Inspiring to see so much solidarity today. Keep going!",
    "I support this movement. Justice for survivors matters.",
    "Grateful for the brave voices sharing their stories.",
];

const OPPOSE_POSTS: &[&str] = &[
    "This whole thing is overblown nonsense.",
    "I oppose this witch hunt. It went too far.",
    "Sorry, but this campaign is a hoax pushed by the media.",
    "I disagree with this campaign. Ridiculous accusations everywhere.",
];

const NEUTRAL_POSTS: &[&str] = &[
    "Reading the latest news on this. Curious what happens next.",
    "Lots of discussion on my timeline today.",
    "Still trying to understand all sides of this story.",
];

const SUPPORT_REPLIES: &[&str] = &["I agree, we stand with survivors.", "Well said. Proud to support this."];
const OPPOSE_REPLIES: &[&str] = &["I disagree. This is nonsense.", "Sorry, this went too far."];
const NEUTRAL_REPLIES: &[&str] = &["Interesting point, I am still reading about it.", "Noted, following this story."];

/// Role-driven action probabilities: post, retweet, reply, like, nothing.
fn role_table(role: CommunicationRole) -> [f64; 5] {
    match role {
        CommunicationRole::IdeaStarter => [0.45, 0.20, 0.10, 0.05, 0.20],
        CommunicationRole::Amplifier => [0.15, 0.45, 0.10, 0.10, 0.20],
        CommunicationRole::Curator => [0.15, 0.15, 0.35, 0.10, 0.25],
        CommunicationRole::Commentator => [0.15, 0.35, 0.20, 0.10, 0.20],
        CommunicationRole::Viewer => [0.03, 0.05, 0.02, 0.10, 0.80],
    }
}

fn activity_factor(t: Tier) -> f64 {
    match t {
        Tier::Low => 0.6,
        Tier::Medium => 1.0,
        Tier::High => 1.25,
    }
}

/// Deterministic template responses from role, activity and attitude.
#[derive(Clone, Debug)]
pub struct HeuristicDriver {
    seed: u64,
    hashtag: String,
}

impl Default for HeuristicDriver {
    fn default() -> Self {
        HeuristicDriver::new(0, "#MeToo")
    }
}

impl HeuristicDriver {
    pub fn new(seed: u64, hashtag: &str) -> Self {
        HeuristicDriver {
            seed,
            hashtag: hashtag.to_string(),
        }
    }

    fn draw(&self, agent: AgentId, round: u32, salt: u64) -> f64 {
        unit_hash(&[self.seed, agent.0, u64::from(round), salt])
    }

    fn pick<'a>(&self, items: &[&'a str], agent: AgentId, round: u32, salt: u64) -> &'a str {
        items[(self.draw(agent, round, salt) * items.len() as f64) as usize % items.len()]
    }

    pub fn decide(&self, agent: AgentId, round: u32, ctx: &ActionContext) -> (String, AgentAction) {
        let mut probs = role_table(ctx.role);
        let f = activity_factor(ctx.activity);
        for p in &mut probs[..4] {
            *p *= f;
        }
        probs[4] = (1.0 - probs[..4].iter().sum::<f64>()).max(0.0);
        let total: f64 = probs.iter().sum();
        let u = self.draw(agent, round, 1) * total;
        let mut acc = 0.0;
        let mut choice = 4;
        for (i, p) in probs.iter().enumerate() {
            acc += p;
            if u < acc {
                choice = i;
                break;
            }
        }
        let side = if ctx.attitude > 0.1 {
            1.0
        } else if ctx.attitude < -0.1 {
            -1.0
        } else {
            0.0
        };
        let others: Vec<&VisibleTweet> = ctx.visible.iter().filter(|t| !t.own).collect();
        let aligned: Vec<&VisibleTweet> = others
            .iter()
            .copied()
            .filter(|t| t.score.is_some_and(|s| s * side > 0.0 || (side == 0.0 && s.abs() <= 0.1)))
            .collect();
        let target = |pool: &[&VisibleTweet], salt| -> Option<VisibleTweet> {
            if pool.is_empty() {
                None
            } else {
                Some(pool[(self.draw(agent, round, salt) * pool.len() as f64) as usize % pool.len()].clone())
            }
        };
        let preferred = if aligned.is_empty() { &others } else { &aligned };
        let post = || {
            let bank = if side > 0.0 {
                SUPPORT_POSTS
            } else if side < 0.0 {
                OPPOSE_POSTS
            } else {
                NEUTRAL_POSTS
            };
            AgentAction::Post {
                content: format!("{} {}", self.pick(bank, agent, round, 3), self.hashtag),
            }
        };
        let action = match choice {
            0 => post(),
            1 => match target(preferred, 2) {
                Some(t) => AgentAction::Retweet {
                    content: None,
                    author: t.author,
                    original_tweet_id: t.id.to_string(),
                    original_tweet: t.content,
                },
                None => post(),
            },
            2 => match target(&others, 2) {
                Some(t) => {
                    let bank = if side > 0.0 {
                        SUPPORT_REPLIES
                    } else if side < 0.0 {
                        OPPOSE_REPLIES
                    } else {
                        NEUTRAL_REPLIES
                    };
                    AgentAction::Reply {
                        content: self.pick(bank, agent, round, 4).to_string(),
                        author: t.author,
                        original_tweet_id: t.id.to_string(),
                    }
                }
                None => post(),
            },
            3 => match target(preferred, 2) {
                Some(t) => AgentAction::Like {
                    author: t.author,
                    original_tweet_id: t.id.to_string(),
                },
                None => AgentAction::DoNothing,
            },
            _ => AgentAction::DoNothing,
        };
        let thought = match action {
            AgentAction::DoNothing => "None of the observation attract my attention, I need to:",
            _ => "this matches what I care about, I need to:",
        };
        (thought.to_string(), action)
    }
}

impl Driver for HeuristicDriver {
    fn generate(&self, req: &GenerationRequest<'_>) -> Result<String, DriverError> {
        if req.purpose != Purpose::Action {
            return Err(DriverError::Unsupported(req.purpose));
        }
        let (thought, action) = match req.context {
            Some(ctx) => self.decide(req.agent, req.round, ctx),
            None => ("nothing to go on".to_string(), AgentAction::DoNothing),
        };
        Ok(format_response(&thought, &action))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::agent::action::parse_response;
    use crate::chat::stub::StubServer;

    fn ctx(role: CommunicationRole, attitude: f64) -> ActionContext {
        ActionContext {
            role,
            activity: Tier::High,
            attitude,
            visible: vec![
                VisibleTweet {
                    id: 5,
                    author: "a***b".into(),
                    content: "We stand with survivors".into(),
                    own: false,
                    score: Some(0.6),
                },
                VisibleTweet {
                    id: 6,
                    author: "me".into(),
                    content: "mine".into(),
                    own: true,
                    score: Some(0.2),
                },
            ],
        }
    }

    #[test]
    fn replay_exhaustion() {
        let d = ReplayDriver::from_records([ReplayRecord::new(AgentId(1), 1, Purpose::Action, "Action: do_nothing()")]);
        let req = GenerationRequest::new(AgentId(1), 1, Purpose::Action, "p");
        assert_eq!(d.generate(&req).unwrap(), "Action: do_nothing()");
        assert!(matches!(d.generate(&req), Err(DriverError::Exhausted { .. })));
    }

    #[test]
    fn replay_jsonl_format() {
        let text = "{\"agent_id\": 3, \"round\": 2, \"response\": \"hi\"}\n\n{\"agent_id\": 3, \"round\": 2, \"purpose\": \"insight\", \"response\": \"x\"}\n";
        let recs = ReplayDriver::read_records(text.as_bytes()).unwrap();
        assert_eq!(recs[0].purpose, Purpose::Action);
        assert_eq!(recs[1].purpose, Purpose::Insight);
        assert!(matches!(
            ReplayDriver::read_records("{\"round\": 1}".as_bytes()),
            Err(DriverError::Parse { line: 1, .. })
        ));
    }

    #[test]
    fn heuristic_is_deterministic_and_never_acts_on_itself() {
        let d = HeuristicDriver::new(7, "#MeToo");
        for role in CommunicationRole::ALL {
            for round in 1..30 {
                let c = ctx(role, 0.5);
                let req = GenerationRequest::new(AgentId(11), round, Purpose::Action, "").with_context(&c);
                let a = d.generate(&req).unwrap();
                assert_eq!(a, d.generate(&req).unwrap());
                let parsed = parse_response(&a);
                assert!(parsed.diagnostic.is_none(), "{a}");
                if let AgentAction::Retweet { original_tweet_id, .. }
                | AgentAction::Like { original_tweet_id, .. }
                | AgentAction::Reply { original_tweet_id, .. } = parsed.action
                {
                    assert_eq!(original_tweet_id, "5");
                }
            }
        }
        let req = GenerationRequest::new(AgentId(1), 1, Purpose::Insight, "");
        assert!(d.generate(&req).is_err());
        assert!(!d.can_reflect(AgentId(1), 5));
    }

    #[test]
    fn viewers_are_mostly_silent() {
        let d = HeuristicDriver::new(1, "#MeToo");
        let c = ctx(CommunicationRole::Viewer, 0.5);
        let silent = (0..400u64)
            .filter(|i| d.decide(AgentId(*i), 1, &c).1 == AgentAction::DoNothing)
            .count();
        let c = ctx(CommunicationRole::IdeaStarter, 0.5);
        let starter_silent = (0..400u64)
            .filter(|i| d.decide(AgentId(*i), 1, &c).1 == AgentAction::DoNothing)
            .count();
        assert!(silent > 250 && starter_silent < 150, "{silent} {starter_silent}");
    }

    #[test]
    fn remote_driver_parses_stub_post() {
        let srv = StubServer::start(vec![(
            200,
            StubServer::chat_body("Thought: due to news, I need to:\nAction: post(content=\"yyy\")"),
        )]);
        let cfg = ChatConfig {
            endpoint: srv.base_url.clone(),
            api_key_env: None,
            max_retries: 0,
            ..ChatConfig::default()
        };
        let d = RemoteDriver::new(cfg, Some("sys".into()), 2);
        let raw = d.generate(&GenerationRequest::new(AgentId(1), 1, Purpose::Action, "prompt")).unwrap();
        assert_eq!(parse_response(&raw).action, AgentAction::Post { content: "yyy".into() });
    }

    #[test]
    fn config_validation() {
        let mut c = DriverConfig::default();
        assert!(c.validate().is_ok());
        c.chat.max_tokens = 0;
        assert!(c.validate().is_err());
        let c = DriverConfig {
            kind: DriverKind::Replay,
            ..DriverConfig::default()
        };
        assert!(c.build(0).is_err());
    }
}
