use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fs::File;
use std::io::{BufRead, BufReader};
use std::path::Path;
use std::sync::Mutex;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::output::{write_agent_trace, write_json, write_jsonl, write_trace_csv, RunManifest};
use super::{with_workers, Dataset, RunConfig, RunError};
use crate::abm::{population, step_round, AgentState, Message, RoundKey};
use crate::agent::{
    assemble_prompt, parse_response, ActionContext, AgentAction, CoreProfile, Driver, DriverError, GenerationRequest,
    Memory, MemoryKind, PromptContext, PublicSpace, Purpose, ReplayRecord, TimelineEntry, VisibleTweet,
};
use crate::annotate::{AnnotError, Annotation, Annotators, AttitudeAnnotator, Embedder};
use crate::bridge::{initial_records, sync_core_into_pool, CoreAttitudeRecord, RoundContent};
use crate::environment::{apply_feed_policy, FollowGraph, Mutation, NewsSchedule, Tweet, TweetId, TweetKind, TweetStore};
use crate::metrics::{bias_diversity_from_stats, macro_report_from_stats, population_homogeneity, AttitudeTrace, MacroReport};
use crate::types::{AgentId, AttitudeScore};

/// Importance and immediacy of memory records written by the runner.
const OWN_ACTION: (f64, f64) = (0.6, 1.0);
const NOTIFICATION: (f64, f64) = (0.7, 1.0);
const NEWS: (f64, f64) = (0.8, 0.5);
const TIMELINE: (f64, f64) = (0.4, 0.3);
const HISTORY: (f64, f64) = (0.5, 0.5);

/// Pluggable pieces of a run. The driver is built from the config on first
/// use, so runs without core users never touch it.
pub struct Components {
    pub driver: Option<Box<dyn Driver>>,
    pub annotators: Annotators,
    /// Replaces `annotators` for attitude scoring.
    pub attitude: Option<Box<dyn AttitudeAnnotator>>,
}

impl Components {
    pub fn from_config(cfg: &RunConfig) -> Self {
        Components {
            driver: None,
            annotators: Annotators::from_config(&cfg.annotators),
            attitude: None,
        }
    }

    pub fn with_driver(mut self, driver: Box<dyn Driver>) -> Self {
        self.driver = Some(driver);
        self
    }

    pub fn with_attitude(mut self, annotator: Box<dyn AttitudeAnnotator>) -> Self {
        self.attitude = Some(annotator);
        self
    }

    pub(crate) fn driver(&mut self, cfg: &RunConfig) -> Result<&dyn Driver, RunError> {
        if self.driver.is_none() {
            self.driver = Some(cfg.driver.build(cfg.seed)?);
        }
        Ok(self.driver.as_deref().unwrap())
    }
}

/// Annotation cache keyed by text; failures are not cached.
pub(crate) struct Memo<'a> {
    inner: &'a dyn AttitudeAnnotator,
    cache: Mutex<HashMap<String, Annotation>>,
}

impl<'a> Memo<'a> {
    pub(crate) fn new(inner: &'a dyn AttitudeAnnotator) -> Self {
        Memo {
            inner,
            cache: Mutex::new(HashMap::new()),
        }
    }
}

impl AttitudeAnnotator for Memo<'_> {
    fn annotate(&self, text: &str) -> Result<Annotation, AnnotError> {
        if let Some(a) = self.cache.lock().unwrap().get(text) {
            return Ok(a.clone());
        }
        let a = self.inner.annotate(text)?;
        self.cache.lock().unwrap().insert(text.to_string(), a.clone());
        Ok(a)
    }
}

/// Logs every successful generation in replay format.
struct Recorder<'a> {
    inner: &'a dyn Driver,
    log: Mutex<Vec<ReplayRecord>>,
}

impl Driver for Recorder<'_> {
    fn generate(&self, req: &GenerationRequest<'_>) -> Result<String, DriverError> {
        let out = self.inner.generate(req)?;
        self.log
            .lock()
            .unwrap()
            .push(ReplayRecord::new(req.agent, req.round, req.purpose, &out));
        Ok(out)
    }

    fn can_reflect(&self, agent: AgentId, round: u32) -> bool {
        self.inner.can_reflect(agent, round)
    }
}

impl Recorder<'_> {
    /// Entries logged since the last drain, grouped by agent. Each agent's
    /// calls run on one thread, so their relative order is stable.
    fn drain(&self) -> Vec<ReplayRecord> {
        let mut out = std::mem::take(&mut *self.log.lock().unwrap());
        out.sort_by_key(|r| (r.round, r.agent_id));
        out
    }
}

/// Core attitudes per simulated round; index 0 is round 1.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct CoreRecording {
    pub rounds: Vec<BTreeMap<AgentId, CoreAttitudeRecord>>,
}

impl CoreRecording {
    pub fn messages(&self, round: u32) -> Vec<Message> {
        self.rounds[round as usize - 1]
            .values()
            .map(|r| Message::new(r.agent, r.attitude))
            .collect()
    }

    pub fn records(&self) -> impl Iterator<Item = &CoreAttitudeRecord> {
        self.rounds.iter().flat_map(BTreeMap::values)
    }
}

pub fn read_core_recording(path: &Path) -> Result<CoreRecording, RunError> {
    let reader = BufReader::new(File::open(path).map_err(|_| RunError::MissingFile(path.to_path_buf()))?);
    let mut rounds: BTreeMap<u32, BTreeMap<AgentId, CoreAttitudeRecord>> = BTreeMap::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let r: CoreAttitudeRecord = serde_json::from_str(&line).map_err(|e| RunError::Schema {
            file: path.display().to_string(),
            line: i + 1,
            message: e.to_string(),
        })?;
        rounds.entry(r.round).or_default().insert(r.agent, r);
    }
    for (expect, &got) in (1u32..).zip(rounds.keys()) {
        if got != expect {
            return Err(RunError::Recording(format!("round {expect} missing from {}", path.display())));
        }
    }
    Ok(CoreRecording {
        rounds: rounds.into_values().collect(),
    })
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct MacroMetrics {
    pub bias: f64,
    pub diversity: f64,
    /// Against the dataset's empirical trace, when present.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub report: Option<MacroReport>,
    /// Mean production/consumption similarity over core agents.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub homogeneity: Option<f64>,
    /// Mean toxicity of core-written tweets, when a scorer is configured.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub toxicity: Option<f64>,
    pub driver_calls: usize,
    pub driver_failures: usize,
    pub rejected_actions: usize,
}

pub struct MacroOutcome {
    pub agent_ids: Vec<AgentId>,
    pub trace: AttitudeTrace,
    pub stats: Vec<(f64, f64)>,
    pub store: TweetStore,
    pub core: CoreRecording,
    pub responses: Vec<ReplayRecord>,
    pub metrics: MacroMetrics,
    /// `(round, failed, calls)` when the failure budget stopped the run.
    pub aborted: Option<(u32, usize, usize)>,
}

impl MacroOutcome {
    pub fn rounds_completed(&self) -> u32 {
        self.trace.len() as u32
    }

    /// Writes trace.csv, tweets.jsonl, metrics.json, run-manifest.json,
    /// core_trace.jsonl (replay format), core_attitudes.jsonl and, when
    /// enabled, trace_agents.csv.
    pub fn write(&self, dir: &Path, dataset: &Dataset, cfg: &RunConfig) -> Result<(), RunError> {
        std::fs::create_dir_all(dir)?;
        write_trace_csv(&dir.join("trace.csv"), &self.stats)?;
        if cfg.write_agent_trace {
            write_agent_trace(&dir.join("trace_agents.csv"), &self.agent_ids, &self.trace.rounds)?;
        }
        let mut tweets = std::io::BufWriter::new(File::create(dir.join("tweets.jsonl"))?);
        self.store.write_jsonl(&mut tweets)?;
        std::io::Write::flush(&mut tweets)?;
        write_json(&dir.join("metrics.json"), &self.metrics)?;
        write_jsonl(&dir.join("core_trace.jsonl"), &self.responses)?;
        write_jsonl(&dir.join("core_attitudes.jsonl"), self.core.records())?;
        let manifest = RunManifest {
            version: env!("CARGO_PKG_VERSION").to_string(),
            seed: cfg.seed,
            config: cfg.clone(),
            users: dataset.users.len(),
            core_users: dataset.core_users().count(),
            edges: dataset.edges.len(),
            rounds_completed: self.rounds_completed(),
            aborted: self
                .aborted
                .map(|(round, failed, calls)| format!("round {round}: {failed} of {calls} driver calls failed")),
        };
        write_json(&dir.join("run-manifest.json"), &manifest)
    }
}

struct CoreAgent {
    id: AgentId,
    profile: CoreProfile,
    memory: Memory,
    seen: BTreeSet<TweetId>,
    production: Vec<String>,
    consumption: Vec<String>,
}

/// What one agent saw and chose in the generation phase.
struct CoreStep {
    action: AgentAction,
    failed: bool,
    shown: Vec<TweetId>,
    notifications: Vec<TweetId>,
}

struct World<'a> {
    cfg: &'a RunConfig,
    graph: FollowGraph,
    store: TweetStore,
    names: HashMap<AgentId, String>,
    scores: HashMap<TweetId, f64>,
    followees: HashMap<AgentId, BTreeSet<AgentId>>,
    news: NewsSchedule,
}

impl World<'_> {
    fn name(&self, id: AgentId) -> String {
        self.names.get(&id).cloned().unwrap_or_else(|| id.to_string())
    }

    /// The original tweet behind a chain of bare retweets.
    fn root<'t>(&'t self, mut t: &'t Tweet) -> &'t Tweet {
        while t.kind == TweetKind::Retweet && t.content.trim().is_empty() {
            match t.parent_id.and_then(|p| self.store.get(p)) {
                Some(p) => t = p,
                None => break,
            }
        }
        t
    }

    /// Text that carries the tweet's attitude.
    fn attitude_text<'t>(&'t self, t: &'t Tweet) -> &'t str {
        &self.root(t).content
    }

    /// Text shown on a timeline.
    fn display(&self, t: &Tweet) -> String {
        match (t.kind, t.parent_id.and_then(|p| self.store.get(p))) {
            (TweetKind::Retweet, Some(parent)) => {
                let root = self.root(parent);
                if t.content.trim().is_empty() {
                    format!("RT [{}]: {}", self.name(root.author), root.content)
                } else {
                    format!("{} RT [{}]: {}", t.content, self.name(root.author), root.content)
                }
            }
            _ => t.content.clone(),
        }
    }

    fn entry(&self, t: &Tweet) -> TimelineEntry {
        TimelineEntry {
            id: t.id,
            author: self.name(t.author),
            content: self.display(t),
            time: t.timestamp,
        }
    }

    fn current_news(&self, round: u32) -> Vec<String> {
        self.news.current(round).into_iter().map(|n| n.text.clone()).collect()
    }

    fn score(&self, t: &Tweet) -> Option<f64> {
        self.scores.get(&t.id).copied()
    }

    /// Annotates tweets that have no score yet, in id order.
    fn annotate_new(&mut self, ids: &[TweetId], annotator: &dyn AttitudeAnnotator) {
        let texts: Vec<(TweetId, String)> = ids
            .iter()
            .filter_map(|id| self.store.get(*id))
            .map(|t| (t.id, self.attitude_text(t).to_string()))
            .collect();
        let scored: Vec<(TweetId, Option<f64>)> = texts
            .par_iter()
            .map(|(id, text)| (*id, annotator.annotate(text).ok().map(|a| a.attitude.value())))
            .collect();
        for (id, s) in scored {
            if let Some(s) = s {
                self.scores.insert(id, s);
            }
        }
    }
}

fn action_memory(world: &World<'_>, action: &AgentAction, mutation: &Mutation) -> Option<String> {
    let parent = |id: Option<TweetId>| id.and_then(|p| world.store.get(p));
    match (action, mutation) {
        (AgentAction::Post { content }, Mutation::Created { .. }) => Some(format!("[me]: {content}")),
        (AgentAction::Retweet { content, .. }, Mutation::Created { parent: p, .. }) => {
            let target = parent(*p)?;
            let quoted = world.display(target);
            Some(match content.as_deref().filter(|c| !c.trim().is_empty()) {
                Some(c) => format!("[me]: me retweets [{}] with comment: {c} '{quoted}'", world.name(target.author)),
                None => format!("[me]: me retweets [{}]: '{quoted}'", world.name(target.author)),
            })
        }
        (AgentAction::Reply { content, .. }, Mutation::Created { parent: p, .. }) => {
            let target = parent(*p)?;
            Some(format!("[me]: me replies to [{}]: {content}", world.name(target.author)))
        }
        (AgentAction::Like { .. }, Mutation::Liked { tweet }) => {
            let target = world.store.get(*tweet)?;
            Some(format!("[me]: me likes a tweet of [{}]: '{}'", world.name(target.author), world.display(target)))
        }
        _ => None,
    }
}

fn generation_phase(
    agent: &mut CoreAgent,
    world: &World<'_>,
    driver: &dyn Driver,
    embedder: &dyn Embedder,
    attitude: f64,
    round: u32,
) -> Result<CoreStep, RunError> {
    let cfg = world.cfg;
    agent
        .memory
        .reflect(agent.id, driver, embedder, round, &cfg.reflection, &cfg.retrieval);

    let k = cfg.timeline_k;
    let candidate = world.store.personal_timeline(&world.graph, agent.id, k)?;
    let feed = apply_feed_policy(
        &cfg.feed,
        agent.id,
        attitude,
        candidate,
        k,
        &world.store,
        &|t: &Tweet| world.score(t),
    );
    let mut notes = world.store.notifications_for(agent.id, round - 1);
    if notes.len() > k {
        notes.drain(..notes.len() - k);
    }

    let news = world.current_news(round);
    let query = if news.is_empty() {
        agent.profile.summary.clone()
    } else {
        news.join(" ")
    };
    let memory: Vec<String> = agent
        .memory
        .retrieve(embedder, &query, cfg.memory_k, round, &cfg.retrieval)
        .into_iter()
        .map(|r| r.text.clone())
        .collect();
    let personal = if agent.profile.personal_experience.is_empty() {
        agent
            .memory
            .retrieve_kind(embedder, MemoryKind::PersonalExperience, &query, 3, round, &cfg.retrieval)
            .into_iter()
            .map(|r| r.text.as_str())
            .collect::<Vec<_>>()
            .join(" ")
    } else {
        agent.profile.personal_experience.clone()
    };
    let ctx = PromptContext {
        name: agent.profile.name.clone(),
        summary: agent.profile.summary.clone(),
        time: cfg.clock.at(round),
        news,
        personal_experience: personal,
        memory,
        timeline: feed.timeline.iter().map(|t| world.entry(t)).collect(),
        notifications: notes.iter().map(|t| world.entry(t)).collect(),
        public_space: feed.public_space.as_ref().map(|space| PublicSpace {
            hashtag: cfg.feed.hashtag.clone(),
            tweets: space.iter().map(|t| world.entry(t)).collect(),
        }),
    };
    let prompt = assemble_prompt(&ctx);
    let shown: Vec<&Tweet> = feed
        .timeline
        .iter()
        .chain(feed.public_space.iter().flatten())
        .copied()
        .collect();
    let action_ctx = ActionContext {
        role: agent.profile.communication_role,
        activity: agent.profile.activity_tier,
        attitude,
        visible: shown
            .iter()
            .map(|t| VisibleTweet {
                id: t.id,
                author: world.name(t.author),
                content: world.display(t),
                own: t.author == agent.id,
                score: world.score(t),
            })
            .collect(),
    };
    let request = GenerationRequest::new(agent.id, round, Purpose::Action, &prompt).with_context(&action_ctx);
    let (action, failed) = match driver.generate(&request) {
        Ok(text) => {
            let parsed = parse_response(&text);
            if let Some(d) = &parsed.diagnostic {
                log::debug!("agent {} round {round}: {d}", agent.id);
            }
            (parsed.action, false)
        }
        Err(e) => {
            log::warn!("agent {} round {round}: driver failed: {e}", agent.id);
            (AgentAction::DoNothing, true)
        }
    };
    let mut shown_ids: Vec<TweetId> = shown.iter().map(|t| t.id).collect();
    shown_ids.dedup();
    Ok(CoreStep {
        action,
        failed,
        shown: shown_ids,
        notifications: notes.iter().map(|t| t.id).collect(),
    })
}

fn memory_phase(
    agent: &mut CoreAgent,
    step: &CoreStep,
    mutation: &Mutation,
    world: &World<'_>,
    embedder: &dyn Embedder,
    news: &[String],
    round: u32,
) {
    if let Some(text) = action_memory(world, &step.action, mutation) {
        agent
            .memory
            .write_observation(embedder, &text, round, MemoryKind::Event, OWN_ACTION.0, OWN_ACTION.1);
    }
    if let (Some(text), Mutation::Created { .. }) = (step.action.own_content(), mutation) {
        agent.production.push(text.to_string());
    }
    for id in &step.notifications {
        if !agent.seen.insert(*id) {
            continue;
        }
        let t = world.store.get(*id).unwrap();
        let text = format!("[{}]: {} replies to [me]: {}", world.name(t.author), world.name(t.author), t.content);
        agent
            .memory
            .write_observation(embedder, &text, round, MemoryKind::Event, NOTIFICATION.0, NOTIFICATION.1);
    }
    let follows = world.followees.get(&agent.id);
    for id in &step.shown {
        let t = world.store.get(*id).unwrap();
        if t.author == agent.id || !agent.seen.insert(*id) {
            continue;
        }
        let shown = world.display(t);
        if follows.is_some_and(|f| f.contains(&t.author)) {
            agent.consumption.push(shown.clone());
        }
        let text = format!("[{}]: {}", world.name(t.author), shown);
        agent
            .memory
            .write_observation(embedder, &text, round, MemoryKind::Event, TIMELINE.0, TIMELINE.1);
    }
    for n in news {
        agent
            .memory
            .write_observation(embedder, &format!("[news]: {n}"), round, MemoryKind::Event, NEWS.0, NEWS.1);
    }
}

fn round_content(world: &World<'_>, action: &AgentAction, mutation: &Mutation) -> RoundContent {
    match mutation {
        Mutation::Created { kind, parent, .. } => match (kind, action.own_content()) {
            (TweetKind::Retweet, None) => match parent.and_then(|p| world.store.get(p)) {
                Some(p) => RoundContent::RetweetOf(world.attitude_text(p).to_string()),
                None => RoundContent::Nothing,
            },
            (_, Some(text)) => RoundContent::Generated(text.to_string()),
            (_, None) => RoundContent::Nothing,
        },
        _ => RoundContent::Nothing,
    }
}

/// Merges core and ordinary attitudes into one id-ordered row.
fn trace_row(ids: &[AgentId], core: &BTreeMap<AgentId, CoreAttitudeRecord>, ordinary: &[AgentState]) -> Vec<f64> {
    let mut o = ordinary.iter().peekable();
    ids.iter()
        .map(|id| match core.get(id) {
            Some(r) => r.attitude.value(),
            None => o.next().expect("ordinary agent").value(),
        })
        .collect()
}

fn ordinary_population(dataset: &Dataset, cfg: &RunConfig) -> Vec<AgentState> {
    let init: Vec<(AgentId, f64)> = dataset.ordinary_users().map(|u| (u.id, u.initial_attitude)).collect();
    population(&cfg.model, &init)
}

/// Multi-round hybrid run: writes outputs into `cfg.output_dir`. A run
/// stopped by the failure budget still writes what it has, then errors.
pub fn run_macro(dataset: &Dataset, cfg: &RunConfig) -> Result<MacroOutcome, RunError> {
    let outcome = run_macro_with(dataset, cfg, Components::from_config(cfg))?;
    outcome.write(&cfg.output_dir, dataset, cfg)?;
    if let Some((round, failed, calls)) = outcome.aborted {
        return Err(RunError::FailureBudget { round, failed, calls });
    }
    Ok(outcome)
}

/// Multi-round hybrid run without touching the disk.
pub fn run_macro_with(dataset: &Dataset, cfg: &RunConfig, components: Components) -> Result<MacroOutcome, RunError> {
    cfg.validate()?;
    with_workers(cfg.workers, move || macro_loop(dataset, cfg, components))?
}

fn macro_loop(dataset: &Dataset, cfg: &RunConfig, mut components: Components) -> Result<MacroOutcome, RunError> {
    let model = cfg.opinion_model();
    let has_core = dataset.core_users().next().is_some();
    if has_core {
        components.driver(cfg)?;
    }
    let Components {
        driver,
        annotators,
        attitude,
    } = components;
    let embedder = annotators.embedder.clone();
    let base_annotator: &dyn AttitudeAnnotator = match &attitude {
        Some(a) => a.as_ref(),
        None => &annotators,
    };
    let annotator = Memo::new(base_annotator);
    let recorder = driver.as_deref().map(|inner| Recorder {
        inner,
        log: Mutex::new(Vec::new()),
    });

    let mut graph = FollowGraph::new();
    for u in &dataset.users {
        graph.add_user(u.id);
    }
    let mut followees: HashMap<AgentId, BTreeSet<AgentId>> = HashMap::new();
    for &(a, b) in &dataset.edges {
        graph.follow(a, b)?;
        followees.entry(a).or_default().insert(b);
    }
    let mut world = World {
        cfg,
        graph,
        store: dataset.history.clone(),
        names: dataset.users.iter().map(|u| (u.id, u.display_name())).collect(),
        scores: HashMap::new(),
        followees,
        news: dataset.news.clone(),
    };
    let history_ids: Vec<TweetId> = world.store.iter().map(|t| t.id).collect();
    for t in world.store.iter() {
        embedder.observe(&t.content);
    }
    world.annotate_new(&history_ids, &annotator);

    let mut agents: Vec<CoreAgent> = dataset
        .core_users()
        .map(|u| CoreAgent {
            id: u.id,
            profile: u.profile.clone().expect("validated core profile"),
            memory: Memory::new(),
            seen: BTreeSet::new(),
            production: Vec::new(),
            consumption: Vec::new(),
        })
        .collect();
    for h in dataset.core_users().flat_map(|u| &u.history) {
        embedder.observe(h);
    }
    embedder.refresh();
    for (agent, user) in agents.iter_mut().zip(dataset.core_users()) {
        for h in &user.history {
            agent
                .memory
                .write_observation(embedder.as_ref(), h, 0, MemoryKind::PersonalExperience, HISTORY.0, HISTORY.1);
        }
    }

    let mut core_records = initial_records(
        dataset
            .core_users()
            .map(|u| (u.id, AttitudeScore::new(u.initial_attitude).expect("validated attitude"))),
    );
    let mut ordinary = ordinary_population(dataset, cfg);
    let ids: Vec<AgentId> = dataset.users.iter().map(|u| u.id).collect();
    let mut trace = AttitudeTrace::default();
    let mut recording = CoreRecording::default();
    let mut responses = Vec::new();
    let mut metrics = MacroMetrics::default();
    let mut toxicity = Vec::new();
    let mut aborted = None;

    for round in 1..=cfg.rounds {
        let injected: Vec<String> = dataset.news.injected_at(round).map(|n| n.text.clone()).collect();
        for n in &injected {
            embedder.observe(n);
        }

        // Core phase: generation reads a frozen snapshot of the environment.
        let steps: Vec<CoreStep> = match &recorder {
            Some(rec) => {
                let w = &world;
                let records = &core_records;
                agents
                    .par_iter_mut()
                    .map(|a| {
                        let att = records[&a.id].attitude.value();
                        generation_phase(a, w, rec, embedder.as_ref(), att, round)
                    })
                    .collect::<Result<_, _>>()?
            }
            None => Vec::new(),
        };
        if let Some(rec) = &recorder {
            responses.extend(rec.drain());
        }
        let failed = steps.iter().filter(|s| s.failed).count();
        metrics.driver_calls += steps.len();
        metrics.driver_failures += failed;
        if !steps.is_empty() && failed as f64 > cfg.failure_budget * steps.len() as f64 {
            log::error!("round {round}: {failed} of {} driver calls failed; aborting", steps.len());
            aborted = Some((round, failed, steps.len()));
            break;
        }

        // Commit in actor-id order.
        let clock = cfg.clock.at(round);
        let mut mutations = Vec::with_capacity(steps.len());
        let mut created = Vec::new();
        for (a, s) in agents.iter().zip(&steps) {
            let m = world.store.apply_action(&s.action, a.id, clock, round);
            match &m {
                Mutation::Created { tweet, .. } => {
                    created.push(*tweet);
                    embedder.observe(&world.store.get(*tweet).unwrap().content);
                }
                Mutation::Rejected { reason } => {
                    metrics.rejected_actions += 1;
                    log::debug!("agent {} round {round}: action rejected: {reason}", a.id);
                }
                _ => {}
            }
            mutations.push(m);
        }
        world.annotate_new(&created, &annotator);
        if annotators.toxicity.is_some() {
            for id in &created {
                let t = world.store.get(*id).unwrap();
                if !t.content.trim().is_empty() {
                    match annotators.toxicity(&t.content) {
                        Ok(Some(v)) => toxicity.push(v),
                        Ok(None) => {}
                        Err(e) => log::warn!("toxicity for tweet {id}: {e}"),
                    }
                }
            }
        }

        // Bridge.
        let contents: BTreeMap<AgentId, RoundContent> = agents
            .iter()
            .zip(steps.iter().zip(&mutations))
            .map(|(a, (s, m))| (a.id, round_content(&world, &s.action, m)))
            .collect();
        let (records, messages) = sync_core_into_pool(round, &contents, &annotator, &core_records);
        core_records = records;

        // Memory writes, then the embedder sees this round's documents.
        {
            let w = &world;
            let e = embedder.as_ref();
            agents
                .par_iter_mut()
                .zip(steps.par_iter().zip(mutations.par_iter()))
                .for_each(|(a, (s, m))| memory_phase(a, s, m, w, e, &injected, round));
        }
        embedder.refresh();

        // Ordinary phase.
        ordinary = step_round(&model, &ordinary, &messages, RoundKey::new(cfg.seed, round))?;
        trace.push(trace_row(&ids, &core_records, &ordinary));
        recording.rounds.push(core_records.clone());
    }

    let stats = trace.round_stats()?;
    if !stats.is_empty() {
        let bd = bias_diversity_from_stats(&stats)?;
        metrics.bias = bd.bias;
        metrics.diversity = bd.diversity;
        if let Some(real) = &dataset.empirical {
            metrics.report = Some(macro_report_from_stats(&stats, real)?);
        }
    }
    let corpora: Vec<(Vec<String>, Vec<String>)> = agents
        .iter()
        .map(|a| (a.production.clone(), a.consumption.clone()))
        .collect();
    metrics.homogeneity = population_homogeneity(&corpora, embedder.as_ref());
    if !toxicity.is_empty() {
        metrics.toxicity = Some(toxicity.iter().sum::<f64>() / toxicity.len() as f64);
    }
    Ok(MacroOutcome {
        agent_ids: ids,
        trace,
        stats,
        store: world.store,
        core: recording,
        responses,
        metrics,
        aborted,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReplicateMetrics {
    pub replicate: usize,
    pub bias: f64,
    pub diversity: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub report: Option<MacroReport>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct MeanMetrics {
    pub bias: f64,
    pub diversity: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub delta_bias: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub delta_div: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dtw: Option<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct FrozenReport {
    pub agent_ids: Vec<AgentId>,
    pub traces: Vec<AttitudeTrace>,
    pub per_replicate: Vec<ReplicateMetrics>,
    pub mean: MeanMetrics,
}

impl FrozenReport {
    /// `replicate_{r}.csv` per replicate plus `replicates.json`.
    pub fn write(&self, dir: &Path) -> Result<(), RunError> {
        std::fs::create_dir_all(dir)?;
        for (r, t) in self.traces.iter().enumerate() {
            write_trace_csv(&dir.join(format!("replicate_{r}.csv")), &t.round_stats()?)?;
        }
        #[derive(Serialize)]
        struct Out<'a> {
            replicates: &'a [ReplicateMetrics],
            mean: &'a MeanMetrics,
        }
        write_json(
            &dir.join("replicates.json"),
            &Out {
                replicates: &self.per_replicate,
                mean: &self.mean,
            },
        )
    }
}

fn mean_of(xs: impl Iterator<Item = f64>) -> f64 {
    let v: Vec<f64> = xs.collect();
    v.iter().sum::<f64>() / v.len() as f64
}

/// Reruns only the ordinary phase `n` times against a recorded core trace.
/// Replicate `r` draws from substream `(seed, r, agent, round)`, so
/// replicate 0 reproduces the recorded run.
pub fn run_frozen_replicate(
    recording: &CoreRecording,
    dataset: &Dataset,
    cfg: &RunConfig,
    n: usize,
) -> Result<FrozenReport, RunError> {
    cfg.validate()?;
    if n == 0 {
        return Err(RunError::Config("at least one replicate is required".into()));
    }
    if recording.rounds.len() != cfg.rounds as usize {
        return Err(RunError::Recording(format!(
            "recording has {} rounds but {} are configured",
            recording.rounds.len(),
            cfg.rounds
        )));
    }
    let core: BTreeSet<AgentId> = dataset.core_users().map(|u| u.id).collect();
    for (i, r) in recording.rounds.iter().enumerate() {
        let got: BTreeSet<AgentId> = r.keys().copied().collect();
        if got != core {
            return Err(RunError::Recording(format!("round {} does not cover the core users", i + 1)));
        }
    }
    let model = cfg.opinion_model();
    let ids: Vec<AgentId> = dataset.users.iter().map(|u| u.id).collect();
    let init = ordinary_population(dataset, cfg);
    let traces: Vec<AttitudeTrace> = with_workers(cfg.workers, || {
        (0..n)
            .into_par_iter()
            .map(|rep| {
                let mut state = init.clone();
                let mut trace = AttitudeTrace::default();
                for round in 1..=cfg.rounds {
                    let key = RoundKey::new(cfg.seed, round).replicate(rep as u64);
                    state = step_round(&model, &state, &recording.messages(round), key)?;
                    trace.push(trace_row(&ids, &recording.rounds[round as usize - 1], &state));
                }
                Ok(trace)
            })
            .collect::<Result<_, RunError>>()
    })??;
    let mut per_replicate = Vec::with_capacity(n);
    for (rep, t) in traces.iter().enumerate() {
        let stats = t.round_stats()?;
        let bd = bias_diversity_from_stats(&stats)?;
        let report = match &dataset.empirical {
            Some(real) => Some(macro_report_from_stats(&stats, real)?),
            None => None,
        };
        per_replicate.push(ReplicateMetrics {
            replicate: rep,
            bias: bd.bias,
            diversity: bd.diversity,
            report,
        });
    }
    let with_report = dataset.empirical.is_some();
    let mean = MeanMetrics {
        bias: mean_of(per_replicate.iter().map(|m| m.bias)),
        diversity: mean_of(per_replicate.iter().map(|m| m.diversity)),
        delta_bias: with_report.then(|| mean_of(per_replicate.iter().map(|m| m.report.as_ref().unwrap().delta_bias))),
        delta_div: with_report.then(|| mean_of(per_replicate.iter().map(|m| m.report.as_ref().unwrap().delta_div))),
        dtw: with_report.then(|| mean_of(per_replicate.iter().map(|m| m.report.as_ref().unwrap().dtw))),
    };
    Ok(FrozenReport {
        agent_ids: ids,
        traces,
        per_replicate,
        mean,
    })
}
