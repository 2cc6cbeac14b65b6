//! Twitter-like world: follow graph, tweet store, timelines, notifications,
//! news schedule and feed interventions.

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::fmt;
use std::io::{BufRead, Write};

use chrono::{Duration, NaiveDateTime};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::agent::AgentAction;
use crate::types::AgentId;

pub type TweetId = u64;

/// Format used for post times in prompts and the default clock start.
pub const TIME_FORMAT: &str = "%Y-%m-%d %H:%M:%S";

#[derive(Debug, Error)]
pub enum EnvError {
    #[error("unknown user {0}")]
    UnknownUser(AgentId),
    #[error("self-follow by {0}")]
    SelfLoop(AgentId),
    #[error("tweet {0} does not exist")]
    MissingParent(TweetId),
    #[error("duplicate tweet id {0}")]
    DuplicateTweet(TweetId),
    #[error("{kind} tweet {id} has no parent")]
    ParentRequired { kind: TweetKind, id: TweetId },
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("news item scheduled for round {0}; rounds start at 1")]
    NewsRound(u32),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TweetKind {
    Post,
    Retweet,
    Reply,
}

impl fmt::Display for TweetKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            TweetKind::Post => "post",
            TweetKind::Retweet => "retweet",
            TweetKind::Reply => "reply",
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Tweet {
    pub id: TweetId,
    pub author: AgentId,
    #[serde(default)]
    pub content: String,
    pub kind: TweetKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub parent_id: Option<TweetId>,
    pub timestamp: NaiveDateTime,
    /// Simulation round of creation; 0 for imported history.
    #[serde(default)]
    pub round: u32,
    #[serde(default)]
    pub like_count: u64,
    #[serde(default)]
    pub retweet_count: u64,
}

impl Tweet {
    fn recency_key(&self) -> (NaiveDateTime, TweetId) {
        (self.timestamp, self.id)
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct FollowGraph {
    users: BTreeSet<AgentId>,
    followees: BTreeMap<AgentId, BTreeSet<AgentId>>,
    followers: BTreeMap<AgentId, BTreeSet<AgentId>>,
}

impl FollowGraph {
    pub fn new() -> Self {
        FollowGraph::default()
    }

    pub fn add_user(&mut self, user: AgentId) {
        self.users.insert(user);
    }

    pub fn contains(&self, user: AgentId) -> bool {
        self.users.contains(&user)
    }

    pub fn users(&self) -> impl Iterator<Item = AgentId> + '_ {
        self.users.iter().copied()
    }

    pub fn follow(&mut self, follower: AgentId, followee: AgentId) -> Result<(), EnvError> {
        if follower == followee {
            return Err(EnvError::SelfLoop(follower));
        }
        for u in [follower, followee] {
            if !self.users.contains(&u) {
                return Err(EnvError::UnknownUser(u));
            }
        }
        self.followees.entry(follower).or_default().insert(followee);
        self.followers.entry(followee).or_default().insert(follower);
        Ok(())
    }

    pub fn followees(&self, user: AgentId) -> impl Iterator<Item = AgentId> + '_ {
        self.followees.get(&user).into_iter().flatten().copied()
    }

    pub fn followers(&self, user: AgentId) -> impl Iterator<Item = AgentId> + '_ {
        self.followers.get(&user).into_iter().flatten().copied()
    }

    pub fn edge_count(&self) -> usize {
        self.followees.values().map(BTreeSet::len).sum()
    }
}

/// Effect of one applied action.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "effect", rename_all = "snake_case")]
pub enum Mutation {
    Created {
        tweet: TweetId,
        kind: TweetKind,
        #[serde(skip_serializing_if = "Option::is_none")]
        parent: Option<TweetId>,
    },
    Liked {
        tweet: TweetId,
    },
    Nothing,
    Rejected {
        reason: String,
    },
}

#[derive(Clone, Debug, Default)]
pub struct TweetStore {
    tweets: BTreeMap<TweetId, Tweet>,
    /// Per-author tweet ids sorted by (timestamp, id).
    by_author: BTreeMap<AgentId, Vec<TweetId>>,
    /// All tweet ids sorted by (timestamp, id).
    global: Vec<TweetId>,
    /// Replies keyed by the author of the tweet replied to.
    replies_to: BTreeMap<AgentId, Vec<TweetId>>,
    next_id: TweetId,
}

impl TweetStore {
    pub fn new() -> Self {
        TweetStore {
            next_id: 1,
            ..TweetStore::default()
        }
    }

    pub fn len(&self) -> usize {
        self.tweets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tweets.is_empty()
    }

    pub fn get(&self, id: TweetId) -> Option<&Tweet> {
        self.tweets.get(&id)
    }

    /// Tweets in id order.
    pub fn iter(&self) -> impl Iterator<Item = &Tweet> {
        self.tweets.values()
    }

    pub fn next_id(&self) -> TweetId {
        self.next_id
    }

    fn sorted_insert(&self, list: &mut Vec<TweetId>, t: &Tweet) {
        let key = t.recency_key();
        let pos = list.partition_point(|id| self.tweets[id].recency_key() <= key);
        list.insert(pos, t.id);
    }

    /// Inserts a tweet with a caller-chosen id (history import). Parents must
    /// already be present, which keeps parent links acyclic.
    pub fn insert(&mut self, tweet: Tweet) -> Result<(), EnvError> {
        if self.tweets.contains_key(&tweet.id) {
            return Err(EnvError::DuplicateTweet(tweet.id));
        }
        let parent_author = match (tweet.kind, tweet.parent_id) {
            (TweetKind::Post, _) => None,
            (kind, None) => return Err(EnvError::ParentRequired { kind, id: tweet.id }),
            (_, Some(p)) => Some(self.tweets.get(&p).ok_or(EnvError::MissingParent(p))?.author),
        };
        let mut by_author = std::mem::take(self.by_author.entry(tweet.author).or_default());
        let mut global = std::mem::take(&mut self.global);
        self.tweets.insert(tweet.id, tweet.clone());
        self.sorted_insert(&mut by_author, &tweet);
        self.sorted_insert(&mut global, &tweet);
        self.by_author.insert(tweet.author, by_author);
        self.global = global;
        if tweet.kind == TweetKind::Reply {
            if let Some(a) = parent_author {
                self.replies_to.entry(a).or_default().push(tweet.id);
            }
        }
        self.next_id = self.next_id.max(tweet.id + 1);
        Ok(())
    }

    fn create(
        &mut self,
        author: AgentId,
        content: String,
        kind: TweetKind,
        parent_id: Option<TweetId>,
        timestamp: NaiveDateTime,
        round: u32,
    ) -> Result<TweetId, EnvError> {
        let id = self.next_id;
        self.insert(Tweet {
            id,
            author,
            content,
            kind,
            parent_id,
            timestamp,
            round,
            like_count: 0,
            retweet_count: 0,
        })?;
        Ok(id)
    }

    fn resolve(&self, raw: &str) -> Result<TweetId, String> {
        let id: TweetId = raw
            .trim()
            .parse()
            .map_err(|_| format!("tweet id `{raw}` is not a number"))?;
        if self.tweets.contains_key(&id) {
            Ok(id)
        } else {
            Err(format!("tweet {id} does not exist"))
        }
    }

    /// Applies a parsed action. Invalid references are rejected without
    /// touching the store.
    pub fn apply_action(&mut self, action: &AgentAction, actor: AgentId, clock: NaiveDateTime, round: u32) -> Mutation {
        let outcome = match action {
            AgentAction::DoNothing => return Mutation::Nothing,
            AgentAction::Post { content } => {
                if content.trim().is_empty() {
                    Err("empty post".to_string())
                } else {
                    self.create(actor, content.clone(), TweetKind::Post, None, clock, round)
                        .map(|id| Mutation::Created {
                            tweet: id,
                            kind: TweetKind::Post,
                            parent: None,
                        })
                        .map_err(|e| e.to_string())
                }
            }
            AgentAction::Retweet {
                content,
                original_tweet_id,
                ..
            } => self.resolve(original_tweet_id).and_then(|parent| {
                let id = self
                    .create(actor, content.clone().unwrap_or_default(), TweetKind::Retweet, Some(parent), clock, round)
                    .map_err(|e| e.to_string())?;
                self.tweets.get_mut(&parent).unwrap().retweet_count += 1;
                Ok(Mutation::Created {
                    tweet: id,
                    kind: TweetKind::Retweet,
                    parent: Some(parent),
                })
            }),
            AgentAction::Reply {
                content,
                original_tweet_id,
                ..
            } => {
                if content.trim().is_empty() {
                    Err("empty reply".to_string())
                } else {
                    self.resolve(original_tweet_id).and_then(|parent| {
                        let id = self
                            .create(actor, content.clone(), TweetKind::Reply, Some(parent), clock, round)
                            .map_err(|e| e.to_string())?;
                        Ok(Mutation::Created {
                            tweet: id,
                            kind: TweetKind::Reply,
                            parent: Some(parent),
                        })
                    })
                }
            }
            AgentAction::Like { original_tweet_id, .. } => self.resolve(original_tweet_id).map(|id| {
                self.tweets.get_mut(&id).unwrap().like_count += 1;
                Mutation::Liked { tweet: id }
            }),
        };
        outcome.unwrap_or_else(|reason| {
            log::debug!("rejected action of {actor}: {reason}");
            Mutation::Rejected { reason }
        })
    }

    fn newest_of<'a>(&'a self, ids: &'a [TweetId], k: usize) -> impl Iterator<Item = &'a Tweet> + 'a {
        ids.iter().rev().take(k).map(|id| &self.tweets[id])
    }

    /// The `k` most recent tweets by `user` and the users it follows, newest
    /// first; equal timestamps are ordered by descending id.
    pub fn personal_timeline(&self, graph: &FollowGraph, user: AgentId, k: usize) -> Result<Vec<&Tweet>, EnvError> {
        if !graph.contains(user) {
            return Err(EnvError::UnknownUser(user));
        }
        let mut candidates: Vec<&Tweet> = std::iter::once(user)
            .chain(graph.followees(user))
            .filter_map(|a| self.by_author.get(&a))
            .flat_map(|ids| self.newest_of(ids, k))
            .collect();
        candidates.sort_by_key(|t| std::cmp::Reverse(t.recency_key()));
        candidates.truncate(k);
        Ok(candidates)
    }

    pub fn public_timeline(&self, k: usize) -> Vec<&Tweet> {
        self.newest_of(&self.global, k).collect()
    }

    /// Most recent tweets containing `hashtag` (case-insensitive).
    pub fn hashtag_timeline(&self, hashtag: &str, k: usize) -> Vec<&Tweet> {
        let tag = hashtag.to_lowercase();
        self.global
            .iter()
            .rev()
            .map(|id| &self.tweets[id])
            .filter(|t| t.content.to_lowercase().contains(&tag))
            .take(k)
            .collect()
    }

    /// Replies to any tweet authored by `user`, created in `since_round` or
    /// later, oldest first.
    pub fn notifications_for(&self, user: AgentId, since_round: u32) -> Vec<&Tweet> {
        self.replies_to
            .get(&user)
            .into_iter()
            .flatten()
            .map(|id| &self.tweets[id])
            .filter(|t| t.round >= since_round && t.author != user)
            .collect()
    }

    /// One JSON object per line, in id order.
    pub fn write_jsonl<W: Write>(&self, mut w: W) -> Result<(), EnvError> {
        for t in self.tweets.values() {
            serde_json::to_writer(&mut w, t).map_err(std::io::Error::from)?;
            w.write_all(b"\n")?;
        }
        Ok(())
    }

    pub fn read_jsonl<R: BufRead>(r: R) -> Result<TweetStore, EnvError> {
        let mut rows = Vec::new();
        for (i, line) in r.lines().enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let t: Tweet = serde_json::from_str(&line).map_err(|e| EnvError::Parse {
                line: i + 1,
                message: e.to_string(),
            })?;
            rows.push((i + 1, t));
        }
        // Parents precede children in id order.
        rows.sort_by_key(|(_, t)| t.id);
        let mut store = TweetStore::new();
        for (line, t) in rows {
            store.insert(t).map_err(|e| EnvError::Parse {
                line,
                message: e.to_string(),
            })?;
        }
        Ok(store)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NewsItem {
    pub round: u32,
    pub text: String,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct NewsSchedule {
    items: Vec<NewsItem>,
}

impl NewsSchedule {
    pub fn new(mut items: Vec<NewsItem>) -> Result<Self, EnvError> {
        if let Some(bad) = items.iter().find(|n| n.round < 1) {
            return Err(EnvError::NewsRound(bad.round));
        }
        items.sort_by_key(|n| n.round);
        Ok(NewsSchedule { items })
    }

    pub fn from_json(text: &str) -> Result<Self, EnvError> {
        let items: Vec<NewsItem> = serde_json::from_str(text).map_err(|e| EnvError::Parse {
            line: e.line(),
            message: e.to_string(),
        })?;
        NewsSchedule::new(items)
    }

    pub fn items(&self) -> &[NewsItem] {
        &self.items
    }

    /// Items injected exactly at `round`.
    pub fn injected_at(&self, round: u32) -> impl Iterator<Item = &NewsItem> {
        self.items.iter().filter(move |n| n.round == round)
    }

    /// News shown to core agents in `round`: the items of the latest round
    /// at or before it, so an event stays current until superseded.
    pub fn current(&self, round: u32) -> Vec<&NewsItem> {
        let latest = self.items.iter().filter(|n| n.round <= round).map(|n| n.round).max();
        match latest {
            Some(r) => self.items.iter().filter(|n| n.round == r).collect(),
            None => Vec::new(),
        }
    }
}

/// Simulated wall clock: round `r` happens at `start + r * step`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Clock {
    pub start: NaiveDateTime,
    pub step_hours: i64,
}

impl Clock {
    pub fn at(&self, round: u32) -> NaiveDateTime {
        self.start + Duration::hours(self.step_hours * i64::from(round))
    }
}

impl Default for Clock {
    fn default() -> Self {
        Clock {
            start: NaiveDateTime::parse_from_str("2018-01-01 00:00:00", TIME_FORMAT).unwrap(),
            step_hours: 12,
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FeedMode {
    #[default]
    Default,
    /// S1: replace part of the feed with opposing tweets.
    Opposite,
    /// S2: replace part of the feed with near-neutral tweets.
    Neutral,
    /// S3: add a shared hashtag space to every prompt.
    PublicHashtag,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FeedPolicy {
    pub mode: FeedMode,
    pub fraction: f64,
    pub neutral_threshold: f64,
    pub hashtag: String,
    /// How many recent public tweets are searched for replacements.
    pub search_depth: usize,
}

impl Default for FeedPolicy {
    fn default() -> Self {
        FeedPolicy {
            mode: FeedMode::Default,
            fraction: 0.3,
            neutral_threshold: 0.1,
            hashtag: "#MeToo".into(),
            search_depth: 200,
        }
    }
}

impl FeedPolicy {
    pub fn of(mode: FeedMode) -> Self {
        FeedPolicy {
            mode,
            ..FeedPolicy::default()
        }
    }
}

/// Timeline after the feed policy, plus the S3 public space.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Feed<'a> {
    pub timeline: Vec<&'a Tweet>,
    pub public_space: Option<Vec<&'a Tweet>>,
}

/// Adjusts a candidate timeline of depth `k`. `score` returns the annotated
/// attitude of a tweet when known. Replacement slots are
/// `ceil(fraction * k)`; they fill empty slots first, then the oldest ones.
pub fn apply_feed_policy<'a>(
    policy: &FeedPolicy,
    user: AgentId,
    user_attitude: f64,
    candidate: Vec<&'a Tweet>,
    k: usize,
    store: &'a TweetStore,
    score: &dyn Fn(&Tweet) -> Option<f64>,
) -> Feed<'a> {
    let qualifies: Box<dyn Fn(f64) -> bool> = match policy.mode {
        FeedMode::Default => return Feed { timeline: candidate, public_space: None },
        FeedMode::PublicHashtag => {
            let space = store.hashtag_timeline(&policy.hashtag, k);
            return Feed {
                timeline: candidate,
                public_space: Some(space),
            };
        }
        FeedMode::Opposite => {
            let sign = user_attitude.signum();
            if user_attitude == 0.0 {
                return Feed { timeline: candidate, public_space: None };
            }
            Box::new(move |s: f64| s * sign < 0.0)
        }
        FeedMode::Neutral => {
            let th = policy.neutral_threshold;
            Box::new(move |s: f64| s.abs() < th)
        }
    };
    let slots = (policy.fraction.clamp(0.0, 1.0) * k as f64).ceil() as usize;
    if slots == 0 {
        return Feed { timeline: candidate, public_space: None };
    }
    let present: HashSet<TweetId> = candidate.iter().map(|t| t.id).collect();
    let picks: Vec<&Tweet> = store
        .public_timeline(policy.search_depth)
        .into_iter()
        .filter(|t| t.author != user && !present.contains(&t.id))
        .filter(|t| score(t).is_some_and(&qualifies))
        .take(slots)
        .collect();
    let mut timeline = candidate;
    timeline.sort_by_key(|t| std::cmp::Reverse(t.recency_key()));
    for p in picks {
        if timeline.len() >= k {
            timeline.pop();
        }
        timeline.push(p);
    }
    timeline.sort_by_key(|t| std::cmp::Reverse(t.recency_key()));
    Feed {
        timeline,
        public_space: None,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn t0() -> NaiveDateTime {
        Clock::default().start
    }

    fn post(content: &str) -> AgentAction {
        AgentAction::Post { content: content.into() }
    }

    fn graph(n: u64) -> FollowGraph {
        let mut g = FollowGraph::new();
        for i in 1..=n {
            g.add_user(AgentId(i));
        }
        g
    }

    fn id_of(m: &Mutation) -> TweetId {
        match m {
            Mutation::Created { tweet, .. } => *tweet,
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn likes_accumulate() {
        let mut s = TweetStore::new();
        let id = id_of(&s.apply_action(&post("hi"), AgentId(1), t0(), 1));
        let like = AgentAction::Like {
            author: "a".into(),
            original_tweet_id: id.to_string(),
        };
        s.apply_action(&like, AgentId(2), t0(), 1);
        s.apply_action(&like, AgentId(3), t0(), 1);
        assert_eq!(s.get(id).unwrap().like_count, 2);
    }

    #[test]
    fn bare_retweet_creates_empty_tweet() {
        let mut s = TweetStore::new();
        s.insert(Tweet {
            id: 356,
            author: AgentId(7),
            content: "original".into(),
            kind: TweetKind::Post,
            parent_id: None,
            timestamp: t0(),
            round: 0,
            like_count: 0,
            retweet_count: 0,
        })
        .unwrap();
        let rt = AgentAction::Retweet {
            content: None,
            author: "T***x".into(),
            original_tweet_id: "356".into(),
            original_tweet: "original".into(),
        };
        let m = s.apply_action(&rt, AgentId(1), t0(), 1);
        let id = id_of(&m);
        assert!(id > 356);
        let t = s.get(id).unwrap();
        assert_eq!((t.kind, t.content.as_str(), t.parent_id), (TweetKind::Retweet, "", Some(356)));
        assert_eq!(s.get(356).unwrap().retweet_count, 1);
    }

    #[test]
    fn do_nothing_and_dangling_parent() {
        let mut s = TweetStore::new();
        assert_eq!(s.apply_action(&AgentAction::DoNothing, AgentId(1), t0(), 1), Mutation::Nothing);
        let reply = AgentAction::Reply {
            content: "x".into(),
            author: "b".into(),
            original_tweet_id: "99".into(),
        };
        assert!(matches!(s.apply_action(&reply, AgentId(1), t0(), 1), Mutation::Rejected { .. }));
        assert!(s.is_empty());
    }

    #[test]
    fn personal_timeline_contract() {
        let mut g = graph(3);
        let mut s = TweetStore::new();
        s.apply_action(&post("a1"), AgentId(1), t0(), 1);
        s.apply_action(&post("a2"), AgentId(1), t0() + Duration::hours(1), 1);
        s.apply_action(&post("c1"), AgentId(3), t0() + Duration::hours(2), 1);
        let tl = s.personal_timeline(&g, AgentId(1), 5).unwrap();
        assert_eq!(tl.iter().map(|t| t.content.as_str()).collect::<Vec<_>>(), ["a2", "a1"]);
        g.follow(AgentId(1), AgentId(3)).unwrap();
        for i in 0..6 {
            s.apply_action(&post(&format!("x{i}")), AgentId(3), t0(), 1);
        }
        let tl = s.personal_timeline(&g, AgentId(1), 5).unwrap();
        assert_eq!(tl.len(), 5);
        assert_eq!(tl[0].content, "c1");
        // Same timestamp: higher id first.
        assert!(tl[3].timestamp == tl[4].timestamp && tl[3].id > tl[4].id);
        assert!(s.personal_timeline(&g, AgentId(42), 5).is_err());
        assert!(g.follow(AgentId(2), AgentId(2)).is_err());
    }

    #[test]
    fn public_timeline_contract() {
        let mut s = TweetStore::new();
        assert!(s.public_timeline(5).is_empty());
        for i in 0..3 {
            s.apply_action(&post(&format!("p{i}")), AgentId(1), t0() + Duration::hours(i), 1);
        }
        let tl = s.public_timeline(10);
        assert_eq!(tl.iter().map(|t| t.content.as_str()).collect::<Vec<_>>(), ["p2", "p1", "p0"]);
    }

    #[test]
    fn notifications_only_replies_to_own_tweets() {
        let mut s = TweetStore::new();
        let mine = id_of(&s.apply_action(&post("mine"), AgentId(1), t0(), 1));
        let theirs = id_of(&s.apply_action(&post("theirs"), AgentId(2), t0(), 1));
        assert!(s.notifications_for(AgentId(1), 1).is_empty());
        let reply = |id: TweetId| AgentAction::Reply {
            content: "re".into(),
            author: "x".into(),
            original_tweet_id: id.to_string(),
        };
        s.apply_action(&reply(mine), AgentId(3), t0(), 2);
        s.apply_action(&reply(theirs), AgentId(3), t0(), 2);
        let n = s.notifications_for(AgentId(1), 2);
        assert_eq!(n.len(), 1);
        assert_eq!(n[0].parent_id, Some(mine));
        assert!(s.notifications_for(AgentId(1), 3).is_empty());
    }

    #[test]
    fn jsonl_round_trip() {
        let mut s = TweetStore::new();
        let p = id_of(&s.apply_action(&post("hello"), AgentId(1), t0(), 1));
        s.apply_action(
            &AgentAction::Reply {
                content: "yo".into(),
                author: "a".into(),
                original_tweet_id: p.to_string(),
            },
            AgentId(2),
            t0(),
            1,
        );
        let mut buf = Vec::new();
        s.write_jsonl(&mut buf).unwrap();
        let back = TweetStore::read_jsonl(&buf[..]).unwrap();
        assert_eq!(back.iter().cloned().collect::<Vec<_>>(), s.iter().cloned().collect::<Vec<_>>());
        assert!(matches!(
            TweetStore::read_jsonl(&b"{\"id\":1}\n"[..]),
            Err(EnvError::Parse { line: 1, .. })
        ));
    }

    #[test]
    fn news_schedule() {
        let n = NewsSchedule::from_json(r#"[{"round":3,"text":"b"},{"round":1,"text":"a"}]"#).unwrap();
        assert!(n.current(0).is_empty());
        assert_eq!(n.current(2)[0].text, "a");
        assert_eq!(n.current(5)[0].text, "b");
        assert_eq!(n.injected_at(3).count(), 1);
        assert!(NewsSchedule::from_json(r#"[{"round":0,"text":"a"}]"#).is_err());
    }

    fn scored_store() -> (TweetStore, BTreeMap<TweetId, f64>) {
        let mut s = TweetStore::new();
        let mut scores = BTreeMap::new();
        for (i, v) in [0.6, 0.7, -0.5, 0.05].into_iter().enumerate() {
            let id = id_of(&s.apply_action(&post(&format!("t{i} #MeToo")), AgentId(i as u64 + 2), t0(), 1));
            scores.insert(id, v);
        }
        (s, scores)
    }

    #[test]
    fn feed_policies() {
        let (s, scores) = scored_store();
        let score = |t: &Tweet| scores.get(&t.id).copied();
        let cand = || vec![s.get(1).unwrap(), s.get(2).unwrap()];
        let d = apply_feed_policy(&FeedPolicy::default(), AgentId(1), 0.8, cand(), 5, &s, &score);
        assert_eq!(d.timeline, cand());
        let mut zero = FeedPolicy::of(FeedMode::Opposite);
        zero.fraction = 0.0;
        assert_eq!(apply_feed_policy(&zero, AgentId(1), 0.8, cand(), 5, &s, &score).timeline, cand());
        let s1 = apply_feed_policy(&FeedPolicy::of(FeedMode::Opposite), AgentId(1), 0.8, cand(), 5, &s, &score);
        assert!(s1.timeline.iter().any(|t| t.id == 3));
        assert!(s1.timeline.iter().all(|t| t.id != 4));
        let s2 = apply_feed_policy(&FeedPolicy::of(FeedMode::Neutral), AgentId(1), 0.8, cand(), 5, &s, &score);
        assert!(s2.timeline.iter().any(|t| t.id == 4));
        let s3 = apply_feed_policy(&FeedPolicy::of(FeedMode::PublicHashtag), AgentId(1), 0.8, cand(), 5, &s, &score);
        assert_eq!(s3.timeline, cand());
        assert_eq!(s3.public_space.unwrap().len(), 4);
    }

    #[test]
    fn full_feed_replaces_oldest_slot() {
        let (s, scores) = scored_store();
        let score = |t: &Tweet| scores.get(&t.id).copied();
        let mut p = FeedPolicy::of(FeedMode::Opposite);
        p.fraction = 0.5;
        let cand = vec![s.get(2).unwrap(), s.get(1).unwrap()];
        let f = apply_feed_policy(&p, AgentId(1), 0.8, cand, 2, &s, &score);
        assert_eq!(f.timeline.iter().map(|t| t.id).collect::<Vec<_>>(), [3, 2]);
    }

    proptest! {
        #[test]
        fn timelines_are_subsets_and_counters_match(ops in prop::collection::vec((1u64..5, 0u8..4, 0usize..20), 1..60)) {
            let mut g = graph(4);
            g.follow(AgentId(1), AgentId(2)).unwrap();
            g.follow(AgentId(1), AgentId(3)).unwrap();
            let mut s = TweetStore::new();
            let mut likes: BTreeMap<TweetId, u64> = BTreeMap::new();
            let mut rts: BTreeMap<TweetId, u64> = BTreeMap::new();
            for (i, (actor, op, target)) in ops.into_iter().enumerate() {
                let clock = t0() + Duration::hours(i as i64 / 3);
                let target = (target as u64 % s.next_id().max(1)).to_string();
                let action = match op {
                    0 => post("p"),
                    1 => AgentAction::Like { author: "a".into(), original_tweet_id: target },
                    2 => AgentAction::Retweet { content: None, author: "a".into(), original_tweet_id: target, original_tweet: String::new() },
                    _ => AgentAction::Reply { content: "r".into(), author: "a".into(), original_tweet_id: target },
                };
                let before = s.next_id();
                match s.apply_action(&action, AgentId(actor), clock, 1) {
                    Mutation::Liked { tweet } => *likes.entry(tweet).or_default() += 1,
                    Mutation::Created { tweet, kind, parent } => {
                        prop_assert!(tweet >= before);
                        if let Some(p) = parent { prop_assert!(p < tweet); }
                        if kind == TweetKind::Retweet { *rts.entry(parent.unwrap()).or_default() += 1; }
                    }
                    _ => {}
                }
            }
            for t in s.iter() {
                prop_assert_eq!(t.like_count, likes.get(&t.id).copied().unwrap_or(0));
                prop_assert_eq!(t.retweet_count, rts.get(&t.id).copied().unwrap_or(0));
            }
            let all: HashSet<TweetId> = s.public_timeline(usize::MAX).iter().map(|t| t.id).collect();
            prop_assert_eq!(all.len(), s.len());
            for t in s.personal_timeline(&g, AgentId(1), 7).unwrap() {
                prop_assert!(all.contains(&t.id));
                prop_assert!([1, 2, 3].contains(&t.author.0));
            }
        }
    }
}
