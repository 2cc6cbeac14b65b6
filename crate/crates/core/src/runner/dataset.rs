use std::collections::BTreeSet;
use std::fs::File;
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};

use chrono::NaiveDateTime;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use super::output::read_trace_csv;
use super::RunError;
use crate::agent::CoreProfile;
use crate::annotate::{ContentType, StanceLabel};
use crate::environment::{NewsSchedule, TweetStore};
use crate::types::AgentId;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct UserRecord {
    pub id: AgentId,
    #[serde(default)]
    pub is_core: bool,
    pub initial_attitude: f64,
    /// Required for core users.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub profile: Option<CoreProfile>,
    /// Historical tweets of a core user, seeded into its memory.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub history: Vec<String>,
    /// Display name for ordinary users; core users use the profile name.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
}

impl UserRecord {
    pub fn display_name(&self) -> String {
        match (&self.profile, &self.name) {
            (Some(p), _) => p.name.clone(),
            (None, Some(n)) => n.clone(),
            (None, None) => format!("u***{}", self.id.0 % 10),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct EdgeRecord {
    pub follower: AgentId,
    pub followee: AgentId,
}

/// A tweet as it appeared on the user's page or in notifications.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ContextTweet {
    pub id: u64,
    pub author: String,
    pub content: String,
    pub time: NaiveDateTime,
}

/// Authentic context of one observed response.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MicroContext {
    pub time: Option<NaiveDateTime>,
    pub news: Vec<String>,
    pub memory: Vec<String>,
    pub timeline: Vec<ContextTweet>,
    pub notifications: Vec<ContextTweet>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TruthBehavior {
    Post,
    Retweet,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MicroTruth {
    pub behavior: TruthBehavior,
    /// Posted text, or the retweeted text for a retweet.
    pub text: String,
    /// Annotated when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub stance: Option<StanceLabel>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub content_type: Option<ContentType>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MicroPair {
    pub user: AgentId,
    #[serde(default)]
    pub context: MicroContext,
    pub truth: MicroTruth,
}

/// Validated simulation input.
#[derive(Clone, Debug, Default)]
pub struct Dataset {
    /// Sorted by id.
    pub users: Vec<UserRecord>,
    pub edges: Vec<(AgentId, AgentId)>,
    pub news: NewsSchedule,
    pub micro_pairs: Vec<MicroPair>,
    /// Pre-existing tweets visible from round 1.
    pub history: TweetStore,
    /// Empirical per-round (mean, std), aligned round t to bucket t.
    pub empirical: Option<Vec<(f64, f64)>>,
}

/// File names inside a dataset directory. Only `users.jsonl` is required.
#[derive(Clone, Debug)]
pub struct DatasetPaths {
    pub users: PathBuf,
    pub edges: PathBuf,
    pub news: PathBuf,
    pub micro_pairs: PathBuf,
    pub tweets: PathBuf,
    pub empirical: PathBuf,
}

impl DatasetPaths {
    pub fn in_dir(dir: &Path) -> Self {
        DatasetPaths {
            users: dir.join("users.jsonl"),
            edges: dir.join("edges.jsonl"),
            news: dir.join("news.json"),
            micro_pairs: dir.join("micro_pairs.jsonl"),
            tweets: dir.join("tweets.jsonl"),
            empirical: dir.join("empirical.csv"),
        }
    }
}

fn file_name(path: &Path) -> String {
    path.file_name().map_or_else(|| path.display().to_string(), |n| n.to_string_lossy().into_owned())
}

/// Parses one JSON object per non-blank line; returns (line number, value).
fn read_jsonl<T: DeserializeOwned>(path: &Path) -> Result<Vec<(usize, T)>, RunError> {
    let reader = BufReader::new(File::open(path).map_err(|_| RunError::MissingFile(path.to_path_buf()))?);
    let mut out = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let v = serde_json::from_str(&line).map_err(|e| RunError::Schema {
            file: file_name(path),
            line: i + 1,
            message: e.to_string(),
        })?;
        out.push((i + 1, v));
    }
    Ok(out)
}

pub fn load_dataset(dir: &Path) -> Result<Dataset, RunError> {
    let paths = DatasetPaths::in_dir(dir);
    let users = read_jsonl::<UserRecord>(&paths.users)?;
    let edges = if paths.edges.exists() {
        read_jsonl::<EdgeRecord>(&paths.edges)?
    } else {
        Vec::new()
    };
    let micro = if paths.micro_pairs.exists() {
        read_jsonl::<MicroPair>(&paths.micro_pairs)?
    } else {
        Vec::new()
    };
    let news = if paths.news.exists() {
        NewsSchedule::from_json(&std::fs::read_to_string(&paths.news)?).map_err(|e| RunError::Schema {
            file: file_name(&paths.news),
            line: 0,
            message: e.to_string(),
        })?
    } else {
        NewsSchedule::default()
    };
    let history = if paths.tweets.exists() {
        TweetStore::read_jsonl(BufReader::new(File::open(&paths.tweets)?))?
    } else {
        TweetStore::new()
    };
    let empirical = if paths.empirical.exists() {
        Some(read_trace_csv(&paths.empirical)?)
    } else {
        None
    };
    Dataset::build(users, edges, news, micro, history, empirical, &paths)
}

impl Dataset {
    /// Validates in-memory records; line numbers are 1-based positions.
    pub fn new(users: Vec<UserRecord>, edges: Vec<(AgentId, AgentId)>, news: NewsSchedule) -> Result<Self, RunError> {
        let paths = DatasetPaths::in_dir(Path::new(""));
        Dataset::build(
            users.into_iter().enumerate().map(|(i, u)| (i + 1, u)).collect(),
            edges
                .into_iter()
                .enumerate()
                .map(|(i, (follower, followee))| (i + 1, EdgeRecord { follower, followee }))
                .collect(),
            news,
            Vec::new(),
            TweetStore::new(),
            None,
            &paths,
        )
    }

    fn build(
        users: Vec<(usize, UserRecord)>,
        edges: Vec<(usize, EdgeRecord)>,
        news: NewsSchedule,
        micro: Vec<(usize, MicroPair)>,
        history: TweetStore,
        empirical: Option<Vec<(f64, f64)>>,
        paths: &DatasetPaths,
    ) -> Result<Self, RunError> {
        let uf = file_name(&paths.users);
        let mut ids = BTreeSet::new();
        let mut core = BTreeSet::new();
        for (line, u) in &users {
            let schema = |message: String| RunError::Schema {
                file: uf.clone(),
                line: *line,
                message,
            };
            if !ids.insert(u.id) {
                return Err(schema(format!("duplicate user id {}", u.id)));
            }
            if !(u.initial_attitude.is_finite() && (-1.0..=1.0).contains(&u.initial_attitude)) {
                return Err(RunError::Range {
                    file: uf.clone(),
                    line: *line,
                    what: "initial_attitude",
                    value: u.initial_attitude,
                });
            }
            if u.is_core {
                if u.profile.is_none() {
                    return Err(schema(format!("core user {} has no profile", u.id)));
                }
                core.insert(u.id);
            }
        }
        let ef = file_name(&paths.edges);
        for (line, e) in &edges {
            for id in [e.follower, e.followee] {
                if !ids.contains(&id) {
                    return Err(RunError::UnknownUser {
                        file: ef.clone(),
                        line: *line,
                        id: id.0,
                    });
                }
            }
            if e.follower == e.followee {
                return Err(RunError::Schema {
                    file: ef.clone(),
                    line: *line,
                    message: format!("user {} follows itself", e.follower),
                });
            }
        }
        let mf = file_name(&paths.micro_pairs);
        for (line, p) in &micro {
            if !ids.contains(&p.user) {
                return Err(RunError::UnknownUser {
                    file: mf.clone(),
                    line: *line,
                    id: p.user.0,
                });
            }
            if !core.contains(&p.user) {
                return Err(RunError::Schema {
                    file: mf.clone(),
                    line: *line,
                    message: format!("user {} is not a core user", p.user),
                });
            }
        }
        let tf = file_name(&paths.tweets);
        for t in history.iter() {
            if !ids.contains(&t.author) {
                return Err(RunError::UnknownUser {
                    file: tf.clone(),
                    line: 0,
                    id: t.author.0,
                });
            }
        }
        let mut users: Vec<UserRecord> = users.into_iter().map(|(_, u)| u).collect();
        users.sort_by_key(|u| u.id);
        Ok(Dataset {
            users,
            edges: edges.into_iter().map(|(_, e)| (e.follower, e.followee)).collect(),
            news,
            micro_pairs: micro.into_iter().map(|(_, p)| p).collect(),
            history,
            empirical,
        })
    }

    pub fn core_users(&self) -> impl Iterator<Item = &UserRecord> {
        self.users.iter().filter(|u| u.is_core)
    }

    pub fn ordinary_users(&self) -> impl Iterator<Item = &UserRecord> {
        self.users.iter().filter(|u| !u.is_core)
    }

    pub fn user(&self, id: AgentId) -> Option<&UserRecord> {
        self.users
            .binary_search_by_key(&id, |u| u.id)
            .ok()
            .map(|i| &self.users[i])
    }

    /// Writes the dataset files into `dir`.
    pub fn write_to(&self, dir: &Path) -> Result<(), RunError> {
        std::fs::create_dir_all(dir)?;
        let paths = DatasetPaths::in_dir(dir);
        let mut w = std::io::BufWriter::new(File::create(&paths.users)?);
        for u in &self.users {
            serde_json::to_writer(&mut w, u)?;
            w.write_all(b"\n")?;
        }
        w.flush()?;
        let mut w = std::io::BufWriter::new(File::create(&paths.edges)?);
        for &(follower, followee) in &self.edges {
            serde_json::to_writer(&mut w, &EdgeRecord { follower, followee })?;
            w.write_all(b"\n")?;
        }
        w.flush()?;
        std::fs::write(&paths.news, serde_json::to_string_pretty(&self.news)?)?;
        if !self.micro_pairs.is_empty() {
            let mut w = std::io::BufWriter::new(File::create(&paths.micro_pairs)?);
            for p in &self.micro_pairs {
                serde_json::to_writer(&mut w, p)?;
                w.write_all(b"\n")?;
            }
            w.flush()?;
        }
        if !self.history.is_empty() {
            self.history.write_jsonl(std::io::BufWriter::new(File::create(&paths.tweets)?))?;
        }
        if let Some(stats) = &self.empirical {
            super::output::write_trace_csv(&paths.empirical, stats)?;
        }
        Ok(())
    }
}
