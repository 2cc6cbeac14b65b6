//! Synthetic datasets for smoke runs, benchmarks and tests.

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::dataset::{ContextTweet, Dataset, MicroContext, MicroPair, MicroTruth, TruthBehavior, UserRecord};
use crate::agent::{assign_social_tiers, pseudonymize, AccountType, CommunicationRole, CoreProfile};
use crate::environment::{Clock, NewsItem, NewsSchedule, Tweet, TweetKind, TweetStore};
use crate::rng::substream;
use crate::types::AgentId;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SynthSpec {
    pub core: usize,
    pub ordinary: usize,
    pub seed: u64,
    /// Core users each core user follows.
    pub follows: usize,
    /// Core users each ordinary user follows.
    pub audience: usize,
    pub micro_pairs: usize,
}

impl Default for SynthSpec {
    fn default() -> Self {
        SynthSpec {
            core: 30,
            ordinary: 300,
            seed: 0,
            follows: 10,
            audience: 3,
            micro_pairs: 0,
        }
    }
}

const HANDLES: &[&str] = &[
    "emily", "marcus", "sofia", "daniel", "grace", "nadia", "oliver", "priya", "tomas", "lena", "kwame", "yuki",
];
const SUPPORT: &[&str] = &[
    "Proud to stand with every survivor. #MeToo",
    "Believe survivors. This movement matters. #MeToo",
    "So inspiring to see people speak up together.",
];
const OPPOSE: &[&str] = &[
    "This campaign went too far and it is ruining lives.",
    "Another hoax pushed by the media. Ridiculous.",
    "I disagree with this witch hunt.",
];
const NEUTRAL: &[&str] = &[
    "Following the news today.",
    "Interesting discussion on my timeline.",
    "Reading more before I decide what I think.",
];
const NEWS: &[(u32, &str)] = &[
    (1, "A public figure faces new allegations and the hashtag trends worldwide."),
    (5, "Guests at an awards ceremony dress in black in solidarity."),
    (9, "A prominent commentator criticizes the campaign on national television."),
];

fn bank(attitude: f64) -> &'static [&'static str] {
    if attitude > 0.1 {
        SUPPORT
    } else if attitude < -0.1 {
        OPPOSE
    } else {
        NEUTRAL
    }
}

/// Builds a valid dataset. Core users get ids `0..core`, ordinary users the
/// ids after them; attitudes are uniform on [-1, 1].
pub fn generate(spec: &SynthSpec) -> Dataset {
    let mut rng = substream(&[spec.seed, 0x5157]);
    let n = spec.core + spec.ordinary;
    let attitudes: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..=1.0)).collect();
    let activity = assign_social_tiers(&(0..spec.core).map(|_| rng.gen::<f64>()).collect::<Vec<_>>());
    let influence = assign_social_tiers(&(0..spec.core).map(|_| rng.gen::<f64>()).collect::<Vec<_>>());
    let accounts = [
        AccountType::PrivatePerson,
        AccountType::Activist,
        AccountType::Journalist,
        AccountType::Celebrity,
        AccountType::MediaOrganization,
        AccountType::Politician,
    ];

    let mut users = Vec::with_capacity(n);
    for i in 0..spec.core {
        let handle = format!("{}{}", HANDLES[i % HANDLES.len()], i);
        let name = pseudonymize(&handle);
        let role = *CommunicationRole::ALL.choose(&mut rng).unwrap();
        let account = *accounts.choose(&mut rng).unwrap();
        let leaning = ["progressive", "moderate", "conservative"][rng.gen_range(0..3)];
        let history: Vec<String> = (0..2)
            .map(|_| bank(attitudes[i]).choose(&mut rng).unwrap().to_string())
            .collect();
        users.push(UserRecord {
            id: AgentId(i as u64),
            is_core: true,
            initial_attitude: attitudes[i],
            profile: Some(CoreProfile {
                summary: format!("{name} is a {leaning} {account} who {}.", role.description()),
                name,
                gender: ["female", "male", "unknown"][rng.gen_range(0..3)].into(),
                political_leaning: leaning.into(),
                account_type: account,
                activity_tier: activity[i],
                influence_tier: influence[i],
                communication_role: role,
                personal_experience: String::new(),
            }),
            history,
            name: None,
        });
    }
    for (i, &a) in attitudes.iter().enumerate().skip(spec.core) {
        users.push(UserRecord {
            id: AgentId(i as u64),
            is_core: false,
            initial_attitude: a,
            profile: None,
            history: Vec::new(),
            name: None,
        });
    }

    let core_ids: Vec<u64> = (0..spec.core as u64).collect();
    let mut edges = Vec::new();
    for i in 0..n as u64 {
        let want = if (i as usize) < spec.core { spec.follows } else { spec.audience };
        let mut picks: Vec<u64> = core_ids
            .choose_multiple(&mut rng, (want + 1).min(core_ids.len()))
            .copied()
            .filter(|&j| j != i)
            .collect();
        picks.truncate(want);
        picks.sort_unstable();
        edges.extend(picks.into_iter().map(|j| (AgentId(i), AgentId(j))));
    }

    // One seed post per core user so round-1 timelines are not empty.
    let start = Clock::default().at(0);
    let mut history = TweetStore::new();
    for u in users.iter().filter(|u| u.is_core) {
        let id = history.next_id();
        history
            .insert(Tweet {
                id,
                author: u.id,
                content: u.history[0].clone(),
                kind: TweetKind::Post,
                parent_id: None,
                timestamp: start,
                round: 0,
                like_count: 0,
                retweet_count: 0,
            })
            .expect("fresh store");
    }

    let news = NewsSchedule::new(
        NEWS.iter()
            .map(|&(round, text)| NewsItem {
                round,
                text: text.into(),
            })
            .collect(),
    )
    .expect("rounds start at 1");

    let mut micro_pairs = Vec::with_capacity(spec.micro_pairs);
    let seeds: Vec<&Tweet> = history.iter().collect();
    let pairs = if spec.core == 0 { 0 } else { spec.micro_pairs };
    for p in 0..pairs {
        let u = &users[p % spec.core];
        let timeline: Vec<ContextTweet> = seeds
            .choose_multiple(&mut rng, 3.min(seeds.len()))
            .map(|t| ContextTweet {
                id: t.id,
                author: users[t.author.0 as usize].display_name(),
                content: t.content.clone(),
                time: t.timestamp,
            })
            .collect();
        let truth = if rng.gen_bool(0.5) && !timeline.is_empty() {
            MicroTruth {
                behavior: TruthBehavior::Retweet,
                text: timeline[0].content.clone(),
                stance: None,
                content_type: None,
            }
        } else {
            MicroTruth {
                behavior: TruthBehavior::Post,
                text: bank(u.initial_attitude).choose(&mut rng).unwrap().to_string(),
                stance: None,
                content_type: None,
            }
        };
        micro_pairs.push(MicroPair {
            user: u.id,
            context: MicroContext {
                time: Some(start),
                news: vec![NEWS[0].1.to_string()],
                memory: Vec::new(),
                timeline,
                notifications: Vec::new(),
            },
            truth,
        });
    }

    let mut d = Dataset::new(users, edges, news).expect("synthetic dataset is valid");
    d.history = history;
    d.micro_pairs = micro_pairs;
    d
}
