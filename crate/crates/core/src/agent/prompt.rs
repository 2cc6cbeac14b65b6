use chrono::NaiveDateTime;

use crate::environment::TIME_FORMAT;

const PREAMBLE: &str = "You are using the social media Twitter. You might need to perform reaction to the observation. You need to answer what you will do to the observations based on the following information:";

const ACTION_CATALOG: &str = include_str!("action_catalog.txt");

/// A tweet line on the Twitter page or in notifications.
#[derive(Clone, Debug, PartialEq)]
pub struct TimelineEntry {
    pub id: u64,
    pub author: String,
    pub content: String,
    pub time: NaiveDateTime,
}

impl TimelineEntry {
    pub fn render(&self) -> String {
        format!(
            "tweet id: {} [{}]: {} --Post Time: {}",
            self.id,
            self.author,
            self.content,
            self.time.format(TIME_FORMAT)
        )
    }
}

/// Shared discussion space shown under the public-hashtag intervention.
#[derive(Clone, Debug, PartialEq)]
pub struct PublicSpace {
    pub hashtag: String,
    pub tweets: Vec<TimelineEntry>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct PromptContext {
    pub name: String,
    pub summary: String,
    pub time: NaiveDateTime,
    pub news: Vec<String>,
    pub personal_experience: String,
    pub memory: Vec<String>,
    pub timeline: Vec<TimelineEntry>,
    pub notifications: Vec<TimelineEntry>,
    pub public_space: Option<PublicSpace>,
}

fn lines(entries: &[TimelineEntry]) -> String {
    entries.iter().map(TimelineEntry::render).collect::<Vec<_>>().join("\n")
}

/// Renders the action prompt. Pure: identical contexts give identical bytes.
pub fn assemble_prompt(ctx: &PromptContext) -> String {
    let news = ctx.news.iter().map(|n| format!("\"{n}\"")).collect::<Vec<_>>().join(" ");
    let mut out = String::new();
    out.push_str(PREAMBLE);
    out.push('\n');
    out.push_str(&format!("(1) You are {}. {}\n", ctx.name, ctx.summary));
    out.push_str(&format!("(2) Current time is {}\n", ctx.time.format(TIME_FORMAT)));
    out.push_str(&format!("(3) The news you got is {news}\n"));
    out.push_str(&format!("(4) Your personal experience is {}\n", ctx.personal_experience));
    out.push_str(&format!("(5) Your recent memory is {}\n", ctx.memory.join("\n")));
    out.push_str(&format!("(6) The twitter page you can see is {}\n", lines(&ctx.timeline)));
    out.push_str(&format!("(7) The notifications you can see are {}\n", lines(&ctx.notifications)));
    if let Some(space) = &ctx.public_space {
        out.push_str(&format!(
            "(8) The public space for {} you can see is {}\n",
            space.hashtag,
            lines(&space.tweets)
        ));
        out.push_str(&format!(
            "You are encouraged to join the public debate by posting with {}.\n",
            space.hashtag
        ));
    }
    out.push('\n');
    out.push_str(ACTION_CATALOG);
    out.push('\n');
    out.push_str(&format!("Based on the above history, what will you, {}, do next?", ctx.name));
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ctx() -> PromptContext {
        let t = |s| NaiveDateTime::parse_from_str(s, TIME_FORMAT).unwrap();
        PromptContext {
            name: "e***1".into(),
            summary: "e***1 is an activist.".into(),
            time: t("2018-01-07 12:00:00"),
            news: vec!["Guests wore black.".into()],
            personal_experience: "e***1 leans progressive.".into(),
            memory: vec!["[g***n]: hello".into(), "[s***e]: world".into()],
            timeline: vec![TimelineEntry {
                id: 356,
                author: "T***x".into(),
                content: "Inspiring. #MeToo".into(),
                time: t("2018-01-07 04:00:00"),
            }],
            notifications: vec![],
            public_space: None,
        }
    }

    #[test]
    fn layout() {
        let p = assemble_prompt(&ctx());
        assert!(p.starts_with(PREAMBLE));
        assert!(p.contains("\n(1) You are e***1. e***1 is an activist.\n(2) Current time is 2018-01-07 12:00:00\n"));
        assert!(p.contains("(3) The news you got is \"Guests wore black.\"\n"));
        assert!(p.contains("(5) Your recent memory is [g***n]: hello\n[s***e]: world\n"));
        assert!(p.contains(
            "(6) The twitter page you can see is tweet id: 356 [T***x]: Inspiring. #MeToo --Post Time: 2018-01-07 04:00:00\n"
        ));
        assert!(p.contains("(7) The notifications you can see are \n\nIn terms of how you actually perform the action"));
        assert!(p.contains("Action: retweet(content=\"yyy\", author=\"zzz\", original_tweet_id=\"0\", original_tweet=\"kkk\")"));
        assert!(p.ends_with("Remember only write one function call after `Action:`.\nBased on the above history, what will you, e***1, do next?"));
        let order: Vec<usize> = (1..=7).map(|i| p.find(&format!("({i}) ")).unwrap()).collect();
        assert!(order.windows(2).all(|w| w[0] < w[1]));
        assert_eq!(p, assemble_prompt(&ctx()));
    }

    #[test]
    fn public_space_section() {
        let mut c = ctx();
        c.public_space = Some(PublicSpace {
            hashtag: "#MeToo".into(),
            tweets: c.timeline.clone(),
        });
        let p = assemble_prompt(&c);
        let seven = p.find("(7) ").unwrap();
        let eight = p.find("(8) The public space for #MeToo you can see is tweet id: 356").unwrap();
        assert!(seven < eight && eight < p.find("In terms of how").unwrap());
    }
}
