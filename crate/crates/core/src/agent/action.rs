use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

/// One core-agent decision, mirroring the callable functions in the prompt.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum AgentAction {
    DoNothing,
    Post {
        content: String,
    },
    Retweet {
        content: Option<String>,
        author: String,
        original_tweet_id: String,
        original_tweet: String,
    },
    Reply {
        content: String,
        author: String,
        original_tweet_id: String,
    },
    Like {
        author: String,
        original_tweet_id: String,
    },
}

impl AgentAction {
    pub fn name(&self) -> &'static str {
        match self {
            AgentAction::DoNothing => "do_nothing",
            AgentAction::Post { .. } => "post",
            AgentAction::Retweet { .. } => "retweet",
            AgentAction::Reply { .. } => "reply",
            AgentAction::Like { .. } => "like",
        }
    }

    /// Text the agent itself wrote, if any.
    pub fn own_content(&self) -> Option<&str> {
        match self {
            AgentAction::Post { content } | AgentAction::Reply { content, .. } => Some(content),
            AgentAction::Retweet { content: Some(c), .. } if !c.is_empty() => Some(c),
            _ => None,
        }
    }
}

fn quote(s: &str) -> String {
    let mut out = String::with_capacity(s.len() + 2);
    out.push('"');
    for c in s.chars() {
        match c {
            '"' => out.push_str("\\\""),
            '\\' => out.push_str("\\\\"),
            '\n' => out.push_str("\\n"),
            '\r' => out.push_str("\\r"),
            '\t' => out.push_str("\\t"),
            c => out.push(c),
        }
    }
    out.push('"');
    out
}

/// The call form used after `Action:`.
pub fn format_action(action: &AgentAction) -> String {
    let mut s = String::new();
    match action {
        AgentAction::DoNothing => s.push_str("do_nothing()"),
        AgentAction::Post { content } => {
            let _ = write!(s, "post(content={})", quote(content));
        }
        AgentAction::Retweet {
            content,
            author,
            original_tweet_id,
            original_tweet,
        } => {
            let c = content.as_deref().map_or_else(|| "None".to_string(), quote);
            let _ = write!(
                s,
                "retweet(content={c}, author={}, original_tweet_id={}, original_tweet={})",
                quote(author),
                quote(original_tweet_id),
                quote(original_tweet)
            );
        }
        AgentAction::Reply {
            content,
            author,
            original_tweet_id,
        } => {
            let _ = write!(
                s,
                "reply(content={}, author={}, original_tweet_id={})",
                quote(content),
                quote(author),
                quote(original_tweet_id)
            );
        }
        AgentAction::Like {
            author,
            original_tweet_id,
        } => {
            let _ = write!(s, "like(author={}, original_tweet_id={})", quote(author), quote(original_tweet_id));
        }
    }
    s
}

/// A full `Thought:` / `Action:` response.
pub fn format_response(thought: &str, action: &AgentAction) -> String {
    format!("Thought: {}\nAction: {}", thought.replace('\n', " "), format_action(action))
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ParsedResponse {
    pub thought: String,
    pub action: AgentAction,
    /// Why the response degraded to `DoNothing`, when it did.
    pub diagnostic: Option<String>,
}

#[derive(Clone, Debug, PartialEq)]
enum Value {
    Str(String),
    None,
}

struct Cursor<'a> {
    chars: std::iter::Peekable<std::str::Chars<'a>>,
}

impl Cursor<'_> {
    fn skip_ws(&mut self) {
        while self.chars.next_if(|c| c.is_whitespace()).is_some() {}
    }

    fn quoted(&mut self, q: char) -> Result<String, String> {
        let mut out = String::new();
        while let Some(c) = self.chars.next() {
            match c {
                '\\' => match self.chars.next() {
                    Some('n') => out.push('\n'),
                    Some('r') => out.push('\r'),
                    Some('t') => out.push('\t'),
                    Some(o) => out.push(o),
                    None => break,
                },
                c if c == q => return Ok(out),
                c => out.push(c),
            }
        }
        Err("unterminated string".into())
    }

    fn bare(&mut self) -> String {
        let mut out = String::new();
        while let Some(c) = self.chars.next_if(|&c| c != ',' && c != ')') {
            out.push(c);
        }
        out.trim().to_string()
    }

    fn value(&mut self) -> Result<Value, String> {
        self.skip_ws();
        match self.chars.peek() {
            Some(&q @ ('"' | '\'')) => {
                self.chars.next();
                self.quoted(q).map(Value::Str)
            }
            Some(_) => {
                let b = self.bare();
                Ok(if b == "None" || b == "null" { Value::None } else { Value::Str(b) })
            }
            None => Err("missing value".into()),
        }
    }

    /// Keyword (`key=value`) or positional argument.
    fn arg(&mut self) -> Result<(Option<String>, Value), String> {
        self.skip_ws();
        let mut key = String::new();
        let mut probe = self.chars.clone();
        while let Some(c) = probe.next_if(|c| c.is_alphanumeric() || *c == '_' || *c == '\\') {
            key.push(c);
        }
        while probe.next_if(|c| c.is_whitespace()).is_some() {}
        if !key.is_empty() && probe.peek() == Some(&'=') {
            probe.next();
            self.chars = probe;
            let key = key.replace('\\', "");
            return self.value().map(|v| (Some(key), v));
        }
        self.value().map(|v| (None, v))
    }
}

fn parse_call(call: &str) -> Result<AgentAction, String> {
    let call = call.trim().trim_start_matches('`');
    let open = call.find('(').ok_or("no argument list")?;
    let name = call[..open].trim().replace('\\', "").to_lowercase().replace(' ', "_");
    let params: &[&str] = match name.as_str() {
        "do_nothing" => return Ok(AgentAction::DoNothing),
        "post" => &["content"],
        "retweet" => &["content", "author", "original_tweet_id", "original_tweet"],
        "reply" => &["content", "author", "original_tweet_id"],
        "like" => &["author", "original_tweet_id"],
        other => return Err(format!("unknown function `{other}`")),
    };
    let mut cur = Cursor {
        chars: call[open + 1..].chars().peekable(),
    };
    let mut args: Vec<(String, Value)> = Vec::new();
    let mut position = 0;
    loop {
        cur.skip_ws();
        match cur.chars.peek() {
            None | Some(')') => break,
            Some(',') => {
                cur.chars.next();
                continue;
            }
            Some(_) => {}
        }
        let (key, value) = cur.arg()?;
        let key = match key {
            Some(k) => k,
            None => params.get(position).ok_or("too many positional arguments")?.to_string(),
        };
        position += 1;
        args.push((key, value));
    }
    let get = |k: &str| -> Option<Value> { args.iter().rev().find(|(key, _)| key == k).map(|(_, v)| v.clone()) };
    let string = |k: &str| -> Option<String> {
        match get(k) {
            Some(Value::Str(s)) => Some(s),
            _ => None,
        }
    };
    let required = |k: &str| string(k).filter(|s| !s.trim().is_empty()).ok_or(format!("{name} needs `{k}`"));
    Ok(match name.as_str() {
        "post" => AgentAction::Post {
            content: required("content")?,
        },
        "retweet" => AgentAction::Retweet {
            content: string("content"),
            author: string("author").unwrap_or_default(),
            original_tweet_id: required("original_tweet_id")?,
            original_tweet: string("original_tweet").unwrap_or_default(),
        },
        "reply" => AgentAction::Reply {
            content: required("content")?,
            author: string("author").unwrap_or_default(),
            original_tweet_id: required("original_tweet_id")?,
        },
        "like" => AgentAction::Like {
            author: string("author").unwrap_or_default(),
            original_tweet_id: required("original_tweet_id")?,
        },
        _ => unreachable!(),
    })
}

/// Extracts the thought and the call after the last `Action:`. Never fails:
/// anything unusable becomes `DoNothing` with a diagnostic.
pub fn parse_response(raw: &str) -> ParsedResponse {
    let Some(at) = raw.rfind("Action:") else {
        return ParsedResponse {
            thought: raw.trim().to_string(),
            action: AgentAction::DoNothing,
            diagnostic: Some("no `Action:` line".into()),
        };
    };
    let before = &raw[..at];
    let thought = match before.rfind("Thought:") {
        Some(t) => &before[t + "Thought:".len()..],
        None => before,
    }
    .trim()
    .to_string();
    let call = raw[at + "Action:".len()..].trim();
    match parse_call(call) {
        Ok(action) => ParsedResponse {
            thought,
            action,
            diagnostic: None,
        },
        Err(e) => ParsedResponse {
            thought,
            action: AgentAction::DoNothing,
            diagnostic: Some(e),
        },
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    pub(crate) const RESPONSE_EXAMPLE: &str = "Thought: The observation about the solidarity shown at the Golden Globes in support of the MeToo and Time's Up movement aligns with my progressive values and interests.\nAction: retweet(content=None, author=\"T***x\", original_tweet_id=\"356\", original_tweet=\"The solidarity shown at the Golden Globes Awards ceremony in support of the MeToo and Time's Up movement is inspiring. Let's keep the conversation going and work towards a more inclusive and equal society. #MeToo #TimesUp\")";

    #[test]
    fn response_example_parses_to_retweet() {
        let p = parse_response(RESPONSE_EXAMPLE);
        match p.action {
            AgentAction::Retweet {
                content,
                author,
                original_tweet_id,
                ..
            } => {
                assert_eq!(content, None);
                assert_eq!(author, "T***x");
                assert_eq!(original_tweet_id, "356");
            }
            other => panic!("{other:?}"),
        }
        assert!(p.thought.starts_with("The observation"));
        assert!(p.diagnostic.is_none());
    }

    #[test]
    fn latex_escaped_keys_are_accepted() {
        let p = parse_response("Action: like(author=\"a\", original\\_tweet\\_id=\"3\")");
        assert_eq!(
            p.action,
            AgentAction::Like {
                author: "a".into(),
                original_tweet_id: "3".into()
            }
        );
    }

    #[test]
    fn simple_forms() {
        assert_eq!(parse_response("Thought: meh\nAction: do_nothing()").action, AgentAction::DoNothing);
        let p = parse_response("blah blah, no decision here");
        assert_eq!(p.action, AgentAction::DoNothing);
        assert!(p.diagnostic.is_some());
        let p = parse_response("Action: post(content=\"first\")\nThought: x\nAction: like(author='b', original_tweet_id=7)");
        assert_eq!(
            p.action,
            AgentAction::Like {
                author: "b".into(),
                original_tweet_id: "7".into()
            }
        );
        assert_eq!(
            parse_response("Action: post(\"positional\")").action,
            AgentAction::Post {
                content: "positional".into()
            }
        );
        assert!(parse_response("Action: post(content=\"\")").diagnostic.is_some());
        assert!(parse_response("Action: dance()").diagnostic.is_some());
        assert!(parse_response("Action: post(content=\"open").diagnostic.is_some());
    }

    fn text() -> impl Strategy<Value = String> {
        any::<String>().prop_filter("no Action: marker", |s| !s.contains("Action:"))
    }

    fn nonblank() -> impl Strategy<Value = String> {
        text().prop_filter("non-blank", |s| !s.trim().is_empty())
    }

    fn action() -> impl Strategy<Value = AgentAction> {
        prop_oneof![
            Just(AgentAction::DoNothing),
            nonblank().prop_map(|content| AgentAction::Post { content }),
            (prop::option::of(text()), text(), nonblank(), text()).prop_map(|(content, author, id, original)| {
                AgentAction::Retweet {
                    content,
                    author,
                    original_tweet_id: id,
                    original_tweet: original,
                }
            }),
            (nonblank(), text(), nonblank()).prop_map(|(content, author, id)| AgentAction::Reply {
                content,
                author,
                original_tweet_id: id
            }),
            (text(), nonblank()).prop_map(|(author, id)| AgentAction::Like {
                author,
                original_tweet_id: id
            }),
        ]
    }

    proptest! {
        #[test]
        fn format_parse_round_trip(a in action(), thought in text()) {
            let raw = format_response(&thought, &a);
            let p = parse_response(&raw);
            prop_assert_eq!(p.action, a);
            prop_assert!(p.diagnostic.is_none());
        }

        #[test]
        fn garbage_never_panics(s in any::<String>()) {
            let _ = parse_response(&s);
            let _ = parse_response(&format!("Action: {s}"));
        }
    }
}
