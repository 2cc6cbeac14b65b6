use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::dataset::{ContextTweet, MicroPair, TruthBehavior};
use super::hybrid::{Components, Memo};
use super::output::{write_json, write_jsonl};
use super::{with_workers, Dataset, RunConfig, RunError};
use crate::agent::{
    assemble_prompt, parse_response, ActionContext, AgentAction, Driver, GenerationRequest, PromptContext, Purpose,
    TimelineEntry, VisibleTweet,
};
use crate::annotate::{cosine, Annotators, AttitudeAnnotator, ContentType, Embedder, StanceLabel};
use crate::bridge::content_to_attitude;
use crate::metrics::{classification_metrics, mae, Classification};
use crate::types::AgentId;

/// Behavior space for alignment. Anything but a post or retweet is `Other`
/// and can only count as a miss.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BehaviorLabel {
    Post,
    Retweet,
    Other,
}

impl From<TruthBehavior> for BehaviorLabel {
    fn from(b: TruthBehavior) -> Self {
        match b {
            TruthBehavior::Post => BehaviorLabel::Post,
            TruthBehavior::Retweet => BehaviorLabel::Retweet,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MicroPrediction {
    pub index: usize,
    pub user: AgentId,
    pub failed: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub action: Option<AgentAction>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub behavior: Option<BehaviorLabel>,
    /// Text the prediction carries: own words, or the retweeted text.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub text: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub stance: Option<StanceLabel>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub content_type: Option<ContentType>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub attitude: Option<f64>,
    pub truth_behavior: BehaviorLabel,
    pub truth_stance: StanceLabel,
    pub truth_content_type: ContentType,
    pub truth_attitude: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub similarity: Option<f64>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct MicroReport {
    pub pairs: usize,
    pub failed: usize,
    /// Evaluated pairs whose prediction carries no text (likes, do-nothing);
    /// they only enter the behavior metric.
    pub without_text: usize,
    pub behavior: Option<Classification>,
    pub stance: Option<Classification>,
    pub content_type: Option<Classification>,
    pub attitude_mae: Option<f64>,
    /// Mean embedding cosine between predicted and true text.
    pub similarity: Option<f64>,
    #[serde(skip)]
    pub predictions: Vec<MicroPrediction>,
}

impl MicroReport {
    /// `micro_report.json` and `micro_predictions.jsonl`.
    pub fn write(&self, dir: &Path) -> Result<(), RunError> {
        std::fs::create_dir_all(dir)?;
        write_json(&dir.join("micro_report.json"), self)?;
        write_jsonl(&dir.join("micro_predictions.jsonl"), &self.predictions)
    }
}

fn entry(t: &ContextTweet) -> TimelineEntry {
    TimelineEntry {
        id: t.id,
        author: t.author.clone(),
        content: t.content.clone(),
        time: t.time,
    }
}

/// Text carried by a predicted action.
fn predicted_text(action: &AgentAction, pair: &MicroPair) -> Option<String> {
    let text = match action {
        AgentAction::Post { content } | AgentAction::Reply { content, .. } => content.clone(),
        AgentAction::Retweet {
            content: Some(c), ..
        } if !c.trim().is_empty() => c.clone(),
        AgentAction::Retweet {
            original_tweet_id,
            original_tweet,
            ..
        } => pair
            .context
            .timeline
            .iter()
            .chain(&pair.context.notifications)
            .find(|t| t.id.to_string() == original_tweet_id.trim())
            .map(|t| t.content.clone())
            .unwrap_or_else(|| original_tweet.clone()),
        _ => return None,
    };
    (!text.trim().is_empty()).then_some(text)
}

fn behavior_of(action: &AgentAction) -> BehaviorLabel {
    match action {
        AgentAction::Post { .. } => BehaviorLabel::Post,
        AgentAction::Retweet { .. } => BehaviorLabel::Retweet,
        _ => BehaviorLabel::Other,
    }
}

pub fn run_micro(dataset: &Dataset, cfg: &RunConfig) -> Result<MicroReport, RunError> {
    run_micro_with(dataset, cfg, Components::from_config(cfg))
}

/// Replays every (user, context) pair once. Replay responses are keyed by
/// the pair's 1-based position in `micro_pairs.jsonl` as the round.
pub fn run_micro_with(dataset: &Dataset, cfg: &RunConfig, mut components: Components) -> Result<MicroReport, RunError> {
    cfg.validate()?;
    if dataset.micro_pairs.is_empty() {
        return Err(RunError::NoMicroPairs);
    }
    components.driver(cfg)?;
    with_workers(cfg.workers, move || {
        let Components {
            driver,
            annotators,
            attitude,
        } = components;
        let driver = driver.expect("driver built");
        let base: &dyn AttitudeAnnotator = match &attitude {
            Some(a) => a.as_ref(),
            None => &annotators,
        };
        evaluate_pairs(dataset, cfg, driver.as_ref(), &annotators, &Memo::new(base))
    })?
}

fn evaluate_pairs(
    dataset: &Dataset,
    cfg: &RunConfig,
    driver: &dyn Driver,
    annotators: &Annotators,
    annotator: &dyn AttitudeAnnotator,
) -> Result<MicroReport, RunError> {
    let embedder = annotators.embedder.as_ref();
    for p in &dataset.micro_pairs {
        embedder.observe(&p.truth.text);
        for t in p.context.timeline.iter().chain(&p.context.notifications) {
            embedder.observe(&t.content);
        }
    }
    embedder.refresh();

    let predictions: Vec<MicroPrediction> = dataset
        .micro_pairs
        .par_iter()
        .enumerate()
        .map(|(i, pair)| predict(i, pair, dataset, cfg, driver, annotators, annotator))
        .collect();

    let ok: Vec<&MicroPrediction> = predictions.iter().filter(|p| !p.failed).collect();
    let with_text: Vec<&MicroPrediction> = ok.iter().copied().filter(|p| p.text.is_some()).collect();
    let mut report = MicroReport {
        pairs: predictions.len(),
        failed: predictions.len() - ok.len(),
        without_text: ok.len() - with_text.len(),
        ..MicroReport::default()
    };
    if !ok.is_empty() {
        let pred: Vec<BehaviorLabel> = ok.iter().map(|p| p.behavior.unwrap()).collect();
        let truth: Vec<BehaviorLabel> = ok.iter().map(|p| p.truth_behavior).collect();
        report.behavior = Some(classification_metrics(&pred, &truth, &[BehaviorLabel::Post, BehaviorLabel::Retweet])?);
    }
    if !with_text.is_empty() {
        let pred: Vec<StanceLabel> = with_text.iter().map(|p| p.stance.unwrap()).collect();
        let truth: Vec<StanceLabel> = with_text.iter().map(|p| p.truth_stance).collect();
        report.stance = Some(classification_metrics(&pred, &truth, &StanceLabel::ALL)?);
        let pred: Vec<ContentType> = with_text.iter().map(|p| p.content_type.unwrap()).collect();
        let truth: Vec<ContentType> = with_text.iter().map(|p| p.truth_content_type).collect();
        report.content_type = Some(classification_metrics(&pred, &truth, &ContentType::ALL)?);
        let scored: Vec<&&MicroPrediction> = with_text.iter().filter(|p| p.attitude.is_some()).collect();
        if !scored.is_empty() {
            let a: Vec<f64> = scored.iter().map(|p| p.attitude.unwrap()).collect();
            let b: Vec<f64> = scored.iter().map(|p| p.truth_attitude).collect();
            report.attitude_mae = Some(mae(&a, &b)?);
        }
        let sims: Vec<f64> = with_text.iter().filter_map(|p| p.similarity).collect();
        report.similarity = Some(sims.iter().sum::<f64>() / sims.len() as f64);
    }
    report.predictions = predictions;
    Ok(report)
}

fn predict(
    index: usize,
    pair: &MicroPair,
    dataset: &Dataset,
    cfg: &RunConfig,
    driver: &dyn Driver,
    annotators: &Annotators,
    annotator: &dyn AttitudeAnnotator,
) -> MicroPrediction {
    let user = dataset.user(pair.user).expect("validated micro user");
    let profile = user.profile.as_ref().expect("validated core profile");
    let truth_annotation = annotator.annotate(&pair.truth.text).ok();
    let truth_stance = pair
        .truth
        .stance
        .or(truth_annotation.as_ref().map(|a| a.stance))
        .unwrap_or(StanceLabel::Neutral);
    let truth_attitude = content_to_attitude(truth_stance, annotators.sentiment.intensity(&pair.truth.text))
        .map(|a| a.value())
        .unwrap_or(0.0);
    let truth_content_type = pair
        .truth
        .content_type
        .unwrap_or_else(|| annotators.content_type(&pair.truth.text));

    let ctx = PromptContext {
        name: profile.name.clone(),
        summary: profile.summary.clone(),
        time: pair.context.time.unwrap_or_else(|| cfg.clock.at(0)),
        news: pair.context.news.clone(),
        personal_experience: if profile.personal_experience.is_empty() {
            user.history.join(" ")
        } else {
            profile.personal_experience.clone()
        },
        memory: pair.context.memory.clone(),
        timeline: pair.context.timeline.iter().map(entry).collect(),
        notifications: pair.context.notifications.iter().map(entry).collect(),
        public_space: None,
    };
    let prompt = assemble_prompt(&ctx);
    let action_ctx = ActionContext {
        role: profile.communication_role,
        activity: profile.activity_tier,
        attitude: user.initial_attitude,
        visible: pair
            .context
            .timeline
            .iter()
            .map(|t| VisibleTweet {
                id: t.id,
                author: t.author.clone(),
                content: t.content.clone(),
                own: t.author == profile.name,
                score: annotator.annotate(&t.content).ok().map(|a| a.attitude.value()),
            })
            .collect(),
    };
    let round = index as u32 + 1;
    let request = GenerationRequest::new(pair.user, round, Purpose::Action, &prompt).with_context(&action_ctx);
    let mut out = MicroPrediction {
        index,
        user: pair.user,
        failed: false,
        action: None,
        behavior: None,
        text: None,
        stance: None,
        content_type: None,
        attitude: None,
        truth_behavior: pair.truth.behavior.into(),
        truth_stance,
        truth_content_type,
        truth_attitude,
        similarity: None,
    };
    let raw = match driver.generate(&request) {
        Ok(r) => r,
        Err(e) => {
            log::warn!("micro pair {index} (user {}): {e}", pair.user);
            out.failed = true;
            return out;
        }
    };
    let action = parse_response(&raw).action;
    out.behavior = Some(behavior_of(&action));
    out.text = predicted_text(&action, pair);
    if let Some(text) = &out.text {
        let a = annotator.annotate(text).ok();
        out.stance = Some(a.as_ref().map_or(StanceLabel::Neutral, |a| a.stance));
        out.attitude = a.map(|a| a.attitude.value());
        out.content_type = Some(annotators.content_type(text));
        let e = &annotators.embedder;
        out.similarity = Some(cosine(&e.embed(text), &e.embed(&pair.truth.text)));
    }
    out.action = Some(action);
    out
}
