//! Classical opinion-dynamics models for ordinary users.
//!
//! Every model is expressed through the same three pieces: a selection
//! function (who influences the focal agent), a message function (what a
//! source conveys) and an update function (how the focal attitude moves).
//! Five variants are provided: bounded confidence (BC), Hegselmann-Krause
//! (HK), relative agreement (RA), social judgment (SJ) and the Lorenz
//! assimilation/reinforcement model.

mod models;
mod pool;
mod round;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::types::{AgentId, AttitudeScore};

pub use models::{message_of, update_bc, update_hk, update_lorenz, update_ra, update_sj};
pub use pool::{select_partners, Pool, SelectionResult};
pub use round::{simulate, step_round, RoundKey};

#[derive(Debug, Error, PartialEq)]
pub enum AbmError {
    #[error("agent {0} has non-positive uncertainty {1} under the relative agreement model")]
    InvalidUncertainty(AgentId, f64),
    #[error("relative agreement update requires a message segment")]
    MissingSegment,
    #[error("external message from {0} has score {1} outside [-1, 1]")]
    ExternalOutOfRange(AgentId, f64),
    #[error("external message source {0} collides with an ordinary agent id")]
    DuplicateSource(AgentId),
    #[error("invalid model parameter: {0}")]
    InvalidParams(String),
}

/// The ABM-side representation of an ordinary user.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AgentState {
    pub id: AgentId,
    pub attitude: AttitudeScore,
    /// Half-width of the relative agreement segment. Ignored by other models.
    #[serde(default)]
    pub uncertainty: f64,
}

impl AgentState {
    pub fn new(id: impl Into<AgentId>, attitude: f64) -> Self {
        AgentState {
            id: id.into(),
            attitude: AttitudeScore::clamped(attitude),
            uncertainty: 0.0,
        }
    }

    pub fn with_uncertainty(mut self, u: f64) -> Self {
        self.uncertainty = u;
        self
    }

    pub fn value(&self) -> f64 {
        self.attitude.value()
    }
}

/// What a source agent conveys. `segment` is only present under RA.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Message {
    pub source: AgentId,
    pub score: AttitudeScore,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub segment: Option<(f64, f64)>,
}

impl Message {
    pub fn new(source: impl Into<AgentId>, score: AttitudeScore) -> Self {
        Message {
            source: source.into(),
            score,
            segment: None,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BcParams {
    pub alpha: f64,
    pub epsilon: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct HkParams {
    pub epsilon: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RaParams {
    pub alpha: f64,
    pub init_uncertainty: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SjParams {
    pub alpha: f64,
    /// Latitude of acceptance.
    pub acc_thred: f64,
    /// Latitude of rejection.
    pub rej_thred: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LorenzParams {
    pub alpha: f64,
    pub lambda: f64,
    pub k: f64,
    pub rho: f64,
    /// Boundary of the attitude space.
    #[serde(default = "one", rename = "m")]
    pub boundary: f64,
    /// Source credibility `s(i, j)`, constant across pairs.
    #[serde(default = "one")]
    pub credibility: f64,
}

fn one() -> f64 {
    1.0
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum ModelParams {
    Bc(BcParams),
    Hk(HkParams),
    Ra(RaParams),
    Sj(SjParams),
    Lorenz(LorenzParams),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelKind {
    Bc,
    Hk,
    Ra,
    Sj,
    Lorenz,
}

impl ModelKind {
    pub const ALL: [ModelKind; 5] = [
        ModelKind::Bc,
        ModelKind::Hk,
        ModelKind::Ra,
        ModelKind::Sj,
        ModelKind::Lorenz,
    ];
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            ModelKind::Bc => "bc",
            ModelKind::Hk => "hk",
            ModelKind::Ra => "ra",
            ModelKind::Sj => "sj",
            ModelKind::Lorenz => "lorenz",
        };
        f.write_str(s)
    }
}

impl FromStr for ModelKind {
    type Err = AbmError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "bc" => Ok(ModelKind::Bc),
            "hk" => Ok(ModelKind::Hk),
            "ra" => Ok(ModelKind::Ra),
            "sj" => Ok(ModelKind::Sj),
            "lorenz" => Ok(ModelKind::Lorenz),
            other => Err(AbmError::InvalidParams(format!("unknown model kind `{other}`"))),
        }
    }
}

fn check_unit(name: &str, v: f64) -> Result<(), AbmError> {
    if v.is_finite() && (0.0..=1.0).contains(&v) {
        Ok(())
    } else {
        Err(AbmError::InvalidParams(format!("{name}={v} must lie in [0, 1]")))
    }
}

fn check_positive(name: &str, v: f64) -> Result<(), AbmError> {
    if v.is_finite() && v > 0.0 {
        Ok(())
    } else {
        Err(AbmError::InvalidParams(format!("{name}={v} must be > 0")))
    }
}

impl ModelParams {
    pub fn kind(&self) -> ModelKind {
        match self {
            ModelParams::Bc(_) => ModelKind::Bc,
            ModelParams::Hk(_) => ModelKind::Hk,
            ModelParams::Ra(_) => ModelKind::Ra,
            ModelParams::Sj(_) => ModelKind::Sj,
            ModelParams::Lorenz(_) => ModelKind::Lorenz,
        }
    }

    pub fn validate(&self) -> Result<(), AbmError> {
        match *self {
            ModelParams::Bc(p) => {
                check_unit("alpha", p.alpha)?;
                check_positive("epsilon", p.epsilon)
            }
            ModelParams::Hk(p) => check_positive("epsilon", p.epsilon),
            ModelParams::Ra(p) => {
                check_unit("alpha", p.alpha)?;
                check_positive("init_uncertainty", p.init_uncertainty)
            }
            ModelParams::Sj(p) => {
                check_unit("alpha", p.alpha)?;
                check_positive("acc_thred", p.acc_thred)?;
                check_positive("rej_thred", p.rej_thred)?;
                if p.rej_thred <= p.acc_thred {
                    return Err(AbmError::InvalidParams(format!(
                        "rej_thred={} must exceed acc_thred={}",
                        p.rej_thred, p.acc_thred
                    )));
                }
                Ok(())
            }
            ModelParams::Lorenz(p) => {
                check_unit("alpha", p.alpha)?;
                check_positive("lambda", p.lambda)?;
                check_positive("k", p.k)?;
                check_unit("rho", p.rho)?;
                check_positive("m", p.boundary)?;
                check_unit("credibility", p.credibility)
            }
        }
    }

    /// Uncertainty assigned to fresh agents (and external sources) under RA.
    pub fn initial_uncertainty(&self) -> f64 {
        match self {
            ModelParams::Ra(p) => p.init_uncertainty,
            _ => 0.0,
        }
    }
}

/// Which sign the HK and RA update terms use.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SignConvention {
    /// `(a_j - a_i)`: the source pulls the focal agent towards itself.
    #[default]
    Assimilative,
    /// `(a_i - a_j)` for HK and RA, as the update formulas are commonly
    /// printed. Makes both models repulsive.
    Reversed,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum UpdateSchedule {
    /// Every agent reads the round-start snapshot; all deltas commit together.
    #[default]
    Synchronous,
    /// Agents update one after another in population order and see earlier
    /// updates of the same round.
    Sequential,
}

/// A model variant together with its execution switches.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct OpinionModel {
    pub params: ModelParams,
    #[serde(default)]
    pub signs: SignConvention,
    #[serde(default)]
    pub schedule: UpdateSchedule,
}

impl OpinionModel {
    pub fn new(params: ModelParams) -> Self {
        OpinionModel {
            params,
            signs: SignConvention::default(),
            schedule: UpdateSchedule::default(),
        }
    }
}

impl From<ModelParams> for OpinionModel {
    fn from(params: ModelParams) -> Self {
        OpinionModel::new(params)
    }
}

/// Builds a population with the model's initial uncertainty.
pub fn population(params: &ModelParams, attitudes: &[(AgentId, f64)]) -> Vec<AgentState> {
    let u = params.initial_uncertainty();
    attitudes
        .iter()
        .map(|&(id, a)| AgentState::new(id, a).with_uncertainty(u))
        .collect()
}
