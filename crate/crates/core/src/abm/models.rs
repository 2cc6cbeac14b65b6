use super::{
    AbmError, AgentState, BcParams, HkParams, LorenzParams, Message, ModelParams, RaParams,
    SignConvention, SjParams,
};
use crate::types::AttitudeScore;

/// Message function. The score is the source attitude for every model;
/// RA additionally carries the uncertainty segment `[a - u, a + u]`.
pub fn message_of(params: &ModelParams, agent: &AgentState) -> Result<Message, AbmError> {
    let a = agent.value();
    let segment = match params {
        ModelParams::Ra(_) => {
            if !(agent.uncertainty > 0.0) {
                return Err(AbmError::InvalidUncertainty(agent.id, agent.uncertainty));
            }
            Some((a - agent.uncertainty, a + agent.uncertainty))
        }
        _ => None,
    };
    Ok(Message {
        source: agent.id,
        score: agent.attitude,
        segment,
    })
}

pub fn update_bc(state: &AgentState, msg: &Message, params: &BcParams) -> f64 {
    bc_delta(state.value(), msg.score.value(), params)
}

pub(crate) fn bc_delta(a_i: f64, a_j: f64, p: &BcParams) -> f64 {
    let diff = a_j - a_i;
    if diff.abs() < p.epsilon {
        p.alpha * diff
    } else {
        0.0
    }
}

/// Multi-source bounded confidence: `1/(N+1) * sum(a_j - a_i)` over the
/// sources within the bound, zero when none are.
pub fn update_hk(
    state: &AgentState,
    msgs: &[Message],
    params: &HkParams,
    signs: SignConvention,
) -> f64 {
    hk_delta(
        state.value(),
        msgs.iter().map(|m| m.score.value()),
        params,
        signs,
    )
}

pub(crate) fn hk_delta(
    a_i: f64,
    sources: impl Iterator<Item = f64>,
    p: &HkParams,
    signs: SignConvention,
) -> f64 {
    let mut n = 0usize;
    let mut sum = 0.0;
    for a_j in sources {
        let diff = a_j - a_i;
        if diff.abs() < p.epsilon {
            n += 1;
            sum += match signs {
                SignConvention::Assimilative => diff,
                SignConvention::Reversed => a_i - a_j,
            };
        }
    }
    if n == 0 {
        return 0.0;
    }
    let n = n as f64;
    // alpha(N) = N/(N+1) times the mean over in-bound sources
    (n / (n + 1.0)) * (sum / n)
}

pub fn update_ra(
    state: &AgentState,
    msg: &Message,
    params: &RaParams,
    signs: SignConvention,
) -> Result<f64, AbmError> {
    let (lo_j, hi_j) = msg.segment.ok_or(AbmError::MissingSegment)?;
    if !(state.uncertainty > 0.0) {
        return Err(AbmError::InvalidUncertainty(state.id, state.uncertainty));
    }
    Ok(ra_delta(
        state.value(),
        state.uncertainty,
        msg.score.value(),
        lo_j,
        hi_j,
        params,
        signs,
    ))
}

pub(crate) fn ra_delta(
    a_i: f64,
    u_i: f64,
    a_j: f64,
    lo_j: f64,
    hi_j: f64,
    p: &RaParams,
    signs: SignConvention,
) -> f64 {
    let u_j = (hi_j - lo_j) / 2.0;
    let overlap = (a_i + u_i).min(hi_j) - (a_i - u_i).max(lo_j);
    let agreement = overlap / u_j;
    if agreement > 1.0 {
        let dir = match signs {
            SignConvention::Assimilative => a_j - a_i,
            SignConvention::Reversed => a_i - a_j,
        };
        p.alpha * (agreement - 1.0) * dir
    } else {
        0.0
    }
}

/// Social judgment: assimilation inside the latitude of acceptance,
/// repulsion beyond the latitude of rejection, nothing in between.
pub fn update_sj(state: &AgentState, msg: &Message, params: &SjParams) -> f64 {
    sj_delta(state.value(), msg.score.value(), params)
}

pub(crate) fn sj_delta(a_i: f64, a_j: f64, p: &SjParams) -> f64 {
    let diff = a_j - a_i;
    let dist = diff.abs();
    let assimilation = if dist < p.acc_thred { diff } else { 0.0 };
    let repulsion = if dist > p.rej_thred { -diff } else { 0.0 };
    p.alpha * (assimilation + repulsion)
}

pub fn update_lorenz(state: &AgentState, msg: &Message, params: &LorenzParams) -> f64 {
    lorenz_delta(state.value(), msg.score.value(), params)
}

pub(crate) fn lorenz_delta(a_i: f64, m: f64, p: &LorenzParams) -> f64 {
    let m2 = p.boundary * p.boundary;
    let polarization = (m2 - a_i * a_i) / m2;
    let lk = p.lambda.powf(p.k);
    let similarity = lk / (lk + (m - a_i).abs().powf(p.k));
    let assimilation = m - a_i;
    let reinforcement = m;
    p.alpha
        * p.credibility
        * polarization
        * similarity
        * (p.rho * assimilation + (1.0 - p.rho) * reinforcement)
}

/// Applies a delta and clamps into the attitude space.
pub(crate) fn apply(a: f64, delta: f64) -> AttitudeScore {
    AttitudeScore::clamped(a + delta)
}
