use rayon::prelude::*;

use super::models::{apply, bc_delta, hk_delta, lorenz_delta, ra_delta, sj_delta};
use super::pool::{Picked, Pool};
use super::{AbmError, AgentState, Message, ModelParams, OpinionModel, UpdateSchedule};
use crate::rng::substream;
use crate::types::AttitudeScore;

/// Identifies the random substreams of one round.
///
/// Agent `i` in round `t` draws from the stream keyed by
/// `(seed, replicate, i, t)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct RoundKey {
    pub seed: u64,
    pub replicate: u64,
    pub round: u32,
}

impl RoundKey {
    pub fn new(seed: u64, round: u32) -> Self {
        RoundKey {
            seed,
            replicate: 0,
            round,
        }
    }

    pub fn replicate(mut self, r: u64) -> Self {
        self.replicate = r;
        self
    }
}

fn validate(
    model: &OpinionModel,
    population: &[AgentState],
    externals: &[Message],
) -> Result<(), AbmError> {
    model.params.validate()?;
    if let ModelParams::Ra(_) = model.params {
        if let Some(bad) = population.iter().find(|a| !(a.uncertainty > 0.0)) {
            return Err(AbmError::InvalidUncertainty(bad.id, bad.uncertainty));
        }
    }
    let mut ids = std::collections::HashSet::with_capacity(population.len());
    for a in population {
        if !ids.insert(a.id) {
            return Err(AbmError::DuplicateSource(a.id));
        }
    }
    for m in externals {
        let s = m.score.value();
        if !(-1.0..=1.0).contains(&s) {
            return Err(AbmError::ExternalOutOfRange(m.source, s));
        }
        if ids.contains(&m.source) {
            return Err(AbmError::DuplicateSource(m.source));
        }
    }
    Ok(())
}

/// Pool layout: every member (ordinary agents and external sources) sorted
/// by id, so positions do not depend on the caller's population order.
/// Returns the pool and the pool position of each population entry.
fn build_pool(
    model: &OpinionModel,
    population: &[AgentState],
    externals: &[Message],
) -> (Pool, Vec<usize>) {
    let u = model.params.initial_uncertainty();
    let mut members = population.to_vec();
    members.extend(externals.iter().map(|m| {
        let uncertainty = match m.segment {
            Some((lo, hi)) => (hi - lo) / 2.0,
            None => u,
        };
        AgentState {
            id: m.source,
            attitude: m.score,
            uncertainty,
        }
    }));
    members.sort_by_key(|m| m.id);
    let positions = population
        .iter()
        .map(|a| members.binary_search_by_key(&a.id, |m| m.id).expect("member present"))
        .collect();
    (Pool::new(members), positions)
}

fn delta_for(model: &OpinionModel, pool: &Pool, focal: usize, key: RoundKey) -> f64 {
    let me = pool.get(focal);
    let mut rng = substream(&[key.seed, key.replicate, me.id.0, u64::from(key.round)]);
    let a_i = me.value();
    match pool.pick(&model.params, focal, &mut rng) {
        Picked::Nobody => 0.0,
        Picked::AllExceptFocal => match &model.params {
            ModelParams::Hk(p) => {
                let sources = pool
                    .members()
                    .iter()
                    .enumerate()
                    .filter(|&(j, _)| j != focal)
                    .map(|(_, m)| m.value());
                hk_delta(a_i, sources, p, model.signs)
            }
            _ => unreachable!("only HK selects all"),
        },
        Picked::One(j) => {
            let src = pool.get(j);
            let a_j = src.value();
            match &model.params {
                ModelParams::Bc(p) => bc_delta(a_i, a_j, p),
                ModelParams::Ra(p) => ra_delta(
                    a_i,
                    me.uncertainty,
                    a_j,
                    a_j - src.uncertainty,
                    a_j + src.uncertainty,
                    p,
                    model.signs,
                ),
                ModelParams::Sj(p) => sj_delta(a_i, a_j, p),
                ModelParams::Lorenz(p) => lorenz_delta(a_i, a_j, p),
                ModelParams::Hk(p) => hk_delta(a_i, std::iter::once(a_j), p, model.signs),
            }
        }
    }
}

/// Advances every ordinary agent by one round.
///
/// Core-user messages join the selection pool but are never updated
/// themselves. The result only depends on the inputs and `key`; iteration
/// order and worker count do not matter under the synchronous schedule.
pub fn step_round(
    model: &OpinionModel,
    population: &[AgentState],
    externals: &[Message],
    key: RoundKey,
) -> Result<Vec<AgentState>, AbmError> {
    validate(model, population, externals)?;
    let (mut pool, positions) = build_pool(model, population, externals);
    match model.schedule {
        UpdateSchedule::Synchronous => {
            let pool = &pool;
            Ok(population
                .par_iter()
                .zip(positions.par_iter())
                .map(|(agent, &pos)| {
                    let d = delta_for(model, pool, pos, key);
                    AgentState {
                        attitude: apply(agent.value(), d),
                        ..agent.clone()
                    }
                })
                .collect())
        }
        UpdateSchedule::Sequential => {
            for &pos in &positions {
                let d = delta_for(model, &pool, pos, key);
                let next: AttitudeScore = apply(pool.get(pos).value(), d);
                pool.set_attitude(pos, next);
            }
            Ok(positions.iter().map(|&pos| pool.get(pos).clone()).collect())
        }
    }
}

/// Pure-ABM run. Returns the attitude vector after each of `rounds` rounds.
pub fn simulate(
    model: &OpinionModel,
    initial: &[AgentState],
    rounds: u32,
    seed: u64,
    replicate: u64,
) -> Result<Vec<Vec<f64>>, AbmError> {
    let mut state = initial.to_vec();
    let mut out = Vec::with_capacity(rounds as usize);
    for t in 1..=rounds {
        state = step_round(model, &state, &[], RoundKey::new(seed, t).replicate(replicate))?;
        out.push(state.iter().map(AgentState::value).collect());
    }
    Ok(out)
}
