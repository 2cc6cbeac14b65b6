use rand::Rng;

use super::{AgentState, ModelParams};
use crate::types::AgentId;

/// Population snapshot used for partner selection.
///
/// Members keep their insertion position; a secondary index orders them by
/// attitude so that bounded-confidence candidate sets are contiguous ranges.
#[derive(Clone, Debug)]
pub struct Pool {
    members: Vec<AgentState>,
    sorted: Vec<usize>,
    rank: Vec<usize>,
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct SelectionResult {
    pub targets: Vec<AgentId>,
}

/// Position-level selection outcome.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub(crate) enum Picked {
    Nobody,
    One(usize),
    AllExceptFocal,
}

impl Pool {
    pub fn new(members: Vec<AgentState>) -> Self {
        let mut sorted: Vec<usize> = (0..members.len()).collect();
        sorted.sort_by(|&x, &y| {
            members[x]
                .value()
                .total_cmp(&members[y].value())
                .then(x.cmp(&y))
        });
        let mut rank = vec![0; members.len()];
        for (r, &pos) in sorted.iter().enumerate() {
            rank[pos] = r;
        }
        Pool {
            members,
            sorted,
            rank,
        }
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    pub fn members(&self) -> &[AgentState] {
        &self.members
    }

    pub fn get(&self, pos: usize) -> &AgentState {
        &self.members[pos]
    }

    pub fn position_of(&self, id: AgentId) -> Option<usize> {
        self.members.iter().position(|m| m.id == id)
    }

    /// Replaces one member's attitude and repairs the sorted index.
    pub(crate) fn set_attitude(&mut self, pos: usize, attitude: crate::types::AttitudeScore) {
        let r = self.rank[pos];
        self.sorted.remove(r);
        self.members[pos].attitude = attitude;
        let v = attitude.value();
        let members = &self.members;
        let at = self.sorted.partition_point(|&q| {
            members[q].value().total_cmp(&v).then(q.cmp(&pos)) == std::cmp::Ordering::Less
        });
        self.sorted.insert(at, pos);
        let lo = r.min(at);
        let hi = r.max(at);
        for k in lo..=hi {
            self.rank[self.sorted[k]] = k;
        }
    }

    /// Range of sorted ranks whose attitude lies strictly within `eps` of `a`.
    fn bound_range(&self, a: f64, eps: f64) -> (usize, usize) {
        let m = &self.members;
        let lo = self
            .sorted
            .partition_point(|&q| {
                let x = m[q].value();
                x < a && !((x - a).abs() < eps)
            });
        let hi = self
            .sorted
            .partition_point(|&q| {
                let x = m[q].value();
                x < a || (x - a).abs() < eps
            });
        (lo, hi.max(lo))
    }

    pub(crate) fn pick<R: Rng>(&self, params: &ModelParams, focal: usize, rng: &mut R) -> Picked {
        let n = self.members.len();
        if n < 2 {
            return Picked::Nobody;
        }
        match params {
            ModelParams::Hk(_) => Picked::AllExceptFocal,
            ModelParams::Bc(p) => {
                let a = self.members[focal].value();
                let (lo, hi) = self.bound_range(a, p.epsilon);
                let focal_rank = self.rank[focal];
                let self_inside = (lo..hi).contains(&focal_rank);
                let count = hi - lo - usize::from(self_inside);
                if count == 0 {
                    return Picked::Nobody;
                }
                let mut r = lo + rng.gen_range(0..count);
                if self_inside && r >= focal_rank {
                    r += 1;
                }
                Picked::One(self.sorted[r])
            }
            ModelParams::Ra(_) | ModelParams::Sj(_) | ModelParams::Lorenz(_) => {
                let mut r = rng.gen_range(0..n - 1);
                if r >= focal {
                    r += 1;
                }
                Picked::One(r)
            }
        }
    }
}

/// Selection function: which pool members influence `focal` this round.
///
/// BC draws one member uniformly among those strictly within the confidence
/// bound (possibly nobody), HK takes everybody else, RA/SJ/Lorenz draw one
/// member uniformly. The focal agent is never selected.
pub fn select_partners<R: Rng>(
    params: &ModelParams,
    focal: AgentId,
    pool: &Pool,
    rng: &mut R,
) -> SelectionResult {
    let Some(pos) = pool.position_of(focal) else {
        return SelectionResult::default();
    };
    let targets = match pool.pick(params, pos, rng) {
        Picked::Nobody => Vec::new(),
        Picked::One(j) => vec![pool.members[j].id],
        Picked::AllExceptFocal => pool
            .members
            .iter()
            .filter(|m| m.id != focal)
            .map(|m| m.id)
            .collect(),
    };
    SelectionResult { targets }
}
