use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Identifier shared by core and ordinary users.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct AgentId(pub u64);

impl fmt::Display for AgentId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

impl From<u64> for AgentId {
    fn from(v: u64) -> Self {
        AgentId(v)
    }
}

#[derive(Debug, Error, PartialEq)]
#[error("attitude {0} outside [-1, 1]")]
pub struct AttitudeRangeError(pub f64);

/// Attitude towards the simulated topic. The sign is the direction, the
/// magnitude the intensity.
#[derive(Clone, Copy, Debug, PartialEq, PartialOrd, Serialize, Deserialize, Default)]
#[serde(try_from = "f64", into = "f64")]
pub struct AttitudeScore(f64);

impl AttitudeScore {
    pub const NEUTRAL: AttitudeScore = AttitudeScore(0.0);

    pub fn new(value: f64) -> Result<Self, AttitudeRangeError> {
        if value.is_finite() && (-1.0..=1.0).contains(&value) {
            Ok(AttitudeScore(value))
        } else {
            Err(AttitudeRangeError(value))
        }
    }

    /// Clamps into `[-1, 1]`. NaN maps to neutral.
    pub fn clamped(value: f64) -> Self {
        if value.is_nan() {
            return AttitudeScore(0.0);
        }
        AttitudeScore(value.clamp(-1.0, 1.0))
    }

    pub fn value(self) -> f64 {
        self.0
    }
}

impl TryFrom<f64> for AttitudeScore {
    type Error = AttitudeRangeError;
    fn try_from(v: f64) -> Result<Self, Self::Error> {
        AttitudeScore::new(v)
    }
}

impl From<AttitudeScore> for f64 {
    fn from(a: AttitudeScore) -> f64 {
        a.0
    }
}

impl fmt::Display for AttitudeScore {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn range_is_enforced() {
        assert!(AttitudeScore::new(1.0).is_ok());
        assert!(AttitudeScore::new(-1.0).is_ok());
        assert_eq!(AttitudeScore::new(1.5), Err(AttitudeRangeError(1.5)));
        assert!(AttitudeScore::new(f64::NAN).is_err());
        assert_eq!(AttitudeScore::clamped(-3.0).value(), -1.0);
    }

    #[test]
    fn deserialize_rejects_out_of_range() {
        assert!(serde_json::from_str::<AttitudeScore>("1.5").is_err());
        let a: AttitudeScore = serde_json::from_str("-0.25").unwrap();
        assert_eq!(a.value(), -0.25);
    }
}
