//! Hybrid social-media opinion dynamics simulator.
//!
//! Core users are LLM-driven agents with a profile, memory and action module;
//! ordinary users follow classical agent-based opinion models. Both live in a
//! Twitter-like environment and are coupled by annotating core-user content
//! into attitude scores.

// `!(x > 0.0)` style guards are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod abm;
pub mod agent;
pub mod annotate;
pub mod bridge;
pub mod calibration;
pub mod chat;
pub mod environment;
pub mod metrics;
pub mod rng;
pub mod runner;
pub mod types;

pub use types::{AgentId, AttitudeScore};
