//! The adaptation policy: the compression-ratio MDP and the tabular
//! Q-learning agent that solves it.

pub mod agent;
pub mod env;
