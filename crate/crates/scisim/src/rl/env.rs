//! The adaptive-compression MDP: discrete compression-ratio states, a
//! three-action set, stochastic one-or-two-step transitions, and the
//! detection-rate reward policy with optional PSNR modulation.

use rand::Rng;

use crate::error::{Error, Result};

/// Ordered admissible compression ratios.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StateSpace {
    values: Vec<usize>,
}

impl Default for StateSpace {
    fn default() -> Self {
        Self { values: vec![6, 8, 10, 12, 15, 20] }
    }
}

impl StateSpace {
    pub fn new(values: Vec<usize>) -> Result<Self> {
        if values.len() < 2 {
            return Err(Error::validation("state space needs at least two values"));
        }
        if values[0] == 0 {
            return Err(Error::validation("state values must be >= 1"));
        }
        if values.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::validation("state values must be strictly increasing"));
        }
        Ok(Self { values })
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn values(&self) -> &[usize] {
        &self.values
    }

    pub fn value(&self, idx: usize) -> usize {
        self.values[idx]
    }

    pub fn index_of(&self, b: usize) -> Result<usize> {
        self.values
            .iter()
            .position(|&v| v == b)
            .ok_or_else(|| Error::validation(format!("B = {b} is not in the state space {:?}", self.values)))
    }

    pub fn is_min(&self, idx: usize) -> bool {
        idx == 0
    }

    pub fn is_max(&self, idx: usize) -> bool {
        idx + 1 == self.values.len()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Action {
    Decrease,
    Keep,
    Increase,
}

/// Fixed evaluation order; also the tie-break order for greedy selection.
pub const ACTIONS: [Action; 3] = [Action::Decrease, Action::Keep, Action::Increase];

impl Action {
    pub fn name(&self) -> &'static str {
        match self {
            Action::Decrease => "decrease",
            Action::Keep => "keep",
            Action::Increase => "increase",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "decrease" => Ok(Action::Decrease),
            "keep" => Ok(Action::Keep),
            "increase" => Ok(Action::Increase),
            other => Err(Error::validation(format!("unknown action {other:?}"))),
        }
    }
}

/// Jump probabilities for the one-or-two-step moves.
///
/// Increase from an interior state goes one step up with probability
/// `alpha`, two steps with `1 - alpha`. Decrease mirrors the transition
/// table's parameterization: two steps down with probability `beta`, one
/// step with `1 - beta` (the aggressive jump handles scenes that speed up
/// suddenly).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TransitionModel {
    pub alpha: f64,
    pub beta: f64,
}

impl Default for TransitionModel {
    fn default() -> Self {
        Self { alpha: 0.7, beta: 0.7 }
    }
}

impl TransitionModel {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.alpha) || !(0.0..=1.0).contains(&self.beta) {
            return Err(Error::validation("alpha and beta must lie in [0,1]"));
        }
        Ok(())
    }
}

/// Analytic transition law for `(state, action)`: a list of
/// `(next state index, probability)` summing to exactly 1.
pub fn transition_distribution(
    states: &StateSpace,
    s: usize,
    a: Action,
    t: &TransitionModel,
) -> Vec<(usize, f64)> {
    let last = states.len() - 1;
    match a {
        Action::Keep => vec![(s, 1.0)],
        Action::Increase => {
            if s == last {
                // Infeasible direction: no-op.
                vec![(s, 1.0)]
            } else if s + 1 == last {
                vec![(last, 1.0)]
            } else {
                vec![(s + 1, t.alpha), (s + 2, 1.0 - t.alpha)]
            }
        }
        Action::Decrease => {
            if s == 0 {
                vec![(s, 1.0)]
            } else if s == 1 {
                vec![(0, 1.0)]
            } else {
                vec![(s - 2, t.beta), (s - 1, 1.0 - t.beta)]
            }
        }
    }
}

/// Samples the next state index. No-ops at the boundaries consume no
/// randomness, so fixed-B runs stay bit-reproducible regardless of seed.
pub fn step<R: Rng>(states: &StateSpace, s: usize, a: Action, t: &TransitionModel, rng: &mut R) -> usize {
    let last = states.len() - 1;
    match a {
        Action::Keep => s,
        Action::Increase => {
            if s == last {
                s
            } else if s + 1 == last {
                last
            } else if rng.gen::<f64>() < t.alpha {
                s + 1
            } else {
                s + 2
            }
        }
        Action::Decrease => {
            if s == 0 {
                s
            } else if s == 1 {
                0
            } else if rng.gen::<f64>() < t.beta {
                s - 2
            } else {
                s - 1
            }
        }
    }
}

/// All reward-policy constants.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RewardConfig {
    /// Acceptable detection-rate threshold.
    pub drth: f64,
    /// Acceptable-PSNR threshold for reward modulation, in dB.
    pub psnrth: Option<f64>,
    pub r1: f64,
    pub r2: f64,
    pub lambda1: f64,
    pub lambda2: f64,
    /// Edges of the good-reconstruction PSNR band, in dB.
    pub psnr_low: f64,
    pub psnr_high: f64,
}

impl Default for RewardConfig {
    fn default() -> Self {
        Self {
            drth: 0.75,
            psnrth: Some(26.0),
            r1: 1.0,
            r2: -1.0,
            lambda1: 1.5,
            lambda2: 0.5,
            psnr_low: 24.0,
            psnr_high: 28.0,
        }
    }
}

impl RewardConfig {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..1.0).contains(&self.drth) || self.drth == 0.0 {
            return Err(Error::validation("drth must lie in (0,1)"));
        }
        if !(self.r1 > 0.0 && self.r2 < 0.0) {
            return Err(Error::validation("r1 must be positive and r2 negative"));
        }
        if !(self.lambda1 > 1.0 && self.lambda1 < 2.0) {
            return Err(Error::validation("lambda1 must lie in (1,2)"));
        }
        if !(self.lambda2 > 0.0 && self.lambda2 < 1.0) {
            return Err(Error::validation("lambda2 must lie in (0,1)"));
        }
        if self.psnr_low >= self.psnr_high {
            return Err(Error::validation("psnr_low must be below psnr_high"));
        }
        Ok(())
    }
}

/// The detection-rate reward with optional PSNR modulation.
///
/// Detection rate below threshold means the current B is too large: reward
/// Decrease (and Keep when already at the minimum). At or above threshold
/// the compression has headroom: reward Increase (and Keep at the maximum).
/// When a PSNR value is supplied, rewards agreeing with the PSNR verdict
/// are amplified by `lambda1` and conflicting ones weakened by `lambda2`.
pub fn reward(
    states: &StateSpace,
    s: usize,
    a: Action,
    detect_rate: f64,
    psnr_db: Option<f64>,
    cfg: &RewardConfig,
) -> f64 {
    let mut r = if detect_rate < cfg.drth {
        if a == Action::Decrease || (a == Action::Keep && states.is_min(s)) {
            cfg.r1
        } else {
            cfg.r2
        }
    } else if a == Action::Increase || (a == Action::Keep && states.is_max(s)) {
        cfg.r1
    } else {
        cfg.r2
    };

    if let (Some(psnr), Some(psnrth)) = (psnr_db, cfg.psnrth) {
        r *= if psnr > psnrth {
            if r > 0.0 {
                cfg.lambda1
            } else {
                cfg.lambda2
            }
        } else if r > 0.0 {
            cfg.lambda2
        } else {
            cfg.lambda1
        };
    }
    r
}

/// The PSNR band reward `r = |PSNR - psnr_low| * B` inside the good band,
/// extended with the same linear form outside it: negative punishment below
/// the band, positive above. Continuous at the low edge.
pub fn psnr_band_reward(cfg: &RewardConfig, psnr_db: f64, b: usize) -> f64 {
    (psnr_db - cfg.psnr_low) * b as f64
}
