//! Tabular Q-learning with epsilon-greedy exploration.
//!
//! The observation space is tiny by design — state index, a decile bucket
//! of the last detection rate, and optionally which PSNR band the last
//! reconstruction fell in — so an exact table is all the function
//! approximation this problem needs.

use std::collections::HashMap;
use std::fs;
use std::path::Path;

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::rl::env::{Action, RewardConfig, StateSpace, ACTIONS};

/// Which side of the good-reconstruction band a PSNR value fell on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum PsnrBand {
    Below,
    Within,
    Above,
}

impl PsnrBand {
    pub fn classify(cfg: &RewardConfig, psnr_db: f64) -> Self {
        if psnr_db < cfg.psnr_low {
            PsnrBand::Below
        } else if psnr_db > cfg.psnr_high {
            PsnrBand::Above
        } else {
            PsnrBand::Within
        }
    }

    fn token(&self) -> &'static str {
        match self {
            PsnrBand::Below => "below",
            PsnrBand::Within => "within",
            PsnrBand::Above => "above",
        }
    }

    fn parse(s: &str) -> Result<Option<Self>> {
        match s {
            "none" => Ok(None),
            "below" => Ok(Some(PsnrBand::Below)),
            "within" => Ok(Some(PsnrBand::Within)),
            "above" => Ok(Some(PsnrBand::Above)),
            other => Err(Error::validation(format!("unknown psnr band {other:?}"))),
        }
    }
}

/// What the agent sees at each adaptation step.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Observation {
    pub state_idx: usize,
    /// `floor(rate * 10)` clipped to 0..=9.
    pub rate_bucket: u8,
    pub psnr_band: Option<PsnrBand>,
}

impl Observation {
    pub fn new(state_idx: usize, detect_rate: f64, psnr_band: Option<PsnrBand>) -> Self {
        let bucket = ((detect_rate * 10.0).floor() as i64).clamp(0, 9) as u8;
        Self { state_idx, rate_bucket: bucket, psnr_band }
    }
}

/// `(Observation, Action) -> value` with a default of zero for unseen pairs.
#[derive(Debug, Clone, Default)]
pub struct QTable {
    values: HashMap<(Observation, Action), f64>,
}

impl QTable {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn get(&self, o: &Observation, a: Action) -> f64 {
        self.values.get(&(*o, a)).copied().unwrap_or(0.0)
    }

    pub fn set(&mut self, o: Observation, a: Action, v: f64) {
        self.values.insert((o, a), v);
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Greedy action with ties broken by the fixed order
    /// Decrease < Keep < Increase.
    pub fn greedy_action(&self, o: &Observation) -> Action {
        let mut best = ACTIONS[0];
        let mut best_v = self.get(o, best);
        for &a in &ACTIONS[1..] {
            let v = self.get(o, a);
            if v > best_v {
                best = a;
                best_v = v;
            }
        }
        best
    }

    /// Sorted snapshot for persistence and equality checks.
    fn sorted_entries(&self) -> Vec<((Observation, Action), f64)> {
        let mut entries: Vec<_> = self.values.iter().map(|(k, v)| (*k, *v)).collect();
        entries.sort_by_key(|((o, a), _)| (o.state_idx, o.rate_bucket, o.psnr_band, *a));
        entries
    }
}

impl PartialEq for QTable {
    fn eq(&self, other: &Self) -> bool {
        self.sorted_entries() == other.sorted_entries()
    }
}

/// Epsilon-greedy action selection from an explicit generator.
pub fn select_action<R: Rng>(q: &QTable, o: &Observation, epsilon: f64, rng: &mut R) -> Action {
    if epsilon > 0.0 && rng.gen::<f64>() < epsilon {
        ACTIONS[rng.gen_range(0..ACTIONS.len())]
    } else {
        q.greedy_action(o)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrainConfig {
    pub episodes: usize,
    pub steps_per_episode: usize,
    pub learning_rate: f64,
    pub discount: f64,
    pub epsilon_start: f64,
    pub epsilon_end: f64,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            episodes: 500,
            steps_per_episode: 50,
            learning_rate: 0.1,
            discount: 0.9,
            epsilon_start: 1.0,
            epsilon_end: 0.05,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.learning_rate) || self.learning_rate == 0.0 {
            return Err(Error::validation("learning_rate must lie in (0,1]"));
        }
        if !(0.0..1.0).contains(&self.discount) {
            return Err(Error::validation("discount must lie in [0,1)"));
        }
        if !(self.epsilon_end <= self.epsilon_start && self.epsilon_start <= 1.0 && self.epsilon_end >= 0.0) {
            return Err(Error::validation("need 0 <= epsilon_end <= epsilon_start <= 1"));
        }
        Ok(())
    }

    /// Linear decay over episodes.
    pub fn epsilon_at(&self, episode: usize) -> f64 {
        if self.episodes <= 1 {
            return self.epsilon_start;
        }
        let frac = episode as f64 / (self.episodes - 1) as f64;
        self.epsilon_start + (self.epsilon_end - self.epsilon_start) * frac
    }
}

/// One-step temporal-difference update.
pub fn update(q: &mut QTable, o: &Observation, a: Action, r: f64, o_next: &Observation, cfg: &TrainConfig) {
    let bootstrap = ACTIONS.iter().map(|&a2| q.get(o_next, a2)).fold(f64::NEG_INFINITY, f64::max);
    let old = q.get(o, a);
    let target = r + cfg.discount * bootstrap;
    q.set(*o, a, old + cfg.learning_rate * (target - old));
}

/// Episodic environment driven by the training loop. Episodes have no
/// terminal state here; they are cut at `steps_per_episode`.
pub trait Environment {
    /// Starts an episode and returns the initial observation.
    fn reset(&mut self, rng: &mut ChaCha8Rng) -> Observation;
    /// Applies an action; returns the reward and the next observation.
    fn step(&mut self, action: Action, rng: &mut ChaCha8Rng) -> (f64, Observation);
}

#[derive(Debug, Clone)]
pub struct TrainResult {
    pub q: QTable,
    /// Cumulative reward per episode.
    pub episode_returns: Vec<f64>,
}

/// Q-learning over an environment; deterministic under a fixed seed.
pub fn train<E: Environment + ?Sized>(env: &mut E, cfg: &TrainConfig) -> Result<TrainResult> {
    use rand::SeedableRng;
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut q = QTable::new();
    let mut returns = Vec::with_capacity(cfg.episodes);
    let mut reward_sup: f64 = 0.0;

    for episode in 0..cfg.episodes {
        let eps = cfg.epsilon_at(episode);
        let mut obs = env.reset(&mut rng);
        let mut ret = 0.0;
        for _ in 0..cfg.steps_per_episode {
            let a = select_action(&q, &obs, eps, &mut rng);
            let (r, next) = env.step(a, &mut rng);
            update(&mut q, &obs, a, r, &next, cfg);
            reward_sup = reward_sup.max(r.abs());
            // Contraction bound: with zero-initialized values, no entry can
            // exceed sup|r| / (1 - discount).
            let bound = reward_sup / (1.0 - cfg.discount) + 1e-9;
            let v = q.get(&obs, a);
            assert!(v.abs() <= bound, "Q value {v} escaped contraction bound {bound}");
            ret += r;
            obs = next;
        }
        returns.push(ret);
    }
    Ok(TrainResult { q, episode_returns: returns })
}

/// Materialized greedy policy over the full observation space: total and
/// deterministic, defaulting to Decrease where the table is all zeros.
pub fn greedy_policy(q: &QTable, states: &StateSpace) -> HashMap<Observation, Action> {
    let mut policy = HashMap::new();
    let bands = [None, Some(PsnrBand::Below), Some(PsnrBand::Within), Some(PsnrBand::Above)];
    for state_idx in 0..states.len() {
        for bucket in 0..10u8 {
            for band in bands {
                let o = Observation { state_idx, rate_bucket: bucket, psnr_band: band };
                policy.insert(o, q.greedy_action(&o));
            }
        }
    }
    policy
}

// ---------------------------------------------------------------------------
// Persistence: `state_idx rate_bucket psnr_band action value` per line.
// ---------------------------------------------------------------------------

pub fn save_qtable(q: &QTable, path: &Path) -> Result<()> {
    let mut out = String::new();
    for ((o, a), v) in q.sorted_entries() {
        let band = o.psnr_band.map_or("none", |b| b.token());
        out.push_str(&format!("{} {} {band} {} {v:e}\n", o.state_idx, o.rate_bucket, a.name()));
    }
    fs::write(path, out).map_err(|e| Error::io_path(path, e))
}

pub fn load_qtable(path: &Path) -> Result<QTable> {
    let text = fs::read_to_string(path).map_err(|e| Error::io_path(path, e))?;
    let mut q = QTable::new();
    for (ln, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split_whitespace().collect();
        if fields.len() != 5 {
            return Err(Error::io(format!(
                "{}:{}: expected `state_idx rate_bucket psnr_band action value`",
                path.display(),
                ln + 1
            )));
        }
        let state_idx: usize = fields[0]
            .parse()
            .map_err(|_| Error::io(format!("{}:{}: bad state index", path.display(), ln + 1)))?;
        let bucket: u8 = fields[1]
            .parse()
            .map_err(|_| Error::io(format!("{}:{}: bad rate bucket", path.display(), ln + 1)))?;
        if bucket > 9 {
            return Err(Error::io(format!("{}:{}: rate bucket {bucket} out of 0..=9", path.display(), ln + 1)));
        }
        let band = PsnrBand::parse(fields[2])
            .map_err(|e| Error::io(format!("{}:{}: {e}", path.display(), ln + 1)))?;
        let action = Action::parse(fields[3])
            .map_err(|e| Error::io(format!("{}:{}: {e}", path.display(), ln + 1)))?;
        let value: f64 = fields[4]
            .parse()
            .map_err(|_| Error::io(format!("{}:{}: bad value", path.display(), ln + 1)))?;
        q.set(Observation { state_idx, rate_bucket: bucket, psnr_band: band }, action, value);
    }
    Ok(q)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;

    fn obs(state_idx: usize, bucket: u8) -> Observation {
        Observation { state_idx, rate_bucket: bucket, psnr_band: None }
    }

    #[test]
    fn observation_buckets_clip() {
        assert_eq!(Observation::new(0, 0.0, None).rate_bucket, 0);
        assert_eq!(Observation::new(0, 0.34, None).rate_bucket, 3);
        assert_eq!(Observation::new(0, 0.999, None).rate_bucket, 9);
        assert_eq!(Observation::new(0, 1.0, None).rate_bucket, 9);
    }

    #[test]
    fn band_classification_uses_band_edges() {
        let cfg = RewardConfig::default();
        assert_eq!(PsnrBand::classify(&cfg, 20.0), PsnrBand::Below);
        assert_eq!(PsnrBand::classify(&cfg, 24.0), PsnrBand::Within);
        assert_eq!(PsnrBand::classify(&cfg, 28.0), PsnrBand::Within);
        assert_eq!(PsnrBand::classify(&cfg, 28.1), PsnrBand::Above);
    }

    #[test]
    fn greedy_selection_and_tie_break() {
        let mut q = QTable::new();
        let o = obs(1, 5);
        q.set(o, Action::Decrease, 0.1);
        q.set(o, Action::Keep, 0.9);
        q.set(o, Action::Increase, 0.3);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert_eq!(select_action(&q, &o, 0.0, &mut rng), Action::Keep);

        // All-equal values fall back to the first action in fixed order.
        let o2 = obs(2, 3);
        assert_eq!(select_action(&q, &o2, 0.0, &mut rng), Action::Decrease);
    }

    #[test]
    fn full_exploration_is_uniform() {
        let q = QTable::new();
        let o = obs(0, 0);
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let mut counts = [0usize; 3];
        let n = 10_000;
        for _ in 0..n {
            match select_action(&q, &o, 1.0, &mut rng) {
                Action::Decrease => counts[0] += 1,
                Action::Keep => counts[1] += 1,
                Action::Increase => counts[2] += 1,
            }
        }
        for c in counts {
            let freq = c as f64 / n as f64;
            assert!((freq - 1.0 / 3.0).abs() <= 0.02, "frequency {freq}");
        }
    }

    #[test]
    fn update_from_zero_bootstrap() {
        let mut q = QTable::new();
        let cfg = TrainConfig::default();
        let o = obs(0, 0);
        let next = obs(1, 0);
        update(&mut q, &o, Action::Increase, 1.0, &next, &cfg);
        assert!((q.get(&o, Action::Increase) - 0.1).abs() < 1e-15);
    }

    #[test]
    fn update_decays_geometrically_with_zero_reward() {
        let mut q = QTable::new();
        let cfg = TrainConfig::default();
        let o = obs(0, 0);
        let next = obs(1, 0);
        q.set(o, Action::Keep, 1.0);
        for k in 1..=5 {
            update(&mut q, &o, Action::Keep, 0.0, &next, &cfg);
            let expect = (1.0 - cfg.learning_rate).powi(k);
            assert!((q.get(&o, Action::Keep) - expect).abs() < 1e-12);
        }
    }

    #[test]
    fn repeated_updates_converge_to_constant_reward() {
        let mut q = QTable::new();
        let cfg = TrainConfig::default();
        let o = obs(0, 0);
        let terminal = obs(5, 9); // all-zero bootstrap target
        let r = 1.0;
        let mut steps = 0;
        while (q.get(&o, Action::Keep) - r).abs() > 1e-6 {
            update(&mut q, &o, Action::Keep, r, &terminal, &cfg);
            steps += 1;
            assert!(steps <= 200, "did not converge in 200 updates");
        }
        assert!(steps <= 200);
    }

    /// Degenerate MDP: Increase pays +1, everything else -1.
    struct IncreaseOnly {
        states: StateSpace,
        s: usize,
    }

    impl Environment for IncreaseOnly {
        fn reset(&mut self, rng: &mut ChaCha8Rng) -> Observation {
            self.s = rng.gen_range(0..self.states.len());
            obs(self.s, 5)
        }

        fn step(&mut self, action: Action, _rng: &mut ChaCha8Rng) -> (f64, Observation) {
            let r = if action == Action::Increase { 1.0 } else { -1.0 };
            if action == Action::Increase && self.s + 1 < self.states.len() {
                self.s += 1;
            }
            (r, obs(self.s, 5))
        }
    }

    #[test]
    fn train_learns_the_degenerate_policy() {
        let states = StateSpace::default();
        let mut env = IncreaseOnly { states: states.clone(), s: 0 };
        let cfg = TrainConfig { episodes: 300, ..TrainConfig::default() };
        let result = train(&mut env, &cfg).unwrap();
        for state_idx in 0..states.len() {
            let o = obs(state_idx, 5);
            assert_eq!(result.q.greedy_action(&o), Action::Increase, "state {state_idx}");
        }
        assert_eq!(result.episode_returns.len(), 300);
    }

    #[test]
    fn zero_episodes_trains_nothing() {
        let mut env = IncreaseOnly { states: StateSpace::default(), s: 0 };
        let cfg = TrainConfig { episodes: 0, ..TrainConfig::default() };
        let result = train(&mut env, &cfg).unwrap();
        assert!(result.q.is_empty());
        assert!(result.episode_returns.is_empty());
    }

    #[test]
    fn training_is_deterministic_under_seed() {
        let cfg = TrainConfig { episodes: 50, seed: 9, ..TrainConfig::default() };
        let mut env1 = IncreaseOnly { states: StateSpace::default(), s: 0 };
        let mut env2 = IncreaseOnly { states: StateSpace::default(), s: 0 };
        let a = train(&mut env1, &cfg).unwrap();
        let b = train(&mut env2, &cfg).unwrap();
        assert_eq!(a.q, b.q);
        assert_eq!(a.episode_returns, b.episode_returns);
    }

    #[test]
    fn greedy_policy_is_total_and_shift_invariant() {
        let states = StateSpace::default();
        let mut q = QTable::new();
        let o = obs(3, 7);
        q.set(o, Action::Decrease, 0.2);
        q.set(o, Action::Keep, 0.8);
        q.set(o, Action::Increase, 0.5);
        let policy = greedy_policy(&q, &states);
        assert_eq!(policy.len(), states.len() * 10 * 4);
        assert_eq!(policy[&o], Action::Keep);
        // Unseen observations default to Decrease.
        assert_eq!(policy[&obs(0, 0)], Action::Decrease);

        // Adding a constant to one observation's values keeps the argmax.
        let mut shifted = q.clone();
        for a in ACTIONS {
            shifted.set(o, a, q.get(&o, a) + 3.7);
        }
        assert_eq!(greedy_policy(&shifted, &states)[&o], Action::Keep);
    }

    #[test]
    fn qtable_round_trip() {
        let mut q = QTable::new();
        q.set(obs(0, 9), Action::Increase, 1.25);
        q.set(
            Observation { state_idx: 3, rate_bucket: 2, psnr_band: Some(PsnrBand::Above) },
            Action::Keep,
            -0.5,
        );
        q.set(obs(5, 0), Action::Decrease, 1e-12);
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("q.txt");
        save_qtable(&q, &path).unwrap();
        let loaded = load_qtable(&path).unwrap();
        assert_eq!(q, loaded);

        std::fs::write(&path, "0 2 nowhere keep 1\n").unwrap();
        assert!(load_qtable(&path).is_err());
    }
}
