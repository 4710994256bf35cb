//! The four-stage agent architecture: perception formatting, a uniform
//! decision interface, action emission, and a bounded feedback store —
//! plus the deterministic baseline agents.

use std::collections::VecDeque;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::game::{GameState, JumpResult, Miss, PhysicsParams, Platform};
use crate::oracle::{force_window, DEFAULT_TOL};

/// How many feedback entries the store keeps.
pub const DEFAULT_FEEDBACK_CAPACITY: usize = 5;

/// Stream split so the agent's noise draws never alias the platform
/// generator seeded from the same episode seed.
const NOISE_STREAM_SALT: u64 = 0x9e37_79b9_7f4a_7c15;

#[derive(Debug, Error)]
pub enum AgentError {
    #[error("agent unavailable: {0}")]
    Unavailable(String),
}

/// Everything an agent is shown before a jump.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Observation {
    pub player_x: f64,
    pub player_y: f64,
    pub plat_left: f64,
    pub plat_top: f64,
    pub plat_right: f64,
    pub horizontal_distance_to_center: f64,
    pub physics: PhysicsParams,
    pub jump_index: u32,
}

/// Pure projection of the state into the agent-facing observation.
pub fn perceive(state: &GameState, jump_index: u32) -> Observation {
    Observation {
        player_x: state.player_x,
        player_y: state.player_y,
        plat_left: state.platform.left,
        plat_top: state.platform.top,
        plat_right: state.platform.right,
        horizontal_distance_to_center: state.platform.center() - state.player_x,
        physics: state.physics,
        jump_index,
    }
}

impl Observation {
    /// Rebuilds the game state the observation was projected from
    /// (score is not observable and is set to zero).
    pub fn to_state(&self) -> GameState {
        GameState {
            player_x: self.player_x,
            player_y: self.player_y,
            platform: Platform {
                left: self.plat_left,
                top: self.plat_top,
                right: self.plat_right,
            },
            physics: self.physics,
            score: 0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ParseStatus {
    Ok,
    OutOfRange,
    Unparseable,
}

/// One agent decision: the raw output, the force parsed from it (when
/// valid), optional self-reported distance, and the decision latency.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Decision {
    pub force: Option<f64>,
    pub raw_output: String,
    pub reported_distance: Option<f64>,
    pub latency_ms: u64,
    pub parse_status: ParseStatus,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Outcome {
    Success,
    Short,
    Long,
    FormatFailure,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FeedbackEntry {
    pub jump_index: u32,
    pub force: Option<f64>,
    pub outcome: Outcome,
    /// Landing x minus the nearest platform edge when the jump failed;
    /// zero on success and on format failures.
    pub signed_miss: f64,
}

/// Bounded record of the most recent jumps, oldest first.
#[derive(Debug, Clone, Default)]
pub struct FeedbackStore {
    entries: VecDeque<FeedbackEntry>,
    capacity: usize,
}

impl FeedbackStore {
    pub fn new() -> Self {
        Self::with_capacity(DEFAULT_FEEDBACK_CAPACITY)
    }

    pub fn with_capacity(capacity: usize) -> Self {
        Self {
            entries: VecDeque::with_capacity(capacity),
            capacity: capacity.max(1),
        }
    }

    pub fn entries(&self) -> impl Iterator<Item = &FeedbackEntry> {
        self.entries.iter()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    fn push(&mut self, entry: FeedbackEntry) {
        if self.entries.len() == self.capacity {
            self.entries.pop_front();
        }
        self.entries.push_back(entry);
    }
}

fn outcome_of(result: &JumpResult) -> Outcome {
    match result.miss {
        Miss::None => Outcome::Success,
        Miss::Short | Miss::NeverLanded => Outcome::Short,
        Miss::Long => Outcome::Long,
    }
}

/// Summarizes a jump into the feedback store. `result` is `None` when no
/// simulation ran because the decision carried no valid force.
pub fn record_feedback(
    store: &mut FeedbackStore,
    result: Option<(&JumpResult, &Platform)>,
    decision: &Decision,
    jump_index: u32,
) -> FeedbackEntry {
    let entry = match result {
        None => FeedbackEntry {
            jump_index,
            force: decision.force,
            outcome: Outcome::FormatFailure,
            signed_miss: 0.0,
        },
        Some((result, platform)) => {
            let outcome = outcome_of(result);
            let signed_miss = match (outcome, result.landing_x) {
                (Outcome::Short, Some(lx)) => lx - platform.left,
                (Outcome::Long, Some(lx)) => lx - platform.right,
                _ => 0.0,
            };
            FeedbackEntry {
                jump_index,
                force: Some(result.force),
                outcome,
                signed_miss,
            }
        }
    };
    store.push(entry);
    entry
}

/// Uniform decision contract every agent satisfies.
pub trait Agent: Send {
    /// Short descriptor stamped onto jump records ("oracle", "noisy:5",
    /// "random", or the prompt version for LLM agents).
    fn descriptor(&self) -> String;

    /// Resets per-episode state, deterministically from the episode seed.
    fn on_episode_start(&mut self, _episode_seed: u64) {}

    fn decide(
        &mut self,
        observation: &Observation,
        feedback: &FeedbackStore,
    ) -> Result<Decision, AgentError>;
}

fn numeric_decision(force: f64, started: Instant) -> Decision {
    Decision {
        force: Some(force),
        raw_output: format!("{force:.4}"),
        reported_distance: None,
        latency_ms: started.elapsed().as_millis() as u64,
        parse_status: ParseStatus::Ok,
    }
}

/// Plays the center of the force window; never misses on generated
/// states.
#[derive(Debug, Default)]
pub struct OracleAgent;

impl OracleAgent {
    fn target_force(observation: &Observation) -> f64 {
        let state = observation.to_state();
        match force_window(&state, DEFAULT_TOL) {
            Ok(Some(w)) => w.target_force,
            // Out of range: all-out is the best available action.
            _ => 100.0,
        }
    }
}

impl Agent for OracleAgent {
    fn descriptor(&self) -> String {
        "oracle".into()
    }

    fn decide(
        &mut self,
        observation: &Observation,
        _feedback: &FeedbackStore,
    ) -> Result<Decision, AgentError> {
        let started = Instant::now();
        Ok(numeric_decision(Self::target_force(observation), started))
    }
}

/// Oracle target plus seeded gaussian noise, clamped to [0, 100].
/// Sigma 0 degenerates to the plain oracle.
#[derive(Debug)]
pub struct NoisyOracleAgent {
    sigma: f64,
    rng: ChaCha8Rng,
}

impl NoisyOracleAgent {
    pub fn new(sigma: f64) -> Self {
        assert!(sigma >= 0.0, "sigma must be >= 0");
        Self {
            sigma,
            rng: ChaCha8Rng::seed_from_u64(NOISE_STREAM_SALT),
        }
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }
}

impl Agent for NoisyOracleAgent {
    fn descriptor(&self) -> String {
        format!("noisy:{}", self.sigma)
    }

    fn on_episode_start(&mut self, episode_seed: u64) {
        self.rng = ChaCha8Rng::seed_from_u64(episode_seed ^ NOISE_STREAM_SALT);
    }

    fn decide(
        &mut self,
        observation: &Observation,
        _feedback: &FeedbackStore,
    ) -> Result<Decision, AgentError> {
        let started = Instant::now();
        let target = OracleAgent::target_force(observation);
        // Draw the unit deviate even at sigma 0 so matched seeds stay
        // aligned across sigma values.
        let z = Normal::new(0.0, 1.0).unwrap().sample(&mut self.rng);
        let force = (target + self.sigma * z).clamp(0.0, 100.0);
        Ok(numeric_decision(force, started))
    }
}

/// Uniform force in [0, 100].
#[derive(Debug)]
pub struct RandomAgent {
    rng: ChaCha8Rng,
}

impl RandomAgent {
    pub fn new() -> Self {
        Self {
            rng: ChaCha8Rng::seed_from_u64(NOISE_STREAM_SALT),
        }
    }
}

impl Default for RandomAgent {
    fn default() -> Self {
        Self::new()
    }
}

impl Agent for RandomAgent {
    fn descriptor(&self) -> String {
        "random".into()
    }

    fn on_episode_start(&mut self, episode_seed: u64) {
        self.rng = ChaCha8Rng::seed_from_u64(episode_seed ^ NOISE_STREAM_SALT);
    }

    fn decide(
        &mut self,
        _observation: &Observation,
        _feedback: &FeedbackStore,
    ) -> Result<Decision, AgentError> {
        let started = Instant::now();
        let force = self.rng.random_range(0.0..=100.0);
        Ok(numeric_decision(force, started))
    }
}
