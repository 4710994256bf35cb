//! Deterministic game core: state, physics transition, landing rules,
//! platform generation, and reward.
//!
//! Coordinates use screen convention: y grows downward, so an upward
//! launch has negative vy and gravity is positive. The player always
//! jumps toward +x; the target platform is always to the right.
//!
//! Integration is semi-implicit with a fixed 1-frame timestep: the
//! velocity update precedes the position update. For an integer force F
//! launched from the landing height this gives the exact closed form
//! `horizontal displacement = horizontal_multiplier * F * (F - 1)`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// x coordinate every episode starts from.
pub const PLAYER_START_X: f64 = 150.0;

#[derive(Debug, Error)]
pub enum GameError {
    #[error("invalid config: {0}")]
    InvalidConfig(String),
    #[error("force {0} outside [0, 100]")]
    ForceOutOfRange(f64),
    #[error("advance called with a failed jump result")]
    AdvanceOnFailure,
}

/// Physics constants of the transition function.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhysicsParams {
    /// Horizontal velocity per unit of force (game units / frame / force).
    pub horizontal_multiplier: f64,
    /// Vertical launch velocity per unit of force, applied upward
    /// (negative y).
    pub vertical_multiplier: f64,
    /// Downward velocity gained per frame.
    pub gravity: f64,
    /// Fixed timestep, always one frame.
    pub frame_dt: f64,
}

impl Default for PhysicsParams {
    fn default() -> Self {
        Self {
            horizontal_multiplier: 0.15,
            vertical_multiplier: 0.25,
            gravity: 0.5,
            frame_dt: 1.0,
        }
    }
}

impl PhysicsParams {
    pub fn validate(&self) -> Result<(), GameError> {
        for (name, v) in [
            ("horizontal_multiplier", self.horizontal_multiplier),
            ("vertical_multiplier", self.vertical_multiplier),
            ("gravity", self.gravity),
            ("frame_dt", self.frame_dt),
        ] {
            if v <= 0.0 || !v.is_finite() {
                return Err(GameError::InvalidConfig(format!(
                    "{name} must be strictly positive, got {v}"
                )));
            }
        }
        Ok(())
    }

    /// Horizontal displacement of an integer-force jump that lands at its
    /// takeoff height: `horizontal_multiplier * F * (F - 1)` at defaults.
    pub fn same_height_range(&self, force: f64) -> f64 {
        let flight_frames = 2.0 * self.vertical_multiplier * force / self.gravity - 1.0;
        self.horizontal_multiplier * force * flight_frames.max(0.0)
    }
}

/// Target platform boundaries. `top` is the landing surface height.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Platform {
    pub left: f64,
    pub top: f64,
    pub right: f64,
}

impl Platform {
    pub fn new(left: f64, top: f64, right: f64) -> Result<Self, GameError> {
        if !left.is_finite() || !right.is_finite() || left >= right {
            return Err(GameError::InvalidConfig(format!(
                "platform left {left} must be < right {right}"
            )));
        }
        Ok(Self { left, top, right })
    }

    pub fn width(&self) -> f64 {
        self.right - self.left
    }

    pub fn center(&self) -> f64 {
        (self.left + self.right) / 2.0
    }

    pub fn contains_x(&self, x: f64) -> bool {
        self.left <= x && x <= self.right
    }
}

/// Full observable state: player position, target platform, physics,
/// and the running score.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GameState {
    pub player_x: f64,
    pub player_y: f64,
    pub platform: Platform,
    pub physics: PhysicsParams,
    pub score: u32,
}

/// One integration sample of a jump.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrajectoryPoint {
    pub frame: u32,
    pub x: f64,
    pub y: f64,
    pub vx: f64,
    pub vy: f64,
}

/// Failure classification for a jump.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Miss {
    /// Landed on the platform.
    None,
    /// Landed short of the left edge.
    Short,
    /// Overshot the right edge.
    Long,
    /// Frame cap hit before a descending crossing of the platform top.
    NeverLanded,
}

/// Outcome of simulating one jump at one force.
#[derive(Debug, Clone, PartialEq)]
pub struct JumpResult {
    pub force: f64,
    pub trajectory: Vec<TrajectoryPoint>,
    /// Interpolated x where y re-crosses the platform top while
    /// descending. `None` only for `Miss::NeverLanded`.
    pub landing_x: Option<f64>,
    pub success: bool,
    pub miss: Miss,
}

/// Platform generation parameters. Defaults keep every spawned platform
/// well inside the force-100 range (gap_max + width_max = 350 vs 1485).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PlatformGenConfig {
    pub gap_min: f64,
    pub gap_max: f64,
    pub width_min: f64,
    pub width_max: f64,
    pub surface_y: f64,
    pub seed: u64,
}

impl Default for PlatformGenConfig {
    fn default() -> Self {
        Self {
            gap_min: 80.0,
            gap_max: 250.0,
            width_min: 60.0,
            width_max: 100.0,
            surface_y: 380.0,
            seed: 0,
        }
    }
}

impl PlatformGenConfig {
    pub fn validate(&self, physics: &PhysicsParams) -> Result<(), GameError> {
        physics.validate()?;
        if !(self.gap_min > 0.0 && self.gap_min <= self.gap_max) {
            return Err(GameError::InvalidConfig(format!(
                "gap range [{}, {}] must satisfy 0 < gap_min <= gap_max",
                self.gap_min, self.gap_max
            )));
        }
        if !(self.width_min > 0.0 && self.width_min <= self.width_max) {
            return Err(GameError::InvalidConfig(format!(
                "width range [{}, {}] must satisfy 0 < width_min <= width_max",
                self.width_min, self.width_max
            )));
        }
        if !self.surface_y.is_finite() {
            return Err(GameError::InvalidConfig("surface_y must be finite".into()));
        }
        let max_range = physics.same_height_range(100.0);
        let needed = self.gap_max + self.width_max;
        if needed > max_range {
            return Err(GameError::InvalidConfig(format!(
                "gap_max + width_max = {needed} exceeds the force-100 range {max_range}"
            )));
        }
        Ok(())
    }
}

/// Spawns the platform after `from_x`: a uniform gap then a uniform width,
/// on the configured surface line.
pub fn spawn_next_platform(from_x: f64, gen: &PlatformGenConfig, rng: &mut impl Rng) -> Platform {
    let left = from_x + rng.random_range(gen.gap_min..=gen.gap_max);
    let width = rng.random_range(gen.width_min..=gen.width_max);
    Platform {
        left,
        top: gen.surface_y,
        right: left + width,
    }
}

/// Builds the initial state, drawing the first platform from `rng`.
/// Used by the episode runner, which owns the generator stream.
pub fn initial_state_from_rng(
    gen: &PlatformGenConfig,
    physics: PhysicsParams,
    rng: &mut impl Rng,
) -> Result<GameState, GameError> {
    gen.validate(&physics)?;
    Ok(GameState {
        player_x: PLAYER_START_X,
        player_y: gen.surface_y,
        platform: spawn_next_platform(PLAYER_START_X, gen, rng),
        physics,
        score: 0,
    })
}

/// Builds the initial state fully determined by `gen.seed`.
pub fn initial_state(
    gen: &PlatformGenConfig,
    physics: PhysicsParams,
) -> Result<GameState, GameError> {
    let mut rng = ChaCha8Rng::seed_from_u64(gen.seed);
    initial_state_from_rng(gen, physics, &mut rng)
}

/// Simulates one jump. Pure: the state is not mutated.
///
/// Velocity is updated before position each frame. The jump ends at the
/// first frame with `vy > 0` and `y >= platform.top`; the landing x is
/// linearly interpolated on that segment at `y == platform.top`. The
/// frame cap `10 * force + 100` guarantees termination.
pub fn simulate_jump(state: &GameState, force: f64) -> Result<JumpResult, GameError> {
    if !(0.0..=100.0).contains(&force) || !force.is_finite() {
        return Err(GameError::ForceOutOfRange(force));
    }
    let p = &state.physics;
    let top = state.platform.top;
    let dt = p.frame_dt;
    let vx = force * p.horizontal_multiplier;
    let mut vy = force * -p.vertical_multiplier;
    let mut x = state.player_x;
    let mut y = state.player_y;

    let frame_cap = (10.0 * force + 100.0).ceil() as u32;
    let mut trajectory = Vec::with_capacity(frame_cap.min(256) as usize + 1);
    trajectory.push(TrajectoryPoint {
        frame: 0,
        x,
        y,
        vx,
        vy,
    });

    for frame in 1..=frame_cap {
        let (prev_x, prev_y) = (x, y);
        vy += p.gravity * dt;
        x += vx * dt;
        y += vy * dt;
        trajectory.push(TrajectoryPoint {
            frame,
            x,
            y,
            vx,
            vy,
        });

        if vy > 0.0 && y >= top {
            // Descending crossing of the platform line: interpolate on
            // the segment. y > prev_y is guaranteed here, and prev_y is
            // at or above the line for every state the generator makes.
            let t = ((top - prev_y) / (y - prev_y)).clamp(0.0, 1.0);
            let landing_x = prev_x + t * (x - prev_x);
            let miss = if state.platform.contains_x(landing_x) {
                Miss::None
            } else if landing_x < state.platform.left {
                Miss::Short
            } else {
                Miss::Long
            };
            return Ok(JumpResult {
                force,
                trajectory,
                landing_x: Some(landing_x),
                success: miss == Miss::None,
                miss,
            });
        }
    }

    Ok(JumpResult {
        force,
        trajectory,
        landing_x: None,
        success: false,
        miss: Miss::NeverLanded,
    })
}

/// Applies a successful jump: +1 point, the player moves to the landing
/// spot on the platform top, and the next platform is spawned.
pub fn advance(
    state: &GameState,
    result: &JumpResult,
    gen: &PlatformGenConfig,
    rng: &mut impl Rng,
) -> Result<GameState, GameError> {
    if !result.success {
        return Err(GameError::AdvanceOnFailure);
    }
    let landing_x = result
        .landing_x
        .expect("successful result always has a landing");
    Ok(GameState {
        player_x: landing_x,
        player_y: state.platform.top,
        platform: spawn_next_platform(landing_x, gen, rng),
        physics: state.physics,
        score: state.score + 1,
    })
}
