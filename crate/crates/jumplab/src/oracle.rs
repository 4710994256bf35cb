//! Inverse ballistics: which force lands at a target x, and the full
//! window of forces that land on a platform.
//!
//! The simulator is authoritative. The algebraic inverse of the
//! same-height closed form only seeds and sanity-checks the binary
//! search; interpolation and the integration order make the discrete
//! model the real ground truth.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::game::{simulate_jump, GameState, PhysicsParams};

/// Default landing tolerance, well below half the minimum platform width.
pub const DEFAULT_TOL: f64 = 0.5;

const MAX_BISECTION_STEPS: u32 = 64;

#[derive(Debug, Error)]
pub enum OracleError {
    #[error("distance must be >= 0, got {0}")]
    NegativeDistance(f64),
    #[error("target x {target_x} behind player x {player_x}")]
    TargetBehindPlayer { target_x: f64, player_x: f64 },
    #[error("target x {target_x} beyond maximum landing x {max_landing_x}")]
    Unreachable { target_x: f64, max_landing_x: f64 },
}

/// The contiguous interval of forces that land on a platform, plus the
/// force aimed at its center.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ForceWindow {
    pub min_force: f64,
    pub max_force: f64,
    pub target_force: f64,
}

/// Inverts `distance = 0.15 * F * (F - 1)` for the default constants:
/// `F = (1 + sqrt(1 + d / 0.0375)) / 2`. May return a value above 100;
/// the caller decides reachability.
pub fn closed_form_force(distance: f64) -> Result<f64, OracleError> {
    closed_form_force_with(&PhysicsParams::default(), distance)
}

/// Same inversion for arbitrary physics constants.
pub fn closed_form_force_with(physics: &PhysicsParams, distance: f64) -> Result<f64, OracleError> {
    if distance < 0.0 || distance.is_nan() {
        return Err(OracleError::NegativeDistance(distance));
    }
    // d = hm*F*(2*vm*F/g - 1)  =>  a*F^2 - hm*F - d = 0
    let hm = physics.horizontal_multiplier;
    let a = 2.0 * physics.vertical_multiplier * hm / physics.gravity;
    Ok((hm + (hm * hm + 4.0 * a * distance).sqrt()) / (2.0 * a))
}

fn landing_x(state: &GameState, force: f64) -> f64 {
    simulate_jump(state, force)
        .expect("force is kept in [0, 100] by the solver")
        .landing_x
        .unwrap_or(f64::NEG_INFINITY)
}

/// Bisects for a force whose landing x falls in `[band_lo, band_hi]`,
/// seeded with the closed-form estimate for the band midpoint. The
/// landing x is monotone in force above the takeoff dead zone, so the
/// search converges well inside the step cap.
fn bisect_to_band(state: &GameState, band_lo: f64, band_hi: f64) -> Result<f64, OracleError> {
    let target_x = 0.5 * (band_lo + band_hi);
    let max_landing_x = landing_x(state, 100.0);
    if max_landing_x < band_lo {
        return Err(OracleError::Unreachable {
            target_x,
            max_landing_x,
        });
    }

    let seed = closed_form_force_with(&state.physics, target_x - state.player_x)?.clamp(0.0, 100.0);
    let in_band = |x: f64| (band_lo..=band_hi).contains(&x);
    let seed_landing = landing_x(state, seed);
    let mut best = (seed, (seed_landing - target_x).abs());
    if in_band(seed_landing) {
        return Ok(seed);
    }

    let (mut lo, mut hi) = if seed_landing < target_x {
        (seed, 100.0)
    } else {
        (0.0, seed)
    };
    for _ in 0..MAX_BISECTION_STEPS {
        let mid = 0.5 * (lo + hi);
        let x = landing_x(state, mid);
        let err = (x - target_x).abs();
        if err < best.1 {
            best = (mid, err);
        }
        if in_band(x) {
            return Ok(mid);
        }
        if x < target_x {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(best.0)
}

/// Finds a force in [0, 100] whose landing x is within `tol` of
/// `target_x`, by bisection over the monotone forward model seeded with
/// the closed-form estimate.
pub fn solve_force(state: &GameState, target_x: f64, tol: f64) -> Result<f64, OracleError> {
    assert!(tol > 0.0, "tolerance must be positive");
    if target_x < state.player_x {
        return Err(OracleError::TargetBehindPlayer {
            target_x,
            player_x: state.player_x,
        });
    }
    let max_landing_x = landing_x(state, 100.0);
    if max_landing_x + tol < target_x {
        return Err(OracleError::Unreachable {
            target_x,
            max_landing_x,
        });
    }
    bisect_to_band(state, target_x - tol, target_x + tol)
}

/// Solves the force window for the state's platform. The edge solves use
/// one-sided bands pointing onto the platform, so every force in
/// `[min_force, max_force]` lands successfully; each edge force still
/// lands within `tol` of its edge. `None` when even the left edge is out
/// of range.
pub fn force_window(state: &GameState, tol: f64) -> Result<Option<ForceWindow>, OracleError> {
    assert!(tol > 0.0, "tolerance must be positive");
    let plat = &state.platform;
    let max_landing_x = landing_x(state, 100.0);
    if max_landing_x < plat.left {
        return Ok(None);
    }
    let band = tol.min(plat.width() / 2.0);
    let min_force = bisect_to_band(state, plat.left, plat.left + band)?;
    let solve_or_cap = |band_lo: f64, band_hi: f64| -> Result<f64, OracleError> {
        if max_landing_x <= band_hi {
            Ok(100.0)
        } else {
            bisect_to_band(state, band_lo, band_hi)
        }
    };
    let center = plat.center();
    let target_force = solve_or_cap(center - band, center + band)?.max(min_force);
    let max_force = solve_or_cap(plat.right - band, plat.right)?.max(target_force);
    Ok(Some(ForceWindow {
        min_force,
        max_force,
        target_force,
    }))
}
