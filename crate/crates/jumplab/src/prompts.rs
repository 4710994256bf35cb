//! Prompt assembly for the three agent versions, truthful few-shot
//! example generation, and robust parsing of model output.
//!
//! Prompts are rendered from plain-text templates with `{placeholder}`
//! markers. The placeholder set: `player_x`, `player_y`, `plat_left`,
//! `plat_top`, `plat_right`, `distance_to_center`, `constants`,
//! `examples_block`, `feedback_block`. The template files under
//! `templates/` are part of the public interface; `PromptTemplates::builtin`
//! embeds them, `PromptTemplates::load_dir` reads the same three file
//! names from a directory.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::agent::{perceive, FeedbackStore, Observation, Outcome};
use crate::game::{
    simulate_jump, GameState, PhysicsParams, Platform, PlatformGenConfig, PLAYER_START_X,
};
use crate::oracle::{force_window, DEFAULT_TOL};

/// Stable marker substrings used to attribute a prompt to its version.
pub const MARKER_OUTPUT_FORMAT: &str = "only a numerical value between 0 and 100";
pub const MARKER_REASONING: &str = "Reason step by step before deciding";
pub const MARKER_EXAMPLES: &str = "Worked examples:";
pub const MARKER_CALIBRATION: &str = "Calibration:";
pub const MARKER_WARNINGS: &str = "Common failure warnings:";
pub const MARKER_FEEDBACK: &str = "Recent jumps this episode:";
pub const MARKER_VALIDATION: &str = "validate your decision";

#[derive(Debug, Error)]
pub enum PromptError {
    #[error("{version} prompt needs 3-5 examples, got {got}")]
    MissingExamples { version: PromptVersion, got: usize },
    #[error("example count must be in [3, 5], got {0}")]
    InvalidExampleCount(usize),
    #[error("template file missing: {}", .0.display())]
    TemplateMissing(PathBuf),
    #[error("failed to read template {}: {source}", path.display())]
    TemplateIo {
        path: PathBuf,
        source: std::io::Error,
    },
}

/// The three prompt designs of escalating structure.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PromptVersion {
    Basic,
    Optimized,
    Complete,
}

impl PromptVersion {
    pub const ALL: [PromptVersion; 3] = [
        PromptVersion::Basic,
        PromptVersion::Optimized,
        PromptVersion::Complete,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            PromptVersion::Basic => "basic",
            PromptVersion::Optimized => "optimized",
            PromptVersion::Complete => "complete",
        }
    }

    /// Attributes a rendered prompt to its version by the stable marker
    /// strings. `None` when the text is not one of our prompts.
    pub fn detect(prompt: &str) -> Option<PromptVersion> {
        if prompt.contains(MARKER_WARNINGS) && prompt.contains(MARKER_FEEDBACK) {
            Some(PromptVersion::Complete)
        } else if prompt.contains(MARKER_REASONING) && prompt.contains(MARKER_EXAMPLES) {
            Some(PromptVersion::Optimized)
        } else if prompt.contains(MARKER_OUTPUT_FORMAT) {
            Some(PromptVersion::Basic)
        } else {
            None
        }
    }
}

impl fmt::Display for PromptVersion {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for PromptVersion {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "basic" => Ok(PromptVersion::Basic),
            "optimized" => Ok(PromptVersion::Optimized),
            "complete" => Ok(PromptVersion::Complete),
            other => Err(format!(
                "unknown prompt version '{other}' (expected basic|optimized|complete)"
            )),
        }
    }
}

/// A truthful worked example: the force is the oracle's center shot for
/// the snapshot and has been re-simulated to a successful landing.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FewShotExample {
    pub observation: Observation,
    pub reasoning: String,
    pub force: f64,
    pub outcome: Outcome,
}

/// The three version templates, keyed by file name under `templates/`.
#[derive(Debug, Clone)]
pub struct PromptTemplates {
    basic: String,
    optimized: String,
    complete: String,
}

impl PromptTemplates {
    /// The templates shipped with the crate.
    pub fn builtin() -> Self {
        Self {
            basic: include_str!("../templates/basic.txt").to_string(),
            optimized: include_str!("../templates/optimized.txt").to_string(),
            complete: include_str!("../templates/complete.txt").to_string(),
        }
    }

    /// Loads `basic.txt`, `optimized.txt`, `complete.txt` from `dir`.
    pub fn load_dir(dir: &Path) -> Result<Self, PromptError> {
        let read = |name: &str| -> Result<String, PromptError> {
            let path = dir.join(name);
            if !path.is_file() {
                return Err(PromptError::TemplateMissing(path));
            }
            std::fs::read_to_string(&path)
                .map_err(|source| PromptError::TemplateIo { path, source })
        };
        Ok(Self {
            basic: read("basic.txt")?,
            optimized: read("optimized.txt")?,
            complete: read("complete.txt")?,
        })
    }

    fn template(&self, version: PromptVersion) -> &str {
        match version {
            PromptVersion::Basic => &self.basic,
            PromptVersion::Optimized => &self.optimized,
            PromptVersion::Complete => &self.complete,
        }
    }

    /// Renders the prompt for `version`. Basic ignores examples and
    /// feedback; Optimized requires 3-5 examples; Complete additionally
    /// consumes the feedback store. Byte-identical output for identical
    /// inputs.
    pub fn build_prompt(
        &self,
        version: PromptVersion,
        obs: &Observation,
        feedback: &FeedbackStore,
        examples: &[FewShotExample],
    ) -> Result<String, PromptError> {
        if version != PromptVersion::Basic && !(3..=5).contains(&examples.len()) {
            return Err(PromptError::MissingExamples {
                version,
                got: examples.len(),
            });
        }
        let mut text = self.template(version).to_string();
        for (key, value) in [
            ("{player_x}", fmt_num(obs.player_x)),
            ("{player_y}", fmt_num(obs.player_y)),
            ("{plat_left}", fmt_num(obs.plat_left)),
            ("{plat_top}", fmt_num(obs.plat_top)),
            ("{plat_right}", fmt_num(obs.plat_right)),
            (
                "{distance_to_center}",
                fmt_num(obs.horizontal_distance_to_center),
            ),
            ("{constants}", render_constants(&obs.physics)),
            ("{examples_block}", render_examples(examples)),
            ("{feedback_block}", render_feedback(feedback)),
        ] {
            text = text.replace(key, &value);
        }
        Ok(text)
    }
}

fn fmt_num(x: f64) -> String {
    format!("{x}")
}

fn render_constants(p: &PhysicsParams) -> String {
    format!(
        "- horizontal velocity = force x {hm} (game units per frame)\n\
         - vertical launch velocity = force x {vm}, directed upward\n\
         - gravity adds {g} downward velocity each frame",
        hm = fmt_num(p.horizontal_multiplier),
        vm = fmt_num(p.vertical_multiplier),
        g = fmt_num(p.gravity),
    )
}

fn render_examples(examples: &[FewShotExample]) -> String {
    if examples.is_empty() {
        return "(none)".into();
    }
    let mut out = String::new();
    for (i, ex) in examples.iter().enumerate() {
        if i > 0 {
            out.push('\n');
        }
        let o = &ex.observation;
        out.push_str(&format!(
            "Example {n}:\n\
             Input: player ({px}, {py}), platform ({l}, {t}, {r}).\n\
             Reasoning: {reasoning}\n\
             Recommended force: {force:.2}\n\
             Expected outcome: successful landing\n",
            n = i + 1,
            px = fmt_num(o.player_x),
            py = fmt_num(o.player_y),
            l = fmt_num(o.plat_left),
            t = fmt_num(o.plat_top),
            r = fmt_num(o.plat_right),
            reasoning = ex.reasoning,
            force = ex.force,
        ));
    }
    out
}

fn render_feedback(feedback: &FeedbackStore) -> String {
    if feedback.is_empty() {
        return "(no previous jumps this episode)".into();
    }
    let mut out = String::new();
    for e in feedback.entries() {
        let line = match e.outcome {
            Outcome::Success => format!(
                "- jump {}: force {} -> landed on the platform",
                e.jump_index + 1,
                e.force.map(|f| format!("{f:.2}")).unwrap_or_default(),
            ),
            Outcome::Short => format!(
                "- jump {}: force {} -> fell {:.1} short of the left edge (under-jump)",
                e.jump_index + 1,
                e.force.map(|f| format!("{f:.2}")).unwrap_or_default(),
                e.signed_miss.abs(),
            ),
            Outcome::Long => format!(
                "- jump {}: force {} -> overshot the right edge by {:.1} (over-jump)",
                e.jump_index + 1,
                e.force.map(|f| format!("{f:.2}")).unwrap_or_default(),
                e.signed_miss,
            ),
            Outcome::FormatFailure => format!(
                "- jump {}: output was not a valid force (format failure)",
                e.jump_index + 1,
            ),
        };
        out.push_str(&line);
        out.push('\n');
    }
    out.pop();
    out
}

/// Generates `n` truthful examples with center distances stratified
/// across the configured gap range (near-min through near-max). Every
/// example is re-simulated before emission; its force comes from the
/// oracle.
pub fn generate_examples(
    n: usize,
    gen: &PlatformGenConfig,
    rng: &mut impl Rng,
) -> Result<Vec<FewShotExample>, PromptError> {
    if !(3..=5).contains(&n) {
        return Err(PromptError::InvalidExampleCount(n));
    }
    let physics = PhysicsParams::default();
    let span = gen.gap_max - gen.gap_min;
    let mut examples = Vec::with_capacity(n);
    for i in 0..n {
        let stratum_lo = gen.gap_min + span * i as f64 / n as f64;
        let stratum_hi = gen.gap_min + span * (i + 1) as f64 / n as f64;
        let gap = rng.random_range(stratum_lo..=stratum_hi);
        let width = rng.random_range(gen.width_min..=gen.width_max);
        let left = PLAYER_START_X + gap;
        let state = GameState {
            player_x: PLAYER_START_X,
            player_y: gen.surface_y,
            platform: Platform {
                left,
                top: gen.surface_y,
                right: left + width,
            },
            physics,
            score: 0,
        };
        let window = force_window(&state, DEFAULT_TOL)
            .expect("generated geometry is valid")
            .expect("generated platform is always reachable");
        let force = window.target_force;
        let result = simulate_jump(&state, force).expect("oracle force is in range");
        assert!(
            result.success,
            "oracle example must land: force {force} missed ({:?})",
            result.miss
        );
        let observation = perceive(&state, 0);
        let center = state.platform.center();
        let distance = observation.horizontal_distance_to_center;
        let reasoning = format!(
            "Platform center: ({l} + {r}) / 2 = {c}. Distance: {c} - {px} = {d}. \
             Invert distance = 0.15 x F x (F - 1): \
             F = (1 + sqrt(1 + {d} / 0.0375)) / 2 = {force:.2}. \
             Aiming at the center, choose force {force:.2}.",
            l = fmt_num(state.platform.left),
            r = fmt_num(state.platform.right),
            c = fmt_num(center),
            px = fmt_num(state.player_x),
            d = fmt_num(distance),
        );
        examples.push(FewShotExample {
            observation,
            reasoning,
            force,
            outcome: Outcome::Success,
        });
    }
    Ok(examples)
}

/// What `parse_force` extracted from a raw model reply.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ParsedForce {
    /// The last numeric token, within [0, 100].
    InRange(f64),
    /// A number parsed but fell outside [0, 100].
    OutOfRange(f64),
    /// No numeric token found.
    Unparseable,
}

/// Extracts the LAST real-number token from arbitrary text (optional
/// sign, integer or decimal). Markdown fences and prose are irrelevant
/// because only numeric tokens are considered. Total: never fails, any
/// byte sequence maps to one of the three statuses.
pub fn parse_force(raw: &str) -> ParsedForce {
    match last_number(raw) {
        None => ParsedForce::Unparseable,
        Some(v) if (0.0..=100.0).contains(&v) => ParsedForce::InRange(v),
        Some(v) => ParsedForce::OutOfRange(v),
    }
}

fn last_number(text: &str) -> Option<f64> {
    numbers(text).last()
}

/// Iterates numeric tokens left to right: `[+-]?digits[.digits]?`.
fn numbers(text: &str) -> impl Iterator<Item = f64> + '_ {
    let bytes = text.as_bytes();
    let mut i = 0usize;
    std::iter::from_fn(move || {
        while i < bytes.len() {
            let start = i;
            let signed = bytes[i] == b'-' || bytes[i] == b'+';
            let mut j = if signed { i + 1 } else { i };
            let digits_start = j;
            while j < bytes.len() && bytes[j].is_ascii_digit() {
                j += 1;
            }
            if j > digits_start {
                // optional fraction
                if j + 1 < bytes.len() && bytes[j] == b'.' && bytes[j + 1].is_ascii_digit() {
                    j += 1;
                    while j < bytes.len() && bytes[j].is_ascii_digit() {
                        j += 1;
                    }
                }
                i = j;
                if let Ok(v) = text[start..j].parse::<f64>() {
                    if v.is_finite() {
                        return Some(v);
                    }
                }
            } else {
                i = start + 1;
            }
        }
        None
    })
}

/// Pulls the number an agent claims as its computed distance, when the
/// reply states one ("distance: 170", "horizontal distance 240", ...).
/// Used to make calculation errors measurable; absent when the reply
/// never names a distance.
pub fn extract_reported_distance(raw: &str) -> Option<f64> {
    let lower = raw.to_ascii_lowercase();
    let idx = lower.find("distance")?;
    let tail = &raw[idx + "distance".len()..];
    // Look only a short window past the keyword so a distance mention
    // without a value doesn't swallow the final answer.
    let window: String = tail.chars().take(40).collect();
    let first = numbers(&window).next();
    first
}
