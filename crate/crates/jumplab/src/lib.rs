//! Jump-Jump laboratory: a deterministic simulator for the one-button
//! jumping game, an inverse-ballistics oracle, prompt builders and a
//! chat-completions client for LLM players, and an evaluation harness
//! that logs every jump and recomputes the run metrics from the logs.

pub mod agent;
pub mod cli;
pub mod eval;
pub mod game;
pub mod llm;
pub mod oracle;
pub mod prompts;

pub use agent::{
    perceive, record_feedback, Agent, AgentError, Decision, FeedbackEntry, FeedbackStore,
    NoisyOracleAgent, Observation, OracleAgent, Outcome, ParseStatus, RandomAgent,
};
pub use eval::{
    classify_error, compute_metrics, export, run_episodes, run_episodes_parallel, EpisodeRecord,
    ErrorClass, EvalError, JumpRecord, MetricsReport, RunOptions, RunOutput, Stability,
    Termination,
};
pub use game::{
    advance, initial_state, simulate_jump, spawn_next_platform, GameError, GameState, JumpResult,
    Miss, PhysicsParams, Platform, PlatformGenConfig, TrajectoryPoint,
};
pub use llm::{complete, ChatExchange, LlmAgent, LlmConfig, LlmError, ScriptedTransport};
pub use oracle::{closed_form_force, force_window, solve_force, ForceWindow, OracleError};
pub use prompts::{
    generate_examples, parse_force, FewShotExample, ParsedForce, PromptError, PromptTemplates,
    PromptVersion,
};
