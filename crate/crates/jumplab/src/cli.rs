//! The `jumplab` command line: run experiments, query the oracle, render
//! prompts, and recompute metrics from logs.
//!
//! Exit codes: 0 success, 1 configuration/validation, 2 runtime (IO,
//! unreachable target, agent unavailable).

use std::path::{Path, PathBuf};
use std::str::FromStr;

use clap::{Args, Parser, Subcommand};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::agent::{Agent, NoisyOracleAgent, OracleAgent, RandomAgent};
use crate::eval::{
    compute_metrics, export, export_logs, read_episode_records, read_jump_records, render_table,
    run_episodes, run_episodes_parallel, EvalError, RunOptions, Termination, EPISODES_FILE,
    JUMPS_FILE,
};
use crate::game::{simulate_jump, GameState, PhysicsParams, Platform, PlatformGenConfig};
use crate::llm::{ApiKey, HttpTransport, LlmAgent, LlmConfig, ENV_ENDPOINT};
use crate::oracle::{force_window, DEFAULT_TOL};
use crate::prompts::{generate_examples, FewShotExample, PromptTemplates, PromptVersion};

#[derive(Debug)]
enum CliError {
    /// Bad flags, config file, or input data. Exit 1.
    Config(String),
    /// IO, unreachable targets, unavailable agents. Exit 2.
    Runtime(String),
}

impl CliError {
    fn code(&self) -> i32 {
        match self {
            CliError::Config(_) => 1,
            CliError::Runtime(_) => 2,
        }
    }

    fn message(&self) -> &str {
        match self {
            CliError::Config(m) | CliError::Runtime(m) => m,
        }
    }
}

impl From<EvalError> for CliError {
    fn from(e: EvalError) -> Self {
        match e {
            EvalError::Io { .. } => CliError::Runtime(e.to_string()),
            _ => CliError::Config(e.to_string()),
        }
    }
}

#[derive(Debug, Parser)]
#[command(
    name = "jumplab",
    version,
    about = "Jump-Jump simulator and agent laboratory"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run episodes with an agent; write logs, metrics, and the learning curve
    Play(Box<PlayArgs>),
    /// Print the force window for a platform
    Oracle(OracleArgs),
    /// Print the prompt an LLM agent would receive
    Prompt(PromptArgs),
    /// Recompute and print metrics from an exported run directory
    Report(ReportArgs),
}

#[derive(Debug, Args, Default, Clone)]
struct PlayArgs {
    /// Flat key=value config file; flags override file values
    #[arg(long)]
    config: Option<PathBuf>,
    /// Agent: oracle | noisy:<sigma> | random | llm
    #[arg(long)]
    agent: Option<String>,
    /// Prompt version for the llm agent: basic | optimized | complete
    #[arg(long)]
    prompt_version: Option<String>,
    #[arg(long)]
    episodes: Option<u32>,
    #[arg(long)]
    jump_cap: Option<u32>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    gap_min: Option<f64>,
    #[arg(long)]
    gap_max: Option<f64>,
    #[arg(long)]
    width_min: Option<f64>,
    #[arg(long)]
    width_max: Option<f64>,
    #[arg(long)]
    surface_y: Option<f64>,
    /// Clamp out-of-range model outputs into [0,100] instead of rejecting
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    clamp_out_of_range: Option<bool>,
    /// Output directory for logs and metrics
    #[arg(long)]
    out: Option<PathBuf>,
    /// Episodes run in parallel
    #[arg(long)]
    parallel: Option<usize>,
    /// Chat-completions endpoint URL (or env JUMP_LLM_ENDPOINT)
    #[arg(long)]
    endpoint: Option<String>,
    /// Model name sent to the endpoint
    #[arg(long)]
    model: Option<String>,
    /// Directory with basic.txt / optimized.txt / complete.txt templates
    #[arg(long)]
    templates: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct OracleArgs {
    player_x: f64,
    plat_left: f64,
    plat_top: f64,
    plat_right: f64,
    /// Landing tolerance in game units
    #[arg(long, default_value_t = DEFAULT_TOL)]
    tol: f64,
}

#[derive(Debug, Args)]
struct PromptArgs {
    /// basic | optimized | complete
    version: String,
    #[arg(long)]
    player_x: f64,
    /// Defaults to plat_top (player standing at platform height)
    #[arg(long)]
    player_y: Option<f64>,
    #[arg(long)]
    plat_left: f64,
    #[arg(long)]
    plat_top: f64,
    #[arg(long)]
    plat_right: f64,
    /// Seed for the auto-generated few-shot examples
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    templates: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct ReportArgs {
    /// Directory containing episodes.jsonl and jumps.jsonl
    dir: PathBuf,
}

#[derive(Debug, Clone, PartialEq)]
enum AgentKind {
    Oracle,
    Noisy(f64),
    Random,
    Llm,
}

impl FromStr for AgentKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "oracle" => Ok(AgentKind::Oracle),
            "random" => Ok(AgentKind::Random),
            "llm" => Ok(AgentKind::Llm),
            other => {
                if let Some(sigma) = other.strip_prefix("noisy:") {
                    let sigma: f64 = sigma
                        .parse()
                        .map_err(|_| format!("agent: bad sigma in '{other}'"))?;
                    if sigma < 0.0 {
                        return Err("agent: sigma must be >= 0".into());
                    }
                    return Ok(AgentKind::Noisy(sigma));
                }
                Err(format!(
                    "agent: unknown kind '{other}' (expected oracle|noisy:<sigma>|random|llm)"
                ))
            }
        }
    }
}

/// Fully resolved play settings: defaults, then config file, then flags.
#[derive(Debug, Clone)]
struct PlaySettings {
    agent: AgentKind,
    prompt_version: PromptVersion,
    episodes: u32,
    jump_cap: u32,
    seed: u64,
    gen: PlatformGenConfig,
    clamp_out_of_range: bool,
    out: PathBuf,
    parallel: usize,
    endpoint: Option<String>,
    model: String,
    templates: Option<PathBuf>,
}

impl Default for PlaySettings {
    fn default() -> Self {
        Self {
            agent: AgentKind::Oracle,
            prompt_version: PromptVersion::Basic,
            episodes: 50,
            jump_cap: 100,
            seed: 0,
            gen: PlatformGenConfig::default(),
            clamp_out_of_range: false,
            out: PathBuf::from("runs"),
            parallel: 1,
            endpoint: None,
            model: "default".into(),
            templates: None,
        }
    }
}

fn parse_config_file(path: &Path) -> Result<PlayArgs, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Config(format!("config {}: {e}", path.display())))?;
    let mut file_args = PlayArgs::default();
    for (lineno, raw_line) in text.lines().enumerate() {
        let line = raw_line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (key, value) = line.split_once('=').ok_or_else(|| {
            CliError::Config(format!(
                "config {}:{}: expected key = value",
                path.display(),
                lineno + 1
            ))
        })?;
        let key = key.trim().replace('-', "_");
        let value = value.trim().to_string();
        let bad_value = |what: &str| {
            CliError::Config(format!(
                "config {}:{}: {key}: expected {what}, got '{value}'",
                path.display(),
                lineno + 1
            ))
        };
        match key.as_str() {
            "agent" => file_args.agent = Some(value),
            "prompt_version" => file_args.prompt_version = Some(value),
            "episodes" => {
                file_args.episodes = Some(value.parse().map_err(|_| bad_value("an integer"))?)
            }
            "jump_cap" => {
                file_args.jump_cap = Some(value.parse().map_err(|_| bad_value("an integer"))?)
            }
            "seed" => file_args.seed = Some(value.parse().map_err(|_| bad_value("an integer"))?),
            "gap_min" => {
                file_args.gap_min = Some(value.parse().map_err(|_| bad_value("a number"))?)
            }
            "gap_max" => {
                file_args.gap_max = Some(value.parse().map_err(|_| bad_value("a number"))?)
            }
            "width_min" => {
                file_args.width_min = Some(value.parse().map_err(|_| bad_value("a number"))?)
            }
            "width_max" => {
                file_args.width_max = Some(value.parse().map_err(|_| bad_value("a number"))?)
            }
            "surface_y" => {
                file_args.surface_y = Some(value.parse().map_err(|_| bad_value("a number"))?)
            }
            "clamp_out_of_range" => {
                file_args.clamp_out_of_range = Some(match value.to_ascii_lowercase().as_str() {
                    "true" | "1" | "yes" => true,
                    "false" | "0" | "no" => false,
                    _ => return Err(bad_value("true or false")),
                })
            }
            "out" => file_args.out = Some(PathBuf::from(value)),
            "parallel" => {
                file_args.parallel = Some(value.parse().map_err(|_| bad_value("an integer"))?)
            }
            "endpoint" => file_args.endpoint = Some(value),
            "model" => file_args.model = Some(value),
            "templates" => file_args.templates = Some(PathBuf::from(value)),
            other => {
                return Err(CliError::Config(format!(
                    "config {}:{}: unknown key '{other}'",
                    path.display(),
                    lineno + 1
                )))
            }
        }
    }
    Ok(file_args)
}

fn resolve_settings(flags: &PlayArgs) -> Result<PlaySettings, CliError> {
    let mut merged = match &flags.config {
        Some(path) => parse_config_file(path)?,
        None => PlayArgs::default(),
    };
    // flags override the file
    macro_rules! take {
        ($field:ident) => {
            if flags.$field.is_some() {
                merged.$field = flags.$field.clone();
            }
        };
    }
    take!(agent);
    take!(prompt_version);
    take!(episodes);
    take!(jump_cap);
    take!(seed);
    take!(gap_min);
    take!(gap_max);
    take!(width_min);
    take!(width_max);
    take!(surface_y);
    take!(clamp_out_of_range);
    take!(out);
    take!(parallel);
    take!(endpoint);
    take!(model);
    take!(templates);

    let mut s = PlaySettings::default();
    if let Some(agent) = &merged.agent {
        s.agent = agent.parse().map_err(CliError::Config)?;
    }
    if let Some(v) = &merged.prompt_version {
        s.prompt_version = v
            .parse()
            .map_err(|e: String| CliError::Config(format!("prompt_version: {e}")))?;
    }
    if let Some(v) = merged.episodes {
        if v == 0 {
            return Err(CliError::Config("episodes: must be >= 1".into()));
        }
        s.episodes = v;
    }
    if let Some(v) = merged.jump_cap {
        if v == 0 {
            return Err(CliError::Config("jump_cap: must be >= 1".into()));
        }
        s.jump_cap = v;
    }
    if let Some(v) = merged.seed {
        s.seed = v;
    }
    if let Some(v) = merged.gap_min {
        s.gen.gap_min = v;
    }
    if let Some(v) = merged.gap_max {
        s.gen.gap_max = v;
    }
    if let Some(v) = merged.width_min {
        s.gen.width_min = v;
    }
    if let Some(v) = merged.width_max {
        s.gen.width_max = v;
    }
    if let Some(v) = merged.surface_y {
        s.gen.surface_y = v;
    }
    if let Some(v) = merged.clamp_out_of_range {
        s.clamp_out_of_range = v;
    }
    if let Some(v) = merged.out {
        s.out = v;
    }
    if let Some(v) = merged.parallel {
        if v == 0 {
            return Err(CliError::Config("parallel: must be >= 1".into()));
        }
        s.parallel = v;
    }
    s.endpoint = merged.endpoint;
    if let Some(v) = merged.model {
        s.model = v;
    }
    s.templates = merged.templates;
    s.gen.seed = s.seed;
    s.gen
        .validate(&PhysicsParams::default())
        .map_err(|e| CliError::Config(e.to_string()))?;
    Ok(s)
}

fn load_templates(dir: &Option<PathBuf>) -> Result<PromptTemplates, CliError> {
    match dir {
        None => Ok(PromptTemplates::builtin()),
        Some(dir) => PromptTemplates::load_dir(dir).map_err(|e| CliError::Config(e.to_string())),
    }
}

fn llm_parts(
    s: &PlaySettings,
) -> Result<(LlmConfig, PromptTemplates, Vec<FewShotExample>), CliError> {
    let endpoint = s
        .endpoint
        .clone()
        .or_else(|| std::env::var(ENV_ENDPOINT).ok())
        .ok_or_else(|| {
            CliError::Config(format!(
                "endpoint: --agent llm needs --endpoint (or {ENV_ENDPOINT})"
            ))
        })?;
    let mut config = LlmConfig::new(endpoint, s.model.clone());
    config.api_key = ApiKey::from_env();
    let templates = load_templates(&s.templates)?;
    let examples = if s.prompt_version == PromptVersion::Basic {
        Vec::new()
    } else {
        let mut rng = ChaCha8Rng::seed_from_u64(s.seed);
        generate_examples(3, &s.gen, &mut rng).map_err(|e| CliError::Config(e.to_string()))?
    };
    Ok((config, templates, examples))
}

fn build_agent(s: &PlaySettings) -> Result<Box<dyn Agent>, CliError> {
    Ok(match &s.agent {
        AgentKind::Oracle => Box::new(OracleAgent),
        AgentKind::Noisy(sigma) => Box::new(NoisyOracleAgent::new(*sigma)),
        AgentKind::Random => Box::new(RandomAgent::new()),
        AgentKind::Llm => {
            let (config, templates, examples) = llm_parts(s)?;
            Box::new(
                LlmAgent::new(
                    config,
                    HttpTransport::new(),
                    s.prompt_version,
                    templates,
                    examples,
                )
                .with_clamp(s.clamp_out_of_range),
            )
        }
    })
}

fn cmd_play(flags: &PlayArgs) -> Result<(), CliError> {
    let s = resolve_settings(flags)?;
    let opts = RunOptions {
        episodes: s.episodes,
        jump_cap: s.jump_cap,
        master_seed: s.seed,
        gen: s.gen,
        physics: PhysicsParams::default(),
    };

    let output = if s.parallel <= 1 {
        let mut agent = build_agent(&s)?;
        run_episodes(agent.as_mut(), &opts)?
    } else {
        // Probe the agent config once so bad settings fail before any
        // threads start.
        build_agent(&s)?;
        let settings = s.clone();
        run_episodes_parallel(
            &move |_seed| build_agent(&settings).expect("agent config validated above"),
            &opts,
            s.parallel,
        )?
    };

    let all_unavailable = output
        .episodes
        .iter()
        .all(|e| e.termination == Termination::AgentUnavailable);
    if all_unavailable {
        export_logs(&s.out, &output)?;
        return Err(CliError::Runtime(format!(
            "agent unavailable for all {} episode(s); logs in {}",
            output.episodes.len(),
            s.out.display()
        )));
    }

    let report = compute_metrics(&output.episodes, &output.jumps)?;
    export(&s.out, &output, &report)?;
    print!("{}", render_table(&report));
    println!("logs: {}", s.out.display());
    Ok(())
}

fn cmd_oracle(args: &OracleArgs) -> Result<(), CliError> {
    if args.plat_left.is_nan() || args.plat_right.is_nan() || args.plat_left >= args.plat_right {
        return Err(CliError::Config(format!(
            "platform left {} must be < right {}",
            args.plat_left, args.plat_right
        )));
    }
    if args.plat_left <= args.player_x {
        return Err(CliError::Config(format!(
            "platform must be to the right of the player (left {} vs player {})",
            args.plat_left, args.player_x
        )));
    }
    if args.tol.is_nan() || args.tol <= 0.0 {
        return Err(CliError::Config("tol must be > 0".into()));
    }
    let state = GameState {
        player_x: args.player_x,
        player_y: args.plat_top,
        platform: Platform {
            left: args.plat_left,
            top: args.plat_top,
            right: args.plat_right,
        },
        physics: PhysicsParams::default(),
        score: 0,
    };
    let window = force_window(&state, args.tol)
        .map_err(|e| CliError::Runtime(e.to_string()))?
        .ok_or_else(|| {
            CliError::Runtime(format!(
                "platform unreachable: left edge {} is beyond the maximum landing x {:.1}",
                args.plat_left,
                simulate_jump(&state, 100.0)
                    .map(|r| r.landing_x.unwrap_or(f64::NAN))
                    .unwrap_or(f64::NAN)
            ))
        })?;
    let landing = simulate_jump(&state, window.target_force)
        .expect("target force is in range")
        .landing_x
        .expect("target force lands");
    println!("min_force     {:.4}", window.min_force);
    println!("target_force  {:.4}", window.target_force);
    println!("max_force     {:.4}", window.max_force);
    println!("landing_x     {landing:.4}  (at target force)");
    Ok(())
}

fn cmd_prompt(args: &PromptArgs) -> Result<(), CliError> {
    let version: PromptVersion = args
        .version
        .parse()
        .map_err(|e: String| CliError::Config(e))?;
    if args.plat_left.is_nan() || args.plat_right.is_nan() || args.plat_left >= args.plat_right {
        return Err(CliError::Config(format!(
            "platform left {} must be < right {}",
            args.plat_left, args.plat_right
        )));
    }
    let templates = load_templates(&args.templates)?;
    let state = GameState {
        player_x: args.player_x,
        player_y: args.player_y.unwrap_or(args.plat_top),
        platform: Platform {
            left: args.plat_left,
            top: args.plat_top,
            right: args.plat_right,
        },
        physics: PhysicsParams::default(),
        score: 0,
    };
    let observation = crate::agent::perceive(&state, 0);
    let examples = if version == PromptVersion::Basic {
        Vec::new()
    } else {
        let mut rng = ChaCha8Rng::seed_from_u64(args.seed);
        generate_examples(3, &PlatformGenConfig::default(), &mut rng)
            .map_err(|e| CliError::Config(e.to_string()))?
    };
    let prompt = templates
        .build_prompt(
            version,
            &observation,
            &crate::agent::FeedbackStore::new(),
            &examples,
        )
        .map_err(|e| CliError::Config(e.to_string()))?;
    print!("{prompt}");
    Ok(())
}

fn cmd_report(args: &ReportArgs) -> Result<(), CliError> {
    let episodes = read_episode_records(&args.dir.join(EPISODES_FILE))?;
    let jumps = read_jump_records(&args.dir.join(JUMPS_FILE))?;
    let report = compute_metrics(&episodes, &jumps)?;
    print!("{}", render_table(&report));
    Ok(())
}

/// Parses argv, dispatches, and returns the process exit code.
pub fn run() -> i32 {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    let result = match &cli.command {
        Command::Play(args) => cmd_play(args),
        Command::Oracle(args) => cmd_oracle(args),
        Command::Prompt(args) => cmd_prompt(args),
        Command::Report(args) => cmd_report(args),
    };
    match result {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {}", e.message());
            e.code()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn agent_kind_parsing() {
        assert_eq!("oracle".parse::<AgentKind>().unwrap(), AgentKind::Oracle);
        assert_eq!(
            "noisy:5".parse::<AgentKind>().unwrap(),
            AgentKind::Noisy(5.0)
        );
        assert_eq!(
            "noisy:2.5".parse::<AgentKind>().unwrap(),
            AgentKind::Noisy(2.5)
        );
        assert!("noisy:-1".parse::<AgentKind>().is_err());
        assert!("bogus".parse::<AgentKind>().is_err());
    }

    #[test]
    fn flags_override_config_file() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("run.conf");
        std::fs::write(&path, "episodes = 7\nseed = 3\nagent = random\n# comment\n").unwrap();
        let flags = PlayArgs {
            config: Some(path),
            episodes: Some(9),
            ..Default::default()
        };
        let s = resolve_settings(&flags).unwrap();
        assert_eq!(s.episodes, 9);
        assert_eq!(s.seed, 3);
        assert_eq!(s.agent, AgentKind::Random);
    }

    #[test]
    fn unknown_config_key_is_named() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("run.conf");
        std::fs::write(&path, "episodess = 7\n").unwrap();
        let flags = PlayArgs {
            config: Some(path),
            ..Default::default()
        };
        let err = resolve_settings(&flags).unwrap_err();
        assert!(err.message().contains("episodess"), "{}", err.message());
    }

    #[test]
    fn llm_without_endpoint_names_the_field() {
        let s = PlaySettings {
            agent: AgentKind::Llm,
            endpoint: None,
            ..Default::default()
        };
        // guard against an ambient endpoint leaking into the test
        if std::env::var(ENV_ENDPOINT).is_ok() {
            return;
        }
        let err = match build_agent(&s) {
            Err(e) => e,
            Ok(_) => panic!("llm agent without endpoint must be rejected"),
        };
        assert!(err.message().contains("endpoint"), "{}", err.message());
        assert_eq!(err.code(), 1);
    }

    #[test]
    fn api_key_env_name_is_stable() {
        assert_eq!(crate::llm::ENV_API_KEY, "JUMP_LLM_API_KEY");
        assert_eq!(ENV_ENDPOINT, "JUMP_LLM_ENDPOINT");
    }
}
