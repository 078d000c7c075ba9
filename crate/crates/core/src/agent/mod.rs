//! Training loop for the dueling double DQN.
//!
//! One training step is one agent decision; the seconds simulated between two
//! decision points belong to that step and their rewards are averaged.

mod dqn;
mod env;
mod replay;

use std::fmt;
use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::sync::Arc;

pub use dqn::{double_td_errors, select_action, DqnController, DqnLearner};
pub use env::{EnvStep, TrafficEnv};
pub use replay::{ReplayBuffer, Transition};

use crate::encoder::PartialDtse;
use crate::error::{Error, Result};
use crate::neural::{save_checkpoint, AdamConfig, Arch, CheckpointMeta, QNetwork};
use crate::reward::RewardState;
use crate::rng::{streams, RngStream};
use crate::sim::{build_scenario, sample_demand, DemandConfig, Intersection, ScenarioTag};

/// CV penetration used for training episodes.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum PcvMode {
    Fixed(f64),
    /// The sampled `U[0, 1]` value of each episode's demand.
    Uniform,
}

impl PcvMode {
    /// Checkpoint and log suffix: `fd` for full detection, `pd` otherwise.
    pub fn tag(&self) -> &'static str {
        match self {
            PcvMode::Fixed(p) if *p >= 1.0 => "fd",
            _ => "pd",
        }
    }

    fn apply(&self, demand: DemandConfig) -> DemandConfig {
        match self {
            PcvMode::Fixed(p) => demand.with_p_cv(*p),
            PcvMode::Uniform => demand,
        }
    }
}

impl fmt::Display for PcvMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PcvMode::Fixed(p) => write!(f, "fixed:{p}"),
            PcvMode::Uniform => f.write_str("uniform"),
        }
    }
}

impl FromStr for PcvMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        if s == "uniform" {
            return Ok(PcvMode::Uniform);
        }
        let value = s.strip_prefix("fixed:").unwrap_or(s);
        let p: f64 = value
            .parse()
            .map_err(|_| Error::Config(format!("p_cv mode '{s}': expected 'uniform' or 'fixed:<p>'")))?;
        if !(0.0..=1.0).contains(&p) {
            return Err(Error::Config(format!("p_cv {p} outside [0, 1]")));
        }
        Ok(PcvMode::Fixed(p))
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrainConfig {
    pub scenario: ScenarioTag,
    /// Agent decisions to train for (after warm-up).
    pub steps: u64,
    pub seed: u64,
    pub gamma: f64,
    pub adam: AdamConfig,
    pub eps_min: f64,
    pub eps_dec: f64,
    pub tau: f64,
    pub batch: usize,
    pub buffer_capacity: usize,
    /// Random transitions collected before the first update.
    pub warmup: usize,
    pub pcv: PcvMode,
    pub max_green: Option<f64>,
    /// Write an intermediate checkpoint every this many steps (0 = only at the end).
    pub checkpoint_every: u64,
}

impl TrainConfig {
    pub fn new(scenario: ScenarioTag) -> Self {
        Self {
            scenario,
            steps: 4_000_000,
            seed: 0,
            gamma: 0.99,
            adam: AdamConfig::default(),
            eps_min: 0.01,
            eps_dec: 2_000_000.0,
            tau: 1e-3,
            batch: 64,
            buffer_capacity: 1_000_000,
            warmup: 100_000,
            pcv: PcvMode::Fixed(1.0),
            max_green: None,
            checkpoint_every: 0,
        }
    }

    /// Shrinks the exploration schedule and the warm-up in proportion to a
    /// short run: ε reaches its floor halfway through, warm-up is 1/15 of the
    /// run (both capped at the full-scale values).
    pub fn desk_scale(mut self, steps: u64) -> Self {
        self.steps = steps;
        self.eps_dec = (steps as f64 / 2.0).clamp(1.0, 2_000_000.0);
        self.warmup = ((steps / 15) as usize).clamp(self.batch, 100_000);
        self
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Config(m.to_string()));
        if !(0.0..=1.0).contains(&self.gamma) {
            return bad("gamma must lie in [0, 1]");
        }
        if !(self.eps_min > 0.0 && self.eps_min < 1.0) {
            return bad("eps_min must lie in (0, 1)");
        }
        if self.eps_dec <= 0.0 {
            return bad("eps_dec must be positive");
        }
        if !(self.tau > 0.0 && self.tau <= 1.0) {
            return bad("tau must lie in (0, 1]");
        }
        if self.batch == 0 {
            return bad("batch size must be at least 1");
        }
        if self.buffer_capacity == 0 || self.warmup > self.buffer_capacity {
            return bad("warm-up must not exceed the buffer capacity");
        }
        if self.adam.lr <= 0.0 {
            return bad("learning rate must be positive");
        }
        if let Some(g) = self.max_green {
            if g < 10.0 {
                return bad("max green must be at least the minimum green (10 s)");
            }
        }
        Ok(())
    }

    pub fn checkpoint_name(&self) -> String {
        format!("dqn_{}_{}.tscq", self.scenario, self.pcv.tag())
    }

    pub fn log_name(&self) -> String {
        format!("train_{}_{}.csv", self.scenario, self.pcv.tag())
    }
}

/// `ε(t) = max(ε_min, exp(-t·ln(1/ε_min)/ε_dec))`.
pub fn epsilon_at(t: u64, eps_min: f64, eps_dec: f64) -> f64 {
    (-(t as f64) * (1.0 / eps_min).ln() / eps_dec).exp().max(eps_min)
}

/// One row of the training log (one per episode).
#[derive(Clone, Debug, PartialEq)]
pub struct LogRow {
    /// Training steps completed when the episode ended.
    pub step: u64,
    pub episode: u64,
    pub decisions: u64,
    pub p_cv: f64,
    /// Mean minibatch loss over the episode.
    pub loss: f64,
    pub mean_reward: f64,
    pub epsilon: f64,
    pub emtd: f64,
    /// False for an episode cut short by the end of training.
    pub complete: bool,
}

pub const LOG_HEADER: &str = "step,episode,decisions,p_cv,loss,mean_reward,epsilon,emtd,complete";

impl LogRow {
    pub fn csv(&self) -> String {
        format!(
            "{},{},{},{:.6},{:.8},{:.8},{:.6},{:.6},{}",
            self.step,
            self.episode,
            self.decisions,
            self.p_cv,
            self.loss,
            self.mean_reward,
            self.epsilon,
            self.emtd,
            u8::from(self.complete)
        )
    }
}

pub fn write_log(path: &Path, rows: &[LogRow]) -> Result<()> {
    let mut out = String::with_capacity(64 * (rows.len() + 1));
    out.push_str(LOG_HEADER);
    out.push('\n');
    for r in rows {
        out.push_str(&r.csv());
        out.push('\n');
    }
    fs::write(path, out)?;
    Ok(())
}

#[derive(Clone, Debug)]
pub struct TrainOutcome {
    pub network: QNetwork<f32>,
    pub log: Vec<LogRow>,
    pub meta: CheckpointMeta,
    pub checkpoint_path: Option<PathBuf>,
    pub log_path: Option<PathBuf>,
}

struct EpisodeAcc {
    decisions: u64,
    loss: f64,
    updates: u64,
    reward: f64,
}

impl EpisodeAcc {
    fn new() -> Self {
        Self {
            decisions: 0,
            loss: 0.0,
            updates: 0,
            reward: 0.0,
        }
    }
}

fn write_outputs(
    dir: &Path,
    cfg: &TrainConfig,
    net: &QNetwork<f32>,
    meta: &CheckpointMeta,
    log: &[LogRow],
) -> Result<(PathBuf, PathBuf)> {
    let ckpt = dir.join(cfg.checkpoint_name());
    let tmp = dir.join(format!("{}.tmp", cfg.checkpoint_name()));
    let mut f = fs::File::create(&tmp)?;
    f.write_all(&save_checkpoint(net, meta))?;
    f.sync_all()?;
    fs::rename(&tmp, &ckpt)?;
    let log_path = dir.join(cfg.log_name());
    write_log(&log_path, log)?;
    Ok((ckpt, log_path))
}

/// Runs the full training procedure. With `out_dir`, writes the checkpoint
/// and the per-episode CSV log there (periodically and at the end).
pub fn train(cfg: &TrainConfig, out_dir: Option<&Path>) -> Result<TrainOutcome> {
    cfg.validate()?;
    if let Some(dir) = out_dir {
        if !dir.is_dir() {
            return Err(Error::Config(format!("output directory {} does not exist", dir.display())));
        }
    }
    let intersection: Arc<Intersection> = Arc::new(build_scenario(cfg.scenario));
    let arch = Arch::for_scenario(cfg.scenario);
    let n_actions = arch.actions;

    let mut demand_rng = RngStream::with_stream(cfg.seed, streams::DEMAND);
    let mut init_rng = RngStream::with_stream(cfg.seed, streams::INIT);
    let mut replay_rng = RngStream::with_stream(cfg.seed, streams::REPLAY);
    let mut explore_rng = RngStream::with_stream(cfg.seed, streams::EXPLORATION);

    let online = QNetwork::new(arch, &mut init_rng);
    let mut learner = DqnLearner::new(online, cfg.adam, cfg.gamma as f32, cfg.tau as f32, cfg.batch);
    let mut rewards = RewardState::new();
    let mut log = Vec::new();
    let meta = |step: u64, rewards: &RewardState| CheckpointMeta {
        scenario: cfg.scenario,
        step,
        tsd_max: rewards.tsd_max,
    };

    if cfg.steps == 0 {
        let m = meta(0, &rewards);
        let paths = match out_dir {
            Some(dir) => Some(write_outputs(dir, cfg, &learner.online, &m, &log)?),
            None => None,
        };
        return Ok(TrainOutcome {
            network: learner.online,
            log,
            meta: m,
            checkpoint_path: paths.as_ref().map(|p| p.0.clone()),
            log_path: paths.map(|p| p.1),
        });
    }

    let next_demand = |rng: &mut RngStream| cfg.pcv.apply(sample_demand(&intersection, rng));
    let mut env = TrafficEnv::new(Arc::clone(&intersection), cfg.max_green);
    let mut buffer = ReplayBuffer::new(cfg.buffer_capacity, cfg.warmup);

    // warm-up with uniformly random decisions
    let mut state: PartialDtse = env.reset(&next_demand(&mut demand_rng), &mut rewards);
    while buffer.len() < cfg.warmup {
        let action = explore_rng.index(n_actions);
        let step = env.step(action, &mut rewards)?;
        buffer.push(Transition {
            state: state.pack(),
            action: action as u8,
            next_state: step.next_state.pack(),
            reward: step.reward as f32,
            terminal: step.terminal,
        });
        state = if step.terminal {
            env.reset(&next_demand(&mut demand_rng), &mut rewards)
        } else {
            step.next_state
        };
    }

    let mut demand = next_demand(&mut demand_rng);
    state = env.reset(&demand, &mut rewards);
    let mut episode = 0u64;
    let mut acc = EpisodeAcc::new();
    for t in 0..cfg.steps {
        let epsilon = epsilon_at(t, cfg.eps_min, cfg.eps_dec);
        let q = learner.q_values(&state.data)?;
        let action = select_action(&q, epsilon, &mut explore_rng);
        let step = env.step(action, &mut rewards)?;
        buffer.push(Transition {
            state: state.pack(),
            action: action as u8,
            next_state: step.next_state.pack(),
            reward: step.reward as f32,
            terminal: step.terminal,
        });
        if buffer.is_warm() {
            acc.loss += learner.update(&buffer, &mut replay_rng)? as f64;
            acc.updates += 1;
        }
        acc.decisions += 1;
        acc.reward += step.reward;

        let done = t + 1 == cfg.steps;
        if step.terminal || done {
            log.push(LogRow {
                step: t + 1,
                episode,
                decisions: acc.decisions,
                p_cv: demand.p_cv,
                loss: if acc.updates > 0 { acc.loss / acc.updates as f64 } else { 0.0 },
                mean_reward: acc.reward / acc.decisions as f64,
                epsilon,
                emtd: env.emtd(),
                complete: step.terminal,
            });
            episode += 1;
            acc = EpisodeAcc::new();
            if !done {
                demand = next_demand(&mut demand_rng);
                state = env.reset(&demand, &mut rewards);
            }
        } else {
            state = step.next_state;
        }

        if let Some(dir) = out_dir {
            if cfg.checkpoint_every > 0 && (t + 1) % cfg.checkpoint_every == 0 && !done {
                write_outputs(dir, cfg, &learner.online, &meta(t + 1, &rewards), &log)?;
            }
        }
    }

    let m = meta(cfg.steps, &rewards);
    let paths = match out_dir {
        Some(dir) => Some(write_outputs(dir, cfg, &learner.online, &m, &log)?),
        None => None,
    };
    Ok(TrainOutcome {
        network: learner.online,
        log,
        meta: m,
        checkpoint_path: paths.as_ref().map(|p| p.0.clone()),
        log_path: paths.map(|p| p.1),
    })
}
