//! Flat `key = value` run configuration.
//!
//! Layers, lowest first: built-in defaults, `--config` file, the
//! `CROSSFLOW_SEED` environment variable, command-line flags. Every layer is
//! applied through [`RunConfig::set`], so a file and a flag accept exactly the
//! same spellings.

use std::fmt::Write as _;
use std::path::PathBuf;
use std::str::FromStr;

use anyhow::{bail, Context, Result};
use crossflow::agent::{PcvMode, TrainConfig};
use crossflow::controllers::ControllerKind;
use crossflow::neural::AdamConfig;
use crossflow::sim::ScenarioTag;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum EvalMode {
    Fd,
    Pd,
}

/// Which checkpoint stands in as the full-detection reference of a PD comparison.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PdReference {
    /// The PD checkpoint itself, replayed at `p_cv = 1`.
    Same,
    /// The separately trained FD checkpoint.
    Fd,
}

#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    pub scenario: ScenarioTag,
    pub scenarios: Vec<ScenarioTag>,
    pub steps: u64,
    pub desk_scale: bool,
    pub seed: u64,
    pub gamma: f64,
    pub lr: f64,
    pub adam_beta1: f64,
    pub adam_beta2: f64,
    pub adam_eps: f64,
    pub eps_min: f64,
    pub eps_dec: f64,
    pub tau: f64,
    pub batch: usize,
    pub buffer: usize,
    pub warmup: usize,
    pub pcv: PcvMode,
    pub max_green: Option<f64>,
    pub checkpoint_every: u64,
    pub controllers: Vec<ControllerKind>,
    pub mode: EvalMode,
    pub episodes: usize,
    pub per_bucket: usize,
    pub full_detection_episodes: usize,
    pub pd_reference: PdReference,
    pub acceptable_ceiling: f64,
    pub optimal_ceiling: f64,
    pub hist_bins: usize,
    pub jobs: usize,
    pub time: u64,
    pub out: PathBuf,
    /// Where `eval` looks for checkpoints; the output directory when unset.
    pub checkpoints: Option<PathBuf>,
}

/// `(key, origin, description)`; drives `dump-config` and `--help`.
pub const KEYS: &[(&str, &str, &str)] = &[
    ("scenario", "tool", "scenario trained or inspected: a, b or c"),
    ("scenarios", "tool", "comma-separated scenarios evaluated"),
    ("steps", "tuned", "training decisions after warm-up"),
    ("desk_scale", "desk-scale", "derive eps_dec (steps/2) and warmup (steps/15) from steps"),
    ("seed", "tool", "master seed; CROSSFLOW_SEED overrides the file"),
    ("gamma", "tuned", "discount factor"),
    ("lr", "tuned", "Adam learning rate"),
    ("adam_beta1", "tool", "Adam first-moment decay"),
    ("adam_beta2", "tool", "Adam second-moment decay"),
    ("adam_eps", "tool", "Adam denominator epsilon"),
    ("eps_min", "tuned", "exploration floor"),
    ("eps_dec", "tuned", "exploration decay horizon in steps"),
    ("tau", "tuned", "Polyak rate of the target network"),
    ("batch", "tuned", "minibatch size"),
    ("buffer", "tuned", "replay capacity"),
    ("warmup", "tuned", "random-policy transitions collected before learning"),
    ("pcv", "tool", "training penetration: fixed:<p> or uniform"),
    ("max_green", "tool", "cap on a single green interval in seconds, or none"),
    ("checkpoint_every", "tool", "periodic checkpoint interval in steps, 0 = end only"),
    ("controller", "tool", "comma-separated controllers: dqn, max-pressure, sotl, fixed-time, random"),
    ("mode", "tool", "evaluation mode: fd or pd"),
    ("episodes", "desk-scale", "evaluation episodes per scenario (fd)"),
    ("per_bucket", "desk-scale", "episodes per penetration bucket (pd)"),
    ("full_detection_episodes", "tool", "extra p_cv = 1 episodes (pd)"),
    ("pd_reference", "tool", "full-detection reference for pd: same or fd"),
    ("acceptable_ceiling", "calibrated", "loss % ceiling of the acceptability threshold"),
    ("optimal_ceiling", "calibrated", "loss % ceiling of the optimality threshold"),
    ("hist_bins", "tool", "bins of the EMTD histograms"),
    ("jobs", "tool", "parallel episodes, 0 = one per core"),
    ("time", "tool", "simulated seconds before inspect-state samples the grid"),
    ("out", "tool", "output directory (must exist)"),
    ("checkpoints", "tool", "checkpoint directory for eval, empty = out"),
];

impl Default for RunConfig {
    fn default() -> Self {
        let t = TrainConfig::new(ScenarioTag::A);
        Self {
            scenario: ScenarioTag::A,
            scenarios: ScenarioTag::ALL.to_vec(),
            steps: t.steps,
            desk_scale: false,
            seed: t.seed,
            gamma: t.gamma,
            lr: t.adam.lr,
            adam_beta1: t.adam.beta1,
            adam_beta2: t.adam.beta2,
            adam_eps: t.adam.eps,
            eps_min: t.eps_min,
            eps_dec: t.eps_dec,
            tau: t.tau,
            batch: t.batch,
            buffer: t.buffer_capacity,
            warmup: t.warmup,
            pcv: t.pcv,
            max_green: t.max_green,
            checkpoint_every: t.checkpoint_every,
            controllers: vec![ControllerKind::Dqn, ControllerKind::MaxPressure, ControllerKind::Sotl],
            mode: EvalMode::Fd,
            episodes: 50,
            per_bucket: 30,
            full_detection_episodes: 10,
            pd_reference: PdReference::Same,
            acceptable_ceiling: 40.0,
            optimal_ceiling: 20.0,
            hist_bins: 20,
            jobs: 0,
            time: 0,
            out: PathBuf::from("."),
            checkpoints: None,
        }
    }
}

fn parse<T: FromStr>(key: &str, value: &str) -> Result<T>
where
    T::Err: std::fmt::Display,
{
    value.trim().parse::<T>().map_err(|e| anyhow::anyhow!("invalid value '{value}' for {key}: {e}"))
}

fn list<T: FromStr>(key: &str, value: &str) -> Result<Vec<T>>
where
    T::Err: std::fmt::Display,
{
    let items: Vec<T> = value
        .split(',')
        .filter(|s| !s.trim().is_empty())
        .map(|s| parse(key, s))
        .collect::<Result<_>>()?;
    if items.is_empty() {
        bail!("{key} needs at least one entry");
    }
    Ok(items)
}

fn join<T: ToString>(items: &[T]) -> String {
    items.iter().map(T::to_string).collect::<Vec<_>>().join(",")
}

impl RunConfig {
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let v = value.trim();
        match key.trim().replace('-', "_").as_str() {
            "scenario" => self.scenario = parse(key, v)?,
            "scenarios" => self.scenarios = list(key, v)?,
            "steps" => self.steps = parse(key, v)?,
            "desk_scale" => self.desk_scale = parse(key, v)?,
            "seed" => self.seed = parse(key, v)?,
            "gamma" => self.gamma = parse(key, v)?,
            "lr" => self.lr = parse(key, v)?,
            "adam_beta1" => self.adam_beta1 = parse(key, v)?,
            "adam_beta2" => self.adam_beta2 = parse(key, v)?,
            "adam_eps" => self.adam_eps = parse(key, v)?,
            "eps_min" => self.eps_min = parse(key, v)?,
            "eps_dec" => self.eps_dec = parse(key, v)?,
            "tau" => self.tau = parse(key, v)?,
            "batch" => self.batch = parse(key, v)?,
            "buffer" => self.buffer = parse(key, v)?,
            "warmup" => self.warmup = parse(key, v)?,
            "pcv" => self.pcv = parse(key, v)?,
            "max_green" => {
                self.max_green = match v {
                    "" | "none" => None,
                    _ => Some(parse(key, v)?),
                }
            }
            "checkpoint_every" => self.checkpoint_every = parse(key, v)?,
            "controller" | "controllers" => self.controllers = list(key, v)?,
            "mode" => {
                self.mode = match v {
                    "fd" => EvalMode::Fd,
                    "pd" => EvalMode::Pd,
                    _ => bail!("invalid value '{v}' for mode: expected fd or pd"),
                }
            }
            "episodes" => self.episodes = parse(key, v)?,
            "per_bucket" => self.per_bucket = parse(key, v)?,
            "full_detection_episodes" => self.full_detection_episodes = parse(key, v)?,
            "pd_reference" => {
                self.pd_reference = match v {
                    "same" => PdReference::Same,
                    "fd" => PdReference::Fd,
                    _ => bail!("invalid value '{v}' for pd_reference: expected same or fd"),
                }
            }
            "acceptable_ceiling" => self.acceptable_ceiling = parse(key, v)?,
            "optimal_ceiling" => self.optimal_ceiling = parse(key, v)?,
            "hist_bins" => self.hist_bins = parse(key, v)?,
            "jobs" => self.jobs = parse(key, v)?,
            "time" => self.time = parse(key, v)?,
            "out" => self.out = PathBuf::from(v),
            "checkpoints" => self.checkpoints = (!v.is_empty()).then(|| PathBuf::from(v)),
            other => bail!("unknown config key '{other}'"),
        }
        Ok(())
    }

    fn value(&self, key: &str) -> String {
        match key {
            "scenario" => self.scenario.to_string(),
            "scenarios" => join(&self.scenarios),
            "steps" => self.steps.to_string(),
            "desk_scale" => self.desk_scale.to_string(),
            "seed" => self.seed.to_string(),
            "gamma" => self.gamma.to_string(),
            "lr" => self.lr.to_string(),
            "adam_beta1" => self.adam_beta1.to_string(),
            "adam_beta2" => self.adam_beta2.to_string(),
            "adam_eps" => self.adam_eps.to_string(),
            "eps_min" => self.eps_min.to_string(),
            "eps_dec" => self.eps_dec.to_string(),
            "tau" => self.tau.to_string(),
            "batch" => self.batch.to_string(),
            "buffer" => self.buffer.to_string(),
            "warmup" => self.warmup.to_string(),
            "pcv" => self.pcv.to_string(),
            "max_green" => self.max_green.map_or("none".into(), |g| g.to_string()),
            "checkpoint_every" => self.checkpoint_every.to_string(),
            "controller" => join(&self.controllers),
            "mode" => match self.mode {
                EvalMode::Fd => "fd".into(),
                EvalMode::Pd => "pd".into(),
            },
            "episodes" => self.episodes.to_string(),
            "per_bucket" => self.per_bucket.to_string(),
            "full_detection_episodes" => self.full_detection_episodes.to_string(),
            "pd_reference" => match self.pd_reference {
                PdReference::Same => "same".into(),
                PdReference::Fd => "fd".into(),
            },
            "acceptable_ceiling" => self.acceptable_ceiling.to_string(),
            "optimal_ceiling" => self.optimal_ceiling.to_string(),
            "hist_bins" => self.hist_bins.to_string(),
            "jobs" => self.jobs.to_string(),
            "time" => self.time.to_string(),
            "out" => self.out.display().to_string(),
            "checkpoints" => self.checkpoints.as_ref().map_or(String::new(), |p| p.display().to_string()),
            _ => unreachable!("key table and value() disagree on {key}"),
        }
    }

    /// Applies `key = value` lines; `#` starts a comment.
    pub fn apply_text(&mut self, text: &str) -> Result<()> {
        for (n, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .with_context(|| format!("line {}: expected key = value", n + 1))?;
            self.set(k, v).with_context(|| format!("line {}", n + 1))?;
        }
        Ok(())
    }

    pub fn dump(&self) -> String {
        let mut s = String::new();
        for (key, origin, help) in KEYS {
            writeln!(s, "# {help} [{origin}]").expect("write to string");
            writeln!(s, "{key} = {}", self.value(key)).expect("write to string");
        }
        s
    }

    pub fn checkpoint_dir(&self) -> PathBuf {
        self.checkpoints.clone().unwrap_or_else(|| self.out.clone())
    }

    pub fn train_config(&self) -> TrainConfig {
        let mut t = TrainConfig::new(self.scenario);
        t.steps = self.steps;
        t.seed = self.seed;
        t.gamma = self.gamma;
        t.adam = AdamConfig {
            lr: self.lr,
            beta1: self.adam_beta1,
            beta2: self.adam_beta2,
            eps: self.adam_eps,
        };
        t.eps_min = self.eps_min;
        t.eps_dec = self.eps_dec;
        t.tau = self.tau;
        t.batch = self.batch;
        t.buffer_capacity = self.buffer;
        t.warmup = self.warmup;
        t.pcv = self.pcv;
        t.max_green = self.max_green;
        t.checkpoint_every = self.checkpoint_every;
        if self.desk_scale {
            t = t.desk_scale(self.steps);
        }
        t
    }
}
