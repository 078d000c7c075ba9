mod config;

use std::collections::HashMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use crossflow::agent::{train, PcvMode};
use crossflow::controllers::{ControllerKind, Decision};
use crossflow::encoder::{encode, DtseConfig};
use crossflow::harness::{
    compare_fd, compare_pd, evaluation_demands, threshold_report, write_episodes_csv, write_fd_hist_csv,
    write_fd_summary_csv, write_pd_buckets_csv, write_pd_episodes_csv, ControllerSpec, PdOptions,
};
use crossflow::neural::{load_for_scenario, QNetwork};
use crossflow::sim::{build_scenario, ScenarioTag, Simulation};

use config::{EvalMode, PdReference, RunConfig, KEYS};

fn keys_help() -> String {
    let mut s = String::from("Config keys (file lines `key = value`, or --set key=value) and the origin of their defaults:\n");
    let d = RunConfig::default().dump();
    let values: Vec<&str> = d.lines().filter(|l| !l.starts_with('#')).collect();
    for ((key, origin, help), line) in KEYS.iter().zip(values) {
        let value = line.split_once(" = ").map_or("", |(_, v)| v);
        writeln!(s, "  {key:<24} {help} [{origin}: {value}]").expect("write to string");
    }
    s.push_str("\nPrecedence: defaults < --config file < CROSSFLOW_SEED < flags.");
    s
}

#[derive(Parser)]
#[command(name = "crossflow", version, about = "Signal control at a simulated intersection: train, evaluate, inspect")]
#[command(after_long_help = keys_help())]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Flat `key = value` configuration file
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Master seed
    #[arg(long, env = "CROSSFLOW_SEED", global = true)]
    seed: Option<u64>,
    /// Output directory; must already exist
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Any config key, repeatable (e.g. --set tau=0.005)
    #[arg(long = "set", value_name = "KEY=VALUE", global = true)]
    sets: Vec<String>,
}

#[derive(Subcommand)]
enum Command {
    /// Train a DQN agent and write its checkpoint and per-episode log
    Train {
        /// Scenario a, b or c
        #[arg(long)]
        scenario: Option<String>,
        /// Training decisions after warm-up [tuned default 4000000]
        #[arg(long)]
        steps: Option<u64>,
        /// Penetration during training: fixed:<p> or uniform [default fixed:1]
        #[arg(long)]
        pcv: Option<String>,
        /// Scale the exploration decay and warm-up to the step count
        #[arg(long)]
        desk_scale: bool,
        /// Cap on one green interval in seconds
        #[arg(long)]
        max_green: Option<f64>,
    },
    /// Compare controllers (fd) or the PD loss by penetration bucket (pd)
    Eval {
        /// fd or pd
        #[arg(long)]
        mode: Option<String>,
        /// Comma-separated controllers [default dqn,max-pressure,sotl]
        #[arg(long)]
        controller: Option<String>,
        /// Evaluation episodes per scenario [desk-scale default 50]
        #[arg(long)]
        episodes: Option<usize>,
        /// Episodes per penetration bucket in pd mode [desk-scale default 30]
        #[arg(long)]
        per_bucket: Option<usize>,
        /// Comma-separated scenarios [default a,b,c]
        #[arg(long)]
        scenarios: Option<String>,
        /// Parallel episodes, 0 = one per core
        #[arg(long)]
        jobs: Option<usize>,
        /// Directory holding the checkpoints [default: --out]
        #[arg(long)]
        checkpoints: Option<PathBuf>,
        /// Cap on one green interval in seconds
        #[arg(long)]
        max_green: Option<f64>,
    },
    /// Print the state grids and signal state after `--time` simulated seconds
    InspectState {
        /// Scenario a, b or c
        #[arg(long)]
        scenario: Option<String>,
        /// Simulated seconds to run first
        #[arg(long, short)]
        time: Option<u64>,
        /// Controller driving the signal until then [default fixed-time]
        #[arg(long)]
        controller: Option<String>,
        /// Directory holding the checkpoint when the controller is dqn
        #[arg(long)]
        checkpoints: Option<PathBuf>,
    },
    /// Print the resolved configuration in the config-file format
    DumpConfig,
}

#[derive(Default)]
struct Flags(Vec<(&'static str, String)>);

impl Flags {
    fn add<T: ToString>(&mut self, key: &'static str, value: &Option<T>) {
        if let Some(v) = value {
            self.0.push((key, v.to_string()));
        }
    }
}

fn resolve(common: &Common, flags: Flags) -> Result<RunConfig> {
    let mut cfg = RunConfig::default();
    if let Some(path) = &common.config {
        let text = fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
        cfg.apply_text(&text).with_context(|| format!("in {}", path.display()))?;
    }
    // clap already folded CROSSFLOW_SEED into --seed, so env sits between file and flags
    if let Some(seed) = common.seed {
        cfg.seed = seed;
    }
    for kv in &common.sets {
        let (k, v) = kv.split_once('=').with_context(|| format!("--set expects KEY=VALUE, got '{kv}'"))?;
        cfg.set(k, v)?;
    }
    for (k, v) in flags.0 {
        cfg.set(k, &v)?;
    }
    if let Some(out) = &common.out {
        cfg.out = out.clone();
    }
    Ok(cfg)
}

fn require_dir(path: &Path) -> Result<()> {
    if !path.is_dir() {
        bail!("output directory {} does not exist", path.display());
    }
    Ok(())
}

fn load_network(dir: &Path, tag: ScenarioTag, suffix: &str) -> Result<Arc<QNetwork<f32>>> {
    let path = dir.join(format!("dqn_{tag}_{suffix}.tscq"));
    if !path.is_file() {
        let pcv = if suffix == "fd" { "fixed:1" } else { "uniform" };
        bail!(
            "missing checkpoint {}; train it with `crossflow train --scenario {tag} --pcv {pcv} --out {}`",
            path.display(),
            dir.display()
        );
    }
    let bytes = fs::read(&path).with_context(|| format!("reading {}", path.display()))?;
    let (net, _) = load_for_scenario(&bytes, tag).with_context(|| format!("loading {}", path.display()))?;
    Ok(Arc::new(net))
}

fn in_pool<T: Send>(jobs: usize, f: impl FnOnce() -> T + Send) -> Result<T> {
    let pool = rayon::ThreadPoolBuilder::new().num_threads(jobs).build()?;
    Ok(pool.install(f))
}

fn cmd_train(cfg: &RunConfig) -> Result<()> {
    require_dir(&cfg.out)?;
    let t = cfg.train_config();
    let out = train(&t, Some(&cfg.out))?;
    let complete = out.log.iter().filter(|r| r.complete).count();
    println!(
        "trained scenario {} ({}) for {} steps: {} episodes ({} complete)",
        t.scenario,
        t.pcv,
        t.steps,
        out.log.len(),
        complete
    );
    if let Some(p) = &out.checkpoint_path {
        println!("checkpoint: {}", p.display());
    }
    if let Some(p) = &out.log_path {
        println!("log: {}", p.display());
    }
    Ok(())
}

fn cmd_eval_fd(cfg: &RunConfig) -> Result<()> {
    let mut networks = HashMap::new();
    if cfg.controllers.contains(&ControllerKind::Dqn) {
        for &tag in &cfg.scenarios {
            networks.insert(tag, load_network(&cfg.checkpoint_dir(), tag, "fd")?);
        }
    }
    let controllers = |tag: ScenarioTag| -> crossflow::Result<Vec<ControllerSpec>> {
        Ok(cfg
            .controllers
            .iter()
            .map(|&k| match k {
                ControllerKind::Dqn => ControllerSpec::Dqn { label: "dqn".into(), network: Arc::clone(&networks[&tag]) },
                other => ControllerSpec::Baseline(other),
            })
            .collect())
    };
    let report = in_pool(cfg.jobs, || compare_fd(&cfg.scenarios, cfg.episodes, cfg.seed, cfg.max_green, controllers))??;
    write_episodes_csv(&cfg.out.join("episodes.csv"), &report.episodes)?;
    write_fd_summary_csv(&cfg.out.join("fd_summary.csv"), &report)?;
    write_fd_hist_csv(&cfg.out, &report, cfg.hist_bins)?;
    println!("{:<9}{:<14}{:>9}{:>12}{:>10}", "scenario", "controller", "episodes", "mean EMTD", "std");
    for r in &report.summary {
        println!("{:<9}{:<14}{:>9}{:>12.2}{:>10.2}", r.scenario.to_string(), r.controller, r.episodes, r.mean_emtd, r.std_emtd);
    }
    Ok(())
}

fn cmd_eval_pd(cfg: &RunConfig) -> Result<()> {
    let ckpt_dir = cfg.checkpoint_dir();
    let opts = PdOptions {
        per_bucket: cfg.per_bucket,
        full_detection_episodes: cfg.full_detection_episodes,
        seed: cfg.seed,
        max_green: cfg.max_green,
    };
    let mut reports = Vec::new();
    let mut thresholds = String::new();
    for &tag in &cfg.scenarios {
        let pd = ControllerSpec::Dqn { label: "dqn-pd".into(), network: load_network(&ckpt_dir, tag, "pd")? };
        let fd = match cfg.pd_reference {
            PdReference::Same => pd.clone(),
            PdReference::Fd => ControllerSpec::Dqn { label: "dqn-fd".into(), network: load_network(&ckpt_dir, tag, "fd")? },
        };
        let r = in_pool(cfg.jobs, || compare_pd(tag, &pd, &fd, &opts))??;
        let pairs: Vec<(f64, f64)> = r.buckets.iter().map(|b| (b.lo, b.loss_pct)).collect();
        let t = threshold_report(&pairs, cfg.acceptable_ceiling, cfg.optimal_ceiling);
        writeln!(thresholds, "scenario {tag}").expect("write to string");
        thresholds.push_str(&t.render());
        writeln!(thresholds, "spearman(bucket, loss) = {:.3}\n", r.spearman).expect("write to string");
        println!("scenario {tag}: loss % by bucket");
        for b in &r.buckets {
            println!("  [{:.1}, {:.1}) {:>4} episodes {:>8.2}%", b.lo, b.hi, b.episodes, b.loss_pct);
        }
        reports.push(r);
    }
    write_pd_buckets_csv(&cfg.out.join("pd_loss_by_bucket.csv"), &reports)?;
    write_pd_episodes_csv(&cfg.out.join("pd_episodes.csv"), &reports)?;
    fs::write(cfg.out.join("thresholds.txt"), &thresholds)?;
    print!("{thresholds}");
    Ok(())
}

fn cmd_eval(cfg: &RunConfig) -> Result<()> {
    require_dir(&cfg.out)?;
    match cfg.mode {
        EvalMode::Fd => cmd_eval_fd(cfg),
        EvalMode::Pd => cmd_eval_pd(cfg),
    }
}

fn render_state(cfg: &RunConfig) -> Result<String> {
    let tag = cfg.scenario;
    let x = Arc::new(build_scenario(tag));
    let mut demand = evaluation_demands(&x, cfg.seed, 1).remove(0);
    if let PcvMode::Fixed(p) = cfg.pcv {
        demand.p_cv = p;
    }
    let spec = match cfg.controllers[0] {
        ControllerKind::Dqn => ControllerSpec::Dqn {
            label: "dqn".into(),
            network: load_network(&cfg.checkpoint_dir(), tag, cfg.pcv.tag())?,
        },
        other => ControllerSpec::Baseline(other),
    };
    let mut controller = spec.build(demand.seed, x.speed_limit);
    let mut sim = Simulation::new(Arc::clone(&x), &demand);
    sim.set_max_green(cfg.max_green);
    while (sim.time() as u64) < cfg.time && !sim.is_finished() {
        if let Decision::Phase(p) = controller.decide(&sim) {
            sim.apply_action(p)?;
        }
        sim.step();
    }
    let dtse = encode(&sim.observe().detected(), &DtseConfig { v_max: x.speed_limit, ..DtseConfig::default() })?;
    let (channels, lanes, cells) = dtse.shape();
    let timer = sim.timer();
    let phases = &x.program.phases;
    let mut s = String::new();
    writeln!(
        s,
        "scenario {tag}  seed {}  p_cv {:.3}  t = {} s  controller {}",
        demand.seed,
        demand.p_cv,
        sim.time(),
        spec.label()
    )?;
    writeln!(
        s,
        "phase {} ({}) -> {} ({})  stage {} for {} s  green {} s",
        timer.current_phase,
        phases[timer.current_phase].name,
        timer.next_phase,
        phases[timer.next_phase].name,
        timer.stage.as_str(),
        timer.stage_elapsed,
        timer.green_elapsed
    )?;
    writeln!(s, "state {channels}x{lanes}x{cells}, cell 0 at the stop line")?;
    let grid = |s: &mut String, title: &str, f: &dyn Fn(usize, usize) -> String| -> std::fmt::Result {
        writeln!(s, "{title}")?;
        for l in 0..lanes {
            let row: Vec<String> = (0..cells).map(|c| f(l, c)).collect();
            writeln!(s, "  lane {l:>2}  {}", row.join(" "))?;
        }
        Ok(())
    };
    grid(&mut s, "presence", &|l, c| format!("{:.0}", dtse.presence(l, c)))?;
    grid(&mut s, "speed", &|l, c| format!("{:.2}", dtse.speed(l, c)))?;
    grid(&mut s, "signal", &|l, c| format!("{:.0}", dtse.signal(l, c)))?;
    Ok(s)
}

fn cmd_inspect(cfg: &RunConfig) -> Result<()> {
    require_dir(&cfg.out)?;
    let text = render_state(cfg)?;
    fs::write(cfg.out.join(format!("state_{}_t{}.txt", cfg.scenario, cfg.time)), &text)?;
    print!("{text}");
    Ok(())
}

fn run() -> Result<()> {
    let cli = Cli::parse();
    let mut flags = Flags::default();
    match &cli.command {
        Command::Train { scenario, steps, pcv, desk_scale, max_green } => {
            flags.add("scenario", scenario);
            flags.add("steps", steps);
            flags.add("pcv", pcv);
            flags.add("max_green", max_green);
            if *desk_scale {
                flags.add("desk_scale", &Some(true));
            }
        }
        Command::Eval { mode, controller, episodes, per_bucket, scenarios, jobs, checkpoints, max_green } => {
            flags.add("mode", mode);
            flags.add("controller", controller);
            flags.add("episodes", episodes);
            flags.add("per_bucket", per_bucket);
            flags.add("scenarios", scenarios);
            flags.add("jobs", jobs);
            flags.add("checkpoints", &checkpoints.as_ref().map(|p| p.display().to_string()));
            flags.add("max_green", max_green);
        }
        Command::InspectState { scenario, time, controller, checkpoints } => {
            flags.add("scenario", scenario);
            flags.add("time", time);
            flags.add("controller", &Some(controller.as_deref().unwrap_or("fixed-time")));
            flags.add("checkpoints", &checkpoints.as_ref().map(|p| p.display().to_string()));
        }
        Command::DumpConfig => {}
    }
    let cfg = resolve(&cli.common, flags)?;
    match cli.command {
        Command::Train { .. } => cmd_train(&cfg),
        Command::Eval { .. } => cmd_eval(&cfg),
        Command::InspectState { .. } => cmd_inspect(&cfg),
        Command::DumpConfig => {
            print!("{}", cfg.dump());
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    match run() {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
