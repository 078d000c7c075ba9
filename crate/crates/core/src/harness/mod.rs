//! Seeded episode runner and the controller comparisons.

mod compare;
mod report;

use std::fmt;
use std::sync::Arc;

pub use compare::{
    compare_fd, compare_pd, evaluation_demands, pd_demands, FdReport, FdSummaryRow, PdBucket, PdEpisode,
    PdOptions, PdReport, BUCKETS,
};
pub use report::{
    histogram, mean_std, spearman, threshold_report, write_episodes_csv, write_fd_hist_csv, write_fd_summary_csv,
    write_pd_buckets_csv, write_pd_episodes_csv, Thresholds,
};

use crate::agent::DqnController;
use crate::controllers::{Controller, ControllerKind, Decision};
use crate::error::Result;
use crate::neural::QNetwork;
use crate::sim::{DemandConfig, Intersection, ScenarioTag, Simulation};

/// Speed under which an incoming vehicle counts as queued (m/s).
pub const QUEUE_SPEED: f64 = 0.1;

#[derive(Clone, Debug, PartialEq)]
pub struct EpisodeStats {
    pub scenario: ScenarioTag,
    pub controller: String,
    pub seed: u64,
    pub p_cv: f64,
    /// Mean over simulated seconds of the summed linear delay of all in-network vehicles.
    pub emtd: f64,
    /// Vehicles that left the network.
    pub throughput: u64,
    pub inserted: u64,
    pub mean_queue: f64,
    pub steps: u64,
    pub arrival_digest: u64,
}

/// A controller that can be instantiated per episode (possibly on another thread).
#[derive(Clone)]
pub enum ControllerSpec {
    Baseline(ControllerKind),
    Dqn { label: String, network: Arc<QNetwork<f32>> },
}

impl fmt::Debug for ControllerSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.label())
    }
}

impl ControllerSpec {
    pub fn label(&self) -> String {
        match self {
            ControllerSpec::Baseline(k) => k.as_str().to_string(),
            ControllerSpec::Dqn { label, .. } => label.clone(),
        }
    }

    pub fn build(&self, seed: u64, v_max: f64) -> Box<dyn Controller> {
        match self {
            ControllerSpec::Baseline(k) => k.build_baseline(seed).expect("baseline kinds only"),
            ControllerSpec::Dqn { network, .. } => Box::new(DqnController::new(Arc::clone(network), v_max)),
        }
    }
}

/// Simulates one full episode under `controller`.
pub fn run_episode(
    intersection: &Arc<Intersection>,
    controller: &mut dyn Controller,
    demand: &DemandConfig,
    max_green: Option<f64>,
) -> Result<EpisodeStats> {
    let mut sim = Simulation::new(Arc::clone(intersection), demand);
    sim.set_max_green(max_green);
    let mut delay = 0.0;
    let mut queue = 0u64;
    let mut steps = 0u64;
    while !sim.is_finished() {
        if let Decision::Phase(p) = controller.decide(&sim) {
            sim.apply_action(p)?;
        }
        sim.step();
        delay += sim.total_delay();
        queue += sim.incoming_vehicles().filter(|v| v.speed < QUEUE_SPEED).count() as u64;
        steps += 1;
    }
    let c = sim.counters();
    Ok(EpisodeStats {
        scenario: intersection.tag,
        controller: controller.name().to_string(),
        seed: demand.seed,
        p_cv: demand.p_cv,
        emtd: if steps > 0 { delay / steps as f64 } else { 0.0 },
        throughput: c.exited,
        inserted: c.inserted,
        mean_queue: if steps > 0 { queue as f64 / steps as f64 } else { 0.0 },
        steps,
        arrival_digest: sim.arrival_digest(),
    })
}
