//! Decision-level view of the simulator: one step = one agent decision.

use std::sync::Arc;

use crate::encoder::{encode, DtseConfig, PartialDtse};
use crate::error::Result;
use crate::reward::{total_squared_delay, RewardState};
use crate::sim::{DemandConfig, Intersection, Simulation};

#[derive(Clone, Debug)]
pub struct EnvStep {
    pub next_state: PartialDtse,
    /// Mean of the per-second rewards over the decision interval.
    pub reward: f64,
    pub terminal: bool,
    /// Simulated seconds covered by this decision.
    pub seconds: u32,
}

#[derive(Clone, Debug)]
pub struct TrafficEnv {
    intersection: Arc<Intersection>,
    dtse: DtseConfig,
    max_green: Option<f64>,
    sim: Option<Simulation>,
    delay_sum: f64,
    seconds: u64,
}

impl TrafficEnv {
    pub fn new(intersection: Arc<Intersection>, max_green: Option<f64>) -> Self {
        let dtse = DtseConfig {
            v_max: intersection.speed_limit,
            ..DtseConfig::default()
        };
        Self {
            intersection,
            dtse,
            max_green,
            sim: None,
            delay_sum: 0.0,
            seconds: 0,
        }
    }

    pub fn sim(&self) -> &Simulation {
        self.sim.as_ref().expect("reset() must be called first")
    }

    pub fn actions(&self) -> usize {
        self.intersection.phase_count()
    }

    fn advance(&mut self, rewards: &mut RewardState) -> (f64, u32) {
        let sim = self.sim.as_mut().expect("reset() must be called first");
        let v_max = sim.intersection().speed_limit;
        let mut sum = 0.0;
        let mut n = 0;
        loop {
            sim.step();
            let tsd = total_squared_delay(sim.incoming_vehicles().map(|v| v.speed), v_max);
            sum += rewards.reward(tsd);
            self.delay_sum += sim.total_delay();
            self.seconds += 1;
            n += 1;
            if sim.is_finished() || sim.is_decision_point() {
                break;
            }
        }
        (sum / n as f64, n)
    }

    fn state(&self) -> PartialDtse {
        let obs = self.sim().observe().detected();
        encode(&obs, &self.dtse).expect("simulator views match the encoder")
    }

    /// Starts an episode and runs it to the first decision point.
    pub fn reset(&mut self, demand: &DemandConfig, rewards: &mut RewardState) -> PartialDtse {
        let mut sim = Simulation::new(Arc::clone(&self.intersection), demand);
        sim.set_max_green(self.max_green);
        self.sim = Some(sim);
        self.delay_sum = 0.0;
        self.seconds = 0;
        if !self.sim().is_decision_point() {
            self.advance(rewards);
        }
        self.state()
    }

    /// Applies `action` and simulates until the next decision point or the horizon.
    pub fn step(&mut self, action: usize, rewards: &mut RewardState) -> Result<EnvStep> {
        self.sim
            .as_mut()
            .expect("reset() must be called first")
            .apply_action(action)?;
        let (reward, seconds) = self.advance(rewards);
        Ok(EnvStep {
            next_state: self.state(),
            reward,
            terminal: self.sim().is_finished(),
            seconds,
        })
    }

    /// Mean total linear delay per simulated second so far.
    pub fn emtd(&self) -> f64 {
        if self.seconds == 0 {
            0.0
        } else {
            self.delay_sum / self.seconds as f64
        }
    }
}
