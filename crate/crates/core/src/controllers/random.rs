use super::{Controller, Decision};
use crate::rng::{streams, RngStream};
use crate::sim::Simulation;

/// Uniform phase choice at every decision point.
#[derive(Clone, Debug)]
pub struct RandomController {
    rng: RngStream,
}

impl RandomController {
    pub fn new(seed: u64) -> Self {
        Self {
            rng: RngStream::with_stream(seed, streams::POLICY),
        }
    }

    pub fn choose(&mut self, phases: usize) -> usize {
        self.rng.index(phases)
    }
}

impl Controller for RandomController {
    fn name(&self) -> &'static str {
        "random"
    }

    fn decide(&mut self, sim: &Simulation) -> Decision {
        if sim.is_decision_point() {
            Decision::Phase(self.choose(sim.program().len()))
        } else {
            Decision::Hold
        }
    }
}
