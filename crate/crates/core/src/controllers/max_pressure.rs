use super::{Controller, Decision};
use crate::sim::{Intersection, Observation, Simulation};

/// Pressure of every phase: vehicles on the phase's incoming lanes minus
/// vehicles on its outgoing lanes, each lane counted once per phase.
pub fn phase_pressures(obs: &Observation, intersection: &Intersection) -> Vec<i64> {
    intersection
        .program
        .phases
        .iter()
        .map(|phase| {
            let mut inc: Vec<usize> = phase
                .connections
                .iter()
                .map(|&c| intersection.connections[c].from_lane)
                .collect();
            let mut out: Vec<usize> = phase
                .connections
                .iter()
                .map(|&c| intersection.connections[c].to_lane)
                .collect();
            inc.sort_unstable();
            inc.dedup();
            out.sort_unstable();
            out.dedup();
            let i: usize = inc.iter().map(|&l| obs.incoming_count(l)).sum();
            let o: usize = out.iter().map(|&l| obs.outgoing_count(l)).sum();
            i as i64 - o as i64
        })
        .collect()
}

/// Phase with the highest pressure; the lowest index wins ties.
pub fn max_pressure_decide(obs: &Observation, intersection: &Intersection) -> usize {
    let pressures = phase_pressures(obs, intersection);
    let mut best = 0;
    for (p, &value) in pressures.iter().enumerate() {
        if value > pressures[best] {
            best = p;
        }
    }
    best
}

#[derive(Clone, Copy, Debug, Default)]
pub struct MaxPressure;

impl Controller for MaxPressure {
    fn name(&self) -> &'static str {
        "max-pressure"
    }

    fn decide(&mut self, sim: &Simulation) -> Decision {
        if !sim.is_decision_point() {
            return Decision::Hold;
        }
        Decision::Phase(max_pressure_decide(&sim.observe(), sim.intersection()))
    }
}
