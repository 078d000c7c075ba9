//! Self-organizing traffic lights (platoon variant).

use super::{Controller, Decision};
use crate::sim::{Intersection, Observation, PhaseTimer, Simulation};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SotlParams {
    /// Threshold on the accumulated red-lane demand.
    pub mu: u64,
    /// Largest platoon still allowed to keep its green.
    pub nu: usize,
    /// Counting distance on red lanes (m).
    pub psi: f64,
    /// Platoon distance on green lanes (m).
    pub omega: f64,
}

impl Default for SotlParams {
    fn default() -> Self {
        Self {
            mu: 50,
            nu: 3,
            psi: 80.0,
            omega: 25.0,
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct SotlState {
    /// Accumulated vehicle-seconds waiting on red lanes.
    pub chi: u64,
    /// Phase `chi` has been accumulated against.
    pub phase: usize,
}

/// Incoming lanes with at least one connection in `phase`.
fn lane_in_phase(intersection: &Intersection, phase: usize, lane: usize) -> bool {
    let conns = &intersection.program.phases[phase].connections;
    intersection.incoming[lane]
        .connections
        .iter()
        .any(|c| conns.contains(c))
}

/// One SOTL update: accumulate, then advance the cycle when the demand
/// exceeds `mu` and the green platoon is empty or larger than `nu`.
pub fn sotl_step(
    obs: &Observation,
    state: &mut SotlState,
    timer: &PhaseTimer,
    intersection: &Intersection,
    params: &SotlParams,
) -> Decision {
    let program = &intersection.program;
    let phase = timer.active_phase();
    if phase != state.phase {
        state.phase = phase;
        state.chi = 0;
    }

    for (l, lane) in obs.incoming.iter().enumerate() {
        if !lane_in_phase(intersection, phase, l) {
            state.chi += lane.iter().filter(|v| v.pos < params.psi).count() as u64;
        }
    }

    if timer.is_decision_point(program) && state.chi > params.mu {
        let eta: usize = obs
            .incoming
            .iter()
            .enumerate()
            .filter(|(l, _)| lane_in_phase(intersection, phase, *l))
            .map(|(_, lane)| lane.iter().filter(|v| v.pos < params.omega).count())
            .sum();
        if eta == 0 || eta > params.nu {
            let next = program.next_in_cycle(phase);
            state.chi = 0;
            state.phase = next;
            return Decision::Phase(next);
        }
    }
    Decision::Hold
}

#[derive(Clone, Debug)]
pub struct Sotl {
    pub params: SotlParams,
    pub state: SotlState,
}

impl Sotl {
    pub fn new(params: SotlParams) -> Self {
        Self {
            params,
            state: SotlState::default(),
        }
    }
}

impl Controller for Sotl {
    fn name(&self) -> &'static str {
        "sotl"
    }

    fn decide(&mut self, sim: &Simulation) -> Decision {
        sotl_step(
            &sim.observe(),
            &mut self.state,
            sim.timer(),
            sim.intersection(),
            &self.params,
        )
    }
}
