use super::{Controller, Decision};
use crate::sim::{PhaseTimer, SignalProgram, Simulation};

pub const DEFAULT_FIXED_GREEN: f64 = 30.0;

/// Pretimed cycle: advance to the next phase once the green reaches `green`.
pub fn fixed_time_decide(timer: &PhaseTimer, program: &SignalProgram, green: f64) -> Decision {
    if timer.is_decision_point(program) && timer.green_elapsed >= green - 1e-9 {
        Decision::Phase(program.next_in_cycle(timer.current_phase))
    } else {
        Decision::Hold
    }
}

#[derive(Clone, Copy, Debug)]
pub struct FixedTime {
    pub green: f64,
}

impl FixedTime {
    pub fn new(green: f64) -> Self {
        Self { green }
    }
}

impl Controller for FixedTime {
    fn name(&self) -> &'static str {
        "fixed-time"
    }

    fn decide(&mut self, sim: &Simulation) -> Decision {
        fixed_time_decide(sim.timer(), sim.program(), self.green)
    }
}
