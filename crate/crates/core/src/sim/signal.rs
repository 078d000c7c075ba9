//! Signal program and the green → change → clearance phase machine.

use crate::error::{Error, Result};

/// Tolerance for comparing accumulated clock values.
const CLOCK_EPS: f64 = 1e-9;

#[derive(Clone, Debug, PartialEq)]
pub struct Phase {
    pub name: String,
    /// Connections that are green while this phase is active.
    pub connections: Vec<usize>,
    /// Green connections that must yield to opposing traffic (permissive left turns).
    pub permissive: Vec<usize>,
}

impl Phase {
    pub fn new(name: &str, connections: Vec<usize>, permissive: Vec<usize>) -> Self {
        Self {
            name: name.to_string(),
            connections,
            permissive,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SignalProgram {
    pub phases: Vec<Phase>,
    /// Minimum green interval, also the extension granted per decision.
    pub min_green: f64,
    /// Change (yellow) interval.
    pub change: f64,
    /// Clearance (all red) interval.
    pub clearance: f64,
    /// Optional cap on a single green interval; reaching it forces a cyclic advance.
    pub max_green: Option<f64>,
}

impl SignalProgram {
    pub fn new(phases: Vec<Phase>) -> Self {
        Self {
            phases,
            min_green: 10.0,
            change: 3.0,
            clearance: 2.0,
            max_green: None,
        }
    }

    pub fn len(&self) -> usize {
        self.phases.len()
    }

    pub fn is_empty(&self) -> bool {
        self.phases.is_empty()
    }

    pub fn next_in_cycle(&self, phase: usize) -> usize {
        (phase + 1) % self.phases.len()
    }

    /// True when one connection is a permissive left turn and the other runs
    /// in the same phase (so the pair is resolved by yielding, not by the signal).
    pub fn is_permissive_pair(&self, a: usize, b: usize) -> bool {
        self.phases.iter().any(|p| {
            p.connections.contains(&a)
                && p.connections.contains(&b)
                && (p.permissive.contains(&a) || p.permissive.contains(&b))
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Stage {
    Green,
    Change,
    Clearance,
}

impl Stage {
    pub fn as_str(self) -> &'static str {
        match self {
            Stage::Green => "green",
            Stage::Change => "change",
            Stage::Clearance => "clearance",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SignalState {
    Green,
    Yellow,
    Red,
}

/// Phase timer. `current_phase` is the phase whose green is running (or was
/// running, during change); `next_phase` is the phase that will turn green
/// at the end of the transition.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PhaseTimer {
    pub current_phase: usize,
    pub next_phase: usize,
    pub stage: Stage,
    pub stage_elapsed: f64,
    /// Length of the running green interval so far (T_g).
    pub green_elapsed: f64,
    /// Green elapsed at which the next decision becomes legal.
    pub hold_until: f64,
}

impl PhaseTimer {
    pub fn new(program: &SignalProgram) -> Self {
        Self {
            current_phase: 0,
            next_phase: 0,
            stage: Stage::Green,
            stage_elapsed: 0.0,
            green_elapsed: 0.0,
            hold_until: program.min_green,
        }
    }

    /// Phase that owns the green now, or will own it after the running transition.
    pub fn active_phase(&self) -> usize {
        match self.stage {
            Stage::Green => self.current_phase,
            Stage::Change | Stage::Clearance => self.next_phase,
        }
    }

    fn max_green_reached(&self, program: &SignalProgram) -> bool {
        matches!(program.max_green, Some(m) if self.green_elapsed >= m - CLOCK_EPS)
    }

    pub fn is_decision_point(&self, program: &SignalProgram) -> bool {
        self.stage == Stage::Green
            && self.green_elapsed >= self.hold_until - CLOCK_EPS
            && !self.max_green_reached(program)
    }

    /// Selects the next phase. Choosing the running phase extends its green
    /// by the minimum green; any other choice starts change → clearance →
    /// green of the chosen phase.
    pub fn apply_action(&mut self, program: &SignalProgram, choice: usize, time: f64) -> Result<()> {
        if choice >= program.len() {
            return Err(Error::PhaseOutOfRange {
                index: choice,
                phases: program.len(),
            });
        }
        if !self.is_decision_point(program) {
            return Err(Error::IllegalDecision { time });
        }
        if choice == self.current_phase {
            let mut until = self.green_elapsed + program.min_green;
            if let Some(max) = program.max_green {
                until = until.min(max);
            }
            self.hold_until = until;
        } else {
            self.begin_change(choice);
        }
        Ok(())
    }

    fn begin_change(&mut self, next: usize) {
        self.next_phase = next;
        self.stage = Stage::Change;
        self.stage_elapsed = 0.0;
    }

    /// Forces a cyclic advance when the maximum green has been reached.
    /// Returns true if a change was started.
    pub fn enforce_max_green(&mut self, program: &SignalProgram) -> bool {
        if self.stage == Stage::Green && self.max_green_reached(program) {
            self.begin_change(program.next_in_cycle(self.current_phase));
            true
        } else {
            false
        }
    }

    fn enter_green(&mut self, program: &SignalProgram) {
        self.current_phase = self.next_phase;
        self.stage = Stage::Green;
        self.stage_elapsed = 0.0;
        self.green_elapsed = 0.0;
        self.hold_until = program.min_green;
    }

    /// Advances stage clocks by `dt` and performs due stage transitions.
    pub fn advance(&mut self, program: &SignalProgram, dt: f64) {
        self.stage_elapsed += dt;
        match self.stage {
            Stage::Green => self.green_elapsed += dt,
            Stage::Change => {
                if self.stage_elapsed >= program.change - CLOCK_EPS {
                    if program.clearance > 0.0 {
                        self.stage = Stage::Clearance;
                        self.stage_elapsed = 0.0;
                    } else {
                        self.enter_green(program);
                    }
                }
            }
            Stage::Clearance => {
                if self.stage_elapsed >= program.clearance - CLOCK_EPS {
                    self.enter_green(program);
                }
            }
        }
    }

    /// Signal shown to `connection` in the current stage.
    pub fn signal_for(&self, program: &SignalProgram, connection: usize) -> SignalState {
        let in_current = program.phases[self.current_phase]
            .connections
            .contains(&connection);
        match (self.stage, in_current) {
            (Stage::Green, true) => SignalState::Green,
            (Stage::Change, true) => SignalState::Yellow,
            _ => SignalState::Red,
        }
    }
}
