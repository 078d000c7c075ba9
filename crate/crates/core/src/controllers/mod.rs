//! Rule-based signal controllers behind one decision interface.
//!
//! The episode loop calls [`Controller::decide`] once per simulated second,
//! before stepping. Returning [`Decision::Phase`] is only legal at a decision
//! point of the phase timer; choosing the running phase extends its green.

mod fixed_time;
mod max_pressure;
mod random;
mod sotl;

use std::fmt;
use std::str::FromStr;

pub use fixed_time::{fixed_time_decide, FixedTime, DEFAULT_FIXED_GREEN};
pub use max_pressure::{max_pressure_decide, phase_pressures, MaxPressure};
pub use random::RandomController;
pub use sotl::{sotl_step, Sotl, SotlParams, SotlState};

use crate::error::Error;
use crate::sim::Simulation;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Decision {
    /// Keep the signal as it is.
    Hold,
    /// Select a phase (extension when it is the running one).
    Phase(usize),
}

pub trait Controller: Send {
    fn name(&self) -> &'static str;

    fn decide(&mut self, sim: &Simulation) -> Decision;
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum ControllerKind {
    Dqn,
    MaxPressure,
    Sotl,
    FixedTime,
    Random,
}

impl ControllerKind {
    pub const ALL: [ControllerKind; 5] = [
        ControllerKind::Dqn,
        ControllerKind::MaxPressure,
        ControllerKind::Sotl,
        ControllerKind::FixedTime,
        ControllerKind::Random,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            ControllerKind::Dqn => "dqn",
            ControllerKind::MaxPressure => "max-pressure",
            ControllerKind::Sotl => "sotl",
            ControllerKind::FixedTime => "fixed-time",
            ControllerKind::Random => "random",
        }
    }

    /// Builds a rule-based controller; `None` for [`ControllerKind::Dqn`],
    /// which needs a network (see [`crate::agent::DqnController`]).
    pub fn build_baseline(self, seed: u64) -> Option<Box<dyn Controller>> {
        match self {
            ControllerKind::Dqn => None,
            ControllerKind::MaxPressure => Some(Box::new(MaxPressure)),
            ControllerKind::Sotl => Some(Box::new(Sotl::new(SotlParams::default()))),
            ControllerKind::FixedTime => Some(Box::new(FixedTime::new(DEFAULT_FIXED_GREEN))),
            ControllerKind::Random => Some(Box::new(RandomController::new(seed))),
        }
    }
}

impl fmt::Display for ControllerKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ControllerKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Error> {
        match s.to_ascii_lowercase().replace('_', "-").as_str() {
            "dqn" => Ok(ControllerKind::Dqn),
            "max-pressure" | "maxpressure" | "mp" => Ok(ControllerKind::MaxPressure),
            "sotl" => Ok(ControllerKind::Sotl),
            "fixed-time" | "fixed" | "fixedtime" => Ok(ControllerKind::FixedTime),
            "random" => Ok(ControllerKind::Random),
            other => Err(Error::Config(format!("unknown controller '{other}'"))),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn kinds_round_trip() {
        for k in ControllerKind::ALL {
            assert_eq!(k.as_str().parse::<ControllerKind>().unwrap(), k);
        }
        assert!("webster".parse::<ControllerKind>().is_err());
        assert!(ControllerKind::Dqn.build_baseline(0).is_none());
        assert_eq!(ControllerKind::Sotl.build_baseline(0).unwrap().name(), "sotl");
    }
}
