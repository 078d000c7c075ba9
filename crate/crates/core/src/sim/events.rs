//! Per-vehicle event log and its CSV export.

use std::io::{self, Write};

use super::geometry::Intersection;
use super::signal::Stage;
use super::vehicle::VehicleId;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum EventKind {
    Insert,
    Cross,
    Exit,
    State,
}

impl EventKind {
    pub fn as_str(self) -> &'static str {
        match self {
            EventKind::Insert => "insert",
            EventKind::Cross => "cross",
            EventKind::Exit => "exit",
            EventKind::State => "state",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum LaneRef {
    Incoming(usize),
    Outgoing(usize),
}

#[derive(Clone, Debug, PartialEq)]
pub struct SimEvent {
    pub t: f64,
    pub kind: EventKind,
    pub vehicle_id: VehicleId,
    pub is_cv: bool,
    pub lane: LaneRef,
    pub pos: f64,
    pub speed: f64,
    pub phase: usize,
    pub stage: Stage,
}

/// Writes `t,event,vehicle_id,is_cv,lane,pos,speed,phase,stage` rows.
pub fn write_event_csv<W: Write>(
    mut out: W,
    intersection: &Intersection,
    events: &[SimEvent],
) -> io::Result<()> {
    writeln!(out, "t,event,vehicle_id,is_cv,lane,pos,speed,phase,stage")?;
    for e in events {
        let lane = match e.lane {
            LaneRef::Incoming(l) => intersection.incoming[l].label(),
            LaneRef::Outgoing(l) => intersection.outgoing[l].label(),
        };
        writeln!(
            out,
            "{},{},{},{},{},{},{},{},{}",
            e.t,
            e.kind.as_str(),
            e.vehicle_id,
            u8::from(e.is_cv),
            lane,
            e.pos,
            e.speed,
            e.phase,
            e.stage.as_str()
        )?;
    }
    Ok(())
}
