//! Static layout of the isolated 4-way intersection.
//!
//! Approaches are indexed N=0, E=1, S=2, W=3. Traffic drives on the right,
//! so from approach `e` a right turn exits on leg `(e + 3) % 4`, a through
//! movement on `(e + 2) % 4` and a left turn on `(e + 1) % 4`.

use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::sim::signal::{Phase, SignalProgram};

pub const APPROACH_NAMES: [char; 4] = ['N', 'E', 'S', 'W'];

pub const DEFAULT_APPROACH_LENGTH: f64 = 300.0;
/// 50 km/h.
pub const DEFAULT_SPEED_LIMIT: f64 = 13.89;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum ScenarioTag {
    A,
    B,
    C,
}

impl ScenarioTag {
    pub const ALL: [ScenarioTag; 3] = [ScenarioTag::A, ScenarioTag::B, ScenarioTag::C];

    pub fn as_char(self) -> char {
        match self {
            ScenarioTag::A => 'a',
            ScenarioTag::B => 'b',
            ScenarioTag::C => 'c',
        }
    }

    pub fn lanes_per_approach(self) -> usize {
        match self {
            ScenarioTag::A => 2,
            ScenarioTag::B => 3,
            ScenarioTag::C => 4,
        }
    }

    pub fn phase_count(self) -> usize {
        match self {
            ScenarioTag::A => 2,
            ScenarioTag::B | ScenarioTag::C => 4,
        }
    }
}

impl fmt::Display for ScenarioTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.as_char())
    }
}

impl FromStr for ScenarioTag {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "a" => Ok(ScenarioTag::A),
            "b" => Ok(ScenarioTag::B),
            "c" => Ok(ScenarioTag::C),
            _ => Err(Error::UnknownScenario(s.to_string())),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Movement {
    Right,
    Through,
    Left,
}

impl Movement {
    pub const ALL: [Movement; 3] = [Movement::Right, Movement::Through, Movement::Left];

    /// Leg on which a vehicle from `approach` leaves the intersection.
    pub fn exit_leg(self, approach: usize) -> usize {
        match self {
            Movement::Right => (approach + 3) % 4,
            Movement::Through => (approach + 2) % 4,
            Movement::Left => (approach + 1) % 4,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum LaneDirection {
    Incoming,
    Outgoing,
}

/// Static description of one lane. Vehicles live in the simulation state.
#[derive(Clone, Debug)]
pub struct Lane {
    pub id: usize,
    pub direction: LaneDirection,
    pub approach: usize,
    pub index_from_curb: usize,
    /// Connection ids leaving this lane (empty for outgoing lanes).
    pub connections: Vec<usize>,
}

impl Lane {
    pub fn label(&self) -> String {
        let dir = match self.direction {
            LaneDirection::Incoming => "in",
            LaneDirection::Outgoing => "out",
        };
        format!(
            "{dir}:{}{}",
            APPROACH_NAMES[self.approach], self.index_from_curb
        )
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Connection {
    pub id: usize,
    /// Incoming lane index.
    pub from_lane: usize,
    /// Outgoing lane index.
    pub to_lane: usize,
    pub approach: usize,
    pub movement: Movement,
}

#[derive(Clone, Debug)]
pub struct Intersection {
    pub tag: ScenarioTag,
    pub approach_length: f64,
    pub speed_limit: f64,
    pub lanes_per_approach: usize,
    /// Ordered by approach (N, E, S, W) then curb to median.
    pub incoming: Vec<Lane>,
    pub outgoing: Vec<Lane>,
    pub connections: Vec<Connection>,
    pub program: SignalProgram,
}

/// Movements served by each incoming lane, curb to median.
fn lane_movements(tag: ScenarioTag) -> Vec<Vec<Movement>> {
    use Movement::*;
    match tag {
        ScenarioTag::A => vec![vec![Right, Through], vec![Left]],
        ScenarioTag::B => vec![vec![Right, Through], vec![Through], vec![Left]],
        ScenarioTag::C => vec![vec![Right, Through], vec![Through], vec![Left], vec![Left]],
    }
}

/// Builds one of the three evaluation layouts.
///
/// * (a) 2 lanes per approach, 2-phase permissive program, median lane for
///   permissive left turns.
/// * (b) 3 lanes per approach, 4-phase protected program, one left lane.
/// * (c) 4 lanes per approach, 4-phase protected program, two left lanes.
pub fn build_scenario(tag: ScenarioTag) -> Intersection {
    let lanes = tag.lanes_per_approach();
    let layout = lane_movements(tag);

    let mut incoming = Vec::with_capacity(4 * lanes);
    let mut outgoing = Vec::with_capacity(4 * lanes);
    for approach in 0..4 {
        for index_from_curb in 0..lanes {
            incoming.push(Lane {
                id: incoming.len(),
                direction: LaneDirection::Incoming,
                approach,
                index_from_curb,
                connections: Vec::new(),
            });
            outgoing.push(Lane {
                id: outgoing.len(),
                direction: LaneDirection::Outgoing,
                approach,
                index_from_curb,
                connections: Vec::new(),
            });
        }
    }

    let mut connections = Vec::new();
    for approach in 0..4 {
        for (index_from_curb, movements) in layout.iter().enumerate() {
            let from_lane = approach * lanes + index_from_curb;
            for &movement in movements {
                let leg = movement.exit_leg(approach);
                // Right turns hug the curb; the others keep their lane index.
                let target_index = match movement {
                    Movement::Right => 0,
                    _ => index_from_curb,
                };
                let id = connections.len();
                connections.push(Connection {
                    id,
                    from_lane,
                    to_lane: leg * lanes + target_index,
                    approach,
                    movement,
                });
                incoming[from_lane].connections.push(id);
            }
        }
    }

    let program = build_program(tag, &connections);
    Intersection {
        tag,
        approach_length: DEFAULT_APPROACH_LENGTH,
        speed_limit: DEFAULT_SPEED_LIMIT,
        lanes_per_approach: lanes,
        incoming,
        outgoing,
        connections,
        program,
    }
}

fn build_program(tag: ScenarioTag, connections: &[Connection]) -> SignalProgram {
    let select = |approaches: &[usize], movements: &[Movement]| -> Vec<usize> {
        connections
            .iter()
            .filter(|c| approaches.contains(&c.approach) && movements.contains(&c.movement))
            .map(|c| c.id)
            .collect()
    };
    use Movement::*;
    let phases = match tag {
        ScenarioTag::A => {
            let ns = select(&[0, 2], &[Right, Through, Left]);
            let ew = select(&[1, 3], &[Right, Through, Left]);
            let ns_left = select(&[0, 2], &[Left]);
            let ew_left = select(&[1, 3], &[Left]);
            vec![
                Phase::new("NS", ns, ns_left),
                Phase::new("EW", ew, ew_left),
            ]
        }
        ScenarioTag::B | ScenarioTag::C => vec![
            Phase::new("NS-TR", select(&[0, 2], &[Right, Through]), vec![]),
            Phase::new("NS-L", select(&[0, 2], &[Left]), vec![]),
            Phase::new("EW-TR", select(&[1, 3], &[Right, Through]), vec![]),
            Phase::new("EW-L", select(&[1, 3], &[Left]), vec![]),
        ],
    };
    SignalProgram::new(phases)
}

impl Intersection {
    pub fn incoming_lane_count(&self) -> usize {
        self.incoming.len()
    }

    pub fn phase_count(&self) -> usize {
        self.program.phases.len()
    }

    /// Connection ids whose origin lies on `approach`, in connection order.
    pub fn approach_connections(&self, approach: usize) -> Vec<usize> {
        self.connections
            .iter()
            .filter(|c| c.approach == approach)
            .map(|c| c.id)
            .collect()
    }

    /// Incoming lanes of `approach` that serve `movement`, with the matching connection.
    pub fn lanes_for_movement(&self, approach: usize, movement: Movement) -> Vec<(usize, usize)> {
        self.connections
            .iter()
            .filter(|c| c.approach == approach && c.movement == movement)
            .map(|c| (c.from_lane, c.id))
            .collect()
    }

    /// True when two connections may not be green together under any program
    /// (perpendicular crossings), or, for protected programs, when a left turn
    /// meets opposing straight/right traffic. Two right turns never conflict.
    pub fn conflicts(&self, a: usize, b: usize) -> bool {
        let (ca, cb) = (&self.connections[a], &self.connections[b]);
        if ca.approach == cb.approach {
            return false;
        }
        let opposing = (ca.approach + 2) % 4 == cb.approach;
        if !opposing {
            return !(ca.movement == Movement::Right && cb.movement == Movement::Right);
        }
        let left_vs_other = (ca.movement == Movement::Left) != (cb.movement == Movement::Left);
        left_vs_other && !self.program.is_permissive_pair(a, b)
    }

    /// Opposing incoming lanes a permissive left turn from `approach` must yield to.
    pub fn opposing_priority_lanes(&self, approach: usize) -> Vec<usize> {
        let opposite = (approach + 2) % 4;
        let mut lanes: Vec<usize> = self
            .connections
            .iter()
            .filter(|c| c.approach == opposite && c.movement != Movement::Left)
            .map(|c| c.from_lane)
            .collect();
        lanes.dedup();
        lanes
    }
}
