//! Vehicles and the car-following rule.
//!
//! The update is a deterministic Krauss-style model:
//!
//! ```text
//! v_safe = -b·τ + sqrt((b·τ)² + v_l² + 2·b·g)      g = net gap beyond min_gap
//! v_next = max(0, min(v + a·dt, v_max, v_safe, g / dt))
//! x_next = x - v_next·dt                             (x = distance to the stop line)
//! ```
//!
//! The last term caps the displacement so the net gap can never go negative,
//! whatever the leader did in the same step. A closed stop line acts as a
//! stopped leader with zero length and no minimum gap.

pub type VehicleId = u64;

pub const VEHICLE_LENGTH: f64 = 5.0;
pub const MIN_GAP: f64 = 2.5;

#[derive(Clone, Debug, PartialEq)]
pub struct Vehicle {
    pub id: VehicleId,
    pub is_cv: bool,
    pub connection: usize,
    /// On an incoming lane: front-bumper distance to the stop line (decreasing).
    /// On an outgoing lane: front-bumper distance travelled past the intersection.
    pub pos: f64,
    pub speed: f64,
    pub length: f64,
    pub min_gap: f64,
    pub spawned_at: f64,
    pub inserted_at: f64,
    pub exited_at: Option<f64>,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CarFollowing {
    /// Maximum acceleration (m/s²).
    pub accel: f64,
    /// Comfortable deceleration used by the safe-speed term (m/s²).
    pub decel: f64,
    /// Driver reaction time (s).
    pub tau: f64,
    pub v_max: f64,
}

impl CarFollowing {
    pub fn new(v_max: f64) -> Self {
        Self {
            accel: 2.6,
            decel: 4.5,
            tau: 1.0,
            v_max,
        }
    }

    /// Krauss safe speed for a net gap `gap` behind a leader driving at `leader_speed`.
    pub fn safe_speed(&self, gap: f64, leader_speed: f64) -> f64 {
        if gap <= 0.0 {
            return 0.0;
        }
        let bt = self.decel * self.tau;
        -bt + (bt * bt + leader_speed * leader_speed + 2.0 * self.decel * gap).sqrt()
    }

    /// Next speed under an optional constraint `(net_gap, leader_speed)`.
    pub fn next_speed(&self, speed: f64, constraint: Option<(f64, f64)>, dt: f64) -> f64 {
        let mut v = (speed + self.accel * dt).min(self.v_max);
        if let Some((gap, leader_speed)) = constraint {
            v = v.min(self.safe_speed(gap, leader_speed)).min(gap.max(0.0) / dt);
        }
        v.max(0.0)
    }

    /// Whether a vehicle at `distance` from a closed line can stop there
    /// without braking harder than `decel`.
    pub fn can_stop_within(&self, speed: f64, distance: f64, dt: f64) -> bool {
        let v_stop = self.next_speed(speed, Some((distance, 0.0)), dt);
        v_stop >= speed - self.decel * dt - 1e-9
    }
}

/// What lies ahead of a vehicle on an incoming lane.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Obstacle {
    None,
    /// A leader whose rear bumper is `rear` metres from the stop line.
    Leader { rear: f64, speed: f64 },
    /// A closed stop line.
    StopLine,
}

/// One car-following update on an incoming lane. Returns `(speed, pos)`;
/// `pos` may become negative only when nothing holds the vehicle at the line.
pub fn car_follow_update(
    model: &CarFollowing,
    vehicle: &Vehicle,
    obstacle: Obstacle,
    dt: f64,
) -> (f64, f64) {
    let constraint = match obstacle {
        Obstacle::None => None,
        Obstacle::Leader { rear, speed } => Some((vehicle.pos - rear - vehicle.min_gap, speed)),
        Obstacle::StopLine => Some((vehicle.pos, 0.0)),
    };
    let v = model.next_speed(vehicle.speed, constraint, dt);
    (v, vehicle.pos - v * dt)
}
