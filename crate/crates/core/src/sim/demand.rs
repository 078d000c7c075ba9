//! Traffic demand: per-approach Poisson flows, CV penetration and turn weights.

use crate::error::{Error, Result};
use crate::rng::{streams, RngStream};
use crate::sim::geometry::Intersection;

pub const MIN_FLOW: f64 = 100.0;
pub const MAX_FLOW: f64 = 1000.0;

#[derive(Clone, Debug, PartialEq)]
pub struct DemandConfig {
    /// Insertion flow per entry approach, vehicles per hour (N, E, S, W).
    pub flows: [f64; 4],
    /// Fraction of connected vehicles.
    pub p_cv: f64,
    /// Per approach, one weight per connection in [`Intersection::approach_connections`] order.
    pub turn_weights: Vec<Vec<f64>>,
    /// Seed of the arrival streams.
    pub seed: u64,
}

impl DemandConfig {
    /// Uniform turn weights, given flows and penetration.
    pub fn uniform(intersection: &Intersection, flows: [f64; 4], p_cv: f64, seed: u64) -> Self {
        let turn_weights = (0..4)
            .map(|e| {
                let n = intersection.approach_connections(e).len();
                vec![1.0 / n as f64; n]
            })
            .collect();
        Self {
            flows,
            p_cv,
            turn_weights,
            seed,
        }
    }

    /// Mean inter-arrival time `3600 / q_e` in seconds (infinite for a zero flow).
    pub fn mean_headway(&self, approach: usize) -> f64 {
        let q = self.flows[approach];
        if q > 0.0 {
            3600.0 / q
        } else {
            f64::INFINITY
        }
    }

    pub fn with_p_cv(mut self, p_cv: f64) -> Self {
        self.p_cv = p_cv;
        self
    }

    /// Checks the sampling ranges (flows in [100, 1000], p_cv in [0, 1], normalized weights).
    pub fn validate(&self, intersection: &Intersection) -> Result<()> {
        if !(0.0..=1.0).contains(&self.p_cv) {
            return Err(Error::Config(format!("p_cv {} outside [0, 1]", self.p_cv)));
        }
        for (e, q) in self.flows.iter().enumerate() {
            if !(MIN_FLOW..=MAX_FLOW).contains(q) {
                return Err(Error::Config(format!("flow {q} on approach {e} outside [100, 1000]")));
            }
            let weights = &self.turn_weights[e];
            if weights.len() != intersection.approach_connections(e).len() {
                return Err(Error::Config(format!("approach {e}: wrong number of turn weights")));
            }
            let sum: f64 = weights.iter().sum();
            if weights.iter().any(|w| *w <= 0.0) || (sum - 1.0).abs() > 1e-9 {
                return Err(Error::Config(format!("approach {e}: turn weights must be positive and sum to 1")));
            }
        }
        Ok(())
    }
}

/// Draws a random episode demand: `p_cv ~ U[0,1]`, `q_e ~ U[100,1000]`, one
/// `U(0,1)` weight per connection normalized within each approach, and a
/// seed for the arrival streams.
pub fn sample_demand(intersection: &Intersection, rng: &mut RngStream) -> DemandConfig {
    let p_cv = rng.uniform();
    let mut flows = [0.0; 4];
    for q in flows.iter_mut() {
        *q = rng.uniform_range(MIN_FLOW, MAX_FLOW);
    }
    let turn_weights = (0..4)
        .map(|e| {
            let raw: Vec<f64> = intersection
                .approach_connections(e)
                .iter()
                .map(|_| rng.uniform_open())
                .collect();
            let sum: f64 = raw.iter().sum();
            raw.into_iter().map(|w| w / sum).collect()
        })
        .collect();
    let seed = rng.next_u64();
    DemandConfig {
        flows,
        p_cv,
        turn_weights,
        seed,
    }
}

/// An exogenous arrival: appears in the approach's pending queue at `time`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Arrival {
    pub time: f64,
    pub approach: usize,
    pub connection: usize,
    /// Uniform draw compared against `p_cv`; kept so the CV subsets are nested across penetration rates.
    pub cv_draw: f64,
}

impl Arrival {
    pub fn is_cv(&self, p_cv: f64) -> bool {
        self.cv_draw < p_cv
    }
}

/// Lazily generated Poisson arrivals, one independent stream per approach.
#[derive(Clone, Debug)]
pub struct ArrivalProcess {
    streams: Vec<RngStream>,
    next: [Option<Arrival>; 4],
    connections: Vec<Vec<usize>>,
    weights: Vec<Vec<f64>>,
    headways: [f64; 4],
}

impl ArrivalProcess {
    pub fn new(intersection: &Intersection, demand: &DemandConfig) -> Self {
        let streams = (0..4)
            .map(|e| RngStream::with_stream(demand.seed, streams::ARRIVALS + e as u64))
            .collect();
        let connections = (0..4).map(|e| intersection.approach_connections(e)).collect();
        let mut process = Self {
            streams,
            next: [None; 4],
            connections,
            weights: demand.turn_weights.clone(),
            headways: [0, 1, 2, 3].map(|e| demand.mean_headway(e)),
        };
        for e in 0..4 {
            process.next[e] = process.draw(e, 0.0);
        }
        process
    }

    fn draw(&mut self, approach: usize, after: f64) -> Option<Arrival> {
        let mean = self.headways[approach];
        if !mean.is_finite() {
            return None;
        }
        let rng = &mut self.streams[approach];
        let time = after + rng.exponential(mean);
        let cv_draw = rng.uniform();
        let k = rng.weighted_index(&self.weights[approach]);
        Some(Arrival {
            time,
            approach,
            connection: self.connections[approach][k],
            cv_draw,
        })
    }

    /// All arrivals with `time < until`, ordered by time (approach order on ties).
    pub fn spawn_until(&mut self, until: f64) -> Vec<Arrival> {
        let mut out = Vec::new();
        for e in 0..4 {
            while let Some(a) = self.next[e] {
                if a.time >= until {
                    break;
                }
                out.push(a);
                self.next[e] = self.draw(e, a.time);
            }
        }
        out.sort_by(|x, y| x.time.total_cmp(&y.time).then(x.approach.cmp(&y.approach)));
        out
    }
}
