//! Partial DTSE: a 3 × lanes × cells image over connected vehicles.
//!
//! Channel 0 marks CV presence, channel 1 the CV speed over the speed
//! limit, channel 2 whether the lane currently shows green. Approaches are
//! stacked along the row axis (N, E, S, W; curb to median within each), and
//! cell `c` covers distances `[c·cell, (c+1)·cell)` from the stop line.

use crate::error::{Error, Result};
use crate::sim::{DetectedView, ScenarioTag};

pub const CHANNELS: usize = 3;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DtseConfig {
    pub cell_length: f64,
    pub detection_range: f64,
    pub v_max: f64,
}

impl Default for DtseConfig {
    fn default() -> Self {
        Self {
            cell_length: 8.0,
            detection_range: 160.0,
            v_max: crate::sim::DEFAULT_SPEED_LIMIT,
        }
    }
}

impl DtseConfig {
    pub fn cells(&self) -> usize {
        (self.detection_range / self.cell_length).ceil() as usize
    }
}

/// `(channels, lanes, cells)` for a scenario under the default encoding.
pub fn state_shape(tag: ScenarioTag) -> (usize, usize, usize) {
    (CHANNELS, 4 * tag.lanes_per_approach(), DtseConfig::default().cells())
}

/// Dense state tensor, channel-major (`[channel][lane][cell]`).
#[derive(Clone, Debug, PartialEq)]
pub struct PartialDtse {
    pub lanes: usize,
    pub cells: usize,
    pub data: Vec<f32>,
}

impl PartialDtse {
    pub fn zeros(lanes: usize, cells: usize) -> Self {
        Self {
            lanes,
            cells,
            data: vec![0.0; CHANNELS * lanes * cells],
        }
    }

    pub fn shape(&self) -> (usize, usize, usize) {
        (CHANNELS, self.lanes, self.cells)
    }

    fn idx(&self, channel: usize, lane: usize, cell: usize) -> usize {
        (channel * self.lanes + lane) * self.cells + cell
    }

    pub fn get(&self, channel: usize, lane: usize, cell: usize) -> f32 {
        self.data[self.idx(channel, lane, cell)]
    }

    pub fn presence(&self, lane: usize, cell: usize) -> f32 {
        self.get(0, lane, cell)
    }

    pub fn speed(&self, lane: usize, cell: usize) -> f32 {
        self.get(1, lane, cell)
    }

    pub fn signal(&self, lane: usize, cell: usize) -> f32 {
        self.get(2, lane, cell)
    }

    pub fn pack(&self) -> PackedDtse {
        let plane = self.lanes * self.cells;
        let mut cells = Vec::new();
        for i in 0..plane {
            if self.data[i] > 0.0 {
                cells.push((i as u16, self.data[plane + i]));
            }
        }
        let green = (0..self.lanes)
            .filter(|&l| self.data[2 * plane + l * self.cells] > 0.0)
            .fold(0u64, |m, l| m | (1 << l));
        PackedDtse {
            lanes: self.lanes as u8,
            cells_per_lane: self.cells as u8,
            occupied: cells,
            green,
        }
    }

    /// Three aligned text grids, one row per lane.
    pub fn render(&self, lane_labels: &[String]) -> String {
        let mut out = String::new();
        for (c, name) in ["P (presence)", "V (speed / v_max)", "S (green)"].iter().enumerate() {
            out.push_str(name);
            out.push('\n');
            for l in 0..self.lanes {
                let label = lane_labels.get(l).map(String::as_str).unwrap_or("");
                out.push_str(&format!("{label:>6} |"));
                for k in 0..self.cells {
                    let v = self.get(c, l, k);
                    if c == 1 {
                        out.push_str(&format!(" {v:4.2}"));
                    } else {
                        out.push_str(&format!(" {}", v as u8));
                    }
                }
                out.push('\n');
            }
        }
        out
    }
}

/// Sparse form used by the replay memory: occupied cells with their speed
/// and a bitmask of green lanes.
#[derive(Clone, Debug, PartialEq)]
pub struct PackedDtse {
    lanes: u8,
    cells_per_lane: u8,
    occupied: Vec<(u16, f32)>,
    green: u64,
}

impl PackedDtse {
    pub fn unpack_into(&self, out: &mut [f32]) {
        let lanes = self.lanes as usize;
        let cells = self.cells_per_lane as usize;
        let plane = lanes * cells;
        out[..CHANNELS * plane].fill(0.0);
        for &(i, v) in &self.occupied {
            out[i as usize] = 1.0;
            out[plane + i as usize] = v;
        }
        for l in 0..lanes {
            if self.green & (1 << l) != 0 {
                out[2 * plane + l * cells..2 * plane + (l + 1) * cells].fill(1.0);
            }
        }
    }

    pub fn unpack(&self) -> PartialDtse {
        let mut d = PartialDtse::zeros(self.lanes as usize, self.cells_per_lane as usize);
        self.unpack_into(&mut d.data);
        d
    }
}

/// Builds the state from the connected-vehicle view only.
pub fn encode(view: &DetectedView, config: &DtseConfig) -> Result<PartialDtse> {
    if config.cell_length <= 0.0 {
        return Err(Error::Config("cell length must be positive".into()));
    }
    let lanes = view.incoming.len();
    if view.lane_green.len() != lanes {
        return Err(Error::ShapeMismatch {
            expected: format!("{lanes} lane signals"),
            actual: format!("{}", view.lane_green.len()),
        });
    }
    let cells = config.cells();
    let mut out = PartialDtse::zeros(lanes, cells);
    let plane = lanes * cells;
    for (l, vehicles) in view.incoming.iter().enumerate() {
        // nearest first, so the first write to a cell wins
        let mut nearest_in_cell = vec![f64::INFINITY; cells];
        for v in vehicles {
            if !v.is_cv || v.pos < 0.0 || v.pos >= config.detection_range {
                continue;
            }
            let c = ((v.pos / config.cell_length).floor() as usize).min(cells - 1);
            if v.pos < nearest_in_cell[c] {
                nearest_in_cell[c] = v.pos;
                out.data[l * cells + c] = 1.0;
                out.data[plane + l * cells + c] = (v.speed / config.v_max).clamp(0.0, 1.0) as f32;
            }
        }
        if view.lane_green[l] {
            out.data[2 * plane + l * cells..2 * plane + (l + 1) * cells].fill(1.0);
        }
    }
    Ok(out)
}
