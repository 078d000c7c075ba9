//! Binary checkpoint format.
//!
//! ```text
//! "TSCQ"            magic
//! u16               format version
//! u8                scenario tag ('a' | 'b' | 'c')
//! u16               actions
//! u16 u16 u16       input channels, lanes, cells
//! u64               training step
//! f64               tsd_max at save time
//! 12 × (u32 n, n × f32)   parameter blocks in network order
//! ```
//! All integers and floats are little-endian.

use super::network::{Arch, QNetwork};
use crate::error::{Error, Result};
use crate::sim::ScenarioTag;

pub const MAGIC: &[u8; 4] = b"TSCQ";
pub const VERSION: u16 = 1;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CheckpointMeta {
    pub scenario: ScenarioTag,
    pub step: u64,
    pub tsd_max: f64,
}

pub fn save_checkpoint(net: &QNetwork<f32>, meta: &CheckpointMeta) -> Vec<u8> {
    let arch = net.arch();
    let mut out = Vec::with_capacity(64 + 4 * net.params().len() + 48);
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.push(meta.scenario.as_char() as u8);
    for v in [arch.actions, arch.channels, arch.height, arch.width] {
        out.extend_from_slice(&(v as u16).to_le_bytes());
    }
    out.extend_from_slice(&meta.step.to_le_bytes());
    out.extend_from_slice(&meta.tsd_max.to_le_bytes());
    for range in arch.blocks() {
        out.extend_from_slice(&(range.len() as u32).to_le_bytes());
        for &p in &net.params()[range] {
            out.extend_from_slice(&p.to_le_bytes());
        }
    }
    out
}

struct Reader<'a> {
    bytes: &'a [u8],
    at: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self.at + n;
        if end > self.bytes.len() {
            return Err(Error::Checkpoint(format!(
                "truncated: needed {end} bytes, file has {}",
                self.bytes.len()
            )));
        }
        let s = &self.bytes[self.at..end];
        self.at = end;
        Ok(s)
    }

    fn array<const N: usize>(&mut self) -> Result<[u8; N]> {
        Ok(self.take(N)?.try_into().expect("length checked"))
    }

    fn u16(&mut self) -> Result<u16> {
        Ok(u16::from_le_bytes(self.array()?))
    }
}

pub fn load_checkpoint(bytes: &[u8]) -> Result<(QNetwork<f32>, CheckpointMeta)> {
    let mut r = Reader { bytes, at: 0 };
    if r.take(4)? != MAGIC {
        return Err(Error::Checkpoint("bad magic, not a checkpoint".into()));
    }
    let version = r.u16()?;
    if version != VERSION {
        return Err(Error::Checkpoint(format!("unsupported format version {version}")));
    }
    let tag_byte = r.array::<1>()?[0];
    let scenario: ScenarioTag = (tag_byte as char).to_string().parse()?;
    let actions = r.u16()? as usize;
    let channels = r.u16()? as usize;
    let lanes = r.u16()? as usize;
    let cells = r.u16()? as usize;
    let step = u64::from_le_bytes(r.array()?);
    let tsd_max = f64::from_le_bytes(r.array()?);
    let arch = Arch::new(channels, lanes, cells, actions)?;

    let mut params = Vec::with_capacity(arch.param_count());
    for (i, size) in arch.block_sizes().into_iter().enumerate() {
        let n = u32::from_le_bytes(r.array()?) as usize;
        if n != size {
            return Err(Error::Checkpoint(format!(
                "block {} has {n} values, architecture needs {size}",
                super::network::BLOCK_NAMES[i]
            )));
        }
        let raw = r.take(4 * n)?;
        params.extend(raw.chunks_exact(4).map(|c| f32::from_le_bytes(c.try_into().expect("4 bytes"))));
    }
    if r.at != bytes.len() {
        return Err(Error::Checkpoint(format!("{} trailing bytes", bytes.len() - r.at)));
    }
    let net = QNetwork::from_params(arch, params)?;
    Ok((net, CheckpointMeta { scenario, step, tsd_max }))
}

/// Loads a checkpoint and checks it matches `scenario`'s input and action shapes.
pub fn load_for_scenario(bytes: &[u8], scenario: ScenarioTag) -> Result<(QNetwork<f32>, CheckpointMeta)> {
    let (net, meta) = load_checkpoint(bytes)?;
    let want = Arch::for_scenario(scenario);
    let have = net.arch();
    if (have.channels, have.height, have.width, have.actions)
        != (want.channels, want.height, want.width, want.actions)
    {
        return Err(Error::ShapeMismatch {
            expected: format!(
                "scenario {scenario}: input {}x{}x{}, {} actions",
                want.channels, want.height, want.width, want.actions
            ),
            actual: format!(
                "checkpoint for {}: input {}x{}x{}, {} actions",
                meta.scenario, have.channels, have.height, have.width, have.actions
            ),
        });
    }
    Ok((net, meta))
}
