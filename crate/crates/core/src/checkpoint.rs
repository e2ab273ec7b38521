//! Binary checkpoints: a length-prefixed JSON header followed by raw
//! little-endian f64 field payloads in manifest order. Round trips are
//! byte-identical.

use crate::error::{Error, Result};
use crate::fft::SpectralGrid;
use crate::field::{SurfaceField, VectorField, VolumeField};
use crate::grid::Grid;
use crate::picard::{Sweep, SweepEntry};
use crate::Scalar;
use serde::{Deserialize, Serialize};
use std::io::{Read, Write};
use std::path::Path;

pub const CHECKPOINT_VERSION: u32 = 1;

/// Field names stored per time level, in payload order.
const MANIFEST: [&str; 6] = ["eta", "u1", "u2", "u3", "p", "theta"];

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CheckpointHeader {
    pub version: u32,
    pub grid: Grid,
    pub times: Vec<f64>,
    pub manifest: Vec<String>,
    pub mode: String,
}

#[derive(Debug, Clone)]
pub struct Checkpoint {
    pub header: CheckpointHeader,
    /// Raw payload values in manifest order, dimensions slowest-to-fastest
    /// `[t][z][y][x]` (surface fields have no z).
    pub payload: Vec<f64>,
}

fn expected_len(header: &CheckpointHeader) -> usize {
    let g = &header.grid;
    let per_time = g.nh() + 4 * g.nvol() + g.nvol();
    header.times.len() * per_time
}

impl Checkpoint {
    pub fn from_sweep<S: Scalar>(sweep: &Sweep<S>, grid: &Grid, mode: &str) -> Self {
        let times: Vec<f64> = sweep.entries.iter().map(|e| e.t).collect();
        let mut payload = Vec::new();
        for entry in &sweep.entries {
            payload.extend(entry.eta.values.iter().map(|v| v.to_f64_lossy()));
            for c in 0..3 {
                payload.extend(entry.u.comps[c].data.iter().map(|v| v.to_f64_lossy()));
            }
            payload.extend(entry.p.data.iter().map(|v| v.to_f64_lossy()));
            payload.extend(entry.theta.data.iter().map(|v| v.to_f64_lossy()));
        }
        Checkpoint {
            header: CheckpointHeader {
                version: CHECKPOINT_VERSION,
                grid: *grid,
                times,
                manifest: MANIFEST.iter().map(|s| s.to_string()).collect(),
                mode: mode.to_string(),
            },
            payload,
        }
    }

    /// Rebuilds the sweep (surface time derivatives are re-derived by the
    /// consumer; they are not part of the payload).
    pub fn to_sweep<S: Scalar>(&self, sp: &SpectralGrid<S>) -> Result<Sweep<S>> {
        let grid = self.header.grid;
        let nh = grid.nh();
        let nvol = grid.nvol();
        let per_time = nh + 5 * nvol;
        let mut entries = Vec::with_capacity(self.header.times.len());
        for (ti, &t) in self.header.times.iter().enumerate() {
            let base = ti * per_time;
            let eta_vals: Vec<S> = self.payload[base..base + nh]
                .iter()
                .map(|&v| S::lit(v))
                .collect();
            let eta = SurfaceField::from_values(sp, eta_vals)?;
            let offset = base + nh;
            let vol = |off: &mut usize| -> VolumeField<S> {
                let data: Vec<S> = self.payload[*off..*off + nvol]
                    .iter()
                    .map(|&v| S::lit(v))
                    .collect();
                *off += nvol;
                VolumeField {
                    nx: grid.nx,
                    ny: grid.ny,
                    nz: grid.nz,
                    data,
                }
            };
            let mut off = offset;
            let u1 = vol(&mut off);
            let u2 = vol(&mut off);
            let u3 = vol(&mut off);
            let p = vol(&mut off);
            let theta = vol(&mut off);
            entries.push(SweepEntry {
                t,
                eta: eta.clone(),
                eta_t: SurfaceField::zeros(&grid),
                u: VectorField::from_comps(u1, u2, u3),
                p,
                theta,
            });
        }
        Ok(Sweep { entries })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let header =
            serde_json::to_vec(&self.header).map_err(|e| Error::Checkpoint(e.to_string()))?;
        let mut file = std::fs::File::create(path)?;
        file.write_all(&(header.len() as u64).to_le_bytes())?;
        file.write_all(&header)?;
        for v in &self.payload {
            file.write_all(&v.to_le_bytes())?;
        }
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let mut file = std::fs::File::open(path)?;
        let mut len_bytes = [0u8; 8];
        file.read_exact(&mut len_bytes)?;
        let header_len = u64::from_le_bytes(len_bytes) as usize;
        let mut header_bytes = vec![0u8; header_len];
        file.read_exact(&mut header_bytes)?;
        let header: CheckpointHeader = serde_json::from_slice(&header_bytes)
            .map_err(|e| Error::Checkpoint(format!("bad header: {e}")))?;
        if header.version != CHECKPOINT_VERSION {
            return Err(Error::Checkpoint(format!(
                "unsupported checkpoint version {}",
                header.version
            )));
        }
        let mut rest = Vec::new();
        file.read_to_end(&mut rest)?;
        if rest.len() % 8 != 0 {
            return Err(Error::Checkpoint("truncated payload".into()));
        }
        let payload: Vec<f64> = rest
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
            .collect();
        let ck = Checkpoint { header, payload };
        if ck.payload.len() != expected_len(&ck.header) {
            return Err(Error::Checkpoint(format!(
                "payload length {} does not match manifest ({} expected)",
                ck.payload.len(),
                expected_len(&ck.header)
            )));
        }
        Ok(ck)
    }
}
