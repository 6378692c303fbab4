//! The `BFG1` binary grid format.
//!
//! Layout (little-endian): magic `BFG1`, `u32 N`, `u32 M`, `f64 dx`, `f64 dt`,
//! `f64 tau`, `f64 v0`, `u64 seed`, `u64 index`, then `N·M` `f64` values in
//! time-major order (`M` rows of `N`). Potential grids end there. Other grid
//! kinds append a four-byte ASCII kind tag after the values; wave-function
//! amplitude rasters use `AMPL`.

use std::io::{Read, Write};

use crate::error::{Error, Result};

pub const MAGIC: &[u8; 4] = b"BFG1";
const AMPLITUDE_TAG: &[u8; 4] = b"AMPL";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GridKind {
    Potential,
    /// `|ψ(x, t)|` raster.
    Amplitude,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GridFile {
    pub kind: GridKind,
    pub n: u32,
    pub m: u32,
    pub dx: f64,
    pub dt: f64,
    pub tau: f64,
    pub v0: f64,
    pub seed: u64,
    pub index: u64,
    pub values: Vec<f64>,
}

impl GridFile {
    pub fn write<W: Write>(&self, mut w: W) -> Result<()> {
        if self.values.len() != self.n as usize * self.m as usize {
            return Err(Error::Format(format!(
                "grid declares {}x{} but holds {} values",
                self.n,
                self.m,
                self.values.len()
            )));
        }
        w.write_all(MAGIC)?;
        w.write_all(&self.n.to_le_bytes())?;
        w.write_all(&self.m.to_le_bytes())?;
        for v in [self.dx, self.dt, self.tau, self.v0] {
            w.write_all(&v.to_le_bytes())?;
        }
        w.write_all(&self.seed.to_le_bytes())?;
        w.write_all(&self.index.to_le_bytes())?;
        for v in &self.values {
            w.write_all(&v.to_le_bytes())?;
        }
        if self.kind == GridKind::Amplitude {
            w.write_all(AMPLITUDE_TAG)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn read<R: Read>(mut r: R) -> Result<Self> {
        let mut magic = [0u8; 4];
        r.read_exact(&mut magic)
            .map_err(|_| Error::Format("truncated header".into()))?;
        if &magic != MAGIC {
            return Err(Error::Format(format!("bad magic {magic:?}")));
        }
        let mut b4 = [0u8; 4];
        let mut b8 = [0u8; 8];
        let mut u32_field = |r: &mut R| -> Result<u32> {
            r.read_exact(&mut b4).map_err(|_| Error::Format("truncated header".into()))?;
            Ok(u32::from_le_bytes(b4))
        };
        let n = u32_field(&mut r)?;
        let m = u32_field(&mut r)?;
        let mut u64_field = |r: &mut R| -> Result<u64> {
            r.read_exact(&mut b8).map_err(|_| Error::Format("truncated header".into()))?;
            Ok(u64::from_le_bytes(b8))
        };
        let dx = f64::from_bits(u64_field(&mut r)?);
        let dt = f64::from_bits(u64_field(&mut r)?);
        let tau = f64::from_bits(u64_field(&mut r)?);
        let v0 = f64::from_bits(u64_field(&mut r)?);
        let seed = u64_field(&mut r)?;
        let index = u64_field(&mut r)?;

        let count = n as usize * m as usize;
        let mut raw = vec![0u8; count * 8];
        r.read_exact(&mut raw)
            .map_err(|_| Error::Format(format!("expected {count} values")))?;
        let values = raw
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
            .collect();

        let mut trailer = Vec::new();
        r.read_to_end(&mut trailer)?;
        let kind = match trailer.as_slice() {
            [] => GridKind::Potential,
            t if t == AMPLITUDE_TAG => GridKind::Amplitude,
            t => return Err(Error::Format(format!("unexpected {} trailing bytes", t.len()))),
        };
        Ok(Self {
            kind,
            n,
            m,
            dx,
            dt,
            tau,
            v0,
            seed,
            index,
            values,
        })
    }
}
