//! Binary checkpoint: `CPJ1`, u32 length + config JSON, then for every
//! parameter block in layer order a u32 count followed by that many f32
//! values. All integers and floats are little-endian.

use std::path::Path;

use crate::config::CpjConfig;
use crate::error::{CpjError, Result};
use crate::network::CpjNetwork;

pub const MAGIC: &[u8; 4] = b"CPJ1";

impl CpjNetwork {
    pub fn to_bytes(&self) -> Vec<u8> {
        let config = serde_json::to_vec(self.config()).expect("config serializes");
        let mut out = Vec::with_capacity(8 + config.len() + 4 * (self.num_params() + self.blocks().len()));
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&(config.len() as u32).to_le_bytes());
        out.extend_from_slice(&config);
        for block in self.blocks() {
            out.extend_from_slice(&(block.len as u32).to_le_bytes());
            for &p in &self.params()[block.range()] {
                out.extend_from_slice(&(p as f32).to_le_bytes());
            }
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut r = Reader { bytes, pos: 0 };
        if r.take(4)? != MAGIC {
            return Err(CpjError::Checkpoint("missing CPJ1 magic".into()));
        }
        let len = r.u32()? as usize;
        let config: CpjConfig =
            serde_json::from_slice(r.take(len)?).map_err(|e| CpjError::Checkpoint(format!("config: {e}")))?;
        let mut net = CpjNetwork::zeros(&config)?;
        let blocks = net.blocks().to_vec();
        let params = net.params_mut();
        for block in &blocks {
            let n = r.u32()? as usize;
            if n != block.len {
                return Err(CpjError::Checkpoint(format!(
                    "block {} has {n} values, layout expects {}",
                    block.name, block.len
                )));
            }
            for p in &mut params[block.range()] {
                *p = f32::from_le_bytes(r.take(4)?.try_into().expect("4 bytes")) as f64;
            }
        }
        if r.pos != bytes.len() {
            return Err(CpjError::Checkpoint(format!("{} trailing bytes", bytes.len() - r.pos)));
        }
        Ok(net)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_bytes())?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_bytes(&std::fs::read(path)?)
    }
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.bytes.len());
        let end = end.ok_or_else(|| CpjError::Checkpoint("truncated".into()))?;
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_is_exact() {
        let net = CpjNetwork::init(&CpjConfig::tiny()).unwrap();
        let bytes = net.to_bytes();
        let back = CpjNetwork::from_bytes(&bytes).unwrap();
        assert_eq!(back, net);
        assert_eq!(back.to_bytes(), bytes);
    }

    #[test]
    fn rejects_corruption() {
        let net = CpjNetwork::init(&CpjConfig::tiny()).unwrap();
        let bytes = net.to_bytes();
        assert!(CpjNetwork::from_bytes(&bytes[..bytes.len() - 1]).is_err());
        let mut bad = bytes.clone();
        bad[0] = b'X';
        assert!(CpjNetwork::from_bytes(&bad).is_err());
        let mut extra = bytes;
        extra.push(0);
        assert!(CpjNetwork::from_bytes(&extra).is_err());
    }
}
