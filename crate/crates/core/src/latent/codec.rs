//! Flat binary latent format: `"RIVL"`, version, C, H, W (all u32 LE), then
//! `C*H*W` little-endian f64 values.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use super::tensor::{LatentTensor, Shape};
use crate::error::{Result, RivalError};

pub const LATENT_MAGIC: &[u8; 4] = b"RIVL";
pub const LATENT_VERSION: u32 = 1;

pub fn write_latent<W: Write>(mut w: W, x: &LatentTensor) -> Result<()> {
    let shape = x.shape();
    w.write_all(LATENT_MAGIC)?;
    w.write_all(&LATENT_VERSION.to_le_bytes())?;
    for dim in [shape.channels, shape.height, shape.width] {
        let dim = u32::try_from(dim).map_err(|_| RivalError::invalid("latent dimension exceeds u32"))?;
        w.write_all(&dim.to_le_bytes())?;
    }
    for v in x.data() {
        w.write_all(&v.to_le_bytes())?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_latent<R: Read>(mut r: R) -> Result<LatentTensor> {
    let mut header = [0u8; 20];
    r.read_exact(&mut header).map_err(|e| RivalError::Format(format!("truncated latent header: {e}")))?;
    if &header[..4] != LATENT_MAGIC {
        return Err(RivalError::Format("bad latent magic".into()));
    }
    let word = |i: usize| u32::from_le_bytes(header[i..i + 4].try_into().unwrap());
    let version = word(4);
    if version != LATENT_VERSION {
        return Err(RivalError::Format(format!("unsupported latent version {version}")));
    }
    let shape = Shape::new(word(8) as usize, word(12) as usize, word(16) as usize);
    let mut bytes = vec![0u8; shape.len() * 8];
    r.read_exact(&mut bytes).map_err(|e| RivalError::Format(format!("truncated latent body: {e}")))?;
    let mut extra = [0u8; 1];
    if r.read(&mut extra)? != 0 {
        return Err(RivalError::Format("trailing bytes after latent body".into()));
    }
    let data = bytes.chunks_exact(8).map(|b| f64::from_le_bytes(b.try_into().unwrap())).collect();
    LatentTensor::new(shape, data).map_err(|e| RivalError::Format(e.to_string()))
}

/// Writes atomically: a temp file in the target directory is renamed over `path`.
pub fn save_latent(path: &Path, x: &LatentTensor) -> Result<()> {
    crate::io::write_atomic(path, |f| write_latent(BufWriter::new(f), x))
}

pub fn load_latent(path: &Path) -> Result<LatentTensor> {
    read_latent(BufReader::new(File::open(path)?))
}
