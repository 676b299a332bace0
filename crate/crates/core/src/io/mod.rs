//! Configuration, image codecs and file persistence.

mod config;
mod image;

use std::fs::File;
use std::path::{Path, PathBuf};

pub use self::config::{parse_config, parse_config_str, DenoiserKind, DenoiserSpec, RunConfig};
pub use self::image::{decode_latent, encode_latent, load_image, load_mask, save_image, PixelCodec, Raster};

use crate::error::Result;

/// Writes through `f` into a temp file next to `path`, then renames it over `path`.
pub fn write_atomic<F>(path: &Path, f: F) -> Result<()>
where
    F: FnOnce(&mut File) -> Result<()>,
{
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p.to_path_buf(),
        _ => PathBuf::from("."),
    };
    let mut tmp = tempfile::Builder::new().prefix(".tmp-").tempfile_in(&dir)?;
    f(tmp.as_file_mut())?;
    tmp.persist(path).map_err(|e| e.error)?;
    Ok(())
}

/// Atomic write of a byte buffer.
pub fn write_bytes_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    use std::io::Write;
    write_atomic(path, |f| Ok(f.write_all(bytes)?))
}
