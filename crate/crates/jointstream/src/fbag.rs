//! Feature-bag files.
//!
//! Layout, little-endian: `"FBAG"`, version `u32 = 1`, id length `u32` and
//! UTF-8 id, `n u32`, `d u32`, `n` domain tag bytes, 6 label bytes, then
//! `n·d` row-major `f32` values.
//!
//! Bags are `f64` in memory, so writing rounds each value to `f32`. A bag
//! that was read from a file writes back byte-for-byte.

use std::path::Path;

use jointstream_core::{Domain, FactorLabels, FeatureBag, Matrix, NUM_FACTORS};

use crate::binary::{put_u32, DecodeError, Reader};
use crate::error::{format, io, Result};

pub const MAGIC: &[u8; 4] = b"FBAG";
pub const VERSION: u32 = 1;

pub fn encode(bag: &FeatureBag) -> std::result::Result<Vec<u8>, DecodeError> {
    let id = bag.wsi_id().as_bytes();
    let mut out = Vec::with_capacity(28 + id.len() + bag.len() * (1 + 4 * bag.dim()));
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    put_u32(&mut out, id.len(), "wsi id length")?;
    out.extend_from_slice(id);
    put_u32(&mut out, bag.len(), "instance count")?;
    put_u32(&mut out, bag.dim(), "feature dimension")?;
    out.extend(bag.domains().iter().map(|d| d.tag()));
    out.extend_from_slice(&bag.labels().0);
    for &v in bag.instances().as_slice() {
        out.extend_from_slice(&(v as f32).to_le_bytes());
    }
    Ok(out)
}

pub fn decode(bytes: &[u8]) -> std::result::Result<FeatureBag, DecodeError> {
    let mut r = Reader::new(bytes);
    r.magic(MAGIC)?;
    let version = r.u32()?;
    if version != VERSION {
        return Err(DecodeError::Version(version));
    }
    let id_len = r.u32()? as usize;
    let id = std::str::from_utf8(r.take(id_len)?).map_err(|e| DecodeError::Invalid(format!("wsi id: {e}")))?;
    let n = r.u32()? as usize;
    let d = r.u32()? as usize;
    let domains = r
        .take(n)?
        .iter()
        .map(|&t| Domain::from_tag(t).ok_or_else(|| DecodeError::Invalid(format!("domain tag {t}"))))
        .collect::<std::result::Result<Vec<_>, _>>()?;
    let mut labels = [0u8; NUM_FACTORS];
    labels.copy_from_slice(r.take(NUM_FACTORS)?);
    if let Some(bad) = labels.iter().find(|&&l| l > 1) {
        return Err(DecodeError::Invalid(format!("label byte {bad}")));
    }
    let count = n.checked_mul(d).ok_or(DecodeError::Overflow("n·d"))?;
    let values = r.f32s(count)?;
    r.finish()?;
    let instances = Matrix::from_vec(n, d, values.into_iter().map(f64::from).collect()).expect("n·d values");
    FeatureBag::new(id, instances, domains, FactorLabels(labels)).map_err(|e| DecodeError::Invalid(e.to_string()))
}

pub fn write_bag(bag: &FeatureBag, path: &Path) -> Result<()> {
    let bytes = encode(bag).map_err(|e| format(path, e.to_string()))?;
    std::fs::write(path, bytes).map_err(io(path))
}

pub fn read_bag(path: &Path) -> Result<FeatureBag> {
    let bytes = std::fs::read(path).map_err(io(path))?;
    decode(&bytes).map_err(|e| format(path, e.to_string()))
}

/// File name used for one slide's bag in one domain.
pub fn file_name(wsi_id: &str, domain: Domain) -> String {
    format!("{wsi_id}.{}.fbag", domain.name())
}
