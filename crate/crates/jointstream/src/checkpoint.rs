//! Head parameter files: `"MRLP"`, version `u32`, head type `u8`, `L`, `d`,
//! `K` as `u32`, then V, U, w, Wc, bc as row-major `f64`, all little-endian.

use std::path::Path;

use jointstream_core::{HeadKind, HeadParams, Matrix};

use crate::binary::{put_u32, DecodeError, Reader};
use crate::error::{format, io, Result};

pub const MAGIC: &[u8; 4] = b"MRLP";
pub const VERSION: u32 = 1;

pub fn encode(kind: HeadKind, p: &HeadParams) -> std::result::Result<Vec<u8>, DecodeError> {
    let mut out = Vec::new();
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.push(kind.tag());
    put_u32(&mut out, p.hidden(), "hidden width")?;
    put_u32(&mut out, p.dim(), "feature dimension")?;
    put_u32(&mut out, p.classes(), "class count")?;
    for t in p.tensors() {
        for v in t {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    Ok(out)
}

pub fn decode(bytes: &[u8]) -> std::result::Result<(HeadKind, HeadParams), DecodeError> {
    let mut r = Reader::new(bytes);
    r.magic(MAGIC)?;
    let version = r.u32()?;
    if version != VERSION {
        return Err(DecodeError::Version(version));
    }
    let tag = r.u8()?;
    let kind = HeadKind::from_tag(tag).ok_or_else(|| DecodeError::Invalid(format!("head type {tag}")))?;
    let l = r.u32()? as usize;
    let d = r.u32()? as usize;
    let k = r.u32()? as usize;
    let ld = l.checked_mul(d).ok_or(DecodeError::Overflow("L·d"))?;
    let kd = k.checked_mul(d).ok_or(DecodeError::Overflow("K·d"))?;
    let v = r.f64s(ld)?;
    let u = r.f64s(ld)?;
    let w = r.f64s(l)?;
    let wc = r.f64s(kd)?;
    let bc = r.f64s(k)?;
    r.finish()?;
    let params = HeadParams {
        v: Matrix::from_vec(l, d, v).expect("L·d"),
        u: Matrix::from_vec(l, d, u).expect("L·d"),
        w,
        wc: Matrix::from_vec(k, d, wc).expect("K·d"),
        bc,
    };
    if !params.is_finite() {
        return Err(DecodeError::Invalid("non-finite parameter".into()));
    }
    Ok((kind, params))
}

pub fn write_checkpoint(kind: HeadKind, p: &HeadParams, path: &Path) -> Result<()> {
    let bytes = encode(kind, p).map_err(|e| format(path, e.to_string()))?;
    std::fs::write(path, bytes).map_err(io(path))
}

pub fn read_checkpoint(path: &Path) -> Result<(HeadKind, HeadParams)> {
    let bytes = std::fs::read(path).map_err(io(path))?;
    decode(&bytes).map_err(|e| format(path, e.to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_is_exact() {
        let mut p = HeadParams::init(3, 5, 6, 9);
        p.bc[2] = -0.1;
        for kind in [HeadKind::Mil, HeadKind::GatedMil, HeadKind::Mrl] {
            let bytes = encode(kind, &p).unwrap();
            assert_eq!(bytes.len(), 4 + 4 + 1 + 12 + 8 * (15 + 15 + 3 + 30 + 6));
            assert_eq!(bytes[8], kind.tag());
            assert_eq!(decode(&bytes).unwrap(), (kind, p.clone()));
        }
    }

    #[test]
    fn rejects_damage() {
        let bytes = encode(HeadKind::Mrl, &HeadParams::init(2, 2, 6, 0)).unwrap();
        let mut bad = bytes.clone();
        bad[3] = b'Q';
        assert!(decode(&bad).is_err());
        let mut bad = bytes.clone();
        bad[8] = 7;
        assert!(decode(&bad).is_err());
        assert!(decode(&bytes[..bytes.len() - 3]).is_err());
        let mut bad = bytes.clone();
        bad[4] = 9;
        assert_eq!(decode(&bad), Err(DecodeError::Version(9)));
    }
}
