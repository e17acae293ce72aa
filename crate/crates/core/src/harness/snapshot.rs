//! Binary snapshots of field pairs.
//!
//! Layout, little endian: magic `VXLS`, format version (u32), header length
//! (u64), JSON header with the lattice and ε, then `u` as interleaved
//! `(re, im)` f64 pairs and `α` axis by axis.

use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lattice::{FieldPair, LatticeSpec, C64};

pub const SNAPSHOT_MAGIC: [u8; 4] = *b"VXLS";
pub const SNAPSHOT_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
struct Header {
    spec: LatticeSpec,
    eps: f64,
    n_sites: usize,
}

pub fn encode_snapshot(fp: &FieldPair) -> Result<Vec<u8>> {
    let header = serde_json::to_vec(&Header { spec: fp.spec.clone(), eps: fp.eps, n_sites: fp.u.len() })?;
    let n = fp.u.len();
    let mut out = Vec::with_capacity(16 + header.len() + 8 * n * (2 + fp.dim()));
    out.extend_from_slice(&SNAPSHOT_MAGIC);
    out.extend_from_slice(&SNAPSHOT_VERSION.to_le_bytes());
    out.extend_from_slice(&(header.len() as u64).to_le_bytes());
    out.extend_from_slice(&header);
    for z in &fp.u {
        out.extend_from_slice(&z.re.to_le_bytes());
        out.extend_from_slice(&z.im.to_le_bytes());
    }
    for a in &fp.alpha {
        for x in a {
            out.extend_from_slice(&x.to_le_bytes());
        }
    }
    Ok(out)
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self.pos.checked_add(n).ok_or(Error::TruncatedFile)?;
        let s = self.buf.get(self.pos..end).ok_or(Error::TruncatedFile)?;
        self.pos = end;
        Ok(s)
    }

    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().expect("eight bytes")))
    }
}

pub fn decode_snapshot(buf: &[u8]) -> Result<FieldPair> {
    let mut r = Reader { buf, pos: 0 };
    if r.take(4).map_err(|_| Error::BadMagic)? != SNAPSHOT_MAGIC {
        return Err(Error::BadMagic);
    }
    let found = u32::from_le_bytes(r.take(4)?.try_into().expect("four bytes"));
    if found != SNAPSHOT_VERSION {
        return Err(Error::VersionMismatch { found, expected: SNAPSHOT_VERSION });
    }
    let len = u64::from_le_bytes(r.take(8)?.try_into().expect("eight bytes"));
    let header: Header = serde_json::from_slice(r.take(usize::try_from(len).map_err(|_| Error::TruncatedFile)?)?)?;
    let n = header.n_sites;
    let dim = header.spec.dim;
    let expected = n.checked_mul(8 * (2 + dim)).ok_or(Error::TruncatedFile)?;
    if buf.len() - r.pos < expected {
        return Err(Error::TruncatedFile);
    }
    if buf.len() - r.pos > expected {
        return Err(Error::ShapeMismatch("trailing bytes after the field data".into()));
    }
    let mut u = Vec::with_capacity(n);
    for _ in 0..n {
        let re = r.f64()?;
        let im = r.f64()?;
        u.push(C64::new(re, im));
    }
    let mut alpha = Vec::with_capacity(dim);
    for _ in 0..dim {
        alpha.push((0..n).map(|_| r.f64()).collect::<Result<Vec<_>>>()?);
    }
    FieldPair::new(header.spec, header.eps, u, alpha)
}

/// Writes through a temporary file in the same directory and renames it.
pub fn write_snapshot(path: &Path, fp: &FieldPair) -> Result<()> {
    let bytes = encode_snapshot(fp)?;
    let tmp = path.with_extension("tmp");
    {
        let mut f = std::fs::File::create(&tmp)?;
        f.write_all(&bytes)?;
        f.sync_all()?;
    }
    std::fs::rename(&tmp, path)?;
    Ok(())
}

pub fn read_snapshot(path: &Path) -> Result<FieldPair> {
    decode_snapshot(&std::fs::read(path)?)
}
