//! Binary checkpoint container.
//!
//! Layout: the 4-byte magic `EWN1`, a `u32` record count, then per record a
//! length-prefixed UTF-8 name, a `u32` rank plus `u32` extents, and the
//! row-major `f64` payload. All integers and floats are little-endian;
//! values round-trip bit-exactly.

use std::fs;
use std::io::{Read, Write};
use std::path::Path;

use crate::{Error, Result};

use super::tensor::Tensor;

pub const MAGIC: &[u8; 4] = b"EWN1";

/// Writes `(name, tensor)` records atomically (temp file + rename).
pub fn save_records(path: &Path, records: &[(String, Tensor)]) -> Result<()> {
    let mut buf: Vec<u8> = Vec::new();
    buf.extend_from_slice(MAGIC);
    buf.extend_from_slice(&(records.len() as u32).to_le_bytes());
    for (name, tensor) in records {
        let nb = name.as_bytes();
        buf.extend_from_slice(&(nb.len() as u32).to_le_bytes());
        buf.extend_from_slice(nb);
        buf.extend_from_slice(&(tensor.shape().len() as u32).to_le_bytes());
        for &e in tensor.shape() {
            buf.extend_from_slice(&(e as u32).to_le_bytes());
        }
        for &v in tensor.data() {
            buf.extend_from_slice(&v.to_le_bytes());
        }
    }
    let tmp = path.with_extension("tmp");
    {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(&buf)?;
        f.sync_all()?;
    }
    fs::rename(&tmp, path)?;
    Ok(())
}

struct Reader<'a> {
    buf: &'a [u8],
    at: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.at + n > self.buf.len() {
            return Err(Error::schema(None, "checkpoint truncated"));
        }
        let s = &self.buf[self.at..self.at + n];
        self.at += n;
        Ok(s)
    }

    fn u32(&mut self) -> Result<u32> {
        let b = self.take(4)?;
        Ok(u32::from_le_bytes([b[0], b[1], b[2], b[3]]))
    }

    fn f64(&mut self) -> Result<f64> {
        let b = self.take(8)?;
        Ok(f64::from_le_bytes(b.try_into().unwrap()))
    }
}

/// Reads back the ordered record list written by [`save_records`].
pub fn load_records(path: &Path) -> Result<Vec<(String, Tensor)>> {
    let mut raw = Vec::new();
    fs::File::open(path)?.read_to_end(&mut raw)?;
    let mut r = Reader { buf: &raw, at: 0 };
    if r.take(4)? != MAGIC {
        return Err(Error::schema(None, "bad checkpoint magic (expected EWN1)"));
    }
    let count = r.u32()? as usize;
    let mut out = Vec::with_capacity(count);
    for idx in 0..count {
        let name_len = r.u32()? as usize;
        let name = String::from_utf8(r.take(name_len)?.to_vec())
            .map_err(|_| Error::schema(Some(idx), "record name is not UTF-8"))?;
        let rank = r.u32()? as usize;
        let mut shape = Vec::with_capacity(rank);
        for _ in 0..rank {
            shape.push(r.u32()? as usize);
        }
        let numel: usize = shape.iter().product();
        let mut data = Vec::with_capacity(numel);
        for _ in 0..numel {
            data.push(r.f64()?);
        }
        let tensor = Tensor::new(shape, data)
            .map_err(|e| Error::schema(Some(idx), format!("record '{name}': {e}")))?;
        out.push((name, tensor));
    }
    if r.at != raw.len() {
        return Err(Error::schema(None, "trailing bytes after final record"));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn roundtrip_is_bit_exact() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("test.ewn");
        let records = vec![
            ("layer/weight".to_string(), Tensor::new(vec![2, 3], vec![0.1, -0.2, 1e-300, 3.5, -0.0, 42.0]).unwrap()),
            ("layer/bias".to_string(), Tensor::new(vec![3], vec![f64::MIN_POSITIVE, 1.0, -7.25]).unwrap()),
        ];
        save_records(&path, &records).unwrap();
        let loaded = load_records(&path).unwrap();
        assert_eq!(loaded.len(), 2);
        for ((n0, t0), (n1, t1)) in records.iter().zip(&loaded) {
            assert_eq!(n0, n1);
            assert_eq!(t0.shape(), t1.shape());
            for (a, b) in t0.data().iter().zip(t1.data()) {
                assert_eq!(a.to_bits(), b.to_bits());
            }
        }
    }

    #[test]
    fn rejects_bad_magic() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.ewn");
        std::fs::write(&path, b"NOPE\x00\x00\x00\x00").unwrap();
        assert!(matches!(load_records(&path), Err(Error::Schema { .. })));
    }

    #[test]
    fn file_starts_with_magic() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.ewn");
        save_records(&path, &[]).unwrap();
        let bytes = std::fs::read(&path).unwrap();
        assert_eq!(&bytes[..4], b"EWN1");
    }
}
