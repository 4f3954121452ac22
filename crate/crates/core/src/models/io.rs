//! Versioned binary model files.
//!
//! Layout (little-endian): magic `DSCL`, `u32` version, `u32` conv1 width,
//! `u32` conv2 width, `u32` pool size, then for each of the six parameter
//! tensors a `u32` element count followed by that many `f32` values.

use std::path::Path;

use super::network::{Architecture, Classifier, Params};
use crate::error::{Error, Result};

pub const MAGIC: &[u8; 4] = b"DSCL";
pub const VERSION: u32 = 1;

pub fn encode_model(model: &Classifier) -> Vec<u8> {
    let a = model.architecture();
    let mut out = Vec::new();
    out.extend_from_slice(MAGIC);
    for v in [VERSION, a.conv1 as u32, a.conv2 as u32, a.pool as u32] {
        out.extend_from_slice(&v.to_le_bytes());
    }
    for t in model.params().tensors() {
        out.extend_from_slice(&(t.len() as u32).to_le_bytes());
        for &v in t.iter() {
            out.extend_from_slice(&(v as f32).to_le_bytes());
        }
    }
    out
}

struct Reader<'a> {
    buf: &'a [u8],
}

impl Reader<'_> {
    fn take(&mut self, n: usize) -> Result<&[u8]> {
        if self.buf.len() < n {
            return Err(Error::Truncated);
        }
        let (head, tail) = self.buf.split_at(n);
        self.buf = tail;
        Ok(head)
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")))
    }
}

pub fn decode_model(bytes: &[u8]) -> Result<Classifier> {
    let mut r = Reader { buf: bytes };
    if r.take(4).map_err(|_| Error::BadMagic)? != MAGIC {
        return Err(Error::BadMagic);
    }
    let version = r.u32()?;
    if version != VERSION {
        return Err(Error::UnsupportedVersion(version));
    }
    let arch = Architecture {
        conv1: r.u32()? as usize,
        conv2: r.u32()? as usize,
        pool: r.u32()? as usize,
    };
    arch.validate()
        .map_err(|e| Error::MalformedModel(e.to_string()))?;
    let mut params = Params::zeros(&arch);
    for (t, expected) in params.tensors_mut().into_iter().zip(arch.shapes()) {
        let n = r.u32()? as usize;
        if n != expected {
            return Err(Error::MalformedModel(format!(
                "tensor has {n} values, architecture needs {expected}"
            )));
        }
        let raw = r.take(n * 4)?;
        for (dst, chunk) in t.iter_mut().zip(raw.chunks_exact(4)) {
            *dst = f64::from(f32::from_le_bytes(chunk.try_into().expect("4 bytes")));
        }
    }
    if !r.buf.is_empty() {
        return Err(Error::MalformedModel(format!("{} trailing bytes", r.buf.len())));
    }
    Classifier::new(arch, params).map_err(|e| Error::MalformedModel(e.to_string()))
}

pub fn save_model(model: &Classifier, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    std::fs::write(path, encode_model(model)).map_err(|e| Error::io(path, e))
}

pub fn load_model(path: impl AsRef<Path>) -> Result<Classifier> {
    let path = path.as_ref();
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_model(&bytes)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::test_support::random_model;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn sample() -> Classifier {
        random_model(
            &mut ChaCha8Rng::seed_from_u64(4),
            Architecture {
                conv1: 5,
                conv2: 3,
                pool: 2,
            },
        )
    }

    #[test]
    fn round_trip_through_file() {
        let m = sample();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.dscl");
        save_model(&m, &path).unwrap();
        let back = load_model(&path).unwrap();
        assert_eq!(back, m);
        for (a, b) in back.params().tensors().iter().zip(m.params().tensors()) {
            for (x, y) in a.iter().zip(b.iter()) {
                assert_eq!(x.to_bits(), y.to_bits());
            }
        }
    }

    #[test]
    fn truncation_detected() {
        let bytes = encode_model(&sample());
        for cut in [6, 20, bytes.len() - 1] {
            assert!(matches!(decode_model(&bytes[..cut]), Err(Error::Truncated)));
        }
    }

    #[test]
    fn bad_magic_and_version() {
        let mut bytes = encode_model(&sample());
        bytes[4] = 9;
        assert!(matches!(decode_model(&bytes), Err(Error::UnsupportedVersion(9))));
        bytes[0] = b'X';
        assert!(matches!(decode_model(&bytes), Err(Error::BadMagic)));
        assert!(matches!(decode_model(b"DS"), Err(Error::BadMagic)));
    }

    #[test]
    fn trailing_bytes_rejected() {
        let mut bytes = encode_model(&sample());
        bytes.push(0);
        assert!(matches!(decode_model(&bytes), Err(Error::MalformedModel(_))));
    }
}
