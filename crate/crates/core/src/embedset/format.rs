//! `T2AVEMB1` binary embedding files.
//!
//! Layout, all little-endian:
//!
//! | offset | size | field                          |
//! |--------|------|--------------------------------|
//! | 0      | 8    | magic `T2AVEMB1`               |
//! | 8      | 4    | u32 version (= 1)              |
//! | 12     | 4    | u32 dim D                      |
//! | 16     | 8    | u64 count N                    |
//! | 24     | 4    | u32 segments per clip T        |
//! | 28     | 4    | u32 dtype (0 = f32)            |
//! | 32     | 4·N·D| row-major f32 payload          |

use std::path::Path;

use crate::error::{Error, Result};

use super::EmbeddingSet;

pub const MAGIC: &[u8; 8] = b"T2AVEMB1";
pub const HEADER_LEN: usize = 32;
const VERSION: u32 = 1;
const DTYPE_F32: u32 = 0;

fn u32_at(bytes: &[u8], offset: usize) -> u32 {
    u32::from_le_bytes(bytes[offset..offset + 4].try_into().expect("4 bytes"))
}

pub fn encode_embeddings(set: &EmbeddingSet) -> Result<Vec<u8>> {
    set.validate()?;
    let dim = u32::try_from(set.dim())
        .map_err(|_| Error::InvalidHeader(format!("dimension {} exceeds u32", set.dim())))?;
    let segments = u32::try_from(set.segments_per_clip()).map_err(|_| {
        Error::InvalidHeader(format!("segments {} exceed u32", set.segments_per_clip()))
    })?;
    let mut out = Vec::with_capacity(HEADER_LEN + 4 * set.data().len());
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.extend_from_slice(&dim.to_le_bytes());
    out.extend_from_slice(&(set.count() as u64).to_le_bytes());
    out.extend_from_slice(&segments.to_le_bytes());
    out.extend_from_slice(&DTYPE_F32.to_le_bytes());
    for v in set.data() {
        out.extend_from_slice(&v.to_le_bytes());
    }
    Ok(out)
}

pub fn decode_embeddings(bytes: &[u8]) -> Result<EmbeddingSet> {
    if bytes.len() < 8 || &bytes[..8] != MAGIC {
        let mut found = [0u8; 8];
        let n = bytes.len().min(8);
        found[..n].copy_from_slice(&bytes[..n]);
        return Err(Error::BadMagic { found });
    }
    if bytes.len() < HEADER_LEN {
        return Err(Error::Truncated {
            expected: HEADER_LEN as u64,
            found: bytes.len() as u64,
        });
    }
    let version = u32_at(bytes, 8);
    if version != VERSION {
        return Err(Error::VersionMismatch { found: version });
    }
    let dim = u32_at(bytes, 12) as usize;
    let count = u64::from_le_bytes(bytes[16..24].try_into().expect("8 bytes"));
    let segments = u32_at(bytes, 24) as usize;
    let dtype = u32_at(bytes, 28);
    if dtype != DTYPE_F32 {
        return Err(Error::UnsupportedDtype { found: dtype });
    }
    if dim == 0 {
        return Err(Error::InvalidHeader("dimension must be positive".into()));
    }
    let expected = (count as u128) * (dim as u128) * 4 + HEADER_LEN as u128;
    let found = bytes.len() as u128;
    if found < expected {
        return Err(Error::Truncated {
            expected: expected.min(u64::MAX as u128) as u64,
            found: found as u64,
        });
    }
    if found > expected {
        return Err(Error::TrailingBytes {
            expected: expected as u64,
            found: found as u64,
        });
    }
    let data: Vec<f32> = bytes[HEADER_LEN..]
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes(c.try_into().expect("4 bytes")))
        .collect();
    let set = EmbeddingSet::new(dim, segments, data)?;
    set.validate()?;
    Ok(set)
}

pub fn read_embeddings(path: impl AsRef<Path>) -> Result<EmbeddingSet> {
    let path = path.as_ref();
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_embeddings(&bytes)
}

/// Writes `set`; non-finite values are rejected before anything touches disk.
pub fn write_embeddings(set: &EmbeddingSet, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let bytes = encode_embeddings(set)?;
    std::fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn empty_set_is_header_only() {
        let s = EmbeddingSet::empty(8).unwrap();
        let bytes = encode_embeddings(&s).unwrap();
        assert_eq!(bytes.len(), HEADER_LEN);
        assert!(decode_embeddings(&bytes).unwrap().bitwise_eq(&s));
    }

    #[test]
    fn payload_is_little_endian_row_major() {
        let s = EmbeddingSet::from_rows(&[vec![1.0, 2.0], vec![3.0, 4.0]]).unwrap();
        let bytes = encode_embeddings(&s).unwrap();
        let expected: Vec<u8> = [1.0f32, 2.0, 3.0, 4.0]
            .iter()
            .flat_map(|v| v.to_le_bytes())
            .collect();
        assert_eq!(&bytes[HEADER_LEN..], expected.as_slice());
        assert_eq!(&bytes[..8], b"T2AVEMB1");
        assert_eq!(u32_at(&bytes, 12), 2);
        assert_eq!(u64::from_le_bytes(bytes[16..24].try_into().unwrap()), 2);
    }

    #[test]
    fn nan_is_rejected_before_write() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("nan.emb");
        let s = EmbeddingSet::new(1, 0, vec![f32::NAN]).unwrap();
        assert!(matches!(write_embeddings(&s, &path), Err(Error::NonFinite { .. })));
        assert!(!path.exists());
    }

    #[test]
    fn bad_magic() {
        let mut bytes = encode_embeddings(&EmbeddingSet::empty(4).unwrap()).unwrap();
        bytes[..8].copy_from_slice(b"XXXXXXXX");
        assert!(matches!(decode_embeddings(&bytes), Err(Error::BadMagic { .. })));
        assert!(matches!(decode_embeddings(b"T2A"), Err(Error::BadMagic { .. })));
    }

    #[test]
    fn version_and_dtype_mismatch() {
        let mut bytes = encode_embeddings(&EmbeddingSet::empty(4).unwrap()).unwrap();
        bytes[8] = 2;
        assert!(matches!(decode_embeddings(&bytes), Err(Error::VersionMismatch { found: 2 })));
        bytes[8] = 1;
        bytes[28] = 1;
        assert!(matches!(decode_embeddings(&bytes), Err(Error::UnsupportedDtype { found: 1 })));
    }

    #[test]
    fn truncated_payload() {
        let s = EmbeddingSet::new(4, 0, vec![0.5; 40]).unwrap();
        let mut bytes = encode_embeddings(&s).unwrap();
        bytes.truncate(HEADER_LEN + 39 * 4);
        assert!(matches!(
            decode_embeddings(&bytes),
            Err(Error::Truncated { expected: 192, found: 188 })
        ));
    }

    #[test]
    fn non_finite_on_load() {
        let s = EmbeddingSet::new(2, 0, vec![1.0, 2.0]).unwrap();
        let mut bytes = encode_embeddings(&s).unwrap();
        bytes[HEADER_LEN + 4..HEADER_LEN + 8].copy_from_slice(&f32::INFINITY.to_le_bytes());
        assert!(matches!(
            decode_embeddings(&bytes),
            Err(Error::NonFinite { row: 0, col: 1 })
        ));
    }

    #[test]
    fn missing_file_names_path() {
        let err = read_embeddings("/nonexistent/dir/x.emb").unwrap_err();
        assert!(err.to_string().contains("/nonexistent/dir/x.emb"));
    }

    proptest! {
        #[test]
        fn file_round_trip_is_bitwise(
            d in 1usize..6,
            t in 0usize..4,
            clips in 0usize..5,
            seed in proptest::collection::vec(proptest::num::f32::NORMAL | proptest::num::f32::ZERO | proptest::num::f32::SUBNORMAL, 0..200),
        ) {
            let n = clips * t.max(1);
            let data: Vec<f32> = (0..n * d).map(|i| seed.get(i).copied().unwrap_or(i as f32)).collect();
            let s = EmbeddingSet::new(d, t, data).unwrap();
            let dir = tempfile::tempdir().unwrap();
            let path = dir.path().join("s.emb");
            write_embeddings(&s, &path).unwrap();
            prop_assert!(read_embeddings(&path).unwrap().bitwise_eq(&s));
        }
    }
}
