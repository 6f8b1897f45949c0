//! Binary model record.
//!
//! ```text
//! offset  size     field
//! 0       4        magic "SIDM"
//! 4       2        format version (u16 LE)
//! 6       1        feature kind tag
//! 7       1        reserved, zero
//! 8       4        dimension d (u32 LE)
//! 12      4        components M (u32 LE)
//! 16      8*M      weights (f64 LE)
//! ..      8*M*d    means, row-major (f64 LE)
//! ..      8*M*d    variances, row-major (f64 LE)
//! end-4   4        CRC-32 (IEEE) of every preceding byte (u32 LE)
//! ```

use super::{FeatureKind, GmmModel};
use crate::error::{Error, Result};

pub const MAGIC: &[u8; 4] = b"SIDM";
pub const FORMAT_VERSION: u16 = 1;
const HEADER_LEN: usize = 16;

pub(super) fn encode(model: &GmmModel) -> Vec<u8> {
    let m = model.components();
    let d = model.dim();
    let mut out = Vec::with_capacity(HEADER_LEN + 8 * m * (1 + 2 * d) + 4);
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
    out.push(model.kind().tag());
    out.push(0);
    out.extend_from_slice(&(d as u32).to_le_bytes());
    out.extend_from_slice(&(m as u32).to_le_bytes());
    for v in model
        .weights()
        .iter()
        .chain(model.means())
        .chain(model.variances())
    {
        out.extend_from_slice(&v.to_le_bytes());
    }
    let crc = crc32fast::hash(&out);
    out.extend_from_slice(&crc.to_le_bytes());
    out
}

fn read_u32(b: &[u8], at: usize) -> u32 {
    u32::from_le_bytes(b[at..at + 4].try_into().expect("4 bytes"))
}

pub(super) fn decode(bytes: &[u8]) -> Result<GmmModel> {
    if bytes.len() < HEADER_LEN + 4 {
        return Err(Error::Store(format!(
            "model record truncated ({} bytes)",
            bytes.len()
        )));
    }
    let (body, tail) = bytes.split_at(bytes.len() - 4);
    let stored = u32::from_le_bytes(tail.try_into().expect("4 bytes"));
    let computed = crc32fast::hash(body);
    if stored != computed {
        return Err(Error::Checksum { stored, computed });
    }
    if &body[..4] != MAGIC {
        return Err(Error::Store("bad magic".into()));
    }
    let version = u16::from_le_bytes([body[4], body[5]]);
    if version != FORMAT_VERSION {
        return Err(Error::Store(format!(
            "unsupported format version {version}"
        )));
    }
    let kind = FeatureKind::from_tag(body[6])
        .ok_or_else(|| Error::Store(format!("unknown feature kind tag {}", body[6])))?;
    let d = read_u32(body, 8) as usize;
    let m = read_u32(body, 12) as usize;
    let expected = m
        .checked_mul(d)
        .and_then(|md| md.checked_mul(2))
        .and_then(|v| v.checked_add(m))
        .and_then(|v| v.checked_mul(8))
        .and_then(|v| v.checked_add(HEADER_LEN))
        .ok_or_else(|| Error::Store("header sizes overflow".into()))?;
    if body.len() != expected {
        return Err(Error::Store(format!(
            "payload is {} bytes, header implies {expected}",
            body.len()
        )));
    }
    let mut values = body[HEADER_LEN..]
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")));
    let weights: Vec<f64> = values.by_ref().take(m).collect();
    let means: Vec<f64> = values.by_ref().take(m * d).collect();
    let variances: Vec<f64> = values.collect();
    GmmModel::new(kind, d, weights, means, variances)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn model() -> GmmModel {
        GmmModel::new(
            FeatureKind::Lfcc,
            3,
            vec![0.25, 0.75],
            vec![0.1, -0.2, 0.3, 1.0 / 3.0, 2.5, -7.0],
            vec![1.0, 0.5, 0.25, 2.0, 1e-6, 3.0],
        )
        .unwrap()
    }

    #[test]
    fn layout() {
        let b = encode(&model());
        assert_eq!(&b[..4], b"SIDM");
        assert_eq!(u16::from_le_bytes([b[4], b[5]]), 1);
        assert_eq!(b[6], FeatureKind::Lfcc.tag());
        assert_eq!(read_u32(&b, 8), 3);
        assert_eq!(read_u32(&b, 12), 2);
        assert_eq!(b.len(), 16 + 8 * (2 + 12) + 4);
        assert_eq!(f64::from_le_bytes(b[16..24].try_into().unwrap()), 0.25);
    }

    #[test]
    fn round_trip_is_bit_identical() {
        let m = model();
        let back = decode(&encode(&m)).unwrap();
        assert_eq!(back, m);
        assert_eq!(encode(&back), encode(&m));
    }

    #[test]
    fn truncation_is_rejected() {
        let b = encode(&model());
        for len in [0, 10, 19, b.len() - 1] {
            assert!(decode(&b[..len]).is_err());
        }
    }

    proptest! {
        #[test]
        fn any_bit_flip_is_rejected(byte in 0usize..132, bit in 0u8..8) {
            let mut b = encode(&model());
            let byte = byte % b.len();
            b[byte] ^= 1 << bit;
            prop_assert!(decode(&b).is_err());
        }
    }
}
