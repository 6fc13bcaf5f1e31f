//! Head parameter file (little-endian): magic `LUSH`, version u32,
//! feature_dim u32, `W` row-major as f64 (feature_dim × 4), `b` as 4 × f64,
//! then the 32-byte backbone fingerprint the head was trained against.

use std::io::{Read, Write};

use super::model::HeadParameters;
use super::HeadError;
use crate::backbone::Fingerprint;
use crate::scalar::Scalar;

pub const HEAD_MAGIC: &[u8; 4] = b"LUSH";
pub const HEAD_VERSION: u32 = 1;

pub fn write_head<T: Scalar>(
    w: &mut impl Write,
    params: &HeadParameters<T>,
    fingerprint: &Fingerprint,
) -> std::io::Result<()> {
    w.write_all(HEAD_MAGIC)?;
    w.write_all(&HEAD_VERSION.to_le_bytes())?;
    w.write_all(&(params.feature_dim() as u32).to_le_bytes())?;
    for v in params.weights().iter().chain(params.bias().iter()) {
        w.write_all(&v.as_f64().to_le_bytes())?;
    }
    w.write_all(fingerprint)
}

pub fn read_head<T: Scalar>(r: &mut impl Read) -> Result<(HeadParameters<T>, Fingerprint), HeadError> {
    let bad = |reason: &str| HeadError::BadParameterFile {
        reason: reason.to_string(),
    };
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic).map_err(|_| bad("truncated magic"))?;
    if &magic != HEAD_MAGIC {
        return Err(bad("bad magic, not a head parameter file"));
    }
    let mut word = [0u8; 4];
    r.read_exact(&mut word).map_err(|_| bad("truncated version"))?;
    let version = u32::from_le_bytes(word);
    if version != HEAD_VERSION {
        return Err(bad(&format!("unsupported version {version}")));
    }
    r.read_exact(&mut word).map_err(|_| bad("truncated feature_dim"))?;
    let dim = u32::from_le_bytes(word) as usize;
    let mut read_f64 = || -> Result<T, HeadError> {
        let mut b = [0u8; 8];
        r.read_exact(&mut b).map_err(|_| bad("truncated parameters"))?;
        Ok(T::of(f64::from_le_bytes(b)))
    };
    let weights = (0..dim * 4).map(|_| read_f64()).collect::<Result<Vec<T>, _>>()?;
    let mut bias = [T::zero(); 4];
    for b in &mut bias {
        *b = read_f64()?;
    }
    let mut fingerprint = [0u8; 32];
    r.read_exact(&mut fingerprint).map_err(|_| bad("truncated fingerprint"))?;
    let params = HeadParameters::from_parts(dim, weights, bias)
        .map_err(|e| bad(&e.to_string()))?;
    Ok((params, fingerprint))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_and_layout() {
        let p = HeadParameters::<f64>::from_parts(1, vec![1.0, 2.0, 3.0, 4.0], [0.5, -0.5, 0.0, 8.0]).unwrap();
        let mut buf = Vec::new();
        write_head(&mut buf, &p, &[7; 32]).unwrap();
        assert_eq!(buf.len(), 4 + 4 + 4 + 8 * 8 + 32);
        assert_eq!(&buf[..4], b"LUSH");
        assert_eq!(&buf[12..20], &1.0f64.to_le_bytes());
        let (back, fp) = read_head::<f64>(&mut buf.as_slice()).unwrap();
        assert_eq!(back, p);
        assert_eq!(fp, [7; 32]);
    }

    #[test]
    fn truncation_detected() {
        let p = HeadParameters::<f64>::zeros(3);
        let mut buf = Vec::new();
        write_head(&mut buf, &p, &[0; 32]).unwrap();
        for cut in [0, 5, 20, buf.len() - 1] {
            assert!(read_head::<f64>(&mut &buf[..cut]).is_err());
        }
    }
}
