//! Dense little-endian `f32` arrays with a dimension header.
//!
//! Layout: the magic `MYOA`, a `u32` rank, one `u32` per dimension, then the
//! values in row-major order.

use std::fs;
use std::path::Path;

use crate::error::{CliError, CliResult};

pub const MAGIC: &[u8; 4] = b"MYOA";

pub fn encode_array(dims: &[usize], data: &[f32]) -> Vec<u8> {
    assert_eq!(
        dims.iter().product::<usize>(),
        data.len(),
        "dims do not match data"
    );
    let mut out = Vec::with_capacity(8 + 4 * dims.len() + 4 * data.len());
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&(dims.len() as u32).to_le_bytes());
    for &d in dims {
        out.extend_from_slice(&(d as u32).to_le_bytes());
    }
    for v in data {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out
}

fn read_u32(bytes: &[u8], at: usize) -> Option<u32> {
    bytes
        .get(at..at + 4)
        .map(|b| u32::from_le_bytes(b.try_into().unwrap()))
}

pub fn decode_array(bytes: &[u8]) -> Option<(Vec<usize>, Vec<f32>)> {
    if bytes.get(..4)? != MAGIC {
        return None;
    }
    let rank = read_u32(bytes, 4)? as usize;
    let dims: Vec<usize> = (0..rank)
        .map(|i| read_u32(bytes, 8 + 4 * i).map(|d| d as usize))
        .collect::<Option<_>>()?;
    let start = 8 + 4 * rank;
    let count: usize = dims.iter().product();
    let body = bytes.get(start..)?;
    if body.len() != 4 * count {
        return None;
    }
    let data = body
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
        .collect();
    Some((dims, data))
}

/// Writes the array and returns the file length in bytes.
pub fn write_array(path: &Path, dims: &[usize], data: &[f32]) -> CliResult<u64> {
    let bytes = encode_array(dims, data);
    fs::write(path, &bytes).map_err(|e| CliError::io(path, e))?;
    Ok(bytes.len() as u64)
}

pub fn read_array(path: &Path) -> CliResult<(Vec<usize>, Vec<f32>)> {
    let bytes = fs::read(path).map_err(|e| CliError::io(path, e))?;
    decode_array(&bytes)
        .ok_or_else(|| CliError::data(format!("{}: malformed array file", path.display())))
}

pub fn to_f32(values: impl IntoIterator<Item = f64>) -> Vec<f32> {
    values.into_iter().map(|v| v as f32).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip() {
        let data: Vec<f32> = (0..24).map(|i| i as f32 * 0.37 - 3.0).collect();
        let bytes = encode_array(&[2, 3, 4], &data);
        assert_eq!(bytes.len(), 8 + 12 + 96);
        assert_eq!(&bytes[..4], b"MYOA");
        let (dims, back) = decode_array(&bytes).unwrap();
        assert_eq!(dims, vec![2, 3, 4]);
        assert_eq!(back, data);
    }

    #[test]
    fn rejects_truncated_and_foreign_bytes() {
        let bytes = encode_array(&[3], &[1.0, 2.0, 3.0]);
        assert!(decode_array(&bytes[..bytes.len() - 1]).is_none());
        assert!(decode_array(b"NOPE\x01\x00\x00\x00").is_none());
    }
}
