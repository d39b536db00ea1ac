//! Single-file grid format: `u64` little-endian header length, a JSON
//! header `{"c","h","w","dtype":"f32le"}`, then the channel-major payload.

use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

use super::FeatureGrid;

#[derive(Serialize, Deserialize)]
struct Header {
    c: usize,
    h: usize,
    w: usize,
    dtype: String,
}

pub fn write_feature_grid(grid: &FeatureGrid, mut out: impl Write) -> std::io::Result<()> {
    let header = serde_json::to_vec(&Header {
        c: grid.channels(),
        h: grid.height(),
        w: grid.width(),
        dtype: "f32le".into(),
    })?;
    out.write_all(&(header.len() as u64).to_le_bytes())?;
    out.write_all(&header)?;
    let mut payload = Vec::with_capacity(grid.data().len() * 4);
    for v in grid.data() {
        payload.extend_from_slice(&v.to_le_bytes());
    }
    out.write_all(&payload)
}

pub fn read_feature_grid(mut input: impl Read) -> Result<FeatureGrid> {
    let bad = |e: &dyn std::fmt::Display| Error::format("feature grid", e);
    let mut len = [0u8; 8];
    input.read_exact(&mut len).map_err(|e| bad(&e))?;
    let len = u64::from_le_bytes(len);
    if len > 1 << 20 {
        return Err(bad(&format!("header length {len} is implausible")));
    }
    let mut header = vec![0u8; len as usize];
    input.read_exact(&mut header).map_err(|e| bad(&e))?;
    let header: Header = serde_json::from_slice(&header).map_err(|e| bad(&e))?;
    if header.dtype != "f32le" {
        return Err(bad(&format!("unsupported dtype {}", header.dtype)));
    }
    let count = header
        .c
        .checked_mul(header.h)
        .and_then(|n| n.checked_mul(header.w))
        .ok_or_else(|| bad(&"dimensions overflow"))?;
    let mut payload = vec![0u8; count * 4];
    input.read_exact(&mut payload).map_err(|e| bad(&e))?;
    let data = payload
        .chunks_exact(4)
        .map(|b| f32::from_le_bytes([b[0], b[1], b[2], b[3]]))
        .collect();
    FeatureGrid::new(header.c, header.h, header.w, data)
}
