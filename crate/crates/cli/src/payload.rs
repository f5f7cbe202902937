//! Mesh wire formats for the service.
//!
//! Binary layout, little-endian: `u32 n_v`, `u32 n_f`, `n_v × 3` `f32`
//! positions, `n_f × 3` `u32` vertex indices.

use anyhow::{bail, ensure};
use serde::Serialize;

pub const BINARY_CONTENT_TYPE: &str = "application/octet-stream";

pub fn encode_mesh(coords: &[f64], faces: &[[usize; 3]]) -> anyhow::Result<Vec<u8>> {
    ensure!(coords.len().is_multiple_of(3), "coordinate count {} is not a multiple of 3", coords.len());
    let n_v = u32::try_from(coords.len() / 3)?;
    let n_f = u32::try_from(faces.len())?;
    let mut out = Vec::with_capacity(8 + 4 * coords.len() + 12 * faces.len());
    out.extend_from_slice(&n_v.to_le_bytes());
    out.extend_from_slice(&n_f.to_le_bytes());
    for &c in coords {
        out.extend_from_slice(&(c as f32).to_le_bytes());
    }
    for f in faces {
        for &i in f {
            out.extend_from_slice(&u32::try_from(i)?.to_le_bytes());
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq)]
pub struct DecodedMesh {
    pub positions: Vec<f32>,
    pub faces: Vec<[u32; 3]>,
}

pub fn decode_mesh(bytes: &[u8]) -> anyhow::Result<DecodedMesh> {
    let word = |k: usize| -> anyhow::Result<[u8; 4]> {
        bytes
            .get(4 * k..4 * k + 4)
            .map(|b| b.try_into().expect("4-byte slice"))
            .ok_or_else(|| anyhow::anyhow!("payload truncated at word {k}"))
    };
    let n_v = u32::from_le_bytes(word(0)?) as usize;
    let n_f = u32::from_le_bytes(word(1)?) as usize;
    let expected = 8 + 12 * n_v + 12 * n_f;
    if bytes.len() != expected {
        bail!("payload is {} bytes, header implies {expected}", bytes.len());
    }
    let positions = (0..3 * n_v).map(|k| word(2 + k).map(f32::from_le_bytes)).collect::<anyhow::Result<_>>()?;
    let base = 2 + 3 * n_v;
    let faces = (0..n_f)
        .map(|f| -> anyhow::Result<[u32; 3]> {
            Ok([
                u32::from_le_bytes(word(base + 3 * f)?),
                u32::from_le_bytes(word(base + 3 * f + 1)?),
                u32::from_le_bytes(word(base + 3 * f + 2)?),
            ])
        })
        .collect::<anyhow::Result<_>>()?;
    Ok(DecodedMesh { positions, faces })
}

/// Full-precision JSON form, used for debugging and exact comparisons.
#[derive(Debug, Clone, Serialize, serde::Deserialize, PartialEq)]
pub struct JsonMesh {
    pub n_v: usize,
    pub n_f: usize,
    pub vertices: Vec<f64>,
    pub faces: Vec<[usize; 3]>,
}

impl JsonMesh {
    pub fn new(coords: &[f64], faces: &[[usize; 3]]) -> Self {
        Self {
            n_v: coords.len() / 3,
            n_f: faces.len(),
            vertices: coords.to_vec(),
            faces: faces.to_vec(),
        }
    }
}
