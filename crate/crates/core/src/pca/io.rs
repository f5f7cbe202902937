//! Binary model files.
//!
//! Layout (all little-endian):
//!
//! ```text
//! "CPCA" | u32 version = 1 | u32 n_v | u32 d
//! f64 mean[3·n_v] | f64 basis[3·n_v × d] column-major | f64 ratios[d]
//! u64 CRC-64/XZ of every preceding byte
//! ```
//!
//! A JSON sidecar (`<file>.json`) carries `n_v`, `d`, a provenance string,
//! the training total variance and the reference face list.

use std::path::{Path, PathBuf};

use crc::{Crc, CRC_64_XZ};
use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::CariPcaModel;
use crate::error::{Error, Result};

pub const MODEL_MAGIC: &[u8; 4] = b"CPCA";
pub const MODEL_VERSION: u32 = 1;

const HEADER_LEN: usize = 16;
const CHECKSUM: Crc<u64> = Crc::<u64>::new(&CRC_64_XZ);

#[derive(Debug, Serialize, Deserialize)]
struct Sidecar {
    n_v: u32,
    d: u32,
    provenance: String,
    #[serde(default)]
    total_variance: f64,
    #[serde(default)]
    faces: Vec<[usize; 3]>,
}

pub fn sidecar_path(path: &Path) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(".json");
    PathBuf::from(s)
}

pub(crate) fn encode_model(model: &CariPcaModel) -> Result<Vec<u8>> {
    let n_v = u32::try_from(model.n_vertices()).map_err(|_| Error::Dimension("too many vertices".into()))?;
    let d = u32::try_from(model.n_components()).map_err(|_| Error::Dimension("too many components".into()))?;
    let floats = model.mean.len() + model.basis.len() + model.variance_ratios.len();
    let mut buf = Vec::with_capacity(HEADER_LEN + 8 * floats + 8);
    buf.extend_from_slice(MODEL_MAGIC);
    buf.extend_from_slice(&MODEL_VERSION.to_le_bytes());
    buf.extend_from_slice(&n_v.to_le_bytes());
    buf.extend_from_slice(&d.to_le_bytes());
    // nalgebra storage is column-major already
    for v in model.mean.iter().chain(model.basis.iter()).chain(&model.variance_ratios) {
        buf.extend_from_slice(&v.to_le_bytes());
    }
    let crc = CHECKSUM.checksum(&buf);
    buf.extend_from_slice(&crc.to_le_bytes());
    Ok(buf)
}

pub(crate) fn decode_model(bytes: &[u8]) -> Result<CariPcaModel> {
    if bytes.len() < 4 {
        return Err(Error::Corruption(format!("file too short ({} bytes)", bytes.len())));
    }
    if &bytes[..4] != MODEL_MAGIC {
        return Err(Error::ModelFormat(format!("bad magic {:?}", &bytes[..4])));
    }
    if bytes.len() < HEADER_LEN + 8 {
        return Err(Error::Corruption("truncated header".into()));
    }
    let word = |at: usize| u32::from_le_bytes(bytes[at..at + 4].try_into().unwrap());
    let version = word(4);
    if version != MODEL_VERSION {
        return Err(Error::ModelFormat(format!("unsupported version {version}")));
    }
    let (n_v, d) = (word(8) as u64, word(12) as u64);
    let floats = 3 * n_v + 3 * n_v * d + d;
    let expected = HEADER_LEN as u64 + 8 * floats + 8;
    if bytes.len() as u64 != expected {
        return Err(Error::Corruption(format!(
            "expected {expected} bytes for n_v={n_v}, d={d}, found {}",
            bytes.len()
        )));
    }
    let body_end = bytes.len() - 8;
    let stored = u64::from_le_bytes(bytes[body_end..].try_into().unwrap());
    let actual = CHECKSUM.checksum(&bytes[..body_end]);
    if stored != actual {
        return Err(Error::Corruption(format!(
            "checksum mismatch: stored {stored:016x}, computed {actual:016x}"
        )));
    }

    let mut values = bytes[HEADER_LEN..body_end]
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().unwrap()));
    let (dim, d) = (3 * n_v as usize, d as usize);
    let mean = DVector::from_iterator(dim, values.by_ref().take(dim));
    let basis = DMatrix::from_iterator(dim, d, values.by_ref().take(dim * d));
    let ratios: Vec<f64> = values.take(d).collect();
    CariPcaModel::from_parts(mean, basis, ratios, Vec::new())
        .map_err(|e| Error::Corruption(format!("payload failed validation: {e}")))
}

/// Writes the binary model and its JSON sidecar.
pub fn save_model(model: &CariPcaModel, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    std::fs::write(path, encode_model(model)?)?;
    let sidecar = Sidecar {
        n_v: model.n_vertices() as u32,
        d: model.n_components() as u32,
        provenance: model.provenance.clone(),
        total_variance: model.total_variance,
        faces: model.faces.clone(),
    };
    let json = serde_json::to_string(&sidecar).map_err(|e| Error::ModelFormat(e.to_string()))?;
    std::fs::write(sidecar_path(path), json)?;
    Ok(())
}

/// Reads a binary model. The sidecar, when present, restores provenance,
/// total variance and connectivity; without it the model has no faces.
pub fn load_model(path: impl AsRef<Path>) -> Result<CariPcaModel> {
    let path = path.as_ref();
    let bytes = std::fs::read(path)?;
    let mut model = decode_model(&bytes)?;
    let side = sidecar_path(path);
    if side.exists() {
        let text = std::fs::read_to_string(&side)?;
        let meta: Sidecar = serde_json::from_str(&text)
            .map_err(|e| Error::ModelFormat(format!("{}: {e}", side.display())))?;
        if meta.n_v as usize != model.n_vertices() || meta.d as usize != model.n_components() {
            return Err(Error::ModelFormat(format!(
                "sidecar says n_v={}, d={} but model has n_v={}, d={}",
                meta.n_v,
                meta.d,
                model.n_vertices(),
                model.n_components()
            )));
        }
        model = model
            .with_faces(meta.faces)?
            .with_provenance(meta.provenance)
            .with_total_variance(meta.total_variance);
    }
    Ok(model)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pca::fit_pca;
    use crate::synth;

    fn small_model() -> CariPcaModel {
        let m = synth::uv_sphere(4, 6, [1.0, 1.1, 0.9]).unwrap();
        let modes = synth::smooth_modes(&m, 3);
        let (corpus, _) = synth::linear_corpus(&m, &modes, &[1.0, 0.5, 0.25], 9, 11).unwrap();
        fit_pca(&corpus, 3).unwrap().with_provenance("unit test")
    }

    #[test]
    fn round_trip_is_bit_exact() {
        let model = small_model();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.cpca");
        save_model(&model, &path).unwrap();
        let back = load_model(&path).unwrap();
        assert_eq!(back, model);
        for (a, b) in back.basis().iter().zip(model.basis().iter()) {
            assert_eq!(a.to_bits(), b.to_bits());
        }
    }

    #[test]
    fn truncated_file_is_corruption() {
        let bytes = encode_model(&small_model()).unwrap();
        for cut in [5, 20, bytes.len() / 2, bytes.len() - 1] {
            assert!(matches!(decode_model(&bytes[..cut]), Err(Error::Corruption(_))), "cut {cut}");
        }
    }

    #[test]
    fn flipped_bit_is_corruption() {
        let mut bytes = encode_model(&small_model()).unwrap();
        bytes[40] ^= 0x10;
        assert!(matches!(decode_model(&bytes), Err(Error::Corruption(_))));
    }

    #[test]
    fn wrong_magic_and_version() {
        let mut bytes = encode_model(&small_model()).unwrap();
        bytes[0] = b'X';
        assert!(matches!(decode_model(&bytes), Err(Error::ModelFormat(_))));
        let mut bytes = encode_model(&small_model()).unwrap();
        bytes[4] = 2;
        assert!(matches!(decode_model(&bytes), Err(Error::ModelFormat(_))));
    }

    #[test]
    fn missing_sidecar_loads_without_faces() {
        let model = small_model();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.cpca");
        save_model(&model, &path).unwrap();
        std::fs::remove_file(sidecar_path(&path)).unwrap();
        let back = load_model(&path).unwrap();
        assert!(back.faces().is_empty());
        assert_eq!(back.basis(), model.basis());
    }
}
