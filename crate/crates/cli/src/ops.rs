//! Operations shared by the command line and the HTTP service, so both
//! paths produce the same numbers for the same inputs.

use std::path::Path;

use anyhow::{bail, Context};
use carimorph_core::exaggerate::{feature_vector_from, user_control_coords, FeatureSource, FeatureVector, MeanHead};
use carimorph_core::mesh::{load_mesh, HeadMesh};
use carimorph_core::pca::{CariPcaModel, PcaCoeffs};
use nalgebra::DVector;

/// Where a head's caricature offset comes from.
#[derive(Debug, Clone)]
pub enum CaricatureSource {
    Mesh(HeadMesh),
    Coeffs(PcaCoeffs),
}

/// Parses whitespace-separated coefficients; `#` starts a comment.
pub fn parse_coeffs(text: &str) -> anyhow::Result<PcaCoeffs> {
    let mut values = Vec::new();
    for (n, line) in text.lines().enumerate() {
        let body = line.split('#').next().unwrap_or("");
        for tok in body.split_whitespace() {
            let v: f64 = tok.parse().with_context(|| format!("line {}: bad coefficient `{tok}`", n + 1))?;
            values.push(v);
        }
    }
    if values.is_empty() {
        bail!("no coefficients found");
    }
    Ok(PcaCoeffs::from_slice(&values)?)
}

pub fn load_coeffs(path: &Path) -> anyhow::Result<PcaCoeffs> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    parse_coeffs(&text).with_context(|| format!("parsing {}", path.display()))
}

/// One value per line, shortest round-trip form.
pub fn format_coeffs(coeffs: &PcaCoeffs) -> String {
    coeffs.values().iter().map(|v| format!("{v}\n")).collect()
}

/// `.obj` files are caricature meshes; anything else is a coefficient list.
pub fn load_caricature_source(path: &Path) -> anyhow::Result<CaricatureSource> {
    let is_obj = path.extension().is_some_and(|e| e.eq_ignore_ascii_case("obj"));
    if is_obj {
        Ok(CaricatureSource::Mesh(load_mesh(path)?))
    } else {
        Ok(CaricatureSource::Coeffs(load_coeffs(path)?))
    }
}

/// A stored head with its two offsets from the mean head.
#[derive(Debug, Clone)]
pub struct HeadSlot {
    pub head: HeadMesh,
    pub d_p: FeatureVector,
    pub d_g: FeatureVector,
}

/// Caricature offset: from the supplied source, or the model's projection of
/// the head itself when none is given.
pub fn caricature_offset(
    model: &CariPcaModel,
    mean: &MeanHead,
    head: &HeadMesh,
    source: Option<&CaricatureSource>,
) -> anyhow::Result<FeatureVector> {
    check_model_matches(model, mean)?;
    let coords = match source {
        Some(CaricatureSource::Mesh(m)) => {
            m.ensure_same_connectivity(mean.mesh())?;
            m.coords()
        }
        Some(CaricatureSource::Coeffs(c)) => model.decode_coords(c)?,
        None => model.decode_coords(&model.encode(head)?)?,
    };
    coeffs_offset(mean, coords)
}

fn coeffs_offset(mean: &MeanHead, coords: DVector<f64>) -> anyhow::Result<FeatureVector> {
    Ok(FeatureVector::new(coords - mean.coords(), FeatureSource::Generator)?)
}

pub fn check_model_matches(model: &CariPcaModel, mean: &MeanHead) -> anyhow::Result<()> {
    if model.n_vertices() != mean.n_vertices() {
        bail!(
            "model has {} vertices but the mean head has {}",
            model.n_vertices(),
            mean.n_vertices()
        );
    }
    Ok(())
}

pub fn build_slot(
    model: &CariPcaModel,
    mean: &MeanHead,
    head: HeadMesh,
    source: Option<&CaricatureSource>,
) -> anyhow::Result<HeadSlot> {
    let d_p = feature_vector_from(&head, mean, FeatureSource::Reconstruction)?;
    let d_g = caricature_offset(model, mean, &head, source)?;
    Ok(HeadSlot { head, d_p, d_g })
}

/// Vertex coordinates of `mean + u1·dG + u2·dP`.
pub fn slot_control(mean: &MeanHead, slot: &HeadSlot, u1: f64, u2: f64) -> anyhow::Result<DVector<f64>> {
    Ok(user_control_coords(mean, &slot.d_g, &slot.d_p, u1, u2)?)
}

/// `mean + u1·dG` for a bare coefficient vector, with `dP` taken from `slot`
/// when one is given and zero otherwise.
pub fn coeffs_control(
    model: &CariPcaModel,
    mean: &MeanHead,
    coeffs: &PcaCoeffs,
    slot: Option<&HeadSlot>,
    u1: f64,
    u2: f64,
) -> anyhow::Result<DVector<f64>> {
    check_model_matches(model, mean)?;
    let d_g = coeffs_offset(mean, model.decode_coords(coeffs)?)?;
    let d_p = match slot {
        Some(s) => s.d_p.clone(),
        None => FeatureVector::new(DVector::zeros(mean.coords().len()), FeatureSource::Reconstruction)?,
    };
    Ok(user_control_coords(mean, &d_g, &d_p, u1, u2)?)
}

/// Splits `NAME=HEAD[,CARICATURE]`.
pub fn parse_slot_spec(spec: &str) -> anyhow::Result<(String, String, Option<String>)> {
    let (name, rest) = spec
        .split_once('=')
        .with_context(|| format!("slot `{spec}` is not NAME=HEAD[,CARICATURE]"))?;
    if name.is_empty() || rest.is_empty() {
        bail!("slot `{spec}` is not NAME=HEAD[,CARICATURE]");
    }
    match rest.split_once(',') {
        Some((head, cari)) => Ok((name.into(), head.into(), Some(cari.into()))),
        None => Ok((name.into(), rest.into(), None)),
    }
}
