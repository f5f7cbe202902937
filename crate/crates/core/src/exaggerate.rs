//! Feature vectors relative to the normal-space mean head, the cosine
//! identity measure, single-coefficient exaggeration and two-parameter
//! user control.
//!
//! A head's feature vector is its displacement from the mean head. Its
//! direction carries identity and its length carries how far the face
//! departs from average, so scaling the vector exaggerates without
//! changing who the face looks like.

use nalgebra::DVector;

use crate::error::{Error, Result};
use crate::mesh::HeadMesh;

/// Default slider range for the control coefficients.
pub const CONTROL_RANGE: (f64, f64) = (0.0, 2.0);
pub const CONTROL_STEP: f64 = 0.05;

/// The mean head of the normal (non-caricature) head space.
#[derive(Debug, Clone, PartialEq)]
pub struct MeanHead {
    mesh: HeadMesh,
    coords: DVector<f64>,
}

impl MeanHead {
    pub fn new(mesh: HeadMesh) -> Self {
        let coords = mesh.coords();
        Self { mesh, coords }
    }

    pub fn mesh(&self) -> &HeadMesh {
        &self.mesh
    }

    pub fn coords(&self) -> &DVector<f64> {
        &self.coords
    }

    pub fn n_vertices(&self) -> usize {
        self.mesh.n_vertices()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FeatureSource {
    /// `d_P`: from a head reconstructed from a photo.
    Reconstruction,
    /// `d_G`: from a generated caricature.
    Generator,
    Other,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FeatureVector {
    values: DVector<f64>,
    source: FeatureSource,
}

impl FeatureVector {
    pub fn new(values: DVector<f64>, source: FeatureSource) -> Result<Self> {
        if !values.iter().all(|v| v.is_finite()) {
            return Err(Error::Dimension("feature vector must be finite".into()));
        }
        Ok(Self { values, source })
    }

    pub fn values(&self) -> &DVector<f64> {
        &self.values
    }

    pub fn source(&self) -> FeatureSource {
        self.source
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn norm(&self) -> f64 {
        self.values.norm()
    }

    pub fn scaled(&self, k: f64) -> Self {
        Self {
            values: &self.values * k,
            source: self.source,
        }
    }
}

/// `head − mean`.
pub fn feature_vector(head: &HeadMesh, mean: &MeanHead) -> Result<FeatureVector> {
    head.ensure_same_connectivity(&mean.mesh)?;
    FeatureVector::new(head.coords() - &mean.coords, FeatureSource::Other)
}

/// Like [`feature_vector`] but tagged with its origin.
pub fn feature_vector_from(head: &HeadMesh, mean: &MeanHead, source: FeatureSource) -> Result<FeatureVector> {
    let mut f = feature_vector(head, mean)?;
    f.source = source;
    Ok(f)
}

/// Cosine of the angle between two feature vectors.
pub fn cosine_identity(a: &FeatureVector, b: &FeatureVector) -> Result<f64> {
    cosine(&a.values, &b.values)
}

pub(crate) fn cosine(a: &DVector<f64>, b: &DVector<f64>) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::ShapeMismatch(format!("feature lengths {} and {}", a.len(), b.len())));
    }
    let (na, nb) = (a.norm(), b.norm());
    if na == 0.0 || nb == 0.0 {
        return Err(Error::UndefinedIdentity);
    }
    Ok((a.dot(b) / (na * nb)).clamp(-1.0, 1.0))
}

/// `mean + u · (head − mean)`.
pub fn exaggerate(mean: &MeanHead, head: &HeadMesh, u: f64) -> Result<HeadMesh> {
    head.ensure_same_connectivity(&mean.mesh)?;
    if !u.is_finite() {
        return Err(Error::Config(format!("exaggeration coefficient {u} is not finite")));
    }
    let coords = &mean.coords + (head.coords() - &mean.coords) * u;
    head.with_coords(coords.as_slice())
}

/// `mean + u1 · dG + u2 · dP`, the two-parameter control.
pub fn user_control_coords(
    mean: &MeanHead,
    d_g: &FeatureVector,
    d_p: &FeatureVector,
    u1: f64,
    u2: f64,
) -> Result<DVector<f64>> {
    let n = mean.coords.len();
    if d_g.len() != n || d_p.len() != n {
        return Err(Error::ShapeMismatch(format!(
            "feature lengths {} and {} for a mean head of length {n}",
            d_g.len(),
            d_p.len()
        )));
    }
    if !u1.is_finite() || !u2.is_finite() {
        return Err(Error::Config("control coefficients must be finite".into()));
    }
    let mut out = mean.coords.clone();
    out.axpy(u1, &d_g.values, 1.0);
    out.axpy(u2, &d_p.values, 1.0);
    Ok(out)
}

pub fn user_control(
    mean: &MeanHead,
    d_g: &FeatureVector,
    d_p: &FeatureVector,
    u1: f64,
    u2: f64,
) -> Result<HeadMesh> {
    let coords = user_control_coords(mean, d_g, d_p, u1, u2)?;
    mean.mesh.with_coords(coords.as_slice())
}

/// Clamps a slider value into [`CONTROL_RANGE`].
pub fn clamp_control(u: f64) -> f64 {
    u.clamp(CONTROL_RANGE.0, CONTROL_RANGE.1)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synth;
    use proptest::prelude::*;

    fn setup() -> (MeanHead, HeadMesh) {
        let base = synth::uv_sphere(5, 8, [1.0, 1.2, 0.9]).unwrap();
        let modes = synth::smooth_modes(&base, 3);
        let (heads, _) = synth::linear_corpus(&base, &modes, &[0.3, 0.2, 0.1], 1, 4).unwrap();
        (MeanHead::new(base), heads[0].clone())
    }

    #[test]
    fn feature_of_mean_is_zero() {
        let (mean, _) = setup();
        let f = feature_vector(mean.mesh(), &mean).unwrap();
        assert_eq!(f.norm(), 0.0);
        assert!(matches!(cosine_identity(&f, &f), Err(Error::UndefinedIdentity)));
    }

    #[test]
    fn feature_of_offset_head() {
        let (mean, _) = setup();
        let delta = DVector::from_fn(mean.coords().len(), |i, _| (i as f64 * 0.1).sin());
        let head = mean.mesh().with_coords((mean.coords() + &delta).as_slice()).unwrap();
        let f = feature_vector(&head, &mean).unwrap();
        assert!((f.values() - delta).abs().max() < 1e-15);
    }

    #[test]
    fn cosine_cases() {
        let v = FeatureVector::new(DVector::from_vec(vec![1.0, 2.0, 3.0]), FeatureSource::Other).unwrap();
        let w = FeatureVector::new(DVector::from_vec(vec![3.0, 0.0, -1.0]), FeatureSource::Other).unwrap();
        assert_eq!(cosine_identity(&v, &v).unwrap(), 1.0);
        assert_eq!(cosine_identity(&v, &v.scaled(-1.0)).unwrap(), -1.0);
        assert!(cosine_identity(&v, &w).unwrap().abs() < 1e-12);
    }

    #[test]
    fn exaggerate_endpoints() {
        let (mean, head) = setup();
        assert_eq!(exaggerate(&mean, &head, 0.0).unwrap().coords(), *mean.coords());
        let same = exaggerate(&mean, &head, 1.0).unwrap();
        assert!((same.coords() - head.coords()).abs().max() <= 4.0 * f64::EPSILON);
    }

    #[test]
    fn exaggerate_mismatch() {
        let (mean, _) = setup();
        let other = synth::uv_sphere(5, 9, [1.0; 3]).unwrap();
        assert!(matches!(exaggerate(&mean, &other, 1.0), Err(Error::ShapeMismatch(_))));
    }

    #[test]
    fn control_corners() {
        let (mean, head) = setup();
        let d_p = feature_vector_from(&head, &mean, FeatureSource::Reconstruction).unwrap();
        let d_g = d_p.scaled(1.7);
        let g = user_control(&mean, &d_g, &d_p, 1.0, 0.0).unwrap();
        assert_eq!(g.coords(), mean.coords() + d_g.values());
        let h = user_control(&mean, &d_g, &d_p, 0.0, 1.0).unwrap();
        assert_eq!(h.coords(), mean.coords() + d_p.values());
        let short = FeatureVector::new(DVector::zeros(3), FeatureSource::Other).unwrap();
        assert!(matches!(user_control(&mean, &short, &d_p, 1.0, 1.0), Err(Error::ShapeMismatch(_))));
    }

    proptest! {
        #[test]
        fn identity_and_magnitude_laws(u in 0.01f64..5.0) {
            let (mean, head) = setup();
            let base = feature_vector(&head, &mean).unwrap();
            let ex = feature_vector(&exaggerate(&mean, &head, u).unwrap(), &mean).unwrap();
            prop_assert!((cosine_identity(&ex, &base).unwrap() - 1.0).abs() < 1e-12);
            prop_assert!((ex.norm() - u * base.norm()).abs() < 1e-12);
            prop_assert!((ex.values() - base.values() * u).abs().max() < 1e-12);
        }

        #[test]
        fn control_reduces_to_single_coefficient(u1 in -1.0f64..2.0, u2 in -1.0f64..2.0) {
            let (mean, head) = setup();
            let d = feature_vector(&head, &mean).unwrap();
            let two = user_control(&mean, &d, &d, u1, u2).unwrap();
            let one = exaggerate(&mean, &head, u1 + u2).unwrap();
            prop_assert!((two.coords() - one.coords()).abs().max() < 1e-12);
        }

        #[test]
        fn control_is_affine(u1 in -1.0f64..2.0, u2 in -1.0f64..2.0) {
            let (mean, head) = setup();
            let d_p = feature_vector(&head, &mean).unwrap();
            let d_g = FeatureVector::new(
                DVector::from_fn(d_p.len(), |i, _| (i as f64).cos() * 0.05),
                FeatureSource::Generator,
            ).unwrap();
            let a = user_control_coords(&mean, &d_g, &d_p, u1, u2).unwrap();
            let b = user_control_coords(&mean, &d_g, &d_p, u1 + 1.0, u2).unwrap();
            prop_assert!(((b - a) - d_g.values()).abs().max() < 1e-12);
        }
    }
}
