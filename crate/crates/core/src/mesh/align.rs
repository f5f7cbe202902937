use nalgebra::{Matrix3, Point3, Vector3};

use super::{HeadMesh, LandmarkIndexSet};
use crate::error::{Error, Result};
use crate::spatial::PointIndex;

/// Similarity transform `x -> scale * rotation * x + translation`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RigidTransform {
    rotation: Matrix3<f64>,
    translation: Vector3<f64>,
    scale: f64,
}

impl Default for RigidTransform {
    fn default() -> Self {
        Self::identity()
    }
}

impl RigidTransform {
    pub fn new(rotation: Matrix3<f64>, translation: Vector3<f64>, scale: f64) -> Result<Self> {
        let ortho = (rotation.transpose() * rotation - Matrix3::identity()).abs().max();
        if ortho > 1e-10 || (rotation.determinant() - 1.0).abs() > 1e-10 {
            return Err(Error::Config("rotation is not a proper orthogonal matrix".into()));
        }
        if !(scale > 0.0 && scale.is_finite()) || !translation.iter().all(|t| t.is_finite()) {
            return Err(Error::Config(format!("invalid scale {scale} or translation")));
        }
        Ok(Self {
            rotation,
            translation,
            scale,
        })
    }

    pub fn identity() -> Self {
        Self {
            rotation: Matrix3::identity(),
            translation: Vector3::zeros(),
            scale: 1.0,
        }
    }

    pub fn rotation(&self) -> &Matrix3<f64> {
        &self.rotation
    }

    pub fn translation(&self) -> &Vector3<f64> {
        &self.translation
    }

    pub fn scale(&self) -> f64 {
        self.scale
    }

    pub fn apply(&self, p: &Point3<f64>) -> Point3<f64> {
        Point3::from(self.scale * (self.rotation * p.coords) + self.translation)
    }

    pub fn apply_mesh(&self, mesh: &HeadMesh) -> Result<HeadMesh> {
        mesh.with_vertices(mesh.vertices().iter().map(|p| self.apply(p)).collect())
    }

    /// `self ∘ other`: applies `other` first.
    pub fn compose(&self, other: &RigidTransform) -> RigidTransform {
        RigidTransform {
            rotation: self.rotation * other.rotation,
            translation: self.scale * (self.rotation * other.translation) + self.translation,
            scale: self.scale * other.scale,
        }
    }

    pub fn inverse(&self) -> RigidTransform {
        let rt = self.rotation.transpose();
        RigidTransform {
            rotation: rt,
            translation: -(rt * self.translation) / self.scale,
            scale: 1.0 / self.scale,
        }
    }
}

/// Moves the centroid to the origin and scales the bounding-box diagonal to 1.
pub fn center_and_scale(mesh: &HeadMesh) -> Result<(HeadMesh, RigidTransform)> {
    if mesh.n_vertices() < 2 {
        return Err(Error::DegenerateGeometry("need at least two vertices".into()));
    }
    let diag = mesh.bbox_diagonal();
    if !(diag > f64::MIN_POSITIVE) {
        return Err(Error::DegenerateGeometry("all vertices coincide".into()));
    }
    let scale = 1.0 / diag;
    let t = RigidTransform {
        rotation: Matrix3::identity(),
        translation: -scale * mesh.centroid().coords,
        scale,
    };
    Ok((t.apply_mesh(mesh)?, t))
}

/// Weighted least-squares similarity transform mapping `src` onto `dst`
/// (Umeyama's closed form; uniform weights when `weights` is `None`).
pub fn umeyama(src: &[Point3<f64>], dst: &[Point3<f64>], weights: Option<&[f64]>) -> Result<RigidTransform> {
    if src.len() != dst.len() {
        return Err(Error::ShapeMismatch(format!("{} vs {} points", src.len(), dst.len())));
    }
    if src.len() < 3 {
        return Err(Error::DegenerateConfiguration(format!(
            "need at least 3 correspondences, got {}",
            src.len()
        )));
    }
    let w: Vec<f64> = match weights {
        Some(w) if w.len() == src.len() => w.to_vec(),
        Some(w) => {
            return Err(Error::ShapeMismatch(format!("{} weights for {} points", w.len(), src.len())))
        }
        None => vec![1.0; src.len()],
    };
    let total: f64 = w.iter().sum();
    if !(total > 0.0) {
        return Err(Error::DegenerateConfiguration("weights sum to zero".into()));
    }

    let mu_s = src.iter().zip(&w).fold(Vector3::zeros(), |a, (p, wi)| a + p.coords * *wi) / total;
    let mu_d = dst.iter().zip(&w).fold(Vector3::zeros(), |a, (p, wi)| a + p.coords * *wi) / total;

    let mut cross = Matrix3::zeros();
    let mut scatter = Matrix3::zeros();
    let mut var_s = 0.0;
    for ((s, d), wi) in src.iter().zip(dst).zip(&w) {
        let a = s.coords - mu_s;
        let b = d.coords - mu_d;
        cross += (b * a.transpose()) * *wi;
        scatter += (a * a.transpose()) * *wi;
        var_s += wi * a.norm_squared();
    }
    cross /= total;
    var_s /= total;

    let mut spread = scatter.symmetric_eigenvalues().iter().copied().collect::<Vec<_>>();
    spread.sort_by(|a, b| b.total_cmp(a));
    if !(spread[0] > 0.0) || spread[1] <= 1e-12 * spread[0] {
        return Err(Error::DegenerateConfiguration(
            "source correspondences are coincident or collinear".into(),
        ));
    }

    let svd = cross.svd(true, true);
    let (u, v_t) = (svd.u.unwrap(), svd.v_t.unwrap());
    let mut signs = Vector3::new(1.0, 1.0, 1.0);
    if (u * v_t).determinant() < 0.0 {
        // flip the axis paired with the smallest singular value
        let (k, _) = svd
            .singular_values
            .iter()
            .enumerate()
            .min_by(|a, b| a.1.total_cmp(b.1))
            .unwrap();
        signs[k] = -1.0;
    }
    let rotation = u * Matrix3::from_diagonal(&signs) * v_t;
    let scale = svd.singular_values.component_mul(&signs).sum() / var_s;
    if !(scale > 0.0) {
        return Err(Error::DegenerateConfiguration("non-positive scale estimate".into()));
    }
    let translation = mu_d - scale * (rotation * mu_s);
    Ok(RigidTransform {
        rotation,
        translation,
        scale,
    })
}

#[derive(Debug, Clone, Copy)]
pub struct AlignOptions {
    /// Nearest-vertex ICP refinement iterations after the landmark fit; 0 disables.
    pub icp_iterations: usize,
    /// Stop when the residual improves by less than this.
    pub tolerance: f64,
    /// Relative weight of the landmark term during refinement.
    pub landmark_weight: f64,
}

impl Default for AlignOptions {
    fn default() -> Self {
        Self {
            icp_iterations: 20,
            tolerance: 1e-9,
            landmark_weight: 1.0,
        }
    }
}

#[derive(Debug, Clone)]
pub struct Alignment {
    pub mesh: HeadMesh,
    pub transform: RigidTransform,
    /// Landmark RMSE of the final transform.
    pub landmark_rmse: f64,
    /// Refinement objective (landmark term plus nearest-vertex term, as an
    /// RMS value) after the landmark fit and after each accepted ICP step.
    pub residual_trace: Vec<f64>,
}

/// Aligns `source` to `target`: closed-form similarity fit on the landmark
/// correspondences, then optional nearest-vertex ICP over all vertices with
/// the landmark pairs kept in the objective.
pub fn rigid_align(
    source: &HeadMesh,
    target: &HeadMesh,
    landmarks: &LandmarkIndexSet,
    options: &AlignOptions,
) -> Result<Alignment> {
    source.ensure_same_connectivity(target)?;
    landmarks.validate_for(source.n_vertices())?;
    let src_lm: Vec<Point3<f64>> = landmarks.indices().iter().map(|&i| source.vertices()[i]).collect();
    let dst_lm: Vec<Point3<f64>> = landmarks.indices().iter().map(|&i| target.vertices()[i]).collect();
    let mut transform = umeyama(&src_lm, &dst_lm, None)?;

    let mut trace = Vec::new();
    if options.icp_iterations > 0 {
        let index = PointIndex::new(target.vertices())?;
        let n_l = src_lm.len() as f64;
        let n_v = source.n_vertices() as f64;
        let objective = |t: &RigidTransform| -> (f64, Vec<Point3<f64>>) {
            let lm: f64 = src_lm
                .iter()
                .zip(&dst_lm)
                .map(|(s, d)| (t.apply(s) - d).norm_squared())
                .sum::<f64>()
                / n_l;
            let mut matched = Vec::with_capacity(source.n_vertices());
            let mut vt = 0.0;
            for p in source.vertices() {
                let q = t.apply(p);
                let (j, dist) = index.nearest(&q);
                vt += dist * dist;
                matched.push(target.vertices()[j]);
            }
            ((options.landmark_weight * lm + vt / n_v).sqrt(), matched)
        };

        let (mut current, mut matched) = objective(&transform);
        trace.push(current);
        let mut src_pts = src_lm.clone();
        src_pts.extend_from_slice(source.vertices());
        let mut weights = vec![options.landmark_weight / n_l; src_lm.len()];
        weights.extend(std::iter::repeat_n(1.0 / n_v, source.n_vertices()));
        for _ in 0..options.icp_iterations {
            let mut dst_pts = dst_lm.clone();
            dst_pts.extend_from_slice(&matched);
            let candidate = umeyama(&src_pts, &dst_pts, Some(&weights))?;
            let (value, next_matched) = objective(&candidate);
            if value > current {
                break;
            }
            transform = candidate;
            matched = next_matched;
            trace.push(value);
            let gain = current - value;
            current = value;
            if gain < options.tolerance {
                break;
            }
        }
    }

    let landmark_rmse = (src_lm
        .iter()
        .zip(&dst_lm)
        .map(|(s, d)| (transform.apply(s) - d).norm_squared())
        .sum::<f64>()
        / src_lm.len() as f64)
        .sqrt();
    Ok(Alignment {
        mesh: transform.apply_mesh(source)?,
        transform,
        landmark_rmse,
        residual_trace: trace,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synth;
    use nalgebra::Rotation3;

    fn head() -> HeadMesh {
        synth::uv_sphere(10, 16, [1.0, 1.3, 0.9]).unwrap()
    }

    fn key_landmarks(m: &HeadMesh) -> LandmarkIndexSet {
        let n = m.n_vertices();
        LandmarkIndexSet::key([3, n / 3, n / 2, 2 * n / 3, n - 4]).unwrap()
    }

    #[test]
    fn identity_for_normalized_mesh() {
        let (m, _) = center_and_scale(&head()).unwrap();
        let (again, t) = center_and_scale(&m).unwrap();
        assert!((t.scale() - 1.0).abs() < 1e-12);
        assert!(t.translation().norm() < 1e-12);
        for (a, b) in again.vertices().iter().zip(m.vertices()) {
            assert!((a - b).norm() < 1e-12);
        }
    }

    #[test]
    fn translation_is_recorded() {
        let (m, _) = center_and_scale(&head()).unwrap();
        let shifted = RigidTransform::new(Matrix3::identity(), Vector3::new(5.0, 0.0, 0.0), 1.0)
            .unwrap()
            .apply_mesh(&m)
            .unwrap();
        let (out, t) = center_and_scale(&shifted).unwrap();
        assert!((t.translation() - Vector3::new(-5.0, 0.0, 0.0)).norm() < 1e-12);
        assert!((t.scale() - 1.0).abs() < 1e-12);
        for (a, b) in out.vertices().iter().zip(m.vertices()) {
            assert!((a - b).norm() < 1e-12);
        }
    }

    #[test]
    fn normalization_postconditions() {
        let m = synth::uv_sphere(8, 12, [3.0, 2.0, 7.0]).unwrap();
        let m = RigidTransform::new(Matrix3::identity(), Vector3::new(1.0, -4.0, 2.5), 3.0)
            .unwrap()
            .apply_mesh(&m)
            .unwrap();
        let (out, t) = center_and_scale(&m).unwrap();
        assert!(out.centroid().coords.norm() < 1e-12);
        assert!((out.bbox_diagonal() - 1.0).abs() < 1e-12);
        let applied = t.apply_mesh(&m).unwrap();
        for (a, b) in applied.vertices().iter().zip(out.vertices()) {
            assert!((a - b).norm() < 1e-12);
        }
    }

    #[test]
    fn coincident_vertices_are_degenerate() {
        let m = HeadMesh::point_cloud(vec![Point3::new(1.0, 1.0, 1.0); 4]).unwrap();
        assert!(matches!(center_and_scale(&m), Err(Error::DegenerateGeometry(_))));
    }

    #[test]
    fn self_alignment_is_identity() {
        let m = head();
        let a = rigid_align(&m, &m, &key_landmarks(&m), &AlignOptions::default()).unwrap();
        assert!((a.transform.rotation() - Matrix3::identity()).abs().max() < 1e-12);
        assert!(a.transform.translation().norm() < 1e-12);
        assert!(a.landmark_rmse < 1e-12);
    }

    #[test]
    fn recovers_rotation_and_translation() {
        let m = head();
        let rot = Rotation3::from_axis_angle(&Vector3::z_axis(), 30f64.to_radians()).into_inner();
        let truth = RigidTransform::new(rot, Vector3::new(0.4, -1.2, 2.0), 1.0).unwrap();
        let target = truth.apply_mesh(&m).unwrap();
        let a = rigid_align(&m, &target, &key_landmarks(&m), &AlignOptions::default()).unwrap();
        assert!((a.transform.rotation() - rot).abs().max() < 1e-8);
        assert!((a.transform.translation() - truth.translation()).abs().max() < 1e-8);
        assert!(a.landmark_rmse < 1e-10);
    }

    #[test]
    fn recovers_scale() {
        let m = head();
        let truth = RigidTransform::new(Matrix3::identity(), Vector3::zeros(), 2.0).unwrap();
        let target = truth.apply_mesh(&m).unwrap();
        let a = rigid_align(&m, &target, &key_landmarks(&m), &AlignOptions::default()).unwrap();
        assert!((a.transform.scale() - 2.0).abs() < 1e-8);
    }

    #[test]
    fn collinear_landmarks_rejected() {
        let pts: Vec<Point3<f64>> = (0..6).map(|i| Point3::new(i as f64, 0.0, 0.0)).collect();
        let m = HeadMesh::point_cloud(pts).unwrap();
        let lm = LandmarkIndexSet::new(vec![0, 2, 4]).unwrap();
        let err = rigid_align(&m, &m, &lm, &AlignOptions::default()).unwrap_err();
        assert!(matches!(err, Error::DegenerateConfiguration(_)));
        let two = LandmarkIndexSet::new(vec![0, 1]).unwrap();
        assert!(rigid_align(&m, &m, &two, &AlignOptions::default()).is_err());
    }

    #[test]
    fn refinement_trace_is_monotone() {
        let m = head();
        let mut target = m.clone();
        // perturb the target so landmark fit and ICP disagree
        let verts: Vec<Point3<f64>> = target
            .vertices()
            .iter()
            .enumerate()
            .map(|(i, p)| p + Vector3::new(0.03 * (i as f64 * 1.7).sin(), 0.02 * (i as f64).cos(), 0.0))
            .collect();
        target = target.with_vertices(verts).unwrap();
        let rot = Rotation3::from_axis_angle(&Vector3::x_axis(), 0.3).into_inner();
        let target = RigidTransform::new(rot, Vector3::new(0.1, 0.2, 0.3), 1.1)
            .unwrap()
            .apply_mesh(&target)
            .unwrap();
        let a = rigid_align(&m, &target, &key_landmarks(&m), &AlignOptions::default()).unwrap();
        assert!(a.residual_trace.len() >= 2);
        for w in a.residual_trace.windows(2) {
            assert!(w[1] <= w[0]);
        }
    }

    #[test]
    fn compose_and_inverse() {
        let rot = Rotation3::from_euler_angles(0.1, 0.2, 0.3).into_inner();
        let t = RigidTransform::new(rot, Vector3::new(1.0, 2.0, 3.0), 1.7).unwrap();
        let id = t.compose(&t.inverse());
        let p = Point3::new(0.3, -0.2, 5.0);
        assert!((id.apply(&p) - p).norm() < 1e-12);
    }
}
