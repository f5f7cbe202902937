//! Photo-to-head texturing.
//!
//! Two routes are supported. Projection texturing fits an affine camera
//! to landmark correspondences and uses the photo itself as the texture
//! image via per-vertex UVs. Vertex-color completion takes colors known on
//! the front of the face and fills the rest of the head harmonically, then
//! adds noise matching the front-face variance.
//!
//! Image coordinates are pixels with the origin at the top-left and `y`
//! pointing down.

mod complete;
mod io;

pub use complete::{add_matched_noise, add_matched_noise_with, complete_vertex_colors};
pub use io::{load_ply, parse_ply, save_ply, write_ply, write_uv_obj};

use nalgebra::{DMatrix, DVector, Matrix3, Matrix3x4, Point3, Vector3};

use crate::error::{Error, Result};
use crate::mesh::HeadMesh;

/// Minimum number of landmark pairs for a projection fit.
pub const MIN_PROJECTION_POINTS: usize = 6;

/// A 3×4 camera matrix taking homogeneous 3-D points to homogeneous pixels.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProjectionMatrix {
    m: Matrix3x4<f64>,
}

impl ProjectionMatrix {
    pub fn new(m: Matrix3x4<f64>) -> Result<Self> {
        if !m.iter().all(|v| v.is_finite()) {
            return Err(Error::DegenerateConfiguration("projection matrix is not finite".into()));
        }
        let block: Matrix3<f64> = m.fixed_view::<3, 3>(0, 0).into_owned();
        let sv = block.singular_values();
        if sv[1] <= 1e-12 * sv[0].max(f64::MIN_POSITIVE) {
            return Err(Error::DegenerateConfiguration(
                "projection matrix has rank below 2 in its 3x3 block".into(),
            ));
        }
        Ok(Self { m })
    }

    /// Affine camera from its two image rows; the third row is `(0, 0, 0, 1)`.
    pub fn affine(row_x: [f64; 4], row_y: [f64; 4]) -> Result<Self> {
        Self::new(Matrix3x4::new(
            row_x[0], row_x[1], row_x[2], row_x[3], row_y[0], row_y[1], row_y[2], row_y[3], 0.0, 0.0, 0.0, 1.0,
        ))
    }

    pub fn matrix(&self) -> &Matrix3x4<f64> {
        &self.m
    }

    /// Pixel position of `p`.
    pub fn project(&self, p: &Point3<f64>) -> [f64; 2] {
        let h = self.m * p.to_homogeneous();
        [h[0] / h[2], h[1] / h[2]]
    }

    /// Unit direction from the camera into the scene: `row_x × row_y` of the
    /// 3×3 block, which for a `y`-down image points away from the viewer.
    pub fn viewing_direction(&self) -> Vector3<f64> {
        let r1 = Vector3::new(self.m[(0, 0)], self.m[(0, 1)], self.m[(0, 2)]);
        let r2 = Vector3::new(self.m[(1, 0)], self.m[(1, 1)], self.m[(1, 2)]);
        r1.cross(&r2).normalize()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProjectionFit {
    pub matrix: ProjectionMatrix,
    /// Mean Euclidean reprojection error in pixels.
    pub mean_reprojection_error: f64,
    pub rms_reprojection_error: f64,
}

/// Least-squares affine camera from 3-D / 2-D landmark pairs.
pub fn estimate_projection(points3d: &[Point3<f64>], points2d: &[[f64; 2]]) -> Result<ProjectionFit> {
    if points3d.len() != points2d.len() {
        return Err(Error::ShapeMismatch(format!(
            "{} 3-D points but {} image points",
            points3d.len(),
            points2d.len()
        )));
    }
    let n = points3d.len();
    if n < MIN_PROJECTION_POINTS {
        return Err(Error::DegenerateConfiguration(format!(
            "projection needs at least {MIN_PROJECTION_POINTS} correspondences, got {n}"
        )));
    }
    if !points3d.iter().all(|p| p.coords.iter().all(|v| v.is_finite()))
        || !points2d.iter().flatten().all(|v| v.is_finite())
    {
        return Err(Error::DegenerateConfiguration("non-finite landmark coordinates".into()));
    }

    // normalise the 3-D side for conditioning
    let centroid = points3d.iter().fold(Vector3::zeros(), |a, p| a + p.coords) / n as f64;
    let mut cov = Matrix3::zeros();
    for p in points3d {
        let d = p.coords - centroid;
        cov += d * d.transpose();
    }
    let eig = cov.symmetric_eigenvalues();
    if !(eig.max() > 0.0) || eig.min() <= 1e-12 * eig.max() {
        return Err(Error::DegenerateConfiguration("3-D landmarks are coplanar or collinear".into()));
    }
    let scale = (eig.sum() / n as f64).sqrt();

    let design = DMatrix::from_fn(n, 4, |i, j| {
        if j == 3 {
            1.0
        } else {
            (points3d[i].coords[j] - centroid[j]) / scale
        }
    });
    let svd = design.svd(true, true);
    let mut rows = [[0.0; 4]; 2];
    for (axis, row) in rows.iter_mut().enumerate() {
        let b = DVector::from_iterator(n, points2d.iter().map(|q| q[axis]));
        let sol = svd
            .solve(&b, 1e-14)
            .map_err(|e| Error::DegenerateConfiguration(format!("projection solve failed: {e}")))?;
        // undo the normalisation: u = a·(p − c)/s + t
        let a = Vector3::new(sol[0], sol[1], sol[2]) / scale;
        *row = [a.x, a.y, a.z, sol[3] - a.dot(&centroid)];
    }
    let matrix = ProjectionMatrix::affine(rows[0], rows[1])?;
    let errors: Vec<f64> = points3d
        .iter()
        .zip(points2d)
        .map(|(p, q)| {
            let r = matrix.project(p);
            ((r[0] - q[0]).powi(2) + (r[1] - q[1]).powi(2)).sqrt()
        })
        .collect();
    Ok(ProjectionFit {
        matrix,
        mean_reprojection_error: errors.iter().sum::<f64>() / n as f64,
        rms_reprojection_error: (errors.iter().map(|e| e * e).sum::<f64>() / n as f64).sqrt(),
    })
}

/// Per-vertex texture coordinates into the photo.
#[derive(Debug, Clone, PartialEq)]
pub struct UvCoords {
    pub uv: Vec<[f64; 2]>,
    /// False where the vertex projects outside the image or faces away.
    pub valid: Vec<bool>,
}

impl UvCoords {
    pub fn len(&self) -> usize {
        self.uv.len()
    }

    pub fn is_empty(&self) -> bool {
        self.uv.is_empty()
    }

    pub fn valid_count(&self) -> usize {
        self.valid.iter().filter(|&&v| v).count()
    }
}

/// Projects every vertex and normalises by the image size.
pub fn compute_uv(mesh: &HeadMesh, projection: &ProjectionMatrix, image_size: (u32, u32)) -> Result<UvCoords> {
    let (w, h) = image_size;
    if w == 0 || h == 0 {
        return Err(Error::Config(format!("image size {w}x{h} must be positive")));
    }
    let (w, h) = (w as f64, h as f64);
    let view = projection.viewing_direction();
    let normals = mesh.vertex_normals();
    let mut uv = Vec::with_capacity(mesh.n_vertices());
    let mut valid = Vec::with_capacity(mesh.n_vertices());
    for (p, n) in mesh.vertices().iter().zip(&normals) {
        let [x, y] = projection.project(p);
        let inside = (0.0..=w).contains(&x) && (0.0..=h).contains(&y);
        // vertices without faces carry a zero normal and are not culled
        let facing = n.dot(&view) <= 0.0;
        uv.push([x / w, y / h]);
        valid.push(inside && facing && x.is_finite() && y.is_finite());
    }
    Ok(UvCoords { uv, valid })
}

/// Per-vertex RGB in `[0, 1]` plus which entries are observed.
#[derive(Debug, Clone, PartialEq)]
pub struct VertexColorMap {
    colors: Vec<[f64; 3]>,
    known: Vec<bool>,
}

impl VertexColorMap {
    /// Colors are clamped into `[0, 1]`; non-finite values are rejected.
    pub fn new(colors: Vec<[f64; 3]>, known: Vec<bool>) -> Result<Self> {
        if colors.len() != known.len() {
            return Err(Error::ShapeMismatch(format!(
                "{} colors but {} mask entries",
                colors.len(),
                known.len()
            )));
        }
        if !colors.iter().flatten().all(|v| v.is_finite()) {
            return Err(Error::Config("vertex colors must be finite".into()));
        }
        let colors = colors.into_iter().map(|c| c.map(|v| v.clamp(0.0, 1.0))).collect();
        Ok(Self { colors, known })
    }

    /// All vertices observed.
    pub fn fully_known(colors: Vec<[f64; 3]>) -> Result<Self> {
        let n = colors.len();
        Self::new(colors, vec![true; n])
    }

    pub fn colors(&self) -> &[[f64; 3]] {
        &self.colors
    }

    pub fn known_mask(&self) -> &[bool] {
        &self.known
    }

    pub fn len(&self) -> usize {
        self.colors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.colors.is_empty()
    }

    pub fn known_count(&self) -> usize {
        self.known.iter().filter(|&&k| k).count()
    }
}

/// Builds a partial color map by sampling the photo at every valid UV.
/// `sample` receives pixel coordinates and returns RGB in `[0, 1]`.
pub fn colors_from_uv(uv: &UvCoords, image_size: (u32, u32), mut sample: impl FnMut(f64, f64) -> [f64; 3]) -> Result<VertexColorMap> {
    let (w, h) = (image_size.0 as f64, image_size.1 as f64);
    let colors = uv
        .uv
        .iter()
        .zip(&uv.valid)
        .map(|(t, &ok)| if ok { sample(t[0] * w, t[1] * h) } else { [0.0; 3] })
        .collect();
    VertexColorMap::new(colors, uv.valid.clone())
}
