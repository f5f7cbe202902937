//! Fixed-connectivity triangle meshes, OBJ interchange, landmarks and
//! similarity alignment.
//!
//! Every head in the pipeline (training caricatures, the mean head, a
//! reconstructed head and its generated caricature) shares one vertex
//! ordering and one face list. Shape-space code therefore treats a mesh
//! as a flat coordinate vector `[x0, y0, z0, x1, ...]` of length `3 * n_v`
//! and checks connectivity before combining two meshes.

mod align;
pub(crate) mod graph;
mod landmarks;
mod obj;

pub use align::{center_and_scale, rigid_align, umeyama, AlignOptions, Alignment, RigidTransform};
pub use landmarks::{load_landmarks, LandmarkIndexSet, KEY_LANDMARK_LABELS};
pub use obj::{load_mesh, load_obj, parse_obj, save_mesh, write_obj, ObjData};

use std::collections::BTreeSet;

use nalgebra::{DVector, Point3, Vector3};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct HeadMesh {
    vertices: Vec<Point3<f64>>,
    faces: Vec<[usize; 3]>,
    uvs: Option<Vec<[f64; 2]>>,
}

impl HeadMesh {
    /// Builds a mesh, checking face indices, face degeneracy and finiteness.
    pub fn new(vertices: Vec<Point3<f64>>, faces: Vec<[usize; 3]>) -> Result<Self> {
        let n_v = vertices.len();
        if let Some(i) = vertices.iter().position(|p| !p.coords.iter().all(|c| c.is_finite())) {
            return Err(Error::InvalidMesh(format!("vertex {i} has a non-finite coordinate")));
        }
        for (fi, f) in faces.iter().enumerate() {
            if let Some(&bad) = f.iter().find(|&&i| i >= n_v) {
                return Err(Error::InvalidMesh(format!(
                    "face {fi} references vertex {bad}, mesh has {n_v} vertices"
                )));
            }
            if f[0] == f[1] || f[1] == f[2] || f[0] == f[2] {
                return Err(Error::InvalidMesh(format!("face {fi} repeats a vertex: {f:?}")));
            }
        }
        Ok(Self {
            vertices,
            faces,
            uvs: None,
        })
    }

    /// A mesh without faces.
    pub fn point_cloud(vertices: Vec<Point3<f64>>) -> Result<Self> {
        Self::new(vertices, Vec::new())
    }

    /// Rebuilds a mesh from a flat coordinate vector and a face list.
    pub fn from_coords(coords: &[f64], faces: Vec<[usize; 3]>) -> Result<Self> {
        if !coords.len().is_multiple_of(3) {
            return Err(Error::Dimension(format!(
                "coordinate vector length {} is not a multiple of 3",
                coords.len()
            )));
        }
        let vertices = coords
            .chunks_exact(3)
            .map(|c| Point3::new(c[0], c[1], c[2]))
            .collect();
        Self::new(vertices, faces)
    }

    pub fn with_uvs(mut self, uvs: Vec<[f64; 2]>) -> Result<Self> {
        if uvs.len() != self.vertices.len() {
            return Err(Error::ShapeMismatch(format!(
                "{} texture coordinates for {} vertices",
                uvs.len(),
                self.vertices.len()
            )));
        }
        self.uvs = Some(uvs);
        Ok(self)
    }

    pub fn n_vertices(&self) -> usize {
        self.vertices.len()
    }

    pub fn vertices(&self) -> &[Point3<f64>] {
        &self.vertices
    }

    pub fn faces(&self) -> &[[usize; 3]] {
        &self.faces
    }

    pub fn uvs(&self) -> Option<&[[f64; 2]]> {
        self.uvs.as_deref()
    }

    /// Flat coordinate vector of length `3 * n_v`.
    pub fn coords(&self) -> DVector<f64> {
        DVector::from_iterator(
            3 * self.vertices.len(),
            self.vertices.iter().flat_map(|p| [p.x, p.y, p.z]),
        )
    }

    /// Same connectivity (and texture coordinates), new vertex positions.
    pub fn with_coords(&self, coords: &[f64]) -> Result<Self> {
        if coords.len() != 3 * self.vertices.len() {
            return Err(Error::ShapeMismatch(format!(
                "coordinate vector of length {} for a mesh with {} vertices",
                coords.len(),
                self.vertices.len()
            )));
        }
        let mut out = Self::from_coords(coords, self.faces.clone())?;
        out.uvs = self.uvs.clone();
        Ok(out)
    }

    pub fn with_vertices(&self, vertices: Vec<Point3<f64>>) -> Result<Self> {
        if vertices.len() != self.vertices.len() {
            return Err(Error::ShapeMismatch(format!(
                "{} vertices for a mesh with {}",
                vertices.len(),
                self.vertices.len()
            )));
        }
        let mut out = Self::new(vertices, self.faces.clone())?;
        out.uvs = self.uvs.clone();
        Ok(out)
    }

    pub fn same_connectivity(&self, other: &HeadMesh) -> bool {
        self.vertices.len() == other.vertices.len() && self.faces == other.faces
    }

    pub fn ensure_same_connectivity(&self, other: &HeadMesh) -> Result<()> {
        if self.vertices.len() != other.vertices.len() {
            return Err(Error::ShapeMismatch(format!(
                "vertex count {} vs {}",
                self.vertices.len(),
                other.vertices.len()
            )));
        }
        if self.faces != other.faces {
            return Err(Error::ShapeMismatch("face lists differ".into()));
        }
        Ok(())
    }

    /// Unique undirected edges `(a, b)` with `a < b`, in sorted order.
    pub fn edges(&self) -> Vec<(usize, usize)> {
        let mut set = BTreeSet::new();
        for f in &self.faces {
            for k in 0..3 {
                let (a, b) = (f[k], f[(k + 1) % 3]);
                set.insert((a.min(b), a.max(b)));
            }
        }
        set.into_iter().collect()
    }

    /// Per-vertex neighbour lists derived from the face list.
    pub fn adjacency(&self) -> Vec<Vec<usize>> {
        let mut adj = vec![Vec::new(); self.vertices.len()];
        for (a, b) in self.edges() {
            adj[a].push(b);
            adj[b].push(a);
        }
        adj
    }

    pub fn centroid(&self) -> Point3<f64> {
        let n = self.vertices.len().max(1) as f64;
        let sum = self
            .vertices
            .iter()
            .fold(Vector3::zeros(), |acc, p| acc + p.coords);
        Point3::from(sum / n)
    }

    /// Axis-aligned bounding box as `(min, max)`.
    pub fn bounding_box(&self) -> (Point3<f64>, Point3<f64>) {
        let mut lo = Point3::new(f64::INFINITY, f64::INFINITY, f64::INFINITY);
        let mut hi = Point3::new(f64::NEG_INFINITY, f64::NEG_INFINITY, f64::NEG_INFINITY);
        for p in &self.vertices {
            for k in 0..3 {
                lo[k] = lo[k].min(p[k]);
                hi[k] = hi[k].max(p[k]);
            }
        }
        (lo, hi)
    }

    pub fn bbox_diagonal(&self) -> f64 {
        if self.vertices.is_empty() {
            return 0.0;
        }
        let (lo, hi) = self.bounding_box();
        (hi - lo).norm()
    }

    /// Area-weighted vertex normals; zero for vertices in no face.
    pub fn vertex_normals(&self) -> Vec<Vector3<f64>> {
        let mut normals = vec![Vector3::zeros(); self.vertices.len()];
        for f in &self.faces {
            let [a, b, c] = f.map(|i| self.vertices[i]);
            let n = (b - a).cross(&(c - a));
            for &i in f {
                normals[i] += n;
            }
        }
        for n in &mut normals {
            let len = n.norm();
            if len > 0.0 {
                *n /= len;
            }
        }
        normals
    }

    /// Uniform graph Laplacian magnitude per vertex: `|v_i - mean(neighbours)|`.
    pub fn laplacian_magnitudes(&self) -> Vec<f64> {
        self.adjacency()
            .iter()
            .enumerate()
            .map(|(i, nbrs)| {
                if nbrs.is_empty() {
                    return 0.0;
                }
                let avg = nbrs
                    .iter()
                    .fold(Vector3::zeros(), |acc, &j| acc + self.vertices[j].coords)
                    / nbrs.len() as f64;
                (self.vertices[i].coords - avg).norm()
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tri() -> Vec<Point3<f64>> {
        vec![
            Point3::new(0.0, 0.0, 0.0),
            Point3::new(1.0, 0.0, 0.0),
            Point3::new(0.0, 1.0, 0.0),
        ]
    }

    #[test]
    fn rejects_out_of_range_face() {
        let err = HeadMesh::new(tri(), vec![[0, 1, 3]]).unwrap_err();
        assert!(matches!(err, Error::InvalidMesh(_)));
    }

    #[test]
    fn rejects_degenerate_face() {
        assert!(HeadMesh::new(tri(), vec![[0, 1, 1]]).is_err());
    }

    #[test]
    fn rejects_nan() {
        let mut v = tri();
        v[2].y = f64::NAN;
        assert!(HeadMesh::point_cloud(v).is_err());
    }

    #[test]
    fn coords_round_trip() {
        let m = HeadMesh::new(tri(), vec![[0, 1, 2]]).unwrap();
        let c = m.coords();
        assert_eq!(c.len(), 9);
        assert_eq!(m.with_coords(c.as_slice()).unwrap(), m);
    }

    #[test]
    fn edges_are_unique() {
        let v = vec![
            Point3::new(0.0, 0.0, 0.0),
            Point3::new(1.0, 0.0, 0.0),
            Point3::new(1.0, 1.0, 0.0),
            Point3::new(0.0, 1.0, 0.0),
        ];
        let m = HeadMesh::new(v, vec![[0, 1, 2], [0, 2, 3]]).unwrap();
        assert_eq!(m.edges(), vec![(0, 1), (0, 2), (0, 3), (1, 2), (2, 3)]);
        let n = m.vertex_normals();
        assert!((n[0] - Vector3::z()).norm() < 1e-15);
    }
}
