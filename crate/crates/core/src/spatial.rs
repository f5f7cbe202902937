//! Nearest-neighbour queries over vertex sets and triangle surfaces.

use std::collections::{HashMap, HashSet};
use std::num::NonZeroUsize;

use kiddo::{ImmutableKdTree, SquaredEuclidean};
use nalgebra::Point3;

use crate::error::{Error, Result};
use crate::mesh::HeadMesh;

pub struct PointIndex {
    tree: ImmutableKdTree<f64, 3>,
}

impl PointIndex {
    pub fn new(points: &[Point3<f64>]) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::Registration("cannot index an empty point set".into()));
        }
        let entries: Vec<[f64; 3]> = points.iter().map(|p| [p.x, p.y, p.z]).collect();
        let tree = ImmutableKdTree::new_from_slice(&entries)
            .map_err(|e| Error::Registration(format!("k-d tree construction failed: {e:?}")))?;
        Ok(Self { tree })
    }

    /// Index of the nearest indexed point and the Euclidean distance to it.
    pub fn nearest(&self, q: &Point3<f64>) -> (usize, f64) {
        let hit = self
            .tree
            .query(&[q.x, q.y, q.z])
            .nearest_one::<SquaredEuclidean<f64>>()
            .execute();
        (hit.item as usize, hit.distance.max(0.0).sqrt())
    }

    /// Up to `k` nearest indexed points, closest first.
    pub fn nearest_k(&self, q: &Point3<f64>, k: usize) -> Vec<usize> {
        let Some(k) = NonZeroUsize::new(k) else {
            return Vec::new();
        };
        self.tree
            .query(&[q.x, q.y, q.z])
            .nearest_n::<SquaredEuclidean<f64>>(k)
            .execute()
            .into_iter()
            .map(|hit| hit.item as usize)
            .collect()
    }
}

/// Closest point on triangle `abc` to `p`.
pub fn closest_point_on_triangle(p: &Point3<f64>, a: &Point3<f64>, b: &Point3<f64>, c: &Point3<f64>) -> Point3<f64> {
    let (ab, ac, ap) = (b - a, c - a, p - a);
    let (d1, d2) = (ab.dot(&ap), ac.dot(&ap));
    if d1 <= 0.0 && d2 <= 0.0 {
        return *a;
    }
    let bp = p - b;
    let (d3, d4) = (ab.dot(&bp), ac.dot(&bp));
    if d3 >= 0.0 && d4 <= d3 {
        return *b;
    }
    let vc = d1 * d4 - d3 * d2;
    if vc <= 0.0 && d1 >= 0.0 && d3 <= 0.0 {
        return a + ab * (d1 / (d1 - d3));
    }
    let cp = p - c;
    let (d5, d6) = (ab.dot(&cp), ac.dot(&cp));
    if d6 >= 0.0 && d5 <= d6 {
        return *c;
    }
    let vb = d5 * d2 - d1 * d6;
    if vb <= 0.0 && d2 >= 0.0 && d6 <= 0.0 {
        return a + ac * (d2 / (d2 - d6));
    }
    let va = d3 * d6 - d5 * d4;
    if va <= 0.0 && d4 - d3 >= 0.0 && d5 - d6 >= 0.0 {
        return b + (c - b) * ((d4 - d3) / ((d4 - d3) + (d5 - d6)));
    }
    let denom = 1.0 / (va + vb + vc);
    a + ab * (vb * denom) + ac * (vc * denom)
}

/// Closest-point queries against a mesh surface. Candidate triangles are
/// those incident to the few nearest vertices; a mesh without faces
/// degrades to nearest-vertex lookup.
pub struct SurfaceIndex {
    points: PointIndex,
    vertices: Vec<Point3<f64>>,
    faces: Vec<[usize; 3]>,
    vertex_faces: Vec<Vec<usize>>,
    boundary_edges: HashSet<(usize, usize)>,
    boundary_vertex: Vec<bool>,
}

/// Result of a closest-point query.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SurfaceHit {
    pub point: Point3<f64>,
    pub distance: f64,
    /// The hit lies on an open border of the surface.
    pub on_boundary: bool,
}

fn segment_distance(p: &Point3<f64>, a: &Point3<f64>, b: &Point3<f64>) -> f64 {
    let ab = b - a;
    let t = ((p - a).dot(&ab) / ab.norm_squared().max(f64::MIN_POSITIVE)).clamp(0.0, 1.0);
    (p - (a + ab * t)).norm()
}

const SURFACE_CANDIDATES: usize = 6;

impl SurfaceIndex {
    pub fn new(mesh: &HeadMesh) -> Result<Self> {
        let mut vertex_faces = vec![Vec::new(); mesh.n_vertices()];
        let mut edge_count: HashMap<(usize, usize), usize> = HashMap::new();
        for (f, tri) in mesh.faces().iter().enumerate() {
            for k in 0..3 {
                vertex_faces[tri[k]].push(f);
                let (a, b) = (tri[k], tri[(k + 1) % 3]);
                *edge_count.entry((a.min(b), a.max(b))).or_default() += 1;
            }
        }
        let boundary_edges: HashSet<(usize, usize)> =
            edge_count.into_iter().filter(|&(_, c)| c == 1).map(|(e, _)| e).collect();
        let mut boundary_vertex = vec![false; mesh.n_vertices()];
        for &(a, b) in &boundary_edges {
            boundary_vertex[a] = true;
            boundary_vertex[b] = true;
        }
        Ok(Self {
            points: PointIndex::new(mesh.vertices())?,
            vertices: mesh.vertices().to_vec(),
            faces: mesh.faces().to_vec(),
            vertex_faces,
            boundary_edges,
            boundary_vertex,
        })
    }

    /// Closest surface point, its distance, and whether it sits on a border.
    pub fn closest(&self, q: &Point3<f64>) -> SurfaceHit {
        let (nearest, d) = self.points.nearest(q);
        if self.faces.is_empty() {
            return SurfaceHit {
                point: self.vertices[nearest],
                distance: d,
                on_boundary: false,
            };
        }
        let mut best = (self.vertices[nearest], d, None);
        let mut seen: Vec<usize> = Vec::new();
        for v in self.points.nearest_k(q, SURFACE_CANDIDATES) {
            for &f in &self.vertex_faces[v] {
                if seen.contains(&f) {
                    continue;
                }
                seen.push(f);
                let [a, b, c] = self.faces[f];
                let p = closest_point_on_triangle(q, &self.vertices[a], &self.vertices[b], &self.vertices[c]);
                let dist = (p - q).norm();
                if dist < best.1 {
                    best = (p, dist, Some(f));
                }
            }
        }
        let (point, distance, face) = best;
        let on_boundary = match face {
            None => self.boundary_vertex[nearest],
            Some(f) => {
                let tri = self.faces[f];
                let scale = (0..3)
                    .map(|k| (self.vertices[tri[k]] - self.vertices[tri[(k + 1) % 3]]).norm())
                    .fold(0.0, f64::max);
                let eps = 1e-9 * scale;
                (0..3).any(|k| {
                    let (a, b) = (tri[k], tri[(k + 1) % 3]);
                    self.boundary_edges.contains(&(a.min(b), a.max(b)))
                        && segment_distance(&point, &self.vertices[a], &self.vertices[b]) <= eps
                }) || tri
                    .iter()
                    .any(|&v| self.boundary_vertex[v] && (point - self.vertices[v]).norm() <= eps)
            }
        };
        SurfaceHit {
            point,
            distance,
            on_boundary,
        }
    }
}
