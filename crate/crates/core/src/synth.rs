//! Synthetic heads and shape corpora.
//!
//! These stand in for scanned or reconstructed meshes in tests, the toy
//! trainer and the example fixtures. Everything is deterministic given a seed.

use std::f64::consts::PI;

use nalgebra::{DVector, Point3, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::mesh::HeadMesh;

/// Closed ellipsoid with `rings` latitude rings of `segments` vertices each,
/// plus two poles: `rings * segments + 2` vertices.
pub fn uv_sphere(rings: usize, segments: usize, radii: [f64; 3]) -> Result<HeadMesh> {
    if rings < 1 || segments < 3 {
        return Err(Error::Config("uv sphere needs >= 1 ring and >= 3 segments".into()));
    }
    let mut vertices = Vec::with_capacity(rings * segments + 2);
    vertices.push(Point3::new(0.0, radii[1], 0.0));
    for r in 0..rings {
        let theta = PI * (r + 1) as f64 / (rings + 1) as f64;
        for s in 0..segments {
            let phi = 2.0 * PI * s as f64 / segments as f64;
            vertices.push(Point3::new(
                radii[0] * theta.sin() * phi.cos(),
                radii[1] * theta.cos(),
                radii[2] * theta.sin() * phi.sin(),
            ));
        }
    }
    vertices.push(Point3::new(0.0, -radii[1], 0.0));
    let south = vertices.len() - 1;
    let ring = |r: usize, s: usize| 1 + r * segments + s % segments;

    let mut faces = Vec::new();
    for s in 0..segments {
        faces.push([0, ring(0, s + 1), ring(0, s)]);
    }
    for r in 0..rings - 1 {
        for s in 0..segments {
            let (a, b, c, d) = (ring(r, s), ring(r, s + 1), ring(r + 1, s), ring(r + 1, s + 1));
            faces.push([a, b, d]);
            faces.push([a, d, c]);
        }
    }
    for s in 0..segments {
        faces.push([south, ring(rings - 1, s), ring(rings - 1, s + 1)]);
    }
    HeadMesh::new(vertices, faces)
}

/// Open rectangular grid in the z = 0 plane spanning `[-w/2, w/2] x [-h/2, h/2]`,
/// `nx * ny` vertices.
pub fn grid(nx: usize, ny: usize, width: f64, height: f64) -> Result<HeadMesh> {
    if nx < 2 || ny < 2 {
        return Err(Error::Config("grid needs at least 2x2 vertices".into()));
    }
    let mut vertices = Vec::with_capacity(nx * ny);
    for j in 0..ny {
        for i in 0..nx {
            vertices.push(Point3::new(
                width * (i as f64 / (nx - 1) as f64 - 0.5),
                height * (j as f64 / (ny - 1) as f64 - 0.5),
                0.0,
            ));
        }
    }
    let mut faces = Vec::with_capacity(2 * (nx - 1) * (ny - 1));
    for j in 0..ny - 1 {
        for i in 0..nx - 1 {
            let a = j * nx + i;
            faces.push([a, a + 1, a + nx + 1]);
            faces.push([a, a + nx + 1, a + nx]);
        }
    }
    HeadMesh::new(vertices, faces)
}

/// Front-facing "face" patch: a grid bulged into a shallow dome, so vertex
/// normals point roughly along +z.
pub fn face_patch(nx: usize, ny: usize) -> Result<HeadMesh> {
    let g = grid(nx, ny, 1.0, 1.2)?;
    let verts = g
        .vertices()
        .iter()
        .map(|p| Point3::new(p.x, p.y, 0.35 * (1.0 - 1.6 * p.x * p.x - 1.1 * p.y * p.y)))
        .collect();
    g.with_vertices(verts)
}

/// `k` smooth, low-frequency displacement fields over the mesh, each scaled
/// to unit Euclidean norm. Displacements follow the vertex normals.
pub fn smooth_modes(mesh: &HeadMesh, k: usize) -> Vec<DVector<f64>> {
    let normals = mesh.vertex_normals();
    let (lo, hi) = mesh.bounding_box();
    let extent = hi - lo;
    let unit = |p: &Point3<f64>| -> Vector3<f64> {
        Vector3::from_fn(|c, _| if extent[c] > 0.0 { 2.0 * (p[c] - lo[c]) / extent[c] - 1.0 } else { 0.0 })
    };
    (0..k)
        .map(|m| {
            let (fx, fy, fz) = ((m % 3 + 1) as f64, ((m / 3) % 3 + 1) as f64, (m / 9 + 1) as f64);
            let phase = 0.7 * m as f64;
            let mut v = DVector::zeros(3 * mesh.n_vertices());
            for (i, p) in mesh.vertices().iter().enumerate() {
                let q = unit(p);
                let a = (0.5 * PI * fx * q.x + phase).cos()
                    * (0.5 * PI * fy * q.y - 0.3 * phase).cos()
                    * (0.5 * PI * fz * q.z + 0.1 * m as f64).cos();
                let n = if normals[i].norm() > 0.0 { normals[i] } else { q.normalize() };
                // a small tangential term keeps modes with equal normal profiles independent
                let t = Vector3::new((m as f64 + 1.0).sin(), (m as f64 + 2.0).cos(), 0.3) * (0.15 * a * q.y);
                let d = n * a + t;
                v[3 * i] = d.x;
                v[3 * i + 1] = d.y;
                v[3 * i + 2] = d.z;
            }
            let norm = v.norm();
            if norm > 0.0 {
                v /= norm;
            }
            v
        })
        .collect()
}

/// Draws `n` meshes `base + Σ_j z_j * scales[j] * modes[j]` with `z ~ N(0, 1)`.
/// Returns the meshes and the latent codes.
pub fn linear_corpus(
    base: &HeadMesh,
    modes: &[DVector<f64>],
    scales: &[f64],
    n: usize,
    seed: u64,
) -> Result<(Vec<HeadMesh>, Vec<DVector<f64>>)> {
    if modes.len() != scales.len() {
        return Err(Error::Dimension(format!("{} modes, {} scales", modes.len(), scales.len())));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let base_coords = base.coords();
    let mut meshes = Vec::with_capacity(n);
    let mut codes = Vec::with_capacity(n);
    for _ in 0..n {
        let z = DVector::from_iterator(modes.len(), (0..modes.len()).map(|_| rng.sample::<f64, _>(StandardNormal)));
        let mut c = base_coords.clone();
        for (j, m) in modes.iter().enumerate() {
            c.axpy(z[j] * scales[j], m, 1.0);
        }
        meshes.push(base.with_coords(c.as_slice())?);
        codes.push(z);
    }
    Ok((meshes, codes))
}

/// Low-frequency sinusoidal bend along the x extent, displacing along z by
/// `amplitude` (absolute units) at its peak.
pub fn bend(mesh: &HeadMesh, amplitude: f64) -> Result<HeadMesh> {
    let (lo, hi) = mesh.bounding_box();
    let (w, h) = ((hi.x - lo.x).max(1e-300), (hi.y - lo.y).max(1e-300));
    let verts = mesh
        .vertices()
        .iter()
        .map(|p| {
            let u = (p.x - lo.x) / w;
            let v = (p.y - lo.y) / h;
            p + Vector3::new(0.0, 0.0, amplitude * (PI * u).sin() * (0.5 * PI * v + 0.3).cos())
        })
        .collect();
    mesh.with_vertices(verts)
}

/// Standard-normal vector of length `n`.
pub fn gaussian_vector(rng: &mut impl Rng, n: usize) -> DVector<f64> {
    DVector::from_iterator(n, (0..n).map(|_| rng.sample::<f64, _>(StandardNormal)))
}
