//! Harmonic fill of unknown vertex colors and variance-matched noise.

use nalgebra::DMatrix;
use nalgebra_sparse::factorization::CscCholesky;
use nalgebra_sparse::{CooMatrix, CscMatrix};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use super::VertexColorMap;
use crate::error::{Error, Result};
use crate::mesh::graph::{components, rcm_order};
use crate::mesh::HeadMesh;

/// Fills unknown colors with the discrete harmonic extension of the known
/// ones under the uniform graph Laplacian. Known colors are copied
/// unchanged; the mask is carried over.
pub fn complete_vertex_colors(mesh: &HeadMesh, partial: &VertexColorMap) -> Result<VertexColorMap> {
    let n = mesh.n_vertices();
    if partial.len() != n {
        return Err(Error::ShapeMismatch(format!("{} colors for {n} vertices", partial.len())));
    }
    let known = partial.known_mask();
    if !known.iter().any(|&k| k) {
        return Err(Error::Boundary("no known colors to complete from".into()));
    }
    let adjacency = mesh.adjacency();

    // each unknown region must touch a known vertex
    let unknown_adjacency: Vec<Vec<usize>> = (0..n)
        .map(|v| {
            if known[v] {
                Vec::new()
            } else {
                adjacency[v].iter().copied().filter(|&u| !known[u]).collect()
            }
        })
        .collect();
    for comp in components(&unknown_adjacency) {
        if known[comp[0]] {
            continue;
        }
        if !comp.iter().any(|&v| adjacency[v].iter().any(|&u| known[u])) {
            return Err(Error::Boundary(format!(
                "{} unknown vertices (including {}) are not connected to any known color",
                comp.len(),
                comp[0]
            )));
        }
    }

    let order: Vec<usize> = rcm_order(&unknown_adjacency).into_iter().filter(|&v| !known[v]).collect();
    if order.is_empty() {
        return Ok(partial.clone());
    }
    let mut slot = vec![usize::MAX; n];
    for (k, &v) in order.iter().enumerate() {
        slot[v] = k;
    }
    let m = order.len();
    let mut coo = CooMatrix::new(m, m);
    let mut rhs = DMatrix::zeros(m, 3);
    let colors = partial.colors();
    for (row, &v) in order.iter().enumerate() {
        coo.push(row, row, adjacency[v].len() as f64);
        for &u in &adjacency[v] {
            if known[u] {
                for c in 0..3 {
                    rhs[(row, c)] += colors[u][c];
                }
            } else {
                coo.push(row, slot[u], -1.0);
            }
        }
    }
    let laplacian = CscMatrix::from(&coo);
    let chol = CscCholesky::factor(&laplacian)
        .map_err(|e| Error::Solver(format!("Laplacian factorization failed: {e}")))?;
    let solution = chol.solve(&rhs);
    if !solution.iter().all(|v| v.is_finite()) {
        return Err(Error::Solver("harmonic completion produced non-finite colors".into()));
    }

    let mut out = colors.to_vec();
    for (row, &v) in order.iter().enumerate() {
        out[v] = [solution[(row, 0)], solution[(row, 1)], solution[(row, 2)]];
    }
    VertexColorMap::new(out, known.to_vec())
}

/// Per-channel population variance of the known colors.
fn known_variance(map: &VertexColorMap) -> [f64; 3] {
    let picked: Vec<&[f64; 3]> = map.colors().iter().zip(map.known_mask()).filter(|(_, &k)| k).map(|(c, _)| c).collect();
    let n = picked.len() as f64;
    let mut var = [0.0; 3];
    for (ch, v) in var.iter_mut().enumerate() {
        let mean = picked.iter().map(|c| c[ch]).sum::<f64>() / n;
        *v = picked.iter().map(|c| (c[ch] - mean).powi(2)).sum::<f64>() / n;
    }
    var
}

/// Adds zero-mean Gaussian noise with the known region's per-channel
/// variance to every unknown vertex, then clamps to `[0, 1]`.
pub fn add_matched_noise_with(filled: &VertexColorMap, rng: &mut impl Rng) -> Result<VertexColorMap> {
    if filled.known_count() == 0 {
        return Err(Error::Boundary("no known colors to measure variance from".into()));
    }
    let var = known_variance(filled);
    let normals: Vec<Option<Normal<f64>>> = var
        .iter()
        .map(|&v| if v > 0.0 { Normal::new(0.0, v.sqrt()).ok() } else { None })
        .collect();
    let mut colors = filled.colors().to_vec();
    for (c, &k) in colors.iter_mut().zip(filled.known_mask()) {
        if k {
            continue;
        }
        for ch in 0..3 {
            if let Some(dist) = &normals[ch] {
                c[ch] += dist.sample(rng);
            }
        }
    }
    VertexColorMap::new(colors, filled.known_mask().to_vec())
}

/// [`add_matched_noise_with`] driven by a ChaCha8 stream seeded from `seed`.
pub fn add_matched_noise(filled: &VertexColorMap, seed: u64) -> Result<VertexColorMap> {
    add_matched_noise_with(filled, &mut ChaCha8Rng::seed_from_u64(seed))
}
