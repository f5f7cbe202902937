use carimorph_core::mesh::HeadMesh;
use carimorph_core::synth;
use carimorph_core::texture::{complete_vertex_colors, estimate_projection, ProjectionMatrix, VertexColorMap};
use nalgebra::{DMatrix, Point3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

fn sphere500() -> HeadMesh {
    let m = synth::uv_sphere(20, 25, [0.9, 1.1, 1.0]).unwrap();
    assert!((490..=510).contains(&m.n_vertices()));
    m
}

fn random_map(n: usize, rng: &mut ChaCha8Rng) -> VertexColorMap {
    let known: Vec<bool> = (0..n).map(|_| rng.random_bool(0.2)).collect();
    let colors = (0..n).map(|_| [rng.random(), rng.random(), rng.random()]).collect();
    VertexColorMap::new(colors, known).unwrap()
}

/// Dense solve of the same Dirichlet problem.
fn dense_oracle(mesh: &HeadMesh, map: &VertexColorMap) -> Vec<[f64; 3]> {
    let adjacency = mesh.adjacency();
    let known = map.known_mask();
    let unknown: Vec<usize> = (0..mesh.n_vertices()).filter(|&v| !known[v]).collect();
    let mut index = vec![usize::MAX; mesh.n_vertices()];
    for (k, &v) in unknown.iter().enumerate() {
        index[v] = k;
    }
    let m = unknown.len();
    let mut a = DMatrix::zeros(m, m);
    let mut b = DMatrix::zeros(m, 3);
    for (row, &v) in unknown.iter().enumerate() {
        a[(row, row)] = adjacency[v].len() as f64;
        for &u in &adjacency[v] {
            if known[u] {
                for c in 0..3 {
                    b[(row, c)] += map.colors()[u][c];
                }
            } else {
                a[(row, index[u])] -= 1.0;
            }
        }
    }
    let x = a.lu().solve(&b).unwrap();
    let mut out = map.colors().to_vec();
    for (row, &v) in unknown.iter().enumerate() {
        out[v] = [x[(row, 0)], x[(row, 1)], x[(row, 2)]];
    }
    out
}

#[test]
fn completion_matches_dense_oracle() {
    let mesh = sphere500();
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    for _ in 0..5 {
        let map = random_map(mesh.n_vertices(), &mut rng);
        let sparse = complete_vertex_colors(&mesh, &map).unwrap();
        let dense = dense_oracle(&mesh, &map);
        for (a, b) in sparse.colors().iter().zip(&dense) {
            for c in 0..3 {
                assert!((a[c] - b[c]).abs() < 1e-8);
            }
        }
    }
}

#[test]
fn maximum_principle_and_boundary_preservation() {
    let mesh = sphere500();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for _ in 0..100 {
        let map = random_map(mesh.n_vertices(), &mut rng);
        let out = complete_vertex_colors(&mesh, &map).unwrap();
        for c in 0..3 {
            let knowns = map.colors().iter().zip(map.known_mask()).filter(|(_, &k)| k).map(|(v, _)| v[c]);
            let (lo, hi) = knowns.fold((f64::INFINITY, f64::NEG_INFINITY), |(l, h), v| (l.min(v), h.max(v)));
            assert!(out.colors().iter().all(|v| v[c] >= lo - 1e-10 && v[c] <= hi + 1e-10));
        }
        for ((a, b), &k) in out.colors().iter().zip(map.colors()).zip(map.known_mask()) {
            if k {
                assert_eq!(a.map(f64::to_bits), b.map(f64::to_bits));
            }
        }
    }
}

#[test]
fn completion_is_linear() {
    let mesh = sphere500();
    let n = mesh.n_vertices();
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let first = random_map(n, &mut rng);
    let second_colors: Vec<[f64; 3]> = (0..n).map(|_| [rng.random(), rng.random(), rng.random()]).collect();
    let second = VertexColorMap::new(second_colors, first.known_mask().to_vec()).unwrap();
    let (alpha, beta) = (0.3, 0.6);
    let mixed: Vec<[f64; 3]> = first
        .colors()
        .iter()
        .zip(second.colors())
        .map(|(a, b)| [0, 1, 2].map(|c| alpha * a[c] + beta * b[c]))
        .collect();
    let mixed = VertexColorMap::new(mixed, first.known_mask().to_vec()).unwrap();
    let lhs = complete_vertex_colors(&mesh, &mixed).unwrap();
    let (f, s) = (complete_vertex_colors(&mesh, &first).unwrap(), complete_vertex_colors(&mesh, &second).unwrap());
    for ((l, a), b) in lhs.colors().iter().zip(f.colors()).zip(s.colors()) {
        for c in 0..3 {
            assert!((l[c] - (alpha * a[c] + beta * b[c])).abs() < 1e-9);
        }
    }
}

#[test]
fn projection_under_pixel_noise() {
    let camera = ProjectionMatrix::affine([410.0, 25.0, -12.0, 320.0], [-18.0, -395.0, 40.0, 250.0]).unwrap();
    let noise = Normal::new(0.0, 1.0).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    let mut worst: f64 = 0.0;
    for _ in 0..100 {
        let pts: Vec<Point3<f64>> = (0..12)
            .map(|_| Point3::new(rng.random_range(-0.5..0.5), rng.random_range(-0.6..0.6), rng.random_range(-0.3..0.3)))
            .collect();
        let clean: Vec<[f64; 2]> = pts.iter().map(|p| camera.project(p)).collect();
        let noisy: Vec<[f64; 2]> = clean.iter().map(|q| [q[0] + noise.sample(&mut rng), q[1] + noise.sample(&mut rng)]).collect();
        let fit = estimate_projection(&pts, &noisy).unwrap();
        worst = worst.max(fit.rms_reprojection_error);
    }
    assert!(worst <= 2.0, "worst RMSE {worst}");
}
