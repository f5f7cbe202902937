use std::time::Instant;

use carimorph_core::mesh::HeadMesh;
use carimorph_core::registration::{nicp_register, CorrespondenceMode, LandmarkPair, NicpConfig};
use carimorph_core::synth;
use nalgebra::{Point3, Rotation3, Vector3};

const LANDMARK_VERTICES: [usize; 5] = [0, 39, 960, 1880, 1919];

fn template() -> HeadMesh {
    synth::face_patch(40, 48).unwrap()
}

fn rmse(a: &[Point3<f64>], b: &[Point3<f64>]) -> f64 {
    (a.iter().zip(b).map(|(p, q)| (p - q).norm_squared()).sum::<f64>() / a.len() as f64).sqrt()
}

fn pairs(target: &HeadMesh) -> Vec<LandmarkPair> {
    LANDMARK_VERTICES
        .iter()
        .map(|&v| LandmarkPair {
            vertex: v,
            target: target.vertices()[v],
        })
        .collect()
}

fn rotated(mesh: &HeadMesh, degrees: f64) -> HeadMesh {
    let rot = Rotation3::from_axis_angle(&nalgebra::Unit::new_normalize(Vector3::new(0.3, 1.0, 0.2)), degrees.to_radians());
    let c = mesh.centroid();
    mesh.with_vertices(mesh.vertices().iter().map(|p| c + rot * (p - c)).collect()).unwrap()
}

#[test]
fn bend_is_recovered() {
    let t = template();
    assert!(t.n_vertices() <= 2000);
    let diag = t.bbox_diagonal();
    let target = synth::bend(&t, 0.05 * diag).unwrap();
    let start = Instant::now();
    let res = nicp_register(&t, &target, &pairs(&target), &NicpConfig::default()).unwrap();
    let elapsed = start.elapsed();
    let truth = rmse(res.deformed_template.vertices(), target.vertices());
    let nearest = *res.residual_trace.last().unwrap();
    eprintln!("bend: truth rmse {:.3e}, nearest rmse {:.3e}, diag {diag:.3}, {elapsed:?}", truth, nearest);
    assert!(nearest < 0.01 * diag);
    assert!(truth < 0.01 * diag);
    assert!(elapsed.as_secs_f64() < 30.0);
    assert_eq!(res.deformed_template.faces(), t.faces());
    assert!(res.residual_trace.iter().all(|r| r.is_finite()));
}

#[test]
fn objective_never_increases_within_a_step() {
    let t = template();
    let target = synth::bend(&t, 0.05 * t.bbox_diagonal()).unwrap();
    let res = nicp_register(&t, &target, &pairs(&target), &NicpConfig::default()).unwrap();
    for (k, trace) in res.objective_trace.iter().enumerate() {
        for w in trace.windows(2) {
            assert!(w[1] <= w[0] * (1.0 + 1e-12) + 1e-15, "step {k}: {:?}", trace);
        }
    }
}

#[test]
fn rigid_rotation_is_recovered() {
    let t = template();
    let target = rotated(&t, 10.0);
    let res = nicp_register(&t, &target, &pairs(&target), &NicpConfig::default()).unwrap();
    let nearest = *res.residual_trace.last().unwrap();
    eprintln!("rotation: nearest rmse {nearest:.3e}, trace {:?}", res.residual_trace);
    assert!(nearest < 1e-4 * t.bbox_diagonal());
}

#[test]
fn small_rotation_converges_without_landmark_start() {
    let t = template();
    let target = rotated(&t, 5.0);
    let cfg = NicpConfig {
        landmark_init: false,
        ..NicpConfig::default()
    };
    let res = nicp_register(&t, &target, &pairs(&target), &cfg).unwrap();
    assert!(*res.residual_trace.last().unwrap() < 1e-4 * t.bbox_diagonal());
}

#[test]
fn surface_correspondences_recover_rotation() {
    let t = template();
    let target = rotated(&t, 30.0);
    let cfg = NicpConfig {
        correspondence: CorrespondenceMode::Surface,
        ..NicpConfig::default()
    };
    let res = nicp_register(&t, &target, &pairs(&target), &cfg).unwrap();
    assert!(*res.residual_trace.last().unwrap() < 1e-4 * t.bbox_diagonal());
}

#[test]
fn infinite_stiffness_is_rigid() {
    let t = synth::face_patch(20, 24).unwrap();
    let target = rotated(&t, 3.0);
    let res = nicp_register(&t, &target, &[], &NicpConfig::single_step(1e8, 0.0)).unwrap();
    let (a, b) = (t.vertices(), res.deformed_template.vertices());
    let mut worst: f64 = 0.0;
    for i in (0..a.len()).step_by(7) {
        for j in (i + 1..a.len()).step_by(11) {
            let d0 = (a[i] - a[j]).norm();
            worst = worst.max(((b[i] - b[j]).norm() - d0).abs() / d0);
        }
    }
    eprintln!("rigidity: worst relative distance change {worst:.3e}");
    assert!(worst < 1e-3);
}

#[test]
fn identity_is_optimal_without_landmarks() {
    let t = template();
    let cfg = NicpConfig {
        landmark_weight_schedule: vec![0.0; 8],
        ..NicpConfig::default()
    };
    let res = nicp_register(&t, &t, &[], &cfg).unwrap();
    assert!(res.max_solver_residual < 1e-10, "{}", res.max_solver_residual);
    assert!(rmse(res.deformed_template.vertices(), t.vertices()) < 1e-10);
}
