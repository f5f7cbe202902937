//! Regenerates the files under `tests/fixtures`.
//!
//! `cargo run -p carimorph --example make_fixtures`

use std::fs;
use std::path::Path;

use carimorph_core::mesh::save_mesh;
use carimorph_core::registration::LandmarkPair;
use carimorph_core::synth;
use carimorph_core::texture::{save_ply, ProjectionMatrix, VertexColorMap};
use nalgebra::DVector;

fn main() -> anyhow::Result<()> {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures");
    let corpus_dir = dir.join("corpus");
    fs::create_dir_all(&corpus_dir)?;

    let base = synth::uv_sphere(6, 10, [0.5, 0.62, 0.45])?;
    let modes = synth::smooth_modes(&base, 5);
    let (corpus, _) = synth::linear_corpus(&base, &modes, &[0.12, 0.09, 0.07, 0.05, 0.03], 12, 21)?;
    for (i, m) in corpus.iter().enumerate() {
        save_mesh(m, corpus_dir.join(format!("cari_{i:02}.obj")))?;
    }
    save_mesh(&base, dir.join("mean_head.obj"))?;

    let offset = |w: [f64; 3]| -> DVector<f64> {
        let mut c = base.coords();
        for (k, s) in w.iter().enumerate() {
            c.axpy(*s, &modes[k], 1.0);
        }
        c
    };
    let head = base.with_coords(offset([0.03, -0.02, 0.01]).as_slice())?;
    let cari = base.with_coords(offset([0.08, -0.05, 0.02]).as_slice())?;
    save_mesh(&head, dir.join("head.obj"))?;
    save_mesh(&cari, dir.join("caricature.obj"))?;

    // colors observed on the upper half of the caricature only
    let (lo, hi) = cari.bounding_box();
    let mid = 0.5 * (lo.y + hi.y);
    let colors: Vec<[f64; 3]> = cari
        .vertices()
        .iter()
        .map(|p| [0.5 + 0.4 * p.x, 0.45 + 0.3 * p.y, 0.6 - 0.2 * p.z])
        .collect();
    let known: Vec<bool> = cari.vertices().iter().map(|p| p.y > mid).collect();
    save_ply(&cari, &VertexColorMap::new(colors, known)?, dir.join("partial.ply"))?;

    // 2-D landmarks of the head under an affine camera, pixels with y down
    let camera = ProjectionMatrix::affine([300.0, 20.0, 10.0, 256.0], [-15.0, -290.0, 30.0, 256.0])?;
    let mut lm = String::from("# vertex x y\n");
    for v in [0, 7, 13, 22, 31, 38, 44, 51, 57, base.n_vertices() - 1] {
        let [x, y] = camera.project(&head.vertices()[v]);
        lm.push_str(&format!("{v} {x:.3} {y:.3}\n"));
    }
    fs::write(dir.join("landmarks_2d.txt"), lm)?;

    let template = synth::face_patch(12, 14)?;
    let target = synth::bend(&template, 0.05 * template.bbox_diagonal())?;
    save_mesh(&template, dir.join("template.obj"))?;
    save_mesh(&target, dir.join("target.obj"))?;
    let n = template.n_vertices();
    let pairs: Vec<LandmarkPair> = [0, 11, n / 2 + 6, n - 12, n - 1]
        .into_iter()
        .map(|v| LandmarkPair {
            vertex: v,
            target: target.vertices()[v],
        })
        .collect();
    let mut text = String::from("# template_vertex x y z\n");
    for p in &pairs {
        text.push_str(&format!("{} {:.16e} {:.16e} {:.16e}\n", p.vertex, p.target.x, p.target.y, p.target.z));
    }
    fs::write(dir.join("landmarks_3d.txt"), text)?;

    fs::write(
        dir.join("tallies.csv"),
        "photo_id,candidate_id,votes\n\
         p1,ours,22\np1,alive,6\np1,deformation,5\np1,cari_gan,4\np1,warp_gan,3\n\
         p2,ours,18\np2,alive,9\np2,deformation,4\np2,cari_gan,6\np2,warp_gan,3\n\
         p3,ours,40\np3,alive,0\np3,deformation,0\np3,cari_gan,0\np3,warp_gan,0\n",
    )?;
    fs::write(dir.join("toy.conf"), "# short run for tests\nsteps = 40\nbatch_size = 16\nseed = 5\n")?;
    println!("fixtures written to {}", dir.display());
    Ok(())
}
