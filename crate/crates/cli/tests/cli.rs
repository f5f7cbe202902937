use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use carimorph_core::mesh::load_mesh;
use carimorph_core::texture::load_ply;

fn fixtures() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures")
}

fn fx(name: &str) -> String {
    fixtures().join(name).display().to_string()
}

fn carimorph(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_carimorph"))
        .args(args)
        .env_remove("CARIMORPH_LOG")
        .output()
        .expect("binary runs")
}

fn ok(args: &[&str]) -> Output {
    let out = carimorph(args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

fn path_str(p: &Path) -> String {
    p.display().to_string()
}

/// Runs every stage into `dir` and returns the produced files.
fn pipeline(dir: &Path) -> Vec<PathBuf> {
    let p = |name: &str| path_str(&dir.join(name));
    ok(&["pca", "build", "--in", &fx("corpus"), "-d", "5", "--out", &p("model.cpca")]);
    let info = ok(&["pca", "info", "--model", &p("model.cpca")]);
    std::fs::write(dir.join("info.json"), &info.stdout).unwrap();
    ok(&["pca", "encode", "--model", &p("model.cpca"), "--mesh", &fx("caricature.obj"), "--out", &p("coeffs.txt")]);
    ok(&["pca", "decode", "--model", &p("model.cpca"), "--coeffs", &p("coeffs.txt"), "--out", &p("decoded.obj")]);
    #[rustfmt::skip]
    ok(&[
        "exaggerate", "--model", &p("model.cpca"), "--mean", &fx("mean_head.obj"), "--head", &fx("head.obj"),
        "--cari", &fx("caricature.obj"), "--u1", "1.2", "--u2", "0.4", "--out", &p("exaggerated.obj"),
    ]);
    ok(&["exaggerate", "--mean", &fx("mean_head.obj"), "--head", &fx("head.obj"), "--u", "2.5", "--out", &p("scaled.obj")]);
    #[rustfmt::skip]
    ok(&[
        "texture", "project", "--mesh", &fx("head.obj"), "--landmarks", &fx("landmarks_2d.txt"),
        "--width", "512", "--height", "512", "--apply-to", &p("exaggerated.obj"), "--out", &p("textured.obj"),
    ]);
    #[rustfmt::skip]
    ok(&[
        "texture", "complete", "--mesh", &fx("caricature.obj"), "--colors", &fx("partial.ply"),
        "--seed", "3", "--out", &p("completed.ply"),
    ]);
    ok(&["score", "--tallies", &fx("tallies.csv"), "--out", &p("scores.csv")]);
    #[rustfmt::skip]
    ok(&[
        "register", "--template", &fx("template.obj"), "--target", &fx("target.obj"),
        "--landmarks", &fx("landmarks_3d.txt"), "--out", &p("registered.obj"), "--trace", &p("register.csv"),
    ]);
    let toy = ok(&["train-toy", "--config", &fx("toy.conf"), "--seed", "9", "--trace", &p("toy.csv")]);
    std::fs::write(dir.join("toy.json"), &toy.stdout).unwrap();
    [
        "model.cpca",
        "model.cpca.json",
        "info.json",
        "coeffs.txt",
        "decoded.obj",
        "exaggerated.obj",
        "scaled.obj",
        "textured.obj",
        "completed.ply",
        "scores.csv",
        "registered.obj",
        "register.csv",
        "toy.csv",
        "toy.json",
    ]
    .iter()
    .map(|n| dir.join(n))
    .collect()
}

#[test]
fn pipeline_is_byte_stable() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let first = pipeline(a.path());
    let second = pipeline(b.path());
    for (x, y) in first.iter().zip(&second) {
        let bx = std::fs::read(x).unwrap();
        let by = std::fs::read(y).unwrap();
        assert!(!bx.is_empty(), "{} is empty", x.display());
        // the provenance line names the corpus paths, which are the same in both runs
        assert_eq!(bx, by, "{} differs between runs", x.file_name().unwrap().to_string_lossy());
    }

    let dir = a.path();
    let decoded = load_mesh(dir.join("decoded.obj")).unwrap();
    let cari = load_mesh(fixtures().join("caricature.obj")).unwrap();
    let err: f64 = decoded
        .vertices()
        .iter()
        .zip(cari.vertices())
        .map(|(p, q)| (p - q).norm_squared())
        .sum::<f64>()
        .sqrt();
    assert!(err < 1e-8 * cari.coords().norm(), "caricature lies in the model span, error {err}");

    let info: serde_json::Value = serde_json::from_slice(&std::fs::read(dir.join("info.json")).unwrap()).unwrap();
    assert_eq!(info["n_v"], 62);
    assert_eq!(info["d"], 5);

    let scores = std::fs::read_to_string(dir.join("scores.csv")).unwrap();
    assert!(scores.starts_with("photo_id,candidate_id,score\n"));
    assert!(scores.lines().any(|l| l == "p3,ours,4"), "{scores}");
    assert!(scores.lines().any(|l| l == "p3,alive,-1"), "{scores}");

    let (_, completed) = load_ply(dir.join("completed.ply")).unwrap();
    let (_, partial) = load_ply(fixtures().join("partial.ply")).unwrap();
    for i in 0..partial.len() {
        if partial.known_mask()[i] {
            assert_eq!(completed.colors()[i], partial.colors()[i]);
        }
    }

    let textured = std::fs::read_to_string(dir.join("textured.obj")).unwrap();
    assert_eq!(textured.lines().filter(|l| l.starts_with("vt ")).count(), 62);

    let toy = std::fs::read_to_string(dir.join("toy.csv")).unwrap();
    assert_eq!(toy.lines().count(), 41);
    let reg = std::fs::read_to_string(dir.join("register.csv")).unwrap();
    assert_eq!(reg.lines().count(), 9);
}

#[test]
fn aligned_build_undoes_rigid_motion() {
    use carimorph_core::mesh::save_mesh;
    use carimorph_core::pca::load_model;
    use nalgebra::{Rotation3, Vector3};
    let dir = tempfile::tempdir().unwrap();
    let (still, moved) = (dir.path().join("still"), dir.path().join("moved"));
    std::fs::create_dir(&still).unwrap();
    std::fs::create_dir(&moved).unwrap();
    let rot = Rotation3::from_axis_angle(&Vector3::y_axis(), 0.4);
    let shift = Vector3::new(0.3, -0.1, 0.2);
    for i in 0..12 {
        let m = load_mesh(fixtures().join(format!("corpus/cari_{i:02}.obj"))).unwrap();
        save_mesh(&m, still.join(format!("m{i:02}.obj"))).unwrap();
        let m = if i % 2 == 1 {
            m.with_vertices(m.vertices().iter().map(|p| rot * p + shift).collect()).unwrap()
        } else {
            m
        };
        save_mesh(&m, moved.join(format!("m{i:02}.obj"))).unwrap();
    }
    let p = |n: &str| path_str(&dir.path().join(n));
    let build = |corpus: &Path, out: &str, align: bool| {
        let corpus = path_str(corpus);
        let mut args = vec!["pca", "build", "--in", &corpus, "-d", "5", "--out", out];
        let lm = fx("align_landmarks.txt");
        if align {
            args.extend(["--align", lm.as_str()]);
        }
        ok(&args);
        load_model(out).unwrap()
    };
    let a = build(&still, &p("still.cpca"), true);
    let b = build(&moved, &p("moved.cpca"), true);
    let raw = build(&moved, &p("raw.cpca"), false);
    let aligned_gap = (a.mean() - b.mean()).abs().max();
    let raw_gap = (a.mean() - raw.mean()).abs().max();
    assert!(aligned_gap < 1e-9, "{aligned_gap}");
    assert!(raw_gap > 1e-2, "{raw_gap}");
    assert!(a.variance_ratios().iter().zip(b.variance_ratios()).all(|(x, y)| (x - y).abs() < 1e-9));
    let info = ok(&["pca", "info", "--model", &p("moved.cpca")]);
    assert!(String::from_utf8_lossy(&info.stdout).contains("aligned"));
}

#[test]
fn seeds_change_stochastic_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let run = |seed: &str, name: &str| {
        let out = path_str(&dir.path().join(name));
        #[rustfmt::skip]
        ok(&["texture", "complete", "--mesh", &fx("caricature.obj"), "--colors", &fx("partial.ply"), "--seed", seed, "--out", &out]);
        std::fs::read(out).unwrap()
    };
    assert_ne!(run("1", "a.ply"), run("2", "b.ply"));
    let toy = |seed: &str| ok(&["train-toy", "--config", &fx("toy.conf"), "--steps", "10", "--seed", seed]).stdout;
    assert_ne!(toy("1"), toy("2"));
}

#[test]
fn exaggerate_with_unit_coefficient_returns_the_head() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("same.obj");
    ok(&["exaggerate", "--mean", &fx("mean_head.obj"), "--head", &fx("head.obj"), "--u", "1", "--out", &path_str(&out)]);
    let head = load_mesh(fixtures().join("head.obj")).unwrap();
    let same = load_mesh(&out).unwrap();
    for (p, q) in head.vertices().iter().zip(same.vertices()) {
        assert!((p - q).norm() < 1e-15);
    }
}

#[test]
fn usage_errors_exit_two() {
    for args in [
        &[][..],
        &["frobnicate"][..],
        &["pca", "build"][..],
        &["score", "--tallies", "x.csv", "--s-max", "lots"][..],
        &["exaggerate", "--mean", "m.obj", "--head", "h.obj", "--u", "1", "--u1", "1", "--out", "o.obj"][..],
    ] {
        let out = carimorph(args);
        assert_eq!(out.status.code(), Some(2), "{args:?}");
        assert!(out.stdout.is_empty());
        assert!(!out.stderr.is_empty());
    }
    assert_eq!(carimorph(&["--help"]).status.code(), Some(0));
}

#[test]
fn failures_exit_one_with_a_message() {
    let out = carimorph(&["pca", "info", "--model", "/nonexistent/model.cpca"]);
    assert_eq!(out.status.code(), Some(1));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.starts_with("error:"), "{err}");
    assert!(out.stdout.is_empty());

    // a corrupted model is reported, not read
    let dir = tempfile::tempdir().unwrap();
    let model = dir.path().join("m.cpca");
    ok(&["pca", "build", "--in", &fx("corpus"), "-d", "3", "--out", &path_str(&model)]);
    let mut bytes = std::fs::read(&model).unwrap();
    let k = bytes.len() / 2;
    bytes[k] ^= 0x40;
    std::fs::write(&model, bytes).unwrap();
    let out = carimorph(&["pca", "info", "--model", &path_str(&model)]);
    assert_eq!(out.status.code(), Some(1));

    // too many components for the corpus
    let out = carimorph(&["pca", "build", "--in", &fx("corpus"), "-d", "40", "--out", &path_str(&model)]);
    assert_eq!(out.status.code(), Some(1));

    // two-parameter control needs a model
    #[rustfmt::skip]
    let out = carimorph(&["exaggerate", "--mean", &fx("mean_head.obj"), "--head", &fx("head.obj"), "--u1", "1", "--u2", "0", "--out", &path_str(&dir.path().join("x.obj"))]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn log_level_comes_from_the_environment() {
    let dir = tempfile::tempdir().unwrap();
    let out = Command::new(env!("CARGO_BIN_EXE_carimorph"))
        .args(["score", "--tallies", &fx("tallies.csv"), "--out", &path_str(&dir.path().join("s.csv"))])
        .env("CARIMORPH_LOG", "off")
        .output()
        .unwrap();
    assert!(out.status.success());
    assert!(out.stderr.is_empty());
}
