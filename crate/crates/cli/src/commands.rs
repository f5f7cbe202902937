use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::{bail, ensure, Context};
use carimorph_core::exaggerate::{exaggerate, MeanHead};
use carimorph_core::losses::LossWeights;
use carimorph_core::mesh::{center_and_scale, load_landmarks, load_mesh, rigid_align, save_mesh, AlignOptions, HeadMesh};
use carimorph_core::pca::{fit_pca, load_model, save_model};
use carimorph_core::registration::{load_landmark_pairs, nicp_register, CorrespondenceMode, NicpConfig};
use carimorph_core::scoring::{average_scores, rank_score, read_tallies_csv, write_scores_csv};
use carimorph_core::texture::{
    add_matched_noise, complete_vertex_colors, compute_uv, estimate_projection, load_ply, save_ply, write_uv_obj,
    VertexColorMap,
};
use carimorph_core::toy::{evaluate_generator, train_toy_gan, write_trace_csv, ToyScenario, ToyScenarioConfig, ToyTrainConfig};

use crate::cli::*;
use crate::ops;
use crate::service::{self, AppState, Session};

pub fn dispatch(cli: Cli) -> anyhow::Result<()> {
    match cli.command {
        Command::Pca(PcaCommand::Build(a)) => pca_build(a),
        Command::Pca(PcaCommand::Encode(a)) => pca_encode(a),
        Command::Pca(PcaCommand::Decode(a)) => pca_decode(a),
        Command::Pca(PcaCommand::Info(a)) => pca_info(a),
        Command::Exaggerate(a) => exaggerate_cmd(a),
        Command::Register(a) => register(a),
        Command::Texture(TextureCommand::Project(a)) => texture_project(a),
        Command::Texture(TextureCommand::Complete(a)) => texture_complete(a),
        Command::Score(a) => score(a),
        Command::TrainToy(a) => train_toy(a),
        Command::Serve(a) => serve(a),
    }
}

fn create(path: &Path) -> anyhow::Result<BufWriter<File>> {
    Ok(BufWriter::new(
        File::create(path).with_context(|| format!("cannot create {}", path.display()))?,
    ))
}

fn corpus_files(inputs: &[PathBuf]) -> anyhow::Result<Vec<PathBuf>> {
    let mut files = Vec::new();
    for input in inputs {
        if input.is_dir() {
            let mut found: Vec<PathBuf> = std::fs::read_dir(input)
                .with_context(|| format!("reading {}", input.display()))?
                .map(|e| e.map(|e| e.path()))
                .collect::<Result<_, _>>()?;
            found.retain(|p| p.extension().is_some_and(|e| e.eq_ignore_ascii_case("obj")));
            found.sort();
            files.extend(found);
        } else {
            files.push(input.clone());
        }
    }
    ensure!(!files.is_empty(), "no OBJ meshes found");
    Ok(files)
}

fn pca_build(a: PcaBuildArgs) -> anyhow::Result<()> {
    let files = corpus_files(&a.inputs)?;
    let mut meshes = Vec::with_capacity(files.len());
    for f in &files {
        let mesh = load_mesh(f)?;
        meshes.push(if a.normalize { center_and_scale(&mesh)?.0 } else { mesh });
    }
    if let Some(path) = &a.align {
        let landmarks = load_landmarks(path)?;
        let reference = meshes[0].clone();
        for (mesh, file) in meshes.iter_mut().zip(&files).skip(1) {
            let aligned = rigid_align(mesh, &reference, &landmarks, &AlignOptions::default())
                .with_context(|| format!("aligning {}", file.display()))?;
            *mesh = aligned.mesh;
        }
    }
    let provenance = format!(
        "{} meshes{}{}: {}",
        files.len(),
        if a.normalize { ", normalized" } else { "" },
        if a.align.is_some() { ", aligned" } else { "" },
        files.iter().map(|f| f.display().to_string()).collect::<Vec<_>>().join(", ")
    );
    let model = fit_pca(&meshes, a.d)?.with_provenance(provenance);
    save_model(&model, &a.out)?;
    let explained: f64 = model.variance_ratios().iter().sum();
    eprintln!(
        "fitted {} meshes: n_v={} d={} explained variance {:.6}{}",
        meshes.len(),
        model.n_vertices(),
        model.n_components(),
        explained,
        if model.is_degenerate() { " (degenerate corpus)" } else { "" }
    );
    Ok(())
}

fn pca_encode(a: PcaEncodeArgs) -> anyhow::Result<()> {
    let model = load_model(&a.model)?;
    let coeffs = model.encode(&load_mesh(&a.mesh)?)?;
    let text = ops::format_coeffs(&coeffs);
    match a.out {
        Some(p) => std::fs::write(&p, text).with_context(|| format!("writing {}", p.display()))?,
        None => print!("{text}"),
    }
    Ok(())
}

fn pca_decode(a: PcaDecodeArgs) -> anyhow::Result<()> {
    let model = load_model(&a.model)?;
    let mesh = model.decode(&ops::load_coeffs(&a.coeffs)?)?;
    save_mesh(&mesh, &a.out)?;
    Ok(())
}

fn pca_info(a: PcaInfoArgs) -> anyhow::Result<()> {
    let m = load_model(&a.model)?;
    let info = serde_json::json!({
        "n_v": m.n_vertices(),
        "d": m.n_components(),
        "n_faces": m.faces().len(),
        "degenerate": m.is_degenerate(),
        "total_variance": m.total_variance(),
        "provenance": m.provenance(),
        "variance_ratios": m.variance_ratios(),
    });
    println!("{}", serde_json::to_string_pretty(&info)?);
    Ok(())
}

fn exaggerate_cmd(a: ExaggerateArgs) -> anyhow::Result<()> {
    let mean = MeanHead::new(load_mesh(&a.mean)?);
    let head = load_mesh(&a.head)?;
    let out = if let Some(u) = a.u {
        exaggerate(&mean, &head, u)?
    } else {
        let (Some(u1), Some(u2)) = (a.u1, a.u2) else {
            bail!("give either --u, or --u1 and --u2");
        };
        let model_path = a.model.as_ref().context("--model is required with --u1/--u2")?;
        let model = load_model(model_path)?;
        let source = match (&a.cari, &a.coeffs) {
            (Some(p), _) => Some(ops::CaricatureSource::Mesh(load_mesh(p)?)),
            (None, Some(p)) => Some(ops::CaricatureSource::Coeffs(ops::load_coeffs(p)?)),
            (None, None) => None,
        };
        let slot = ops::build_slot(&model, &mean, head, source.as_ref())?;
        let coords = ops::slot_control(&mean, &slot, u1, u2)?;
        mean.mesh().with_coords(coords.as_slice())?
    };
    save_mesh(&out, &a.out)?;
    Ok(())
}

fn register(a: RegisterArgs) -> anyhow::Result<()> {
    let template = load_mesh(&a.template)?;
    let target = load_mesh(&a.target)?;
    let landmarks = load_landmark_pairs(&a.landmarks)?;
    let config = NicpConfig {
        correspondence: if a.surface { CorrespondenceMode::Surface } else { CorrespondenceMode::Vertex },
        landmark_init: !a.no_landmark_init,
        ..NicpConfig::default()
    };
    let result = nicp_register(&template, &target, &landmarks, &config)?;
    save_mesh(&result.deformed_template, &a.out)?;
    if let Some(path) = &a.trace {
        let mut w = create(path)?;
        writeln!(w, "step,stiffness,landmark_weight,rms_distance,inner_iterations,objective")?;
        for (k, rms) in result.residual_trace.iter().enumerate() {
            let objective = result.objective_trace[k].last().copied().unwrap_or(f64::NAN);
            writeln!(
                w,
                "{k},{},{},{rms},{},{objective}",
                config.stiffness_schedule[k],
                config.landmark_weight_schedule[k],
                result.objective_trace[k].len().saturating_sub(1)
            )?;
        }
        w.flush()?;
    }
    if let Some(rms) = result.residual_trace.last() {
        eprintln!(
            "registered {} vertices: final RMS distance {rms:.6e} ({:.4}% of target diagonal)",
            template.n_vertices(),
            100.0 * rms / target.bbox_diagonal()
        );
    }
    Ok(())
}

/// Lines of `vertex_index x y`; `#` starts a comment.
fn parse_image_landmarks(text: &str) -> anyhow::Result<Vec<(usize, [f64; 2])>> {
    let mut out = Vec::new();
    for (n, line) in text.lines().enumerate() {
        let body = line.split('#').next().unwrap_or("").trim();
        if body.is_empty() {
            continue;
        }
        let tok: Vec<&str> = body.split_whitespace().collect();
        let [v, x, y] = tok.as_slice() else {
            bail!("line {}: expected `vertex_index x y`", n + 1);
        };
        let bad = || format!("line {}: bad value in `{body}`", n + 1);
        out.push((v.parse().with_context(bad)?, [x.parse().with_context(bad)?, y.parse().with_context(bad)?]));
    }
    Ok(out)
}

fn texture_project(a: ProjectArgs) -> anyhow::Result<()> {
    let mesh = load_mesh(&a.mesh)?;
    let text = std::fs::read_to_string(&a.landmarks).with_context(|| format!("reading {}", a.landmarks.display()))?;
    let landmarks = parse_image_landmarks(&text).with_context(|| format!("parsing {}", a.landmarks.display()))?;
    let mut points3 = Vec::with_capacity(landmarks.len());
    let mut points2 = Vec::with_capacity(landmarks.len());
    for (v, p) in landmarks {
        ensure!(v < mesh.n_vertices(), "landmark vertex {v} out of range for {} vertices", mesh.n_vertices());
        points3.push(mesh.vertices()[v]);
        points2.push(p);
    }
    let fit = estimate_projection(&points3, &points2)?;
    let target = match &a.apply_to {
        Some(p) => {
            let m = load_mesh(p)?;
            ensure!(
                m.n_vertices() == mesh.n_vertices(),
                "--apply-to mesh has {} vertices, expected {}",
                m.n_vertices(),
                mesh.n_vertices()
            );
            m
        }
        None => mesh.clone(),
    };
    // visibility is decided on the head the photo shows
    let uv = compute_uv(&mesh, &fit.matrix, (a.width, a.height))?;
    let mut w = create(&a.out)?;
    write_uv_obj(&target, &uv, &mut w)?;
    w.flush()?;
    eprintln!(
        "projection fitted: mean reprojection error {:.4} px, {} of {} vertices visible",
        fit.mean_reprojection_error,
        uv.valid_count(),
        uv.len()
    );
    Ok(())
}

fn texture_complete(a: CompleteArgs) -> anyhow::Result<()> {
    let mesh: HeadMesh = load_mesh(&a.mesh)?;
    let (_, partial) = load_ply(&a.colors)?;
    let filled = complete_vertex_colors(&mesh, &partial)?;
    let out: VertexColorMap = if a.no_noise { filled } else { add_matched_noise(&filled, a.seed)? };
    save_ply(&mesh, &out, &a.out)?;
    Ok(())
}

fn score(a: ScoreArgs) -> anyhow::Result<()> {
    let file = File::open(&a.tallies).with_context(|| format!("opening {}", a.tallies.display()))?;
    let tallies = read_tallies_csv(file, a.s_max).with_context(|| format!("reading {}", a.tallies.display()))?;
    let per_photo: Vec<_> = tallies.iter().map(|(id, t)| (id.clone(), rank_score(t).scores)).collect();
    let maps: Vec<_> = per_photo.iter().map(|(_, s)| s.clone()).collect();
    let average = average_scores(&maps)?;
    match &a.out {
        Some(p) => {
            let mut w = create(p)?;
            write_scores_csv(&per_photo, &average, &mut w)?;
            w.flush()?;
        }
        None => write_scores_csv(&per_photo, &average, std::io::stdout().lock())?,
    }
    Ok(())
}

fn train_toy(a: TrainToyArgs) -> anyhow::Result<()> {
    let mut config = ToyTrainConfig::default();
    let mut weights = LossWeights::default();
    if let Some(p) = &a.config {
        let text = std::fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
        config.apply_kv(&text, &mut weights).with_context(|| format!("parsing {}", p.display()))?;
    }
    if let Some(s) = a.seed {
        config.seed = s;
    }
    if let Some(s) = a.steps {
        config.steps = s;
    }
    weights = LossWeights::new(
        a.lambda_cha.unwrap_or(weights.lambda_cha),
        a.lambda_cari.unwrap_or(weights.lambda_cari),
    )?;
    let scenario = ToyScenario::generate(&ToyScenarioConfig {
        seed: a.scenario_seed,
        ..ToyScenarioConfig::default()
    })?;
    let out = train_toy_gan(&scenario.dataset, &scenario.model, &scenario.mean, &weights, &config)?;
    if let Some(p) = &a.trace {
        let mut w = create(p)?;
        write_trace_csv(&out.trace, &mut w)?;
        w.flush()?;
    }
    let eval = evaluate_generator(&out.generator, &scenario.dataset, &scenario.model, &scenario.mean)?;
    let last = out.trace.last();
    let summary = serde_json::json!({
        "steps": config.steps,
        "seed": config.seed,
        "lambda_cha": weights.lambda_cha,
        "lambda_cari": weights.lambda_cari,
        "mean_cosine": eval.mean_cosine,
        "mean_ratio": eval.mean_ratio,
        "final_l_total": last.map(|r| r.l_total),
    });
    println!("{}", serde_json::to_string_pretty(&summary)?);
    Ok(())
}

fn serve(a: ServeArgs) -> anyhow::Result<()> {
    let session = Session::load(&a.model, &a.mean, &a.slots)?;
    let runtime = tokio::runtime::Builder::new_multi_thread()
        .enable_all()
        .build()
        .context("starting async runtime")?;
    runtime.block_on(async {
        let listener = service::bind(&format!("{}:{}", a.host, a.port)).await?;
        service::serve(listener, AppState::new(session)).await
    })
}
