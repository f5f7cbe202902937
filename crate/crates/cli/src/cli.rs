use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

#[derive(Debug, Parser)]
#[command(name = "carimorph", version, about = "3D caricature morphable-model tools")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Build and use caricature PCA models.
    #[command(subcommand)]
    Pca(PcaCommand),
    /// Exaggerate a head, by one coefficient or by the two-parameter control.
    Exaggerate(ExaggerateArgs),
    /// Non-rigid registration of a template mesh onto a target.
    Register(RegisterArgs),
    /// Texture projection and completion.
    #[command(subcommand)]
    Texture(TextureCommand),
    /// Turn vote tallies into zero-sum rank scores.
    Score(ScoreArgs),
    /// Train the toy generator on a synthetic scenario.
    TrainToy(TrainToyArgs),
    /// Run the HTTP service.
    Serve(ServeArgs),
}

#[derive(Debug, Subcommand)]
pub enum PcaCommand {
    /// Fit a model to a corpus of OBJ meshes with shared connectivity.
    Build(PcaBuildArgs),
    /// Project a mesh onto the model and print its coefficients.
    Encode(PcaEncodeArgs),
    /// Reconstruct a mesh from coefficients.
    Decode(PcaDecodeArgs),
    /// Print a model summary as JSON.
    Info(PcaInfoArgs),
}

#[derive(Debug, Args)]
pub struct PcaBuildArgs {
    /// OBJ files, or directories whose `*.obj` files are read in name order.
    #[arg(long = "in", required = true, num_args = 1..)]
    pub inputs: Vec<PathBuf>,
    /// Number of components to keep.
    #[arg(short, long, default_value_t = carimorph_core::pca::DEFAULT_COMPONENTS)]
    pub d: usize,
    /// Center each mesh and scale it to unit bounding-box diagonal first.
    #[arg(long)]
    pub normalize: bool,
    /// Landmark vertex indices; every mesh is aligned to the first one by a
    /// landmark similarity fit refined with ICP.
    #[arg(long, value_name = "LANDMARKS")]
    pub align: Option<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct PcaEncodeArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long)]
    pub mesh: PathBuf,
    /// Write coefficients here instead of standard output.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct PcaDecodeArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long)]
    pub coeffs: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct PcaInfoArgs {
    #[arg(long)]
    pub model: PathBuf,
}

#[derive(Debug, Args)]
pub struct ExaggerateArgs {
    /// Mean normal head (OBJ); its faces are used for the output.
    #[arg(long)]
    pub mean: PathBuf,
    /// Reconstructed head (OBJ).
    #[arg(long)]
    pub head: PathBuf,
    /// Single exaggeration coefficient: `mean + u·(head − mean)`.
    #[arg(long, conflicts_with_all = ["u1", "u2", "cari", "coeffs", "model"])]
    pub u: Option<f64>,
    /// Caricature PCA model, required for the two-parameter control.
    #[arg(long)]
    pub model: Option<PathBuf>,
    /// Generated caricature mesh supplying the caricature offset.
    #[arg(long, conflicts_with = "coeffs")]
    pub cari: Option<PathBuf>,
    /// Generated coefficients supplying the caricature offset.
    #[arg(long)]
    pub coeffs: Option<PathBuf>,
    #[arg(long, allow_negative_numbers = true)]
    pub u1: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    pub u2: Option<f64>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct RegisterArgs {
    #[arg(long)]
    pub template: PathBuf,
    /// Target mesh or point cloud (OBJ).
    #[arg(long)]
    pub target: PathBuf,
    /// Lines of `template_vertex x y z`.
    #[arg(long)]
    pub landmarks: PathBuf,
    /// Use closest points on target triangles instead of nearest vertices.
    #[arg(long)]
    pub surface: bool,
    /// Skip the landmark similarity initialization.
    #[arg(long)]
    pub no_landmark_init: bool,
    #[arg(long)]
    pub out: PathBuf,
    /// Per-step diagnostics as CSV.
    #[arg(long)]
    pub trace: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
pub enum TextureCommand {
    /// Fit a projection from 2D landmarks and write the mesh with UVs.
    Project(ProjectArgs),
    /// Fill unknown vertex colors of a PLY and add matched noise.
    Complete(CompleteArgs),
}

#[derive(Debug, Args)]
pub struct ProjectArgs {
    /// Mesh the landmarks refer to.
    #[arg(long)]
    pub mesh: PathBuf,
    /// Lines of `vertex_index x y` in image pixels, origin top-left.
    #[arg(long)]
    pub landmarks: PathBuf,
    #[arg(long)]
    pub width: u32,
    #[arg(long)]
    pub height: u32,
    /// Mesh that receives the UVs, with the same vertex order (default: `--mesh`).
    #[arg(long)]
    pub apply_to: Option<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct CompleteArgs {
    /// Mesh whose connectivity and geometry are used.
    #[arg(long)]
    pub mesh: PathBuf,
    /// PLY with per-vertex colors and a `known` flag.
    #[arg(long)]
    pub colors: PathBuf,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Skip the matched noise.
    #[arg(long)]
    pub no_noise: bool,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct ScoreArgs {
    /// CSV with `photo_id,candidate_id,votes` rows.
    #[arg(long)]
    pub tallies: PathBuf,
    #[arg(long, default_value_t = carimorph_core::scoring::DEFAULT_S_MAX)]
    pub s_max: u64,
    /// Write scores here instead of standard output.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct TrainToyArgs {
    /// `key = value` lines overriding the training defaults.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub steps: Option<usize>,
    #[arg(long)]
    pub lambda_cha: Option<f64>,
    #[arg(long)]
    pub lambda_cari: Option<f64>,
    /// Seed of the synthetic scenario.
    #[arg(long, default_value_t = 7)]
    pub scenario_seed: u64,
    /// Loss trace as CSV.
    #[arg(long)]
    pub trace: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ServeArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long)]
    pub mean: PathBuf,
    /// `NAME=HEAD.obj[,CARICATURE]`; the caricature is an OBJ or a coefficient file.
    #[arg(long = "slot")]
    pub slots: Vec<String>,
    #[arg(long, default_value = "127.0.0.1")]
    pub host: String,
    #[arg(long, default_value_t = 8080)]
    pub port: u16,
}
