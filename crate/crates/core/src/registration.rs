//! Non-rigid ICP: deforms a template mesh onto a target point set with one
//! affine transform per template vertex.
//!
//! Each outer step fixes a stiffness weight, a landmark weight and a
//! pruning radius `τ`. Inner iterations alternate nearest-point lookup with
//! an exact solve of the resulting quadratic, so the objective
//!
//! ```text
//! stiffness · Σ_edges ‖X_i − X_j‖²  +  Σ_i min(dist_i², τ²)  +  landmark · Σ_l ‖x_l − t_l‖²
//! ```
//!
//! never increases within an outer step.

use std::path::Path;

use nalgebra::{DMatrix, Matrix3x4, Matrix4, Point3, Vector4};
use nalgebra_sparse::factorization::CscCholesky;
use nalgebra_sparse::{CooMatrix, CscMatrix};

use crate::error::{Error, Result};
use crate::mesh::graph::{components, rcm_order};
use crate::mesh::{umeyama, HeadMesh, RigidTransform};
use crate::spatial::SurfaceIndex;

#[derive(Debug, Clone, PartialEq)]
pub struct NicpConfig {
    pub stiffness_schedule: Vec<f64>,
    pub landmark_weight_schedule: Vec<f64>,
    pub inner_iteration_cap: usize,
    /// Inner loop stops once the RMS vertex displacement drops below this.
    pub convergence_tol: f64,
    /// Correspondences farther than `prune_factor × median` are dropped.
    /// `f64::INFINITY` keeps every pair.
    pub prune_factor: f64,
    pub correspondence: CorrespondenceMode,
    /// Start from the similarity transform that best maps the landmark
    /// vertices onto their targets (needs three non-collinear pairs).
    pub landmark_init: bool,
}

/// How a deformed template vertex finds its target point.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CorrespondenceMode {
    /// Nearest target vertex.
    Vertex,
    /// Closest point on the target triangles; point clouds fall back to
    /// nearest vertex.
    Surface,
}

impl Default for NicpConfig {
    fn default() -> Self {
        let steps = 8;
        let (hi, lo) = (50.0_f64, 0.2_f64);
        let last = (steps - 1) as f64;
        Self {
            stiffness_schedule: (0..steps).map(|k| hi * (lo / hi).powf(k as f64 / last)).collect(),
            landmark_weight_schedule: (0..steps).map(|k| 5.0 * (1.0 - k as f64 / last)).collect(),
            inner_iteration_cap: 10,
            convergence_tol: 1e-6,
            prune_factor: 4.0,
            correspondence: CorrespondenceMode::Vertex,
            landmark_init: true,
        }
    }
}

impl NicpConfig {
    /// A single outer step.
    pub fn single_step(stiffness: f64, landmark_weight: f64) -> Self {
        Self {
            stiffness_schedule: vec![stiffness],
            landmark_weight_schedule: vec![landmark_weight],
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let (s, l) = (&self.stiffness_schedule, &self.landmark_weight_schedule);
        if s.is_empty() || s.len() != l.len() {
            return Err(Error::Config(format!(
                "schedules must be non-empty and of equal length ({} vs {})",
                s.len(),
                l.len()
            )));
        }
        if !s.iter().all(|&a| a.is_finite() && a > 0.0) || s.windows(2).any(|w| w[1] > w[0]) {
            return Err(Error::Config("stiffness schedule must be positive and non-increasing".into()));
        }
        if !l.iter().all(|&b| b.is_finite() && b >= 0.0) || l.windows(2).any(|w| w[1] > w[0]) {
            return Err(Error::Config("landmark weights must be non-negative and non-increasing".into()));
        }
        if *l.last().unwrap() != 0.0 {
            return Err(Error::Config("landmark weight schedule must end at 0".into()));
        }
        if self.inner_iteration_cap == 0 || !(self.convergence_tol >= 0.0) || !(self.prune_factor > 0.0) {
            return Err(Error::Config(
                "inner cap must be positive, tolerance non-negative, prune factor positive".into(),
            ));
        }
        Ok(())
    }
}

/// Template vertex pinned to a target position.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LandmarkPair {
    pub vertex: usize,
    pub target: Point3<f64>,
}

/// Parses `template_index tx ty tz` lines; `#` starts a comment.
pub fn parse_landmark_pairs(text: &str) -> Result<Vec<LandmarkPair>> {
    let mut out = Vec::new();
    for (n, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let tok: Vec<&str> = line.split_whitespace().collect();
        if tok.len() != 4 {
            return Err(Error::format(n + 1, format!("expected `index x y z`, got `{line}`")));
        }
        let vertex = tok[0]
            .parse()
            .map_err(|_| Error::format(n + 1, format!("bad vertex index `{}`", tok[0])))?;
        let mut xyz = [0.0; 3];
        for (k, t) in tok[1..].iter().enumerate() {
            xyz[k] = t
                .parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| Error::format(n + 1, format!("bad coordinate `{t}`")))?;
        }
        out.push(LandmarkPair {
            vertex,
            target: Point3::from(xyz),
        });
    }
    Ok(out)
}

pub fn load_landmark_pairs(path: impl AsRef<Path>) -> Result<Vec<LandmarkPair>> {
    let path = path.as_ref();
    parse_landmark_pairs(&std::fs::read_to_string(path)?).map_err(|e| e.with_path(path))
}

#[derive(Debug, Clone)]
pub struct NicpResult {
    pub deformed_template: HeadMesh,
    /// `x' = A · [x y z 1]ᵀ` per template vertex.
    pub per_vertex_affine: Vec<Matrix3x4<f64>>,
    /// RMS nearest-target distance after each outer step.
    pub residual_trace: Vec<f64>,
    /// Objective before and after every inner iteration, one list per outer step.
    pub objective_trace: Vec<Vec<f64>>,
    /// Largest relative residual `‖K X − R‖ / ‖R‖` over all linear solves.
    pub max_solver_residual: f64,
}

const MAX_RELATIVE_RESIDUAL: f64 = 1e-6;

struct Correspondences {
    nearest: Vec<Point3<f64>>,
    dist: Vec<f64>,
    on_boundary: Vec<bool>,
}

fn correspond(index: &SurfaceIndex, points: &[Point3<f64>]) -> Correspondences {
    let hits: Vec<_> = points.iter().map(|p| index.closest(p)).collect();
    Correspondences {
        nearest: hits.iter().map(|h| h.point).collect(),
        dist: hits.iter().map(|h| h.distance).collect(),
        on_boundary: hits.iter().map(|h| h.on_boundary).collect(),
    }
}

fn median(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

/// Quantities held fixed for one outer step.
struct StepParams {
    stiffness: f64,
    lm_weight: f64,
    /// pruning radius
    tau: f64,
    /// vertices whose correspondence fell on the target border
    excluded: Vec<bool>,
}

struct Problem<'a> {
    template: &'a [Point3<f64>],
    edges: Vec<(usize, usize)>,
    comps: Vec<Vec<usize>>,
    /// position of each vertex in the unknown ordering
    slot: Vec<usize>,
    landmarks: &'a [LandmarkPair],
}

impl Problem<'_> {
    fn homogeneous(&self, i: usize) -> Vector4<f64> {
        let v = self.template[i];
        Vector4::new(v.x, v.y, v.z, 1.0)
    }

    fn positions(&self, x: &DMatrix<f64>) -> Vec<Point3<f64>> {
        (0..self.template.len())
            .map(|i| {
                let h = self.homogeneous(i);
                let r = 4 * self.slot[i];
                let p = x.rows(r, 4).tr_mul(&h);
                Point3::new(p[0], p[1], p[2])
            })
            .collect()
    }

    fn objective(&self, x: &DMatrix<f64>, pos: &[Point3<f64>], corr: &Correspondences, step: &StepParams) -> f64 {
        let StepParams {
            stiffness,
            lm_weight,
            tau,
            ref excluded,
        } = *step;
        let mut stiff = 0.0;
        for &(a, b) in &self.edges {
            let diff = x.rows(4 * self.slot[a], 4) - x.rows(4 * self.slot[b], 4);
            stiff += diff.norm_squared();
        }
        let data: f64 = corr
            .dist
            .iter()
            .zip(excluded)
            .map(|(d, &skip)| if skip { 0.0 } else { (d * d).min(tau * tau) })
            .sum();
        let lm: f64 = self
            .landmarks
            .iter()
            .map(|l| (pos[l.vertex] - l.target).norm_squared())
            .sum();
        stiffness * stiff + data + lm_weight * lm
    }

    /// Every connected component needs weighted support spanning 3-D
    /// (four independent homogeneous points), otherwise its transforms are
    /// not determined.
    fn check_support(&self, weights: &[f64]) -> Result<()> {
        for comp in &self.comps {
            let total: f64 = comp.iter().map(|&i| weights[i]).sum();
            if !(total > 0.0) {
                return Err(Error::Solver(format!(
                    "template component of {} vertices has no correspondences; system is singular",
                    comp.len()
                )));
            }
            let c = comp
                .iter()
                .fold(nalgebra::Vector3::zeros(), |acc, &i| acc + self.template[i].coords * weights[i])
                / total;
            let mut cov = nalgebra::Matrix3::zeros();
            for &i in comp {
                let d = self.template[i].coords - c;
                cov += d * d.transpose() * weights[i];
            }
            let eig = cov.symmetric_eigenvalues();
            let (lo, hi) = (eig.min(), eig.max());
            if !(hi > 0.0) || lo <= 1e-12 * hi {
                return Err(Error::Solver(format!(
                    "template component of {} vertices has coplanar or collinear support; system is singular",
                    comp.len()
                )));
            }
        }
        Ok(())
    }

    fn assemble(&self, weights: &[f64], targets: &[Point3<f64>], stiffness: f64, lm_weight: f64) -> (CscMatrix<f64>, DMatrix<f64>) {
        let n = self.template.len();
        let mut coo = CooMatrix::new(4 * n, 4 * n);
        let mut rhs = DMatrix::zeros(4 * n, 3);
        for &(a, b) in &self.edges {
            let (ra, rb) = (4 * self.slot[a], 4 * self.slot[b]);
            for k in 0..4 {
                coo.push(ra + k, rb + k, -stiffness);
                coo.push(rb + k, ra + k, -stiffness);
                coo.push(ra + k, ra + k, stiffness);
                coo.push(rb + k, rb + k, stiffness);
            }
        }
        let mut blocks = vec![Matrix4::zeros(); n];
        for i in 0..n {
            let h = self.homogeneous(i);
            if weights[i] > 0.0 {
                blocks[i] += h * h.transpose() * weights[i];
                let r = 4 * self.slot[i];
                let u = targets[i].coords.transpose();
                let mut rows = rhs.rows_mut(r, 4);
                rows += h * u * weights[i];
            }
        }
        for l in self.landmarks {
            if lm_weight > 0.0 {
                let h = self.homogeneous(l.vertex);
                blocks[l.vertex] += h * h.transpose() * lm_weight;
                let r = 4 * self.slot[l.vertex];
                let mut rows = rhs.rows_mut(r, 4);
                rows += h * l.target.coords.transpose() * lm_weight;
            }
        }
        // full 4×4 diagonal blocks keep the pattern fixed across solves
        for (i, blk) in blocks.iter().enumerate() {
            let r = 4 * self.slot[i];
            for p in 0..4 {
                for q in 0..4 {
                    coo.push(r + p, r + q, blk[(p, q)]);
                }
            }
        }
        (CscMatrix::from(&coo), rhs)
    }
}

struct Solver {
    factor: Option<(nalgebra_sparse::pattern::SparsityPattern, CscCholesky<f64>)>,
}

impl Solver {
    fn solve(&mut self, k: &CscMatrix<f64>, rhs: &DMatrix<f64>) -> Result<(DMatrix<f64>, f64)> {
        let fail = |e: nalgebra_sparse::factorization::CholeskyError| Error::Solver(format!("Cholesky factorization failed: {e}"));
        match &mut self.factor {
            Some((pattern, chol)) if pattern == k.pattern() => chol.refactor(k.values()).map_err(fail)?,
            _ => self.factor = Some((k.pattern().clone(), CscCholesky::factor(k).map_err(fail)?)),
        }
        let x = self.factor.as_ref().unwrap().1.solve(rhs);
        let scale = rhs.norm().max(f64::MIN_POSITIVE);
        let residual = (k * &x - rhs).norm() / scale;
        if !x.iter().all(|v| v.is_finite()) || !(residual <= MAX_RELATIVE_RESIDUAL) {
            return Err(Error::Solver(format!("linear solve inaccurate (relative residual {residual:e})")));
        }
        Ok((x, residual))
    }
}

fn initial_transform(template: &HeadMesh, landmarks: &[LandmarkPair], config: &NicpConfig) -> RigidTransform {
    if !config.landmark_init || landmarks.len() < 3 {
        return RigidTransform::identity();
    }
    let src: Vec<Point3<f64>> = landmarks.iter().map(|l| template.vertices()[l.vertex]).collect();
    let dst: Vec<Point3<f64>> = landmarks.iter().map(|l| l.target).collect();
    umeyama(&src, &dst, None).unwrap_or_else(|e| {
        log::debug!("landmark initialisation skipped: {e}");
        RigidTransform::identity()
    })
}

/// Registers `template` onto `target`. Correspondences are closest points
/// on the target surface, or nearest vertices when it has no faces.
pub fn nicp_register(
    template: &HeadMesh,
    target: &HeadMesh,
    landmarks: &[LandmarkPair],
    config: &NicpConfig,
) -> Result<NicpResult> {
    config.validate()?;
    if target.n_vertices() == 0 {
        return Err(Error::Registration("target has no points".into()));
    }
    let n = template.n_vertices();
    for l in landmarks {
        if l.vertex >= n {
            return Err(Error::Registration(format!("landmark vertex {} out of range for {n} vertices", l.vertex)));
        }
    }

    let adjacency = template.adjacency();
    let order = rcm_order(&adjacency);
    let mut slot = vec![0; n];
    for (k, &v) in order.iter().enumerate() {
        slot[v] = k;
    }
    let problem = Problem {
        template: template.vertices(),
        edges: template.edges(),
        comps: components(&adjacency),
        slot,
        landmarks,
    };

    let index = match config.correspondence {
        CorrespondenceMode::Surface => SurfaceIndex::new(target)?,
        CorrespondenceMode::Vertex => SurfaceIndex::new(&HeadMesh::point_cloud(target.vertices().to_vec())?)?,
    };
    let init = initial_transform(template, landmarks, config);
    let linear = (init.rotation() * init.scale()).transpose();
    let mut x = DMatrix::zeros(4 * n, 3);
    for i in 0..n {
        let r = 4 * problem.slot[i];
        x.fixed_view_mut::<3, 3>(r, 0).copy_from(&linear);
        x.fixed_view_mut::<1, 3>(r + 3, 0).copy_from(&init.translation().transpose());
    }
    let mut positions = problem.positions(&x);
    let mut solver = Solver { factor: None };
    let mut residual_trace = Vec::new();
    let mut objective_trace = Vec::new();
    let mut max_solver_residual: f64 = 0.0;

    for (&stiffness, &lm_weight) in config.stiffness_schedule.iter().zip(&config.landmark_weight_schedule) {
        let mut corr = correspond(&index, &positions);
        let excluded = corr.on_boundary.clone();
        let interior: Vec<f64> = corr.dist.iter().zip(&excluded).filter(|(_, &e)| !e).map(|(&d, _)| d).collect();
        let tau = match (config.prune_factor.is_finite(), interior.is_empty()) {
            (false, _) => f64::INFINITY,
            (true, true) => 0.0,
            (true, false) => config.prune_factor * median(&interior),
        };
        let step = StepParams {
            stiffness,
            lm_weight,
            tau,
            excluded,
        };
        let mut trace = vec![problem.objective(&x, &positions, &corr, &step)];

        for _ in 0..config.inner_iteration_cap {
            let mut weights: Vec<f64> = corr
                .dist
                .iter()
                .zip(&step.excluded)
                .map(|(&d, &skip)| if !skip && d <= tau { 1.0 } else { 0.0 })
                .collect();
            if weights.iter().all(|&w| w == 0.0) && (lm_weight == 0.0 || landmarks.is_empty()) {
                return Err(Error::Registration("no correspondences survived pruning".into()));
            }
            let data_weights = weights.clone();
            if lm_weight > 0.0 {
                for l in landmarks {
                    weights[l.vertex] += lm_weight;
                }
            }
            problem.check_support(&weights)?;

            let (k, rhs) = problem.assemble(&data_weights, &corr.nearest, stiffness, lm_weight);
            let (next, residual) = solver.solve(&k, &rhs)?;
            max_solver_residual = max_solver_residual.max(residual);
            x = next;
            let moved = problem.positions(&x);
            let change = (moved
                .iter()
                .zip(&positions)
                .map(|(a, b)| (a - b).norm_squared())
                .sum::<f64>()
                / n as f64)
                .sqrt();
            positions = moved;
            corr = correspond(&index, &positions);
            trace.push(problem.objective(&x, &positions, &corr, &step));
            if change < config.convergence_tol {
                break;
            }
        }
        let rmse = (corr.dist.iter().map(|d| d * d).sum::<f64>() / n as f64).sqrt();
        residual_trace.push(rmse);
        objective_trace.push(trace);
    }

    let per_vertex_affine = (0..n)
        .map(|i| x.fixed_view::<4, 3>(4 * problem.slot[i], 0).transpose())
        .collect();
    Ok(NicpResult {
        deformed_template: template.with_vertices(positions)?,
        per_vertex_affine,
        residual_trace,
        objective_trace,
        max_solver_residual,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synth;

    #[test]
    fn default_schedules() {
        let cfg = NicpConfig::default();
        cfg.validate().unwrap();
        assert_eq!(cfg.stiffness_schedule.len(), 8);
        assert!((cfg.stiffness_schedule[0] - 50.0).abs() < 1e-12);
        assert!((cfg.stiffness_schedule[7] - 0.2).abs() < 1e-12);
        assert_eq!(cfg.landmark_weight_schedule[0], 5.0);
        assert_eq!(cfg.landmark_weight_schedule[7], 0.0);
    }

    #[test]
    fn invalid_schedules() {
        let mut cfg = NicpConfig::default();
        cfg.landmark_weight_schedule.pop();
        assert!(cfg.validate().is_err());
        assert!(NicpConfig::single_step(0.0, 0.0).validate().is_err());
        assert!(NicpConfig::single_step(1.0, 1.0).validate().is_err());
        let mut cfg = NicpConfig::default();
        cfg.stiffness_schedule.swap(0, 1);
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn landmark_pair_parsing() {
        let pairs = parse_landmark_pairs("# header\n3 0.5 1 -2\n\n7 1e-3 0 0 # tip\n").unwrap();
        assert_eq!(pairs.len(), 2);
        assert_eq!(pairs[1].vertex, 7);
        assert_eq!(pairs[0].target, Point3::new(0.5, 1.0, -2.0));
        assert!(matches!(parse_landmark_pairs("1 2 3"), Err(Error::Format { line: 1, .. })));
        assert!(parse_landmark_pairs("x 1 2 3").is_err());
    }

    #[test]
    fn fixed_point() {
        let m = synth::face_patch(8, 8).unwrap();
        let lms: Vec<LandmarkPair> = [0, 9, 30, 50, 63]
            .iter()
            .map(|&v| LandmarkPair {
                vertex: v,
                target: m.vertices()[v],
            })
            .collect();
        let res = nicp_register(&m, &m, &lms, &NicpConfig::default()).unwrap();
        let rmse = (res
            .deformed_template
            .vertices()
            .iter()
            .zip(m.vertices())
            .map(|(a, b)| (a - b).norm_squared())
            .sum::<f64>()
            / m.n_vertices() as f64)
            .sqrt();
        assert!(rmse < 1e-8, "rmse {rmse}");
        let identity = Matrix3x4::identity();
        assert!(res.per_vertex_affine.iter().all(|a| (a - identity).abs().max() < 1e-6));
        assert_eq!(res.deformed_template.faces(), m.faces());
    }

    #[test]
    fn empty_target_and_bad_landmark() {
        let m = synth::face_patch(4, 4).unwrap();
        let empty = HeadMesh::point_cloud(Vec::new());
        if let Ok(empty) = empty {
            assert!(matches!(nicp_register(&m, &empty, &[], &NicpConfig::default()), Err(Error::Registration(_))));
        }
        let bad = [LandmarkPair {
            vertex: 999,
            target: Point3::origin(),
        }];
        assert!(matches!(
            nicp_register(&m, &m, &bad, &NicpConfig::default()),
            Err(Error::Registration(_))
        ));
    }

    #[test]
    fn isolated_triangle_is_singular() {
        let patch = synth::face_patch(5, 5).unwrap();
        let mut verts = patch.vertices().to_vec();
        let mut faces = patch.faces().to_vec();
        let base = verts.len();
        verts.extend([Point3::new(5.0, 5.0, 5.0), Point3::new(5.1, 5.0, 5.0), Point3::new(5.0, 5.1, 5.0)]);
        faces.push([base, base + 1, base + 2]);
        let mesh = HeadMesh::new(verts.clone(), faces).unwrap();
        let cfg = NicpConfig {
            prune_factor: f64::INFINITY,
            ..NicpConfig::default()
        };
        assert!(matches!(nicp_register(&mesh, &mesh, &[], &cfg), Err(Error::Solver(_))));
    }
}
