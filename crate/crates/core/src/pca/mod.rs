//! PCA shape space over fixed-connectivity head meshes.
//!
//! A head is the flat coordinate vector `h = mean + basis · α`, where the
//! basis columns are the leading principal directions of the training
//! corpus and `α` is a short coefficient code. Because the basis is
//! orthonormal, encoding is a projection and decoding is a matrix-vector
//! product, both linear and trivially differentiable.

mod io;

pub use io::{load_model, save_model, sidecar_path, MODEL_MAGIC, MODEL_VERSION};

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::mesh::HeadMesh;

/// Component count used when none is requested.
pub const DEFAULT_COMPONENTS: usize = 200;

#[derive(Debug, Clone, PartialEq)]
pub struct PcaCoeffs(DVector<f64>);

impl PcaCoeffs {
    pub fn new(values: DVector<f64>) -> Result<Self> {
        if !values.iter().all(|v| v.is_finite()) {
            return Err(Error::Dimension("coefficients must be finite".into()));
        }
        Ok(Self(values))
    }

    pub fn zeros(d: usize) -> Self {
        Self(DVector::zeros(d))
    }

    pub fn from_slice(values: &[f64]) -> Result<Self> {
        Self::new(DVector::from_column_slice(values))
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn values(&self) -> &DVector<f64> {
        &self.0
    }

    pub fn into_inner(self) -> DVector<f64> {
        self.0
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CariPcaModel {
    mean: DVector<f64>,
    basis: DMatrix<f64>,
    variance_ratios: Vec<f64>,
    faces: Vec<[usize; 3]>,
    total_variance: f64,
    degenerate: bool,
    provenance: String,
}

impl CariPcaModel {
    /// Assembles a model from parts, checking shapes and basis orthonormality.
    pub fn from_parts(
        mean: DVector<f64>,
        basis: DMatrix<f64>,
        variance_ratios: Vec<f64>,
        faces: Vec<[usize; 3]>,
    ) -> Result<Self> {
        let dim = mean.len();
        if !dim.is_multiple_of(3) || basis.nrows() != dim || basis.ncols() != variance_ratios.len() {
            return Err(Error::Dimension(format!(
                "mean {dim}, basis {}x{}, {} ratios",
                basis.nrows(),
                basis.ncols(),
                variance_ratios.len()
            )));
        }
        if !mean.iter().chain(basis.iter()).chain(&variance_ratios).all(|v| v.is_finite()) {
            return Err(Error::Dimension("model contains non-finite values".into()));
        }
        let gram = basis.transpose() * &basis;
        let off = (gram - DMatrix::identity(basis.ncols(), basis.ncols())).abs().max();
        if basis.ncols() > 0 && off > 1e-10 {
            return Err(Error::Dimension(format!("basis is not orthonormal (max deviation {off:e})")));
        }
        let n_v = dim / 3;
        if faces.iter().flatten().any(|&i| i >= n_v) {
            return Err(Error::Dimension("face index out of range for the model".into()));
        }
        let degenerate = variance_ratios.iter().all(|&r| r == 0.0);
        Ok(Self {
            mean,
            basis,
            variance_ratios,
            faces,
            total_variance: 0.0,
            degenerate,
            provenance: String::new(),
        })
    }

    pub fn with_provenance(mut self, provenance: impl Into<String>) -> Self {
        self.provenance = provenance.into();
        self
    }

    pub fn with_total_variance(mut self, total: f64) -> Self {
        self.total_variance = total;
        self
    }

    pub fn with_faces(mut self, faces: Vec<[usize; 3]>) -> Result<Self> {
        if faces.iter().flatten().any(|&i| i >= self.n_vertices()) {
            return Err(Error::Dimension("face index out of range for the model".into()));
        }
        self.faces = faces;
        Ok(self)
    }

    pub fn n_vertices(&self) -> usize {
        self.mean.len() / 3
    }

    /// Number of components `d`.
    pub fn n_components(&self) -> usize {
        self.basis.ncols()
    }

    pub fn mean(&self) -> &DVector<f64> {
        &self.mean
    }

    pub fn basis(&self) -> &DMatrix<f64> {
        &self.basis
    }

    pub fn variance_ratios(&self) -> &[f64] {
        &self.variance_ratios
    }

    pub fn faces(&self) -> &[[usize; 3]] {
        &self.faces
    }

    /// True when the training data had zero total variance.
    pub fn is_degenerate(&self) -> bool {
        self.degenerate
    }

    /// Sum of all covariance eigenvalues of the training data (0 if unknown).
    pub fn total_variance(&self) -> f64 {
        self.total_variance
    }

    /// Standard deviation of each component's coefficient over the training set.
    pub fn component_std(&self) -> Vec<f64> {
        self.variance_ratios
            .iter()
            .map(|r| (r * self.total_variance).sqrt())
            .collect()
    }

    pub fn provenance(&self) -> &str {
        &self.provenance
    }

    pub fn mean_mesh(&self) -> Result<HeadMesh> {
        HeadMesh::from_coords(self.mean.as_slice(), self.faces.clone())
    }

    fn check_mesh(&self, mesh: &HeadMesh) -> Result<()> {
        if mesh.n_vertices() != self.n_vertices() {
            return Err(Error::ShapeMismatch(format!(
                "mesh has {} vertices, model expects {}",
                mesh.n_vertices(),
                self.n_vertices()
            )));
        }
        if !self.faces.is_empty() && mesh.faces() != self.faces.as_slice() {
            return Err(Error::ShapeMismatch("mesh connectivity differs from the model".into()));
        }
        Ok(())
    }

    /// `mean + basis · coeffs` as a flat coordinate vector.
    pub fn decode_coords(&self, coeffs: &PcaCoeffs) -> Result<DVector<f64>> {
        if coeffs.len() != self.n_components() {
            return Err(Error::Dimension(format!(
                "{} coefficients for a {}-component model",
                coeffs.len(),
                self.n_components()
            )));
        }
        Ok(&self.mean + &self.basis * coeffs.values())
    }

    pub fn decode(&self, coeffs: &PcaCoeffs) -> Result<HeadMesh> {
        let coords = self.decode_coords(coeffs)?;
        HeadMesh::from_coords(coords.as_slice(), self.faces.clone())
    }

    pub fn encode(&self, mesh: &HeadMesh) -> Result<PcaCoeffs> {
        self.check_mesh(mesh)?;
        Ok(PcaCoeffs(self.basis.tr_mul(&(mesh.coords() - &self.mean))))
    }

    /// `‖m − decode(encode(m))‖ / ‖m − mean‖`, or 0 when `m` is the mean.
    pub fn reconstruction_error(&self, mesh: &HeadMesh) -> Result<f64> {
        self.check_mesh(mesh)?;
        let centered = mesh.coords() - &self.mean;
        let denom = centered.norm();
        if denom == 0.0 {
            return Ok(0.0);
        }
        let projected = &self.basis * self.basis.tr_mul(&centered);
        Ok((centered - projected).norm() / denom)
    }
}

/// Fits a `d`-component PCA model to meshes sharing one connectivity.
///
/// The basis comes from the thin SVD of the centred data matrix. Columns are
/// sorted by decreasing singular value and each is signed so its first
/// significant entry is positive. Directions beyond the data rank are
/// completed deterministically and get a variance ratio of 0.
pub fn fit_pca(meshes: &[HeadMesh], d: usize) -> Result<CariPcaModel> {
    let n = meshes.len();
    if n < 2 {
        return Err(Error::Dimension(format!("need at least 2 meshes, got {n}")));
    }
    let reference = &meshes[0];
    for (i, m) in meshes.iter().enumerate().skip(1) {
        reference
            .ensure_same_connectivity(m)
            .map_err(|e| Error::ShapeMismatch(format!("mesh {i}: {e}")))?;
    }
    let dim = 3 * reference.n_vertices();
    let max_d = dim.min(n - 1);
    if d == 0 || d > max_d {
        return Err(Error::Dimension(format!(
            "requested {d} components, allowed 1..={max_d} for {n} meshes of {} vertices",
            reference.n_vertices()
        )));
    }

    let mut data = DMatrix::zeros(dim, n);
    for (j, m) in meshes.iter().enumerate() {
        data.set_column(j, &m.coords());
    }
    let mut mean = DVector::zeros(dim);
    for col in data.column_iter() {
        mean += col;
    }
    mean /= n as f64;
    for mut col in data.column_iter_mut() {
        col -= &mean;
    }

    let svd = data.svd(true, false);
    let u = svd.u.expect("left singular vectors requested");
    let sigma = svd.singular_values;
    let mut order: Vec<usize> = (0..sigma.len()).collect();
    order.sort_by(|&a, &b| sigma[b].total_cmp(&sigma[a]).then(a.cmp(&b)));

    let energy: f64 = sigma.iter().map(|s| s * s).sum();
    let sigma_max = order.first().map(|&i| sigma[i]).unwrap_or(0.0);
    let rank_tol = sigma_max * (dim.max(n) as f64) * f64::EPSILON * 10.0;

    let mut basis = DMatrix::zeros(dim, d);
    let mut ratios = Vec::with_capacity(d);
    let mut filled = 0;
    for &i in order.iter().take(d) {
        if sigma[i] <= rank_tol || energy == 0.0 {
            break;
        }
        basis.set_column(filled, &u.column(i));
        ratios.push(sigma[i] * sigma[i] / energy);
        filled += 1;
    }
    complete_orthonormal(&mut basis, filled);
    ratios.resize(d, 0.0);
    for mut col in basis.column_iter_mut() {
        let peak = col.amax();
        if let Some(first) = col.iter().find(|v| v.abs() > 1e-8 * peak).copied() {
            if first < 0.0 {
                col.neg_mut();
            }
        }
    }

    let degenerate = filled == 0;
    if degenerate {
        log::warn!("PCA training data has zero variance; basis is an arbitrary orthonormal completion");
    }
    let model = CariPcaModel {
        mean,
        basis,
        variance_ratios: ratios,
        faces: reference.faces().to_vec(),
        total_variance: energy / (n - 1) as f64,
        degenerate,
        provenance: String::new(),
    };
    Ok(model)
}

/// Fills columns `filled..` with unit vectors orthogonal to all earlier
/// columns, drawn from the standard basis in order (modified Gram-Schmidt,
/// applied twice for stability).
fn complete_orthonormal(basis: &mut DMatrix<f64>, filled: usize) {
    let (dim, d) = basis.shape();
    let mut next = filled;
    let mut e = 0;
    while next < d && e < dim {
        let mut v = DVector::zeros(dim);
        v[e] = 1.0;
        e += 1;
        for _ in 0..2 {
            for k in 0..next {
                let proj = basis.column(k).dot(&v);
                v.axpy(-proj, &basis.column(k), 1.0);
            }
        }
        let norm = v.norm();
        if norm > 1e-6 {
            basis.set_column(next, &(v / norm));
            next += 1;
        }
    }
}
