//! Adversarial (least-squares), character and caricature losses.
//!
//! With `g = dG` (generated caricature feature) and `p = dP` (reconstructed
//! head feature):
//!
//! * character loss `1 − cos(g, p)` penalises identity drift and ignores scale;
//! * caricature loss `exp(−cos(g, p) · ‖g‖ / ‖p‖)` rewards growing `g` along
//!   `p`. Since `cos · ‖g‖/‖p‖ = ⟨g, p⟩ / ‖p‖²`, its gradient in `g` is
//!   simply `−L · p / ‖p‖²`, which fades exponentially as the
//!   exaggeration grows.

use nalgebra::DVector;

use crate::error::{Error, Result};
use crate::exaggerate::{cosine, FeatureVector};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossWeights {
    pub lambda_cha: f64,
    pub lambda_cari: f64,
}

impl Default for LossWeights {
    fn default() -> Self {
        Self {
            lambda_cha: 2.0,
            lambda_cari: 20.0,
        }
    }
}

impl LossWeights {
    pub fn new(lambda_cha: f64, lambda_cari: f64) -> Result<Self> {
        if !(lambda_cha >= 0.0 && lambda_cari >= 0.0) || !lambda_cha.is_finite() || !lambda_cari.is_finite() {
            return Err(Error::Config(format!(
                "loss weights must be finite and non-negative, got ({lambda_cha}, {lambda_cari})"
            )));
        }
        Ok(Self { lambda_cha, lambda_cari })
    }

    /// Adversarial term only.
    pub fn adversarial_only() -> Self {
        Self {
            lambda_cha: 0.0,
            lambda_cari: 0.0,
        }
    }
}

fn mean(values: impl ExactSizeIterator<Item = f64>) -> f64 {
    let n = values.len() as f64;
    values.sum::<f64>() / n
}

/// Discriminator objective: fake scores pushed to 0, real scores to 1.
pub fn adv_loss_discriminator(scores_fake: &[f64], scores_real: &[f64]) -> Result<f64> {
    if scores_fake.is_empty() || scores_real.is_empty() {
        return Err(Error::Batch("adversarial loss needs non-empty fake and real batches".into()));
    }
    Ok(mean(scores_fake.iter().map(|s| s * s)) + mean(scores_real.iter().map(|s| (1.0 - s).powi(2))))
}

/// Generator objective: fake scores pulled toward 1.
pub fn adv_loss_generator(scores_fake: &[f64]) -> Result<f64> {
    if scores_fake.is_empty() {
        return Err(Error::Batch("adversarial loss needs a non-empty batch".into()));
    }
    Ok(mean(scores_fake.iter().map(|s| (1.0 - s).powi(2))))
}

pub(crate) fn character_raw(g: &DVector<f64>, p: &DVector<f64>) -> Result<f64> {
    Ok(1.0 - cosine(g, p)?)
}

pub(crate) fn caricature_raw(g: &DVector<f64>, p: &DVector<f64>) -> Result<f64> {
    let cos = cosine(g, p)?;
    Ok((-cos * g.norm() / p.norm()).exp())
}

pub fn character_loss(d_g: &FeatureVector, d_p: &FeatureVector) -> Result<f64> {
    character_raw(d_g.values(), d_p.values())
}

pub fn caricature_loss(d_g: &FeatureVector, d_p: &FeatureVector) -> Result<f64> {
    caricature_raw(d_g.values(), d_p.values())
}

fn batch_mean<F>(pairs: &[(FeatureVector, FeatureVector)], f: F) -> Result<f64>
where
    F: Fn(&FeatureVector, &FeatureVector) -> Result<f64>,
{
    if pairs.is_empty() {
        return Err(Error::Batch("empty batch".into()));
    }
    let mut sum = 0.0;
    for (g, p) in pairs {
        sum += f(g, p)?;
    }
    Ok(sum / pairs.len() as f64)
}

/// Batch character loss: mean over `(dG, dP)` pairs.
pub fn character_loss_batch(pairs: &[(FeatureVector, FeatureVector)]) -> Result<f64> {
    batch_mean(pairs, character_loss)
}

/// Batch caricature loss: mean over `(dG, dP)` pairs.
pub fn caricature_loss_batch(pairs: &[(FeatureVector, FeatureVector)]) -> Result<f64> {
    batch_mean(pairs, caricature_loss)
}

pub fn total_loss(adv: f64, cha: f64, cari: f64, weights: &LossWeights) -> Result<f64> {
    let total = adv + weights.lambda_cha * cha + weights.lambda_cari * cari;
    if !total.is_finite() {
        return Err(Error::Config(format!("non-finite loss terms ({adv}, {cha}, {cari})")));
    }
    Ok(total)
}

pub(crate) fn gradient_raw(g: &DVector<f64>, p: &DVector<f64>, w: &LossWeights) -> Result<DVector<f64>> {
    let cos = cosine(g, p)?;
    let (ng, np) = (g.norm(), p.norm());
    // d(1 - cos)/dg = -(p̂ - cos ĝ) / ‖g‖
    let mut grad = g * (w.lambda_cha * cos / (ng * ng)) - p * (w.lambda_cha / (ng * np));
    let cari = (-g.dot(p) / (np * np)).exp();
    grad.axpy(-w.lambda_cari * cari / (np * np), p, 1.0);
    Ok(grad)
}

/// Gradient of `λ_cha · L_cha + λ_cari · L_cari` with respect to `dG`.
pub fn loss_gradients(d_g: &FeatureVector, d_p: &FeatureVector, weights: &LossWeights) -> Result<DVector<f64>> {
    gradient_raw(d_g.values(), d_p.values(), weights)
}
