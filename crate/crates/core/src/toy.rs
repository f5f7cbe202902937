//! Desk-scale adversarial trainer for exercising the perceptual losses.
//!
//! A linear generator maps an identity feature `x` (a stand-in for photo
//! features) to PCA coefficients `c = W x + b`. The decoded caricature gives
//! `dG = decode(c) − H_mean`, which is compared against the reconstruction
//! feature `dP` of the same identity. A small discriminator scores
//! coefficient vectors as real (drawn from the caricature corpus) or
//! generated. Both players are updated alternately with Adam.

use std::io::Write;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::exaggerate::{cosine, MeanHead};
use crate::losses::{self, LossWeights};
use crate::pca::{fit_pca, CariPcaModel, PcaCoeffs};
use crate::synth;

#[derive(Debug, Clone, PartialEq)]
pub struct ToyGenerator {
    /// `d × f`: coefficients from input features.
    weight: DMatrix<f64>,
    bias: DVector<f64>,
}

impl ToyGenerator {
    pub fn new(weight: DMatrix<f64>, bias: DVector<f64>) -> Result<Self> {
        if weight.nrows() != bias.len() {
            return Err(Error::Dimension(format!("weight {}x{}, bias {}", weight.nrows(), weight.ncols(), bias.len())));
        }
        if !weight.iter().chain(bias.iter()).all(|v| v.is_finite()) {
            return Err(Error::Config("generator parameters must be finite".into()));
        }
        Ok(Self { weight, bias })
    }

    pub fn weight(&self) -> &DMatrix<f64> {
        &self.weight
    }

    pub fn bias(&self) -> &DVector<f64> {
        &self.bias
    }

    pub fn generate(&self, input: &DVector<f64>) -> Result<PcaCoeffs> {
        if input.len() != self.weight.ncols() {
            return Err(Error::Dimension(format!(
                "input feature of length {}, generator expects {}",
                input.len(),
                self.weight.ncols()
            )));
        }
        PcaCoeffs::new(&self.weight * input + &self.bias)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DiscriminatorKind {
    Affine,
    TwoLayer { hidden: usize },
}

#[derive(Debug, Clone, PartialEq)]
pub enum ToyDiscriminator {
    /// `s = w·c + b`.
    Affine { weight: DVector<f64>, bias: f64 },
    /// `s = w2·tanh(W1 c + b1) + b2`.
    TwoLayer {
        w1: DMatrix<f64>,
        b1: DVector<f64>,
        w2: DVector<f64>,
        b2: f64,
    },
}

struct DiscGrad {
    parts: Vec<Vec<f64>>,
}

impl ToyDiscriminator {
    fn init(kind: DiscriminatorKind, d: usize, rng: &mut ChaCha8Rng) -> Self {
        match kind {
            DiscriminatorKind::Affine => ToyDiscriminator::Affine {
                weight: synth::gaussian_vector(rng, d) * 0.1,
                bias: 0.5,
            },
            DiscriminatorKind::TwoLayer { hidden } => ToyDiscriminator::TwoLayer {
                w1: DMatrix::from_fn(hidden, d, |_, _| rng.sample::<f64, _>(rand_distr::StandardNormal) * 0.3),
                b1: DVector::zeros(hidden),
                w2: synth::gaussian_vector(rng, hidden) * 0.1,
                b2: 0.5,
            },
        }
    }

    pub fn score(&self, c: &DVector<f64>) -> f64 {
        match self {
            ToyDiscriminator::Affine { weight, bias } => weight.dot(c) + bias,
            ToyDiscriminator::TwoLayer { w1, b1, w2, b2 } => {
                let h = (w1 * c + b1).map(f64::tanh);
                w2.dot(&h) + b2
            }
        }
    }

    fn input_gradient(&self, c: &DVector<f64>) -> DVector<f64> {
        match self {
            ToyDiscriminator::Affine { weight, .. } => weight.clone(),
            ToyDiscriminator::TwoLayer { w1, b1, w2, .. } => {
                let h = (w1 * c + b1).map(f64::tanh);
                let delta = w2.component_mul(&h.map(|t| 1.0 - t * t));
                w1.tr_mul(&delta)
            }
        }
    }

    fn zero_grad(&self) -> DiscGrad {
        let parts = match self {
            ToyDiscriminator::Affine { weight, .. } => vec![vec![0.0; weight.len()], vec![0.0]],
            ToyDiscriminator::TwoLayer { w1, b1, w2, .. } => {
                vec![vec![0.0; w1.len()], vec![0.0; b1.len()], vec![0.0; w2.len()], vec![0.0]]
            }
        };
        DiscGrad { parts }
    }

    /// Adds `upstream · ∂s/∂θ` at input `c` into `acc`.
    fn accumulate(&self, c: &DVector<f64>, upstream: f64, acc: &mut DiscGrad) {
        match self {
            ToyDiscriminator::Affine { .. } => {
                for (a, v) in acc.parts[0].iter_mut().zip(c.iter()) {
                    *a += upstream * v;
                }
                acc.parts[1][0] += upstream;
            }
            ToyDiscriminator::TwoLayer { w1, b1, w2, .. } => {
                let h = (w1 * c + b1).map(f64::tanh);
                let delta = w2.component_mul(&h.map(|t| 1.0 - t * t)) * upstream;
                let rows = w1.nrows();
                // column-major W1: entry (r, k) at k * rows + r
                for k in 0..c.len() {
                    for r in 0..rows {
                        acc.parts[0][k * rows + r] += delta[r] * c[k];
                    }
                }
                for r in 0..rows {
                    acc.parts[1][r] += delta[r];
                    acc.parts[2][r] += upstream * h[r];
                }
                acc.parts[3][0] += upstream;
            }
        }
    }

    fn params_mut(&mut self) -> Vec<&mut [f64]> {
        match self {
            ToyDiscriminator::Affine { weight, bias } => vec![weight.as_mut_slice(), std::slice::from_mut(bias)],
            ToyDiscriminator::TwoLayer { w1, b1, w2, b2 } => vec![
                w1.as_mut_slice(),
                b1.as_mut_slice(),
                w2.as_mut_slice(),
                std::slice::from_mut(b2),
            ],
        }
    }
}

/// Identity features, their reconstruction features `dP`, and real
/// coefficient samples from the caricature corpus.
#[derive(Debug, Clone)]
pub struct ToyDataset {
    pub inputs: Vec<DVector<f64>>,
    pub reconstructions: Vec<DVector<f64>>,
    pub real_coeffs: Vec<DVector<f64>>,
}

impl ToyDataset {
    fn validate(&self, model: &CariPcaModel, mean: &MeanHead) -> Result<usize> {
        if self.inputs.is_empty() || self.real_coeffs.is_empty() {
            return Err(Error::Batch("toy dataset needs identities and real samples".into()));
        }
        if self.inputs.len() != self.reconstructions.len() {
            return Err(Error::Dimension(format!(
                "{} inputs but {} reconstructions",
                self.inputs.len(),
                self.reconstructions.len()
            )));
        }
        if mean.n_vertices() != model.n_vertices() {
            return Err(Error::ShapeMismatch("mean head and model differ in vertex count".into()));
        }
        let f = self.inputs[0].len();
        let dim = 3 * model.n_vertices();
        if self.inputs.iter().any(|x| x.len() != f)
            || self.reconstructions.iter().any(|p| p.len() != dim)
            || self.real_coeffs.iter().any(|c| c.len() != model.n_components())
        {
            return Err(Error::Dimension("inconsistent toy dataset dimensions".into()));
        }
        Ok(f)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ToyTrainConfig {
    pub steps: usize,
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    pub batch_size: usize,
    pub seed: u64,
    pub discriminator: DiscriminatorKind,
    /// Standard deviation of the initial generator weights.
    pub init_scale: f64,
}

impl Default for ToyTrainConfig {
    fn default() -> Self {
        Self {
            steps: 500,
            learning_rate: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            batch_size: 32,
            seed: 0,
            discriminator: DiscriminatorKind::Affine,
            init_scale: 0.01,
        }
    }
}

impl ToyTrainConfig {
    /// Applies `key=value` lines (`#` comments allowed) on top of `self`.
    /// Recognises the config fields plus `lambda_cha` / `lambda_cari`,
    /// which update `weights`.
    pub fn apply_kv(&mut self, text: &str, weights: &mut LossWeights) -> Result<()> {
        for (n, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| Error::format(n + 1, format!("expected key=value, got `{line}`")))?;
            let (key, value) = (key.trim(), value.trim());
            fn num<T: std::str::FromStr>(line: usize, key: &str, value: &str) -> Result<T> {
                value
                    .parse()
                    .map_err(|_| Error::format(line, format!("invalid value `{value}` for `{key}`")))
            }
            match key {
                "steps" => self.steps = num(n + 1, key, value)?,
                "learning_rate" | "lr" => self.learning_rate = num(n + 1, key, value)?,
                "beta1" => self.beta1 = num(n + 1, key, value)?,
                "beta2" => self.beta2 = num(n + 1, key, value)?,
                "epsilon" => self.epsilon = num(n + 1, key, value)?,
                "batch_size" => self.batch_size = num(n + 1, key, value)?,
                "seed" => self.seed = num(n + 1, key, value)?,
                "init_scale" => self.init_scale = num(n + 1, key, value)?,
                "lambda_cha" => weights.lambda_cha = num(n + 1, key, value)?,
                "lambda_cari" => weights.lambda_cari = num(n + 1, key, value)?,
                "discriminator" => {
                    self.discriminator = match value {
                        "affine" => DiscriminatorKind::Affine,
                        v => match v.strip_prefix("two-layer:").map(str::parse) {
                            Some(Ok(hidden)) => DiscriminatorKind::TwoLayer { hidden },
                            _ => return Err(Error::format(n + 1, format!("unknown discriminator `{v}`"))),
                        },
                    }
                }
                other => return Err(Error::format(n + 1, format!("unknown key `{other}`"))),
            }
        }
        *weights = LossWeights::new(weights.lambda_cha, weights.lambda_cari)?;
        Ok(())
    }

    fn validate(&self) -> Result<()> {
        if self.batch_size == 0 || !(self.learning_rate > 0.0) || !(0.0..1.0).contains(&self.beta1) || !(0.0..1.0).contains(&self.beta2) {
            return Err(Error::Config(format!("invalid trainer configuration {self:?}")));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TraceRow {
    pub step: usize,
    pub l_adv_d: f64,
    pub l_adv_g: f64,
    pub l_cha: f64,
    pub l_cari: f64,
    pub l_total: f64,
}

pub fn write_trace_csv<W: Write>(rows: &[TraceRow], w: &mut W) -> Result<()> {
    writeln!(w, "step,l_adv_d,l_adv_g,l_cha,l_cari,l_total")?;
    for r in rows {
        writeln!(w, "{},{},{},{},{},{}", r.step, r.l_adv_d, r.l_adv_g, r.l_cha, r.l_cari, r.l_total)?;
    }
    Ok(())
}

#[derive(Debug, Clone)]
pub struct ToyTrainOutput {
    pub generator: ToyGenerator,
    pub discriminator: ToyDiscriminator,
    pub trace: Vec<TraceRow>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ToyEvaluation {
    /// Mean cosine between `dG` and `dP` over all identities.
    pub mean_cosine: f64,
    /// Mean `‖dG‖ / ‖dP‖` over all identities.
    pub mean_ratio: f64,
}

struct Adam {
    m: Vec<f64>,
    v: Vec<f64>,
}

impl Adam {
    fn new(n: usize) -> Self {
        Self {
            m: vec![0.0; n],
            v: vec![0.0; n],
        }
    }

    fn step(&mut self, params: &mut [f64], grad: &[f64], t: usize, cfg: &ToyTrainConfig) {
        let bc1 = 1.0 - cfg.beta1.powi(t as i32);
        let bc2 = 1.0 - cfg.beta2.powi(t as i32);
        for i in 0..params.len() {
            self.m[i] = cfg.beta1 * self.m[i] + (1.0 - cfg.beta1) * grad[i];
            self.v[i] = cfg.beta2 * self.v[i] + (1.0 - cfg.beta2) * grad[i] * grad[i];
            let m_hat = self.m[i] / bc1;
            let v_hat = self.v[i] / bc2;
            params[i] -= cfg.learning_rate * m_hat / (v_hat.sqrt() + cfg.epsilon);
        }
    }
}

/// `dG = (model mean − H_mean) + basis · c`.
fn generated_feature(offset: &DVector<f64>, model: &CariPcaModel, c: &DVector<f64>) -> DVector<f64> {
    offset + model.basis() * c
}

fn finite_or(step: usize, what: &str, v: f64) -> Result<f64> {
    if v.is_finite() {
        Ok(v)
    } else {
        Err(Error::Training {
            step,
            message: format!("{what} became non-finite"),
        })
    }
}

/// Alternating discriminator / generator training on the given weights.
/// Deterministic for a fixed seed: all sampling comes from one ChaCha
/// stream and every reduction runs in index order.
pub fn train_toy_gan(
    dataset: &ToyDataset,
    model: &CariPcaModel,
    mean: &MeanHead,
    weights: &LossWeights,
    config: &ToyTrainConfig,
) -> Result<ToyTrainOutput> {
    config.validate()?;
    let feature_dim = dataset.validate(model, mean)?;
    let d = model.n_components();
    let offset = model.mean() - mean.coords();
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);

    let mut gen = ToyGenerator {
        weight: DMatrix::from_fn(d, feature_dim, |_, _| {
            rng.sample::<f64, _>(rand_distr::StandardNormal) * config.init_scale
        }),
        bias: DVector::zeros(d),
    };
    let mut disc = ToyDiscriminator::init(config.discriminator, d, &mut rng);
    let mut gen_adam = [Adam::new(gen.weight.len()), Adam::new(d)];
    let mut disc_adam: Vec<Adam> = disc.params_mut().iter().map(|p| Adam::new(p.len())).collect();

    let batch = config.batch_size;
    let mut trace = Vec::with_capacity(config.steps);
    for step in 0..config.steps {
        let t = step + 1;
        let fake_idx: Vec<usize> = (0..batch).map(|_| rng.random_range(0..dataset.inputs.len())).collect();
        let real_idx: Vec<usize> = (0..batch).map(|_| rng.random_range(0..dataset.real_coeffs.len())).collect();
        let fakes: Vec<DVector<f64>> = fake_idx
            .iter()
            .map(|&k| &gen.weight * &dataset.inputs[k] + &gen.bias)
            .collect();

        // discriminator: fakes -> 0, reals -> 1
        let fake_scores: Vec<f64> = fakes.iter().map(|c| disc.score(c)).collect();
        let real_scores: Vec<f64> = real_idx.iter().map(|&k| disc.score(&dataset.real_coeffs[k])).collect();
        let l_adv_d = finite_or(step, "discriminator loss", losses::adv_loss_discriminator(&fake_scores, &real_scores)?)?;
        let mut dgrad = disc.zero_grad();
        for (c, s) in fakes.iter().zip(&fake_scores) {
            disc.accumulate(c, 2.0 * s / batch as f64, &mut dgrad);
        }
        for (&k, s) in real_idx.iter().zip(&real_scores) {
            disc.accumulate(&dataset.real_coeffs[k], -2.0 * (1.0 - s) / batch as f64, &mut dgrad);
        }
        for ((param, grad), adam) in disc.params_mut().into_iter().zip(&dgrad.parts).zip(&mut disc_adam) {
            adam.step(param, grad, t, config);
        }

        // generator: adversarial pull toward 1 plus the perceptual terms
        let mut grad_w = DMatrix::zeros(d, feature_dim);
        let mut grad_b = DVector::zeros(d);
        let (mut l_adv_g, mut l_cha, mut l_cari) = (0.0, 0.0, 0.0);
        let inv = 1.0 / batch as f64;
        for (c, &k) in fakes.iter().zip(&fake_idx) {
            let s = disc.score(c);
            l_adv_g += (1.0 - s).powi(2) * inv;
            let mut grad_c = disc.input_gradient(c) * (-2.0 * (1.0 - s) * inv);

            let d_g = generated_feature(&offset, model, c);
            let d_p = &dataset.reconstructions[k];
            l_cha += losses::character_raw(&d_g, d_p).map_err(|e| Error::Training { step, message: e.to_string() })? * inv;
            l_cari += losses::caricature_raw(&d_g, d_p).map_err(|e| Error::Training { step, message: e.to_string() })? * inv;
            if weights.lambda_cha > 0.0 || weights.lambda_cari > 0.0 {
                let grad_feature = losses::gradient_raw(&d_g, d_p, weights)
                    .map_err(|e| Error::Training { step, message: e.to_string() })?;
                grad_c += model.basis().tr_mul(&grad_feature) * inv;
            }
            grad_w.ger(1.0, &grad_c, &dataset.inputs[k], 1.0);
            grad_b += &grad_c;
        }
        let l_total = finite_or(step, "generator loss", losses::total_loss(l_adv_g, l_cha, l_cari, weights).unwrap_or(f64::NAN))?;
        gen_adam[0].step(gen.weight.as_mut_slice(), grad_w.as_slice(), t, config);
        gen_adam[1].step(gen.bias.as_mut_slice(), grad_b.as_slice(), t, config);
        if !gen.weight.iter().chain(gen.bias.iter()).all(|v| v.is_finite()) {
            return Err(Error::Training {
                step,
                message: "generator parameters became non-finite".into(),
            });
        }

        trace.push(TraceRow {
            step,
            l_adv_d,
            l_adv_g,
            l_cha,
            l_cari,
            l_total,
        });
    }

    Ok(ToyTrainOutput {
        generator: gen,
        discriminator: disc,
        trace,
    })
}

/// Mean cosine and magnitude ratio of `dG` against `dP` over the dataset.
pub fn evaluate_generator(
    generator: &ToyGenerator,
    dataset: &ToyDataset,
    model: &CariPcaModel,
    mean: &MeanHead,
) -> Result<ToyEvaluation> {
    dataset.validate(model, mean)?;
    let offset = model.mean() - mean.coords();
    let (mut cos_sum, mut ratio_sum) = (0.0, 0.0);
    for (x, d_p) in dataset.inputs.iter().zip(&dataset.reconstructions) {
        let c = generator.generate(x)?;
        let d_g = generated_feature(&offset, model, c.values());
        cos_sum += cosine(&d_g, d_p)?;
        ratio_sum += d_g.norm() / d_p.norm();
    }
    let n = dataset.inputs.len() as f64;
    Ok(ToyEvaluation {
        mean_cosine: cos_sum / n,
        mean_ratio: ratio_sum / n,
    })
}

/// Parameters of the synthetic world the toy trainer runs in.
#[derive(Debug, Clone, PartialEq)]
pub struct ToyScenarioConfig {
    pub rings: usize,
    pub segments: usize,
    /// Modes shared by normal heads and caricatures (identity directions).
    pub identity_modes: usize,
    /// Extra caricature-only style modes.
    pub style_modes: usize,
    pub corpus_size: usize,
    pub identities: usize,
    pub feature_dim: usize,
    /// How much larger caricature identity offsets are than normal ones.
    pub exaggeration: f64,
    pub seed: u64,
}

impl Default for ToyScenarioConfig {
    fn default() -> Self {
        Self {
            rings: 8,
            segments: 12,
            identity_modes: 6,
            style_modes: 4,
            corpus_size: 300,
            identities: 200,
            feature_dim: 8,
            exaggeration: 2.0,
            seed: 7,
        }
    }
}

#[derive(Debug, Clone)]
pub struct ToyScenario {
    pub model: CariPcaModel,
    pub mean: MeanHead,
    pub dataset: ToyDataset,
}

impl ToyScenario {
    /// Builds a mean head, a caricature corpus and its PCA model, and a set
    /// of identities with input features and reconstruction features.
    pub fn generate(cfg: &ToyScenarioConfig) -> Result<Self> {
        let base = synth::uv_sphere(cfg.rings, cfg.segments, [0.5, 0.62, 0.45])?;
        let k = cfg.identity_modes + cfg.style_modes;
        let modes = synth::smooth_modes(&base, k);
        let id_scales: Vec<f64> = (0..cfg.identity_modes).map(|j| 0.06 / (1.0 + 0.3 * j as f64)).collect();

        let mut cari_scales: Vec<f64> = id_scales.iter().map(|s| s * cfg.exaggeration).collect();
        cari_scales.extend((0..cfg.style_modes).map(|j| 0.03 / (1.0 + 0.5 * j as f64)));
        let (corpus, _) = synth::linear_corpus(&base, &modes, &cari_scales, cfg.corpus_size, cfg.seed)?;
        let model = fit_pca(&corpus, k)?.with_provenance("toy scenario caricature corpus");
        let real_coeffs = corpus
            .iter()
            .map(|m| model.encode(m).map(PcaCoeffs::into_inner))
            .collect::<Result<Vec<_>>>()?;

        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed.wrapping_add(1));
        let mixing = DMatrix::from_fn(cfg.feature_dim, cfg.identity_modes, |_, _| {
            rng.sample::<f64, _>(rand_distr::StandardNormal) / (cfg.identity_modes as f64).sqrt()
        });
        let mut inputs = Vec::with_capacity(cfg.identities);
        let mut reconstructions = Vec::with_capacity(cfg.identities);
        for _ in 0..cfg.identities {
            let z = synth::gaussian_vector(&mut rng, cfg.identity_modes);
            let mut d_p = DVector::zeros(3 * base.n_vertices());
            for (j, s) in id_scales.iter().enumerate() {
                d_p.axpy(z[j] * s, &modes[j], 1.0);
            }
            let noise = synth::gaussian_vector(&mut rng, cfg.feature_dim) * 0.05;
            inputs.push(&mixing * &z + noise);
            reconstructions.push(d_p);
        }
        Ok(Self {
            model,
            mean: MeanHead::new(base),
            dataset: ToyDataset {
                inputs,
                reconstructions,
                real_coeffs,
            },
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn kv_config_parsing() {
        let mut cfg = ToyTrainConfig::default();
        let mut w = LossWeights::default();
        cfg.apply_kv("# pilot\nsteps = 20\nlr=0.01\nseed=3\nlambda_cari=0\ndiscriminator=two-layer:8\n", &mut w)
            .unwrap();
        assert_eq!(cfg.steps, 20);
        assert_eq!(cfg.learning_rate, 0.01);
        assert_eq!(w.lambda_cari, 0.0);
        assert_eq!(cfg.discriminator, DiscriminatorKind::TwoLayer { hidden: 8 });
        assert!(cfg.apply_kv("bogus=1", &mut w).is_err());
        assert!(cfg.apply_kv("steps", &mut w).is_err());
    }

    #[test]
    fn discriminator_gradients_match_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let disc = ToyDiscriminator::init(DiscriminatorKind::TwoLayer { hidden: 4 }, 3, &mut rng);
        let c = DVector::from_vec(vec![0.3, -0.2, 0.5]);
        let g = disc.input_gradient(&c);
        for i in 0..3 {
            let (mut a, mut b) = (c.clone(), c.clone());
            a[i] += 1e-6;
            b[i] -= 1e-6;
            let fd = (disc.score(&a) - disc.score(&b)) / 2e-6;
            assert!((fd - g[i]).abs() < 1e-8);
        }
        let mut acc = disc.zero_grad();
        disc.accumulate(&c, 1.0, &mut acc);
        let mut probe = disc.clone();
        let base = probe.score(&c);
        let analytic = acc.parts[0][1];
        probe.params_mut()[0][1] += 1e-6;
        let fd = (probe.score(&c) - base) / 1e-6;
        assert!((fd - analytic).abs() < 1e-5);
    }

    #[test]
    fn short_run_is_deterministic() {
        let cfg = ToyScenarioConfig {
            identities: 20,
            corpus_size: 40,
            ..Default::default()
        };
        let scenario = ToyScenario::generate(&cfg).unwrap();
        let train = ToyTrainConfig {
            steps: 15,
            seed: 42,
            ..Default::default()
        };
        let w = LossWeights::default();
        let a = train_toy_gan(&scenario.dataset, &scenario.model, &scenario.mean, &w, &train).unwrap();
        let b = train_toy_gan(&scenario.dataset, &scenario.model, &scenario.mean, &w, &train).unwrap();
        assert_eq!(a.generator, b.generator);
        assert_eq!(a.trace, b.trace);
        assert_eq!(a.trace.len(), 15);
    }

    #[test]
    fn bad_dataset_rejected() {
        let scenario = ToyScenario::generate(&ToyScenarioConfig {
            identities: 5,
            corpus_size: 20,
            ..Default::default()
        })
        .unwrap();
        let mut ds = scenario.dataset.clone();
        ds.reconstructions.pop();
        let err = train_toy_gan(&ds, &scenario.model, &scenario.mean, &LossWeights::default(), &ToyTrainConfig::default());
        assert!(err.is_err());
    }

    #[test]
    fn zero_reconstruction_is_a_training_error() {
        let scenario = ToyScenario::generate(&ToyScenarioConfig {
            identities: 3,
            corpus_size: 20,
            ..Default::default()
        })
        .unwrap();
        let mut ds = scenario.dataset.clone();
        for p in &mut ds.reconstructions {
            p.fill(0.0);
        }
        let cfg = ToyTrainConfig {
            steps: 3,
            ..Default::default()
        };
        match train_toy_gan(&ds, &scenario.model, &scenario.mean, &LossWeights::default(), &cfg) {
            Err(Error::Training { step, .. }) => assert_eq!(step, 0),
            other => panic!("expected training error, got {other:?}"),
        }
    }

    #[test]
    fn csv_header() {
        let mut buf = Vec::new();
        write_trace_csv(
            &[TraceRow {
                step: 0,
                l_adv_d: 0.5,
                l_adv_g: 0.25,
                l_cha: 1.0,
                l_cari: 0.5,
                l_total: 12.25,
            }],
            &mut buf,
        )
        .unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text, "step,l_adv_d,l_adv_g,l_cha,l_cari,l_total\n0,0.5,0.25,1,0.5,12.25\n");
    }
}
