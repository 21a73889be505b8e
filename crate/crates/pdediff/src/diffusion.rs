//! Noise schedule, forward corruption, the denoiser, and the data-driven
//! training loop.
//!
//! Nothing in this module knows about PDEs: training sees only solution
//! fields as raw arrays. Physics enters exclusively at sampling time, in
//! `sampler`.

use crate::data::{load_container, save_container, Dataset, EquationKind};
use crate::error::{Error, Result};
use crate::grid::{Field, GridSpec};
use crate::nn::{Adam, ArchConfig, UNet};
use crate::rng::{derive_stream, rng_from_seed};
use rand::seq::SliceRandom;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::path::Path;

pub const BETA_MIN: f64 = 1e-4;
pub const BETA_MAX: f64 = 0.02;
pub const T_TRAIN_DEFAULT: usize = 1000;
const CHECKPOINT_MAGIC: [u8; 4] = *b"PDCP";
const CHECKPOINT_VERSION: u32 = 1;

/// Diffusion timetable: `beta_t`, `alpha_t = 1 - beta_t`,
/// `alpha_bar_t = prod alpha_i`, `sigma_t = sqrt(beta_t)`, `t = 1..=T`.
#[derive(Debug, Clone, PartialEq)]
pub struct NoiseSchedule {
    betas: Vec<f64>,
    alphas: Vec<f64>,
    alpha_bars: Vec<f64>,
}

impl NoiseSchedule {
    /// Linear beta ramp from `BETA_MIN` at `t = 1` to `BETA_MAX` at `t = T`.
    pub fn linear(t_count: usize) -> Result<Self> {
        Self::linear_range(t_count, BETA_MIN, BETA_MAX)
    }

    pub fn linear_range(t_count: usize, beta_min: f64, beta_max: f64) -> Result<Self> {
        if t_count < 2 {
            return Err(Error::InvalidParameter(format!(
                "schedule needs at least 2 steps, got {t_count}"
            )));
        }
        if !(beta_min > 0.0 && beta_max < 1.0 && beta_min <= beta_max) {
            return Err(Error::InvalidParameter(format!(
                "beta range [{beta_min}, {beta_max}] must lie inside (0, 1)"
            )));
        }
        let mut betas = Vec::with_capacity(t_count);
        let mut alphas = Vec::with_capacity(t_count);
        let mut alpha_bars = Vec::with_capacity(t_count);
        let mut prod = 1.0;
        for i in 0..t_count {
            let beta = beta_min + (beta_max - beta_min) * i as f64 / (t_count - 1) as f64;
            let alpha = 1.0 - beta;
            prod *= alpha;
            betas.push(beta);
            alphas.push(alpha);
            alpha_bars.push(prod);
        }
        Ok(Self {
            betas,
            alphas,
            alpha_bars,
        })
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.betas.len()
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        false
    }

    fn check_t(&self, t: usize) -> Result<()> {
        if t == 0 || t > self.len() {
            return Err(Error::InvalidParameter(format!(
                "timestep {t} outside schedule 1..={}",
                self.len()
            )));
        }
        Ok(())
    }

    #[inline]
    pub fn beta(&self, t: usize) -> f64 {
        self.betas[t - 1]
    }

    #[inline]
    pub fn alpha(&self, t: usize) -> f64 {
        self.alphas[t - 1]
    }

    #[inline]
    pub fn alpha_bar(&self, t: usize) -> f64 {
        self.alpha_bars[t - 1]
    }

    #[inline]
    pub fn sigma(&self, t: usize) -> f64 {
        self.beta(t).sqrt()
    }
}

/// `u_t = sqrt(abar_t) u_0 + sqrt(1 - abar_t) xi`.
pub fn forward_noise(u0: &Field, t: usize, xi: &Field, s: &NoiseSchedule) -> Result<Field> {
    s.check_t(t)?;
    let ab = s.alpha_bar(t);
    u0.scaled(ab.sqrt()).add_scaled(xi, (1.0 - ab).sqrt())
}

/// Score relation `score = -eps / sqrt(1 - abar_t)`.
pub fn score_from_noise(eps: &Field, t: usize, s: &NoiseSchedule) -> Result<Field> {
    s.check_t(t)?;
    let ab = s.alpha_bar(t);
    Ok(eps.scaled(-1.0 / (1.0 - ab).sqrt()))
}

/// Anything that predicts the injected noise from a noisy field and a
/// timestep. Implemented by [`Denoiser`] and by test mocks.
pub trait NoisePredictor: Sync {
    fn predict_noise(&self, u: &Field, t: usize) -> Result<Field>;
}

/// Descriptor stored inside a checkpoint; makes the file self-describing.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DenoiserMeta {
    pub arch: ArchConfig,
    pub t_train: usize,
    pub beta_min: f64,
    pub beta_max: f64,
    /// Global max-abs scale of the training data (guidance de-normalizes
    /// with it at sampling time).
    pub scale: f64,
    pub equation: Option<EquationKind>,
    pub grid: GridSpec,
    pub seed: u64,
}

/// The trained noise predictor plus everything sampling needs.
#[derive(Debug, Clone)]
pub struct Denoiser {
    net: UNet,
    pub meta: DenoiserMeta,
}

impl Denoiser {
    pub fn new(meta: DenoiserMeta, init_seed: u64) -> Result<Self> {
        Ok(Self {
            net: UNet::new(meta.arch, init_seed)?,
            meta,
        })
    }

    pub fn schedule(&self) -> Result<NoiseSchedule> {
        NoiseSchedule::linear_range(self.meta.t_train, self.meta.beta_min, self.meta.beta_max)
    }

    pub fn param_count(&self) -> usize {
        self.net.param_count()
    }

    pub fn net(&self) -> &UNet {
        &self.net
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let descriptor = serde_json::to_vec(&self.meta)?;
        save_container(
            path,
            CHECKPOINT_MAGIC,
            CHECKPOINT_VERSION,
            &descriptor,
            self.net.params(),
        )
    }

    pub fn load(path: &Path) -> Result<Self> {
        let (descriptor, payload) = load_container(path, CHECKPOINT_MAGIC, CHECKPOINT_VERSION)?;
        let meta: DenoiserMeta = serde_json::from_slice(&descriptor)?;
        let net = UNet::from_params(meta.arch, payload)?;
        Ok(Self { net, meta })
    }
}

impl NoisePredictor for Denoiser {
    fn predict_noise(&self, u: &Field, t: usize) -> Result<Field> {
        let spec = u.spec();
        let y = self.net.forward(u.values(), spec.nx, spec.ny, t)?;
        Ok(Field::from_raw(spec, y))
    }
}

/// Training controls. `threads` fixes the gradient-reduction chunking, so
/// runs with equal `threads` values reproduce bit-identically; `threads = 1`
/// is fully sequential.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub lr_halve_every: usize,
    pub seed: u64,
    pub threads: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 400,
            batch_size: 64,
            learning_rate: 1e-3,
            lr_halve_every: 100,
            seed: 0,
            threads: rayon::current_num_threads(),
        }
    }
}

impl TrainConfig {
    pub fn lr_at_epoch(&self, epoch: usize) -> f64 {
        let halvings = (epoch.saturating_sub(1)) / self.lr_halve_every;
        self.learning_rate * 0.5f64.powi(halvings as i32)
    }
}

/// One row of the training trace.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TraceRow {
    pub iteration: usize,
    pub loss: f64,
    pub rmse: f64,
}

/// Write the loss trace as `iteration,loss,rmse` CSV.
pub fn write_trace_csv(rows: &[TraceRow], path: &Path) -> Result<()> {
    let mut out = String::from("iteration,loss,rmse\n");
    for r in rows {
        out.push_str(&format!("{},{:.10e},{:.10e}\n", r.iteration, r.loss, r.rmse));
    }
    crate::data::atomic_write(path, out.as_bytes())
}

/// Noise-prediction MSE of a model over a batch of clean fields, with
/// timesteps and noise drawn from `rng`. This is the evaluation form of the
/// training objective (no gradients).
pub fn training_loss(
    model: &impl NoisePredictor,
    batch: &[Field],
    s: &NoiseSchedule,
    rng: &mut impl Rng,
) -> Result<f64> {
    if batch.is_empty() {
        return Err(Error::InvalidParameter("loss needs a nonempty batch".into()));
    }
    let mut total = 0.0;
    let mut count = 0usize;
    for u0 in batch {
        let t = rng.random_range(1..=s.len());
        let xi = Field::standard_normal(u0.spec(), rng);
        let ut = forward_noise(u0, t, &xi, s)?;
        let eps = model.predict_noise(&ut, t)?;
        for (e, x) in eps.values().iter().zip(xi.values()) {
            total += (e - x) * (e - x);
        }
        count += u0.spec().len();
    }
    let loss = total / count as f64;
    if !loss.is_finite() {
        return Err(Error::non_finite("training loss"));
    }
    Ok(loss)
}

struct BatchDraw {
    sample: usize,
    t: usize,
    xi: Vec<f64>,
}

/// Train a fresh denoiser on a normalized dataset. Returns the model and the
/// per-iteration loss trace. Aborts when the loss goes non-finite or exceeds
/// 10x the first iteration's loss.
pub fn train(
    dataset: &Dataset,
    arch: ArchConfig,
    t_train: usize,
    cfg: &TrainConfig,
) -> Result<(Denoiser, Vec<TraceRow>)> {
    if dataset.is_empty() {
        return Err(Error::DegenerateDataset);
    }
    if dataset.max_abs() > 1.0 + 1e-9 {
        return Err(Error::InvalidParameter(
            "dataset must be normalized before training (max |value| > 1)".into(),
        ));
    }
    if cfg.batch_size == 0 || cfg.batch_size > dataset.len() {
        return Err(Error::InvalidParameter(format!(
            "batch size {} must be in 1..={}",
            cfg.batch_size,
            dataset.len()
        )));
    }
    if cfg.epochs == 0 || cfg.lr_halve_every == 0 {
        return Err(Error::InvalidParameter(
            "epochs and lr_halve_every must be positive".into(),
        ));
    }
    let grid = dataset.grid;
    let schedule = NoiseSchedule::linear_range(t_train, BETA_MIN, BETA_MAX)?;
    let meta = DenoiserMeta {
        arch,
        t_train,
        beta_min: BETA_MIN,
        beta_max: BETA_MAX,
        scale: dataset.scale,
        equation: Some(dataset.equation),
        grid,
        seed: cfg.seed,
    };
    let mut model = Denoiser::new(meta, cfg.seed)?;
    model.net.check_input(grid.nx, grid.ny)?;

    let n_params = model.net.param_count();
    let mut opt = Adam::new(n_params);
    let batches_per_epoch = dataset.len() / cfg.batch_size;
    if batches_per_epoch == 0 {
        return Err(Error::InvalidParameter("dataset smaller than one batch".into()));
    }
    let threads = cfg.threads.max(1);
    let npix = grid.len();

    let mut rng = rng_from_seed(cfg.seed);
    let mut order: Vec<usize> = (0..dataset.len()).collect();
    let mut trace = Vec::with_capacity(cfg.epochs * batches_per_epoch);
    let mut grads = vec![0.0; n_params];
    let mut initial_loss = f64::NAN;
    let mut iteration = 0usize;

    for epoch in 1..=cfg.epochs {
        let lr = cfg.lr_at_epoch(epoch);
        order.shuffle(&mut rng);
        for b in 0..batches_per_epoch {
            iteration += 1;
            // Draw the batch sequentially so the stream is reproducible,
            // then fan the heavy work out over fixed chunks.
            let draws: Vec<BatchDraw> = (0..cfg.batch_size)
                .map(|k| {
                    let sample = order[b * cfg.batch_size + k];
                    let t = rng.random_range(1..=schedule.len());
                    let xi: Vec<f64> = (0..npix)
                        .map(|_| rng.sample::<f64, _>(rand_distr::StandardNormal))
                        .collect();
                    BatchDraw { sample, t, xi }
                })
                .collect();

            let chunk_size = cfg.batch_size.div_ceil(threads);
            let partials: Vec<(Vec<f64>, f64)> = draws
                .par_chunks(chunk_size)
                .map(|chunk| {
                    let mut g = vec![0.0; n_params];
                    let mut loss_sum = 0.0;
                    for draw in chunk {
                        let u0 = dataset.sample(draw.sample);
                        let ab = schedule.alpha_bar(draw.t);
                        let (sa, sb) = (ab.sqrt(), (1.0 - ab).sqrt());
                        let ut: Vec<f64> = u0
                            .iter()
                            .zip(&draw.xi)
                            .map(|(u, x)| sa * u + sb * x)
                            .collect();
                        let (eps, cache) = model
                            .net
                            .forward_cached(&ut, grid.nx, grid.ny, draw.t)
                            .expect("shapes validated at train start");
                        let scale = 2.0 / (cfg.batch_size * npix) as f64;
                        let mut grad_y = vec![0.0; npix];
                        for i in 0..npix {
                            let d = eps[i] - draw.xi[i];
                            loss_sum += d * d;
                            grad_y[i] = scale * d;
                        }
                        model.net.backward(&cache, &grad_y, &mut g);
                    }
                    (g, loss_sum)
                })
                .collect();

            grads.fill(0.0);
            let mut loss = 0.0;
            for (g, l) in &partials {
                for (acc, v) in grads.iter_mut().zip(g) {
                    *acc += v;
                }
                loss += l;
            }
            let loss = loss / (cfg.batch_size * npix) as f64;
            if iteration == 1 {
                initial_loss = loss;
            }
            if !loss.is_finite() || loss > 10.0 * initial_loss.max(1e-12) {
                return Err(Error::TrainingDiverged {
                    iteration,
                    loss,
                    initial: initial_loss,
                });
            }
            opt.step(model.net.params_mut(), &grads, lr);
            trace.push(TraceRow {
                iteration,
                loss,
                rmse: loss.sqrt(),
            });
        }
    }
    Ok((model, trace))
}

/// Draw `n` clean fields from a dataset using derived streams (helper for
/// loss evaluations).
pub fn sample_fields(dataset: &Dataset, n: usize, seed: u64) -> Vec<Field> {
    (0..n)
        .map(|i| {
            let mut r = derive_stream(seed, i as u64);
            let k = r.random_range(0..dataset.len());
            dataset.sample_field(k)
        })
        .collect()
}
