use std::time::Instant;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{build_examples, compute_loss, Checkpoint, Track, TrainingExample};
use crate::config::RunConfig;
use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::model::{forward, ModelParams};
use crate::nn::{clip_grad_norm, Adam, AdamConfig, Tape};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub adam_epsilon: f64,
    pub batch_size: usize,
    pub epochs: usize,
    /// Global gradient-norm ceiling.
    pub clip_norm: f64,
    pub seed: u64,
    /// Optional cap on optimiser steps across all epochs.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_steps: Option<u64>,
}

impl TrainConfig {
    pub fn paper() -> Self {
        let adam = AdamConfig::default();
        TrainConfig {
            learning_rate: adam.learning_rate,
            beta1: adam.beta1,
            beta2: adam.beta2,
            adam_epsilon: adam.epsilon,
            batch_size: 16,
            epochs: 100,
            clip_norm: 0.5,
            seed: 0,
            max_steps: None,
        }
    }

    /// Smaller batches, for short CPU runs.
    pub fn desk() -> Self {
        TrainConfig {
            batch_size: 4,
            ..Self::paper()
        }
    }

    pub fn adam(&self) -> AdamConfig {
        AdamConfig {
            learning_rate: self.learning_rate,
            beta1: self.beta1,
            beta2: self.beta2,
            epsilon: self.adam_epsilon,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !self.learning_rate.is_finite() || self.learning_rate < 0.0 {
            return Err(Error::Parameter(format!("learning rate {} is invalid", self.learning_rate)));
        }
        if !(0.0..1.0).contains(&self.beta1) || !(0.0..1.0).contains(&self.beta2) {
            return Err(Error::Parameter("Adam betas must lie in [0, 1)".into()));
        }
        if self.adam_epsilon.is_nan() || self.adam_epsilon <= 0.0 {
            return Err(Error::Parameter("Adam epsilon must be positive".into()));
        }
        if self.batch_size == 0 {
            return Err(Error::Parameter("batch size must be positive".into()));
        }
        if self.seed > i64::MAX as u64 {
            return Err(Error::Parameter(format!("seed {} exceeds {}", self.seed, i64::MAX)));
        }
        if self.clip_norm.is_nan() || self.clip_norm <= 0.0 {
            return Err(Error::Parameter(format!("clip norm {} must be positive", self.clip_norm)));
        }
        Ok(())
    }
}

/// Batch-averaged values of one optimiser step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepStats {
    pub loss: f64,
    pub kl_denoised: f64,
    pub kl_filtered: f64,
    pub lambda_rec: f64,
    pub ri_iterations: f64,
    /// Gradient norm before clipping.
    pub grad_norm: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochMetrics {
    /// 1-based.
    pub epoch: usize,
    pub steps: u64,
    pub mean_loss: f64,
    pub mean_kl_denoised: f64,
    pub mean_lambda_rec: f64,
    pub mean_ri_iters: f64,
    pub seconds: f64,
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub checkpoint: Checkpoint,
    pub metrics: Vec<EpochMetrics>,
}

struct ExampleResult {
    loss: f64,
    kl_denoised: f64,
    kl_filtered: f64,
    lambda_rec: f64,
    ri_iterations: usize,
    grads: Vec<Matrix>,
}

fn example_gradients(params: &ModelParams, ex: &TrainingExample, cfg: &RunConfig) -> Result<ExampleResult> {
    let mut tape = Tape::new();
    let vars = params.bind(&mut tape);
    let trace = forward(&mut tape, &ex.mix_tr, &ex.mix_in, &vars, &params.dims, &cfg.inference)?;
    let terms = compute_loss(&mut tape, &ex.target, &trace, &vars, &cfg.loss)?;
    let mut grads = tape.backward(terms.total)?;
    let grads = vars
        .in_order()
        .into_iter()
        .zip(params.parameters())
        .map(|(v, p)| {
            grads.take(v).unwrap_or_else(|| {
                let (r, c) = p.shape();
                Matrix::zeros(r, c)
            })
        })
        .collect();
    Ok(ExampleResult {
        loss: terms.value,
        kl_denoised: terms.kl_denoised,
        kl_filtered: terms.kl_filtered,
        lambda_rec: terms.lambda_rec,
        ri_iterations: trace.ri_iterations_used,
        grads,
    })
}

/// Optimisation state: parameters with their Adam moments, the shuffling
/// RNG and progress counters.
#[derive(Debug, Clone)]
pub struct Trainer {
    config: RunConfig,
    params: ModelParams,
    rng: ChaCha8Rng,
    rng_seed: u64,
    epoch: usize,
    step: u64,
}

impl Trainer {
    /// Fresh parameters drawn from the configured seed.
    pub fn new(config: RunConfig) -> Result<Self> {
        config.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(config.train.seed);
        let params = ModelParams::init(config.model, &mut rng);
        let rng_seed = config.train.seed;
        Ok(Trainer {
            config,
            params,
            rng,
            rng_seed,
            epoch: 0,
            step: 0,
        })
    }

    /// Continues from a checkpoint. `config` may change training settings
    /// but must keep the model and STFT dimensions.
    pub fn resume(checkpoint: Checkpoint, config: RunConfig) -> Result<Self> {
        config.validate()?;
        if config.model != checkpoint.config.model || config.stft != checkpoint.config.stft {
            return Err(Error::Dimension(
                "resumed configuration changes the model or STFT dimensions".into(),
            ));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(checkpoint.rng_seed);
        rng.set_word_pos(checkpoint.rng_word_pos);
        Ok(Trainer {
            config,
            params: checkpoint.params,
            rng,
            rng_seed: checkpoint.rng_seed,
            epoch: checkpoint.epoch,
            step: checkpoint.step,
        })
    }

    pub fn config(&self) -> &RunConfig {
        &self.config
    }

    pub fn params(&self) -> &ModelParams {
        &self.params
    }

    /// Completed epochs.
    pub fn epoch(&self) -> usize {
        self.epoch
    }

    pub fn step(&self) -> u64 {
        self.step
    }

    pub fn checkpoint(&self) -> Checkpoint {
        Checkpoint {
            params: self.params.clone(),
            config: self.config.clone(),
            epoch: self.epoch,
            step: self.step,
            rng_seed: self.rng_seed,
            rng_word_pos: self.rng.get_word_pos(),
        }
    }

    fn steps_exhausted(&self) -> bool {
        self.config.train.max_steps.is_some_and(|m| self.step >= m)
    }

    /// Averages per-example gradients, clips and applies one Adam update.
    pub fn train_step(&mut self, batch: &[&TrainingExample]) -> Result<StepStats> {
        if batch.is_empty() {
            return Err(Error::Usage("empty batch".into()));
        }
        let results = batch
            .par_iter()
            .map(|ex| example_gradients(&self.params, ex, &self.config))
            .collect::<Result<Vec<_>>>()?;
        let scale = 1.0 / batch.len() as f64;
        let mut params = self.params.parameters_mut();
        for r in &results {
            for (p, g) in params.iter_mut().zip(&r.grads) {
                p.accumulate_grad(g);
            }
        }
        for p in params.iter_mut() {
            p.grad.scale_in_place(scale);
        }
        let grad_norm = crate::nn::global_grad_norm(params.iter().map(|p| &**p));
        if !grad_norm.is_finite() {
            return Err(Error::Numeric(format!("gradient norm is {grad_norm}")));
        }
        clip_grad_norm(&mut params, self.config.train.clip_norm);
        Adam::new(self.config.train.adam()).step(params);
        self.step += 1;

        let mean = |f: fn(&ExampleResult) -> f64| results.iter().map(f).sum::<f64>() * scale;
        Ok(StepStats {
            loss: mean(|r| r.loss),
            kl_denoised: mean(|r| r.kl_denoised),
            kl_filtered: mean(|r| r.kl_filtered),
            lambda_rec: mean(|r| r.lambda_rec),
            ri_iterations: mean(|r| r.ri_iterations as f64),
            grad_norm,
        })
    }

    /// Mean loss over `examples` at the current parameters, without updating.
    pub fn mean_loss(&self, examples: &[TrainingExample]) -> Result<f64> {
        if examples.is_empty() {
            return Err(Error::Usage("no examples".into()));
        }
        let losses = examples
            .par_iter()
            .map(|ex| {
                let mut tape = Tape::new();
                let vars = self.params.bind(&mut tape);
                let trace = forward(&mut tape, &ex.mix_tr, &ex.mix_in, &vars, &self.params.dims, &self.config.inference)?;
                compute_loss(&mut tape, &ex.target, &trace, &vars, &self.config.loss).map(|t| t.value)
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(losses.iter().sum::<f64>() / losses.len() as f64)
    }

    /// One pass over `examples` in a freshly shuffled order. Stops early when
    /// the step cap is reached.
    pub fn run_epoch(&mut self, examples: &[TrainingExample]) -> Result<EpochMetrics> {
        if examples.is_empty() {
            return Err(Error::Usage("no training examples".into()));
        }
        let start = Instant::now();
        let mut order: Vec<usize> = (0..examples.len()).collect();
        order.shuffle(&mut self.rng);
        let (mut loss, mut kl, mut gate, mut iters) = (0.0, 0.0, 0.0, 0.0);
        let mut seen = 0usize;
        let mut steps = 0;
        for chunk in order.chunks(self.config.train.batch_size) {
            if self.steps_exhausted() {
                break;
            }
            let batch: Vec<&TrainingExample> = chunk.iter().map(|&i| &examples[i]).collect();
            let s = self.train_step(&batch)?;
            let n = batch.len() as f64;
            loss += s.loss * n;
            kl += s.kl_denoised * n;
            gate += s.lambda_rec * n;
            iters += s.ri_iterations * n;
            seen += batch.len();
            steps += 1;
            log::debug!("step {} loss {:.6} grad norm {:.4}", self.step, s.loss, s.grad_norm);
        }
        self.epoch += 1;
        let n = seen.max(1) as f64;
        Ok(EpochMetrics {
            epoch: self.epoch,
            steps,
            mean_loss: loss / n,
            mean_kl_denoised: kl / n,
            mean_lambda_rec: gate / n,
            mean_ri_iters: iters / n,
            seconds: start.elapsed().as_secs_f64(),
        })
    }

    /// Runs the remaining epochs, calling `on_epoch` after each one.
    pub fn fit(
        &mut self,
        examples: &[TrainingExample],
        mut on_epoch: impl FnMut(&EpochMetrics, &Trainer) -> Result<()>,
    ) -> Result<Vec<EpochMetrics>> {
        let mut metrics = Vec::new();
        while self.epoch < self.config.train.epochs && !self.steps_exhausted() {
            let m = self.run_epoch(examples)?;
            log::info!(
                "epoch {} loss {:.5} kl {:.5} gate {:.3} ri {:.2} ({:.1}s)",
                m.epoch,
                m.mean_loss,
                m.mean_kl_denoised,
                m.mean_lambda_rec,
                m.mean_ri_iters,
                m.seconds
            );
            on_epoch(&m, self)?;
            metrics.push(m);
        }
        Ok(metrics)
    }
}

/// Builds examples from `tracks` and trains from scratch. The returned
/// checkpoint holds the final-epoch parameters.
pub fn train(
    tracks: &[Track],
    config: &RunConfig,
    on_epoch: impl FnMut(&EpochMetrics, &Trainer) -> Result<()>,
) -> Result<TrainOutcome> {
    config.validate()?;
    let examples = tracks
        .par_iter()
        .map(|t| build_examples(t, &config.stft, &config.model))
        .collect::<Result<Vec<_>>>()?
        .into_iter()
        .flatten()
        .collect::<Vec<_>>();
    let mut trainer = Trainer::new(config.clone())?;
    let metrics = trainer.fit(&examples, on_epoch)?;
    Ok(TrainOutcome {
        checkpoint: trainer.checkpoint(),
        metrics,
    })
}
