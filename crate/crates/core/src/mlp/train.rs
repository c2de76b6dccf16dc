use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::model::{MlpModel, Workspace};
use crate::data::LabeledPointCloud;
use crate::error::{Error, Result};

/// Batch size `initial * growth^(epoch / interval_epochs)`, capped at the
/// training-set size.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BatchSchedule {
    pub initial: usize,
    pub growth: usize,
    pub interval_epochs: usize,
}

impl Default for BatchSchedule {
    fn default() -> Self {
        Self {
            initial: 32,
            growth: 2,
            interval_epochs: 2,
        }
    }
}

impl BatchSchedule {
    pub fn size_at(&self, epoch: usize, n_train: usize) -> usize {
        let mut b = self.initial;
        for _ in 0..epoch / self.interval_epochs.max(1) {
            if b >= n_train {
                break;
            }
            b = b.saturating_mul(self.growth);
        }
        b.min(n_train).max(1)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub adam_eps: f64,
    pub batch: BatchSchedule,
    pub max_steps: usize,
    pub target_error: f64,
    /// Steps to keep training once the target error is reached.
    pub patience: usize,
    pub eval_interval: usize,
    pub holdout_fraction: f64,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            learning_rate: 0.01,
            beta1: 0.9,
            beta2: 0.999,
            adam_eps: 1e-8,
            batch: BatchSchedule::default(),
            max_steps: 20_000,
            target_error: 0.05,
            patience: 2_000,
            eval_interval: 100,
            holdout_fraction: 0.2,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidConfig(m));
        if !(self.target_error > 0.0 && self.target_error < 1.0) {
            return bad(format!("target_error must lie in (0, 1), got {}", self.target_error));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return bad(format!("learning_rate must be > 0, got {}", self.learning_rate));
        }
        if !(0.0..1.0).contains(&self.beta1) || !(0.0..1.0).contains(&self.beta2) {
            return bad("Adam betas must lie in [0, 1)".into());
        }
        if !(self.adam_eps > 0.0) {
            return bad("adam_eps must be > 0".into());
        }
        if self.batch.initial == 0 || self.batch.growth == 0 || self.batch.interval_epochs == 0 {
            return bad("batch schedule entries must be >= 1".into());
        }
        if self.max_steps == 0 || self.eval_interval == 0 {
            return bad("max_steps and eval_interval must be >= 1".into());
        }
        if !(self.holdout_fraction > 0.0 && self.holdout_fraction < 1.0) {
            return bad(format!(
                "holdout_fraction must lie in (0, 1), got {}",
                self.holdout_fraction
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainResult {
    /// (minibatches seen, held-out misclassification rate).
    pub error_curve: Vec<(usize, f64)>,
    pub converged_at: Option<usize>,
    pub best_error: f64,
    pub steps: usize,
    pub final_model: MlpModel,
}

impl TrainResult {
    pub fn final_error(&self) -> f64 {
        self.error_curve.last().map_or(1.0, |e| e.1)
    }
}

/// Stratified train / held-out split.
pub fn stratified_split(labels: &[u8], holdout_fraction: f64, seed: u64) -> (Vec<usize>, Vec<usize>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut train = Vec::new();
    let mut test = Vec::new();
    for class in [0u8, 1] {
        let mut idx: Vec<usize> = (0..labels.len()).filter(|&i| labels[i] == class).collect();
        idx.shuffle(&mut rng);
        let n_test = (idx.len() as f64 * holdout_fraction).round() as usize;
        let n_test = n_test.min(idx.len().saturating_sub(1));
        test.extend_from_slice(&idx[..n_test]);
        train.extend_from_slice(&idx[n_test..]);
    }
    train.sort_unstable();
    test.sort_unstable();
    (train, test)
}

struct Adam {
    m: Vec<f64>,
    v: Vec<f64>,
    t: i32,
}

impl Adam {
    fn step(&mut self, params: &mut [f64], grad: &[f64], cfg: &TrainConfig) {
        self.t += 1;
        let c1 = 1.0 - cfg.beta1.powi(self.t);
        let c2 = 1.0 - cfg.beta2.powi(self.t);
        for (((p, g), m), v) in params.iter_mut().zip(grad).zip(&mut self.m).zip(&mut self.v) {
            *m = cfg.beta1 * *m + (1.0 - cfg.beta1) * g;
            *v = cfg.beta2 * *v + (1.0 - cfg.beta2) * g * g;
            *p -= cfg.learning_rate * (*m / c1) / ((*v / c2).sqrt() + cfg.adam_eps);
        }
    }
}

/// Minibatch Adam on softmax cross-entropy. The held-out error is recorded
/// every `eval_interval` steps and at the final step.
pub fn train(model: MlpModel, cloud: &LabeledPointCloud, config: &TrainConfig) -> Result<TrainResult> {
    config.validate()?;
    if !cloud.has_both_classes() {
        return Err(Error::InvalidInput("training data needs both classes".into()));
    }
    if cloud.dim() != model.input_dim {
        return Err(Error::DimensionMismatch {
            expected: model.input_dim,
            found: cloud.dim(),
            index: 0,
        });
    }
    let (train_idx, test_idx) = stratified_split(&cloud.labels, config.holdout_fraction, config.seed);
    let mut model = model;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed.wrapping_add(0x5bd1_e995));
    let n_params = model.params().len();
    let mut adam = Adam {
        m: vec![0.0; n_params],
        v: vec![0.0; n_params],
        t: 0,
    };
    let mut grad = vec![0.0; n_params];
    let mut ws = Workspace::default();
    let mut order = train_idx.clone();
    order.shuffle(&mut rng);
    let mut cursor = 0;
    let mut epoch = 0;

    let mut curve = Vec::new();
    let mut converged_at = None;
    let mut best_error = f64::INFINITY;
    let mut step = 0;
    while step < config.max_steps {
        let b = config.batch.size_at(epoch, train_idx.len());
        if cursor + b > order.len() {
            order.shuffle(&mut rng);
            cursor = 0;
            epoch += 1;
            continue;
        }
        let batch = &order[cursor..cursor + b];
        cursor += b;
        let loss = model.loss_and_grad(&cloud.points, &cloud.labels, batch, &mut grad, &mut ws);
        if !loss.is_finite() || grad.iter().any(|g| !g.is_finite()) {
            return Err(Error::Divergence { step });
        }
        adam.step(model.params_mut(), &grad, config);
        step += 1;

        if step % config.eval_interval == 0 || step == config.max_steps {
            let err = model.error_rate(&cloud.points, &cloud.labels, Some(&test_idx))?;
            curve.push((step, err));
            best_error = best_error.min(err);
            if converged_at.is_none() && err <= config.target_error {
                converged_at = Some(step);
            }
        }
        if let Some(c) = converged_at {
            if step >= c + config.patience {
                if curve.last().map(|e| e.0) != Some(step) {
                    let err = model.error_rate(&cloud.points, &cloud.labels, Some(&test_idx))?;
                    curve.push((step, err));
                    best_error = best_error.min(err);
                }
                break;
            }
        }
    }
    if !model.is_finite() {
        return Err(Error::Divergence { step });
    }
    Ok(TrainResult {
        error_curve: curve,
        converged_at,
        best_error,
        steps: step,
        final_model: model,
    })
}
