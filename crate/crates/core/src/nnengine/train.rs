use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{backward, forward_batch, init_params, loss, CnnConfig, CnnParams, NetInput, NnError, Sgd};

/// Mini-batch SGD schedule.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub momentum: f64,
    pub batch_size: usize,
    pub epochs: usize,
    /// Epochs (0-based) at which the learning rate is multiplied by `lr_drop_factor`.
    pub lr_drops: Vec<usize>,
    pub lr_drop_factor: f64,
    pub seed: u64,
    pub network: CnnConfig,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            learning_rate: 0.01,
            momentum: 0.9,
            batch_size: 128,
            epochs: 30,
            lr_drops: vec![20],
            lr_drop_factor: 0.1,
            seed: 0,
            network: CnnConfig::default(),
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), NnError> {
        if self.batch_size == 0 {
            return Err(NnError::InvalidConfig("batch size must be >= 1".into()));
        }
        if !(self.lr_drop_factor > 0.0 && self.lr_drop_factor.is_finite()) {
            return Err(NnError::InvalidConfig("lr drop factor must be > 0".into()));
        }
        Ok(())
    }

    fn learning_rate_at(&self, epoch: usize) -> f64 {
        let drops = self.lr_drops.iter().filter(|&&e| epoch >= e).count();
        self.learning_rate * self.lr_drop_factor.powi(drops as i32)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    /// Mean per-sample loss over each epoch, measured before each update.
    pub epoch_losses: Vec<f64>,
    pub steps: usize,
}

/// Trains from `init_params(cfg.seed)` (or `init` when given). Sample order
/// is reshuffled every epoch from a stream derived from the seed, so a fixed
/// seed and fixed data give bit-identical parameters.
pub fn train_network(
    inputs: &[NetInput],
    targets: &[[f64; 2]],
    cfg: &TrainConfig,
    init: Option<CnnParams>,
) -> Result<(CnnParams, TrainReport), NnError> {
    cfg.validate()?;
    if inputs.len() != targets.len() {
        return Err(NnError::ShapeMismatch {
            what: "training targets",
            expected: vec![inputs.len(), 2],
            got: vec![targets.len(), 2],
        });
    }
    if inputs.is_empty() {
        return Err(NnError::InvalidConfig("empty training set".into()));
    }
    let mut params = init.unwrap_or_else(|| init_params(cfg.seed, cfg.network));
    params.validate()?;
    let mut opt = Sgd::new(&params, cfg.learning_rate, cfg.momentum)?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    rng.set_stream(1);
    let mut order: Vec<usize> = (0..inputs.len()).collect();
    let mut report = TrainReport {
        epoch_losses: Vec::with_capacity(cfg.epochs),
        steps: 0,
    };
    for epoch in 0..cfg.epochs {
        opt.learning_rate = cfg.learning_rate_at(epoch);
        order.shuffle(&mut rng);
        let mut total = 0.0;
        for chunk in order.chunks(cfg.batch_size) {
            let xs: Vec<NetInput> = chunk.iter().map(|&i| inputs[i].clone()).collect();
            let ys: Vec<[f64; 2]> = chunk.iter().map(|&i| targets[i]).collect();
            let (pred, cache) = forward_batch(&params, &xs)?;
            let l = loss(&pred, &ys);
            if !l.is_finite() {
                return Err(NnError::NonFinite("training loss"));
            }
            total += l;
            let grads = backward(&params, &cache, &ys, 1.0 / chunk.len() as f64)?;
            opt.step(&mut params, &grads)?;
            report.steps += 1;
        }
        if !params.all_finite() {
            return Err(NnError::NonFinite("parameters"));
        }
        let mean = total / inputs.len() as f64;
        log::debug!("epoch {epoch}: mean loss {mean:.6} (lr {})", opt.learning_rate);
        report.epoch_losses.push(mean);
    }
    Ok((params, report))
}
