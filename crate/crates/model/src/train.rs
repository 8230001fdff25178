//! The optimization loop: seeded patches, L1 loss, ADAM, stepwise lr.

use d3net_neural::{adam_step, lr_at, AdamConfig, Graph, LrSchedule, ParamStore};
use serde::{Deserialize, Serialize};

use crate::data::{PatchSampler, TrainPair};
use crate::error::{ensure, Result};
use crate::network::{ModelSpec, Network};

#[derive(Serialize, Deserialize)]
#[serde(remote = "LrSchedule", deny_unknown_fields)]
struct LrScheduleDef {
    base: f64,
    decrement: f64,
    interval: u64,
    floor: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainConfig {
    /// Target patch side, pixels.
    pub patch_size: usize,
    pub batch_size: usize,
    pub iterations: u64,
    #[serde(with = "LrScheduleDef")]
    pub schedule: LrSchedule,
    pub seed: u64,
    /// Invoke the checkpoint hook every this many iterations (0: never).
    pub checkpoint_every: u64,
    pub log_every: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            patch_size: 16,
            batch_size: 32,
            iterations: 1000,
            schedule: LrSchedule::default(),
            seed: 0,
            checkpoint_every: 0,
            log_every: 10,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        ensure!(
            self.patch_size >= 8 && self.patch_size.is_multiple_of(2),
            "patch_size must be even and >= 8, got {}",
            self.patch_size
        );
        ensure!(self.batch_size >= 1, "batch_size must be >= 1");
        ensure!(self.log_every >= 1, "log_every must be >= 1");
        let s = &self.schedule;
        ensure!(
            s.floor > 0.0 && s.base >= s.floor && s.decrement >= 0.0 && s.interval >= 1,
            "learning-rate schedule needs base >= floor > 0, decrement >= 0, interval >= 1"
        );
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LogEntry {
    pub iter: u64,
    pub lr: f64,
    pub loss: f64,
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub network: Network,
    /// Entries every `log_every` iterations, starting at the first.
    pub log: Vec<LogEntry>,
    /// Loss of every iteration run.
    pub losses: Vec<f64>,
}

/// Trains `spec` from a fresh seeded initialization.
pub fn train(
    spec: ModelSpec,
    pairs: &[TrainPair],
    cfg: &TrainConfig,
    on_checkpoint: &mut dyn FnMut(&Network) -> Result<()>,
) -> Result<TrainOutcome> {
    let net = Network::new(spec, cfg.seed)?;
    train_from(net, pairs, cfg, on_checkpoint)
}

/// Continues training; iteration numbering (and thus the learning rate)
/// resumes from `net.params.iteration`.
pub fn train_from(
    mut net: Network,
    pairs: &[TrainPair],
    cfg: &TrainConfig,
    on_checkpoint: &mut dyn FnMut(&Network) -> Result<()>,
) -> Result<TrainOutcome> {
    cfg.validate()?;
    let spec = net.spec;
    let sampler = PatchSampler::new(pairs, cfg.patch_size, cfg.seed)?;
    ensure!(
        sampler.scale() == spec.scale(),
        "{} needs 1:{} training pairs, got 1:{}",
        spec.name(),
        spec.scale(),
        sampler.scale()
    );
    ensure!(
        sampler.channels() == spec.in_channels(),
        "{} has {} input channels, training images have {}",
        spec.name(),
        spec.in_channels(),
        sampler.channels()
    );
    if let ModelSpec::D2net(c) = spec {
        let d = c.divisor();
        ensure!(cfg.patch_size.is_multiple_of(d), "d2net patch size must be a multiple of {d}");
    }

    let adam = AdamConfig::default();
    let mut log = Vec::new();
    let mut losses = Vec::with_capacity(cfg.iterations as usize);
    let start = net.params.iteration;
    for t in start..start + cfg.iterations {
        let lr = lr_at(&cfg.schedule, t);
        let (x, y) = sampler.batch::<f32>(t, cfg.batch_size);
        let loss = step(&spec, &mut net.params, x, y, lr, adam)?;
        net.params.iteration = t + 1;
        losses.push(loss);
        if (t - start).is_multiple_of(cfg.log_every) {
            log.push(LogEntry { iter: t, lr, loss });
        }
        if cfg.checkpoint_every > 0 && (t + 1 - start).is_multiple_of(cfg.checkpoint_every) {
            on_checkpoint(&net)?;
        }
    }
    Ok(TrainOutcome {
        network: net,
        log,
        losses,
    })
}

fn step(
    spec: &ModelSpec,
    params: &mut ParamStore<f32>,
    x: d3net_neural::Tensor<f32>,
    y: d3net_neural::Tensor<f32>,
    lr: f64,
    adam: AdamConfig,
) -> Result<f64> {
    let mut g = Graph::new();
    let xv = g.input(x);
    let pred = spec.forward(&mut g, params, xv)?;
    let target = g.input(y);
    let loss = g.l1_loss(pred, target)?;
    let grads = g.backward(loss)?;
    params.zero_grad();
    params.accumulate(&grads, 1.0)?;
    adam_step(params, lr, adam)?;
    Ok(g.value(loss).item() as f64)
}

/// JSON-lines form of the log.
pub fn log_to_jsonl(log: &[LogEntry]) -> String {
    log.iter()
        .map(|e| serde_json::to_string(e).expect("log entry serializes") + "\n")
        .collect()
}
