//! ADAM and the stepwise learning-rate schedule.

use crate::error::{NeuralError, Result};
use crate::store::ParamStore;
use crate::tensor::Real;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdamConfig {
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        AdamConfig {
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

/// One bias-corrected ADAM update of every parameter in `store`.
///
/// Every parameter must carry a gradient; the shared step counter is
/// incremented exactly once. Moments are kept in the parameter precision,
/// the bias corrections are computed in `f64`.
pub fn adam_step<T: Real>(store: &mut ParamStore<T>, lr: f64, cfg: AdamConfig) -> Result<()> {
    if let Some((name, _)) = store.iter().find(|(_, p)| p.grad.is_none()) {
        return Err(NeuralError::Contract(format!("parameter {name:?} has no gradient")));
    }
    let t = store.step + 1;
    let bc1 = 1.0 - cfg.beta1.powf(t as f64);
    let bc2 = 1.0 - cfg.beta2.powf(t as f64);
    let (b1, b2) = (T::lit(cfg.beta1), T::lit(cfg.beta2));
    let (one_b1, one_b2) = (T::lit(1.0 - cfg.beta1), T::lit(1.0 - cfg.beta2));
    let (bc1, bc2) = (T::lit(bc1), T::lit(bc2));
    let (lr, eps) = (T::lit(lr), T::lit(cfg.eps));

    for (_, p) in store.iter_mut() {
        let g = p.grad.as_ref().expect("checked above");
        let data = p.value.data_mut();
        let m = p.m.data_mut();
        let v = p.v.data_mut();
        for i in 0..data.len() {
            let gi = g.data()[i];
            m[i] = b1 * m[i] + one_b1 * gi;
            v[i] = b2 * v[i] + one_b2 * gi * gi;
            let m_hat = m[i] / bc1;
            let v_hat = v[i] / bc2;
            data[i] -= lr * m_hat / (v_hat.sqrt() + eps);
        }
    }
    store.step = t;
    Ok(())
}

/// `lr(t) = max(floor, base - decrement * floor(t / interval))`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LrSchedule {
    pub base: f64,
    pub decrement: f64,
    pub interval: u64,
    pub floor: f64,
}

impl Default for LrSchedule {
    fn default() -> Self {
        LrSchedule {
            base: 0.0004,
            decrement: 0.00005,
            interval: 1000,
            floor: 0.00005,
        }
    }
}

/// Rates are computed on an integer grid of 1e-9 so decimal schedules land
/// on exactly the nearest `f64` of the decimal value (0.0004 - 2 * 0.00005
/// gives 0.0003, not 0.00030000000000000003).
const LR_QUANTUM: f64 = 1e9;

pub fn lr_at(schedule: &LrSchedule, t: u64) -> f64 {
    let q = |v: f64| (v * LR_QUANTUM).round() as i64;
    let steps = (t / schedule.interval.max(1)) as i64;
    let raw = q(schedule.base).saturating_sub(steps.saturating_mul(q(schedule.decrement)));
    raw.max(q(schedule.floor)) as f64 / LR_QUANTUM
}
