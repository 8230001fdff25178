//! Central finite-difference gradient checks against the tape.

use crate::error::NeuralError;
use crate::graph::{Graph, Var};
use crate::store::ParamStore;

#[derive(Debug, Clone, PartialEq)]
pub struct GradCheckReport {
    pub checked: usize,
    pub max_rel_err: f64,
    /// `name[index]` of the worst entry.
    pub worst: String,
}

/// `|a - n| / max(|a|, |n|, floor)`; the floor keeps entries whose true
/// gradient is numerically zero from dividing by noise.
pub fn relative_error(analytic: f64, numeric: f64, floor: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(floor)
}

/// Compares backward-pass gradients of every parameter in `store` with
/// `(L(p + h) - L(p - h)) / 2h`.
///
/// `per_tensor` entries are checked in each parameter tensor, evenly spaced
/// over its elements (all of them when the tensor is smaller). `build` must
/// construct the scalar loss from the given store.
pub fn check_params<F, E>(
    store: &ParamStore<f64>,
    per_tensor: usize,
    step: f64,
    floor: f64,
    build: F,
) -> Result<GradCheckReport, E>
where
    F: Fn(&ParamStore<f64>, &mut Graph<f64>) -> Result<Var, E>,
    E: From<NeuralError>,
{
    let mut g = Graph::new();
    let loss = build(store, &mut g)?;
    let grads = g.backward(loss)?;

    let eval = |s: &ParamStore<f64>| -> Result<f64, E> {
        let mut g = Graph::new();
        let l = build(s, &mut g)?;
        Ok(g.value(l).item())
    };

    let mut report = GradCheckReport {
        checked: 0,
        max_rel_err: 0.0,
        worst: String::new(),
    };
    let mut probe = store.clone();
    let names: Vec<String> = store.names().map(str::to_owned).collect();
    for name in names {
        let n = store.value(&name).expect("listed").len();
        let count = per_tensor.min(n);
        let analytic = grads.param(&name).map(|t| t.data().to_vec()).unwrap_or_else(|| vec![0.0; n]);
        for k in 0..count {
            let idx = if count == n { k } else { k * n / count + (n / count) / 2 };
            let orig = store.value(&name).expect("listed").data()[idx];
            probe.value_mut(&name).expect("listed").data_mut()[idx] = orig + step;
            let up = eval(&probe)?;
            probe.value_mut(&name).expect("listed").data_mut()[idx] = orig - step;
            let down = eval(&probe)?;
            probe.value_mut(&name).expect("listed").data_mut()[idx] = orig;
            let numeric = (up - down) / (2.0 * step);
            let err = relative_error(analytic[idx], numeric, floor);
            report.checked += 1;
            if err > report.max_rel_err || report.worst.is_empty() {
                report.max_rel_err = err;
                report.worst = format!("{name}[{idx}] analytic {:.6e} numeric {numeric:.6e}", analytic[idx]);
            }
        }
    }
    Ok(report)
}
