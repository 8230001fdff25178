//! Parameter naming and the small layer vocabulary both networks share.
//!
//! A layer `name` owns `name.w` and `name.b`.

use d3net_neural::{Graph, ParamStore, Real, Var};

use crate::error::Result;

pub(crate) fn weight(name: &str) -> String {
    format!("{name}.w")
}

pub(crate) fn bias(name: &str) -> String {
    format!("{name}.b")
}

/// Weight gain: `U(-b, b)` with `b = sqrt(1 / fan_in)`. He-uniform (gain
/// 6) makes activations grow through the unnormalized residual and skip
/// sums; this bound keeps them at the input scale.
const INIT_GAIN: f64 = 1.0;

/// `[out, in, k, k]` weight and zero bias.
pub(crate) fn init_conv<T: Real>(s: &mut ParamStore<T>, name: &str, out_c: usize, in_c: usize, k: usize) -> Result<()> {
    s.add_fan_in_uniform(&weight(name), [out_c, in_c, k, k], INIT_GAIN)?;
    s.add_zeros(&bias(name), [1, out_c, 1, 1])?;
    Ok(())
}

/// Transposed-convolution weight `[in, out, k, k]`; fan-in is taken over the
/// `out * k * k` taps each input sample is scattered to.
pub(crate) fn init_conv_t<T: Real>(s: &mut ParamStore<T>, name: &str, in_c: usize, out_c: usize, k: usize) -> Result<()> {
    s.add_fan_in_uniform(&weight(name), [in_c, out_c, k, k], INIT_GAIN)?;
    s.add_zeros(&bias(name), [1, out_c, 1, 1])?;
    Ok(())
}

pub(crate) fn init_res_block<T: Real>(s: &mut ParamStore<T>, name: &str, c: usize) -> Result<()> {
    init_conv(s, &format!("{name}.c1"), c, c, 3)?;
    init_conv(s, &format!("{name}.c2"), c, c, 3)
}

/// Zeroes a layer's weight and bias.
pub(crate) fn zero_layer<T: Real>(s: &mut ParamStore<T>, name: &str) {
    for p in [weight(name), bias(name)] {
        if let Some(t) = s.value_mut(&p) {
            t.fill(T::zero());
        }
    }
}

pub(crate) fn conv<T: Real>(
    g: &mut Graph<T>,
    s: &ParamStore<T>,
    name: &str,
    x: Var,
    stride: usize,
    pad: usize,
) -> Result<Var> {
    let w = g.param(s, &weight(name))?;
    let b = g.param(s, &bias(name))?;
    Ok(g.conv2d(x, w, Some(b), stride, pad)?)
}

pub(crate) fn conv_t<T: Real>(
    g: &mut Graph<T>,
    s: &ParamStore<T>,
    name: &str,
    x: Var,
    stride: usize,
    pad: usize,
) -> Result<Var> {
    let w = g.param(s, &weight(name))?;
    let b = g.param(s, &bias(name))?;
    Ok(g.conv_transpose2d(x, w, Some(b), stride, pad)?)
}

/// `x + conv(relu(conv(x)))` with 3x3 same-size convolutions.
pub(crate) fn res_block<T: Real>(g: &mut Graph<T>, s: &ParamStore<T>, name: &str, x: Var) -> Result<Var> {
    let h = conv(g, s, &format!("{name}.c1"), x, 1, 1)?;
    let h = g.relu(h);
    let h = conv(g, s, &format!("{name}.c2"), h, 1, 1)?;
    Ok(g.add(x, h)?)
}
