//! Reverse-mode tape.
//!
//! A [`Graph`] records every op as a node holding its forward value. Calling
//! [`Graph::backward`] walks the tape once in reverse and returns gradients
//! for all parameter nodes (and, for tests, any other node). A parameter
//! referenced several times in one graph maps to a single node, so shared
//! weights accumulate their gradient contributions.

use std::collections::{BTreeMap, HashMap};

use crate::error::{shape_ensure, NeuralError, Result};
use crate::kernels::{
    channel_sums, conv_backward_input, conv_backward_weight, conv_forward, conv_out_dim, conv_t_out_dim,
};
use crate::store::ParamStore;
use crate::tensor::{Real, Shape, Tensor};

/// Handle to a node on the tape.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Var(usize);

#[derive(Debug, Clone)]
enum Op {
    Leaf,
    Param,
    Conv2d { x: Var, w: Var, b: Option<Var>, stride: usize, pad: usize },
    ConvT2d { x: Var, w: Var, b: Option<Var>, stride: usize, pad: usize },
    Relu(Var),
    Add(Var, Var),
    Mul(Var, Var),
    Concat(Var, Var),
    Upsample2(Var),
    Sum(Var),
    L1(Var, Var),
}

struct Node<T> {
    value: Tensor<T>,
    op: Op,
}

pub struct Graph<T> {
    nodes: Vec<Node<T>>,
    params: HashMap<String, Var>,
}

/// Result of a backward pass.
pub struct Gradients<T> {
    params: BTreeMap<String, Tensor<T>>,
    nodes: Vec<Option<Vec<T>>>,
    shapes: Vec<Shape>,
}

impl<T: Real> Gradients<T> {
    /// Gradient of a parameter by name, if the parameter is on the tape.
    pub fn param(&self, name: &str) -> Option<&Tensor<T>> {
        self.params.get(name)
    }

    pub fn params(&self) -> &BTreeMap<String, Tensor<T>> {
        &self.params
    }

    /// Gradient of any node; zeros if the loss does not depend on it.
    pub fn of(&self, v: Var) -> Tensor<T> {
        match &self.nodes[v.0] {
            Some(g) => Tensor::new(self.shapes[v.0], g.clone()).expect("grad shape"),
            None => Tensor::zeros(self.shapes[v.0]),
        }
    }
}

impl<T: Real> Default for Graph<T> {
    fn default() -> Self {
        Self::new()
    }
}

impl<T: Real> Graph<T> {
    pub fn new() -> Self {
        Graph {
            nodes: Vec::new(),
            params: HashMap::new(),
        }
    }

    fn push(&mut self, value: Tensor<T>, op: Op) -> Var {
        self.nodes.push(Node { value, op });
        Var(self.nodes.len() - 1)
    }

    pub fn value(&self, v: Var) -> &Tensor<T> {
        &self.nodes[v.0].value
    }

    pub fn shape(&self, v: Var) -> Shape {
        self.nodes[v.0].value.shape()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// A constant input (no gradient is reported for it by name).
    pub fn input(&mut self, t: Tensor<T>) -> Var {
        self.push(t, Op::Leaf)
    }

    /// Puts a stored parameter on the tape; repeated calls with the same name
    /// return the same node.
    pub fn param(&mut self, store: &ParamStore<T>, name: &str) -> Result<Var> {
        if let Some(&v) = self.params.get(name) {
            return Ok(v);
        }
        let value = store
            .value(name)
            .ok_or_else(|| NeuralError::UnknownParam(name.to_owned()))?
            .clone();
        let v = self.push(value, Op::Param);
        self.params.insert(name.to_owned(), v);
        Ok(v)
    }

    fn check_bias(&self, b: Option<Var>, channels: usize) -> Result<()> {
        if let Some(b) = b {
            let bs = self.shape(b);
            shape_ensure!(
                bs.iter().product::<usize>() == channels,
                "bias has {} elements, expected {channels}",
                bs.iter().product::<usize>()
            );
        }
        Ok(())
    }

    /// Cross-correlation with zero padding. `w` is `[out_c, in_c, kh, kw]`.
    pub fn conv2d(&mut self, x: Var, w: Var, b: Option<Var>, stride: usize, pad: usize) -> Result<Var> {
        let xs = self.shape(x);
        let ws = self.shape(w);
        shape_ensure!(stride >= 1, "stride must be >= 1");
        shape_ensure!(
            xs[1] == ws[1],
            "conv2d input has {} channels, weight expects {}",
            xs[1],
            ws[1]
        );
        self.check_bias(b, ws[0])?;
        let oh = conv_out_dim(xs[2], ws[2], stride, pad);
        let ow = conv_out_dim(xs[3], ws[3], stride, pad);
        let (Some(oh), Some(ow)) = (oh, ow) else {
            return Err(NeuralError::Shape(format!(
                "kernel {}x{} does not fit input {}x{} with pad {pad}",
                ws[2], ws[3], xs[2], xs[3]
            )));
        };
        let bias = b.map(|b| self.value(b).data());
        let out = conv_forward(self.value(x).data(), xs, self.value(w).data(), ws, bias, stride, pad, (oh, ow));
        let t = Tensor::new([xs[0], ws[0], oh, ow], out)?;
        Ok(self.push(t, Op::Conv2d { x, w, b, stride, pad }))
    }

    /// Transposed convolution, the adjoint of [`conv2d`](Self::conv2d) with the
    /// same weight. `w` is `[in_c, out_c, kh, kw]`; output side is
    /// `(H - 1) * stride - 2 pad + kh`.
    pub fn conv_transpose2d(&mut self, x: Var, w: Var, b: Option<Var>, stride: usize, pad: usize) -> Result<Var> {
        let xs = self.shape(x);
        let ws = self.shape(w);
        shape_ensure!(stride >= 1, "stride must be >= 1");
        shape_ensure!(
            xs[1] == ws[0],
            "conv_transpose2d input has {} channels, weight expects {}",
            xs[1],
            ws[0]
        );
        self.check_bias(b, ws[1])?;
        let oh = conv_t_out_dim(xs[2], ws[2], stride, pad);
        let ow = conv_t_out_dim(xs[3], ws[3], stride, pad);
        let (Some(oh), Some(ow)) = (oh, ow) else {
            return Err(NeuralError::Shape(format!(
                "transposed kernel {}x{} with pad {pad} gives an empty output for {}x{}",
                ws[2], ws[3], xs[2], xs[3]
            )));
        };
        // The correlation this is the adjoint of must map the output grid
        // back onto exactly the input grid.
        shape_ensure!(
            conv_out_dim(oh, ws[2], stride, pad) == Some(xs[2]) && conv_out_dim(ow, ws[3], stride, pad) == Some(xs[3]),
            "inconsistent transposed convolution geometry"
        );
        let mut out = conv_backward_input(self.value(x).data(), xs, self.value(w).data(), ws, stride, pad, (oh, ow));
        if let Some(b) = b {
            let bias = self.value(b).data();
            let plane = oh * ow;
            for (i, chunk) in out.chunks_mut(plane).enumerate() {
                let bv = bias[i % ws[1]];
                chunk.iter_mut().for_each(|v| *v += bv);
            }
        }
        let t = Tensor::new([xs[0], ws[1], oh, ow], out)?;
        Ok(self.push(t, Op::ConvT2d { x, w, b, stride, pad }))
    }

    pub fn relu(&mut self, x: Var) -> Var {
        let t = self.value(x);
        let out = Tensor::new(t.shape(), t.data().iter().map(|&v| v.max(T::zero())).collect()).expect("same shape");
        self.push(out, Op::Relu(x))
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        shape_ensure!(self.shape(a) == self.shape(b), "add: {:?} vs {:?}", self.shape(a), self.shape(b));
        let data = self.value(a).data().iter().zip(self.value(b).data()).map(|(&x, &y)| x + y).collect();
        let t = Tensor::new(self.shape(a), data)?;
        Ok(self.push(t, Op::Add(a, b)))
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        shape_ensure!(self.shape(a) == self.shape(b), "mul: {:?} vs {:?}", self.shape(a), self.shape(b));
        let data = self.value(a).data().iter().zip(self.value(b).data()).map(|(&x, &y)| x * y).collect();
        let t = Tensor::new(self.shape(a), data)?;
        Ok(self.push(t, Op::Mul(a, b)))
    }

    pub fn concat_channels(&mut self, a: Var, b: Var) -> Result<Var> {
        let (sa, sb) = (self.shape(a), self.shape(b));
        shape_ensure!(
            sa[0] == sb[0] && sa[2] == sb[2] && sa[3] == sb[3],
            "concat: {sa:?} vs {sb:?}"
        );
        let plane = sa[2] * sa[3];
        let mut data = Vec::with_capacity((sa[1] + sb[1]) * plane * sa[0]);
        for n in 0..sa[0] {
            data.extend_from_slice(&self.value(a).data()[n * sa[1] * plane..(n + 1) * sa[1] * plane]);
            data.extend_from_slice(&self.value(b).data()[n * sb[1] * plane..(n + 1) * sb[1] * plane]);
        }
        let t = Tensor::new([sa[0], sa[1] + sb[1], sa[2], sa[3]], data)?;
        Ok(self.push(t, Op::Concat(a, b)))
    }

    /// Nearest-neighbour x2 upsampling.
    pub fn upsample2(&mut self, x: Var) -> Var {
        let [n, c, h, w] = self.shape(x);
        let src = self.value(x);
        let out = Tensor::from_fn([n, c, 2 * h, 2 * w], |i| {
            let xx = i % (2 * w);
            let rest = i / (2 * w);
            let yy = rest % (2 * h);
            let nc = rest / (2 * h);
            src.data()[(nc * h + yy / 2) * w + xx / 2]
        });
        self.push(out, Op::Upsample2(x))
    }

    pub fn sum(&mut self, x: Var) -> Var {
        let s: T = self.value(x).data().iter().copied().sum();
        self.push(Tensor::scalar(s), Op::Sum(x))
    }

    /// Mean absolute error, as a scalar.
    pub fn l1_loss(&mut self, pred: Var, target: Var) -> Result<Var> {
        shape_ensure!(
            self.shape(pred) == self.shape(target),
            "l1_loss: {:?} vs {:?}",
            self.shape(pred),
            self.shape(target)
        );
        let p = self.value(pred).data();
        let t = self.value(target).data();
        let total: T = p.iter().zip(t).map(|(&a, &b)| (a - b).abs()).sum();
        let mean = total / T::lit(p.len() as f64);
        Ok(self.push(Tensor::scalar(mean), Op::L1(pred, target)))
    }

    /// Reverse-mode sweep from a scalar `loss`.
    ///
    /// Kinks use a zero subgradient: `relu'(0) = 0` and `d|u|/du (0) = 0`.
    pub fn backward(&self, loss: Var) -> Result<Gradients<T>> {
        if self.value(loss).len() != 1 {
            return Err(NeuralError::Contract(format!(
                "backward needs a scalar loss, got shape {:?}",
                self.shape(loss)
            )));
        }
        let mut grads: Vec<Option<Vec<T>>> = vec![None; self.nodes.len()];
        grads[loss.0] = Some(vec![T::one()]);

        for idx in (0..=loss.0).rev() {
            let Some(g) = grads[idx].take() else { continue };
            let node = &self.nodes[idx];
            let shape = node.value.shape();
            match &node.op {
                Op::Leaf | Op::Param => {}
                Op::Conv2d { x, w, b, stride, pad } => {
                    let xs = self.shape(*x);
                    let ws = self.shape(*w);
                    let gx = conv_backward_input(&g, shape, self.value(*w).data(), ws, *stride, *pad, (xs[2], xs[3]));
                    let gw = conv_backward_weight(self.value(*x).data(), xs, &g, shape, (ws[2], ws[3]), *stride, *pad);
                    accumulate(&mut grads, *x, gx);
                    accumulate(&mut grads, *w, gw);
                    if let Some(b) = b {
                        accumulate(&mut grads, *b, channel_sums(&g, shape));
                    }
                }
                Op::ConvT2d { x, w, b, stride, pad } => {
                    let xs = self.shape(*x);
                    let ws = self.shape(*w);
                    let gx = conv_forward(&g, shape, self.value(*w).data(), ws, None, *stride, *pad, (xs[2], xs[3]));
                    let gw = conv_backward_weight(&g, shape, self.value(*x).data(), xs, (ws[2], ws[3]), *stride, *pad);
                    accumulate(&mut grads, *x, gx);
                    accumulate(&mut grads, *w, gw);
                    if let Some(b) = b {
                        accumulate(&mut grads, *b, channel_sums(&g, shape));
                    }
                }
                Op::Relu(x) => {
                    let gx = g
                        .iter()
                        .zip(self.value(*x).data())
                        .map(|(&gv, &xv)| if xv > T::zero() { gv } else { T::zero() })
                        .collect();
                    accumulate(&mut grads, *x, gx);
                }
                Op::Add(a, b) => {
                    accumulate(&mut grads, *a, g.clone());
                    accumulate(&mut grads, *b, g.clone());
                }
                Op::Mul(a, b) => {
                    let ga = g.iter().zip(self.value(*b).data()).map(|(&gv, &v)| gv * v).collect();
                    let gb = g.iter().zip(self.value(*a).data()).map(|(&gv, &v)| gv * v).collect();
                    accumulate(&mut grads, *a, ga);
                    accumulate(&mut grads, *b, gb);
                }
                Op::Concat(a, b) => {
                    let (sa, sb) = (self.shape(*a), self.shape(*b));
                    let plane = sa[2] * sa[3];
                    let (mut ga, mut gb) = (Vec::with_capacity(sa.iter().product()), Vec::with_capacity(sb.iter().product()));
                    let stride = (sa[1] + sb[1]) * plane;
                    for n in 0..sa[0] {
                        let chunk = &g[n * stride..(n + 1) * stride];
                        ga.extend_from_slice(&chunk[..sa[1] * plane]);
                        gb.extend_from_slice(&chunk[sa[1] * plane..]);
                    }
                    accumulate(&mut grads, *a, ga);
                    accumulate(&mut grads, *b, gb);
                }
                Op::Upsample2(x) => {
                    let [n, c, h, w] = self.shape(*x);
                    let mut gx = vec![T::zero(); n * c * h * w];
                    for nc in 0..n * c {
                        for yy in 0..2 * h {
                            for xx in 0..2 * w {
                                gx[(nc * h + yy / 2) * w + xx / 2] += g[(nc * 2 * h + yy) * 2 * w + xx];
                            }
                        }
                    }
                    accumulate(&mut grads, *x, gx);
                }
                Op::Sum(x) => {
                    let len = self.value(*x).len();
                    accumulate(&mut grads, *x, vec![g[0]; len]);
                }
                Op::L1(p, t) => {
                    let pv = self.value(*p).data();
                    let tv = self.value(*t).data();
                    let scale = g[0] / T::lit(pv.len() as f64);
                    let gp: Vec<T> = pv
                        .iter()
                        .zip(tv)
                        .map(|(&a, &b)| {
                            let d = a - b;
                            if d > T::zero() {
                                scale
                            } else if d < T::zero() {
                                -scale
                            } else {
                                T::zero()
                            }
                        })
                        .collect();
                    let gt = gp.iter().map(|&v| -v).collect();
                    accumulate(&mut grads, *p, gp);
                    accumulate(&mut grads, *t, gt);
                }
            }
            grads[idx] = Some(g);
        }

        let params = self
            .params
            .iter()
            .map(|(name, &v)| {
                let t = match &grads[v.0] {
                    Some(g) => Tensor::new(self.shape(v), g.clone()).expect("grad shape"),
                    None => Tensor::zeros(self.shape(v)),
                };
                (name.clone(), t)
            })
            .collect();
        Ok(Gradients {
            params,
            nodes: grads,
            shapes: self.nodes.iter().map(|n| n.value.shape()).collect(),
        })
    }
}

fn accumulate<T: Real>(grads: &mut [Option<Vec<T>>], v: Var, g: Vec<T>) {
    match &mut grads[v.0] {
        Some(existing) => existing.iter_mut().zip(g).for_each(|(a, b)| *a += b),
        slot @ None => *slot = Some(g),
    }
}
