use d3net_neural::gradcheck::{check_params, relative_error};
use d3net_neural::{Graph, ParamStore, Tensor};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const STEP: f64 = 1e-4;
const TOL: f64 = 1e-3;
const FLOOR: f64 = 1e-6;

fn random(shape: [usize; 4], rng: &mut ChaCha8Rng) -> Tensor<f64> {
    Tensor::from_fn(shape, |_| rng.random_range(-1.0..1.0))
}

/// Values bounded away from zero by `gap` so kinks at 0 are not straddled.
fn off_kink(shape: [usize; 4], gap: f64, rng: &mut ChaCha8Rng) -> Tensor<f64> {
    Tensor::from_fn(shape, |_| {
        let v: f64 = rng.random_range(gap..1.0);
        if rng.random_bool(0.5) {
            v
        } else {
            -v
        }
    })
}

fn store(entries: Vec<(&str, Tensor<f64>)>) -> ParamStore<f64> {
    let mut s = ParamStore::new(0);
    for (n, t) in entries {
        s.insert(n, t).unwrap();
    }
    s
}

/// Reduces an op output to a scalar with a fixed random projection, so
/// every output element carries a distinct weight.
fn project(g: &mut Graph<f64>, v: d3net_neural::Var, seed: u64) -> d3net_neural::Var {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let r = g.input(random(g.shape(v), &mut rng));
    let p = g.mul(v, r).unwrap();
    g.sum(p)
}

fn assert_check(s: &ParamStore<f64>, build: impl Fn(&ParamStore<f64>, &mut Graph<f64>) -> d3net_neural::Result<d3net_neural::Var>) {
    let r = check_params(s, 64, STEP, FLOOR, build).unwrap();
    assert!(r.checked > 0);
    assert!(r.max_rel_err < TOL, "{r:?}");
}

#[test]
fn conv2d_gradients() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for (stride, pad, k) in [(1, 1, 3), (2, 0, 2), (2, 1, 3)] {
        let s = store(vec![
            ("x", random([2, 3, 7, 6], &mut rng)),
            ("w", random([4, 3, k, k], &mut rng)),
            ("b", random([1, 4, 1, 1], &mut rng)),
        ]);
        assert_check(&s, |s, g| {
            let x = g.param(s, "x")?;
            let w = g.param(s, "w")?;
            let b = g.param(s, "b")?;
            let y = g.conv2d(x, w, Some(b), stride, pad)?;
            Ok(project(g, y, 5))
        });
    }
}

#[test]
fn conv_transpose2d_gradients() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    for (stride, pad, k) in [(1, 1, 3), (2, 0, 2), (2, 1, 4)] {
        let s = store(vec![
            ("x", random([2, 3, 4, 5], &mut rng)),
            ("w", random([3, 2, k, k], &mut rng)),
            ("b", random([1, 2, 1, 1], &mut rng)),
        ]);
        assert_check(&s, |s, g| {
            let x = g.param(s, "x")?;
            let w = g.param(s, "w")?;
            let b = g.param(s, "b")?;
            let y = g.conv_transpose2d(x, w, Some(b), stride, pad)?;
            Ok(project(g, y, 6))
        });
    }
}

#[test]
fn relu_gradients() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let s = store(vec![("x", off_kink([2, 2, 3, 3], 1e-2, &mut rng))]);
    assert_check(&s, |s, g| {
        let x = g.param(s, "x")?;
        let y = g.relu(x);
        Ok(project(g, y, 7))
    });
}

#[test]
fn add_mul_concat_upsample_gradients() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let s = store(vec![
        ("a", random([2, 2, 3, 4], &mut rng)),
        ("b", random([2, 2, 3, 4], &mut rng)),
        ("c", random([2, 1, 3, 4], &mut rng)),
    ]);
    assert_check(&s, |s, g| {
        let a = g.param(s, "a")?;
        let b = g.param(s, "b")?;
        let c = g.param(s, "c")?;
        let sum = g.add(a, b)?;
        let prod = g.mul(sum, a)?;
        let cat = g.concat_channels(prod, c)?;
        let up = g.upsample2(cat);
        Ok(project(g, up, 8))
    });
}

#[test]
fn l1_gradient_is_sign_over_n() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let target = random([2, 3, 4, 4], &mut rng);
    let diff = off_kink([2, 3, 4, 4], 1e-2, &mut rng);
    let pred = Tensor::from_fn([2, 3, 4, 4], |i| target.data()[i] + diff.data()[i]);
    let s = store(vec![("p", pred.clone())]);
    let build = |s: &ParamStore<f64>, g: &mut Graph<f64>| {
        let p = g.param(s, "p")?;
        let t = g.input(target.clone());
        g.l1_loss(p, t)
    };
    assert_check(&s, build);

    let mut g = Graph::new();
    let l = build(&s, &mut g).unwrap();
    let grads = g.backward(l).unwrap();
    let n = pred.len() as f64;
    for (i, &gv) in grads.param("p").unwrap().data().iter().enumerate() {
        assert_eq!(gv, diff.data()[i].signum() / n);
    }
}

#[test]
fn small_network_gradients() {
    // conv -> relu -> strided conv -> transpose -> skip add -> conv -> L1
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let mut s = ParamStore::new(9);
    s.add_he_uniform("c1.w", [4, 2, 3, 3]).unwrap();
    s.insert("c1.b", random([1, 4, 1, 1], &mut rng)).unwrap();
    s.add_he_uniform("down.w", [6, 4, 2, 2]).unwrap();
    s.add_he_uniform("up.w", [6, 4, 2, 2]).unwrap();
    s.add_he_uniform("out.w", [2, 4, 3, 3]).unwrap();
    let x = random([2, 2, 8, 8], &mut rng);
    let target = random([2, 2, 8, 8], &mut rng);
    assert_check(&s, |s, g| {
        let xv = g.input(x.clone());
        let w1 = g.param(s, "c1.w")?;
        let b1 = g.param(s, "c1.b")?;
        let h = g.conv2d(xv, w1, Some(b1), 1, 1)?;
        let h = g.relu(h);
        let wd = g.param(s, "down.w")?;
        let d = g.conv2d(h, wd, None, 2, 0)?;
        let d = g.relu(d);
        let wu = g.param(s, "up.w")?;
        let u = g.conv_transpose2d(d, wu, None, 2, 0)?;
        let skip = g.add(u, h)?;
        let wo = g.param(s, "out.w")?;
        let y = g.conv2d(skip, wo, None, 1, 1)?;
        let t = g.input(target.clone());
        g.l1_loss(y, t)
    });
}

#[test]
fn relative_error_definition() {
    assert_eq!(relative_error(1.0, 1.0, 1e-6), 0.0);
    assert!((relative_error(1.0, 1.001, 1e-6) - 0.001 / 1.001).abs() < 1e-15);
    assert_eq!(relative_error(0.0, 1e-9, 1e-6), 1e-3);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn conv_and_transpose_are_adjoint(
        seed in any::<u64>(),
        n in 1usize..3, c in 1usize..4, o in 1usize..4,
        k in 1usize..4, stride in 1usize..3, pad in 0usize..2,
        h in 4usize..10, w in 4usize..10,
    ) {
        prop_assume!(pad < k);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        // Choose input sizes that a transpose maps back onto exactly.
        let oh = (h + 2 * pad - k) / stride + 1;
        let ow = (w + 2 * pad - k) / stride + 1;
        let h = (oh - 1) * stride + k - 2 * pad;
        let w = (ow - 1) * stride + k - 2 * pad;
        let x = random([n, c, h, w], &mut rng);
        let y = random([n, o, oh, ow], &mut rng);
        let wt = random([o, c, k, k], &mut rng);

        let mut g = Graph::new();
        let xv = g.input(x.clone());
        let yv = g.input(y.clone());
        let wv = g.input(wt);
        let ax = g.conv2d(xv, wv, None, stride, pad).unwrap();
        let aty = g.conv_transpose2d(yv, wv, None, stride, pad).unwrap();
        let lhs = g.value(ax).dot(&y);
        let rhs = x.dot(g.value(aty));
        prop_assert!((lhs - rhs).abs() <= 1e-6 * lhs.abs().max(rhs.abs()).max(1.0));
    }

    #[test]
    fn random_shape_conv_gradients(
        seed in any::<u64>(), c in 1usize..3, o in 1usize..3, k in 1usize..4,
        stride in 1usize..3, h in 3usize..7, w in 3usize..7,
    ) {
        let pad = k / 2;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let s = store(vec![
            ("x", random([1, c, h, w], &mut rng)),
            ("w", random([o, c, k, k], &mut rng)),
        ]);
        let r = check_params(&s, 32, STEP, FLOOR, |s, g| {
            let x = g.param(s, "x")?;
            let wv = g.param(s, "w")?;
            let y = g.conv2d(x, wv, None, stride, pad)?;
            Ok::<_, d3net_neural::NeuralError>(project(g, y, seed ^ 1))
        }).unwrap();
        prop_assert!(r.max_rel_err < TOL, "{:?}", r);
    }
}
