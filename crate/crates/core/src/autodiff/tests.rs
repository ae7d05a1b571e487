use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::*;
use crate::error::Error;

fn t(shape: &[usize], data: &[f64]) -> Tensor {
    Tensor::new(shape.to_vec(), data.to_vec()).unwrap()
}

fn rand_tensor(rng: &mut ChaCha8Rng, shape: &[usize], lo: f64, hi: f64) -> Tensor {
    let n = shape.iter().product();
    Tensor::new(shape.to_vec(), (0..n).map(|_| rng.random_range(lo..hi)).collect()).unwrap()
}

#[test]
fn tensor_rejects_bad_data() {
    assert!(Tensor::new(vec![2, 2], vec![1.0; 3]).is_err());
    assert!(matches!(
        Tensor::new(vec![1], vec![f64::NAN]),
        Err(Error::NonFinite { .. })
    ));
}

#[test]
fn matmul_examples() {
    let mut tape = Tape::new();
    let b = t(&[2, 3], &[1.0, 2.0, 3.0, 4.0, 5.0, 6.0]);
    let i = tape.constant(Tensor::identity(2));
    let bv = tape.constant(b.clone());
    let y = tape.matmul(i, bv).unwrap();
    assert_eq!(tape.value(y), &b);

    let z = tape.constant(Tensor::zeros(&[2, 3]));
    let x = tape.constant(Tensor::ones(&[3, 4]));
    let y = tape.matmul(z, x).unwrap();
    assert_eq!(tape.value(y), &Tensor::zeros(&[2, 4]));

    let a = tape.constant(t(&[2, 2], &[1.0, 2.0, 3.0, 4.0]));
    let c = tape.constant(t(&[2, 1], &[5.0, 6.0]));
    let y = tape.matmul(a, c).unwrap();
    assert_eq!(tape.value(y).data(), &[17.0, 39.0]);

    assert!(matches!(tape.matmul(a, x), Err(Error::ShapeMismatch { .. })));
}

#[test]
fn binary_examples() {
    let mut tape = Tape::new();
    let x = t(&[3], &[1.5, -2.0, 0.25]);
    let xv = tape.constant(x.clone());
    let z = tape.constant(Tensor::zeros(&[3]));
    let o = tape.constant(Tensor::ones(&[3]));
    let y = tape.add(xv, z).unwrap();
    assert_eq!(tape.value(y), &x);
    let y = tape.mul(xv, o).unwrap();
    assert_eq!(tape.value(y), &x);

    let a = tape.constant(t(&[2], &[1.0, 2.0]));
    let b = tape.constant(t(&[2], &[4.0, 8.0]));
    let y = tape.div(a, b).unwrap();
    assert_eq!(tape.value(y).data(), &[0.25, 0.25]);

    let s = tape.scalar(2.0);
    let y = tape.sub(a, s).unwrap();
    assert_eq!(tape.value(y).data(), &[-1.0, 0.0]);
    let y = tape.sub(s, a).unwrap();
    assert_eq!(tape.value(y).data(), &[1.0, 0.0]);

    let zero = tape.constant(t(&[2], &[1.0, 0.0]));
    assert!(matches!(tape.div(a, zero), Err(Error::DivisionByZero { .. })));
    assert!(matches!(tape.add(a, xv), Err(Error::ShapeMismatch { .. })));
}

#[test]
fn unary_examples() {
    let mut tape = Tape::new();
    let zero = tape.scalar(0.0);
    let one = tape.scalar(1.0);
    let y = tape.sigmoid(zero).unwrap();
    assert_eq!(tape.value(y).item(), 0.5);
    let y = tape.tanh(zero).unwrap();
    assert_eq!(tape.value(y).item(), 0.0);
    let y = tape.sigmoid(one).unwrap();
    assert!((tape.value(y).item() - 0.7310585786).abs() < 1e-10);
    assert!(matches!(tape.log(zero), Err(Error::Domain { .. })));
    let big = tape.scalar(1000.0);
    assert!(matches!(tape.exp(big), Err(Error::NonFinite { .. })));
}

#[test]
fn reduce_examples() {
    let mut tape = Tape::new();
    let z = tape.constant(Tensor::zeros(&[5]));
    let y = tape.sum(z).unwrap();
    assert_eq!(tape.value(y).item(), 0.0);
    let v = tape.constant(t(&[3], &[1.0, 2.0, 3.0]));
    let y = tape.mean(v).unwrap();
    assert_eq!(tape.value(y).item(), 2.0);
    let tenth = tape.constant(Tensor::full(&[10], 0.1));
    let y = tape.sum(tenth).unwrap();
    assert!((tape.value(y).item() - 1.0).abs() < 1e-12);
    let empty = tape.constant(Tensor::zeros(&[0]));
    assert_eq!(tape.mean(empty), Err(Error::EmptyReduction));
}

#[test]
fn mse_examples() {
    let mut tape = Tape::new();
    let x = tape.constant(t(&[2], &[0.3, -1.2]));
    let y = tape.mse(x, x).unwrap();
    assert_eq!(tape.value(y).item(), 0.0);
    let a = tape.constant(t(&[2], &[1.0, 1.0]));
    let b = tape.constant(t(&[2], &[0.0, 0.0]));
    let y = tape.mse(a, b).unwrap();
    assert_eq!(tape.value(y).item(), 1.0);
    let a = tape.constant(t(&[2], &[1.0, 2.0]));
    let b = tape.constant(t(&[2], &[3.0, 0.0]));
    let y = tape.mse(a, b).unwrap();
    assert_eq!(tape.value(y).item(), 4.0);
    let c = tape.constant(t(&[3], &[0.0; 3]));
    assert!(matches!(tape.mse(a, c), Err(Error::ShapeMismatch { .. })));
}

#[test]
fn backward_examples() {
    let mut tape = Tape::new();
    let x = tape.leaf(t(&[3], &[1.0, -2.0, 3.0]));
    let unused = tape.leaf(t(&[2], &[5.0, 6.0]));
    let sq = tape.mul(x, x).unwrap();
    let loss = tape.sum(sq).unwrap();
    let g = tape.backward(loss).unwrap();
    assert_eq!(g.get(x).data(), &[2.0, -4.0, 6.0]);
    assert_eq!(g.get(unused).data(), &[0.0, 0.0]);

    assert!(matches!(tape.backward(sq), Err(Error::NotScalar(_))));
    let other = Tape::new();
    assert!(matches!(other.backward(loss), Err(Error::NotOnTape(_))));
}

#[test]
fn random_five_op_graph_matches_fd() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for _ in 0..20 {
        let a = rand_tensor(&mut rng, &[3, 4], -2.0, 2.0);
        let b = rand_tensor(&mut rng, &[4, 2], -2.0, 2.0);
        let err = grad_check(
            |tp, v| {
                let m = tp.matmul(v[0], v[1])?;
                let s = tp.sigmoid(m)?;
                let e = tp.tanh(s)?;
                let q = tp.mul(e, s)?;
                tp.sum(q)
            },
            &[a, b],
            1e-5,
        )
        .unwrap();
        assert!(err < 1e-5, "relative error {err}");
    }
}

#[test]
fn adam_examples() {
    let p0 = t(&[3], &[0.5, -1.0, 2.0]);

    let mut p = p0.clone();
    let mut opt = Adam::new(AdamConfig::default());
    opt.step(&mut [&mut p], &[Tensor::zeros(&[3])]).unwrap();
    assert_eq!(p, p0);
    assert_eq!(opt.steps(), 1);

    let cfg = AdamConfig::default();
    for c in [0.3, -2.0, 1e-3] {
        let mut p = p0.clone();
        let mut opt = Adam::new(cfg);
        opt.step(&mut [&mut p], &[Tensor::full(&[3], c)]).unwrap();
        let expect = -cfg.lr * c / (c.abs() + cfg.eps);
        for (a, b) in p.data().iter().zip(p0.data()) {
            assert!((a - b - expect).abs() < 1e-12);
        }
    }

    let g = t(&[3], &[0.1, -0.7, 2.5]);
    let (mut p1, mut p2) = (p0.clone(), p0.clone());
    Adam::new(cfg).step(&mut [&mut p1], std::slice::from_ref(&g)).unwrap();
    Adam::new(cfg).step(&mut [&mut p2], &[g.map(|v| -v)]).unwrap();
    for ((a, b), c) in p1.data().iter().zip(p2.data()).zip(p0.data()) {
        assert!(((a - c) + (b - c)).abs() < 1e-15);
    }

    let mut opt = Adam::new(cfg);
    let mut p = p0.clone();
    assert!(opt.step(&mut [&mut p], &[Tensor::zeros(&[2])]).is_err());
    let mut bad = Tensor::zeros(&[3]);
    bad.data_mut()[1] = f64::INFINITY;
    assert!(opt.step(&mut [&mut p], &[bad]).is_err());
}

#[test]
fn grad_check_examples() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let a = rand_tensor(&mut rng, &[4, 4], -1.0, 1.0);
    let x = rand_tensor(&mut rng, &[4, 1], -2.0, 2.0);
    let quad = grad_check(
        |tp, v| {
            let xt = tp.transpose(v[1])?;
            let ax = tp.matmul(v[0], v[1])?;
            let q = tp.matmul(xt, ax)?;
            tp.sum(q)
        },
        &[a.clone(), x.clone()],
        1e-5,
    )
    .unwrap();
    assert!(quad < 1e-7, "quadratic {quad}");

    let w = rand_tensor(&mut rng, &[1, 4], -1.0, 1.0);
    let lin = grad_check(
        |tp, v| {
            let c = tp.constant(w.clone());
            let y = tp.matmul(c, v[0])?;
            tp.sum(y)
        },
        std::slice::from_ref(&x),
        1e-5,
    )
    .unwrap();
    assert!(lin < 1e-10, "linear {lin}");

    let comp = grad_check(
        |tp, v| {
            let y = tp.matmul(v[0], v[1])?;
            let s = tp.sigmoid(y)?;
            tp.sum(s)
        },
        &[a, x],
        1e-5,
    )
    .unwrap();
    assert!(comp < 1e-5, "composition {comp}");

    assert!(grad_check(|tp, v| tp.sum(v[0]), &[Tensor::scalar(1.0)], 0.0).is_err());
}

type Builder = Box<dyn Fn(&mut Tape, &[Var]) -> crate::error::Result<Var>>;

/// One loss per primitive, each reduced to a scalar through a fixed random
/// weighting so every output element contributes a distinct gradient.
fn primitive_cases(rng: &mut ChaCha8Rng) -> Vec<(&'static str, Vec<Tensor>, Builder)> {
    let weights = rand_tensor(rng, &[3, 3], -1.0, 1.0);
    let weigh = move |tp: &mut Tape, y: Var| -> crate::error::Result<Var> {
        let shape = tp.value(y).shape().to_vec();
        let n: usize = shape.iter().product();
        let w = Tensor::new(shape, weights.data()[..n].to_vec())?;
        let w = tp.constant(w);
        let p = tp.mul(y, w)?;
        tp.sum(p)
    };
    let r = |rng: &mut ChaCha8Rng, s: &[usize]| rand_tensor(rng, s, -2.0, 2.0);
    // Keeps divisors and logarithm arguments away from zero.
    let away = |rng: &mut ChaCha8Rng, s: &[usize]| {
        r(rng, s).map(|v| if v.abs() < 0.5 { v.signum() * 0.5 + v } else { v })
    };
    let w = weigh.clone();
    let mut cases: Vec<(&'static str, Vec<Tensor>, Builder)> = vec![(
        "matmul",
        vec![r(rng, &[3, 2]), r(rng, &[2, 3])],
        Box::new(move |tp, v| {
            let y = tp.matmul(v[0], v[1])?;
            w(tp, y)
        }),
    )];
    let w = weigh.clone();
    cases.push((
        "transpose",
        vec![r(rng, &[3, 2])],
        Box::new(move |tp, v| {
            let y = tp.transpose(v[0])?;
            w(tp, y)
        }),
    ));
    for kind in [BinaryKind::Add, BinaryKind::Sub, BinaryKind::Mul, BinaryKind::Div] {
        let w = weigh.clone();
        let b = if kind == BinaryKind::Div { away(rng, &[3, 3]) } else { r(rng, &[3, 3]) };
        cases.push((
            "binary",
            vec![r(rng, &[3, 3]), b],
            Box::new(move |tp, v| {
                let y = tp.binary(kind, v[0], v[1])?;
                w(tp, y)
            }),
        ));
        let w = weigh.clone();
        let s = if kind == BinaryKind::Div { away(rng, &[]) } else { r(rng, &[]) };
        cases.push((
            "binary_scalar",
            vec![r(rng, &[3, 3]), s],
            Box::new(move |tp, v| {
                let y = tp.binary(kind, v[0], v[1])?;
                w(tp, y)
            }),
        ));
    }
    for kind in [
        UnaryKind::Sigmoid,
        UnaryKind::Tanh,
        UnaryKind::Exp,
        UnaryKind::Neg,
        UnaryKind::Log,
        UnaryKind::Abs,
        UnaryKind::Square,
    ] {
        let w = weigh.clone();
        let x = match kind {
            UnaryKind::Log => away(rng, &[3, 3]).map(f64::abs),
            UnaryKind::Abs => away(rng, &[3, 3]),
            _ => r(rng, &[3, 3]),
        };
        cases.push((
            "unary",
            vec![x],
            Box::new(move |tp, v| {
                let y = tp.unary(kind, v[0])?;
                w(tp, y)
            }),
        ));
    }
    let w = weigh.clone();
    cases.push((
        "add_row",
        vec![r(rng, &[3, 3]), r(rng, &[1, 3])],
        Box::new(move |tp, v| {
            let y = tp.add_row(v[0], v[1])?;
            w(tp, y)
        }),
    ));
    let w = weigh.clone();
    cases.push((
        "mul_row",
        vec![r(rng, &[3, 3]), r(rng, &[3])],
        Box::new(move |tp, v| {
            let y = tp.mul_row(v[0], v[1])?;
            w(tp, y)
        }),
    ));
    cases.push((
        "sum",
        vec![r(rng, &[2, 3])],
        Box::new(|tp, v| {
            let s = tp.sum(v[0])?;
            tp.square(s)
        }),
    ));
    cases.push((
        "mean",
        vec![r(rng, &[2, 3])],
        Box::new(|tp, v| {
            let s = tp.mean(v[0])?;
            tp.square(s)
        }),
    ));
    cases.push(("mse", vec![r(rng, &[2, 3]), r(rng, &[2, 3])], Box::new(|tp, v| tp.mse(v[0], v[1]))));
    let w = weigh.clone();
    cases.push((
        "slice_cols",
        vec![r(rng, &[3, 3])],
        Box::new(move |tp, v| {
            let y = tp.slice_cols(v[0], 1, 3)?;
            w(tp, y)
        }),
    ));
    let w = weigh.clone();
    cases.push((
        "reshape",
        vec![r(rng, &[2, 3])],
        Box::new(move |tp, v| {
            let y = tp.reshape(v[0], &[3, 2])?;
            let y = tp.square(y)?;
            w(tp, y)
        }),
    ));
    let w = weigh.clone();
    cases.push((
        "concat_cols",
        vec![r(rng, &[3, 1]), r(rng, &[3, 2])],
        Box::new(move |tp, v| {
            let y = tp.concat_cols(&[v[0], v[1]])?;
            w(tp, y)
        }),
    ));
    let w = weigh;
    cases.push((
        "concat_rows",
        vec![r(rng, &[1, 3]), r(rng, &[2, 3])],
        Box::new(move |tp, v| {
            let y = tp.concat_rows(&[v[0], v[1]])?;
            w(tp, y)
        }),
    ));
    // logdet on B·Bᵀ + I, which is positive definite for any B.
    cases.push((
        "logdet",
        vec![r(rng, &[3, 3])],
        Box::new(|tp, v| {
            let bt = tp.transpose(v[0])?;
            let bb = tp.matmul(v[0], bt)?;
            let i = tp.constant(Tensor::identity(3));
            let m = tp.add(bb, i)?;
            tp.logdet(m)
        }),
    ));
    cases
}

#[test]
fn every_primitive_matches_fd_on_100_points() {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut worst = 0.0f64;
    for _ in 0..100 {
        for (name, point, f) in primitive_cases(&mut rng) {
            let err = grad_check(|tp, v| f(tp, v), &point, 1e-5).unwrap();
            assert!(err < 1e-5, "{name}: relative error {err}");
            worst = worst.max(err);
        }
    }
    assert!(worst < 1e-5);
}

#[test]
fn logdet_value_and_errors() {
    let mut tape = Tape::new();
    let a = tape.constant(t(&[2, 2], &[2.0, 1.0, 1.0, 3.0]));
    let y = tape.logdet(a).unwrap();
    assert!((tape.value(y).item() - 5f64.ln()).abs() < 1e-14);
    let neg = tape.constant(t(&[2, 2], &[-1.0, 0.0, 0.0, 1.0]));
    assert!(matches!(tape.logdet(neg), Err(Error::Domain { .. })));
    let rect = tape.constant(Tensor::ones(&[2, 3]));
    assert!(tape.logdet(rect).is_err());
}

#[test]
fn non_finite_results_are_errors() {
    let mut tape = Tape::new();
    let a = tape.constant(Tensor::full(&[2], 1e300));
    assert!(matches!(tape.mul(a, a), Err(Error::NonFinite { .. })));
}

fn random_graph_loss(tp: &mut Tape, v: &[Var], which: usize) -> crate::error::Result<Var> {
    let m = tp.matmul(v[0], v[1])?;
    match which {
        0 => {
            let s = tp.tanh(m)?;
            tp.sum(s)
        }
        _ => {
            let s = tp.sigmoid(m)?;
            let q = tp.square(s)?;
            tp.mean(q)
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn reverse_pass_is_linear(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let a = rand_tensor(&mut rng, &[2, 3], -2.0, 2.0);
        let b = rand_tensor(&mut rng, &[3, 2], -2.0, 2.0);
        let grads = |which: Option<usize>| {
            let mut tp = Tape::new();
            let v = [tp.leaf(a.clone()), tp.leaf(b.clone())];
            let loss = match which {
                Some(k) => random_graph_loss(&mut tp, &v, k).unwrap(),
                None => {
                    let l0 = random_graph_loss(&mut tp, &v, 0).unwrap();
                    let l1 = random_graph_loss(&mut tp, &v, 1).unwrap();
                    tp.add(l0, l1).unwrap()
                }
            };
            let g = tp.backward(loss).unwrap();
            [g.get(v[0]).clone(), g.get(v[1]).clone()]
        };
        let (g0, g1, gs) = (grads(Some(0)), grads(Some(1)), grads(None));
        for k in 0..2 {
            for ((x, y), s) in g0[k].data().iter().zip(g1[k].data()).zip(gs[k].data()) {
                prop_assert!((x + y - s).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn replaying_backward_is_bit_identical(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let a = rand_tensor(&mut rng, &[3, 3], -2.0, 2.0);
        let b = rand_tensor(&mut rng, &[3, 3], -2.0, 2.0);
        let mut tp = Tape::new();
        let v = [tp.leaf(a), tp.leaf(b)];
        let loss = random_graph_loss(&mut tp, &v, 1).unwrap();
        let g1 = tp.backward(loss).unwrap();
        let g2 = tp.backward(loss).unwrap();
        for &x in &v {
            let bits = |t: &Tensor| t.data().iter().map(|f| f.to_bits()).collect::<Vec<_>>();
            prop_assert_eq!(bits(g1.get(x)), bits(g2.get(x)));
        }
    }
}

#[test]
fn reshape_keeps_data_and_checks_count() {
    let mut tp = Tape::new();
    let a = tp.leaf(Tensor::matrix(2, 3, vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0]).unwrap());
    let b = tp.reshape(a, &[3, 2]).unwrap();
    assert_eq!(tp.value(b).shape(), &[3, 2]);
    assert_eq!(tp.value(b).data(), &[1.0, 2.0, 3.0, 4.0, 5.0, 6.0]);
    assert!(tp.reshape(a, &[4, 2]).is_err());
}
