//! Finite-difference oracles: every backward pass in the crate is held to
//! central differences of its forward pass, element by element. The loss
//! checks go through the fused softmax path, so these also pin down the
//! logit-gradient formula.

use gcnl_core::layers::{
    conv2d_backward, conv2d_forward, dense_backward, dense_forward, pool_backward, pool_forward,
    relu_backward, relu_forward, softmax, ConvParams, DenseParams, PoolKind, PoolSpec,
};
use gcnl_core::loss::{focal_loss, FocalConfig};
use gcnl_core::model::{
    dense_cnn_tiny, plain_cnn_tiny, residual_cnn_tiny, Model,
};
use gcnl_core::rng::Rng;
use gcnl_core::train::{grad_check, numeric_gradients};
use gcnl_core::Tensor;

const EPS: f64 = 1e-5;
const TOL: f64 = 1e-4;

/// Central differences of a scalar function with respect to every element of
/// `x`.
fn numeric_grad(f: &mut dyn FnMut(&Tensor) -> f64, x: &Tensor, eps: f64) -> Tensor {
    let mut probe = x.clone();
    let mut grad = Vec::with_capacity(x.len());
    for i in 0..x.len() {
        let original = probe.data()[i];
        probe.data_mut()[i] = original + eps;
        let plus = f(&probe);
        probe.data_mut()[i] = original - eps;
        let minus = f(&probe);
        probe.data_mut()[i] = original;
        grad.push((plus - minus) / (2.0 * eps));
    }
    Tensor::from_vec(x.shape(), grad).unwrap()
}

fn assert_close(analytic: &Tensor, numeric: &Tensor, what: &str) {
    assert_eq!(analytic.shape(), numeric.shape(), "{what}: shape");
    for (i, (&a, &n)) in analytic.data().iter().zip(numeric.data()).enumerate() {
        let rel = (a - n).abs() / a.abs().max(n.abs()).max(1e-8);
        assert!(rel < TOL, "{what}[{i}]: analytic {a} vs numeric {n} (rel {rel:.2e})");
    }
}

/// Scalar projection of a tensor against fixed random coefficients, so the
/// chain rule through any layer reduces to one backward pass with grad_out = u.
fn project(t: &Tensor, u: &Tensor) -> f64 {
    t.data().iter().zip(u.data()).map(|(a, b)| a * b).sum()
}

#[test]
fn conv_backward_matches_finite_differences() {
    let mut rng = Rng::new(90);
    let x = Tensor::seeded_uniform(&[2, 2, 5, 5], -1.0, 1.0, 91).unwrap();
    let p = ConvParams::he_init(2, 3, 3, 2, 1, &mut rng);
    let (oh, ow) = (3, 3); // (5 + 2 - 3) / 2 + 1
    let u = Tensor::seeded_uniform(&[2, 3, oh, ow], -1.0, 1.0, 92).unwrap();

    let grads = conv2d_backward(&x, &p, &u).unwrap();

    let p1 = p.clone();
    let nx = numeric_grad(
        &mut |xp| project(&conv2d_forward(xp, &p1).unwrap(), &u),
        &x,
        EPS,
    );
    assert_close(&grads.input, &nx, "conv grad_input");

    let nw = numeric_grad(
        &mut |wp| {
            let pp = ConvParams::new(wp.clone(), p.bias.clone(), p.stride, p.padding).unwrap();
            project(&conv2d_forward(&x, &pp).unwrap(), &u)
        },
        &p.weights,
        EPS,
    );
    assert_close(&grads.weights, &nw, "conv grad_weights");

    let nb = numeric_grad(
        &mut |bp| {
            let pp = ConvParams::new(p.weights.clone(), bp.clone(), p.stride, p.padding).unwrap();
            project(&conv2d_forward(&x, &pp).unwrap(), &u)
        },
        &p.bias,
        EPS,
    );
    assert_close(&grads.bias, &nb, "conv grad_bias");
}

#[test]
fn dense_backward_matches_finite_differences() {
    let mut rng = Rng::new(93);
    let f = Tensor::seeded_uniform(&[3, 6], -1.0, 1.0, 94).unwrap();
    let p = DenseParams::he_init(6, 4, &mut rng);
    let u = Tensor::seeded_uniform(&[3, 4], -1.0, 1.0, 95).unwrap();

    let grads = dense_backward(&f, &p, &u).unwrap();

    let p1 = p.clone();
    let nf = numeric_grad(
        &mut |fp| project(&dense_forward(fp, &p1).unwrap(), &u),
        &f,
        EPS,
    );
    assert_close(&grads.input, &nf, "dense grad_input");

    let nw = numeric_grad(
        &mut |wp| {
            let pp = DenseParams::new(wp.clone(), p.bias.clone()).unwrap();
            project(&dense_forward(&f, &pp).unwrap(), &u)
        },
        &p.weights,
        EPS,
    );
    assert_close(&grads.weights, &nw, "dense grad_weights");

    let nb = numeric_grad(
        &mut |bp| {
            let pp = DenseParams::new(p.weights.clone(), bp.clone()).unwrap();
            project(&dense_forward(&f, &pp).unwrap(), &u)
        },
        &p.bias,
        EPS,
    );
    assert_close(&grads.bias, &nb, "dense grad_bias");
}

#[test]
fn pool_backward_matches_finite_differences() {
    // Distinct values keep the max-pool argmax stable under +-eps.
    let x = Tensor::seeded_uniform(&[2, 2, 4, 4], -1.0, 1.0, 96).unwrap();
    for kind in [PoolKind::Max, PoolKind::Average] {
        let spec = PoolSpec::new(kind, 2, 2).unwrap();
        let u = Tensor::seeded_uniform(&[2, 2, 2, 2], -1.0, 1.0, 97).unwrap();
        let (_, record) = pool_forward(&x, &spec).unwrap();
        let analytic = pool_backward(&record, &u).unwrap();
        let numeric = numeric_grad(
            &mut |xp| project(&pool_forward(xp, &spec).unwrap().0, &u),
            &x,
            EPS,
        );
        assert_close(&analytic, &numeric, "pool grad_input");
    }
}

#[test]
fn relu_backward_matches_finite_differences_away_from_zero() {
    // Keep inputs away from the kink at 0 where the subgradient convention
    // and central differences legitimately disagree.
    let data: Vec<f64> = vec![-1.5, -0.7, 0.4, 1.1, 2.0, -0.2, 0.9, 0.05];
    let x = Tensor::from_vec(&[2, 4], data).unwrap();
    let u = Tensor::seeded_uniform(&[2, 4], -1.0, 1.0, 98).unwrap();
    let analytic = relu_backward(&x, &u).unwrap();
    let numeric = numeric_grad(&mut |xp| project(&relu_forward(xp), &u), &x, EPS);
    assert_close(&analytic, &numeric, "relu grad");
}

#[test]
fn fused_softmax_focal_gradient_matches_finite_differences() {
    let mut rng = Rng::new(99);
    let batch = 5;
    let classes = 4;
    let targets: Vec<usize> = (0..batch).map(|_| rng.next_below(classes)).collect();
    let alpha = vec![0.9, 0.5, 1.0, 0.25];
    for gamma in [0.0, 0.5, 2.0, 5.0] {
        let cfg = FocalConfig::new(gamma, alpha.clone()).unwrap();
        let logits = Tensor::seeded_uniform(&[batch, classes], -2.0, 2.0, 100 + gamma as u64)
            .unwrap();
        let (_, grad_logits) = focal_loss(&softmax(&logits).unwrap(), &targets, &cfg).unwrap();
        let numeric = numeric_grad(
            &mut |z| focal_loss(&softmax(z).unwrap(), &targets, &cfg).unwrap().0,
            &logits,
            EPS,
        );
        assert_close(&grad_logits, &numeric, &format!("focal grad (gamma {gamma})"));
    }
}

#[test]
fn whole_model_gradients_match_finite_differences_for_all_tiny_zoo_architectures() {
    let mut rng = Rng::new(101);
    let images = Tensor::seeded_uniform(&[2, 1, 8, 8], 0.0, 1.0, 102).unwrap();
    let targets: Vec<usize> = (0..2).map(|_| rng.next_below(3)).collect();
    let losses = [
        ("cross-entropy", FocalConfig::cross_entropy(3)),
        (
            "focal g2",
            FocalConfig::new(2.0, vec![1.0, 0.5, 0.75]).unwrap(),
        ),
    ];
    for (arch, config) in [
        ("plain", plain_cnn_tiny(3, 55)),
        ("residual", residual_cnn_tiny(3, 55)),
        ("dense-connect", dense_cnn_tiny(3, 55)),
    ] {
        let model = Model::build(config).unwrap();
        for (loss_name, cfg) in &losses {
            let report = grad_check(&model, &images, &targets, cfg, EPS, TOL).unwrap();
            assert!(
                report.pass,
                "{arch} / {loss_name}: {}",
                report.render()
            );
        }
    }
}

#[test]
fn residual_input_gradient_is_branch_plus_identity() {
    // L(x) = sum(u . relu(conv2(relu(conv1(x))) + x)). The analytic input
    // gradient decomposes as branch gradient + identity-path gradient; finite
    // differences validate the sum without knowing the decomposition.
    let mut rng = Rng::new(103);
    let conv1 = ConvParams::he_init(2, 2, 3, 1, 1, &mut rng);
    let conv2 = ConvParams::he_init(2, 2, 3, 1, 1, &mut rng);
    let x = Tensor::seeded_uniform(&[1, 2, 5, 5], 0.1, 1.0, 104).unwrap();
    let u = Tensor::seeded_uniform(&[1, 2, 5, 5], -1.0, 1.0, 105).unwrap();

    let forward = |xp: &Tensor| -> Tensor {
        let h = relu_forward(&conv2d_forward(xp, &conv1).unwrap());
        let s = conv2d_forward(&h, &conv2).unwrap().add(xp).unwrap();
        relu_forward(&s)
    };

    // Analytic, assembled from the two paths.
    let pre1 = conv2d_forward(&x, &conv1).unwrap();
    let h = relu_forward(&pre1);
    let s = conv2d_forward(&h, &conv2).unwrap().add(&x).unwrap();
    let g_s = relu_backward(&s, &u).unwrap();
    let g2 = conv2d_backward(&h, &conv2, &g_s).unwrap();
    let g_pre1 = relu_backward(&pre1, &g2.input).unwrap();
    let branch = conv2d_backward(&x, &conv1, &g_pre1).unwrap().input;
    let identity = g_s.clone();
    let total = branch.add(&identity).unwrap();

    let numeric = numeric_grad(&mut |xp| project(&forward(xp), &u), &x, EPS);
    assert_close(&total, &numeric, "residual input grad");
}

#[test]
fn model_forward_matches_manual_layer_composition() {
    use gcnl_core::model::{LayerSpec, ModelConfig};
    let config = ModelConfig {
        input_shape: [1, 5, 5],
        num_classes: 2,
        layers: vec![
            LayerSpec::Conv {
                out_channels: 2,
                kernel: 3,
                stride: 1,
                padding: 0,
            },
            LayerSpec::Relu,
            LayerSpec::Flatten,
            LayerSpec::Dense { units: 2 },
            LayerSpec::Softmax,
        ],
        init_seed: 77,
    };
    let model = Model::build(config).unwrap();
    let x = Tensor::seeded_uniform(&[3, 1, 5, 5], 0.0, 1.0, 106).unwrap();
    let (probs, _) = model.forward(&x).unwrap();

    // Rebuild the layer parameters from the model's parameter list and
    // compose the layer functions by hand.
    let params = model.params();
    let conv = ConvParams::new(params[0].clone(), params[1].clone(), 1, 0).unwrap();
    let dense = DenseParams::new(params[2].clone(), params[3].clone()).unwrap();
    let a = relu_forward(&conv2d_forward(&x, &conv).unwrap());
    let flat = a.reshape(&[3, 2 * 3 * 3]).unwrap();
    let manual = softmax(&dense_forward(&flat, &dense).unwrap()).unwrap();

    assert!(probs.bits_eq(&manual));
}

#[test]
fn numeric_gradients_agree_with_backward_on_momentumless_training_step() {
    // One more cross-check at the training-loop boundary: the gradients fed
    // to SGD are the same tensors grad_check validates.
    let model = Model::build(plain_cnn_tiny(2, 60)).unwrap();
    let images = Tensor::seeded_uniform(&[3, 1, 8, 8], 0.0, 1.0, 107).unwrap();
    let targets = vec![0, 1, 0];
    let cfg = FocalConfig::cross_entropy(2);
    let (probs, cache) = model.forward(&images).unwrap();
    let (_, grad_logits) = focal_loss(&probs, &targets, &cfg).unwrap();
    let analytic = model.backward(&cache, &grad_logits).unwrap();
    let numeric = numeric_gradients(&model, &images, &targets, &cfg, EPS).unwrap();
    for (a, n) in analytic.iter().zip(&numeric) {
        assert_close(a, n, "training-step gradient");
    }
}
