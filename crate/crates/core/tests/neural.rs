mod common;

use common::*;
use liminal_core::neural::*;
use liminal_core::parallel::Execution;
use rand::Rng;

#[test]
fn conv_matches_sliding_window_oracle() {
    let mut r = rng(21);
    let x: Vec<f32> = (0..12).map(|_| r.random_range(-1.0..1.0)).collect();
    let w: Vec<f32> = (0..3 * 5 * 2).map(|_| r.random_range(-1.0..1.0)).collect();
    let b: Vec<f32> = vec![0.1, -0.2, 0.3];
    let out = conv1d_forward(
        &Tensor::new(vec![1, 6, 2], x.clone()).unwrap(),
        &Tensor::new(vec![3, 5, 2], w.clone()).unwrap(),
        &Tensor::new(vec![3], b.clone()).unwrap(),
    )
    .unwrap();
    assert_eq!(out.shape(), &[1, 2, 3]);
    for t in 0..2 {
        for f in 0..3 {
            let mut acc = b[f] as f64;
            for k in 0..5 {
                for c in 0..2 {
                    acc += x[(t + k) * 2 + c] as f64 * w[f * 10 + k * 2 + c] as f64;
                }
            }
            assert!((out.data()[t * 3 + f] as f64 - acc).abs() < 1e-6);
        }
    }
}

#[test]
fn shape_pipeline_for_several_configurations() {
    for (l, d) in [(64, 16), (10, 4), (33, 8), (128, 2)] {
        let arch = Architecture::new(50, l, d).unwrap();
        let params = Params::<f32>::init(&arch, 1);
        let batch: Vec<Vec<usize>> = (0..3).map(|i| (0..l).map(|t| (t * 7 + i) % 50).collect()).collect();
        let x = embed_forward(&batch, &params.embedding).unwrap();
        assert_eq!(x.shape(), &[3, l, d]);
        let c = relu_forward(&conv1d_forward(&x, &params.conv_w, &params.conv_b).unwrap());
        assert_eq!(c.shape(), &[3, l - 4, 32]);
        let (p, _) = maxpool1d_forward(&c).unwrap();
        assert_eq!(p.shape(), &[3, (l - 4) / 2, 32]);
        let flat = Tensor::new(vec![3, 32 * ((l - 4) / 2)], p.into_data()).unwrap();
        let y = dense_sigmoid_forward(&flat, &params.dense_w, &params.dense_b).unwrap();
        assert_eq!(y.shape(), &[3, 1]);
        assert_eq!(arch.flatten_len(), 32 * ((l - 4) / 2));
    }
}

#[test]
fn pool_backward_matches_finite_differences() {
    let mut r = rng(4);
    let x: Vec<f64> = (0..2 * 7 * 3).map(|_| r.random_range(-1.0..1.0)).collect();
    let upstream: Vec<f64> = (0..2 * 3 * 3).map(|_| r.random_range(-1.0..1.0)).collect();
    let input = Tensor::new(vec![2, 7, 3], x.clone()).unwrap();
    let f = |x: &[f64]| {
        let (out, _) = maxpool1d_forward(&Tensor::new(vec![2, 7, 3], x.to_vec()).unwrap()).unwrap();
        out.data().iter().zip(&upstream).map(|(a, b)| a * b).sum::<f64>()
    };
    let (_, arg) = maxpool1d_forward(&input).unwrap();
    let grad = maxpool1d_backward(&Tensor::new(vec![2, 3, 3], upstream.clone()).unwrap(), &arg, &[2, 7, 3]).unwrap();
    for i in 0..x.len() {
        let mut p = x.clone();
        p[i] += 1e-3;
        let mut m = x.clone();
        m[i] -= 1e-3;
        let numeric = (f(&p) - f(&m)) / 2e-3;
        let (ok, rel) = relative_ok(grad.data()[i], numeric, 1e-3);
        assert!(ok, "index {i}: {} vs {numeric} ({rel})", grad.data()[i]);
        if !arg.contains(&i) {
            assert_eq!(grad.data()[i], 0.0);
        }
    }
}

#[test]
fn full_model_gradient_check() {
    let (arch, params, batch, y) = gradcheck_setup(1);
    let report = gradient_check(&arch, &params, &batch, &y, 1e-3, 1e-3);
    assert!(report.failures.is_empty(), "{:#?}", &report.failures[..report.failures.len().min(10)]);
    assert_eq!(report.checked, arch.parameter_count(), "{report:?}");
}

#[test]
fn embedding_rows_outside_the_batch_get_no_gradient() {
    let (arch, params, batch, y) = gradcheck_setup(2);
    let (_, g) = loss_and_grad(&arch, &params, &batch, &y, 1.0, Execution::Sequential).unwrap();
    for row in 0..arch.input_dim {
        let used = batch.iter().any(|s| s.contains(&row));
        let grad = &g.embedding.data()[row * 16..(row + 1) * 16];
        if !used {
            assert!(grad.iter().all(|&v| v == 0.0));
        }
    }
}

#[test]
fn forward_is_deterministic() {
    let (arch, params, batch, _) = gradcheck_setup(3);
    let a = predict(&arch, &params, &batch, Execution::Sequential).unwrap();
    let b = predict(&arch, &params, &batch, Execution::Parallel).unwrap();
    assert_eq!(a, b);
}

#[test]
fn training_steps_reduce_loss_on_a_tiny_problem() {
    let arch = Architecture::new(12, 8, 4).unwrap();
    let mut params = Params::<f32>::init(&arch, 9);
    let batch: Vec<Vec<usize>> = (0..16).map(|i| (0..8).map(|t| if i % 2 == 0 { 2 + t % 3 } else { 6 + (t + i) % 5 }).collect()).collect();
    let y: Vec<f32> = (0..16).map(|i| (i % 2 == 0) as u8 as f32).collect();
    let mut adam = Adam::new(&arch, AdamConfig { learning_rate: 1e-2, ..Default::default() });
    let first = loss(&arch, &params, &batch, &y, 1.0).unwrap();
    for _ in 0..100 {
        let (_, g) = loss_and_grad(&arch, &params, &batch, &y, 1.0, Execution::Sequential).unwrap();
        adam.step(&mut params, &g);
    }
    let last = loss(&arch, &params, &batch, &y, 1.0).unwrap();
    assert!(last < first * 0.1, "{first} -> {last}");
}
