use rand::Rng;
use swimnet::baseline::random_hidden_layers;
use swimnet::sampler::layer_rng;
use swimnet::{fit_random_features, BaselineConfig, Matrix};

#[test]
fn weight_entries_are_standard_normal() {
    let layers = random_hidden_layers(1, &BaselineConfig::new(vec![10_000], 17));
    let w = layers[0].weights.as_slice();
    let n = w.len() as f64;
    let mean = w.iter().sum::<f64>() / n;
    let var = w.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0);
    assert!(mean.abs() <= 0.03, "mean {mean}");
    assert!((var - 1.0).abs() <= 0.05, "variance {var}");
}

#[test]
fn biases_are_uniform_on_symmetric_interval() {
    let layers = random_hidden_layers(3, &BaselineConfig::new(vec![20_000], 2));
    let b = &layers[0].biases;
    let n = b.len() as f64;
    let mean = b.iter().sum::<f64>() / n;
    let var = b.iter().map(|v| v * v).sum::<f64>() / n - mean * mean;
    // U(−π, π): mean 0, variance π²/3; 3σ bands for n = 2·10⁴.
    let pi = std::f64::consts::PI;
    assert!(mean.abs() <= 3.0 * (pi * pi / 3.0 / n).sqrt());
    assert!((var - pi * pi / 3.0).abs() <= 0.1);
}

#[test]
fn hidden_parameters_independent_of_row_order() {
    let mut rng = layer_rng(3, 50);
    let x = Matrix::from_fn(40, 3, |_, _| rng.random_range(-1.0..1.0));
    let y = Matrix::from_fn(40, 1, |i, _| x.row(i).iter().sum());
    let perm: Vec<usize> = (0..40).map(|i| (i * 17 + 5) % 40).collect();
    let cfg = BaselineConfig::new(vec![25, 10], 8);
    let a = fit_random_features(&x, &y, &cfg).unwrap();
    let b = fit_random_features(&x.select_rows(&perm), &y.select_rows(&perm), &cfg).unwrap();
    assert_eq!(a.hidden, b.hidden);
}

#[test]
fn readout_reproduces_recorded_residual() {
    let mut rng = layer_rng(4, 50);
    let x = Matrix::from_fn(60, 2, |_, _| rng.random_range(-1.0..1.0));
    let y = Matrix::from_fn(60, 1, |i, _| (x.get(i, 0) * 3.0).cos());
    let net = fit_random_features(&x, &y, &BaselineConfig::new(vec![30], 1)).unwrap();
    let pred = net.forward(&x).unwrap();
    let r: f64 = pred
        .as_slice()
        .iter()
        .zip(y.as_slice())
        .map(|(p, t)| (p - t) * (p - t))
        .sum::<f64>()
        .sqrt();
    assert!((r - net.meta.training_residual.unwrap()).abs() <= 1e-9);
}
