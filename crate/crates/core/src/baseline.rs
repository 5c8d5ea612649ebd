//! Data-agnostic random feature networks: hidden weights from N(0, 1),
//! biases from U(−π, π), sine activation, ridge readout.
//!
//! Deeper networks stack the same recipe at every layer.

use std::f64::consts::PI;

use rand::Rng;
use rand_distr::{Distribution, StandardNormal, Uniform};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::network::{
    Activation, LayerParams, NetworkMeta, OutputLayer, SampledNetwork, TrainingConfig,
};
use crate::numerics::{solve_ridge, Matrix};
use crate::sampler::layer_rng;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BaselineConfig {
    pub layers: Vec<usize>,
    pub seed: u64,
    pub ridge_lambda: f64,
}

impl BaselineConfig {
    pub fn new(layers: Vec<usize>, seed: u64) -> Self {
        BaselineConfig {
            layers,
            seed,
            ridge_lambda: 1e-10,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.layers.is_empty() {
            return Err(Error::invalid("at least one hidden layer is required"));
        }
        if let Some(l) = self.layers.iter().position(|&n| n == 0) {
            return Err(Error::invalid(format!("hidden layer {} has width 0", l + 1)));
        }
        if !(self.ridge_lambda >= 0.0 && self.ridge_lambda.is_finite()) {
            return Err(Error::invalid(format!(
                "ridge lambda must be nonnegative, got {}",
                self.ridge_lambda
            )));
        }
        Ok(())
    }
}

/// Hidden layers drawn independently of the data.
pub fn random_hidden_layers(input_dim: usize, cfg: &BaselineConfig) -> Vec<LayerParams> {
    let bias_dist = Uniform::new(-PI, PI).expect("valid range");
    let mut prev = input_dim;
    let mut layers = Vec::with_capacity(cfg.layers.len());
    for (idx, &width) in cfg.layers.iter().enumerate() {
        let mut rng = layer_rng(cfg.seed, idx + 1);
        let weights: Vec<f64> = (0..width * prev)
            .map(|_| StandardNormal.sample(&mut rng))
            .collect();
        let biases: Vec<f64> = (0..width).map(|_| rng.sample(bias_dist)).collect();
        layers.push(LayerParams {
            weights: Matrix::from_raw(width, prev, weights),
            biases,
        });
        prev = width;
    }
    layers
}

pub fn fit_random_features(x: &Matrix, y: &Matrix, cfg: &BaselineConfig) -> Result<SampledNetwork> {
    cfg.validate()?;
    if x.rows() != y.rows() {
        return Err(Error::DimensionMismatch {
            op: "fit_random_features",
            left_rows: x.rows(),
            left_cols: x.cols(),
            right_rows: y.rows(),
            right_cols: y.cols(),
        });
    }
    if x.rows() == 0 {
        return Err(Error::invalid("fitting needs at least one row"));
    }
    x.check_finite("inputs")?;
    y.check_finite("targets")?;

    let act = Activation::sine();
    let hidden = random_hidden_layers(x.cols(), cfg);
    let mut reps = x.clone();
    for layer in &hidden {
        reps = layer.apply(&reps, &act)?;
    }
    let sol = solve_ridge(&reps, y, cfg.ridge_lambda)?;
    let mut net = SampledNetwork::new(
        x.cols(),
        hidden,
        act,
        Some(OutputLayer {
            weights: sol.weights.transpose(),
            bias: sol.bias,
        }),
    )?;
    net.meta = NetworkMeta {
        seed: Some(cfg.seed),
        config: Some(TrainingConfig::RandomFeatures(cfg.clone())),
        training_residual: Some(sol.residual_norm),
        ..NetworkMeta::default()
    };
    Ok(net)
}
