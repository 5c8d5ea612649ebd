//! Layer-by-layer construction of hidden weights from sampled data pairs.
//!
//! For each hidden layer a pool of candidate index pairs is drawn uniformly,
//! each candidate is weighted by how much the target changes relative to the
//! distance of the two points in the current representation, and the layer's
//! neurons are drawn from the pool with replacement in proportion to those
//! weights. Only the final linear readout is solved for.

use std::fmt;
use std::str::FromStr;

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::network::{
    Activation, ActivationKind, LayerParams, NetworkMeta, OutputLayer, SampledNetwork,
    TrainingConfig,
};
use crate::numerics::{solve_ridge, Matrix};

/// Attempts per requested candidate before a layer is declared degenerate.
pub const CANDIDATE_ATTEMPTS_PER_SLOT: usize = 50;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Norm {
    L2,
    Linf,
}

impl Norm {
    pub fn of_difference(self, a: &[f64], b: &[f64]) -> f64 {
        let diffs = a.iter().zip(b).map(|(x, y)| x - y);
        match self {
            Norm::L2 => diffs.map(|d| d * d).sum::<f64>().sqrt(),
            Norm::Linf => diffs.fold(0.0, |m, d| m.max(d.abs())),
        }
    }
}

impl fmt::Display for Norm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Norm::L2 => "l2",
            Norm::Linf => "linf",
        })
    }
}

impl FromStr for Norm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "l2" => Ok(Norm::L2),
            "linf" => Ok(Norm::Linf),
            other => Err(Error::invalid(format!("unknown norm {other:?} (expected l2 or linf)"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FitConfig {
    /// Hidden layer widths `N_1..N_L`.
    pub layers: Vec<usize>,
    pub activation: Activation,
    /// Distance floor in the pair density for layers after the first.
    pub epsilon: f64,
    pub pool_multiplier: usize,
    pub ridge_lambda: f64,
    pub y_norm: Norm,
    pub x_norm: Norm,
    pub seed: u64,
}

impl Default for FitConfig {
    fn default() -> Self {
        FitConfig {
            layers: vec![500],
            activation: Activation::tanh(),
            epsilon: 1e-6,
            pool_multiplier: 1,
            ridge_lambda: 1e-10,
            y_norm: Norm::Linf,
            x_norm: Norm::L2,
            seed: 0,
        }
    }
}

impl FitConfig {
    pub fn new(layers: Vec<usize>, activation: ActivationKind) -> Self {
        FitConfig {
            layers,
            activation: Activation::new(activation),
            ..FitConfig::default()
        }
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn with_ridge(mut self, lambda: f64) -> Self {
        self.ridge_lambda = lambda;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.layers.is_empty() {
            return Err(Error::invalid("at least one hidden layer is required"));
        }
        if let Some(l) = self.layers.iter().position(|&n| n == 0) {
            return Err(Error::invalid(format!("hidden layer {} has width 0", l + 1)));
        }
        if !(self.epsilon > 0.0 && self.epsilon.is_finite()) {
            return Err(Error::invalid(format!(
                "epsilon must be positive, got {}",
                self.epsilon
            )));
        }
        if self.pool_multiplier == 0 {
            return Err(Error::invalid("pool multiplier must be at least 1"));
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

/// Independent random stream for hidden layer `layer` (1-based).
pub fn layer_rng(seed: u64, layer: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(layer as u64);
    rng
}

/// Unnormalized density of the pair `(x1, x2)` for hidden layer `layer`:
/// `‖y2 − y1‖_Y / max(‖r2 − r1‖_X, ε)` with the floor dropped at layer 1,
/// and 0 when the representations coincide.
pub fn pair_weight(
    r1: &[f64],
    r2: &[f64],
    y1: &[f64],
    y2: &[f64],
    layer: usize,
    cfg: &FitConfig,
) -> f64 {
    if r1 == r2 {
        return 0.0;
    }
    let dist = cfg.x_norm.of_difference(r2, r1);
    let floor = if layer <= 1 { 0.0 } else { cfg.epsilon };
    cfg.y_norm.of_difference(y2, y1) / dist.max(floor)
}

/// Candidate pairs for one layer with their unnormalized weights.
#[derive(Clone, Debug, PartialEq)]
pub struct PairPool {
    pub layer: usize,
    pub pairs: Vec<(usize, usize)>,
    pub weights: Vec<f64>,
    pub fallback_uniform: bool,
}

impl PairPool {
    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    /// Sampling probabilities of the candidates.
    pub fn probabilities(&self) -> Vec<f64> {
        if self.fallback_uniform {
            let p = 1.0 / self.len() as f64;
            vec![p; self.len()]
        } else {
            let total: f64 = self.weights.iter().sum();
            self.weights.iter().map(|w| w / total).collect()
        }
    }
}

/// `ς·⌈N_l/M⌉·M`.
pub fn pool_size(rows: usize, width: usize, multiplier: usize) -> usize {
    multiplier * width.div_ceil(rows) * rows
}

/// Draws ordered index pairs uniformly, keeping those whose rows of `reps`
/// differ, until the pool is full or the attempt budget runs out.
pub fn build_pool(
    y: &Matrix,
    reps: &Matrix,
    layer: usize,
    width: usize,
    cfg: &FitConfig,
    rng: &mut impl Rng,
) -> Result<PairPool> {
    let m = reps.rows();
    if m < 2 {
        return Err(Error::DegenerateLayer {
            layer,
            reason: format!("{m} rows, at least 2 are needed to form pairs"),
        });
    }
    if y.rows() != m {
        return Err(Error::DimensionMismatch {
            op: "build_pool",
            left_rows: m,
            left_cols: reps.cols(),
            right_rows: y.rows(),
            right_cols: y.cols(),
        });
    }
    let target = pool_size(m, width, cfg.pool_multiplier);
    let budget = CANDIDATE_ATTEMPTS_PER_SLOT * target;

    let mut pairs = Vec::with_capacity(target);
    let mut weights = Vec::with_capacity(target);
    let mut attempts = 0;
    while pairs.len() < target && attempts < budget {
        attempts += 1;
        let i = rng.random_range(0..m);
        let j = rng.random_range(0..m);
        let (ri, rj) = (reps.row(i), reps.row(j));
        if ri == rj {
            continue;
        }
        let w = pair_weight(ri, rj, y.row(i), y.row(j), layer, cfg);
        if !w.is_finite() {
            return Err(Error::DegenerateLayer {
                layer,
                reason: format!("pair ({i}, {j}) has a non-finite sampling weight"),
            });
        }
        pairs.push((i, j));
        weights.push(w);
    }
    if pairs.is_empty() {
        return Err(Error::DegenerateLayer {
            layer,
            reason: format!(
                "no pair of rows with distinct representations found in {attempts} draws"
            ),
        });
    }
    let fallback_uniform = weights.iter().all(|&w| w == 0.0);
    Ok(PairPool {
        layer,
        pairs,
        weights,
        fallback_uniform,
    })
}

/// `count` draws with replacement, proportional to the pool weights.
pub fn sample_pairs(
    pool: &PairPool,
    count: usize,
    rng: &mut impl Rng,
) -> Result<Vec<(usize, usize)>> {
    if pool.is_empty() {
        return Err(Error::invalid("cannot sample from an empty pool"));
    }
    if pool.fallback_uniform {
        return Ok((0..count)
            .map(|_| pool.pairs[rng.random_range(0..pool.len())])
            .collect());
    }
    let dist = WeightedIndex::new(&pool.weights).map_err(|e| Error::DegenerateLayer {
        layer: pool.layer,
        reason: format!("invalid pool weights: {e}"),
    })?;
    Ok((0..count).map(|_| pool.pairs[dist.sample(rng)]).collect())
}

/// What happened in one hidden layer during a fit.
#[derive(Clone, Debug, PartialEq)]
pub struct LayerTrace {
    pub pool: PairPool,
    pub pairs: Vec<(usize, usize)>,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct FitTrace {
    pub layers: Vec<LayerTrace>,
}

pub fn fit(x: &Matrix, y: &Matrix, cfg: &FitConfig) -> Result<SampledNetwork> {
    fit_traced(x, y, cfg).map(|(net, _)| net)
}

pub fn fit_traced(x: &Matrix, y: &Matrix, cfg: &FitConfig) -> Result<(SampledNetwork, FitTrace)> {
    fit_with_streams(x, y, cfg, |layer| layer_rng(cfg.seed, layer))
}

/// Like [`fit_traced`] but with a caller-supplied random stream per layer.
pub fn fit_with_streams<R: Rng>(
    x: &Matrix,
    y: &Matrix,
    cfg: &FitConfig,
    mut stream: impl FnMut(usize) -> R,
) -> Result<(SampledNetwork, FitTrace)> {
    check_data(x, y, cfg)?;
    let mut trace = FitTrace::default();
    let mut reps = x.clone();
    let mut hidden = Vec::with_capacity(cfg.layers.len());
    for (idx, &width) in cfg.layers.iter().enumerate() {
        let layer = idx + 1;
        let mut rng = stream(layer);
        let pool = build_pool(y, &reps, layer, width, cfg, &mut rng)?;
        let pairs = sample_pairs(&pool, width, &mut rng)?;
        let params = build_layer(&reps, &pairs, layer, &cfg.activation)?;
        reps = advance(&params, &reps, layer, &cfg.activation)?;
        hidden.push(params);
        trace.layers.push(LayerTrace { pool, pairs });
    }
    let net = finish(x, y, cfg, hidden, &reps)?;
    Ok((net, trace))
}

/// Fits with the pair indices of every layer given instead of sampled.
pub fn fit_with_pairs(
    x: &Matrix,
    y: &Matrix,
    cfg: &FitConfig,
    pairs: &[Vec<(usize, usize)>],
) -> Result<SampledNetwork> {
    check_data(x, y, cfg)?;
    if pairs.len() != cfg.layers.len() {
        return Err(Error::invalid(format!(
            "got pairs for {} layers, architecture has {}",
            pairs.len(),
            cfg.layers.len()
        )));
    }
    let mut reps = x.clone();
    let mut hidden = Vec::with_capacity(pairs.len());
    for (idx, (layer_pairs, &width)) in pairs.iter().zip(&cfg.layers).enumerate() {
        if layer_pairs.len() != width {
            return Err(Error::invalid(format!(
                "layer {} needs {width} pairs, got {}",
                idx + 1,
                layer_pairs.len()
            )));
        }
        if let Some(&(i, j)) = layer_pairs.iter().find(|&&(i, j)| i >= x.rows() || j >= x.rows()) {
            return Err(Error::invalid(format!("pair ({i}, {j}) is out of range")));
        }
        let params = build_layer(&reps, layer_pairs, idx + 1, &cfg.activation)?;
        reps = advance(&params, &reps, idx + 1, &cfg.activation)?;
        hidden.push(params);
    }
    finish(x, y, cfg, hidden, &reps)
}

fn check_data(x: &Matrix, y: &Matrix, cfg: &FitConfig) -> Result<()> {
    cfg.validate()?;
    if x.rows() != y.rows() {
        return Err(Error::DimensionMismatch {
            op: "fit",
            left_rows: x.rows(),
            left_cols: x.cols(),
            right_rows: y.rows(),
            right_cols: y.cols(),
        });
    }
    if x.rows() < 2 {
        return Err(Error::invalid(format!(
            "fitting needs at least 2 rows, got {}",
            x.rows()
        )));
    }
    if x.cols() == 0 || y.cols() == 0 {
        return Err(Error::invalid("inputs and targets need at least one column"));
    }
    x.check_finite("inputs")?;
    y.check_finite("targets")
}

fn build_layer(
    reps: &Matrix,
    pairs: &[(usize, usize)],
    layer: usize,
    act: &Activation,
) -> Result<LayerParams> {
    LayerParams::from_pairs(reps, pairs, act).map_err(|e| Error::DegenerateLayer {
        layer,
        reason: e.to_string(),
    })
}

fn advance(params: &LayerParams, reps: &Matrix, layer: usize, act: &Activation) -> Result<Matrix> {
    let next = params.apply(reps, act)?;
    next.check_finite("hidden representation")
        .map_err(|e| Error::DegenerateLayer {
            layer,
            reason: e.to_string(),
        })?;
    Ok(next)
}

fn finish(
    x: &Matrix,
    y: &Matrix,
    cfg: &FitConfig,
    hidden: Vec<LayerParams>,
    reps: &Matrix,
) -> Result<SampledNetwork> {
    let sol = solve_ridge(reps, y, cfg.ridge_lambda)?;
    let mut net = SampledNetwork::new(
        x.cols(),
        hidden,
        cfg.activation,
        Some(OutputLayer {
            weights: sol.weights.transpose(),
            bias: sol.bias,
        }),
    )?;
    net.meta = NetworkMeta {
        seed: Some(cfg.seed),
        config: Some(TrainingConfig::Swim(cfg.clone())),
        training_residual: Some(sol.residual_norm),
        ..NetworkMeta::default()
    };
    Ok(net)
}
