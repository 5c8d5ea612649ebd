//! Network representation and the pair-to-neuron construction.
//!
//! A hidden neuron built from the pair `(x1, x2)` has
//! `w = s1·(x2 − x1)/‖x2 − x1‖²` and `b = ⟨w, x1⟩ + s2`, and is evaluated as
//! `φ(⟨w, x⟩ − b)`. The constants `(s1, s2)` pin the activation values at the
//! two points: relu gives 0 at `x1` and 1 at `x2`; tanh and sine give −½ at
//! `x1`, +½ at `x2` and 0 at the midpoint.

use std::f64::consts::{FRAC_PI_3, FRAC_PI_6};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::baseline::BaselineConfig;
use crate::error::{Error, Result};
use crate::numerics::{dot, matmul_transposed, Matrix};
use crate::sampler::FitConfig;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ActivationKind {
    Relu,
    Tanh,
    Sine,
}

impl ActivationKind {
    pub fn name(self) -> &'static str {
        match self {
            ActivationKind::Relu => "relu",
            ActivationKind::Tanh => "tanh",
            ActivationKind::Sine => "sine",
        }
    }

    #[inline]
    pub fn apply(self, z: f64) -> f64 {
        match self {
            ActivationKind::Relu => z.max(0.0),
            ActivationKind::Tanh => z.tanh(),
            ActivationKind::Sine => z.sin(),
        }
    }
}

impl fmt::Display for ActivationKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ActivationKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "relu" => Ok(ActivationKind::Relu),
            "tanh" => Ok(ActivationKind::Tanh),
            "sine" | "sin" => Ok(ActivationKind::Sine),
            other => Err(Error::invalid(format!(
                "unknown activation {other:?} (expected relu, tanh or sine)"
            ))),
        }
    }
}

/// Activation function together with its pair-placement constants.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Activation {
    pub kind: ActivationKind,
    pub s1: f64,
    pub s2: f64,
}

impl Activation {
    pub fn new(kind: ActivationKind) -> Self {
        let (s1, s2) = match kind {
            ActivationKind::Relu => (1.0, 0.0),
            // tanh(±ln(3)/2) = ±1/2
            ActivationKind::Tanh => (3f64.ln(), 3f64.ln() / 2.0),
            // sin(±π/6) = ±1/2, and [−π/6, π/6] sits inside sin's monotone range
            ActivationKind::Sine => (FRAC_PI_3, FRAC_PI_6),
        };
        Activation { kind, s1, s2 }
    }

    pub fn relu() -> Self {
        Self::new(ActivationKind::Relu)
    }

    pub fn tanh() -> Self {
        Self::new(ActivationKind::Tanh)
    }

    pub fn sine() -> Self {
        Self::new(ActivationKind::Sine)
    }

    /// Overrides the placement constants.
    pub fn with_constants(kind: ActivationKind, s1: f64, s2: f64) -> Result<Self> {
        if !(s1.is_finite() && s2.is_finite()) || s1 == 0.0 {
            return Err(Error::invalid(format!(
                "activation constants must be finite with s1 != 0, got ({s1}, {s2})"
            )));
        }
        Ok(Activation { kind, s1, s2 })
    }

    #[inline]
    pub fn apply(&self, z: f64) -> f64 {
        self.kind.apply(z)
    }
}

/// Weight and bias of one neuron built from the pair `(x1, x2)`.
pub fn weight_from_pair(x1: &[f64], x2: &[f64], act: &Activation) -> Result<(Vec<f64>, f64)> {
    if x1.len() != x2.len() {
        return Err(Error::invalid(format!(
            "pair points have different lengths {} and {}",
            x1.len(),
            x2.len()
        )));
    }
    let diff: Vec<f64> = x2.iter().zip(x1).map(|(b, a)| b - a).collect();
    let sq = dot(&diff, &diff);
    if sq == 0.0 {
        return Err(Error::invalid("pair points coincide"));
    }
    let w: Vec<f64> = diff.iter().map(|d| act.s1 * d / sq).collect();
    let b = dot(&w, x1) + act.s2;
    if !b.is_finite() || w.iter().any(|v| !v.is_finite()) {
        return Err(Error::invalid("pair produced a non-finite weight"));
    }
    Ok((w, b))
}

/// One hidden layer: `N_l × N_{l−1}` weights, one neuron per row.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LayerParams {
    pub weights: Matrix,
    pub biases: Vec<f64>,
}

impl LayerParams {
    pub fn new(weights: Matrix, biases: Vec<f64>) -> Result<Self> {
        if weights.rows() != biases.len() {
            return Err(Error::invalid(format!(
                "layer has {} weight rows but {} biases",
                weights.rows(),
                biases.len()
            )));
        }
        if biases.iter().any(|b| !b.is_finite()) {
            return Err(Error::invalid("non-finite bias"));
        }
        Ok(LayerParams { weights, biases })
    }

    /// Builds a layer from point pairs given as rows of the previous layer's
    /// representation.
    pub fn from_pairs(
        reps: &Matrix,
        pairs: &[(usize, usize)],
        act: &Activation,
    ) -> Result<Self> {
        let width = reps.cols();
        let mut data = Vec::with_capacity(pairs.len() * width);
        let mut biases = Vec::with_capacity(pairs.len());
        for &(i, j) in pairs {
            let (w, b) = weight_from_pair(reps.row(i), reps.row(j), act)?;
            data.extend(w);
            biases.push(b);
        }
        Ok(LayerParams {
            weights: Matrix::new(pairs.len(), width, data)?,
            biases,
        })
    }

    pub fn width(&self) -> usize {
        self.weights.rows()
    }

    pub fn input_dim(&self) -> usize {
        self.weights.cols()
    }

    /// `φ(X·Wᵀ − b)`.
    pub fn apply(&self, x: &Matrix, act: &Activation) -> Result<Matrix> {
        let mut z = matmul_transposed(x, &self.weights)?;
        for i in 0..z.rows() {
            for (v, b) in z.row_mut(i).iter_mut().zip(&self.biases) {
                *v = act.apply(*v - b);
            }
        }
        Ok(z)
    }
}

/// Linear readout: predictions are `H·Wᵀ − b`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OutputLayer {
    /// `N_{L+1} × N_L`.
    pub weights: Matrix,
    pub bias: Vec<f64>,
}

/// Training configuration recorded with a network.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "method", rename_all = "snake_case")]
pub enum TrainingConfig {
    Swim(FitConfig),
    RandomFeatures(BaselineConfig),
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct NetworkMeta {
    pub seed: Option<u64>,
    pub config: Option<TrainingConfig>,
    /// Frobenius norm of the training residual recorded by the output solve.
    pub training_residual: Option<f64>,
    /// Class names for one-hot classifiers, in output order.
    pub labels: Option<Vec<String>>,
    /// Input column names, when the training data had a header.
    pub feature_names: Option<Vec<String>>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SampledNetwork {
    pub input_dim: usize,
    pub hidden: Vec<LayerParams>,
    pub activation: Activation,
    pub output: Option<OutputLayer>,
    pub meta: NetworkMeta,
}

impl SampledNetwork {
    /// Checks that layer shapes chain from `input_dim` through to the output.
    pub fn new(
        input_dim: usize,
        hidden: Vec<LayerParams>,
        activation: Activation,
        output: Option<OutputLayer>,
    ) -> Result<Self> {
        let net = SampledNetwork {
            input_dim,
            hidden,
            activation,
            output,
            meta: NetworkMeta::default(),
        };
        net.validate()?;
        Ok(net)
    }

    pub fn validate(&self) -> Result<()> {
        let mut prev = self.input_dim;
        for (l, layer) in self.hidden.iter().enumerate() {
            if layer.input_dim() != prev {
                return Err(Error::invalid(format!(
                    "hidden layer {} expects {} inputs but layer {} produces {prev}",
                    l + 1,
                    layer.input_dim(),
                    l
                )));
            }
            if layer.biases.len() != layer.width() {
                return Err(Error::invalid(format!(
                    "hidden layer {} has {} rows but {} biases",
                    l + 1,
                    layer.width(),
                    layer.biases.len()
                )));
            }
            prev = layer.width();
        }
        if let Some(out) = &self.output {
            if out.weights.cols() != prev || out.bias.len() != out.weights.rows() {
                return Err(Error::invalid(format!(
                    "output layer is {}x{} with {} biases, but the last hidden layer has width {prev}",
                    out.weights.rows(),
                    out.weights.cols(),
                    out.bias.len()
                )));
            }
        }
        Ok(())
    }

    pub fn depth(&self) -> usize {
        self.hidden.len()
    }

    pub fn widths(&self) -> Vec<usize> {
        self.hidden.iter().map(LayerParams::width).collect()
    }

    pub fn output_dim(&self) -> Option<usize> {
        self.output.as_ref().map(|o| o.weights.rows())
    }

    fn check_input(&self, x: &Matrix) -> Result<()> {
        if x.cols() != self.input_dim {
            return Err(Error::invalid(format!(
                "input has {} columns but the network expects D = {}",
                x.cols(),
                self.input_dim
            )));
        }
        Ok(())
    }

    /// Output of hidden layer `upto` (0 returns the input itself).
    pub fn forward_hidden(&self, x: &Matrix, upto: usize) -> Result<Matrix> {
        self.check_input(x)?;
        if upto > self.hidden.len() {
            return Err(Error::invalid(format!(
                "layer index {upto} exceeds depth {}",
                self.hidden.len()
            )));
        }
        let mut h = x.clone();
        for layer in &self.hidden[..upto] {
            h = layer.apply(&h, &self.activation)?;
        }
        Ok(h)
    }

    pub fn forward(&self, x: &Matrix) -> Result<Matrix> {
        let out = self.output.as_ref().ok_or(Error::Untrained)?;
        let h = self.forward_hidden(x, self.hidden.len())?;
        apply_readout(&h, out)
    }

    /// Index of the largest output per row, lowest index on ties.
    pub fn predict_classes(&self, x: &Matrix) -> Result<Vec<usize>> {
        let k = self.output_dim().ok_or(Error::Untrained)?;
        if k < 2 {
            return Err(Error::invalid(
                "class prediction needs at least two outputs",
            ));
        }
        Ok(argmax_rows(&self.forward(x)?))
    }

    /// Class names for each row, using the stored label dictionary.
    pub fn predict_labels(&self, x: &Matrix) -> Result<Vec<String>> {
        let labels = self
            .meta
            .labels
            .as_ref()
            .ok_or_else(|| Error::invalid("network has no label dictionary"))?;
        self.predict_classes(x)?
            .into_iter()
            .map(|c| {
                labels
                    .get(c)
                    .cloned()
                    .ok_or_else(|| Error::invalid(format!("class {c} has no label")))
            })
            .collect()
    }

    /// Multiplies unit `unit` of hidden layer `layer` (0-based) by `omega`
    /// and divides its outgoing weights by `omega`. For relu this leaves the
    /// network function unchanged.
    pub fn rescale_unit(&mut self, layer: usize, unit: usize, omega: f64) -> Result<()> {
        if self.activation.kind != ActivationKind::Relu {
            return Err(Error::invalid("rescaling needs a positively homogeneous activation"));
        }
        if !(omega > 0.0 && omega.is_finite()) {
            return Err(Error::invalid(format!("scale must be positive, got {omega}")));
        }
        if layer >= self.hidden.len() || unit >= self.hidden[layer].width() {
            return Err(Error::invalid(format!("no unit {unit} in hidden layer {layer}")));
        }
        let h = &mut self.hidden[layer];
        for v in h.weights.row_mut(unit) {
            *v *= omega;
        }
        h.biases[unit] *= omega;
        let next = if layer + 1 < self.hidden.len() {
            &mut self.hidden[layer + 1].weights
        } else {
            &mut self.output.as_mut().ok_or(Error::Untrained)?.weights
        };
        for r in 0..next.rows() {
            let v = next.get(r, unit);
            next.set(r, unit, v / omega);
        }
        Ok(())
    }
}

pub(crate) fn apply_readout(h: &Matrix, out: &OutputLayer) -> Result<Matrix> {
    let mut y = matmul_transposed(h, &out.weights)?;
    for i in 0..y.rows() {
        for (v, b) in y.row_mut(i).iter_mut().zip(&out.bias) {
            *v -= b;
        }
    }
    Ok(y)
}

pub fn argmax_rows(y: &Matrix) -> Vec<usize> {
    y.row_iter()
        .map(|row| {
            let mut best = 0;
            for (j, &v) in row.iter().enumerate() {
                if v > row[best] {
                    best = j;
                }
            }
            best
        })
        .collect()
}

/// Five relu neurons on a scalar input that add `c` for `x > c2` and vanish
/// for `x ≤ c1`, ramping linearly in between.
///
/// The neurons are, in order, `φ(x − c2)`, `φ(c3 − x)`, `φ(x − c3)`,
/// `φ(c1 − x)`, `φ(x − c1)`. With the commonly quoted coefficients
/// `(a1, a1, −a1, −a2, a3)` the sum does not vanish below `c1` (for
/// `c = 1, c1 = 0, c2 = 1, c3 = 2` it is `2 + x` there and 4 at `x = 3`).
/// Writing `φ(z) − φ(−z) = z`, the reflected neurons only contribute affine
/// terms, and matching the ramp on all of ℝ forces the unique coefficient
/// vector `(−a3, 0, 0, 0, a3)`. The slope `a3 = a2 − a1 = c/(c2 − c1)` is
/// kept; the ramp intercept is `d = −a3·c1` (not `a1·c3 + a2·c2`).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ConstantBlock {
    pub c: f64,
    pub c1: f64,
    pub c2: f64,
    pub c3: f64,
    pub a1: f64,
    pub a2: f64,
    pub a3: f64,
}

impl ConstantBlock {
    pub fn new(c: f64, c1: f64, c2: f64, c3: f64) -> Result<Self> {
        if ![c, c1, c2, c3].iter().all(|v| v.is_finite()) {
            return Err(Error::invalid("constant block parameters must be finite"));
        }
        if !(c1 < c2 && c2 < c3) {
            return Err(Error::invalid(format!(
                "constant block needs c1 < c2 < c3, got ({c1}, {c2}, {c3})"
            )));
        }
        let a1 = c / (c3 - c2);
        let a2 = a1 * (c1 - c3) / (c1 - c2);
        let a3 = a2 - a1;
        Ok(ConstantBlock {
            c,
            c1,
            c2,
            c3,
            a1,
            a2,
            a3,
        })
    }

    /// Pre-activation offsets and signs of the five neurons: unit `i` is
    /// `φ(sign_i·(x − offset_i))`.
    pub fn neurons(&self) -> [(f64, f64); 5] {
        [
            (1.0, self.c2),
            (-1.0, self.c3),
            (1.0, self.c3),
            (-1.0, self.c1),
            (1.0, self.c1),
        ]
    }

    /// Output weights of the five neurons.
    pub fn coefficients(&self) -> [f64; 5] {
        [-self.a3, 0.0, 0.0, 0.0, self.a3]
    }

    /// Sum of the five weighted relu neurons.
    pub fn eval(&self, x: f64) -> f64 {
        self.neurons()
            .iter()
            .zip(self.coefficients())
            .map(|(&(sign, off), a)| a * ActivationKind::Relu.apply(sign * (x - off)))
            .sum()
    }

    /// Ramp intercept of the closed form.
    pub fn ramp_intercept(&self) -> f64 {
        -self.a3 * self.c1
    }

    /// Closed piecewise form: 0, then `a3·x + d`, then `c`.
    pub fn piecewise(&self, x: f64) -> f64 {
        if x <= self.c1 {
            0.0
        } else if x <= self.c2 {
            self.a3 * x + self.ramp_intercept()
        } else {
            self.c
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn relu_pair_hand_evaluated() {
        let (w, b) = weight_from_pair(&[0.0, 0.0], &[2.0, 0.0], &Activation::relu()).unwrap();
        assert_eq!(w, vec![0.5, 0.0]);
        assert_eq!(b, 0.0);
    }

    #[test]
    fn tanh_pair_in_one_dimension() {
        let act = Activation::tanh();
        let (w, b) = weight_from_pair(&[0.0], &[1.0], &act).unwrap();
        assert!((w[0] - 3f64.ln()).abs() < 1e-15);
        assert!((b - 3f64.ln() / 2.0).abs() < 1e-15);
        assert!((act.apply(w[0] * 0.0 - b) + 0.5).abs() < 1e-15);
        assert!((act.apply(w[0] * 1.0 - b) - 0.5).abs() < 1e-15);
    }

    #[test]
    fn coincident_pair_rejected() {
        assert!(weight_from_pair(&[1.0, 2.0], &[1.0, 2.0], &Activation::relu()).is_err());
    }

    #[test]
    fn placement_constants() {
        let t = Activation::tanh();
        assert_eq!(t.s1, 2.0 * t.s2);
        let s = Activation::sine();
        assert!((s.apply(-s.s2) + 0.5).abs() < 1e-15);
        assert!((s.apply(s.s1 - s.s2) - 0.5).abs() < 1e-15);
        assert_eq!((Activation::relu().s1, Activation::relu().s2), (1.0, 0.0));
    }

    fn one_layer(weights: Matrix, biases: Vec<f64>, act: Activation) -> SampledNetwork {
        let d = weights.cols();
        let n = weights.rows();
        SampledNetwork::new(
            d,
            vec![LayerParams::new(weights, biases).unwrap()],
            act,
            Some(OutputLayer {
                weights: Matrix::zeros(1, n),
                bias: vec![-3.0],
            }),
        )
        .unwrap()
    }

    #[test]
    fn forward_hidden_layer_zero_is_identity() {
        let net = one_layer(Matrix::from_rows(&[[1.0, 0.0]]).unwrap(), vec![0.0], Activation::relu());
        let x = Matrix::from_rows(&[[-1.0, 5.0], [2.0, 3.0]]).unwrap();
        assert_eq!(net.forward_hidden(&x, 0).unwrap(), x);
    }

    #[test]
    fn forward_hidden_relu_clamps() {
        let net = one_layer(Matrix::from_rows(&[[1.0, 0.0]]).unwrap(), vec![0.0], Activation::relu());
        let x = Matrix::from_rows(&[[-1.0, 5.0]]).unwrap();
        assert_eq!(net.forward_hidden(&x, 1).unwrap().as_slice(), &[0.0]);
    }

    #[test]
    fn forward_hidden_tanh_midpoint() {
        let ln3 = 3f64.ln();
        let net = one_layer(Matrix::from_rows(&[[ln3]]).unwrap(), vec![ln3 / 2.0], Activation::tanh());
        let x = Matrix::from_rows(&[[0.5]]).unwrap();
        assert!(net.forward_hidden(&x, 1).unwrap().get(0, 0).abs() < 1e-15);
    }

    #[test]
    fn forward_constant_map() {
        let net = one_layer(Matrix::from_rows(&[[1.0, 0.0]]).unwrap(), vec![0.0], Activation::relu());
        let x = Matrix::from_rows(&[[-1.0, 5.0], [4.0, 4.0], [0.0, 0.0]]).unwrap();
        assert_eq!(net.forward(&x).unwrap().as_slice(), &[3.0, 3.0, 3.0]);
    }

    #[test]
    fn forward_rejects_width_mismatch() {
        let net = one_layer(Matrix::from_rows(&[[1.0, 0.0]]).unwrap(), vec![0.0], Activation::relu());
        let x = Matrix::zeros(1, 3);
        assert!(net.forward(&x).is_err());
        assert!(net.forward_hidden(&x, 0).is_err());
        assert!(net.forward_hidden(&Matrix::zeros(1, 2), 2).is_err());
    }

    #[test]
    fn argmax_tie_breaks_low() {
        let y = Matrix::from_rows(&[vec![0.1, 0.9], vec![0.5, 0.5]]).unwrap();
        assert_eq!(argmax_rows(&y), vec![1, 0]);
        let y = Matrix::from_rows(&[[0.2, 0.7, 0.1]]).unwrap();
        assert_eq!(argmax_rows(&y), vec![1]);
    }

    #[test]
    fn untrained_network_rejected() {
        let mut net = one_layer(Matrix::identity(2), vec![0.0, 0.0], Activation::relu());
        net.output = None;
        assert!(matches!(net.predict_classes(&Matrix::zeros(1, 2)), Err(Error::Untrained)));
        assert!(matches!(net.forward(&Matrix::zeros(1, 2)), Err(Error::Untrained)));
    }

    #[test]
    fn shape_chain_validated() {
        let l1 = LayerParams::new(Matrix::zeros(3, 2), vec![0.0; 3]).unwrap();
        let l2 = LayerParams::new(Matrix::zeros(2, 4), vec![0.0; 2]).unwrap();
        let err = SampledNetwork::new(2, vec![l1, l2], Activation::relu(), None).unwrap_err();
        assert!(err.to_string().contains("hidden layer 2"), "{err}");
    }

    #[test]
    fn constant_block_hand_evaluated() {
        let blk = ConstantBlock::new(1.0, 0.0, 1.0, 2.0).unwrap();
        assert_eq!((blk.a1, blk.a2, blk.a3), (1.0, 2.0, 1.0));
        assert!((blk.eval(3.0) - 1.0).abs() < 1e-15);
        assert_eq!(blk.eval(-0.5), 0.0);
        assert!((blk.eval(0.25) - 0.25).abs() < 1e-15);
        assert_eq!(blk.piecewise(3.0), 1.0);
        assert_eq!(blk.piecewise(0.0), 0.0);
    }

    #[test]
    fn quoted_coefficients_do_not_vanish_below_c1() {
        let blk = ConstantBlock::new(1.0, 0.0, 1.0, 2.0).unwrap();
        let quoted = [blk.a1, blk.a1, -blk.a1, -blk.a2, blk.a3];
        let eval = |x: f64| -> f64 {
            blk.neurons()
                .iter()
                .zip(quoted)
                .map(|(&(s, o), a)| a * (s * (x - o)).max(0.0))
                .sum()
        };
        assert_eq!(eval(-1.0), 1.0);
        assert_eq!(eval(3.0), 4.0);
    }

    #[test]
    fn constant_block_rejects_unordered() {
        assert!(ConstantBlock::new(1.0, 1.0, 1.0, 2.0).is_err());
        assert!(ConstantBlock::new(1.0, 0.0, 3.0, 2.0).is_err());
    }

    #[test]
    fn rescale_requires_relu() {
        let mut net = one_layer(Matrix::identity(1), vec![0.0], Activation::tanh());
        assert!(net.rescale_unit(0, 0, 2.0).is_err());
        let mut net = one_layer(Matrix::identity(1), vec![0.0], Activation::relu());
        assert!(net.rescale_unit(0, 0, 0.0).is_err());
        assert!(net.rescale_unit(0, 1, 1.0).is_err());
        net.rescale_unit(0, 0, 2.0).unwrap();
    }
}
