//! Experiment runners: Barron-function approximation, stratified k-fold
//! classification, rigid input transforms and fit-time scaling.

use std::collections::hash_map::DefaultHasher;
use std::hash::Hasher;
use std::time::Instant;

use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;

use crate::baseline::{fit_random_features, BaselineConfig};
use crate::dataio::one_hot;
use crate::error::{Error, Result};
use crate::network::{Activation, ActivationKind, SampledNetwork};
use crate::numerics::{matmul, matmul_transposed, Matrix};
use crate::sampler::{fit, layer_rng, FitConfig};

pub const METHOD_SWIM: &str = "swim";
pub const METHOD_RANDOM_FEATURES: &str = "random_features";

/// Random stream reserved for data generation; hidden layers use 1, 2, ...
const DATA_STREAM: usize = 0;

/// One line of a results table.
#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentRow {
    pub method: String,
    pub depth: usize,
    pub width: usize,
    pub seed: u64,
    pub metric: String,
    pub value: f64,
    pub fit_seconds: f64,
    /// Set when the fit failed; `value` is then NaN.
    pub failure: Option<String>,
}

impl ExperimentRow {
    fn failed(method: &str, depth: usize, width: usize, seed: u64, metric: &str, err: Error) -> Self {
        ExperimentRow {
            method: method.into(),
            depth,
            width,
            seed,
            metric: metric.into(),
            value: f64::NAN,
            fit_seconds: 0.0,
            failure: Some(err.to_string()),
        }
    }
}

/// Points drawn uniformly from `[−1, 1]^d`.
pub fn uniform_cube(rows: usize, dim: usize, rng: &mut impl Rng) -> Matrix {
    Matrix::from_fn(rows, dim, |_, _| rng.random_range(-1.0..=1.0))
}

/// `√(3/2)·(‖x − a‖ − ‖x + a‖)` with `a_j = 2j/D − 1`, `j = 1..D`.
pub fn barron_target(x: &Matrix) -> Vec<f64> {
    let d = x.cols();
    let a: Vec<f64> = (1..=d).map(|j| 2.0 * j as f64 / d as f64 - 1.0).collect();
    let scale = 1.5f64.sqrt();
    x.row_iter()
        .map(|row| {
            let (mut minus, mut plus) = (0.0, 0.0);
            for (xi, ai) in row.iter().zip(&a) {
                minus += (xi - ai) * (xi - ai);
                plus += (xi + ai) * (xi + ai);
            }
            scale * (minus.sqrt() - plus.sqrt())
        })
        .collect()
}

/// `√(Σ(pred − truth)² / Σ truth²)`.
pub fn relative_l2_error(pred: &[f64], truth: &[f64]) -> Result<f64> {
    if pred.len() != truth.len() {
        return Err(Error::invalid(format!(
            "prediction has {} values, truth has {}",
            pred.len(),
            truth.len()
        )));
    }
    let denom: f64 = truth.iter().map(|t| t * t).sum();
    if denom == 0.0 {
        return Err(Error::invalid("relative error undefined for an all-zero truth"));
    }
    let num: f64 = pred.iter().zip(truth).map(|(p, t)| (p - t) * (p - t)).sum();
    Ok((num / denom).sqrt())
}

/// Hash of the bit patterns of the given matrices.
pub fn data_digest(parts: &[&Matrix]) -> u64 {
    let mut h = DefaultHasher::new();
    for m in parts {
        h.write_usize(m.rows());
        h.write_usize(m.cols());
        for v in m.as_slice() {
            h.write_u64(v.to_bits());
        }
    }
    h.finish()
}

#[derive(Clone, Debug, PartialEq)]
pub struct BarronSpec {
    pub dim: usize,
    pub train_points: usize,
    pub test_points: usize,
    pub widths: Vec<usize>,
    pub depths: Vec<usize>,
    /// Activation of the sampled networks; random features always use sine.
    pub activation: ActivationKind,
    pub seeds: Vec<u64>,
    pub ridge_lambda: f64,
}

impl Default for BarronSpec {
    fn default() -> Self {
        BarronSpec {
            dim: 5,
            train_points: 10_000,
            test_points: 10_000,
            widths: vec![64, 256, 1024],
            depths: vec![1],
            activation: ActivationKind::Sine,
            seeds: vec![0],
            ridge_lambda: 1e-10,
        }
    }
}

impl BarronSpec {
    pub fn validate(&self) -> Result<()> {
        if self.dim == 0 {
            return Err(Error::invalid("dimension must be at least 1"));
        }
        if self.train_points < 2 || self.test_points < 1 {
            return Err(Error::invalid("need at least 2 training and 1 test point"));
        }
        if self.widths.is_empty() || self.widths.contains(&0) {
            return Err(Error::invalid("widths must be nonempty and positive"));
        }
        if self.depths.is_empty() || self.depths.contains(&0) {
            return Err(Error::invalid("depths must be nonempty and positive"));
        }
        if self.seeds.is_empty() {
            return Err(Error::invalid("at least one seed is required"));
        }
        Ok(())
    }
}

/// Train/test split for one seed of the Barron study.
#[derive(Clone, Debug, PartialEq)]
pub struct BarronData {
    pub x_train: Matrix,
    pub y_train: Matrix,
    pub x_test: Matrix,
    pub y_test: Vec<f64>,
}

impl BarronData {
    pub fn generate(dim: usize, train: usize, test: usize, seed: u64) -> Self {
        let mut rng = layer_rng(seed, DATA_STREAM);
        let x_train = uniform_cube(train, dim, &mut rng);
        let x_test = uniform_cube(test, dim, &mut rng);
        let y_train = Matrix::from_raw(train, 1, barron_target(&x_train));
        let y_test = barron_target(&x_test);
        BarronData {
            x_train,
            y_train,
            x_test,
            y_test,
        }
    }

    pub fn digest(&self) -> u64 {
        let y_test = Matrix::from_raw(self.y_test.len(), 1, self.y_test.clone());
        data_digest(&[&self.x_train, &self.y_train, &self.x_test, &y_test])
    }
}

/// Fits one network of the Barron study and returns (test error, fit seconds).
pub fn barron_case(
    data: &BarronData,
    method: &str,
    layers: Vec<usize>,
    activation: ActivationKind,
    seed: u64,
    ridge_lambda: f64,
) -> Result<(f64, f64)> {
    let start = Instant::now();
    let net = match method {
        METHOD_SWIM => {
            let cfg = FitConfig {
                layers,
                activation: Activation::new(activation),
                ridge_lambda,
                seed,
                ..FitConfig::default()
            };
            fit(&data.x_train, &data.y_train, &cfg)?
        }
        METHOD_RANDOM_FEATURES => {
            let cfg = BaselineConfig {
                layers,
                seed,
                ridge_lambda,
            };
            fit_random_features(&data.x_train, &data.y_train, &cfg)?
        }
        other => return Err(Error::invalid(format!("unknown method {other:?}"))),
    };
    let secs = start.elapsed().as_secs_f64();
    let pred = net.forward(&data.x_test)?.into_vec();
    Ok((relative_l2_error(&pred, &data.y_test)?, secs))
}

/// Runs every (seed, method, depth, width) combination. Both methods see the
/// same data within a seed. Failed fits are reported as failed rows.
pub fn run_barron(spec: &BarronSpec) -> Result<Vec<ExperimentRow>> {
    spec.validate()?;
    let mut rows = Vec::new();
    for &seed in &spec.seeds {
        let data = BarronData::generate(spec.dim, spec.train_points, spec.test_points, seed);
        let mut cases = Vec::new();
        for method in [METHOD_SWIM, METHOD_RANDOM_FEATURES] {
            for &depth in &spec.depths {
                for &width in &spec.widths {
                    cases.push((method, depth, width));
                }
            }
        }
        let seed_rows: Vec<ExperimentRow> = cases
            .par_iter()
            .map(|&(method, depth, width)| {
                match barron_case(&data, method, vec![width; depth], spec.activation, seed, spec.ridge_lambda) {
                    Ok((err, secs)) => ExperimentRow {
                        method: method.into(),
                        depth,
                        width,
                        seed,
                        metric: "rel_l2".into(),
                        value: err,
                        fit_seconds: secs,
                        failure: None,
                    },
                    Err(e) => ExperimentRow::failed(method, depth, width, seed, "rel_l2", e),
                }
            })
            .collect();
        rows.extend(seed_rows);
    }
    Ok(rows)
}

/// Runs `f` on a pool of `jobs` worker threads.
pub fn with_jobs<T: Send>(jobs: usize, f: impl FnOnce() -> T + Send) -> Result<T> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.max(1))
        .build()
        .map_err(|e| Error::invalid(format!("cannot start worker threads: {e}")))?;
    Ok(pool.install(f))
}

/// Least-squares slope of `ln y` against `ln x`.
pub fn log_log_slope(x: &[f64], y: &[f64]) -> f64 {
    let lx: Vec<f64> = x.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = y.iter().map(|v| v.ln()).collect();
    let n = lx.len() as f64;
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let sxy: f64 = lx.iter().zip(&ly).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = lx.iter().map(|a| (a - mx) * (a - mx)).sum();
    sxy / sxx
}

#[derive(Clone, Debug, PartialEq)]
pub struct ClassificationSpec {
    pub folds: usize,
    pub depths: Vec<usize>,
    pub width: usize,
    pub activation: ActivationKind,
    pub ridge_lambda: f64,
    pub seed: u64,
    /// Rows kept (after a seeded shuffle) before splitting.
    pub max_rows: Option<usize>,
}

impl Default for ClassificationSpec {
    fn default() -> Self {
        ClassificationSpec {
            folds: 10,
            depths: vec![1, 2, 3, 4, 5],
            width: 500,
            activation: ActivationKind::Tanh,
            ridge_lambda: 1e-10,
            seed: 0,
            max_rows: Some(5000),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ClassificationReport {
    /// One row per (depth, fold) with metric `fold<k>_accuracy`, then one
    /// `mean_accuracy` row per depth.
    pub rows: Vec<ExperimentRow>,
    /// `fold_accuracy[d][k]` for depth index `d` and fold `k`.
    pub fold_accuracy: Vec<Vec<f64>>,
    pub mean_accuracy: Vec<f64>,
    pub best_depth: usize,
}

/// (depth index, depth, fold, accuracy and fit seconds).
type FoldOutcome = (usize, usize, usize, Result<(f64, f64)>);

/// Fold index of every row. Classes are visited in order of first
/// appearance, each class's rows are shuffled, then dealt round-robin with
/// a counter that carries over between classes.
pub fn stratified_folds(classes: &[usize], folds: usize, seed: u64) -> Result<Vec<usize>> {
    if folds < 2 {
        return Err(Error::invalid(format!("need at least 2 folds, got {folds}")));
    }
    let mut order: Vec<usize> = Vec::new();
    let mut members: Vec<Vec<usize>> = Vec::new();
    let mut slot = std::collections::HashMap::new();
    for (i, &c) in classes.iter().enumerate() {
        let s = *slot.entry(c).or_insert_with(|| {
            order.push(c);
            members.push(Vec::new());
            members.len() - 1
        });
        members[s].push(i);
    }
    if members.len() < 2 {
        return Err(Error::invalid(
            "stratified splitting needs at least two classes",
        ));
    }
    for (s, rows) in members.iter().enumerate() {
        if rows.len() < folds {
            return Err(Error::invalid(format!(
                "class {} has {} rows, fewer than the {folds} folds",
                order[s],
                rows.len()
            )));
        }
    }
    let mut rng = layer_rng(seed, DATA_STREAM);
    let mut assignment = vec![0; classes.len()];
    let mut counter = 0;
    for rows in &mut members {
        rows.shuffle(&mut rng);
        for &i in rows.iter() {
            assignment[i] = counter % folds;
            counter += 1;
        }
    }
    Ok(assignment)
}

pub fn accuracy(pred: &[usize], truth: &[usize]) -> f64 {
    let hits = pred.iter().zip(truth).filter(|(a, b)| a == b).count();
    hits as f64 / truth.len() as f64
}

/// k-fold cross-validated accuracy of sampled networks for each depth.
pub fn run_classification(
    x: &Matrix,
    classes: &[usize],
    spec: &ClassificationSpec,
) -> Result<ClassificationReport> {
    if x.rows() != classes.len() {
        return Err(Error::invalid(format!(
            "{} feature rows but {} labels",
            x.rows(),
            classes.len()
        )));
    }
    if spec.depths.is_empty() || spec.depths.contains(&0) || spec.width == 0 {
        return Err(Error::invalid("depths and width must be positive"));
    }

    let (x, classes) = match spec.max_rows {
        Some(cap) if cap < x.rows() => {
            let mut idx: Vec<usize> = (0..x.rows()).collect();
            idx.shuffle(&mut layer_rng(spec.seed ^ 0x5eed, DATA_STREAM));
            idx.truncate(cap);
            idx.sort_unstable();
            let c: Vec<usize> = idx.iter().map(|&i| classes[i]).collect();
            (x.select_rows(&idx), c)
        }
        _ => (x.clone(), classes.to_vec()),
    };
    let n_classes = classes.iter().max().map_or(0, |m| m + 1);
    let assignment = stratified_folds(&classes, spec.folds, spec.seed)?;

    let mut cases = Vec::new();
    for (d, &depth) in spec.depths.iter().enumerate() {
        for fold in 0..spec.folds {
            cases.push((d, depth, fold));
        }
    }
    let results: Vec<FoldOutcome> = cases
        .par_iter()
        .map(|&(d, depth, fold)| {
            let train: Vec<usize> = (0..x.rows()).filter(|&i| assignment[i] != fold).collect();
            let test: Vec<usize> = (0..x.rows()).filter(|&i| assignment[i] == fold).collect();
            let train_classes: Vec<usize> = train.iter().map(|&i| classes[i]).collect();
            let test_classes: Vec<usize> = test.iter().map(|&i| classes[i]).collect();
            let cfg = FitConfig {
                layers: vec![spec.width; depth],
                activation: Activation::new(spec.activation),
                ridge_lambda: spec.ridge_lambda,
                seed: spec.seed,
                ..FitConfig::default()
            };
            let outcome = (|| {
                let xt = x.select_rows(&train);
                let yt = one_hot(&train_classes, n_classes.max(2));
                let start = Instant::now();
                let net = fit(&xt, &yt, &cfg)?;
                let secs = start.elapsed().as_secs_f64();
                let pred = net.predict_classes(&x.select_rows(&test))?;
                Ok((accuracy(&pred, &test_classes), secs))
            })();
            (d, depth, fold, outcome)
        })
        .collect();

    let mut rows = Vec::new();
    let mut fold_accuracy = vec![vec![f64::NAN; spec.folds]; spec.depths.len()];
    let mut fit_secs = vec![0.0; spec.depths.len()];
    for (d, depth, fold, outcome) in results {
        let metric = format!("fold{fold}_accuracy");
        match outcome {
            Ok((acc, secs)) => {
                fold_accuracy[d][fold] = acc;
                fit_secs[d] += secs;
                rows.push(ExperimentRow {
                    method: METHOD_SWIM.into(),
                    depth,
                    width: spec.width,
                    seed: spec.seed,
                    metric,
                    value: acc,
                    fit_seconds: secs,
                    failure: None,
                });
            }
            Err(e) => rows.push(ExperimentRow::failed(METHOD_SWIM, depth, spec.width, spec.seed, &metric, e)),
        }
    }
    let mean_accuracy: Vec<f64> = fold_accuracy
        .iter()
        .map(|f| f.iter().sum::<f64>() / f.len() as f64)
        .collect();
    for (d, &depth) in spec.depths.iter().enumerate() {
        rows.push(ExperimentRow {
            method: METHOD_SWIM.into(),
            depth,
            width: spec.width,
            seed: spec.seed,
            metric: "mean_accuracy".into(),
            value: mean_accuracy[d],
            fit_seconds: fit_secs[d] / spec.folds as f64,
            failure: mean_accuracy[d].is_nan().then(|| "one or more folds failed".to_string()),
        });
    }
    let best = (0..spec.depths.len())
        .filter(|&d| !mean_accuracy[d].is_nan())
        .fold(None, |best: Option<usize>, d| match best {
            Some(b) if mean_accuracy[b] >= mean_accuracy[d] => Some(b),
            _ => Some(d),
        })
        .ok_or_else(|| Error::invalid("every depth failed"))?;
    Ok(ClassificationReport {
        rows,
        fold_accuracy,
        mean_accuracy,
        best_depth: spec.depths[best],
    })
}

/// Isotropic Gaussian clusters, `per_class` rows around each center,
/// rows interleaved by class. Returns features and class indices.
pub fn gaussian_blobs(
    centers: &Matrix,
    per_class: usize,
    spread: f64,
    seed: u64,
) -> (Matrix, Vec<usize>) {
    let mut rng = layer_rng(seed, DATA_STREAM);
    let k = centers.rows();
    let d = centers.cols();
    let mut data = Vec::with_capacity(k * per_class * d);
    let mut classes = Vec::with_capacity(k * per_class);
    for _ in 0..per_class {
        for c in 0..k {
            for &mu in centers.row(c) {
                let z: f64 = StandardNormal.sample(&mut rng);
                data.push(mu + spread * z);
            }
            classes.push(c);
        }
    }
    (Matrix::from_raw(k * per_class, d, data), classes)
}

/// `H(x) = a·A·x + c` with `A` orthogonal.
#[derive(Clone, Debug, PartialEq)]
pub struct RigidTransform {
    pub scale: f64,
    pub rotation: Matrix,
    pub shift: Vec<f64>,
}

impl RigidTransform {
    pub fn new(scale: f64, rotation: Matrix, shift: Vec<f64>) -> Result<Self> {
        let d = rotation.rows();
        if rotation.cols() != d || shift.len() != d {
            return Err(Error::invalid("rotation must be square and match the shift length"));
        }
        if scale == 0.0 || !scale.is_finite() {
            return Err(Error::invalid(format!("scale must be nonzero, got {scale}")));
        }
        let gram = matmul(&rotation.transpose(), &rotation)?;
        let dev = gram.max_abs_diff(&Matrix::identity(d)) * d as f64;
        let fro = {
            let mut s = 0.0;
            for i in 0..d {
                for j in 0..d {
                    let e = gram.get(i, j) - if i == j { 1.0 } else { 0.0 };
                    s += e * e;
                }
            }
            s.sqrt()
        };
        if fro > 1e-10 {
            return Err(Error::invalid(format!(
                "rotation is not orthogonal (deviation {fro:e}, max entry {dev:e})"
            )));
        }
        Ok(RigidTransform {
            scale,
            rotation,
            shift,
        })
    }

    pub fn identity(d: usize) -> Self {
        RigidTransform {
            scale: 1.0,
            rotation: Matrix::identity(d),
            shift: vec![0.0; d],
        }
    }

    /// Random orthogonal matrix (Gram-Schmidt on a Gaussian matrix, applied
    /// twice) and Gaussian shift.
    pub fn random(d: usize, scale: f64, rng: &mut impl Rng) -> Result<Self> {
        let mut q = Matrix::from_fn(d, d, |_, _| StandardNormal.sample(rng));
        for _ in 0..2 {
            for j in 0..d {
                for k in 0..j {
                    let proj: f64 = (0..d).map(|i| q.get(i, j) * q.get(i, k)).sum();
                    for i in 0..d {
                        let v = q.get(i, j) - proj * q.get(i, k);
                        q.set(i, j, v);
                    }
                }
                let norm: f64 = (0..d).map(|i| q.get(i, j).powi(2)).sum::<f64>().sqrt();
                for i in 0..d {
                    let v = q.get(i, j) / norm;
                    q.set(i, j, v);
                }
            }
        }
        let shift = (0..d).map(|_| StandardNormal.sample(rng)).collect();
        Self::new(scale, q, shift)
    }

    pub fn dim(&self) -> usize {
        self.shift.len()
    }

    /// `self ∘ inner`.
    pub fn compose(&self, inner: &RigidTransform) -> Result<RigidTransform> {
        let rotation = matmul(&self.rotation, &inner.rotation)?;
        let rc = matmul(&self.rotation, &Matrix::column_vector(&inner.shift)?)?;
        let shift = rc
            .as_slice()
            .iter()
            .zip(&self.shift)
            .map(|(r, c)| self.scale * r + c)
            .collect();
        RigidTransform::new(self.scale * inner.scale, rotation, shift)
    }
}

pub fn apply_transform(h: &RigidTransform, x: &Matrix) -> Result<Matrix> {
    if x.cols() != h.dim() {
        return Err(Error::DimensionMismatch {
            op: "apply_transform",
            left_rows: x.rows(),
            left_cols: x.cols(),
            right_rows: h.dim(),
            right_cols: h.dim(),
        });
    }
    let mut out = matmul_transposed(x, &h.rotation)?;
    for i in 0..out.rows() {
        for (v, c) in out.row_mut(i).iter_mut().zip(&h.shift) {
            *v = h.scale * *v + c;
        }
    }
    Ok(out)
}

#[derive(Clone, Debug, PartialEq)]
pub struct TimingPoint {
    pub rows: usize,
    pub seconds: Vec<f64>,
    pub median: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct TimingReport {
    pub points: Vec<TimingPoint>,
    /// Slope of `ln(median time)` against `ln M`.
    pub slope: f64,
    /// `median(M_{i+1}) / median(M_i)` for consecutive sizes.
    pub ratios: Vec<f64>,
}

impl TimingReport {
    pub fn rows(&self, cfg: &FitConfig) -> Vec<ExperimentRow> {
        self.points
            .iter()
            .map(|p| ExperimentRow {
                method: METHOD_SWIM.into(),
                depth: cfg.layers.len(),
                width: cfg.layers.iter().copied().max().unwrap_or(0),
                seed: cfg.seed,
                metric: format!("median_seconds_m{}", p.rows),
                value: p.median,
                fit_seconds: p.median,
                failure: None,
            })
            .collect()
    }
}

pub fn median(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

/// Times `fit` at each training-set size on Barron data in `dim`
/// dimensions. Runs serially.
pub fn timing_scaling(
    cfg: &FitConfig,
    sizes: &[usize],
    repeats: usize,
    dim: usize,
) -> Result<TimingReport> {
    cfg.validate()?;
    if sizes.len() < 3 {
        return Err(Error::invalid("timing needs at least 3 training-set sizes"));
    }
    if repeats == 0 {
        return Err(Error::invalid("timing needs at least one repeat"));
    }
    let widest = cfg.layers.iter().copied().max().unwrap_or(1);
    if let Some(&m) = sizes.iter().find(|&&m| m < 10 * widest) {
        return Err(Error::invalid(format!(
            "training-set size {m} is below 10x the widest layer ({widest})"
        )));
    }
    let mut points = Vec::with_capacity(sizes.len());
    for &m in sizes {
        let data = BarronData::generate(dim, m, 1, cfg.seed);
        let mut seconds = Vec::with_capacity(repeats);
        for _ in 0..repeats {
            let start = Instant::now();
            let net: SampledNetwork = fit(&data.x_train, &data.y_train, cfg)?;
            seconds.push(start.elapsed().as_secs_f64());
            drop(net);
        }
        let total: f64 = seconds.iter().sum();
        if total < 0.01 {
            return Err(Error::invalid(format!(
                "fits at M = {m} took {total:.4} s in total, below timer resolution; use larger M"
            )));
        }
        points.push(TimingPoint {
            rows: m,
            median: median(&seconds),
            seconds,
        });
    }
    let ms: Vec<f64> = points.iter().map(|p| p.rows as f64).collect();
    let ts: Vec<f64> = points.iter().map(|p| p.median).collect();
    let ratios = ts.windows(2).map(|w| w[1] / w[0]).collect();
    Ok(TimingReport {
        slope: log_log_slope(&ms, &ts),
        points,
        ratios,
    })
}
