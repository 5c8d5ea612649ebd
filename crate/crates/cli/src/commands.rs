use std::fs;
use std::io::{self, Write};
use std::path::Path;
use std::time::Instant;

use swimnet::benchmark::{
    run_barron, run_classification, timing_scaling, with_jobs, BarronSpec, ClassificationSpec,
};
use swimnet::dataio::{
    load_csv, load_features, load_model, save_model, write_results, ColumnRef, CsvSchema,
    LabelMode, MissingPolicy,
};
use swimnet::{Activation as Act, Error, FitConfig, Norm};

use crate::{
    BarronArgs, ClassifyArgs, Command, FitArgs, InputArgs, InspectArgs, NormArg, PredictArgs,
    Task, TimingArgs,
};

/// A failure reported as one line on standard error.
#[derive(Debug)]
pub struct CliError {
    kind: &'static str,
    message: String,
}

impl CliError {
    fn new(kind: &'static str, message: impl Into<String>) -> Self {
        CliError {
            kind,
            message: message.into(),
        }
    }

    pub fn one_line(&self) -> String {
        let msg = self.message.replace(['\n', '\r'], " ");
        format!("error[{}]: {msg}", self.kind)
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        let kind = match &e {
            Error::DimensionMismatch { .. } => "shape",
            Error::NonFinite { .. } => "non_finite",
            Error::InvalidArgument(_) => "invalid",
            Error::DegenerateLayer { .. } => "degenerate",
            Error::Untrained => "untrained",
            Error::Solver(_) => "solver",
            Error::Csv { .. } => "csv",
            Error::ModelFormat { .. } => "model",
            Error::Io { .. } => "io",
        };
        CliError::new(kind, e.to_string())
    }
}

type CliResult = Result<(), CliError>;

pub fn run(command: Command) -> CliResult {
    match command {
        Command::Fit(a) => fit(a),
        Command::Predict(a) => predict(a),
        Command::BenchBarron(a) => bench_barron(a),
        Command::BenchClassify(a) => bench_classify(a),
        Command::BenchTiming(a) => bench_timing(a),
        Command::Inspect(a) => inspect(a),
    }
}

fn missing_policy(input: &InputArgs) -> MissingPolicy {
    if input.impute_median {
        MissingPolicy::Median
    } else {
        MissingPolicy::Reject
    }
}

fn schema(input: &InputArgs, targets: &str, mode: LabelMode) -> CsvSchema {
    CsvSchema {
        has_header: !input.no_header,
        missing: missing_policy(input),
        ..CsvSchema::new(targets.split(',').map(ColumnRef::parse).collect(), mode)
    }
}

fn norm(n: NormArg) -> Norm {
    match n {
        NormArg::L2 => Norm::L2,
        NormArg::Linf => Norm::Linf,
    }
}

fn architecture(input: usize, hidden: &[usize], output: Option<usize>) -> String {
    let mut parts = vec![input];
    parts.extend_from_slice(hidden);
    parts.extend(output);
    parts
        .iter()
        .map(usize::to_string)
        .collect::<Vec<_>>()
        .join("-")
}

fn fit(a: FitArgs) -> CliResult {
    let mode = match a.task {
        Task::Regression => LabelMode::Numeric,
        Task::Classification => LabelMode::Categorical,
    };
    let ds = load_csv(&a.input.data, &schema(&a.input, &a.target_col, mode))?;
    let cfg = FitConfig {
        layers: a.layers.clone(),
        activation: Act::new(a.activation.into()),
        epsilon: a.epsilon,
        pool_multiplier: a.pool_mult,
        ridge_lambda: a.ridge,
        y_norm: norm(a.y_norm),
        x_norm: norm(a.x_norm),
        seed: a.seed.seed,
    };
    let start = Instant::now();
    let mut net = swimnet::fit(&ds.x, &ds.y, &cfg)?;
    let secs = start.elapsed().as_secs_f64();
    net.meta.labels = ds.labels.clone();
    if !a.input.no_header {
        net.meta.feature_names = Some(ds.feature_names.clone());
    }
    save_model(&net, &a.out)?;
    println!(
        "fit rows={} inputs={} architecture={} residual={:e} seconds={:.3} out={}",
        ds.x.rows(),
        ds.x.cols(),
        architecture(ds.x.cols(), &a.layers, net.output_dim()),
        net.meta.training_residual.unwrap_or(f64::NAN),
        secs,
        a.out.display()
    );
    Ok(())
}

fn open_output(path: &Path) -> Result<Box<dyn Write>, CliError> {
    if path == Path::new("-") {
        return Ok(Box::new(io::stdout().lock()));
    }
    let f = fs::File::create(path)
        .map_err(|e| CliError::new("io", format!("{}: {e}", path.display())))?;
    Ok(Box::new(io::BufWriter::new(f)))
}

fn predict(a: PredictArgs) -> CliResult {
    let net = load_model(&a.model)?;
    let has_header = !a.input.no_header;
    let names = net.meta.feature_names.as_deref();
    let x = load_features(&a.input.data, has_header, names, missing_policy(&a.input))?;
    if x.cols() != net.input_dim {
        return Err(CliError::new(
            "shape",
            format!(
                "{}: expected {} feature columns, found {}",
                a.input.data.display(),
                net.input_dim,
                x.cols()
            ),
        ));
    }
    let mut out = open_output(&a.out)?;
    let write_err = |e: io::Error| CliError::new("io", format!("{}: {e}", a.out.display()));
    if net.meta.labels.is_some() {
        writeln!(out, "label").map_err(write_err)?;
        for label in net.predict_labels(&x)? {
            writeln!(out, "{label}").map_err(write_err)?;
        }
    } else {
        let y = net.forward(&x)?;
        let header: Vec<String> = (0..y.cols()).map(|j| format!("y{j}")).collect();
        writeln!(out, "{}", header.join(",")).map_err(write_err)?;
        for row in y.row_iter() {
            let cells: Vec<String> = row.iter().map(f64::to_string).collect();
            writeln!(out, "{}", cells.join(",")).map_err(write_err)?;
        }
    }
    out.flush().map_err(write_err)
}

fn bench_barron(a: BarronArgs) -> CliResult {
    let spec = BarronSpec {
        dim: a.dim,
        train_points: a.points,
        test_points: a.test_points.unwrap_or(a.points),
        widths: a.widths,
        depths: a.depths,
        activation: a.activation.into(),
        seeds: a.seeds,
        ridge_lambda: a.ridge,
    };
    let rows = with_jobs(a.jobs, || run_barron(&spec))??;
    write_results(&a.out, &rows)?;
    let failed = rows.iter().filter(|r| r.failure.is_some()).count();
    println!(
        "bench-barron rows={} failed={failed} out={}",
        rows.len(),
        a.out.display()
    );
    Ok(())
}

fn bench_classify(a: ClassifyArgs) -> CliResult {
    let ds = load_csv(
        &a.input.data,
        &schema(&a.input, &a.target_col, LabelMode::Categorical),
    )?;
    let classes = ds
        .class_indices()
        .ok_or_else(|| CliError::new("invalid", "labels are not categorical"))?;
    let spec = ClassificationSpec {
        folds: a.folds,
        depths: a.depths,
        width: a.width,
        activation: a.activation.into(),
        ridge_lambda: a.ridge,
        seed: a.seed.seed,
        max_rows: (a.max_rows > 0).then_some(a.max_rows),
    };
    let report = with_jobs(a.jobs, || run_classification(&ds.x, &classes, &spec))??;
    write_results(&a.out, &report.rows)?;
    let means: Vec<String> = spec
        .depths
        .iter()
        .zip(&report.mean_accuracy)
        .map(|(d, m)| format!("{d}:{m:.4}"))
        .collect();
    println!(
        "bench-classify mean_accuracy={} best_depth={} out={}",
        means.join(","),
        report.best_depth,
        a.out.display()
    );
    Ok(())
}

fn bench_timing(a: TimingArgs) -> CliResult {
    let cfg = FitConfig::new(a.layers, a.activation.into()).with_seed(a.seed.seed);
    let report = timing_scaling(&cfg, &a.sizes, a.repeats, a.dim)?;
    write_results(&a.out, &report.rows(&cfg))?;
    let medians: Vec<String> = report
        .points
        .iter()
        .map(|p| format!("{}:{:.4}", p.rows, p.median))
        .collect();
    let ratios: Vec<String> = report.ratios.iter().map(|r| format!("{r:.3}")).collect();
    println!(
        "bench-timing medians={} ratios={} slope={:.3} out={}",
        medians.join(","),
        ratios.join(","),
        report.slope,
        a.out.display()
    );
    Ok(())
}

fn inspect(a: InspectArgs) -> CliResult {
    let net = load_model(&a.model)?;
    println!(
        "architecture {}",
        architecture(net.input_dim, &net.widths(), net.output_dim())
    );
    println!(
        "activation {} s1={} s2={}",
        net.activation.kind, net.activation.s1, net.activation.s2
    );
    if let Some(seed) = net.meta.seed {
        println!("seed {seed}");
    }
    if let Some(r) = net.meta.training_residual {
        println!("training_residual {r:e}");
    }
    if let Some(cfg) = &net.meta.config {
        let json = serde_json::to_string(cfg)
            .map_err(|e| CliError::new("model", e.to_string()))?;
        println!("config {json}");
    }
    if let Some(labels) = &net.meta.labels {
        println!("labels {}", labels.join(","));
    }
    if let Some(names) = &net.meta.feature_names {
        println!("features {}", names.join(","));
    }
    Ok(())
}
