//! CSV datasets, model files and result tables.
//!
//! Model files are JSON documents. Every matrix carries explicit `rows` and
//! `cols` next to its row-major `data`, and floats are written in shortest
//! round-trip decimal form, so a saved network reloads bit for bit.

use std::collections::HashMap;
use std::fs;
use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::benchmark::ExperimentRow;
use crate::error::{Error, Result};
use crate::network::{Activation, LayerParams, NetworkMeta, OutputLayer, SampledNetwork};
use crate::numerics::Matrix;

pub const MODEL_FORMAT: &str = "swimnet-model";
pub const MODEL_FORMAT_VERSION: u32 = 1;
pub const RESULTS_HEADER: [&str; 7] = [
    "method",
    "depth",
    "width",
    "seed",
    "metric",
    "value",
    "fit_seconds",
];

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum ColumnRef {
    Name(String),
    Index(usize),
    /// The rightmost column.
    Last,
}

impl ColumnRef {
    /// Numbers are column indices, `last` the rightmost column, anything
    /// else a header name.
    pub fn parse(s: &str) -> Self {
        let s = s.trim();
        if s == "last" {
            return ColumnRef::Last;
        }
        match s.parse::<usize>() {
            Ok(i) => ColumnRef::Index(i),
            Err(_) => ColumnRef::Name(s.to_string()),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum LabelMode {
    Numeric,
    Categorical,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum MissingPolicy {
    Reject,
    /// Replace empty feature cells with the column median.
    Median,
}

#[derive(Clone, Debug, PartialEq)]
pub struct CsvSchema {
    pub has_header: bool,
    pub targets: Vec<ColumnRef>,
    pub label_mode: LabelMode,
    pub missing: MissingPolicy,
}

impl CsvSchema {
    pub fn new(targets: Vec<ColumnRef>, label_mode: LabelMode) -> Self {
        CsvSchema {
            has_header: true,
            targets,
            label_mode,
            missing: MissingPolicy::Reject,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    pub x: Matrix,
    pub y: Matrix,
    pub feature_names: Vec<String>,
    pub target_names: Vec<String>,
    /// Class names in one-hot column order, for categorical targets.
    pub labels: Option<Vec<String>>,
}

impl Dataset {
    /// Class index of every row, for categorical targets.
    pub fn class_indices(&self) -> Option<Vec<usize>> {
        self.labels.as_ref()?;
        Some(crate::network::argmax_rows(&self.y))
    }
}

struct RawTable {
    header: Vec<String>,
    rows: Vec<Vec<String>>,
    lines: Vec<u64>,
}

fn read_table(source: &str, input: impl Read, has_header: bool) -> Result<RawTable> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .from_reader(input);
    let mut records = Vec::new();
    let mut lines = Vec::new();
    for rec in reader.records() {
        let rec = rec.map_err(|e| {
            let line = e.position().map_or(0, |p| p.line());
            Error::Csv {
                path: source.to_string(),
                row: records.len() + 1,
                line,
                column: "-".into(),
                message: e.to_string(),
            }
        })?;
        if rec.len() == 1 && rec[0].trim().is_empty() {
            continue;
        }
        lines.push(rec.position().map_or(0, |p| p.line()));
        records.push(rec.iter().map(|s| s.to_string()).collect::<Vec<_>>());
    }

    let header = if has_header {
        if records.is_empty() {
            return Err(Error::Csv {
                path: source.to_string(),
                row: 0,
                line: 1,
                column: "-".into(),
                message: "file is empty".into(),
            });
        }
        lines.remove(0);
        records.remove(0)
    } else {
        let width = records.first().map_or(0, Vec::len);
        (0..width).map(|i| format!("c{i}")).collect()
    };

    for (r, rec) in records.iter().enumerate() {
        if rec.len() != header.len() {
            return Err(Error::Csv {
                path: source.to_string(),
                row: r + 1,
                line: lines[r],
                column: "-".into(),
                message: format!("expected {} fields, found {}", header.len(), rec.len()),
            });
        }
    }
    if records.is_empty() {
        return Err(Error::Csv {
            path: source.to_string(),
            row: 0,
            line: 0,
            column: "-".into(),
            message: "no data rows".into(),
        });
    }
    Ok(RawTable {
        header,
        rows: records,
        lines,
    })
}

fn resolve(table: &RawTable, source: &str, col: &ColumnRef) -> Result<usize> {
    let found = match col {
        ColumnRef::Index(i) => (*i < table.header.len()).then_some(*i),
        ColumnRef::Name(n) => table.header.iter().position(|h| h.trim() == n),
        ColumnRef::Last => table.header.len().checked_sub(1),
    };
    found.ok_or_else(|| Error::Csv {
        path: source.to_string(),
        row: 0,
        line: 1,
        column: match col {
            ColumnRef::Index(i) => i.to_string(),
            ColumnRef::Name(n) => n.clone(),
            ColumnRef::Last => "last".into(),
        },
        message: "unknown target column".into(),
    })
}

fn parse_numeric_columns(
    table: &RawTable,
    source: &str,
    cols: &[usize],
    missing: MissingPolicy,
) -> Result<Matrix> {
    let mut data = vec![0.0; table.rows.len() * cols.len()];
    let mut holes: Vec<(usize, usize)> = Vec::new();
    for (r, rec) in table.rows.iter().enumerate() {
        for (k, &c) in cols.iter().enumerate() {
            let cell = rec[c].trim();
            let err = |message: String| Error::Csv {
                path: source.to_string(),
                row: r + 1,
                line: table.lines[r],
                column: table.header[c].clone(),
                message,
            };
            if cell.is_empty() {
                if missing == MissingPolicy::Median {
                    holes.push((r, k));
                    continue;
                }
                return Err(err("missing value".into()));
            }
            let v: f64 = cell
                .parse()
                .map_err(|_| err(format!("not a number: {cell:?}")))?;
            if !v.is_finite() {
                return Err(err(format!("non-finite value {cell:?}")));
            }
            data[r * cols.len() + k] = v;
        }
    }
    if !holes.is_empty() {
        let mut by_col: HashMap<usize, Vec<usize>> = HashMap::new();
        for &(r, k) in &holes {
            by_col.entry(k).or_default().push(r);
        }
        for (k, missing_rows) in by_col {
            let mut present: Vec<f64> = (0..table.rows.len())
                .filter(|r| !missing_rows.contains(r))
                .map(|r| data[r * cols.len() + k])
                .collect();
            if present.is_empty() {
                return Err(Error::Csv {
                    path: source.to_string(),
                    row: 1,
                    line: table.lines[0],
                    column: table.header[cols[k]].clone(),
                    message: "column has no values to impute from".into(),
                });
            }
            let med = median(&mut present);
            for r in missing_rows {
                data[r * cols.len() + k] = med;
            }
        }
    }
    Ok(Matrix::from_raw(table.rows.len(), cols.len(), data))
}

fn median(v: &mut [f64]) -> f64 {
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

pub fn load_csv(path: impl AsRef<Path>, schema: &CsvSchema) -> Result<Dataset> {
    let path = path.as_ref();
    let file = fs::File::open(path).map_err(|e| Error::io(path, e))?;
    load_csv_from(&path.display().to_string(), file, schema)
}

/// Same as [`load_csv`] over any reader; `source` names it in errors.
pub fn load_csv_from(source: &str, input: impl Read, schema: &CsvSchema) -> Result<Dataset> {
    if schema.targets.is_empty() {
        return Err(Error::invalid("at least one target column is required"));
    }
    let table = read_table(source, input, schema.has_header)?;
    let mut target_cols = Vec::new();
    for t in &schema.targets {
        let c = resolve(&table, source, t)?;
        if !target_cols.contains(&c) {
            target_cols.push(c);
        }
    }
    let feature_cols: Vec<usize> = (0..table.header.len())
        .filter(|c| !target_cols.contains(c))
        .collect();
    if feature_cols.is_empty() {
        return Err(Error::invalid("no feature columns left after removing targets"));
    }
    let x = parse_numeric_columns(&table, source, &feature_cols, schema.missing)?;

    let (y, labels) = match schema.label_mode {
        LabelMode::Numeric => (
            parse_numeric_columns(&table, source, &target_cols, MissingPolicy::Reject)?,
            None,
        ),
        LabelMode::Categorical => {
            if target_cols.len() != 1 {
                return Err(Error::invalid("categorical mode takes exactly one target column"));
            }
            let c = target_cols[0];
            let mut labels: Vec<String> = Vec::new();
            let mut index: HashMap<String, usize> = HashMap::new();
            let mut classes = Vec::with_capacity(table.rows.len());
            for (r, rec) in table.rows.iter().enumerate() {
                let cell = rec[c].trim();
                if cell.is_empty() {
                    return Err(Error::Csv {
                        path: source.to_string(),
                        row: r + 1,
                        line: table.lines[r],
                        column: table.header[c].clone(),
                        message: "missing label".into(),
                    });
                }
                let k = *index.entry(cell.to_string()).or_insert_with(|| {
                    labels.push(cell.to_string());
                    labels.len() - 1
                });
                classes.push(k);
            }
            (one_hot(&classes, labels.len()), Some(labels))
        }
    };

    Ok(Dataset {
        x,
        y,
        feature_names: feature_cols.iter().map(|&c| table.header[c].clone()).collect(),
        target_names: target_cols.iter().map(|&c| table.header[c].clone()).collect(),
        labels,
    })
}

/// Feature matrix for prediction. When `names` is given and the file has a
/// header, those columns are picked by name; otherwise every column is used.
pub fn load_features(
    path: impl AsRef<Path>,
    has_header: bool,
    names: Option<&[String]>,
    missing: MissingPolicy,
) -> Result<Matrix> {
    let path = path.as_ref();
    let source = path.display().to_string();
    let file = fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let table = read_table(&source, file, has_header)?;
    let cols: Vec<usize> = match names {
        Some(names) if has_header => names
            .iter()
            .map(|n| resolve(&table, &source, &ColumnRef::Name(n.clone())))
            .collect::<Result<_>>()?,
        _ => (0..table.header.len()).collect(),
    };
    parse_numeric_columns(&table, &source, &cols, missing)
}

pub fn one_hot(classes: &[usize], k: usize) -> Matrix {
    let mut y = Matrix::zeros(classes.len(), k);
    for (i, &c) in classes.iter().enumerate() {
        y.set(i, c, 1.0);
    }
    y
}

#[derive(Serialize, Deserialize)]
struct LayerRecord {
    rows: usize,
    cols: usize,
    weights: Vec<f64>,
    biases: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct ModelFile {
    format: String,
    format_version: u32,
    input_dim: usize,
    activation: Activation,
    hidden: Vec<LayerRecord>,
    output: Option<LayerRecord>,
    meta: NetworkMeta,
}

pub fn model_to_string(net: &SampledNetwork) -> Result<String> {
    net.validate()?;
    let record = |w: &Matrix, b: &[f64]| LayerRecord {
        rows: w.rows(),
        cols: w.cols(),
        weights: w.as_slice().to_vec(),
        biases: b.to_vec(),
    };
    let file = ModelFile {
        format: MODEL_FORMAT.into(),
        format_version: MODEL_FORMAT_VERSION,
        input_dim: net.input_dim,
        activation: net.activation,
        hidden: net
            .hidden
            .iter()
            .map(|l| record(&l.weights, &l.biases))
            .collect(),
        output: net.output.as_ref().map(|o| record(&o.weights, &o.bias)),
        meta: net.meta.clone(),
    };
    let all_finite = file
        .hidden
        .iter()
        .chain(file.output.iter())
        .all(|l| l.weights.iter().chain(&l.biases).all(|v| v.is_finite()));
    if !all_finite {
        return Err(Error::invalid("network has non-finite parameters"));
    }
    serde_json::to_string_pretty(&file).map_err(|e| Error::invalid(e.to_string()))
}

pub fn save_model(net: &SampledNetwork, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let text = model_to_string(net)?;
    let mut f = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    f.write_all(text.as_bytes())
        .and_then(|_| f.write_all(b"\n"))
        .map_err(|e| Error::io(path, e))
}

pub fn load_model(path: impl AsRef<Path>) -> Result<SampledNetwork> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    model_from_str(&path.display().to_string(), &text)
}

pub fn model_from_str(source: &str, text: &str) -> Result<SampledNetwork> {
    let fail = |message: String| Error::ModelFormat {
        path: source.to_string(),
        message,
    };
    let file: ModelFile = serde_json::from_str(text).map_err(|e| {
        let offset = byte_offset(text, e.line(), e.column());
        let kind = if e.is_eof() { "truncated" } else { "malformed" };
        fail(format!("{kind} at byte offset {offset} (line {}, column {}): {e}", e.line(), e.column()))
    })?;
    if file.format != MODEL_FORMAT {
        return Err(fail(format!("not a model file (format {:?})", file.format)));
    }
    if file.format_version != MODEL_FORMAT_VERSION {
        return Err(fail(format!(
            "unsupported format version {} (expected {MODEL_FORMAT_VERSION})",
            file.format_version
        )));
    }

    let to_params = |name: &str, rec: LayerRecord| -> Result<(Matrix, Vec<f64>)> {
        if rec.weights.len() != rec.rows * rec.cols || rec.biases.len() != rec.rows {
            return Err(fail(format!(
                "{name} declares {}x{} but stores {} weights and {} biases",
                rec.rows,
                rec.cols,
                rec.weights.len(),
                rec.biases.len()
            )));
        }
        if rec.weights.iter().chain(&rec.biases).any(|v| !v.is_finite()) {
            return Err(fail(format!("{name} has non-finite values")));
        }
        Ok((Matrix::from_raw(rec.rows, rec.cols, rec.weights), rec.biases))
    };

    let mut hidden = Vec::with_capacity(file.hidden.len());
    let mut prev = file.input_dim;
    for (l, rec) in file.hidden.into_iter().enumerate() {
        let name = format!("hidden layer {}", l + 1);
        if rec.cols != prev {
            return Err(fail(format!(
                "{name} has {} inputs but {} produces {prev}",
                rec.cols,
                if l == 0 {
                    "the input".to_string()
                } else {
                    format!("hidden layer {l}")
                }
            )));
        }
        prev = rec.rows;
        let (weights, biases) = to_params(&name, rec)?;
        hidden.push(LayerParams { weights, biases });
    }
    let output = match file.output {
        None => None,
        Some(rec) => {
            if rec.cols != prev {
                return Err(fail(format!(
                    "output layer has {} inputs but the last hidden layer produces {prev}",
                    rec.cols
                )));
            }
            let (weights, bias) = to_params("output layer", rec)?;
            Some(OutputLayer { weights, bias })
        }
    };
    let mut net = SampledNetwork::new(file.input_dim, hidden, file.activation, output)
        .map_err(|e| fail(e.to_string()))?;
    net.meta = file.meta;
    Ok(net)
}

fn byte_offset(text: &str, line: usize, column: usize) -> usize {
    if line == 0 {
        return 0;
    }
    let start: usize = text
        .split_inclusive('\n')
        .take(line - 1)
        .map(str::len)
        .sum();
    (start + column.saturating_sub(1)).min(text.len())
}

pub fn write_results(path: impl AsRef<Path>, rows: &[ExperimentRow]) -> Result<()> {
    let path = path.as_ref();
    let file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    write_results_to(file, rows).map_err(|e| match e {
        Error::Io { source, .. } => Error::io(path, source),
        other => other,
    })
}

/// Results table; a failed row has an empty `value` and its error message in
/// `metric`.
pub fn write_results_to(out: impl Write, rows: &[ExperimentRow]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let csv_err = |e: csv::Error| Error::invalid(format!("writing results: {e}"));
    w.write_record(RESULTS_HEADER).map_err(csv_err)?;
    for r in rows {
        let (metric, value) = match &r.failure {
            None => (r.metric.clone(), format!("{:e}", r.value)),
            Some(msg) => (format!("failed: {msg}"), String::new()),
        };
        w.write_record([
            r.method.clone(),
            r.depth.to_string(),
            r.width.to_string(),
            r.seed.to_string(),
            metric,
            value,
            format!("{:e}", r.fit_seconds),
        ])
        .map_err(csv_err)?;
    }
    w.flush().map_err(|e| Error::io("<results>", e))
}

pub fn read_results(path: impl AsRef<Path>) -> Result<Vec<ExperimentRow>> {
    let path = path.as_ref();
    let file = fs::File::open(path).map_err(|e| Error::io(path, e))?;
    read_results_from(&path.display().to_string(), file)
}

pub fn read_results_from(source: &str, input: impl Read) -> Result<Vec<ExperimentRow>> {
    let mut rdr = csv::Reader::from_reader(input);
    let err = |row: usize, column: &str, message: String| Error::Csv {
        path: source.to_string(),
        row,
        line: row as u64 + 1,
        column: column.to_string(),
        message,
    };
    let header = rdr
        .headers()
        .map_err(|e| err(0, "-", e.to_string()))?
        .clone();
    if header.iter().ne(RESULTS_HEADER) {
        return Err(err(0, "-", format!("unexpected header {:?}", header)));
    }
    let mut rows = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(|e| err(i + 1, "-", e.to_string()))?;
        let num = |k: usize| -> Result<f64> {
            rec[k]
                .parse::<f64>()
                .map_err(|_| err(i + 1, RESULTS_HEADER[k], format!("not a number: {:?}", &rec[k])))
        };
        let int = |k: usize| -> Result<u64> {
            rec[k]
                .parse::<u64>()
                .map_err(|_| err(i + 1, RESULTS_HEADER[k], format!("not an integer: {:?}", &rec[k])))
        };
        let failed = rec[5].is_empty();
        rows.push(ExperimentRow {
            method: rec[0].to_string(),
            depth: int(1)? as usize,
            width: int(2)? as usize,
            seed: int(3)?,
            metric: rec[4].to_string(),
            value: if failed { f64::NAN } else { num(5)? },
            fit_seconds: num(6)?,
            failure: failed.then(|| rec[4].trim_start_matches("failed: ").to_string()),
        });
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn categorical(target: &str) -> CsvSchema {
        CsvSchema::new(vec![ColumnRef::parse(target)], LabelMode::Categorical)
    }

    #[test]
    fn parses_categorical_targets() {
        let ds = load_csv_from("t", "a,b,y\n1,2,0\n3,4,1\n".as_bytes(), &categorical("y")).unwrap();
        assert_eq!(ds.x.shape(), (2, 2));
        assert_eq!(ds.x.as_slice(), &[1.0, 2.0, 3.0, 4.0]);
        assert_eq!(ds.y.as_slice(), &[1.0, 0.0, 0.0, 1.0]);
        assert_eq!(ds.labels, Some(vec!["0".to_string(), "1".to_string()]));
        assert_eq!(ds.feature_names, vec!["a", "b"]);
    }

    #[test]
    fn labels_in_first_seen_order() {
        let ds = load_csv_from(
            "t",
            "y,a\ncat,1\ndog,2\ncat,3\nemu,4\n".as_bytes(),
            &categorical("y"),
        )
        .unwrap();
        assert_eq!(ds.labels.as_deref().unwrap(), ["cat", "dog", "emu"]);
        assert_eq!(ds.class_indices().unwrap(), vec![0, 1, 0, 2]);
    }

    #[test]
    fn missing_cell_is_located() {
        let err = load_csv_from("t", "a,b,y\n1,2,0\n3,,1\n".as_bytes(), &categorical("y")).unwrap_err();
        let msg = err.to_string();
        assert!(matches!(err, Error::Csv { row: 2, ref column, .. } if column == "b"), "{msg}");
        assert!(msg.contains("missing"), "{msg}");
    }

    #[test]
    fn median_imputation_when_asked() {
        let mut schema = categorical("y");
        schema.missing = MissingPolicy::Median;
        let ds = load_csv_from("t", "a,b,y\n1,2,0\n3,,1\n5,10,1\n".as_bytes(), &schema).unwrap();
        assert_eq!(ds.x.get(1, 1), 6.0);
    }

    #[test]
    fn numeric_mode_keeps_one_column() {
        let schema = CsvSchema::new(vec![ColumnRef::Index(2)], LabelMode::Numeric);
        let ds = load_csv_from("t", "a,b,y\n1,2,0.5\n3,4,1.5\n".as_bytes(), &schema).unwrap();
        assert_eq!(ds.y.shape(), (2, 1));
        assert_eq!(ds.y.as_slice(), &[0.5, 1.5]);
        assert!(ds.labels.is_none());
    }

    #[test]
    fn rejects_ragged_and_non_numeric() {
        let err = load_csv_from("t", "a,b,y\n1,2,0\n3,1\n".as_bytes(), &categorical("y")).unwrap_err();
        assert!(matches!(err, Error::Csv { row: 2, .. }), "{err}");
        let err = load_csv_from("t", "a,b,y\n1,x,0\n".as_bytes(), &categorical("y")).unwrap_err();
        assert!(matches!(err, Error::Csv { row: 1, ref column, .. } if column == "b"), "{err}");
        let err = load_csv_from("t", "a,b,y\n1,2,0\n".as_bytes(), &categorical("z")).unwrap_err();
        assert!(err.to_string().contains("unknown target column"), "{err}");
    }

    #[test]
    fn headerless_files_use_indices() {
        let mut schema = CsvSchema::new(vec![ColumnRef::Index(0)], LabelMode::Numeric);
        schema.has_header = false;
        let ds = load_csv_from("t", "1,2,3\n4,5,6\n".as_bytes(), &schema).unwrap();
        assert_eq!(ds.y.as_slice(), &[1.0, 4.0]);
        assert_eq!(ds.x.as_slice(), &[2.0, 3.0, 5.0, 6.0]);
    }

    #[test]
    fn empty_file_rejected() {
        assert!(load_csv_from("t", "".as_bytes(), &categorical("y")).is_err());
        assert!(load_csv_from("t", "a,y\n".as_bytes(), &categorical("y")).is_err());
    }

    #[test]
    fn byte_offsets() {
        let text = "ab\ncde\nf";
        assert_eq!(byte_offset(text, 1, 1), 0);
        assert_eq!(byte_offset(text, 2, 2), 4);
        assert_eq!(byte_offset(text, 3, 1), 7);
    }

    #[test]
    fn results_round_trip() {
        let rows = vec![
            ExperimentRow {
                method: "swim".into(),
                depth: 1,
                width: 64,
                seed: 3,
                metric: "rel_l2".into(),
                value: 0.123456789,
                fit_seconds: 0.5,
                failure: None,
            },
            ExperimentRow {
                method: "random_features".into(),
                depth: 2,
                width: 8,
                seed: 3,
                metric: "rel_l2".into(),
                value: f64::NAN,
                fit_seconds: 0.0,
                failure: Some("layer 2 is degenerate".into()),
            },
        ];
        let mut buf = Vec::new();
        write_results_to(&mut buf, &rows).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("method,depth,width,seed,metric,value,fit_seconds\n"));
        let back = read_results_from("t", buf.as_slice()).unwrap();
        assert_eq!(back[0], rows[0]);
        assert_eq!(back[1].failure.as_deref(), Some("layer 2 is degenerate"));
        assert!(back[1].value.is_nan());
    }
}
