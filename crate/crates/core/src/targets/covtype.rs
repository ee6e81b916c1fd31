use std::collections::BTreeMap;
use std::fs::File;
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::logistic::Dataset;
use crate::error::{Error, Result};

/// Column count of the covertype CSV: 54 features then the class label.
pub const COVTYPE_COLUMNS: usize = 55;

#[derive(Debug, Clone, PartialEq)]
pub struct CovtypeOptions {
    pub n_select: usize,
    pub n_features: usize,
    /// Fraction of the selected rows used for training, in (0, 1].
    pub train_fraction: f64,
    pub seed: u64,
    /// Skip one header line.
    pub header: bool,
}

impl Default for CovtypeOptions {
    fn default() -> Self {
        Self {
            n_select: 4000,
            n_features: 9,
            train_fraction: 0.75,
            seed: 0,
            header: false,
        }
    }
}

fn parse_error(path: &Path, line: u64, message: impl Into<String>) -> Error {
    Error::Parse {
        path: path.to_path_buf(),
        line,
        message: message.into(),
    }
}

fn parse_label(field: &str) -> Option<i64> {
    let field = field.trim();
    field.parse::<i64>().ok().or_else(|| {
        let v = field.parse::<f64>().ok()?;
        (v.fract() == 0.0 && v.is_finite()).then_some(v as i64)
    })
}

/// Rows of the two most frequent classes with their first `n_features`
/// columns; the smaller of the two labels maps to 0.
fn read_two_class(
    path: &Path,
    n_features: usize,
    header: bool,
) -> Result<(Vec<Vec<f64>>, Vec<u8>)> {
    let file = File::open(path).map_err(|source| Error::Io {
        path: PathBuf::from(path),
        source,
    })?;
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(header)
        .flexible(true)
        .from_reader(file);

    let mut features: Vec<Vec<f64>> = Vec::new();
    let mut classes: Vec<i64> = Vec::new();
    let mut width = None;
    for record in reader.records() {
        let record = record.map_err(|e| {
            let line = e.position().map_or(0, |p| p.line());
            parse_error(path, line, e.to_string())
        })?;
        let line = record.position().map_or(0, |p| p.line());
        let w = *width.get_or_insert(record.len());
        if record.len() != w {
            return Err(parse_error(
                path,
                line,
                format!("expected {w} columns, found {}", record.len()),
            ));
        }
        if w <= n_features {
            return Err(parse_error(
                path,
                line,
                format!(
                    "{w} columns leave no room for {} features and a label",
                    n_features
                ),
            ));
        }
        let mut row = Vec::with_capacity(n_features);
        for (col, field) in record.iter().take(n_features).enumerate() {
            let v: f64 = field.trim().parse().map_err(|_| {
                parse_error(
                    path,
                    line,
                    format!("column {}: cannot parse `{field}`", col + 1),
                )
            })?;
            row.push(v);
        }
        let label = parse_label(&record[w - 1]).ok_or_else(|| {
            parse_error(
                path,
                line,
                format!("column {w}: bad class label `{}`", &record[w - 1]),
            )
        })?;
        features.push(row);
        classes.push(label);
    }

    let mut counts: BTreeMap<i64, usize> = BTreeMap::new();
    for &c in &classes {
        *counts.entry(c).or_default() += 1;
    }
    let mut ranked: Vec<(i64, usize)> = counts.into_iter().collect();
    ranked.sort_by(|a, b| b.1.cmp(&a.1).then(a.0.cmp(&b.0)));
    if ranked.len() < 2 {
        return Err(Error::invalid("covtype", "need at least two classes"));
    }
    let (lo, hi) = {
        let (a, b) = (ranked[0].0, ranked[1].0);
        (a.min(b), a.max(b))
    };
    let mut rows = Vec::new();
    let mut labels = Vec::new();
    for (row, c) in features.into_iter().zip(classes) {
        if c == lo || c == hi {
            rows.push(row);
            labels.push(u8::from(c == hi));
        }
    }
    Ok((rows, labels))
}

/// Loads a covertype-style CSV, keeps the two most frequent classes (the
/// smaller label becomes 0), draws `n_select` rows uniformly without
/// replacement, keeps the first `n_features` columns and standardises with
/// training-split statistics.
pub fn load_covtype(path: impl AsRef<Path>, options: &CovtypeOptions) -> Result<Dataset> {
    let path = path.as_ref();
    if !(options.train_fraction > 0.0 && options.train_fraction <= 1.0) {
        return Err(Error::invalid("train_fraction", "must be in (0, 1]"));
    }
    if options.n_select == 0 || options.n_features == 0 {
        return Err(Error::invalid(
            "n_select",
            "n_select and n_features must be positive",
        ));
    }
    let (features, classes) = read_two_class(path, options.n_features, options.header)?;
    if features.len() < options.n_select {
        return Err(Error::TooFewSamples {
            needed: options.n_select,
            got: features.len(),
        });
    }
    let mut order: Vec<usize> = (0..features.len()).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(options.seed);
    let (chosen, _) = order.partial_shuffle(&mut rng, options.n_select);
    let rows: Vec<Vec<f64>> = chosen.iter().map(|&i| features[i].clone()).collect();
    let labels: Vec<u8> = chosen.iter().map(|&i| classes[i]).collect();
    let n_train = ((options.train_fraction * options.n_select as f64).round() as usize)
        .clamp(1, options.n_select);
    Dataset::from_rows(&rows, &labels, n_train)
}

/// Number of rows surviving the two-majority-class filter.
pub fn filtered_row_count(path: impl AsRef<Path>, header: bool) -> Result<usize> {
    Ok(read_two_class(path.as_ref(), 1, header)?.0.len())
}
