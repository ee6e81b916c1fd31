use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use nalgebra::{DMatrix, DVector};

use super::TraceRecord;
use crate::distributions::{Gaussian, Mixture, MixtureModel, StudentT};
use crate::error::{Error, Result};

fn io_error(path: &Path, source: std::io::Error) -> Error {
    Error::Io {
        path: path.to_path_buf(),
        source,
    }
}

fn parse_error(path: &Path, line: usize, message: impl Into<String>) -> Error {
    Error::Parse {
        path: path.to_path_buf(),
        line: line as u64,
        message: message.into(),
    }
}

fn push_float(out: &mut String, v: f64) {
    write!(out, ",{v:.16e}").expect("writing to a String");
}

/// Trace rows in chain order then iteration order.
pub fn write_trace_csv(path: impl AsRef<Path>, traces: &[Vec<TraceRecord>]) -> Result<()> {
    let path = path.as_ref();
    let d = traces.iter().flatten().next().map_or(0, |r| r.point.len());
    let mut out = String::from("chain,iteration,region,rejections");
    for i in 0..d {
        write!(out, ",x{i}").unwrap();
    }
    out.push('\n');
    for r in traces.iter().flatten() {
        write!(
            out,
            "{},{},{},{}",
            r.chain, r.iteration, r.region, r.rejections
        )
        .unwrap();
        for &v in r.point.iter() {
            push_float(&mut out, v);
        }
        out.push('\n');
    }
    fs::write(path, out).map_err(|e| io_error(path, e))
}

fn field<T: std::str::FromStr>(path: &Path, line: usize, name: &str, s: &str) -> Result<T> {
    s.trim()
        .parse()
        .map_err(|_| parse_error(path, line, format!("bad {name} `{s}`")))
}

fn read_lines(path: &Path) -> Result<(Vec<String>, Vec<(usize, String)>)> {
    let text = fs::read_to_string(path).map_err(|e| io_error(path, e))?;
    let mut lines = text.lines().enumerate();
    let header = lines
        .next()
        .ok_or_else(|| parse_error(path, 1, "missing header"))?
        .1
        .split(',')
        .map(str::to_string)
        .collect();
    let body = lines
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| (i + 1, l.to_string()))
        .collect();
    Ok((header, body))
}

/// Reads a trace file back into per-chain sequences.
pub fn read_trace_csv(path: impl AsRef<Path>) -> Result<Vec<Vec<TraceRecord>>> {
    let path = path.as_ref();
    let (header, body) = read_lines(path)?;
    let expected = ["chain", "iteration", "region", "rejections"];
    if header.len() < 4 || header[..4] != expected {
        return Err(parse_error(
            path,
            1,
            "header must start with chain,iteration,region,rejections",
        ));
    }
    let d = header.len() - 4;
    let mut traces: Vec<Vec<TraceRecord>> = Vec::new();
    for (line, text) in body {
        let cols: Vec<&str> = text.split(',').collect();
        if cols.len() != d + 4 {
            return Err(parse_error(
                path,
                line,
                format!("expected {} fields, found {}", d + 4, cols.len()),
            ));
        }
        let chain: usize = field(path, line, "chain", cols[0])?;
        let iteration: usize = field(path, line, "iteration", cols[1])?;
        let region = field(path, line, "region", cols[2])?;
        let rejections = field(path, line, "rejections", cols[3])?;
        let point = cols[4..]
            .iter()
            .map(|s| field::<f64>(path, line, "coordinate", s))
            .collect::<Result<Vec<_>>>()?;
        if chain > traces.len() {
            return Err(parse_error(
                path,
                line,
                format!("chain {chain} appears before chain {}", traces.len()),
            ));
        }
        if chain == traces.len() {
            traces.push(Vec::new());
        }
        if let Some(prev) = traces[chain].last() {
            if iteration <= prev.iteration {
                return Err(parse_error(
                    path,
                    line,
                    "iterations must increase within a chain",
                ));
            }
        }
        traces[chain].push(TraceRecord {
            chain,
            iteration,
            point: DVector::from_vec(point),
            rejections,
            region,
        });
    }
    Ok(traces)
}

/// One row per (adaption, component). `dof` is empty for Gaussian
/// components.
pub fn write_mixtures_csv(path: impl AsRef<Path>, history: &[(usize, Mixture)]) -> Result<()> {
    let path = path.as_ref();
    let d = history.first().map_or(0, |(_, m)| m.dim());
    let mut out = String::from("iteration,component,weight");
    for i in 0..d {
        write!(out, ",mean{i}").unwrap();
    }
    for r in 0..d {
        for c in 0..d {
            write!(out, ",cov{r}_{c}").unwrap();
        }
    }
    out.push_str(",dof\n");
    for (iteration, m) in history {
        for j in 0..m.len() {
            write!(out, "{iteration},{j}").unwrap();
            push_float(&mut out, m.weights()[j]);
            for &v in m.mean(j).iter() {
                push_float(&mut out, v);
            }
            let s = m.shape_matrix(j);
            for r in 0..d {
                for c in 0..d {
                    push_float(&mut out, s[(r, c)]);
                }
            }
            match m.dof(j) {
                Some(nu) => push_float(&mut out, nu),
                None => out.push(','),
            }
            out.push('\n');
        }
    }
    fs::write(path, out).map_err(|e| io_error(path, e))
}

struct Row {
    weight: f64,
    mean: DVector<f64>,
    cov: DMatrix<f64>,
    dof: Option<f64>,
}

fn assemble(
    path: &Path,
    line: usize,
    iteration: usize,
    rows: Vec<Row>,
    weighted: bool,
) -> Result<(usize, Mixture)> {
    let weights: Vec<f64> = rows.iter().map(|r| r.weight).collect();
    let wrap = |e: Error| parse_error(path, line, format!("mixture at iteration {iteration}: {e}"));
    let kinds = rows.iter().filter(|r| r.dof.is_some()).count();
    let mixture = if kinds == 0 {
        let comps = rows
            .into_iter()
            .map(|r| Gaussian::new(r.mean, r.cov))
            .collect::<Result<Vec<_>>>()
            .map_err(wrap)?;
        Mixture::Gaussian(
            MixtureModel::new(weights, comps)
                .map_err(wrap)?
                .with_weighted_regions(weighted),
        )
    } else if kinds == rows.len() {
        let comps = rows
            .into_iter()
            .map(|r| StudentT::new(r.mean, r.cov, r.dof.expect("checked")))
            .collect::<Result<Vec<_>>>()
            .map_err(wrap)?;
        Mixture::StudentT(
            MixtureModel::new(weights, comps)
                .map_err(wrap)?
                .with_weighted_regions(weighted),
        )
    } else {
        return Err(parse_error(path, line, "mixed Gaussian and t components"));
    };
    Ok((iteration, mixture))
}

/// Reads a mixture history written by [`write_mixtures_csv`].
/// Region weighting is not stored; `weighted_regions` is applied to every
/// mixture read.
pub fn read_mixtures_csv(
    path: impl AsRef<Path>,
    weighted_regions: bool,
) -> Result<Vec<(usize, Mixture)>> {
    let path = path.as_ref();
    let (header, body) = read_lines(path)?;
    if header.len() < 4
        || header[..3] != ["iteration", "component", "weight"]
        || header.last().map(String::as_str) != Some("dof")
    {
        return Err(parse_error(
            path,
            1,
            "header must be iteration,component,weight,...,dof",
        ));
    }
    // 3 + D + D² + 1 columns
    let extra = header.len() - 4;
    let d = (1..=extra)
        .find(|d| d + d * d == extra)
        .ok_or_else(|| parse_error(path, 1, "cannot infer dimension"))?;
    let mut out = Vec::new();
    let mut current: Option<(usize, Vec<Row>)> = None;
    let mut last_line = 1;
    for (line, text) in body {
        last_line = line;
        let cols: Vec<&str> = text.split(',').collect();
        if cols.len() != header.len() {
            return Err(parse_error(
                path,
                line,
                format!("expected {} fields, found {}", header.len(), cols.len()),
            ));
        }
        let iteration: usize = field(path, line, "iteration", cols[0])?;
        let component: usize = field(path, line, "component", cols[1])?;
        let floats = |range: std::ops::Range<usize>| -> Result<Vec<f64>> {
            cols[range]
                .iter()
                .map(|s| field::<f64>(path, line, "value", s))
                .collect()
        };
        let weight = field(path, line, "weight", cols[2])?;
        let mean = DVector::from_vec(floats(3..3 + d)?);
        let cov = DMatrix::from_row_slice(d, d, &floats(3 + d..3 + d + d * d)?);
        let dof_field = cols[cols.len() - 1].trim();
        let dof = if dof_field.is_empty() {
            None
        } else {
            Some(field(path, line, "dof", dof_field)?)
        };
        let row = Row {
            weight,
            mean,
            cov,
            dof,
        };
        match &mut current {
            Some((it, rows)) if *it == iteration => {
                if component != rows.len() {
                    return Err(parse_error(path, line, "components out of order"));
                }
                rows.push(row);
            }
            _ => {
                if let Some((it, rows)) = current.take() {
                    out.push(assemble(path, line, it, rows, weighted_regions)?);
                }
                if component != 0 {
                    return Err(parse_error(
                        path,
                        line,
                        "first component of an adaption must be 0",
                    ));
                }
                current = Some((iteration, vec![row]));
            }
        }
    }
    if let Some((it, rows)) = current {
        out.push(assemble(path, last_line, it, rows, weighted_regions)?);
    }
    Ok(out)
}

/// `dir/trace.csv` maps to `dir/trace.mixtures.csv`.
pub fn sidecar_mixtures_path(trace_path: impl AsRef<Path>) -> PathBuf {
    let p = trace_path.as_ref();
    let stem = p
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    p.with_file_name(format!("{stem}.mixtures.csv"))
}

/// Writes the trace and its mixture history to the sibling
/// `*.mixtures.csv` file.
pub fn write_trace_with_mixtures(
    path: impl AsRef<Path>,
    traces: &[Vec<TraceRecord>],
    history: &[(usize, Mixture)],
) -> Result<()> {
    write_trace_csv(&path, traces)?;
    write_mixtures_csv(sidecar_mixtures_path(&path), history)
}
