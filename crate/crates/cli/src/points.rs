//! `--points` / `--data` source strings.
//!
//! `[CLASS=]SOURCE` where SOURCE is one of `zeros:N`, `csv:PATH`,
//! `box:N:LO:HI`, `mnist-train:DIR[:N]`, `mnist-test:DIR[:N]` or
//! `modular:P`, and CLASS is `train`, `test` or `random`.

use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use ndarray::{Array1, Array2};
use splinelc::lcprobe::{box_sample, PointClass};
use splinelc::learn::{load_mnist_idx, make_modular_addition, Dataset, Split};

use crate::input_error;

#[derive(Debug, Clone, PartialEq)]
pub enum Source {
    Zeros(usize),
    Csv(PathBuf),
    Box { n: usize, lo: f64, hi: f64 },
    Mnist { dir: PathBuf, split: Split, limit: Option<usize> },
    Modular(usize),
}

#[derive(Debug, Clone, PartialEq)]
pub struct PointSpec {
    pub class: PointClass,
    pub source: Source,
}

fn parse_class(s: &str) -> Result<PointClass> {
    match s {
        "train" => Ok(PointClass::Train),
        "test" => Ok(PointClass::Test),
        "random" => Ok(PointClass::Random),
        _ => Err(input_error(format!("unknown point class `{s}` (train, test or random)"))),
    }
}

fn num<T: std::str::FromStr>(what: &str, s: &str) -> Result<T> {
    s.parse()
        .map_err(|_| input_error(format!("bad {what} `{s}` in point source")))
}

pub fn parse_source(s: &str) -> Result<Source> {
    let (kind, rest) = s.split_once(':').unwrap_or((s, ""));
    let parts: Vec<&str> = rest.split(':').collect();
    let mnist = |split| -> Result<Source> {
        if rest.is_empty() {
            return Err(input_error(format!("`{kind}` needs a directory")));
        }
        // A trailing numeric field is a size limit; directories may contain ':'.
        let (dir, limit) = match rest.rsplit_once(':') {
            Some((d, n)) if n.parse::<usize>().is_ok() => (d, Some(num("count", n)?)),
            _ => (rest, None),
        };
        Ok(Source::Mnist {
            dir: dir.into(),
            split,
            limit,
        })
    };
    match kind {
        "zeros" => Ok(Source::Zeros(num("count", rest)?)),
        "csv" if !rest.is_empty() => Ok(Source::Csv(rest.into())),
        "box" if parts.len() == 3 => Ok(Source::Box {
            n: num("count", parts[0])?,
            lo: num("lower bound", parts[1])?,
            hi: num("upper bound", parts[2])?,
        }),
        "mnist-train" => mnist(Split::Train),
        "mnist-test" => mnist(Split::Test),
        "modular" => Ok(Source::Modular(num("modulus", rest)?)),
        _ => Err(input_error(format!(
            "bad point source `{s}`; expected zeros:N, csv:PATH, box:N:LO:HI, mnist-train:DIR[:N], mnist-test:DIR[:N] or modular:P"
        ))),
    }
}

pub fn parse_spec(s: &str) -> Result<PointSpec> {
    let (class, src) = match s.split_once('=') {
        Some((c, rest)) => (Some(parse_class(c)?), rest),
        None => (None, s),
    };
    let source = parse_source(src)?;
    let class = class.unwrap_or(match &source {
        Source::Mnist { split: Split::Test, .. } => PointClass::Test,
        Source::Box { .. } => PointClass::Random,
        _ => PointClass::Train,
    });
    Ok(PointSpec { class, source })
}

/// Image and label paths of an MNIST split, preferring uncompressed files.
pub fn mnist_paths(dir: &Path, split: Split) -> (PathBuf, PathBuf) {
    let stem = match split {
        Split::Train => "train",
        Split::Test => "t10k",
    };
    let pick = |name: String| {
        let raw = dir.join(&name);
        if raw.exists() {
            raw
        } else {
            dir.join(format!("{name}.gz"))
        }
    };
    (
        pick(format!("{stem}-images-idx3-ubyte")),
        pick(format!("{stem}-labels-idx1-ubyte")),
    )
}

pub fn load_mnist(dir: &Path, split: Split, limit: Option<usize>, classes: Option<&[usize]>) -> Result<Dataset> {
    let (img, lbl) = mnist_paths(dir, split);
    let mut ds = load_mnist_idx(&img, &lbl, limit, classes)?;
    ds.split = split;
    Ok(ds)
}

fn read_csv(path: &Path) -> Result<Array2<f64>> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| input_error(format!("{}: {e}", path.display())))?;
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec.with_context(|| format!("{}: row {}", path.display(), i + 1))?;
        let parsed: Result<Vec<f64>, _> = rec.iter().map(str::parse::<f64>).collect();
        match parsed {
            Ok(r) => rows.push(r),
            // Tolerate one header line.
            Err(_) if i == 0 => continue,
            Err(_) => return Err(input_error(format!("{}: row {} is not numeric", path.display(), i + 1))),
        }
    }
    let d = rows.first().map_or(0, Vec::len);
    if rows.iter().any(|r| r.len() != d) || d == 0 {
        return Err(input_error(format!("{}: rows must be non-empty and equally long", path.display())));
    }
    let flat: Vec<f64> = rows.into_iter().flatten().collect();
    Ok(Array2::from_shape_vec((flat.len() / d, d), flat)?)
}

/// Labelled data for a source; fails for unlabelled sources.
pub fn load_dataset(source: &Source) -> Result<Dataset> {
    match source {
        Source::Mnist { dir, split, limit } => load_mnist(dir, *split, *limit, None),
        Source::Modular(p) => Ok(make_modular_addition(*p)?),
        other => Err(input_error(format!("{other:?} has no labels; use mnist-train, mnist-test or modular"))),
    }
}

/// Probe centres of a source, `input_dim` wide.
pub fn load_points(source: &Source, input_dim: usize, seed: u64) -> Result<Array2<f64>> {
    let pts = match source {
        Source::Zeros(n) => Array2::zeros((*n, input_dim)),
        Source::Csv(path) => read_csv(path)?,
        Source::Box { n, lo, hi } => {
            if lo >= hi || lo.is_nan() || hi.is_nan() {
                return Err(input_error(format!("box bounds {lo} >= {hi}")));
            }
            let lo_v = Array1::from_elem(input_dim, *lo);
            let hi_v = Array1::from_elem(input_dim, *hi);
            box_sample(lo_v.view(), hi_v.view(), *n, seed)
        }
        labelled => load_dataset(labelled)?.inputs,
    };
    if pts.ncols() != input_dim {
        return Err(input_error(format!(
            "points have {} columns but the network takes {input_dim} inputs",
            pts.ncols()
        )));
    }
    Ok(pts)
}
