use std::f64::consts::PI;
use std::fs::File;
use std::io::{BufReader, Read};
use std::path::Path;

use flate2::read::GzDecoder;
use ndarray::{Array1, Array2, Axis};
use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const IDX_IMAGES_MAGIC: u32 = 0x0000_0803;
pub const IDX_LABELS_MAGIC: u32 = 0x0000_0801;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Test,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Targets {
    Classes { labels: Vec<usize>, num_classes: usize },
    Regression(Array2<f64>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    pub inputs: Array2<f64>,
    pub targets: Targets,
    pub split: Split,
}

impl Dataset {
    pub fn classification(inputs: Array2<f64>, labels: Vec<usize>, num_classes: usize, split: Split) -> Result<Self> {
        let ds = Dataset {
            inputs,
            targets: Targets::Classes { labels, num_classes },
            split,
        };
        ds.validate()?;
        Ok(ds)
    }

    pub fn regression(inputs: Array2<f64>, targets: Array2<f64>, split: Split) -> Result<Self> {
        let ds = Dataset {
            inputs,
            targets: Targets::Regression(targets),
            split,
        };
        ds.validate()?;
        Ok(ds)
    }

    /// Empty datasets are allowed here so that header-only files load; the
    /// training loop rejects them.
    pub fn validate(&self) -> Result<()> {
        let n = self.inputs.nrows();
        if self.inputs.iter().any(|x| !x.is_finite()) {
            return Err(Error::invalid("dataset.inputs", "non-finite value"));
        }
        match &self.targets {
            Targets::Classes { labels, num_classes } => {
                crate::error::check_dim("dataset labels", n, labels.len())?;
                if let Some(&bad) = labels.iter().find(|&&l| l >= *num_classes) {
                    return Err(Error::invalid(
                        "dataset.labels",
                        format!("label {bad} outside 0..{num_classes}"),
                    ));
                }
            }
            Targets::Regression(t) => {
                crate::error::check_dim("dataset targets", n, t.nrows())?;
                if t.iter().any(|x| !x.is_finite()) {
                    return Err(Error::invalid("dataset.targets", "non-finite value"));
                }
            }
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.inputs.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn dim(&self) -> usize {
        self.inputs.ncols()
    }

    pub fn labels(&self) -> Option<&[usize]> {
        match &self.targets {
            Targets::Classes { labels, .. } => Some(labels),
            Targets::Regression(_) => None,
        }
    }

    pub fn num_classes(&self) -> Option<usize> {
        match &self.targets {
            Targets::Classes { num_classes, .. } => Some(*num_classes),
            Targets::Regression(_) => None,
        }
    }

    /// Width of the network output this dataset trains.
    pub fn target_dim(&self) -> usize {
        match &self.targets {
            Targets::Classes { num_classes, .. } => *num_classes,
            Targets::Regression(t) => t.ncols(),
        }
    }

    /// Rows at `idx`, in that order.
    pub fn select(&self, idx: &[usize]) -> Dataset {
        let inputs = self.inputs.select(Axis(0), idx);
        let targets = match &self.targets {
            Targets::Classes { labels, num_classes } => Targets::Classes {
                labels: idx.iter().map(|&i| labels[i]).collect(),
                num_classes: *num_classes,
            },
            Targets::Regression(t) => Targets::Regression(t.select(Axis(0), idx)),
        };
        Dataset {
            inputs,
            targets,
            split: self.split,
        }
    }

    pub fn take(&self, n: usize) -> Dataset {
        let idx: Vec<usize> = (0..n.min(self.len())).collect();
        self.select(&idx)
    }

    /// Per-dimension minimum and maximum of the inputs.
    pub fn bounding_box(&self) -> (Array1<f64>, Array1<f64>) {
        let lo = self.inputs.fold_axis(Axis(0), f64::INFINITY, |a, &b| a.min(b));
        let hi = self.inputs.fold_axis(Axis(0), f64::NEG_INFINITY, |a, &b| a.max(b));
        (lo, hi)
    }
}

fn open_maybe_gz(path: &Path) -> Result<Vec<u8>> {
    let file = File::open(path).map_err(|e| Error::file(path, e))?;
    let mut buf = Vec::new();
    let gz = path.extension().is_some_and(|e| e == "gz");
    if gz {
        GzDecoder::new(BufReader::new(file))
            .read_to_end(&mut buf)
            .map_err(|e| Error::file(path, e))?;
    } else {
        BufReader::new(file).read_to_end(&mut buf).map_err(|e| Error::file(path, e))?;
    }
    Ok(buf)
}

fn be_u32(bytes: &[u8], at: usize, what: &'static str, field: &str) -> Result<u32> {
    bytes
        .get(at..at + 4)
        .map(|b| u32::from_be_bytes([b[0], b[1], b[2], b[3]]))
        .ok_or_else(|| Error::Parse {
            what,
            field: field.into(),
            reason: "truncated header".into(),
        })
}

/// Parses IDX image and label buffers. Pixels are scaled by 1/255.
pub fn parse_idx(
    images: &[u8],
    labels: &[u8],
    limit: Option<usize>,
    class_filter: Option<&[usize]>,
) -> Result<Dataset> {
    let parse_err = |what: &'static str, field: &str, reason: String| Error::Parse {
        what,
        field: field.into(),
        reason,
    };
    let magic = be_u32(images, 0, "idx images", "magic")?;
    if magic != IDX_IMAGES_MAGIC {
        return Err(parse_err("idx images", "magic", format!("expected 0x{IDX_IMAGES_MAGIC:08x}, found 0x{magic:08x}")));
    }
    let count = be_u32(images, 4, "idx images", "count")? as usize;
    let rows = be_u32(images, 8, "idx images", "rows")? as usize;
    let cols = be_u32(images, 12, "idx images", "cols")? as usize;
    let lmagic = be_u32(labels, 0, "idx labels", "magic")?;
    if lmagic != IDX_LABELS_MAGIC {
        return Err(parse_err("idx labels", "magic", format!("expected 0x{IDX_LABELS_MAGIC:08x}, found 0x{lmagic:08x}")));
    }
    let lcount = be_u32(labels, 4, "idx labels", "count")? as usize;
    if lcount != count {
        return Err(parse_err(
            "idx labels",
            "count",
            format!("{lcount} labels for {count} images"),
        ));
    }
    let dim = rows * cols;
    let need = count
        .checked_mul(dim)
        .and_then(|x| x.checked_add(16))
        .ok_or_else(|| parse_err("idx images", "count", "size overflow".into()))?;
    if images.len() < need {
        return Err(parse_err("idx images", "pixels", format!("truncated: {} of {need} bytes", images.len())));
    }
    if labels.len() < 8 + count {
        return Err(parse_err("idx labels", "labels", format!("truncated: {} of {} bytes", labels.len(), 8 + count)));
    }
    let raw_labels = &labels[8..8 + count];
    let max_label = raw_labels.iter().copied().max().map_or(0, usize::from);
    let num_classes = (max_label + 1).max(10);
    let mut picked = Vec::new();
    for (i, &l) in raw_labels.iter().enumerate() {
        if limit.is_some_and(|n| picked.len() >= n) {
            break;
        }
        if class_filter.is_none_or(|f| f.contains(&usize::from(l))) {
            picked.push(i);
        }
    }
    let mut inputs = Array2::zeros((picked.len(), dim));
    for (r, &i) in picked.iter().enumerate() {
        let px = &images[16 + i * dim..16 + (i + 1) * dim];
        for (dst, &b) in inputs.row_mut(r).iter_mut().zip(px) {
            *dst = f64::from(b) / 255.0;
        }
    }
    let labels = picked.iter().map(|&i| usize::from(raw_labels[i])).collect();
    Dataset::classification(inputs, labels, num_classes, Split::Train)
}

/// Loads IDX files (optionally gzip-compressed, by `.gz` extension) in
/// stored order.
pub fn load_mnist_idx(
    images_path: impl AsRef<Path>,
    labels_path: impl AsRef<Path>,
    limit: Option<usize>,
    class_filter: Option<&[usize]>,
) -> Result<Dataset> {
    let images = open_maybe_gz(images_path.as_ref())?;
    let labels = open_maybe_gz(labels_path.as_ref())?;
    parse_idx(&images, &labels, limit, class_filter)
}

/// `f(x) = (sin x1 + cos x2) · 1[x1 < 0]` with `x` uniform on `[-2π, 2π]²`.
pub fn piecewise_target(x1: f64, x2: f64) -> f64 {
    if x1 < 0.0 {
        x1.sin() + x2.cos()
    } else {
        0.0
    }
}

pub fn make_piecewise_regression(n: usize, seed: u64) -> Result<Dataset> {
    if n == 0 {
        return Err(Error::invalid("n", "must be at least 1"));
    }
    let mut rng = crate::seed::rng(seed);
    let mut inputs = Array2::zeros((n, 2));
    let mut targets = Array2::zeros((n, 1));
    for i in 0..n {
        let x1 = rng.random_range(-2.0 * PI..2.0 * PI);
        let x2 = rng.random_range(-2.0 * PI..2.0 * PI);
        inputs[[i, 0]] = x1;
        inputs[[i, 1]] = x2;
        targets[[i, 0]] = piecewise_target(x1, x2);
    }
    Dataset::regression(inputs, targets, Split::Train)
}

/// Replaces a seeded `fraction` of labels with uniform draws over
/// `0..num_classes` (a draw may equal the original label).
pub fn randomize_labels(ds: &Dataset, fraction: f64, num_classes: usize, seed: u64) -> Result<Dataset> {
    if !(0.0..=1.0).contains(&fraction) {
        return Err(Error::invalid("fraction", format!("{fraction} outside [0, 1]")));
    }
    let Targets::Classes { labels, num_classes: k } = &ds.targets else {
        return Err(Error::invalid("dataset", "label randomization needs a classification dataset"));
    };
    if num_classes == 0 {
        return Err(Error::invalid("num_classes", "must be at least 1"));
    }
    let n = labels.len();
    let m = (fraction * n as f64).round() as usize;
    let mut rng = crate::seed::rng(seed);
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut rng);
    let mut out = labels.clone();
    for &i in &order[..m] {
        out[i] = rng.random_range(0..num_classes);
    }
    Ok(Dataset {
        inputs: ds.inputs.clone(),
        targets: Targets::Classes {
            labels: out,
            num_classes: num_classes.max(*k),
        },
        split: ds.split,
    })
}

/// All `p²` pairs `(a, b)` in row-major order, encoded as two concatenated
/// one-hots, labelled `(a + b) mod p`.
pub fn make_modular_addition(p: usize) -> Result<Dataset> {
    if p < 2 {
        return Err(Error::invalid("p", "must be at least 2"));
    }
    let mut inputs = Array2::zeros((p * p, 2 * p));
    let mut labels = Vec::with_capacity(p * p);
    for a in 0..p {
        for b in 0..p {
            let i = a * p + b;
            inputs[[i, a]] = 1.0;
            inputs[[i, p + b]] = 1.0;
            labels.push((a + b) % p);
        }
    }
    Dataset::classification(inputs, labels, p, Split::Train)
}
