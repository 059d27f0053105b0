//! CSV and JSON serialisation of probe results.

use std::io::Write;

use serde::{Deserialize, Serialize};

use super::complexity::{LcAggregate, SweepPoint};
use crate::error::Result;

/// One CSV row: `(key, class, mean, ci_lo, ci_hi)` where `key` is a step, a
/// sweep position `t`, a layer index or `total`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LcCsvRow {
    pub key: String,
    pub class: String,
    pub mean: f64,
    pub ci_lo: f64,
    pub ci_hi: f64,
}

fn write_rows(w: impl Write, key_name: &str, header_comment: Option<&str>, rows: &[LcCsvRow]) -> Result<()> {
    let mut w = w;
    if let Some(c) = header_comment {
        writeln!(w, "# {c}")?;
    }
    let mut csv = csv::Writer::from_writer(w);
    csv.write_record([key_name, "class", "mean", "ci_lo", "ci_hi"])?;
    for r in rows {
        csv.write_record([
            r.key.clone(),
            r.class.clone(),
            r.mean.to_string(),
            r.ci_lo.to_string(),
            r.ci_hi.to_string(),
        ])?;
    }
    csv.flush()?;
    Ok(())
}

/// Per-layer rows followed by a `total` row, one block per aggregate.
pub fn aggregate_csv(w: impl Write, aggregates: &[LcAggregate], header_comment: Option<&str>) -> Result<()> {
    let mut rows = Vec::new();
    for agg in aggregates {
        for (k, s) in agg.per_layer.iter().enumerate() {
            rows.push(LcCsvRow {
                key: k.to_string(),
                class: agg.class.as_str().into(),
                mean: s.mean,
                ci_lo: s.ci_lo,
                ci_hi: s.ci_hi,
            });
        }
        rows.push(LcCsvRow {
            key: "total".into(),
            class: agg.class.as_str().into(),
            mean: agg.total.mean,
            ci_lo: agg.total.ci_lo,
            ci_hi: agg.total.ci_hi,
        });
    }
    write_rows(w, "layer", header_comment, &rows)
}

pub fn sweep_csv(w: impl Write, sweep: &[SweepPoint], class: &str, header_comment: Option<&str>) -> Result<()> {
    let rows: Vec<LcCsvRow> = sweep
        .iter()
        .map(|s| LcCsvRow {
            key: s.t.to_string(),
            class: class.into(),
            mean: s.lc.mean,
            ci_lo: s.lc.ci_lo,
            ci_hi: s.lc.ci_hi,
        })
        .collect();
    write_rows(w, "t", header_comment, &rows)
}

pub fn write_json<T: Serialize>(w: impl Write, value: &T) -> Result<()> {
    serde_json::to_writer_pretty(w, value)?;
    Ok(())
}
