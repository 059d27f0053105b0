use std::collections::BTreeMap;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lcprobe::Summary;

/// Metrics recorded at one checkpoint.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryRow {
    pub step: u64,
    pub train_acc: Option<f64>,
    pub test_acc: Option<f64>,
    pub train_loss: f64,
    /// `(epsilon, robust accuracy)` pairs.
    pub adv_acc: Vec<(f64, f64)>,
    pub lc_train: Option<Summary>,
    pub lc_test: Option<Summary>,
    pub lc_rand: Option<Summary>,
    /// Hook-specific columns, written after the fixed ones in key order.
    pub extra: BTreeMap<String, f64>,
    pub wall_clock_s: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryLog {
    pub tool: String,
    pub config_hash: String,
    pub rows: Vec<TrajectoryRow>,
}

fn opt(x: Option<f64>) -> String {
    x.map(|v| v.to_string()).unwrap_or_default()
}

impl TrajectoryLog {
    pub fn new(config_hash: impl Into<String>) -> Self {
        TrajectoryLog {
            tool: crate::TOOL.to_string(),
            config_hash: config_hash.into(),
            rows: Vec::new(),
        }
    }

    pub fn steps(&self) -> Vec<u64> {
        self.rows.iter().map(|r| r.step).collect()
    }

    pub fn push(&mut self, row: TrajectoryRow) -> Result<()> {
        if let Some(last) = self.rows.last() {
            if row.step <= last.step {
                return Err(Error::invalid(
                    "trajectory",
                    format!("step {} after step {}", row.step, last.step),
                ));
            }
        }
        self.rows.push(row);
        Ok(())
    }

    fn eps_columns(&self) -> Vec<f64> {
        let mut eps: Vec<f64> = Vec::new();
        for r in &self.rows {
            for &(e, _) in &r.adv_acc {
                if !eps.contains(&e) {
                    eps.push(e);
                }
            }
        }
        eps
    }

    fn extra_columns(&self) -> Vec<String> {
        let mut keys: Vec<String> = self.rows.iter().flat_map(|r| r.extra.keys().cloned()).collect();
        keys.sort();
        keys.dedup();
        keys
    }

    /// CSV with a leading `#` line naming tool and config hash.
    pub fn write_csv(&self, w: impl Write) -> Result<()> {
        self.write_csv_opts(w, true)
    }

    /// `with_clock = false` blanks the wall-clock column, giving output that
    /// is byte-identical across reruns.
    pub fn write_csv_opts(&self, mut w: impl Write, with_clock: bool) -> Result<()> {
        writeln!(w, "# {} config_hash={}", self.tool, self.config_hash)?;
        let eps = self.eps_columns();
        let extra = self.extra_columns();
        let mut out = csv::Writer::from_writer(w);
        let mut header: Vec<String> = ["step", "train_acc", "test_acc", "train_loss"].map(String::from).to_vec();
        header.extend(eps.iter().map(|e| format!("adv_acc_eps_{e}")));
        for c in ["train", "test", "rand"] {
            header.push(format!("lc_{c}_mean"));
            header.push(format!("lc_{c}_ci"));
        }
        header.extend(extra.iter().cloned());
        header.push("wall_clock_s".into());
        header.push("config_hash".into());
        out.write_record(&header)?;
        for r in &self.rows {
            let mut rec = vec![r.step.to_string(), opt(r.train_acc), opt(r.test_acc), r.train_loss.to_string()];
            for e in &eps {
                rec.push(opt(r.adv_acc.iter().find(|(x, _)| x == e).map(|&(_, a)| a)));
            }
            for s in [&r.lc_train, &r.lc_test, &r.lc_rand] {
                rec.push(opt(s.map(|s| s.mean)));
                rec.push(opt(s.map(|s| s.half_width())));
            }
            for k in &extra {
                rec.push(opt(r.extra.get(k).copied()));
            }
            rec.push(if with_clock { format!("{:.3}", r.wall_clock_s) } else { String::new() });
            rec.push(self.config_hash.clone());
            out.write_record(&rec)?;
        }
        out.flush()?;
        Ok(())
    }

    pub fn save_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let f = std::fs::File::create(path).map_err(|e| Error::file(path, e))?;
        self.write_csv(std::io::BufWriter::new(f))
    }

    pub fn save_json(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let f = std::fs::File::create(path).map_err(|e| Error::file(path, e))?;
        serde_json::to_writer_pretty(std::io::BufWriter::new(f), self)?;
        Ok(())
    }
}
