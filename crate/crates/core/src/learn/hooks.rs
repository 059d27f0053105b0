use ndarray::Array2;

use super::data::Dataset;
use super::train::CheckpointHook;
use super::trajectory::TrajectoryRow;
use crate::adversarial::{robust_accuracy_curve, AttackConfig};
use crate::error::Result;
use crate::lcprobe::{batch_lc, box_sample, LcAggregate, PointClass, ProbeConfig};
use crate::netcore::Network;

/// Local complexity of fixed probe sets at every checkpoint.
pub struct LcHook {
    pub cfg: ProbeConfig,
    pub sets: Vec<(PointClass, Array2<f64>)>,
    /// Also record per-layer means as `lc_<class>_l<k>` columns.
    pub layerwise: bool,
    /// Latest aggregates, in `sets` order.
    pub last: Vec<LcAggregate>,
}

impl LcHook {
    pub fn new(cfg: ProbeConfig) -> Self {
        LcHook {
            cfg,
            sets: Vec::new(),
            layerwise: false,
            last: Vec::new(),
        }
    }

    pub fn with_set(mut self, class: PointClass, points: Array2<f64>) -> Self {
        self.sets.push((class, points));
        self
    }

    /// Probe centres: the first `n` train and test points, and `n` random
    /// points drawn once from the training set's bounding box.
    pub fn standard(cfg: ProbeConfig, train: &Dataset, test: Option<&Dataset>, n: usize, seed: u64) -> Self {
        let (lo, hi) = train.bounding_box();
        let mut hook = LcHook::new(cfg).with_set(PointClass::Train, train.take(n).inputs);
        if let Some(t) = test {
            hook = hook.with_set(PointClass::Test, t.take(n).inputs);
        }
        hook.with_set(PointClass::Random, box_sample(lo.view(), hi.view(), n, seed))
    }
}

impl CheckpointHook for LcHook {
    fn on_checkpoint(&mut self, _step: u64, net: &Network, row: &mut TrajectoryRow) -> Result<()> {
        self.last.clear();
        for (class, pts) in &self.sets {
            let agg = batch_lc(net, pts.view(), &self.cfg, *class)?;
            let slot = match class {
                PointClass::Train => &mut row.lc_train,
                PointClass::Test => &mut row.lc_test,
                PointClass::Random => &mut row.lc_rand,
            };
            *slot = Some(agg.total);
            if self.layerwise {
                let tag = match class {
                    PointClass::Random => "rand",
                    c => c.as_str(),
                };
                for (k, s) in agg.per_layer.iter().enumerate() {
                    row.extra.insert(format!("lc_{tag}_l{k}"), s.mean);
                }
            }
            self.last.push(agg);
        }
        Ok(())
    }
}

/// PGD robust accuracy over a fixed evaluation set, one column per ε.
pub struct RobustHook {
    pub data: Dataset,
    pub base: AttackConfig,
    pub epsilons: Vec<f64>,
}

impl CheckpointHook for RobustHook {
    fn on_checkpoint(&mut self, _step: u64, net: &Network, row: &mut TrajectoryRow) -> Result<()> {
        row.adv_acc = robust_accuracy_curve(net, &self.data, &self.base, &self.epsilons)?;
        Ok(())
    }
}
