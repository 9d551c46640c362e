use serde::Serialize;

use super::{ClassWeighting, TrainerError, TrainingConfig};
use crate::nonlinear::{loss_budget, mean_extra_bits, LogTable, SigmoidTable};
use crate::rss::{OpCounts, PreprocessingBudget};

/// Masks and operations of one training run.
///
/// `setup` is consumed once, `forward` by every evaluated epoch and `update`
/// by every epoch that changes the weights. The `*_ops` fields count the
/// protocol operations that consume no masks.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TrainingBudget {
    pub setup: PreprocessingBudget,
    pub forward: PreprocessingBudget,
    pub update: PreprocessingBudget,
    pub max_epochs: u32,
    pub setup_ops: OpCounts,
    pub forward_ops: OpCounts,
    pub update_ops: OpCounts,
}

/// Headline numbers for logs and reports.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct BudgetSummary {
    pub truncation_pairs_per_epoch: usize,
    pub comparison_masks_per_epoch: usize,
    pub truncation_pairs_total: usize,
    pub comparison_masks_total: usize,
    pub random_bits_total: usize,
    pub dot_products_per_epoch: u64,
    pub multiplications_per_epoch: u64,
}

impl TrainingBudget {
    pub fn per_epoch(&self) -> PreprocessingBudget {
        let mut b = self.forward.clone();
        b.merge(&self.update);
        b
    }

    /// Everything a run of `max_epochs` full epochs consumes.
    pub fn total(&self) -> PreprocessingBudget {
        let mut b = self.setup.clone();
        b.merge(&self.per_epoch().times(self.max_epochs as usize));
        b
    }

    pub fn total_pairs(&self) -> usize {
        self.total().total_truncations()
    }

    /// Instrumented counts of a run that evaluated `evaluated` epochs and
    /// updated the weights in `updated` of them.
    pub fn expected_counts(&self, evaluated: u32, updated: u32) -> OpCounts {
        let phase = |masks: &PreprocessingBudget, ops: &OpCounts| {
            let mut c = masks.generation_counts();
            c.add(&masks.consumption_counts()).add(ops);
            c
        };
        let mut c = phase(&self.setup, &self.setup_ops);
        c.add(&phase(&self.forward, &self.forward_ops).times(evaluated as u64))
            .add(&phase(&self.update, &self.update_ops).times(updated as u64));
        c
    }

    pub fn summary(&self) -> BudgetSummary {
        let epoch = self.per_epoch();
        let total = self.total();
        let ops = self.expected_counts(1, 1);
        BudgetSummary {
            truncation_pairs_per_epoch: epoch.total_truncations(),
            comparison_masks_per_epoch: epoch.total_comparisons(),
            truncation_pairs_total: total.total_truncations(),
            comparison_masks_total: total.total_comparisons(),
            random_bits_total: total.random_bits(),
            dot_products_per_epoch: ops.dot_products,
            multiplications_per_epoch: ops.multiplications,
        }
    }
}

/// Preprocessing needed to train on `n` rows of `d` features under `cfg`.
pub fn required_pairs(n: usize, d: usize, cfg: &TrainingConfig) -> Result<TrainingBudget, TrainerError> {
    let params = &cfg.fixed_point;
    let f = params.frac_bits();
    let mode = cfg.truncation;
    let balanced = cfg.class_weighting == ClassWeighting::Balanced;
    let sigmoid = SigmoidTable::new(params)?;
    let (n64, d64) = (n as u64, d as u64);

    let mut setup = PreprocessingBudget::new();
    let mut setup_ops = OpCounts::default();
    if balanced {
        setup.add_trunc(mode, f, n);
        setup_ops.opened = 1;
    }

    let mut forward = sigmoid.budget(n, mode);
    forward.add_trunc(mode, f, n);
    let mut forward_ops = OpCounts {
        dot_products: n64,
        multiplications: sigmoid.multiplications_per_input() * n64,
        ..Default::default()
    };
    if cfg.computes_loss() {
        forward.merge(&loss_budget(params, n, mode)?);
        forward_ops.multiplications += LogTable::new(params)?.multiplications_per_input() * 2 * n64;
        forward_ops.dot_products += 1;
        forward_ops.opened += 1;
    }

    let mut update = PreprocessingBudget::new();
    update
        .add_trunc(mode, f, if balanced { n } else { 0 } + d + 2 * (d + 1))
        .add_trunc(mode, f + mean_extra_bits(f), d + 1);
    let update_ops = OpCounts {
        dot_products: d64,
        multiplications: if balanced { n64 } else { 0 },
        ..Default::default()
    };

    Ok(TrainingBudget {
        setup,
        forward,
        update,
        max_epochs: cfg.stop.max_epochs(),
        setup_ops,
        forward_ops,
        update_ops,
    })
}
