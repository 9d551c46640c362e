use std::fmt::Write as _;
use std::time::Duration;

use serde::{Deserialize, Serialize};

use super::cv::CvConfig;
use super::metrics::{f1_weighted, ConfusionCounts, F1Scores};
use super::HarnessError;
use crate::trainer::StopPolicy;
use crate::transport::CommStats;

/// Wall-clock seconds of one fold. Dataset loading is never included.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct FoldTiming {
    /// Dealing the fold's features and labels.
    pub share_seconds: f64,
    /// Mask generation inside training.
    pub preprocessing_seconds: f64,
    /// Training minus mask generation.
    pub online_seconds: f64,
    /// Training including mask generation.
    pub training_seconds: f64,
    pub classify_seconds: f64,
    pub total_seconds: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct PartyComm {
    pub party: u8,
    pub bytes_sent: u64,
    pub bytes_received: u64,
    pub messages_sent: u64,
    pub rounds: u64,
}

impl PartyComm {
    pub fn from_stats(party: u8, stats: &CommStats) -> Self {
        PartyComm {
            party,
            bytes_sent: stats.bytes_sent(),
            bytes_received: stats.bytes_received(),
            messages_sent: stats.messages_sent(),
            rounds: stats.rounds,
        }
    }

    /// Per-party sums over all folds.
    pub fn totals(folds: &[FoldResult]) -> Vec<PartyComm> {
        let mut out: Vec<PartyComm> = Vec::new();
        for c in folds.iter().flat_map(|f| &f.comm) {
            match out.iter_mut().find(|o| o.party == c.party) {
                Some(o) => {
                    o.bytes_sent += c.bytes_sent;
                    o.bytes_received += c.bytes_received;
                    o.messages_sent += c.messages_sent;
                    o.rounds += c.rounds;
                }
                None => out.push(c.clone()),
            }
        }
        out.sort_by_key(|c| c.party);
        out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FoldResult {
    pub repeat: usize,
    pub fold: usize,
    pub counts: ConfusionCounts,
    pub f1: F1Scores,
    pub epochs: u32,
    pub stopped_early: bool,
    pub timing: FoldTiming,
    /// Traffic of the parties this process observed.
    pub comm: Vec<PartyComm>,
}

impl FoldResult {
    pub fn secure(
        repeat: usize,
        fold: usize,
        counts: ConfusionCounts,
        epochs: u32,
        stopped_early: bool,
        timing: FoldTiming,
        comm: Vec<PartyComm>,
    ) -> Result<Self, HarnessError> {
        let f1 = f1_weighted(&counts)?;
        Ok(FoldResult { repeat, fold, counts, f1, epochs, stopped_early, timing, comm })
    }

    pub fn cleartext(
        repeat: usize,
        fold: usize,
        counts: ConfusionCounts,
        epochs: u32,
        stopped_early: bool,
        elapsed: Duration,
    ) -> Result<Self, HarnessError> {
        let secs = elapsed.as_secs_f64();
        let timing = FoldTiming { online_seconds: secs, training_seconds: secs, total_seconds: secs, ..Default::default() };
        Self::secure(repeat, fold, counts, epochs, stopped_early, timing, Vec::new())
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct ReportOptions {
    /// Wall-clock fields make reports differ between identical runs.
    pub include_timing: bool,
}

/// Cross-validation outcome. Scores are weighted F1, not accuracy.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvReport {
    pub label: String,
    pub config: CvConfig,
    pub folds: Vec<FoldResult>,
    pub mean_weighted_f1: f64,
    /// Sample standard deviation over all folds of all repeats.
    pub std_weighted_f1: f64,
    pub mean_epochs: f64,
    pub mean_training_seconds: f64,
    pub mean_preprocessing_seconds: f64,
    pub mean_online_seconds: f64,
    pub mean_share_seconds: f64,
    pub mean_total_seconds: f64,
    pub comm: Vec<PartyComm>,
}

fn mean(values: impl Iterator<Item = f64>) -> f64 {
    let (sum, count) = values.fold((0.0, 0usize), |(s, c), v| (s + v, c + 1));
    if count == 0 {
        0.0
    } else {
        sum / count as f64
    }
}

const TIMING_KEYS: [&str; 6] = [
    "mean_training_seconds",
    "mean_preprocessing_seconds",
    "mean_online_seconds",
    "mean_share_seconds",
    "mean_total_seconds",
    "timing",
];

impl CvReport {
    pub fn new(cv: &CvConfig, label: &str, folds: Vec<FoldResult>, comm: Vec<PartyComm>) -> Result<Self, HarnessError> {
        if folds.is_empty() {
            return Err(HarnessError::NoSamples);
        }
        let scores: Vec<f64> = folds.iter().map(|f| f.f1.weighted).collect();
        let mean_f1 = mean(scores.iter().copied());
        let std = if scores.len() > 1 {
            (scores.iter().map(|s| (s - mean_f1).powi(2)).sum::<f64>() / (scores.len() - 1) as f64).sqrt()
        } else {
            0.0
        };
        let timing = |pick: fn(&FoldTiming) -> f64| mean(folds.iter().map(|f| pick(&f.timing)));
        Ok(CvReport {
            label: label.to_string(),
            config: cv.clone(),
            mean_weighted_f1: mean_f1,
            std_weighted_f1: std,
            mean_epochs: mean(folds.iter().map(|f| f.epochs as f64)),
            mean_training_seconds: timing(|t| t.training_seconds),
            mean_preprocessing_seconds: timing(|t| t.preprocessing_seconds),
            mean_online_seconds: timing(|t| t.online_seconds),
            mean_share_seconds: timing(|t| t.share_seconds),
            mean_total_seconds: timing(|t| t.total_seconds),
            folds,
            comm,
        })
    }

    pub fn weighted_f1_scores(&self) -> Vec<f64> {
        self.folds.iter().map(|f| f.f1.weighted).collect()
    }

    pub fn duration_label(&self) -> String {
        match self.config.training.stop {
            StopPolicy::Fixed { epochs } => format!("{epochs} epochs"),
            StopPolicy::LossThreshold { threshold, cap } => format!("loss < {threshold:e} (cap {cap})"),
        }
    }

    /// Human-readable summary.
    pub fn table(&self) -> String {
        let mut out = String::new();
        let cfg = &self.config;
        let _ = writeln!(
            out,
            "{}: {} x {}-fold cross-validation, {} folds",
            self.label,
            cfg.repeats,
            cfg.k,
            self.folds.len()
        );
        let _ = writeln!(
            out,
            "{:<24} {:<14} {:<18} {:>10} {:>10} {:>10}",
            "Duration", "Truncation", "Weighted F1", "Time (s)", "Prep (s)", "Total (s)"
        );
        let _ = writeln!(
            out,
            "{:<24} {:<14} {:<18} {:>10.2} {:>10.2} {:>10.2}",
            self.duration_label(),
            cfg.training.truncation.to_string(),
            format!("{:.3} ± {:.3}", self.mean_weighted_f1, self.std_weighted_f1),
            self.mean_online_seconds,
            self.mean_preprocessing_seconds,
            self.mean_total_seconds,
        );
        let _ = writeln!(out, "mean epochs per fold: {:.1}", self.mean_epochs);
        for c in &self.comm {
            let _ = writeln!(
                out,
                "party {}: {} bytes sent, {} received, {} rounds",
                c.party, c.bytes_sent, c.bytes_received, c.rounds
            );
        }
        out
    }

    pub fn to_json(&self, options: &ReportOptions) -> Result<String, HarnessError> {
        let mut value = serde_json::to_value(self).map_err(|e| HarnessError::InvalidArgument(e.to_string()))?;
        if !options.include_timing {
            strip_keys(&mut value, &TIMING_KEYS);
        }
        serde_json::to_string_pretty(&value).map_err(|e| HarnessError::InvalidArgument(e.to_string()))
    }
}

fn strip_keys(value: &mut serde_json::Value, keys: &[&str]) {
    match value {
        serde_json::Value::Object(map) => {
            for k in keys {
                map.remove(*k);
            }
            map.values_mut().for_each(|v| strip_keys(v, keys));
        }
        serde_json::Value::Array(items) => items.iter_mut().for_each(|v| strip_keys(v, keys)),
        _ => {}
    }
}
