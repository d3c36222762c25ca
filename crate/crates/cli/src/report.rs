//! Run reports: per-trial records, aggregates, and JSON emission.
//!
//! Reports are bit-identical for identical scenario + seed, so nothing
//! time-dependent goes into report.json; wall-clock numbers are written
//! to a separate timings.json that carries no reproducibility promise.

use std::path::{Path, PathBuf};
use std::time::Duration;

use anyhow::{Context, Result};
use serde::Serialize;
use subnyq::specx::SpecxEpochLog;

use crate::scenario::{Expectations, Module};

/// One recovered target in physical units.
#[derive(Debug, Clone, Serialize)]
pub struct Detection {
    /// Delay, seconds.
    pub delay: f64,
    /// Doppler, rad/s.
    pub doppler: f64,
    /// Sine azimuth for array pipelines.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub azimuth: Option<f64>,
    /// Complex amplitude as [re, im].
    pub amplitude: [f64; 2],
}

#[derive(Debug, Clone, Serialize)]
pub struct TrialRecord {
    pub trial: usize,
    pub seed: u64,
    pub truth_count: usize,
    pub hits: usize,
    pub misses: usize,
    pub false_alarms: usize,
    /// Localization error over matched pairs (seconds, or km-equivalent
    /// for the coexistence pipeline).
    #[serde(skip_serializing_if = "Option::is_none")]
    pub rmsle: Option<f64>,
    /// Whole support recovered exactly on the grid.
    pub exact_support: bool,
    pub detections: Vec<Detection>,
    /// Coexistence pipelines: the per-epoch sense/select/dwell log.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub epochs: Option<Vec<SpecxEpochLog>>,
    /// Imaging pipelines: peak cell and its Chebyshev distance to truth.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub peak_cell: Option<(usize, usize)>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub peak_distance: Option<usize>,
}

impl TrialRecord {
    /// Empty record with consistent counts; pipelines fill what applies.
    pub fn new(trial: usize, seed: u64, truth_count: usize) -> Self {
        Self {
            trial,
            seed,
            truth_count,
            hits: 0,
            misses: truth_count,
            false_alarms: 0,
            rmsle: None,
            exact_support: false,
            detections: Vec::new(),
            epochs: None,
            peak_cell: None,
            peak_distance: None,
        }
    }

    pub fn set_counts(&mut self, hits: usize, misses: usize, false_alarms: usize) {
        assert_eq!(hits + misses, self.truth_count, "counts must tile the truth");
        self.hits = hits;
        self.misses = misses;
        self.false_alarms = false_alarms;
    }
}

/// One cell of a sweep table.
#[derive(Debug, Clone, Serialize)]
pub struct SweepCell {
    pub coeff_bins: usize,
    pub pulses: usize,
    pub targets: usize,
    pub trials: usize,
    pub successes: usize,
    pub rate: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct Aggregate {
    pub truth_total: usize,
    pub hits: usize,
    pub misses: usize,
    pub false_alarms: usize,
    /// hits / truth_total; 1.0 for empty scenes with no false alarms.
    pub hit_rate: f64,
    /// Fraction of trials with exact support recovery.
    pub exact_rate: f64,
    /// Largest per-trial localization error observed.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub worst_rmsle: Option<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct RunReport {
    pub module: Module,
    pub scenario: String,
    pub seed: u64,
    pub trials: usize,
    pub aggregate: Aggregate,
    /// Expectation violations, empty when all gates held.
    pub failures: Vec<String>,
    pub trial_records: Vec<TrialRecord>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sweep_table: Option<Vec<SweepCell>>,
}

impl RunReport {
    pub fn new(module: Module, scenario: String, seed: u64, mut records: Vec<TrialRecord>) -> Self {
        records.sort_by_key(|r| r.trial);
        let truth_total: usize = records.iter().map(|r| r.truth_count).sum();
        let hits: usize = records.iter().map(|r| r.hits).sum();
        let misses: usize = records.iter().map(|r| r.misses).sum();
        let false_alarms: usize = records.iter().map(|r| r.false_alarms).sum();
        let exact = records.iter().filter(|r| r.exact_support).count();
        let hit_rate = if truth_total == 0 {
            if false_alarms == 0 {
                1.0
            } else {
                0.0
            }
        } else {
            hits as f64 / truth_total as f64
        };
        let worst_rmsle = records
            .iter()
            .filter_map(|r| r.rmsle)
            .fold(None, |acc: Option<f64>, v| Some(acc.map_or(v, |a| a.max(v))));
        let trials = records.len();
        RunReport {
            module,
            scenario,
            seed,
            trials,
            aggregate: Aggregate {
                truth_total,
                hits,
                misses,
                false_alarms,
                hit_rate,
                exact_rate: if trials == 0 {
                    0.0
                } else {
                    exact as f64 / trials as f64
                },
                worst_rmsle,
            },
            failures: Vec::new(),
            trial_records: records,
            sweep_table: None,
        }
    }

    /// Evaluate expectation gates, recording one failure line each.
    pub fn check(&mut self, expect: &Expectations) {
        let mut fails = Vec::new();
        for r in &self.trial_records {
            if let Some(h) = expect.hits {
                if r.hits != h {
                    fails.push(format!("trial {}: {} hits, expected {h}", r.trial, r.hits));
                }
            }
            if let Some(fa) = expect.false_alarms {
                if r.false_alarms != fa {
                    fails.push(format!(
                        "trial {}: {} false alarms, expected {fa}",
                        r.trial, r.false_alarms
                    ));
                }
            }
            if let Some(max) = expect.max_rmsle {
                match r.rmsle {
                    Some(v) if v <= max => {}
                    Some(v) => fails.push(format!(
                        "trial {}: localization error {v:.4} exceeds {max}",
                        r.trial
                    )),
                    None => fails.push(format!(
                        "trial {}: no localization error available against bound {max}",
                        r.trial
                    )),
                }
            }
            if let Some(d) = expect.max_peak_distance {
                match r.peak_distance {
                    Some(v) if v <= d => {}
                    Some(v) => fails.push(format!(
                        "trial {}: peak {v} cells from the target, allowed {d}",
                        r.trial
                    )),
                    None => fails.push(format!(
                        "trial {}: no peak distance available against bound {d}",
                        r.trial
                    )),
                }
            }
        }
        if let Some(min) = expect.min_hit_rate {
            if self.aggregate.hit_rate < min {
                fails.push(format!(
                    "hit rate {:.4} below {min}",
                    self.aggregate.hit_rate
                ));
            }
        }
        if let Some(min) = expect.min_exact_rate {
            if self.aggregate.exact_rate < min {
                fails.push(format!(
                    "exact-recovery rate {:.4} below {min}",
                    self.aggregate.exact_rate
                ));
            }
        }
        if let Some(min) = expect.min_sweep_rate {
            match &self.sweep_table {
                Some(table) => {
                    for cell in table {
                        if cell.rate < min {
                            fails.push(format!(
                                "sweep cell K={} P={} L={}: rate {:.4} below {min}",
                                cell.coeff_bins, cell.pulses, cell.targets, cell.rate
                            ));
                        }
                    }
                }
                None => fails.push("min_sweep_rate set but the run produced no sweep table".into()),
            }
        }
        self.failures = fails;
    }

    pub fn passed(&self) -> bool {
        self.failures.is_empty()
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

/// Wall-clock numbers, kept out of report.json on purpose.
#[derive(Debug, Clone, Serialize)]
pub struct Timings {
    pub total_seconds: f64,
    pub trials: usize,
    pub mean_trial_seconds: f64,
}

impl Timings {
    pub fn new(total: Duration, trials: usize) -> Self {
        let total_seconds = total.as_secs_f64();
        Timings {
            total_seconds,
            trials,
            mean_trial_seconds: if trials == 0 {
                0.0
            } else {
                total_seconds / trials as f64
            },
        }
    }
}

/// Write report.json and timings.json under `dir`, returning the report
/// path.
pub fn write_reports(dir: &Path, report: &RunReport, timings: &Timings) -> Result<PathBuf> {
    std::fs::create_dir_all(dir)
        .with_context(|| format!("creating output directory {}", dir.display()))?;
    let report_path = dir.join("report.json");
    std::fs::write(&report_path, report.to_json()?)
        .with_context(|| format!("writing {}", report_path.display()))?;
    let timings_path = dir.join("timings.json");
    std::fs::write(&timings_path, serde_json::to_string_pretty(timings)?)
        .with_context(|| format!("writing {}", timings_path.display()))?;
    Ok(report_path)
}
