//! Scenario files: a TOML document selecting one pipeline and its
//! parameters, plus optional pass/fail expectations.
//!
//! The schema is strict (unknown keys are rejected) and exactly one
//! pipeline section, the one named by `module`, must be present. CLI
//! flags can override trials, seed, output directory and a few
//! pipeline knobs after parsing.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Module {
    Temporal,
    Rtot,
    Specx,
    Summer,
    Sar,
    Sweep,
}

impl std::fmt::Display for Module {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let name = match self {
            Module::Temporal => "temporal",
            Module::Rtot => "rtot",
            Module::Specx => "specx",
            Module::Summer => "summer",
            Module::Sar => "sar",
            Module::Sweep => "sweep",
        };
        f.write_str(name)
    }
}

/// How targets are placed on the recovery grid each trial.
#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(deny_unknown_fields, tag = "kind", rename_all = "lowercase")]
pub enum TargetSpec {
    /// Explicit grid coordinates, one target per entry. Fractional
    /// coordinates put the target off grid.
    Fixed {
        delay_bins: Vec<f64>,
        doppler_bins: Vec<f64>,
    },
    /// `count` targets drawn per trial on distinct grid cells, unit
    /// amplitudes with random phases. `min_gap_bins` keeps delays apart.
    Random {
        count: usize,
        #[serde(default)]
        min_gap_bins: f64,
    },
}

impl TargetSpec {
    pub fn count(&self) -> usize {
        match self {
            TargetSpec::Fixed { delay_bins, .. } => delay_bins.len(),
            TargetSpec::Random { count, .. } => *count,
        }
    }

    fn validate(&self) -> Result<()> {
        match self {
            TargetSpec::Fixed {
                delay_bins,
                doppler_bins,
            } => {
                if delay_bins.len() != doppler_bins.len() {
                    bail!(
                        "targets list {} delays but {} dopplers",
                        delay_bins.len(),
                        doppler_bins.len()
                    );
                }
            }
            TargetSpec::Random { min_gap_bins, .. } => {
                if !min_gap_bins.is_finite() || *min_gap_bins < 0.0 {
                    bail!("min_gap_bins must be finite and >= 0");
                }
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Deserialize, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum SchemeChoice {
    Lowpass,
    Direct,
    #[default]
    Multiband,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Deserialize, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum ScheduleChoice {
    #[default]
    Random,
    Prefix,
    Split,
}

fn default_pfa() -> f64 {
    1e-6
}

fn default_scheme_bands() -> usize {
    4
}

#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct TemporalConfig {
    /// Pulses per coherent interval (P).
    pub pulses: usize,
    /// Nyquist-rate grid size per pulse (N = tau B_h).
    pub nyquist_bins: usize,
    /// Retained Fourier coefficients per pulse (K).
    pub coeff_bins: usize,
    #[serde(default)]
    pub scheme: SchemeChoice,
    #[serde(default = "default_scheme_bands")]
    pub scheme_bands: usize,
    pub targets: TargetSpec,
    /// Per-coefficient SNR for unit targets; omit for noiseless runs.
    pub snr_db: Option<f64>,
    #[serde(default = "default_pfa")]
    pub pfa: f64,
    pub max_iter: Option<usize>,
}

#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct RtotConfig {
    /// Slots in the full train (P1) and transmitted pulses (P2).
    pub slots: usize,
    pub pulses: usize,
    pub nyquist_bins: usize,
    pub coeff_bins: usize,
    #[serde(default)]
    pub scheme: SchemeChoice,
    #[serde(default = "default_scheme_bands")]
    pub scheme_bands: usize,
    #[serde(default)]
    pub schedule: ScheduleChoice,
    pub targets: TargetSpec,
    pub snr_db: Option<f64>,
}

#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct SpecxConfig {
    pub epochs: usize,
    /// Transmit block budget per band selection.
    pub nb: Option<usize>,
    /// Override the interference map (one level per analysis band).
    pub rem_levels: Option<Vec<f64>>,
}

#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct SummerConfig {
    /// Transmitters and receivers actually placed.
    pub tx: usize,
    pub rx: usize,
    /// Virtual array extents (T, R) defining the recovery grids.
    pub virtual_tx: usize,
    pub virtual_rx: usize,
    pub pulses: usize,
    /// Fourier coefficients per channel (K).
    pub coeff_bins: usize,
    /// Nyquist grid per pulse; delay grid has virtual_tx * nyquist_bins
    /// cells.
    pub nyquist_bins: usize,
    /// "ula" places tx/rx on the full virtual grid; "random" thins them
    /// over the same aperture.
    #[serde(default)]
    pub array: ArrayChoice,
    pub targets: usize,
    /// Minimum separation between drawn targets, in grid cells per axis.
    #[serde(default)]
    pub min_gap_cells: usize,
    pub snr_db: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Deserialize, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum ArrayChoice {
    Ula,
    #[default]
    Random,
}

#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct SarConfig {
    pub range_bins: usize,
    pub positions: usize,
    pub pulse_len: usize,
    pub pulse_band: f64,
    pub target_bin: f64,
    pub target_pulse: f64,
    pub velocity: f64,
    pub pri: f64,
    pub wavelength: f64,
    /// RCMC window half-width W.
    pub half_width: usize,
    /// Signed inclusive coefficient runs to keep; omit for full rate.
    pub keep_bands: Option<Vec<(i64, i64)>>,
}

#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    /// Grid of operating points: every (K, P, L) combination runs
    /// `trials` noiseless random-target recoveries.
    pub coeff_bins: Vec<usize>,
    pub pulses: Vec<usize>,
    pub targets: Vec<usize>,
    pub nyquist_bins: usize,
    #[serde(default)]
    pub scheme: SchemeChoice,
    #[serde(default = "default_scheme_bands")]
    pub scheme_bands: usize,
}

/// Pass/fail gates evaluated after the run; any violation makes the CLI
/// exit with code 2.
#[derive(Debug, Clone, Default, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct Expectations {
    /// Exact hit count required in every trial.
    pub hits: Option<usize>,
    /// Exact false-alarm count required in every trial.
    pub false_alarms: Option<usize>,
    /// Aggregate hits / truth lower bound.
    pub min_hit_rate: Option<f64>,
    /// Fraction of trials with exact support recovery, lower bound.
    pub min_exact_rate: Option<f64>,
    /// Upper bound on every trial's localization error (pipeline units:
    /// km-equivalent for specx, seconds otherwise).
    pub max_rmsle: Option<f64>,
    /// Upper bound on the sweep's worst success rate (sweep module only).
    pub min_sweep_rate: Option<f64>,
    /// SAR: image peak must land within this many cells of the target.
    pub max_peak_distance: Option<usize>,
}

#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub module: Module,
    #[serde(default = "default_trials")]
    pub trials: usize,
    #[serde(default)]
    pub seed: u64,
    pub out_dir: Option<PathBuf>,
    /// Also write delay-Doppler maps / images as CSV and PGM.
    #[serde(default)]
    pub emit_matrices: bool,
    pub temporal: Option<TemporalConfig>,
    pub rtot: Option<RtotConfig>,
    pub specx: Option<SpecxConfig>,
    pub summer: Option<SummerConfig>,
    pub sar: Option<SarConfig>,
    pub sweep: Option<SweepConfig>,
    pub expect: Option<Expectations>,
}

fn default_trials() -> usize {
    1
}

impl Scenario {
    pub fn from_toml(text: &str) -> Result<Scenario> {
        let sc: Scenario = toml::from_str(text).context("scenario schema violation")?;
        sc.validate()?;
        Ok(sc)
    }

    pub fn load(path: &Path) -> Result<Scenario> {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("reading scenario {}", path.display()))?;
        Self::from_toml(&text).with_context(|| format!("in scenario {}", path.display()))
    }

    /// Exactly the section named by `module` must be present.
    pub fn validate(&self) -> Result<()> {
        let sections: [(&str, bool); 6] = [
            ("temporal", self.temporal.is_some()),
            ("rtot", self.rtot.is_some()),
            ("specx", self.specx.is_some()),
            ("summer", self.summer.is_some()),
            ("sar", self.sar.is_some()),
            ("sweep", self.sweep.is_some()),
        ];
        let selected = self.module.to_string();
        for (name, present) in sections {
            if name == selected && !present {
                bail!("module = \"{selected}\" needs a [{selected}] section");
            }
            if name != selected && present {
                bail!("[{name}] section does not belong to module \"{selected}\"");
            }
        }
        if self.trials == 0 {
            bail!("trials must be >= 1");
        }
        match self.module {
            Module::Temporal => {
                let t = self.temporal.as_ref().unwrap();
                t.targets.validate()?;
                if !(t.pfa > 0.0 && t.pfa < 1.0) {
                    bail!("pfa must lie strictly in (0, 1)");
                }
            }
            Module::Rtot => {
                let r = self.rtot.as_ref().unwrap();
                r.targets.validate()?;
                if r.pulses > r.slots {
                    bail!("rtot pulses exceed the slot count");
                }
            }
            Module::Sweep => {
                let s = self.sweep.as_ref().unwrap();
                if s.coeff_bins.is_empty() || s.pulses.is_empty() || s.targets.is_empty() {
                    bail!("sweep axes must be non-empty");
                }
            }
            _ => {}
        }
        Ok(())
    }
}
