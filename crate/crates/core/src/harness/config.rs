// Copyright 2026 The qthermo Authors
// SPDX-License-Identifier: Apache-2.0

//! Experiment configuration: presets per experiment plus a flat
//! `section.key = value` text format.
//!
//! Values use TOML syntax (`1e-3`, `true`, `"step"`, `[100, 100]`); `#` starts
//! a comment. Keys are applied in a fixed precedence (`experiment`, then
//! `system.kind` and `policy.approach`, then `policy.architecture`, then the
//! rest in file order) so a file may list them in any order.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::time::Duration;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::neural::Architecture;
use crate::policy::PolicyConfig;
use crate::spin::{Approach, CouplingRamp, SpinDrive, SystemKind, SystemSpec, TwoSpinControl};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExperimentKind {
    SingleSpinA1,
    SingleSpinA2,
    SingleSpinA3,
    SingleSpinVariantB,
    TwoSpinStep,
    TwoSpinSmooth,
    BetaSweep,
    FreeRun,
    GradCheck,
    RandomSearch,
}

impl ExperimentKind {
    pub const ALL: [Self; 10] = [
        Self::SingleSpinA1,
        Self::SingleSpinA2,
        Self::SingleSpinA3,
        Self::SingleSpinVariantB,
        Self::TwoSpinStep,
        Self::TwoSpinSmooth,
        Self::BetaSweep,
        Self::FreeRun,
        Self::GradCheck,
        Self::RandomSearch,
    ];

    pub fn label(self) -> &'static str {
        match self {
            Self::SingleSpinA1 => "single-spin-a1",
            Self::SingleSpinA2 => "single-spin-a2",
            Self::SingleSpinA3 => "single-spin-a3",
            Self::SingleSpinVariantB => "single-spin-variant-b",
            Self::TwoSpinStep => "two-spin-step",
            Self::TwoSpinSmooth => "two-spin-smooth",
            Self::BetaSweep => "beta-sweep",
            Self::FreeRun => "free-run",
            Self::GradCheck => "grad-check",
            Self::RandomSearch => "random-search",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|k| k.label() == s)
    }

    /// Whether the experiment trains a policy.
    pub fn trains(self) -> bool {
        !matches!(self, Self::FreeRun | Self::GradCheck | Self::RandomSearch)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepConfig {
    pub beta_min: f64,
    pub beta_max: f64,
    pub points: usize,
}

impl SweepConfig {
    /// `points` uniformly spaced values including both ends.
    pub fn betas(&self) -> Vec<f64> {
        if self.points == 1 {
            return vec![self.beta_min];
        }
        (0..self.points)
            .map(|i| self.beta_min + (self.beta_max - self.beta_min) * i as f64 / (self.points - 1) as f64)
            .collect()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub experiment: ExperimentKind,
    pub system: SystemSpec,
    pub policy: PolicyConfig,
    pub seeds: Vec<u64>,
    pub output_dir: Option<PathBuf>,
    pub timeout: Duration,
    pub sweep: SweepConfig,
    pub random_search_samples: usize,
    pub grad_check_trials: usize,
}

impl ExperimentConfig {
    pub fn preset(experiment: ExperimentKind) -> Self {
        use ExperimentKind::*;
        let (system, approach, mu_star, eta) = match experiment {
            SingleSpinA1 | RandomSearch => (SystemSpec::single_spin(SpinDrive::Sine), Approach::DenseDensity, 3.0, 5e-4),
            SingleSpinA2 => (SystemSpec::single_spin(SpinDrive::Sine), Approach::DensePure, 3.0, 1e-3),
            SingleSpinA3 | GradCheck => (SystemSpec::single_spin(SpinDrive::Sine), Approach::LstmEnergyTime, 3.0, 1e-3),
            SingleSpinVariantB => (
                SystemSpec::single_spin(SpinDrive::NestedSine),
                Approach::LstmEnergyTime,
                3.0,
                1e-3,
            ),
            TwoSpinStep | BetaSweep | FreeRun => {
                (SystemSpec::two_spin(CouplingRamp::Step), Approach::LstmTimeOnly, 5.0, 3e-4)
            }
            TwoSpinSmooth => (SystemSpec::two_spin(CouplingRamp::Smooth), Approach::LstmTimeOnly, 5.0, 3e-4),
        };
        let mut policy = PolicyConfig::new(approach, mu_star);
        policy.eta = eta;
        Self {
            experiment,
            system,
            policy,
            seeds: vec![0],
            output_dir: None,
            timeout: Duration::from_secs(30 * 60),
            sweep: SweepConfig {
                beta_min: 0.1,
                beta_max: 2.1,
                points: 20,
            },
            random_search_samples: 9000,
            grad_check_trials: 100,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.system.validate()?;
        if self.experiment.trains() || self.experiment == ExperimentKind::RandomSearch {
            self.policy.validate()?;
        }
        if self.seeds.is_empty() {
            return Err(config_error("seeds", None, "at least one seed is required"));
        }
        if self.sweep.points == 0 || !(self.sweep.beta_min > 0.0) || self.sweep.beta_max < self.sweep.beta_min {
            return Err(config_error("sweep", None, "need points ≥ 1 and 0 < beta_min ≤ beta_max"));
        }
        if self.random_search_samples == 0 {
            return Err(config_error("random_search.samples", None, "must be at least 1"));
        }
        Ok(())
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_text(&text, None)
    }

    /// Parses `text`; `experiment` overrides any `experiment =` line.
    pub fn from_text(text: &str, experiment: Option<ExperimentKind>) -> Result<Self> {
        let entries = parse_entries(text)?;
        let kind = match experiment {
            Some(k) => k,
            None => match entries.iter().find(|e| e.key == "experiment") {
                Some(e) => {
                    let s = as_str(&e.value).map_err(|m| config_error(&e.key, Some(e.line), &m))?;
                    ExperimentKind::parse(s)
                        .ok_or_else(|| config_error(&e.key, Some(e.line), &format!("unknown experiment {s:?}")))?
                }
                None => ExperimentKind::SingleSpinA1,
            },
        };
        let mut cfg = Self::preset(kind);
        let mut ordered: Vec<&Entry> = entries.iter().filter(|e| e.key != "experiment").collect();
        ordered.sort_by_key(|e| precedence(&e.key));
        for e in ordered {
            cfg.set(&e.key, &e.value).map_err(|m| config_error(&e.key, Some(e.line), &m))?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    /// Applies one `key = value` override.
    pub fn set(&mut self, key: &str, value: &toml::Value) -> std::result::Result<(), String> {
        let p = &mut self.policy;
        match key {
            "seeds" => self.seeds = parse_seeds(value)?,
            "output_dir" => self.output_dir = Some(PathBuf::from(as_str(value)?)),
            "timeout_secs" => self.timeout = Duration::from_secs_f64(as_nonneg(value)?),
            "system.kind" => {
                self.system.kind = match as_str(value)? {
                    "single-spin" => SystemKind::SingleSpin {
                        drive: SpinDrive::Sine,
                        b0: 1.0,
                    },
                    "two-spin" => SystemKind::TwoSpin {
                        coupling: CouplingRamp::Step,
                        flip_flop_scale: 1.0,
                        control: TwoSpinControl::ParticleLabel,
                    },
                    other => return Err(format!("unknown system kind {other:?}")),
                }
            }
            "system.tau" => self.system.tau = as_f64(value)?,
            "system.n_steps" => self.system.n_steps = as_usize(value)?,
            "system.beta" => self.system.beta = as_f64(value)?,
            "system.drive" | "system.b0" => match &mut self.system.kind {
                SystemKind::SingleSpin { drive, b0 } => {
                    if key == "system.drive" {
                        *drive = match as_str(value)? {
                            "sine" => SpinDrive::Sine,
                            "nested-sine" => SpinDrive::NestedSine,
                            other => return Err(format!("unknown drive {other:?}")),
                        }
                    } else {
                        *b0 = as_f64(value)?;
                    }
                }
                SystemKind::TwoSpin { .. } => return Err("applies to single-spin systems only".into()),
            },
            "system.coupling" | "system.flip_flop_scale" | "system.control" => match &mut self.system.kind {
                SystemKind::TwoSpin {
                    coupling,
                    flip_flop_scale,
                    control,
                } => match key {
                    "system.coupling" => {
                        *coupling = match as_str(value)? {
                            "step" => CouplingRamp::Step,
                            "smooth" => CouplingRamp::Smooth,
                            other => return Err(format!("unknown coupling {other:?}")),
                        }
                    }
                    "system.flip_flop_scale" => *flip_flop_scale = as_f64(value)?,
                    _ => {
                        *control = match as_str(value)? {
                            "particle-label" => TwoSpinControl::ParticleLabel,
                            "slot-symmetric" => TwoSpinControl::SlotSymmetric,
                            other => return Err(format!("unknown control form {other:?}")),
                        }
                    }
                },
                SystemKind::SingleSpin { .. } => return Err("applies to two-spin systems only".into()),
            },
            "policy.approach" => {
                let a = match as_str(value)? {
                    "dense-density" => Approach::DenseDensity,
                    "dense-pure" => Approach::DensePure,
                    "lstm-energy-time" => Approach::LstmEnergyTime,
                    "lstm-time-only" => Approach::LstmTimeOnly,
                    other => return Err(format!("unknown approach {other:?}")),
                };
                if a.is_recurrent() != p.approach.is_recurrent() {
                    p.architecture = if a.is_recurrent() {
                        Architecture::lstm_default()
                    } else {
                        Architecture::dense_default()
                    };
                }
                p.approach = a;
            }
            "policy.architecture" => {
                p.architecture = match as_str(value)? {
                    "dense" => Architecture::dense_default(),
                    "lstm" => Architecture::lstm_default(),
                    other => return Err(format!("unknown architecture {other:?}")),
                }
            }
            "policy.hidden" => match &mut p.architecture {
                Architecture::Dense { hidden } => {
                    *hidden = value
                        .as_array()
                        .ok_or("expected an array of layer widths")?
                        .iter()
                        .map(as_usize)
                        .collect::<std::result::Result<_, _>>()?
                }
                _ => return Err("applies to dense architectures only".into()),
            },
            "policy.lstm_units" | "policy.lstm_head" => match &mut p.architecture {
                Architecture::Lstm { units, head } => {
                    let v = as_usize(value)?;
                    if key == "policy.lstm_units" {
                        *units = v
                    } else {
                        *head = v
                    }
                }
                _ => return Err("applies to LSTM architectures only".into()),
            },
            "policy.sigma" => p.sigma = as_f64(value)?,
            "policy.epsilon" => p.epsilon = as_f64(value)?,
            "policy.mu_star" => p.mu_star = as_f64(value)?,
            "policy.batch_size" => p.batch_size = as_usize(value)?,
            "policy.n_epochs" => p.n_epochs = as_usize(value)?,
            "policy.epsilon_cutoff_epochs" => p.epsilon_cutoff_epochs = as_usize(value)?,
            "policy.eta" => p.eta = as_f64(value)?,
            "policy.momentum" => p.momentum = as_f64(value)?,
            "policy.updates_per_epoch" => p.updates_per_epoch = as_usize(value)?,
            "policy.clip_actions" => p.clip_actions = as_bool(value)?,
            "policy.reward_baseline" => p.reward_baseline = as_bool(value)?,
            "sweep.beta_min" => self.sweep.beta_min = as_f64(value)?,
            "sweep.beta_max" => self.sweep.beta_max = as_f64(value)?,
            "sweep.points" => self.sweep.points = as_usize(value)?,
            "random_search.samples" => self.random_search_samples = as_usize(value)?,
            "grad_check.trials" => self.grad_check_trials = as_usize(value)?,
            _ => return Err("unknown key".into()),
        }
        Ok(())
    }

    /// Canonical text form; re-parsing it yields an equal configuration.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let mut line = |k: &str, v: String| {
            let _ = writeln!(s, "{k} = {v}");
        };
        let q = |v: &str| format!("{v:?}");
        line("experiment", q(self.experiment.label()));
        line("seeds", format!("{:?}", self.seeds));
        if let Some(dir) = &self.output_dir {
            line("output_dir", q(&dir.display().to_string()));
        }
        line("timeout_secs", fmt_f64(self.timeout.as_secs_f64()));
        match self.system.kind {
            SystemKind::SingleSpin { drive, b0 } => {
                line("system.kind", q("single-spin"));
                line("system.drive", q(drive.label()));
                line("system.b0", fmt_f64(b0));
            }
            SystemKind::TwoSpin {
                coupling,
                flip_flop_scale,
                control,
            } => {
                line("system.kind", q("two-spin"));
                line("system.coupling", q(coupling.label()));
                line("system.flip_flop_scale", fmt_f64(flip_flop_scale));
                line(
                    "system.control",
                    q(match control {
                        TwoSpinControl::ParticleLabel => "particle-label",
                        TwoSpinControl::SlotSymmetric => "slot-symmetric",
                    }),
                );
            }
        }
        line("system.tau", fmt_f64(self.system.tau));
        line("system.n_steps", self.system.n_steps.to_string());
        line("system.beta", fmt_f64(self.system.beta));
        let p = &self.policy;
        line("policy.approach", q(p.approach.label()));
        match &p.architecture {
            Architecture::Dense { hidden } => {
                line("policy.architecture", q("dense"));
                line("policy.hidden", format!("{hidden:?}"));
            }
            Architecture::Lstm { units, head } => {
                line("policy.architecture", q("lstm"));
                line("policy.lstm_units", units.to_string());
                line("policy.lstm_head", head.to_string());
            }
        }
        line("policy.sigma", fmt_f64(p.sigma));
        line("policy.epsilon", fmt_f64(p.epsilon));
        line("policy.mu_star", fmt_f64(p.mu_star));
        line("policy.batch_size", p.batch_size.to_string());
        line("policy.n_epochs", p.n_epochs.to_string());
        line("policy.epsilon_cutoff_epochs", p.epsilon_cutoff_epochs.to_string());
        line("policy.eta", fmt_f64(p.eta));
        line("policy.momentum", fmt_f64(p.momentum));
        line("policy.updates_per_epoch", p.updates_per_epoch.to_string());
        line("policy.clip_actions", p.clip_actions.to_string());
        line("policy.reward_baseline", p.reward_baseline.to_string());
        line("sweep.beta_min", fmt_f64(self.sweep.beta_min));
        line("sweep.beta_max", fmt_f64(self.sweep.beta_max));
        line("sweep.points", self.sweep.points.to_string());
        line("random_search.samples", self.random_search_samples.to_string());
        line("grad_check.trials", self.grad_check_trials.to_string());
        s
    }

    /// SHA-256 of the canonical text without seeds and output location,
    /// so runs of one configuration share a hash.
    pub fn hash(&self) -> String {
        let mut c = self.clone();
        c.seeds = vec![0];
        c.output_dir = None;
        let digest = Sha256::digest(c.to_text().as_bytes());
        digest.iter().take(8).map(|b| format!("{b:02x}")).collect()
    }
}

/// TOML float literal that round-trips.
fn fmt_f64(v: f64) -> String {
    let s = format!("{v:?}");
    if s.contains(['.', 'e', 'E']) || !v.is_finite() {
        s
    } else {
        format!("{s}.0")
    }
}

fn config_error(key: &str, line: Option<usize>, message: &str) -> Error {
    Error::Config {
        key: key.to_string(),
        line,
        message: message.to_string(),
    }
}

struct Entry {
    key: String,
    value: toml::Value,
    line: usize,
}

fn precedence(key: &str) -> u8 {
    match key {
        "system.kind" | "policy.approach" => 0,
        "policy.architecture" => 1,
        _ => 2,
    }
}

fn parse_entries(text: &str) -> Result<Vec<Entry>> {
    let mut entries: Vec<Entry> = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line_no = i + 1;
        let line = strip_comment(raw).trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| config_error(line, Some(line_no), "expected `key = value`"))?;
        let key = key.trim();
        if key.is_empty() || !key.chars().all(|c| c.is_ascii_alphanumeric() || c == '_' || c == '.') {
            return Err(config_error(key, Some(line_no), "malformed key"));
        }
        if let Some(prev) = entries.iter().find(|e| e.key == key) {
            return Err(config_error(key, Some(line_no), &format!("duplicate of line {}", prev.line)));
        }
        let table: toml::Table = format!("v = {}", value.trim())
            .parse()
            .map_err(|e: toml::de::Error| config_error(key, Some(line_no), e.message()))?;
        let value = table.get("v").cloned().expect("parsed table has the probe key");
        entries.push(Entry {
            key: key.to_string(),
            value,
            line: line_no,
        });
    }
    Ok(entries)
}

/// Drops a `#` comment unless it sits inside a double-quoted string.
fn strip_comment(line: &str) -> &str {
    let mut in_string = false;
    for (i, c) in line.char_indices() {
        match c {
            '"' => in_string = !in_string,
            '#' if !in_string => return &line[..i],
            _ => {}
        }
    }
    line
}

fn as_str(v: &toml::Value) -> std::result::Result<&str, String> {
    v.as_str().ok_or_else(|| format!("expected a string, got {v}"))
}

fn as_f64(v: &toml::Value) -> std::result::Result<f64, String> {
    match v {
        toml::Value::Float(f) => Ok(*f),
        toml::Value::Integer(i) => Ok(*i as f64),
        _ => Err(format!("expected a number, got {v}")),
    }
}

fn as_nonneg(v: &toml::Value) -> std::result::Result<f64, String> {
    let f = as_f64(v)?;
    if f >= 0.0 && f.is_finite() {
        Ok(f)
    } else {
        Err(format!("expected a non-negative number, got {f}"))
    }
}

fn as_usize(v: &toml::Value) -> std::result::Result<usize, String> {
    v.as_integer()
        .and_then(|i| usize::try_from(i).ok())
        .ok_or_else(|| format!("expected a non-negative integer, got {v}"))
}

fn as_bool(v: &toml::Value) -> std::result::Result<bool, String> {
    v.as_bool().ok_or_else(|| format!("expected true or false, got {v}"))
}

/// An integer list, or a half-open range string `"a..b"`.
fn parse_seeds(v: &toml::Value) -> std::result::Result<Vec<u64>, String> {
    match v {
        toml::Value::Array(a) => a
            .iter()
            .map(|x| x.as_integer().and_then(|i| u64::try_from(i).ok()).ok_or("seeds must be non-negative integers".to_string()))
            .collect(),
        toml::Value::String(s) => parse_seed_range(s),
        toml::Value::Integer(i) => u64::try_from(*i).map(|s| vec![s]).map_err(|e| e.to_string()),
        _ => Err(format!("expected a seed list or range, got {v}")),
    }
}

/// `"a..b"` (half-open) or a single integer.
pub fn parse_seed_range(s: &str) -> std::result::Result<Vec<u64>, String> {
    match s.split_once("..") {
        Some((a, b)) => {
            let a: u64 = a.trim().parse().map_err(|e| format!("bad range start: {e}"))?;
            let b: u64 = b.trim().parse().map_err(|e| format!("bad range end: {e}"))?;
            if b <= a {
                return Err(format!("empty seed range {s:?}"));
            }
            Ok((a..b).collect())
        }
        None => s.trim().parse().map(|v| vec![v]).map_err(|e| format!("bad seed: {e}")),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_text_gives_single_spin_defaults() {
        let cfg = ExperimentConfig::from_text("", None).unwrap();
        assert_eq!(cfg.experiment, ExperimentKind::SingleSpinA1);
        assert_eq!(cfg.system.n_steps, 10);
        assert_eq!(cfg.policy.mu_star, 3.0);
        assert_eq!(cfg.policy.sigma, 1.0);
        assert_eq!(cfg.policy.epsilon, 0.1);
        assert_eq!(cfg.policy.batch_size, 30);
        assert_eq!(cfg.policy.n_epochs, 300);
        assert_eq!(cfg.policy.epsilon_cutoff_epochs, 100);
        assert_eq!(cfg.system.beta, 1.0);
    }

    #[test]
    fn two_spin_presets_use_larger_bound() {
        for k in [ExperimentKind::TwoSpinStep, ExperimentKind::TwoSpinSmooth, ExperimentKind::BetaSweep] {
            let cfg = ExperimentConfig::preset(k);
            assert_eq!(cfg.policy.mu_star, 5.0);
            assert_eq!(cfg.policy.approach, Approach::LstmTimeOnly);
        }
    }

    #[test]
    fn overrides_apply_in_precedence_order() {
        let text = r#"
            # comment line
            policy.lstm_units = 8     # trailing comment
            policy.approach = "lstm-time-only"
            experiment = "single-spin-a1"
            system.beta = 0.5
            seeds = "3..6"
            policy.hidden_unused_check = 1
        "#;
        let err = ExperimentConfig::from_text(text, None).unwrap_err();
        assert!(matches!(err, Error::Config { ref key, line: Some(8), .. } if key == "policy.hidden_unused_check"), "{err}");

        let text = text.replace("policy.hidden_unused_check = 1", "");
        let cfg = ExperimentConfig::from_text(&text, None).unwrap();
        assert_eq!(cfg.policy.architecture, Architecture::Lstm { units: 8, head: 30 });
        assert_eq!(cfg.system.beta, 0.5);
        assert_eq!(cfg.seeds, vec![3, 4, 5]);
    }

    #[test]
    fn errors_carry_key_and_line() {
        let err = ExperimentConfig::from_text("policy.sigma = \"wide\"", None).unwrap_err();
        assert!(matches!(err, Error::Config { line: Some(1), .. }));
        let err = ExperimentConfig::from_text("\nsystem.drive = \"sine\"", Some(ExperimentKind::TwoSpinStep)).unwrap_err();
        assert!(matches!(err, Error::Config { line: Some(2), .. }));
        let err = ExperimentConfig::from_text("policy.eta = 1\npolicy.eta = 2", None).unwrap_err();
        assert!(err.to_string().contains("duplicate"));
        assert!(ExperimentConfig::from_text("no equals sign", None).is_err());
        assert!(ExperimentConfig::from_text("policy.epsilon = 2.0", None).is_err());
    }

    #[test]
    fn canonical_text_round_trips() {
        for k in ExperimentKind::ALL {
            let mut cfg = ExperimentConfig::preset(k);
            cfg.seeds = vec![4, 7];
            cfg.policy.eta = 0.1 + 0.2;
            let back = ExperimentConfig::from_text(&cfg.to_text(), None).unwrap();
            assert_eq!(back, cfg, "{}", k.label());
        }
    }

    #[test]
    fn hash_ignores_seeds_but_not_parameters() {
        let a = ExperimentConfig::preset(ExperimentKind::SingleSpinA1);
        let mut b = a.clone();
        b.seeds = vec![1, 2, 3];
        assert_eq!(a.hash(), b.hash());
        b.policy.eta *= 2.0;
        assert_ne!(a.hash(), b.hash());
    }

    #[test]
    fn sweep_grid_includes_both_ends() {
        let betas = ExperimentConfig::preset(ExperimentKind::BetaSweep).sweep.betas();
        assert_eq!(betas.len(), 20);
        assert_eq!(betas[0], 0.1);
        assert!((betas[19] - 2.1).abs() < 1e-15);
    }

    #[test]
    fn seed_ranges() {
        assert_eq!(parse_seed_range("0..3").unwrap(), vec![0, 1, 2]);
        assert_eq!(parse_seed_range("5").unwrap(), vec![5]);
        assert!(parse_seed_range("3..3").is_err());
    }
}
