//! Flat `key = value` scenario files.
//!
//! One setting per line, `#` starts a comment. List values are comma
//! separated. A `preset` line is applied before every other key regardless of
//! where it appears, so explicit keys always win over the preset.

use std::path::Path;

use crate::allocation::{BwWeighting, Strategy};
use crate::channel::RadialLaw;
use crate::error::{Error, Result};
use crate::phy::{CirMatrix, DataRate, Sensitivity};
use crate::sim::Scenario;

/// Above either bound a run needs the explicit paper-scale opt-in.
pub const DESK_MAX_NODES: usize = 1000;
pub const DESK_MAX_SIM_TIME: f64 = 7200.0;

/// Toggle and strategy bundles for the published studies.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Preset {
    /// Data-rate distribution alone: perfectly orthogonal SFs, no capture.
    Fig2,
    /// Main comparison with the full collision model.
    Fig4,
    /// Behaviour over distance; main-comparison model at 1000 nodes.
    Fig5,
    /// Cell radius study.
    Fig6,
    /// Node distribution study.
    Fig7,
}

impl Preset {
    pub fn parse(s: &str) -> Result<Self> {
        match s.trim() {
            "fig2" => Ok(Preset::Fig2),
            "fig4" => Ok(Preset::Fig4),
            "fig5" => Ok(Preset::Fig5),
            "fig6" => Ok(Preset::Fig6),
            "fig7" => Ok(Preset::Fig7),
            other => Err(Error::Config(format!("unknown preset `{other}` (fig2|fig4|fig5|fig6|fig7)"))),
        }
    }

    fn apply(self, cfg: &mut ExperimentConfig) {
        let s = &mut cfg.scenario;
        match self {
            Preset::Fig2 => {
                s.toggles.perfect_orthogonality = true;
                s.toggles.capture_enabled = false;
                cfg.strategies = vec![Strategy::FadrOneRegion, Strategy::EqualSf, Strategy::Adelantado];
            }
            Preset::Fig4 | Preset::Fig6 | Preset::Fig7 => {
                s.toggles.perfect_orthogonality = false;
                s.toggles.capture_enabled = true;
                cfg.strategies = vec![Strategy::FadrOneRegion, Strategy::Reynders, Strategy::Sn5];
            }
            Preset::Fig5 => {
                s.toggles.perfect_orthogonality = false;
                s.toggles.capture_enabled = true;
                s.n_nodes = 1000;
                cfg.strategies = vec![Strategy::FadrOneRegion, Strategy::Reynders];
            }
        }
    }
}

#[derive(Debug, Clone)]
pub struct ExperimentConfig {
    /// Base scenario; its `strategy` is replaced per run.
    pub scenario: Scenario,
    pub strategies: Vec<Strategy>,
    pub seeds: Vec<u64>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            scenario: Scenario::default(),
            strategies: vec![Strategy::FadrOneRegion],
            seeds: (0..5).collect(),
        }
    }
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut entries = Vec::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("line {}: expected key = value", i + 1)))?;
            entries.push((i + 1, key.trim().to_string(), value.trim().to_string()));
        }

        let mut cfg = ExperimentConfig::default();
        let presets: Vec<_> = entries.iter().filter(|(_, k, _)| k == "preset").collect();
        if presets.len() > 1 {
            return Err(Error::Config("preset given more than once".into()));
        }
        if let Some((_, _, v)) = presets.first() {
            Preset::parse(v)?.apply(&mut cfg);
        }
        for (line, key, value) in &entries {
            if key != "preset" {
                cfg.set(key, value).map_err(|e| {
                    let msg = match e {
                        Error::Config(m) => m,
                        other => other.to_string(),
                    };
                    Error::Config(format!("line {line}: {msg}"))
                })?;
            }
        }
        if cfg.strategies.is_empty() {
            return Err(Error::Config("strategy list is empty".into()));
        }
        if cfg.seeds.is_empty() {
            return Err(Error::Config("seed list is empty".into()));
        }
        cfg.scenario.strategy = cfg.strategies[0];
        cfg.scenario.validate()?;
        Ok(cfg)
    }

    /// Applies one setting.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let s = &mut self.scenario;
        match key {
            "nodes" => s.n_nodes = num(key, value)?,
            "packet_length" => s.packet_len = num(key, value)?,
            "transmission_rate" => s.mean_interval = num(key, value)?,
            "max_reception" => s.max_recv = num(key, value)?,
            "cell_radius" => s.radius = num(key, value)?,
            "channel_frequency" => {
                s.channels = list(value)
                    .map(|v| num::<f64>(key, v).map(|mhz| (mhz * 1e6).round() as u32))
                    .collect::<Result<_>>()?
            }
            "simulation_time" => s.sim_time = num(key, value)?,
            "random_seeds" => {
                let n: u64 = num(key, value)?;
                self.seeds = (0..n).collect();
            }
            "seeds" => self.seeds = list(value).map(|v| num(key, v)).collect::<Result<_>>()?,
            "strategy" => self.strategies = list(value).map(str::parse).collect::<Result<_>>()?,
            "distribution" => s.distribution = value.parse()?,
            "radial_law" => s.radial_law = value.parse::<RadialLaw>()?,
            "perfect_orthogonality" => s.toggles.perfect_orthogonality = flag(key, value)?,
            "capture_effect" => s.toggles.capture_enabled = flag(key, value)?,
            "pow_levels" => s.pow_levels = levels(value)?,
            "cir" => s.cir = cir(value)?,
            "sensitivity" => s.sensitivity = sensitivity(value)?,
            "d0" => s.propagation.d0 = num(key, value)?,
            "pl_d0" => s.propagation.pl_d0 = num(key, value)?,
            "gamma" => s.propagation.gamma = num(key, value)?,
            "shadowing_sigma" => s.propagation.shadowing_sigma = num(key, value)?,
            "deployed" => s.deployed = list(value).map(str::parse::<DataRate>).collect::<Result<_>>()?,
            "bw_weighting" => {
                s.bw_weighting = match value {
                    "linear" => BwWeighting::Linear,
                    "squared" => BwWeighting::Squared,
                    _ => return Err(Error::Config(format!("bw_weighting `{value}` (linear|squared)"))),
                }
            }
            "rssi_samples" => s.rssi_samples = num(key, value)?,
            "rssi_noise_sigma" => s.rssi_noise_sigma = num(key, value)?,
            "bin_width" => s.bin_width = Some(num(key, value)?),
            "preamble" => s.frame.preamble_syms = num(key, value)?,
            "ldro" => {
                s.frame.low_data_rate_opt = match value {
                    "auto" => None,
                    "on" => Some(true),
                    "off" => Some(false),
                    _ => return Err(Error::Config(format!("ldro `{value}` (auto|on|off)"))),
                }
            }
            _ => return Err(Error::Config(format!("unknown key `{key}`"))),
        }
        Ok(())
    }

    /// Refuses runs beyond desk scale unless `allowed`.
    pub fn check_scale(&self, allowed: bool) -> Result<()> {
        check_scale(&self.scenario, allowed)
    }
}

pub fn check_scale(s: &Scenario, allowed: bool) -> Result<()> {
    if !allowed && (s.n_nodes > DESK_MAX_NODES || s.sim_time > DESK_MAX_SIM_TIME) {
        return Err(Error::Config(format!(
            "{} nodes for {} s exceeds desk scale ({DESK_MAX_NODES} nodes, {DESK_MAX_SIM_TIME} s); pass --paper-scale",
            s.n_nodes, s.sim_time
        )));
    }
    Ok(())
}

fn list(value: &str) -> impl Iterator<Item = &str> {
    value.split(',').map(str::trim).filter(|v| !v.is_empty())
}

fn num<T: std::str::FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .trim()
        .parse()
        .map_err(|_| Error::Config(format!("`{key}`: cannot parse `{value}`")))
}

fn flag(key: &str, value: &str) -> Result<bool> {
    match value {
        "true" | "on" | "yes" | "1" => Ok(true),
        "false" | "off" | "no" | "0" => Ok(false),
        _ => Err(Error::Config(format!("`{key}`: expected true or false, got `{value}`"))),
    }
}

/// `2..14` (inclusive, 1 dB steps) or an explicit list.
fn levels(value: &str) -> Result<Vec<i32>> {
    if let Some((lo, hi)) = value.split_once("..") {
        let lo: i32 = num("pow_levels", lo)?;
        let hi: i32 = num("pow_levels", hi)?;
        return Ok((lo..=hi).collect());
    }
    list(value).map(|v| num("pow_levels", v)).collect()
}

/// One dB value for every pair, or 36 row-major values.
fn cir(value: &str) -> Result<CirMatrix> {
    let vals: Vec<f64> = list(value).map(|v| num("cir", v)).collect::<Result<_>>()?;
    match vals.len() {
        1 => CirMatrix::uniform(vals[0]),
        36 => {
            let mut m = [[0.0; 6]; 6];
            for (k, v) in vals.into_iter().enumerate() {
                m[k / 6][k % 6] = v;
            }
            CirMatrix::new(m)
        }
        n => Err(Error::Config(format!("cir needs 1 or 36 values, got {n}"))),
    }
}

/// `datasheet` or a single floor in dBm.
fn sensitivity(value: &str) -> Result<Sensitivity> {
    if value == "datasheet" {
        return Ok(Sensitivity::datasheet());
    }
    Ok(Sensitivity::Floor(num("sensitivity", value)?))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_table_keys() {
        let cfg = ExperimentConfig::parse(
            "# desk run\nnodes = 250\npacket_length = 80\ntransmission_rate = 60\nmax_reception = 8\n\
             cell_radius = 1600\nchannel_frequency = 868, 868.3\nsimulation_time = 3600\nrandom_seeds = 3\n\
             strategy = fadr-one-region, reynders\n",
        )
        .unwrap();
        assert_eq!(cfg.scenario.n_nodes, 250);
        assert_eq!(cfg.scenario.radius, 1600.0);
        assert_eq!(cfg.scenario.channels, vec![868_000_000, 868_300_000]);
        assert_eq!(cfg.seeds, vec![0, 1, 2]);
        assert_eq!(cfg.strategies, vec![Strategy::FadrOneRegion, Strategy::Reynders]);
    }

    #[test]
    fn explicit_keys_override_preset() {
        let cfg = ExperimentConfig::parse("capture_effect = true\npreset = fig2\n").unwrap();
        assert!(cfg.scenario.toggles.perfect_orthogonality);
        assert!(cfg.scenario.toggles.capture_enabled);
        assert_eq!(cfg.strategies.len(), 3);
    }

    #[test]
    fn value_forms() {
        let cfg = ExperimentConfig::parse("pow_levels = 2..5\ncir = 8\nsensitivity = datasheet\nseeds = 4, 9\n").unwrap();
        assert_eq!(cfg.scenario.pow_levels, vec![2, 3, 4, 5]);
        assert_eq!(cfg.scenario.cir.min(), 8.0);
        assert_eq!(cfg.seeds, vec![4, 9]);
        let cfg = ExperimentConfig::parse("pow_levels = 2, 5, 8, 11, 14\n").unwrap();
        assert_eq!(cfg.scenario.pow_levels, vec![2, 5, 8, 11, 14]);
    }

    #[test]
    fn errors_name_the_line() {
        let err = ExperimentConfig::parse("nodes = 10\nwidth = 3\n").unwrap_err().to_string();
        assert!(err.contains("line 2"), "{err}");
        assert!(ExperimentConfig::parse("nodes = ten\n").is_err());
        assert!(ExperimentConfig::parse("nodes 10\n").is_err());
        assert!(ExperimentConfig::parse("nodes = 0\n").is_err());
        assert!(ExperimentConfig::parse("strategy = aloha\n").is_err());
        assert!(ExperimentConfig::parse("cir = 1, 2\n").is_err());
    }

    #[test]
    fn scale_guard() {
        let cfg = ExperimentConfig::parse("nodes = 4000\n").unwrap();
        assert!(cfg.check_scale(false).is_err());
        assert!(cfg.check_scale(true).is_ok());
        let cfg = ExperimentConfig::parse("nodes = 1000\nsimulation_time = 7200\n").unwrap();
        assert!(cfg.check_scale(false).is_ok());
    }
}
