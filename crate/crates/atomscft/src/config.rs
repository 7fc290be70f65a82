//! Run configuration shared by the CLI and the batch runner: a flat
//! key = value file format with the same keys reusable as command-line
//! overrides, applied in order (file first, flags second).

use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use crate::basis::{channels_to_string, parse_channels, ChannelSpec};
use crate::elements;
use crate::error::{Error, Result};
use crate::grid::GridSpec;
use crate::scf::ScfConfig;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    /// 0 means "not chosen yet"; validate() rejects it.
    pub z: u32,
    pub beta: f64,
    pub g0: f64,
    pub g0_per_pair: bool,
    pub mixing: f64,
    pub tol: f64,
    pub max_iter: usize,
    pub seed: u64,
    pub perturb: f64,
    pub eig_threshold: f64,
    /// Keep only the l = 0 channels of `channels`.
    pub spherical_only: bool,
    /// Check the propagator trace identity and coefficient sanity every
    /// iteration (test mode; adds per-iteration cost).
    pub validate_iterates: bool,
    pub channels: Vec<ChannelSpec>,
    /// Density-export grid; None sizes one to the basis.
    pub grid: Option<GridSpec>,
    pub out_dir: PathBuf,
    /// Append reference comparisons to the report.
    pub compare: bool,
    pub emit_heatmap: bool,
    pub emit_iteration_log: bool,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            z: 0,
            beta: 50.0,
            g0: 0.1,
            g0_per_pair: false,
            mixing: 0.1,
            tol: 1e-6,
            max_iter: 2000,
            seed: 1,
            perturb: 1e-3,
            eig_threshold: 1e-12,
            spherical_only: false,
            validate_iterates: false,
            channels: default_channels(),
            grid: None,
            out_dir: PathBuf::from("out"),
            compare: false,
            emit_heatmap: false,
            emit_iteration_log: false,
        }
    }
}

/// Desk-scale ladders: 60 s-rungs spanning 1e-15..1e11, plus p and d
/// channels with shallower spans. The spherical restriction drops the
/// angular channels at basis-build time, so both run families share one
/// channel list.
pub fn default_channels() -> Vec<ChannelSpec> {
    vec![
        ChannelSpec { l: 0, count: 60, c_min: 1e-15, c_max: 1e11 },
        ChannelSpec { l: 1, count: 20, c_min: 1e-10, c_max: 1e5 },
        ChannelSpec { l: 2, count: 10, c_min: 1e-6, c_max: 1e3 },
    ]
}

impl RunConfig {
    pub fn for_element(z: u32) -> Self {
        RunConfig { z, ..Self::default() }
    }

    /// Apply one key = value assignment. Keys match the config-file schema
    /// and the long CLI flags.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let v = value.trim();
        let bad = |what: &str| Error::Parse(format!("config key '{key}': bad {what} '{v}'"));
        match key {
            "element" => self.z = elements::parse_element(v)?,
            "beta" => self.beta = v.parse().map_err(|_| bad("number"))?,
            "g0" => self.g0 = v.parse().map_err(|_| bad("number"))?,
            "g0_per_pair" => self.g0_per_pair = parse_bool(v).ok_or_else(|| bad("bool"))?,
            "mixing" => self.mixing = v.parse().map_err(|_| bad("number"))?,
            "tol" => self.tol = v.parse().map_err(|_| bad("number"))?,
            "max_iter" => self.max_iter = v.parse().map_err(|_| bad("integer"))?,
            "seed" => self.seed = v.parse().map_err(|_| bad("integer"))?,
            "perturb" => self.perturb = v.parse().map_err(|_| bad("number"))?,
            "eig_threshold" => self.eig_threshold = v.parse().map_err(|_| bad("number"))?,
            "spherical_only" => self.spherical_only = parse_bool(v).ok_or_else(|| bad("bool"))?,
            "validate_iterates" => {
                self.validate_iterates = parse_bool(v).ok_or_else(|| bad("bool"))?
            }
            "basis" => self.channels = parse_channels(v)?,
            "grid" => {
                self.grid = if v == "auto" { None } else { Some(v.parse()?) };
            }
            "out" => self.out_dir = PathBuf::from(v),
            "compare" => self.compare = parse_bool(v).ok_or_else(|| bad("bool"))?,
            "heatmap" => self.emit_heatmap = parse_bool(v).ok_or_else(|| bad("bool"))?,
            "iteration_log" => {
                self.emit_iteration_log = parse_bool(v).ok_or_else(|| bad("bool"))?
            }
            _ => return Err(Error::Parse(format!("unknown config key '{key}'"))),
        }
        Ok(())
    }

    /// Apply a whole config file (# comments and blank lines allowed).
    pub fn apply_text(&mut self, text: &str) -> Result<()> {
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                Error::Parse(format!("config line {}: expected key = value", lineno + 1))
            })?;
            self.set(key.trim(), value)
                .map_err(|e| Error::Parse(format!("config line {}: {e}", lineno + 1)))?;
        }
        Ok(())
    }

    pub fn load(path: &std::path::Path) -> Result<Self> {
        let mut cfg = Self::default();
        cfg.apply_text(&std::fs::read_to_string(path)?)?;
        Ok(cfg)
    }

    /// The file form of this configuration; load()ing it reproduces self.
    pub fn to_kv_string(&self) -> String {
        let element = elements::symbol(self.z).unwrap_or("?");
        let grid = match &self.grid {
            None => "auto".to_string(),
            Some(g) => format!(
                "{}:{:e}:{:e}:{}:{}",
                g.n_radial, g.r_min, g.r_max, g.n_theta, g.n_phi
            ),
        };
        format!(
            "element = {element}\n\
             beta = {}\n\
             g0 = {}\n\
             g0_per_pair = {}\n\
             mixing = {}\n\
             tol = {:e}\n\
             max_iter = {}\n\
             seed = {}\n\
             perturb = {:e}\n\
             eig_threshold = {:e}\n\
             spherical_only = {}\n\
             validate_iterates = {}\n\
             basis = {}\n\
             grid = {grid}\n\
             out = {}\n\
             compare = {}\n\
             heatmap = {}\n\
             iteration_log = {}\n",
            self.beta,
            self.g0,
            self.g0_per_pair,
            self.mixing,
            self.tol,
            self.max_iter,
            self.seed,
            self.perturb,
            self.eig_threshold,
            self.spherical_only,
            self.validate_iterates,
            channels_to_string(&self.channels),
            self.out_dir.display(),
            self.compare,
            self.emit_heatmap,
            self.emit_iteration_log,
        )
    }

    /// Channels that actually enter the basis, after the spherical
    /// restriction.
    pub fn active_channels(&self) -> Result<Vec<ChannelSpec>> {
        let active: Vec<ChannelSpec> = if self.spherical_only {
            self.channels.iter().filter(|c| c.l == 0).copied().collect()
        } else {
            self.channels.clone()
        };
        if active.is_empty() {
            return Err(Error::InvalidConfig(
                "spherical_only with no l = 0 channels leaves an empty basis".into(),
            ));
        }
        Ok(active)
    }

    pub fn scf_config(&self) -> ScfConfig {
        ScfConfig {
            z: self.z,
            beta: self.beta,
            g0: self.g0,
            g0_per_pair: self.g0_per_pair,
            mixing_alpha: self.mixing,
            tol: self.tol,
            max_iter: self.max_iter,
            perturb_amplitude: self.perturb,
            perturb_seed: self.seed,
            spherical_only: self.spherical_only,
            eig_threshold: self.eig_threshold,
            validate_iterates: self.validate_iterates,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.z == 0 {
            return Err(Error::InvalidConfig(
                "no element selected (use element = <symbol|Z>)".into(),
            ));
        }
        self.active_channels()?;
        self.scf_config().validate()?;
        if let Some(g) = &self.grid {
            g.validate()?;
        }
        Ok(())
    }
}

fn parse_bool(v: &str) -> Option<bool> {
    match v {
        "true" | "1" | "yes" | "on" => Some(true),
        "false" | "0" | "no" | "off" => Some(false),
        _ => None,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_need_an_element() {
        let mut cfg = RunConfig::default();
        assert!(cfg.validate().is_err());
        cfg.set("element", "Be").unwrap();
        cfg.validate().unwrap();
        assert_eq!(cfg.z, 4);
    }

    #[test]
    fn file_round_trip() {
        let mut cfg = RunConfig::for_element(6);
        cfg.beta = 25.0;
        cfg.spherical_only = true;
        cfg.grid = Some(GridSpec { n_radial: 100, r_min: 1e-4, r_max: 30.0, n_theta: 8, n_phi: 16 });
        cfg.compare = true;
        let text = cfg.to_kv_string();
        let mut reparsed = RunConfig::default();
        reparsed.apply_text(&text).unwrap();
        assert_eq!(reparsed, cfg);
    }

    #[test]
    fn comments_and_overrides() {
        let mut cfg = RunConfig::default();
        cfg.apply_text(
            "# a comment\n\
             element = carbon   # inline comment\n\
             beta = 100\n\
             \n\
             basis = 0:12:1e-6:1e4, 1:6:1e-4:1e2\n",
        )
        .unwrap();
        assert_eq!(cfg.z, 6);
        assert_eq!(cfg.beta, 100.0);
        assert_eq!(cfg.channels.len(), 2);
        // later assignments win
        cfg.apply_text("beta = 50\n").unwrap();
        assert_eq!(cfg.beta, 50.0);
    }

    #[test]
    fn error_paths() {
        let mut cfg = RunConfig::default();
        assert!(cfg.set("element", "Xx").is_err());
        assert!(cfg.set("beta", "fast").is_err());
        assert!(cfg.set("warp", "9").is_err());
        assert!(cfg.apply_text("beta
50").is_err());
        // spherical restriction must leave something
        cfg.set("element", "H").unwrap();
        cfg.set("basis", "1:6:1e-4:1e2").unwrap();
        cfg.set("spherical_only", "true").unwrap();
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn grid_auto_and_explicit() {
        let mut cfg = RunConfig::default();
        cfg.set("grid", "auto").unwrap();
        assert_eq!(cfg.grid, None);
        cfg.set("grid", "200:1e-5:40:16:32").unwrap();
        assert_eq!(cfg.grid.unwrap().n_radial, 200);
        assert!(cfg.set("grid", "200:1e-5").is_err());
    }
}
