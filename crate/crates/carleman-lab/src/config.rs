//! Experiment configuration: a hand-editable TOML file with nested
//! sections; every CLI flag overrides the corresponding key.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::domain::coeffs::PRESET_NAMES;
use crate::domain::{DomainSpec, SpatialDomain};
use crate::error::{Error, Result};
use crate::geometry::GEOMETRY_KINDS;

pub const EXPERIMENT_KINDS: [&str; 4] =
    ["simulate", "carleman-verify", "uc-demo", "geometry-check"];

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DomainSection {
    pub spatial_lo: f64,
    pub spatial_hi: f64,
    pub t_max: f64,
    pub a_max: f64,
    pub tau_min: f64,
    pub tau_max: f64,
}

impl Default for DomainSection {
    fn default() -> Self {
        DomainSection {
            spatial_lo: 0.0,
            spatial_hi: 1.0,
            t_max: 1.0,
            a_max: 1.0,
            tau_min: 0.0,
            tau_max: 1.0,
        }
    }
}

impl DomainSection {
    pub fn to_spec(&self) -> DomainSpec {
        DomainSpec {
            spatial: SpatialDomain::Interval {
                lo: self.spatial_lo,
                hi: self.spatial_hi,
            },
            t_max: self.t_max,
            a_max: self.a_max,
            tau_min: self.tau_min,
            tau_max: self.tau_max,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GeometrySection {
    /// Catalog entry: unit-ball | unit-interval | interval-gamma.
    pub kind: String,
    pub epsilon: f64,
    /// Level-count parameter N; 0 means "pick via suggest_n".
    pub n: usize,
    pub lambda: f64,
    pub omega0_lo: f64,
    pub omega0_hi: f64,
    /// Center p = (t0, a0, tau0) of the phase-space localization.
    pub center: [f64; 3],
}

impl Default for GeometrySection {
    fn default() -> Self {
        GeometrySection {
            kind: "unit-interval".into(),
            epsilon: 0.25,
            n: 10,
            lambda: 1.0,
            omega0_lo: 0.35,
            omega0_hi: 0.65,
            center: [0.5, 0.5, 0.5],
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepSection {
    pub s_list: Vec<f64>,
    pub lambda_list: Vec<f64>,
    pub divergence_factor: f64,
    pub bumps: usize,
    /// Weight base from the verification catalog.
    pub weight: String,
    pub beta_w: f64,
    pub weight_center: [f64; 3],
}

impl Default for SweepSection {
    fn default() -> Self {
        SweepSection {
            s_list: vec![4.0, 8.0, 16.0, 32.0, 64.0],
            lambda_list: vec![1.0, 2.0, 4.0],
            divergence_factor: 1.5,
            bumps: 8,
            weight: "affine-sweep".into(),
            beta_w: 0.2,
            weight_center: [0.5, 0.5, 0.5],
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct UcSection {
    pub s: f64,
    pub alpha: f64,
    pub noise: f64,
    /// Alpha used for the noisy reconstruction pass.
    pub noise_alpha: f64,
}

impl Default for UcSection {
    fn default() -> Self {
        UcSection {
            s: 8.0,
            alpha: 1e-6,
            noise: 0.01,
            noise_alpha: 1e-3,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    /// simulate | carleman-verify | uc-demo | geometry-check. The
    /// subcommand name wins over this key.
    pub kind: String,
    pub domain: DomainSection,
    /// One value (all axes) or four `[x, t, a, tau]` node counts.
    pub resolution: Vec<usize>,
    /// Coefficient preset name.
    pub preset: String,
    /// Optional CSV with `tau,value` rows replacing the preset's reaction.
    pub reaction_csv: Option<String>,
    pub geometry: GeometrySection,
    pub sweep: SweepSection,
    pub uc: UcSection,
    pub out: String,
    pub seed: u64,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            kind: "geometry-check".into(),
            domain: DomainSection::default(),
            resolution: vec![17, 17, 17, 17],
            preset: "constant".into(),
            reaction_csv: None,
            geometry: GeometrySection::default(),
            sweep: SweepSection::default(),
            uc: UcSection::default(),
            out: "out".into(),
            seed: 0,
        }
    }
}

impl ExperimentConfig {
    pub fn from_toml_str(s: &str) -> Result<ExperimentConfig> {
        let cfg: ExperimentConfig =
            toml::from_str(s).map_err(|e| Error::Config(format!("bad config: {e}")))?;
        Ok(cfg)
    }

    pub fn from_path(path: &Path) -> Result<ExperimentConfig> {
        let body = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_toml_str(&body)
    }

    /// Node counts per axis `[x, t, a, tau]`.
    pub fn resolution4(&self) -> Result<[usize; 4]> {
        match self.resolution.as_slice() {
            [n] => Ok([*n; 4]),
            [a, b, c, d] => Ok([*a, *b, *c, *d]),
            other => Err(Error::Config(format!(
                "resolution takes 1 or 4 entries, got {}",
                other.len()
            ))),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !EXPERIMENT_KINDS.contains(&self.kind.as_str()) {
            return Err(Error::Config(format!(
                "unknown experiment kind '{}' (expected one of {:?})",
                self.kind, EXPERIMENT_KINDS
            )));
        }
        if !PRESET_NAMES.contains(&self.preset.as_str()) {
            return Err(Error::UnknownPreset(self.preset.clone()));
        }
        if !GEOMETRY_KINDS.contains(&self.geometry.kind.as_str()) {
            return Err(Error::Config(format!(
                "unknown geometry kind '{}' (expected one of {:?})",
                self.geometry.kind, GEOMETRY_KINDS
            )));
        }
        if let Some(p) = &self.reaction_csv {
            if !Path::new(p).exists() {
                return Err(Error::Config(format!("reaction CSV not found: {p}")));
            }
        }
        let res = self.resolution4()?;
        if res.iter().any(|&n| n < 3) {
            return Err(Error::Config(format!(
                "every axis needs at least 3 nodes, got {res:?}"
            )));
        }
        self.domain.to_spec().validate()?;
        for v in self
            .sweep
            .s_list
            .iter()
            .chain(&self.sweep.lambda_list)
            .chain([&self.uc.s, &self.uc.alpha, &self.sweep.divergence_factor])
        {
            if !(*v > 0.0) {
                return Err(Error::Config(format!(
                    "sweep/uc parameters must be positive, found {v}"
                )));
            }
        }
        Ok(())
    }
}

/// Parse comma-separated positive floats (for --s-list/--lambda-list).
pub fn parse_list(s: &str) -> Result<Vec<f64>> {
    let mut out = Vec::new();
    for part in s.split(',') {
        let v: f64 = part
            .trim()
            .parse()
            .map_err(|_| Error::Config(format!("bad list entry '{part}'")))?;
        out.push(v);
    }
    if out.is_empty() {
        return Err(Error::Config("empty list".into()));
    }
    Ok(out)
}

/// Parse `N` or `N,N,N,N` (for --resolution).
pub fn parse_resolution(s: &str) -> Result<Vec<usize>> {
    let mut out = Vec::new();
    for part in s.split(',') {
        let v: usize = part
            .trim()
            .parse()
            .map_err(|_| Error::Config(format!("bad resolution entry '{part}'")))?;
        out.push(v);
    }
    if out.len() != 1 && out.len() != 4 {
        return Err(Error::Config(format!(
            "resolution takes 1 or 4 entries, got {}",
            out.len()
        )));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_validate() {
        ExperimentConfig::default().validate().unwrap();
    }

    #[test]
    fn toml_round_trip() {
        let cfg = ExperimentConfig::default();
        let s = toml::to_string(&cfg).unwrap();
        let back = ExperimentConfig::from_toml_str(&s).unwrap();
        assert_eq!(back.preset, cfg.preset);
        assert_eq!(back.resolution, cfg.resolution);
    }

    #[test]
    fn partial_toml_fills_defaults() {
        let cfg = ExperimentConfig::from_toml_str(
            "kind = \"simulate\"\npreset = \"logistic-growth\"\n\n[geometry]\nepsilon = 0.2\n",
        )
        .unwrap();
        assert_eq!(cfg.kind, "simulate");
        assert_eq!(cfg.geometry.epsilon, 0.2);
        assert_eq!(cfg.geometry.kind, "unit-interval");
        cfg.validate().unwrap();
    }

    #[test]
    fn unknown_key_rejected() {
        assert!(ExperimentConfig::from_toml_str("nonsense = 3\n").is_err());
    }

    #[test]
    fn unknown_preset_named_in_error() {
        let mut cfg = ExperimentConfig::default();
        cfg.preset = "exotic".into();
        let err = cfg.validate().unwrap_err();
        assert!(err.to_string().contains("exotic"));
    }

    #[test]
    fn bad_kind_rejected() {
        let mut cfg = ExperimentConfig::default();
        cfg.kind = "frobnicate".into();
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn resolution_forms() {
        let mut cfg = ExperimentConfig::default();
        cfg.resolution = vec![9];
        assert_eq!(cfg.resolution4().unwrap(), [9, 9, 9, 9]);
        cfg.resolution = vec![9, 11, 13, 15];
        assert_eq!(cfg.resolution4().unwrap(), [9, 11, 13, 15]);
        cfg.resolution = vec![9, 11];
        assert!(cfg.resolution4().is_err());
    }

    #[test]
    fn list_parsing() {
        assert_eq!(parse_list("4, 8,16").unwrap(), vec![4.0, 8.0, 16.0]);
        assert!(parse_list("4,x").is_err());
        assert_eq!(parse_resolution("33").unwrap(), vec![33]);
        assert!(parse_resolution("3,3").is_err());
    }
}
