//! Run configuration: a TOML file whose values command-line flags override.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use serde::Deserialize;

use lpvp_core::cr3bp::{self, Cr3bpConfig};
use lpvp_core::io::PlantSpec;
use lpvp_core::sim::NoiseDistribution;
use lpvp_core::{LpvPlant, NormOrder, PrecisionMapping, Scheduling};

/// Pole radius applied to the built-in plant unless configured otherwise.
pub const CR3BP_POLE_RADIUS: f64 = 30.0;

#[derive(Debug, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub plant: PlantSection,
    pub cr3bp: Cr3bpSection,
    pub synthesis: SynthesisSection,
    pub simulation: SimulationSection,
    pub output: OutputSection,
}

#[derive(Debug, Default, Deserialize, Clone, Copy, PartialEq, Eq)]
#[serde(rename_all = "lowercase")]
pub enum PlantSource {
    #[default]
    Cr3bp,
    File,
}

#[derive(Debug, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PlantSection {
    pub source: PlantSource,
    /// Plant TOML, relative to the config file.
    pub path: Option<PathBuf>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Cr3bpSection {
    pub pi2: Option<f64>,
    pub m1: Option<f64>,
    pub m2: Option<f64>,
    pub r12: Option<f64>,
    pub initial_state: Option<[f64; 4]>,
    /// Radius of the near-circular orbit about the larger primary, used when
    /// no initial state is given.
    pub orbit_radius: Option<f64>,
    pub t_final: Option<f64>,
    pub dt: Option<f64>,
    pub box_margin: Option<f64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthesisSection {
    pub norm: Option<String>,
    pub gamma: Option<f64>,
    pub gammas: Option<Vec<f64>>,
    pub p: Option<String>,
    pub eps: Option<f64>,
    pub mapping: Option<PrecisionMapping>,
    pub pole_radius: Option<f64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimulationSection {
    pub noise_deg: Option<f64>,
    pub distribution: Option<NoiseDistribution>,
    pub seed: Option<u64>,
    pub init_offset: Option<f64>,
    pub scheduling: Option<Scheduling>,
    pub prune_inactive: Option<bool>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputSection {
    pub dir: Option<PathBuf>,
}

impl RunConfig {
    pub fn load(path: Option<&Path>) -> Result<(Self, PathBuf)> {
        let Some(path) = path else {
            return Ok((Self::default(), PathBuf::from(".")));
        };
        let text = std::fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
        let cfg: RunConfig = toml::from_str(&text).with_context(|| format!("parsing config {}", path.display()))?;
        let base = path.parent().map(Path::to_path_buf).unwrap_or_else(|| PathBuf::from("."));
        Ok((cfg, base))
    }

    pub fn cr3bp_config(&self) -> Result<Cr3bpConfig> {
        let s = &self.cr3bp;
        let mut cfg = Cr3bpConfig::default();
        cfg.pi2 = match (s.pi2, s.m1, s.m2) {
            (Some(_), Some(_), _) | (Some(_), _, Some(_)) => bail!("give either pi2 or m1/m2, not both"),
            (Some(p), None, None) => p,
            (None, Some(m1), Some(m2)) => cr3bp::mass_ratio(m1, m2)?,
            (None, None, None) => cfg.pi2,
            _ => bail!("m1 and m2 must be given together"),
        };
        if let Some(r) = s.r12 {
            cfg.r12 = r;
        }
        match (s.initial_state, s.orbit_radius) {
            (Some(_), Some(_)) => bail!("give either initial_state or orbit_radius, not both"),
            (Some(x0), None) => cfg.initial_state = x0,
            (None, r) => {
                let (x0, period) = cr3bp::near_circular_orbit(cfg.pi2, r.unwrap_or(0.4));
                cfg.initial_state = x0;
                cfg.t_final = period;
            }
        }
        if let Some(t) = s.t_final {
            cfg.t_final = t;
        }
        if let Some(dt) = s.dt {
            cfg.dt = dt;
        }
        if let Some(m) = s.box_margin {
            cfg.box_margin = m;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn plant(&self, base: &Path) -> Result<LpvPlant> {
        match self.plant.source {
            PlantSource::Cr3bp => Ok(cr3bp::cr3bp_plant(&self.cr3bp_config()?)?),
            PlantSource::File => {
                let rel = self.plant.path.as_ref().context("plant.path is required for a file plant")?;
                let path = base.join(rel);
                let text =
                    std::fs::read_to_string(&path).with_context(|| format!("reading plant {}", path.display()))?;
                let spec: PlantSpec =
                    toml::from_str(&text).with_context(|| format!("parsing plant {}", path.display()))?;
                Ok(spec.build()?)
            }
        }
    }

    pub fn default_pole_radius(&self) -> Option<f64> {
        match (self.synthesis.pole_radius, self.plant.source) {
            (Some(r), _) if r > 0.0 => Some(r),
            (Some(_), _) => None,
            (None, PlantSource::Cr3bp) => Some(CR3BP_POLE_RADIUS),
            (None, PlantSource::File) => None,
        }
    }

    pub fn p(&self) -> Result<NormOrder> {
        Ok(self.synthesis.p.as_deref().unwrap_or("1").parse()?)
    }
}
