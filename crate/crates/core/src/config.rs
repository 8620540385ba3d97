//! Run configuration shared by the command-line tools.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::family::{default_payloads, FamilySpec, FrfFormat};
use crate::mu::profile::{GRID_HI_HZ, GRID_LO_HZ, GRID_POINTS, MODAL_POINTS, MODAL_SPREAD};
use crate::mu::ProfileOptions;
use crate::synthesis::{ParamBounds, SynthesisOptions};
use crate::uncertainty::{UncertaintyOptions, Variant};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GridConfig {
    pub lo_hz: f64,
    pub hi_hz: f64,
    pub points: usize,
    /// Extra points placed across `±modal_spread` of each nominal mode.
    pub modal_points: usize,
    pub modal_spread: f64,
}

impl Default for GridConfig {
    fn default() -> Self {
        Self {
            lo_hz: GRID_LO_HZ,
            hi_hz: GRID_HI_HZ,
            points: GRID_POINTS,
            modal_points: MODAL_POINTS,
            modal_spread: MODAL_SPREAD,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FrfConfig {
    /// Relative noise floor in dB; `None` writes exact responses.
    pub noise_db: Option<f64>,
    pub format: FrfFormat,
}

impl Default for FrfConfig {
    fn default() -> Self {
        Self {
            noise_db: None,
            format: FrfFormat::ReIm,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EnvelopeConfig {
    pub n_random: usize,
    pub include_vertices: bool,
}

impl Default for EnvelopeConfig {
    fn default() -> Self {
        Self {
            n_random: 200,
            include_vertices: true,
        }
    }
}

/// Process-sensitivity weight; notch centres default to the nominal
/// third and fourth modes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct WeightConfig {
    pub low_freq_bound_db: f64,
    pub rolloff_slope_db: f64,
    pub corner_hz: f64,
    pub flatten_ratio: f64,
    pub notch_hz: Option<Vec<f64>>,
    pub notch_depth_db: f64,
    pub notch_width: f64,
}

impl Default for WeightConfig {
    fn default() -> Self {
        Self {
            low_freq_bound_db: 18.0,
            rolloff_slope_db: -40.0,
            corner_hz: 1000.0,
            flatten_ratio: 100.0,
            notch_hz: None,
            notch_depth_db: 15.0,
            notch_width: 0.1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthConfig {
    pub order: u32,
    /// Starting `|C(jω_c)|` when bounds are derived from the family.
    pub center_gain: f64,
    /// Explicit bounds; derived from the first-mode range when absent.
    pub bounds: Option<ParamBounds>,
    pub options: SynthesisOptions,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            order: 2,
            center_gain: 0.05,
            bounds: None,
            options: SynthesisOptions::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub seed: u64,
    pub family: FamilySpec,
    pub payloads: Vec<f64>,
    pub frf: FrfConfig,
    pub grid: GridConfig,
    pub variant: Variant,
    pub uncertainty: UncertaintyOptions,
    pub envelope: EnvelopeConfig,
    pub weight: WeightConfig,
    pub synthesis: SynthConfig,
    pub profile: ProfileOptions,
    /// μ peak at or below which `synth` reports success.
    pub threshold: f64,
    /// Relative half-width of the band searched for the first-mode peak.
    pub damping_band: f64,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            seed: 1,
            family: FamilySpec::default(),
            payloads: default_payloads(),
            frf: FrfConfig::default(),
            grid: GridConfig::default(),
            variant: Variant::M31,
            uncertainty: UncertaintyOptions::default(),
            envelope: EnvelopeConfig::default(),
            weight: WeightConfig::default(),
            synthesis: SynthConfig::default(),
            profile: ProfileOptions::default(),
            threshold: 1.0,
            damping_band: crate::evaluation::DEFAULT_SEARCH_BAND,
        }
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let cfg: Self = serde_json::from_str(&text)
            .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        self.family.validate().map_err(|e| Error::Config(e.to_string()))?;
        if self.payloads.is_empty() {
            return Err(Error::Config("payloads must not be empty".into()));
        }
        let g = &self.grid;
        if !(g.lo_hz > 0.0 && g.hi_hz > g.lo_hz && g.points >= 2 && g.modal_spread >= 0.0 && g.modal_spread < 1.0) {
            return Err(Error::Config("grid needs 0 < lo_hz < hi_hz, points >= 2, spread in [0, 1)".into()));
        }
        if let Some(db) = self.frf.noise_db {
            if !(db.is_finite() && db <= 0.0) {
                return Err(Error::Config(format!("noise_db {db} must be <= 0")));
            }
        }
        if let Some(b) = &self.synthesis.bounds {
            b.validate()?;
            if b.initial.order != self.synthesis.order {
                return Err(Error::Config("bounds.initial.order differs from synthesis.order".into()));
            }
        }
        if self.synthesis.order == 0 || !(self.synthesis.center_gain > 0.0) {
            return Err(Error::Config("synthesis order and center_gain must be positive".into()));
        }
        if self.synthesis.options.restarts == 0 || self.synthesis.options.max_evals_per_restart == 0 {
            return Err(Error::Config("synthesis needs at least one restart and evaluation".into()));
        }
        if !(self.threshold > 0.0) {
            return Err(Error::Config("threshold must be positive".into()));
        }
        if !(self.damping_band > 0.0 && self.damping_band < 1.0) {
            return Err(Error::Config("damping_band must lie in (0, 1)".into()));
        }
        Ok(())
    }

    /// First 16 hex digits of the SHA-256 of the canonical JSON form.
    pub fn hash(&self) -> String {
        let json = serde_json::to_vec(self).expect("config always serializes");
        hex::encode(Sha256::digest(&json))[..16].to_string()
    }
}
