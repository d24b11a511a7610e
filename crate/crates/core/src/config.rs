//! Scenario configuration.
//!
//! One TOML file fully determines a run. Every key is optional; missing keys
//! take the defaults below and are listed in the report as defaulted. The
//! config hash is the lowercase hex SHA-256 of the canonical TOML rendering
//! of the fully defaulted config, so formatting and key order in the source
//! file do not affect it.
//!
//! Reporting conventions (never used in the dynamics): one moisture unit of
//! condensate is 1 mm of precipitation, and model temperature plus 273 is
//! kelvin.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::leakage::{
    free_space_path_loss_db, AntennaModel, ChannelSpec, DensityClass, EmissionMask, LinkBudget,
    TransmitterField,
};
use crate::nwp::{GridSetup, ModelParams};
use crate::radiance::{BiasModel, ForwardOperatorParams, Predictor};

/// The default sweep, dBW.
pub const DEFAULT_LEAKAGE_LEVELS: [f64; 7] = [-55.0, -45.0, -35.0, -30.0, -25.0, -20.0, -15.0];

/// How a sweep level is turned into leakage at the satellite.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LeakageSource {
    /// The level is the aggregate in-channel leakage power.
    Direct,
    /// The level is the per-device in-band EIRP of the transmitter field;
    /// the emission mask sets the in-channel fraction.
    Field,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ScenarioConfig {
    pub leakage_levels: Vec<f64>,
    pub leakage_source: LeakageSource,
    /// Model time units.
    pub forecast_length: f64,
    /// Lead time for the headline divergence metric, model time units.
    pub verification_lead: f64,
    pub ensemble_size: usize,
    pub seeds: Seeds,
    pub link: LinkConfig,
    pub antenna: AntennaConfig,
    pub mask: MaskConfig,
    pub field: FieldConfig,
    pub forward: ForwardOperatorParams,
    pub bias: BiasConfig,
    pub covariance: CovarianceConfig,
    pub observations: ObservationConfig,
    pub model: ModelParams,
    pub grid: GridConfig,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        Self {
            leakage_levels: DEFAULT_LEAKAGE_LEVELS.to_vec(),
            leakage_source: LeakageSource::Direct,
            forecast_length: 12.0,
            verification_lead: 1.0,
            ensemble_size: 20,
            seeds: Seeds::default(),
            link: LinkConfig::default(),
            antenna: AntennaConfig::default(),
            mask: MaskConfig::default(),
            field: FieldConfig::default(),
            forward: ForwardOperatorParams::default(),
            bias: BiasConfig::default(),
            covariance: CovarianceConfig::default(),
            observations: ObservationConfig::default(),
            model: ModelParams::default(),
            grid: GridConfig::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Seeds {
    pub nature: u64,
    pub obs_noise: u64,
    pub init: u64,
}

impl Default for Seeds {
    fn default() -> Self {
        Self {
            nature: 20080205,
            obs_noise: 1200,
            init: 23800,
        }
    }
}

impl Seeds {
    /// `nature = n`, `obs_noise = n + 1`, `init = n + 2`.
    pub fn from_override(n: u64) -> Self {
        Self {
            nature: n,
            obs_noise: n.wrapping_add(1),
            init: n.wrapping_add(2),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LinkConfig {
    pub distance_km: f64,
    /// All-inclusive path loss after antenna and system gains, dB.
    pub pathloss_db: f64,
    pub absorption: f64,
    /// Replace `pathloss_db` by free-space loss at the victim centre frequency.
    pub free_space: bool,
}

impl Default for LinkConfig {
    fn default() -> Self {
        Self {
            distance_km: 800.0,
            pathloss_db: 130.0,
            absorption: 0.0,
            free_space: false,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AntennaConfig {
    pub loss_factor: f64,
    /// K
    pub physical_temperature: f64,
}

impl Default for AntennaConfig {
    fn default() -> Self {
        Self {
            loss_factor: 1.0,
            physical_temperature: 290.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MaskConfig {
    pub in_band_power_dbw: f64,
    /// `[offset_hz, psd_db]` pairs relative to the aggressor centre. Empty
    /// selects the built-in roll-off.
    pub breakpoints: Vec<[f64; 2]>,
}

impl Default for MaskConfig {
    fn default() -> Self {
        Self {
            in_band_power_dbw: 0.0,
            breakpoints: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FieldConfig {
    /// `metropolitan` (250 emitters) and `rural` (10) are illustrative
    /// presets, not measured densities; `custom` uses `count`.
    pub density_class: DensityClass,
    pub count: u64,
    pub elevation_gain_db: f64,
    pub footprint_side_km: f64,
}

impl Default for FieldConfig {
    fn default() -> Self {
        Self {
            density_class: DensityClass::Custom,
            count: 1,
            elevation_gain_db: 0.0,
            footprint_side_km: 48.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BiasConfig {
    pub predictors: Vec<String>,
    pub background_constant: f64,
    pub background_coefficients: Vec<f64>,
    /// Bias actually present in the synthetic observations.
    pub truth_constant: f64,
    pub truth_coefficients: Vec<f64>,
    pub hold_fixed: bool,
}

impl Default for BiasConfig {
    fn default() -> Self {
        Self {
            predictors: vec!["scan_position".into()],
            background_constant: 0.0,
            background_coefficients: vec![0.0],
            truth_constant: 0.5,
            truth_coefficients: vec![0.01],
            hold_fixed: false,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CovarianceConfig {
    /// Diagonal of B, state-units^2.
    pub state_variance: f64,
    /// Diagonal of B_beta.
    pub bias_variance: f64,
}

impl Default for CovarianceConfig {
    fn default() -> Self {
        Self {
            state_variance: 1.0,
            bias_variance: 0.5,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ObservationConfig {
    /// One radiance observation every `stride` grid points.
    pub stride: usize,
    /// K; R is diagonal with this variance.
    pub error_stddev: f64,
    /// Surface temperature = offset + model temperature, K.
    pub surface_offset: f64,
    /// Column temperature sits this far below the surface, K.
    pub lapse: f64,
}

impl Default for ObservationConfig {
    fn default() -> Self {
        Self {
            stride: 2,
            error_stddev: 0.3,
            surface_offset: 273.0,
            lapse: 40.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GridConfig {
    pub grid_size: usize,
    pub initial_moisture: f64,
    pub spinup_steps: usize,
}

impl Default for GridConfig {
    fn default() -> Self {
        Self {
            grid_size: 40,
            initial_moisture: 20.0,
            spinup_steps: 1000,
        }
    }
}

/// A validated config with the keys that were filled from defaults.
#[derive(Debug, Clone, PartialEq)]
pub struct LoadedConfig {
    pub config: ScenarioConfig,
    pub defaulted: Vec<String>,
}

pub fn load_config(path: &Path) -> Result<LoadedConfig> {
    let text = fs::read_to_string(path).map_err(|e| Error::Config {
        path: path.to_path_buf(),
        message: e.to_string(),
    })?;
    parse_config(&text).map_err(|e| match e {
        Error::Config { message, .. } => Error::Config {
            path: path.to_path_buf(),
            message,
        },
        other => other,
    })
}

pub fn parse_config(text: &str) -> Result<LoadedConfig> {
    let parse_err = |e: toml::de::Error| Error::Config {
        path: "<inline>".into(),
        message: e.to_string(),
    };
    let raw: toml::Table = toml::from_str(text).map_err(parse_err)?;
    let config: ScenarioConfig = toml::from_str(text).map_err(parse_err)?;
    config.validate()?;
    let full = toml::Table::try_from(&config).expect("config serializes to a table");
    let mut defaulted = Vec::new();
    collect_defaulted(&full, &raw, "", &mut defaulted);
    Ok(LoadedConfig { config, defaulted })
}

fn collect_defaulted(full: &toml::Table, given: &toml::Table, prefix: &str, out: &mut Vec<String>) {
    for (key, value) in full {
        let path = if prefix.is_empty() {
            key.clone()
        } else {
            format!("{prefix}.{key}")
        };
        match (value, given.get(key)) {
            (toml::Value::Table(sub), Some(toml::Value::Table(given_sub))) => {
                collect_defaulted(sub, given_sub, &path, out)
            }
            (toml::Value::Table(sub), None) => {
                collect_defaulted(sub, &toml::Table::new(), &path, out)
            }
            (_, None) => out.push(path),
            _ => {}
        }
    }
}

fn invalid(field: &str, reason: &str) -> Error {
    Error::validation(field, reason)
}

impl ScenarioConfig {
    pub fn validate(&self) -> Result<()> {
        if self.leakage_levels.is_empty() {
            return Err(invalid("leakage_levels", "must not be empty"));
        }
        if self.leakage_levels.iter().any(|l| !l.is_finite()) {
            return Err(invalid("leakage_levels", "must be finite"));
        }
        if self.leakage_levels.windows(2).any(|w| w[0] >= w[1]) {
            return Err(invalid(
                "leakage_levels",
                "must be sorted strictly ascending",
            ));
        }
        if self.ensemble_size < 1 {
            return Err(invalid("ensemble_size", "must be at least 1"));
        }
        if !(self.forecast_length >= 0.0) || !self.forecast_length.is_finite() {
            return Err(invalid("forecast_length", "must be finite and >= 0"));
        }
        if !(self.verification_lead >= 0.0) || self.verification_lead > self.forecast_length {
            return Err(invalid(
                "verification_lead",
                "must lie in [0, forecast_length]",
            ));
        }
        if self.grid.grid_size < 4 {
            return Err(invalid("grid.grid_size", "must be at least 4"));
        }
        if self.observations.stride == 0 {
            return Err(invalid("observations.stride", "must be positive"));
        }
        if !(self.observations.error_stddev > 0.0) {
            return Err(invalid("observations.error_stddev", "must be positive"));
        }
        if !(self.covariance.state_variance > 0.0) {
            return Err(invalid("covariance.state_variance", "must be positive"));
        }
        if !(self.covariance.bias_variance > 0.0) {
            return Err(invalid("covariance.bias_variance", "must be positive"));
        }
        let np = self.bias.predictors.len();
        if self.bias.background_coefficients.len() != np {
            return Err(invalid(
                "bias.background_coefficients",
                "length must match bias.predictors",
            ));
        }
        if self.bias.truth_coefficients.len() != np {
            return Err(invalid(
                "bias.truth_coefficients",
                "length must match bias.predictors",
            ));
        }
        self.predictors()?;
        self.forward.validate()?;
        self.model.validate()?;
        self.link_budget()?;
        self.antenna_model()?;
        self.emission_mask()?;
        self.transmitter_field(0.0).validate()?;
        Ok(())
    }

    pub fn predictors(&self) -> Result<Vec<Predictor>> {
        self.bias.predictors.iter().map(|p| p.parse()).collect()
    }

    pub fn background_bias(&self) -> Result<BiasModel> {
        BiasModel::new(
            self.bias.background_constant,
            self.bias.background_coefficients.clone(),
            self.predictors()?,
        )
    }

    pub fn truth_bias(&self) -> Result<BiasModel> {
        BiasModel::new(
            self.bias.truth_constant,
            self.bias.truth_coefficients.clone(),
            self.predictors()?,
        )
    }

    pub fn victim_channel(&self) -> ChannelSpec {
        ChannelSpec::amsu_channel1()
    }

    pub fn aggressor_channel(&self) -> ChannelSpec {
        ChannelSpec::n258()
    }

    pub fn link_budget(&self) -> Result<LinkBudget> {
        let l = &self.link;
        let pathloss = if l.free_space {
            free_space_path_loss_db(l.distance_km, self.victim_channel().center_frequency)
        } else {
            l.pathloss_db
        };
        LinkBudget::with_absorption(l.distance_km, pathloss, l.absorption)
    }

    pub fn antenna_model(&self) -> Result<AntennaModel> {
        AntennaModel::from_loss_factor(self.antenna.loss_factor, self.antenna.physical_temperature)
    }

    pub fn emission_mask(&self) -> Result<EmissionMask> {
        if self.mask.breakpoints.is_empty() {
            let mut m = EmissionMask::default_for(&self.aggressor_channel());
            m.in_band_power = self.mask.in_band_power_dbw;
            return Ok(m);
        }
        EmissionMask::new(
            self.mask.breakpoints.iter().map(|p| (p[0], p[1])).collect(),
            self.mask.in_band_power_dbw,
        )
    }

    /// The configured field with every device at `eirp_dbw`.
    pub fn transmitter_field(&self, eirp_dbw: f64) -> TransmitterField {
        let count = match self.field.density_class {
            DensityClass::Metropolitan => TransmitterField::metropolitan().count,
            DensityClass::Rural => TransmitterField::rural().count,
            DensityClass::Custom => self.field.count,
        };
        TransmitterField {
            density_class: self.field.density_class,
            count,
            per_device_eirp: eirp_dbw,
            elevation_gain_toward_satellite: self.field.elevation_gain_db,
            footprint_side: self.field.footprint_side_km,
        }
    }

    pub fn grid_setup(&self) -> GridSetup {
        GridSetup {
            grid_size: self.grid.grid_size,
            initial_moisture: self.grid.initial_moisture,
        }
    }

    pub fn canonical_text(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn hash(&self) -> String {
        let digest = Sha256::digest(self.canonical_text().as_bytes());
        digest.iter().map(|b| format!("{b:02x}")).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_config_is_all_defaults() {
        let loaded = parse_config("").unwrap();
        assert_eq!(loaded.config, ScenarioConfig::default());
        assert!(loaded.defaulted.contains(&"leakage_levels".to_string()));
        assert!(loaded.defaulted.contains(&"seeds.nature".to_string()));
        assert!(loaded.defaulted.contains(&"model.dt".to_string()));
    }

    #[test]
    fn given_keys_are_not_defaulted() {
        let loaded = parse_config("ensemble_size = 3\n[seeds]\nnature = 5\n").unwrap();
        assert_eq!(loaded.config.ensemble_size, 3);
        assert!(!loaded.defaulted.contains(&"ensemble_size".to_string()));
        assert!(!loaded.defaulted.contains(&"seeds.nature".to_string()));
        assert!(loaded.defaulted.contains(&"seeds.init".to_string()));
    }

    #[test]
    fn unsorted_levels_name_the_field() {
        let err = parse_config("leakage_levels = [-20.0, -30.0]").unwrap_err();
        assert!(err.to_string().contains("leakage_levels"), "{err}");
        assert!(err.is_validation());
    }

    #[test]
    fn zero_ensemble_is_rejected() {
        let err = parse_config("ensemble_size = 0").unwrap_err();
        assert!(err.to_string().contains("ensemble_size"));
    }

    #[test]
    fn parse_errors_carry_location() {
        let err = parse_config("ensemble_size = \n").unwrap_err();
        assert!(err.to_string().contains("line 1"), "{err}");
        let err = parse_config("[model]\nforcng = 8.0\n").unwrap_err();
        assert!(err.to_string().contains("forcng"), "{err}");
    }

    #[test]
    fn unknown_predictor_fails_at_load() {
        let err = parse_config("[bias]\npredictors = [\"lapse\"]\nbackground_coefficients=[0.0]\ntruth_coefficients=[0.0]").unwrap_err();
        assert!(err.to_string().contains("lapse"));
    }

    #[test]
    fn hash_ignores_formatting() {
        let a = parse_config("ensemble_size = 3").unwrap().config;
        let b = parse_config("# comment\nensemble_size    =   3\n")
            .unwrap()
            .config;
        assert_eq!(a.hash(), b.hash());
        assert_eq!(a.hash().len(), 64);
        assert_ne!(a.hash(), ScenarioConfig::default().hash());
    }

    #[test]
    fn canonical_text_round_trips() {
        let c = ScenarioConfig::default();
        assert_eq!(parse_config(&c.canonical_text()).unwrap().config, c);
    }

    #[test]
    fn presets_override_count() {
        let c = parse_config("[field]\ndensity_class = \"metropolitan\"")
            .unwrap()
            .config;
        assert_eq!(c.transmitter_field(-43.0).count, 250);
    }
}
