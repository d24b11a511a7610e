//! 23.8 GHz observation operator and its bias-corrected extension.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::leakage::ChannelSpec;

/// Column slice of the model state at an observation location.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ColumnState {
    /// Column-integrated water vapor, kg/m^2.
    pub water_vapor: f64,
    pub surface_temperature: f64,
    pub atmosphere_temperature: f64,
}

impl ColumnState {
    pub fn new(
        water_vapor: f64,
        surface_temperature: f64,
        atmosphere_temperature: f64,
    ) -> Result<Self> {
        let c = Self {
            water_vapor,
            surface_temperature,
            atmosphere_temperature,
        };
        if !(water_vapor >= 0.0) || !water_vapor.is_finite() {
            return Err(Error::validation(
                "column water_vapor",
                "must be finite and >= 0",
            ));
        }
        if !(surface_temperature > 0.0) || !(atmosphere_temperature > 0.0) {
            return Err(Error::validation("column temperatures", "must be positive"));
        }
        Ok(c)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ForwardOperatorParams {
    /// (kg/m^2)^-1
    pub opacity_coefficient: f64,
}

impl Default for ForwardOperatorParams {
    fn default() -> Self {
        Self {
            opacity_coefficient: 0.05,
        }
    }
}

impl ForwardOperatorParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.opacity_coefficient > 0.0) || !self.opacity_coefficient.is_finite() {
            return Err(Error::validation("opacity_coefficient", "must be positive"));
        }
        Ok(())
    }
}

/// Brightness temperature: surface emission attenuated by the vapor column
/// plus the column's own emission.
pub fn forward(state: &ColumnState, params: &ForwardOperatorParams) -> f64 {
    let t = (-params.opacity_coefficient * state.water_vapor).exp();
    state.surface_temperature * t + state.atmosphere_temperature * (1.0 - t)
}

/// d forward / d water_vapor.
pub fn forward_tangent(state: &ColumnState, params: &ForwardOperatorParams) -> f64 {
    let k = params.opacity_coefficient;
    k * (state.atmosphere_temperature - state.surface_temperature) * (-k * state.water_vapor).exp()
}

/// Partials of `forward` with respect to (surface, atmosphere) temperature.
pub(crate) fn forward_temperature_partials(
    state: &ColumnState,
    params: &ForwardOperatorParams,
) -> (f64, f64) {
    let t = (-params.opacity_coefficient * state.water_vapor).exp();
    (t, 1.0 - t)
}

/// Named bias predictor. The constant term is carried separately as beta_0.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Predictor {
    SurfaceTemperature,
    ScanPosition,
}

impl Predictor {
    pub fn name(&self) -> &'static str {
        match self {
            Predictor::SurfaceTemperature => "surface_temperature",
            Predictor::ScanPosition => "scan_position",
        }
    }

    pub fn value(&self, state: &ColumnState, obs: &RadianceObservation) -> f64 {
        match self {
            Predictor::SurfaceTemperature => state.surface_temperature,
            Predictor::ScanPosition => obs.scan_position,
        }
    }

    /// d value / d surface_temperature; no predictor depends on vapor or
    /// atmosphere temperature.
    pub(crate) fn surface_temperature_derivative(&self) -> f64 {
        match self {
            Predictor::SurfaceTemperature => 1.0,
            Predictor::ScanPosition => 0.0,
        }
    }
}

impl FromStr for Predictor {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "surface_temperature" => Ok(Predictor::SurfaceTemperature),
            "scan_position" => Ok(Predictor::ScanPosition),
            other => Err(Error::validation(
                "bias predictor",
                format!("unknown predictor `{other}` (known: surface_temperature, scan_position)"),
            )),
        }
    }
}

impl fmt::Display for Predictor {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// beta_0 + sum beta_i p_i, the linear radiance bias model.
#[derive(Debug, Clone, PartialEq)]
pub struct BiasModel {
    pub constant: f64,
    pub coefficients: Vec<f64>,
    pub predictors: Vec<Predictor>,
}

impl BiasModel {
    pub fn new(constant: f64, coefficients: Vec<f64>, predictors: Vec<Predictor>) -> Result<Self> {
        let b = Self {
            constant,
            coefficients,
            predictors,
        };
        b.validate()?;
        Ok(b)
    }

    /// Build from predictor names; unknown names fail here, never at evaluation.
    pub fn from_names<S: AsRef<str>>(
        constant: f64,
        coefficients: Vec<f64>,
        names: &[S],
    ) -> Result<Self> {
        let predictors = names
            .iter()
            .map(|n| n.as_ref().parse())
            .collect::<Result<Vec<Predictor>>>()?;
        Self::new(constant, coefficients, predictors)
    }

    pub fn zero(predictors: Vec<Predictor>) -> Self {
        Self {
            constant: 0.0,
            coefficients: vec![0.0; predictors.len()],
            predictors,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.coefficients.len() != self.predictors.len() {
            return Err(Error::Dimension {
                what: "bias coefficients",
                expected: self.predictors.len(),
                found: self.coefficients.len(),
            });
        }
        if !self.constant.is_finite() || self.coefficients.iter().any(|c| !c.is_finite()) {
            return Err(Error::validation("bias coefficients", "must be finite"));
        }
        Ok(())
    }

    /// `[beta_0, beta_1, ..]`, the bias part of the control vector.
    pub fn control(&self) -> Vec<f64> {
        std::iter::once(self.constant)
            .chain(self.coefficients.iter().copied())
            .collect()
    }

    pub fn with_control(&self, control: &[f64]) -> Self {
        Self {
            constant: control[0],
            coefficients: control[1..].to_vec(),
            predictors: self.predictors.clone(),
        }
    }

    pub fn control_len(&self) -> usize {
        1 + self.predictors.len()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RadianceObservation {
    pub channel: ChannelSpec,
    /// K
    pub value: f64,
    pub error_stddev: f64,
    pub scan_position: f64,
    /// Bookkeeping only: the leakage perturbation already included in `value`.
    pub applied_perturbation: f64,
}

impl RadianceObservation {
    pub fn new(value: f64, error_stddev: f64, scan_position: f64) -> Result<Self> {
        let o = Self {
            channel: ChannelSpec::amsu_channel1(),
            value,
            error_stddev,
            scan_position,
            applied_perturbation: 0.0,
        };
        o.validate()?;
        Ok(o)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.error_stddev > 0.0) {
            return Err(Error::validation(
                "observation error_stddev",
                "must be positive",
            ));
        }
        if !self.value.is_finite() {
            return Err(Error::validation("observation value", "must be finite"));
        }
        Ok(())
    }
}

pub fn predictors(state: &ColumnState, obs: &RadianceObservation, bias: &BiasModel) -> Vec<f64> {
    bias.predictors
        .iter()
        .map(|p| p.value(state, obs))
        .collect()
}

/// H(x) + beta_0 + sum beta_i p_i.
pub fn bias_corrected_forward(
    state: &ColumnState,
    bias: &BiasModel,
    obs: &RadianceObservation,
    params: &ForwardOperatorParams,
) -> f64 {
    let correction: f64 = bias
        .coefficients
        .iter()
        .zip(&bias.predictors)
        .map(|(b, p)| b * p.value(state, obs))
        .sum();
    forward(state, params) + bias.constant + correction
}
