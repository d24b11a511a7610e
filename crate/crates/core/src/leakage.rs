//! Leakage chain: emission mask and transmitter field to received power at
//! the radiometer, induced noise temperature, and the brightness-temperature
//! error it produces.
//!
//! Public parameters are in dB / dBW; arithmetic is done in linear units and
//! converted only at the boundaries.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Boltzmann constant, J/K (CODATA 2018, exact).
pub const BOLTZMANN: f64 = 1.380_649e-23;

/// Speed of light, m/s.
pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;

/// PSD at or below this level (dB relative to in-band) carries no power.
pub const MASK_FLOOR_DB: f64 = -300.0;

pub fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

pub fn linear_to_db(linear: f64) -> f64 {
    10.0 * linear.log10()
}

/// A contiguous frequency channel.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChannelSpec {
    pub center_frequency: f64,
    pub bandwidth: f64,
    pub f_low: f64,
    pub f_high: f64,
}

impl ChannelSpec {
    pub fn from_edges(f_low: f64, f_high: f64) -> Result<Self> {
        if !(f_low.is_finite() && f_high.is_finite()) {
            return Err(Error::validation("channel edges", "must be finite"));
        }
        if f_low >= f_high {
            return Err(Error::validation(
                "channel edges",
                format!("f_low ({f_low} Hz) must be below f_high ({f_high} Hz)"),
            ));
        }
        Ok(Self {
            center_frequency: 0.5 * (f_low + f_high),
            bandwidth: f_high - f_low,
            f_low,
            f_high,
        })
    }

    pub fn centered(center_frequency: f64, bandwidth: f64) -> Result<Self> {
        if !(bandwidth > 0.0) {
            return Err(Error::validation("channel bandwidth", "must be positive"));
        }
        let half = 0.5 * bandwidth;
        Ok(Self {
            center_frequency,
            bandwidth,
            f_low: center_frequency - half,
            f_high: center_frequency + half,
        })
    }

    /// AMSU-A channel 1: 23.8 GHz, 270 MHz wide.
    pub fn amsu_channel1() -> Self {
        Self::centered(23.8e9, 270e6).expect("constant channel is valid")
    }

    /// 3GPP band n258, 24.25 to 27.5 GHz.
    pub fn n258() -> Self {
        Self::from_edges(24.25e9, 27.5e9).expect("constant channel is valid")
    }

    pub fn validate(&self) -> Result<()> {
        let check = Self::from_edges(self.f_low, self.f_high)?;
        let tol = 1e-12 * self.f_high.abs().max(1.0);
        if (check.bandwidth - self.bandwidth).abs() > tol {
            return Err(Error::validation(
                "channel bandwidth",
                "must equal f_high - f_low",
            ));
        }
        Ok(())
    }
}

/// Aggressor power spectral density, piecewise linear in dB between
/// breakpoints. Offsets are relative to the aggressor's center frequency.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmissionMask {
    /// `(frequency_offset_hz, psd_db)` sorted strictly by offset.
    pub breakpoints: Vec<(f64, f64)>,
    pub in_band_power: f64,
}

impl EmissionMask {
    pub fn new(breakpoints: Vec<(f64, f64)>, in_band_power: f64) -> Result<Self> {
        let mask = Self {
            breakpoints,
            in_band_power,
        };
        mask.validate()?;
        Ok(mask)
    }

    /// Flat in-band plateau over `[-bandwidth/2, bandwidth/2]`, with a roll-off
    /// on either side loosely following 3GPP FR2 spurious-emission limits.
    pub fn default_for(aggressor: &ChannelSpec) -> Self {
        let h = 0.5 * aggressor.bandwidth;
        let skirt = [
            (2.5e9, -60.0),
            (0.8e9, -40.0),
            (0.4e9, -28.0),
            (0.1e9, -13.0),
        ];
        let mut bps: Vec<(f64, f64)> = skirt.iter().map(|&(d, db)| (-h - d, db)).collect();
        bps.push((-h, 0.0));
        bps.push((h, 0.0));
        bps.extend(skirt.iter().rev().map(|&(d, db)| (h + d, db)));
        Self {
            breakpoints: bps,
            in_band_power: 0.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.breakpoints.len() < 2 {
            return Err(Error::validation(
                "mask breakpoints",
                "need at least two breakpoints",
            ));
        }
        for &(f, db) in &self.breakpoints {
            if !f.is_finite() || !db.is_finite() {
                return Err(Error::validation("mask breakpoints", "must be finite"));
            }
        }
        if self.breakpoints.windows(2).any(|w| w[0].0 >= w[1].0) {
            return Err(Error::validation(
                "mask breakpoints",
                "offsets must be strictly increasing",
            ));
        }
        if !self.in_band_power.is_finite() {
            return Err(Error::validation("mask in_band_power", "must be finite"));
        }
        Ok(())
    }

    fn extent(&self, aggressor: &ChannelSpec) -> (f64, f64) {
        let c = aggressor.center_frequency;
        (
            c + self.breakpoints[0].0,
            c + self.breakpoints[self.breakpoints.len() - 1].0,
        )
    }

    /// Linear PSD at absolute frequency `f`, or `None` outside the mask.
    pub fn psd_linear(&self, aggressor: &ChannelSpec, f: f64) -> Option<f64> {
        let offset = f - aggressor.center_frequency;
        let bps = &self.breakpoints;
        if offset < bps[0].0 || offset > bps[bps.len() - 1].0 {
            return None;
        }
        let i = bps
            .partition_point(|&(o, _)| o <= offset)
            .clamp(1, bps.len() - 1);
        let (f0, d0) = bps[i - 1];
        let (f1, d1) = bps[i];
        let t = (offset - f0) / (f1 - f0);
        Some(level_to_power(d0 + t * (d1 - d0)))
    }

    /// Integrated linear power over absolute `[from, to]`, in units of
    /// (in-band PSD x Hz). The range must lie inside the mask.
    fn integrate(&self, aggressor: &ChannelSpec, from: f64, to: f64) -> f64 {
        let c = aggressor.center_frequency;
        self.breakpoints
            .windows(2)
            .map(|w| {
                let (o0, d0) = w[0];
                let (o1, d1) = w[1];
                let lo = (c + o0).max(from);
                let hi = (c + o1).min(to);
                if hi <= lo {
                    return 0.0;
                }
                // Clip the segment, interpolating dB at the cut points.
                let slope = (d1 - d0) / (o1 - o0);
                let a = d0 + slope * (lo - c - o0);
                let b = d0 + slope * (hi - c - o0);
                segment_power(a, b, hi - lo)
            })
            .sum()
    }
}

fn level_to_power(db: f64) -> f64 {
    if db <= MASK_FLOOR_DB {
        0.0
    } else {
        db_to_linear(db)
    }
}

/// Exact integral of `10^(db(t)/10)` for `db` linear from `a` to `b` over `width`.
fn segment_power(a: f64, b: f64, width: f64) -> f64 {
    if a <= MASK_FLOOR_DB && b <= MASK_FLOOR_DB {
        return 0.0;
    }
    let pa = db_to_linear(a);
    let pb = db_to_linear(b);
    let k = (b - a) * std::f64::consts::LN_10 / 10.0;
    if k.abs() < 1e-6 {
        // Logarithmic mean via series near equal endpoints.
        width * pa * (1.0 + k / 2.0 + k * k / 6.0 + k * k * k / 24.0)
    } else {
        width * (pb - pa) / k
    }
}

/// Fraction of the aggressor's total power that falls inside the victim channel.
pub fn aci_leakage_fraction(
    mask: &EmissionMask,
    aggressor: &ChannelSpec,
    victim: &ChannelSpec,
) -> Result<f64> {
    aggressor.validate()?;
    victim.validate()?;
    mask.validate()?;
    let (lo, hi) = mask.extent(aggressor);
    if victim.f_low < lo {
        return Err(Error::UndefinedMaskRegion {
            from_hz: victim.f_low,
            to_hz: lo.min(victim.f_high),
        });
    }
    if victim.f_high > hi {
        return Err(Error::UndefinedMaskRegion {
            from_hz: hi.max(victim.f_low),
            to_hz: victim.f_high,
        });
    }
    let total = mask.integrate(aggressor, lo, hi);
    if total <= 0.0 {
        return Err(Error::validation("emission mask", "carries no power"));
    }
    let inside = mask.integrate(aggressor, victim.f_low, victim.f_high);
    Ok((inside / total).clamp(0.0, 1.0))
}

/// Power of the aggressor that lands in the victim channel, dBW.
pub fn in_victim_power_dbw(
    mask: &EmissionMask,
    aggressor: &ChannelSpec,
    victim: &ChannelSpec,
) -> Result<LeakagePower> {
    let fraction = aci_leakage_fraction(mask, aggressor, victim)?;
    Ok(LeakagePower::from_linear(
        db_to_linear(mask.in_band_power) * fraction,
    ))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DensityClass {
    Metropolitan,
    Rural,
    Custom,
}

/// 5G emitters inside one sensor footprint.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransmitterField {
    pub density_class: DensityClass,
    pub count: u64,
    /// Effective leakage EIRP of one device, dBW.
    pub per_device_eirp: f64,
    pub elevation_gain_toward_satellite: f64,
    /// km
    pub footprint_side: f64,
}

impl TransmitterField {
    /// Illustrative preset, not a measured density: 250 emitters at -43 dBW.
    pub fn metropolitan() -> Self {
        Self {
            density_class: DensityClass::Metropolitan,
            count: 250,
            per_device_eirp: -43.0,
            elevation_gain_toward_satellite: 0.0,
            footprint_side: 48.0,
        }
    }

    /// Illustrative preset, not a measured density: 10 emitters at -43 dBW.
    pub fn rural() -> Self {
        Self {
            density_class: DensityClass::Rural,
            count: 10,
            ..Self::metropolitan()
        }
    }

    pub fn single(eirp_dbw: f64) -> Self {
        Self {
            density_class: DensityClass::Custom,
            count: 1,
            per_device_eirp: eirp_dbw,
            elevation_gain_toward_satellite: 0.0,
            footprint_side: 48.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.footprint_side > 0.0) {
            return Err(Error::validation(
                "field footprint_side",
                "must be positive",
            ));
        }
        if !self.per_device_eirp.is_finite() || !self.elevation_gain_toward_satellite.is_finite() {
            return Err(Error::validation(
                "field",
                "powers and gains must be finite",
            ));
        }
        Ok(())
    }
}

/// Aggregate leakage, with "nothing radiates" kept distinct from any dBW value.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum LeakagePower {
    None,
    Dbw(f64),
}

impl LeakagePower {
    pub fn from_linear(watts: f64) -> Self {
        if watts > 0.0 {
            LeakagePower::Dbw(linear_to_db(watts))
        } else {
            LeakagePower::None
        }
    }

    pub fn watts(&self) -> f64 {
        match *self {
            LeakagePower::None => 0.0,
            LeakagePower::Dbw(d) => db_to_linear(d),
        }
    }
}

impl From<f64> for LeakagePower {
    fn from(dbw: f64) -> Self {
        LeakagePower::Dbw(dbw)
    }
}

/// Incoherent sum of the field's in-channel leakage, referred toward the satellite.
pub fn aggregate_leakage_power(field: &TransmitterField, fraction: f64) -> Result<LeakagePower> {
    field.validate()?;
    if !(0.0..=1.0).contains(&fraction) {
        return Err(Error::validation("leakage fraction", "must lie in [0, 1]"));
    }
    if field.count == 0 || fraction == 0.0 {
        return Ok(LeakagePower::None);
    }
    let watts = field.count as f64 * db_to_linear(field.per_device_eirp) * fraction;
    Ok(LeakagePower::Dbw(
        linear_to_db(watts) + field.elevation_gain_toward_satellite,
    ))
}

/// Ground-to-satellite path.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LinkBudget {
    /// km; informational unless the loss is recomputed from free space.
    pub distance: f64,
    /// All-inclusive loss after antenna and system gains, dB.
    pub nominal_total_pathloss: f64,
    pub absorption_coefficient: f64,
    pub transmittance: f64,
}

impl Default for LinkBudget {
    fn default() -> Self {
        Self {
            distance: 800.0,
            nominal_total_pathloss: 130.0,
            absorption_coefficient: 0.0,
            transmittance: 1.0,
        }
    }
}

impl LinkBudget {
    /// Absorbed and transmitted fractions always sum to one.
    pub fn with_absorption(
        distance: f64,
        nominal_total_pathloss: f64,
        absorption: f64,
    ) -> Result<Self> {
        let link = Self {
            distance,
            nominal_total_pathloss,
            absorption_coefficient: absorption,
            transmittance: 1.0 - absorption,
        };
        link.validate()?;
        Ok(link)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.distance > 0.0) {
            return Err(Error::validation("link distance", "must be positive"));
        }
        if !(self.nominal_total_pathloss > 0.0) {
            return Err(Error::validation("link pathloss", "must be positive"));
        }
        let (a, t) = (self.absorption_coefficient, self.transmittance);
        if !(0.0..=1.0).contains(&a) || !(0.0..=1.0).contains(&t) {
            return Err(Error::validation("link absorption", "must lie in [0, 1]"));
        }
        if a + t != 1.0 {
            return Err(Error::validation(
                "link absorption",
                "absorption + transmittance must equal 1",
            ));
        }
        Ok(())
    }
}

/// Free-space path loss in dB for `distance_km` at `frequency_hz`.
pub fn free_space_path_loss_db(distance_km: f64, frequency_hz: f64) -> f64 {
    20.0 * (4.0 * std::f64::consts::PI * distance_km * 1e3 * frequency_hz / SPEED_OF_LIGHT).log10()
}

/// Power reaching the radiometer, W.
pub fn received_power(leakage: impl Into<LeakagePower>, link: &LinkBudget) -> Result<f64> {
    link.validate()?;
    Ok(match leakage.into() {
        LeakagePower::None => 0.0,
        LeakagePower::Dbw(dbw) => {
            db_to_linear(dbw - link.nominal_total_pathloss) * link.transmittance
        }
    })
}

/// Receiving antenna of the radiometer.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AntennaModel {
    pub radiation_efficiency: f64,
    /// K
    pub physical_temperature: f64,
    pub loss_factor: f64,
}

impl AntennaModel {
    pub fn from_loss_factor(loss_factor: f64, physical_temperature: f64) -> Result<Self> {
        if !(loss_factor >= 1.0) {
            return Err(Error::validation("antenna loss_factor", "must be >= 1"));
        }
        let a = Self {
            radiation_efficiency: 1.0 / loss_factor,
            physical_temperature,
            loss_factor,
        };
        a.validate()?;
        Ok(a)
    }

    pub fn from_efficiency(radiation_efficiency: f64, physical_temperature: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&radiation_efficiency) {
            return Err(Error::validation(
                "antenna efficiency",
                "must lie in [0, 1]",
            ));
        }
        let a = Self {
            radiation_efficiency,
            physical_temperature,
            loss_factor: 1.0 / radiation_efficiency,
        };
        a.validate()?;
        Ok(a)
    }

    pub fn validate(&self) -> Result<()> {
        let eta = self.radiation_efficiency;
        if !(0.0..=1.0).contains(&eta) {
            return Err(Error::validation(
                "antenna efficiency",
                "must lie in [0, 1]",
            ));
        }
        if !(self.physical_temperature > 0.0) || !self.physical_temperature.is_finite() {
            return Err(Error::validation(
                "antenna physical_temperature",
                "must be positive",
            ));
        }
        let inverse = 1.0 / self.loss_factor;
        if (eta - inverse).abs() > 1e-12 * eta.max(inverse).max(f64::MIN_POSITIVE) {
            return Err(Error::validation(
                "antenna efficiency",
                "must equal 1 / loss_factor",
            ));
        }
        Ok(())
    }
}

impl Default for AntennaModel {
    fn default() -> Self {
        Self::from_loss_factor(1.0, 290.0).expect("lossless antenna")
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseTemperature {
    /// K
    pub value: f64,
    /// W
    pub source_power: f64,
    /// Hz
    pub bandwidth: f64,
}

pub fn induced_noise_temperature(p_rx: f64, channel: &ChannelSpec) -> Result<NoiseTemperature> {
    if !(p_rx >= 0.0) || !p_rx.is_finite() {
        return Err(Error::validation(
            "received power",
            "must be finite and non-negative",
        ));
    }
    if !(channel.bandwidth > 0.0) {
        return Err(Error::validation("channel bandwidth", "must be positive"));
    }
    Ok(NoiseTemperature {
        value: p_rx / (BOLTZMANN * channel.bandwidth),
        source_power: p_rx,
        bandwidth: channel.bandwidth,
    })
}

/// Antenna temperature seen for scene brightness `t_b`.
pub fn antenna_temperature(t_b: f64, antenna: &AntennaModel) -> f64 {
    let eta = antenna.radiation_efficiency;
    eta * t_b + (1.0 - eta) * antenna.physical_temperature
}

/// Brightness error a retrieval unaware of the interference would report:
/// the antenna-temperature rise mapped back through the antenna efficiency,
/// with the physical temperature held fixed.
pub fn brightness_perturbation(noise: &NoiseTemperature, antenna: &AntennaModel) -> Result<f64> {
    if !(antenna.radiation_efficiency > 0.0) {
        return Err(Error::validation(
            "antenna efficiency",
            "perturbation undefined for zero radiation efficiency",
        ));
    }
    Ok(noise.value / antenna.radiation_efficiency)
}

/// Leakage level to brightness-temperature perturbation, end to end.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LeakageChain {
    pub received_watts: f64,
    pub noise: NoiseTemperature,
    pub delta_tb: f64,
}

pub fn leakage_chain(
    leakage: LeakagePower,
    link: &LinkBudget,
    channel: &ChannelSpec,
    antenna: &AntennaModel,
) -> Result<LeakageChain> {
    let received_watts = received_power(leakage, link)?;
    let noise = induced_noise_temperature(received_watts, channel)?;
    let delta_tb = brightness_perturbation(&noise, antenna)?;
    Ok(LeakageChain {
        received_watts,
        noise,
        delta_tb,
    })
}
