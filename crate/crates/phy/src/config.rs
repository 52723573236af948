use serde::{Deserialize, Serialize};

use crate::errors::ConfigError;

/// Converts a power level in dBm to watts.
pub fn dbm_to_watts(dbm: f64) -> f64 {
    1e-3 * 10f64.powf(dbm / 10.0)
}

/// Converts a power level in watts to dBm.
pub fn watts_to_dbm(watts: f64) -> f64 {
    10.0 * (watts / 1e-3).log10()
}

/// Parameters of the downlink SWIPT scenario: a base station at the origin
/// serving information receivers (IRs) while energy receivers (ERs) harvest
/// from the same transmission.
///
/// Defaults describe a 28 GHz small cell: a 4-antenna base station at 5 m
/// height, two 3-antenna IRs and two 3-antenna ERs dropped uniformly in a
/// 30 m x 30 m square, 43 dBm budget, -50 dBm noise.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScenarioConfig {
    /// Number of information receivers.
    pub num_ir: usize,
    /// Number of energy receivers.
    pub num_er: usize,
    /// Base-station antenna count.
    pub bs_antennas: usize,
    /// Antennas per information receiver.
    pub ir_antennas: usize,
    /// Antennas per energy receiver.
    pub er_antennas: usize,
    /// Base-station height above the receiver plane, metres.
    pub bs_height_m: f64,
    /// Half-widths of the drop region along x and y, metres.
    pub region_halfwidth_m: [f64; 2],
    /// Carrier frequency, Hz.
    pub carrier_hz: f64,
    /// Path-loss reference distance, metres.
    pub ref_distance_m: f64,
    /// Path loss at the reference distance, dB.
    pub ref_loss_db: f64,
    /// Path-loss exponent.
    pub pathloss_exp: f64,
    /// Lognormal shadowing standard deviation, dB.
    pub shadowing_std_db: f64,
    /// Rician K-factor, dB.
    pub rician_k_db: f64,
    /// Receiver noise power, watts.
    pub noise_power_w: f64,
    /// Transmit power budget, watts.
    pub max_power_w: f64,
    /// Minimum harvested power per energy receiver, watts.
    pub min_harvest_w: f64,
    /// RF-to-DC conversion efficiency, in (0, 1].
    pub eh_efficiency: f64,
    /// Data streams per information receiver.
    pub streams_per_ir: usize,
    /// Fixed receiver positions (IRs first, then ERs). When absent,
    /// positions are drawn uniformly over the region.
    pub positions: Option<Vec<[f64; 2]>>,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        ScenarioConfig {
            num_ir: 2,
            num_er: 2,
            bs_antennas: 4,
            ir_antennas: 3,
            er_antennas: 3,
            bs_height_m: 5.0,
            region_halfwidth_m: [15.0, 15.0],
            carrier_hz: 28e9,
            ref_distance_m: 1.0,
            ref_loss_db: 30.0,
            pathloss_exp: 3.5,
            shadowing_std_db: 6.0,
            rician_k_db: 6.0,
            noise_power_w: dbm_to_watts(-50.0),
            max_power_w: dbm_to_watts(43.0),
            min_harvest_w: 0.5e-7,
            eh_efficiency: 1.0,
            streams_per_ir: 1,
            positions: None,
        }
    }
}

impl ScenarioConfig {
    /// Rician K-factor on a linear scale.
    pub fn rician_k_linear(&self) -> f64 {
        10f64.powf(self.rician_k_db / 10.0)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        fn err(field: &'static str, reason: impl Into<String>) -> Result<(), ConfigError> {
            Err(ConfigError::InvalidParameter {
                field,
                reason: reason.into(),
            })
        }
        if self.num_ir == 0 {
            return err("num_ir", "at least one information receiver required");
        }
        if self.bs_antennas == 0 || self.ir_antennas == 0 {
            return err("bs_antennas", "antenna counts must be positive");
        }
        if self.num_er > 0 && self.er_antennas == 0 {
            return err("er_antennas", "energy receivers need at least one antenna");
        }
        if self.streams_per_ir == 0 {
            return err("streams_per_ir", "at least one stream per receiver");
        }
        if self.streams_per_ir > self.ir_antennas.min(self.bs_antennas) {
            return err(
                "streams_per_ir",
                "cannot exceed min(ir_antennas, bs_antennas)",
            );
        }
        if !(self.bs_height_m > 0.0) {
            return err("bs_height_m", "must be positive");
        }
        if !(self.region_halfwidth_m[0] > 0.0 && self.region_halfwidth_m[1] > 0.0) {
            return err("region_halfwidth_m", "must be positive");
        }
        if !(self.carrier_hz > 0.0) {
            return err("carrier_hz", "must be positive");
        }
        if !(self.ref_distance_m > 0.0) {
            return err("ref_distance_m", "must be positive");
        }
        if !(self.pathloss_exp > 0.0) {
            return err("pathloss_exp", "must be positive");
        }
        if !(self.shadowing_std_db >= 0.0) {
            return err("shadowing_std_db", "must be non-negative");
        }
        if !self.rician_k_db.is_finite() {
            return err("rician_k_db", "must be finite");
        }
        if !(self.noise_power_w > 0.0) {
            return err("noise_power_w", "must be positive");
        }
        if !(self.max_power_w > 0.0) {
            return err("max_power_w", "must be positive");
        }
        if !(self.min_harvest_w >= 0.0) {
            return err("min_harvest_w", "must be non-negative");
        }
        if !(self.eh_efficiency > 0.0 && self.eh_efficiency <= 1.0) {
            return err("eh_efficiency", "must lie in (0, 1]");
        }
        if let Some(pos) = &self.positions {
            if pos.len() != self.num_ir + self.num_er {
                return err(
                    "positions",
                    "must list one entry per receiver (IRs then ERs)",
                );
            }
        }
        Ok(())
    }
}
