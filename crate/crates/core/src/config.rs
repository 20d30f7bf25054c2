use serde::{Deserialize, Serialize};

use crate::error::CoreError;
use crate::flow::Channel;

/// How per-sample results are combined into one dataset-level score.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Aggregation {
    /// Average raw values over samples, then score the average.
    #[default]
    MeanRaw,
    /// Score each sample, then average the scores.
    MeanScore,
}

/// Evaluation parameters shared by all metrics.
///
/// Viscosity is always `1 / Re` and time derivatives are zero; neither is
/// configurable.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvalConfig {
    /// Lower edge of the boundary-layer SDF band.
    pub band_lo: f64,
    /// Upper edge of the boundary-layer SDF band.
    pub band_hi: f64,
    pub mse_min: f64,
    pub mse_max: f64,
    /// Channels averaged by M1 and M2.
    pub channels: Vec<Channel>,
    /// Extra node rings excluded around the geometry for residual stencils.
    pub exclusion_halo: usize,
    pub aggregation: Aggregation,
    /// Shift mask-derived distances by half a cell so the zero level sits
    /// between opposite-phase nodes.
    pub interface_calibration: bool,
}

impl Default for EvalConfig {
    fn default() -> Self {
        EvalConfig {
            band_lo: 0.0,
            band_hi: 0.2,
            mse_min: 1e-6,
            mse_max: 1.0,
            channels: Channel::ALL.to_vec(),
            exclusion_halo: 1,
            aggregation: Aggregation::MeanRaw,
            interface_calibration: true,
        }
    }
}

impl EvalConfig {
    pub fn validate(&self) -> Result<(), CoreError> {
        if !(self.band_lo >= 0.0 && self.band_lo < self.band_hi) {
            return Err(CoreError::InvalidConfig(format!(
                "band must satisfy 0 <= lo < hi, got [{}, {}]",
                self.band_lo, self.band_hi
            )));
        }
        if !(self.mse_min > 0.0 && self.mse_min < self.mse_max && self.mse_max.is_finite()) {
            return Err(CoreError::InvalidConfig(format!(
                "MSE bounds must satisfy 0 < min < max, got [{}, {}]",
                self.mse_min, self.mse_max
            )));
        }
        if self.channels.is_empty() {
            return Err(CoreError::InvalidConfig("no channels selected".into()));
        }
        let mut seen = self.channels.clone();
        seen.sort();
        seen.dedup();
        if seen.len() != self.channels.len() {
            return Err(CoreError::InvalidConfig("duplicate channel".into()));
        }
        Ok(())
    }

    /// Channels in canonical u, v, p order.
    pub fn ordered_channels(&self) -> Vec<Channel> {
        Channel::ALL.into_iter().filter(|c| self.channels.contains(c)).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_are_valid() {
        let c = EvalConfig::default();
        c.validate().unwrap();
        assert_eq!((c.band_lo, c.band_hi), (0.0, 0.2));
        assert_eq!((c.mse_min, c.mse_max), (1e-6, 1.0));
        assert_eq!(c.exclusion_halo, 1);
    }

    #[test]
    fn rejects_bad_band_and_bounds() {
        let c = EvalConfig { band_lo: 0.3, band_hi: 0.2, ..Default::default() };
        assert!(c.validate().is_err());
        let c = EvalConfig { mse_min: 0.0, ..Default::default() };
        assert!(c.validate().is_err());
        let c = EvalConfig { channels: vec![Channel::U, Channel::U], ..Default::default() };
        assert!(c.validate().is_err());
    }

    #[test]
    fn partial_json_fills_defaults() {
        let c: EvalConfig = serde_json::from_str(r#"{"band_hi": 0.1, "channels": ["u"]}"#).unwrap();
        assert_eq!(c.band_hi, 0.1);
        assert_eq!(c.channels, vec![Channel::U]);
        assert_eq!(c.exclusion_halo, 1);
        assert!(serde_json::from_str::<EvalConfig>(r#"{"bogus": 1}"#).is_err());
    }
}
