//! Run configuration file.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::Projection;
use crate::calibration::Coefficients;
use crate::engine::{CaParams, Disturbance, DEFAULT_BETA, DEFAULT_P_THRESHOLD};
use crate::error::{Error, Result};
use crate::neighbors::{DistanceMode, DEFAULT_RADIUS_M};
use crate::scenario::{ScenarioKind, DEFAULT_HORIZON_YEARS};

/// Every knob a run depends on. Missing keys take their defaults; unknown
/// keys are rejected.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub scenario: ScenarioKind,
    pub horizon_years: u32,
    pub beta: f64,
    pub p_threshold: f64,
    pub seed: u64,
    pub disturbance: Disturbance,
    /// Coefficients JSON; the built-in defaults are used when absent.
    pub coefficients_path: Option<PathBuf>,
    /// `city_id,rate` table, required for the custom scenario.
    pub custom_rates_path: Option<PathBuf>,
    pub radius_m: f64,
    pub distance_mode: DistanceMode,
    /// A parcel is excluded when any single exclusion polygon covers more
    /// than this fraction of it.
    pub exclusion_overlap_threshold: f64,
    pub projection: Projection,
    /// Calendar year of the initial state; step `t` is reported as `base_year + t`.
    pub base_year: i32,
    /// Density normalizer. Defaults to the largest raw density in the input.
    pub max_density: Option<f64>,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            scenario: ScenarioKind::Bau,
            horizon_years: DEFAULT_HORIZON_YEARS,
            beta: DEFAULT_BETA,
            p_threshold: DEFAULT_P_THRESHOLD,
            seed: 0,
            disturbance: Disturbance::On,
            coefficients_path: None,
            custom_rates_path: None,
            radius_m: DEFAULT_RADIUS_M,
            distance_mode: DistanceMode::Boundary,
            exclusion_overlap_threshold: 0.5,
            projection: Projection::default(),
            base_year: 2012,
            max_density: None,
        }
    }
}

impl RunConfig {
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let cfg: RunConfig = serde_json::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.radius_m.is_finite() && self.radius_m > 0.0) {
            return Err(Error::Config(format!("radius_m must be positive, got {}", self.radius_m)));
        }
        if !(0.0..=1.0).contains(&self.exclusion_overlap_threshold) {
            return Err(Error::Config("exclusion_overlap_threshold must lie in [0, 1]".into()));
        }
        if let Some(m) = self.max_density {
            if !(m.is_finite() && m > 0.0) {
                return Err(Error::Config("max_density must be positive".into()));
            }
        }
        if self.scenario == ScenarioKind::Custom && self.custom_rates_path.is_none() {
            return Err(Error::Config("custom scenario requires custom_rates_path".into()));
        }
        self.ca_params(Coefficients::default()).validate()
    }

    pub fn ca_params(&self, coefficients: Coefficients<f64>) -> CaParams<f64> {
        CaParams {
            coefficients,
            beta: self.beta,
            p_threshold: self.p_threshold,
            rng_seed: self.seed,
            disturbance: self.disturbance,
        }
    }

    /// Coefficients from `coefficients_path`, or the defaults.
    pub fn coefficients(&self) -> Result<Coefficients<f64>> {
        match &self.coefficients_path {
            Some(p) => super::load_coefficients(p),
            None => Ok(Coefficients::default()),
        }
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("config serializes");
        s.push('\n');
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_roundtrip() {
        let c = RunConfig::default();
        let back: RunConfig = serde_json::from_str(&c.to_json()).unwrap();
        assert_eq!(c, back);
        c.validate().unwrap();
    }

    #[test]
    fn partial_and_unknown_keys() {
        let c: RunConfig = serde_json::from_str(r#"{"scenario":"NTU","seed":9}"#).unwrap();
        assert_eq!(c.scenario, ScenarioKind::Ntu);
        assert_eq!(c.seed, 9);
        assert_eq!(c.radius_m, 500.0);
        assert!(serde_json::from_str::<RunConfig>(r#"{"sede":9}"#).is_err());
    }

    #[test]
    fn invalid_values() {
        let mut c = RunConfig { beta: 11.0, ..Default::default() };
        assert!(c.validate().is_err());
        c.beta = 1.0;
        c.scenario = ScenarioKind::Custom;
        assert!(c.validate().is_err());
    }
}
