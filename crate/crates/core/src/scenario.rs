//! Macro scenarios: one annual urban-expansion rate per city, turned into
//! yearly target urban areas.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::Point;
use crate::scalar::Scalar;

/// Years between the two urban-area observations in a [`CityRecord`].
pub const OBSERVATION_SPAN_YEARS: i32 = 5;
pub const DEFAULT_HORIZON_YEARS: u32 = 5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum AdminLevel {
    /// Municipality directly under the central government.
    MD,
    /// Sub-provincial city.
    SPC,
    /// Other provincial capital city.
    OPCC,
    /// Prefecture-level city.
    PLC,
    /// County-level city.
    CLC,
}

impl AdminLevel {
    pub const ALL: [AdminLevel; 5] = [AdminLevel::MD, AdminLevel::SPC, AdminLevel::OPCC, AdminLevel::PLC, AdminLevel::CLC];

    pub fn as_str(self) -> &'static str {
        match self {
            AdminLevel::MD => "MD",
            AdminLevel::SPC => "SPC",
            AdminLevel::OPCC => "OPCC",
            AdminLevel::PLC => "PLC",
            AdminLevel::CLC => "CLC",
        }
    }
}

impl std::str::FromStr for AdminLevel {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        AdminLevel::ALL
            .into_iter()
            .find(|l| l.as_str() == s)
            .ok_or_else(|| format!("unknown admin level '{s}' (expected MD|SPC|OPCC|PLC|CLC)"))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound(deserialize = "T: Scalar + Deserialize<'de>"))]
pub struct CityRecord<T: Scalar> {
    pub city_id: String,
    pub name: String,
    pub admin_level: AdminLevel,
    pub center: Point<T>,
    /// km²
    pub urban_area_2007: T,
    /// km²
    pub urban_area_2012: T,
    pub in_urban_agglomeration: bool,
}

impl<T: Scalar> CityRecord<T> {
    pub fn validate(&self) -> Result<()> {
        let loc = || format!("city {}", self.city_id);
        if !(self.urban_area_2007 > T::zero() && self.urban_area_2007.is_finite()) {
            return Err(Error::data(loc(), format!("area2007 must be positive, got {}", self.urban_area_2007)));
        }
        if !(self.urban_area_2012 > T::zero() && self.urban_area_2012.is_finite()) {
            return Err(Error::data(loc(), format!("area2012 must be positive, got {}", self.urban_area_2012)));
        }
        if !self.center.is_finite() {
            return Err(Error::data(loc(), "center is not finite"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum ScenarioKind {
    /// Business as usual: each city keeps its observed compound growth rate.
    Bau,
    /// Urban-agglomeration oriented: fixed rates by agglomeration membership.
    Uao,
    /// New-type urbanization: rates by city size class.
    Ntu,
    /// Per-city rates supplied by the user.
    Custom,
}

impl ScenarioKind {
    pub fn as_str(self) -> &'static str {
        match self {
            ScenarioKind::Bau => "BAU",
            ScenarioKind::Uao => "UAO",
            ScenarioKind::Ntu => "NTU",
            ScenarioKind::Custom => "CUSTOM",
        }
    }
}

impl std::str::FromStr for ScenarioKind {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s.to_ascii_uppercase().as_str() {
            "BAU" => Ok(ScenarioKind::Bau),
            "UAO" => Ok(ScenarioKind::Uao),
            "NTU" => Ok(ScenarioKind::Ntu),
            "CUSTOM" => Ok(ScenarioKind::Custom),
            _ => Err(format!("unknown scenario '{s}' (expected BAU|UAO|NTU|CUSTOM)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound(deserialize = "T: Scalar + Deserialize<'de>"))]
pub struct ScenarioSpec<T: Scalar> {
    pub kind: ScenarioKind,
    pub horizon_years: u32,
    /// Only consulted for [`ScenarioKind::Custom`].
    #[serde(default)]
    pub custom_rates: BTreeMap<String, T>,
}

impl<T: Scalar> ScenarioSpec<T> {
    pub fn new(kind: ScenarioKind) -> Self {
        ScenarioSpec { kind, horizon_years: DEFAULT_HORIZON_YEARS, custom_rates: BTreeMap::new() }
    }

    pub fn custom(rates: BTreeMap<String, T>) -> Self {
        ScenarioSpec { kind: ScenarioKind::Custom, horizon_years: DEFAULT_HORIZON_YEARS, custom_rates: rates }
    }

    pub fn with_horizon(mut self, years: u32) -> Self {
        self.horizon_years = years;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.horizon_years < 1 {
            return Err(Error::Config("horizon_years must be at least 1".into()));
        }
        for (city, &r) in &self.custom_rates {
            check_rate(r).map_err(|m| Error::Config(format!("custom rate for {city}: {m}")))?;
        }
        Ok(())
    }

    /// Annual rate for one city under this scenario.
    pub fn rate(&self, city: &CityRecord<T>) -> Result<T> {
        let r = match self.kind {
            ScenarioKind::Bau => bau_rate(city)?,
            ScenarioKind::Uao => uao_rate(city),
            ScenarioKind::Ntu => ntu_rate(city),
            ScenarioKind::Custom => *self
                .custom_rates
                .get(&city.city_id)
                .ok_or_else(|| Error::Config(format!("custom scenario has no rate for city {}", city.city_id)))?,
        };
        check_rate(r).map_err(|m| Error::data(format!("city {}", city.city_id), m))?;
        Ok(r)
    }
}

fn check_rate<T: Scalar>(r: T) -> std::result::Result<(), String> {
    if r.is_finite() && r > -T::one() {
        Ok(())
    } else {
        Err(format!("rate {r} must be finite and greater than -1"))
    }
}

/// Compound annual growth between the two observed urban areas.
pub fn bau_rate<T: Scalar>(c: &CityRecord<T>) -> Result<T> {
    if !(c.urban_area_2007 > T::zero()) || !(c.urban_area_2012 > T::zero()) {
        return Err(Error::data(format!("city {}", c.city_id), "urban areas must be positive"));
    }
    let ratio = c.urban_area_2012 / c.urban_area_2007;
    Ok(ratio.powf(T::one() / T::lit(OBSERVATION_SPAN_YEARS as f64)) - T::one())
}

pub fn uao_rate<T: Scalar>(c: &CityRecord<T>) -> T {
    if c.in_urban_agglomeration {
        T::lit(0.05)
    } else {
        T::lit(0.04)
    }
}

/// Size-class rate on the 2012 urban area; class upper bounds are inclusive.
pub fn ntu_rate<T: Scalar>(c: &CityRecord<T>) -> T {
    let a = c.urban_area_2012;
    if a > T::lit(400.0) {
        T::lit(0.03)
    } else if a > T::lit(200.0) {
        T::lit(0.04)
    } else if a > T::lit(100.0) {
        T::lit(0.05)
    } else {
        T::lit(0.06)
    }
}

/// Target urban area for years `1..=horizon`: `A₂₀₁₂ · (1 + r)^t`.
pub fn target_areas<T: Scalar>(c: &CityRecord<T>, rate: T, horizon_years: u32) -> Vec<T> {
    (1..=horizon_years as i32).map(|t| c.urban_area_2012 * (T::one() + rate).powi(t)).collect()
}

/// Mean of per-city BAU rates and the compound rate of the summed areas.
/// The two differ whenever city growth is uneven.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BauRateStatistics {
    pub mean_city_rate: f64,
    pub aggregate_rate: f64,
}

pub fn bau_rate_statistics<T: Scalar>(cities: &[CityRecord<T>]) -> Result<BauRateStatistics> {
    if cities.is_empty() {
        return Err(Error::UndefinedMetric("no cities".into()));
    }
    let mut sum = 0.0;
    for c in cities {
        sum += bau_rate(c)?.as_f64();
    }
    let a07: f64 = cities.iter().map(|c| c.urban_area_2007.as_f64()).sum();
    let a12: f64 = cities.iter().map(|c| c.urban_area_2012.as_f64()).sum();
    Ok(BauRateStatistics {
        mean_city_rate: sum / cities.len() as f64,
        aggregate_rate: (a12 / a07).powf(1.0 / OBSERVATION_SPAN_YEARS as f64) - 1.0,
    })
}
