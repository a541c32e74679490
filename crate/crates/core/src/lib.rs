//! Parcel-level urban expansion simulation with a constrained vector
//! cellular automaton.
//!
//! The pipeline: load parcels and cities ([`io`]), build the parcel
//! neighbor graph once ([`neighbors`]), compute parcel features and the
//! logistic local potential ([`calibration`]), resolve a macro scenario
//! into yearly city targets ([`scenario`]), run each city's automaton
//! ([`engine`]), and summarize or compare the outcome ([`metrics`]).
//!
//! Numeric code is generic over [`Scalar`] (`f32` or `f64`). The aliases
//! below fix the scalar to `f64`, which is what file I/O produces.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod calibration;
pub mod engine;
pub mod error;
pub mod geometry;
pub mod io;
pub mod metrics;
pub mod neighbors;
pub mod parcel;
pub mod scalar;
pub mod scenario;

pub use error::{Error, ErrorKind, Result};
pub use scalar::Scalar;

pub type Point = geometry::Point<f64>;
pub type Polygon = geometry::Polygon<f64>;
pub type ExclusionSet = geometry::ExclusionSet<f64>;
pub type SpatialIndex = geometry::SpatialIndex<f64>;
pub type ParcelRecord = parcel::ParcelRecord<f64>;
pub type ParcelSet = parcel::ParcelSet<f64>;
pub type CityRecord = scenario::CityRecord<f64>;
pub type ScenarioSpec = scenario::ScenarioSpec<f64>;
pub type FeatureVector = calibration::FeatureVector<f64>;
pub type Coefficients = calibration::Coefficients<f64>;
pub type CalibrationSample = calibration::CalibrationSample<f64>;
pub type CaParams = engine::CaParams<f64>;
pub type SimulationResult = engine::SimulationResult<f64>;
pub type ExpansionSet = metrics::ExpansionSet<f64>;

pub type PolygonF32 = geometry::Polygon<f32>;
pub type CoefficientsF32 = calibration::Coefficients<f32>;
pub type FeatureVectorF32 = calibration::FeatureVector<f32>;

pub use neighbors::NeighborGraph;
