//! File formats, run configuration, manifests and the synthetic generator.

mod config;
mod features;
mod manifest;
pub mod projection;
pub mod synth;
mod tables;

pub use config::RunConfig;
pub use features::{
    exclusions_to_geojson, export_result, load_exclusions, load_export, load_parcels, parcels_to_geojson, result_to_geojson,
    summary_path, write_text, ExportedParcel, IngestReport, LoadOptions,
};
pub use manifest::{file_sha256, manifest_path, InputDigest, RunManifest, MANIFEST_SUFFIX};
pub use projection::Projection;
pub use synth::{generate_synthetic, planted_samples, DensityModel, SynthData, SynthSpec};
pub use tables::{
    admin_level_counts, cities_to_csv, coefficients_to_json, load_cities, load_coefficients, load_custom_rates, load_samples,
    samples_to_csv, CITY_HEADER, SAMPLE_HEADER,
};
