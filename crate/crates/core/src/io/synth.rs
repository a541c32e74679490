//! Synthetic countries for desk-scale testing.
//!
//! Each city is a jittered grid tessellation (neighboring parcels share
//! vertices exactly) with a compact urban core around its center.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::calibration::{local_potential, CalibrationSample, Coefficients, FeatureVector};
use crate::error::{Error, Result};
use crate::geometry::{ExclusionKind, ExclusionPolygon, ExclusionSet, Point, Polygon};
use crate::parcel::{LandState, ParcelRecord, ParcelSet};
use crate::scenario::{AdminLevel, CityRecord};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DensityModel {
    /// Density falls off exponentially with distance from the center.
    #[default]
    Decaying,
    Uniform,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthSpec {
    pub cities: usize,
    pub parcels_per_city: usize,
    pub parcel_size_m: f64,
    pub urban_seed_fraction: f64,
    pub density_model: DensityModel,
    /// Add a water strip over the east column of every city.
    pub exclusion_band: bool,
    /// Interior vertex displacement as a fraction of the parcel size, at most 0.25.
    pub jitter: f64,
    pub seed: u64,
}

impl Default for SynthSpec {
    fn default() -> Self {
        SynthSpec {
            cities: 1,
            parcels_per_city: 100,
            parcel_size_m: 200.0,
            urban_seed_fraction: 0.2,
            density_model: DensityModel::Decaying,
            exclusion_band: false,
            jitter: 0.0,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone)]
pub struct SynthData {
    pub parcels: ParcelSet<f64>,
    pub cities: Vec<CityRecord<f64>>,
    pub exclusions: ExclusionSet<f64>,
    /// Sum of generated parcel areas, km².
    pub total_area_km2: f64,
}

const CENTER_DENSITY: f64 = 5000.0;

impl SynthSpec {
    pub fn validate(&self) -> Result<()> {
        if self.cities == 0 {
            return Err(Error::Config("at least one city is required".into()));
        }
        if self.parcels_per_city < 4 {
            return Err(Error::Config("parcels_per_city must be at least 4".into()));
        }
        if !(self.parcel_size_m.is_finite() && self.parcel_size_m > 0.0) {
            return Err(Error::Config("parcel_size_m must be positive".into()));
        }
        if !(0.0..=1.0).contains(&self.urban_seed_fraction) {
            return Err(Error::Config("urban_seed_fraction must lie in [0, 1]".into()));
        }
        if !(0.0..=0.25).contains(&self.jitter) {
            return Err(Error::Config("jitter must lie in [0, 0.25]".into()));
        }
        Ok(())
    }

    /// Grid columns and rows of one city.
    pub fn grid_shape(&self) -> (usize, usize) {
        let n = self.parcels_per_city;
        let cols = (n as f64).sqrt().ceil() as usize;
        (cols, n.div_ceil(cols))
    }

    pub fn urban_per_city(&self) -> usize {
        (self.urban_seed_fraction * self.parcels_per_city as f64).round() as usize
    }
}

pub fn generate_synthetic(spec: &SynthSpec) -> Result<SynthData> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let s = spec.parcel_size_m;
    let n = spec.parcels_per_city;
    let (cols, rows) = spec.grid_shape();
    let gap = (4.0 * s).max(2000.0);
    let city_cols = (spec.cities as f64).sqrt().ceil() as usize;
    let width = cols as f64 * s;
    let height = rows as f64 * s;
    let n_urban = spec.urban_per_city();
    let width_digits = spec.cities.to_string().len().max(3);

    let mut parcels = Vec::with_capacity(spec.cities * n);
    let mut cities = Vec::with_capacity(spec.cities);
    let mut exclusions = Vec::new();
    let mut total = 0.0;
    let mut next_id = 1u64;

    for ci in 0..spec.cities {
        let ox = (ci % city_cols) as f64 * (width + gap);
        let oy = (ci / city_cols) as f64 * (height + gap);
        let center = Point::new(ox + width / 2.0, oy + height / 2.0);
        let city_id = format!("C{ci:0width_digits$}");

        let mut verts = Vec::with_capacity((cols + 1) * (rows + 1));
        for r in 0..=rows {
            for c in 0..=cols {
                let interior = r > 0 && r < rows && c > 0 && c < cols;
                let (dx, dy) = if interior && spec.jitter > 0.0 {
                    let j = spec.jitter * s;
                    (rng.gen_range(-j..=j), rng.gen_range(-j..=j))
                } else {
                    (0.0, 0.0)
                };
                verts.push(Point::new(ox + c as f64 * s + dx, oy + r as f64 * s + dy));
            }
        }
        let v = |r: usize, c: usize| verts[r * (cols + 1) + c];

        let cell_center = |k: usize| {
            let (r, c) = (k / cols, k % cols);
            Point::new(ox + (c as f64 + 0.5) * s, oy + (r as f64 + 0.5) * s)
        };
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&a, &b| {
            let da = cell_center(a).dist(center);
            let db = cell_center(b).dist(center);
            da.total_cmp(&db).then(a.cmp(&b))
        });
        let mut urban = vec![false; n];
        for &k in &order[..n_urban] {
            urban[k] = true;
        }

        let decay = 0.25 * (width * width + height * height).sqrt();
        let mut urban_km2 = 0.0;
        #[allow(clippy::needless_range_loop)]
        for k in 0..n {
            let (r, c) = (k / cols, k % cols);
            let poly = Polygon::new(vec![v(r, c), v(r, c + 1), v(r + 1, c + 1), v(r + 1, c)], vec![])?;
            let d = cell_center(k).dist(center);
            let density = match spec.density_model {
                DensityModel::Decaying => CENTER_DENSITY * (-d / decay).exp(),
                DensityModel::Uniform => CENTER_DENSITY / 10.0,
            };
            let area_km2 = poly.area() / 1e6;
            total += area_km2;
            let state = if urban[k] {
                urban_km2 += area_km2;
                LandState::Urban
            } else {
                LandState::NonUrban
            };
            parcels.push(ParcelRecord::new(next_id, city_id.clone(), poly, state, density));
            next_id += 1;
        }

        if spec.exclusion_band {
            let x0 = ox + (cols - 1) as f64 * s;
            let band = Polygon::rect(x0, oy - 0.5 * s, x0 + s, oy + height + 0.5 * s)?;
            exclusions.push(ExclusionPolygon { kind: ExclusionKind::Water, polygon: band });
        }

        let growth: f64 = rng.gen_range(0.02..0.15);
        let a2012 = if urban_km2 > 0.0 { urban_km2 } else { s * s / 1e6 };
        cities.push(CityRecord {
            city_id,
            name: format!("Synthetic {ci}"),
            admin_level: AdminLevel::ALL[ci % AdminLevel::ALL.len()],
            center,
            urban_area_2007: a2012 / (1.0 + growth).powi(5),
            urban_area_2012: a2012,
            in_urban_agglomeration: rng.gen_bool(0.5),
        });
    }

    Ok(SynthData { parcels: ParcelSet::new(parcels)?, cities, exclusions: ExclusionSet::new(exclusions), total_area_km2: total })
}

/// Labelled samples drawn from a logistic model with coefficients `w`.
///
/// Features are independent uniforms: `size_ln` on [-8, 8], `compact` on
/// [-3, 0.5], `center_km` on [0, 60], `density_std` on [0, 1].
pub fn planted_samples(n: usize, w: &Coefficients<f64>, seed: u64) -> Vec<CalibrationSample<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|_| {
            let features = FeatureVector::new(
                rng.gen_range(-8.0..8.0),
                rng.gen_range(-3.0..0.5),
                rng.gen_range(0.0..60.0),
                rng.gen_range(0.0..1.0),
            );
            let p = local_potential(&features, w);
            CalibrationSample { features, expanded: rng.gen::<f64>() < p }
        })
        .collect()
}
