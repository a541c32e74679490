//! Geographic ⇄ planar projections on a spherical earth.

use serde::{Deserialize, Serialize};

use crate::geometry::Point;

const EARTH_RADIUS_M: f64 = 6_371_008.8;
const WEB_MERCATOR_RADIUS_M: f64 = 6_378_137.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Projection {
    /// Input coordinates are already planar meters.
    Identity,
    WebMercator,
    /// Albers equal-area conic; areas are preserved, which keeps parcel
    /// sizes and urban totals honest.
    Albers {
        lon0: f64,
        lat0: f64,
        lat1: f64,
        lat2: f64,
    },
}

impl Default for Projection {
    /// Albers with standard parallels suited to mainland China.
    fn default() -> Self {
        Projection::Albers { lon0: 105.0, lat0: 0.0, lat1: 25.0, lat2: 47.0 }
    }
}

struct AlbersConsts {
    n: f64,
    c: f64,
    rho0: f64,
    lon0: f64,
}

fn albers(lon0: f64, lat0: f64, lat1: f64, lat2: f64) -> AlbersConsts {
    let (p0, p1, p2) = (lat0.to_radians(), lat1.to_radians(), lat2.to_radians());
    let n = (p1.sin() + p2.sin()) / 2.0;
    let c = p1.cos().powi(2) + 2.0 * n * p1.sin();
    let rho0 = EARTH_RADIUS_M * (c - 2.0 * n * p0.sin()).sqrt() / n;
    AlbersConsts { n, c, rho0, lon0: lon0.to_radians() }
}

impl Projection {
    /// `(lon, lat)` in degrees → planar meters.
    pub fn forward(&self, lon: f64, lat: f64) -> Point<f64> {
        match *self {
            Projection::Identity => Point::new(lon, lat),
            Projection::WebMercator => {
                let x = WEB_MERCATOR_RADIUS_M * lon.to_radians();
                let y = WEB_MERCATOR_RADIUS_M * (std::f64::consts::FRAC_PI_4 + lat.to_radians() / 2.0).tan().ln();
                Point::new(x, y)
            }
            Projection::Albers { lon0, lat0, lat1, lat2 } => {
                let k = albers(lon0, lat0, lat1, lat2);
                let rho = EARTH_RADIUS_M * (k.c - 2.0 * k.n * lat.to_radians().sin()).sqrt() / k.n;
                let theta = k.n * (lon.to_radians() - k.lon0);
                Point::new(rho * theta.sin(), k.rho0 - rho * theta.cos())
            }
        }
    }

    /// Planar meters → `(lon, lat)` in degrees.
    pub fn inverse(&self, p: Point<f64>) -> (f64, f64) {
        match *self {
            Projection::Identity => (p.x, p.y),
            Projection::WebMercator => {
                let lon = (p.x / WEB_MERCATOR_RADIUS_M).to_degrees();
                let lat = (2.0 * (p.y / WEB_MERCATOR_RADIUS_M).exp().atan() - std::f64::consts::FRAC_PI_2).to_degrees();
                (lon, lat)
            }
            Projection::Albers { lon0, lat0, lat1, lat2 } => {
                let k = albers(lon0, lat0, lat1, lat2);
                let dy = k.rho0 - p.y;
                let rho = (p.x * p.x + dy * dy).sqrt() * k.n.signum();
                let theta = (p.x * k.n.signum()).atan2(dy * k.n.signum());
                let s = (k.c - (rho * k.n / EARTH_RADIUS_M).powi(2)) / (2.0 * k.n);
                let lat = s.clamp(-1.0, 1.0).asin().to_degrees();
                let lon = (k.lon0 + theta / k.n).to_degrees();
                (lon, lat)
            }
        }
    }

    pub fn is_geographic_input(&self) -> bool {
        !matches!(self, Projection::Identity)
    }
}
