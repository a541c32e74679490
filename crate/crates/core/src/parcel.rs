//! Parcels, the cells of the automaton.

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::calibration::FeatureVector;
use crate::error::{Error, Result};
use crate::geometry::Polygon;
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LandState {
    NonUrban,
    Urban,
}

impl LandState {
    pub fn is_urban(self) -> bool {
        self == LandState::Urban
    }

    pub fn as_str(self) -> &'static str {
        match self {
            LandState::Urban => "urban",
            LandState::NonUrban => "non-urban",
        }
    }
}

impl std::str::FromStr for LandState {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "urban" | "1" => Ok(LandState::Urban),
            "non-urban" | "nonurban" | "0" => Ok(LandState::NonUrban),
            other => Err(format!("unknown state '{other}' (expected urban|non-urban)")),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(bound(deserialize = "T: Scalar + Deserialize<'de>"))]
pub struct ParcelRecord<T: Scalar> {
    pub parcel_id: u64,
    pub city_id: String,
    pub polygon: Polygon<T>,
    pub state: LandState,
    /// POIs per km².
    pub raw_density: T,
    /// Filled in by [`crate::calibration::prepare_parcels`].
    #[serde(default)]
    pub features: Option<FeatureVector<T>>,
    #[serde(default)]
    pub excluded: bool,
}

impl<T: Scalar> ParcelRecord<T> {
    pub fn new(parcel_id: u64, city_id: impl Into<String>, polygon: Polygon<T>, state: LandState, raw_density: T) -> Self {
        ParcelRecord { parcel_id, city_id: city_id.into(), polygon, state, raw_density, features: None, excluded: false }
    }

    pub fn area_km2(&self) -> T {
        self.polygon.area() / T::lit(1e6)
    }
}

/// Parcels sorted by id with uniqueness checked. Position in this set is the
/// parcel's index in the neighbor graph.
#[derive(Debug, Clone)]
pub struct ParcelSet<T: Scalar> {
    parcels: Vec<ParcelRecord<T>>,
}

impl<T: Scalar> ParcelSet<T> {
    pub fn new(mut parcels: Vec<ParcelRecord<T>>) -> Result<Self> {
        parcels.sort_by_key(|p| p.parcel_id);
        if let Some(w) = parcels.windows(2).find(|w| w[0].parcel_id == w[1].parcel_id) {
            return Err(Error::schema(format!("parcel_id {}", w[0].parcel_id), "duplicate parcel id"));
        }
        Ok(ParcelSet { parcels })
    }

    pub fn len(&self) -> usize {
        self.parcels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.parcels.is_empty()
    }

    pub fn as_slice(&self) -> &[ParcelRecord<T>] {
        &self.parcels
    }

    pub fn iter(&self) -> std::slice::Iter<'_, ParcelRecord<T>> {
        self.parcels.iter()
    }

    pub fn get(&self, index: usize) -> Option<&ParcelRecord<T>> {
        self.parcels.get(index)
    }

    pub fn index_of(&self, parcel_id: u64) -> Option<usize> {
        self.parcels.binary_search_by_key(&parcel_id, |p| p.parcel_id).ok()
    }

    pub(crate) fn parcels_mut(&mut self) -> &mut [ParcelRecord<T>] {
        &mut self.parcels
    }

    pub fn into_vec(self) -> Vec<ParcelRecord<T>> {
        self.parcels
    }

    /// SHA-256 over ids, city ids, and every stored vertex, in canonical
    /// order. States and densities are not included.
    pub fn digest(&self) -> String {
        let mut h = Sha256::new();
        h.update((self.parcels.len() as u64).to_le_bytes());
        for p in &self.parcels {
            h.update(p.parcel_id.to_le_bytes());
            h.update((p.city_id.len() as u64).to_le_bytes());
            h.update(p.city_id.as_bytes());
            h.update((p.polygon.rings().count() as u64).to_le_bytes());
            for ring in p.polygon.rings() {
                h.update((ring.len() as u64).to_le_bytes());
                for v in ring {
                    h.update(v.x.as_f64().to_le_bytes());
                    h.update(v.y.as_f64().to_le_bytes());
                }
            }
        }
        hex::encode(h.finalize())
    }
}

impl<'a, T: Scalar> IntoIterator for &'a ParcelSet<T> {
    type Item = &'a ParcelRecord<T>;
    type IntoIter = std::slice::Iter<'a, ParcelRecord<T>>;
    fn into_iter(self) -> Self::IntoIter {
        self.parcels.iter()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parcel(id: u64) -> ParcelRecord<f64> {
        let x = id as f64 * 10.0;
        ParcelRecord::new(id, "c1", Polygon::rect(x, 0.0, x + 10.0, 10.0).unwrap(), LandState::NonUrban, 5.0)
    }

    #[test]
    fn sorted_and_unique() {
        let s = ParcelSet::new(vec![parcel(3), parcel(1), parcel(2)]).unwrap();
        let ids: Vec<u64> = s.iter().map(|p| p.parcel_id).collect();
        assert_eq!(ids, vec![1, 2, 3]);
        assert_eq!(s.index_of(3), Some(2));
        let dup = ParcelSet::new(vec![parcel(1), parcel(1)]).unwrap_err();
        assert!(dup.to_string().contains("parcel_id 1"));
    }

    #[test]
    fn digest_ignores_input_order_but_not_geometry() {
        let a = ParcelSet::new(vec![parcel(1), parcel(2)]).unwrap();
        let b = ParcelSet::new(vec![parcel(2), parcel(1)]).unwrap();
        assert_eq!(a.digest(), b.digest());
        let mut moved = parcel(2);
        moved.polygon = Polygon::rect(20.0, 0.0, 30.0, 10.000001).unwrap();
        let c = ParcelSet::new(vec![parcel(1), moved]).unwrap();
        assert_ne!(a.digest(), c.digest());
    }
}
