//! Parcel neighbor graph: which parcels lie within the neighborhood radius
//! of each other. Built once per parcel set and cached on disk.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{within_distance, Bbox, Point, SpatialIndex};
use crate::parcel::ParcelSet;
use crate::scalar::Scalar;

pub const DEFAULT_RADIUS_M: f64 = 500.0;
const MAGIC: &str = "PCA-NG";
const VERSION: &str = "v1";

/// How "within the radius" is measured between two parcels.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DistanceMode {
    /// Minimum distance between polygon boundaries.
    #[default]
    Boundary,
    /// Distance between area centroids.
    Centroid,
}

/// Symmetric adjacency over canonical parcel indices (see [`ParcelSet`]).
#[derive(Debug, Clone, PartialEq)]
pub struct NeighborGraph {
    radius_m: f64,
    digest: String,
    adjacency: Vec<Vec<u32>>,
}

impl NeighborGraph {
    /// Assemble a graph, checking symmetry, ids, and sortedness.
    pub fn from_adjacency(radius_m: f64, digest: String, adjacency: Vec<Vec<u32>>) -> Result<Self> {
        let g = NeighborGraph { radius_m, digest, adjacency };
        g.validate().map_err(|(_, message)| Error::Format { line: None, message })?;
        Ok(g)
    }

    pub fn parcel_count(&self) -> usize {
        self.adjacency.len()
    }

    pub fn radius_m(&self) -> f64 {
        self.radius_m
    }

    pub fn digest(&self) -> &str {
        &self.digest
    }

    pub fn neighbors(&self, index: usize) -> Result<&[u32]> {
        self.adjacency.get(index).map(Vec::as_slice).ok_or(Error::Lookup(index))
    }

    pub fn edge_count(&self) -> usize {
        self.adjacency.iter().map(Vec::len).sum::<usize>() / 2
    }

    /// Undirected edges `(i, j)` with `i < j`, ascending.
    pub fn edges(&self) -> impl Iterator<Item = (u32, u32)> + '_ {
        self.adjacency.iter().enumerate().flat_map(|(i, ns)| {
            let i = i as u32;
            ns.iter().filter(move |&&j| j > i).map(move |&j| (i, j))
        })
    }

    /// First inconsistency found, as `(parcel index, message)`.
    fn validate(&self) -> std::result::Result<(), (usize, String)> {
        let n = self.adjacency.len();
        for (i, ns) in self.adjacency.iter().enumerate() {
            for w in ns.windows(2) {
                if w[0] >= w[1] {
                    return Err((i, format!("neighbors of {i} not strictly ascending")));
                }
            }
            for &j in ns {
                let j = j as usize;
                if j >= n {
                    return Err((i, format!("neighbor {j} of {i} out of range (parcel_count {n})")));
                }
                if j == i {
                    return Err((i, format!("self-loop on {i}")));
                }
                if self.adjacency[j].binary_search(&(i as u32)).is_err() {
                    return Err((i, format!("edge {i}->{j} has no reverse edge")));
                }
            }
        }
        Ok(())
    }

    /// Serialize to the cache text format.
    pub fn to_cache_string(&self) -> String {
        let mut s = String::with_capacity(32 + self.adjacency.len() * 16);
        writeln!(s, "{MAGIC} {VERSION} {} {} {}", self.radius_m, self.adjacency.len(), self.digest).unwrap();
        for (i, ns) in self.adjacency.iter().enumerate() {
            write!(s, "{i}:").unwrap();
            for (k, j) in ns.iter().enumerate() {
                if k > 0 {
                    s.push(',');
                }
                write!(s, "{j}").unwrap();
            }
            s.push('\n');
        }
        s
    }

    /// Parse the cache text format without checking the digest.
    pub fn parse_cache(text: &str) -> Result<Self> {
        let fmt = |line: usize, message: String| Error::Format { line: Some(line), message };
        let mut lines = text.split('\n');
        let header = lines.next().ok_or_else(|| fmt(1, "empty file".into()))?;
        let fields: Vec<&str> = header.split(' ').collect();
        if fields.len() != 5 || fields[0] != MAGIC || fields[1] != VERSION {
            return Err(fmt(1, format!("bad header '{header}'")));
        }
        let radius_m: f64 = fields[2].parse().map_err(|_| fmt(1, format!("bad radius '{}'", fields[2])))?;
        let count: usize = fields[3].parse().map_err(|_| fmt(1, format!("bad parcel count '{}'", fields[3])))?;
        let digest = fields[4];
        if digest.len() != 64 || !digest.bytes().all(|b| b.is_ascii_hexdigit()) {
            return Err(fmt(1, "digest is not 64 hex characters".into()));
        }
        let mut adjacency = Vec::with_capacity(count);
        for i in 0..count {
            let lineno = i + 2;
            let line = lines.next().ok_or_else(|| fmt(lineno, format!("truncated: expected {count} parcel lines")))?;
            let (id, rest) = line.split_once(':').ok_or_else(|| fmt(lineno, "missing ':'".into()))?;
            if id.parse::<usize>().ok() != Some(i) {
                return Err(fmt(lineno, format!("expected parcel {i}, found '{id}'")));
            }
            let ns = if rest.is_empty() {
                Vec::new()
            } else {
                rest.split(',')
                    .map(|t| t.parse::<u32>().map_err(|_| fmt(lineno, format!("bad neighbor id '{t}'"))))
                    .collect::<Result<Vec<u32>>>()?
            };
            adjacency.push(ns);
        }
        // the final newline leaves exactly one empty trailing piece
        match (lines.next(), lines.next()) {
            (Some(""), None) => {}
            _ => return Err(fmt(count + 2, "missing final newline or trailing data".into())),
        }
        let g = NeighborGraph { radius_m, digest: digest.to_string(), adjacency };
        g.validate().map_err(|(i, message)| fmt(i + 2, message))?;
        Ok(g)
    }
}

/// Build the neighbor graph. Parcels only neighbor parcels of the same city.
pub fn compute_neighbors<T: Scalar>(parcels: &ParcelSet<T>, radius: T, mode: DistanceMode) -> Result<NeighborGraph> {
    if !(radius > T::zero()) || !radius.is_finite() {
        return Err(Error::Config(format!("neighbor radius must be positive, got {radius}")));
    }
    let list = parcels.as_slice();
    let mut by_city: BTreeMap<&str, Vec<usize>> = BTreeMap::new();
    for (i, p) in list.iter().enumerate() {
        by_city.entry(p.city_id.as_str()).or_default().push(i);
    }
    let centroids: Vec<Point<T>> = match mode {
        DistanceMode::Centroid => list.par_iter().map(|p| p.polygon.centroid()).collect(),
        DistanceMode::Boundary => Vec::new(),
    };
    let slack = radius * T::lit(1e-9) + T::epsilon();

    // forward edges i -> j with j > i, per parcel
    let forward: Vec<(usize, Vec<u32>)> = by_city
        .into_par_iter()
        .flat_map_iter(|(_, members)| {
            let boxes: Vec<Bbox<T>> = match mode {
                DistanceMode::Boundary => members.iter().map(|&i| list[i].polygon.bbox()).collect(),
                DistanceMode::Centroid => members.iter().map(|&i| Bbox::of_points(std::iter::once(&centroids[i]))).collect(),
            };
            let index = SpatialIndex::from_bboxes(boxes.iter().copied());
            let rows: Vec<(usize, Vec<u32>)> = members
                .par_iter()
                .enumerate()
                .map(|(local, &i)| {
                    let window = boxes[local].expand(radius + slack);
                    let ns = index
                        .query(&window)
                        .into_iter()
                        .map(|l| members[l])
                        .filter(|&j| j > i)
                        .filter(|&j| match mode {
                            DistanceMode::Boundary => within_distance(&list[i].polygon, &list[j].polygon, radius),
                            DistanceMode::Centroid => centroids[i].dist(centroids[j]) <= radius,
                        })
                        .map(|j| j as u32)
                        .collect();
                    (i, ns)
                })
                .collect();
            rows
        })
        .collect();

    let mut adjacency: Vec<Vec<u32>> = vec![Vec::new(); list.len()];
    for (i, ns) in &forward {
        for &j in ns {
            adjacency[*i].push(j);
            adjacency[j as usize].push(*i as u32);
        }
    }
    adjacency.par_iter_mut().for_each(|ns| ns.sort_unstable());
    let g = NeighborGraph { radius_m: radius.as_f64(), digest: parcels.digest(), adjacency };
    debug_assert!(g.validate().is_ok());
    Ok(g)
}

pub fn save_graph(g: &NeighborGraph, path: impl AsRef<Path>) -> Result<()> {
    crate::io::write_text(path.as_ref(), &g.to_cache_string())
}

/// Load a cached graph, refusing it unless it was built from `parcels`.
pub fn load_graph<T: Scalar>(path: impl AsRef<Path>, parcels: &ParcelSet<T>) -> Result<NeighborGraph> {
    let path = path.as_ref();
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    let text = String::from_utf8(bytes).map_err(|_| Error::Format { line: None, message: "cache file is not UTF-8".into() })?;
    let g = NeighborGraph::parse_cache(&text)?;
    let current = parcels.digest();
    if g.digest != current {
        return Err(Error::StaleCache { stored: g.digest, current });
    }
    if g.parcel_count() != parcels.len() {
        return Err(Error::Format {
            line: Some(1),
            message: format!("parcel count {} does not match {} parcels", g.parcel_count(), parcels.len()),
        });
    }
    Ok(g)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Polygon;
    use crate::parcel::{LandState, ParcelRecord};

    fn square_set(xs: &[(u64, &str, f64)]) -> ParcelSet<f64> {
        ParcelSet::new(
            xs.iter()
                .map(|&(id, city, x)| {
                    ParcelRecord::new(id, city, Polygon::rect(x, 0.0, x + 100.0, 100.0).unwrap(), LandState::NonUrban, 1.0)
                })
                .collect(),
        )
        .unwrap()
    }

    #[test]
    fn gap_of_400_is_neighbor_600_is_not() {
        let near = square_set(&[(1, "a", 0.0), (2, "a", 500.0)]);
        let g = compute_neighbors(&near, 500.0, DistanceMode::Boundary).unwrap();
        assert_eq!(g.neighbors(0).unwrap(), &[1]);
        assert_eq!(g.neighbors(1).unwrap(), &[0]);
        let far = square_set(&[(1, "a", 0.0), (2, "a", 700.0)]);
        let g = compute_neighbors(&far, 500.0, DistanceMode::Boundary).unwrap();
        assert!(g.neighbors(0).unwrap().is_empty());
        assert!(g.neighbors(1).unwrap().is_empty());
    }

    #[test]
    fn no_cross_city_edges() {
        let s = square_set(&[(1, "a", 0.0), (2, "b", 100.0)]);
        let g = compute_neighbors(&s, 500.0, DistanceMode::Boundary).unwrap();
        assert_eq!(g.edge_count(), 0);
    }

    #[test]
    fn centroid_mode() {
        let s = square_set(&[(1, "a", 0.0), (2, "a", 450.0)]);
        let g = compute_neighbors(&s, 500.0, DistanceMode::Centroid).unwrap();
        assert_eq!(g.edge_count(), 1);
        let g = compute_neighbors(&s, 449.0, DistanceMode::Centroid).unwrap();
        assert_eq!(g.edge_count(), 0);
    }

    #[test]
    fn rejects_bad_radius() {
        let s = square_set(&[(1, "a", 0.0)]);
        assert!(matches!(compute_neighbors(&s, 0.0, DistanceMode::Boundary), Err(Error::Config(_))));
    }

    #[test]
    fn cache_text_roundtrip_and_errors() {
        let s = square_set(&[(1, "a", 0.0), (2, "a", 150.0), (3, "a", 300.0), (4, "a", 5000.0)]);
        let g = compute_neighbors(&s, 100.0, DistanceMode::Boundary).unwrap();
        let text = g.to_cache_string();
        assert!(text.starts_with(&format!("PCA-NG v1 100 4 {}\n0:1\n1:0,2\n", s.digest())));
        assert_eq!(NeighborGraph::parse_cache(&text).unwrap(), g);

        let truncated = &text[..text.len() - 4];
        assert!(matches!(NeighborGraph::parse_cache(truncated), Err(Error::Format { .. })));
        let asym = text.replace("1:0,2", "1:2");
        assert!(matches!(NeighborGraph::parse_cache(&asym), Err(Error::Format { .. })));
        assert!(NeighborGraph::parse_cache("PCA-NG v2 1 0 x\n").is_err());
    }

    #[test]
    fn empty_graph_roundtrip() {
        let s: ParcelSet<f64> = ParcelSet::new(vec![]).unwrap();
        let g = compute_neighbors(&s, 500.0, DistanceMode::Boundary).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("g.txt");
        save_graph(&g, &path).unwrap();
        assert_eq!(load_graph(&path, &s).unwrap(), g);
    }
}
