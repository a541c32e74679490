//! GeoJSON feature collections: parcels, exclusions, and exported results.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use geojson::{Feature, FeatureCollection, GeoJson, Geometry, JsonObject, JsonValue, Value};
use serde::Serialize;

use super::Projection;
use crate::engine::SimulationResult;
use crate::error::{Error, Result};
use crate::geometry::{ExclusionKind, ExclusionPolygon, ExclusionSet, Point, Polygon};
use crate::metrics::{summarize, GroupBy};
use crate::parcel::{LandState, ParcelRecord, ParcelSet};
use crate::scenario::CityRecord;

#[derive(Debug, Clone, Copy, Default)]
pub struct LoadOptions {
    /// Skip features whose geometry cannot be validated instead of failing.
    pub skip_invalid: bool,
}

/// What ingestion changed or dropped.
#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct IngestReport {
    pub features: usize,
    pub loaded: usize,
    /// Features whose rings were closed or had repeated vertices removed.
    pub repaired: Vec<String>,
    /// `(feature, reason)` for skipped features.
    pub rejected: Vec<(String, String)>,
}

fn read_collection(path: &Path) -> Result<FeatureCollection> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    if text.trim().is_empty() {
        return Ok(FeatureCollection { bbox: None, features: Vec::new(), foreign_members: None });
    }
    match text.parse::<GeoJson>() {
        Ok(GeoJson::FeatureCollection(fc)) => Ok(fc),
        Ok(_) => Err(Error::schema(path.display().to_string(), "expected a FeatureCollection")),
        Err(e) => Err(Error::schema(path.display().to_string(), e.to_string())),
    }
}

fn feature_label(k: usize, f: &Feature) -> String {
    match f.properties.as_ref().and_then(|p| p.get("parcel_id")) {
        Some(id) => format!("feature #{k} (parcel_id {id})"),
        None => format!("feature #{k}"),
    }
}

fn property<'a>(f: &'a Feature, key: &str, label: &str) -> Result<&'a JsonValue> {
    f.properties
        .as_ref()
        .and_then(|p| p.get(key))
        .filter(|v| !v.is_null())
        .ok_or_else(|| Error::schema(label, format!("missing property '{key}'")))
}

fn as_u64(v: &JsonValue) -> Option<u64> {
    match v {
        JsonValue::Number(n) => n.as_u64(),
        JsonValue::String(s) => s.parse().ok(),
        _ => None,
    }
}

fn as_text(v: &JsonValue) -> Option<String> {
    match v {
        JsonValue::String(s) => Some(s.clone()),
        JsonValue::Number(n) => Some(n.to_string()),
        _ => None,
    }
}

fn polygon_rings(f: &Feature, label: &str) -> Result<Vec<Vec<Vec<Vec<f64>>>>> {
    let g = f.geometry.as_ref().ok_or_else(|| Error::schema(label, "missing geometry"))?;
    match &g.value {
        Value::Polygon(rings) => Ok(vec![rings.clone()]),
        Value::MultiPolygon(polys) => Ok(polys.clone()),
        _ => Err(Error::schema(label, "geometry must be a Polygon or MultiPolygon")),
    }
}

/// Build a polygon from GeoJSON rings, noting whether repair was needed.
fn to_polygon(rings: &[Vec<Vec<f64>>], proj: &Projection, label: &str) -> Result<(Polygon<f64>, bool)> {
    let mut pts: Vec<Vec<Point<f64>>> = Vec::with_capacity(rings.len());
    for ring in rings {
        let mut r = Vec::with_capacity(ring.len());
        for pos in ring {
            if pos.len() < 2 {
                return Err(Error::schema(label, "position with fewer than 2 coordinates"));
            }
            r.push(proj.forward(pos[0], pos[1]));
        }
        pts.push(r);
    }
    if pts.is_empty() {
        return Err(Error::schema(label, "polygon without rings"));
    }
    let repaired = pts.iter().any(|r| r.first() != r.last() || r.windows(2).any(|w| w[0] == w[1]));
    let mut iter = pts.into_iter();
    let exterior = iter.next().unwrap();
    let poly = Polygon::new(exterior, iter.collect()).map_err(|e| Error::data(label, e.to_string()))?;
    Ok((poly, repaired))
}

/// Load parcels, projecting to planar meters.
pub fn load_parcels(path: impl AsRef<Path>, proj: &Projection, opts: LoadOptions) -> Result<(ParcelSet<f64>, IngestReport)> {
    let path = path.as_ref();
    let fc = read_collection(path)?;
    let mut report = IngestReport { features: fc.features.len(), ..IngestReport::default() };
    let mut parcels = Vec::with_capacity(fc.features.len());
    for (k, f) in fc.features.iter().enumerate() {
        let label = feature_label(k, f);
        let parcel_id = as_u64(property(f, "parcel_id", &label)?)
            .ok_or_else(|| Error::schema(&label, "parcel_id must be a non-negative integer"))?;
        let city_id = as_text(property(f, "city_id", &label)?)
            .ok_or_else(|| Error::schema(&label, "city_id must be a string or number"))?;
        let state = match property(f, "state", &label)? {
            JsonValue::String(s) => s.parse::<LandState>().map_err(|m| Error::schema(&label, m))?,
            JsonValue::Number(n) if n.as_u64() == Some(1) => LandState::Urban,
            JsonValue::Number(n) if n.as_u64() == Some(0) => LandState::NonUrban,
            JsonValue::Bool(b) => {
                if *b {
                    LandState::Urban
                } else {
                    LandState::NonUrban
                }
            }
            other => return Err(Error::schema(&label, format!("bad state {other}"))),
        };
        let raw_density = property(f, "raw_density", &label)?
            .as_f64()
            .filter(|d| d.is_finite() && *d >= 0.0)
            .ok_or_else(|| Error::schema(&label, "raw_density must be a non-negative number"))?;
        let mut polys = polygon_rings(f, &label)?;
        if polys.len() != 1 {
            return Err(Error::schema(&label, "parcel geometry must be a single polygon"));
        }
        match to_polygon(&polys.pop().unwrap(), proj, &label) {
            Ok((polygon, repaired)) => {
                if repaired {
                    report.repaired.push(label);
                }
                parcels.push(ParcelRecord::new(parcel_id, city_id, polygon, state, raw_density));
            }
            Err(e) if opts.skip_invalid => report.rejected.push((label, e.to_string())),
            Err(e) => return Err(e),
        }
    }
    report.loaded = parcels.len();
    let set = ParcelSet::new(parcels).map_err(|e| match e {
        Error::Schema { location, message } => Error::schema(format!("{}: {location}", path.display()), message),
        other => other,
    })?;
    Ok((set, report))
}

/// Load steep-slope and water polygons; multipolygons split into parts.
pub fn load_exclusions(path: impl AsRef<Path>, proj: &Projection) -> Result<ExclusionSet<f64>> {
    let fc = read_collection(path.as_ref())?;
    let mut members = Vec::new();
    for (k, f) in fc.features.iter().enumerate() {
        let label = format!("exclusion feature #{k}");
        let tag = property(f, "tag", &label)?.as_str().ok_or_else(|| Error::schema(&label, "tag must be a string"))?;
        let kind: ExclusionKind = tag.parse().map_err(|m: String| Error::schema(&label, m))?;
        for rings in polygon_rings(f, &label)? {
            let (polygon, _) = to_polygon(&rings, proj, &label)?;
            members.push(ExclusionPolygon { kind, polygon });
        }
    }
    Ok(ExclusionSet::new(members))
}

fn geometry_of(p: &Polygon<f64>, proj: &Projection) -> Geometry {
    let rings = p
        .rings()
        .map(|r| {
            r.iter()
                .map(|&v| {
                    let (x, y) = proj.inverse(v);
                    vec![x, y]
                })
                .collect()
        })
        .collect();
    Geometry::new(Value::Polygon(rings))
}

fn collection(features: Vec<Feature>) -> String {
    let fc = FeatureCollection { bbox: None, features, foreign_members: None };
    let mut s = serde_json::to_string(&fc).expect("feature collection serializes");
    s.push('\n');
    s
}

fn feature(geometry: Geometry, props: JsonObject) -> Feature {
    Feature { bbox: None, geometry: Some(geometry), id: None, properties: Some(props), foreign_members: None }
}

pub fn parcels_to_geojson(parcels: &ParcelSet<f64>, proj: &Projection) -> String {
    collection(
        parcels
            .iter()
            .map(|p| {
                let mut props = JsonObject::new();
                props.insert("parcel_id".into(), p.parcel_id.into());
                props.insert("city_id".into(), p.city_id.clone().into());
                props.insert("state".into(), p.state.as_str().into());
                props.insert("raw_density".into(), p.raw_density.into());
                feature(geometry_of(&p.polygon, proj), props)
            })
            .collect(),
    )
}

pub fn exclusions_to_geojson(ex: &ExclusionSet<f64>, proj: &Projection) -> String {
    collection(
        ex.members()
            .iter()
            .map(|m| {
                let mut props = JsonObject::new();
                let tag = match m.kind {
                    ExclusionKind::Steep => "steep",
                    ExclusionKind::Water => "water",
                };
                props.insert("tag".into(), tag.into());
                feature(geometry_of(&m.polygon, proj), props)
            })
            .collect(),
    )
}

pub fn write_text(path: &Path, text: &str) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

/// Result map: every parcel with its start state and the calendar year it
/// converted (null if it did not). Coordinates go back through `proj`.
pub fn result_to_geojson(r: &SimulationResult<f64>, parcels: &ParcelSet<f64>, proj: &Projection, base_year: i32) -> String {
    let years = r.conversion_years();
    collection(
        parcels
            .iter()
            .map(|p| {
                let mut props = JsonObject::new();
                props.insert("parcel_id".into(), p.parcel_id.into());
                props.insert("city_id".into(), p.city_id.clone().into());
                props.insert("state_2012".into(), p.state.as_str().into());
                let converted = years.get(&p.parcel_id).map_or(JsonValue::Null, |&y| JsonValue::from(base_year + y as i32));
                props.insert("converted_year".into(), converted);
                props.insert("scenario".into(), r.scenario.as_str().into());
                feature(geometry_of(&p.polygon, proj), props)
            })
            .collect(),
    )
}

/// Per-parcel record read back from an exported result map.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ExportedParcel {
    pub state_2012: LandState,
    pub converted_year: Option<i32>,
}

pub fn load_export(path: impl AsRef<Path>) -> Result<BTreeMap<u64, ExportedParcel>> {
    let fc = read_collection(path.as_ref())?;
    let mut out = BTreeMap::new();
    for (k, f) in fc.features.iter().enumerate() {
        let label = feature_label(k, f);
        let id = as_u64(property(f, "parcel_id", &label)?).ok_or_else(|| Error::schema(&label, "bad parcel_id"))?;
        let state_2012 = property(f, "state_2012", &label)?
            .as_str()
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| Error::schema(&label, "bad state_2012"))?;
        let converted_year = match f.properties.as_ref().and_then(|p| p.get("converted_year")) {
            None | Some(JsonValue::Null) => None,
            Some(v) => Some(v.as_i64().ok_or_else(|| Error::schema(&label, "converted_year must be an integer or null"))? as i32),
        };
        if out.insert(id, ExportedParcel { state_2012, converted_year }).is_some() {
            return Err(Error::schema(label, "duplicate parcel id"));
        }
    }
    Ok(out)
}

/// `out.geojson` -> `out.summary.csv`.
pub fn summary_path(output: &Path) -> PathBuf {
    output.with_extension("summary.csv")
}

/// Write the result map to `path` and the city/group summary next to it.
/// Returns the summary path.
pub fn export_result(
    r: &SimulationResult<f64>,
    parcels: &ParcelSet<f64>,
    cities: &[CityRecord<f64>],
    proj: &Projection,
    base_year: i32,
    path: &Path,
) -> Result<PathBuf> {
    write_text(path, &result_to_geojson(r, parcels, proj, base_year))?;
    let summary = summarize(r, cities, Some(GroupBy::UrbanAgglomeration))?;
    let sp = summary_path(path);
    write_text(&sp, &summary.to_csv())?;
    Ok(sp)
}
