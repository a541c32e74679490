//! CSV tables (cities, calibration samples, custom rates) and the
//! coefficients JSON file.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use super::Projection;
use crate::calibration::{CalibrationSample, Coefficients, FeatureVector};
use crate::error::{Error, Result};
use crate::scenario::{AdminLevel, CityRecord};

pub const CITY_HEADER: [&str; 8] =
    ["city_id", "name", "admin_level", "center_x", "center_y", "area2007_km2", "area2012_km2", "in_ua"];
pub const SAMPLE_HEADER: [&str; 5] = ["size_ln", "compact", "center_km", "density_std", "label"];

fn open_csv(path: &Path, expected: &[&str]) -> Result<csv::Reader<std::fs::File>> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(file);
    let header = rdr.headers().map_err(|e| Error::schema(format!("{}:1", path.display()), e.to_string()))?;
    if header.iter().ne(expected.iter().copied()) {
        return Err(Error::schema(format!("{}:1", path.display()), format!("expected header '{}'", expected.join(","))));
    }
    Ok(rdr)
}

fn records(path: &Path, rdr: &mut csv::Reader<std::fs::File>) -> Result<Vec<(String, csv::StringRecord)>> {
    let mut out = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| {
            let line = e.position().map_or(0, |p| p.line());
            Error::data(format!("{}:{line}", path.display()), e.to_string())
        })?;
        let line = rec.position().map_or(0, |p| p.line());
        out.push((format!("{}:{line}", path.display()), rec));
    }
    Ok(out)
}

fn number(loc: &str, field: &str, v: &str) -> Result<f64> {
    v.parse::<f64>()
        .ok()
        .filter(|x| x.is_finite())
        .ok_or_else(|| Error::data(loc, format!("{field} '{v}' is not a finite number")))
}

/// City table. Centers are projected with `proj` like parcel coordinates.
pub fn load_cities(path: impl AsRef<Path>, proj: &Projection) -> Result<Vec<CityRecord<f64>>> {
    let path = path.as_ref();
    let mut rdr = open_csv(path, &CITY_HEADER)?;
    let mut cities: Vec<CityRecord<f64>> = Vec::new();
    let mut seen = std::collections::HashSet::new();
    for (loc, r) in records(path, &mut rdr)? {
        let admin_level: AdminLevel = r[2].parse().map_err(|m: String| Error::data(&loc, m))?;
        let cx = number(&loc, "center_x", &r[3])?;
        let cy = number(&loc, "center_y", &r[4])?;
        let a07 = number(&loc, "area2007_km2", &r[5])?;
        let a12 = number(&loc, "area2012_km2", &r[6])?;
        if a07 <= 0.0 || a12 <= 0.0 {
            return Err(Error::data(&loc, "urban areas must be positive"));
        }
        let in_ua = match &r[7] {
            "1" => true,
            "0" => false,
            other => return Err(Error::data(&loc, format!("in_ua must be 0 or 1, got '{other}'"))),
        };
        if r[0].is_empty() || !seen.insert(r[0].to_string()) {
            return Err(Error::data(&loc, format!("empty or duplicate city_id '{}'", &r[0])));
        }
        cities.push(CityRecord {
            city_id: r[0].to_string(),
            name: r[1].to_string(),
            admin_level,
            center: proj.forward(cx, cy),
            urban_area_2007: a07,
            urban_area_2012: a12,
            in_urban_agglomeration: in_ua,
        });
    }
    Ok(cities)
}

pub fn cities_to_csv(cities: &[CityRecord<f64>], proj: &Projection) -> String {
    let mut s = CITY_HEADER.join(",");
    s.push('\n');
    for c in cities {
        let (x, y) = proj.inverse(c.center);
        writeln!(
            s,
            "{},{},{},{},{},{},{},{}",
            c.city_id,
            c.name,
            c.admin_level.as_str(),
            x,
            y,
            c.urban_area_2007,
            c.urban_area_2012,
            u8::from(c.in_urban_agglomeration)
        )
        .unwrap();
    }
    s
}

/// Number of cities per administrative level.
pub fn admin_level_counts(cities: &[CityRecord<f64>]) -> BTreeMap<AdminLevel, usize> {
    let mut m: BTreeMap<AdminLevel, usize> = AdminLevel::ALL.iter().map(|&l| (l, 0)).collect();
    for c in cities {
        *m.entry(c.admin_level).or_default() += 1;
    }
    m
}

pub fn load_samples(path: impl AsRef<Path>) -> Result<Vec<CalibrationSample<f64>>> {
    let path = path.as_ref();
    let mut rdr = open_csv(path, &SAMPLE_HEADER)?;
    let mut out = Vec::new();
    for (loc, r) in records(path, &mut rdr)? {
        let mut f = [0.0; 4];
        for (k, v) in f.iter_mut().enumerate() {
            *v = number(&loc, SAMPLE_HEADER[k], &r[k])?;
        }
        let expanded = match &r[4] {
            "1" => true,
            "0" => false,
            other => return Err(Error::data(&loc, format!("label must be 0 or 1, got '{other}'"))),
        };
        if !(0.0..=1.0).contains(&f[3]) {
            return Err(Error::data(&loc, "density_std must lie in [0, 1]"));
        }
        out.push(CalibrationSample { features: FeatureVector::from_array(f), expanded });
    }
    Ok(out)
}

pub fn samples_to_csv(samples: &[CalibrationSample<f64>]) -> String {
    let mut s = SAMPLE_HEADER.join(",");
    s.push('\n');
    for x in samples {
        let f = x.features;
        writeln!(s, "{},{},{},{},{}", f.size_ln, f.compact, f.center_km, f.density_std, u8::from(x.expanded)).unwrap();
    }
    s
}

/// `city_id,rate` table for the custom scenario.
pub fn load_custom_rates(path: impl AsRef<Path>) -> Result<BTreeMap<String, f64>> {
    let path = path.as_ref();
    let mut rdr = open_csv(path, &["city_id", "rate"])?;
    let mut out = BTreeMap::new();
    for (loc, r) in records(path, &mut rdr)? {
        let rate = number(&loc, "rate", &r[1])?;
        if out.insert(r[0].to_string(), rate).is_some() {
            return Err(Error::data(&loc, format!("duplicate city_id '{}'", &r[0])));
        }
    }
    Ok(out)
}

pub fn load_coefficients(path: impl AsRef<Path>) -> Result<Coefficients<f64>> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let c: Coefficients<f64> =
        serde_json::from_str(&text).map_err(|e| Error::schema(path.display().to_string(), e.to_string()))?;
    if !c.is_finite() {
        return Err(Error::data(path.display().to_string(), "coefficients must be finite"));
    }
    Ok(c)
}

pub fn coefficients_to_json(c: &Coefficients<f64>) -> String {
    let mut s = serde_json::to_string_pretty(c).expect("coefficients serialize");
    s.push('\n');
    s
}
